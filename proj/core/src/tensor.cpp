#include "lpp/tensor.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "lpp/error.hpp"

namespace lpp {
namespace {

constexpr std::size_t kFixedHeader = 8;  // magic + version + dtype + ndim
constexpr std::size_t kReadChunk = std::size_t{1} << 20;

std::size_t scalar_size(DType dtype) { return dtype == DType::f16 ? 2 : 4; }

void put_u16(std::vector<char>& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::vector<char>& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) {
    out.push_back(static_cast<char>((v >> shift) & 0xff));
  }
}

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void read_exact(std::istream& in, unsigned char* dst, std::size_t n) {
  in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw FormatError("unexpected end of stream");
  }
}

}  // namespace

std::size_t TensorBlob::element_count() const {
  if (dims.empty()) return 0;
  std::size_t count = 1;
  for (auto d : dims) count *= d;
  return count;
}

bool TensorBlob::all_finite() const {
  return std::all_of(data.begin(), data.end(), [](float v) { return std::isfinite(v); });
}

std::span<const float> TensorBlob::row(std::size_t r) const {
  const std::size_t cols = dims.at(1);
  return std::span<const float>(data).subspan(r * cols, cols);
}

std::size_t tensor_header_size(std::size_t ndim) {
  const std::size_t raw = kFixedHeader + 4 * ndim;
  return (raw + 7) / 8 * 8;
}

// Round-to-nearest-even narrowing (F. Giesen's float_to_half_fast3_rtne).
std::uint16_t float_to_half(float value) {
  constexpr std::uint32_t kF32Inf = 255u << 23;
  constexpr std::uint32_t kF16Max = (127u + 16u) << 23;
  constexpr std::uint32_t kDenormMagic = ((127u - 15u) + (23u - 10u) + 1u) << 23;

  std::uint32_t u = std::bit_cast<std::uint32_t>(value);
  const std::uint32_t sign = u & 0x80000000u;
  u ^= sign;
  std::uint32_t out;
  if (u >= kF16Max) {
    out = u > kF32Inf ? 0x7e00u : 0x7c00u;
  } else if (u < (113u << 23)) {
    const float shifted = std::bit_cast<float>(u) + std::bit_cast<float>(kDenormMagic);
    out = std::bit_cast<std::uint32_t>(shifted) - kDenormMagic;
  } else {
    const std::uint32_t mant_odd = (u >> 13) & 1u;
    u += (static_cast<std::uint32_t>(15 - 127) << 23) + 0xfffu;
    u += mant_odd;
    out = u >> 13;
  }
  return static_cast<std::uint16_t>(out | (sign >> 16));
}

float half_to_float(std::uint16_t bits) {
  const std::uint32_t sign = static_cast<std::uint32_t>(bits & 0x8000u) << 16;
  const std::uint32_t exponent = (bits >> 10) & 0x1fu;
  const std::uint32_t mantissa = bits & 0x3ffu;
  if (exponent == 0) {
    const float magnitude = std::ldexp(static_cast<float>(mantissa), -24);
    return sign ? -magnitude : magnitude;
  }
  if (exponent == 31) {
    return std::bit_cast<float>(sign | 0x7f800000u | (mantissa << 13));
  }
  return std::bit_cast<float>(sign | ((exponent + 112u) << 23) | (mantissa << 13));
}

std::size_t write_tensor(const TensorBlob& blob, std::ostream& sink) {
  if (blob.dims.empty() || blob.dims.size() > kMaxTensorRank) {
    throw PreconditionError("tensor rank must be in [1, 4], got " +
                            std::to_string(blob.dims.size()));
  }
  for (auto d : blob.dims) {
    if (d > std::numeric_limits<std::uint32_t>::max()) {
      throw PreconditionError("tensor dimension overflows u32: " + std::to_string(d));
    }
  }
  if (blob.element_count() != blob.data.size()) {
    throw PreconditionError("tensor dims describe " + std::to_string(blob.element_count()) +
                            " scalars but " + std::to_string(blob.data.size()) + " are stored");
  }
  if (blob.dtype != DType::f32 && blob.dtype != DType::f16) {
    throw PreconditionError("unsupported dtype");
  }

  const std::size_t header = tensor_header_size(blob.dims.size());
  std::vector<char> bytes;
  bytes.reserve(header + blob.data.size() * scalar_size(blob.dtype));
  bytes.insert(bytes.end(), std::begin(kTensorMagic), std::end(kTensorMagic));
  put_u16(bytes, kTensorVersion);
  bytes.push_back(static_cast<char>(blob.dtype));
  bytes.push_back(static_cast<char>(blob.dims.size()));
  for (auto d : blob.dims) put_u32(bytes, static_cast<std::uint32_t>(d));
  bytes.resize(header, '\0');

  for (float v : blob.data) {
    if (!std::isfinite(v)) throw PreconditionError("non-finite scalar");
    if (blob.dtype == DType::f32) {
      put_u32(bytes, std::bit_cast<std::uint32_t>(v));
    } else {
      const std::uint16_t h = float_to_half(v);
      if ((h & 0x7c00u) == 0x7c00u) throw PreconditionError("non-finite scalar (f16 overflow)");
      put_u16(bytes, h);
    }
  }

  sink.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!sink) throw Error("failed to write tensor bytes");
  return bytes.size();
}

TensorBlob read_tensor(std::istream& source) {
  std::array<unsigned char, kFixedHeader> fixed{};
  source.read(reinterpret_cast<char*>(fixed.data()), 4);
  const auto got = static_cast<std::size_t>(source.gcount());
  if (got > 0 && std::memcmp(fixed.data(), kTensorMagic, got) != 0) {
    throw FormatError("not an LPPT tensor");
  }
  if (got != 4) throw FormatError("unexpected end of stream");
  read_exact(source, fixed.data() + 4, kFixedHeader - 4);

  const std::uint16_t version = get_u16(fixed.data() + 4);
  if (version != kTensorVersion) {
    throw FormatError("unsupported tensor version " + std::to_string(version));
  }
  const unsigned dtype_code = fixed[6];
  if (dtype_code > 1) throw FormatError("unsupported dtype " + std::to_string(dtype_code));
  const std::size_t ndim = fixed[7];
  if (ndim == 0 || ndim > kMaxTensorRank) {
    throw FormatError("invalid tensor rank " + std::to_string(ndim));
  }

  TensorBlob blob;
  blob.dtype = static_cast<DType>(dtype_code);
  const std::size_t header = tensor_header_size(ndim);
  std::vector<unsigned char> rest(header - kFixedHeader);
  read_exact(source, rest.data(), rest.size());
  blob.dims.resize(ndim);
  std::size_t count = 1;
  for (std::size_t i = 0; i < ndim; ++i) {
    blob.dims[i] = get_u32(rest.data() + 4 * i);
    if (blob.dims[i] != 0 && count > std::numeric_limits<std::size_t>::max() / blob.dims[i]) {
      throw FormatError("tensor element count overflows");
    }
    count *= blob.dims[i];
  }
  for (std::size_t i = 4 * ndim; i < rest.size(); ++i) {
    if (rest[i] != 0) throw FormatError("non-zero header padding");
  }

  const std::size_t width = scalar_size(blob.dtype);
  std::vector<unsigned char> chunk;
  std::size_t remaining = count;
  while (remaining > 0) {
    const std::size_t n = std::min(remaining, kReadChunk);
    chunk.resize(n * width);
    read_exact(source, chunk.data(), chunk.size());
    for (std::size_t i = 0; i < n; ++i) {
      const unsigned char* p = chunk.data() + i * width;
      blob.data.push_back(width == 4 ? std::bit_cast<float>(get_u32(p)) : half_to_float(get_u16(p)));
    }
    remaining -= n;
  }
  return blob;
}

void save_tensor(const TensorBlob& blob, const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path.string());
  write_tensor(blob, out);
}

TensorBlob load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open tensor file: " + path.string());
  try {
    return read_tensor(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace lpp
