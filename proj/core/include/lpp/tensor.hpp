#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace lpp {

enum class DType : std::uint8_t { f32 = 0, f16 = 1 };

/// Dense row-major tensor. Scalars are held as f32 regardless of the storage
/// dtype; f16 payloads are promoted on read and narrowed again on write.
struct TensorBlob {
  DType dtype = DType::f32;
  std::vector<std::size_t> dims;
  std::vector<float> data;

  std::size_t rank() const { return dims.size(); }
  std::size_t element_count() const;
  bool all_finite() const;

  /// Row `r` of a rank-2 tensor.
  std::span<const float> row(std::size_t r) const;

  friend bool operator==(const TensorBlob&, const TensorBlob&) = default;
};

// On-disk layout, little-endian throughout:
//   "LPPT" | u16 version | u8 dtype | u8 ndim | u32 dim[ndim] | zero pad to 8 | scalars
inline constexpr char kTensorMagic[4] = {'L', 'P', 'P', 'T'};
inline constexpr std::uint16_t kTensorVersion = 1;
inline constexpr std::size_t kMaxTensorRank = 4;

std::size_t tensor_header_size(std::size_t ndim);

/// Serializes `blob`, returning the number of bytes written. Throws
/// PreconditionError for invariant violations (rank, element count, dims that
/// overflow u32, non-finite scalars).
std::size_t write_tensor(const TensorBlob& blob, std::ostream& sink);

/// Parses one tensor starting at the current stream position. Throws
/// FormatError on bad magic, unsupported version/dtype, or truncation.
TensorBlob read_tensor(std::istream& source);

void save_tensor(const TensorBlob& blob, const std::filesystem::path& path);
TensorBlob load_tensor(const std::filesystem::path& path);

std::uint16_t float_to_half(float value);
float half_to_float(std::uint16_t bits);

}  // namespace lpp
