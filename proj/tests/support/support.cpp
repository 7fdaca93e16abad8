#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lpp/spectral.hpp"
#include "lpp/tensor.hpp"

#ifndef LPP_FIXTURE_DIR
#error "LPP_FIXTURE_DIR must be defined"
#endif

namespace lpp::test {

TempDir::TempDir() {
  std::random_device rd;
  const fs::path base = fs::temp_directory_path();
  for (;;) {
    path_ = base / ("lpp-test-" + std::to_string(rd()) + std::to_string(rd()));
    if (fs::create_directory(path_)) break;
  }
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  // Box-Muller; 1 - u keeps the log argument in (0, 1].
  const double u = 1.0 - uniform();
  const double v = uniform();
  return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * v);
}

std::size_t Rng::index(std::size_t n) { return static_cast<std::size_t>(uniform() * n); }

RunBuilder::RunBuilder(fs::path dir, TraceManifest manifest)
    : dir_(std::move(dir)), manifest_(std::move(manifest)) {
  manifest_.files.clear();
  manifest_.payload_kinds.clear();
  fs::create_directories(dir_);
}

void RunBuilder::put(const FileKey& key, const std::string& rel, const TensorBlob& blob) {
  fs::create_directories((dir_ / rel).parent_path());
  save_tensor(blob, dir_ / rel);
  manifest_.files[key] = rel;
  bool seen = false;
  for (auto k : manifest_.payload_kinds) seen = seen || k == key.kind;
  if (!seen) manifest_.payload_kinds.push_back(key.kind);
}

void RunBuilder::hidden(std::size_t sample, int layer, const TensorBlob& blob) {
  const std::string name = layer == kLastLayer ? "last" : std::to_string(layer);
  put({sample, PayloadKind::hidden, layer},
      "sample" + std::to_string(sample) + "/hidden_layer_" + name + ".lppt", blob);
}

void RunBuilder::logits(std::size_t sample, const TensorBlob& blob) {
  put({sample, PayloadKind::logits, std::nullopt},
      "sample" + std::to_string(sample) + "/logits.lppt", blob);
}

void RunBuilder::entropy(std::size_t sample, const std::vector<double>& values) {
  TensorBlob blob;
  blob.dims = {values.size()};
  blob.data.assign(values.begin(), values.end());
  put({sample, PayloadKind::entropy, std::nullopt},
      "sample" + std::to_string(sample) + "/entropy.lppt", blob);
}

TraceRun RunBuilder::finish() {
  std::sort(manifest_.payload_kinds.begin(), manifest_.payload_kinds.end());
  write_manifest(manifest_, dir_);
  return load_run(dir_);
}

TensorBlob matrix_blob(std::size_t rows, std::size_t cols, const std::vector<double>& row_major) {
  TensorBlob blob;
  blob.dims = {rows, cols};
  blob.data.assign(row_major.begin(), row_major.end());
  return blob;
}

namespace {

TraceManifest base_manifest(const std::string& model, const std::string& dataset,
                            std::size_t samples, std::size_t context, std::size_t prefix,
                            std::vector<int> layers, std::size_t vocab, std::uint64_t seed) {
  TraceManifest m;
  m.model_id = model;
  m.dataset_id = dataset;
  m.tokenizer_id = "synthetic-tokenizer";
  m.seed = static_cast<std::int64_t>(seed);
  m.context_length = context;
  m.prefix_length = prefix;
  m.num_samples = samples;
  m.layers = std::move(layers);
  m.vocab_size = vocab;
  return m;
}

std::vector<double> gaussian(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

void add_logits(RunBuilder& b, Rng& rng, std::size_t sample, std::size_t tokens,
                std::size_t vocab, bool logits, bool entropy) {
  const TensorBlob blob = matrix_blob(tokens, vocab, gaussian(rng, tokens * vocab, 2.0));
  if (logits) b.logits(sample, blob);
  if (entropy) b.entropy(sample, entropy_series(blob).values);
}

}  // namespace

TraceRun write_synthetic_run(const fs::path& dir, const SyntheticRun& s) {
  RunBuilder b(dir, base_manifest(s.model_id, s.dataset_id, s.samples, s.context, s.prefix,
                                  s.layers, s.vocab, s.seed));
  Rng rng(s.seed);
  for (std::size_t i = 0; i < s.samples; ++i) {
    const std::size_t tokens = s.tokens.empty() ? s.context : s.tokens.at(i);
    for (int layer : s.layers) {
      b.hidden(i, layer, matrix_blob(tokens, s.width, gaussian(rng, tokens * s.width)));
    }
    add_logits(b, rng, i, tokens, s.vocab, s.with_logits, s.with_entropy);
  }
  return b.finish();
}

void write_tiny_fixture(const fs::path& dir) {
  constexpr std::size_t kSamples = 4;
  constexpr std::size_t kWidth = 8;
  constexpr std::size_t kVocab = 16;
  const std::size_t tokens[kSamples] = {32, 30, 28, 32};
  // Latent rank per layer: wide, bottleneck, partial recovery, wide.
  const std::vector<int> layers{0, 1, 2, kLastLayer};
  const std::size_t latent_rank[] = {8, 2, 4, 8};

  TraceManifest m = base_manifest("tiny-fixture", "synthetic-tiny", kSamples, 32, 16, layers,
                                  kVocab, 42);
  m.extra["generator"] = "lpp tests/support write_tiny_fixture";
  RunBuilder b(dir, m);
  Rng rng(42);
  for (std::size_t i = 0; i < kSamples; ++i) {
    const std::size_t t = tokens[i];
    for (std::size_t li = 0; li < layers.size(); ++li) {
      const std::size_t k = latent_rank[li];
      const std::vector<double> z = gaussian(rng, t * k);
      const std::vector<double> w = gaussian(rng, k * kWidth);
      std::vector<double> h(t * kWidth);
      for (std::size_t r = 0; r < t; ++r) {
        for (std::size_t c = 0; c < kWidth; ++c) {
          double acc = 0.05 * rng.normal();
          for (std::size_t j = 0; j < k; ++j) acc += z[r * k + j] * w[j * kWidth + c];
          h[r * kWidth + c] = acc;
        }
      }
      b.hidden(i, layers[li], matrix_blob(t, kWidth, h));
    }
    add_logits(b, rng, i, t, kVocab, true, true);
  }
  b.finish();
}

fs::path fixture_dir() { return fs::path(LPP_FIXTURE_DIR); }

}  // namespace lpp::test
