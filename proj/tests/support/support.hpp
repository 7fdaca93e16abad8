#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "lpp/trace.hpp"

namespace lpp::test {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

/// Portable draws (the std distributions differ across standard libraries).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform();  // [0, 1)
  double uniform(double lo, double hi);
  double normal();
  std::size_t index(std::size_t n);

 private:
  std::mt19937_64 engine_;
};

/// Collects tensors for a run directory and writes the manifest at the end.
class RunBuilder {
 public:
  RunBuilder(fs::path dir, TraceManifest manifest);

  void hidden(std::size_t sample, int layer, const TensorBlob& blob);
  void logits(std::size_t sample, const TensorBlob& blob);
  void entropy(std::size_t sample, const std::vector<double>& values);
  /// Writes manifest.json (payload_kinds from what was added) and loads the run.
  TraceRun finish();

 private:
  void put(const FileKey& key, const std::string& rel, const TensorBlob& blob);

  fs::path dir_;
  TraceManifest manifest_;
};

TensorBlob matrix_blob(std::size_t rows, std::size_t cols, const std::vector<double>& row_major);

struct SyntheticRun {
  std::string model_id = "synthetic";
  std::string dataset_id = "synthetic";
  std::size_t samples = 3;
  std::size_t context = 24;
  std::size_t prefix = 8;
  std::vector<std::size_t> tokens;  // per sample; default: context for all
  std::vector<int> layers{kLastLayer};
  std::size_t width = 6;
  std::size_t vocab = 12;
  bool with_logits = true;
  bool with_entropy = false;
  std::uint64_t seed = 1;
};

/// Gaussian hidden states and logits; entropy payloads (if requested) are
/// computed from the same logits.
TraceRun write_synthetic_run(const fs::path& dir, const SyntheticRun& shape);

/// The committed fixture under tests/fixtures/tiny: 4 samples, context 32,
/// prefix 16, layers 0,1,2,-1 with a compressed middle, hidden + logits +
/// entropy payloads.
void write_tiny_fixture(const fs::path& dir);

fs::path fixture_dir();

}  // namespace lpp::test
