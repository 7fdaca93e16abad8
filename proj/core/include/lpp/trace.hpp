#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lpp/tensor.hpp"

namespace lpp {

enum class PayloadKind { hidden, logits, entropy };

std::string_view to_string(PayloadKind kind);
PayloadKind parse_payload_kind(std::string_view text);

/// Layer index used for "the model's last layer" when the exact depth is unknown.
inline constexpr int kLastLayer = -1;

/// Sort key for layer indices: explicit depths ascending, then kLastLayer.
long layer_order(int layer);

/// Identifies one tensor file. Only hidden payloads carry a layer.
struct FileKey {
  std::size_t sample = 0;
  PayloadKind kind = PayloadKind::hidden;
  std::optional<int> layer;

  friend bool operator==(const FileKey&, const FileKey&) = default;
  friend bool operator<(const FileKey& a, const FileKey& b);
};

std::string describe(const FileKey& key);

inline constexpr int kManifestFormatVersion = 1;

struct TraceManifest {
  int format_version = kManifestFormatVersion;
  std::string model_id;
  std::string dataset_id;
  std::string tokenizer_id;
  std::int64_t seed = 42;
  std::size_t context_length = 200;
  std::size_t prefix_length = 100;
  std::size_t num_samples = 0;
  std::vector<int> layers;
  std::size_t vocab_size = 0;
  std::vector<PayloadKind> payload_kinds;
  std::map<FileKey, std::string> files;
  /// Top-level fields this version does not interpret, kept verbatim.
  nlohmann::json extra = nlohmann::json::object();

  bool has_kind(PayloadKind kind) const;
  bool has_layer(int layer) const;
};

/// Parses and checks the manifest document (schema, version, invariants, file
/// map completeness). Does not touch the filesystem.
TraceManifest parse_manifest(const nlohmann::json& doc);
nlohmann::json manifest_to_json(const TraceManifest& manifest);

inline constexpr std::string_view kManifestFileName = "manifest.json";

/// A manifest plus the directory its relative paths resolve against. Tensors
/// are read on demand; the object never changes after load_run.
class TraceRun {
 public:
  TraceRun(TraceManifest manifest, std::filesystem::path root);

  const TraceManifest& manifest() const { return manifest_; }
  const std::filesystem::path& root() const { return root_; }

  std::filesystem::path path_of(const FileKey& key) const;
  TensorBlob load(const FileKey& key) const;
  TensorBlob hidden(std::size_t sample, int layer) const;
  TensorBlob logits(std::size_t sample) const;
  TensorBlob entropy(std::size_t sample) const;

 private:
  TraceManifest manifest_;
  std::filesystem::path root_;
};

/// Accepts either the manifest file or the run directory holding manifest.json.
/// Throws FormatError for schema/version problems and Error naming every
/// referenced file that does not exist.
TraceRun load_run(const std::filesystem::path& manifest_path);

/// Writes `manifest` as `dir/manifest.json`.
void write_manifest(const TraceManifest& manifest, const std::filesystem::path& dir);

struct Finding {
  std::string path;
  std::string message;
};

struct ValidationReport {
  bool ok = true;
  std::size_t tensors_checked = 0;
  std::vector<Finding> findings;
};

/// Reads every tensor of the run and reports existence, rank, dims, vocab,
/// finiteness, and sequence-length problems. Never throws for data problems.
ValidationReport validate_run(const TraceRun& run);

}  // namespace lpp
