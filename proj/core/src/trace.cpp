#include "lpp/trace.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <fstream>
#include <set>
#include <tuple>

#include "lpp/error.hpp"
#include "lpp/io.hpp"

namespace lpp {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

[[noreturn]] void schema_error(const std::string& what) {
  throw FormatError("manifest schema violation: " + what);
}

const json& require(const json& doc, const char* field) {
  auto it = doc.find(field);
  if (it == doc.end()) schema_error(std::string("missing field '") + field + "'");
  return *it;
}

std::string require_string(const json& doc, const char* field) {
  const json& v = require(doc, field);
  if (!v.is_string()) schema_error(std::string("field '") + field + "' must be a string");
  return v.get<std::string>();
}

std::int64_t require_int(const json& doc, const char* field) {
  const json& v = require(doc, field);
  if (!v.is_number_integer()) schema_error(std::string("field '") + field + "' must be an integer");
  return v.get<std::int64_t>();
}

std::size_t require_count(const json& doc, const char* field) {
  const auto v = require_int(doc, field);
  if (v < 0) schema_error(std::string("field '") + field + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

const std::set<std::string>& known_fields() {
  static const std::set<std::string> kKnown = {
      "format_version", "model_id", "dataset_id", "tokenizer_id", "seed",
      "context_length", "prefix_length", "num_samples", "layers", "vocab_size",
      "payload_kinds", "files"};
  return kKnown;
}

}  // namespace

std::string_view to_string(PayloadKind kind) {
  switch (kind) {
    case PayloadKind::hidden: return "hidden";
    case PayloadKind::logits: return "logits";
    case PayloadKind::entropy: return "entropy";
  }
  return "unknown";
}

PayloadKind parse_payload_kind(std::string_view text) {
  if (text == "hidden") return PayloadKind::hidden;
  if (text == "logits") return PayloadKind::logits;
  if (text == "entropy") return PayloadKind::entropy;
  throw FormatError("unknown payload kind '" + std::string(text) + "'");
}

long layer_order(int layer) { return layer == kLastLayer ? LONG_MAX : layer; }

bool operator<(const FileKey& a, const FileKey& b) {
  const long la = a.layer ? layer_order(*a.layer) : LONG_MIN;
  const long lb = b.layer ? layer_order(*b.layer) : LONG_MIN;
  return std::tie(a.sample, a.kind, la) < std::tie(b.sample, b.kind, lb);
}

std::string describe(const FileKey& key) {
  std::string out = "sample " + std::to_string(key.sample) + " " + std::string(to_string(key.kind));
  if (key.layer) out += " layer " + std::to_string(*key.layer);
  return out;
}

bool TraceManifest::has_kind(PayloadKind kind) const {
  return std::find(payload_kinds.begin(), payload_kinds.end(), kind) != payload_kinds.end();
}

bool TraceManifest::has_layer(int layer) const {
  return std::find(layers.begin(), layers.end(), layer) != layers.end();
}

TraceManifest parse_manifest(const json& doc) {
  if (!doc.is_object()) schema_error("document must be a JSON object");
  TraceManifest m;
  m.format_version = static_cast<int>(require_int(doc, "format_version"));
  if (m.format_version != kManifestFormatVersion) {
    throw FormatError("unsupported manifest format_version " + std::to_string(m.format_version) +
                      " (expected " + std::to_string(kManifestFormatVersion) + ")");
  }
  m.model_id = require_string(doc, "model_id");
  m.dataset_id = require_string(doc, "dataset_id");
  m.tokenizer_id = require_string(doc, "tokenizer_id");
  m.seed = require_int(doc, "seed");
  m.context_length = require_count(doc, "context_length");
  m.prefix_length = require_count(doc, "prefix_length");
  m.num_samples = require_count(doc, "num_samples");
  m.vocab_size = require_count(doc, "vocab_size");

  if (!(m.prefix_length > 0 && m.prefix_length < m.context_length)) {
    schema_error("require 0 < prefix_length < context_length (got prefix_length=" +
                 std::to_string(m.prefix_length) + ", context_length=" +
                 std::to_string(m.context_length) + ")");
  }
  if (m.num_samples < 1) schema_error("num_samples must be >= 1");

  const json& layers = require(doc, "layers");
  if (!layers.is_array()) schema_error("field 'layers' must be an array");
  for (const auto& l : layers) {
    if (!l.is_number_integer()) schema_error("layer indices must be integers");
    const int layer = l.get<int>();
    if (layer < kLastLayer) schema_error("layer index " + std::to_string(layer) + " is invalid");
    m.layers.push_back(layer);
  }
  for (std::size_t i = 1; i < m.layers.size(); ++i) {
    if (layer_order(m.layers[i - 1]) >= layer_order(m.layers[i])) {
      schema_error("layers must be strictly ascending (-1, the last layer, sorts last)");
    }
  }

  const json& kinds = require(doc, "payload_kinds");
  if (!kinds.is_array() || kinds.empty()) schema_error("payload_kinds must be a non-empty array");
  for (const auto& k : kinds) {
    if (!k.is_string()) schema_error("payload_kinds entries must be strings");
    PayloadKind kind;
    try {
      kind = parse_payload_kind(k.get<std::string>());
    } catch (const FormatError& e) {
      schema_error(e.what());
    }
    if (m.has_kind(kind)) schema_error("duplicate payload kind " + k.get<std::string>());
    m.payload_kinds.push_back(kind);
  }
  if (m.has_kind(PayloadKind::hidden) && m.layers.empty()) {
    schema_error("hidden payload requires at least one layer");
  }
  if (m.has_kind(PayloadKind::logits) && m.vocab_size == 0) {
    schema_error("logits payload requires vocab_size >= 1");
  }

  const json& files = require(doc, "files");
  if (!files.is_array()) schema_error("field 'files' must be an array");
  for (const auto& entry : files) {
    if (!entry.is_object()) schema_error("files entries must be objects");
    FileKey key;
    key.sample = require_count(entry, "sample");
    try {
      key.kind = parse_payload_kind(require_string(entry, "kind"));
    } catch (const FormatError& e) {
      schema_error(e.what());
    }
    if (key.kind == PayloadKind::hidden) {
      key.layer = static_cast<int>(require_int(entry, "layer"));
      if (!m.has_layer(*key.layer)) {
        schema_error("file entry for unknown layer " + std::to_string(*key.layer));
      }
    } else if (entry.contains("layer") && !entry["layer"].is_null()) {
      schema_error(std::string(to_string(key.kind)) + " entries must not carry a layer");
    }
    if (key.sample >= m.num_samples) {
      schema_error("file entry sample index " + std::to_string(key.sample) + " >= num_samples");
    }
    if (!m.has_kind(key.kind)) {
      schema_error("file entry of undeclared payload kind " + std::string(to_string(key.kind)));
    }
    const std::string path = require_string(entry, "path");
    if (path.empty()) schema_error("file entry path must not be empty");
    if (!m.files.emplace(key, path).second) schema_error("duplicate file entry: " + describe(key));
  }

  for (std::size_t s = 0; s < m.num_samples; ++s) {
    for (PayloadKind kind : m.payload_kinds) {
      if (kind == PayloadKind::hidden) {
        for (int layer : m.layers) {
          if (!m.files.count(FileKey{s, kind, layer})) {
            schema_error("missing file entry for " + describe(FileKey{s, kind, layer}));
          }
        }
      } else if (!m.files.count(FileKey{s, kind, std::nullopt})) {
        schema_error("missing file entry for " + describe(FileKey{s, kind, std::nullopt}));
      }
    }
  }

  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (!known_fields().count(it.key())) m.extra[it.key()] = it.value();
  }
  return m;
}

json manifest_to_json(const TraceManifest& m) {
  json doc = json::object();
  doc["format_version"] = m.format_version;
  doc["model_id"] = m.model_id;
  doc["dataset_id"] = m.dataset_id;
  doc["tokenizer_id"] = m.tokenizer_id;
  doc["seed"] = m.seed;
  doc["context_length"] = m.context_length;
  doc["prefix_length"] = m.prefix_length;
  doc["num_samples"] = m.num_samples;
  doc["layers"] = m.layers;
  doc["vocab_size"] = m.vocab_size;
  json kinds = json::array();
  for (auto k : m.payload_kinds) kinds.push_back(std::string(to_string(k)));
  doc["payload_kinds"] = kinds;
  json files = json::array();
  for (const auto& [key, path] : m.files) {
    json entry = {{"sample", key.sample}, {"kind", std::string(to_string(key.kind))}};
    if (key.layer) entry["layer"] = *key.layer;
    entry["path"] = path;
    files.push_back(entry);
  }
  doc["files"] = files;
  for (auto it = m.extra.begin(); it != m.extra.end(); ++it) doc[it.key()] = it.value();
  return doc;
}

TraceRun::TraceRun(TraceManifest manifest, fs::path root)
    : manifest_(std::move(manifest)), root_(std::move(root)) {}

fs::path TraceRun::path_of(const FileKey& key) const {
  auto it = manifest_.files.find(key);
  if (it == manifest_.files.end()) throw Error("run has no tensor for " + describe(key));
  return root_ / it->second;
}

TensorBlob TraceRun::load(const FileKey& key) const { return load_tensor(path_of(key)); }

TensorBlob TraceRun::hidden(std::size_t sample, int layer) const {
  if (!manifest_.has_layer(layer)) {
    throw PreconditionError("layer " + std::to_string(layer) + " is not present in run '" +
                            manifest_.model_id + "'");
  }
  return load(FileKey{sample, PayloadKind::hidden, layer});
}

TensorBlob TraceRun::logits(std::size_t sample) const {
  return load(FileKey{sample, PayloadKind::logits, std::nullopt});
}

TensorBlob TraceRun::entropy(std::size_t sample) const {
  return load(FileKey{sample, PayloadKind::entropy, std::nullopt});
}

TraceRun load_run(const fs::path& manifest_path) {
  fs::path file = manifest_path;
  if (fs::is_directory(file)) file /= kManifestFileName;
  std::ifstream in(file);
  if (!in) throw Error("cannot open manifest: " + file.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError("manifest schema violation: not valid JSON (" + std::string(e.what()) + ")");
  }
  TraceManifest manifest = parse_manifest(doc);
  const fs::path root = file.parent_path();

  std::vector<std::string> missing;
  for (const auto& [key, rel] : manifest.files) {
    if (!fs::is_regular_file(root / rel)) missing.push_back((root / rel).string());
  }
  if (!missing.empty()) {
    std::string msg = "manifest references missing tensor file(s):";
    for (const auto& p : missing) msg += " " + p;
    throw Error(msg);
  }
  return TraceRun(std::move(manifest), root);
}

void write_manifest(const TraceManifest& manifest, const fs::path& dir) {
  write_file_atomic(dir / kManifestFileName, manifest_to_json(manifest).dump(2) + "\n");
}

ValidationReport validate_run(const TraceRun& run) {
  const TraceManifest& m = run.manifest();
  ValidationReport report;
  auto add = [&](const fs::path& p, std::string msg) {
    report.findings.push_back({p.string(), std::move(msg)});
  };

  std::map<int, std::size_t> hidden_width;
  std::map<std::size_t, std::size_t> sample_tokens;
  const double max_entropy = m.vocab_size > 0 ? std::log(static_cast<double>(m.vocab_size)) : 0.0;

  for (const auto& [key, rel] : m.files) {
    const fs::path path = run.root() / rel;
    ++report.tensors_checked;
    if (!fs::is_regular_file(path)) {
      add(path, "missing file");
      continue;
    }
    TensorBlob blob;
    try {
      blob = load_tensor(path);
    } catch (const Error& e) {
      add(path, std::string("unreadable tensor: ") + e.what());
      continue;
    }

    const std::size_t expected_rank = key.kind == PayloadKind::entropy ? 1 : 2;
    if (blob.rank() != expected_rank) {
      add(path, "rank mismatch: " + std::string(to_string(key.kind)) + " expects " +
                    std::to_string(expected_rank) + " dims, got " + std::to_string(blob.rank()));
      continue;
    }
    const std::size_t tokens = blob.dims[0];
    if (tokens == 0) add(path, "empty sequence");
    if (tokens > m.context_length) {
      add(path, "sequence exceeds context_length (" + std::to_string(tokens) + " > " +
                    std::to_string(m.context_length) + ")");
    }
    if (!blob.all_finite()) add(path, "non-finite scalar");

    if (key.kind == PayloadKind::logits && blob.dims[1] != m.vocab_size) {
      add(path, "vocab mismatch (" + std::to_string(blob.dims[1]) + " != vocab_size " +
                    std::to_string(m.vocab_size) + ")");
    }
    if (key.kind == PayloadKind::hidden) {
      auto [it, inserted] = hidden_width.emplace(*key.layer, blob.dims[1]);
      if (!inserted && it->second != blob.dims[1]) {
        add(path, "hidden width mismatch across samples for layer " + std::to_string(*key.layer));
      }
    }
    if (key.kind == PayloadKind::entropy && m.vocab_size > 0) {
      for (float v : blob.data) {
        if (std::isfinite(v) && (v < -1e-5 || v > max_entropy + 1e-4)) {
          add(path, "entropy value outside [0, ln vocab_size]");
          break;
        }
      }
    }
    auto [it, inserted] = sample_tokens.emplace(key.sample, tokens);
    if (!inserted && it->second != tokens) {
      add(path, "token count mismatch across payloads of sample " + std::to_string(key.sample));
    }
  }
  report.ok = report.findings.empty();
  return report;
}

}  // namespace lpp
