#include "lpp/serialize.hpp"

#include <array>
#include <charconv>
#include <algorithm>
#include <cmath>

#include "lpp/error.hpp"
#include "lpp/io.hpp"

namespace lpp {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json triple_json(const MetricTriple& t) {
  return ordered_json{{"entropy", t.entropy}, {"er", t.er}, {"pr", t.pr}};
}

MetricTriple triple_from(const json& doc) {
  return {doc.at("entropy").get<double>(), doc.at("pr").get<double>(), doc.at("er").get<double>()};
}

ordered_json optional_number(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

std::optional<double> optional_from(const json& doc, const char* field) {
  auto it = doc.find(field);
  if (it == doc.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

// CSV field: quoted only when it contains a separator, quote or newline.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string format_double(double value) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) throw Error("format_double: conversion failed");
  return std::string(buf.data(), ptr);
}

ordered_json to_json(const LatentProfile& p) {
  ordered_json per_scheme = ordered_json::object();
  for (const auto& [name, triple] : p.per_scheme) per_scheme[name] = triple_json(triple);
  ordered_json floors = ordered_json::array();
  for (const auto& f : p.per_sample_entropy_floors) {
    floors.push_back({{"sample", f.sample}, {"floor", f.floor}});
  }
  ordered_json layers = ordered_json::array();
  for (const auto& row : p.per_layer_table) {
    layers.push_back({{"layer", row.layer}, {"pr", row.pr}, {"er", row.er}});
  }
  ordered_json contexts = ordered_json::array();
  for (const auto& row : p.per_context_table) {
    contexts.push_back({{"context_length", row.context_length},
                        {"entropy_floor", optional_number(row.entropy)},
                        {"pr", optional_number(row.pr)},
                        {"er", optional_number(row.er)}});
  }
  const auto& pv = p.provenance;
  ordered_json provenance{{"dataset_id", pv.dataset_id},
                          {"seed", pv.seed},
                          {"context_length", pv.context_length},
                          {"prefix_length", pv.prefix_length},
                          {"num_samples", pv.num_samples},
                          {"layers", pv.layers},
                          {"context_grid", pv.context_grid},
                          {"entropy_source", pv.entropy_source},
                          {"skipped_entropy_samples", pv.skipped_entropy_samples},
                          {"skipped_spectra", pv.skipped_spectra},
                          {"warnings", pv.warnings}};
  return ordered_json{{"model_id", p.model_id},
                      {"entropy_floor", p.entropy_floor},
                      {"max_er", p.max_er},
                      {"max_pr", p.max_pr},
                      {"pooled_entropy_floor", p.pooled_entropy_floor},
                      {"scheme", p.scheme},
                      {"summary", triple_json(p.summary)},
                      {"per_scheme", per_scheme},
                      {"per_sample_entropy_floors", floors},
                      {"per_layer_table", layers},
                      {"per_context_table", contexts},
                      {"provenance", provenance}};
}

LatentProfile latent_profile_from_json(const json& doc) {
  try {
    LatentProfile p;
    p.model_id = doc.at("model_id").get<std::string>();
    p.entropy_floor = doc.at("entropy_floor").get<double>();
    p.max_er = doc.at("max_er").get<double>();
    p.max_pr = doc.at("max_pr").get<double>();
    p.pooled_entropy_floor = doc.value("pooled_entropy_floor", p.entropy_floor);
    p.scheme = doc.value("scheme", std::string("canonical"));
    p.summary = doc.contains("summary") ? triple_from(doc.at("summary"))
                                        : MetricTriple{p.entropy_floor, p.max_pr, p.max_er};
    if (auto it = doc.find("per_scheme"); it != doc.end()) {
      for (const auto& [name, triple] : it->items()) p.per_scheme.emplace_back(name, triple_from(triple));
      // json objects come back key-sorted; restore the preset order
      auto rank = [](const std::string& name) {
        const auto& presets = scheme_presets();
        std::size_t i = 0;
        while (i < presets.size() && presets[i].name != name) ++i;
        return i;
      };
      std::stable_sort(p.per_scheme.begin(), p.per_scheme.end(),
                       [&](const auto& a, const auto& b) { return rank(a.first) < rank(b.first); });
    }
    if (auto it = doc.find("per_sample_entropy_floors"); it != doc.end()) {
      for (const auto& f : *it) {
        p.per_sample_entropy_floors.push_back({f.at("sample").get<std::size_t>(),
                                               f.at("floor").get<double>()});
      }
    }
    if (auto it = doc.find("per_layer_table"); it != doc.end()) {
      for (const auto& r : *it) {
        p.per_layer_table.push_back(
            {r.at("layer").get<int>(), r.at("pr").get<double>(), r.at("er").get<double>()});
      }
    }
    if (auto it = doc.find("per_context_table"); it != doc.end()) {
      for (const auto& r : *it) {
        p.per_context_table.push_back({r.at("context_length").get<std::size_t>(),
                                       optional_from(r, "entropy_floor"), optional_from(r, "pr"),
                                       optional_from(r, "er")});
      }
    }
    if (auto it = doc.find("provenance"); it != doc.end()) {
      auto& pv = p.provenance;
      pv.dataset_id = it->value("dataset_id", std::string());
      pv.seed = it->value("seed", std::int64_t{0});
      pv.context_length = it->value("context_length", std::size_t{0});
      pv.prefix_length = it->value("prefix_length", std::size_t{0});
      pv.num_samples = it->value("num_samples", std::size_t{0});
      pv.layers = it->value("layers", std::vector<int>{});
      pv.context_grid = it->value("context_grid", std::vector<std::size_t>{});
      pv.entropy_source = it->value("entropy_source", std::string());
      pv.skipped_entropy_samples = it->value("skipped_entropy_samples", std::size_t{0});
      pv.skipped_spectra = it->value("skipped_spectra", std::size_t{0});
      pv.warnings = it->value("warnings", std::vector<std::string>{});
    }
    return p;
  } catch (const json::exception& e) {
    throw FormatError(std::string("latent profile: ") + e.what());
  }
}

std::vector<LatentProfile> latent_profiles_from_json(const json& doc) {
  std::vector<LatentProfile> out;
  const json* list = &doc;
  if (doc.is_object() && doc.contains("profiles")) list = &doc.at("profiles");
  if (list->is_array()) {
    for (const auto& item : *list) out.push_back(latent_profile_from_json(item));
  } else if (list->is_object()) {
    out.push_back(latent_profile_from_json(*list));
  } else {
    throw FormatError("latent profile: expected an object or an array");
  }
  return out;
}

std::vector<LatentProfile> load_latent_profiles(const std::filesystem::path& path) {
  try {
    return latent_profiles_from_json(json::parse(read_text_file(path)));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

ordered_json to_json(const SweepTable& table) {
  ordered_json rows = ordered_json::array();
  for (const auto& r : table.rows) {
    ordered_json row{{"value", r.value}, {"label", r.label}, {"available", r.available}};
    if (r.available) {
      row["metrics"] = triple_json(r.metrics);
    } else {
      row["reason"] = r.reason;
    }
    rows.push_back(std::move(row));
  }
  return ordered_json{{"axis", std::string(to_string(table.axis))},
                      {"scheme", table.scheme},
                      {"grid", table.grid},
                      {"rows", rows}};
}

ordered_json to_json(const LayerCurve& curve) {
  return ordered_json{{"layers", curve.layers},
                      {"layer_depths", curve.layer_depths},
                      {"pr_values", curve.pr_values},
                      {"er_values", curve.er_values},
                      {"hourglass_flag", curve.hourglass_flag}};
}

ordered_json to_json(const CorrelationReport& report) {
  ordered_json pairs = ordered_json::object();
  for (const auto& p : report.pairs) {
    pairs[p.latent_metric][p.score_metric] = ordered_json{{"spearman_rho", p.spearman_rho},
                                                          {"spearman_p", p.spearman_p},
                                                          {"pearson_r", p.pearson_r},
                                                          {"pearson_p", p.pearson_p},
                                                          {"n", p.n},
                                                          {"exact_p", p.exact_p}};
  }
  return ordered_json{{"models", report.models},
                      {"scheme", report.scheme},
                      {"pairs", pairs},
                      {"method_notes", report.method_notes}};
}

ordered_json to_json(const ValidationReport& report) {
  ordered_json findings = ordered_json::array();
  for (const auto& f : report.findings) {
    findings.push_back({{"path", f.path}, {"message", f.message}});
  }
  return ordered_json{
      {"ok", report.ok}, {"tensors_checked", report.tensors_checked}, {"findings", findings}};
}

ordered_json summarize(const TraceManifest& m) {
  std::vector<std::string> kinds;
  for (auto k : m.payload_kinds) kinds.emplace_back(to_string(k));
  return ordered_json{{"format_version", m.format_version},
                      {"model_id", m.model_id},
                      {"dataset_id", m.dataset_id},
                      {"tokenizer_id", m.tokenizer_id},
                      {"seed", m.seed},
                      {"context_length", m.context_length},
                      {"prefix_length", m.prefix_length},
                      {"num_samples", m.num_samples},
                      {"layers", m.layers},
                      {"vocab_size", m.vocab_size},
                      {"payload_kinds", kinds},
                      {"files", m.files.size()}};
}

std::string sweep_csv_rows(const SweepTable& table) {
  std::string out;
  for (const auto& r : table.rows) {
    out += std::string(to_string(table.axis)) + "," + std::to_string(r.value) + "," +
           csv_field(r.label) + "," + (r.available ? "true" : "false") + "," +
           csv_field(r.reason) + "," + csv_field(table.scheme) + ",";
    if (r.available) {
      out += format_double(r.metrics.entropy) + "," + format_double(r.metrics.er) + "," +
             format_double(r.metrics.pr);
    } else {
      out += ",,";
    }
    out += "\n";
  }
  return out;
}

std::string layer_curve_csv_rows(const std::string& model_id, const LayerCurve& curve) {
  std::string out;
  for (std::size_t i = 0; i < curve.layers.size(); ++i) {
    out += csv_field(model_id) + "," + std::to_string(curve.layers[i]) + "," +
           format_double(curve.layer_depths[i]) + "," + format_double(curve.pr_values[i]) + "," +
           format_double(curve.er_values[i]) + "," + (curve.hourglass_flag ? "true" : "false") +
           "\n";
  }
  return out;
}

}  // namespace lpp
