#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lpp/profiler.hpp"
#include "lpp/stats.hpp"
#include "lpp/sweep.hpp"
#include "lpp/trace.hpp"

namespace lpp {

/// Shortest round-trip decimal form (std::to_chars).
std::string format_double(double value);

nlohmann::ordered_json to_json(const LatentProfile& profile);
/// Reads what to_json(LatentProfile) writes. Tables are optional on input.
LatentProfile latent_profile_from_json(const nlohmann::json& doc);
/// Accepts a single profile object, an array of them, or {"profiles": [...]}.
std::vector<LatentProfile> latent_profiles_from_json(const nlohmann::json& doc);
std::vector<LatentProfile> load_latent_profiles(const std::filesystem::path& path);

nlohmann::ordered_json to_json(const SweepTable& table);
nlohmann::ordered_json to_json(const LayerCurve& curve);
nlohmann::ordered_json to_json(const CorrelationReport& report);
nlohmann::ordered_json to_json(const ValidationReport& report);
/// Manifest summary for `inspect`.
nlohmann::ordered_json summarize(const TraceManifest& manifest);

inline constexpr const char* kSweepCsvHeader =
    "axis,value,label,available,reason,scheme,entropy_floor,max_er,max_pr";
inline constexpr const char* kLayerCurveCsvHeader = "model_id,layer,depth,pr,er,hourglass";

/// Rows only, no header.
std::string sweep_csv_rows(const SweepTable& table);
std::string layer_curve_csv_rows(const std::string& model_id, const LayerCurve& curve);

}  // namespace lpp
