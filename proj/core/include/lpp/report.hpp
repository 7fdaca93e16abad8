#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lpp/profiler.hpp"
#include "lpp/stats.hpp"
#include "lpp/sweep.hpp"

namespace lpp {

struct NamedCurve {
  std::string model_id;
  LayerCurve curve;
};

struct ReportInputs {
  std::vector<LatentProfile> profiles;
  std::vector<SweepTable> sweeps;
  std::vector<NamedCurve> curves;
  std::optional<CorrelationReport> correlations;
};

/// Writes profile.json, sweeps.csv, layer_curve.csv, correlations.json and
/// plotdata/*.csv (two columns, x,y) under out_dir, each atomically. Empty
/// inputs still produce every file. Returns the written paths, sorted.
std::vector<std::filesystem::path> emit_report(const ReportInputs& inputs,
                                               const std::filesystem::path& out_dir);

}  // namespace lpp
