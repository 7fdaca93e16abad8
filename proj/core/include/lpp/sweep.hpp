#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lpp/profiler.hpp"
#include "lpp/trace.hpp"

namespace lpp {

enum class SweepAxis { context_length, prefix_length, sample_size, dataset };

std::string_view to_string(SweepAxis axis);
SweepAxis parse_sweep_axis(std::string_view text);

/// Reference grids: context {50,100,200,500}, prefix {10,...,100},
/// sample size {10,100,500,1000}. The dataset axis has no numeric grid.
std::vector<std::int64_t> default_grid(SweepAxis axis);

struct SweepRow {
  std::int64_t value = 0;
  std::string label;
  bool available = true;
  std::string reason;
  MetricTriple metrics;
};

struct SweepTable {
  SweepAxis axis = SweepAxis::context_length;
  std::string scheme;
  std::vector<std::int64_t> grid;
  std::vector<SweepRow> rows;
};

/// One row per grid value (sorted, deduplicated). Points the data cannot
/// support are kept and marked unavailable with a reason. Numeric axes take
/// exactly one run and truncate it (context: first g tokens; prefix: window
/// start; sample size: first g samples in manifest order). The dataset axis
/// profiles each run, ordered by dataset_id; `grid` is ignored there.
SweepTable sensitivity_sweep(std::span<const TraceRun> runs, SweepAxis axis,
                             std::vector<std::int64_t> grid,
                             const AggregationScheme& scheme = AggregationScheme::canonical(),
                             const ProfileOptions& base = {});

}  // namespace lpp
