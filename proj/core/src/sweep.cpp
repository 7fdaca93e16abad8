#include "lpp/sweep.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "lpp/error.hpp"

namespace lpp {

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::context_length: return "context_length";
    case SweepAxis::prefix_length: return "prefix_length";
    case SweepAxis::sample_size: return "sample_size";
    case SweepAxis::dataset: return "dataset";
  }
  return "unknown";
}

SweepAxis parse_sweep_axis(std::string_view text) {
  if (text == "context_length" || text == "context") return SweepAxis::context_length;
  if (text == "prefix_length" || text == "prefix") return SweepAxis::prefix_length;
  if (text == "sample_size" || text == "samples") return SweepAxis::sample_size;
  if (text == "dataset") return SweepAxis::dataset;
  throw PreconditionError("unknown sweep axis '" + std::string(text) + "'");
}

std::vector<std::int64_t> default_grid(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::context_length: return {50, 100, 200, 500};
    case SweepAxis::prefix_length: return {10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
    case SweepAxis::sample_size: return {10, 100, 500, 1000};
    case SweepAxis::dataset: return {};
  }
  return {};
}

SweepTable sensitivity_sweep(std::span<const TraceRun> runs, SweepAxis axis,
                             std::vector<std::int64_t> grid, const AggregationScheme& scheme,
                             const ProfileOptions& base) {
  if (runs.empty()) throw PreconditionError("sensitivity_sweep: no runs given");
  SweepTable table;
  table.axis = axis;
  table.scheme = scheme_name(scheme);

  auto profile_row = [&](SweepRow& row, const TraceRun& run, const ProfileOptions& opts) {
    try {
      row.metrics = latent_profile(run, scheme, opts).summary;
    } catch (const PreconditionError& e) {
      row.available = false;
      row.reason = std::string("unavailable: ") + e.what();
    }
  };

  if (axis == SweepAxis::dataset) {
    std::vector<std::size_t> order(runs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return runs[a].manifest().dataset_id < runs[b].manifest().dataset_id;
    });
    std::set<std::string> seen;
    for (std::size_t i = 0; i < order.size(); ++i) {
      const TraceRun& run = runs[order[i]];
      if (!seen.insert(run.manifest().dataset_id).second) {
        throw PreconditionError("dataset sweep: duplicate dataset_id '" +
                                run.manifest().dataset_id + "'");
      }
      SweepRow row;
      row.value = static_cast<std::int64_t>(i);
      row.label = run.manifest().dataset_id;
      profile_row(row, run, base);
      table.grid.push_back(row.value);
      table.rows.push_back(std::move(row));
    }
    return table;
  }

  if (runs.size() != 1) {
    throw PreconditionError("sweep over " + std::string(to_string(axis)) +
                            " takes exactly one run");
  }
  const TraceRun& run = runs.front();
  const TraceManifest& m = run.manifest();
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (grid.empty()) throw PreconditionError("sensitivity_sweep: empty grid");
  if (grid.front() < 1) throw PreconditionError("sensitivity_sweep: grid values must be positive");
  table.grid = grid;

  const ProfileOptions defaults = with_defaults(m, base);
  const std::size_t context = *defaults.context_length;
  const std::size_t prefix = *defaults.prefix_length;

  for (std::int64_t g : grid) {
    const auto gu = static_cast<std::size_t>(g);
    SweepRow row;
    row.value = g;
    row.label = std::to_string(g);
    ProfileOptions opts = base;
    opts.context_grid.clear();
    switch (axis) {
      case SweepAxis::context_length:
        if (gu > m.context_length) {
          row.available = false;
          row.reason = "unavailable: exceeds available tokens (run context_length " +
                       std::to_string(m.context_length) + ")";
        } else if (gu <= prefix) {
          row.available = false;
          row.reason = "unavailable: empty window";
        }
        opts.context_length = gu;
        break;
      case SweepAxis::prefix_length:
        if (gu >= context) {
          row.available = false;
          row.reason = "unavailable: empty window";
        }
        opts.prefix_length = gu;
        break;
      case SweepAxis::sample_size:
        if (gu > m.num_samples) {
          row.available = false;
          row.reason = "unavailable: run has only " + std::to_string(m.num_samples) + " samples";
        }
        opts.max_samples = gu;
        break;
      case SweepAxis::dataset: break;
    }
    if (row.available) profile_row(row, run, opts);
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace lpp
