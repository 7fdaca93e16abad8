#include "lpp/profiler.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>
#include <string>

#include "lpp/error.hpp"
#include "lpp/parallel.hpp"

namespace lpp {
namespace {

struct Resolved {
  std::size_t context_length = 0;
  std::size_t prefix_length = 0;
  std::vector<int> layers;
  std::size_t samples = 0;
  std::vector<std::size_t> grid;  // ascending, contains context_length
  EntropySource source = EntropySource::automatic;
};

}  // namespace

ProfileOptions with_defaults(const TraceManifest& m, ProfileOptions options) {
  if (!options.context_length) options.context_length = std::min(kDefaultContextLength, m.context_length);
  if (!options.prefix_length) options.prefix_length = std::min(kDefaultPrefixLength, m.prefix_length);
  if (!options.max_samples) options.max_samples = std::min(kDefaultSampleCount, m.num_samples);
  if (!options.layers && !m.layers.empty()) {
    options.layers = std::vector<int>{*std::max_element(
        m.layers.begin(), m.layers.end(),
        [](int a, int b) { return layer_order(a) < layer_order(b); })};
  }
  if (!options.layers) options.layers = std::vector<int>{};
  return options;
}

namespace {

Resolved resolve(const TraceRun& run, const ProfileOptions& given, bool need_entropy = true) {
  const TraceManifest& m = run.manifest();
  const ProfileOptions options = with_defaults(m, given);
  Resolved r;
  r.context_length = *options.context_length;
  r.prefix_length = *options.prefix_length;
  r.layers = *options.layers;
  r.samples = *options.max_samples;

  if (r.context_length > m.context_length) {
    throw PreconditionError("context_length " + std::to_string(r.context_length) +
                            " exceeds the run's context_length " + std::to_string(m.context_length));
  }
  if (r.context_length < 2) throw PreconditionError("context_length must be at least 2");
  if (r.prefix_length < 1 || r.prefix_length >= r.context_length) {
    throw PreconditionError("empty window: need 0 < prefix_length (" +
                            std::to_string(r.prefix_length) + ") < context_length (" +
                            std::to_string(r.context_length) + ")");
  }
  if (r.samples < 1 || r.samples > m.num_samples) {
    throw PreconditionError("sample count " + std::to_string(r.samples) + " outside [1, " +
                            std::to_string(m.num_samples) + "]");
  }
  if (!m.has_kind(PayloadKind::hidden)) throw PreconditionError("run has no hidden payload");
  if (r.layers.empty()) throw PreconditionError("no layers selected");
  for (int layer : r.layers) {
    if (!m.has_layer(layer)) {
      throw PreconditionError("layer " + std::to_string(layer) + " is not present in run '" +
                              m.model_id + "'");
    }
  }

  std::set<std::size_t> grid(options.context_grid.begin(), options.context_grid.end());
  grid.insert(r.context_length);
  for (std::size_t g : grid) {
    if (g < 2 || g > r.context_length) {
      throw PreconditionError("context grid value " + std::to_string(g) + " outside [2, " +
                              std::to_string(r.context_length) + "]");
    }
  }
  r.grid.assign(grid.begin(), grid.end());

  r.source = options.entropy_source;
  if (!need_entropy) return r;
  if (r.source == EntropySource::automatic) {
    if (m.has_kind(PayloadKind::entropy)) {
      r.source = EntropySource::entropy_payload;
    } else if (m.has_kind(PayloadKind::logits)) {
      r.source = EntropySource::logits;
    } else {
      throw PreconditionError("run has neither logits nor entropy payload");
    }
  }
  if (r.source == EntropySource::entropy_payload && !m.has_kind(PayloadKind::entropy)) {
    throw PreconditionError("run has no entropy payload");
  }
  if (r.source == EntropySource::logits && !m.has_kind(PayloadKind::logits)) {
    throw PreconditionError("run has no logits payload");
  }
  return r;
}

EntropySeries load_series(const TraceRun& run, std::size_t sample, EntropySource source) {
  if (source == EntropySource::logits) return entropy_series(run.logits(sample));
  const TensorBlob blob = run.entropy(sample);
  if (blob.rank() != 1) throw FormatError("entropy payload must be rank 1");
  return EntropySeries{std::vector<double>(blob.data.begin(), blob.data.end())};
}

bool window_nonempty(std::size_t tokens, std::size_t prefix, std::size_t context) {
  return std::min(context, tokens) > prefix;
}

// Spectral metrics of one sample's hidden matrix at each grid context.
using GridMetrics = std::vector<std::optional<SampleSpectrumMetrics>>;

GridMetrics sample_grid_metrics(const TraceRun& run, std::size_t sample, int layer,
                                const std::vector<std::size_t>& grid) {
  const TensorBlob hidden = run.hidden(sample, layer);
  if (hidden.rank() != 2) throw FormatError("hidden payload must be rank 2");
  GridMetrics out(grid.size());
  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    const std::size_t rows = std::min(hidden.dims[0], grid[gi]);
    if (rows < 2) continue;
    const EigSpectrum spectrum = covariance_spectrum(hidden, rows);
    if (!(spectrum.total() > 0.0)) continue;
    out[gi] = SampleSpectrumMetrics{sample, participation_ratio(spectrum), effective_rank(spectrum)};
  }
  return out;
}

// [layer][grid][sample]
using SpectrumTable = std::vector<std::vector<std::vector<std::optional<SampleSpectrumMetrics>>>>;

SpectrumTable spectrum_table(const TraceRun& run, const Resolved& r, std::size_t threads) {
  SpectrumTable table(r.layers.size(),
                      std::vector<std::vector<std::optional<SampleSpectrumMetrics>>>(
                          r.grid.size(),
                          std::vector<std::optional<SampleSpectrumMetrics>>(r.samples)));
  const std::size_t jobs = r.layers.size() * r.samples;
  parallel_for(jobs, threads, [&](std::size_t job) {
    const std::size_t li = job / r.samples;
    const std::size_t s = job % r.samples;
    GridMetrics metrics = sample_grid_metrics(run, s, r.layers[li], r.grid);
    for (std::size_t gi = 0; gi < r.grid.size(); ++gi) table[li][gi][s] = metrics[gi];
  });
  return table;
}

std::vector<double> collect(const std::vector<std::optional<SampleSpectrumMetrics>>& cells,
                            double SampleSpectrumMetrics::*field) {
  std::vector<double> out;
  for (const auto& c : cells) {
    if (c) out.push_back((*c).*field);
  }
  return out;
}

}  // namespace

std::string_view to_string(Stat stat) {
  switch (stat) {
    case Stat::min: return "min";
    case Stat::max: return "max";
    case Stat::mean: return "mean";
    case Stat::median: return "median";
  }
  return "unknown";
}

Stat parse_stat(std::string_view text) {
  if (text == "min") return Stat::min;
  if (text == "max") return Stat::max;
  if (text == "mean") return Stat::mean;
  if (text == "median") return Stat::median;
  throw PreconditionError("unknown statistic '" + std::string(text) + "'");
}

double aggregate(std::span<const double> values, Stat stat) {
  if (values.empty()) throw PreconditionError("aggregate: empty list");
  switch (stat) {
    case Stat::min: return *std::min_element(values.begin(), values.end());
    case Stat::max: return *std::max_element(values.begin(), values.end());
    case Stat::mean:
      return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    case Stat::median: {
      std::vector<double> sorted(values.begin(), values.end());
      std::sort(sorted.begin(), sorted.end());
      const std::size_t mid = sorted.size() / 2;
      if (sorted.size() % 2 == 1) return sorted[mid];
      return (sorted[mid - 1] + sorted[mid]) / 2.0;
    }
  }
  throw PreconditionError("aggregate: unknown statistic");
}

const std::vector<NamedScheme>& scheme_presets() {
  static const std::vector<NamedScheme> kPresets = {
      {"canonical", AggregationScheme::canonical()},
      {"all-median", AggregationScheme::uniform(Stat::median)},
      {"all-mean", AggregationScheme::uniform(Stat::mean)},
      {"all-min", AggregationScheme::uniform(Stat::min)},
      {"all-max", AggregationScheme::uniform(Stat::max)},
  };
  return kPresets;
}

AggregationScheme parse_scheme(std::string_view text) {
  for (const auto& preset : scheme_presets()) {
    if (preset.name == text) return preset.scheme;
  }
  const auto first = text.find(':');
  const auto second = first == std::string_view::npos ? first : text.find(':', first + 1);
  if (second == std::string_view::npos || text.find(':', second + 1) != std::string_view::npos) {
    throw PreconditionError("unknown aggregation scheme '" + std::string(text) +
                            "' (use a preset or entropy:pr:er, e.g. min:max:max)");
  }
  return {parse_stat(text.substr(0, first)), parse_stat(text.substr(first + 1, second - first - 1)),
          parse_stat(text.substr(second + 1))};
}

std::string scheme_name(const AggregationScheme& scheme) {
  for (const auto& preset : scheme_presets()) {
    if (preset.scheme == scheme) return preset.name;
  }
  return std::string(to_string(scheme.entropy_stat)) + ":" + std::string(to_string(scheme.pr_stat)) +
         ":" + std::string(to_string(scheme.er_stat));
}

std::string_view to_string(EntropySource source) {
  switch (source) {
    case EntropySource::automatic: return "auto";
    case EntropySource::entropy_payload: return "entropy";
    case EntropySource::logits: return "logits";
  }
  return "unknown";
}

EntropySource parse_entropy_source(std::string_view text) {
  if (text == "auto") return EntropySource::automatic;
  if (text == "entropy") return EntropySource::entropy_payload;
  if (text == "logits") return EntropySource::logits;
  throw PreconditionError("unknown entropy source '" + std::string(text) + "'");
}

double sample_entropy_floor(const EntropySeries& series, std::size_t prefix_length,
                            std::size_t context_length) {
  if (prefix_length < 1 || prefix_length >= context_length) {
    throw PreconditionError("sample_entropy_floor: empty evaluation window (prefix_length " +
                            std::to_string(prefix_length) + ", context_length " +
                            std::to_string(context_length) + ")");
  }
  if (context_length > series.size() + 1) {
    throw PreconditionError("sample_entropy_floor: series of length " +
                            std::to_string(series.size()) + " is too short for context_length " +
                            std::to_string(context_length));
  }
  const auto first = series.values.begin() + static_cast<std::ptrdiff_t>(prefix_length - 1);
  const auto last = series.values.begin() + static_cast<std::ptrdiff_t>(context_length - 1);
  return *std::min_element(first, last);
}

LayerMetrics layer_metrics(const TraceRun& run, int layer, std::size_t context_length,
                           const AggregationScheme& scheme, std::size_t threads) {
  const TraceManifest& m = run.manifest();
  if (!m.has_layer(layer)) {
    throw PreconditionError("layer " + std::to_string(layer) + " is not present in run '" +
                            m.model_id + "'");
  }
  LayerMetrics out;
  out.layer = layer;
  out.context_length = context_length;
  const std::vector<std::size_t> grid{context_length};
  std::vector<std::optional<SampleSpectrumMetrics>> cells(m.num_samples);
  parallel_for(m.num_samples, threads, [&](std::size_t s) {
    cells[s] = sample_grid_metrics(run, s, layer, grid)[0];
  });
  for (std::size_t s = 0; s < cells.size(); ++s) {
    if (cells[s]) {
      out.per_sample.push_back(*cells[s]);
    } else {
      out.skipped.push_back(s);
    }
  }
  if (out.per_sample.empty()) {
    throw PreconditionError("layer " + std::to_string(layer) + ": no sample has a usable spectrum");
  }
  const auto prs = collect(cells, &SampleSpectrumMetrics::pr);
  const auto ers = collect(cells, &SampleSpectrumMetrics::er);
  out.pooled_pr = aggregate(prs, scheme.pr_stat);
  out.pooled_er = aggregate(ers, scheme.er_stat);
  return out;
}

LatentProfile latent_profile(const TraceRun& run, const AggregationScheme& scheme,
                             const ProfileOptions& options) {
  const TraceManifest& m = run.manifest();
  const Resolved r = resolve(run, options);

  LatentProfile profile;
  profile.model_id = m.model_id;
  profile.scheme = scheme_name(scheme);
  ProfileProvenance& prov = profile.provenance;
  prov.dataset_id = m.dataset_id;
  prov.seed = m.seed;
  prov.context_length = r.context_length;
  prov.prefix_length = r.prefix_length;
  prov.num_samples = r.samples;
  prov.layers = r.layers;
  prov.context_grid = r.grid;
  prov.entropy_source = std::string(to_string(r.source));

  // Entropy: per-sample floors at every grid context.
  std::vector<EntropySeries> series(r.samples);
  parallel_for(r.samples, options.threads,
               [&](std::size_t s) { series[s] = load_series(run, s, r.source); });

  std::vector<double> pooled_window;
  for (std::size_t s = 0; s < r.samples; ++s) {
    const std::size_t tokens = series[s].size();
    if (!window_nonempty(tokens, r.prefix_length, r.context_length)) {
      ++prov.skipped_entropy_samples;
      prov.warnings.push_back("sample " + std::to_string(s) + ": " + std::to_string(tokens) +
                              " tokens leave an empty entropy window");
      continue;
    }
    const std::size_t context = std::min(r.context_length, tokens);
    profile.per_sample_entropy_floors.push_back(
        {s, sample_entropy_floor(series[s], r.prefix_length, context)});
    pooled_window.insert(pooled_window.end(),
                         series[s].values.begin() + static_cast<std::ptrdiff_t>(r.prefix_length - 1),
                         series[s].values.begin() + static_cast<std::ptrdiff_t>(context - 1));
  }
  if (profile.per_sample_entropy_floors.empty()) {
    throw PreconditionError("no sample has a non-empty entropy window");
  }
  std::vector<double> floors;
  for (const auto& f : profile.per_sample_entropy_floors) floors.push_back(f.floor);
  profile.entropy_floor = aggregate(floors, Stat::min);
  profile.pooled_entropy_floor = aggregate(pooled_window, Stat::min);

  // Spectra: every layer x grid context x sample.
  const SpectrumTable table = spectrum_table(run, r, options.threads);
  std::vector<double> all_pr;
  std::vector<double> all_er;
  for (std::size_t li = 0; li < r.layers.size(); ++li) {
    for (std::size_t gi = 0; gi < r.grid.size(); ++gi) {
      for (std::size_t s = 0; s < r.samples; ++s) {
        const auto& cell = table[li][gi][s];
        if (!cell) {
          ++prov.skipped_spectra;
          continue;
        }
        all_pr.push_back(cell->pr);
        all_er.push_back(cell->er);
      }
    }
  }
  if (prov.skipped_spectra > 0) {
    prov.warnings.push_back(std::to_string(prov.skipped_spectra) +
                            " (layer, context, sample) spectra skipped: fewer than 2 rows or zero variance");
  }
  if (all_pr.empty()) throw PreconditionError("no sample produced a usable spectrum");
  profile.max_pr = aggregate(all_pr, Stat::max);
  profile.max_er = aggregate(all_er, Stat::max);

  auto summarize = [&](const AggregationScheme& sc) {
    return MetricTriple{aggregate(floors, sc.entropy_stat), aggregate(all_pr, sc.pr_stat),
                        aggregate(all_er, sc.er_stat)};
  };
  for (const auto& preset : scheme_presets()) {
    profile.per_scheme.emplace_back(preset.name, summarize(preset.scheme));
  }
  profile.summary = summarize(scheme);

  const std::size_t main_gi = static_cast<std::size_t>(
      std::find(r.grid.begin(), r.grid.end(), r.context_length) - r.grid.begin());
  for (std::size_t li = 0; li < r.layers.size(); ++li) {
    const auto prs = collect(table[li][main_gi], &SampleSpectrumMetrics::pr);
    const auto ers = collect(table[li][main_gi], &SampleSpectrumMetrics::er);
    if (prs.empty()) {
      prov.warnings.push_back("layer " + std::to_string(r.layers[li]) + ": no usable spectrum");
      continue;
    }
    profile.per_layer_table.push_back(
        {r.layers[li], aggregate(prs, scheme.pr_stat), aggregate(ers, scheme.er_stat)});
  }

  for (std::size_t gi = 0; gi < r.grid.size(); ++gi) {
    const std::size_t g = r.grid[gi];
    ContextRow row;
    row.context_length = g;
    std::vector<double> g_floors;
    for (std::size_t s = 0; s < r.samples; ++s) {
      const std::size_t tokens = series[s].size();
      if (window_nonempty(tokens, r.prefix_length, g)) {
        g_floors.push_back(sample_entropy_floor(series[s], r.prefix_length, std::min(g, tokens)));
      }
    }
    if (!g_floors.empty()) row.entropy = aggregate(g_floors, scheme.entropy_stat);
    std::vector<double> prs;
    std::vector<double> ers;
    for (std::size_t li = 0; li < r.layers.size(); ++li) {
      const auto p = collect(table[li][gi], &SampleSpectrumMetrics::pr);
      const auto e = collect(table[li][gi], &SampleSpectrumMetrics::er);
      prs.insert(prs.end(), p.begin(), p.end());
      ers.insert(ers.end(), e.begin(), e.end());
    }
    if (!prs.empty()) {
      row.pr = aggregate(prs, scheme.pr_stat);
      row.er = aggregate(ers, scheme.er_stat);
    }
    profile.per_context_table.push_back(row);
  }
  return profile;
}

bool detect_hourglass(std::span<const double> depths, std::span<const double> values) {
  if (depths.size() != values.size()) {
    throw PreconditionError("detect_hourglass: depths and values differ in length");
  }
  if (values.size() < 3) return false;
  std::optional<double> interior_min;
  for (std::size_t i = 0; i < depths.size(); ++i) {
    if (depths[i] > 0.2 && depths[i] < 0.8) {
      interior_min = interior_min ? std::min(*interior_min, values[i]) : values[i];
    }
  }
  return interior_min && *interior_min < values.front() && *interior_min < values.back();
}

LayerCurve layer_curve(const TraceRun& run, const AggregationScheme& scheme,
                       const ProfileOptions& options) {
  ProfileOptions all_layers = options;
  if (!all_layers.layers) all_layers.layers = run.manifest().layers;
  const Resolved r = resolve(run, all_layers, /*need_entropy=*/false);
  if (r.layers.size() < 3) {
    throw PreconditionError("layer_curve needs at least 3 layers, run has " +
                            std::to_string(r.layers.size()));
  }
  Resolved single = r;
  single.grid = {r.context_length};
  const SpectrumTable table = spectrum_table(run, single, options.threads);

  LayerCurve curve;
  const double span = static_cast<double>(r.layers.size() - 1);
  for (std::size_t li = 0; li < r.layers.size(); ++li) {
    const auto prs = collect(table[li][0], &SampleSpectrumMetrics::pr);
    const auto ers = collect(table[li][0], &SampleSpectrumMetrics::er);
    if (prs.empty()) {
      throw PreconditionError("layer " + std::to_string(r.layers[li]) + ": no usable spectrum");
    }
    curve.layers.push_back(r.layers[li]);
    curve.layer_depths.push_back(static_cast<double>(li) / span);
    curve.pr_values.push_back(aggregate(prs, scheme.pr_stat));
    curve.er_values.push_back(aggregate(ers, scheme.er_stat));
  }
  curve.hourglass_flag = detect_hourglass(curve.layer_depths, curve.pr_values);
  return curve;
}

}  // namespace lpp
