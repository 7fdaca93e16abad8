#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lpp/spectral.hpp"
#include "lpp/trace.hpp"

namespace lpp {

enum class Stat { min, max, mean, median };

std::string_view to_string(Stat stat);
Stat parse_stat(std::string_view text);

/// min / max / mean as usual; median averages the two middle values for even
/// lengths. Throws PreconditionError on an empty list.
double aggregate(std::span<const double> values, Stat stat);

/// How per-sample (and per-layer, per-context) values collapse into one
/// model-level number for each metric.
struct AggregationScheme {
  Stat entropy_stat = Stat::min;
  Stat pr_stat = Stat::max;
  Stat er_stat = Stat::max;

  static AggregationScheme canonical() { return {Stat::min, Stat::max, Stat::max}; }
  static AggregationScheme uniform(Stat s) { return {s, s, s}; }

  friend bool operator==(const AggregationScheme&, const AggregationScheme&) = default;
};

struct NamedScheme {
  std::string name;
  AggregationScheme scheme;
};

/// canonical, all-median, all-mean, all-min, all-max, in that order.
const std::vector<NamedScheme>& scheme_presets();

/// Accepts a preset name or "entropy:pr:er" stats such as "median:max:max".
AggregationScheme parse_scheme(std::string_view text);
std::string scheme_name(const AggregationScheme& scheme);

struct MetricTriple {
  double entropy = 0.0;
  double pr = 0.0;
  double er = 0.0;

  friend bool operator==(const MetricTriple&, const MetricTriple&) = default;
};

/// Minimum of series[t] for t in [prefix_length - 1, context_length - 2]:
/// the entropies seen while the context grows from prefix_length to
/// context_length tokens (position t predicts token t + 1).
double sample_entropy_floor(const EntropySeries& series, std::size_t prefix_length,
                            std::size_t context_length);

struct SampleSpectrumMetrics {
  std::size_t sample = 0;
  double pr = 0.0;
  double er = 0.0;
};

struct LayerMetrics {
  int layer = kLastLayer;
  std::size_t context_length = 0;
  std::vector<SampleSpectrumMetrics> per_sample;
  /// Samples with fewer than two usable rows or a zero-variance spectrum.
  std::vector<std::size_t> skipped;
  double pooled_pr = 0.0;
  double pooled_er = 0.0;
};

/// PR and ER for every sample on the first min(T, context_length) rows of
/// `layer`, pooled with the scheme's pr/er statistics.
LayerMetrics layer_metrics(const TraceRun& run, int layer, std::size_t context_length,
                           const AggregationScheme& scheme = AggregationScheme::canonical(),
                           std::size_t threads = 1);

enum class EntropySource { automatic, entropy_payload, logits };

std::string_view to_string(EntropySource source);
EntropySource parse_entropy_source(std::string_view text);

inline constexpr std::size_t kDefaultContextLength = 200;
inline constexpr std::size_t kDefaultPrefixLength = 100;
inline constexpr std::size_t kDefaultSampleCount = 100;

/// Knobs for latent_profile. Unset values take the defaults via
/// with_defaults().
struct ProfileOptions {
  std::optional<std::size_t> context_length;
  std::optional<std::size_t> prefix_length;
  std::optional<std::vector<int>> layers;
  std::optional<std::size_t> max_samples;
  /// Extra context lengths for the per-context table; each must not exceed
  /// the resolved context_length, which is always included.
  std::vector<std::size_t> context_grid;
  EntropySource entropy_source = EntropySource::automatic;
  std::size_t threads = 1;
};

/// Fills unset fields: context 200, prefix 100 and 100 samples, each capped at
/// what the manifest provides, and the last stored layer.
ProfileOptions with_defaults(const TraceManifest& manifest, ProfileOptions options);

struct SampleFloor {
  std::size_t sample = 0;
  double floor = 0.0;
};

struct LayerRow {
  int layer = kLastLayer;
  double pr = 0.0;
  double er = 0.0;
};

struct ContextRow {
  std::size_t context_length = 0;
  std::optional<double> entropy;
  std::optional<double> pr;
  std::optional<double> er;
};

struct ProfileProvenance {
  std::string dataset_id;
  std::int64_t seed = 0;
  std::size_t context_length = 0;
  std::size_t prefix_length = 0;
  std::size_t num_samples = 0;
  std::vector<int> layers;
  std::vector<std::size_t> context_grid;
  std::string entropy_source;
  std::size_t skipped_entropy_samples = 0;
  std::size_t skipped_spectra = 0;
  std::vector<std::string> warnings;
};

/// A model's compact latent signature plus the tables behind it.
struct LatentProfile {
  std::string model_id;
  /// Canonical extremal statistics: min entropy, max ER, max PR over every
  /// sample, layer and context computed.
  double entropy_floor = 0.0;
  double max_er = 0.0;
  double max_pr = 0.0;
  /// Minimum over the union of all evaluation windows, computed without the
  /// per-sample step. Equal to entropy_floor by construction.
  double pooled_entropy_floor = 0.0;
  /// Summary under the scheme the profile was requested with.
  std::string scheme;
  MetricTriple summary;
  std::vector<std::pair<std::string, MetricTriple>> per_scheme;
  std::vector<SampleFloor> per_sample_entropy_floors;
  std::vector<LayerRow> per_layer_table;
  std::vector<ContextRow> per_context_table;
  ProfileProvenance provenance;
};

/// Throws PreconditionError when the run has neither logits nor entropy
/// payloads, lacks hidden states, or no sample yields a usable value.
LatentProfile latent_profile(const TraceRun& run,
                             const AggregationScheme& scheme = AggregationScheme::canonical(),
                             const ProfileOptions& options = {});

/// Per-layer PR/ER across normalized depth.
struct LayerCurve {
  std::vector<int> layers;
  std::vector<double> layer_depths;
  std::vector<double> pr_values;
  std::vector<double> er_values;
  bool hourglass_flag = false;
};

/// True iff the minimum over interior depths (0.2 < depth < 0.8) is strictly
/// below both the value at depth 0 and the value at depth 1.
bool detect_hourglass(std::span<const double> depths, std::span<const double> values);

/// Requires at least three layers (all stored layers unless options.layers is
/// set); depth of the i-th layer is i/(L-1).
/// The flag is evaluated on PR.
LayerCurve layer_curve(const TraceRun& run,
                       const AggregationScheme& scheme = AggregationScheme::canonical(),
                       const ProfileOptions& options = {});

}  // namespace lpp
