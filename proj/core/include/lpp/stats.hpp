#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lpp/profiler.hpp"

namespace lpp {

struct Correlation {
  double coefficient = 0.0;
  double p_value = 1.0;
  /// True when p comes from full enumeration of the n! pairings.
  bool exact = false;
};

/// Largest n for which p-values are computed by enumerating every pairing.
inline constexpr std::size_t kExactPermutationMaxN = 9;

/// Two-sided p for |r| >= |r_observed|: exact permutation test for n <= 9,
/// otherwise Student t with n - 2 degrees of freedom. Requires n >= 3 and
/// nonzero variance in both inputs ("degenerate input" otherwise).
Correlation pearson(std::span<const double> x, std::span<const double> y);

/// Pearson on midranks, with the same p-value rule.
Correlation spearman(std::span<const double> x, std::span<const double> y);

/// 1-based ranks; tied values share the mean of their positions.
std::vector<double> midranks(std::span<const double> values);

/// model_id -> metric -> value.
struct ScoreTable {
  std::map<std::string, std::map<std::string, double>> rows;

  std::vector<std::string> metrics() const;
};

/// CSV with header `model_id,metric,value`. Every model must report the same
/// metric set and each (model, metric) pair must appear once.
ScoreTable parse_score_table(std::string_view csv_text);
ScoreTable load_score_table(const std::filesystem::path& path);

struct CorrelationPair {
  std::string latent_metric;
  std::string score_metric;
  double spearman_rho = 0.0;
  double spearman_p = 1.0;
  double pearson_r = 0.0;
  double pearson_p = 1.0;
  std::size_t n = 0;
  bool exact_p = false;
  /// Latent and score columns in `models` order.
  std::vector<double> latent_values;
  std::vector<double> score_values;
};

struct CorrelationReport {
  std::vector<std::string> models;
  std::string scheme;
  std::vector<CorrelationPair> pairs;
  std::vector<std::string> method_notes;
};

/// entropy_floor, max_er, max_pr.
const std::vector<std::string>& latent_metric_names();

/// Correlates each latent metric against each score column over the models
/// present on both sides (sorted by model_id). With `scheme` set, latent values
/// come from that entry of per_scheme instead of the canonical fields. Pairs
/// with a constant column are skipped and noted.
CorrelationReport correlation_matrix(std::span<const LatentProfile> profiles,
                                     const ScoreTable& scores,
                                     const std::optional<std::string>& scheme = std::nullopt);

}  // namespace lpp
