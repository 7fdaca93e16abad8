#include "lpp/stats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "lpp/error.hpp"
#include "lpp/io.hpp"

namespace lpp {

namespace {

constexpr double kPermutationTolerance = 1e-12;

void check_inputs(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw PreconditionError("correlation: x and y differ in length");
  if (x.size() < 3) throw PreconditionError("correlation: need at least 3 observations");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
      throw PreconditionError("correlation: non-finite input");
    }
  }
}

// Centered copy scaled to unit norm; throws on zero variance.
std::vector<double> standardize(std::span<const double> v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  std::vector<double> out(v.size());
  double ss = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = v[i] - mean;
    ss += out[i] * out[i];
  }
  const double max_abs = std::abs(*std::max_element(v.begin(), v.end(), [](double a, double b) {
    return std::abs(a) < std::abs(b);
  }));
  const double norm = std::sqrt(ss);
  if (!(norm > 0.0) || norm <= max_abs * 1e-14 * static_cast<double>(v.size())) {
    throw PreconditionError("degenerate input: zero variance");
  }
  for (double& e : out) e /= norm;
  return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double clamp_unit(double r) { return std::clamp(r, -1.0, 1.0); }

double exact_p(const std::vector<double>& zx, const std::vector<double>& zy, double r) {
  const std::size_t n = zx.size();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  const double bar = std::abs(r) - kPermutationTolerance;
  std::uint64_t hits = 0;
  std::uint64_t total = 0;
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += zx[i] * zy[perm[i]];
    if (std::abs(clamp_unit(s)) >= bar) ++hits;
    ++total;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(hits) / static_cast<double>(total);
}

double t_p(double r, std::size_t n) {
  const double df = static_cast<double>(n - 2);
  const double denom = 1.0 - r * r;
  if (denom <= 0.0) return 0.0;
  const double t = std::abs(r) * std::sqrt(df / denom);
  const boost::math::students_t dist(df);
  return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, t)), 0.0, 1.0);
}

Correlation correlate(std::span<const double> x, std::span<const double> y) {
  const auto zx = standardize(x);
  const auto zy = standardize(y);
  Correlation c;
  c.coefficient = clamp_unit(dot(zx, zy));
  if (x.size() <= kExactPermutationMaxN) {
    c.p_value = exact_p(zx, zy, c.coefficient);
    c.exact = true;
  } else {
    c.p_value = t_p(c.coefficient, x.size());
  }
  return c;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

double latent_value(const LatentProfile& p, const std::string& metric,
                    const std::optional<std::string>& scheme) {
  if (!scheme) {
    if (metric == "entropy_floor") return p.entropy_floor;
    if (metric == "max_er") return p.max_er;
    return p.max_pr;
  }
  for (const auto& [name, triple] : p.per_scheme) {
    if (name != *scheme) continue;
    if (metric == "entropy_floor") return triple.entropy;
    if (metric == "max_er") return triple.er;
    return triple.pr;
  }
  throw PreconditionError("profile '" + p.model_id + "' has no values for scheme '" + *scheme +
                          "'");
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ", ") + s;
  return out;
}

}  // namespace

std::vector<double> midranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

Correlation pearson(std::span<const double> x, std::span<const double> y) {
  check_inputs(x, y);
  return correlate(x, y);
}

Correlation spearman(std::span<const double> x, std::span<const double> y) {
  check_inputs(x, y);
  const auto rx = midranks(x);
  const auto ry = midranks(y);
  return correlate(rx, ry);
}

std::vector<std::string> ScoreTable::metrics() const {
  if (rows.empty()) return {};
  std::vector<std::string> out;
  for (const auto& [metric, value] : rows.begin()->second) out.push_back(metric);
  return out;
}

ScoreTable parse_score_table(std::string_view csv_text) {
  std::istringstream in{std::string(csv_text)};
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  ScoreTable table;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    const std::string where = "score table line " + std::to_string(line_no) + ": ";
    if (!header_seen) {
      if (fields != std::vector<std::string>{"model_id", "metric", "value"}) {
        throw FormatError(where + "expected header 'model_id,metric,value'");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != 3) throw FormatError(where + "expected 3 fields");
    if (fields[0].empty() || fields[1].empty()) throw FormatError(where + "empty model_id or metric");
    double value = 0.0;
    const char* first = fields[2].data();
    const char* last = first + fields[2].size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
      throw FormatError(where + "bad value '" + fields[2] + "'");
    }
    if (!table.rows[fields[0]].emplace(fields[1], value).second) {
      throw FormatError(where + "duplicate entry for " + fields[0] + "/" + fields[1]);
    }
  }
  if (!header_seen) throw FormatError("score table: missing header 'model_id,metric,value'");
  if (!table.rows.empty()) {
    const auto expected = table.metrics();
    for (const auto& [model, metrics] : table.rows) {
      std::vector<std::string> names;
      for (const auto& [metric, value] : metrics) names.push_back(metric);
      if (names != expected) {
        throw FormatError("score table: model '" + model + "' reports a different metric set");
      }
    }
  }
  return table;
}

ScoreTable load_score_table(const std::filesystem::path& path) {
  try {
    return parse_score_table(read_text_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

const std::vector<std::string>& latent_metric_names() {
  static const std::vector<std::string> kNames{"entropy_floor", "max_er", "max_pr"};
  return kNames;
}

CorrelationReport correlation_matrix(std::span<const LatentProfile> profiles,
                                     const ScoreTable& scores,
                                     const std::optional<std::string>& scheme) {
  std::map<std::string, const LatentProfile*> by_model;
  for (const auto& p : profiles) {
    if (!by_model.emplace(p.model_id, &p).second) {
      throw PreconditionError("duplicate profile for model '" + p.model_id + "'");
    }
  }
  CorrelationReport report;
  report.scheme = scheme.value_or("canonical");
  std::vector<std::string> only_profiles;
  std::vector<std::string> only_scores;
  for (const auto& [model, p] : by_model) {
    if (scores.rows.count(model)) {
      report.models.push_back(model);
    } else {
      only_profiles.push_back(model);
    }
  }
  for (const auto& [model, row] : scores.rows) {
    if (!by_model.count(model)) only_scores.push_back(model);
  }
  if (report.models.size() < 3) {
    throw PreconditionError("correlation needs at least 3 models present in both profiles and "
                            "scores, found " + std::to_string(report.models.size()));
  }
  report.method_notes.push_back(
      "Spearman (midrank ties) and Pearson are both reported for every pair");
  report.method_notes.push_back(
      "two-sided p-values: exact permutation test over all n! pairings for n <= 9, "
      "Student t with n-2 degrees of freedom otherwise");
  if (!only_profiles.empty()) {
    report.method_notes.push_back("excluded (no scores): " + join(only_profiles));
  }
  if (!only_scores.empty()) {
    report.method_notes.push_back("excluded (no profile): " + join(only_scores));
  }
  for (const auto& latent : latent_metric_names()) {
    std::vector<double> xs;
    for (const auto& model : report.models) {
      xs.push_back(latent_value(*by_model.at(model), latent, scheme));
    }
    for (const auto& metric : scores.metrics()) {
      std::vector<double> ys;
      for (const auto& model : report.models) ys.push_back(scores.rows.at(model).at(metric));
      CorrelationPair pair;
      pair.latent_metric = latent;
      pair.score_metric = metric;
      pair.n = xs.size();
      pair.latent_values = xs;
      pair.score_values = ys;
      try {
        const Correlation s = spearman(xs, ys);
        const Correlation r = pearson(xs, ys);
        pair.spearman_rho = s.coefficient;
        pair.spearman_p = s.p_value;
        pair.pearson_r = r.coefficient;
        pair.pearson_p = r.p_value;
        pair.exact_p = s.exact;
      } catch (const PreconditionError&) {
        report.method_notes.push_back("skipped " + latent + " x " + metric +
                                      ": constant column");
        continue;
      }
      report.pairs.push_back(std::move(pair));
    }
  }
  return report;
}

}  // namespace lpp
