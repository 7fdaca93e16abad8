#include "lpp/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/SVD>

#include "lpp/error.hpp"

namespace lpp {
namespace {

template <typename T>
double entropy_impl(std::span<const T> logits) {
  if (logits.empty()) throw PreconditionError("softmax_entropy: empty logit vector");
  double max_logit = -std::numeric_limits<double>::infinity();
  for (T v : logits) {
    if (!std::isfinite(v)) throw PreconditionError("softmax_entropy: non-finite logit");
    max_logit = std::max(max_logit, static_cast<double>(v));
  }
  // H = ln Z - sum_v p_v (x_v - max); underflowed terms contribute 0 (0 ln 0 := 0).
  double z = 0.0;
  double weighted = 0.0;
  for (T v : logits) {
    const double shifted = static_cast<double>(v) - max_logit;
    const double e = std::exp(shifted);
    z += e;
    weighted += e * shifted;
  }
  const double h = std::log(z) - weighted / z;
  return std::clamp(h, 0.0, std::log(static_cast<double>(logits.size())));
}

template <typename T>
EntropySeries series_impl(std::span<const T> data, std::size_t vocab) {
  if (vocab == 0 || data.size() % vocab != 0) {
    throw PreconditionError("entropy_series: data size is not a multiple of the vocabulary");
  }
  const std::size_t rows = data.size() / vocab;
  if (rows == 0) throw PreconditionError("entropy_series: need at least one row");
  EntropySeries series;
  series.values.reserve(rows);
  for (std::size_t t = 0; t < rows; ++t) {
    try {
      series.values.push_back(entropy_impl(data.subspan(t * vocab, vocab)));
    } catch (const PreconditionError& e) {
      throw PreconditionError("row " + std::to_string(t) + ": " + e.what());
    }
  }
  return series;
}

double largest_eigenvalue(const EigSpectrum& spectrum) {
  double largest = 0.0;
  for (double v : spectrum.eigenvalues) largest = std::max(largest, v);
  return largest;
}

}  // namespace

double softmax_entropy(std::span<const double> logits) { return entropy_impl(logits); }
double softmax_entropy(std::span<const float> logits) { return entropy_impl(logits); }

EntropySeries entropy_series(std::span<const double> row_major, std::size_t vocab) {
  return series_impl(row_major, vocab);
}

EntropySeries entropy_series(std::span<const float> row_major, std::size_t vocab) {
  return series_impl(row_major, vocab);
}

EntropySeries entropy_series(const TensorBlob& logits) {
  if (logits.rank() != 2) throw PreconditionError("entropy_series: logits must be [T, V]");
  return series_impl(std::span<const float>(logits.data), logits.dims[1]);
}

std::size_t EigSpectrum::positive_count() const {
  return static_cast<std::size_t>(
      std::count_if(eigenvalues.begin(), eigenvalues.end(), [](double v) { return v > 0.0; }));
}

double EigSpectrum::total() const {
  return std::accumulate(eigenvalues.begin(), eigenvalues.end(), 0.0);
}

EigSpectrum make_spectrum(std::vector<double> eigenvalues, std::size_t n, std::size_t d) {
  double largest = 0.0;
  for (double v : eigenvalues) {
    if (!std::isfinite(v)) throw PreconditionError("spectrum: non-finite eigenvalue");
    largest = std::max(largest, std::abs(v));
  }
  const double tol = kNegativeEigenTolerance * largest;
  for (double& v : eigenvalues) {
    if (v < 0.0) {
      if (v < -tol) {
        throw PreconditionError("spectrum: negative eigenvalue " + std::to_string(v) + " beyond tolerance");
      }
      v = 0.0;
    }
  }
  std::sort(eigenvalues.begin(), eigenvalues.end(), std::greater<>());
  return EigSpectrum{std::move(eigenvalues), n, d};
}

EigSpectrum covariance_spectrum(const Eigen::MatrixXd& hidden) {
  const auto n = static_cast<std::size_t>(hidden.rows());
  const auto d = static_cast<std::size_t>(hidden.cols());
  if (n < 2) throw PreconditionError("covariance_spectrum: insufficient observations (n < 2)");
  if (d == 0) throw PreconditionError("covariance_spectrum: no features");
  if (!hidden.allFinite()) throw PreconditionError("covariance_spectrum: non-finite entry");

  // Shift by the first row before centering: identical rows cancel exactly.
  Eigen::MatrixXd centered = hidden.rowwise() - hidden.row(0);
  const Eigen::RowVectorXd mean = centered.colwise().mean();
  centered.rowwise() -= mean;

  const Eigen::BDCSVD<Eigen::MatrixXd> svd(centered);
  const Eigen::VectorXd& singular = svd.singularValues();
  const double cutoff = singular.size() > 0
                            ? singular(0) * static_cast<double>(std::max(n, d)) *
                                  std::numeric_limits<double>::epsilon()
                            : 0.0;
  std::vector<double> eigenvalues(static_cast<std::size_t>(singular.size()));
  for (Eigen::Index i = 0; i < singular.size(); ++i) {
    const double s = singular(i);
    eigenvalues[static_cast<std::size_t>(i)] = s > cutoff ? s * s / static_cast<double>(n - 1) : 0.0;
  }
  return make_spectrum(std::move(eigenvalues), n, d);
}

Eigen::MatrixXd to_matrix(const TensorBlob& blob, std::size_t max_rows) {
  if (blob.rank() != 2) throw PreconditionError("expected a rank-2 tensor");
  const std::size_t rows = std::min(blob.dims[0], max_rows);
  const std::size_t cols = blob.dims[1];
  using RowMajorF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const RowMajorF> view(blob.data.data(), static_cast<Eigen::Index>(rows),
                                         static_cast<Eigen::Index>(cols));
  return view.cast<double>();
}

EigSpectrum covariance_spectrum(const TensorBlob& hidden, std::size_t max_rows) {
  return covariance_spectrum(to_matrix(hidden, max_rows));
}

// Both ratios work on lambda / lambda_max so scale drops out before any sums.
double effective_rank(const EigSpectrum& spectrum) {
  const double largest = largest_eigenvalue(spectrum);
  if (!(largest > 0.0)) throw PreconditionError("effective_rank: degenerate spectrum");
  double sum = 0.0;
  double sum_mu_log_mu = 0.0;
  for (double v : spectrum.eigenvalues) {
    if (v <= 0.0) continue;
    const double mu = v / largest;
    sum += mu;
    sum_mu_log_mu += mu * std::log(mu);
  }
  // exp(H) = S * exp(-sum mu ln mu / S); for a flat spectrum the exponent is
  // exactly zero, so ER of k equal eigenvalues comes out as k exactly.
  const double er = sum * std::exp(-sum_mu_log_mu / sum);
  return std::clamp(er, 1.0, static_cast<double>(spectrum.positive_count()));
}

double participation_ratio(const EigSpectrum& spectrum) {
  const double largest = largest_eigenvalue(spectrum);
  if (!(largest > 0.0)) throw PreconditionError("participation_ratio: degenerate spectrum");
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double v : spectrum.eigenvalues) {
    const double mu = v / largest;
    sum += mu;
    sum_sq += mu * mu;
  }
  return std::clamp(sum * sum / sum_sq, 1.0, static_cast<double>(spectrum.positive_count()));
}

}  // namespace lpp
