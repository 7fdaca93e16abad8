#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "lpp/tensor.hpp"

namespace lpp {

/// Next-token entropy per position, in nats.
struct EntropySeries {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  bool empty() const { return values.empty(); }
  double operator[](std::size_t t) const { return values[t]; }
};

/// Shannon entropy (nats) of softmax(logits), computed with the max-shift so
/// large logits cannot overflow. Result is clamped into [0, ln V].
double softmax_entropy(std::span<const double> logits);
double softmax_entropy(std::span<const float> logits);

/// One softmax_entropy per row of a row-major T x V matrix.
EntropySeries entropy_series(std::span<const double> row_major, std::size_t vocab);
EntropySeries entropy_series(std::span<const float> row_major, std::size_t vocab);
EntropySeries entropy_series(const TensorBlob& logits);

/// Eigenvalues of a hidden-state covariance matrix, descending and
/// non-negative. C is symmetric PSD, so these double as its singular values.
struct EigSpectrum {
  std::vector<double> eigenvalues;
  std::size_t source_n = 0;
  std::size_t source_d = 0;

  std::size_t positive_count() const;
  double total() const;
};

/// Relative tolerance below which negative eigenvalues are clamped to zero.
inline constexpr double kNegativeEigenTolerance = 1e-9;

/// Sorts descending and clamps negatives within kNegativeEigenTolerance of the
/// largest magnitude; larger negatives throw.
EigSpectrum make_spectrum(std::vector<double> eigenvalues, std::size_t n, std::size_t d);

/// Spectrum of C = Xc^T Xc / (n - 1), where rows of `hidden` are token
/// observations and columns hidden units. Works through the singular values
/// of the centered n x d matrix, so cost follows min(n, d); the result has
/// min(n, d) entries.
EigSpectrum covariance_spectrum(const Eigen::MatrixXd& hidden);

/// Same, on the first min(T, max_rows) rows of a [T, d] hidden tensor.
EigSpectrum covariance_spectrum(const TensorBlob& hidden, std::size_t max_rows);

/// f32 tensor rows widened to a double matrix.
Eigen::MatrixXd to_matrix(const TensorBlob& blob, std::size_t max_rows);

/// exp of the Shannon entropy of the normalized spectrum; lies in [1, rank].
double effective_rank(const EigSpectrum& spectrum);

/// (sum lambda)^2 / sum lambda^2; lies in [1, rank].
double participation_ratio(const EigSpectrum& spectrum);

}  // namespace lpp
