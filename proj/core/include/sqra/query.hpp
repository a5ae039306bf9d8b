#pragma once

#include <iosfwd>

#include "sqra/gmm.hpp"

namespace sqra {

/// Orthonormal l x d projection with the pairwise discriminant gains it
/// induces, G_ij = || P Sigma^{-1/2} (mu_i - mu_j) ||^2.
class Projection {
 public:
  /// Validates P P^T = I (to 1e-10) and caches the gains for `model`.
  Projection(Matrix rows, const GmmModel& model);

  int query_dim() const { return static_cast<int>(rows_.rows()); }
  int feature_dim() const { return static_cast<int>(rows_.cols()); }
  const Matrix& rows() const { return rows_; }
  const Matrix& gains() const { return gains_; }

 private:
  Matrix rows_;
  Matrix gains_;
};

/// Pairwise gains of an arbitrary l x d matrix (not checked for orthonormality).
Matrix pairwise_gains(const Matrix& rows, const GmmModel& model);

/// Fisher-LDA projection maximising the average discriminant gain: the top-l
/// eigenvectors of sum_i Sigma^{-1/2}(mu_i - mu_bar)(mu_i - mu_bar)^T Sigma^{-1/2}.
/// Eigenvectors are ordered by descending eigenvalue and signed so their
/// first nonzero entry is positive.
Projection optimal_projection(const GmmModel& model, int query_dim);

/// Mean pairwise gain 2/(|Z|(|Z|-1)) sum_{i<j} G_ij.
double projection_objective(const Projection& projection);

/// The linear map sqrt(d/l) P Sigma^{-1/2} shared by queries and keys.
Matrix encoding_matrix(const Projection& projection, const GmmModel& model);

Vector encode_query(const Vector& x_q, const Projection& projection, const GmmModel& model);
Vector encode_key(const Vector& x_m, const Projection& projection, const GmmModel& model);

/// exp(-||k - q||^2 / d).
double matching_score(const Vector& key, const Vector& query, int feature_dim);

/// Plain-text export: a header line "l d" then l rows of d decimals.
void write_projection(std::ostream& out, const Projection& projection);
Projection read_projection(std::istream& in, const GmmModel& model);

}  // namespace sqra
