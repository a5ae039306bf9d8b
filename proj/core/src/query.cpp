#include "sqra/query.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sqra {

Matrix pairwise_gains(const Matrix& rows, const GmmModel& model) {
  if (rows.cols() != model.feature_dim()) {
    throw std::invalid_argument("pairwise_gains: projection width must equal feature dimension");
  }
  const int z = model.num_classes();
  // projected whitened centroids, one per column
  const Matrix whitened = model.inv_sqrt_cov().asDiagonal() * model.centroids().transpose();
  const Matrix projected = rows * whitened;
  Matrix gains = Matrix::Zero(z, z);
  for (int i = 0; i < z; ++i) {
    for (int j = i + 1; j < z; ++j) {
      const double g = (projected.col(i) - projected.col(j)).squaredNorm();
      gains(i, j) = g;
      gains(j, i) = g;
    }
  }
  return gains;
}

Projection::Projection(Matrix rows, const GmmModel& model) : rows_(std::move(rows)) {
  const auto l = rows_.rows();
  if (l < 1 || l > model.feature_dim() || rows_.cols() != model.feature_dim()) {
    throw std::invalid_argument("Projection: need 1 <= l <= d rows of width d");
  }
  const Matrix gram = rows_ * rows_.transpose();
  const double err = (gram - Matrix::Identity(l, l)).cwiseAbs().maxCoeff();
  if (!(err <= 1e-10)) {
    throw std::invalid_argument("Projection: rows are not orthonormal (max |PP^T - I| = " +
                                std::to_string(err) + ")");
  }
  gains_ = pairwise_gains(rows_, model);
}

Projection optimal_projection(const GmmModel& model, int query_dim) {
  const int d = model.feature_dim();
  if (query_dim < 1 || query_dim > d) {
    throw std::domain_error("optimal_projection: query dimension must satisfy 1 <= l <= d");
  }
  const Matrix centered =
      model.centroids().rowwise() - model.centroids().colwise().mean();  // |Z| x d
  const Matrix whitened = centered * model.inv_sqrt_cov().asDiagonal();
  const Matrix scatter = whitened.transpose() * whitened;  // d x d

  Eigen::SelfAdjointEigenSolver<Matrix> solver(scatter);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("optimal_projection: symmetric eigendecomposition failed");
  }
  const Vector& values = solver.eigenvalues();
  std::vector<int> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return std::abs(values[a]) > std::abs(values[b]); });

  Matrix rows(query_dim, d);
  for (int r = 0; r < query_dim; ++r) {
    Vector v = solver.eigenvectors().col(order[static_cast<std::size_t>(r)]);
    for (int n = 0; n < d; ++n) {
      if (std::abs(v[n]) > 1e-12) {
        if (v[n] < 0.0) v = -v;
        break;
      }
    }
    rows.row(r) = v.transpose();
  }
  return Projection(std::move(rows), model);
}

double projection_objective(const Projection& projection) {
  const auto z = projection.gains().rows();
  // the gain matrix is symmetric with zero diagonal: full sum = 2 * sum_{i<j}
  return projection.gains().sum() / (static_cast<double>(z) * static_cast<double>(z - 1));
}

Matrix encoding_matrix(const Projection& projection, const GmmModel& model) {
  const double scale = std::sqrt(static_cast<double>(model.feature_dim()) / projection.query_dim());
  return scale * projection.rows() * model.inv_sqrt_cov().asDiagonal();
}

Vector encode_query(const Vector& x_q, const Projection& projection, const GmmModel& model) {
  if (x_q.size() != model.feature_dim()) throw std::invalid_argument("encode: feature length mismatch");
  const double scale = std::sqrt(static_cast<double>(model.feature_dim()) / projection.query_dim());
  return scale * (projection.rows() * x_q.cwiseProduct(model.inv_sqrt_cov()));
}

Vector encode_key(const Vector& x_m, const Projection& projection, const GmmModel& model) {
  return encode_query(x_m, projection, model);
}

double matching_score(const Vector& key, const Vector& query, int feature_dim) {
  if (key.size() != query.size()) throw std::invalid_argument("matching_score: length mismatch");
  return std::exp(-(key - query).squaredNorm() / feature_dim);
}

void write_projection(std::ostream& out, const Projection& projection) {
  const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
  out << projection.query_dim() << ' ' << projection.feature_dim() << '\n';
  for (int r = 0; r < projection.query_dim(); ++r) {
    for (int c = 0; c < projection.feature_dim(); ++c) {
      if (c) out << ' ';
      out << projection.rows()(r, c);
    }
    out << '\n';
  }
  out.precision(old_precision);
}

Projection read_projection(std::istream& in, const GmmModel& model) {
  int l = 0, d = 0;
  if (!(in >> l >> d) || l < 1 || d < 1) {
    throw std::runtime_error("read_projection: malformed header (expected \"l d\")");
  }
  Matrix rows(l, d);
  for (int r = 0; r < l; ++r) {
    for (int c = 0; c < d; ++c) {
      if (!(in >> rows(r, c))) {
        throw std::runtime_error("read_projection: truncated matrix at row " + std::to_string(r + 1));
      }
    }
  }
  return Projection(std::move(rows), model);
}

}  // namespace sqra
