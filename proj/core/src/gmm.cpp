#include "sqra/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>

namespace sqra {

GmmModel::GmmModel(Matrix centroids, Vector cov_diag)
    : centroids_(std::move(centroids)), cov_diag_(std::move(cov_diag)) {
  if (centroids_.rows() < 2) throw std::invalid_argument("GmmModel: need at least two classes");
  if (centroids_.cols() < 1) throw std::invalid_argument("GmmModel: feature dimension must be >= 1");
  if (cov_diag_.size() != centroids_.cols()) {
    throw std::invalid_argument("GmmModel: covariance diagonal length must equal feature dimension");
  }
  if (!centroids_.allFinite()) throw std::invalid_argument("GmmModel: centroids must be finite");
  for (Eigen::Index n = 0; n < cov_diag_.size(); ++n) {
    if (!(cov_diag_[n] > 0.0) || !std::isfinite(cov_diag_[n])) {
      throw std::invalid_argument("GmmModel: variances must be strictly positive and finite");
    }
  }
  sqrt_cov_ = cov_diag_.cwiseSqrt();
  inv_sqrt_cov_ = sqrt_cov_.cwiseInverse();
}

GmmModel GmmModel::isotropic(Matrix centroids, double variance) {
  const auto d = centroids.cols();
  return GmmModel(std::move(centroids), Vector::Constant(d, variance));
}

Vector GmmModel::sample(ClassId z, RandomStream& rng) const {
  Vector x(feature_dim());
  for (int n = 0; n < feature_dim(); ++n) x[n] = centroids_(z, n) + sqrt_cov_[n] * rng.normal();
  return x;
}

Matrix build_centroids(int num_classes, int feature_dim) {
  if (num_classes < 2) throw std::domain_error("build_centroids: num_classes must be >= 2");
  if (feature_dim < 1) throw std::domain_error("build_centroids: feature_dim must be >= 1");
  if (feature_dim < num_classes) {
    std::cerr << "warning: feature_dim < num_classes; some centroids coincide\n";
  }
  Matrix mu = Matrix::Ones(num_classes, feature_dim);
  const long long d = feature_dim;
  const long long z = num_classes;
  for (long long i = 1; i <= z; ++i) {
    const long long lo = d * (i - 1) / z;
    const long long hi = d * i / z;
    // one-based positions lo < j <= hi
    for (long long j = lo + 1; j <= hi; ++j) mu(i - 1, j - 1) = -1.0;
  }
  return mu;
}

double average_discriminant_gain(const GmmModel& model) {
  const int z = model.num_classes();
  const Vector inv_cov = model.cov_diag().cwiseInverse();
  double total = 0.0;
  for (int i = 0; i < z; ++i) {
    for (int j = i + 1; j < z; ++j) {
      const Vector diff = (model.centroids().row(i) - model.centroids().row(j)).transpose();
      total += diff.cwiseProduct(diff).dot(inv_cov);
    }
  }
  return 2.0 * total / (static_cast<double>(z) * (z - 1));
}

double calibrate_covariance(const Matrix& centroids, double target_gain) {
  if (!(target_gain > 0.0) || !std::isfinite(target_gain)) {
    throw std::domain_error("calibrate_covariance: target gain must be positive");
  }
  const double unit_gain = average_discriminant_gain(GmmModel::isotropic(centroids, 1.0));
  if (unit_gain == 0.0) {
    throw std::invalid_argument("calibrate_covariance: degenerate centroids (all identical)");
  }
  // gain(C) = gain(1) / C for Sigma = C I
  return unit_gain / target_gain;
}

ClassId sample_device_class(ClassId query_class, int num_classes, double p_pos,
                            RandomStream& rng) {
  if (rng.bernoulli(p_pos)) return query_class;
  const ClassId other = rng.uniform_int(num_classes - 1);
  return other >= query_class ? other + 1 : other;
}

Scenario sample_scenario(const GmmModel& model, int num_devices, double p_pos,
                         RandomStream& rng) {
  if (!(p_pos >= 0.0 && p_pos <= 1.0)) throw std::domain_error("sample_scenario: p_pos must be in [0,1]");
  if (num_devices < 0) throw std::domain_error("sample_scenario: num_devices must be >= 0");
  Scenario s;
  s.query_class = rng.uniform_int(model.num_classes());
  s.device_classes.resize(static_cast<std::size_t>(num_devices));
  for (auto& z : s.device_classes) z = sample_device_class(s.query_class, model.num_classes(), p_pos, rng);
  s.query_feature = model.sample(s.query_class, rng);
  s.device_features.resize(model.feature_dim(), num_devices);
  for (int m = 0; m < num_devices; ++m) {
    s.device_features.col(m) = model.sample(s.device_classes[static_cast<std::size_t>(m)], rng);
  }
  return s;
}

double squared_mahalanobis(const Vector& a, const Vector& b, const GmmModel& model) {
  return ((a - b).cwiseProduct(model.inv_sqrt_cov())).squaredNorm();
}

double relevancy_score(const Vector& x_m, const Vector& x_q, const GmmModel& model) {
  return std::exp(-squared_mahalanobis(x_m, x_q, model) / model.feature_dim());
}

namespace {

void check_weights(std::span<const double> weights, Eigen::Index count) {
  if (weights.empty() || count == 0) throw std::invalid_argument("fuse_features: empty feature set");
  if (static_cast<Eigen::Index>(weights.size()) != count) {
    throw std::invalid_argument("fuse_features: one weight per feature required");
  }
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("fuse_features: weights must be strictly positive and finite");
    }
  }
}

}  // namespace

Vector fuse_features(const Matrix& features, std::span<const double> weights) {
  check_weights(weights, features.cols());
  Vector acc = Vector::Zero(features.rows());
  double total = 0.0;
  for (Eigen::Index m = 0; m < features.cols(); ++m) {
    acc += weights[static_cast<std::size_t>(m)] * features.col(m);
    total += weights[static_cast<std::size_t>(m)];
  }
  return acc / total;
}

std::vector<double> class_posterior(const Vector& fused, std::span<const double> weights,
                                    const GmmModel& model) {
  check_weights(weights, static_cast<Eigen::Index>(weights.size()));
  double sum_w = 0.0, sum_w2 = 0.0;
  for (double w : weights) {
    sum_w += w;
    sum_w2 += w * w;
  }
  const double scale = sum_w2 / (sum_w * sum_w);  // effective covariance multiplier
  std::vector<double> logits(static_cast<std::size_t>(model.num_classes()));
  double best = -std::numeric_limits<double>::infinity();
  for (int z = 0; z < model.num_classes(); ++z) {
    const double xi = squared_mahalanobis(fused, model.centroid(z), model) / scale;
    logits[static_cast<std::size_t>(z)] = -0.5 * xi;
    best = std::max(best, logits[static_cast<std::size_t>(z)]);
  }
  double norm = 0.0;
  for (double& v : logits) {
    v = std::exp(v - best);
    norm += v;
  }
  for (double& v : logits) v /= norm;
  return logits;
}

ClassId map_classify(const Vector& fused, std::span<const double> weights, const GmmModel& model) {
  check_weights(weights, static_cast<Eigen::Index>(weights.size()));
  ClassId best = 0;
  double best_distance = std::numeric_limits<double>::infinity();
  for (int z = 0; z < model.num_classes(); ++z) {
    const double xi = squared_mahalanobis(fused, model.centroid(z), model);
    if (xi < best_distance) {
      best_distance = xi;
      best = z;
    }
  }
  return best;
}

}  // namespace sqra
