#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "sqra/random.hpp"

namespace sqra {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Class index. Zero-based throughout the library (class 0 .. num_classes-1).
using ClassId = int;

/// Gaussian mixture sensing world: one centroid per class and a diagonal
/// covariance shared by all classes. Immutable after construction.
class GmmModel {
 public:
  /// `centroids` holds one class centroid per row; `cov_diag` the variances.
  GmmModel(Matrix centroids, Vector cov_diag);

  /// Isotropic covariance C * I.
  static GmmModel isotropic(Matrix centroids, double variance);

  int num_classes() const { return static_cast<int>(centroids_.rows()); }
  int feature_dim() const { return static_cast<int>(centroids_.cols()); }

  const Matrix& centroids() const { return centroids_; }
  Vector centroid(ClassId z) const { return centroids_.row(z).transpose(); }
  const Vector& cov_diag() const { return cov_diag_; }
  const Vector& inv_sqrt_cov() const { return inv_sqrt_cov_; }
  const Vector& sqrt_cov() const { return sqrt_cov_; }

  /// Draw a feature vector of class z.
  Vector sample(ClassId z, RandomStream& rng) const;

 private:
  Matrix centroids_;
  Vector cov_diag_;
  Vector sqrt_cov_;
  Vector inv_sqrt_cov_;
};

/// One sensing realisation: query class/feature and per-device classes/features.
struct Scenario {
  ClassId query_class = 0;
  std::vector<ClassId> device_classes;
  Vector query_feature;
  Matrix device_features;  // one device per column (d x M)
};

/// Class centroids with entries in {-1, +1}; class i (one-based) has -1 on
/// positions floor(d(i-1)/|Z|) < j <= floor(d i/|Z|). One centroid per row.
Matrix build_centroids(int num_classes, int feature_dim);

/// Mean over class pairs of (mu_i - mu_j)^T Sigma^{-1} (mu_i - mu_j).
double average_discriminant_gain(const GmmModel& model);

/// Variance C such that Sigma = C * I yields the requested average gain.
double calibrate_covariance(const Matrix& centroids, double target_gain);

/// Draw the query class uniformly, each device class (query class w.p.
/// p_pos, otherwise uniform over the others) and all feature vectors.
Scenario sample_scenario(const GmmModel& model, int num_devices, double p_pos,
                         RandomStream& rng);

/// Draw a device class given the query class.
ClassId sample_device_class(ClassId query_class, int num_classes, double p_pos,
                            RandomStream& rng);

/// Squared Mahalanobis distance under the model's diagonal covariance.
double squared_mahalanobis(const Vector& a, const Vector& b, const GmmModel& model);

/// exp(-xi_Sigma(x_m, x_q) / d).
double relevancy_score(const Vector& x_m, const Vector& x_q, const GmmModel& model);

/// Weight-normalised combination sum_m w_m x_m / sum_m w_m. Features are the
/// columns of `features`.
Vector fuse_features(const Matrix& features, std::span<const double> weights);

/// Posterior class probabilities of a fused vector under the effective
/// covariance (sum w^2 / (sum w)^2) * Sigma.
std::vector<double> class_posterior(const Vector& fused, std::span<const double> weights,
                                    const GmmModel& model);

/// MAP class of a fused vector: nearest centroid in Mahalanobis distance,
/// ties broken towards the lowest class index.
ClassId map_classify(const Vector& fused, std::span<const double> weights,
                     const GmmModel& model);

}  // namespace sqra
