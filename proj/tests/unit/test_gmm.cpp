#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "sqra/gmm.hpp"
#include "sqra/random.hpp"

namespace {

using namespace sqra;

TEST(RandomStream, SubstreamsAreDeterministicAndDistinct) {
  RandomStream a = RandomStream::substream(42, 7);
  RandomStream b = RandomStream::substream(42, 7);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.normal(), b.normal());

  std::set<double> firsts;
  for (std::uint64_t idx = 0; idx < 1000; ++idx) firsts.insert(RandomStream::substream(42, idx).uniform());
  EXPECT_EQ(firsts.size(), 1000u);
  EXPECT_NE(RandomStream::substream(1, 0).uniform(), RandomStream::substream(2, 0).uniform());
}

TEST(RandomStream, NormalMoments) {
  RandomStream rng(3);
  const int n = 400'000;
  double s1 = 0.0;
  double s2 = 0.0;
  double s4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s1 += x;
    s2 += x * x;
    s4 += x * x * x * x;
  }
  EXPECT_NEAR(s1 / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.01);
  EXPECT_NEAR(s4 / n, 3.0, 0.06);
}

TEST(RandomStream, DiscreteDraws) {
  RandomStream rng(5);
  std::vector<int> counts(7, 0);
  const int n = 70'000;
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(rng.uniform_int(7))];
  for (int c : counts) EXPECT_NEAR(c, n / 7.0, 5.0 * std::sqrt(n / 7.0));

  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += rng.poisson(3.5);
  EXPECT_NEAR(sum / n, 3.5, 0.05);
  EXPECT_EQ(rng.poisson(0.0), 0);
  EXPECT_FALSE(rng.bernoulli(0.0));
  EXPECT_TRUE(rng.bernoulli(1.0));
}

TEST(Centroids, BlockLayout) {
  const Matrix c = build_centroids(21, 75);
  ASSERT_EQ(c.rows(), 21);
  ASSERT_EQ(c.cols(), 75);
  for (int i = 1; i <= 21; ++i) {
    for (int j = 1; j <= 75; ++j) {
      const bool negative = (75 * (i - 1)) / 21 < j && j <= (75 * i) / 21;
      EXPECT_EQ(c(i - 1, j - 1), negative ? -1.0 : 1.0) << i << "," << j;
    }
  }
  for (int i = 0; i < 21; ++i) {
    for (int j = i + 1; j < 21; ++j) EXPECT_GT((c.row(i) - c.row(j)).squaredNorm(), 0.0);
  }
}

TEST(Centroids, CalibratedCovarianceHitsTargetGain) {
  const Matrix c = build_centroids(21, 75);
  for (double target : {10.0, 20.0, 40.0, 60.0}) {
    const double var = calibrate_covariance(c, target);
    const GmmModel model = GmmModel::isotropic(c, var);
    // brute-force pair average
    double total = 0.0;
    int pairs = 0;
    for (int i = 0; i < 21; ++i) {
      for (int j = i + 1; j < 21; ++j) {
        total += (c.row(i) - c.row(j)).squaredNorm() / var;
        ++pairs;
      }
    }
    EXPECT_NEAR(total / pairs, target, 1e-10 * target);
    EXPECT_NEAR(average_discriminant_gain(model), target, 1e-10 * target);
  }
  EXPECT_THROW(calibrate_covariance(c, 0.0), std::domain_error);
  EXPECT_THROW(calibrate_covariance(Matrix::Ones(3, 4), 1.0), std::invalid_argument);
}

TEST(GmmModel, RejectsBadInput) {
  EXPECT_THROW(GmmModel(Matrix::Zero(1, 3), Vector::Ones(3)), std::invalid_argument);
  EXPECT_THROW(GmmModel(Matrix::Zero(2, 3), Vector::Ones(2)), std::invalid_argument);
  Vector bad = Vector::Ones(3);
  bad(1) = 0.0;
  EXPECT_THROW(GmmModel(Matrix::Zero(2, 3), bad), std::invalid_argument);
}

TEST(GmmModel, SampleMoments) {
  Matrix c(2, 3);
  c << 1.0, -2.0, 0.5, 0.0, 0.0, 0.0;
  Vector var(3);
  var << 0.5, 2.0, 1.0;
  const GmmModel model(c, var);
  RandomStream rng(9);
  const int n = 100'000;
  Vector sum = Vector::Zero(3);
  Vector sq = Vector::Zero(3);
  for (int i = 0; i < n; ++i) {
    const Vector x = model.sample(0, rng);
    sum += x;
    sq += (x - c.row(0).transpose()).cwiseAbs2();
  }
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(sum(k) / n, c(0, k), 5.0 * std::sqrt(var(k) / n));
    EXPECT_NEAR(sq(k) / n, var(k), 0.02 * var(k));
  }
}

TEST(DeviceClass, FrequencyOfQueryClass) {
  RandomStream rng(11);
  const int n = 200'000;
  std::vector<int> counts(5, 0);
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(sample_device_class(2, 5, 0.3, rng))];
  EXPECT_NEAR(counts[2] / double(n), 0.3, 0.005);
  for (int z : {0, 1, 3, 4}) EXPECT_NEAR(counts[static_cast<std::size_t>(z)] / double(n), 0.7 / 4, 0.005);
}

TEST(Scenario, ShapesAndValidation) {
  const GmmModel model = GmmModel::isotropic(build_centroids(4, 8), 1.0);
  RandomStream rng(1);
  const Scenario s = sample_scenario(model, 12, 0.25, rng);
  EXPECT_EQ(s.device_classes.size(), 12u);
  EXPECT_EQ(s.device_features.rows(), 8);
  EXPECT_EQ(s.device_features.cols(), 12);
  EXPECT_EQ(s.query_feature.size(), 8);
  EXPECT_GE(s.query_class, 0);
  EXPECT_LT(s.query_class, 4);
  EXPECT_THROW(sample_scenario(model, 3, 1.5, rng), std::domain_error);
}

TEST(Relevancy, MahalanobisAndScore) {
  Matrix c = Matrix::Zero(2, 2);
  c(1, 0) = 1.0;
  Vector var(2);
  var << 4.0, 1.0;
  const GmmModel model(c, var);
  Vector a(2), b(2);
  a << 2.0, 1.0;
  b << 0.0, 0.0;
  EXPECT_DOUBLE_EQ(squared_mahalanobis(a, b, model), 4.0 / 4.0 + 1.0);
  EXPECT_DOUBLE_EQ(relevancy_score(a, b, model), std::exp(-2.0 / 2.0));
}

TEST(Fusion, WeightedMeanAndPosterior) {
  const GmmModel model = GmmModel::isotropic(build_centroids(3, 6), 0.8);
  Matrix feats(6, 3);
  feats.col(0) = model.centroid(1);
  feats.col(1) = model.centroid(1) * 0.5;
  feats.col(2) = model.centroid(2);
  const std::vector<double> w = {2.0, 1.0, 1.0};
  const Vector fused = fuse_features(feats, w);
  const Vector expected = (2.0 * feats.col(0) + feats.col(1) + feats.col(2)) / 4.0;
  EXPECT_TRUE(fused.isApprox(expected, 1e-14));

  const auto post = class_posterior(fused, w, model);
  double total = 0.0;
  std::size_t best = 0;
  for (std::size_t z = 0; z < post.size(); ++z) {
    total += post[z];
    if (post[z] > post[best]) best = z;
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_EQ(map_classify(fused, w, model), static_cast<ClassId>(best));

  // posterior oracle: softmax of -||x - mu_z||^2 / (2 s^2 C) with s^2 = sum w^2 / (sum w)^2
  const double s2 = (4.0 + 1.0 + 1.0) / 16.0;
  std::vector<double> logits(3);
  double mx = -1e300;
  for (int z = 0; z < 3; ++z) {
    logits[static_cast<std::size_t>(z)] = -(fused - model.centroid(z)).squaredNorm() / (2.0 * s2 * 0.8);
    mx = std::max(mx, logits[static_cast<std::size_t>(z)]);
  }
  double norm = 0.0;
  for (double& v : logits) norm += (v = std::exp(v - mx));
  for (std::size_t z = 0; z < 3; ++z) EXPECT_NEAR(post[z], logits[z] / norm, 1e-12);

  EXPECT_THROW(fuse_features(feats, std::vector<double>{1.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(fuse_features(feats, std::vector<double>{1.0, 0.0, 1.0}), std::invalid_argument);
}

TEST(Fusion, TiesGoToLowestClass) {
  Matrix c(2, 1);
  c << -1.0, 1.0;
  const GmmModel model = GmmModel::isotropic(c, 1.0);
  const std::vector<double> w = {1.0};
  EXPECT_EQ(map_classify(Vector::Zero(1), w, model), 0);
}

TEST(Classifier, AccuracyMatchesTwoClassOracle) {
  // two classes at ±1 in 1-D with unit variance: error = Q(1)
  Matrix c(2, 1);
  c << -1.0, 1.0;
  const GmmModel model = GmmModel::isotropic(c, 1.0);
  RandomStream rng(13);
  const int n = 100'000;
  int errors = 0;
  const std::vector<double> w = {1.0};
  for (int i = 0; i < n; ++i) {
    const Vector x = model.sample(1, rng);
    if (map_classify(x, w, model) != 1) ++errors;
  }
  EXPECT_NEAR(errors / double(n), 0.158655253931457, 0.004);
}

}  // namespace
