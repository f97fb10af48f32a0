#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "ivbounds/errors.hpp"
#include "ivbounds/preprocess.hpp"

namespace ivbounds {
namespace {

Dataset raw(std::vector<double> z, std::vector<double> x, std::vector<double> y) {
  Dataset d;
  d.z = std::move(z);
  d.x = std::move(x);
  d.y = std::move(y);
  return d;
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
  return v;
}

TEST(ZGrid, UniformDesignGivesQuartiles) {
  const auto z = linspace(0.0, 1.0, 10001);
  const ZGrid g = make_z_grid(raw(z, z, z), 3);
  ASSERT_EQ(g.size(), 3);
  EXPECT_NEAR(g.points[0], 0.25, 1e-9);
  EXPECT_NEAR(g.points[1], 0.5, 1e-9);
  EXPECT_NEAR(g.points[2], 0.75, 1e-9);
}

TEST(ZGrid, TiesGoToHigherBin) {
  const std::vector<double> grid{0.0, 1.0, 2.0};
  EXPECT_EQ(nearest_index(grid, 0.5), 1);
  EXPECT_EQ(nearest_index(grid, 1.5), 2);
  EXPECT_EQ(nearest_index(grid, 0.49), 0);
  EXPECT_EQ(nearest_index(grid, -3.0), 0);
  EXPECT_EQ(nearest_index(grid, 9.0), 2);
}

TEST(ZGrid, SingleBinHoldsEverything) {
  const auto z = linspace(-1.0, 1.0, 50);
  const ZGrid g = make_z_grid(raw(z, z, z), 1);
  for (int b : g.bin_of) EXPECT_EQ(b, 0);
  EXPECT_EQ(g.members[0].size(), 50u);
}

TEST(ZGrid, BinsPartitionObservations) {
  std::vector<double> z;
  for (int i = 0; i < 997; ++i) z.push_back(std::sin(i * 1.7) + 0.001 * i);
  const ZGrid g = make_z_grid(raw(z, z, z), 20);
  std::size_t total = 0;
  for (const auto& m : g.members) total += m.size();
  EXPECT_EQ(total, z.size());
}

TEST(ZGrid, EmptyBinIsDataError) {
  // Two clusters leave the middle quantile bins without members.
  std::vector<double> z(100, 0.0);
  for (int i = 50; i < 100; ++i) z[i] = 10.0;
  z[0] = -0.1;
  EXPECT_THROW(make_z_grid(raw(z, z, z), 7), DataError);
}

TEST(EstimateLhs, RawMoments) {
  const Dataset d = raw({0.0, 0.0}, {0.0, 1.0}, {1.0, 3.0});
  const ZGrid g = make_z_grid(d, 1);
  const Eigen::MatrixXd lhs = estimate_lhs(d, g, MomentDictionary{2});
  EXPECT_DOUBLE_EQ(lhs(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(lhs(0, 1), 5.0);
}

TEST(EstimateLhs, ConstantOutcome) {
  const auto z = linspace(-2.0, 2.0, 400);
  const Dataset d = raw(z, z, std::vector<double>(400, 0.7));
  const Eigen::MatrixXd lhs = estimate_lhs(d, make_z_grid(d, 5), MomentDictionary{1});
  for (int m = 0; m < 5; ++m) EXPECT_NEAR(lhs(m, 0), 0.7, 1e-14);
}

TEST(SmoothLhs, LinearColumnUnchanged) {
  Eigen::MatrixXd lhs(10, 1);
  for (int m = 0; m < 10; ++m) lhs(m, 0) = 0.3 * m - 1.0;
  EXPECT_LT((smooth_lhs(lhs) - lhs).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(SmoothLhs, TwoRowsPassThrough) {
  Eigen::MatrixXd lhs(2, 2);
  lhs << 1.0, 5.0, -3.0, 2.0;
  EXPECT_EQ(smooth_lhs(lhs), lhs);
}

TEST(SmoothLhs, SpikeIsReduced) {
  Eigen::MatrixXd lhs(12, 1);
  for (int m = 0; m < 12; ++m) lhs(m, 0) = 0.1 * m;
  lhs(6, 0) += 1.0;
  const Eigen::MatrixXd s = smooth_lhs(lhs);
  EXPECT_LT(std::abs(s(6, 0) - 0.6), std::abs(lhs(6, 0) - 0.6));
  EXPECT_LE((s - lhs).squaredNorm(), 0.2 + 1e-9);
}

TEST(SmoothLhs, IdempotentOnSmoothColumns) {
  Eigen::MatrixXd lhs(15, 2);
  for (int m = 0; m < 15; ++m) {
    lhs(m, 0) = std::sin(0.3 * m) + 0.05 * std::cos(2.1 * m);
    lhs(m, 1) = 0.01 * m * m;
  }
  const Eigen::MatrixXd once = smooth_lhs(lhs);
  const Eigen::MatrixXd twice = smooth_lhs(once);
  EXPECT_LT((once.col(1) - lhs.col(1)).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LE((once - lhs).colwise().squaredNorm().maxCoeff(), 0.2 + 1e-9);
  EXPECT_LT((twice.col(1) - once.col(1)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(SmoothLhs, ZeroBudgetDisables) {
  Eigen::MatrixXd lhs = Eigen::MatrixXd::Random(9, 2);
  EXPECT_EQ(smooth_lhs(lhs, 0.0), lhs);
}

TEST(Tolerances, AbsoluteFloorAndRelativePart) {
  Eigen::MatrixXd lhs(3, 1);
  lhs << 10.0, 0.0, -10.0;
  const Eigen::MatrixXd b = compute_tolerances(lhs, 0.2, 0.05);
  EXPECT_DOUBLE_EQ(b(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(b(1, 0), 0.2);
  EXPECT_DOUBLE_EQ(b(2, 0), 0.5);
}

TEST(Tolerances, MonotoneInEps) {
  const Eigen::MatrixXd lhs = 5.0 * Eigen::MatrixXd::Random(8, 2);
  const Eigen::MatrixXd base = compute_tolerances(lhs, 0.2, 0.05);
  EXPECT_TRUE((compute_tolerances(lhs, 0.3, 0.05).array() >= base.array()).all());
  EXPECT_TRUE((compute_tolerances(lhs, 0.2, 0.3).array() >= base.array()).all());
}

TEST(FreezeX, InterpolatesBinQuantiles) {
  const Dataset d = raw({0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0});
  const Eigen::MatrixXd xh = freeze_x_samples(d, make_z_grid(d, 1), 3);
  EXPECT_DOUBLE_EQ(xh(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(xh(0, 1), 0.5);
  EXPECT_DOUBLE_EQ(xh(0, 2), 1.0);
}

TEST(FreezeX, SingleValueBin) {
  const Dataset d = raw({0.0, 0.0}, {0.4, 0.4}, {0.0, 1.0});
  const Eigen::MatrixXd xh = freeze_x_samples(d, make_z_grid(d, 1), 3);
  for (int j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(xh(0, j), 0.4);
}

TEST(FreezeX, EndpointsAreBinExtremes) {
  std::vector<double> z, x;
  for (int i = 0; i < 300; ++i) {
    z.push_back(i % 3);
    x.push_back(std::cos(i * 0.77) + (i % 3));
  }
  const Dataset d = raw(z, x, x);
  const ZGrid g = make_z_grid(d, 3);
  const Eigen::MatrixXd xh = freeze_x_samples(d, g, 64);
  for (int m = 0; m < 3; ++m) {
    double lo = INFINITY, hi = -INFINITY;
    for (auto i : g.members[m]) {
      lo = std::min(lo, x[i]);
      hi = std::max(hi, x[i]);
    }
    EXPECT_DOUBLE_EQ(xh(m, 0), lo);
    EXPECT_DOUBLE_EQ(xh(m, 63), hi);
  }
}

TEST(ConstraintSet, ShapesAndJson) {
  std::vector<double> z, x, y;
  for (int i = 0; i < 500; ++i) {
    z.push_back(std::sin(i * 0.37));
    x.push_back(z.back() + std::cos(i * 1.3));
    y.push_back(x.back() * 0.5);
  }
  const Dataset d = Dataset::from_columns(z, x, y);
  const ConstraintSet cs = build_constraint_set(d, make_z_grid(d, 6), MomentDictionary{2}, 32, 0.2, 0.1);
  EXPECT_EQ(cs.m_count(), 6);
  EXPECT_EQ(cs.dict_size(), 2);
  EXPECT_EQ(cs.batch(), 32);
  const auto j = cs.to_json();
  EXPECT_EQ(j.at("M").get<int>(), 6);
  EXPECT_EQ(matrix_from_json(matrix_to_json(cs.b)), cs.b);
}

}  // namespace
}  // namespace ivbounds
