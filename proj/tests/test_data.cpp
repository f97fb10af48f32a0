#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "ivbounds/data.hpp"
#include "ivbounds/errors.hpp"

namespace ivbounds {
namespace {

using test::scratch_dir;
using test::write_file;

TEST(Whiten, TwoPointsUsePopulationStd) {
  const auto r = whiten(std::vector{2.0, 4.0});
  EXPECT_DOUBLE_EQ(r.values[0], -1.0);
  EXPECT_DOUBLE_EQ(r.values[1], 1.0);
  EXPECT_DOUBLE_EQ(r.stats.mean, 3.0);
  EXPECT_DOUBLE_EQ(r.stats.std, 1.0);
}

TEST(Whiten, RejectsDegenerateInput) {
  EXPECT_THROW(whiten(std::vector{0.0, 0.0, 0.0}), DataError);
  EXPECT_THROW(whiten(std::vector{5.0}), DataError);
}

TEST(Whiten, RoundTrip) {
  const std::vector<double> v{3.5, -1.25, 8.0, 0.0, 1e3, -7.75};
  const auto r = whiten(v);
  const auto back = unwhiten(r.values, r.stats);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(back[i], v[i], 1e-9);
}

TEST(EmpiricalCdf, InverseInterpolatesPlottingPositions) {
  const EmpiricalCdf cdf(std::vector<double>{4.0, 2.0, 3.0, 1.0});
  EXPECT_DOUBLE_EQ(cdf.inverse(0.5), 2.5);
  EXPECT_DOUBLE_EQ(cdf.inverse(0.0), 1.0);
  EXPECT_DOUBLE_EQ(cdf.inverse(1.0), 4.0);
  EXPECT_THROW(cdf.inverse(1.5), ConfigError);
  EXPECT_THROW(cdf.inverse(-0.1), ConfigError);
}

TEST(EmpiricalCdf, MonotoneAndConsistent) {
  const EmpiricalCdf cdf(std::vector<double>{0.3, -2.0, 5.0, 5.0, 1.0, 0.0, 9.5});
  double prev = -INFINITY;
  for (int i = 0; i <= 200; ++i) {
    const double v = cdf.inverse(i / 200.0);
    EXPECT_GE(v, prev);
    prev = v;
  }
  const EmpiricalCdf distinct(std::vector<double>{0.3, -2.0, 5.0, 1.0, 0.0, 9.5});
  for (double q : {0.1, 0.37, 0.5, 0.81}) EXPECT_NEAR(distinct.cdf(distinct.inverse(q)), q, 1e-12);
}

TEST(LoadCsv, WhitensThreeRows) {
  const auto path = write_file(scratch_dir() / "d.csv", "z,x,y\n0,0,1\n1,2,2\n2,4,3\n");
  const Dataset d = load_csv(path);
  ASSERT_EQ(d.size(), 3u);
  EXPECT_NEAR(d.z[0], -1.224744871391589, 1e-12);
  EXPECT_NEAR(d.z[1], 0.0, 1e-12);
  EXPECT_NEAR(d.z[2], 1.224744871391589, 1e-12);
  EXPECT_DOUBLE_EQ(d.x_stats.mean, 2.0);
}

TEST(LoadCsv, ConstantColumnIsZeroVariance) {
  const auto path = write_file(scratch_dir() / "d.csv", "z,x,y\n0,0,1\n1,2,1\n2,4,1\n");
  try {
    load_csv(path);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("zero variance"), std::string::npos) << e.what();
  }
}

TEST(LoadCsv, MissingColumnNamed) {
  const auto path = write_file(scratch_dir() / "d.csv", "z,x,w\n0,0,1\n1,2,2\n");
  try {
    load_csv(path);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("'y'"), std::string::npos) << e.what();
  }
}

TEST(LoadCsv, BadCellNamesRowAndColumn) {
  const auto path = write_file(scratch_dir() / "d.csv", "z,x,y\n0,0,1\n1,abc,2\n2,1,3\n");
  try {
    load_csv(path);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("'x'"), std::string::npos) << msg;
  }
}

TEST(LoadCsv, CustomColumnsAndDeterminism) {
  const auto path = write_file(scratch_dir() / "d.csv", "a,inst,treat,out\n9,0,0.5,1\n9,1,2,2\n9,2,4,7\n");
  const ColumnNames cols{"inst", "treat", "out"};
  const Dataset a = load_csv(path, cols), b = load_csv(path, cols);
  EXPECT_EQ(a.z, b.z);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.y, b.y);
  EXPECT_DOUBLE_EQ(a.original_y()[2], 7.0);
}

TEST(LoadCsv, MissingFileNamesPath) {
  try {
    load_csv("/nonexistent/file.csv");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/file.csv"), std::string::npos);
  }
}

TEST(WriteCsv, RoundTripsOriginalUnits) {
  const auto path = scratch_dir() / "w.csv";
  const std::vector<double> z{0.1, 0.2, 0.7}, x{1.0 / 3.0, 2.0, -4.0}, y{1e-7, 5.0, 3.0};
  write_csv(path, z, x, y);
  const Dataset d = load_csv(path);
  const auto xo = d.original_x();
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(xo[i], x[i], 1e-12);
}

}  // namespace
}  // namespace ivbounds
