#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <limits>
#include <vector>

#include "apgp/kernels.hpp"
#include "oracles.hpp"

namespace apgp {
namespace {

// Closed forms at r = 1, evaluated with mpmath at 30 digits.
constexpr double kMatern52AtOne = 0.523994108831820310592713250761;
constexpr double kMatern32AtOne = 0.483357724596507650595075082258;
constexpr double kRbfAtOne = 0.606530659712633423603799534991;

double value(const KernelSpec& spec, std::vector<double> x, std::vector<double> y, bool same) {
  return kernel_value<double>(spec, x, y, same);
}

TEST(KernelValue, IdentityAtZeroDistance) {
  const KernelSpec spec = KernelSpec::isotropic(KernelFamily::Matern52, 2, 0.7, 1.0, 1e-4);
  KernelSpec noiseless = spec;
  noiseless.noise_variance = 0.0;
  noiseless.noise_floor = 0.0;
  EXPECT_DOUBLE_EQ(value(noiseless, {0.3, 0.1}, {0.3, 0.1}, true), 1.0);
}

TEST(KernelValue, ClosedFormsAtUnitDistance) {
  struct Case {
    KernelFamily family;
    double expected;
  };
  for (const Case c : {Case{KernelFamily::Matern52, kMatern52AtOne},
                       Case{KernelFamily::Matern32, kMatern32AtOne},
                       Case{KernelFamily::RBF, kRbfAtOne}}) {
    KernelSpec spec = KernelSpec::isotropic(c.family, 1, 1.0, 1.0, 0.0);
    spec.noise_floor = 0.0;
    EXPECT_NEAR(value(spec, {0.0}, {1.0}, false), c.expected, 1e-15) << to_string(c.family);
    EXPECT_NEAR(kernel_base(c.family, 1.0), c.expected, 1e-15);
    // r = 1 through ARD scaling: |dx| = 2 with lengthscale 2.
    spec.lengthscales[0] = 2.0;
    EXPECT_NEAR(value(spec, {-1.0}, {1.0}, false), c.expected, 1e-15);
  }
}

TEST(KernelValue, NoiseOnlyOnSamePoint) {
  for (auto family : {KernelFamily::Matern52, KernelFamily::Matern32, KernelFamily::RBF}) {
    const KernelSpec spec = KernelSpec::isotropic(family, 3, 0.5, 1.0, 0.25);
    EXPECT_DOUBLE_EQ(value(spec, {1, 2, 3}, {1, 2, 3}, true), 1.25);
    EXPECT_DOUBLE_EQ(value(spec, {1, 2, 3}, {1, 2, 3}, false), 1.0);
  }
}

TEST(KernelValue, RejectsNonFiniteInput) {
  const KernelSpec spec = KernelSpec::isotropic(KernelFamily::RBF, 2, 1.0, 1.0, 0.1);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(value(spec, {0.0, nan}, {0.0, 0.0}, false), InvalidInput);
  EXPECT_THROW(value(spec, {0.0, 0.0}, {std::numeric_limits<double>::infinity(), 0.0}, false),
               InvalidInput);
  EXPECT_THROW(value(spec, {0.0}, {0.0, 0.0}, false), InvalidInput);
}

TEST(KernelValue, SymmetricAndArdConsistent) {
  const KernelSpec spec = oracle::random_spec(4, 11);
  const std::vector<double> x = {0.1, 0.9, 0.4, 0.3};
  const std::vector<double> y = {0.7, 0.2, 0.5, 0.8};
  EXPECT_EQ(value(spec, x, y, false), value(spec, y, x, false));

  const std::vector<int> perm = {2, 0, 3, 1};
  KernelSpec permuted = spec;
  std::vector<double> xp(4), yp(4);
  for (int k = 0; k < 4; ++k) {
    permuted.lengthscales[k] = spec.lengthscales[perm[k]];
    xp[k] = x[perm[k]];
    yp[k] = y[perm[k]];
  }
  EXPECT_NEAR(value(permuted, xp, yp, false), value(spec, x, y, false), 1e-15);
}

TEST(KernelSpecTest, ValidationAndFingerprint) {
  KernelSpec spec = KernelSpec::isotropic(KernelFamily::Matern52, 2, 1.0, 1.0, 0.1);
  EXPECT_NO_THROW(spec.validate());
  const auto fp = spec.fingerprint();
  spec.lengthscales[1] = 1.5;
  EXPECT_NE(spec.fingerprint(), fp);

  KernelSpec bad = spec;
  bad.lengthscales[0] = 0.0;
  EXPECT_THROW(bad.validate(), InvalidInput);
  bad = spec;
  bad.noise_variance = 1e-6;  // below the default floor
  EXPECT_THROW(bad.validate(), InvalidInput);
  bad = spec;
  bad.outputscale = -1.0;
  EXPECT_THROW(bad.validate(), InvalidInput);
  EXPECT_EQ(kernel_family_from_string("matern32"), KernelFamily::Matern32);
  EXPECT_THROW(kernel_family_from_string("linear"), InvalidInput);
}

TEST(KernelBlock, SymmetricByConstruction) {
  const auto X = oracle::uniform_points(40, 3, 5);
  const KernelSpec spec = oracle::random_spec(3, 6);
  const IndexList I = {3, 7, 1, 20, 33, 12};
  const Eigen::MatrixXd Kb = kernel_block<double>(spec, X, I, I);
  EXPECT_TRUE((Kb.array() == Kb.transpose().array()).all());
}

TEST(KernelBlock, MatchesDenseOracleColumn) {
  const auto X = oracle::uniform_points(3, 2, 17);
  const KernelSpec spec = oracle::random_spec(2, 18);
  const Eigen::MatrixXd K = oracle::dense_kernel(spec, X);
  const IndexList rows = {0, 1, 2};
  const IndexList cols = {1};
  const Eigen::MatrixXd col = kernel_block<double>(spec, X, rows, cols);
  ASSERT_EQ(col.rows(), 3);
  ASSERT_EQ(col.cols(), 1);
  for (Index i = 0; i < 3; ++i) EXPECT_NEAR(col(i, 0), K(i, 1), 1e-15);
}

TEST(KernelBlock, SingleEntryIsDiagonal) {
  const auto X = oracle::uniform_points(5, 2, 1);
  const KernelSpec spec = KernelSpec::isotropic(KernelFamily::Matern32, 2, 0.3, 1.7, 0.2);
  const IndexList i = {4};
  const Eigen::MatrixXd K = kernel_block<double>(spec, X, i, i);
  ASSERT_EQ(K.size(), 1);
  EXPECT_DOUBLE_EQ(K(0, 0), 1.7 + 0.2);
}

TEST(KernelBlock, RejectsOutOfRangeIndex) {
  const auto X = oracle::uniform_points(5, 2, 1);
  const KernelSpec spec = oracle::random_spec(2, 2);
  const IndexList ok = {0, 1};
  const IndexList bad = {0, 5};
  const IndexList neg = {-1};
  EXPECT_THROW(kernel_block<double>(spec, X, ok, bad), InvalidInput);
  EXPECT_THROW(kernel_block<double>(spec, X, neg, ok), InvalidInput);
}

TEST(KernelBlock, PartitionTilesDenseBitwise) {
  const auto X = oracle::uniform_points(37, 3, 8);
  const KernelSpec spec = oracle::random_spec(3, 9, KernelFamily::Matern32);
  const KernelOperator<double> lazy(spec, X, Storage::Lazy);
  const Eigen::MatrixXd K = lazy.dense();
  const Index b = 8;
  for (Index r0 = 0; r0 < 37; r0 += b) {
    for (Index c0 = 0; c0 < 37; c0 += b) {
      const Index rn = std::min<Index>(b, 37 - r0), cn = std::min<Index>(b, 37 - c0);
      const IndexList rows = iota_indices(r0, rn), cols = iota_indices(c0, cn);
      const Eigen::MatrixXd tile = kernel_block<double>(spec, X, rows, cols);
      EXPECT_TRUE((tile.array() == K.block(r0, c0, rn, cn).array()).all())
          << "tile " << r0 << "," << c0;
    }
  }
  const KernelOperator<double> dense(spec, X, Storage::Dense);
  EXPECT_TRUE((dense.dense().array() == K.array()).all());
  EXPECT_TRUE((dense.principal(8, 8).array() == lazy.principal(8, 8).array()).all());
  EXPECT_TRUE((dense.columns(30, 7).array() == lazy.columns(30, 7).array()).all());
}

TEST(KernelBlock, DenseMatchesExtendedPrecisionOracle) {
  for (auto family : {KernelFamily::Matern52, KernelFamily::Matern32, KernelFamily::RBF}) {
    const auto X = oracle::uniform_points(60, 4, 21);
    const KernelSpec spec = oracle::random_spec(4, 22, family);
    const KernelOperator<double> op(spec, X);
    EXPECT_LT(oracle::rel_error(op.dense(), oracle::dense_kernel(spec, X)), 1e-14);
  }
}

TEST(KernelMatrix, SpdWithNoiseFloorEigenvalue) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto X = oracle::uniform_points(300, 2, 100 + seed);
    const KernelSpec spec = oracle::random_spec(2, 200 + seed);
    const Eigen::MatrixXd K = KernelOperator<double>(spec, X).dense();
    EXPECT_TRUE((K.array() == K.transpose().array()).all());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K, Eigen::EigenvaluesOnly);
    EXPECT_GE(es.eigenvalues().minCoeff(), spec.noise_variance - 1e-8);
  }
}

TEST(KernelMatvec, IdentityKernel) {
  const auto X = oracle::uniform_points(20, 2, 3);
  KernelSpec spec = KernelSpec::isotropic(KernelFamily::Matern52, 2, 1.0, 0.0, 1.0);
  const Eigen::MatrixXd V = oracle::normal_matrix(20, 3, 4);
  EXPECT_TRUE((kernel_matvec<double>(spec, X, V, 7).array() == V.array()).all());
}

TEST(KernelMatvec, MatchesDenseProduct) {
  const auto X = oracle::uniform_points(100, 3, 31);
  const KernelSpec spec = oracle::random_spec(3, 32);
  const Eigen::MatrixXd V = oracle::normal_matrix(100, 4, 33);
  const Eigen::MatrixXd ref = oracle::dense_kernel(spec, X) * V;
  for (Index panel : {1, 7, 64, 100, 1000})
    EXPECT_LT(oracle::rel_error(kernel_matvec<double>(spec, X, V, panel), ref), 1e-10);
  EXPECT_LT(oracle::rel_error(KernelOperator<double>(spec, X, Storage::Dense).apply(V), ref),
            1e-10);
}

TEST(KernelMatvec, ZeroAndShapeErrors) {
  const auto X = oracle::uniform_points(10, 2, 3);
  const KernelSpec spec = oracle::random_spec(2, 4);
  EXPECT_TRUE(kernel_matvec<double>(spec, X, Eigen::MatrixXd::Zero(10, 2), 4).isZero(0.0));
  EXPECT_THROW(kernel_matvec<double>(spec, X, Eigen::MatrixXd::Zero(9, 2), 4), InvalidInput);
  EXPECT_THROW(kernel_matvec<double>(spec, X, Eigen::MatrixXd::Zero(10, 2), 0), InvalidInput);
}

TEST(KernelOperatorTest, SinglePrecisionAgreesWithDouble) {
  const auto X = oracle::uniform_points(50, 2, 41);
  const KernelSpec spec = oracle::random_spec(2, 42);
  const KernelOperator<float> op32(spec, X.cast<float>());
  const KernelOperator<double> op64(spec, X);
  EXPECT_LT(oracle::rel_error(op32.dense().cast<double>(), op64.dense()), 1e-6);
}

TEST(CrossKernel, NoNoiseTerm) {
  const auto X = oracle::uniform_points(6, 2, 51);
  const KernelSpec spec = oracle::random_spec(2, 52);
  const Eigen::MatrixXd C = cross_kernel<double>(spec, X, X);
  EXPECT_LT(oracle::rel_error(C, oracle::cross(spec, X, X)), 1e-14);
  EXPECT_NEAR(C(2, 2), spec.outputscale, 1e-15);
}

}  // namespace
}  // namespace apgp
