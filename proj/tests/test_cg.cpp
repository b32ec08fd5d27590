#include <gtest/gtest.h>

#include "apgp/altproj.hpp"
#include "apgp/cg.hpp"
#include "oracles.hpp"

namespace apgp {
namespace {

TEST(PivotedCholesky, DiagonalHandExample) {
  Eigen::MatrixXd K(2, 2);
  K << 4, 0, 0, 1;
  const auto f = pivoted_cholesky(K, 1);
  ASSERT_EQ(f.rank(), 1);
  EXPECT_EQ(f.pivots, (IndexList{0}));
  EXPECT_DOUBLE_EQ(f.L(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(f.L(1, 0), 0.0);
}

TEST(PivotedCholesky, FullRankReconstructs) {
  const auto X = oracle::uniform_points(120, 3, 1);
  const KernelSpec spec = oracle::random_spec(3, 2);
  const KernelOperator<double> op(spec, X);
  const Eigen::MatrixXd K = oracle::dense_kernel(spec, X);
  const auto f = pivoted_cholesky(op, 120);
  EXPECT_EQ(f.rank(), 120);
  EXPECT_LE((f.L * f.L.transpose() - K).norm(), 1e-6 * K.norm());
}

TEST(PivotedCholesky, NoiseOnlyKernelPivotsInOrder) {
  const auto X = oracle::uniform_points(6, 2, 3);
  const KernelSpec spec = KernelSpec::isotropic(KernelFamily::Matern52, 2, 1.0, 0.0, 0.09);
  const auto f = pivoted_cholesky(KernelOperator<double>(spec, X), 4);
  EXPECT_EQ(f.pivots, (IndexList{0, 1, 2, 3}));
  for (Index k = 0; k < 4; ++k) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(6);
    e[k] = 0.3;
    EXPECT_LT((f.L.col(k) - e).norm(), 1e-15);
  }
}

TEST(PivotedCholesky, GreedyPivotsAndNonNegativeResidual) {
  const auto X = oracle::uniform_points(80, 2, 4);
  const KernelSpec spec = oracle::random_spec(2, 5);
  const Eigen::MatrixXd K = oracle::dense_kernel(spec, X);
  const auto f = pivoted_cholesky(KernelOperator<double>(spec, X), 20);
  for (Index k = 0; k < f.rank(); ++k) {
    const Eigen::MatrixXd Lk = f.L.leftCols(k);
    const Eigen::VectorXd resid = K.diagonal() - (Lk * Lk.transpose()).diagonal();
    Index arg = 0;
    for (Index i = 1; i < 80; ++i)
      if (resid[i] > resid[arg] + 1e-12) arg = i;
    EXPECT_NEAR(resid[f.pivots[static_cast<std::size_t>(k)]], resid[arg], 1e-12) << "step " << k;
  }
  const Eigen::VectorXd final_resid = K.diagonal() - (f.L * f.L.transpose()).diagonal();
  EXPECT_GE(final_resid.minCoeff(), -1e-8);
}

TEST(PivotedCholesky, StopsEarlyOnExhaustedRank) {
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(3, 3);
  K(0, 0) = 1.0;
  const auto f = pivoted_cholesky(K, 3);
  EXPECT_EQ(f.rank(), 1);
  EXPECT_THROW(pivoted_cholesky(K, 4), InvalidInput);
  const Eigen::MatrixXd bad = -Eigen::MatrixXd::Identity(2, 2);
  EXPECT_THROW(pivoted_cholesky(bad, 2), NotPositiveDefinite);
}

TEST(Preconditioner, RankZeroScalesByNoise) {
  PivotedCholeskyFactor<double> empty;
  empty.L = Eigen::MatrixXd::Zero(5, 0);
  const Eigen::MatrixXd V = oracle::normal_matrix(5, 2, 6);
  EXPECT_TRUE(precond_solve(empty, 0.5, V).isApprox(V / 0.5));
  EXPECT_TRUE(precond_solve(empty, 0.5, Eigen::MatrixXd::Zero(5, 2).eval()).isZero(0.0));
  EXPECT_THROW(Preconditioner<double>(empty, 0.0), InvalidInput);
}

TEST(Preconditioner, WoodburyMatchesDenseInverse) {
  const auto X = oracle::uniform_points(50, 2, 7);
  const KernelSpec spec = oracle::random_spec(2, 8);
  const auto f = pivoted_cholesky(KernelOperator<double>(spec, X), 10, false);
  ASSERT_EQ(f.rank(), 10);
  const double s2 = spec.noise_variance;
  const Eigen::MatrixXd P = f.L * f.L.transpose() + s2 * Eigen::MatrixXd::Identity(50, 50);
  const Eigen::MatrixXd V = oracle::normal_matrix(50, 3, 9);
  const Preconditioner<double> pre(f, s2);
  EXPECT_LT((pre.apply(V) - P.llt().solve(V)).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT(oracle::rel_error(pre.multiply(V), P * V), 1e-12);
}

TEST(Cg, IdentityKernelOneIteration) {
  const auto X = oracle::uniform_points(15, 2, 10);
  const KernelSpec spec = KernelSpec::isotropic(KernelFamily::Matern52, 2, 1.0, 0.0, 1.0);
  const KernelOperator<double> op(spec, X);
  const Eigen::MatrixXd B = oracle::normal_matrix(15, 2, 11);
  const auto r = cg_solve<double>(op, B, StoppingCriteria{1e-12, 100, 0});
  EXPECT_EQ(r.epochs, 1);
  EXPECT_LT((r.W - B).norm(), 1e-14);
  EXPECT_DOUBLE_EQ(r.trace[1].cumulative_flops, 2.0 * 15 * 15 * 2);
}

TEST(Cg, TwoByTwoExactInTwoIterations) {
  PointMatrix<double> X(2, 1);
  X << 0.0, std::sqrt(2.0 * std::log(2.0));
  KernelSpec spec = KernelSpec::isotropic(KernelFamily::RBF, 1, 1.0, 2.0, 0.0);
  spec.noise_floor = 0.0;
  const KernelOperator<double> op(spec, X);
  Eigen::MatrixXd B(2, 1);
  B << 3, 3;
  const auto r = cg_solve<double>(op, B, StoppingCriteria{1e-12, 2, 0});
  EXPECT_LE(r.epochs, 2);
  EXPECT_NEAR(r.W(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(r.W(1, 0), 1.0, 1e-12);
}

TEST(Cg, MatchesDenseSolve) {
  const auto X = oracle::uniform_points(300, 3, 12);
  const KernelSpec spec = oracle::random_spec(3, 13);
  const KernelOperator<double> op(spec, X);
  const Eigen::MatrixXd B = oracle::normal_matrix(300, 3, 14);
  const auto r = cg_solve<double>(op, B, StoppingCriteria{1e-10, 3000, 0});
  ASSERT_TRUE(r.converged);
  const Eigen::MatrixXd K = oracle::dense_kernel(spec, X);
  EXPECT_LT(oracle::rel_error(r.W, K.llt().solve(B)), 1e-7);
}

TEST(Cg, MachinePrecisionWithinNIterations) {
  const auto X = oracle::uniform_points(60, 2, 15);
  KernelSpec spec = oracle::random_spec(2, 16);
  spec.noise_variance = 0.5;
  const KernelOperator<double> op(spec, X);
  const Eigen::MatrixXd B = oracle::normal_matrix(60, 2, 17);
  const auto r = cg_solve<double>(op, B, StoppingCriteria{1e-13, 60, 0});
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.epochs, 60);
}

TEST(Cg, RecurrenceResidualMatchesTrueResidual) {
  const auto X = oracle::uniform_points(200, 2, 18);
  const KernelSpec spec = oracle::random_spec(2, 19);
  const KernelOperator<double> op(spec, X);
  const Eigen::MatrixXd K = oracle::dense_kernel(spec, X);
  const Eigen::MatrixXd B = oracle::normal_matrix(200, 4, 20);
  for (int iters : {1, 5, 20}) {
    const auto r = cg_solve<double>(op, B, StoppingCriteria{1e-30, iters, 0});
    const double true_res = (B - K * r.W).norm();
    EXPECT_NEAR(r.trace.back().frobenius_residual, true_res, 1e-5 * B.norm());
  }
}

TEST(Cg, FullRankPreconditionerOneIteration) {
  const auto X = oracle::uniform_points(150, 3, 21);
  const KernelSpec spec = oracle::random_spec(3, 22);
  const KernelOperator<double> op(spec, X);
  const Preconditioner<double> pre = make_kernel_preconditioner(op, 150);
  const Eigen::MatrixXd B = oracle::normal_matrix(150, 3, 23);
  const auto r = cg_solve(op, B, StoppingCriteria{1e-6, 100, 0}, &pre);
  EXPECT_EQ(r.epochs, 1);
}

TEST(Cg, AgreesWithAlternatingProjection) {
  // With two columns, avg_rel < eps gives ||R||_F < 2 eps ||B||_F, so each
  // solution is within 2 eps ||B|| / sigma^2 of W* and the two within 4x that.
  const auto X = oracle::uniform_points(100, 2, 24);
  const KernelSpec spec = oracle::random_spec(2, 25);
  const KernelOperator<double> op(spec, X);
  const Eigen::MatrixXd B = oracle::normal_matrix(100, 2, 26);
  const double eps = 1e-4;
  const auto cg = cg_solve<double>(op, B, StoppingCriteria{eps, 1000, 0});
  const auto ap = ap_solve(op, B, make_partition(100, 10), SelectionRule::gauss_southwell(),
                           StoppingCriteria{eps, 1000, 0});
  ASSERT_TRUE(cg.converged && ap.converged);
  EXPECT_LE((cg.W - ap.W).norm(), 10.0 * eps * B.norm() / spec.noise_variance);
}

TEST(Cg, RejectsShapeMismatch) {
  const auto X = oracle::uniform_points(10, 2, 27);
  const KernelOperator<double> op(oracle::random_spec(2, 28), X);
  EXPECT_THROW(cg_solve<double>(op, Eigen::MatrixXd::Ones(9, 1), StoppingCriteria{}), InvalidInput);
}

}  // namespace
}  // namespace apgp
