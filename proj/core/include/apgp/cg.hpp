#pragma once

#include <optional>

#include <Eigen/Cholesky>

#include "apgp/kernels.hpp"
#include "apgp/solve_common.hpp"

namespace apgp {

/// Rank-k partial Cholesky factor L (n x k) with greedy diagonal pivoting.
template <typename Scalar>
struct PivotedCholeskyFactor {
  Matrix<Scalar> L;
  IndexList pivots;

  Index rank() const { return L.cols(); }
};

/// Greedy pivoted Cholesky of K (or of the noise-free part outputscale *
/// k_base when `include_noise` is false). Each step pivots on the largest
/// remaining residual diagonal (ties to the lowest index) and touches one
/// kernel column, so the cost is O(n k^2) time and O(n k) memory.
///
/// Stops early with a smaller rank once the largest residual diagonal drops
/// below a round-off threshold; throws NotPositiveDefinite when it is
/// negative beyond that threshold.
template <typename Scalar>
PivotedCholeskyFactor<Scalar> pivoted_cholesky(const KernelOperator<Scalar>& op,
                                               Index rank,
                                               bool include_noise = true);

/// Same algorithm on an explicit SPD matrix.
template <typename Scalar>
PivotedCholeskyFactor<Scalar> pivoted_cholesky(const Matrix<Scalar>& K, Index rank);

/// Applies P^{-1} with P = L L^T + sigma2 I through the Woodbury identity:
///   P^{-1} V = (V - L (sigma2 I + L^T L)^{-1} L^T V) / sigma2.
template <typename Scalar>
class Preconditioner {
 public:
  Preconditioner(PivotedCholeskyFactor<Scalar> factor, double sigma2);

  Matrix<Scalar> apply(const Matrix<Scalar>& V) const;
  /// P V, used to draw probes from N(0, P).
  Matrix<Scalar> multiply(const Matrix<Scalar>& V) const;
  const PivotedCholeskyFactor<Scalar>& factor() const { return factor_; }
  double sigma2() const { return sigma2_; }

 private:
  PivotedCholeskyFactor<Scalar> factor_;
  double sigma2_;
  Eigen::LLT<Matrix<Scalar>> inner_;
};

template <typename Scalar>
Matrix<Scalar> precond_solve(const PivotedCholeskyFactor<Scalar>& factor,
                             double sigma2, const Matrix<Scalar>& V) {
  return Preconditioner<Scalar>(factor, sigma2).apply(V);
}

/// The preconditioner used for CG on K = K_base + sigma^2 I: a rank-k
/// pivoted Cholesky of K_base plus the noise shift. With k = n it equals K
/// up to round-off.
template <typename Scalar>
Preconditioner<Scalar> make_kernel_preconditioner(const KernelOperator<Scalar>& op,
                                                  Index rank);

struct CgOptions {
  bool wall_clock = true;
};

/// Batched (preconditioned) conjugate gradients on K W = B. Every column
/// runs its own alpha/beta recurrence over a shared matrix product; the stop
/// test uses the same average relative residual as alternating projection.
/// Each iteration is charged 2 n^2 l FLOPs.
template <typename Scalar>
SolveResult<Scalar> cg_solve(const KernelOperator<Scalar>& op,
                             const Matrix<Scalar>& B,
                             const StoppingCriteria& stop,
                             const Preconditioner<Scalar>* preconditioner = nullptr,
                             const CgOptions& options = {});

extern template class Preconditioner<float>;
extern template class Preconditioner<double>;

}  // namespace apgp
