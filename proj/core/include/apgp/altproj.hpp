#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include "apgp/kernels.hpp"
#include "apgp/partition.hpp"
#include "apgp/solve_common.hpp"

namespace apgp {

/// How alternating projection picks the next block.
struct SelectionRule {
  enum class Kind { GaussSouthwell, Cyclic, Random };

  Kind kind = Kind::GaussSouthwell;
  std::uint64_t seed = 0;  // Random only

  static SelectionRule gauss_southwell() { return {Kind::GaussSouthwell, 0}; }
  static SelectionRule cyclic() { return {Kind::Cyclic, 0}; }
  static SelectionRule random(std::uint64_t seed) { return {Kind::Random, seed}; }

  std::string name() const;
  static SelectionRule from_string(std::string_view name, std::uint64_t seed = 0);
};

/// Stateful block selector. Random draws come from a stream seeded once at
/// construction, so a solve is reproducible for a fixed seed.
class BlockSelector {
 public:
  BlockSelector(SelectionRule rule, const BlockPartition& partition);

  /// GS: argmax_j ||R[I_j, :]||_F^2, ties to the lowest index.
  /// Cyclic: inner_iter mod m. Random: uniform over blocks.
  template <typename Scalar>
  Index select(const Matrix<Scalar>& R, long inner_iter);

  /// FLOPs charged per selection: 2 n cols for GS, zero otherwise.
  double selection_flops(Index columns) const;

 private:
  SelectionRule rule_;
  const BlockPartition* partition_;
  std::mt19937_64 rng_;
};

/// Free-function form of BlockSelector::select for the deterministic rules.
template <typename Scalar>
Index select_block(const SelectionRule& rule, const Matrix<Scalar>& R,
                   const BlockPartition& partition, long inner_iter);

/// Iterate of the solver. R is maintained so that R = B - K W holds after
/// every inner step; it starts at W = 0, R = B.
template <typename Scalar>
struct SolveState {
  Matrix<Scalar> W;
  Matrix<Scalar> R;
  Eigen::VectorXd rhs_norms;
  int epoch = 0;
  long inner_iter = 0;
  double flops = 0.0;
  Trace trace;
  Trace step_trace;  // filled only when step recording is enabled

  explicit SolveState(const Matrix<Scalar>& B);
  TraceRecord snapshot(double wall_time_s) const;
};

/// One projection onto block `block`: U = K[I,I]^{-1} R[I,:], W[I,:] += U,
/// R -= K[:,I] U. Rows of W outside the block are untouched.
template <typename Scalar>
void ap_inner_step(SolveState<Scalar>& state, const CholeskyCache<Scalar>& cache,
                   const KernelOperator<Scalar>& op, Index block);

struct ApOptions {
  bool record_steps = false;  // per-inner-step trace rows, O(m) memory per epoch
  bool wall_clock = true;     // false writes 0 for every wall_time_s
};

/// Alternating projection for K W = B. Throws SolverError on a non-finite
/// residual.
template <typename Scalar>
SolveResult<Scalar> ap_solve(const KernelOperator<Scalar>& op,
                             const Matrix<Scalar>& B,
                             const BlockPartition& partition,
                             const SelectionRule& rule,
                             const StoppingCriteria& stop,
                             const ApOptions& options = {});

/// Same as above with a prebuilt cache; the cache build cost is still
/// charged to the first trace row.
template <typename Scalar>
SolveResult<Scalar> ap_solve(const KernelOperator<Scalar>& op,
                             const Matrix<Scalar>& B,
                             const CholeskyCache<Scalar>& cache,
                             const SelectionRule& rule,
                             const StoppingCriteria& stop,
                             const ApOptions& options = {});

/// Exact block coordinate descent update
///   W[I] = K[I,I]^{-1} (B[I] - K[I,~I] W[~I]),
/// built from dense kernel rows. Reference implementation for small n.
template <typename Scalar>
Matrix<Scalar> bcd_step_oracle(const Matrix<Scalar>& W,
                               const KernelOperator<Scalar>& op,
                               const Matrix<Scalar>& B,
                               const BlockPartition& partition, Index block);

/// h(W) = 1/2 tr(W^T K W) - tr(B^T W). Dense; small n only.
template <typename Scalar>
double quadratic_objective(const Matrix<Scalar>& W,
                           const KernelOperator<Scalar>& op,
                           const Matrix<Scalar>& B);

/// FLOPs of one epoch with equal blocks:
/// ((2 + 3/b) n^2 + (2b + 1) n) * l, with l the number of columns.
double flops_formula(Index n, Index b, Index l);

/// FLOPs charged to one inner step on a block of size b:
/// (b^2 + b) l for the weight update plus (b^2 + 2nb + n) l for the residual.
double inner_step_flops(Index n, Index b, Index l);

}  // namespace apgp
