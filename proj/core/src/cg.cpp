#include "apgp/cg.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace apgp {

namespace {

// Greedy pivoted Cholesky over an implicit SPD matrix given by its diagonal
// and a column accessor.
template <typename Scalar, typename ColumnFn>
PivotedCholeskyFactor<Scalar> pivoted_cholesky_impl(Vector<Scalar> diag,
                                                    Index rank,
                                                    ColumnFn&& column_of) {
  const Index n = diag.size();
  if (rank < 0 || rank > n)
    throw InvalidInput("preconditioner rank " + std::to_string(rank) +
                       " outside [0, " + std::to_string(n) + "]");
  const Scalar scale = n > 0 ? diag.cwiseAbs().maxCoeff() : Scalar(0);
  const Scalar threshold =
      static_cast<Scalar>(n) * std::numeric_limits<Scalar>::epsilon() * scale;
  std::vector<bool> used(static_cast<std::size_t>(n), false);

  PivotedCholeskyFactor<Scalar> out;
  out.L = Matrix<Scalar>::Zero(n, rank);
  Index k = 0;
  for (; k < rank; ++k) {
    Index pivot = -1;
    Scalar best = -std::numeric_limits<Scalar>::infinity();
    for (Index i = 0; i < n; ++i) {
      if (!used[static_cast<std::size_t>(i)] && diag[i] > best) {
        best = diag[i];
        pivot = i;
      }
    }
    if (best < -threshold)
      throw NotPositiveDefinite(
          "pivoted Cholesky met a negative residual diagonal " +
          std::to_string(static_cast<double>(best)) +
          " (consider raising the noise floor)");
    if (best <= threshold) break;

    Vector<Scalar> column = column_of(pivot);
    if (k > 0)
      column.noalias() -= out.L.leftCols(k) * out.L.row(pivot).leftCols(k).transpose();
    column /= std::sqrt(best);
    out.L.col(k) = column;
    used[static_cast<std::size_t>(pivot)] = true;
    out.pivots.push_back(pivot);
    diag -= column.cwiseAbs2();
  }
  if (k < rank) out.L.conservativeResize(n, k);
  return out;
}

}  // namespace

template <typename Scalar>
PivotedCholeskyFactor<Scalar> pivoted_cholesky(const KernelOperator<Scalar>& op,
                                               Index rank, bool include_noise) {
  const Index n = op.size();
  const Scalar shift =
      include_noise ? Scalar(0) : static_cast<Scalar>(op.spec().noise_variance);
  const IndexList all = iota_indices(0, n);
  return pivoted_cholesky_impl<Scalar>(
      Vector<Scalar>::Constant(n, op.diagonal_entry() - shift), rank,
      [&](Index pivot) {
        const Index p[] = {pivot};
        Vector<Scalar> column = op.block(all, p).col(0);
        column[pivot] -= shift;
        return column;
      });
}

template <typename Scalar>
PivotedCholeskyFactor<Scalar> pivoted_cholesky(const Matrix<Scalar>& K, Index rank) {
  if (K.rows() != K.cols()) throw InvalidInput("pivoted Cholesky needs a square matrix");
  return pivoted_cholesky_impl<Scalar>(
      K.diagonal(), rank, [&](Index pivot) -> Vector<Scalar> { return K.col(pivot); });
}

template <typename Scalar>
Preconditioner<Scalar>::Preconditioner(PivotedCholeskyFactor<Scalar> factor,
                                       double sigma2)
    : factor_(std::move(factor)), sigma2_(sigma2) {
  if (!(sigma2 > 0.0)) throw InvalidInput("preconditioner shift must be positive");
  const Index k = factor_.rank();
  if (k > 0) {
    Matrix<Scalar> inner = factor_.L.transpose() * factor_.L;
    inner.diagonal().array() += static_cast<Scalar>(sigma2_);
    inner_.compute(inner);
    if (inner_.info() != Eigen::Success)
      throw NotPositiveDefinite("preconditioner capacitance matrix is not SPD");
  }
}

template <typename Scalar>
Matrix<Scalar> Preconditioner<Scalar>::apply(const Matrix<Scalar>& V) const {
  const Scalar inv = static_cast<Scalar>(1.0 / sigma2_);
  if (factor_.rank() == 0) return V * inv;
  if (V.rows() != factor_.L.rows())
    throw InvalidInput("preconditioner: shape mismatch");
  const Matrix<Scalar> LtV = factor_.L.transpose() * V;
  return (V - factor_.L * inner_.solve(LtV)) * inv;
}

template <typename Scalar>
Matrix<Scalar> Preconditioner<Scalar>::multiply(const Matrix<Scalar>& V) const {
  Matrix<Scalar> out = V * static_cast<Scalar>(sigma2_);
  if (factor_.rank() > 0) out.noalias() += factor_.L * (factor_.L.transpose() * V);
  return out;
}

template <typename Scalar>
Preconditioner<Scalar> make_kernel_preconditioner(const KernelOperator<Scalar>& op,
                                                  Index rank) {
  return Preconditioner<Scalar>(pivoted_cholesky(op, rank, false),
                                op.spec().noise_variance);
}

template <typename Scalar>
SolveResult<Scalar> cg_solve(const KernelOperator<Scalar>& op,
                             const Matrix<Scalar>& B,
                             const StoppingCriteria& stop,
                             const Preconditioner<Scalar>* preconditioner,
                             const CgOptions& options) {
  stop.validate();
  const Index n = op.size();
  if (B.rows() != n)
    throw InvalidInput("right-hand side has " + std::to_string(B.rows()) +
                       " rows, expected " + std::to_string(n));
  if (!B.allFinite()) throw InvalidInput("right-hand side is not finite");

  const Index cols = B.cols();
  const double iter_flops = 2.0 * static_cast<double>(n) * static_cast<double>(n) *
                            static_cast<double>(cols);
  const Stopwatch clock(options.wall_clock);
  const Eigen::VectorXd rhs_norms = column_norms(B);
  auto precondition = [&](const Matrix<Scalar>& V) {
    return preconditioner != nullptr ? preconditioner->apply(V) : V;
  };

  Matrix<Scalar> W = Matrix<Scalar>::Zero(n, cols);
  Matrix<Scalar> R = B;
  Matrix<Scalar> Z = precondition(R);
  Matrix<Scalar> D = Z;
  Vector<Scalar> rz = (R.array() * Z.array()).colwise().sum().transpose();

  SolveResult<Scalar> result;
  auto record = [&](int iter) {
    TraceRecord rec;
    rec.epoch = iter;
    rec.inner_iters = iter;
    rec.avg_rel_residual = avg_rel_residual(column_norms(R), rhs_norms);
    rec.frobenius_residual = static_cast<double>(R.template cast<double>().norm());
    rec.cumulative_flops = iter_flops * iter;
    rec.wall_time_s = clock.seconds();
    result.trace.push_back(rec);
    return rec;
  };
  record(0);

  int iter = 0;
  bool done = stop.max_epochs == 0 ||
              (stop.min_epochs == 0 && result.trace.back().avg_rel_residual < stop.tolerance);
  while (!done) {
    const Matrix<Scalar> KD = op.apply(D);
    const Vector<Scalar> curvature = (D.array() * KD.array()).colwise().sum().transpose();
    Vector<Scalar> alpha = Vector<Scalar>::Zero(cols);
    for (Index c = 0; c < cols; ++c) {
      if (rz[c] == Scalar(0)) continue;  // column already solved exactly
      if (!(curvature[c] > Scalar(0)))
        throw SolverError("CG breakdown: non-positive curvature in column " +
                              std::to_string(c) + " at iteration " +
                              std::to_string(iter + 1),
                          result.trace);
      alpha[c] = rz[c] / curvature[c];
    }
    W.noalias() += D * alpha.asDiagonal();
    R.noalias() -= KD * alpha.asDiagonal();
    Z = precondition(R);
    const Vector<Scalar> rz_new = (R.array() * Z.array()).colwise().sum().transpose();
    Vector<Scalar> beta = Vector<Scalar>::Zero(cols);
    for (Index c = 0; c < cols; ++c)
      if (rz[c] != Scalar(0)) beta[c] = rz_new[c] / rz[c];
    D = Z + D * beta.asDiagonal();
    rz = rz_new;

    ++iter;
    const TraceRecord rec = record(iter);
    if (!std::isfinite(rec.frobenius_residual))
      throw SolverError("CG produced a non-finite residual at iteration " +
                            std::to_string(iter),
                        result.trace);
    if (rec.avg_rel_residual < stop.tolerance && iter >= stop.min_epochs) {
      result.converged = true;
      done = true;
    } else if (iter >= stop.max_epochs) {
      done = true;
    }
  }
  if (!result.converged && result.trace.back().avg_rel_residual < stop.tolerance &&
      iter >= stop.min_epochs)
    result.converged = true;
  result.W = std::move(W);
  result.epochs = iter;
  return result;
}

#define APGP_INSTANTIATE(S)                                                          \
  template PivotedCholeskyFactor<S> pivoted_cholesky<S>(const KernelOperator<S>&,   \
                                                        Index, bool);               \
  template PivotedCholeskyFactor<S> pivoted_cholesky<S>(const Matrix<S>&, Index);   \
  template class Preconditioner<S>;                                                 \
  template Preconditioner<S> make_kernel_preconditioner<S>(const KernelOperator<S>&, \
                                                           Index);                  \
  template SolveResult<S> cg_solve<S>(const KernelOperator<S>&, const Matrix<S>&,   \
                                      const StoppingCriteria&, const Preconditioner<S>*, \
                                      const CgOptions&);

APGP_INSTANTIATE(float)
APGP_INSTANTIATE(double)
#undef APGP_INSTANTIATE

}  // namespace apgp
