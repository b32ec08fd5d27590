#include "apgp/altproj.hpp"

#include <cmath>

namespace apgp {

std::string SelectionRule::name() const {
  switch (kind) {
    case Kind::GaussSouthwell: return "gs";
    case Kind::Cyclic: return "cyclic";
    case Kind::Random: return "random";
  }
  return "unknown";
}

SelectionRule SelectionRule::from_string(std::string_view name,
                                         std::uint64_t seed) {
  if (name == "gs" || name == "gauss_southwell") return gauss_southwell();
  if (name == "cyclic") return cyclic();
  if (name == "random") return random(seed);
  throw InvalidInput("unknown selection rule '" + std::string(name) +
                     "' (expected gs, cyclic or random)");
}

BlockSelector::BlockSelector(SelectionRule rule, const BlockPartition& partition)
    : rule_(rule), partition_(&partition), rng_(rule.seed) {}

template <typename Scalar>
Index select_block(const SelectionRule& rule, const Matrix<Scalar>& R,
                   const BlockPartition& partition, long inner_iter) {
  const Index m = partition.num_blocks();
  switch (rule.kind) {
    case SelectionRule::Kind::Cyclic:
      return static_cast<Index>(inner_iter % m);
    case SelectionRule::Kind::GaussSouthwell: {
      Index best = 0;
      double best_norm = -1.0;
      for (Index j = 0; j < m; ++j) {
        const Block& blk = partition.block(j);
        const double norm2 = static_cast<double>(
            R.middleRows(blk.begin, blk.size).squaredNorm());
        if (norm2 > best_norm) {
          best_norm = norm2;
          best = j;
        }
      }
      return best;
    }
    case SelectionRule::Kind::Random:
      throw InvalidInput("random selection needs a BlockSelector");
  }
  return 0;
}

template <typename Scalar>
Index BlockSelector::select(const Matrix<Scalar>& R, long inner_iter) {
  if (rule_.kind == SelectionRule::Kind::Random) {
    std::uniform_int_distribution<Index> pick(0, partition_->num_blocks() - 1);
    return pick(rng_);
  }
  return select_block<Scalar>(rule_, R, *partition_, inner_iter);
}

double BlockSelector::selection_flops(Index columns) const {
  if (rule_.kind != SelectionRule::Kind::GaussSouthwell) return 0.0;
  return 2.0 * static_cast<double>(partition_->n()) * static_cast<double>(columns);
}

template <typename Scalar>
SolveState<Scalar>::SolveState(const Matrix<Scalar>& B)
    : W(Matrix<Scalar>::Zero(B.rows(), B.cols())),
      R(B),
      rhs_norms(column_norms(B)) {}

template <typename Scalar>
TraceRecord SolveState<Scalar>::snapshot(double wall_time_s) const {
  TraceRecord rec;
  rec.epoch = epoch;
  rec.inner_iters = inner_iter;
  rec.avg_rel_residual = avg_rel_residual(column_norms(R), rhs_norms);
  rec.frobenius_residual = static_cast<double>(R.template cast<double>().norm());
  rec.cumulative_flops = flops;
  rec.wall_time_s = wall_time_s;
  return rec;
}

double flops_formula(Index n, Index b, Index l) {
  const double nd = static_cast<double>(n);
  const double bd = static_cast<double>(b);
  return ((2.0 + 3.0 / bd) * nd * nd + (2.0 * bd + 1.0) * nd) *
         static_cast<double>(l);
}

double inner_step_flops(Index n, Index b, Index l) {
  const double nd = static_cast<double>(n);
  const double bd = static_cast<double>(b);
  return block_solve_flops(b, l) +
         (bd * bd + 2.0 * nd * bd + nd) * static_cast<double>(l);
}

template <typename Scalar>
void ap_inner_step(SolveState<Scalar>& state, const CholeskyCache<Scalar>& cache,
                   const KernelOperator<Scalar>& op, Index block) {
  cache.require_current(op.spec());
  const Block& blk = cache.partition().block(block);
  const Matrix<Scalar> U = cache.solve(block, state.R.middleRows(blk.begin, blk.size));
  state.W.middleRows(blk.begin, blk.size) += U;
  if (const Matrix<Scalar>* K = op.stored())
    state.R.noalias() -= K->middleCols(blk.begin, blk.size) * U;
  else
    state.R.noalias() -= op.columns(blk.begin, blk.size) * U;
  state.flops += inner_step_flops(op.size(), blk.size, state.R.cols());
  ++state.inner_iter;
}

namespace {

template <typename Scalar>
SolveResult<Scalar> run_epochs(const KernelOperator<Scalar>& op,
                               const Matrix<Scalar>& B,
                               const CholeskyCache<Scalar>& cache,
                               const SelectionRule& rule,
                               const StoppingCriteria& stop,
                               const ApOptions& options) {
  stop.validate();
  if (B.rows() != op.size())
    throw InvalidInput("right-hand side has " + std::to_string(B.rows()) +
                       " rows, expected " + std::to_string(op.size()));
  if (!B.allFinite()) throw InvalidInput("right-hand side is not finite");
  cache.require_current(op.spec());

  const BlockPartition& partition = cache.partition();
  const Index m = partition.num_blocks();
  const Stopwatch clock(options.wall_clock);
  BlockSelector selector(rule, partition);

  SolveState<Scalar> state(B);
  state.flops = cache.build_flops();
  state.trace.push_back(state.snapshot(clock.seconds()));
  if (options.record_steps) state.step_trace.push_back(state.trace.back());

  SolveResult<Scalar> result;
  bool done = stop.max_epochs == 0 ||
              (stop.min_epochs == 0 && state.trace.back().avg_rel_residual < stop.tolerance);
  while (!done) {
    for (Index j = 0; j < m; ++j) {
      const Index chosen = selector.select(state.R, state.inner_iter);
      state.flops += selector.selection_flops(B.cols());
      ap_inner_step(state, cache, op, chosen);
      if (options.record_steps) {
        TraceRecord rec = state.snapshot(clock.seconds());
        rec.epoch = state.epoch + 1;
        state.step_trace.push_back(rec);
      }
    }
    ++state.epoch;
    const TraceRecord rec = state.snapshot(clock.seconds());
    state.trace.push_back(rec);
    if (!std::isfinite(rec.frobenius_residual))
      throw SolverError("alternating projection produced a non-finite residual at epoch " +
                            std::to_string(state.epoch),
                        state.trace);
    const bool below = rec.avg_rel_residual < stop.tolerance;
    if (below && state.epoch >= stop.min_epochs) {
      result.converged = true;
      done = true;
    } else if (state.epoch >= stop.max_epochs) {
      done = true;
    }
  }
  if (!result.converged && state.trace.back().avg_rel_residual < stop.tolerance &&
      state.epoch >= stop.min_epochs)
    result.converged = true;

  result.W = std::move(state.W);
  result.epochs = state.epoch;
  result.trace = std::move(state.trace);
  result.step_trace = std::move(state.step_trace);
  return result;
}

}  // namespace

template <typename Scalar>
SolveResult<Scalar> ap_solve(const KernelOperator<Scalar>& op,
                             const Matrix<Scalar>& B,
                             const BlockPartition& partition,
                             const SelectionRule& rule,
                             const StoppingCriteria& stop,
                             const ApOptions& options) {
  const CholeskyCache<Scalar> cache(op, partition);
  return run_epochs(op, B, cache, rule, stop, options);
}

template <typename Scalar>
SolveResult<Scalar> ap_solve(const KernelOperator<Scalar>& op,
                             const Matrix<Scalar>& B,
                             const CholeskyCache<Scalar>& cache,
                             const SelectionRule& rule,
                             const StoppingCriteria& stop,
                             const ApOptions& options) {
  return run_epochs(op, B, cache, rule, stop, options);
}

template <typename Scalar>
Matrix<Scalar> bcd_step_oracle(const Matrix<Scalar>& W,
                               const KernelOperator<Scalar>& op,
                               const Matrix<Scalar>& B,
                               const BlockPartition& partition, Index block) {
  const Block& blk = partition.block(block);
  const IndexList rows = partition.indices(block);
  IndexList rest;
  for (Index i = 0; i < op.size(); ++i)
    if (i < blk.begin || i >= blk.begin + blk.size) rest.push_back(i);

  const Matrix<Scalar> K_II = op.block(rows, rows);
  const Matrix<Scalar> K_Irest = op.block(rows, rest);
  Matrix<Scalar> W_rest(static_cast<Index>(rest.size()), W.cols());
  for (std::size_t a = 0; a < rest.size(); ++a)
    W_rest.row(static_cast<Index>(a)) = W.row(rest[a]);

  const Matrix<Scalar> rhs = B.middleRows(blk.begin, blk.size) - K_Irest * W_rest;
  Matrix<Scalar> out = W;
  out.middleRows(blk.begin, blk.size) = K_II.llt().solve(rhs);
  return out;
}

template <typename Scalar>
double quadratic_objective(const Matrix<Scalar>& W,
                           const KernelOperator<Scalar>& op,
                           const Matrix<Scalar>& B) {
  const Eigen::MatrixXd K = op.dense().template cast<double>();
  const Eigen::MatrixXd Wd = W.template cast<double>();
  const Eigen::MatrixXd Bd = B.template cast<double>();
  return 0.5 * (Wd.transpose() * K * Wd).trace() - (Bd.transpose() * Wd).trace();
}

#define APGP_INSTANTIATE(S)                                                        \
  template Index select_block<S>(const SelectionRule&, const Matrix<S>&,          \
                                 const BlockPartition&, long);                    \
  template Index BlockSelector::select<S>(const Matrix<S>&, long);                \
  template struct SolveState<S>;                                                  \
  template void ap_inner_step<S>(SolveState<S>&, const CholeskyCache<S>&,         \
                                 const KernelOperator<S>&, Index);                \
  template SolveResult<S> ap_solve<S>(const KernelOperator<S>&, const Matrix<S>&, \
                                      const BlockPartition&, const SelectionRule&, \
                                      const StoppingCriteria&, const ApOptions&); \
  template SolveResult<S> ap_solve<S>(const KernelOperator<S>&, const Matrix<S>&, \
                                      const CholeskyCache<S>&, const SelectionRule&, \
                                      const StoppingCriteria&, const ApOptions&); \
  template Matrix<S> bcd_step_oracle<S>(const Matrix<S>&, const KernelOperator<S>&, \
                                        const Matrix<S>&, const BlockPartition&, Index); \
  template double quadratic_objective<S>(const Matrix<S>&, const KernelOperator<S>&, \
                                         const Matrix<S>&);

APGP_INSTANTIATE(float)
APGP_INSTANTIATE(double)
#undef APGP_INSTANTIATE

}  // namespace apgp
