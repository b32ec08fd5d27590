#pragma once

#include <chrono>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "apgp/errors.hpp"
#include "apgp/types.hpp"

namespace apgp {

/// Stop once the average relative residual norm is strictly below
/// `tolerance` and at least `min_epochs` epochs (CG: iterations) have run,
/// or after `max_epochs`.
struct StoppingCriteria {
  double tolerance = 1.0;
  int max_epochs = 1000;
  int min_epochs = 11;

  void validate() const;

  static StoppingCriteria training() { return {1.0, 1000, 11}; }
  static StoppingCriteria test_time() { return {0.01, 1000, 11}; }
};

/// One row of a convergence trace. For alternating projection a row is an
/// epoch; for CG it is an iteration. Row 0 is the initial state.
struct TraceRecord {
  int epoch = 0;
  long inner_iters = 0;
  double avg_rel_residual = 0.0;
  double frobenius_residual = 0.0;
  double cumulative_flops = 0.0;
  double wall_time_s = 0.0;
};

using Trace = std::vector<TraceRecord>;

template <typename Scalar>
struct SolveResult {
  Matrix<Scalar> W;
  Trace trace;
  Trace step_trace;  // per inner step; alternating projection with record_steps only
  bool converged = false;
  int epochs = 0;

  double final_avg_rel() const { return trace.empty() ? 0.0 : trace.back().avg_rel_residual; }
  double total_flops() const { return trace.empty() ? 0.0 : trace.back().cumulative_flops; }
};

/// Raised when a solve diverges or breaks down. Carries the trace so far.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, Trace trace)
      : Error(what), trace_(std::move(trace)) {}
  const char* kind() const noexcept override { return "solver_error"; }
  const Trace& trace() const { return trace_; }

 private:
  Trace trace_;
};

/// Euclidean norm of every column.
template <typename Scalar>
Eigen::VectorXd column_norms(const Matrix<Scalar>& M) {
  Eigen::VectorXd out(M.cols());
  for (Index c = 0; c < M.cols(); ++c)
    out[c] = static_cast<double>(M.col(c).template cast<double>().norm());
  return out;
}

/// (1 / cols) * sum_i ||r_i|| / ||b_i||; columns with ||b_i|| = 0 count as 0.
double avg_rel_residual(const Eigen::VectorXd& residual_norms,
                        const Eigen::VectorXd& rhs_norms);

/// First trace row whose average relative residual is strictly below
/// `tolerance`, ignoring the min-epoch guard. Empty if never reached.
std::optional<int> epochs_to_tolerance(const Trace& trace, double tolerance);

/// CSV with header
/// epoch,inner_iters,avg_rel_residual,frobenius_residual,cumulative_flops,wall_time_s
void write_trace_csv(std::ostream& out, const Trace& trace);

/// Wall clock that reads zero when disabled, for byte-reproducible output.
class Stopwatch {
 public:
  explicit Stopwatch(bool enabled = true)
      : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    if (!enabled_) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  bool enabled_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace apgp
