#include "apgp/solve_common.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace apgp {

void StoppingCriteria::validate() const {
  if (!(tolerance > 0.0)) throw InvalidInput("tolerance must be positive");
  if (min_epochs < 0) throw InvalidInput("min_epochs must be non-negative");
  if (max_epochs < min_epochs)
    throw InvalidInput("max_epochs must be at least min_epochs");
}

double avg_rel_residual(const Eigen::VectorXd& residual_norms,
                        const Eigen::VectorXd& rhs_norms) {
  if (rhs_norms.size() == 0) return 0.0;
  double total = 0.0;
  for (Index i = 0; i < rhs_norms.size(); ++i) {
    if (rhs_norms[i] > 0.0) total += residual_norms[i] / rhs_norms[i];
  }
  return total / static_cast<double>(rhs_norms.size());
}

std::optional<int> epochs_to_tolerance(const Trace& trace, double tolerance) {
  for (const TraceRecord& rec : trace) {
    if (rec.avg_rel_residual < tolerance) return rec.epoch;
  }
  return std::nullopt;
}

void write_trace_csv(std::ostream& out, const Trace& trace) {
  out << "epoch,inner_iters,avg_rel_residual,frobenius_residual,"
         "cumulative_flops,wall_time_s\n";
  char line[256];
  for (const TraceRecord& r : trace) {
    std::snprintf(line, sizeof line, "%d,%ld,%.17g,%.17g,%.17g,%.17g\n",
                  r.epoch, r.inner_iters, r.avg_rel_residual,
                  r.frobenius_residual, r.cumulative_flops, r.wall_time_s);
    out << line;
  }
}

}  // namespace apgp
