#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "apgp/altproj.hpp"
#include "apgp/cg.hpp"
#include "apgp/kernels.hpp"
#include "apgp/solve_common.hpp"

namespace apgp {

/// Map from an unconstrained value to a positive hyperparameter.
enum class Transform { Softplus, Log };

/// Identifies one trainable hyperparameter. The raw parameter vector is laid
/// out as [mean, lengthscale_0 .. lengthscale_{d-1}, outputscale, noise].
struct ParamId {
  enum class Kind { Mean, Lengthscale, Outputscale, Noise };
  Kind kind = Kind::Mean;
  Index dim = 0;  // Lengthscale only

  std::string name() const;
};

class HyperParameterMap {
 public:
  HyperParameterMap(Index dim, Transform transform = Transform::Softplus);

  Index size() const { return dim_ + 3; }
  Index dim() const { return dim_; }
  Transform transform() const { return transform_; }
  ParamId id(Index i) const;

  /// Unconstrained values for `spec`. Positive parameters that sit exactly on
  /// their lower bound map to a large negative finite value.
  Eigen::VectorXd to_raw(const KernelSpec& spec) const;
  /// Spec for `raw`; family and noise floor are copied from `like`.
  KernelSpec from_raw(const Eigen::VectorXd& raw, const KernelSpec& like) const;
  /// d(constrained) / d(raw) for parameter `i` at `spec`.
  double chain_factor(const KernelSpec& spec, Index i) const;

 private:
  Index dim_;
  Transform transform_;
};

/// dK/d(raw theta)[rows, cols] for one hyperparameter, chain rule included.
/// The mean does not enter K, so its block is zero.
Eigen::MatrixXd kernel_gradient_block(const KernelSpec& spec,
                                      const PointMatrix<double>& X,
                                      IndexSpan rows, IndexSpan cols,
                                      ParamId param,
                                      Transform transform = Transform::Softplus);

enum class ProbeKind { Rademacher, GaussianPreconditioned };

/// Right-hand sides for a batched training solve: column 0 is y - mean,
/// columns 1..l are probe vectors z_i. `weights` holds the vectors the
/// trace estimator pairs with K^{-1} z_i: z_i itself for Rademacher probes,
/// P^{-1} z_i for probes drawn from N(0, P).
struct TraceProbeSet {
  Eigen::MatrixXd B;
  Eigen::MatrixXd weights;
  ProbeKind kind = ProbeKind::Rademacher;
  std::uint64_t seed = 0;

  Index num_probes() const { return B.cols() - 1; }
};

/// Draws `num_probes` probes. Gaussian probes need `preconditioner`
/// (without one they are standard normal).
TraceProbeSet make_probes(const Eigen::VectorXd& y, double mean_constant,
                          Index num_probes, ProbeKind kind, std::uint64_t seed,
                          const Preconditioner<double>* preconditioner = nullptr);

enum class SolverKind { AltProj, Cg };

struct SolverConfig {
  SolverKind kind = SolverKind::AltProj;
  Index batch_size = 1000;  // clamped to n
  SelectionRule rule = SelectionRule::gauss_southwell();
  Index precond_rank = 0;   // CG only; clamped to n
  StoppingCriteria stop = StoppingCriteria::training();
  Precision precision = Precision::F64;
  Storage storage = Storage::Lazy;
  bool wall_clock = true;
};

struct BatchedSolve {
  Eigen::MatrixXd W;
  Trace trace;
  int iterations = 0;  // AP epochs or CG iterations
  bool converged = false;

  double avg_rel_residual() const { return trace.empty() ? 0.0 : trace.back().avg_rel_residual; }
  double flops() const { return trace.empty() ? 0.0 : trace.back().cumulative_flops; }
};

/// Solves K W = B with the configured solver and precision. The Cholesky
/// cache (AP) or preconditioner (CG) is built from `spec` on every call.
BatchedSolve solve_kernel_system(const KernelSpec& spec,
                                 const PointMatrix<double>& X,
                                 const Eigen::MatrixXd& B,
                                 const SolverConfig& config);

struct GradientEstimate {
  Eigen::VectorXd gradient;  // d(-log p(y)) / d(raw theta)
  BatchedSolve solve;
};

/// Stochastic gradient of the negative marginal log likelihood from a single
/// batched solve K W = B:
///   -1/2 w_0^T dK w_0 + 1/(2l) sum_i w_i^T dK z_i,   mean: -1^T w_0.
GradientEstimate mll_gradient_estimate(const KernelSpec& spec,
                                       const PointMatrix<double>& X,
                                       const TraceProbeSet& probes,
                                       const SolverConfig& config,
                                       Transform transform = Transform::Softplus);

/// Exact negative log marginal likelihood, 1/2 n log(2 pi) included.
double exact_mll(const KernelSpec& spec, const PointMatrix<double>& X,
                 const Eigen::VectorXd& y);

/// Exact gradient of exact_mll with respect to the raw parameters, through a
/// dense Cholesky factorization.
Eigen::VectorXd exact_mll_gradient(const KernelSpec& spec,
                                   const PointMatrix<double>& X,
                                   const Eigen::VectorXd& y,
                                   Transform transform = Transform::Softplus);

/// Adam with bias correction.
class Adam {
 public:
  explicit Adam(double step_size, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& gradient);
  long iterations() const { return t_; }

 private:
  double step_size_, beta1_, beta2_, eps_;
  long t_ = 0;
  Eigen::VectorXd m_, v_;
};

struct TrainConfig {
  int steps = 50;
  double step_size = 0.1;
  Index num_probes = 15;
  ProbeKind probe_kind = ProbeKind::Rademacher;
  SolverConfig solver;
  std::uint64_t seed = 0;
  Transform transform = Transform::Softplus;

  void validate() const;
};

struct TrainLogRecord {
  int step = 0;
  KernelSpec spec;  // after the update
  int solver_iterations = 0;
  double avg_rel_residual = 0.0;
  double cumulative_flops = 0.0;
  double wall_time_s = 0.0;
};

struct TrainResult {
  KernelSpec spec;
  std::vector<TrainLogRecord> log;
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, std::vector<TrainLogRecord> log)
      : Error(what), log_(std::move(log)) {}
  const char* kind() const noexcept override { return "training_error"; }
  const std::vector<TrainLogRecord>& log() const { return log_; }

 private:
  std::vector<TrainLogRecord> log_;
};

using TrainCallback = std::function<void(const TrainLogRecord&)>;

/// Adam on the raw hyperparameters. Each step draws fresh probes, rebuilds
/// the solver's cache for the current hyperparameters, solves once for all
/// right-hand sides and applies the stochastic gradient.
TrainResult train(const PointMatrix<double>& X, const Eigen::VectorXd& y,
                  const KernelSpec& init, const TrainConfig& config,
                  const TrainCallback& on_step = {});

/// mean + K(X_test, X_train) K^{-1} (y - mean). The cross-covariance carries
/// no noise term. `solve_info`, when given, receives the solver record.
Eigen::VectorXd predict_mean(const KernelSpec& spec,
                             const PointMatrix<double>& X_train,
                             const Eigen::VectorXd& y,
                             const PointMatrix<double>& X_test,
                             const SolverConfig& config,
                             BatchedSolve* solve_info = nullptr);

struct PredictiveStats {
  Eigen::VectorXd variances;  // of y*, noise included
  double mean_nll = 0.0;
};

/// Dense predictive variances and the mean per-point Gaussian NLL
///   1/M sum_i 1/2 [log(2 pi v_i) + (y_i - m_i)^2 / v_i].
PredictiveStats exact_predict_variance_nll(const KernelSpec& spec,
                                           const PointMatrix<double>& X_train,
                                           const PointMatrix<double>& X_test,
                                           const Eigen::VectorXd& y_test,
                                           const Eigen::VectorXd& means);

double rmse(const Eigen::VectorXd& predictions, const Eigen::VectorXd& targets);

}  // namespace apgp
