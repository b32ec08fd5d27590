#include "apgp/gp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Cholesky>

namespace apgp {

namespace {

constexpr double kMinPositive = 1e-12;

double softplus(double x) {
  return x > 30.0 ? x : std::log1p(std::exp(x));
}

double softplus_inverse(double y) {
  return y > 30.0 ? y : std::log(std::expm1(y));
}

double to_positive(Transform t, double raw) {
  return t == Transform::Softplus ? softplus(raw) : std::exp(raw);
}

double from_positive(Transform t, double value) {
  value = std::max(value, kMinPositive);
  return t == Transform::Softplus ? softplus_inverse(value) : std::log(value);
}

// d(positive)/d(raw), written in terms of the positive value.
double positive_chain(Transform t, double value) {
  value = std::max(value, kMinPositive);
  if (t == Transform::Log) return value;
  // sigmoid(softplus^{-1}(v)) = 1 - exp(-v)
  return -std::expm1(-value);
}

// -phi'(r) / r as a function of r^2; finite at r = 0.
double radial_slope(KernelFamily family, double r2) {
  r2 = std::max(r2, 0.0);
  switch (family) {
    case KernelFamily::Matern52: {
      const double sr = std::sqrt(5.0 * r2);
      return 5.0 / 3.0 * (1.0 + sr) * std::exp(-sr);
    }
    case KernelFamily::Matern32:
      return 3.0 * std::exp(-std::sqrt(3.0 * r2));
    case KernelFamily::RBF:
      return std::exp(-0.5 * r2);
  }
  return 0.0;
}

Eigen::LLT<Eigen::MatrixXd> factor_dense(const KernelSpec& spec,
                                          const PointMatrix<double>& X) {
  const IndexList all = iota_indices(0, X.rows());
  Eigen::LLT<Eigen::MatrixXd> llt(kernel_block<double>(spec, X, all, all));
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("dense Cholesky of the kernel matrix failed");
  return llt;
}

}  // namespace

std::string ParamId::name() const {
  switch (kind) {
    case Kind::Mean: return "mean_constant";
    case Kind::Lengthscale: return "lengthscale_" + std::to_string(dim);
    case Kind::Outputscale: return "outputscale";
    case Kind::Noise: return "noise_variance";
  }
  return "unknown";
}

HyperParameterMap::HyperParameterMap(Index dim, Transform transform)
    : dim_(dim), transform_(transform) {
  if (dim <= 0) throw InvalidInput("hyperparameter map needs dim > 0");
}

ParamId HyperParameterMap::id(Index i) const {
  if (i < 0 || i >= size()) throw InvalidInput("unknown hyperparameter index " + std::to_string(i));
  if (i == 0) return {ParamId::Kind::Mean, 0};
  if (i <= dim_) return {ParamId::Kind::Lengthscale, i - 1};
  if (i == dim_ + 1) return {ParamId::Kind::Outputscale, 0};
  return {ParamId::Kind::Noise, 0};
}

Eigen::VectorXd HyperParameterMap::to_raw(const KernelSpec& spec) const {
  if (spec.dim() != dim_) throw InvalidInput("spec dimension mismatch");
  Eigen::VectorXd raw(size());
  raw[0] = spec.mean_constant;
  for (Index k = 0; k < dim_; ++k) raw[1 + k] = from_positive(transform_, spec.lengthscales[k]);
  raw[dim_ + 1] = from_positive(transform_, spec.outputscale);
  raw[dim_ + 2] = from_positive(transform_, spec.noise_variance - spec.noise_floor);
  return raw;
}

KernelSpec HyperParameterMap::from_raw(const Eigen::VectorXd& raw,
                                       const KernelSpec& like) const {
  if (raw.size() != size()) throw InvalidInput("raw parameter vector has wrong size");
  KernelSpec spec = like;
  spec.mean_constant = raw[0];
  spec.lengthscales.resize(dim_);
  for (Index k = 0; k < dim_; ++k) spec.lengthscales[k] = to_positive(transform_, raw[1 + k]);
  spec.outputscale = to_positive(transform_, raw[dim_ + 1]);
  spec.noise_variance = spec.noise_floor + to_positive(transform_, raw[dim_ + 2]);
  return spec;
}

double HyperParameterMap::chain_factor(const KernelSpec& spec, Index i) const {
  const ParamId p = id(i);
  switch (p.kind) {
    case ParamId::Kind::Mean: return 1.0;
    case ParamId::Kind::Lengthscale: return positive_chain(transform_, spec.lengthscales[p.dim]);
    case ParamId::Kind::Outputscale: return positive_chain(transform_, spec.outputscale);
    case ParamId::Kind::Noise:
      return positive_chain(transform_, spec.noise_variance - spec.noise_floor);
  }
  return 0.0;
}

namespace {

Index param_index(const ParamId& p, Index dim) {
  switch (p.kind) {
    case ParamId::Kind::Mean: return 0;
    case ParamId::Kind::Lengthscale:
      if (p.dim < 0 || p.dim >= dim)
        throw InvalidInput("lengthscale index " + std::to_string(p.dim) + " out of range");
      return 1 + p.dim;
    case ParamId::Kind::Outputscale: return dim + 1;
    case ParamId::Kind::Noise: return dim + 2;
  }
  throw InvalidInput("unknown hyperparameter");
}

// Fills dK/d(raw theta) for every non-mean parameter on the block
// (rows x cols). out[p] corresponds to raw index p + 1.
void gradient_blocks(const KernelSpec& spec, const PointMatrix<double>& X,
                     IndexSpan rows, IndexSpan cols, Transform transform,
                     std::vector<Eigen::MatrixXd>& out) {
  const Index d = spec.dim();
  const HyperParameterMap map(d, transform);
  const auto nr = static_cast<Index>(rows.size());
  const auto nc = static_cast<Index>(cols.size());
  out.resize(static_cast<std::size_t>(d + 2));
  for (auto& m : out) m.resize(nr, nc);

  Eigen::VectorXd inv_ls = spec.lengthscales.cwiseInverse();
  Eigen::VectorXd ls_chain(d);
  for (Index k = 0; k < d; ++k) ls_chain[k] = map.chain_factor(spec, 1 + k) * inv_ls[k];
  const double os_chain = map.chain_factor(spec, d + 1);
  const double noise_chain = map.chain_factor(spec, d + 2);
  const double s = spec.outputscale;
  Eigen::VectorXd scaled(d);

  for (Index b = 0; b < nc; ++b) {
    const double* xb = X.row(cols[b]).data();
    for (Index a = 0; a < nr; ++a) {
      const double* xa = X.row(rows[a]).data();
      double r2 = 0.0;
      for (Index k = 0; k < d; ++k) {
        const double u = (xa[k] - xb[k]) * inv_ls[k];
        scaled[k] = u * u;
        r2 += scaled[k];
      }
      const double slope = s * radial_slope(spec.family, r2);
      // d k / d l_k = s * (-phi'(r)/r) * diff_k^2 / l_k^3 = slope * u_k^2 / l_k
      for (Index k = 0; k < d; ++k) out[static_cast<std::size_t>(k)](a, b) = slope * scaled[k] * ls_chain[k];
      out[static_cast<std::size_t>(d)](a, b) = os_chain * kernel_base(spec.family, std::sqrt(r2));
      out[static_cast<std::size_t>(d + 1)](a, b) = rows[a] == cols[b] ? noise_chain : 0.0;
    }
  }
}

}  // namespace

Eigen::MatrixXd kernel_gradient_block(const KernelSpec& spec,
                                      const PointMatrix<double>& X,
                                      IndexSpan rows, IndexSpan cols,
                                      ParamId param, Transform transform) {
  spec.validate();
  const Index p = param_index(param, spec.dim());
  for (Index i : rows)
    if (i < 0 || i >= X.rows()) throw InvalidInput("row index out of range");
  for (Index i : cols)
    if (i < 0 || i >= X.rows()) throw InvalidInput("column index out of range");
  if (p == 0)
    return Eigen::MatrixXd::Zero(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  std::vector<Eigen::MatrixXd> blocks;
  gradient_blocks(spec, X, rows, cols, transform, blocks);
  return std::move(blocks[static_cast<std::size_t>(p - 1)]);
}

TraceProbeSet make_probes(const Eigen::VectorXd& y, double mean_constant,
                          Index num_probes, ProbeKind kind, std::uint64_t seed,
                          const Preconditioner<double>* preconditioner) {
  if (num_probes < 1) throw InvalidInput("need at least one probe vector");
  const Index n = y.size();
  TraceProbeSet probes;
  probes.kind = kind;
  probes.seed = seed;
  probes.B.resize(n, num_probes + 1);
  probes.B.col(0) = y.array() - mean_constant;

  std::mt19937_64 rng(seed);
  Eigen::MatrixXd Z(n, num_probes);
  if (kind == ProbeKind::Rademacher) {
    for (Index c = 0; c < num_probes; ++c) {
      for (Index i = 0; i < n; ++i) Z(i, c) = (rng() >> 63) != 0 ? 1.0 : -1.0;
    }
    probes.weights = Z;
  } else {
    std::normal_distribution<double> normal;
    for (Index c = 0; c < num_probes; ++c)
      for (Index i = 0; i < n; ++i) Z(i, c) = normal(rng);
    if (preconditioner != nullptr) {
      // z = L e1 + sigma e2 has covariance L L^T + sigma^2 I = P.
      const auto& L = preconditioner->factor().L;
      Eigen::MatrixXd E1(L.cols(), num_probes);
      for (Index c = 0; c < num_probes; ++c)
        for (Index i = 0; i < L.cols(); ++i) E1(i, c) = normal(rng);
      Z = std::sqrt(preconditioner->sigma2()) * Z;
      if (L.cols() > 0) Z.noalias() += L * E1;
      probes.weights = preconditioner->apply(Z);
    } else {
      probes.weights = Z;
    }
  }
  probes.B.rightCols(num_probes) = Z;
  return probes;
}

namespace {

template <typename Scalar>
BatchedSolve solve_in(const KernelSpec& spec, const PointMatrix<double>& X,
                      const Eigen::MatrixXd& B, const SolverConfig& config) {
  const KernelOperator<Scalar> op(spec, X.cast<Scalar>(), config.storage);
  const Matrix<Scalar> rhs = B.cast<Scalar>();
  SolveResult<Scalar> result;
  if (config.kind == SolverKind::AltProj) {
    const Index b = std::min<Index>(config.batch_size, op.size());
    const BlockPartition partition(op.size(), b);
    ApOptions options;
    options.wall_clock = config.wall_clock;
    result = ap_solve(op, rhs, partition, config.rule, config.stop, options);
  } else {
    CgOptions options;
    options.wall_clock = config.wall_clock;
    const Index k = std::min<Index>(config.precond_rank, op.size());
    if (k > 0) {
      const Preconditioner<Scalar> pre = make_kernel_preconditioner(op, k);
      result = cg_solve(op, rhs, config.stop, &pre, options);
    } else {
      result = cg_solve<Scalar>(op, rhs, config.stop, nullptr, options);
    }
  }
  BatchedSolve out;
  out.W = result.W.template cast<double>();
  out.trace = std::move(result.trace);
  out.iterations = result.epochs;
  out.converged = result.converged;
  return out;
}

}  // namespace

BatchedSolve solve_kernel_system(const KernelSpec& spec,
                                 const PointMatrix<double>& X,
                                 const Eigen::MatrixXd& B,
                                 const SolverConfig& config) {
  if (config.batch_size <= 0) throw InvalidInput("batch size must be positive");
  if (config.precond_rank < 0) throw InvalidInput("preconditioner rank must be >= 0");
  if (config.precision == Precision::F32) return solve_in<float>(spec, X, B, config);
  return solve_in<double>(spec, X, B, config);
}

GradientEstimate mll_gradient_estimate(const KernelSpec& spec,
                                       const PointMatrix<double>& X,
                                       const TraceProbeSet& probes,
                                       const SolverConfig& config,
                                       Transform transform) {
  const Index n = X.rows();
  const Index l = probes.num_probes();
  if (probes.B.rows() != n) throw InvalidInput("probe set does not match the data size");
  if (l < 1) throw InvalidInput("probe set has no probe vectors");

  GradientEstimate est;
  est.solve = solve_kernel_system(spec, X, probes.B, config);
  const Eigen::MatrixXd& W = est.solve.W;

  // Right factors: [w_0, z_1 .. z_l]; left factors: W; per-column weights.
  Eigen::MatrixXd right(n, l + 1);
  right.col(0) = W.col(0);
  right.rightCols(l) = probes.weights;
  Eigen::VectorXd coef = Eigen::VectorXd::Constant(l + 1, 0.5 / static_cast<double>(l));
  coef[0] = -0.5;

  const Index d = spec.dim();
  est.gradient = Eigen::VectorXd::Zero(d + 3);
  est.gradient[0] = -W.col(0).sum();

  const IndexList all = iota_indices(0, n);
  constexpr Index kPanel = 256;
  std::vector<Eigen::MatrixXd> blocks;
  for (Index begin = 0; begin < n; begin += kPanel) {
    const Index count = std::min(kPanel, n - begin);
    const IndexSpan panel(all.data() + begin, static_cast<std::size_t>(count));
    gradient_blocks(spec, X, panel, all, transform, blocks);
    const auto left = W.middleRows(begin, count);
    for (Index p = 0; p < d + 2; ++p) {
      const Eigen::MatrixXd A = blocks[static_cast<std::size_t>(p)] * right;
      est.gradient[p + 1] += (left.array() * A.array()).colwise().sum().matrix().dot(coef);
    }
  }
  return est;
}

double exact_mll(const KernelSpec& spec, const PointMatrix<double>& X,
                 const Eigen::VectorXd& y) {
  spec.validate();
  if (y.size() != X.rows()) throw InvalidInput("label count does not match points");
  const auto llt = factor_dense(spec, X);
  const Eigen::VectorXd r = y.array() - spec.mean_constant;
  const Eigen::VectorXd half = llt.matrixL().solve(r);
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double n = static_cast<double>(X.rows());
  return 0.5 * (half.squaredNorm() + log_det + n * std::log(2.0 * std::numbers::pi));
}

Eigen::VectorXd exact_mll_gradient(const KernelSpec& spec,
                                   const PointMatrix<double>& X,
                                   const Eigen::VectorXd& y,
                                   Transform transform) {
  spec.validate();
  const Index n = X.rows();
  const auto llt = factor_dense(spec, X);
  const Eigen::VectorXd alpha = llt.solve((y.array() - spec.mean_constant).matrix());
  const Eigen::MatrixXd K_inv = llt.solve(Eigen::MatrixXd::Identity(n, n));

  const IndexList all = iota_indices(0, n);
  std::vector<Eigen::MatrixXd> blocks;
  gradient_blocks(spec, X, all, all, transform, blocks);

  Eigen::VectorXd grad(spec.dim() + 3);
  grad[0] = -alpha.sum();
  for (std::size_t p = 0; p < blocks.size(); ++p) {
    const Eigen::MatrixXd& dK = blocks[p];
    grad[static_cast<Index>(p) + 1] =
        -0.5 * alpha.dot(dK * alpha) + 0.5 * (K_inv.array() * dK.array()).sum();
  }
  return grad;
}

Adam::Adam(double step_size, double beta1, double beta2, double eps)
    : step_size_(step_size), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& gradient) {
  if (m_.size() == 0) {
    m_ = Eigen::VectorXd::Zero(params.size());
    v_ = Eigen::VectorXd::Zero(params.size());
  }
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * gradient;
  v_ = beta2_ * v_ + (1.0 - beta2_) * gradient.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= step_size_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

void TrainConfig::validate() const {
  if (steps < 0) throw InvalidInput("optimizer steps must be >= 0");
  if (!(step_size > 0.0)) throw InvalidInput("step size must be positive");
  if (num_probes < 1) throw InvalidInput("need at least one probe vector");
  solver.stop.validate();
}

TrainResult train(const PointMatrix<double>& X, const Eigen::VectorXd& y,
                  const KernelSpec& init, const TrainConfig& config,
                  const TrainCallback& on_step) {
  config.validate();
  init.validate();
  if (y.size() != X.rows()) throw InvalidInput("label count does not match points");

  const HyperParameterMap map(init.dim(), config.transform);
  Eigen::VectorXd raw = map.to_raw(init);
  Adam adam(config.step_size);
  const Stopwatch clock(config.solver.wall_clock);

  TrainResult result;
  result.spec = init;
  double flops = 0.0;
  for (int step = 0; step < config.steps; ++step) {
    const KernelSpec& spec = result.spec;
    const std::uint64_t probe_seed = config.seed + 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(step + 1);

    TraceProbeSet probes;
    if (config.probe_kind == ProbeKind::GaussianPreconditioned &&
        config.solver.kind == SolverKind::Cg && config.solver.precond_rank > 0) {
      const KernelOperator<double> op(spec, X, config.solver.storage);
      const Preconditioner<double> pre =
          make_kernel_preconditioner(op, std::min<Index>(config.solver.precond_rank, op.size()));
      probes = make_probes(y, spec.mean_constant, config.num_probes, config.probe_kind,
                           probe_seed, &pre);
    } else {
      probes = make_probes(y, spec.mean_constant, config.num_probes, config.probe_kind,
                           probe_seed);
    }

    GradientEstimate est;
    try {
      est = mll_gradient_estimate(spec, X, probes, config.solver, config.transform);
    } catch (const Error& e) {
      throw TrainingError("step " + std::to_string(step) + ": " + e.what(), result.log);
    }
    if (!est.gradient.allFinite())
      throw TrainingError("non-finite gradient at step " + std::to_string(step), result.log);

    adam.step(raw, est.gradient);
    result.spec = map.from_raw(raw, init);

    flops += est.solve.flops();
    TrainLogRecord rec;
    rec.step = step;
    rec.spec = result.spec;
    rec.solver_iterations = est.solve.iterations;
    rec.avg_rel_residual = est.solve.avg_rel_residual();
    rec.cumulative_flops = flops;
    rec.wall_time_s = clock.seconds();
    result.log.push_back(rec);
    if (on_step) on_step(rec);
  }
  return result;
}

Eigen::VectorXd predict_mean(const KernelSpec& spec,
                             const PointMatrix<double>& X_train,
                             const Eigen::VectorXd& y,
                             const PointMatrix<double>& X_test,
                             const SolverConfig& config,
                             BatchedSolve* solve_info) {
  if (y.size() != X_train.rows()) throw InvalidInput("label count does not match points");
  const Eigen::MatrixXd rhs = (y.array() - spec.mean_constant).matrix();
  BatchedSolve solve = solve_kernel_system(spec, X_train, rhs, config);

  const Index m = X_test.rows();
  Eigen::VectorXd mean(m);
  constexpr Index kPanel = 256;
  for (Index begin = 0; begin < m; begin += kPanel) {
    const Index count = std::min(kPanel, m - begin);
    const PointMatrix<double> panel = X_test.middleRows(begin, count);
    mean.segment(begin, count) =
        (cross_kernel<double>(spec, panel, X_train) * solve.W.col(0)).array() +
        spec.mean_constant;
  }
  if (solve_info != nullptr) *solve_info = std::move(solve);
  return mean;
}

PredictiveStats exact_predict_variance_nll(const KernelSpec& spec,
                                           const PointMatrix<double>& X_train,
                                           const PointMatrix<double>& X_test,
                                           const Eigen::VectorXd& y_test,
                                           const Eigen::VectorXd& means) {
  const Index m = X_test.rows();
  if (y_test.size() != m || means.size() != m)
    throw InvalidInput("test labels / means do not match the test points");
  const auto llt = factor_dense(spec, X_train);
  const Eigen::MatrixXd V =
      llt.matrixL().solve(cross_kernel<double>(spec, X_train, X_test));

  PredictiveStats stats;
  stats.variances.resize(m);
  double nll = 0.0;
  for (Index i = 0; i < m; ++i) {
    const double latent = spec.outputscale - V.col(i).squaredNorm();
    if (latent < -1e-6)
      throw NotPositiveDefinite("negative predictive variance " + std::to_string(latent) +
                                " at test point " + std::to_string(i));
    const double var = std::max(std::max(latent, 0.0) + spec.noise_variance, 1e-12);
    stats.variances[i] = var;
    const double err = y_test[i] - means[i];
    nll += 0.5 * (std::log(2.0 * std::numbers::pi * var) + err * err / var);
  }
  stats.mean_nll = m > 0 ? nll / static_cast<double>(m) : 0.0;
  return stats;
}

double rmse(const Eigen::VectorXd& predictions, const Eigen::VectorXd& targets) {
  if (predictions.size() != targets.size()) throw InvalidInput("rmse: size mismatch");
  if (predictions.size() == 0) return 0.0;
  return std::sqrt((predictions - targets).squaredNorm() /
                   static_cast<double>(predictions.size()));
}

}  // namespace apgp
