#include "apgp/kernels.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

namespace apgp {

IndexList iota_indices(Index begin, Index count) {
  IndexList out(static_cast<std::size_t>(count));
  std::iota(out.begin(), out.end(), begin);
  return out;
}

std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::Matern52: return "matern52";
    case KernelFamily::Matern32: return "matern32";
    case KernelFamily::RBF: return "rbf";
  }
  return "unknown";
}

KernelFamily kernel_family_from_string(std::string_view name) {
  if (name == "matern52") return KernelFamily::Matern52;
  if (name == "matern32") return KernelFamily::Matern32;
  if (name == "rbf") return KernelFamily::RBF;
  throw InvalidInput("unknown kernel family '" + std::string(name) +
                     "' (expected matern52, matern32 or rbf)");
}

void KernelSpec::validate() const {
  if (lengthscales.size() == 0) throw InvalidInput("kernel has no lengthscales");
  for (Index k = 0; k < lengthscales.size(); ++k) {
    if (!(lengthscales[k] > 0.0) || !std::isfinite(lengthscales[k]))
      throw InvalidInput("lengthscale " + std::to_string(k) +
                         " must be positive and finite");
  }
  // outputscale == 0 is accepted: it yields K = noise * I, a useful
  // degenerate system.
  if (!(outputscale >= 0.0) || !std::isfinite(outputscale))
    throw InvalidInput("outputscale must be non-negative and finite");
  if (!(noise_floor >= 0.0)) throw InvalidInput("noise_floor must be >= 0");
  if (!(noise_variance >= noise_floor) || !std::isfinite(noise_variance))
    throw InvalidInput("noise_variance " + std::to_string(noise_variance) +
                       " is below the noise floor " +
                       std::to_string(noise_floor));
  if (!std::isfinite(mean_constant))
    throw InvalidInput("mean_constant must be finite");
}

namespace {

struct Fnv1a {
  std::uint64_t state = 1469598103934665603ull;
  void add(std::uint64_t word) {
    for (int i = 0; i < 8; ++i) {
      state ^= (word >> (8 * i)) & 0xffu;
      state *= 1099511628211ull;
    }
  }
  void add(double value) { add(std::bit_cast<std::uint64_t>(value)); }
};

}  // namespace

std::uint64_t KernelSpec::fingerprint() const {
  Fnv1a h;
  h.add(static_cast<std::uint64_t>(family));
  h.add(static_cast<std::uint64_t>(lengthscales.size()));
  for (Index k = 0; k < lengthscales.size(); ++k) h.add(lengthscales[k]);
  h.add(outputscale);
  h.add(noise_variance);
  h.add(mean_constant);
  h.add(noise_floor);
  return h.state;
}

KernelSpec KernelSpec::isotropic(KernelFamily family, Index dim,
                                 double lengthscale, double outputscale,
                                 double noise_variance, double mean_constant) {
  KernelSpec spec;
  spec.family = family;
  spec.lengthscales = Eigen::VectorXd::Constant(dim, lengthscale);
  spec.outputscale = outputscale;
  spec.noise_variance = noise_variance;
  spec.mean_constant = mean_constant;
  spec.noise_floor = std::min(spec.noise_floor, noise_variance);
  return spec;
}

namespace {

template <typename Scalar>
Scalar base_from_r2(KernelFamily family, Scalar r2) {
  using std::exp;
  using std::sqrt;
  r2 = std::max(r2, Scalar(0));
  switch (family) {
    case KernelFamily::Matern52: {
      const Scalar sr = sqrt(Scalar(5) * r2);
      return (Scalar(1) + sr + Scalar(5) / Scalar(3) * r2) * exp(-sr);
    }
    case KernelFamily::Matern32: {
      const Scalar sr = sqrt(Scalar(3) * r2);
      return (Scalar(1) + sr) * exp(-sr);
    }
    case KernelFamily::RBF:
      return exp(Scalar(-0.5) * r2);
  }
  return Scalar(0);
}

void check_indices(IndexSpan indices, Index n, const char* what) {
  for (Index i : indices) {
    if (i < 0 || i >= n)
      throw InvalidInput(std::string(what) + " index " + std::to_string(i) +
                         " out of range [0, " + std::to_string(n) + ")");
  }
}

}  // namespace

double kernel_base(KernelFamily family, double r) {
  return base_from_r2<double>(family, r * r);
}

namespace detail {

template <typename Scalar>
KernelEvaluator<Scalar>::KernelEvaluator(const KernelSpec& spec)
    : family_(spec.family),
      dim_(spec.dim()),
      inv_lengthscale_(spec.lengthscales.cwiseInverse().cast<Scalar>()),
      outputscale_(static_cast<Scalar>(spec.outputscale)),
      noise_(static_cast<Scalar>(spec.noise_variance)) {}

template <typename Scalar>
Scalar KernelEvaluator<Scalar>::base(Scalar r2) const {
  return base_from_r2<Scalar>(family_, r2);
}

template class KernelEvaluator<float>;
template class KernelEvaluator<double>;

}  // namespace detail

template <typename Scalar>
Scalar kernel_value(const KernelSpec& spec, std::span<const Scalar> x,
                    std::span<const Scalar> x_prime, bool same_point) {
  spec.validate();
  if (static_cast<Index>(x.size()) != spec.dim() ||
      static_cast<Index>(x_prime.size()) != spec.dim())
    throw InvalidInput("point dimension does not match the lengthscales");
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!std::isfinite(x[k]) || !std::isfinite(x_prime[k]))
      throw InvalidInput("non-finite input coordinate");
  }
  const detail::KernelEvaluator<Scalar> eval(spec);
  return eval(x.data(), x_prime.data(), same_point);
}

template <typename Scalar>
Matrix<Scalar> kernel_block(const KernelSpec& spec,
                            const PointMatrix<Scalar>& X, IndexSpan rows,
                            IndexSpan cols) {
  if (X.cols() != spec.dim())
    throw InvalidInput("point dimension does not match the lengthscales");
  check_indices(rows, X.rows(), "row");
  check_indices(cols, X.rows(), "column");
  const detail::KernelEvaluator<Scalar> eval(spec);
  const auto n_rows = static_cast<Index>(rows.size());
  const auto n_cols = static_cast<Index>(cols.size());
  Matrix<Scalar> out(n_rows, n_cols);

  const bool symmetric = std::equal(rows.begin(), rows.end(), cols.begin(),
                                    cols.end());
  if (symmetric) {
    for (Index b = 0; b < n_cols; ++b) {
      const Scalar* xb = X.row(cols[b]).data();
      for (Index a = 0; a <= b; ++a) {
        out(a, b) = eval(X.row(rows[a]).data(), xb, rows[a] == cols[b]);
      }
    }
    for (Index b = 0; b < n_cols; ++b)
      for (Index a = b + 1; a < n_rows; ++a) out(a, b) = out(b, a);
    return out;
  }

  for (Index b = 0; b < n_cols; ++b) {
    const Scalar* xb = X.row(cols[b]).data();
    for (Index a = 0; a < n_rows; ++a) {
      out(a, b) = eval(X.row(rows[a]).data(), xb, rows[a] == cols[b]);
    }
  }
  return out;
}

template <typename Scalar>
Matrix<Scalar> cross_kernel(const KernelSpec& spec,
                            const PointMatrix<Scalar>& X_left,
                            const PointMatrix<Scalar>& X_right) {
  if (X_left.cols() != spec.dim() || X_right.cols() != spec.dim())
    throw InvalidInput("point dimension does not match the lengthscales");
  const detail::KernelEvaluator<Scalar> eval(spec);
  Matrix<Scalar> out(X_left.rows(), X_right.rows());
  for (Index b = 0; b < X_right.rows(); ++b) {
    const Scalar* xb = X_right.row(b).data();
    for (Index a = 0; a < X_left.rows(); ++a)
      out(a, b) = eval(X_left.row(a).data(), xb, false);
  }
  return out;
}

template <typename Scalar>
Matrix<Scalar> kernel_matvec(const KernelSpec& spec,
                             const PointMatrix<Scalar>& X,
                             const Matrix<Scalar>& V, Index block_rows) {
  if (V.rows() != X.rows())
    throw InvalidInput("kernel_matvec: V has " + std::to_string(V.rows()) +
                       " rows, expected " + std::to_string(X.rows()));
  if (block_rows <= 0) throw InvalidInput("block_rows must be positive");
  const Index n = X.rows();
  const IndexList all = iota_indices(0, n);
  Matrix<Scalar> out(n, V.cols());
  for (Index begin = 0; begin < n; begin += block_rows) {
    const Index count = std::min(block_rows, n - begin);
    const IndexList panel = iota_indices(begin, count);
    const Matrix<Scalar> K_panel = kernel_block<Scalar>(spec, X, panel, all);
    out.middleRows(begin, count).noalias() = K_panel * V;
  }
  return out;
}

template <typename Scalar>
KernelOperator<Scalar>::KernelOperator(KernelSpec spec, PointMatrix<Scalar> X,
                                       Storage storage, Index panel_rows)
    : spec_(std::move(spec)),
      X_(std::move(X)),
      storage_(storage),
      panel_rows_(panel_rows),
      eval_((spec_.validate(), spec_)),
      all_(iota_indices(0, X_.rows())) {
  if (X_.cols() != spec_.dim())
    throw InvalidInput("point dimension " + std::to_string(X_.cols()) +
                       " does not match " + std::to_string(spec_.dim()) +
                       " lengthscales");
  if (!X_.allFinite()) throw InvalidInput("non-finite input coordinate");
  if (panel_rows_ <= 0) throw InvalidInput("panel_rows must be positive");
  if (storage_ == Storage::Dense) K_ = kernel_block<Scalar>(spec_, X_, all_, all_);
}

template <typename Scalar>
Matrix<Scalar> KernelOperator<Scalar>::block(IndexSpan rows,
                                             IndexSpan cols) const {
  if (storage_ == Storage::Lazy) return kernel_block<Scalar>(spec_, X_, rows, cols);
  check_indices(rows, size(), "row");
  check_indices(cols, size(), "column");
  Matrix<Scalar> out(static_cast<Index>(rows.size()),
                     static_cast<Index>(cols.size()));
  for (Index b = 0; b < out.cols(); ++b)
    for (Index a = 0; a < out.rows(); ++a) out(a, b) = K_(rows[a], cols[b]);
  return out;
}

template <typename Scalar>
Matrix<Scalar> KernelOperator<Scalar>::principal(Index begin,
                                                 Index count) const {
  if (storage_ == Storage::Dense) return K_.block(begin, begin, count, count);
  const IndexSpan idx(all_.data() + begin, static_cast<std::size_t>(count));
  return kernel_block<Scalar>(spec_, X_, idx, idx);
}

template <typename Scalar>
Matrix<Scalar> KernelOperator<Scalar>::columns(Index begin, Index count) const {
  if (storage_ == Storage::Dense) return K_.middleCols(begin, count);
  const IndexSpan idx(all_.data() + begin, static_cast<std::size_t>(count));
  return kernel_block<Scalar>(spec_, X_, all_, idx);
}

template <typename Scalar>
Matrix<Scalar> KernelOperator<Scalar>::apply(const Matrix<Scalar>& V) const {
  if (storage_ == Storage::Lazy) return kernel_matvec<Scalar>(spec_, X_, V, panel_rows_);
  if (V.rows() != size()) throw InvalidInput("operator apply: shape mismatch");
  Matrix<Scalar> out(size(), V.cols());
  // Same row-panel order as the lazy path.
  for (Index begin = 0; begin < size(); begin += panel_rows_) {
    const Index count = std::min(panel_rows_, size() - begin);
    out.middleRows(begin, count).noalias() = K_.middleRows(begin, count) * V;
  }
  return out;
}

template <typename Scalar>
Matrix<Scalar> KernelOperator<Scalar>::dense() const {
  if (storage_ == Storage::Dense) return K_;
  return kernel_block<Scalar>(spec_, X_, all_, all_);
}

#define APGP_INSTANTIATE(S)                                                   \
  template S kernel_value<S>(const KernelSpec&, std::span<const S>,          \
                             std::span<const S>, bool);                      \
  template Matrix<S> kernel_block<S>(const KernelSpec&, const PointMatrix<S>&, \
                                     IndexSpan, IndexSpan);                  \
  template Matrix<S> cross_kernel<S>(const KernelSpec&, const PointMatrix<S>&, \
                                     const PointMatrix<S>&);                 \
  template Matrix<S> kernel_matvec<S>(const KernelSpec&, const PointMatrix<S>&, \
                                      const Matrix<S>&, Index);              \
  template class KernelOperator<S>;

APGP_INSTANTIATE(float)
APGP_INSTANTIATE(double)
#undef APGP_INSTANTIATE

}  // namespace apgp
