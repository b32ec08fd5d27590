#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "apgp/errors.hpp"
#include "apgp/types.hpp"

namespace apgp {

enum class KernelFamily { Matern52, Matern32, RBF };

std::string_view to_string(KernelFamily family);
KernelFamily kernel_family_from_string(std::string_view name);

/// Stationary ARD kernel plus the observation noise and the constant prior
/// mean. The noise variance is folded into the kernel diagonal, so every
/// solver sees a single SPD matrix K = outputscale * k_base + noise * I.
struct KernelSpec {
  KernelFamily family = KernelFamily::Matern52;
  Eigen::VectorXd lengthscales;
  double outputscale = 1.0;
  double noise_variance = 0.1;
  double mean_constant = 0.0;
  double noise_floor = 1e-4;

  Index dim() const { return lengthscales.size(); }

  /// Throws InvalidInput when a hyperparameter is out of its domain.
  void validate() const;

  /// Hash over every field. Used to detect stale factorizations.
  std::uint64_t fingerprint() const;

  /// ARD spec with every lengthscale equal to `lengthscale`.
  static KernelSpec isotropic(KernelFamily family, Index dim, double lengthscale,
                              double outputscale, double noise_variance,
                              double mean_constant = 0.0);
};

/// Base correlation as a function of the ARD-scaled distance r.
double kernel_base(KernelFamily family, double r);

namespace detail {

// Evaluates entries of K with one fixed arithmetic path. Every public entry
// point goes through this so blocks tile the dense matrix bit for bit.
template <typename Scalar>
class KernelEvaluator {
 public:
  explicit KernelEvaluator(const KernelSpec& spec);

  Scalar squared_distance(const Scalar* x, const Scalar* y) const {
    Scalar acc = 0;
    for (Index k = 0; k < dim_; ++k) {
      const Scalar diff = (x[k] - y[k]) * inv_lengthscale_[k];
      acc += diff * diff;
    }
    return acc;
  }

  Scalar base(Scalar r2) const;

  Scalar operator()(const Scalar* x, const Scalar* y, bool same_point) const {
    Scalar value = outputscale_ * base(squared_distance(x, y));
    if (same_point) value += noise_;
    return value;
  }

  Scalar diagonal() const { return outputscale_ + noise_; }

 private:
  KernelFamily family_;
  Index dim_;
  Vector<Scalar> inv_lengthscale_;
  Scalar outputscale_;
  Scalar noise_;
};

}  // namespace detail

/// Single kernel entry k(x, x') (+ noise when `same_point`).
template <typename Scalar>
Scalar kernel_value(const KernelSpec& spec, std::span<const Scalar> x,
                    std::span<const Scalar> x_prime, bool same_point);

/// K[rows, cols]. Entry (a, b) carries the noise term iff rows[a] == cols[b].
/// When `rows` and `cols` are the same sequence, only the upper triangle is
/// evaluated and then mirrored, so the block is exactly symmetric.
template <typename Scalar>
Matrix<Scalar> kernel_block(const KernelSpec& spec,
                            const PointMatrix<Scalar>& X, IndexSpan rows,
                            IndexSpan cols);

/// K(X_left, X_right) between two point sets. No noise term: the sets are
/// treated as distinct points.
template <typename Scalar>
Matrix<Scalar> cross_kernel(const KernelSpec& spec,
                            const PointMatrix<Scalar>& X_left,
                            const PointMatrix<Scalar>& X_right);

/// K * V evaluated in row panels of `block_rows` rows.
template <typename Scalar>
Matrix<Scalar> kernel_matvec(const KernelSpec& spec,
                             const PointMatrix<Scalar>& X,
                             const Matrix<Scalar>& V, Index block_rows);

enum class Storage { Lazy, Dense };

/// Access to the training kernel matrix. In lazy mode every request is
/// evaluated on demand from the points; in dense mode K is materialized once.
/// Both modes return bitwise-identical entries.
template <typename Scalar>
class KernelOperator {
 public:
  KernelOperator(KernelSpec spec, PointMatrix<Scalar> X,
                 Storage storage = Storage::Lazy, Index panel_rows = 256);

  Index size() const { return X_.rows(); }
  const KernelSpec& spec() const { return spec_; }
  const PointMatrix<Scalar>& points() const { return X_; }
  Storage storage() const { return storage_; }
  Index panel_rows() const { return panel_rows_; }

  Matrix<Scalar> block(IndexSpan rows, IndexSpan cols) const;
  /// K[begin:begin+count, begin:begin+count].
  Matrix<Scalar> principal(Index begin, Index count) const;
  /// K[:, begin:begin+count].
  Matrix<Scalar> columns(Index begin, Index count) const;
  /// K * V.
  Matrix<Scalar> apply(const Matrix<Scalar>& V) const;
  Scalar diagonal_entry() const { return eval_.diagonal(); }
  Matrix<Scalar> dense() const;
  /// The stored matrix in dense mode, nullptr in lazy mode.
  const Matrix<Scalar>* stored() const { return storage_ == Storage::Dense ? &K_ : nullptr; }

 private:
  KernelSpec spec_;
  PointMatrix<Scalar> X_;
  Storage storage_;
  Index panel_rows_;
  detail::KernelEvaluator<Scalar> eval_;
  IndexList all_;
  Matrix<Scalar> K_;
};

extern template class detail::KernelEvaluator<float>;
extern template class detail::KernelEvaluator<double>;
extern template class KernelOperator<float>;
extern template class KernelOperator<double>;

}  // namespace apgp
