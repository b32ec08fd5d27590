#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Cholesky>

#include "apgp/kernels.hpp"

namespace apgp {

/// Contiguous index range [begin, begin + size).
struct Block {
  Index begin = 0;
  Index size = 0;
};

/// Sequential partition of [0, n) into blocks of `batch_size` points; only
/// the last block may be shorter.
class BlockPartition {
 public:
  BlockPartition(Index n, Index batch_size);

  Index n() const { return n_; }
  Index batch_size() const { return batch_size_; }
  Index num_blocks() const { return static_cast<Index>(blocks_.size()); }
  const Block& block(Index j) const { return blocks_[static_cast<std::size_t>(j)]; }
  const std::vector<Block>& blocks() const { return blocks_; }
  IndexList indices(Index j) const;

 private:
  Index n_;
  Index batch_size_;
  std::vector<Block> blocks_;
};

BlockPartition make_partition(Index n, Index batch_size);

/// Cholesky factors of every principal submatrix K[I, I], I in the partition.
/// Tied to the hyperparameters it was built with through a fingerprint.
template <typename Scalar>
class CholeskyCache {
 public:
  CholeskyCache(const KernelOperator<Scalar>& op, const BlockPartition& partition);

  const BlockPartition& partition() const { return partition_; }
  std::uint64_t spec_fingerprint() const { return fingerprint_; }
  bool matches(const KernelSpec& spec) const { return spec.fingerprint() == fingerprint_; }
  /// Throws StaleCache unless the cache was built for `spec`.
  void require_current(const KernelSpec& spec) const;

  /// Lower-triangular factor of block `j`.
  Matrix<Scalar> factor(Index j) const;
  /// K[I_j, I_j]^{-1} rhs via two triangular solves.
  Matrix<Scalar> solve(Index j, const Matrix<Scalar>& rhs) const;

  /// (1/3) n b^2, the factorization cost.
  double build_flops() const { return build_flops_; }
  Index stored_entries() const;

 private:
  BlockPartition partition_;
  std::uint64_t fingerprint_;
  std::vector<Eigen::LLT<Matrix<Scalar>>> factors_;
  double build_flops_ = 0.0;
};

template <typename Scalar>
CholeskyCache<Scalar> build_cache(const KernelOperator<Scalar>& op,
                                  const BlockPartition& partition) {
  return CholeskyCache<Scalar>(op, partition);
}

/// K[I_j, I_j]^{-1} rhs. Throws StaleCache if `spec` changed since the build.
template <typename Scalar>
Matrix<Scalar> block_solve(const CholeskyCache<Scalar>& cache,
                           const KernelSpec& spec, Index block_index,
                           const Matrix<Scalar>& rhs) {
  cache.require_current(spec);
  return cache.solve(block_index, rhs);
}

/// FLOPs charged for one block solve with `columns` right-hand sides.
inline double block_solve_flops(Index block_size, Index columns) {
  const double b = static_cast<double>(block_size);
  return (b * b + b) * static_cast<double>(columns);
}

extern template class CholeskyCache<float>;
extern template class CholeskyCache<double>;

}  // namespace apgp
