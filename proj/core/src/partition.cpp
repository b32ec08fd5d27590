#include "apgp/partition.hpp"

#include <string>

namespace apgp {

BlockPartition::BlockPartition(Index n, Index batch_size)
    : n_(n), batch_size_(batch_size) {
  if (n <= 0) throw InvalidInput("partition size n must be positive");
  if (batch_size <= 0) throw InvalidInput("batch size must be positive");
  if (batch_size > n)
    throw InvalidInput("batch size " + std::to_string(batch_size) +
                       " exceeds n = " + std::to_string(n));
  for (Index begin = 0; begin < n; begin += batch_size)
    blocks_.push_back({begin, std::min(batch_size, n - begin)});
}

IndexList BlockPartition::indices(Index j) const {
  const Block& blk = block(j);
  return iota_indices(blk.begin, blk.size);
}

BlockPartition make_partition(Index n, Index batch_size) {
  return BlockPartition(n, batch_size);
}

template <typename Scalar>
CholeskyCache<Scalar>::CholeskyCache(const KernelOperator<Scalar>& op,
                                     const BlockPartition& partition)
    : partition_(partition), fingerprint_(op.spec().fingerprint()) {
  if (partition.n() != op.size())
    throw InvalidInput("partition covers " + std::to_string(partition.n()) +
                       " points but the kernel has " + std::to_string(op.size()));
  factors_.reserve(static_cast<std::size_t>(partition.num_blocks()));
  for (Index j = 0; j < partition.num_blocks(); ++j) {
    const Block& blk = partition.block(j);
    factors_.emplace_back(op.principal(blk.begin, blk.size));
    if (factors_.back().info() != Eigen::Success)
      throw NotPositiveDefinite(
          "Cholesky factorization of block " + std::to_string(j) +
          " failed; the block is not numerically positive definite "
          "(consider raising the noise floor)");
    const double b = static_cast<double>(blk.size);
    build_flops_ += b * b * b / 3.0;
  }
}

template <typename Scalar>
void CholeskyCache<Scalar>::require_current(const KernelSpec& spec) const {
  if (!matches(spec))
    throw StaleCache(
        "Cholesky cache was built for different hyperparameters; rebuild it");
}

template <typename Scalar>
Matrix<Scalar> CholeskyCache<Scalar>::factor(Index j) const {
  return factors_[static_cast<std::size_t>(j)].matrixL();
}

template <typename Scalar>
Matrix<Scalar> CholeskyCache<Scalar>::solve(Index j,
                                            const Matrix<Scalar>& rhs) const {
  if (j < 0 || j >= partition_.num_blocks())
    throw InvalidInput("block index " + std::to_string(j) + " out of range");
  if (rhs.rows() != partition_.block(j).size)
    throw InvalidInput("block solve: right-hand side has wrong row count");
  return factors_[static_cast<std::size_t>(j)].solve(rhs);
}

template <typename Scalar>
Index CholeskyCache<Scalar>::stored_entries() const {
  Index total = 0;
  for (const Block& blk : partition_.blocks()) total += blk.size * blk.size;
  return total;
}

template class CholeskyCache<float>;
template class CholeskyCache<double>;

}  // namespace apgp
