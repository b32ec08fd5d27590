#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace apgp {

using Index = Eigen::Index;
using IndexList = std::vector<Index>;
using IndexSpan = std::span<const Index>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Input points, one per row. Row-major so that a point is contiguous.
template <typename Scalar>
using PointMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Precision { F32, F64 };

/// Returns {begin, begin + 1, ..., begin + count - 1}.
IndexList iota_indices(Index begin, Index count);

}  // namespace apgp
