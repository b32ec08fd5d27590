#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "apgp/kernels.hpp"

namespace apgp {

/// Unprocessed table: features in X, target in y.
struct RawData {
  PointMatrix<double> X;
  Eigen::VectorXd y;
  std::vector<std::string> feature_names;
  std::string target_name = "y";
};

/// Parses CSV: a header row, then one row per point with the target in the
/// last column. Throws InvalidInput naming the line on malformed or
/// non-finite values.
RawData read_csv(std::istream& in);
RawData read_csv(const std::filesystem::path& path);
void write_csv(std::ostream& out, const RawData& data);

/// Standardized dataset with a train/test split. Labels are shifted and
/// scaled by training-split statistics only; features likewise when
/// feature standardization is enabled.
struct Dataset {
  PointMatrix<double> X;  // all points, standardized
  Eigen::VectorXd y;      // all labels, standardized
  IndexList train;
  IndexList test;
  double label_mean = 0.0;
  double label_std = 1.0;
  Eigen::VectorXd feature_mean;
  Eigen::VectorXd feature_std;

  Index dim() const { return X.cols(); }
  PointMatrix<double> train_X() const;
  Eigen::VectorXd train_y() const;
  PointMatrix<double> test_X() const;
  Eigen::VectorXd test_y() const;
};

/// Seeded shuffle, split (round(ratio * n) training points, at least one),
/// then standardization from the training split.
Dataset make_dataset(const RawData& raw, double split_ratio, std::uint64_t seed,
                     bool standardize_features = true);

Dataset load_dataset(const std::filesystem::path& path, double split_ratio,
                     std::uint64_t seed, bool standardize_features = true);

/// One draw of f(X) + noise from the GP prior with `spec`. Exact (dense
/// Cholesky) up to `exact_limit` points; beyond that a random Fourier
/// feature approximation with `num_features` features is used.
Eigen::VectorXd sample_gp_prior(const PointMatrix<double>& X,
                                const KernelSpec& spec, std::uint64_t seed,
                                Index exact_limit = 5000,
                                Index num_features = 2048);

/// n points uniform on [0, 1]^d with labels drawn from the GP prior.
RawData synth_raw(Index n, Index d, const KernelSpec& spec, std::uint64_t seed);

Dataset synth_dataset(Index n, Index d, const KernelSpec& spec,
                      std::uint64_t seed, double split_ratio = 0.8,
                      bool standardize_features = true);

}  // namespace apgp
