#include "apgp/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include <Eigen/Cholesky>

namespace apgp {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_field(std::string_view field, std::size_t line_no, std::size_t col) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (field.empty() || ec != std::errc() || ptr != last)
    throw InvalidInput("line " + std::to_string(line_no) + ", column " +
                       std::to_string(col + 1) + ": cannot parse '" +
                       std::string(field) + "' as a number");
  if (!std::isfinite(value))
    throw InvalidInput("line " + std::to_string(line_no) + ", column " +
                       std::to_string(col + 1) + ": non-finite value");
  return value;
}

PointMatrix<double> gather_rows(const PointMatrix<double>& X, const IndexList& idx) {
  PointMatrix<double> out(static_cast<Index>(idx.size()), X.cols());
  for (std::size_t a = 0; a < idx.size(); ++a) out.row(static_cast<Index>(a)) = X.row(idx[a]);
  return out;
}

Eigen::VectorXd gather(const Eigen::VectorXd& v, const IndexList& idx) {
  Eigen::VectorXd out(static_cast<Index>(idx.size()));
  for (std::size_t a = 0; a < idx.size(); ++a) out[static_cast<Index>(a)] = v[idx[a]];
  return out;
}

}  // namespace

RawData read_csv(std::istream& in) {
  RawData data;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  std::vector<double> values;

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (width == 0) {
      if (fields.size() < 2)
        throw InvalidInput("line " + std::to_string(line_no) +
                           ": header needs at least one feature and a target");
      width = fields.size();
      for (std::size_t c = 0; c + 1 < width; ++c) data.feature_names.emplace_back(fields[c]);
      data.target_name = std::string(fields.back());
      continue;
    }
    if (fields.size() != width)
      throw InvalidInput("line " + std::to_string(line_no) + ": expected " +
                         std::to_string(width) + " fields, found " +
                         std::to_string(fields.size()));
    for (std::size_t c = 0; c < width; ++c) values.push_back(parse_field(fields[c], line_no, c));
  }
  if (width == 0) throw InvalidInput("CSV input is empty");
  const auto rows = static_cast<Index>(values.size() / width);
  if (rows == 0) throw InvalidInput("CSV input has a header but no rows");

  const auto d = static_cast<Index>(width - 1);
  data.X.resize(rows, d);
  data.y.resize(rows);
  for (Index i = 0; i < rows; ++i) {
    const double* row = values.data() + static_cast<std::size_t>(i) * width;
    for (Index k = 0; k < d; ++k) data.X(i, k) = row[k];
    data.y[i] = row[d];
  }
  return data;
}

RawData read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open dataset '" + path.string() + "'");
  return read_csv(in);
}

void write_csv(std::ostream& out, const RawData& data) {
  for (Index k = 0; k < data.X.cols(); ++k) {
    if (static_cast<std::size_t>(k) < data.feature_names.size())
      out << data.feature_names[static_cast<std::size_t>(k)] << ',';
    else
      out << 'x' << k << ',';
  }
  out << data.target_name << '\n';
  char buf[32];
  for (Index i = 0; i < data.X.rows(); ++i) {
    for (Index k = 0; k < data.X.cols(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g,", data.X(i, k));
      out << buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g\n", data.y[i]);
    out << buf;
  }
}

PointMatrix<double> Dataset::train_X() const { return gather_rows(X, train); }
Eigen::VectorXd Dataset::train_y() const { return gather(y, train); }
PointMatrix<double> Dataset::test_X() const { return gather_rows(X, test); }
Eigen::VectorXd Dataset::test_y() const { return gather(y, test); }

Dataset make_dataset(const RawData& raw, double split_ratio, std::uint64_t seed,
                     bool standardize_features) {
  const Index n = raw.X.rows();
  if (n == 0) throw InvalidInput("dataset is empty");
  if (raw.y.size() != n) throw InvalidInput("label count does not match rows");
  if (!(split_ratio > 0.0 && split_ratio <= 1.0))
    throw InvalidInput("split ratio must be in (0, 1]");

  IndexList order = iota_indices(0, n);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const Index n_train = std::clamp<Index>(
      static_cast<Index>(std::llround(split_ratio * static_cast<double>(n))), 1, n);

  Dataset ds;
  ds.train.assign(order.begin(), order.begin() + n_train);
  ds.test.assign(order.begin() + n_train, order.end());

  const Eigen::VectorXd y_train = gather(raw.y, ds.train);
  ds.label_mean = y_train.mean();
  const double var = (y_train.array() - ds.label_mean).square().mean();
  ds.label_std = var > 0.0 ? std::sqrt(var) : 1.0;
  ds.y = (raw.y.array() - ds.label_mean) / ds.label_std;

  const Index d = raw.X.cols();
  ds.feature_mean = Eigen::VectorXd::Zero(d);
  ds.feature_std = Eigen::VectorXd::Ones(d);
  ds.X = raw.X;
  if (standardize_features) {
    const PointMatrix<double> X_train = gather_rows(raw.X, ds.train);
    for (Index k = 0; k < d; ++k) {
      const double mu = X_train.col(k).mean();
      const double v = (X_train.col(k).array() - mu).square().mean();
      ds.feature_mean[k] = mu;
      ds.feature_std[k] = v > 0.0 ? std::sqrt(v) : 1.0;
      ds.X.col(k) = (raw.X.col(k).array() - mu) / ds.feature_std[k];
    }
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path, double split_ratio,
                     std::uint64_t seed, bool standardize_features) {
  return make_dataset(read_csv(path), split_ratio, seed, standardize_features);
}

Eigen::VectorXd sample_gp_prior(const PointMatrix<double>& X,
                                const KernelSpec& spec, std::uint64_t seed,
                                Index exact_limit, Index num_features) {
  spec.validate();
  const Index n = X.rows();
  const Index d = X.cols();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;

  if (n <= exact_limit) {
    const IndexList all = iota_indices(0, n);
    Eigen::MatrixXd K = kernel_block<double>(spec, X, all, all);
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    // Noise-free draws on near-duplicate points need a little jitter.
    double jitter = 1e-10 * std::max(spec.outputscale, 1.0);
    while (llt.info() != Eigen::Success) {
      if (jitter > 1e-2 * std::max(spec.outputscale, 1.0))
        throw NotPositiveDefinite("cannot factor the prior covariance for sampling");
      K.diagonal().array() += jitter;
      llt.compute(K);
      jitter *= 10.0;
    }
    Eigen::VectorXd eps(n);
    for (Index i = 0; i < n; ++i) eps[i] = normal(rng);
    return (llt.matrixL() * eps).array() + spec.mean_constant;
  }

  // Random Fourier features: frequencies from the kernel's spectral density
  // (Gaussian for RBF, multivariate t with 2 nu dof for Matern nu).
  const double nu = spec.family == KernelFamily::Matern52   ? 2.5
                    : spec.family == KernelFamily::Matern32 ? 1.5
                                                            : 0.0;
  std::chi_squared_distribution<double> chi2(nu > 0.0 ? 2.0 * nu : 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  Eigen::MatrixXd omega(d, num_features);
  Eigen::VectorXd offset(num_features);
  for (Index f = 0; f < num_features; ++f) {
    const double scale = nu > 0.0 ? std::sqrt(2.0 * nu / chi2(rng)) : 1.0;
    for (Index k = 0; k < d; ++k) omega(k, f) = normal(rng) * scale / spec.lengthscales[k];
    offset[f] = phase(rng);
  }
  Eigen::VectorXd weights(num_features);
  for (Index f = 0; f < num_features; ++f) weights[f] = normal(rng);
  const double amp = std::sqrt(2.0 * spec.outputscale / static_cast<double>(num_features));
  const double noise_sd = std::sqrt(spec.noise_variance);
  Eigen::VectorXd y(n);
  for (Index i = 0; i < n; ++i) {
    const Eigen::RowVectorXd proj = X.row(i) * omega + offset.transpose();
    y[i] = spec.mean_constant + amp * proj.array().cos().matrix().dot(weights) +
           noise_sd * normal(rng);
  }
  return y;
}

RawData synth_raw(Index n, Index d, const KernelSpec& spec, std::uint64_t seed) {
  if (n <= 0 || d <= 0) throw InvalidInput("synthetic dataset needs n > 0 and d > 0");
  if (spec.dim() != d) throw InvalidInput("kernel dimension does not match d");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  RawData raw;
  raw.X.resize(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < d; ++k) raw.X(i, k) = unif(rng);
  raw.y = sample_gp_prior(raw.X, spec, seed ^ 0x5851f42d4c957f2dull);
  for (Index k = 0; k < d; ++k) raw.feature_names.push_back("x" + std::to_string(k));
  return raw;
}

Dataset synth_dataset(Index n, Index d, const KernelSpec& spec,
                      std::uint64_t seed, double split_ratio,
                      bool standardize_features) {
  return make_dataset(synth_raw(n, d, spec, seed), split_ratio, seed, standardize_features);
}

}  // namespace apgp
