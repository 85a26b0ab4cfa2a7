#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

namespace fairlab {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent seeds from structured keys.
std::uint64_t mix_seed(std::uint64_t x);
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

/// Feature rows with a binary label y and a binary sensitive attribute a.
struct GroupedDataset {
  Matrix features;
  std::vector<std::uint8_t> labels;
  std::vector<std::uint8_t> attrs;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }

  /// Throws InvalidArgument if row counts disagree or labels/attrs are not 0/1.
  void validate() const;

  /// Number of rows with the given (y, a).
  std::size_t count(int y, int a) const;

  /// Rows at `indices`, in that order.
  GroupedDataset subset(std::span<const std::size_t> indices) const;
};

struct SpuriousSpec {
  std::size_t n_total = 4000;
  std::size_t d_core = 8;
  std::size_t d_spur = 8;
  std::size_t d_noise = 48;
  double core_mean = 0.25;
  double spur_mean = 0.5;
  double noise_sigma = 1.0;
  double majority_fraction = 0.95;
  double positive_fraction = 0.25;
  std::uint64_t seed = 0;
  /// Exact per-group quotas (largest remainder) instead of i.i.d. group draws.
  bool exact_quotas = false;

  std::size_t dim() const { return d_core + d_spur + d_noise; }
  void validate() const;
};

struct SplitSpec {
  double train_fraction = 0.6;
  double val_fraction = 0.2;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  bool stratified = true;

  void validate() const;
};

struct DatasetSplits {
  GroupedDataset train;
  GroupedDataset val;
  GroupedDataset test;
};

/// Gaussian two-block generator: core coordinates carry the label, spurious
/// coordinates carry the attribute, which agrees with the label with
/// probability `majority_fraction`.
GroupedDataset generate_spurious(const SpuriousSpec& spec);

/// Row indices assigned to train / val / test. Disjoint, covering 0..N-1.
struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

SplitIndices split_indices(const GroupedDataset& data, const SplitSpec& spec);
DatasetSplits split(const GroupedDataset& data, const SplitSpec& spec);

/// Largest-remainder apportionment of `total` by `weights` (which need not be
/// normalized). Ties go to the lower index.
std::vector<std::size_t> apportion(std::size_t total, std::span<const double> weights);

GroupedDataset load_csv(const std::filesystem::path& path);
GroupedDataset parse_csv(std::istream& in);
void save_csv(const GroupedDataset& data, const std::filesystem::path& path);
void write_csv(const GroupedDataset& data, std::ostream& out);

}  // namespace fairlab
