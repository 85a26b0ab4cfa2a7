#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "fairlab/dataset.hpp"

namespace fairlab::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("fairlab-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline GroupedDataset small_dataset(std::size_t n, std::size_t d, std::uint64_t seed) {
  SpuriousSpec spec;
  spec.n_total = n;
  spec.d_core = d / 2;
  spec.d_spur = d - d / 2;
  spec.d_noise = 0;
  spec.core_mean = 1.0;
  spec.spur_mean = 0.5;
  spec.majority_fraction = 0.8;
  spec.positive_fraction = 0.5;
  spec.seed = seed;
  spec.exact_quotas = true;
  return generate_spurious(spec);
}

inline double relative_error(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / scale;
}

}  // namespace fairlab::test
