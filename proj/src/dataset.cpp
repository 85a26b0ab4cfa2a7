#include "fairlab/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fairlab/error.hpp"

namespace fairlab {

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return mix_seed(mix_seed(a) ^ (b + 0x632BE59BD9B4E019ULL));
}

void GroupedDataset::validate() const {
  const auto n = static_cast<std::size_t>(features.rows());
  if (labels.size() != n || attrs.size() != n) {
    throw InvalidArgument("dataset: features, labels and attrs must have the same row count");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] > 1 || attrs[i] > 1) {
      throw InvalidArgument("dataset: labels and attrs must be 0 or 1 (row " +
                            std::to_string(i) + ")");
    }
  }
}

std::size_t GroupedDataset::count(int y, int a) const {
  std::size_t c = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    c += (labels[i] == y && attrs[i] == a);
  }
  return c;
}

GroupedDataset GroupedDataset::subset(std::span<const std::size_t> indices) const {
  GroupedDataset out;
  out.features.resize(static_cast<Eigen::Index>(indices.size()), features.cols());
  out.labels.reserve(indices.size());
  out.attrs.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto i = indices[r];
    if (i >= size()) throw InvalidArgument("dataset: subset index out of range");
    out.features.row(static_cast<Eigen::Index>(r)) = features.row(static_cast<Eigen::Index>(i));
    out.labels.push_back(labels[i]);
    out.attrs.push_back(attrs[i]);
  }
  return out;
}

void SpuriousSpec::validate() const {
  if (dim() < 1) throw InvalidArgument("spurious spec: d_core + d_spur + d_noise must be >= 1");
  if (n_total < 4) throw InvalidArgument("spurious spec: n_total must be >= 4");
  if (!(noise_sigma > 0.0) || !std::isfinite(noise_sigma)) {
    throw InvalidArgument("spurious spec: noise_sigma must be > 0");
  }
  if (!(majority_fraction > 0.5 && majority_fraction <= 1.0)) {
    throw InvalidArgument("spurious spec: majority_fraction must lie in (0.5, 1]");
  }
  if (!(positive_fraction > 0.0 && positive_fraction < 1.0)) {
    throw InvalidArgument("spurious spec: positive_fraction must lie in (0, 1)");
  }
  if (!std::isfinite(core_mean) || !std::isfinite(spur_mean)) {
    throw InvalidArgument("spurious spec: means must be finite");
  }
}

void SplitSpec::validate() const {
  for (double f : {train_fraction, val_fraction, test_fraction}) {
    if (!(f > 0.0 && f < 1.0)) throw InvalidArgument("split spec: each fraction must lie in (0, 1)");
  }
  if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9) {
    throw InvalidArgument("split spec: fractions must sum to 1");
  }
}

std::vector<std::size_t> apportion(std::size_t total, std::span<const double> weights) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<std::size_t> out(weights.size(), 0);
  if (weights.empty() || !(sum > 0.0)) return out;
  std::vector<double> remainder(weights.size());
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    const double quota = static_cast<double>(total) * weights[k] / sum;
    out[k] = static_cast<std::size_t>(std::floor(quota));
    remainder[k] = quota - static_cast<double>(out[k]);
    assigned += out[k];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < total; k = (k + 1) % order.size(), ++assigned) {
    ++out[order[k]];
  }
  return out;
}

namespace {

constexpr std::array<std::pair<int, int>, 4> kGroups{{{0, 0}, {0, 1}, {1, 0}, {1, 1}}};

int group_of(std::uint8_t y, std::uint8_t a) { return 2 * y + a; }

}  // namespace

GroupedDataset generate_spurious(const SpuriousSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  std::bernoulli_distribution positive(spec.positive_fraction);
  std::bernoulli_distribution aligned(spec.majority_fraction);
  std::normal_distribution<double> noise(0.0, spec.noise_sigma);

  const std::size_t n = spec.n_total;
  GroupedDataset data;
  data.labels.resize(n);
  data.attrs.resize(n);

  if (spec.exact_quotas) {
    const double p = spec.positive_fraction;
    const double q = spec.majority_fraction;
    const std::array<double, 4> weights{(1 - p) * q, (1 - p) * (1 - q), p * (1 - q), p * q};
    auto counts = apportion(n, weights);
    // every non-degenerate group gets at least one row
    for (std::size_t g = 0; g < 4; ++g) {
      if (weights[g] > 0.0 && counts[g] == 0) {
        auto largest = std::max_element(counts.begin(), counts.end()) - counts.begin();
        --counts[static_cast<std::size_t>(largest)];
        ++counts[g];
      }
    }
    std::size_t row = 0;
    for (std::size_t g = 0; g < 4; ++g) {
      for (std::size_t c = 0; c < counts[g]; ++c, ++row) {
        data.labels[row] = static_cast<std::uint8_t>(kGroups[g].first);
        data.attrs[row] = static_cast<std::uint8_t>(kGroups[g].second);
      }
    }
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto labels = data.labels;
    auto attrs = data.attrs;
    for (std::size_t i = 0; i < n; ++i) {
      data.labels[i] = labels[perm[i]];
      data.attrs[i] = attrs[perm[i]];
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const bool y = positive(rng);
      const bool a = aligned(rng) ? y : !y;
      data.labels[i] = y;
      data.attrs[i] = a;
    }
  }

  data.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(spec.dim()));
  for (std::size_t i = 0; i < n; ++i) {
    const double core_sign = data.labels[i] ? 1.0 : -1.0;
    const double spur_sign = data.attrs[i] ? 1.0 : -1.0;
    auto row = data.features.row(static_cast<Eigen::Index>(i));
    Eigen::Index c = 0;
    for (std::size_t k = 0; k < spec.d_core; ++k) row(c++) = spec.core_mean * core_sign + noise(rng);
    for (std::size_t k = 0; k < spec.d_spur; ++k) row(c++) = spec.spur_mean * spur_sign + noise(rng);
    for (std::size_t k = 0; k < spec.d_noise; ++k) row(c++) = noise(rng);
  }
  return data;
}

namespace {

// Round the stratum-by-split quota table so that row sums equal stratum sizes
// and column sums equal the global split targets. Each cell is floor(n_g f_s)
// or that plus one.
std::vector<std::array<std::size_t, 3>> controlled_rounding(
    const std::array<std::size_t, 4>& strata, const std::array<double, 3>& fractions,
    const std::vector<std::size_t>& targets) {
  std::vector<std::array<std::size_t, 3>> table(4);
  std::array<std::array<double, 3>, 4> frac{};
  std::array<long, 4> row_left{};
  std::array<long, 3> col_left{};
  for (std::size_t s = 0; s < 3; ++s) col_left[s] = static_cast<long>(targets[s]);
  for (std::size_t g = 0; g < 4; ++g) {
    long placed = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      const double quota = static_cast<double>(strata[g]) * fractions[s];
      table[g][s] = static_cast<std::size_t>(std::floor(quota));
      frac[g][s] = quota - std::floor(quota);
      placed += static_cast<long>(table[g][s]);
      col_left[s] -= static_cast<long>(table[g][s]);
    }
    row_left[g] = static_cast<long>(strata[g]) - placed;
  }

  std::array<std::size_t, 4> rows{0, 1, 2, 3};
  std::stable_sort(rows.begin(), rows.end(),
                   [&](std::size_t a, std::size_t b) { return row_left[a] > row_left[b]; });
  bool ok = true;
  for (std::size_t g : rows) {
    std::array<std::size_t, 3> cols{0, 1, 2};
    std::stable_sort(cols.begin(), cols.end(), [&](std::size_t a, std::size_t b) {
      if (col_left[a] != col_left[b]) return col_left[a] > col_left[b];
      return frac[g][a] > frac[g][b];
    });
    for (long k = 0; k < row_left[g]; ++k) {
      const auto s = cols[static_cast<std::size_t>(k)];
      if (col_left[s] <= 0) ok = false;
      ++table[g][s];
      --col_left[s];
    }
  }
  if (ok) return table;

  // Margins not jointly achievable: fall back to per-stratum largest remainder.
  for (std::size_t g = 0; g < 4; ++g) {
    auto counts = apportion(strata[g], fractions);
    std::copy(counts.begin(), counts.end(), table[g].begin());
  }
  return table;
}

}  // namespace

SplitIndices split_indices(const GroupedDataset& data, const SplitSpec& spec) {
  spec.validate();
  data.validate();
  Rng rng(spec.seed);
  const std::size_t n = data.size();
  const std::array<double, 3> fractions{spec.train_fraction, spec.val_fraction,
                                        spec.test_fraction};
  const auto targets = apportion(n, fractions);

  SplitIndices out;
  std::array<std::vector<std::size_t>*, 3> parts{&out.train, &out.val, &out.test};

  if (!spec.stratified) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::size_t pos = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      parts[s]->assign(perm.begin() + static_cast<long>(pos),
                       perm.begin() + static_cast<long>(pos + targets[s]));
      pos += targets[s];
    }
  } else {
    std::array<std::vector<std::size_t>, 4> members;
    for (std::size_t i = 0; i < n; ++i) members[group_of(data.labels[i], data.attrs[i])].push_back(i);
    std::array<std::size_t, 4> sizes{};
    for (std::size_t g = 0; g < 4; ++g) {
      sizes[g] = members[g].size();
      if (sizes[g] > 0 && sizes[g] < 3) {
        throw InvalidArgument("split: stratum (y=" + std::to_string(kGroups[g].first) +
                              ", a=" + std::to_string(kGroups[g].second) + ") has " +
                              std::to_string(sizes[g]) +
                              " rows; need at least one per split");
      }
    }
    const auto table = controlled_rounding(sizes, fractions, targets);
    for (std::size_t g = 0; g < 4; ++g) {
      std::shuffle(members[g].begin(), members[g].end(), rng);
      std::size_t pos = 0;
      for (std::size_t s = 0; s < 3; ++s) {
        for (std::size_t k = 0; k < table[g][s]; ++k) parts[s]->push_back(members[g][pos++]);
      }
    }
  }
  for (auto* p : parts) std::sort(p->begin(), p->end());
  return out;
}

DatasetSplits split(const GroupedDataset& data, const SplitSpec& spec) {
  const auto idx = split_indices(data, spec);
  return {data.subset(idx.train), data.subset(idx.val), data.subset(idx.test)};
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

}  // namespace

GroupedDataset parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(0, "empty file");
  const auto header = split_fields(trim(line));
  if (header.size() < 3 || trim(header[header.size() - 2]) != "y" || trim(header.back()) != "a") {
    throw ParseError(0, "expected columns f0,...,f{d-1},y,a");
  }
  const std::size_t d = header.size() - 2;
  for (std::size_t j = 0; j < d; ++j) {
    if (trim(header[j]) != "f" + std::to_string(j)) {
      throw ParseError(0, "column " + std::to_string(j) + " must be named f" + std::to_string(j));
    }
  }

  std::vector<double> values;
  GroupedDataset data;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    const auto body = trim(line);
    if (body.empty()) continue;
    ++row;
    const auto fields = split_fields(body);
    if (fields.size() != d + 2) {
      throw ParseError(row, "expected " + std::to_string(d + 2) + " fields, got " +
                                std::to_string(fields.size()));
    }
    for (std::size_t j = 0; j < d; ++j) {
      const auto f = trim(fields[j]);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc{} || ptr != f.data() + f.size() || !std::isfinite(v)) {
        throw ParseError(row, "malformed numeric field f" + std::to_string(j) + " '" +
                                  std::string(f) + "'");
      }
      values.push_back(v);
    }
    for (std::size_t j = d; j < d + 2; ++j) {
      const auto f = trim(fields[j]);
      if (f != "0" && f != "1") {
        throw ParseError(row, std::string(j == d ? "label y" : "attribute a") +
                                  " must be 0 or 1, got '" + std::string(f) + "'");
      }
      (j == d ? data.labels : data.attrs).push_back(f == "1");
    }
  }
  data.features = Eigen::Map<Matrix>(values.data(), static_cast<Eigen::Index>(row),
                                     static_cast<Eigen::Index>(d));
  return data;
}

GroupedDataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return parse_csv(in);
}

void write_csv(const GroupedDataset& data, std::ostream& out) {
  data.validate();
  const auto d = data.dim();
  for (std::size_t j = 0; j < d; ++j) out << 'f' << j << ',';
  out << "y,a\n";
  std::array<char, 32> buf{};
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double v = data.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
      out.write(buf.data(), res.ptr - buf.data());
      out << ',';
    }
    out << int(data.labels[i]) << ',' << int(data.attrs[i]) << '\n';
  }
}

void save_csv(const GroupedDataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_csv(data, out);
}

}  // namespace fairlab
