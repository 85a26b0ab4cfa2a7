#include "fairlab/threshold.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include "fairlab/error.hpp"

namespace fairlab {

namespace {

constexpr double kGapSlack = 1e-12;

void check_positive_groups(const ScoredSplit& split, const char* what) {
  std::array<std::size_t, 2> positives{};
  for (std::size_t i = 0; i < split.labels.size(); ++i) positives[split.attrs[i]] += split.labels[i];
  if (positives[0] == 0 || positives[1] == 0) {
    throw UndefinedFnr(std::string(what) + ": both (y=1, a=0) and (y=1, a=1) must be present");
  }
}

}  // namespace

void ScoredSplit::validate() const {
  if (scores.size() != labels.size() || scores.size() != attrs.size()) {
    throw DimensionMismatch("scores: scores, labels and attrs differ in length");
  }
  if (scores.empty()) throw InvalidArgument("scores: empty split");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!(scores[i] >= 0.0 && scores[i] <= 1.0)) {
      throw InvalidArgument("scores: score " + std::to_string(i) + " outside [0, 1]");
    }
    if (labels[i] > 1 || attrs[i] > 1) throw InvalidArgument("scores: labels and attrs must be 0 or 1");
  }
}

double grid_value(std::size_t k, std::size_t grid_resolution) {
  return static_cast<double>(k) / static_cast<double>(grid_resolution - 1);
}

GroupRuleMetrics apply_thresholds(const ScoredSplit& split, const ThresholdPair& thresholds) {
  split.validate();
  check_positive_groups(split, "apply thresholds");
  std::array<std::size_t, 2> positives{}, false_neg{};
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < split.scores.size(); ++i) {
    const int a = split.attrs[i];
    const double tau = a == 0 ? thresholds.tau_a0 : thresholds.tau_a1;
    const bool pred = split.scores[i] >= tau;
    wrong += (pred != static_cast<bool>(split.labels[i]));
    if (split.labels[i] == 1) {
      ++positives[a];
      false_neg[a] += !pred;
    }
  }
  GroupRuleMetrics m;
  m.error = static_cast<double>(wrong) / static_cast<double>(split.scores.size());
  m.fnr_gap = std::abs(static_cast<double>(false_neg[0]) / static_cast<double>(positives[0]) -
                       static_cast<double>(false_neg[1]) / static_cast<double>(positives[1]));
  return m;
}

ThresholdSelection threshold_correct(const ScoredSplit& val, double thr,
                                     std::size_t grid_resolution) {
  val.validate();
  check_positive_groups(val, "threshold correction");
  if (!(thr >= 0.0 && thr <= 1.0)) throw InvalidArgument("threshold correction: thr must lie in [0, 1]");
  if (grid_resolution < 2) throw InvalidArgument("threshold correction: grid resolution must be >= 2");

  const std::size_t g = grid_resolution;
  // false negatives and false positives per group per grid index
  std::array<std::vector<std::size_t>, 2> fn, fp;
  std::array<std::size_t, 2> positives{};
  for (int a = 0; a < 2; ++a) {
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < val.scores.size(); ++i) {
      if (val.attrs[i] != a) continue;
      (val.labels[i] ? pos : neg).push_back(val.scores[i]);
    }
    std::sort(pos.begin(), pos.end());
    std::sort(neg.begin(), neg.end());
    positives[a] = pos.size();
    fn[a].resize(g);
    fp[a].resize(g);
    for (std::size_t k = 0; k < g; ++k) {
      const double tau = grid_value(k, g);
      fn[a][k] = static_cast<std::size_t>(std::lower_bound(pos.begin(), pos.end(), tau) - pos.begin());
      fp[a][k] = neg.size() - static_cast<std::size_t>(
                                  std::lower_bound(neg.begin(), neg.end(), tau) - neg.begin());
    }
  }

  const double p0 = static_cast<double>(positives[0]);
  const double p1 = static_cast<double>(positives[1]);
  std::size_t best_wrong = std::numeric_limits<std::size_t>::max();
  double best_gap = std::numeric_limits<double>::infinity();
  std::size_t best_k0 = 0, best_k1 = 0;
  bool found = false;
  for (std::size_t k0 = 0; k0 < g; ++k0) {
    const double fnr0 = static_cast<double>(fn[0][k0]) / p0;
    const std::size_t wrong0 = fn[0][k0] + fp[0][k0];
    for (std::size_t k1 = 0; k1 < g; ++k1) {
      const double gap = std::abs(fnr0 - static_cast<double>(fn[1][k1]) / p1);
      if (gap > thr + kGapSlack) continue;
      const std::size_t wrong = wrong0 + fn[1][k1] + fp[1][k1];
      if (!found || wrong < best_wrong || (wrong == best_wrong && gap < best_gap)) {
        found = true;
        best_wrong = wrong;
        best_gap = gap;
        best_k0 = k0;
        best_k1 = k1;
      }
    }
  }
  if (!found) throw Infeasible("threshold correction: no grid pair satisfies the constraint");

  ThresholdSelection sel;
  sel.grid_index_a0 = best_k0;
  sel.grid_index_a1 = best_k1;
  sel.thresholds = {grid_value(best_k0, g), grid_value(best_k1, g)};
  sel.val_error = static_cast<double>(best_wrong) / static_cast<double>(val.scores.size());
  sel.val_fnr_gap = best_gap;
  sel.constraint = thr;
  return sel;
}

ConstrainedResult constrained_test_error(const ScoredSplit& val, const ScoredSplit& test,
                                         double thr, std::size_t grid_resolution) {
  ConstrainedResult r;
  r.constraint = thr;
  try {
    const auto sel = threshold_correct(val, thr, grid_resolution);
    r.thresholds = sel.thresholds;
    r.val_error = sel.val_error;
    r.val_fnr_gap = sel.val_fnr_gap;
  } catch (const Infeasible&) {
    r.feasible = false;
    r.val_error = r.val_fnr_gap = r.test_error = r.test_fnr_gap =
        std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  const auto m = apply_thresholds(test, r.thresholds);
  r.test_error = m.error;
  r.test_fnr_gap = m.fnr_gap;
  return r;
}

std::vector<ConstrainedResult> pareto_front(const ScoredSplit& val, const ScoredSplit& test,
                                            std::span<const double> thr_list,
                                            std::size_t grid_resolution) {
  if (thr_list.empty()) throw InvalidArgument("pareto front: empty constraint list");
  if (!std::is_sorted(thr_list.begin(), thr_list.end())) {
    throw InvalidArgument("pareto front: constraint list must be sorted ascending");
  }
  std::vector<ConstrainedResult> out;
  out.reserve(thr_list.size());
  for (double thr : thr_list) out.push_back(constrained_test_error(val, test, thr, grid_resolution));
  return out;
}

namespace {

void write_number(std::ostream& out, double v) {
  if (std::isnan(v)) {
    out << "nan";
    return;
  }
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out.write(buf.data(), res.ptr - buf.data());
}

}  // namespace

void write_pareto_csv(const std::vector<ConstrainedResult>& front, std::ostream& out) {
  out << "thr,tau_a0,tau_a1,val_err,val_gap,test_err,test_gap,feasible\n";
  for (const auto& r : front) {
    for (double v : {r.constraint, r.thresholds.tau_a0, r.thresholds.tau_a1, r.val_error,
                     r.val_fnr_gap, r.test_error, r.test_fnr_gap}) {
      write_number(out, v);
      out << ',';
    }
    out << (r.feasible ? 1 : 0) << '\n';
  }
}

ScoresFile load_scores_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(0, "empty scores file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "split,score,y,a") throw ParseError(0, "expected header split,score,y,a");
  ScoresFile file;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    std::array<std::string, 4> f;
    std::size_t start = 0, col = 0;
    for (; col < 4; ++col) {
      const auto comma = line.find(',', start);
      f[col] = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (col != 3) throw ParseError(row, "expected 4 fields");
    ScoredSplit* target = nullptr;
    if (f[0] == "val") target = &file.val;
    else if (f[0] == "test") target = &file.test;
    else throw ParseError(row, "split must be 'val' or 'test', got '" + f[0] + "'");
    double score = 0.0;
    const auto [ptr, ec] = std::from_chars(f[1].data(), f[1].data() + f[1].size(), score);
    if (ec != std::errc{} || ptr != f[1].data() + f[1].size() || !(score >= 0.0 && score <= 1.0)) {
      throw ParseError(row, "score must be a number in [0, 1], got '" + f[1] + "'");
    }
    for (int j : {2, 3}) {
      if (f[j] != "0" && f[j] != "1") {
        throw ParseError(row, std::string(j == 2 ? "y" : "a") + " must be 0 or 1, got '" + f[j] + "'");
      }
    }
    target->scores.push_back(score);
    target->labels.push_back(f[2] == "1");
    target->attrs.push_back(f[3] == "1");
  }
  if (file.val.scores.empty()) throw ParseError(0, "scores file has no 'val' rows");
  return file;
}

void save_scores_csv(const ScoresFile& scores, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "split,score,y,a\n";
  for (const auto& [name, split] : {std::pair{"val", &scores.val}, std::pair{"test", &scores.test}}) {
    for (std::size_t i = 0; i < split->scores.size(); ++i) {
      out << name << ',';
      write_number(out, split->scores[i]);
      out << ',' << int(split->labels[i]) << ',' << int(split->attrs[i]) << '\n';
    }
  }
}

}  // namespace fairlab
