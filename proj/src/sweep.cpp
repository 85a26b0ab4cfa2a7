#include "fairlab/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <thread>

#include "fairlab/error.hpp"
#include "fairlab/format.hpp"
#include "fairlab/metrics.hpp"
#include "fairlab/threshold.hpp"

namespace fairlab {

std::string Regularizer::name() const {
  switch (kind) {
    case RegularizerKind::none:
      return "none";
    case RegularizerKind::weight_decay:
      return "wd=" + format_number(value);
    case RegularizerKind::early_stopping:
      return criterion == StopCriterion::primary_val_loss ? "es(LP)" : "es(LT)";
    case RegularizerKind::flooding:
      return "fl=" + format_number(value);
    case RegularizerKind::batch_size:
      return "bs=" + format_number(value);
  }
  return "none";
}

Regularizer Regularizer::parse(const std::string& label) {
  Regularizer r;
  auto number = [&](std::size_t offset) {
    const auto text = label.substr(offset);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
      throw InvalidArgument("regularizer: malformed value in '" + label + "'");
    }
    return v;
  };
  if (label == "none") return r;
  if (label == "es(LP)" || label == "es(LT)") {
    r.kind = RegularizerKind::early_stopping;
    r.criterion = label == "es(LP)" ? StopCriterion::primary_val_loss : StopCriterion::total_val_loss;
    return r;
  }
  if (label.rfind("wd=", 0) == 0) {
    r.kind = RegularizerKind::weight_decay;
    r.value = number(3);
  } else if (label.rfind("fl=", 0) == 0) {
    r.kind = RegularizerKind::flooding;
    r.value = number(3);
  } else if (label.rfind("bs=", 0) == 0) {
    r.kind = RegularizerKind::batch_size;
    r.value = number(3);
    if (!(r.value >= 1.0) || r.value != std::floor(r.value)) {
      throw InvalidArgument("regularizer: batch size must be a positive integer");
    }
  } else {
    throw InvalidArgument("unknown regularizer '" + label + "'");
  }
  if (!(r.value >= 0.0)) throw InvalidArgument("regularizer: value must be >= 0");
  return r;
}

TrainConfig Regularizer::apply(TrainConfig base) const {
  switch (kind) {
    case RegularizerKind::none:
      break;
    case RegularizerKind::weight_decay:
      base.weight_decay = value;
      break;
    case RegularizerKind::early_stopping:
      base.early_stopping = EarlyStopping{criterion, base.early_stopping ? base.early_stopping->patience : 10};
      break;
    case RegularizerKind::flooding:
      base.flood_level = value;
      break;
    case RegularizerKind::batch_size:
      base.batch_size = static_cast<std::size_t>(value);
      break;
  }
  return base;
}

void SweepConfig::validate() const {
  if (widths.empty() || lambdas.empty() || regularizers.empty() || seeds.empty()) {
    throw InvalidArgument("sweep config: widths, lambdas, regularizers and seeds must be non-empty");
  }
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (widths[i] == 0) throw InvalidArgument("sweep config: widths must be >= 1");
    if (i > 0 && widths[i] <= widths[i - 1]) {
      throw InvalidArgument("sweep config: widths must be strictly increasing");
    }
  }
  for (double l : lambdas) {
    if (!(l >= 0.0)) throw InvalidArgument("sweep config: lambdas must be >= 0");
  }
  for (double t : thr_values) {
    if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("sweep config: thr values must lie in [0, 1]");
  }
  if (!std::is_sorted(thr_values.begin(), thr_values.end())) {
    throw InvalidArgument("sweep config: thr values must be sorted ascending");
  }
  if (grid_resolution < 2) throw InvalidArgument("sweep config: grid resolution must be >= 2");
  data.validate();
  split.validate();
  for (const auto& r : regularizers) {
    TrainConfig c = r.apply(base);
    c.lambda = *std::max_element(lambdas.begin(), lambdas.end());
    c.validate();
  }
}

RunSeeds derive_run_seeds(std::uint64_t master_seed, std::size_t width, double lambda,
                          const std::string& regularizer, std::uint64_t seed) {
  std::uint64_t key = mix_seed(master_seed, width);
  key = mix_seed(key, std::bit_cast<std::uint64_t>(lambda));
  for (unsigned char ch : regularizer) key = mix_seed(key, ch);
  key = mix_seed(key, seed);
  return {mix_seed(key, 1), mix_seed(key, 2)};
}

double RunRecord::metric(const std::string& name) const {
  for (const auto& [k, v] : metrics) {
    if (k == name) return v;
  }
  throw NotFound("run record: no metric '" + name + "'");
}

const Aggregate& CellSummary::metric(const std::string& name) const {
  for (const auto& [k, v] : metrics) {
    if (k == name) return v;
  }
  throw NotFound("cell summary: no metric '" + name + "'");
}

std::vector<const RunRecord*> SweepResult::cell_runs(std::size_t width, double lambda,
                                                     const std::string& regularizer) const {
  std::vector<const RunRecord*> out;
  for (const auto& r : runs) {
    if (r.width == width && r.lambda == lambda && r.regularizer == regularizer) out.push_back(&r);
  }
  return out;
}

const CellSummary& SweepResult::cell(std::size_t width, double lambda,
                                     const std::string& regularizer) const {
  for (const auto& c : cells) {
    if (c.width == width && c.lambda == lambda && c.regularizer == regularizer) return c;
  }
  throw NotFound("sweep result: no such cell");
}

std::string constrained_test_metric(double thr) { return "cte@" + format_number(thr); }
std::string constrained_val_metric(double thr) { return "cve@" + format_number(thr); }
std::string constrained_test_gap_metric(double thr) { return "ctg@" + format_number(thr); }

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

ScoredSplit score_split(const RandomFeatureModel& model, const GroupedDataset& data) {
  const auto out = forward(model, data.features);
  ScoredSplit s;
  s.scores.assign(out.probabilities.data(), out.probabilities.data() + out.probabilities.size());
  s.labels = data.labels;
  s.attrs = data.attrs;
  return s;
}

void add_raw_metrics(RunRecord& rec, const std::string& prefix, const ScoredSplit& s) {
  const auto pred = predict(s.scores, 0.5);
  rec.metrics.emplace_back(prefix + "_err", error_rate(pred, s.labels));
  double gap = kNaN;
  try {
    gap = evaluate(pred, s.labels, s.attrs).fnr_gap;
  } catch (const UndefinedFnr&) {
  }
  rec.metrics.emplace_back(prefix + "_fnr_gap", gap);
}

}  // namespace

RunRecord run_single(const SweepConfig& config, const DatasetSplits& data, std::size_t width,
                     double lambda, const Regularizer& regularizer, std::uint64_t seed) {
  RunRecord rec;
  rec.width = width;
  rec.lambda = lambda;
  rec.regularizer = regularizer.name();
  rec.seed = seed;
  try {
    const auto seeds = derive_run_seeds(config.master_seed, width, lambda, rec.regularizer, seed);
    TrainConfig tc = regularizer.apply(config.base);
    tc.lambda = lambda;
    tc.seed = seeds.sampling;
    auto trained = train(init_model(width, data.train.dim(), seeds.init), data.train, data.val, tc);

    const auto train_scores = score_split(trained.model, data.train);
    const auto val_scores = score_split(trained.model, data.val);
    const auto test_scores = score_split(trained.model, data.test);
    add_raw_metrics(rec, "train", train_scores);
    add_raw_metrics(rec, "val", val_scores);
    add_raw_metrics(rec, "test", test_scores);

    const auto& trace = trained.trace;
    const TracePoint* at_checkpoint = &trace.back();
    for (const auto& p : trace) {
      if (p.step == trained.checkpoint_step) at_checkpoint = &p;
    }
    rec.metrics.emplace_back("train_lp", at_checkpoint->train_lp);
    rec.metrics.emplace_back("train_lm", at_checkpoint->train_lm);
    const double tail_start = 0.75 * static_cast<double>(trace.back().step);
    double tail_sum = 0.0;
    std::size_t tail_n = 0;
    for (const auto& p : trace) {
      if (static_cast<double>(p.step) >= tail_start) {
        tail_sum += p.train_lp;
        ++tail_n;
      }
    }
    rec.metrics.emplace_back("train_lp_tail", tail_n ? tail_sum / static_cast<double>(tail_n) : kNaN);
    rec.metrics.emplace_back("checkpoint_step", static_cast<double>(trained.checkpoint_step));

    for (double thr : config.thr_values) {
      const auto r = constrained_test_error(val_scores, test_scores, thr, config.grid_resolution);
      rec.metrics.emplace_back(constrained_test_metric(thr), r.test_error);
      rec.metrics.emplace_back(constrained_val_metric(thr), r.val_error);
      rec.metrics.emplace_back(constrained_test_gap_metric(thr), r.test_fnr_gap);
    }
    if (config.keep_traces) rec.trace = std::move(trained.trace);
    rec.ok = true;
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.failure = e.what();
    rec.metrics.clear();
  }
  return rec;
}

namespace {

std::size_t resolve_threads(std::size_t requested, std::size_t jobs) {
  std::size_t n = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("FAIRLAB_THREADS")) {
    const std::size_t cap = std::strtoul(env, nullptr, 10);
    if (cap > 0) n = std::min(n, cap);
  }
  return std::clamp<std::size_t>(n, 1, std::max<std::size_t>(jobs, 1));
}

CellSummary summarize(std::size_t width, double lambda, const std::string& reg,
                      const std::vector<const RunRecord*>& runs) {
  CellSummary cell;
  cell.width = width;
  cell.lambda = lambda;
  cell.regularizer = reg;
  const RunRecord* first_ok = nullptr;
  for (const auto* r : runs) {
    if (r->ok) {
      ++cell.n_runs;
      if (!first_ok) first_ok = r;
    } else {
      ++cell.n_failed;
    }
  }
  if (!first_ok) return cell;
  for (std::size_t k = 0; k < first_ok->metrics.size(); ++k) {
    std::vector<double> values;
    for (const auto* r : runs) {
      if (!r->ok) continue;
      const double v = r->metrics[k].second;
      if (std::isfinite(v)) values.push_back(v);
    }
    Aggregate a;
    if (values.empty()) {
      a.mean = kNaN;
      a.ci_half_width = kNaN;
    } else {
      a = aggregate(values);
    }
    cell.metrics.emplace_back(first_ok->metrics[k].first, a);
  }
  return cell;
}

}  // namespace

SweepResult run_sweep(const SweepConfig& config) {
  config.validate();
  const auto data = split(generate_spurious(config.data), config.split);

  struct Job {
    std::size_t width;
    double lambda;
    const Regularizer* reg;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (auto w : config.widths) {
    for (double l : config.lambdas) {
      for (const auto& r : config.regularizers) {
        for (auto s : config.seeds) jobs.push_back({w, l, &r, s});
      }
    }
  }

  SweepResult result;
  result.runs.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const auto& j = jobs[i];
      result.runs[i] = run_single(config, data, j.width, j.lambda, *j.reg, j.seed);
    }
  };
  const auto n_threads = resolve_threads(config.threads, jobs.size());
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  const std::size_t per_cell = config.seeds.size();
  for (std::size_t c = 0; c * per_cell < jobs.size(); ++c) {
    std::vector<const RunRecord*> runs;
    for (std::size_t k = 0; k < per_cell; ++k) runs.push_back(&result.runs[c * per_cell + k]);
    const auto& first = *runs.front();
    auto cell = summarize(first.width, first.lambda, first.regularizer, runs);
    if (cell.n_runs == 0) {
      throw Error("sweep: every run failed in cell width=" + std::to_string(first.width) +
                  " lambda=" + format_number(first.lambda) + " regularizer=" + first.regularizer +
                  " (first failure: " + first.failure + ")");
    }
    result.cells.push_back(std::move(cell));
  }
  return result;
}

void write_results_csv(const SweepResult& result, std::ostream& out) {
  out << "width,lambda,regularizer,metric,mean,ci95,n_runs\n";
  for (const auto& c : result.cells) {
    for (const auto& [name, a] : c.metrics) {
      out << c.width << ',' << format_number(c.lambda) << ',' << c.regularizer << ',' << name << ','
          << format_number(a.mean) << ',' << format_number(a.ci_half_width) << ',' << a.n << '\n';
    }
  }
}

void write_runs_csv(const SweepResult& result, std::ostream& out) {
  out << "width,lambda,regularizer,seed,metric,value\n";
  for (const auto& r : result.runs) {
    if (!r.ok) {
      out << r.width << ',' << format_number(r.lambda) << ',' << r.regularizer << ',' << r.seed
          << ",failed,nan\n";
      continue;
    }
    for (const auto& [name, v] : r.metrics) {
      out << r.width << ',' << format_number(r.lambda) << ',' << r.regularizer << ',' << r.seed
          << ',' << name << ',' << format_number(v) << '\n';
    }
  }
}

SpuriousSpec standard_fixture() {
  SpuriousSpec s;
  s.n_total = 4000;
  s.d_core = 32;
  s.d_spur = 4;
  s.d_noise = 28;
  s.core_mean = 0.25;
  s.spur_mean = 1.5;
  s.noise_sigma = 1.0;
  s.majority_fraction = 0.95;
  s.positive_fraction = 0.25;
  s.seed = 1;
  return s;
}

SplitSpec standard_split() {
  SplitSpec s;
  s.train_fraction = 0.6;
  s.val_fraction = 0.2;
  s.test_fraction = 0.2;
  s.seed = 2;
  s.stratified = true;
  return s;
}

TrainConfig desk_train_config() {
  TrainConfig c = with_total_steps(TrainConfig{}, 6000);
  c.lr_initial = 0.003;
  c.batch_size = 128;
  c.mindiff_batch_size = 16;
  c.eval_every = 250;
  return c;
}

std::vector<std::string> preset_names() {
  return {"double_descent", "mindiff_vs_width", "dynamics_trace",
          "constrained_error", "batch_sizing", "regularizer_compare"};
}

SweepConfig preset(const std::string& name) {
  SweepConfig c;
  c.name = name;
  c.data = standard_fixture();
  c.split = standard_split();
  c.base = desk_train_config();
  c.thr_values = {0.1};
  const std::vector<std::size_t> width_sweep{25, 50, 100, 200, 400, 800, 1600, 3200};
  if (name == "double_descent") {
    c.widths = {50, 100, 200, 400, 600, 800, 1200, 1600, 3200, 6400};
    c.lambdas = {0.0};
  } else if (name == "mindiff_vs_width") {
    c.widths = width_sweep;
    c.lambdas = {0.0, 0.5, 1.0, 1.5};
  } else if (name == "dynamics_trace") {
    c.widths = {100, 3200};
    c.lambdas = {1.5};
    c.base.lr_initial = 0.01;
    c.keep_traces = true;
  } else if (name == "constrained_error") {
    c.widths = {100, 800, 3200};
    c.lambdas = {0.0, 1.5};
    c.thr_values = {0.02, 0.05, 0.1, 0.2};
  } else if (name == "batch_sizing") {
    c.widths = {100, 800, 3200};
    c.lambdas = {1.5};
    c.regularizers = {Regularizer::parse("bs=8"), Regularizer::parse("bs=32"),
                      Regularizer::parse("bs=128")};
  } else if (name == "regularizer_compare") {
    c.widths = {3200};
    c.lambdas = {1.5};
    c.thr_values = {0.02, 0.05, 0.1, 0.2};
    c.regularizers.clear();
    for (const char* label : {"none", "wd=0.001", "wd=0.1", "wd=10", "es(LP)", "es(LT)", "fl=0.05",
                              "fl=0.1"}) {
      c.regularizers.push_back(Regularizer::parse(label));
    }
  } else {
    throw InvalidArgument("unknown preset '" + name + "'");
  }
  return c;
}

}  // namespace fairlab
