#include "fairlab/cli.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fairlab/chart.hpp"
#include "fairlab/config_io.hpp"
#include "fairlab/error.hpp"
#include "fairlab/format.hpp"
#include "fairlab/model.hpp"
#include "fairlab/sweep.hpp"
#include "fairlab/threshold.hpp"
#include "fairlab/trainer.hpp"

namespace fairlab {

namespace {

namespace fs = std::filesystem;

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::string file_safe(const std::string& s) {
  std::string out;
  for (char c : s) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-';
    out += keep ? c : '_';
  }
  return out;
}

ScoredSplit scored(const RandomFeatureModel& model, const GroupedDataset& data) {
  const auto o = forward(model, data.features);
  ScoredSplit s;
  s.scores.assign(o.probabilities.data(), o.probabilities.data() + o.probabilities.size());
  s.labels = data.labels;
  s.attrs = data.attrs;
  return s;
}

struct GenArgs {
  std::string spec;
  std::size_t rows = 0;
  std::uint64_t seed = 0;
  std::string out;
};

void run_gen_data(const GenArgs& a, const CLI::App& cmd) {
  SpuriousSpec spec = standard_fixture();
  if (!a.spec.empty()) from_json(read_json_file(a.spec), spec);
  if (cmd.count("--rows")) spec.n_total = a.rows;
  if (cmd.count("--seed")) spec.seed = a.seed;
  spec.validate();
  save_csv(generate_spurious(spec), a.out);
  std::cerr << "wrote " << spec.n_total << " rows to " << a.out << '\n';
}

struct TrainArgs {
  std::string data;
  std::string spec;
  std::uint64_t split_seed = 0;
  std::string config;
  std::size_t width = 800;
  std::uint64_t init_seed = 0;
  double lambda = 0.0;
  std::size_t steps = 0;
  double lr = 0.0;
  std::size_t batch_size = 0;
  std::size_t mindiff_batch_size = 0;
  double weight_decay = 0.0;
  double flood = 0.0;
  std::string early_stopping;
  std::size_t patience = 0;
  std::size_t eval_every = 0;
  std::uint64_t seed = 0;
  std::string kernel;
  double bandwidth = 0.0;
  std::string trace;
  std::string model;
  std::string scores;
};

void run_train(const TrainArgs& a, const CLI::App& cmd) {
  DatasetSplits data;
  SplitSpec split_spec = standard_split();
  if (cmd.count("--split-seed")) split_spec.seed = a.split_seed;
  if (!a.data.empty()) {
    data = split(load_csv(a.data), split_spec);
  } else {
    SpuriousSpec spec = standard_fixture();
    if (!a.spec.empty()) from_json(read_json_file(a.spec), spec);
    data = split(generate_spurious(spec), split_spec);
  }

  TrainConfig c = desk_train_config();
  if (!a.config.empty()) from_json(read_json_file(a.config), c);
  if (cmd.count("--steps")) c = with_total_steps(c, a.steps);
  if (cmd.count("--lambda")) c.lambda = a.lambda;
  if (cmd.count("--lr")) c.lr_initial = a.lr;
  if (cmd.count("--batch-size")) c.batch_size = a.batch_size;
  if (cmd.count("--mindiff-batch-size")) c.mindiff_batch_size = a.mindiff_batch_size;
  if (cmd.count("--weight-decay")) c.weight_decay = a.weight_decay;
  if (cmd.count("--flood")) c.flood_level = a.flood;
  if (cmd.count("--early-stopping")) {
    EarlyStopping rule;
    rule.criterion = a.early_stopping == "LP" ? StopCriterion::primary_val_loss
                                              : StopCriterion::total_val_loss;
    c.early_stopping = rule;
  }
  if (cmd.count("--patience")) {
    if (!c.early_stopping) throw InvalidArgument("--patience requires --early-stopping");
    c.early_stopping->patience = a.patience;
  }
  if (cmd.count("--eval-every")) c.eval_every = a.eval_every;
  if (cmd.count("--seed")) c.seed = a.seed;
  if (cmd.count("--kernel")) c.kernel.family = kernel_family_from_string(a.kernel);
  if (cmd.count("--bandwidth")) c.kernel.bandwidth = a.bandwidth;
  c.eval_every = std::min(c.eval_every, c.total_steps);

  const auto trained = train(init_model(a.width, data.train.dim(), a.init_seed), data.train,
                             data.val, c);
  save_trace_csv(trained.trace, a.trace);
  if (!a.model.empty()) save_model(trained.model, a.model);
  if (!a.scores.empty()) {
    save_scores_csv({scored(trained.model, data.val), scored(trained.model, data.test)}, a.scores);
  }

  const auto& last = trained.trace.back();
  std::cout << "steps " << last.step << " checkpoint " << trained.checkpoint_step;
  if (trained.stopped_early_at) std::cout << " stopped_early_at " << *trained.stopped_early_at;
  std::cout << " train_lp " << format_number(last.train_lp) << " val_err "
            << format_number(last.val_err) << " val_fnr_gap " << format_number(last.val_fnr_gap)
            << '\n';
}

struct SweepArgs {
  std::string preset;
  std::string config;
  std::string out;
  std::string runs;
  std::string trace_dir;
  std::string save_config;
  std::size_t seeds = 0;
  std::size_t steps = 0;
  std::size_t threads = 0;
  std::vector<std::size_t> widths;
  std::vector<double> lambdas;
  std::vector<std::string> regularizers;
  std::vector<double> thr;
  std::uint64_t master_seed = 0;
};

void run_sweep_cmd(const SweepArgs& a, const CLI::App& cmd) {
  SweepConfig c;
  if (!a.preset.empty()) {
    c = preset(a.preset);
  } else {
    c.data = standard_fixture();
    c.split = standard_split();
    c.base = desk_train_config();
    from_json(read_json_file(a.config), c);
  }
  if (cmd.count("--seeds")) {
    c.seeds.clear();
    for (std::size_t s = 0; s < a.seeds; ++s) c.seeds.push_back(s);
  }
  if (cmd.count("--steps")) c.base = with_total_steps(c.base, a.steps);
  c.base.eval_every = std::min(c.base.eval_every, c.base.total_steps);
  if (cmd.count("--threads")) c.threads = a.threads;
  if (cmd.count("--widths")) c.widths = a.widths;
  if (cmd.count("--lambdas")) c.lambdas = a.lambdas;
  if (cmd.count("--regularizers")) {
    c.regularizers.clear();
    for (const auto& r : a.regularizers) c.regularizers.push_back(Regularizer::parse(r));
  }
  if (cmd.count("--thr")) c.thr_values = a.thr;
  if (cmd.count("--master-seed")) c.master_seed = a.master_seed;
  if (!a.trace_dir.empty()) c.keep_traces = true;
  c.validate();
  if (!a.save_config.empty()) save_config(c, a.save_config);

  const auto result = run_sweep(c);
  {
    auto out = open_out(a.out);
    write_results_csv(result, out);
  }
  if (!a.runs.empty()) {
    auto out = open_out(a.runs);
    write_runs_csv(result, out);
  }
  if (!a.trace_dir.empty()) {
    fs::create_directories(a.trace_dir);
    for (const auto& r : result.runs) {
      if (!r.ok) continue;
      const std::string name = "trace_w" + std::to_string(r.width) + "_lambda" +
                               file_safe(format_number(r.lambda)) + "_" + file_safe(r.regularizer) +
                               "_seed" + std::to_string(r.seed) + ".csv";
      save_trace_csv(r.trace, fs::path(a.trace_dir) / name);
    }
  }
  std::size_t failed = 0;
  for (const auto& r : result.runs) {
    if (!r.ok) {
      ++failed;
      std::cerr << "run failed: width " << r.width << " lambda " << format_number(r.lambda) << ' '
                << r.regularizer << " seed " << r.seed << ": " << r.failure << '\n';
    }
  }
  std::cerr << "sweep '" << c.name << "': " << result.runs.size() << " runs, " << failed
            << " failed, " << result.cells.size() << " cells written to " << a.out << '\n';
}

struct ThresholdArgs {
  std::string scores;
  double thr = 0.1;
  std::vector<double> thr_list;
  std::size_t grid = 201;
  std::string out;
};

void run_threshold(const ThresholdArgs& a, const CLI::App& cmd) {
  const auto scores = load_scores_csv(a.scores);
  std::vector<double> thr = cmd.count("--thr-list") ? a.thr_list : std::vector<double>{a.thr};
  std::sort(thr.begin(), thr.end());
  thr.erase(std::unique(thr.begin(), thr.end()), thr.end());
  const auto front = pareto_front(scores.val, scores.test, thr, a.grid);
  if (a.out.empty()) {
    write_pareto_csv(front, std::cout);
  } else {
    auto out = open_out(a.out);
    write_pareto_csv(front, out);
  }
}

struct ReportArgs {
  std::string input;
  std::string out;
  std::string metric = "test_err";
  std::vector<std::string> columns{"train_lp", "train_fnr_gap", "val_fnr_gap"};
  std::string title;
};

void run_report(const ReportArgs& a) {
  std::ifstream in(a.input, std::ios::binary);
  if (!in) throw Error("cannot open " + a.input);
  std::string header;
  std::getline(in, header);
  const CsvKind kind = classify_csv_header(header);
  in.clear();
  in.seekg(0);
  ChartSpec spec;
  switch (kind) {
    case CsvKind::results: spec = results_chart(in, a.metric); break;
    case CsvKind::trace: spec = trace_chart(in, a.columns); break;
    case CsvKind::pareto: spec = pareto_chart(in); break;
    case CsvKind::unknown: throw InvalidArgument(a.input + ": unrecognized CSV header");
  }
  if (!a.title.empty()) spec.title = a.title;
  spec.output = a.out;
  save_chart(spec);
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"MinDiff fairness training laboratory", "fairlab"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic spurious-correlation dataset");
  gen_cmd->add_option("--spec", gen.spec, "SpuriousSpec JSON (default: standard fixture)")
      ->check(CLI::ExistingFile);
  gen_cmd->add_option("--rows", gen.rows, "Override n_total")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen.seed, "Override the generator seed");
  gen_cmd->add_option("--out", gen.out, "Output dataset CSV")->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train one model and write its trace");
  auto* data_opt = train_cmd->add_option("--data", tr.data, "Dataset CSV (f0..f{d-1},y,a)")
                       ->check(CLI::ExistingFile);
  train_cmd->add_option("--spec", tr.spec, "SpuriousSpec JSON to generate data from")
      ->check(CLI::ExistingFile)
      ->excludes(data_opt);
  train_cmd->add_option("--split-seed", tr.split_seed, "Seed of the stratified 60/20/20 split");
  train_cmd->add_option("--config", tr.config, "TrainConfig JSON")->check(CLI::ExistingFile);
  train_cmd->add_option("--width", tr.width, "Random-feature width m")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--init-seed", tr.init_seed, "Seed of the projection U")->capture_default_str();
  train_cmd->add_option("--lambda", tr.lambda, "MinDiff weight")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--steps", tr.steps, "Total steps (decay every ceil(steps/3))")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", tr.lr, "Initial learning rate")->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch-size", tr.batch_size, "Primary batch size")->check(CLI::PositiveNumber);
  train_cmd->add_option("--mindiff-batch-size", tr.mindiff_batch_size, "MinDiff rows per subgroup")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--weight-decay", tr.weight_decay, "L2 strength")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--flood", tr.flood, "Flood level b")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--early-stopping", tr.early_stopping, "Stop on validation LP or LT")
      ->check(CLI::IsMember({"LP", "LT"}));
  train_cmd->add_option("--patience", tr.patience, "Early-stopping patience in evaluations")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--eval-every", tr.eval_every, "Evaluation cadence")->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", tr.seed, "Batch-sampling seed");
  train_cmd->add_option("--kernel", tr.kernel, "MMD kernel")->check(CLI::IsMember({"gaussian", "laplace"}));
  train_cmd->add_option("--bandwidth", tr.bandwidth, "MMD kernel bandwidth")->check(CLI::PositiveNumber);
  train_cmd->add_option("--trace", tr.trace, "Output trace CSV")->required();
  train_cmd->add_option("--model", tr.model, "Output model JSON");
  train_cmd->add_option("--scores", tr.scores, "Output validation/test scores CSV");

  SweepArgs sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a width x lambda x regularizer x seed sweep");
  auto* preset_opt = sweep_cmd->add_option("--preset", sw.preset, "Named preset")
                         ->check(CLI::IsMember(preset_names()));
  auto* config_opt = sweep_cmd->add_option("--config", sw.config, "SweepConfig JSON")
                         ->check(CLI::ExistingFile)
                         ->excludes(preset_opt);
  preset_opt->excludes(config_opt);
  sweep_cmd->add_option("--out", sw.out, "Output results CSV")->required();
  sweep_cmd->add_option("--runs", sw.runs, "Output per-run CSV");
  sweep_cmd->add_option("--trace-dir", sw.trace_dir, "Directory for per-run trace CSVs");
  sweep_cmd->add_option("--save-config", sw.save_config, "Write the effective SweepConfig JSON");
  sweep_cmd->add_option("--seeds", sw.seeds, "Use seeds 0..N-1")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--steps", sw.steps, "Override total steps")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--threads", sw.threads, "Worker threads (0 = all cores)");
  sweep_cmd->add_option("--widths", sw.widths, "Override widths")->delimiter(',');
  sweep_cmd->add_option("--lambdas", sw.lambdas, "Override lambdas")->delimiter(',');
  sweep_cmd->add_option("--regularizers", sw.regularizers,
                        "Override regularizers (none, wd=S, es(LP), es(LT), fl=B, bs=N)")
      ->delimiter(',');
  sweep_cmd->add_option("--thr", sw.thr, "Constraint values for constrained error")->delimiter(',');
  sweep_cmd->add_option("--master-seed", sw.master_seed, "Master seed");

  ThresholdArgs th;
  auto* thr_cmd = app.add_subcommand("threshold", "Per-group threshold correction on a scores CSV");
  thr_cmd->add_option("--scores", th.scores, "Scores CSV (split,score,y,a)")
      ->required()
      ->check(CLI::ExistingFile);
  auto* thr_opt = thr_cmd->add_option("--thr", th.thr, "FNR-gap bound")
                      ->capture_default_str()
                      ->check(CLI::Range(0.0, 1.0));
  thr_cmd->add_option("--thr-list", th.thr_list, "Several bounds (Pareto front)")
      ->delimiter(',')
      ->check(CLI::Range(0.0, 1.0))
      ->excludes(thr_opt);
  thr_cmd->add_option("--grid", th.grid, "Grid points per group threshold")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{2}, std::size_t{100001}));
  thr_cmd->add_option("--out", th.out, "Output Pareto CSV (default: stdout)");

  ReportArgs rp;
  auto* report_cmd = app.add_subcommand("report", "Render a results, trace or Pareto CSV to SVG");
  report_cmd->add_option("--input", rp.input, "Input CSV")->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--out", rp.out, "Output SVG")->required();
  report_cmd->add_option("--metric", rp.metric, "Metric for results CSVs")->capture_default_str();
  report_cmd->add_option("--columns", rp.columns, "Columns for trace CSVs")->delimiter(',');
  report_cmd->add_option("--title", rp.title, "Chart title");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*gen_cmd) run_gen_data(gen, *gen_cmd);
    if (*train_cmd) run_train(tr, *train_cmd);
    if (*sweep_cmd) {
      if (sw.preset.empty() && sw.config.empty()) {
        std::cerr << "sweep: one of --preset or --config is required\n";
        return 1;
      }
      run_sweep_cmd(sw, *sweep_cmd);
    }
    if (*thr_cmd) run_threshold(th, *thr_cmd);
    if (*report_cmd) run_report(rp);
  } catch (const std::exception& e) {
    std::cerr << "fairlab: error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace fairlab
