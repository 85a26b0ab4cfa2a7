#include "fairlab/config_io.hpp"

#include <fstream>
#include <set>
#include <type_traits>

#include "fairlab/error.hpp"

namespace fairlab {

using nlohmann::json;

namespace {

class Fields {
 public:
  Fields(const json& j, std::string what) : j_(j), what_(std::move(what)) {
    if (!j_.is_object()) throw InvalidArgument(what_ + ": expected a JSON object");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      if (!it->is_number_integer() || (!it->is_number_unsigned() && it->template get<long long>() < 0)) {
        throw InvalidArgument(what_ + "." + key + ": expected a non-negative integer");
      }
    }
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      throw InvalidArgument(what_ + "." + key + ": " + e.what());
    }
  }

  const json* raw(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw InvalidArgument(what_ + ": unknown key '" + key + "'");
    }
  }

 private:
  const json& j_;
  std::string what_;
  std::set<std::string> seen_;
};

std::string criterion_name(StopCriterion c) {
  return c == StopCriterion::primary_val_loss ? "primary_val_loss" : "total_val_loss";
}

StopCriterion criterion_from_name(const std::string& name) {
  if (name == "primary_val_loss") return StopCriterion::primary_val_loss;
  if (name == "total_val_loss") return StopCriterion::total_val_loss;
  throw InvalidArgument("unknown early-stopping criterion '" + name + "'");
}

}  // namespace

void to_json(json& j, const SpuriousSpec& s) {
  j = json{{"n_total", s.n_total},
           {"d_core", s.d_core},
           {"d_spur", s.d_spur},
           {"d_noise", s.d_noise},
           {"core_mean", s.core_mean},
           {"spur_mean", s.spur_mean},
           {"noise_sigma", s.noise_sigma},
           {"majority_fraction", s.majority_fraction},
           {"positive_fraction", s.positive_fraction},
           {"seed", s.seed},
           {"exact_quotas", s.exact_quotas}};
}

void from_json(const json& j, SpuriousSpec& s) {
  Fields f(j, "data");
  f.get("n_total", s.n_total);
  f.get("d_core", s.d_core);
  f.get("d_spur", s.d_spur);
  f.get("d_noise", s.d_noise);
  f.get("core_mean", s.core_mean);
  f.get("spur_mean", s.spur_mean);
  f.get("noise_sigma", s.noise_sigma);
  f.get("majority_fraction", s.majority_fraction);
  f.get("positive_fraction", s.positive_fraction);
  f.get("seed", s.seed);
  f.get("exact_quotas", s.exact_quotas);
  f.finish();
}

void to_json(json& j, const SplitSpec& s) {
  j = json{{"train_fraction", s.train_fraction},
           {"val_fraction", s.val_fraction},
           {"test_fraction", s.test_fraction},
           {"seed", s.seed},
           {"stratified", s.stratified}};
}

void from_json(const json& j, SplitSpec& s) {
  Fields f(j, "split");
  f.get("train_fraction", s.train_fraction);
  f.get("val_fraction", s.val_fraction);
  f.get("test_fraction", s.test_fraction);
  f.get("seed", s.seed);
  f.get("stratified", s.stratified);
  f.finish();
}

void to_json(json& j, const KernelSpec& k) {
  j = json{{"family", to_string(k.family)}, {"bandwidth", k.bandwidth}};
}

void from_json(const json& j, KernelSpec& k) {
  Fields f(j, "kernel");
  std::string family = to_string(k.family);
  f.get("family", family);
  k.family = kernel_family_from_string(family);
  f.get("bandwidth", k.bandwidth);
  f.finish();
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"total_steps", c.total_steps},
           {"batch_size", c.batch_size},
           {"mindiff_batch_size", c.mindiff_batch_size},
           {"lambda", c.lambda},
           {"lr_initial", c.lr_initial},
           {"lr_decay_factor", c.lr_decay_factor},
           {"lr_decay_every", c.lr_decay_every},
           {"weight_decay", c.weight_decay},
           {"flood_level", nullptr},
           {"early_stopping", nullptr},
           {"eval_every", c.eval_every},
           {"kernel", c.kernel},
           {"seed", c.seed}};
  if (c.flood_level) j["flood_level"] = *c.flood_level;
  if (c.early_stopping) {
    j["early_stopping"] = json{{"criterion", criterion_name(c.early_stopping->criterion)},
                               {"patience", c.early_stopping->patience}};
  }
}

void from_json(const json& j, TrainConfig& c) {
  Fields f(j, "train");
  f.get("total_steps", c.total_steps);
  f.get("batch_size", c.batch_size);
  f.get("mindiff_batch_size", c.mindiff_batch_size);
  f.get("lambda", c.lambda);
  f.get("lr_initial", c.lr_initial);
  f.get("lr_decay_factor", c.lr_decay_factor);
  f.get("lr_decay_every", c.lr_decay_every);
  f.get("weight_decay", c.weight_decay);
  if (const json* b = f.raw("flood_level")) {
    if (b->is_null()) {
      c.flood_level.reset();
    } else if (b->is_number()) {
      c.flood_level = b->get<double>();
    } else {
      throw InvalidArgument("train.flood_level: expected a number or null");
    }
  }
  if (const json* es = f.raw("early_stopping")) {
    if (es->is_null()) {
      c.early_stopping.reset();
    } else {
      Fields g(*es, "train.early_stopping");
      EarlyStopping rule;
      std::string criterion = criterion_name(rule.criterion);
      g.get("criterion", criterion);
      rule.criterion = criterion_from_name(criterion);
      g.get("patience", rule.patience);
      g.finish();
      c.early_stopping = rule;
    }
  }
  f.get("eval_every", c.eval_every);
  if (const json* k = f.raw("kernel")) from_json(*k, c.kernel);
  f.get("seed", c.seed);
  f.finish();
}

void to_json(json& j, const SweepConfig& c) {
  json regs = json::array();
  for (const auto& r : c.regularizers) regs.push_back(r.name());
  j = json{{"name", c.name},
           {"data", c.data},
           {"split", c.split},
           {"widths", c.widths},
           {"lambdas", c.lambdas},
           {"regularizers", regs},
           {"seeds", c.seeds},
           {"base", c.base},
           {"thr_values", c.thr_values},
           {"grid_resolution", c.grid_resolution},
           {"master_seed", c.master_seed},
           {"threads", c.threads},
           {"keep_traces", c.keep_traces}};
}

void from_json(const json& j, SweepConfig& c) {
  Fields f(j, "sweep");
  f.get("name", c.name);
  if (const json* d = f.raw("data")) from_json(*d, c.data);
  if (const json* s = f.raw("split")) from_json(*s, c.split);
  f.get("widths", c.widths);
  f.get("lambdas", c.lambdas);
  if (const json* regs = f.raw("regularizers")) {
    if (!regs->is_array()) throw InvalidArgument("sweep.regularizers: expected an array of labels");
    c.regularizers.clear();
    for (const auto& r : *regs) {
      if (!r.is_string()) throw InvalidArgument("sweep.regularizers: expected string labels");
      c.regularizers.push_back(Regularizer::parse(r.get<std::string>()));
    }
  }
  f.get("seeds", c.seeds);
  if (const json* b = f.raw("base")) from_json(*b, c.base);
  f.get("thr_values", c.thr_values);
  f.get("grid_resolution", c.grid_resolution);
  f.get("master_seed", c.master_seed);
  f.get("threads", c.threads);
  f.get("keep_traces", c.keep_traces);
  f.finish();
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
}

void write_json_file(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace fairlab
