#include "nmtune/io/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <set>

#include <json.hpp>

#include "nmtune/error.hpp"
#include "nmtune/hash.hpp"
#include "nmtune/io/fmat.hpp"

namespace nmtune::io {

using nlohmann::json;

namespace {

// Reads fields of one JSON object and rejects whatever was not read.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) fail(ErrorKind::kConfigError, where_ + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      fail(ErrorKind::kConfigError, where_ + "." + key + ": " + e.what());
    }
  }

  // Nested object or array handled by a callback; absent keys keep defaults.
  template <typename F>
  void with(const char* key, F&& f) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it != j_.end()) f(*it, where_ + "." + key);
  }

  void done() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) fail(ErrorKind::kConfigError, where_ + ": unknown key '" + k + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void require_array(const json& j, const std::string& where) {
  if (!j.is_array()) fail(ErrorKind::kConfigError, where + ": expected an array");
}

template <typename T, typename F>
std::vector<T> array_of(const json& j, const std::string& where, F&& parse) {
  require_array(j, where);
  std::vector<T> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(parse(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

template <typename E, typename P>
void get_enum(Fields& f, const char* key, E& out, P&& parse) {
  std::string name;
  bool present = false;
  f.with(key, [&](const json& j, const std::string& where) {
    if (!j.is_string()) fail(ErrorKind::kConfigError, where + ": expected a string");
    name = j.get<std::string>();
    present = true;
  });
  if (present) out = parse(name);
}

// ---- section readers ----

NmTuneConfig read_nmtune(const json& j, const std::string& where) {
  NmTuneConfig c;
  Fields f(j, where);
  f.get("lambda", c.lambda);
  f.get("w_mse", c.w_mse);
  f.get("w_cov", c.w_cov);
  f.get("w_svd", c.w_svd);
  f.get("batch_min", c.batch_min);
  std::string norm;
  f.with("mse_normalization", [&](const json& v, const std::string& w) {
    if (!v.is_string()) fail(ErrorKind::kConfigError, w + ": expected a string");
    norm = v.get<std::string>();
    if (norm == "per_row") c.mse_normalization = MseNormalization::kPerRow;
    else if (norm == "frobenius") c.mse_normalization = MseNormalization::kFrobenius;
    else fail(ErrorKind::kConfigError, w + ": expected per_row or frobenius");
  });
  f.done();
  return c;
}

nn::TrainConfig read_train(const json& j, const std::string& where,
                           std::optional<nn::TuneMode> fixed_mode) {
  Fields f(j, where);
  nn::TuneMode mode = fixed_mode.value_or(nn::TuneMode::kLinearProbe);
  bool has_mode = fixed_mode.has_value();
  f.with("mode", [&](const json& v, const std::string& w) {
    if (!v.is_string()) fail(ErrorKind::kConfigError, w + ": expected a string");
    const nn::TuneMode m = nn::parse_tune_mode(v.get<std::string>());
    if (fixed_mode && m != *fixed_mode) fail(ErrorKind::kConfigError, w + ": does not match its key");
    mode = m;
    has_mode = true;
  });
  if (!has_mode) fail(ErrorKind::kConfigError, where + ": missing 'mode'");
  nn::TrainConfig c = nn::TrainConfig::defaults_for(mode);
  f.get("epochs", c.epochs);
  f.get("batch_size", c.batch_size);
  f.get("lr", c.lr);
  f.get("weight_decay", c.weight_decay);
  get_enum(f, "schedule", c.schedule, [](const std::string& s) {
    if (s == "cosine") return nn::Schedule::kCosine;
    if (s == "linear") return nn::Schedule::kLinear;
    fail(ErrorKind::kConfigError, "schedule must be cosine or linear");
  });
  f.get("seed", c.seed);
  f.with("nmtune", [&](const json& v, const std::string& w) {
    if (!v.is_null()) c.nmtune = read_nmtune(v, w);
  });
  f.get("hidden_dim", c.hidden_dim);
  get_enum(f, "tap", c.tap, [](const std::string& s) {
    if (s == "post_relu") return nn::FeatureTap::kPostRelu;
    if (s == "pre_relu") return nn::FeatureTap::kPreRelu;
    fail(ErrorKind::kConfigError, "tap must be post_relu or pre_relu");
  });
  f.get("lora_rank_reduction", c.lora_rank_reduction);
  f.get("lora_scaling", c.lora_scaling);
  f.get("beta1", c.beta1);
  f.get("beta2", c.beta2);
  f.get("eps", c.eps);
  f.done();
  c.validate();
  return c;
}

sim::ShiftParams read_shift(const json& j, const std::string& where) {
  sim::ShiftParams s;
  Fields f(j, where);
  f.get("rotation_deg", s.rotation_deg);
  f.get("translation", s.translation);
  f.get("inflation", s.inflation);
  f.done();
  return s;
}

sim::DownstreamSpec read_downstream(const json& j, const std::string& where) {
  sim::DownstreamSpec d;
  Fields f(j, where);
  f.get("id", d.id);
  get_enum(f, "kind", d.kind, [](const std::string& s) { return sim::parse_task_kind(s); });
  get_enum(f, "regime", d.regime, [](const std::string& s) { return sim::parse_task_regime(s); });
  f.get("num_classes", d.num_classes);
  f.get("train_per_class", d.train_per_class);
  f.get("test_per_class", d.test_per_class);
  f.get("style_mean_scale", d.style_mean_scale);
  f.get("components_per_class", d.components_per_class);
  f.with("shifts", [&](const json& v, const std::string& w) {
    d.shifts = array_of<sim::ShiftParams>(v, w, read_shift);
  });
  f.done();
  return d;
}

sim::SyntheticSpec read_synthetic(const json& j, const std::string& where) {
  sim::SyntheticSpec s;
  Fields f(j, where);
  f.get("num_pretrain_classes", s.num_pretrain_classes);
  f.get("input_dim", s.input_dim);
  f.get("samples_per_class", s.samples_per_class);
  f.get("semantic_dim", s.semantic_dim);
  f.get("style_dim", s.style_dim);
  f.get("mean_scale", s.mean_scale);
  f.get("within_scale", s.within_scale);
  f.get("style_scale", s.style_scale);
  f.get("seed", s.seed);
  f.done();
  s.validate();
  return s;
}

sim::PretrainConfig read_pretrain(const json& j, const std::string& where) {
  sim::PretrainConfig p;
  Fields f(j, where);
  f.get("hidden_dim", p.hidden_dim);
  f.get("feature_dim", p.feature_dim);
  f.get("final_relu", p.final_relu);
  f.get("epochs", p.epochs);
  f.get("batch_size", p.batch_size);
  f.get("lr", p.lr);
  f.get("weight_decay", p.weight_decay);
  f.get("val_per_class", p.val_per_class);
  f.done();
  return p;
}

void read_pretrain_noise(const json& j, const std::string& where, NoiseKind& kind,
                         std::vector<Label>& subset) {
  Fields f(j, where);
  get_enum(f, "kind", kind, [](const std::string& s) { return parse_noise_kind(s); });
  f.get("subset", subset);
  f.done();
  if (kind == NoiseKind::kPairSwap) {
    fail(ErrorKind::kConfigError, where + ": pre-training noise must be symmetric or asymmetric");
  }
}

SimulatorSource::Config read_simulator(const json& j, const std::string& where) {
  SimulatorSource::Config c;
  Fields f(j, where);
  f.with("synthetic", [&](const json& v, const std::string& w) { c.synthetic = read_synthetic(v, w); });
  f.with("pretrain", [&](const json& v, const std::string& w) { c.pretrain = read_pretrain(v, w); });
  f.with("pretrain_noise", [&](const json& v, const std::string& w) {
    read_pretrain_noise(v, w, c.pretrain_noise, c.pretrain_subset);
  });
  f.with("tasks", [&](const json& v, const std::string& w) {
    c.tasks = array_of<sim::DownstreamSpec>(v, w, read_downstream);
  });
  f.get("persist_features", c.persist_features);
  f.done();
  return c;
}

FileSplit read_file_split(const json& j, const std::string& where) {
  FileSplit s;
  Fields f(j, where);
  f.get("name", s.name);
  f.get("features", s.features);
  f.get("labels", s.labels);
  f.done();
  if (s.features.empty() || s.labels.empty()) {
    fail(ErrorKind::kConfigError, where + ": features and labels are required");
  }
  return s;
}

FileTask read_file_task(const json& j, const std::string& where) {
  FileTask t;
  Fields f(j, where);
  f.get("id", t.id);
  get_enum(f, "kind", t.kind, [](const std::string& s) { return sim::parse_task_kind(s); });
  f.with("train", [&](const json& v, const std::string& w) { t.train = read_file_split(v, w); });
  f.with("tests", [&](const json& v, const std::string& w) {
    t.tests = array_of<FileSplit>(v, w, read_file_split);
  });
  f.done();
  return t;
}

ProviderSplit read_provider_split(const json& j, const std::string& where) {
  ProviderSplit s;
  Fields f(j, where);
  f.get("name", s.name);
  f.get("inputs", s.inputs);
  f.get("labels", s.labels);
  f.done();
  if (s.inputs.empty() || s.labels.empty()) {
    fail(ErrorKind::kConfigError, where + ": inputs and labels are required");
  }
  return s;
}

ProviderTask read_provider_task(const json& j, const std::string& where) {
  ProviderTask t;
  Fields f(j, where);
  f.get("id", t.id);
  get_enum(f, "kind", t.kind, [](const std::string& s) { return sim::parse_task_kind(s); });
  f.with("train", [&](const json& v, const std::string& w) { t.train = read_provider_split(v, w); });
  f.with("tests", [&](const json& v, const std::string& w) {
    t.tests = array_of<ProviderSplit>(v, w, read_provider_split);
  });
  f.done();
  return t;
}

ProviderConfig read_provider(const json& j, const std::string& where) {
  ProviderConfig p;
  Fields f(j, where);
  f.get("endpoint", p.endpoint);
  f.get("endpoint_env", p.endpoint_env);
  f.get("token_env", p.token_env);
  f.get("batch_size", p.batch_size);
  f.get("parallelism", p.parallelism);
  f.get("timeout_s", p.timeout_s);
  f.with("retry", [&](const json& v, const std::string& w) {
    Fields r(v, w);
    r.get("max_retries", p.retry.max_retries);
    r.get("backoff_ms", p.retry.backoff_ms);
    r.done();
  });
  f.get("cache_dir", p.cache_dir);
  f.with("tasks", [&](const json& v, const std::string& w) {
    p.tasks = array_of<ProviderTask>(v, w, read_provider_task);
  });
  f.done();
  return p;
}

ExperimentPlan read_plan(const json& j, const std::string& where) {
  ExperimentPlan p;
  Fields f(j, where);
  f.get("gamma_list", p.gamma_list);
  f.get("eta_list", p.eta_list);
  f.with("modes", [&](const json& v, const std::string& w) {
    p.modes = array_of<nn::TuneMode>(v, w, [](const json& m, const std::string& mw) {
      if (!m.is_string()) fail(ErrorKind::kConfigError, mw + ": expected a string");
      return nn::parse_tune_mode(m.get<std::string>());
    });
  });
  f.get("seeds", p.seeds);
  f.get("tasks", p.tasks);
  f.get("data_fractions", p.data_fractions);
  f.get("seed", p.seed);
  get_enum(f, "downstream_noise", p.downstream_noise,
           [](const std::string& s) { return parse_noise_kind(s); });
  f.with("train", [&](const json& v, const std::string& w) {
    Fields t(v, w);
    for (const auto& [name, body] : v.items()) {
      const nn::TuneMode mode = nn::parse_tune_mode(name);
      t.with(name.c_str(), [&](const json& b, const std::string& bw) {
        p.train[mode] = read_train(b, bw, mode);
      });
    }
    t.done();
  });
  f.done();
  return p;
}

// ---- writers ----

json to_json(const NmTuneConfig& c) {
  return {{"lambda", c.lambda},
          {"w_mse", c.w_mse},
          {"w_cov", c.w_cov},
          {"w_svd", c.w_svd},
          {"batch_min", c.batch_min},
          {"mse_normalization",
           c.mse_normalization == MseNormalization::kPerRow ? "per_row" : "frobenius"}};
}

json to_json(const nn::TrainConfig& c) {
  json j = {{"mode", nn::to_string(c.mode)},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"lr", c.lr},
            {"weight_decay", c.weight_decay},
            {"schedule", c.schedule == nn::Schedule::kCosine ? "cosine" : "linear"},
            {"seed", c.seed},
            {"hidden_dim", c.hidden_dim},
            {"tap", c.tap == nn::FeatureTap::kPostRelu ? "post_relu" : "pre_relu"},
            {"lora_rank_reduction", c.lora_rank_reduction},
            {"lora_scaling", c.lora_scaling},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"eps", c.eps}};
  const auto nm = c.effective_nmtune();
  j["nmtune"] = nm ? to_json(*nm) : json(nullptr);
  return j;
}

json to_json(const sim::ShiftParams& s) {
  return {{"rotation_deg", s.rotation_deg}, {"translation", s.translation}, {"inflation", s.inflation}};
}

json to_json(const sim::DownstreamSpec& d) {
  json shifts = json::array();
  for (const auto& s : d.shifts) shifts.push_back(to_json(s));
  return {{"id", d.id},
          {"kind", sim::to_string(d.kind)},
          {"regime", sim::to_string(d.regime)},
          {"num_classes", d.num_classes},
          {"train_per_class", d.train_per_class},
          {"test_per_class", d.test_per_class},
          {"style_mean_scale", d.style_mean_scale},
          {"components_per_class", d.components_per_class},
          {"shifts", shifts}};
}

json to_json(const sim::SyntheticSpec& s) {
  return {{"num_pretrain_classes", s.num_pretrain_classes},
          {"input_dim", s.input_dim},
          {"samples_per_class", s.samples_per_class},
          {"semantic_dim", s.semantic_dim},
          {"style_dim", s.style_dim},
          {"mean_scale", s.mean_scale},
          {"within_scale", s.within_scale},
          {"style_scale", s.style_scale},
          {"seed", s.seed}};
}

json to_json(const sim::PretrainConfig& p) {
  return {{"hidden_dim", p.hidden_dim}, {"feature_dim", p.feature_dim},
          {"final_relu", p.final_relu}, {"epochs", p.epochs},
          {"batch_size", p.batch_size}, {"lr", p.lr},
          {"weight_decay", p.weight_decay}, {"val_per_class", p.val_per_class}};
}

json to_json(const FileSplit& s) {
  return {{"name", s.name}, {"features", s.features}, {"labels", s.labels}};
}

json to_json(const ProviderSplit& s) {
  return {{"name", s.name}, {"inputs", s.inputs}, {"labels", s.labels}};
}

template <typename T>
json tasks_json(const std::vector<T>& tasks) {
  json arr = json::array();
  for (const auto& t : tasks) {
    json tests = json::array();
    for (const auto& s : t.tests) tests.push_back(to_json(s));
    arr.push_back({{"id", t.id}, {"kind", sim::to_string(t.kind)}, {"train", to_json(t.train)},
                   {"tests", tests}});
  }
  return arr;
}

json to_json(const RunConfig& c) {
  const ExperimentPlan& p = c.plan;
  json modes = json::array();
  for (auto m : p.modes) modes.push_back(nn::to_string(m));
  json train = json::object();
  for (auto m : p.modes) train[std::string(nn::to_string(m))] = to_json(p.recipe(m));
  json sim_tasks = json::array();
  for (const auto& t : c.simulator.tasks) sim_tasks.push_back(to_json(t));
  return {
      {"source", to_string(c.source)},
      {"plan",
       {{"gamma_list", p.gamma_list},
        {"eta_list", p.eta_list},
        {"modes", modes},
        {"seeds", p.seeds},
        {"tasks", p.tasks},
        {"data_fractions", p.data_fractions},
        {"seed", p.seed},
        {"downstream_noise", to_string(p.downstream_noise)},
        {"train", train}}},
      {"simulator",
       {{"synthetic", to_json(c.simulator.synthetic)},
        {"pretrain", to_json(c.simulator.pretrain)},
        {"pretrain_noise",
         {{"kind", to_string(c.simulator.pretrain_noise)}, {"subset", c.simulator.pretrain_subset}}},
        {"tasks", sim_tasks},
        {"persist_features", c.simulator.persist_features}}},
      {"files", {{"tasks", tasks_json(c.files.tasks)}}},
      {"provider",
       {{"endpoint", c.provider.endpoint},
        {"endpoint_env", c.provider.endpoint_env},
        {"token_env", c.provider.token_env},
        {"batch_size", c.provider.batch_size},
        {"parallelism", c.provider.parallelism},
        {"timeout_s", c.provider.timeout_s},
        {"retry",
         {{"max_retries", c.provider.retry.max_retries}, {"backoff_ms", c.provider.retry.backoff_ms}}},
        {"cache_dir", c.provider.cache_dir},
        {"tasks", tasks_json(c.provider.tasks)}}},
  };
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kConfigError, std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace

std::string_view to_string(SourceKind kind) {
  switch (kind) {
    case SourceKind::kSimulator: return "simulator";
    case SourceKind::kFiles: return "files";
    case SourceKind::kProvider: return "provider";
  }
  return "unknown";
}

SourceKind parse_source_kind(std::string_view name) {
  if (name == "simulator") return SourceKind::kSimulator;
  if (name == "files") return SourceKind::kFiles;
  if (name == "provider") return SourceKind::kProvider;
  fail(ErrorKind::kConfigError, "unknown source '" + std::string(name) + "'");
}

void RunConfig::validate() const {
  plan.validate();
  std::set<std::string> known;
  switch (source) {
    case SourceKind::kSimulator:
      for (const auto& t : simulator.tasks) known.insert(t.id);
      break;
    case SourceKind::kFiles:
      for (const auto& t : files.tasks) known.insert(t.id);
      break;
    case SourceKind::kProvider:
      for (const auto& t : provider.tasks) known.insert(t.id);
      if (provider.batch_size == 0) fail(ErrorKind::kConfigError, "provider.batch_size must be >= 1");
      if (provider.parallelism == 0) fail(ErrorKind::kConfigError, "provider.parallelism must be >= 1");
      break;
  }
  for (const auto& t : plan.tasks) {
    // reserved for the kind-level rows of the summary
    if (t == "ID" || t == "OOD") fail(ErrorKind::kConfigError, "task id '" + t + "' is reserved");
    if (!known.count(t)) {
      fail(ErrorKind::kConfigError, "plan task '" + t + "' is not defined for source " +
                                        std::string(to_string(source)));
    }
  }
}

RunConfig parse_run_config(const std::string& json_text) {
  const json j = parse_json(json_text);
  RunConfig c;
  Fields f(j, "config");
  get_enum(f, "source", c.source, [](const std::string& s) { return parse_source_kind(s); });
  f.with("plan", [&](const json& v, const std::string& w) { c.plan = read_plan(v, w); });
  f.with("simulator", [&](const json& v, const std::string& w) { c.simulator = read_simulator(v, w); });
  f.with("files", [&](const json& v, const std::string& w) {
    Fields ff(v, w);
    ff.with("tasks", [&](const json& t, const std::string& tw) {
      c.files.tasks = array_of<FileTask>(t, tw, read_file_task);
    });
    ff.done();
  });
  f.with("provider", [&](const json& v, const std::string& w) { c.provider = read_provider(v, w); });
  f.done();
  c.validate();
  return c;
}

RunConfig read_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_file(path));
}

std::string dump_run_config(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

std::string plan_hash(const RunConfig& cfg) {
  return sha256_hex(to_json(cfg).dump()).substr(0, 16);
}

NoiseSpec parse_noise_spec(const std::string& json_text) {
  const json j = parse_json(json_text);
  NoiseSpec s;
  Fields f(j, "noise");
  get_enum(f, "kind", s.kind, [](const std::string& k) { return parse_noise_kind(k); });
  f.get("ratio", s.ratio);
  f.get("subset", s.subset);
  f.get("seed", s.seed);
  f.done();
  s.validate();
  return s;
}

nn::TrainConfig parse_train_config(const std::string& json_text) {
  return read_train(parse_json(json_text), "train", std::nullopt);
}

nn::TrainConfig parse_train_config_or(const std::string& json_text, nn::TuneMode fallback_mode) {
  json j = parse_json(json_text);
  if (j.is_object() && !j.contains("mode")) j["mode"] = nn::to_string(fallback_mode);
  return read_train(j, "train", std::nullopt);
}

SimulateConfig parse_simulate_config(const std::string& json_text) {
  const json j = parse_json(json_text);
  SimulateConfig c;
  Fields f(j, "simulate");
  f.with("synthetic", [&](const json& v, const std::string& w) { c.synthetic = read_synthetic(v, w); });
  f.with("pretrain", [&](const json& v, const std::string& w) { c.pretrain = read_pretrain(v, w); });
  f.with("pretrain_noise", [&](const json& v, const std::string& w) {
    read_pretrain_noise(v, w, c.noise, c.subset);
  });
  f.get("gamma_list", c.gamma_list);
  f.with("tasks", [&](const json& v, const std::string& w) {
    c.tasks = array_of<sim::DownstreamSpec>(v, w, read_downstream);
  });
  f.done();
  return c;
}

std::string format_ratio(double v) {
  char buf[32];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

}  // namespace nmtune::io
