#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <optional>
#include <ostream>

#include "nmtune/error.hpp"
#include "nmtune/harness.hpp"
#include "nmtune/io/config.hpp"
#include "nmtune/io/fmat.hpp"
#include "nmtune/io/labels.hpp"
#include "nmtune/io/provider.hpp"
#include "nmtune/io/results.hpp"
#include "nmtune/noise.hpp"
#include "nmtune/sim/simulator.hpp"
#include "nmtune/spectrum.hpp"

namespace nmtune::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::size_t threads = 1;
};

void error_line(std::ostream& err, std::string_view kind, const std::string& message) {
  err << json({{"error", kind}, {"message", message}}).dump() << "\n";
}

Dataset load_dataset(const std::string& features, const std::string& labels) {
  Matrix x = io::read_fmat(features);
  io::LabelFile lf = io::read_labels(labels);
  const std::size_t c = lf.classes();
  Dataset d{std::move(x), std::move(lf.labels), c};
  validate(d);
  return d;
}

std::vector<std::string> read_lines(const std::string& path) {
  const std::string text = io::read_file(path);
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    pos = end + 1;
  }
  return lines;
}

std::string substitute_gamma(std::string pattern, double gamma) {
  const std::string key = "{gamma}";
  for (auto p = pattern.find(key); p != std::string::npos; p = pattern.find(key)) {
    pattern.replace(p, key.size(), io::format_ratio(gamma));
  }
  return pattern;
}

// Shared class count across splits so train and test agree.
void unify_classes(TaskData& t) {
  std::size_t c = t.train.num_classes;
  for (const auto& d : t.tests) c = std::max(c, d.num_classes);
  t.train.num_classes = c;
  for (auto& d : t.tests) d.num_classes = c;
}

// ---- analyze ----
int cmd_analyze(const Globals& g, const std::string& path, std::size_t top_k, bool center,
                std::string dataset_id, std::string model_id, std::ostream& out) {
  const Matrix f = io::read_fmat(path);
  if (dataset_id.empty()) dataset_id = fs::path(path).stem().string();
  const SpectrumReport report = analyze(f, dataset_id, model_id, {top_k, center});
  const std::string text = io::spectrum_to_json(report);
  io::write_file_atomic(fs::path(g.out) / "spectrum.json", text);
  out << text;
  return kOk;
}

// ---- inject-noise ----
int cmd_inject(const Globals& g, const std::string& labels_path, const std::string& noise_path,
               const std::string& kind, std::optional<double> gamma, std::vector<Label> subset,
               std::optional<std::size_t> classes, const std::string& output_name,
               std::ostream& out) {
  NoiseSpec spec;
  if (!noise_path.empty()) spec = io::parse_noise_spec(io::read_file(noise_path));
  if (!kind.empty()) spec.kind = parse_noise_kind(kind);
  if (gamma) spec.ratio = *gamma;
  if (!subset.empty()) spec.subset = std::move(subset);
  if (g.seed) spec.seed = *g.seed;
  spec.validate();

  const std::string original = io::read_file(labels_path);
  io::LabelFile lf = io::parse_labels(original);
  const std::size_t c = classes.value_or(lf.classes());
  const FlipResult res = apply_noise(lf.labels, c, spec);

  const fs::path dest = fs::path(g.out) / output_name;
  if (res.flipped() == 0) {
    io::write_file_atomic(dest, original);  // untouched input stays byte-identical
  } else {
    io::write_labels({res.labels, lf.num_classes}, dest);
  }
  std::string mask;
  for (auto m : res.flip_mask) mask += m ? "1\n" : "0\n";
  io::write_file_atomic(fs::path(g.out) / (output_name + ".mask"), mask);
  out << json({{"kind", to_string(spec.kind)},
               {"ratio", spec.ratio},
               {"seed", spec.seed},
               {"n", res.labels.size()},
               {"flipped", res.flipped()},
               {"output", dest.string()}})
             .dump()
      << "\n";
  return kOk;
}

// ---- simulate ----
int cmd_simulate(const Globals& g, const std::string& config_path, std::ostream& out) {
  io::SimulateConfig cfg =
      config_path.empty() ? io::SimulateConfig{} : io::parse_simulate_config(io::read_file(config_path));
  if (g.seed) cfg.synthetic.seed = *g.seed;
  cfg.synthetic.validate();
  if (cfg.tasks.empty()) {
    sim::DownstreamSpec id;
    id.id = "id";
    cfg.tasks.push_back(id);
  }
  const fs::path root(g.out);
  json summary = json::array();
  io::FilesConfig files;
  for (const auto& t : cfg.tasks) {
    io::FileTask ft;
    ft.id = t.id;
    ft.kind = t.kind;
    const std::string base = (root / t.id / "g{gamma}").string();
    ft.train = {"train", base + "/train.fmat", base + "/train.labels"};
    const std::size_t n_tests = t.kind == sim::TaskKind::kId ? 1 : t.shifts.size();
    for (std::size_t k = 0; k < n_tests; ++k) {
      const std::string name = t.kind == sim::TaskKind::kId ? "test" : "shift" + std::to_string(k);
      ft.tests.push_back({name, base + "/" + name + ".fmat", base + "/" + name + ".labels"});
    }
    files.tasks.push_back(ft);
  }

  for (double gamma : cfg.gamma_list) {
    NoiseSpec noise{cfg.noise, gamma, cfg.subset, derive_seed(cfg.synthetic.seed, "pretrain-noise")};
    const sim::PretrainResult pre =
        sim::pretrain_synthetic(cfg.synthetic, noise, cfg.pretrain, cfg.synthetic.seed);
    summary.push_back({{"gamma", gamma},
                       {"flipped", pre.flipped},
                       {"train_accuracy", pre.train_accuracy},
                       {"clean_val_accuracy", pre.clean_val_accuracy}});
    for (std::size_t ti = 0; ti < cfg.tasks.size(); ++ti) {
      const sim::DownstreamTask task = sim::make_downstream(cfg.synthetic, cfg.tasks[ti], cfg.synthetic.seed);
      const io::FileTask& ft = files.tasks[ti];
      auto emit = [&](const io::FileSplit& split, const Dataset& d) {
        io::write_fmat(sim::extract_features(pre.extractor, d.x), substitute_gamma(split.features, gamma));
        io::write_labels({d.y, d.num_classes}, substitute_gamma(split.labels, gamma));
      };
      emit(ft.train, task.train);
      for (std::size_t k = 0; k < task.tests.size(); ++k) emit(ft.tests[k], task.tests[k]);
    }
  }

  // A ready-to-run sweep over the emitted files.
  io::RunConfig run;
  run.source = io::SourceKind::kFiles;
  run.files = files;
  run.plan.gamma_list = cfg.gamma_list;
  run.plan.eta_list = {0.0};
  run.plan.data_fractions = {1.0};
  for (const auto& t : cfg.tasks) run.plan.tasks.push_back(t.id);
  io::write_file_atomic(root / "files_config.json", io::dump_run_config(run));
  io::write_file_atomic(root / "pretrain.json", summary.dump(2) + "\n");
  out << summary.dump() << "\n";
  return kOk;
}

// ---- tune ----
int cmd_tune(const Globals& g, const std::string& features, const std::string& labels,
             const std::string& test_features, const std::string& test_labels,
             const std::string& mode_name, const std::string& config_path, std::ostream& out) {
  const nn::TuneMode mode = nn::parse_tune_mode(mode_name);
  nn::TrainConfig cfg = config_path.empty()
                            ? nn::TrainConfig::defaults_for(mode)
                            : io::parse_train_config_or(io::read_file(config_path), mode);
  if (cfg.mode != mode) fail(ErrorKind::kConfigError, "--mode disagrees with the config file");
  if (g.seed) cfg.seed = *g.seed;
  if (nn::needs_extractor(mode)) {
    fail(ErrorKind::kInvalidInput, std::string(nn::to_string(mode)) +
                                       " tunes the extractor; feature files only support LP, MLP "
                                       "and NMTUNE_MLP");
  }
  Dataset train = load_dataset(features, labels);
  Dataset test = test_features.empty() ? train : load_dataset(test_features, test_labels);
  const std::size_t c = std::max(train.num_classes, test.num_classes);
  train.num_classes = test.num_classes = c;

  const nn::TrainResult trained = nn::train(train, cfg);
  const nn::Evaluation ev = nn::evaluate(*trained.head, test, fs::path(features).stem().string(),
                                         std::string(nn::to_string(mode)));
  EvalResult r;
  r.cell_id = "tune";
  r.mode = mode;
  r.task_id = fs::path(features).stem().string();
  r.seed = cfg.seed;
  r.cell_seed = cfg.seed;
  r.accuracy = ev.metrics.accuracy;
  r.macro_f1 = ev.metrics.macro_f1;
  r.sve = ev.spectrum.sve;
  r.lsvr = ev.spectrum.lsvr;
  r.train_size = train.size();
  r.variants.push_back({test_features.empty() ? "train" : "test", r.accuracy, r.macro_f1, r.sve, r.lsvr});
  for (const auto& e : trained.trace.epochs) r.loss_trace.push_back(e.total);
  const std::string text = io::result_to_json(r);
  io::write_file_atomic(fs::path(g.out) / "result.json", text);
  io::write_file_atomic(fs::path(g.out) / "head.json", io::head_to_json(*trained.head));
  out << text;
  return kOk;
}

// ---- sweep ----
std::unique_ptr<FeatureSource> make_source(const io::RunConfig& cfg, const fs::path& out_dir) {
  switch (cfg.source) {
    case io::SourceKind::kSimulator:
      return std::make_unique<SimulatorSource>(cfg.simulator);
    case io::SourceKind::kFiles: {
      auto tasks = cfg.files.tasks;
      return std::make_unique<StaticSource>(
          [tasks](double gamma, const std::string& id) {
            const auto it = std::find_if(tasks.begin(), tasks.end(),
                                         [&](const io::FileTask& t) { return t.id == id; });
            if (it == tasks.end()) fail(ErrorKind::kMissingArtifact, "no file task '" + id + "'");
            auto load = [&](const io::FileSplit& s) {
              const std::string f = substitute_gamma(s.features, gamma);
              const std::string l = substitute_gamma(s.labels, gamma);
              if (!fs::exists(f)) fail(ErrorKind::kMissingArtifact, "missing feature file " + f);
              if (!fs::exists(l)) fail(ErrorKind::kMissingArtifact, "missing label file " + l);
              return load_dataset(f, l);
            };
            TaskData t;
            t.kind = it->kind;
            t.train = load(it->train);
            for (const auto& s : it->tests) {
              t.tests.push_back(load(s));
              t.test_names.push_back(s.name);
            }
            unify_classes(t);
            return t;
          },
          false);
    }
    case io::SourceKind::kProvider: {
      const io::ProviderConfig pc = cfg.provider;
      const fs::path cache = pc.cache_dir.empty() ? out_dir / "cache" : fs::path(pc.cache_dir);
      return std::make_unique<StaticSource>(
          [pc, cache](double, const std::string& id) {
            const auto it = std::find_if(pc.tasks.begin(), pc.tasks.end(),
                                         [&](const io::ProviderTask& t) { return t.id == id; });
            if (it == pc.tasks.end()) fail(ErrorKind::kMissingArtifact, "no provider task '" + id + "'");
            auto load = [&](const io::ProviderSplit& s) {
              const auto inputs = read_lines(s.inputs);
              io::LabelFile lf = io::read_labels(s.labels);
              const std::size_t c = lf.classes();
              Dataset d{io::fetch_embeddings(pc, inputs, cache), std::move(lf.labels), c};
              validate(d);
              return d;
            };
            TaskData t;
            t.kind = it->kind;
            t.train = load(it->train);
            for (const auto& s : it->tests) {
              t.tests.push_back(load(s));
              t.test_names.push_back(s.name);
            }
            unify_classes(t);
            return t;
          },
          false);
    }
  }
  fail(ErrorKind::kConfigError, "unhandled source");
}

int cmd_sweep(const Globals& g, const std::string& config_path, std::ostream& out) {
  io::RunConfig cfg = io::read_run_config(config_path);
  if (g.seed) cfg.plan.seed = *g.seed;
  const fs::path root(g.out);
  const std::string hash = io::plan_hash(cfg);
  const fs::path dir = root / "results" / hash;
  auto source = make_source(cfg, root);
  const std::vector<EvalResult> results = run_plan(cfg.plan, *source, {g.threads});
  io::write_results(dir, results);
  io::write_file_atomic(dir / "config.json", io::dump_run_config(cfg));
  const auto failed = std::count_if(results.begin(), results.end(), [](const EvalResult& r) { return !r.ok; });
  out << json({{"results", dir.string()},
               {"plan_hash", hash},
               {"cells", results.size()},
               {"failed", failed}})
             .dump()
      << "\n";
  return kOk;
}

// ---- report ----
int cmd_report(const Globals& g, const std::string& results_dir, std::ostream& out) {
  const std::vector<EvalResult> results = io::read_results(results_dir);
  if (results.empty()) fail(ErrorKind::kMissingArtifact, "no results in " + results_dir);
  const std::vector<SummaryRow> rows = aggregate(results);
  const fs::path root(g.out);
  io::write_file_atomic(root / "summary.json", io::summary_to_json(rows));
  io::write_file_atomic(root / "summary.csv", io::summary_to_csv(rows));
  const std::string table = io::summary_to_table(rows);
  io::write_file_atomic(root / "summary.txt", table);
  out << table;
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Noisy-model spectrum analysis, simulation and tuning", "nmtune"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "Override the seed of the command");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads for sweep")->check(CLI::PositiveNumber);

  std::string a_path, a_dataset, a_model;
  std::size_t a_topk = 20;
  bool a_center = false;
  auto* analyze_cmd = app.add_subcommand("analyze", "Spectrum report of an FMAT feature matrix");
  analyze_cmd->add_option("features", a_path, "FMAT file")->required();
  analyze_cmd->add_option("--top-k", a_topk, "Singular values to report");
  analyze_cmd->add_flag("--center", a_center, "Center columns before the SVD");
  analyze_cmd->add_option("--dataset-id", a_dataset);
  analyze_cmd->add_option("--model-id", a_model);

  std::string n_labels, n_config, n_kind, n_output = "labels.txt";
  double n_gamma = 0.0;
  std::vector<Label> n_subset;
  std::size_t n_classes = 0;
  auto* inject_cmd = app.add_subcommand("inject-noise", "Corrupt a label file");
  inject_cmd->add_option("labels", n_labels, "Label file")->required();
  auto* gamma_opt = inject_cmd->add_option("--gamma,--ratio", n_gamma, "Noise ratio in [0, 1]");
  inject_cmd->add_option("--kind", n_kind, "symmetric | asymmetric | pair_swap");
  inject_cmd->add_option("--subset", n_subset, "Asymmetric class subset")->delimiter(',');
  inject_cmd->add_option("--noise-config", n_config, "NoiseSpec JSON file");
  auto* classes_opt = inject_cmd->add_option("--classes", n_classes, "Number of classes");
  inject_cmd->add_option("--output-name", n_output, "File name under --out")->capture_default_str();

  std::string s_config;
  auto* sim_cmd = app.add_subcommand("simulate", "Pre-train toy extractors and emit features");
  sim_cmd->add_option("--config", s_config, "Simulation JSON");

  std::string t_feat, t_labels, t_test_feat, t_test_labels, t_mode = "LP", t_config;
  auto* tune_cmd = app.add_subcommand("tune", "Tune a head on a feature file");
  tune_cmd->add_option("--features", t_feat)->required();
  tune_cmd->add_option("--labels", t_labels)->required();
  tune_cmd->add_option("--test-features", t_test_feat);
  tune_cmd->add_option("--test-labels", t_test_labels);
  tune_cmd->add_option("--mode", t_mode)->capture_default_str();
  tune_cmd->add_option("--config", t_config, "TrainConfig JSON");

  std::string w_config;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run an experiment plan");
  sweep_cmd->add_option("config", w_config, "Run configuration JSON")->required();

  std::string r_dir;
  auto* report_cmd = app.add_subcommand("report", "Summarize a results directory");
  report_cmd->add_option("results", r_dir, "results/<plan-hash> directory")->required();

  std::vector<std::string> rest(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    error_line(err, "UsageError", e.what());
    return kUsage;
  }
  if (*seed_opt) g.seed = seed_value;
  if (t_test_feat.empty() != t_test_labels.empty()) {
    error_line(err, "UsageError", "--test-features and --test-labels go together");
    return kUsage;
  }

  try {
    if (*analyze_cmd) return cmd_analyze(g, a_path, a_topk, a_center, a_dataset, a_model, out);
    if (*inject_cmd) {
      return cmd_inject(g, n_labels, n_config, n_kind,
                        *gamma_opt ? std::optional<double>(n_gamma) : std::nullopt, n_subset,
                        *classes_opt ? std::optional<std::size_t>(n_classes) : std::nullopt,
                        n_output, out);
    }
    if (*sim_cmd) return cmd_simulate(g, s_config, out);
    if (*tune_cmd) return cmd_tune(g, t_feat, t_labels, t_test_feat, t_test_labels, t_mode, t_config, out);
    if (*sweep_cmd) return cmd_sweep(g, w_config, out);
    if (*report_cmd) return cmd_report(g, r_dir, out);
  } catch (const Error& e) {
    error_line(err, to_string(e.kind()), e.what());
    return is_numeric(e.kind()) ? kNumeric : kData;
  } catch (const fs::filesystem_error& e) {
    error_line(err, "IoError", e.what());
    return kData;
  } catch (const std::exception& e) {
    error_line(err, "InternalError", e.what());
    return kData;
  }
  return kUsage;
}

}  // namespace nmtune::cli
