#include "nmtune/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <thread>

#include "nmtune/error.hpp"
#include "nmtune/hash.hpp"
#include "nmtune/noise.hpp"
#include "nmtune/spectrum.hpp"

namespace nmtune {

namespace {

// Shortest decimal that round-trips; stable across platforms for the values
// a plan contains.
std::string num(double v) {
  char buf[32];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

// MLP/NMTUNE_MLP and LORA/NMTUNE_LORA share a seed family.
std::string_view seed_family(nn::TuneMode mode) {
  switch (mode) {
    case nn::TuneMode::kMlp:
    case nn::TuneMode::kNmTuneMlp: return "MLP";
    case nn::TuneMode::kLora:
    case nn::TuneMode::kNmTuneLora: return "LORA";
    default: return nn::to_string(mode);
  }
}

void require_nonempty(bool empty, const char* what) {
  if (empty) fail(ErrorKind::kConfigError, std::string("plan.") + what + " must be nonempty");
}

Matrix features_of(const nn::TuneHead& head, const Dataset& d) { return head.features(d.x); }

}  // namespace

void ExperimentPlan::validate() const {
  require_nonempty(gamma_list.empty(), "gamma_list");
  require_nonempty(eta_list.empty(), "eta_list");
  require_nonempty(modes.empty(), "modes");
  require_nonempty(seeds.empty(), "seeds");
  require_nonempty(tasks.empty(), "tasks");
  require_nonempty(data_fractions.empty(), "data_fractions");
  for (double g : gamma_list) {
    if (!(g >= 0.0 && g <= 1.0)) fail(ErrorKind::kConfigError, "gamma outside [0, 1]: " + num(g));
  }
  for (double e : eta_list) {
    if (!(e >= 0.0 && e <= 1.0)) fail(ErrorKind::kConfigError, "eta outside [0, 1]: " + num(e));
  }
  for (double f : data_fractions) {
    if (!(f > 0.0 && f <= 1.0)) fail(ErrorKind::kConfigError, "fraction outside (0, 1]: " + num(f));
  }
  for (const auto& [mode, cfg] : train) {
    if (cfg.mode != mode) fail(ErrorKind::kConfigError, "train recipe keyed by the wrong mode");
    cfg.validate();
  }
}

nn::TrainConfig ExperimentPlan::recipe(nn::TuneMode mode) const {
  const auto it = train.find(mode);
  return it != train.end() ? it->second : nn::TrainConfig::defaults_for(mode);
}

std::string Cell::id() const {
  std::string s = "g" + num(gamma) + "_e" + num(eta) + "_" + std::string(nn::to_string(mode)) +
                  "_" + task + "_f" + num(fraction) + "_s" + std::to_string(replicate);
  return s;
}

std::vector<Cell> expand(const ExperimentPlan& plan) {
  plan.validate();
  std::vector<Cell> cells;
  for (double g : plan.gamma_list)
    for (double e : plan.eta_list)
      for (nn::TuneMode m : plan.modes)
        for (const std::string& t : plan.tasks)
          for (double f : plan.data_fractions)
            for (std::uint64_t s : plan.seeds) cells.push_back({g, e, m, t, f, s});
  return cells;
}

std::uint64_t world_seed(std::uint64_t plan_seed, std::uint64_t replicate) {
  return sha256_u64("world:" + std::to_string(plan_seed) + ":" + std::to_string(replicate));
}

std::uint64_t cell_seed(std::uint64_t plan_seed, const Cell& c) {
  return sha256_u64("cell:" + std::to_string(plan_seed) + ":" + std::to_string(c.replicate) + ":" +
                    num(c.gamma) + ":" + num(c.eta) + ":" + std::string(seed_family(c.mode)) + ":" +
                    c.task + ":" + num(c.fraction));
}

SimulatorSource::SimulatorSource(Config cfg) : cfg_(std::move(cfg)) {
  cfg_.synthetic.validate();
  std::set<std::string> ids;
  for (const auto& t : cfg_.tasks) {
    if (!ids.insert(t.id).second) fail(ErrorKind::kConfigError, "duplicate task id '" + t.id + "'");
  }
}

std::shared_ptr<const sim::PretrainResult> SimulatorSource::extractor(double gamma,
                                                                      std::uint64_t world) {
  std::shared_ptr<Slot> slot;
  {
    std::lock_guard lock(mu_);
    auto& s = cache_[{gamma, world}];
    if (!s) s = std::make_shared<Slot>();
    slot = s;
  }
  std::call_once(slot->once, [&] {
    sim::SyntheticSpec spec = cfg_.synthetic;
    spec.seed = world;
    NoiseSpec noise{cfg_.pretrain_noise, gamma, cfg_.pretrain_subset,
                    derive_seed(world, "pretrain-noise")};
    slot->value = std::make_shared<const sim::PretrainResult>(
        sim::pretrain_synthetic(spec, noise, cfg_.pretrain, world));
  });
  return slot->value;
}

std::shared_ptr<const TaskData> SimulatorSource::load(double gamma, const std::string& task,
                                                      std::uint64_t world) {
  const auto it = std::find_if(cfg_.tasks.begin(), cfg_.tasks.end(),
                               [&](const sim::DownstreamSpec& t) { return t.id == task; });
  if (it == cfg_.tasks.end()) fail(ErrorKind::kMissingArtifact, "no simulator task '" + task + "'");
  sim::SyntheticSpec spec = cfg_.synthetic;
  spec.seed = world;
  const sim::DownstreamTask dt = sim::make_downstream(spec, *it, world);
  const auto pre = extractor(gamma, world);

  auto out = std::make_shared<TaskData>();
  out->kind = dt.kind;
  auto featurize = [&](const Dataset& d) {
    return Dataset{sim::extract_features(pre->extractor, d.x), d.y, d.num_classes};
  };
  out->train = featurize(dt.train);
  out->raw_train = dt.train;
  for (std::size_t k = 0; k < dt.tests.size(); ++k) {
    out->tests.push_back(featurize(dt.tests[k]));
    out->raw_tests.push_back(dt.tests[k]);
    out->test_names.push_back(dt.kind == sim::TaskKind::kId ? "test" : "shift" + std::to_string(k));
  }
  out->extractor = std::make_shared<const nn::FeedForward>(pre->extractor.net);
  return out;
}

std::shared_ptr<const TaskData> StaticSource::load(double gamma, const std::string& task,
                                                   std::uint64_t) {
  std::lock_guard lock(mu_);
  auto& slot = cache_[{gamma, task}];
  if (!slot) slot = std::make_shared<const TaskData>(loader_(gamma, task));
  return slot;
}

EvalResult run_cell(const ExperimentPlan& plan, const Cell& cell, FeatureSource& source) {
  EvalResult r;
  r.cell_id = cell.id();
  r.mode = cell.mode;
  r.gamma = cell.gamma;
  r.eta = cell.eta;
  r.task_id = cell.task;
  r.fraction = cell.fraction;
  r.seed = cell.replicate;
  r.cell_seed = cell_seed(plan.seed, cell);

  const std::uint64_t world = world_seed(plan.seed, cell.replicate);
  const auto data = source.load(cell.gamma, cell.task, world);
  r.task_kind = data->kind;
  const bool raw = nn::needs_extractor(cell.mode);
  if (raw && (!data->raw_train || !data->extractor)) {
    fail(ErrorKind::kMissingArtifact,
         std::string(nn::to_string(cell.mode)) + " needs raw inputs and an extractor");
  }
  const Dataset& full = raw ? *data->raw_train : data->train;
  const std::vector<Dataset>& tests = raw ? data->raw_tests : data->tests;

  // Nested subsets: one permutation per (replicate, task), truncated by fraction.
  std::vector<std::size_t> order(full.size());
  std::iota(order.begin(), order.end(), 0);
  Rng perm_rng = make_rng(world, "fraction:" + cell.task);
  std::shuffle(order.begin(), order.end(), perm_rng);
  const auto keep = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(cell.fraction * static_cast<double>(full.size()))), 1,
      full.size());
  order.resize(keep);
  std::sort(order.begin(), order.end());
  Dataset train_set = subset(full, order);

  if (cell.eta > 0.0) {
    NoiseSpec noise{plan.downstream_noise, cell.eta, {},
                    derive_seed(world, "downstream-noise:" + cell.task + ":" + num(cell.fraction))};
    if (noise.kind == NoiseKind::kAsymmetric) {
      noise.subset.resize(train_set.num_classes);
      std::iota(noise.subset.begin(), noise.subset.end(), 0);
    }
    FlipResult flipped = apply_noise(train_set.y, train_set.num_classes, noise);
    train_set.y = std::move(flipped.labels);
    r.flipped = std::count(flipped.flip_mask.begin(), flipped.flip_mask.end(), 1);
  }
  r.train_size = train_set.size();

  nn::TrainConfig cfg = plan.recipe(cell.mode);
  cfg.seed = r.cell_seed;
  const nn::TrainResult trained = nn::train(train_set, cfg, raw ? data->extractor.get() : nullptr);
  for (const auto& e : trained.trace.epochs) r.loss_trace.push_back(e.total);
  r.parameter_delta_norm = trained.trace.parameter_delta_norm;

  for (std::size_t k = 0; k < tests.size(); ++k) {
    const nn::Evaluation ev = nn::evaluate(*trained.head, tests[k], cell.task, r.cell_id);
    VariantResult v{data->test_names[k], ev.metrics.accuracy, ev.metrics.macro_f1, ev.spectrum.sve,
                    ev.spectrum.lsvr};
    r.accuracy += v.accuracy;
    r.macro_f1 += v.macro_f1;
    r.sve += v.sve;
    r.lsvr += v.lsvr;
    r.variants.push_back(std::move(v));
    if (source.persist_features()) r.features.push_back(features_of(*trained.head, tests[k]));
  }
  const double inv = 1.0 / static_cast<double>(tests.size());
  r.accuracy *= inv;
  r.macro_f1 *= inv;
  r.sve *= inv;
  r.lsvr *= inv;
  return r;
}

std::vector<EvalResult> run_plan(const ExperimentPlan& plan, FeatureSource& source,
                                 const RunOptions& options) {
  const std::vector<Cell> cells = expand(plan);
  std::vector<EvalResult> results(cells.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        results[i] = run_cell(plan, cells[i], source);
      } catch (const std::exception& e) {
        EvalResult r;
        const Cell& c = cells[i];
        r.cell_id = c.id();
        r.mode = c.mode;
        r.gamma = c.gamma;
        r.eta = c.eta;
        r.task_id = c.task;
        r.fraction = c.fraction;
        r.seed = c.replicate;
        r.cell_seed = cell_seed(plan.seed, c);
        r.ok = false;
        const auto* err = dynamic_cast<const Error*>(&e);
        r.error_kind = err ? std::string(to_string(err->kind())) : "InternalError";
        r.error_message = "cell " + r.cell_id + ": " + e.what();
        results[i] = std::move(r);
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(options.threads, cells.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::sort(results.begin(), results.end(),
            [](const EvalResult& a, const EvalResult& b) { return a.cell_id < b.cell_id; });
  return results;
}

Stat mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {};
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / n)};
}

std::vector<SummaryRow> aggregate(const std::vector<EvalResult>& results) {
  struct Key {
    int mode;
    double gamma, eta, fraction;
    std::string task;
    auto operator<=>(const Key&) const = default;
  };
  struct Acc {
    std::vector<double> acc, f1, sve, lsvr;
  };
  std::map<Key, Acc> by_task;
  // kind-level macro-averages: first average over tasks per seed
  struct SeedKey {
    Key key;
    std::uint64_t seed;
    auto operator<=>(const SeedKey&) const = default;
  };
  struct Sum {
    double acc = 0, f1 = 0, sve = 0, lsvr = 0;
    std::size_t n = 0;
  };
  std::map<SeedKey, Sum> by_kind_seed;

  for (const EvalResult& r : results) {
    if (!r.ok) continue;
    Key k{static_cast<int>(r.mode), r.gamma, r.eta, r.fraction, r.task_id};
    Acc& a = by_task[k];
    a.acc.push_back(r.accuracy);
    a.f1.push_back(r.macro_f1);
    a.sve.push_back(r.sve);
    a.lsvr.push_back(r.lsvr);
    k.task = std::string(sim::to_string(r.task_kind));
    Sum& s = by_kind_seed[{k, r.seed}];
    s.acc += r.accuracy;
    s.f1 += r.macro_f1;
    s.sve += r.sve;
    s.lsvr += r.lsvr;
    ++s.n;
  }
  for (const auto& [sk, s] : by_kind_seed) {
    Acc& a = by_task[sk.key];
    const double n = static_cast<double>(s.n);
    a.acc.push_back(s.acc / n);
    a.f1.push_back(s.f1 / n);
    a.sve.push_back(s.sve / n);
    a.lsvr.push_back(s.lsvr / n);
  }

  std::vector<SummaryRow> rows;
  for (const auto& [k, a] : by_task) {
    SummaryRow row;
    row.mode = static_cast<nn::TuneMode>(k.mode);
    row.gamma = k.gamma;
    row.eta = k.eta;
    row.fraction = k.fraction;
    row.task = k.task;
    row.n = a.acc.size();
    row.accuracy = mean_std(a.acc);
    row.macro_f1 = mean_std(a.f1);
    row.sve = mean_std(a.sve);
    row.lsvr = mean_std(a.lsvr);
    Key lp = k;
    lp.mode = static_cast<int>(nn::TuneMode::kLinearProbe);
    if (const auto it = by_task.find(lp); it != by_task.end()) {
      row.delta_vs_lp = row.accuracy.mean - mean_std(it->second.acc).mean;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace nmtune
