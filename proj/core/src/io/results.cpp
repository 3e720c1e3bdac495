#include "nmtune/io/results.hpp"

#include <algorithm>
#include <cstdio>

#include <json.hpp>

#include "nmtune/error.hpp"
#include "nmtune/io/config.hpp"
#include "nmtune/io/fmat.hpp"

namespace nmtune::io {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

template <typename T>
T field(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) fail(ErrorKind::kInvalidInput, std::string("result is missing '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::kInvalidInput, std::string("result field '") + key + "': " + e.what());
  }
}

}  // namespace

std::string result_to_json(const EvalResult& r) {
  ordered_json j;
  j["cell_id"] = r.cell_id;
  j["ok"] = r.ok;
  j["mode"] = nn::to_string(r.mode);
  j["gamma"] = r.gamma;
  j["eta"] = r.eta;
  j["task_id"] = r.task_id;
  j["task_kind"] = sim::to_string(r.task_kind);
  j["fraction"] = r.fraction;
  j["seed"] = r.seed;
  j["cell_seed"] = r.cell_seed;
  if (!r.ok) {
    j["error"] = {{"kind", r.error_kind}, {"message", r.error_message}};
  }
  j["accuracy"] = r.accuracy;
  j["macro_f1"] = r.macro_f1;
  j["sve"] = r.sve;
  j["lsvr"] = r.lsvr;
  j["spectrum_split"] = "test";  // sve/lsvr come from each variant's evaluation features
  j["train_size"] = r.train_size;
  j["flipped"] = r.flipped;
  ordered_json variants = ordered_json::array();
  for (const auto& v : r.variants) {
    variants.push_back({{"name", v.name},
                        {"accuracy", v.accuracy},
                        {"macro_f1", v.macro_f1},
                        {"sve", v.sve},
                        {"lsvr", v.lsvr}});
  }
  j["variants"] = variants;
  j["loss_trace"] = r.loss_trace;
  j["parameter_delta_norm"] =
      r.parameter_delta_norm ? ordered_json(*r.parameter_delta_norm) : ordered_json(nullptr);
  return j.dump(2) + "\n";
}

EvalResult result_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kInvalidInput, std::string("malformed result: ") + e.what());
  }
  EvalResult r;
  r.cell_id = field<std::string>(j, "cell_id");
  r.ok = field<bool>(j, "ok");
  r.mode = nn::parse_tune_mode(field<std::string>(j, "mode"));
  r.gamma = field<double>(j, "gamma");
  r.eta = field<double>(j, "eta");
  r.task_id = field<std::string>(j, "task_id");
  r.task_kind = sim::parse_task_kind(field<std::string>(j, "task_kind"));
  r.fraction = field<double>(j, "fraction");
  r.seed = field<std::uint64_t>(j, "seed");
  r.cell_seed = field<std::uint64_t>(j, "cell_seed");
  if (!r.ok) {
    const json err = field<json>(j, "error");
    r.error_kind = field<std::string>(err, "kind");
    r.error_message = field<std::string>(err, "message");
  }
  r.accuracy = field<double>(j, "accuracy");
  r.macro_f1 = field<double>(j, "macro_f1");
  r.sve = field<double>(j, "sve");
  r.lsvr = field<double>(j, "lsvr");
  r.train_size = field<std::size_t>(j, "train_size");
  r.flipped = field<std::size_t>(j, "flipped");
  for (const json& v : field<json>(j, "variants")) {
    r.variants.push_back({field<std::string>(v, "name"), field<double>(v, "accuracy"),
                          field<double>(v, "macro_f1"), field<double>(v, "sve"),
                          field<double>(v, "lsvr")});
  }
  r.loss_trace = field<std::vector<double>>(j, "loss_trace");
  const json delta = field<json>(j, "parameter_delta_norm");
  if (!delta.is_null()) r.parameter_delta_norm = delta.get<double>();
  return r;
}

void write_results(const std::filesystem::path& dir, const std::vector<EvalResult>& results) {
  std::filesystem::create_directories(dir);
  for (const EvalResult& r : results) {
    write_file_atomic(dir / (r.cell_id + ".json"), result_to_json(r));
    for (std::size_t k = 0; k < r.features.size() && k < r.variants.size(); ++k) {
      write_fmat(r.features[k], dir / "features" / (r.cell_id + "." + r.variants[k].name + ".fmat"));
    }
  }
}

std::vector<EvalResult> read_results(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    fail(ErrorKind::kMissingArtifact, "no results directory " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto& p = entry.path();
    if (entry.is_regular_file() && p.extension() == ".json" && p.stem() != "config") {
      files.push_back(p);
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<EvalResult> out;
  for (const auto& p : files) out.push_back(result_from_json(read_file(p)));
  return out;
}

std::string summary_to_json(const std::vector<SummaryRow>& rows) {
  ordered_json arr = ordered_json::array();
  auto stat = [](const Stat& s) { return ordered_json{{"mean", s.mean}, {"std", s.std}}; };
  for (const auto& r : rows) {
    ordered_json j;
    j["mode"] = nn::to_string(r.mode);
    j["task"] = r.task;
    j["gamma"] = r.gamma;
    j["eta"] = r.eta;
    j["fraction"] = r.fraction;
    j["n"] = r.n;
    j["accuracy"] = stat(r.accuracy);
    j["macro_f1"] = stat(r.macro_f1);
    j["sve"] = stat(r.sve);
    j["lsvr"] = stat(r.lsvr);
    j["delta_vs_lp"] = r.delta_vs_lp ? ordered_json(*r.delta_vs_lp) : ordered_json(nullptr);
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

std::string summary_to_csv(const std::vector<SummaryRow>& rows) {
  std::vector<const SummaryRow*> sorted;
  for (const auto& r : rows) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(), [](const SummaryRow* a, const SummaryRow* b) {
    return std::tuple(nn::to_string(a->mode), a->task, a->eta, a->fraction, a->gamma) <
           std::tuple(nn::to_string(b->mode), b->task, b->eta, b->fraction, b->gamma);
  });
  std::string out =
      "mode,task,eta,fraction,gamma,n,accuracy_mean,accuracy_std,macro_f1_mean,macro_f1_std,"
      "sve_mean,sve_std,lsvr_mean,lsvr_std,delta_vs_lp\n";
  for (const SummaryRow* r : sorted) {
    out += std::string(nn::to_string(r->mode)) + "," + r->task + "," + format_ratio(r->eta) + "," +
           format_ratio(r->fraction) + "," + format_ratio(r->gamma) + "," + std::to_string(r->n);
    for (const Stat* s : {&r->accuracy, &r->macro_f1, &r->sve, &r->lsvr}) {
      out += "," + format_ratio(s->mean) + "," + format_ratio(s->std);
    }
    out += "," + (r->delta_vs_lp ? format_ratio(*r->delta_vs_lp) : std::string());
    out += "\n";
  }
  return out;
}

std::string summary_to_table(const std::vector<SummaryRow>& rows) {
  char line[256];
  std::snprintf(line, sizeof line, "%-11s %-12s %6s %6s %6s %3s  %-17s %-17s %-8s %-8s %8s\n",
                "mode", "task", "gamma", "eta", "frac", "n", "accuracy", "macro_f1", "sve",
                "lsvr", "d(LP)");
  std::string out = line;
  for (const auto& r : rows) {
    const std::string acc = fixed(r.accuracy.mean) + "+-" + fixed(r.accuracy.std);
    const std::string f1 = fixed(r.macro_f1.mean) + "+-" + fixed(r.macro_f1.std);
    std::snprintf(line, sizeof line, "%-11s %-12s %6.3f %6.3f %6.3f %3zu  %-17s %-17s %-8s %-8s %8s\n",
                  std::string(nn::to_string(r.mode)).c_str(), r.task.c_str(), r.gamma, r.eta,
                  r.fraction, r.n, acc.c_str(), f1.c_str(), fixed(r.sve.mean).c_str(),
                  fixed(r.lsvr.mean).c_str(),
                  r.delta_vs_lp ? fixed(*r.delta_vs_lp).c_str() : "");
    out += line;
  }
  return out;
}

std::string spectrum_to_json(const SpectrumReport& s) {
  ordered_json j;
  j["dataset_id"] = s.dataset_id;
  j["model_id"] = s.model_id;
  j["m"] = s.m;
  j["d"] = s.d;
  j["rank"] = s.rank;
  j["centered"] = s.centered;
  j["sve"] = s.sve;
  j["lsvr"] = s.lsvr;
  j["total_sigma"] = s.total_sigma;
  j["sigma_top"] = s.sigma_top;
  return j.dump(2) + "\n";
}

std::string head_to_json(const nn::TuneHead& head) {
  ordered_json j;
  j["mode"] = nn::to_string(head.mode());
  ordered_json params = ordered_json::array();
  for (const Matrix* p : head.parameters()) {
    params.push_back({{"rows", p->rows()},
                      {"cols", p->cols()},
                      {"values", std::vector<double>(p->data(), p->data() + p->size())}});
  }
  j["parameters"] = params;
  return j.dump() + "\n";
}

}  // namespace nmtune::io
