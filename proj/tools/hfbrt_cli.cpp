// SPDX-License-Identifier: Apache-2.0
//
// Copyright 2026 The hfbrt Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

// hfbrt command-line entry point.
//
// Every run resolves one effective configuration (preset < --config file <
// --set key=value < dedicated flags), writes it to <out>/effective.cfg and
// records the command in <out>/manifest.json so the run can be replayed.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hfbrt/checkpoint.hpp"
#include "hfbrt/dataset.hpp"
#include "hfbrt/eval.hpp"
#include "hfbrt/training.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace hfbrt;

namespace {

constexpr const char* kVersion = "1.0.0";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Keys understood in addition to the scenario, model and training keys.
const std::vector<std::string>& eval_keys() {
  static const std::vector<std::string> keys = {"eval_samples", "snr_grid_db"};
  return keys;
}

struct Common {
  std::vector<std::string> configs;
  std::vector<std::string> sets;
  bool toy = false;
  std::optional<long long> seed, workers;
  std::optional<int> depth, hidden, heads, head_dim, iters, state_tokens;
  std::string out;
};

struct Options {
  std::string model;
  long long samples = 0;
  std::string axis;
  std::string values;
  long long monte_carlo = 0;
  std::string batches = "1,2,4,8";
  std::string subcarrier_list;
  int reps = 5;
  int warmup = 2;
  std::string baselines;
};

json options_json(const Options& o) {
  return {{"model", o.model},         {"samples", o.samples},   {"axis", o.axis},
          {"values", o.values},       {"monte_carlo", o.monte_carlo}, {"batches", o.batches},
          {"subcarriers", o.subcarrier_list}, {"reps", o.reps}, {"warmup", o.warmup},
          {"baselines", o.baselines}};
}

Options options_of(const json& j) {
  Options o;
  o.model = j.value("model", "");
  o.samples = j.value("samples", 0LL);
  o.axis = j.value("axis", "");
  o.values = j.value("values", "");
  o.monte_carlo = j.value("monte_carlo", 0LL);
  o.batches = j.value("batches", "1,2,4,8");
  o.subcarrier_list = j.value("subcarriers", "");
  o.reps = j.value("reps", 5);
  o.warmup = j.value("warmup", 2);
  o.baselines = j.value("baselines", "");
  return o;
}

std::vector<std::string> all_keys() {
  std::vector<std::string> keys = scenario_keys();
  for (const auto* list : {&hyper_keys(), &train_keys(), &eval_keys()}) keys.insert(keys.end(), list->begin(), list->end());
  return keys;
}

std::vector<double> parse_doubles(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(what + ": '" + item + "' is not a number");
    }
  }
  if (out.empty()) throw ConfigError(what + " is empty");
  return out;
}

std::vector<int> parse_ints(const std::string& text, const std::string& what) {
  std::vector<int> out;
  for (double v : parse_doubles(text, what)) {
    if (v != static_cast<int>(v)) throw ConfigError(what + ": " + format_double(v) + " is not an integer");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

KeyValueConfig resolve_config(const Common& c) {
  KeyValueConfig kv;
  if (c.toy) {
    kv.merge(scenario_to_kv(toy_scenario()));
    kv.merge(hyper_to_kv(toy_hyper()));
    kv.merge(train_to_kv(toy_train_config()));
    kv.set("eval_samples", "500");
  }
  for (const auto& path : c.configs) kv.merge(KeyValueConfig::load(path));
  for (const auto& s : c.sets) kv.apply_override(s);
  if (c.seed) kv.set("seed", std::to_string(*c.seed));
  if (c.workers) kv.set("workers", std::to_string(*c.workers));
  if (c.depth) kv.set("depth", std::to_string(*c.depth));
  if (c.hidden) kv.set("hidden", std::to_string(*c.hidden));
  if (c.heads) kv.set("heads", std::to_string(*c.heads));
  if (c.head_dim) kv.set("head_dim", std::to_string(*c.head_dim));
  if (c.iters) kv.set("iters", std::to_string(*c.iters));
  if (c.state_tokens) kv.set("state_tokens", std::to_string(*c.state_tokens));
  kv.check_known(all_keys());
  return kv;
}

struct Resolved {
  ScenarioConfig scenario;
  BRTHyperParams hyper;
  TrainConfig train;
  int eval_samples = 2000;
  std::vector<double> snr_grid;
  KeyValueConfig effective;
};

Resolved resolve(const KeyValueConfig& kv) {
  Resolved r;
  r.scenario = scenario_from_kv(kv);
  r.hyper = hyper_for(r.scenario, hyper_from_kv(kv));
  r.hyper.validate();
  r.train = train_from_kv(kv);
  r.eval_samples = static_cast<int>(kv.get_int("eval_samples", 2000));
  if (r.eval_samples < 1) throw ConfigError("eval_samples must be >= 1");
  const std::string grid = kv.get_string("snr_grid_db", "0,5,10,15,20");
  r.snr_grid = parse_doubles(grid, "snr_grid_db");
  r.effective = scenario_to_kv(r.scenario);
  r.effective.merge(hyper_to_kv(r.hyper));
  r.effective.merge(train_to_kv(r.train));
  r.effective.set("eval_samples", std::to_string(r.eval_samples));
  r.effective.set("snr_grid_db", grid);
  return r;
}

void write_manifest(const fs::path& out, const std::string& command, const Options& o, const Resolved& r) {
  json m;
  m["tool"] = "hfbrt";
  m["version"] = kVersion;
  m["command"] = command;
  m["options"] = options_json(o);
  m["config"] = r.effective.entries();
  m["config_hash"] = hex64(r.effective.hash());
  m["seed"] = r.train.seed;
  m["combiner_seed"] = r.scenario.combiner_seed;
  m["build"] = {{"compiler", __VERSION__}, {"cxx_standard", __cplusplus}};
  r.effective.save((out / "effective.cfg").string());
  write_text((out / "manifest.json").string(), m.dump(2) + "\n");
}

BRTModel load_model(const std::string& path, const ScenarioConfig& scenario) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.model.hyper().token_width != scenario.token_width())
    throw ConfigError("checkpoint token width " + std::to_string(ck.model.hyper().token_width) +
                      " does not match the scenario (" + std::to_string(scenario.token_width()) + ")");
  if (ck.model.hyper().tokens != scenario.subcarriers) return ck.model.resized(scenario.subcarriers);
  return std::move(ck.model);
}

void log_epoch(const EpochLog& e) {
  std::fprintf(stderr, "epoch %3d  train %8.3f dB  val %8.3f dB  lr %.3g\n", e.epoch, e.train_nmse_db, e.val_nmse_db,
               e.lr);
}

// ---------------------------------------------------------------- commands

void cmd_generate(const fs::path& out, const Options& o, const Resolved& r) {
  if (o.samples < 1) throw UsageError("generate needs --samples >= 1");
  const SampleGenerator gen(r.scenario);
  DatasetHeader header;
  header.subcarriers = r.scenario.subcarriers;
  header.num_elements = r.scenario.num_elements();
  header.num_measurements = r.scenario.measurement_width() / 2;
  header.scenario_hash = scenario_to_kv(r.scenario).hash();
  DatasetWriter writer((out / "dataset.bin").string(), header);
  for (long long i = 0; i < o.samples; ++i) {
    Rng rng = make_stream(r.train.seed, 0xDA7A, static_cast<std::uint64_t>(i));
    ChannelRealization ch;
    Observation obs;
    const Sample s = gen.make(rng, std::nullopt, &ch, &obs);
    writer.append({static_cast<float>(s.snr_db), static_cast<std::uint32_t>(s.num_paths), ch.h,
                   real_rows_to_complex(obs.y)});
  }
  writer.close();
  header.count = writer.count();
  write_dataset_sidecar((out / "dataset.json").string(), r.effective, header, r.train.seed);
  std::printf("wrote %lld samples to %s\n", o.samples, (out / "dataset.bin").c_str());
}

void finish_training(const fs::path& out, const BRTModel& model, const TrainResult& res, const Resolved& r) {
  write_text((out / "train_log.csv").string(), format_log_csv(res.log));
  save_checkpoint((out / "model.ckpt").string(), model, r.effective);
  json s = {{"val_nmse", res.val_nmse},
            {"val_nmse_db", to_db(res.val_nmse)},
            {"ls_val_nmse", res.ls_val_nmse},
            {"ls_val_nmse_db", to_db(res.ls_val_nmse)},
            {"param_count", model.param_count()}};
  write_text((out / "summary.json").string(), s.dump(2) + "\n");
  std::printf("validation NMSE %.3f dB (LS %.3f dB), checkpoint %s\n", to_db(res.val_nmse), to_db(res.ls_val_nmse),
              (out / "model.ckpt").c_str());
}

void cmd_train(const fs::path& out, const Options&, const Resolved& r) {
  BRTModel model(r.hyper, r.train.seed);
  TrainHooks hooks{(out / "last_good.ckpt").string(), r.effective, log_epoch};
  const TrainResult res = train(model, r.scenario, r.train, hooks);
  finish_training(out, model, res, r);
}

void cmd_finetune(const fs::path& out, const Options& o, const Resolved& r) {
  if (o.model.empty()) throw UsageError("finetune needs --model");
  BRTModel model = load_checkpoint(o.model).model;
  TrainHooks hooks{(out / "last_good.ckpt").string(), r.effective, log_epoch};
  const TrainResult res = fine_tune(model, r.scenario, r.train, hooks);
  finish_training(out, model, res, r);
}

std::vector<CurvePoint> snr_curves(const fs::path& out, const Options& o, const Resolved& r) {
  const SampleGenerator gen(r.scenario);
  const std::uint64_t seed = r.train.seed;
  std::string detail;
  std::vector<CurvePoint> curves;
  const auto ls = nmse_sweep(ls_estimator(), gen, r.snr_grid, r.eval_samples, seed);
  detail += format_sweep_csv(ls, "ls");
  for (auto& p : to_curve(ls, "ls")) curves.push_back(p);
  if (!o.model.empty()) {
    const BRTModel model = load_model(o.model, r.scenario);
    const auto brt = nmse_sweep(brt_estimator(model), gen, r.snr_grid, r.eval_samples, seed);
    const std::string rows = format_sweep_csv(brt, "brt");
    detail += rows.substr(rows.find('\n') + 1);
    for (auto& p : to_curve(brt, "brt")) curves.push_back(p);
    if (r.scenario.subcarriers > 1) {
      const auto surface = wideband_surface(brt_estimator(model), gen, r.snr_grid, r.eval_samples, seed);
      write_text((out / "surface.csv").string(), format_surface_csv(surface));
      std::ostringstream spread;
      spread << "snr_db,min_db,max_db,std_db\n";
      for (std::size_t j = 0; j < surface.snr_grid.size(); ++j)
        spread << format_double(surface.snr_grid[j]) << ',' << format_double(surface.min_db[j]) << ','
               << format_double(surface.max_db[j]) << ',' << format_double(surface.std_db[j]) << '\n';
      write_text((out / "surface_spread.csv").string(), spread.str());
    }
  }
  write_text((out / "sweep_snr.csv").string(), detail);
  if (!o.baselines.empty())
    for (auto& p : load_curves_csv(o.baselines)) curves.push_back(p);
  write_text((out / "curves.csv").string(), format_curves_csv(curves));
  return curves;
}

void cmd_evaluate(const fs::path& out, const Options& o, const Resolved& r) {
  for (const auto& p : snr_curves(out, o, r))
    std::printf("%-10s snr %6.2f dB  nmse %9.3f dB\n", p.label.c_str(), p.snr_db, p.nmse_db);
}

void cmd_sweep(const fs::path& out, const Options& o, const Resolved& r) {
  const std::string& axis = o.axis;
  if (axis == "snr") {
    cmd_evaluate(out, o, r);
    return;
  }
  if (axis == "iters" || axis == "heads" || axis == "depth") {
    const std::string defaults = axis == "iters" ? "1,2,3,4,5" : (axis == "heads" ? "1,2,4" : "1,2,3");
    const auto values = parse_ints(o.values.empty() ? defaults : o.values, "--values");
    const double snr = r.snr_grid.back();
    const HyperSweep s = hyper_sweep(axis, values, r.hyper, r.scenario, r.train, snr, r.eval_samples);
    write_text((out / ("sweep_" + axis + ".csv")).string(), format_hyper_csv(s));
    if (!s.trace_db.empty()) {
      std::ostringstream os;
      os << "iteration,nmse_db\n";
      for (std::size_t t = 0; t < s.trace_db.size(); ++t) os << t << ',' << format_double(s.trace_db[t]) << '\n';
      write_text((out / "iteration_trace.csv").string(), os.str());
    }
    for (const auto& row : s.rows) std::printf("%s=%d  nmse %.3f dB (LS %.3f dB)\n", axis.c_str(), row.value,
                                               row.nmse_db, row.ls_nmse_db);
    return;
  }
  std::vector<std::pair<std::string, ScenarioConfig>> variants;
  if (axis == "distance") {
    const auto edges = parse_doubles(o.values.empty() ? "5,10,15,20,25,30" : o.values, "--values");
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
      ScenarioConfig v = r.scenario;
      v.nlos_distance_min = edges[i];
      v.nlos_distance_max = edges[i + 1];
      variants.emplace_back("r" + format_double(edges[i]) + "-" + format_double(edges[i + 1]), v);
    }
  } else if (axis == "paths") {
    for (int L : parse_ints(o.values.empty() ? "2,3,4,5,6,7" : o.values, "--values")) {
      ScenarioConfig v = r.scenario;
      v.paths_min = v.paths_max = L;
      variants.emplace_back("L" + std::to_string(L), v);
    }
  } else if (axis == "bandwidth") {
    if (r.scenario.subcarriers < 2) throw ConfigError("the bandwidth sweep needs a wideband scenario (subcarriers > 1)");
    for (double ghz : parse_doubles(o.values.empty() ? "5,10,15,20,25" : o.values, "--values")) {
      ScenarioConfig v = r.scenario;
      v.bandwidth_hz = ghz * 1e9;
      variants.emplace_back("B" + format_double(ghz) + "GHz", v);
    }
  } else {
    throw UsageError("unknown sweep axis '" + axis + "'");
  }
  for (auto& [name, v] : variants) v.validate();
  const std::uint64_t seed = r.train.seed;
  std::string text;
  if (!o.model.empty()) {
    const BRTModel model = load_model(o.model, r.scenario);
    const auto rows = generalization_sweep(brt_estimator(model), r.scenario, variants, r.snr_grid, r.eval_samples, seed);
    text = format_generalization_csv(rows);
  }
  const auto ls_rows = generalization_sweep(ls_estimator(), r.scenario, variants, r.snr_grid, r.eval_samples, seed);
  write_text((out / ("sweep_" + axis + "_ls.csv")).string(), format_generalization_csv(ls_rows));
  if (!text.empty()) write_text((out / ("sweep_" + axis + ".csv")).string(), text);
  std::printf("wrote %zu variants x %zu SNR points to %s\n", variants.size(), r.snr_grid.size(), out.c_str());
}

void cmd_pmf(const fs::path& out, const Options& o, const Resolved& r) {
  const NearFieldPmf pmf = near_field_pmf(r.scenario);
  std::vector<double> mc;
  if (o.monte_carlo > 0) mc = monte_carlo_pmf(r.scenario, o.monte_carlo, r.train.seed);
  std::ostringstream p;
  p << pmf.p_nlos;
  std::printf("Z = %.6g m, per-NLoS near-field probability %s, LoS near-field: %s\n", r.scenario.rayleigh(),
              p.str().c_str(), pmf.los_near ? "yes" : "no");
  const std::string csv = format_pmf_csv(pmf, mc);
  std::fputs(csv.c_str(), stdout);
  write_text((out / "pmf.csv").string(), csv);
}

void cmd_bench(const fs::path& out, const Options& o, const Resolved& r) {
  const BRTModel model = o.model.empty() ? BRTModel(r.hyper, r.train.seed) : load_checkpoint(o.model).model;
  const auto batches = parse_ints(o.batches, "--batches");
  const auto ks = parse_ints(o.subcarrier_list.empty() ? std::to_string(r.scenario.subcarriers) : o.subcarrier_list,
                             "--subcarrier-list");
  const std::string csv = format_bench_csv(bench_inference(model, batches, ks, o.warmup, o.reps));
  std::fputs(csv.c_str(), stdout);
  write_text((out / "bench.csv").string(), csv);
}

using Handler = void (*)(const fs::path&, const Options&, const Resolved&);

const std::map<std::string, Handler>& handlers() {
  static const std::map<std::string, Handler> h = {{"generate", cmd_generate}, {"train", cmd_train},
                                                   {"finetune", cmd_finetune}, {"evaluate", cmd_evaluate},
                                                   {"sweep", cmd_sweep},       {"pmf", cmd_pmf},
                                                   {"bench", cmd_bench}};
  return h;
}

void run(const std::string& command, const KeyValueConfig& kv, const Options& o, const std::string& out_dir) {
  const Resolved r = resolve(kv);
  const fs::path out = out_dir.empty() ? fs::path("runs") / command : fs::path(out_dir);
  fs::create_directories(out);
  write_manifest(out, command, o, r);
  handlers().at(command)(out, o, r);
}

void replay(const std::string& manifest_path, const std::string& out_dir) {
  std::ifstream in(manifest_path);
  if (!in) throw ConfigError("cannot open manifest '" + manifest_path + "'");
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("manifest '" + manifest_path + "' is not valid JSON: " + e.what());
  }
  KeyValueConfig kv;
  for (const auto& [k, v] : m.at("config").items()) kv.set(k, v.get<std::string>());
  kv.check_known(all_keys());
  const std::string command = m.at("command");
  if (!handlers().count(command)) throw ConfigError("manifest names unknown command '" + command + "'");
  const fs::path out = out_dir.empty() ? fs::path(manifest_path).parent_path() / "replay" : fs::path(out_dir);
  run(command, kv, options_of(m.at("options")), out.string());
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.configs, "key = value config file(s), applied in order")->check(CLI::ExistingFile);
  sub->add_option("--set", c.sets, "override one config key, e.g. --set snr_max_db=10");
  sub->add_flag("--toy", c.toy, "start from the desk-scale preset (S=1, S-bar=16, N_p=8, hidden 32)");
  sub->add_option("--seed", c.seed, "master seed for data, initialization and evaluation");
  sub->add_option("--workers", c.workers, "sample-generation threads (0: generate inline)");
  sub->add_option("--out", c.out, "output directory (default runs/<command>)");
  sub->add_option("--depth", c.depth, "cells per block");
  sub->add_option("--hidden", c.hidden, "embedding width N_h");
  sub->add_option("--heads", c.heads, "attention heads");
  sub->add_option("--head-dim", c.head_dim, "width of each attention head");
  sub->add_option("--iters", c.iters, "recurrent refinement iterations N_t");
  sub->add_option("--state-tokens", c.state_tokens, "state tokens (0: one per input token)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid-field THz channel synthesis and block-recurrent transformer estimation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  Common common;
  Options opt;
  std::string manifest;

  auto* gen = app.add_subcommand("generate", "write a binary dataset of (channel, measurement) pairs");
  add_common(gen, common);
  gen->add_option("--samples", opt.samples, "number of records")->required();

  auto* tr = app.add_subcommand("train", "train a model with online data generation");
  add_common(tr, common);

  auto* ft = app.add_subcommand("finetune", "continue training a checkpoint on a new scenario");
  add_common(ft, common);
  ft->add_option("--model", opt.model, "checkpoint to start from")->required()->check(CLI::ExistingFile);

  auto* ev = app.add_subcommand("evaluate", "NMSE versus SNR for LS and, with --model, the trained model");
  add_common(ev, common);
  ev->add_option("--model", opt.model, "checkpoint to evaluate")->check(CLI::ExistingFile);
  ev->add_option("--baselines", opt.baselines, "external curves CSV (snr_db,nmse_db,label) to merge")
      ->check(CLI::ExistingFile);

  auto* sw = app.add_subcommand("sweep", "NMSE sweeps over one axis");
  add_common(sw, common);
  sw->add_option("--axis", opt.axis, "snr | distance | paths | bandwidth | iters | heads | depth")
      ->required()
      ->check(CLI::IsMember({"snr", "distance", "paths", "bandwidth", "iters", "heads", "depth"}));
  sw->add_option("--model", opt.model, "checkpoint evaluated on the variants")->check(CLI::ExistingFile);
  sw->add_option("--values", opt.values,
                 "comma-separated axis values: distance bin edges in m, path counts, bandwidths in GHz, "
                 "or hyperparameter values");
  sw->add_option("--baselines", opt.baselines, "external curves CSV merged into the snr sweep")
      ->check(CLI::ExistingFile);

  auto* pm = app.add_subcommand("pmf", "closed-form PMF of the number of near-field paths");
  add_common(pm, common);
  pm->add_option("--monte-carlo", opt.monte_carlo, "also estimate the PMF from this many sampled path sets");

  auto* be = app.add_subcommand("bench", "float32 inference timing");
  add_common(be, common);
  be->add_option("--model", opt.model, "checkpoint (default: freshly initialized model)")->check(CLI::ExistingFile);
  be->add_option("--batches", opt.batches, "comma-separated batch sizes");
  be->add_option("--subcarrier-list", opt.subcarrier_list, "comma-separated token counts K");
  be->add_option("--reps", opt.reps, "timed repetitions per point")->check(CLI::PositiveNumber);
  be->add_option("--warmup", opt.warmup, "untimed warmup runs per point")->check(CLI::NonNegativeNumber);

  auto* rp = app.add_subcommand("replay", "re-run a recorded command from its manifest");
  rp->add_option("--manifest", manifest, "manifest.json written by an earlier run")->required();
  rp->add_option("--out", common.out, "output directory (default <manifest dir>/replay)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    for (auto* sub : app.get_subcommands()) {
      const std::string name = sub->get_name();
      if (name == "replay") {
        replay(manifest, common.out);
      } else {
        if (!opt.model.empty()) opt.model = fs::absolute(opt.model).string();
        if (!opt.baselines.empty()) opt.baselines = fs::absolute(opt.baselines).string();
        run(name, resolve_config(common), opt, common.out);
      }
    }
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: usage: %s\n", e.what());
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: config: %s\n", e.what());
    return 2;
  } catch (const TrainingDiverged& e) {
    std::fprintf(stderr, "error: training: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: runtime: %s\n", e.what());
    return 1;
  }
  return 0;
}
