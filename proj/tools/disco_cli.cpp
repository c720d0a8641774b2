// Copyright 2026 The disco-asr Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// disco: data generation, training, continual learning and benchmarking.
//
// Exit codes: 0 success, 1 runtime failure (including a failed benchmark
// row), 2 usage or configuration error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "disco/checkpoint.h"
#include "disco/continual.h"
#include "disco/corpus.h"
#include "disco/evalbench.h"
#include "disco/random.h"
#include "disco/registry.h"
#include "disco/run_config.h"
#include "disco/training.h"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace disco;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConfigArgs {
  std::string preset;
  std::string config;
  std::vector<std::string> sets;
};

void add_config_options(CLI::App* sub, ConfigArgs& args) {
  sub->add_option("--preset", args.preset, "Preset name")
      ->check(CLI::IsMember(run_preset_names()));
  sub->add_option("--config", args.config, "INI run config")->check(CLI::ExistingFile);
  sub->add_option("--set", args.sets, "Override as section.key=value (repeatable)");
}

RunConfig resolve(const ConfigArgs& args) {
  return load_config(args.config, args.sets, args.preset);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    os << text;
    if (!os) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

std::string provenance(const RunConfig& cfg, std::uint64_t seed) {
  json j;
  j["run_config_digest"] = digest_hex(cfg.digest());
  j["preset"] = cfg.preset;
  j["seed"] = seed;
  return j.dump();
}

/// Removes the listed entries of `dir` (only those).
void clear_outputs(const fs::path& dir, const std::vector<std::string>& names) {
  for (const auto& n : names) fs::remove_all(dir / n);
}

void check_same_run(const fs::path& ini, const RunConfig& cfg) {
  if (fs::exists(ini) && read_text(ini) != cfg.to_text()) {
    throw std::runtime_error(ini.parent_path().string() +
                             " holds outputs of a different run config; pass --force to replace");
  }
}

Corpus open_corpus(const fs::path& dir) {
  if (!fs::exists(dir / "corpus.json")) {
    throw std::runtime_error("no corpus at " + dir.string() + " (run datagen first)");
  }
  return load_corpus(dir);
}

std::string hex(std::uint64_t v) { return digest_hex(v); }

// ----------------------------------------------------------------- datagen ---

int cmd_datagen(const RunConfig& cfg, std::uint64_t seed, const fs::path& out, bool force) {
  const std::string prov = provenance(cfg, seed);
  if (fs::exists(out / "corpus.json") && !force) {
    const Corpus existing = load_corpus(out, false);
    if (existing.provenance == json::parse(prov).dump() &&
        existing.config_digest == cfg.data.digest()) {
      std::cout << "corpus at " << out.string() << " is up to date\n";
      return 0;
    }
    throw std::runtime_error(out.string() + " holds a different corpus; pass --force to replace");
  }
  clear_outputs(out, {"feats", "manifest.jsonl", "corpus.json", "run_config.ini"});
  Corpus corpus = generate_corpus(cfg.data, seed);
  corpus.provenance = json::parse(prov).dump();
  save_corpus(corpus, out);
  write_text(out / "run_config.ini", cfg.to_text());
  for (const auto& s : corpus_stats(corpus)) {
    std::printf("%-12s speakers=%d hours/speaker=%.4f+-%.4f utterances/speaker=%.1f+-%.1f\n",
                s.split.c_str(), s.speakers, s.hours.mean, s.hours.std, s.utterances.mean,
                s.utterances.std);
  }
  std::cout << "wrote " << corpus.utterances.size() << " utterances to " << out.string() << "\n";
  return 0;
}

// ------------------------------------------------------------------- train ---

int cmd_train(const RunConfig& cfg, std::uint64_t seed, const fs::path& data, const fs::path& out,
              bool force, std::int64_t stop_after) {
  const std::vector<std::string> outputs{"model.ckpt", "best.ckpt", "last.ckpt", "metrics.jsonl",
                                         "run_config.ini"};
  if (force) clear_outputs(out, outputs);
  check_same_run(out / "run_config.ini", cfg);
  if (fs::exists(out / "model.ckpt")) {
    const Checkpoint ck = load_checkpoint(out / "model.ckpt");
    std::cout << "model at " << (out / "model.ckpt").string() << " is up to date (step " << ck.step
              << ")\n";
    return 0;
  }
  if (fs::exists(out / "last.ckpt")) {
    const json meta = json::parse(load_checkpoint(out / "last.ckpt").meta);
    if (meta.value("seed", std::uint64_t{0}) != seed) {
      throw std::runtime_error("last.ckpt was written with another seed; pass --force to restart");
    }
  }
  const Corpus corpus = open_corpus(data);
  write_text(out / "run_config.ini", cfg.to_text());
  TrainConfig tc = cfg.train;
  tc.loop.seed = seed;
  DisConformer<float> model(cfg.model, derive_seed(seed, {}, "init"));
  const LoopResult r = train(model, corpus, tc, out, /*resume=*/true, stop_after,
                             provenance(cfg, seed));
  if (!r.completed) {
    std::cout << "stopped at step " << r.last.step << "; rerun to resume\n";
    return 0;
  }
  save_checkpoint(r.best, out / "model.ckpt");
  std::printf("trained %lld steps; best dev WER %.4f at step %lld\n",
              static_cast<long long>(r.last.step), r.best_dev_wer,
              static_cast<long long>(r.best_step));
  std::cout << "config_digest " << hex(r.best.config_digest()) << "\n";
  return 0;
}

// ---------------------------------------------------------------- finetune ---

int cmd_finetune(const RunConfig& cfg, std::uint64_t seed, const fs::path& data,
                 const fs::path& model_path, const std::string& speaker, const std::string& split,
                 const std::string& algorithm, const fs::path& out, bool force) {
  const std::vector<std::string> outputs{"delta.ckpt", "best.ckpt", "last.ckpt", "metrics.jsonl",
                                         "run_config.ini"};
  if (force) clear_outputs(out, outputs);
  check_same_run(out / "run_config.ini", cfg);
  if (fs::exists(out / "delta.ckpt")) {
    std::cout << "delta at " << (out / "delta.ckpt").string() << " is up to date\n";
    return 0;
  }
  clear_outputs(out, outputs);
  const Checkpoint base = load_checkpoint(model_path);
  const Corpus corpus = open_corpus(data);
  const CLAlgorithm alg = parse_cl_algorithm(algorithm);
  // Same seeding as a benchmark cell, so results are reproducible either way.
  const std::uint64_t s = fnv1a(speaker), t = fnv1a(split);
  Rng plan_rng(derive_seed(seed, {s, t}, "plan"));
  const CLPlan plan = build_cl_plan(base.config, alg, cfg.cl, plan_rng);
  LoopConfig loop = cfg.cl_loop;
  if (auto it = cfg.cl_split_steps.find(split); it != cfg.cl_split_steps.end()) {
    loop.steps = it->second;
  }
  loop.seed = derive_seed(seed, {s, t}, "finetune");
  write_text(out / "run_config.ini", cfg.to_text());
  FinetuneResult fr = run_finetune(base, plan, corpus, speaker, split, loop, out);
  json meta = json::parse(fr.speaker.meta);
  meta["provenance"] = json::parse(provenance(cfg, seed));
  fr.speaker.meta = meta.dump();
  save_checkpoint(fr.speaker, out / "delta.ckpt");
  std::printf("%s %s %s: %lld trainable params, best valid WER %.4f at step %lld\n",
              algorithm.c_str(), speaker.c_str(), split.c_str(),
              static_cast<long long>(plan.num_params), fr.loop.best_dev_wer,
              static_cast<long long>(fr.loop.best_step));
  return 0;
}

// ---------------------------------------------------------------- evaluate ---

int cmd_evaluate(const fs::path& data, const fs::path& model_path,
                 const std::optional<fs::path>& delta_path, const std::string& split,
                 const std::string& speaker, const std::string& domain,
                 const std::string& decode_name, const std::optional<fs::path>& out, bool force) {
  if (out && fs::exists(*out) && !force) {
    std::cout << read_text(*out);
    return 0;
  }
  const Checkpoint base = load_checkpoint(model_path);
  const Corpus corpus = open_corpus(data);
  std::optional<DisConformer<float>> model;
  Selection sel = Selection::core_only(base.config);
  std::string delta_digest;
  if (delta_path) {
    const Checkpoint delta = load_checkpoint(*delta_path);
    model.emplace(apply_delta(base, delta));
    if (domain == "speaker") {
      sel = plan_of(delta).selection(base.config, InferenceDomain::kSpeaker);
    }
    delta_digest = hex(delta.content_digest());
  } else {
    model.emplace(model_from(base));
  }
  std::vector<const Utterance*> utts = corpus.split_rank(split) >= 0
                                           ? corpus.speaker_train(speaker, split)
                                           : corpus.with_tag(split, speaker);
  const DecodeOptions decode = DecodeOptions::parse(decode_name);
  const EvalResult r = evaluate(*model, sel, utts, decode);
  json j;
  j["split"] = split;
  if (!speaker.empty()) j["speaker"] = speaker;
  j["decode"] = decode.name();
  j["domain"] = domain;
  j["config_digest"] = hex(base.config_digest());
  j["model_digest"] = hex(base.content_digest());
  if (!delta_digest.empty()) j["delta_digest"] = delta_digest;
  j["wer"] = r.wer;
  j["errors"] = r.errors;
  j["words"] = r.words;
  j["mean_loss"] = r.mean_loss;
  json us = json::array();
  for (const auto& u : r.utterances) {
    us.push_back({{"id", u.id},
                  {"hypothesis", u.hypothesis},
                  {"errors", u.errors},
                  {"words", u.words},
                  {"loss", u.loss}});
  }
  j["utterances"] = us;
  const std::string text = j.dump(2) + "\n";
  if (out) write_text(*out, text);
  std::printf("wer %.6f (%zu/%zu) mean_loss %.6f\n", r.wer, r.errors, r.words, r.mean_loss);
  return 0;
}

// --------------------------------------------------------------- benchmark ---

struct LoadedModels {
  std::vector<std::string> labels;
  std::vector<Checkpoint> checkpoints;
};

LoadedModels load_models(const std::vector<std::string>& specs) {
  LoadedModels m;
  for (const auto& s : specs) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw UsageError("--model expects label=path, got '" + s + "'");
    }
    m.labels.push_back(s.substr(0, eq));
    m.checkpoints.push_back(load_checkpoint(s.substr(eq + 1)));
  }
  return m;
}

BenchmarkSpec bench_spec(const RunConfig& cfg, const Corpus& corpus, std::uint64_t seed,
                         const std::vector<std::string>& speakers,
                         const std::vector<std::string>& splits, int jobs, const fs::path& out) {
  BenchmarkSpec b;
  b.splits = !splits.empty() ? splits
             : !cfg.eval_splits.empty() ? cfg.eval_splits
                                        : corpus.train_splits;
  b.speakers = speakers;
  b.decodes = cfg.decodes;
  b.loop = cfg.cl_loop;
  b.steps = cfg.cl_split_steps;
  b.seed = seed;
  b.jobs = jobs;
  b.median = cfg.median;
  b.run_config = cfg.to_text();
  b.provenance = provenance(cfg, seed);
  b.out_dir = out;
  return b;
}

int finish_report(const BenchmarkReport& report, const fs::path& out) {
  write_text(out / "report.json", report.to_json());
  write_text(out / "report.txt", report.to_table());
  std::cout << report.to_table();
  if (!report.ok()) {
    for (const auto& r : report.rows) {
      if (r.failed) std::cerr << "row " << r.model << "/" << r.algorithm << "/" << r.split
                              << " failed: " << r.error << "\n";
    }
    return 1;
  }
  return 0;
}

/// Reports an existing report instead of recomputing it.
std::optional<int> existing_report(const fs::path& out, const RunConfig& cfg) {
  if (!fs::exists(out / "report.json")) return std::nullopt;
  check_same_run(out / "run_config.ini", cfg);
  std::cout << read_text(out / "report.txt");
  const json j = json::parse(read_text(out / "report.json"));
  for (const auto& r : j.at("rows")) {
    if (r.at("failed").get<bool>()) return 1;
  }
  return 0;
}

const std::vector<std::string> kReportOutputs{"report.json", "report.txt", "speakers",
                                              "run_config.ini"};

int cmd_benchmark(const RunConfig& cfg, std::uint64_t seed, const fs::path& data,
                  const std::vector<std::string>& model_specs,
                  const std::vector<std::string>& speakers,
                  const std::vector<std::string>& splits, int jobs, const fs::path& out,
                  bool force) {
  if (force) clear_outputs(out, kReportOutputs);
  if (auto rc = existing_report(out, cfg)) return *rc;
  const LoadedModels models = load_models(model_specs);
  const Corpus corpus = open_corpus(data);
  clear_outputs(out, kReportOutputs);
  write_text(out / "run_config.ini", cfg.to_text());
  BenchmarkSpec b = bench_spec(cfg, corpus, seed, speakers, splits, jobs, out);
  for (std::size_t i = 0; i < models.labels.size(); ++i) {
    const Checkpoint& ck = models.checkpoints[i];
    b.models.push_back({models.labels[i], &ck, cfg.algorithms_for(ck.config), cfg.cl, ""});
  }
  return finish_report(run_benchmark(corpus, b), out);
}

// ------------------------------------------------------------------- ablate ---

int cmd_ablate(const RunConfig& cfg, std::uint64_t seed, const fs::path& data,
               const std::string& kind, const std::optional<fs::path>& base,
               const std::optional<fs::path>& wide_base, const std::optional<fs::path>& disco,
               const std::vector<std::string>& speakers, const std::vector<std::string>& splits,
               int jobs, const fs::path& out, bool force) {
  AblationSpec a;
  a.kind = kind == "kd_lambda" ? AblationKind::kKdLambda : AblationKind::kRecombination;
  if (!base) throw UsageError("ablate needs --base");
  if (a.kind == AblationKind::kRecombination && (!wide_base || !disco)) {
    throw UsageError("recombination needs --base, --wide-base and --disco");
  }
  if (force) clear_outputs(out, kReportOutputs);
  if (auto rc = existing_report(out, cfg)) return *rc;
  const Corpus corpus = open_corpus(data);
  std::vector<Checkpoint> ck;
  ck.reserve(3);
  ck.push_back(load_checkpoint(*base));
  a.base = &ck.back();
  if (wide_base) {
    ck.push_back(load_checkpoint(*wide_base));
    a.wide_base = &ck.back();
  }
  if (disco) {
    ck.push_back(load_checkpoint(*disco));
    a.disco = &ck.back();
  }
  a.lambdas = cfg.kd_lambda_grid;
  a.cl = cfg.cl;
  clear_outputs(out, kReportOutputs);
  write_text(out / "run_config.ini", cfg.to_text());
  a.bench = bench_spec(cfg, corpus, seed, speakers, splits, jobs, out);
  return finish_report(run_ablations(corpus, a), out);
}

// ------------------------------------------------------------ count-params ---

int cmd_count(const RunConfig& cfg, const std::string& mode, std::optional<int> k,
              const std::string& algorithm) {
  CLOptions opts = cfg.cl;
  if (k) opts.k = {*k, *k, *k};
  if (!algorithm.empty()) {
    Rng rng(0);  // counts do not depend on which groups are drawn
    const CLPlan plan = build_cl_plan(cfg.model, parse_cl_algorithm(algorithm), opts, rng);
    std::printf("preset=%s algorithm=%s cl_params=%lld (%.2fM)\n", cfg.preset.c_str(),
                algorithm.c_str(), static_cast<long long>(plan.num_params),
                plan.num_params / 1e6);
    return 0;
  }
  const CountMode m = mode == "core_only" ? CountMode::kCoreOnly
                      : mode == "full"    ? CountMode::kFull
                                          : CountMode::kDeployed;
  const Index n = count_params(cfg.model, m, opts.k);
  std::printf("preset=%s mode=%s params=%lld (%.2fM)\n", cfg.preset.c_str(), mode.c_str(),
              static_cast<long long>(n), n / 1e6);
  return 0;
}

// ------------------------------------------------------ inspect-checkpoint ---

int cmd_inspect(const fs::path& path, bool show_config) {
  const Checkpoint ck = load_checkpoint(path);
  Index total = 0;
  for (const auto& a : ck.params) total += a.value.numel();
  std::cout << "kind: " << (ck.kind == CheckpointKind::kModel ? "model" : "speaker_delta") << "\n"
            << "config_digest: " << hex(ck.config_digest()) << "\n"
            << "content_digest: " << hex(ck.content_digest()) << "\n"
            << "step: " << ck.step << "\n";
  if (ck.kind == CheckpointKind::kSpeakerDelta) {
    std::cout << "base_digest: " << hex(ck.base_digest) << "\n";
  }
  std::cout << "arrays: " << ck.params.size() << " (" << total << " values)\n"
            << "optimizer: " << (ck.has_optimizer ? "yes" : "no") << "\n";
  const json meta = json::parse(ck.meta);
  if (meta.contains("provenance") && meta["provenance"].contains("run_config_digest")) {
    std::cout << "run_config_digest: "
              << meta["provenance"]["run_config_digest"].get<std::string>() << "\n";
  }
  std::cout << "meta: " << meta.dump(2) << "\n";
  if (show_config) std::cout << "config:\n" << ck.config.canonical_text();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"disco: disentangled continual learning for speech recognition"};
  app.require_subcommand(1);
  const fs::path root = default_output_root();

  bool force = false;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string out, data = (root / "data").string();
  ConfigArgs cfg_args;

  auto common = [&](CLI::App* sub, bool seeded, bool outputs = true) {
    add_config_options(sub, cfg_args);
    if (seeded) sub->add_option("--seed", seed, "Random seed")->required();
    if (outputs) {
      sub->add_option("--out", out, "Output directory");
      sub->add_flag("--force", force, "Replace existing outputs");
    }
  };

  auto* datagen = app.add_subcommand("datagen", "Generate the synthetic speaker corpus");
  common(datagen, true);

  std::int64_t stop_after = -1;
  auto* train_cmd = app.add_subcommand("train", "Pretrain on the original domain");
  common(train_cmd, true);
  train_cmd->add_option("--data", data, "Corpus directory");
  train_cmd->add_option("--stop-after", stop_after, "Stop after this many steps (resumable)");

  std::string model_path, speaker, split, algorithm;
  auto* finetune = app.add_subcommand("finetune", "Continual learning for one speaker");
  common(finetune, true);
  finetune->add_option("--data", data, "Corpus directory");
  finetune->add_option("--model", model_path, "Base model checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  finetune->add_option("--speaker", speaker, "Target speaker")->required();
  finetune->add_option("--split", split, "Nested train split")->required();
  finetune->add_option("--algorithm", algorithm, "CL algorithm")
      ->required()
      ->check(CLI::IsMember({"disentangled_cl", "full_ft", "kd", "full_ft_efficient",
                             "kd_efficient"}));

  std::string delta_path, domain = "speaker", decode = "greedy";
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Decode a split and report WER");
  evaluate_cmd->add_option("--data", data, "Corpus directory");
  evaluate_cmd->add_option("--model", model_path, "Model checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--delta", delta_path, "Speaker delta checkpoint")
      ->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--split", split, "Split tag or nested train split")->required();
  evaluate_cmd->add_option("--speaker", speaker, "Restrict to one speaker");
  evaluate_cmd->add_option("--domain", domain, "Selection for a delta: speaker|original")
      ->check(CLI::IsMember({"speaker", "original"}));
  evaluate_cmd->add_option("--decode", decode, "greedy or beamN");
  evaluate_cmd->add_option("--out", out, "Write the JSON result here");
  evaluate_cmd->add_flag("--force", force, "Replace an existing result");

  std::vector<std::string> models, speakers, splits;
  auto* benchmark = app.add_subcommand("benchmark", "Finetune and evaluate every speaker");
  common(benchmark, true);
  benchmark->add_option("--data", data, "Corpus directory");
  benchmark->add_option("--model", models, "label=checkpoint (repeatable)")->required();
  benchmark->add_option("--speakers", speakers, "Speakers (default: all)")->delimiter(',');
  benchmark->add_option("--splits", splits, "Train splits (default: config or all)")
      ->delimiter(',');
  benchmark->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  std::string kind;
  std::string base_path, wide_path, disco_path;
  auto* ablate = app.add_subcommand("ablate", "KD lambda sweep or core/augment recombination");
  common(ablate, true);
  ablate->add_option("--data", data, "Corpus directory");
  ablate->add_option("--kind", kind, "kd_lambda|recombination")
      ->required()
      ->check(CLI::IsMember({"kd_lambda", "recombination"}));
  ablate->add_option("--base", base_path, "Base checkpoint")->check(CLI::ExistingFile);
  ablate->add_option("--wide-base", wide_path, "Wide Base donor checkpoint")
      ->check(CLI::ExistingFile);
  ablate->add_option("--disco", disco_path, "Disentangled checkpoint")->check(CLI::ExistingFile);
  ablate->add_option("--speakers", speakers, "Speakers (default: all)")->delimiter(',');
  ablate->add_option("--splits", splits, "Train splits")->delimiter(',');
  ablate->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  std::string mode = "deployed";
  std::optional<int> k;
  auto* count = app.add_subcommand("count-params", "Exact parameter counts");
  common(count, false, false);
  count->add_option("--mode", mode, "core_only|deployed|full")
      ->check(CLI::IsMember({"core_only", "deployed", "full"}));
  count->add_option("--k", k, "Augment groups per kind")->check(CLI::NonNegativeNumber);
  count->add_option("--algorithm", algorithm, "Report the CL-trainable count instead")
      ->check(CLI::IsMember({"disentangled_cl", "full_ft", "kd", "full_ft_efficient",
                             "kd_efficient"}));

  bool show_config = false;
  auto* inspect = app.add_subcommand("inspect-checkpoint", "Print checkpoint header and metadata");
  inspect->add_option("path", model_path, "Checkpoint file")->required()->check(CLI::ExistingFile);
  inspect->add_flag("--show-config", show_config, "Print the model config text");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  auto out_or = [&](const fs::path& fallback) { return out.empty() ? fallback : fs::path(out); };
  auto opt_path = [](const std::string& s) {
    return s.empty() ? std::nullopt : std::optional<fs::path>(s);
  };

  try {
    if (inspect->parsed()) return cmd_inspect(model_path, show_config);
    if (evaluate_cmd->parsed()) {
      return cmd_evaluate(data, model_path, opt_path(delta_path), split, speaker, domain, decode,
                          opt_path(out), force);
    }
    const RunConfig cfg = resolve(cfg_args);
    if (count->parsed()) return cmd_count(cfg, mode, k, algorithm);
    if (datagen->parsed()) return cmd_datagen(cfg, seed, out_or(root / "data"), force);
    if (train_cmd->parsed()) {
      return cmd_train(cfg, seed, data, out_or(root / "train" / cfg.preset), force, stop_after);
    }
    if (finetune->parsed()) {
      return cmd_finetune(cfg, seed, data, model_path, speaker, split, algorithm,
                          out_or(root / "finetune" / algorithm / split / speaker), force);
    }
    if (benchmark->parsed()) {
      return cmd_benchmark(cfg, seed, data, models, speakers, splits, jobs,
                           out_or(root / "benchmark"), force);
    }
    if (ablate->parsed()) {
      return cmd_ablate(cfg, seed, data, kind, opt_path(base_path), opt_path(wide_path),
                        opt_path(disco_path), speakers, splits, jobs,
                        out_or(root / "ablate" / kind), force);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << app.help();
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
