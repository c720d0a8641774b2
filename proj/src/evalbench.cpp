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

#include "disco/evalbench.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "disco/ctc.h"
#include "disco/ops.h"

namespace disco {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string DecodeOptions::name() const {
  return mode == DecodeMode::kGreedy ? "greedy" : "beam" + std::to_string(beam);
}

DecodeOptions DecodeOptions::parse(const std::string& text) {
  if (text == "greedy") return {};
  if (text.rfind("beam", 0) == 0) {
    DecodeOptions d;
    d.mode = DecodeMode::kBeam;
    try {
      d.beam = text.size() > 4 ? std::stoi(text.substr(4)) : 8;
    } catch (const std::exception&) {
      throw std::invalid_argument("bad decode mode '" + text + "'");
    }
    if (d.beam < 1) throw std::invalid_argument("beam width must be >= 1");
    return d;
  }
  throw std::invalid_argument("unknown decode mode '" + text + "' (greedy|beam<N>)");
}

// -------------------------------------------------------------- evaluate ---

EvalResult evaluate(const Emitter& emit, const std::vector<const Utterance*>& utterances,
                    const DecodeOptions& decode) {
  if (utterances.empty()) throw std::invalid_argument("evaluate: empty split");
  const Vocabulary& vocab = Vocabulary::standard();
  EvalResult r;
  double loss_sum = 0.0;
  for (const Utterance* u : utterances) {
    const Tensor<float> lp = emit(*u);
    const LabelSequence labels = decode.mode == DecodeMode::kGreedy
                                     ? ctc_greedy_decode(lp)
                                     : ctc_beam_decode(lp, decode.beam);
    UtteranceResult ur;
    ur.id = u->id;
    ur.hypothesis = vocab.decode(labels);
    const auto ref = split_words(u->transcript);
    ur.errors = edit_distance(split_words(ur.hypothesis), ref);
    ur.words = ref.size();
    try {
      ur.loss = ctc_loss_value(lp, vocab.encode(u->transcript));
    } catch (const CtcInfeasibleError&) {
      ur.loss = std::numeric_limits<double>::infinity();
    }
    r.errors += ur.errors;
    r.words += ur.words;
    loss_sum += ur.loss;
    r.utterances.push_back(std::move(ur));
  }
  if (r.words == 0) throw std::invalid_argument("evaluate: split has no reference words");
  r.wer = static_cast<double>(r.errors) / static_cast<double>(r.words);
  r.mean_loss = loss_sum / static_cast<double>(utterances.size());
  return r;
}

EvalResult evaluate(const DisConformer<float>& model, const Selection& selection,
                    const std::vector<const Utterance*>& utterances, const DecodeOptions& decode) {
  return evaluate(
      [&](const Utterance& u) {
        Tape<float> tape;
        return log_softmax(tape.constant(model.infer(u.features, selection))).value();
      },
      utterances, decode);
}

double speaker_aggregate(const std::vector<double>& wers, MedianKind kind) {
  if (wers.empty()) throw std::invalid_argument("speaker_aggregate: empty list");
  std::vector<double> v = wers;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  if (kind == MedianKind::kLower) return v[n / 2 - 1];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------- report ---

bool BenchmarkReport::ok() const {
  return std::none_of(rows.begin(), rows.end(), [](const BenchmarkRow& r) { return r.failed; });
}

const BenchmarkRow* BenchmarkReport::find(const std::string& model, const std::string& algorithm,
                                          const std::string& split, const std::string& tag) const {
  for (const auto& r : rows) {
    if (r.model == model && r.algorithm == algorithm && r.split == split && r.tag == tag) return &r;
  }
  return nullptr;
}

std::string BenchmarkReport::to_json() const {
  json j;
  j["format_version"] = 1;
  j["seed"] = seed;
  j["median"] = median;
  j["run_config_digest"] = digest_hex(fnv1a(run_config));
  j["run_config"] = run_config;
  json rs = json::array();
  for (const auto& r : rows) {
    json jr;
    jr["model"] = r.model;
    jr["algorithm"] = r.algorithm;
    jr["split"] = r.split;
    jr["decode"] = r.decode;
    if (!r.tag.empty()) jr["tag"] = r.tag;
    jr["cl_params"] = r.cl_params;
    jr["config_digest"] = r.config_digest;
    jr["seed"] = r.seed;
    jr["failed"] = r.failed;
    if (r.failed) {
      jr["error"] = r.error;
    } else {
      jr["wer_lc"] = r.wer_lc;
      jr["wer_orig"] = r.wer_orig;
      jr["loss_orig"] = r.loss_orig;
    }
    json sp = json::array();
    for (const auto& s : r.speakers) {
      sp.push_back({{"speaker", s.speaker},
                    {"wer", s.wer},
                    {"wer_orig", s.wer_orig},
                    {"loss_orig", s.loss_orig},
                    {"errors", s.errors},
                    {"words", s.words},
                    {"best_step", s.best_step},
                    {"checkpoint_digest", s.checkpoint_digest}});
    }
    jr["speakers"] = std::move(sp);
    rs.push_back(std::move(jr));
  }
  j["rows"] = std::move(rs);
  return j.dump(2) + "\n";
}

std::string BenchmarkReport::to_table() const {
  std::vector<std::vector<std::string>> cells{
      {"Model", "CL algorithm", "Split", "Decode", "Tag", "#CL-Params", "WER_LC", "WER_orig"}};
  char buf[64];
  auto pct = [&buf](double v) {
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.3fM", static_cast<double>(r.cl_params) / 1e6);
    std::string params = buf;
    cells.push_back({r.model, r.algorithm, r.split, r.decode, r.tag.empty() ? "-" : r.tag, params,
                     r.failed ? "FAILED" : pct(r.wer_lc), r.failed ? "FAILED" : pct(r.wer_orig)});
  }
  std::vector<std::size_t> width(cells[0].size(), 0);
  for (const auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::ostringstream os;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (std::size_t c = 0; c < cells[i].size(); ++c) {
      os << cells[i][c] << std::string(width[c] - cells[i][c].size(), ' ');
      os << (c + 1 == cells[i].size() ? "\n" : "  ");
    }
    if (i == 0) {
      for (std::size_t c = 0; c < width.size(); ++c) {
        os << std::string(width[c], '-') << (c + 1 == width.size() ? "\n" : "  ");
      }
    }
  }
  for (const auto& r : rows) {
    if (r.failed) os << "FAILED " << r.model << "/" << r.algorithm << "/" << r.split << ": " << r.error << "\n";
  }
  return os.str();
}

// ------------------------------------------------------------- benchmark ---

namespace {

struct Cell {
  std::size_t model = 0;
  std::optional<CLAlgorithm> algorithm;  // nullopt: no finetuning
  std::string split;
  std::string speaker;
};

struct CellResult {
  std::vector<SpeakerResult> per_decode;
  Index cl_params = 0;
  std::string error;
};

CellResult run_cell(const Corpus& corpus, const BenchmarkSpec& spec, const Cell& cell) {
  const ModelEntry& entry = spec.models[cell.model];
  const Checkpoint& base = *entry.checkpoint;
  CellResult out;
  std::optional<DisConformer<float>> model;
  Selection speaker_sel, orig_sel;
  SpeakerResult proto;
  proto.speaker = cell.speaker;
  if (!cell.algorithm) {
    model.emplace(model_from(base));
    speaker_sel = orig_sel = Selection::core_only(base.config);
    proto.checkpoint_digest = digest_hex(base.content_digest());
  } else {
    const std::uint64_t s = fnv1a(cell.speaker), t = fnv1a(cell.split);
    Rng plan_rng(derive_seed(spec.seed, {s, t}, "plan"));
    const CLPlan plan = build_cl_plan(base.config, *cell.algorithm, entry.cl, plan_rng);
    LoopConfig loop = spec.loop;
    if (auto it = spec.steps.find(cell.split); it != spec.steps.end()) loop.steps = it->second;
    loop.seed = derive_seed(spec.seed, {s, t}, "finetune");
    FinetuneResult fr = run_finetune(base, plan, corpus, cell.speaker, cell.split, loop);
    if (spec.provenance != "{}") {
      json meta = json::parse(fr.speaker.meta);
      meta["provenance"] = json::parse(spec.provenance);
      fr.speaker.meta = meta.dump();
    }
    if (spec.out_dir) {
      std::string name = entry.label;
      if (!entry.tag.empty()) name += "_" + entry.tag;
      save_checkpoint(fr.speaker, *spec.out_dir / "speakers" / name /
                                      cl_algorithm_name(*cell.algorithm) / cell.split /
                                      (cell.speaker + ".ckpt"));
    }
    model.emplace(apply_delta(base, fr.speaker));
    speaker_sel = plan.selection(base.config, InferenceDomain::kSpeaker);
    orig_sel = plan.selection(base.config, InferenceDomain::kOriginal);
    proto.best_step = fr.loop.best_step;
    proto.checkpoint_digest = digest_hex(fr.speaker.content_digest());
    out.cl_params = plan.num_params;
  }
  const auto test = corpus.with_tag(kTest, cell.speaker);
  const auto orig = corpus.with_tag(kOrigTest);
  for (const DecodeOptions& d : spec.decodes) {
    SpeakerResult r = proto;
    const EvalResult e = evaluate(*model, speaker_sel, test, d);
    const EvalResult o = evaluate(*model, orig_sel, orig, d);
    r.wer = e.wer;
    r.errors = e.errors;
    r.words = e.words;
    r.wer_orig = o.wer;
    r.loss_orig = o.mean_loss;
    out.per_decode.push_back(std::move(r));
  }
  return out;
}

}  // namespace

BenchmarkReport run_benchmark(const Corpus& corpus, const BenchmarkSpec& spec) {
  if (spec.models.empty()) throw std::invalid_argument("benchmark needs at least one model");
  if (spec.decodes.empty()) throw std::invalid_argument("benchmark needs a decode mode");
  std::vector<std::string> speakers = spec.speakers.empty() ? corpus.target_speakers() : spec.speakers;
  std::sort(speakers.begin(), speakers.end());
  speakers.erase(std::unique(speakers.begin(), speakers.end()), speakers.end());
  if (speakers.empty()) throw std::invalid_argument("benchmark has no speakers");
  for (const auto& split : spec.splits) {
    if (corpus.split_rank(split) < 0) throw std::invalid_argument("unknown train split '" + split + "'");
  }
  for (const auto& m : spec.models) {
    if (!m.checkpoint) throw std::invalid_argument("model " + m.label + " has no checkpoint");
  }

  // Rows in report order; each row owns one cell per speaker.
  struct RowKey {
    std::size_t model;
    std::optional<CLAlgorithm> algorithm;
    std::string split;
  };
  std::vector<RowKey> keys;
  for (std::size_t m = 0; m < spec.models.size(); ++m) {
    if (spec.zero_hour_rows) keys.push_back({m, std::nullopt, "0hr"});
    for (CLAlgorithm a : spec.models[m].algorithms)
      for (const auto& split : spec.splits) keys.push_back({m, a, split});
  }
  std::vector<Cell> cells;
  for (const auto& k : keys)
    for (const auto& spk : speakers) cells.push_back({k.model, k.algorithm, k.split, spk});

  std::vector<CellResult> results(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < cells.size();) {
      try {
        results[i] = run_cell(corpus, spec, cells[i]);
      } catch (const std::exception& e) {
        results[i].error = cells[i].speaker + ": " + e.what();
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(spec.jobs, static_cast<int>(cells.size())));
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  BenchmarkReport report;
  report.run_config = spec.run_config;
  report.seed = spec.seed;
  report.median = spec.median == MedianKind::kInterpolated ? "interpolated" : "lower";
  std::size_t c = 0;
  for (const auto& k : keys) {
    const ModelEntry& entry = spec.models[k.model];
    const std::size_t first = c;
    c += speakers.size();
    for (std::size_t d = 0; d < spec.decodes.size(); ++d) {
      BenchmarkRow row;
      row.model = entry.label;
      row.algorithm = k.algorithm ? cl_algorithm_name(*k.algorithm) : "none";
      row.split = k.split;
      row.decode = spec.decodes[d].name();
      row.tag = entry.tag;
      row.config_digest = digest_hex(entry.checkpoint->config_digest());
      row.seed = spec.seed;
      std::vector<double> wers, origs, losses;
      for (std::size_t i = first; i < c; ++i) {
        const CellResult& r = results[i];
        if (!r.error.empty()) {
          row.failed = true;
          row.error += (row.error.empty() ? "" : "; ") + r.error;
          continue;
        }
        row.cl_params = r.cl_params;
        row.speakers.push_back(r.per_decode[d]);
        wers.push_back(r.per_decode[d].wer);
        origs.push_back(r.per_decode[d].wer_orig);
        losses.push_back(r.per_decode[d].loss_orig);
      }
      if (!row.failed) {
        row.wer_lc = speaker_aggregate(wers, spec.median);
        row.wer_orig = speaker_aggregate(origs, spec.median);
        row.loss_orig = speaker_aggregate(losses, spec.median);
      }
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

// ------------------------------------------------------------- ablations ---

BenchmarkReport run_ablations(const Corpus& corpus, const AblationSpec& spec) {
  BenchmarkSpec bench = spec.bench;
  bench.zero_hour_rows = false;
  std::vector<Checkpoint> owned;
  if (spec.kind == AblationKind::kKdLambda) {
    if (spec.lambdas.empty()) throw std::invalid_argument("kd_lambda grid is empty");
    if (!spec.base) throw std::invalid_argument("kd_lambda ablation needs a base checkpoint");
    bench.models.clear();
    ModelEntry ft{"base", spec.base, {CLAlgorithm::kFullFT}, spec.cl, ""};
    bench.models.push_back(ft);
    for (double lambda : spec.lambdas) {
      ModelEntry e{"base", spec.base, {CLAlgorithm::kKD}, spec.cl, ""};
      e.cl.kd_lambda = lambda;
      char buf[48];
      std::snprintf(buf, sizeof buf, "kd_lambda=%g", lambda);
      e.tag = buf;
      bench.models.push_back(e);
    }
    return run_benchmark(corpus, bench);
  }
  if (!spec.base || !spec.wide_base || !spec.disco) {
    throw std::invalid_argument("recombination ablation needs base, wide_base and disco checkpoints");
  }
  const ModelConfig& target = spec.disco->config;
  const std::uint64_t rs = derive_seed(spec.bench.seed, {}, "recombine");
  owned.reserve(3);
  owned.push_back(snapshot(recombine({spec.base, 0}, {nullptr, rs}, target)));
  owned.push_back(snapshot(recombine({spec.wide_base, 0}, {spec.wide_base, 0}, target)));
  owned.push_back(snapshot(recombine({spec.disco, 0}, {nullptr, rs}, target)));
  const std::vector<CLAlgorithm> dcl{CLAlgorithm::kDisentangledCL};
  bench.models = {{"base+random", &owned[0], dcl, spec.cl, ""},
                  {"base+base", &owned[1], dcl, spec.cl, ""},
                  {"disco-core+random", &owned[2], dcl, spec.cl, ""},
                  {"disco+disco", spec.disco, dcl, spec.cl, ""}};
  return run_benchmark(corpus, bench);
}

}  // namespace disco
