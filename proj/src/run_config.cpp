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

#include "disco/run_config.h"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace disco {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

// ------------------------------------------------------ value formatting ---

std::string fmt(int v) { return std::to_string(v); }
std::string fmt(std::int64_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }
std::string fmt(const std::string& v) { return v; }
std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void parse(const std::string& s, int& out) {
  std::size_t pos = 0;
  const long v = std::stol(s, &pos);
  if (pos != s.size() || v < INT32_MIN || v > INT32_MAX) throw std::invalid_argument("int");
  out = static_cast<int>(v);
}
void parse(const std::string& s, std::int64_t& out) {
  std::size_t pos = 0;
  out = std::stoll(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("int");
}
void parse(const std::string& s, double& out) {
  std::size_t pos = 0;
  out = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("float");
}
void parse(const std::string& s, bool& out) {
  if (s == "true" || s == "1" || s == "yes") out = true;
  else if (s == "false" || s == "0" || s == "no") out = false;
  else throw std::invalid_argument("bool");
}
void parse(const std::string& s, std::string& out) { out = s; }

const char* type_name(int) { return "an integer"; }
const char* type_name(std::int64_t) { return "an integer"; }
const char* type_name(double) { return "a number"; }
const char* type_name(bool) { return "a boolean"; }
const char* type_name(const std::string&) { return "a string"; }

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, ',')) {
    const auto b = cur.find_first_not_of(" \t");
    const auto e = cur.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(cur.substr(b, e - b + 1));
  }
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

std::pair<std::string, std::int64_t> named_count(const std::string& item) {
  const auto colon = item.rfind(':');
  if (colon == std::string::npos || colon == 0) throw std::invalid_argument("name:count");
  std::int64_t n = 0;
  parse(item.substr(colon + 1), n);
  return {item.substr(0, colon), n};
}

// ---------------------------------------------------------- field table ---

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
  std::string path() const { return section + "." + key; }
};

template <typename T, typename Access>
Field scalar(const char* section, const char* key, Access access) {
  return {section, key,
          [access](const RunConfig& c) { return fmt(access(const_cast<RunConfig&>(c))); },
          [access, section, key](RunConfig& c, const std::string& s) {
            T v{};
            try {
              parse(s, v);
            } catch (const std::exception&) {
              throw ConfigError(std::string(section) + "." + key + ": expected " + type_name(v) +
                                ", got '" + s + "'");
            }
            access(c) = v;
          }};
}

#define DISCO_FIELD(T, section, key, expr) \
  scalar<T>(section, key, [](RunConfig & c) -> T& { return expr; })

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    // [model]
    f.push_back(DISCO_FIELD(int, "model", "d_model", c.model.d_model));
    f.push_back(DISCO_FIELD(int, "model", "num_layers", c.model.num_layers));
    f.push_back(DISCO_FIELD(int, "model", "output_dim", c.model.output_dim));
    f.push_back(DISCO_FIELD(int, "model", "feature_dim", c.model.feature_dim));
    f.push_back(DISCO_FIELD(int, "model", "time_reduction", c.model.time_reduction));
    f.push_back(DISCO_FIELD(int, "model", "ff_expert_dim", c.model.ff_expert_dim));
    f.push_back(DISCO_FIELD(int, "model", "ff_core_experts", c.model.ff_core_experts));
    f.push_back(DISCO_FIELD(int, "model", "ff_aug_experts", c.model.ff_aug_experts));
    f.push_back(DISCO_FIELD(int, "model", "att_core_heads", c.model.att_core_heads));
    f.push_back(DISCO_FIELD(int, "model", "att_aug_heads", c.model.att_aug_heads));
    f.push_back(DISCO_FIELD(int, "model", "att_head_dim", c.model.att_head_dim));
    f.push_back(DISCO_FIELD(bool, "model", "rel_pos_bias", c.model.rel_pos_bias));
    f.push_back(DISCO_FIELD(int, "model", "rel_pos_max_distance", c.model.rel_pos_max_distance));
    f.push_back(DISCO_FIELD(int, "model", "conv_channels_per_expert",
                            c.model.conv_channels_per_expert));
    f.push_back(DISCO_FIELD(int, "model", "conv_core_experts", c.model.conv_core_experts));
    f.push_back(DISCO_FIELD(int, "model", "conv_aug_experts", c.model.conv_aug_experts));
    f.push_back(DISCO_FIELD(int, "model", "conv_kernel", c.model.conv_kernel));
    f.push_back(DISCO_FIELD(double, "model", "dropout", c.model.dropout));
    f.push_back(DISCO_FIELD(double, "model", "ln_eps", c.model.ln_eps));
    f.push_back(DISCO_FIELD(bool, "model", "macaron_ff", c.model.macaron_ff));
    f.push_back(DISCO_FIELD(bool, "model", "glu_pointwise", c.model.glu_pointwise));
    // [training]
    f.push_back(DISCO_FIELD(std::int64_t, "training", "steps", c.train.loop.steps));
    f.push_back(DISCO_FIELD(int, "training", "batch_size", c.train.loop.batch_size));
    f.push_back(DISCO_FIELD(std::int64_t, "training", "max_batch_frames",
                            c.train.loop.max_batch_frames));
    f.push_back(DISCO_FIELD(double, "training", "lr", c.train.loop.peak_lr));
    f.push_back(DISCO_FIELD(double, "training", "lr_floor", c.train.loop.lr_floor));
    f.push_back(DISCO_FIELD(std::string, "training", "schedule", c.train.loop.schedule));
    f.push_back(DISCO_FIELD(double, "training", "beta1", c.train.loop.adam.beta1));
    f.push_back(DISCO_FIELD(double, "training", "beta2", c.train.loop.adam.beta2));
    f.push_back(DISCO_FIELD(double, "training", "adam_eps", c.train.loop.adam.eps));
    f.push_back(DISCO_FIELD(double, "training", "alpha", c.train.alpha));
    f.push_back(DISCO_FIELD(std::int64_t, "training", "eval_every", c.train.loop.eval_every));
    f.push_back(DISCO_FIELD(bool, "training", "spec_augment", c.train.loop.spec_augment));
    f.push_back(DISCO_FIELD(int, "training", "freq_masks", c.train.loop.augment.freq_masks));
    f.push_back(DISCO_FIELD(int, "training", "freq_width", c.train.loop.augment.freq_width));
    f.push_back(DISCO_FIELD(int, "training", "time_masks", c.train.loop.augment.time_masks));
    f.push_back(DISCO_FIELD(int, "training", "time_width", c.train.loop.augment.time_width));
    f.push_back(DISCO_FIELD(bool, "training", "fixed_width_masks",
                            c.train.loop.augment.fixed_width));
    f.push_back(DISCO_FIELD(bool, "training", "selector_per_layer", c.train.selector.per_layer));
    f.push_back({"training", "selector_ladder",
                 [](const RunConfig& c) {
                   return std::string(c.train.selector.ladder == SizeLadder::kPowersOfTwo
                                          ? "powers_of_two"
                                          : "all");
                 },
                 [](RunConfig& c, const std::string& s) {
                   if (s == "powers_of_two") c.train.selector.ladder = SizeLadder::kPowersOfTwo;
                   else if (s == "all") c.train.selector.ladder = SizeLadder::kAllSizes;
                   else throw ConfigError("training.selector_ladder: expected powers_of_two|all, got '" + s + "'");
                 }});
    f.push_back(DISCO_FIELD(bool, "training", "debug_numerics", c.train.loop.debug_numerics));
    // [cl]
    f.push_back({"cl", "algorithms",
                 [](const RunConfig& c) {
                   if (c.cl_algorithms.empty()) return std::string("auto");
                   std::vector<std::string> names;
                   for (auto a : c.cl_algorithms) names.push_back(cl_algorithm_name(a));
                   return join(names);
                 },
                 [](RunConfig& c, const std::string& s) {
                   c.cl_algorithms.clear();
                   if (s == "auto") return;
                   try {
                     for (const auto& n : split_list(s)) c.cl_algorithms.push_back(parse_cl_algorithm(n));
                   } catch (const std::invalid_argument& e) {
                     throw ConfigError(std::string("cl.algorithms: ") + e.what());
                   }
                 }});
    f.push_back(DISCO_FIELD(int, "cl", "k_ffn", c.cl.k.ff));
    f.push_back(DISCO_FIELD(int, "cl", "k_att", c.cl.k.att));
    f.push_back(DISCO_FIELD(int, "cl", "k_conv", c.cl.k.conv));
    f.push_back(DISCO_FIELD(double, "cl", "kd_lambda", c.cl.kd_lambda));
    f.push_back(DISCO_FIELD(double, "cl", "kd_temperature", c.cl.kd_temperature));
    f.push_back(DISCO_FIELD(int, "cl", "efficient_layers", c.cl.efficient_layers));
    f.push_back(DISCO_FIELD(double, "cl", "lr", c.cl_loop.peak_lr));
    f.push_back(DISCO_FIELD(double, "cl", "lr_floor", c.cl_loop.lr_floor));
    f.push_back(DISCO_FIELD(std::string, "cl", "schedule", c.cl_loop.schedule));
    f.push_back(DISCO_FIELD(double, "cl", "beta1", c.cl_loop.adam.beta1));
    f.push_back(DISCO_FIELD(double, "cl", "beta2", c.cl_loop.adam.beta2));
    f.push_back(DISCO_FIELD(double, "cl", "adam_eps", c.cl_loop.adam.eps));
    f.push_back(DISCO_FIELD(std::int64_t, "cl", "steps", c.cl_loop.steps));
    f.push_back({"cl", "split_steps",
                 [](const RunConfig& c) {
                   std::vector<std::string> items;
                   for (const auto& [k, v] : c.cl_split_steps) items.push_back(k + ":" + std::to_string(v));
                   return join(items);
                 },
                 [](RunConfig& c, const std::string& s) {
                   c.cl_split_steps.clear();
                   try {
                     for (const auto& item : split_list(s)) c.cl_split_steps.insert(named_count(item));
                   } catch (const std::exception&) {
                     throw ConfigError("cl.split_steps: expected split:steps,..., got '" + s + "'");
                   }
                 }});
    f.push_back(DISCO_FIELD(int, "cl", "batch_size", c.cl_loop.batch_size));
    f.push_back(DISCO_FIELD(std::int64_t, "cl", "max_batch_frames", c.cl_loop.max_batch_frames));
    f.push_back(DISCO_FIELD(std::int64_t, "cl", "eval_every", c.cl_loop.eval_every));
    f.push_back(DISCO_FIELD(bool, "cl", "spec_augment", c.cl_loop.spec_augment));
    // [data]
    f.push_back(DISCO_FIELD(int, "data", "original_speakers", c.data.original_speakers));
    f.push_back(DISCO_FIELD(int, "data", "original_train_per_speaker",
                            c.data.original_train_per_speaker));
    f.push_back(DISCO_FIELD(int, "data", "original_dev_per_speaker",
                            c.data.original_dev_per_speaker));
    f.push_back(DISCO_FIELD(int, "data", "original_test_per_speaker",
                            c.data.original_test_per_speaker));
    f.push_back(DISCO_FIELD(int, "data", "target_speakers", c.data.target_speakers));
    f.push_back({"data", "train_splits",
                 [](const RunConfig& c) {
                   std::vector<std::string> items;
                   for (const auto& s : c.data.train_splits) items.push_back(s.name + ":" + std::to_string(s.utterances));
                   return join(items);
                 },
                 [](RunConfig& c, const std::string& s) {
                   c.data.train_splits.clear();
                   try {
                     for (const auto& item : split_list(s)) {
                       const auto [name, n] = named_count(item);
                       c.data.train_splits.push_back({name, static_cast<int>(n)});
                     }
                   } catch (const std::exception&) {
                     throw ConfigError("data.train_splits: expected name:utterances,..., got '" + s + "'");
                   }
                 }});
    f.push_back(DISCO_FIELD(int, "data", "valid_per_speaker", c.data.valid_per_speaker));
    f.push_back(DISCO_FIELD(int, "data", "test_per_speaker", c.data.test_per_speaker));
    f.push_back(DISCO_FIELD(int, "data", "min_words", c.data.min_words));
    f.push_back(DISCO_FIELD(int, "data", "max_words", c.data.max_words));
    f.push_back(DISCO_FIELD(int, "data", "frames_per_symbol", c.data.frames_per_symbol));
    f.push_back(DISCO_FIELD(int, "data", "duration_jitter", c.data.duration_jitter));
    f.push_back(DISCO_FIELD(double, "data", "noise", c.data.noise));
    f.push_back(DISCO_FIELD(double, "data", "shift_strength", c.data.shift_strength));
    f.push_back(DISCO_FIELD(double, "data", "max_duration_stretch", c.data.max_duration_stretch));
    // [eval]
    f.push_back({"eval", "decode",
                 [](const RunConfig& c) {
                   std::vector<std::string> names;
                   for (const auto& d : c.decodes) names.push_back(d.name());
                   return join(names);
                 },
                 [](RunConfig& c, const std::string& s) {
                   c.decodes.clear();
                   try {
                     for (const auto& n : split_list(s)) c.decodes.push_back(DecodeOptions::parse(n));
                   } catch (const std::invalid_argument& e) {
                     throw ConfigError(std::string("eval.decode: ") + e.what());
                   }
                 }});
    f.push_back({"eval", "median",
                 [](const RunConfig& c) {
                   return std::string(c.median == MedianKind::kInterpolated ? "interpolated" : "lower");
                 },
                 [](RunConfig& c, const std::string& s) {
                   if (s == "interpolated") c.median = MedianKind::kInterpolated;
                   else if (s == "lower") c.median = MedianKind::kLower;
                   else throw ConfigError("eval.median: expected interpolated|lower, got '" + s + "'");
                 }});
    f.push_back({"eval", "splits", [](const RunConfig& c) { return join(c.eval_splits); },
                 [](RunConfig& c, const std::string& s) { c.eval_splits = split_list(s); }});
    f.push_back({"eval", "kd_lambda_grid",
                 [](const RunConfig& c) {
                   std::vector<std::string> items;
                   for (double v : c.kd_lambda_grid) items.push_back(fmt(v));
                   return join(items);
                 },
                 [](RunConfig& c, const std::string& s) {
                   c.kd_lambda_grid.clear();
                   for (const auto& item : split_list(s)) {
                     double v = 0;
                     try {
                       parse(item, v);
                     } catch (const std::exception&) {
                       throw ConfigError("eval.kd_lambda_grid: expected numbers, got '" + item + "'");
                     }
                     c.kd_lambda_grid.push_back(v);
                   }
                 }});
    return f;
  }();
  return table;
}

#undef DISCO_FIELD

const Field& field(const std::string& section, const std::string& key) {
  for (const auto& f : fields()) {
    if (f.section == section && f.key == key) return f;
  }
  throw ConfigError("unknown key '" + section + "." + key + "'");
}

void finalize(RunConfig& c) {
  c.data.feature_dim = c.model.feature_dim;
  c.cl_loop.augment = c.train.loop.augment;
}

// Desk-scale architecture shared by the desk presets.
ModelConfig desk_model(const std::string& family, bool disentangled, bool wide = false) {
  ModelConfig m;
  m.d_model = 32;
  m.num_layers = 2;
  m.output_dim = 30;
  m.feature_dim = 16;
  m.time_reduction = 2;
  m.ff_expert_dim = 16;
  m.ff_core_experts = 4;
  m.ff_aug_experts = 0;
  m.att_core_heads = 2;
  m.att_aug_heads = 0;
  m.att_head_dim = 16;
  m.rel_pos_bias = true;
  m.rel_pos_max_distance = 8;
  m.conv_channels_per_expert = 8;
  m.conv_core_experts = 4;
  m.conv_aug_experts = 0;
  m.conv_kernel = 7;
  m.dropout = 0.1;
  if (family == "ff" && disentangled) m.ff_aug_experts = 4;
  if (family == "att" && disentangled) m.att_aug_heads = 2;
  if (family == "conv" && disentangled) m.conv_aug_experts = 4;
  if (family == "conv" && wide) m.conv_core_experts = 8;
  return m;
}

}  // namespace

// --------------------------------------------------------------- presets ---

std::vector<std::string> run_preset_names() {
  std::vector<std::string> names = model_preset_names();
  for (const auto& n : model_preset_names()) names.push_back("desk-" + n);
  names.push_back("desk-base-conv-wide");
  return names;
}

RunConfig run_preset(const std::string& name) {
  RunConfig c;
  c.preset = name;
  const bool desk = name.rfind("desk-", 0) == 0;
  const std::string model_name = desk ? name.substr(5) : name;
  const std::string family = model_name.substr(model_name.find('-') + 1);
  if (desk) {
    if (model_name == "base-conv-wide") {
      c.model = desk_model("conv", false, true);
    } else {
      (void)model_preset(model_name);  // rejects unknown names
      c.model = desk_model(family, model_name.rfind("disco-", 0) == 0);
    }
    c.train.loop.steps = 1000;
    c.train.loop.batch_size = 8;
    c.train.loop.max_batch_frames = 2000;
    c.train.loop.peak_lr = 3e-3;
    c.train.loop.eval_every = 100;
    c.train.loop.augment = {2, 3, 2, 5, false};
    c.cl_loop.peak_lr = 1e-3;
    c.cl_loop.steps = 100;
    c.cl_split_steps = {{"train-10min", 100}, {"train-1hr", 100}, {"train-10hr", 300}};
    c.cl_loop.batch_size = 8;
    c.cl_loop.max_batch_frames = 2000;
    c.cl_loop.eval_every = 25;
    c.cl.k = {2, 2, 3};
    c.cl.efficient_layers = 1;
  } else {
    try {
      c.model = model_preset(model_name);
    } catch (const std::invalid_argument&) {
      throw ConfigError("unknown preset '" + name + "'");
    }
    c.train.loop.steps = 200000;
    c.train.loop.batch_size = 32;
    c.train.loop.max_batch_frames = 32000;  // 320 s at 10 ms frames
    c.train.loop.peak_lr = 4e-4;
    c.train.loop.eval_every = 1000;
    c.train.loop.augment = {2, 27, 2, 100, false};
    c.cl_loop.peak_lr = 1e-4;
    c.cl_loop.steps = 10000;
    c.cl_split_steps = {{"train-1hr", 10000}, {"train-10hr", 30000}};
    c.cl_loop.batch_size = 32;
    c.cl_loop.max_batch_frames = 32000;
    c.cl_loop.eval_every = 500;
    c.cl.k = {2, 2, 12};
    c.cl.efficient_layers = family == "ff" ? 2 : 1;
  }
  c.train.loop.schedule = "pretrain";
  c.train.alpha = 1.0;
  c.cl_loop.schedule = "continual";
  c.cl.kd_lambda = 8.0;
  c.cl.kd_temperature = 1.0;
  finalize(c);
  return c;
}

// ------------------------------------------------------------ RunConfig ---

std::string RunConfig::to_text() const {
  std::ostringstream os;
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      os << (section.empty() ? "" : "\n") << '[' << f.section << "]\n";
      section = f.section;
      if (section == "model") os << "preset = " << preset << '\n';
    }
    os << f.key << " = " << f.get(*this) << '\n';
  }
  return os.str();
}

std::uint64_t RunConfig::digest() const { return fnv1a(to_text()); }

std::vector<CLAlgorithm> RunConfig::algorithms_for(const ModelConfig& m) const {
  if (!cl_algorithms.empty()) return cl_algorithms;
  if (m.has_augment()) return {CLAlgorithm::kDisentangledCL};
  return {CLAlgorithm::kFullFT, CLAlgorithm::kKD, CLAlgorithm::kFullFTEfficient,
          CLAlgorithm::kKDEfficient};
}

void RunConfig::validate() const {
  try {
    model.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  try {
    data.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("data: ") + e.what());
  }
  auto check_k = [&](const char* key, int k, int n_a) {
    if (k < 0) throw ConfigError(std::string("cl.") + key + " must be >= 0");
    if (n_a > 0 && k > n_a) {
      throw ConfigError(std::string("cl.") + key + "=" + std::to_string(k) + " exceeds the " +
                        std::to_string(n_a) + " augment groups of the model");
    }
  };
  check_k("k_ffn", cl.k.ff, model.ff_aug_experts);
  check_k("k_att", cl.k.att, model.att_aug_heads);
  check_k("k_conv", cl.k.conv, model.conv_aug_experts);
  if (cl.efficient_layers < 1 || cl.efficient_layers > model.num_layers) {
    throw ConfigError("cl.efficient_layers must be in [1, model.num_layers]");
  }
  if (!(cl.kd_temperature > 0)) throw ConfigError("cl.kd_temperature must be > 0");
  if (!(cl.kd_lambda >= 0)) throw ConfigError("cl.kd_lambda must be >= 0");
  if (!(train.alpha >= 0)) throw ConfigError("training.alpha must be >= 0");
  auto check_loop = [](const LoopConfig& l, const std::string& s) {
    if (l.steps < 1) throw ConfigError(s + ".steps must be >= 1");
    if (l.batch_size < 1) throw ConfigError(s + ".batch_size must be >= 1");
    if (l.max_batch_frames < 1) throw ConfigError(s + ".max_batch_frames must be >= 1");
    if (l.eval_every < 1) throw ConfigError(s + ".eval_every must be >= 1");
    if (!(l.peak_lr > 0)) throw ConfigError(s + ".lr must be > 0");
    if (!(l.lr_floor >= 0 && l.lr_floor <= 1)) throw ConfigError(s + ".lr_floor must be in [0, 1]");
    if (!(l.adam.beta1 >= 0 && l.adam.beta1 < 1)) throw ConfigError(s + ".beta1 must be in [0, 1)");
    if (!(l.adam.beta2 >= 0 && l.adam.beta2 < 1)) throw ConfigError(s + ".beta2 must be in [0, 1)");
    if (!(l.adam.eps > 0)) throw ConfigError(s + ".adam_eps must be > 0");
    try {
      ScheduleSpec::named(l.schedule, l.steps, l.lr_floor).validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(s + ".schedule: " + e.what());
    }
  };
  check_loop(train.loop, "training");
  check_loop(cl_loop, "cl");
  const auto& a = train.loop.augment;
  if (a.freq_masks < 0 || a.freq_width < 0 || a.time_masks < 0 || a.time_width < 0) {
    throw ConfigError("training mask counts and widths must be >= 0");
  }
  for (const auto& [split, steps] : cl_split_steps) {
    if (steps < 1) throw ConfigError("cl.split_steps: " + split + " must be >= 1");
  }
  if (decodes.empty()) throw ConfigError("eval.decode must list at least one mode");
  if (kd_lambda_grid.empty()) throw ConfigError("eval.kd_lambda_grid must not be empty");
}

// --------------------------------------------------------------- loading ---

RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides,
                       const std::string& preset) {
  pt::ptree tree;
  try {
    std::istringstream is(text);
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.message() + " (line " +
                      std::to_string(e.line()) + ")");
  }
  std::vector<std::pair<std::string, std::string>> parsed;
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    const auto dot = o.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw ConfigError("override '" + o + "' is not section.key=value");
    }
    parsed.emplace_back(o.substr(0, eq), o.substr(eq + 1));
  }

  std::string name = "disco-ff";
  if (auto p = tree.get_optional<std::string>("model.preset")) name = *p;
  if (!preset.empty()) name = preset;
  for (const auto& [path, value] : parsed) {
    if (path == "model.preset") name = value;
  }
  RunConfig c = run_preset(name);

  for (const auto& [section, node] : tree) {
    if (node.empty()) {
      throw ConfigError("key '" + section + "' is outside a section");
    }
    for (const auto& [key, value] : node) {
      if (section == "model" && key == "preset") continue;
      field(section, key).set(c, value.data());
    }
  }
  for (const auto& [path, value] : parsed) {
    if (path == "model.preset") continue;
    const auto dot = path.find('.');
    field(path.substr(0, dot), path.substr(dot + 1)).set(c, value);
  }
  finalize(c);
  c.validate();
  return c;
}

RunConfig load_config(const fs::path& path, const std::vector<std::string>& overrides,
                      const std::string& preset) {
  std::string text;
  if (!path.empty()) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config file not found: " + path.string());
    std::ostringstream os;
    os << is.rdbuf();
    text = os.str();
  }
  return parse_config(text, overrides, preset);
}

fs::path default_output_root() {
  if (const char* root = std::getenv("DISCO_OUTPUT_ROOT"); root && *root) return root;
  return "disco_out";
}

}  // namespace disco
