// Copyright 2026 The SegSAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "segsat/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "segsat/error.hpp"
#include "segsat/segmenter.hpp"

namespace segsat {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename Int>
Int parse_int(std::string_view key, std::string_view v) {
  Int out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("'" + std::string(key) + "' expects a non-negative integer, got '" + std::string(v) + "'");
  }
  return out;
}

double parse_real(std::string_view key, std::string_view v) {
  try {
    std::size_t used = 0;
    const std::string s(v);
    const double d = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("'" + std::string(key) + "' expects a number, got '" + std::string(v) + "'");
  }
}

std::string real(double d) {
  std::ostringstream os;
  os.precision(17);
  os << d;
  return os.str();
}

}  // namespace

RunConfig default_run_config() {
  RunConfig c;
  c.model.d_model = 278;
  c.model.d_hidden = 507;
  c.model.n_layer = 5;
  c.model.n_head = 2;
  c.model.p_dropout = 0.1;
  c.model.eps_ls = 0.15;
  return c;
}

double RunConfig::p_at(std::size_t step) const {
  if (p_schedule == PSchedule::kConstant) return p;
  return anneal_p(step == 0 ? 0 : step - 1, total_steps);
}

LrConfig RunConfig::lr_config() const {
  LrConfig lr;
  lr.mode = lr_mode;
  lr.d_model = model.d_model;
  lr.warmup_steps = lr_warmup_steps;
  lr.linear_start = lr_start;
  lr.linear_end = lr_end;
  lr.total_steps = total_steps;
  return lr;
}

void RunConfig::validate() const {
  model.validate();
  if (k < 1) throw ConfigError("train.k must be >= 1");
  if (k > model.max_segments) throw ConfigError("train.k exceeds model.max_segments");
  if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("train.q must lie in [0, 1]");
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("train.p must lie in [0, 1]");
  if (total_steps < 1) throw ConfigError("train.total_steps must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (min_freq < 1) throw ConfigError("prepare.min_freq must be >= 1");
  if (max_vocab < 6) throw ConfigError("prepare.max_vocab must be >= 6");
}

void RunConfig::set(std::string_view key, std::string_view raw) {
  const std::string_view v = trim(raw);
  if (key.starts_with("model.")) {
    model.set(key.substr(6), v);
    return;
  }
  if (key == "train.k") k = parse_int<std::size_t>(key, v);
  else if (key == "train.q") q = parse_real(key, v);
  else if (key == "train.p_schedule") {
    if (v == "anneal") p_schedule = PSchedule::kAnneal;
    else if (v == "constant") p_schedule = PSchedule::kConstant;
    else throw ConfigError("train.p_schedule must be 'anneal' or 'constant'");
  } else if (key == "train.p") p = parse_real(key, v);
  else if (key == "train.total_steps") total_steps = parse_int<std::size_t>(key, v);
  else if (key == "train.batch_size") batch_size = parse_int<std::size_t>(key, v);
  else if (key == "train.seed") seed = parse_int<std::uint64_t>(key, v);
  else if (key == "train.lr_mode") {
    if (v == "warmup") lr_mode = LrMode::kWarmup;
    else if (v == "linear") lr_mode = LrMode::kLinear;
    else throw ConfigError("train.lr_mode must be 'warmup' or 'linear'");
  } else if (key == "train.lr_warmup_steps") lr_warmup_steps = parse_int<std::size_t>(key, v);
  else if (key == "train.lr_start") lr_start = parse_real(key, v);
  else if (key == "train.lr_end") lr_end = parse_real(key, v);
  else if (key == "train.log_every") log_every = parse_int<std::size_t>(key, v);
  else if (key == "train.checkpoint_every") checkpoint_every = parse_int<std::size_t>(key, v);
  else if (key == "train.init_encoder") init_encoder = std::string(v);
  else if (key == "train.dump_plans") dump_plans = std::string(v);
  else if (key == "prepare.min_freq") min_freq = parse_int<std::size_t>(key, v);
  else if (key == "prepare.max_vocab") max_vocab = parse_int<std::size_t>(key, v);
  else if (key == "data.train_src") train_src = std::string(v);
  else if (key == "data.train_tgt") train_tgt = std::string(v);
  else if (key == "data.valid_src") valid_src = std::string(v);
  else if (key == "data.valid_tgt") valid_tgt = std::string(v);
  else if (key == "data.vocab") vocab = std::string(v);
  else if (key == "data.train_cache") train_cache = std::string(v);
  else if (key == "data.checkpoint_dir") checkpoint_dir = std::string(v);
  else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  std::istringstream model_lines(model.to_text());
  for (std::string line; std::getline(model_lines, line);) os << "model." << line << '\n';
  os << "train.k=" << k << '\n'
     << "train.q=" << real(q) << '\n'
     << "train.p_schedule=" << (p_schedule == PSchedule::kAnneal ? "anneal" : "constant") << '\n'
     << "train.p=" << real(p) << '\n'
     << "train.total_steps=" << total_steps << '\n'
     << "train.batch_size=" << batch_size << '\n'
     << "train.seed=" << seed << '\n'
     << "train.lr_mode=" << (lr_mode == LrMode::kWarmup ? "warmup" : "linear") << '\n'
     << "train.lr_warmup_steps=" << lr_warmup_steps << '\n'
     << "train.lr_start=" << real(lr_start) << '\n'
     << "train.lr_end=" << real(lr_end) << '\n'
     << "train.log_every=" << log_every << '\n'
     << "train.checkpoint_every=" << checkpoint_every << '\n'
     << "train.init_encoder=" << init_encoder << '\n'
     << "train.dump_plans=" << dump_plans << '\n'
     << "prepare.min_freq=" << min_freq << '\n'
     << "prepare.max_vocab=" << max_vocab << '\n'
     << "data.train_src=" << train_src << '\n'
     << "data.train_tgt=" << train_tgt << '\n'
     << "data.valid_src=" << valid_src << '\n'
     << "data.valid_tgt=" << valid_tgt << '\n'
     << "data.vocab=" << vocab << '\n'
     << "data.train_cache=" << train_cache << '\n'
     << "data.checkpoint_dir=" << checkpoint_dir << '\n';
  return os.str();
}

RunConfig RunConfig::from_text(std::string_view text) {
  RunConfig c = default_run_config();
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + " is not key=value");
    }
    c.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

RunConfig resolve_run_config(const std::string& config_path, const std::vector<std::string>& overrides) {
  RunConfig c = config_path.empty() ? default_run_config() : RunConfig::from_file(config_path);
  if (const char* env = std::getenv("SEGSAT_SEED"); env && *env) c.set("train.seed", env);
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
    c.set(trim(std::string_view(o).substr(0, eq)), std::string_view(o).substr(eq + 1));
  }
  return c;
}

}  // namespace segsat
