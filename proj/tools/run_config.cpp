#include "run_config.hpp"

#include <algorithm>
#include <fstream>

#include "esdf/attribution.hpp"
#include "esdf/errors.hpp"
#include "text_format.hpp"

namespace esdf::cli {

namespace {

std::string join_u32(const std::vector<std::uint32_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out.empty() ? "none" : out;
}

std::vector<KeySpec> build_keys() {
  const WorldOptions w;
  const SlotConfig s;
  const TrainConfig t;
  using text::fmt;
  return {
      // slots
      {"max_delay_days", std::to_string(s.max_delay_days), "last whole-day slot T"},
      {"seconds_per_slot", std::to_string(s.seconds_per_slot), "slot width"},
      // world
      {"world_seed", std::to_string(w.world_seed), "seed of the generating weights"},
      {"field_sizes", join_u32(w.field_sizes), "vocabulary size per field"},
      {"request_fields", std::to_string(w.request_fields), "leading per-request fields"},
      {"impressions_per_request", std::to_string(w.impressions_per_request), ""},
      {"zipf_exponent", fmt(w.zipf_exponent), "feature popularity skew"},
      {"delay_field", std::to_string(w.delay_field), "field driving conversion speed"},
      {"ctr_bias", fmt(w.ctr_bias), ""},
      {"ctr_scale", fmt(w.ctr_scale), ""},
      {"cvr_bias", fmt(w.cvr_bias), ""},
      {"cvr_scale", fmt(w.cvr_scale), ""},
      {"speed_scale", fmt(w.speed_scale), ""},
      {"speed_cvr_coupling", fmt(w.speed_cvr_coupling), ""},
      {"late_bump", fmt(w.late_bump), ""},
      {"late_bump_min_slot", std::to_string(w.late_bump_min_slot), ""},
      {"overflow_bias", fmt(w.overflow_bias), ""},
      {"delay_noise", fmt(w.delay_noise), ""},
      {"day1_mass_target", fmt(w.day1_mass_target), "share of conversions in slot 0"},
      // sampling
      {"n", "", "impressions to generate"},
      {"seed", "0", "sampling seed"},
      {"first_sample_id", "0", ""},
      {"start_day", "0", "first impression day"},
      {"span_days", "1", "days covered by impressions"},
      {"log_out", "events.tsv", "event log to write"},
      {"truth_out", "truth.tsv", "ground truth to write"},
      // labeling
      {"log", "", "event log to read"},
      {"policy", "full_censored", "labeling policy"},
      {"observe_day", "", "observation time in days"},
      {"window_days", "7", "attribution window of ground-truth labels"},
      {"snapshot_out", "snapshot.tsv", "snapshot to write"},
      // training
      {"objective", objective_name(t.objective), "esdf, esmm, naive, shift or dfm"},
      {"learning_rate", fmt(t.learning_rate), ""},
      {"batch_size", std::to_string(t.batch_size), ""},
      {"epochs", std::to_string(t.epochs), ""},
      {"train_seed", std::to_string(t.seed), "initialization and shuffle seed"},
      {"em_steps_per_estep", std::to_string(t.em_steps_per_estep), ""},
      {"estep_mode", "minibatch", "minibatch or fullbatch"},
      {"emb_dim", std::to_string(t.emb_dim), ""},
      {"hidden", join_u32(t.hidden), "hidden widths, or none"},
      {"delay_uses_elapsed", t.delay_uses_elapsed ? "1" : "0", ""},
      {"grad_check_coords", std::to_string(t.grad_check_coords), "0 disables"},
      {"eval_log", "none", "held-out log scored after each epoch"},
      {"checkpoint_out", "model.ckpt", ""},
      {"history_out", "history.tsv", ""},
      // evaluation
      {"checkpoint", "", "checkpoint to score"},
      {"truth", "none", "ground truth aligned with the log"},
      {"report_out", "report.tsv", ""},
      // report
      {"inputs", "", "comma-separated eval reports"},
      {"out_dir", ".", "directory for comparison files"},
  };
}

const std::vector<std::string> kSlotKeys{"max_delay_days", "seconds_per_slot"};
const std::vector<std::string> kWorldKeys{
    "world_seed",  "field_sizes",  "request_fields",    "impressions_per_request",
    "zipf_exponent", "delay_field", "ctr_bias",         "ctr_scale",
    "cvr_bias",    "cvr_scale",    "speed_scale",       "speed_cvr_coupling",
    "late_bump",   "late_bump_min_slot", "overflow_bias", "delay_noise",
    "day1_mass_target"};
const std::vector<std::string> kTrainKeys{
    "objective", "policy",     "learning_rate", "batch_size",
    "epochs",    "train_seed", "em_steps_per_estep", "estep_mode",
    "emb_dim",   "hidden",     "delay_uses_elapsed", "grad_check_coords"};

std::vector<std::string> concat(std::initializer_list<std::vector<std::string>> parts) {
  std::vector<std::string> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_value(const std::string& key, const std::string& v) {
  try {
    return text::parse<T>(v, 0, key);
  } catch (const InputError&) {
    throw ConfigError("bad value '" + v + "' for " + key);
  }
}

}  // namespace

const std::vector<KeySpec>& all_keys() {
  static const std::vector<KeySpec> keys = build_keys();
  return keys;
}

const KeySpec& key_spec(const std::string& key) {
  for (const auto& k : all_keys()) {
    if (k.key == key) return k;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

std::vector<std::string> command_keys(const std::string& command) {
  if (command == "generate") {
    return concat({{"n", "seed", "first_sample_id", "start_day", "span_days"},
                   kWorldKeys, kSlotKeys, {"log_out", "truth_out"}});
  }
  if (command == "snapshot") {
    return concat({{"log", "policy", "observe_day"}, kSlotKeys, {"snapshot_out"}});
  }
  if (command == "train") {
    return concat({{"log", "observe_day"}, kTrainKeys, kSlotKeys,
                   {"eval_log", "window_days", "checkpoint_out", "history_out"}});
  }
  if (command == "evaluate") {
    return concat({{"checkpoint", "log", "truth", "objective", "window_days"},
                   kSlotKeys, {"report_out"}});
  }
  if (command == "report") return {"inputs", "out_dir"};
  throw ConfigError("unknown subcommand '" + command + "'");
}

RunConfig::RunConfig(std::string command, std::vector<std::string> keys)
    : command_(std::move(command)), keys_(std::move(keys)) {
  for (const auto& k : keys_) {
    const auto& spec = key_spec(k);
    if (!spec.default_value.empty()) values_[k] = spec.default_value;
  }
}

void RunConfig::apply_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    key_spec(key);
    if (std::find(keys_.begin(), keys_.end(), key) != keys_.end()) set(key, value);
  }
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (std::find(keys_.begin(), keys_.end(), key) == keys_.end()) {
    throw ConfigError("key '" + key + "' does not apply to " + command_);
  }
  if (value.empty() || value.find_first_of(" \t\n") != std::string::npos) {
    throw ConfigError("value of " + key + " must be non-empty without whitespace");
  }
  values_[key] = value;
}

void RunConfig::require_complete() const {
  for (const auto& k : keys_) {
    if (!values_.count(k)) throw UsageError(command_ + ": --" + k + " is required");
  }
}

bool RunConfig::has(const std::string& key) const { return values_.count(key) > 0; }

const std::string& RunConfig::str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw UsageError(command_ + ": --" + key + " is required");
  return it->second;
}

double RunConfig::num(const std::string& key) const {
  return parse_value<double>(key, str(key));
}

std::int64_t RunConfig::integer(const std::string& key) const {
  return parse_value<std::int64_t>(key, str(key));
}

std::uint64_t RunConfig::u64(const std::string& key) const {
  return parse_value<std::uint64_t>(key, str(key));
}

bool RunConfig::flag(const std::string& key) const {
  const auto& v = str(key);
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw ConfigError("bad value '" + v + "' for " + key + " (expected 0 or 1)");
}

std::vector<std::uint32_t> RunConfig::u32_list(const std::string& key) const {
  std::vector<std::uint32_t> out;
  const auto& v = str(key);
  if (v == "none") return out;
  for (auto part : text::split(v, ',')) {
    out.push_back(parse_value<std::uint32_t>(key, std::string(part)));
  }
  return out;
}

std::string RunConfig::echo() const {
  std::string out = std::string("tool=") + kToolVersion + " cmd=" + command_;
  for (const auto& k : keys_) {
    out += ' ';
    out += k;
    out += '=';
    auto it = values_.find(k);
    out += it == values_.end() ? std::string("?") : it->second;
  }
  return out;
}

SlotConfig slot_config(const RunConfig& cfg) {
  SlotConfig s;
  s.max_delay_days = static_cast<int>(cfg.integer("max_delay_days"));
  s.seconds_per_slot = cfg.integer("seconds_per_slot");
  s.validate();
  return s;
}

WorldOptions world_options(const RunConfig& cfg) {
  WorldOptions w;
  w.world_seed = cfg.u64("world_seed");
  w.field_sizes = cfg.u32_list("field_sizes");
  w.request_fields = static_cast<std::uint32_t>(cfg.u64("request_fields"));
  w.impressions_per_request =
      static_cast<std::uint32_t>(cfg.u64("impressions_per_request"));
  w.zipf_exponent = cfg.num("zipf_exponent");
  w.delay_field = static_cast<std::uint32_t>(cfg.u64("delay_field"));
  w.ctr_bias = cfg.num("ctr_bias");
  w.ctr_scale = cfg.num("ctr_scale");
  w.cvr_bias = cfg.num("cvr_bias");
  w.cvr_scale = cfg.num("cvr_scale");
  w.speed_scale = cfg.num("speed_scale");
  w.speed_cvr_coupling = cfg.num("speed_cvr_coupling");
  w.late_bump = cfg.num("late_bump");
  w.late_bump_min_slot = static_cast<int>(cfg.integer("late_bump_min_slot"));
  w.overflow_bias = cfg.num("overflow_bias");
  w.delay_noise = cfg.num("delay_noise");
  w.day1_mass_target = cfg.num("day1_mass_target");
  w.slots = slot_config(cfg);
  return w;
}

TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig t;
  t.objective = parse_objective(cfg.str("objective"));
  t.learning_rate = cfg.num("learning_rate");
  t.batch_size = cfg.u64("batch_size");
  t.epochs = cfg.u64("epochs");
  t.seed = cfg.u64("train_seed");
  t.em_steps_per_estep = cfg.u64("em_steps_per_estep");
  const auto& mode = cfg.str("estep_mode");
  if (mode == "minibatch") {
    t.estep_mode = EStepMode::Minibatch;
  } else if (mode == "fullbatch") {
    t.estep_mode = EStepMode::FullBatch;
  } else {
    throw ConfigError("estep_mode must be minibatch or fullbatch, got '" + mode + "'");
  }
  t.emb_dim = static_cast<std::uint32_t>(cfg.u64("emb_dim"));
  t.hidden = cfg.u32_list("hidden");
  t.delay_uses_elapsed = cfg.flag("delay_uses_elapsed");
  t.grad_check_coords = cfg.u64("grad_check_coords");
  t.validate();
  return t;
}

}  // namespace esdf::cli
