// esdf: generate / snapshot / train / evaluate / report.
//
// Exit codes: 0 success, 2 usage or configuration error, 3 data error,
// 4 numerical error.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "esdf/attribution.hpp"
#include "esdf/errors.hpp"
#include "esdf/evaluation.hpp"
#include "esdf/event_io.hpp"
#include "esdf/synthgen.hpp"
#include "esdf/trainer.hpp"
#include "run_config.hpp"
#include "text_format.hpp"

namespace esdf::cli {
namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  return in;
}

Timestamp observe_ts(const RunConfig& cfg) {
  return static_cast<Timestamp>(std::llround(cfg.num("observe_day") * kSecondsPerDay));
}

void print_histogram(const std::vector<double>& h) {
  for (std::size_t b = 0; b < h.size(); ++b) {
    std::printf("  slot %zu  %.4f\n", b, h[b]);
  }
}

int cmd_generate(const RunConfig& cfg) {
  GenConfig gen = make_gen_config(world_options(cfg));
  gen.n_impressions = cfg.u64("n");
  if (gen.n_impressions == 0) throw ConfigError("--n must be positive");
  gen.seed = cfg.u64("seed");
  gen.first_sample_id = cfg.u64("first_sample_id");
  gen.start_ts = cfg.integer("start_day") * kSecondsPerDay;
  gen.span_seconds = cfg.integer("span_days") * kSecondsPerDay;
  gen.validate();

  auto out = generate(gen);
  out.log.config_echo = cfg.echo();
  save_event_log(cfg.str("log_out"), out.log);
  {
    auto f = open_out(cfg.str("truth_out"));
    write_ground_truth(f, out.truth, gen.slots.num_bins(), cfg.echo());
  }

  std::size_t clicks = 0, conversions = 0;
  for (const auto& r : out.log.records) {
    clicks += r.clicked;
    conversions += r.conversion_ts.has_value();
  }
  const double n = static_cast<double>(out.log.records.size());
  std::printf("impressions      %zu\n", out.log.records.size());
  std::printf("click rate       %.4f\n", static_cast<double>(clicks) / n);
  std::printf("conversion rate  %.4f  (per click, any delay)\n",
              clicks ? static_cast<double>(conversions) / static_cast<double>(clicks)
                     : 0.0);
  // Every conversion is visible once the observation point is past the
  // last possible one.
  const auto all = snapshot(out.log.records, std::numeric_limits<Timestamp>::max() / 2,
                            {PolicyKind::FullCensored}, gen.slots);
  try {
    std::printf("delay histogram (slot %d is overflow)\n", gen.slots.overflow_slot());
    print_histogram(delay_histogram(all.samples, gen.slots));
  } catch (const UndefinedMetricError&) {
    std::printf("  no conversions\n");
  }
  return 0;
}

int cmd_snapshot(const RunConfig& cfg) {
  const auto slots = slot_config(cfg);
  const auto policy = parse_policy(cfg.str("policy"));
  const auto log = load_event_log(cfg.str("log"));
  const auto snap = snapshot(log.records, observe_ts(cfg), policy, slots);
  if (snap.status == SnapshotStatus::BeforeLogStart) {
    std::fprintf(stderr, "warning: observation time precedes the log; snapshot is empty\n");
  }
  auto out = open_out(cfg.str("snapshot_out"));
  write_snapshot(out, log, snap.samples, cfg.echo());
  std::size_t y = 0, z = 0;
  for (const auto& s : snap.samples) {
    y += s.y;
    z += s.z;
  }
  std::printf("samples %zu  clicked %zu  converted %zu\n", snap.samples.size(), y, z);
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  const auto slots = slot_config(cfg);
  const TrainConfig tc = train_config(cfg);
  const LabelPolicy policy = training_policy(tc.objective);
  if (cfg.str("policy") != "auto" && !(parse_policy(cfg.str("policy")) == policy)) {
    throw ConfigError("objective " + objective_name(tc.objective) + " trains on " +
                      policy_name(policy) + " labels, not " + cfg.str("policy"));
  }
  const auto log = load_event_log(cfg.str("log"));
  const auto snap = snapshot(log.records, observe_ts(cfg), policy, slots);
  if (snap.samples.empty()) throw InputError("no samples at the observation time");

  EventLog eval_log;
  std::vector<ObservedSample> eval_samples;
  EvalData eval;
  const bool with_eval = cfg.str("eval_log") != "none";
  if (with_eval) {
    eval_log = load_event_log(cfg.str("eval_log"));
    LabelPolicy gt{PolicyKind::GroundTruth, static_cast<int>(cfg.integer("window_days"))};
    eval_samples = snapshot(eval_log.records, 0, gt, slots).samples;
    eval = {eval_log.records, eval_samples};
  }

  const auto result = train(tc, log.schema, slots,
                            {log.records, snap.samples, policy},
                            with_eval ? &eval : nullptr);
  save_checkpoint(cfg.str("checkpoint_out"), result.params, cfg.echo());
  {
    auto out = open_out(cfg.str("history_out"));
    write_history(out, result.history, cfg.echo());
  }
  for (const auto& e : result.history.epochs) {
    std::printf("epoch %zu  loss %.6f", e.epoch, e.mean_loss.total);
    if (e.eval_auc) std::printf("  eval auc %.4f", *e.eval_auc);
    std::printf("  (%.1fs)\n", e.wall_seconds);
  }
  int failed = 0;
  for (const auto& g : result.grad_checks) {
    std::printf("gradient check: %zu coordinates, %zu failed, max rel error %.3g\n",
                g.probed, g.failed, g.max_rel_error);
    failed += g.failed > 0;
  }
  return failed ? kExitNumerical : 0;
}

int cmd_evaluate(const RunConfig& cfg) {
  const auto slots = slot_config(cfg);
  const auto params = load_checkpoint(cfg.str("checkpoint"));
  const Objective obj = parse_objective(cfg.str("objective"));
  if (!(params.shape.slots == slots)) {
    throw ConfigError("checkpoint slot layout differs from max_delay_days/seconds_per_slot");
  }
  const bool exp_head = params.shape.delay_head == DelayHead::ExponentialRate;
  if (exp_head != (obj == Objective::Dfm)) {
    throw ConfigError("checkpoint delay head does not belong to objective " +
                      objective_name(obj));
  }
  const auto log = load_event_log(cfg.str("log"));
  if (log.schema.feature_dim != params.shape.feature_dim ||
      log.schema.n_fields != params.shape.n_fields) {
    throw ConfigError("checkpoint feature schema differs from the evaluated log");
  }
  std::vector<GroundTruth> truth;
  if (cfg.str("truth") != "none") {
    auto in = open_in(cfg.str("truth"));
    truth = read_ground_truth(in);
  }
  LabelPolicy gt{PolicyKind::GroundTruth, static_cast<int>(cfg.integer("window_days"))};
  const auto samples = snapshot(log.records, 0, gt, slots).samples;
  auto report = evaluate(params, log.records, samples, truth);
  report.objective = objective_name(obj);
  auto out = open_out(cfg.str("report_out"));
  write_eval_report(out, report, cfg.echo());
  std::fputs(format_eval_report(report).c_str(), stdout);
  return 0;
}

int cmd_report(const RunConfig& cfg) {
  std::vector<EvalReport> reports;
  for (auto part : text::split(cfg.str("inputs"), ',')) {
    const std::string path(part);
    auto in = open_in(path);
    reports.push_back(read_eval_report(in));
  }
  const auto table = summarize(reports);
  const std::filesystem::path dir(cfg.str("out_dir"));
  std::filesystem::create_directories(dir);
  {
    auto out = open_out((dir / "comparison.tsv").string());
    write_comparison(out, table, cfg.echo());
  }
  {
    auto out = open_out((dir / "delay_histogram.tsv").string());
    write_delay_histogram(out, table, cfg.echo());
  }
  {
    auto out = open_out((dir / "loss_by_delay.tsv").string());
    write_loss_by_delay(out, table, cfg.echo());
  }
  std::printf("%-7s %4s  %-17s %9s  %-17s %-17s %s\n", "model", "runs", "auc",
              "relaimpr", "gauc", "log loss", "pred cvr");
  for (const auto& r : table.rows) {
    char rel[32] = "-";
    if (r.rela_impr) std::snprintf(rel, sizeof rel, "%+.2f%%", *r.rela_impr);
    std::printf("%-7s %4zu  %.4f +- %.4f  %9s  %.4f +- %.4f  %.4f +- %.4f  %.4f%s\n",
                r.objective.c_str(), r.auc.n, r.auc.mean, r.auc.std, rel, r.gauc.mean,
                r.gauc.std, r.log_loss.mean, r.log_loss.std, r.mean_pred_cvr.mean,
                r.gauc_sparse_runs ? "  (gauc groups too sparse)" : "");
  }
  return 0;
}

}  // namespace
}  // namespace esdf::cli

int main(int argc, char** argv) {
  using namespace esdf;
  using namespace esdf::cli;

  CLI::App app{"Entire-space delayed-feedback conversion modeling toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  struct Sub {
    CLI::App* app;
    std::string config_path;
    std::map<std::string, std::string> flags;
  };
  std::map<std::string, Sub> subs;
  const std::map<std::string, std::string> about{
      {"generate", "write a synthetic event log and its ground truth"},
      {"snapshot", "label an event log as seen at an observation time"},
      {"train", "train one objective on a log observed at observe_day"},
      {"evaluate", "score a checkpoint on a held-out log"},
      {"report", "aggregate eval reports into comparison tables"},
  };
  for (const auto& [name, help] : about) {
    auto& sub = subs[name];
    sub.app = app.add_subcommand(name, help);
    sub.app->add_option("--config", sub.config_path, "key=value config file");
    for (const auto& key : command_keys(name)) {
      const auto& spec = key_spec(key);
      std::string desc = spec.help;
      if (!spec.default_value.empty()) desc += " [" + spec.default_value + "]";
      sub.app->add_option("--" + key, sub.flags[key], desc);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    for (auto& [name, sub] : subs) {
      if (!sub.app->parsed()) continue;
      RunConfig cfg(name, command_keys(name));
      if (name == "train") cfg.set("policy", "auto");
      if (!sub.config_path.empty()) cfg.apply_file(sub.config_path);
      for (const auto& [key, value] : sub.flags) {
        if (sub.app->count("--" + key) > 0) cfg.set(key, value);
      }
      cfg.require_complete();
      if (name == "generate") return cmd_generate(cfg);
      if (name == "snapshot") return cmd_snapshot(cfg);
      if (name == "train") return cmd_train(cfg);
      if (name == "evaluate") return cmd_evaluate(cfg);
      return cmd_report(cfg);
    }
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  }
  return kExitUsage;
}
