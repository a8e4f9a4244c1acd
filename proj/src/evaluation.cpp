#include "esdf/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "esdf/errors.hpp"
#include "esdf/metrics.hpp"
#include "text_format.hpp"

namespace esdf {

EvalReport evaluate(const ModelParams& params, std::span<const EventRecord> records,
                    std::span<const ObservedSample> samples,
                    std::span<const GroundTruth> truth) {
  if (!truth.empty() && truth.size() != records.size()) {
    throw InputError("ground truth must align with the evaluated records");
  }
  const int bins = params.shape.slots.num_bins();
  Network net(params);
  ForwardCache cache;

  EvalReport rep;
  rep.num_bins = bins;
  std::vector<double> q_all, r_clicked;
  std::vector<int> lab_all, lab_clicked, slot_all;
  std::vector<std::uint64_t> groups;
  std::unordered_map<std::uint64_t, double> impressions;
  double true_cvr_sum = 0.0;

  for (const auto& s : samples) {
    const auto& rec = records[s.record];
    net.forward(rec.features, 0, cache);
    const auto& h = cache.heads;
    const int label = s.y && s.z ? 1 : 0;
    q_all.push_back(h.q);
    lab_all.push_back(label);
    slot_all.push_back(label ? s.d : -1);
    impressions[rec.request_id] += 1.0;
    ++rep.n_impressions;
    if (!s.y) continue;
    ++rep.n_clicked;
    rep.n_positive += label;
    r_clicked.push_back(h.r);
    lab_clicked.push_back(label);
    groups.push_back(rec.request_id);
    if (!truth.empty()) {
      if (truth[s.record].sample_id != rec.sample_id) {
        throw InputError("ground truth row does not match sample " +
                         std::to_string(rec.sample_id));
      }
      true_cvr_sum += truth[s.record].p_cvr;
    }
  }

  rep.auc = auc(r_clicked, lab_clicked);
  rep.ctcvr_auc = auc(q_all, lab_all);
  try {
    const auto g = gauc(r_clicked, lab_clicked, groups, &impressions);
    rep.gauc = g.value;
    rep.gauc_defined = true;
    rep.gauc_used_groups = g.used_groups;
    rep.gauc_skipped_groups = g.skipped_groups;
  } catch (const UndefinedMetricError&) {
    std::map<std::uint64_t, int> seen;
    for (auto gid : groups) seen[gid] = 1;
    rep.gauc_skipped_groups = seen.size();
  }
  const auto total = rep.gauc_total_groups();
  rep.gauc_sparse = total == 0 || 10 * rep.gauc_used_groups < total;

  const auto dl = log_loss_by_delay(q_all, lab_all, slot_all, bins);
  rep.log_loss = dl.overall;
  rep.delay_loss = dl.per_slot;
  rep.delay_counts = dl.counts;

  double pred_sum = 0.0;
  for (double r : r_clicked) pred_sum += r;
  const double nc = static_cast<double>(rep.n_clicked);
  rep.calibration.mean_pred_cvr = pred_sum / nc;
  rep.calibration.label_rate = static_cast<double>(rep.n_positive) / nc;
  if (!truth.empty()) rep.calibration.mean_true_cvr = true_cvr_sum / nc;

  if (rep.n_positive > 0) {
    rep.delay_histogram.assign(static_cast<std::size_t>(bins), 0.0);
    for (std::size_t b = 0; b < dl.counts.size(); ++b) {
      rep.delay_histogram[b] =
          static_cast<double>(dl.counts[b]) / static_cast<double>(rep.n_positive);
    }
  }
  return rep;
}

namespace {

std::string opt(const std::optional<double>& v) {
  return v ? text::fmt(*v) : std::string("NA");
}

std::optional<double> parse_opt(std::string_view s, std::size_t line) {
  if (s == "NA") return std::nullopt;
  return text::parse<double>(s, line, "metric value");
}

}  // namespace

void write_eval_report(std::ostream& out, const EvalReport& r,
                       const std::string& config_echo) {
  out << "#esdf-eval v1\n#config " << config_echo << '\n';
  out << "objective\t" << r.objective << '\n';
  out << "num_bins\t" << r.num_bins << '\n';
  out << "n_impressions\t" << r.n_impressions << '\n';
  out << "n_clicked\t" << r.n_clicked << '\n';
  out << "n_positive\t" << r.n_positive << '\n';
  out << "auc\t" << text::fmt(r.auc) << '\n';
  out << "ctcvr_auc\t" << text::fmt(r.ctcvr_auc) << '\n';
  out << "gauc\t" << text::fmt(r.gauc) << '\n';
  out << "gauc_defined\t" << (r.gauc_defined ? 1 : 0) << '\n';
  out << "gauc_sparse\t" << (r.gauc_sparse ? 1 : 0) << '\n';
  out << "gauc_used_groups\t" << r.gauc_used_groups << '\n';
  out << "gauc_skipped_groups\t" << r.gauc_skipped_groups << '\n';
  out << "log_loss\t" << text::fmt(r.log_loss) << '\n';
  for (std::size_t b = 0; b < r.delay_loss.size(); ++b) {
    out << "delay_loss_" << b << '\t' << opt(r.delay_loss[b]) << '\n';
  }
  for (std::size_t b = 0; b < r.delay_counts.size(); ++b) {
    out << "delay_count_" << b << '\t' << r.delay_counts[b] << '\n';
  }
  out << "mean_pred_cvr\t" << text::fmt(r.calibration.mean_pred_cvr) << '\n';
  out << "mean_true_cvr\t" << opt(r.calibration.mean_true_cvr) << '\n';
  out << "label_rate\t" << text::fmt(r.calibration.label_rate) << '\n';
  for (std::size_t b = 0; b < r.delay_histogram.size(); ++b) {
    out << "delay_hist_" << b << '\t' << text::fmt(r.delay_histogram[b]) << '\n';
  }
}

EvalReport read_eval_report(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "#esdf-eval v1") {
    throw InputError("missing eval-report magic line");
  }
  if (!std::getline(in, line) || line.rfind("#config", 0) != 0) {
    throw InputError("eval report line 2: expected #config");
  }
  std::map<std::string, std::string> kv;
  std::size_t line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cols = text::split(line, '\t');
    if (cols.size() != 2) {
      throw InputError("eval report line " + std::to_string(line_no) +
                       ": expected metric<TAB>value");
    }
    kv[std::string(cols[0])] = std::string(cols[1]);
  }
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw InputError("eval report lacks '" + key + "'");
    return it->second;
  };
  EvalReport r;
  r.objective = get("objective");
  r.num_bins = text::parse<int>(get("num_bins"), 0, "num_bins");
  r.n_impressions = text::parse<std::size_t>(get("n_impressions"), 0, "n_impressions");
  r.n_clicked = text::parse<std::size_t>(get("n_clicked"), 0, "n_clicked");
  r.n_positive = text::parse<std::size_t>(get("n_positive"), 0, "n_positive");
  r.auc = text::parse<double>(get("auc"), 0, "auc");
  r.ctcvr_auc = text::parse<double>(get("ctcvr_auc"), 0, "ctcvr_auc");
  r.gauc = text::parse<double>(get("gauc"), 0, "gauc");
  r.gauc_defined = get("gauc_defined") == "1";
  r.gauc_sparse = get("gauc_sparse") == "1";
  r.gauc_used_groups = text::parse<std::size_t>(get("gauc_used_groups"), 0, "groups");
  r.gauc_skipped_groups =
      text::parse<std::size_t>(get("gauc_skipped_groups"), 0, "groups");
  r.log_loss = text::parse<double>(get("log_loss"), 0, "log_loss");
  for (int b = 0; b < r.num_bins; ++b) {
    r.delay_loss.push_back(parse_opt(get("delay_loss_" + std::to_string(b)), 0));
    r.delay_counts.push_back(text::parse<std::size_t>(
        get("delay_count_" + std::to_string(b)), 0, "delay_count"));
  }
  r.calibration.mean_pred_cvr = text::parse<double>(get("mean_pred_cvr"), 0, "cvr");
  r.calibration.mean_true_cvr = parse_opt(get("mean_true_cvr"), 0);
  r.calibration.label_rate = text::parse<double>(get("label_rate"), 0, "label_rate");
  if (kv.count("delay_hist_0")) {
    for (int b = 0; b < r.num_bins; ++b) {
      r.delay_histogram.push_back(text::parse<double>(
          get("delay_hist_" + std::to_string(b)), 0, "delay_hist"));
    }
  }
  return r;
}

std::string format_eval_report(const EvalReport& r) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-22s %s\n", "objective", r.objective.c_str());
  out << buf;
  auto row = [&](const char* name, double v) {
    std::snprintf(buf, sizeof buf, "%-22s %.6f\n", name, v);
    out << buf;
  };
  std::snprintf(buf, sizeof buf, "%-22s %zu / %zu / %zu\n",
                "impr / click / conv", r.n_impressions, r.n_clicked, r.n_positive);
  out << buf;
  row("auc (pCVR)", r.auc);
  row("auc (pCTCVR)", r.ctcvr_auc);
  std::snprintf(buf, sizeof buf, "%-22s %.6f  (%zu used, %zu skipped%s)\n", "gauc",
                r.gauc, r.gauc_used_groups, r.gauc_skipped_groups,
                r.gauc_sparse ? ", groups too sparse" : "");
  out << buf;
  row("log loss", r.log_loss);
  for (std::size_t b = 0; b < r.delay_loss.size(); ++b) {
    if (!r.delay_loss[b]) continue;
    std::snprintf(buf, sizeof buf, "  slot %-2zu log loss      %.6f  (n=%zu)\n", b,
                  *r.delay_loss[b], r.delay_counts[b]);
    out << buf;
  }
  row("mean predicted pCVR", r.calibration.mean_pred_cvr);
  if (r.calibration.mean_true_cvr) row("mean true pCVR", *r.calibration.mean_true_cvr);
  row("label rate", r.calibration.label_rate);
  return out.str();
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  out.n = values.size();
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

ComparisonTable summarize(std::span<const EvalReport> reports) {
  ComparisonTable table;
  if (reports.empty()) return table;
  table.num_bins = reports.front().num_bins;
  std::vector<std::string> order;
  std::map<std::string, std::vector<const EvalReport*>> by_obj;
  for (const auto& r : reports) {
    if (r.num_bins != table.num_bins) {
      throw ConfigError("reports disagree on the number of delay slots (" +
                        std::to_string(r.num_bins) + " vs " +
                        std::to_string(table.num_bins) + ")");
    }
    if (!by_obj.count(r.objective)) order.push_back(r.objective);
    by_obj[r.objective].push_back(&r);
  }

  const auto bins = static_cast<std::size_t>(table.num_bins);
  std::vector<double> hist(bins, 0.0);
  std::size_t hist_runs = 0;
  for (const auto& name : order) {
    const auto& runs = by_obj[name];
    ComparisonRow row;
    row.objective = name;
    std::vector<double> a, g, ll, pc, tc;
    std::vector<std::vector<double>> dl(bins);
    for (const auto* r : runs) {
      a.push_back(r->auc);
      row.gauc_sparse_runs += r->gauc_sparse ? 1 : 0;
      g.push_back(r->gauc);
      ll.push_back(r->log_loss);
      pc.push_back(r->calibration.mean_pred_cvr);
      if (r->calibration.mean_true_cvr) tc.push_back(*r->calibration.mean_true_cvr);
      for (std::size_t b = 0; b < bins && b < r->delay_loss.size(); ++b) {
        if (r->delay_loss[b]) dl[b].push_back(*r->delay_loss[b]);
      }
      if (r->delay_histogram.size() == bins) {
        for (std::size_t b = 0; b < bins; ++b) hist[b] += r->delay_histogram[b];
        ++hist_runs;
      }
    }
    row.auc = mean_std(a);
    row.gauc = mean_std(g);
    row.log_loss = mean_std(ll);
    row.mean_pred_cvr = mean_std(pc);
    row.mean_true_cvr = mean_std(tc);
    for (const auto& v : dl) row.delay_loss.push_back(mean_std(v));
    table.rows.push_back(std::move(row));
  }
  if (hist_runs > 0) {
    for (double& h : hist) h /= static_cast<double>(hist_runs);
    table.delay_histogram = std::move(hist);
  }
  const ComparisonRow* base = nullptr;
  for (const auto& row : table.rows) {
    if (row.objective == "esmm") base = &row;
  }
  if (base && base->auc.mean > 0.5) {
    for (auto& row : table.rows) row.rela_impr = rela_impr(row.auc.mean, base->auc.mean);
  }
  return table;
}

void write_comparison(std::ostream& out, const ComparisonTable& table,
                      const std::string& config_echo) {
  out << "#esdf-comparison v1\n#config " << config_echo << '\n';
  out << "model\truns\tauc_mean\tauc_std\trela_impr_pct\tgauc_mean\tgauc_std\t"
         "gauc_sparse_runs\tlog_loss_mean\tlog_loss_std\tpred_cvr_mean\t"
         "true_cvr_mean\n";
  for (const auto& r : table.rows) {
    out << r.objective << '\t' << r.auc.n << '\t' << text::fmt(r.auc.mean) << '\t'
        << text::fmt(r.auc.std) << '\t' << opt(r.rela_impr) << '\t'
        << text::fmt(r.gauc.mean) << '\t' << text::fmt(r.gauc.std) << '\t'
        << r.gauc_sparse_runs << '\t'
        << text::fmt(r.log_loss.mean) << '\t' << text::fmt(r.log_loss.std) << '\t'
        << text::fmt(r.mean_pred_cvr.mean) << '\t'
        << (r.mean_true_cvr.n ? text::fmt(r.mean_true_cvr.mean) : std::string("NA"))
        << '\n';
  }
}

void write_delay_histogram(std::ostream& out, const ComparisonTable& table,
                           const std::string& config_echo) {
  out << "#esdf-delay-histogram v1\n#config " << config_echo << '\n';
  out << "slot\tmass\n";
  for (int b = 0; b < table.num_bins; ++b) {
    const double m = table.delay_histogram.empty()
                         ? 0.0
                         : table.delay_histogram[static_cast<std::size_t>(b)];
    out << b << '\t' << text::fmt(m) << '\n';
  }
}

void write_loss_by_delay(std::ostream& out, const ComparisonTable& table,
                         const std::string& config_echo) {
  out << "#esdf-loss-by-delay v1\n#config " << config_echo << '\n';
  out << "slot";
  for (const auto& r : table.rows) out << '\t' << r.objective;
  out << '\n';
  for (int b = 0; b < table.num_bins; ++b) {
    out << b;
    for (const auto& r : table.rows) {
      const auto& m = r.delay_loss[static_cast<std::size_t>(b)];
      out << '\t' << (m.n ? text::fmt(m.mean) : std::string("NA"));
    }
    out << '\n';
  }
}

}  // namespace esdf
