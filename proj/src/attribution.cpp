#include "esdf/attribution.hpp"

#include <algorithm>
#include <istream>
#include <limits>
#include <ostream>

#include "esdf/errors.hpp"
#include "text_format.hpp"

namespace esdf {

LabelPolicy parse_policy(std::string_view name) {
  if (name == "esmm_day1") return {PolicyKind::EsmmDay1};
  if (name == "naive_drop") return {PolicyKind::NaiveDrop};
  if (name == "shift") return {PolicyKind::Shift};
  if (name == "full_censored") return {PolicyKind::FullCensored};
  if (name == "ground_truth") return {PolicyKind::GroundTruth, 7};
  constexpr std::string_view gt = "ground_truth:";
  if (name.substr(0, gt.size()) == gt) {
    const int days = text::parse<int>(name.substr(gt.size()), 0, "window days");
    if (days < 1) throw ConfigError("attribution window must be >= 1 day");
    return {PolicyKind::GroundTruth, days};
  }
  throw ConfigError("unknown label policy '" + std::string(name) + "'");
}

std::string policy_name(const LabelPolicy& policy) {
  switch (policy.kind) {
    case PolicyKind::EsmmDay1: return "esmm_day1";
    case PolicyKind::NaiveDrop: return "naive_drop";
    case PolicyKind::Shift: return "shift";
    case PolicyKind::FullCensored: return "full_censored";
    case PolicyKind::GroundTruth:
      return "ground_truth:" + std::to_string(policy.window_days);
  }
  return "unknown";
}

namespace {

ObservedSample ground_truth_sample(const EventRecord& rec, std::size_t index,
                                   int window_days, const SlotConfig& cfg) {
  ObservedSample s;
  s.record = index;
  s.y = rec.clicked;
  if (!rec.clicked) return s;
  const std::int64_t window = static_cast<std::int64_t>(window_days) * kSecondsPerDay;
  s.elapsed_seconds = window;
  s.e = cfg.overflow_slot();
  s.t = s.e;
  if (rec.conversion_ts && *rec.conversion_ts <= rec.click_ts + window) {
    s.z = true;
    s.delay_seconds = *rec.conversion_ts - rec.click_ts;
    s.d = day_slot(s.delay_seconds, cfg);
    s.t = s.d;
  }
  return s;
}

}  // namespace

Snapshot snapshot(std::span<const EventRecord> log, Timestamp observe_ts,
                  const LabelPolicy& policy, const SlotConfig& cfg) {
  cfg.validate();
  Snapshot out;
  if (policy.kind == PolicyKind::GroundTruth) {
    out.samples.reserve(log.size());
    for (std::size_t i = 0; i < log.size(); ++i) {
      validate_record(log[i]);
      out.samples.push_back(
          ground_truth_sample(log[i], i, policy.window_days, cfg));
    }
    return out;
  }

  Timestamp first = std::numeric_limits<Timestamp>::max();
  for (const auto& rec : log) first = std::min(first, rec.click_ts);
  if (!log.empty() && observe_ts < first) {
    out.status = SnapshotStatus::BeforeLogStart;
    return out;
  }

  out.samples.reserve(log.size());
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto& rec = log[i];
    validate_record(rec);
    if (rec.click_ts > observe_ts) continue;

    ObservedSample s;
    s.record = i;
    s.y = rec.clicked;
    if (rec.clicked) {
      s.elapsed_seconds = observe_ts - rec.click_ts;
      s.e = elapsed_slots(rec.click_ts, observe_ts, cfg);
      if (rec.conversion_ts && *rec.conversion_ts <= observe_ts) {
        s.z = true;
        s.delay_seconds = *rec.conversion_ts - rec.click_ts;
        s.d = day_slot(s.delay_seconds, cfg);
      }
    }

    switch (policy.kind) {
      case PolicyKind::EsmmDay1:
        if (s.z && s.delay_seconds >= cfg.seconds_per_slot) {
          s.z = false;
          s.d = -1;
          s.delay_seconds = -1;
        }
        s.e = 0;
        break;
      case PolicyKind::Shift:
        s.e = 0;
        break;
      case PolicyKind::NaiveDrop:
        if (s.y && !s.z && s.e < cfg.overflow_slot()) continue;
        break;
      case PolicyKind::FullCensored:
      case PolicyKind::GroundTruth:
        break;
    }
    s.t = s.z ? s.d : s.e;
    out.samples.push_back(s);
  }
  return out;
}

std::vector<double> delay_histogram(std::span<const ObservedSample> samples,
                                    const SlotConfig& cfg) {
  std::vector<double> hist(static_cast<std::size_t>(cfg.num_bins()), 0.0);
  std::size_t n = 0;
  for (const auto& s : samples) {
    if (!s.z) continue;
    if (s.d < 0 || s.d >= cfg.num_bins()) {
      throw InvariantError("delay slot " + std::to_string(s.d) + " out of range");
    }
    hist[static_cast<std::size_t>(s.d)] += 1.0;
    ++n;
  }
  if (n == 0) throw UndefinedMetricError("delay histogram of zero conversions");
  for (double& h : hist) h /= static_cast<double>(n);
  return hist;
}

void write_snapshot(std::ostream& out, const EventLog& log,
                    std::span<const ObservedSample> samples,
                    const std::string& config_echo) {
  out << kSnapshotMagic << '\n';
  out << "#config " << config_echo << '\n';
  out << "#schema feature_dim=" << log.schema.feature_dim
      << " n_fields=" << log.schema.n_fields << '\n';
  for (const auto& s : samples) {
    const auto& rec = log.records.at(s.record);
    detail::write_record_row(out, rec);
    out << '\t' << (s.z ? 1 : 0) << '\t' << s.e << '\t' << s.d << '\t'
        << s.elapsed_seconds << '\n';
  }
}

SnapshotFile read_snapshot(std::istream& in) {
  SnapshotFile out;
  std::size_t line_no = 0;
  detail::read_header(in, kSnapshotMagic, out.log.config_echo, line_no);
  std::string line;
  if (!std::getline(in, line)) throw InputError("missing #schema header");
  out.log.schema = detail::parse_schema_line(line, ++line_no);
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cols = text::split(line, '\t');
    if (cols.size() != 10) {
      throw InputError("line " + std::to_string(line_no) +
                       ": snapshot rows need 10 columns");
    }
    auto rec = detail::parse_record_fields(cols, line_no);
    validate_features(rec.features, out.log.schema);
    ObservedSample s;
    s.record = out.log.records.size();
    s.y = rec.clicked;
    s.z = text::parse<int>(cols[6], line_no, "z") != 0;
    s.e = text::parse<int>(cols[7], line_no, "e");
    s.d = text::parse<int>(cols[8], line_no, "d");
    s.elapsed_seconds = text::parse<std::int64_t>(cols[9], line_no, "elapsed");
    if (s.z) {
      if (!rec.conversion_ts || !s.y) {
        throw InputError("line " + std::to_string(line_no) +
                         ": z=1 without a clicked conversion");
      }
      s.delay_seconds = *rec.conversion_ts - rec.click_ts;
    }
    s.t = s.z ? s.d : s.e;
    out.log.records.push_back(std::move(rec));
    out.samples.push_back(s);
  }
  return out;
}

}  // namespace esdf
