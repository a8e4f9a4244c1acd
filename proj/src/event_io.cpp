#include "esdf/event_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "esdf/errors.hpp"
#include "text_format.hpp"

namespace esdf {

namespace detail {

void write_record_row(std::ostream& out, const EventRecord& rec) {
  out << rec.request_id << '\t' << rec.sample_id << '\t'
      << (rec.clicked ? 1 : 0) << '\t' << rec.click_ts << '\t';
  if (rec.conversion_ts) out << *rec.conversion_ts;
  out << '\t';
  bool first = true;
  for (const auto& f : rec.features.entries) {
    if (!first) out << ' ';
    first = false;
    out << f.field << ':' << f.index << ':' << text::fmt(f.value);
  }
}

EventRecord parse_record_fields(const std::vector<std::string_view>& cols,
                                std::size_t line_no) {
  if (cols.size() < 6) {
    throw InputError("line " + std::to_string(line_no) + ": expected 6 columns");
  }
  EventRecord rec;
  rec.request_id = text::parse<std::uint64_t>(cols[0], line_no, "request_id");
  rec.sample_id = text::parse<std::uint64_t>(cols[1], line_no, "sample_id");
  const int y = text::parse<int>(cols[2], line_no, "y");
  if (y != 0 && y != 1) {
    throw InputError("line " + std::to_string(line_no) + ": y must be 0 or 1");
  }
  rec.clicked = y == 1;
  rec.click_ts = text::parse<Timestamp>(cols[3], line_no, "click_ts");
  if (!cols[4].empty()) {
    rec.conversion_ts = text::parse<Timestamp>(cols[4], line_no, "conversion_ts");
  }
  if (!cols[5].empty()) {
    for (auto triple : text::split(cols[5], ' ')) {
      const auto parts = text::split(triple, ':');
      if (parts.size() != 3) {
        throw InputError("line " + std::to_string(line_no) +
                         ": bad feature triple '" + std::string(triple) + "'");
      }
      rec.features.entries.push_back(
          {text::parse<std::uint32_t>(parts[0], line_no, "field"),
           text::parse<std::uint32_t>(parts[1], line_no, "feature index"),
           text::parse<double>(parts[2], line_no, "feature value")});
    }
  }
  try {
    validate_record(rec);
  } catch (const InvariantError& e) {
    throw InputError("line " + std::to_string(line_no) + ": " + e.what());
  }
  return rec;
}

void read_header(std::istream& in, std::string_view magic,
                 std::string& config_echo, std::size_t& line_no) {
  std::string line;
  if (!std::getline(in, line) || line != magic) {
    throw InputError("missing magic line '" + std::string(magic) + "'");
  }
  line_no = 1;
  if (!std::getline(in, line) || line.rfind("#config", 0) != 0) {
    throw InputError("line 2: expected #config header");
  }
  line_no = 2;
  config_echo = line.size() > 8 ? line.substr(8) : std::string();
}

FeatureSchema parse_schema_line(const std::string& line, std::size_t line_no) {
  constexpr std::string_view prefix = "#schema ";
  if (line.rfind(prefix, 0) != 0) {
    throw InputError("line " + std::to_string(line_no) +
                     ": expected #schema header");
  }
  FeatureSchema schema;
  bool have_dim = false, have_fields = false;
  for (auto kv : text::split(std::string_view(line).substr(prefix.size()), ' ')) {
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos) continue;
    const auto key = kv.substr(0, eq);
    const auto val = kv.substr(eq + 1);
    if (key == "feature_dim") {
      schema.feature_dim = text::parse<std::uint32_t>(val, line_no, key);
      have_dim = true;
    } else if (key == "n_fields") {
      schema.n_fields = text::parse<std::uint32_t>(val, line_no, key);
      have_fields = true;
    }
  }
  if (!have_dim || !have_fields) {
    throw InputError("line " + std::to_string(line_no) +
                     ": schema needs feature_dim and n_fields");
  }
  return schema;
}

}  // namespace detail

void write_event_log(std::ostream& out, const EventLog& log) {
  out << kEventLogMagic << '\n';
  out << "#config " << log.config_echo << '\n';
  out << "#schema feature_dim=" << log.schema.feature_dim
      << " n_fields=" << log.schema.n_fields << '\n';
  for (const auto& rec : log.records) {
    detail::write_record_row(out, rec);
    out << '\n';
  }
}

EventLog read_event_log(std::istream& in) {
  EventLog log;
  std::size_t line_no = 0;
  detail::read_header(in, kEventLogMagic, log.config_echo, line_no);
  std::string line;
  if (!std::getline(in, line)) throw InputError("missing #schema header");
  log.schema = detail::parse_schema_line(line, ++line_no);
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto rec = detail::parse_record_fields(text::split(line, '\t'), line_no);
    try {
      validate_features(rec.features, log.schema);
    } catch (const InputError& e) {
      throw InputError("line " + std::to_string(line_no) + ": " + e.what());
    }
    log.records.push_back(std::move(rec));
  }
  return log;
}

EventLog load_event_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open event log " + path);
  return read_event_log(in);
}

void save_event_log(const std::string& path, const EventLog& log) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write event log " + path);
  write_event_log(out, log);
  if (!out) throw InputError("write failed for " + path);
}

}  // namespace esdf
