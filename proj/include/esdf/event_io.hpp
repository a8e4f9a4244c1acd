#pragma once

// Line-oriented event log format.
//
//   #esdf-events v1
//   #config <resolved run configuration>
//   #schema feature_dim=<D> n_fields=<F>
//   request_id<TAB>sample_id<TAB>y<TAB>click_ts<TAB>conversion_ts<TAB>features
//
// conversion_ts is empty when absent; features are space-separated
// field:index:value triples.

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "esdf/event_model.hpp"

namespace esdf {

inline constexpr std::string_view kEventLogMagic = "#esdf-events v1";

struct EventLog {
  FeatureSchema schema;
  std::string config_echo;
  std::vector<EventRecord> records;
};

void write_event_log(std::ostream& out, const EventLog& log);
EventLog read_event_log(std::istream& in);

EventLog load_event_log(const std::string& path);
void save_event_log(const std::string& path, const EventLog& log);

namespace detail {
// Row-level helpers shared with the snapshot format.
void write_record_row(std::ostream& out, const EventRecord& rec);
EventRecord parse_record_fields(const std::vector<std::string_view>& cols,
                                std::size_t line_no);
void read_header(std::istream& in, std::string_view magic,
                 std::string& config_echo, std::size_t& line_no);
FeatureSchema parse_schema_line(const std::string& line, std::size_t line_no);
}  // namespace detail

}  // namespace esdf
