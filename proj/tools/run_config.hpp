#pragma once

// Flat key=value run configuration shared by every subcommand.
//
// Resolution order: built-in defaults, then a config file, then flags. The
// resolved set for a subcommand is echoed into the header of every file it
// writes, so that header alone is enough to rerun it.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "esdf/event_model.hpp"
#include "esdf/synthgen.hpp"
#include "esdf/trainer.hpp"

namespace esdf::cli {

inline constexpr const char* kToolVersion = "esdf-0.1.0";

struct KeySpec {
  std::string key;
  std::string default_value;  // empty: must be supplied
  std::string help;
};

/// Every known key, across all subcommands.
const std::vector<KeySpec>& all_keys();
const KeySpec& key_spec(const std::string& key);

/// Keys read by one subcommand, in echo order.
std::vector<std::string> command_keys(const std::string& command);

class RunConfig {
 public:
  RunConfig(std::string command, std::vector<std::string> keys);

  /// Reads "key = value" lines; '#' starts a comment. Unknown keys are a
  /// ConfigError, keys of other subcommands are ignored.
  void apply_file(const std::string& path);
  void set(const std::string& key, const std::string& value);
  /// Throws UsageError for any key still without a value.
  void require_complete() const;

  bool has(const std::string& key) const;
  const std::string& str(const std::string& key) const;
  double num(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  std::uint64_t u64(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<std::uint32_t> u32_list(const std::string& key) const;

  /// "tool=<version> cmd=<command> key=value ..." on one line.
  std::string echo() const;

  const std::string& command() const { return command_; }

 private:
  std::string command_;
  std::vector<std::string> keys_;
  std::map<std::string, std::string> values_;
};

/// Missing or malformed command-line input (exit code 2).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

SlotConfig slot_config(const RunConfig& cfg);
WorldOptions world_options(const RunConfig& cfg);
TrainConfig train_config(const RunConfig& cfg);

}  // namespace esdf::cli
