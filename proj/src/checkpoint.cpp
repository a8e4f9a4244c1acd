#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "esdf/errors.hpp"
#include "esdf/model.hpp"
#include "text_format.hpp"

namespace esdf {

namespace {

constexpr std::string_view kMagic = "#esdf-checkpoint v1";

std::string join_widths(const std::vector<std::uint32_t>& widths) {
  std::string s;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(widths[i]);
  }
  return s.empty() ? "none" : s;
}

}  // namespace

void write_checkpoint(std::ostream& out, const ModelParams& params,
                      const std::string& config_echo) {
  const auto& s = params.shape;
  out << kMagic << '\n' << "#config " << config_echo << '\n';
  out << "shape feature_dim=" << s.feature_dim << " n_fields=" << s.n_fields
      << " emb_dim=" << s.emb_dim << " hidden=" << join_widths(s.hidden)
      << " max_delay_days=" << s.slots.max_delay_days
      << " seconds_per_slot=" << s.slots.seconds_per_slot << " delay_head="
      << (s.delay_head == DelayHead::Softmax ? "softmax" : "exponential")
      << " delay_uses_elapsed=" << (s.delay_uses_elapsed ? 1 : 0) << '\n';
  out << "seed " << params.seed << '\n';
  out << "values " << params.values.size() << '\n';
  for (double v : params.values) out << text::fmt(v) << '\n';
}

ModelParams read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw InputError("missing checkpoint magic line");
  }
  if (!std::getline(in, line) || line.rfind("#config", 0) != 0) {
    throw InputError("checkpoint line 2: expected #config");
  }
  if (!std::getline(in, line) || line.rfind("shape ", 0) != 0) {
    throw InputError("checkpoint line 3: expected shape");
  }
  ModelParams params;
  auto& shape = params.shape;
  for (auto kv : text::split(std::string_view(line).substr(6), ' ')) {
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos) throw InputError("bad shape entry");
    const auto key = kv.substr(0, eq);
    const auto val = kv.substr(eq + 1);
    if (key == "feature_dim") {
      shape.feature_dim = text::parse<std::uint32_t>(val, 3, key);
    } else if (key == "n_fields") {
      shape.n_fields = text::parse<std::uint32_t>(val, 3, key);
    } else if (key == "emb_dim") {
      shape.emb_dim = text::parse<std::uint32_t>(val, 3, key);
    } else if (key == "hidden") {
      shape.hidden.clear();
      if (val != "none") {
        for (auto w : text::split(val, ',')) {
          shape.hidden.push_back(text::parse<std::uint32_t>(w, 3, "hidden"));
        }
      }
    } else if (key == "max_delay_days") {
      shape.slots.max_delay_days = text::parse<int>(val, 3, key);
    } else if (key == "seconds_per_slot") {
      shape.slots.seconds_per_slot = text::parse<std::int64_t>(val, 3, key);
    } else if (key == "delay_head") {
      if (val == "softmax") {
        shape.delay_head = DelayHead::Softmax;
      } else if (val == "exponential") {
        shape.delay_head = DelayHead::ExponentialRate;
      } else {
        throw InputError("unknown delay_head '" + std::string(val) + "'");
      }
    } else if (key == "delay_uses_elapsed") {
      shape.delay_uses_elapsed = text::parse<int>(val, 3, key) != 0;
    } else {
      throw InputError("unknown shape key '" + std::string(key) + "'");
    }
  }
  shape.validate();
  if (!std::getline(in, line) || line.rfind("seed ", 0) != 0) {
    throw InputError("checkpoint line 4: expected seed");
  }
  params.seed = text::parse<std::uint64_t>(std::string_view(line).substr(5), 4, "seed");
  if (!std::getline(in, line) || line.rfind("values ", 0) != 0) {
    throw InputError("checkpoint line 5: expected values count");
  }
  const auto n = text::parse<std::size_t>(std::string_view(line).substr(7), 5, "count");
  if (n != ParamLayout(shape).total) {
    throw InputError("checkpoint value count does not match its shape");
  }
  params.values.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw InputError("checkpoint truncated");
    params.values.push_back(text::parse<double>(line, 6 + i, "parameter"));
  }
  return params;
}

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const std::string& config_echo) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write checkpoint " + path);
  write_checkpoint(out, params, config_echo);
  if (!out) throw InputError("write failed for " + path);
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open checkpoint " + path);
  return read_checkpoint(in);
}

}  // namespace esdf
