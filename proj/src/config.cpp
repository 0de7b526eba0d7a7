#include "clane/config.hpp"

#include <charconv>
#include <fstream>
#include <stdexcept>
#include <string_view>

namespace clane {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw std::invalid_argument("config: bad value '" + value + "' for " + key);
}

template <class T>
T parse_int(const std::string& key, const std::string& value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) bad_value(key, value);
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double out = std::stod(value, &used);
    if (used != value.size()) bad_value(key, value);
    return out;
  } catch (const std::invalid_argument&) {
    bad_value(key, value);
  } catch (const std::out_of_range&) {
    bad_value(key, value);
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value);
}

}  // namespace

void apply_override(AppConfig& cfg, const std::string& dotted_key, const std::string& value) {
  const auto fail_key = [&] {
    throw std::invalid_argument("config: unknown key '" + dotted_key + "'");
  };
  const std::size_t dot = dotted_key.find('.');
  if (dot == std::string::npos) fail_key();
  const std::string section = dotted_key.substr(0, dot);
  const std::string key = dotted_key.substr(dot + 1);

  if (section == "ingest") {
    if (key == "crop_x0") cfg.ingest.crop_x0 = parse_int<std::uint16_t>(dotted_key, value);
    else if (key == "crop_y0") cfg.ingest.crop_y0 = parse_int<std::uint16_t>(dotted_key, value);
    else if (key == "crop_w") cfg.ingest.crop_w = parse_int<std::uint16_t>(dotted_key, value);
    else if (key == "crop_h") cfg.ingest.crop_h = parse_int<std::uint16_t>(dotted_key, value);
    else if (key == "window_us") cfg.ingest.window_us = parse_int<std::uint64_t>(dotted_key, value);
    else if (key == "out_w") cfg.ingest.out_w = parse_int<std::uint16_t>(dotted_key, value);
    else if (key == "out_h") cfg.ingest.out_h = parse_int<std::uint16_t>(dotted_key, value);
    else if (key == "count_clip") cfg.ingest.count_clip = parse_int<std::uint32_t>(dotted_key, value);
    else fail_key();
  } else if (section == "extractor") {
    if (key == "weights") cfg.extractor.weights = value;
    else if (key == "binarize_input") cfg.extractor.binarize_input = parse_bool(dotted_key, value);
    else fail_key();
  } else if (section == "norm") {
    if (key == "frac_bits") cfg.norm.frac_bits = parse_int<int>(dotted_key, value);
    else if (key == "lut_addr_bits") cfg.norm.lut_addr_bits = parse_int<int>(dotted_key, value);
    else if (key == "newton_iters") cfg.norm.newton_iters = parse_int<int>(dotted_key, value);
    else fail_key();
  } else if (section == "learner") {
    if (key == "name") cfg.learner.name = value;
    else if (key == "capacity") cfg.learner.clp.capacity = parse_int<int>(dotted_key, value);
    else if (key == "novelty_threshold")
      cfg.learner.clp.novelty_threshold = parse_double(dotted_key, value);
    else if (key == "clp_eta") cfg.learner.clp_eta = parse_double(dotted_key, value);
    else if (key == "slda_shrinkage")
      cfg.learner.slda.shrinkage_scale = parse_double(dotted_key, value);
    else if (key == "replay_capacity")
      cfg.learner.replay.per_class_capacity = parse_int<int>(dotted_key, value);
    else if (key == "replay_minibatch")
      cfg.learner.replay.minibatch = parse_int<int>(dotted_key, value);
    else if (key == "lr") {
      const double lr = parse_double(dotted_key, value);
      cfg.learner.replay.sgd.lr = lr;
      cfg.learner.sgd.lr = lr;
    } else fail_key();
  } else if (section == "protocol") {
    if (key == "shots") cfg.protocol.shots = parse_int<int>(dotted_key, value);
    else if (key == "test_fraction")
      cfg.protocol.test_fraction = parse_double(dotted_key, value);
    else if (key == "seed") cfg.protocol.seed = parse_int<std::uint64_t>(dotted_key, value);
    else if (key == "num_seeds") cfg.num_seeds = parse_int<int>(dotted_key, value);
    else if (key == "one_based_split") cfg.one_based_split = parse_bool(dotted_key, value);
    else fail_key();
  } else {
    fail_key();
  }
}

void apply_override(AppConfig& cfg, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("config: override must look like section.key=value, got '" +
                                assignment + "'");
  const std::string key{trim(std::string_view(assignment).substr(0, eq))};
  const std::string value{trim(std::string_view(assignment).substr(eq + 1))};
  apply_override(cfg, key, value);
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path.string());

  AppConfig cfg;
  std::string section;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view sv = trim(line);
    if (sv.empty() || sv.front() == '#' || sv.front() == ';') continue;
    if (sv.front() == '[') {
      if (sv.back() != ']')
        throw std::invalid_argument("config: malformed section at line " + std::to_string(lineno));
      section = std::string(trim(sv.substr(1, sv.size() - 2)));
      continue;
    }
    const std::size_t eq = sv.find('=');
    if (eq == std::string_view::npos)
      throw std::invalid_argument("config: expected key = value at line " + std::to_string(lineno));
    const std::string key{trim(sv.substr(0, eq))};
    const std::string value{trim(sv.substr(eq + 1))};
    if (section.empty())
      throw std::invalid_argument("config: key before any [section] at line " +
                                  std::to_string(lineno));
    try {
      apply_override(cfg, section + "." + key, value);
    } catch (const std::invalid_argument& err) {
      throw std::invalid_argument(std::string(err.what()) + " (line " + std::to_string(lineno) +
                                  ")");
    }
  }
  return cfg;
}

}  // namespace clane
