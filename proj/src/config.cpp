#include "streamopt/config.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>

namespace streamopt {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& text, const std::string& what) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError(what + ": cannot parse '" + text + "'");
  return value;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::istringstream in(text);
  for (std::string item; std::getline(in, item, sep);)
    if (!trim(item).empty()) parts.push_back(trim(item));
  return parts;
}

template <typename T, typename U>
void assign(std::optional<U> v, T& field) {
  if (v) field = static_cast<T>(*v);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::istream& in, const std::string& source) {
  KeyValueConfig cfg;
  cfg.source_ = source;
  std::string line;
  for (int number = 1; std::getline(in, line); ++number) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(number) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(number) + ": empty key");
    if (cfg.values_.count(key)) throw ConfigError(source + ":" + std::to_string(number) + ": duplicate key " + key);
    cfg.values_[key] = trim(line.substr(eq + 1));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse(in, path.string());
}

const std::string* KeyValueConfig::lookup(const std::string& key) {
  const auto it = values_.find(key);
  if (it == values_.end()) return nullptr;
  taken_.insert(key);
  return &it->second;
}

std::optional<std::string> KeyValueConfig::take_string(const std::string& key) {
  if (const auto* v = lookup(key)) return *v;
  return std::nullopt;
}

std::optional<double> KeyValueConfig::take_double(const std::string& key) {
  if (const auto* v = lookup(key)) return parse_number<double>(*v, source_ + ": " + key);
  return std::nullopt;
}

std::optional<long long> KeyValueConfig::take_integer(const std::string& key) {
  if (const auto* v = lookup(key)) return parse_number<long long>(*v, source_ + ": " + key);
  return std::nullopt;
}

std::optional<std::vector<double>> KeyValueConfig::take_doubles(const std::string& key) {
  const auto* v = lookup(key);
  if (!v) return std::nullopt;
  std::vector<double> out;
  for (const auto& item : split(*v, ',')) out.push_back(parse_number<double>(item, source_ + ": " + key));
  return out;
}

void KeyValueConfig::finish() const {
  std::string unknown;
  for (const auto& [key, value] : values_)
    if (!taken_.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
  if (!unknown.empty()) throw ConfigError(source_ + ": unknown keys: " + unknown);
}

void apply(KeyValueConfig& c, SyntheticStreamConfig& out) {
  assign(c.take_integer("n"), out.n);
  assign(c.take_integer("m_min"), out.m_min);
  assign(c.take_integer("m_max"), out.m_max);
  assign(c.take_integer("frames"), out.frames);
  assign(c.take_double("coupling"), out.coupling);
  assign(c.take_double("noise"), out.noise);
  assign(c.take_integer("seed"), out.seed);
}

void apply(KeyValueConfig& c, lot::LotConfig& out) {
  assign(c.take_integer("N"), out.basis_per_frame);
  assign(c.take_double("eta"), out.eta);
  assign(c.take_integer("frames"), out.frames);
  assign(c.take_double("sample_begin"), out.sample_begin);
  assign(c.take_double("sample_end"), out.sample_end);
  if (auto levels = c.take_doubles("levels")) out.levels = std::move(*levels);
  assign(c.take_integer("signal_seed"), out.signal_seed);
  assign(c.take_double("sinc_spacing"), out.sinc_spacing);
  assign(c.take_double("sinc_begin"), out.sinc_begin);
  assign(c.take_double("sinc_end"), out.sinc_end);
  assign(c.take_double("grid_spacing"), out.grid_spacing);
  assign(c.take_double("bisection_tolerance"), out.bisection_tolerance);
  assign(c.take_double("gamma"), out.gamma);
}

void apply(KeyValueConfig& c, nhpp::SplineNhppConfig& out) {
  assign(c.take_integer("spline_order"), out.spline_order);
  assign(c.take_integer("N"), out.basis_per_frame);
  assign(c.take_double("frame_length"), out.frame_length);
  assign(c.take_integer("frames"), out.frames);
  assign(c.take_integer("rate_seed"), out.rate_seed);
  assign(c.take_integer("event_seed"), out.event_seed);
  assign(c.take_double("rate_floor"), out.rate_floor);
  assign(c.take_integer("bumps_min"), out.bumps_min);
  assign(c.take_integer("bumps_max"), out.bumps_max);
  assign(c.take_double("amplitude_min"), out.amplitude_min);
  assign(c.take_double("amplitude_max"), out.amplitude_max);
  assign(c.take_double("width_min"), out.width_min);
  assign(c.take_double("width_max"), out.width_max);
  assign(c.take_double("box_lo_factor"), out.box_lo_factor);
  assign(c.take_double("box_hi_factor"), out.box_hi_factor);
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  for (const auto& item : split(text, ',')) out.push_back(parse_number<std::size_t>(item, "list entry"));
  if (out.empty()) throw ConfigError("empty list '" + text + "'");
  return out;
}

}  // namespace streamopt
