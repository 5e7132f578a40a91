#pragma once

#include "streamopt/synthetic.hpp"
#include "streamopt/testbeds/lot.hpp"
#include "streamopt/testbeds/nhpp.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>

namespace streamopt {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// `key = value` lines; `#` starts a comment. Every key must be consumed by a
// typed accessor before finish(), which rejects leftovers.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;
  static KeyValueConfig parse(std::istream& in, const std::string& source = "<stream>");
  static KeyValueConfig load(const std::filesystem::path& path);

  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::optional<std::string> take_string(const std::string& key);
  std::optional<double> take_double(const std::string& key);
  std::optional<long long> take_integer(const std::string& key);
  std::optional<std::vector<double>> take_doubles(const std::string& key);

  // Throws if any key was never taken.
  void finish() const;

 private:
  const std::string* lookup(const std::string& key);

  std::string source_;
  std::map<std::string, std::string> values_;
  std::set<std::string> taken_;
};

void apply(KeyValueConfig& config, SyntheticStreamConfig& out);
void apply(KeyValueConfig& config, lot::LotConfig& out);
void apply(KeyValueConfig& config, nhpp::SplineNhppConfig& out);

std::vector<std::size_t> parse_size_list(const std::string& text);

}  // namespace streamopt
