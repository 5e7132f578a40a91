#pragma once

#include <initializer_list>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace streamopt {

double median(std::vector<double> values);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

LineFit linear_regression(std::span<const double> x, std::span<const double> y);

// Writes a header on construction; numbers use 17 significant digits.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::initializer_list<std::string> columns);

  template <typename... Fields>
  void row(const Fields&... fields) {
    bool first = true;
    ((write_field(fields, first)), ...);
    out_ << '\n';
  }

 private:
  void separator(bool& first);
  void write_field(double v, bool& first);
  void write_field(const std::string& v, bool& first);
  template <typename Integer>
  void write_field(Integer v, bool& first) {
    separator(first);
    out_ << v;
  }

  std::ostream& out_;
};

std::string format_double(double v);

}  // namespace streamopt
