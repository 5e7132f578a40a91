#pragma once

#include "streamopt/config.hpp"
#include "streamopt/noa.hpp"
#include "streamopt/stream_ls.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace streamopt {

enum class ScenarioKind { SyntheticLs, LotLs, NhppNoa };

ScenarioKind parse_scenario_kind(const std::string& text);
std::string to_string(ScenarioKind kind);

struct Scenario {
  ScenarioKind kind = ScenarioKind::SyntheticLs;
  BufferSize buffer = BufferSize::full();
  // Falls back to the problem config (LOT) or 0.
  std::optional<double> gamma;
  double eps0 = 1e-16;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> frames;
  std::optional<std::filesystem::path> config_path;
  std::filesystem::path out_dir = "streamopt-out";
  std::vector<std::size_t> buffer_sweep;
};

// Problem configs after applying the config file and the command-line overrides.
struct ProblemSetup {
  SyntheticStreamConfig synthetic;
  lot::LotConfig lot;
  nhpp::SplineNhppConfig nhpp;
  double gamma = 0.0;
};

ProblemSetup resolve(const Scenario& scenario);

struct Assertion {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SweepRow {
  std::size_t buffer = 0;
  double max_error = 0.0;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  double slope = 0.0;
  // log ρ for least squares, log a for NOA.
  double bound_slope = 0.0;
  std::string bound_name;
};

struct RunReport {
  std::vector<std::pair<std::string, std::string>> summary;
  std::vector<Assertion> assertions;
  std::optional<SweepReport> sweep;

  bool ok() const;
  const Assertion* first_failure() const;
};

// Executes the scenario and writes archive.csv, decay_log.csv, summary.txt and
// the kind-specific files (history.csv, crossings.csv, events.csv, trace.csv,
// buffer_sweep.csv) into the output directory.
RunReport run(const Scenario& scenario);

// Reads history.csv from the output directory of a FULL least-squares run and
// writes lag_table.csv and lag_table.txt next to it.
LagTable lag_table_from_run(const std::filesystem::path& out_dir, std::ostream& text);
std::vector<BlockVector> read_history_csv(std::istream& in);
void write_history_csv(std::ostream& out, const std::vector<BlockVector>& history);

// Default buffers 1..8 (least squares) or 2, 4, 6, 8 (NOA) when the scenario lists none.
SweepReport buffer_sweep(const Scenario& scenario);
void write_sweep_text(std::ostream& out, const SweepReport& report);

void print_conditioning(const Scenario& scenario, std::ostream& out);

// Small end-to-end checks; returns true when all pass.
bool selftest(std::ostream& out);

}  // namespace streamopt
