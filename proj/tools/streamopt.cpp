#include "streamopt/log.hpp"
#include "streamopt/scenario.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace streamopt;

struct Options {
  std::string kind = "synthetic-ls";
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string buffer = "full";
  std::string out = "streamopt-out";
  std::optional<std::size_t> frames;
  std::string sweep;
  std::optional<double> gamma;
  double eps0 = 1e-16;
};

void add_scenario_options(CLI::App* cmd, Options& o, bool with_kind = true) {
  if (with_kind)
    cmd->add_option("scenario", o.kind, "synthetic-ls, lot-ls or nhpp-noa")
        ->check(CLI::IsMember({"synthetic-ls", "lot-ls", "nhpp-noa"}));
  cmd->add_option("--config", o.config, "key = value problem config")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "problem seed");
  cmd->add_option("--buffer", o.buffer, "buffer length N or 'full'");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--frames", o.frames, "override the frame count");
  cmd->add_option("--gamma", o.gamma, "ridge weight for least squares");
  cmd->add_option("--eps0", o.eps0, "NOA stopping threshold on the squared gradient norm");
}

Scenario to_scenario(const Options& o) {
  Scenario s;
  s.kind = parse_scenario_kind(o.kind);
  s.buffer = BufferSize::parse(o.buffer);
  s.gamma = o.gamma;
  s.eps0 = o.eps0;
  s.seed = o.seed;
  s.frames = o.frames;
  if (!o.config.empty()) s.config_path = o.config;
  s.out_dir = o.out;
  if (!o.sweep.empty()) s.buffer_sweep = parse_size_list(o.sweep);
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();
  CLI::App app{"Streaming block-tridiagonal optimization experiments"};
  app.require_subcommand(1);
  Options o;

  auto* run_cmd = app.add_subcommand("run", "run a scenario and write its artifacts");
  add_scenario_options(run_cmd, o);
  run_cmd->add_option("--buffer-sweep", o.sweep, "comma-separated buffers to sweep after the run");

  auto* lag_cmd = app.add_subcommand("lag-table", "lag table from the history of a FULL least-squares run");
  lag_cmd->add_option("--out", o.out, "output directory of the run");

  auto* sweep_cmd = app.add_subcommand("buffer-sweep", "max error against FULL/batch for several buffers");
  add_scenario_options(sweep_cmd, o);
  sweep_cmd->add_option("--buffers", o.sweep, "comma-separated buffers");

  auto* cond_cmd = app.add_subcommand("conditioning", "print conditioning and rate constants");
  add_scenario_options(cond_cmd, o);

  auto* self_cmd = app.add_subcommand("selftest", "quick end-to-end checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      const auto report = run(to_scenario(o));
      for (const auto& [key, value] : report.summary) std::cout << key << ": " << value << '\n';
      for (const auto& a : report.assertions)
        std::cout << (a.passed ? "PASS " : "FAIL ") << a.name << ": " << a.detail << '\n';
      if (report.sweep) write_sweep_text(std::cout, *report.sweep);
      if (const auto* failed = report.first_failure()) {
        std::cerr << "error: invariant " << failed->name << " failed: " << failed->detail << '\n';
        return 1;
      }
    } else if (lag_cmd->parsed()) {
      lag_table_from_run(o.out, std::cout);
    } else if (sweep_cmd->parsed()) {
      const auto report = buffer_sweep(to_scenario(o));
      write_sweep_text(std::cout, report);
    } else if (cond_cmd->parsed()) {
      print_conditioning(to_scenario(o), std::cout);
    } else if (self_cmd->parsed()) {
      return selftest(std::cout) ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
