#include "streamopt/scenario.hpp"

#include "streamopt/diagnostics.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

namespace streamopt {

namespace {

std::ofstream open_output(const std::filesystem::path& dir, const std::string& name) {
  std::ofstream out(dir / name);
  if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
  return out;
}

std::string fmt(double v) { return format_double(v); }

Assertion check(std::string name, bool passed, std::string detail) {
  return {std::move(name), passed, std::move(detail)};
}

struct LsProblem {
  Index n = 0;
  double gamma = 0.0;
  std::vector<LsBatch> batches;
  std::optional<lot::LotStream> lot;
};

LsProblem make_ls_problem(const Scenario& scenario, const ProblemSetup& setup) {
  LsProblem p;
  p.gamma = setup.gamma;
  if (scenario.kind == ScenarioKind::SyntheticLs) {
    p.n = setup.synthetic.n;
    p.batches = make_synthetic_stream(setup.synthetic);
  } else if (scenario.kind == ScenarioKind::LotLs) {
    p.n = setup.lot.basis_per_frame;
    p.lot = lot::generate_lot_stream(setup.lot);
    p.batches = p.lot->batches;
  } else {
    throw std::invalid_argument("scenario " + to_string(scenario.kind) + " is not a least-squares stream");
  }
  return p;
}

StreamingLeastSquares stream(const LsProblem& p, BufferSize buffer, bool history = false) {
  StreamingLeastSquares s(p.n, p.gamma, buffer, {history});
  for (const auto& batch : p.batches) s.ingest(batch);
  return s;
}

struct NhppRun {
  nhpp::NhppInstance instance;
  BarrierSchedule schedule;
};

NhppRun make_nhpp(const ProblemSetup& setup) {
  NhppRun r{nhpp::make_instance(setup.nhpp), {}};
  r.schedule.dimension = (setup.nhpp.frames + 1) * static_cast<std::size_t>(setup.nhpp.basis_per_frame);
  return r;
}

NewtonOnline run_noa(const NhppRun& r, BufferSize buffer, double eps0) {
  NoaConfig config;
  config.buffer = buffer;
  config.eps0 = eps0;
  NewtonOnline noa(r.instance.config.basis_per_frame, config);
  for (const auto& f : r.instance.losses) noa.barrier_advance(f, r.schedule);
  return noa;
}

ConvexRateReport nhpp_rates(const NhppRun& r, const BarrierBatchResult& batch) {
  const ChainObjective obj(r.instance.losses);
  std::vector<IsolatedMinimizer> isolated;
  for (const auto& f : r.instance.losses)
    isolated.push_back(isolated_minimizer(LogBarrierLoss(f, 1.0 / batch.barrier_parameter, true)));
  const std::vector<BlockVector> samples{batch.x};
  return rate_report(obj, isolated, samples);
}

void finish_sweep(SweepReport& report) {
  std::vector<double> b;
  std::vector<double> e;
  for (const auto& row : report.rows) {
    b.push_back(static_cast<double>(row.buffer));
    e.push_back(row.max_error);
  }
  report.slope = log_linear_slope(b, e).slope;
}

SweepReport ls_sweep(const LsProblem& p, const std::vector<std::size_t>& buffers) {
  SweepReport report;
  const auto full = stream(p, BufferSize::full());
  for (const std::size_t b : buffers)
    report.rows.push_back({b, truncation_error(full, stream(p, BufferSize::of(b))).max});
  finish_sweep(report);
  const auto cond = stream_conditioning(p.batches, p.gamma);
  report.bound_name = "log(rho)";
  report.bound_slope = cond.rho && *cond.rho > 0.0 ? std::log(*cond.rho) : std::numeric_limits<double>::quiet_NaN();
  return report;
}

SweepReport nhpp_sweep(const NhppRun& r, const BarrierBatchResult& batch, double eps0,
                       const std::vector<std::size_t>& buffers) {
  SweepReport report;
  for (const std::size_t b : buffers)
    report.rows.push_back({b, max_relative_block_error(run_noa(r, BufferSize::of(b), eps0).estimates(), batch.x)});
  finish_sweep(report);
  report.bound_name = "log(a)";
  report.bound_slope = std::log(nhpp_rates(r, batch).a);
  return report;
}

Assertion sweep_assertion(const SweepReport& s) {
  const bool finite = std::isfinite(s.bound_slope);
  return check("sweep_slope", finite && s.slope <= s.bound_slope + 0.05,
               "slope " + fmt(s.slope) + " vs " + s.bound_name + " + 0.05 = " + fmt(s.bound_slope + 0.05));
}

void write_sweep_csv(std::ostream& out, const SweepReport& s) {
  CsvWriter csv(out, {"buffer", "max_error"});
  for (const auto& row : s.rows) csv.row(row.buffer, row.max_error);
}

std::vector<std::size_t> default_buffers(ScenarioKind kind) {
  if (kind == ScenarioKind::NhppNoa) return {2, 4, 6, 8};
  return {1, 2, 3, 4, 5, 6, 7, 8};
}

void run_ls(const Scenario& scenario, const ProblemSetup& setup, RunReport& report) {
  const LsProblem p = make_ls_problem(scenario, setup);
  const auto& dir = scenario.out_dir;
  if (p.lot) {
    auto out = open_output(dir, "crossings.csv");
    CsvWriter csv(out, {"time", "value"});
    for (const auto& c : p.lot->scan.crossings) csv.row(c.time, c.level);
    report.summary.emplace_back("crossings", std::to_string(p.lot->scan.crossings.size()));
    report.summary.emplace_back("tangencies_skipped", std::to_string(p.lot->scan.tangencies));
  }
  const bool full = scenario.buffer.is_full();
  const auto s = stream(p, scenario.buffer, full);
  {
    auto out = open_output(dir, "archive.csv");
    write_archive_csv(out, s.estimates());
  }
  {
    auto out = open_output(dir, "decay_log.csv");
    write_decay_log_csv(out, s.update_log());
  }
  if (full) {
    auto out = open_output(dir, "history.csv");
    write_history_csv(out, s.history());
  }
  report.summary.emplace_back("frames", std::to_string(s.frames()));
  report.summary.emplace_back("buffer", scenario.buffer.to_string());
  report.summary.emplace_back("gamma", fmt(p.gamma));
  report.summary.emplace_back("peak_live_frames", std::to_string(s.peak_live_frames()));
  if (p.batches.empty()) return;

  const auto cond = stream_conditioning(p.batches, p.gamma);
  report.summary.emplace_back("delta", fmt(cond.delta));
  report.summary.emplace_back("theta", fmt(cond.theta));
  report.summary.emplace_back("dominant", cond.dominant ? "true" : "false");
  if (full) {
    const auto x = solve_dense(normal_equations(p.batches, p.gamma));
    const double err = max_relative_block_error(s.estimates(), x);
    report.summary.emplace_back("max_rel_err_vs_dense", fmt(err));
    report.assertions.push_back(check("oracle_equivalence", err < 1e-9, "max rel. err " + fmt(err) + " < 1e-9"));
    if (cond.dominant && s.frames() >= 11) {
      const auto fit = decay_profile(s, cond);
      report.summary.emplace_back("fitted_decay_ratio", fmt(fit.fitted_ratio));
      report.assertions.push_back(check("update_decay", fit.fitted_ratio <= fit.bound_ratio + 0.05,
                                        "fitted ratio " + fmt(fit.fitted_ratio) + " vs rho + 0.05 = " +
                                            fmt(fit.bound_ratio + 0.05)));
    }
  } else {
    const auto err = truncation_error(stream(p, BufferSize::full()), s);
    report.summary.emplace_back("max_truncation_error", fmt(err.max));
    if (cond.dominant && cond.rho) {
      const double bound = truncation_constant(cond, stream_rhs_bound(p.batches)) *
                           std::pow(*cond.rho, static_cast<double>(scenario.buffer.frames()) - 1.0);
      report.assertions.push_back(
          check("truncation_bound", err.max <= bound, "error " + fmt(err.max) + " <= bound " + fmt(bound)));
    }
  }
  if (!scenario.buffer_sweep.empty()) report.sweep = ls_sweep(p, scenario.buffer_sweep);
}

void run_nhpp(const Scenario& scenario, const ProblemSetup& setup, RunReport& report) {
  const NhppRun r = make_nhpp(setup);
  const auto& dir = scenario.out_dir;
  {
    auto out = open_output(dir, "events.csv");
    CsvWriter csv(out, {"time", "value"});
    for (const double t : r.instance.events) csv.row(t, r.instance.intensity(t));
  }
  const NewtonOnline noa = run_noa(r, scenario.buffer, scenario.eps0);
  const BlockVector estimates = noa.estimates();
  {
    auto out = open_output(dir, "archive.csv");
    write_archive_csv(out, estimates);
  }
  {
    auto out = open_output(dir, "decay_log.csv");
    write_decay_log_csv(out, noa.update_log());
  }
  {
    auto out = open_output(dir, "trace.csv");
    write_trace_csv(out, noa.trace());
  }
  const BarrierBatchResult batch = barrier_batch_minimize(r.instance.losses, r.schedule);
  const double err = max_relative_block_error(estimates, batch.x);
  const double h = setup.nhpp.knot_spacing();
  const double l2 = nhpp::relative_l2_distance(estimates, batch.x, h, 0.0, setup.nhpp.horizon());
  double lowest = std::numeric_limits<double>::infinity();
  for (const auto& x : estimates) lowest = std::min(lowest, x.minCoeff());

  report.summary.emplace_back("frames", std::to_string(setup.nhpp.frames));
  report.summary.emplace_back("buffer", scenario.buffer.to_string());
  report.summary.emplace_back("events", std::to_string(r.instance.events.size()));
  report.summary.emplace_back("barrier_parameter", fmt(batch.barrier_parameter));
  report.summary.emplace_back("max_rel_err_vs_batch", fmt(err));
  report.summary.emplace_back("rel_l2_intensity_vs_batch", fmt(l2));
  report.summary.emplace_back("min_coefficient", fmt(lowest));
  std::size_t total = 0;
  for (const int it : noa.iterations_per_step()) total += static_cast<std::size_t>(it);
  report.summary.emplace_back("newton_iterations", std::to_string(total));

  report.assertions.push_back(check("nonnegativity", lowest >= 0.0, "min coefficient " + fmt(lowest) + " >= 0"));
  if (scenario.buffer.frames() >= 6)
    report.assertions.push_back(check("noa_vs_batch", err < 1e-6, "max rel. err " + fmt(err) + " < 1e-6"));
  if (!scenario.buffer_sweep.empty()) report.sweep = nhpp_sweep(r, batch, scenario.eps0, scenario.buffer_sweep);
}

}  // namespace

ScenarioKind parse_scenario_kind(const std::string& text) {
  if (text == "synthetic-ls") return ScenarioKind::SyntheticLs;
  if (text == "lot-ls") return ScenarioKind::LotLs;
  if (text == "nhpp-noa") return ScenarioKind::NhppNoa;
  throw std::invalid_argument("unknown scenario '" + text + "' (synthetic-ls, lot-ls, nhpp-noa)");
}

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::SyntheticLs:
      return "synthetic-ls";
    case ScenarioKind::LotLs:
      return "lot-ls";
    case ScenarioKind::NhppNoa:
      return "nhpp-noa";
  }
  return "?";
}

ProblemSetup resolve(const Scenario& scenario) {
  ProblemSetup setup;
  if (scenario.config_path) {
    auto cfg = KeyValueConfig::load(*scenario.config_path);
    switch (scenario.kind) {
      case ScenarioKind::SyntheticLs:
        apply(cfg, setup.synthetic);
        break;
      case ScenarioKind::LotLs:
        apply(cfg, setup.lot);
        break;
      case ScenarioKind::NhppNoa:
        apply(cfg, setup.nhpp);
        break;
    }
    cfg.finish();
  }
  if (scenario.seed) {
    setup.synthetic.seed = *scenario.seed;
    setup.lot.signal_seed = *scenario.seed;
    setup.nhpp.rate_seed = *scenario.seed;
    setup.nhpp.event_seed = *scenario.seed + 1'000'003;
  }
  if (scenario.frames) {
    setup.synthetic.frames = *scenario.frames;
    setup.nhpp.frames = *scenario.frames;
    const double length = setup.lot.frame_length();
    setup.lot.frames = *scenario.frames;
    setup.lot.sample_end = setup.lot.sample_begin + length * static_cast<double>(*scenario.frames);
    setup.lot.sinc_end = std::max(setup.lot.sinc_end, setup.lot.sample_end + 5.0);
  }
  setup.gamma = scenario.gamma.value_or(scenario.kind == ScenarioKind::LotLs ? setup.lot.gamma : 0.0);
  setup.lot.gamma = setup.gamma;
  return setup;
}

bool RunReport::ok() const { return first_failure() == nullptr; }

const Assertion* RunReport::first_failure() const {
  for (const auto& a : assertions)
    if (!a.passed) return &a;
  return nullptr;
}

RunReport run(const Scenario& scenario) {
  const ProblemSetup setup = resolve(scenario);
  std::filesystem::create_directories(scenario.out_dir);
  RunReport report;
  report.summary.emplace_back("scenario", to_string(scenario.kind));
  if (scenario.kind == ScenarioKind::NhppNoa)
    run_nhpp(scenario, setup, report);
  else
    run_ls(scenario, setup, report);

  if (report.sweep) {
    report.assertions.push_back(sweep_assertion(*report.sweep));
    auto out = open_output(scenario.out_dir, "buffer_sweep.csv");
    write_sweep_csv(out, *report.sweep);
  }
  auto out = open_output(scenario.out_dir, "summary.txt");
  for (const auto& [key, value] : report.summary) out << key << ": " << value << '\n';
  for (const auto& a : report.assertions) out << (a.passed ? "PASS " : "FAIL ") << a.name << ": " << a.detail << '\n';
  if (report.sweep) write_sweep_text(out, *report.sweep);
  return report;
}

void write_history_csv(std::ostream& out, const std::vector<BlockVector>& history) {
  CsvWriter csv(out, {"append", "frame", "component", "value"});
  for (std::size_t k = 0; k < history.size(); ++k)
    for (std::size_t j = 0; j < history[k].size(); ++j)
      for (Index i = 0; i < history[k][j].size(); ++i) csv.row(k, j, i, history[k][j](i));
}

std::vector<BlockVector> read_history_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "append,frame,component,value")
    throw std::runtime_error("history.csv: unexpected header");
  std::map<std::size_t, std::map<std::size_t, std::vector<double>>> rows;
  for (int number = 2; std::getline(in, line); ++number) {
    std::istringstream fields(line);
    std::string a, f, c, v;
    if (!std::getline(fields, a, ',') || !std::getline(fields, f, ',') || !std::getline(fields, c, ',') ||
        !std::getline(fields, v))
      throw std::runtime_error("history.csv:" + std::to_string(number) + ": malformed row");
    auto& block = rows[std::stoul(a)][std::stoul(f)];
    const auto i = std::stoul(c);
    if (i != block.size()) throw std::runtime_error("history.csv:" + std::to_string(number) + ": components out of order");
    block.push_back(std::stod(v));
  }
  std::vector<BlockVector> history;
  for (auto& [k, frames] : rows) {
    if (k != history.size()) throw std::runtime_error("history.csv: missing append " + std::to_string(history.size()));
    BlockVector row;
    for (auto& [j, values] : frames) {
      if (j != row.size()) throw std::runtime_error("history.csv: missing frame in append " + std::to_string(k));
      row.push_back(Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size())));
    }
    history.push_back(std::move(row));
  }
  return history;
}

LagTable lag_table_from_run(const std::filesystem::path& out_dir, std::ostream& text) {
  std::ifstream in(out_dir / "history.csv");
  if (!in)
    throw std::runtime_error("no history.csv in " + out_dir.string() + "; run a least-squares scenario with --buffer full first");
  const LagTable table = lag_table(read_history_csv(in));
  {
    auto out = open_output(out_dir, "lag_table.csv");
    write_lag_table_csv(out, table);
  }
  {
    auto out = open_output(out_dir, "lag_table.txt");
    write_lag_table_text(out, table);
  }
  write_lag_table_text(text, table);
  return table;
}

SweepReport buffer_sweep(const Scenario& scenario) {
  const ProblemSetup setup = resolve(scenario);
  const auto buffers = scenario.buffer_sweep.empty() ? default_buffers(scenario.kind) : scenario.buffer_sweep;
  if (scenario.kind == ScenarioKind::NhppNoa) {
    const NhppRun r = make_nhpp(setup);
    return nhpp_sweep(r, barrier_batch_minimize(r.instance.losses, r.schedule), scenario.eps0, buffers);
  }
  return ls_sweep(make_ls_problem(scenario, setup), buffers);
}

void write_sweep_text(std::ostream& out, const SweepReport& report) {
  out << std::setw(8) << "buffer" << std::setw(26) << "max_error" << '\n';
  for (const auto& row : report.rows) out << std::setw(8) << row.buffer << std::setw(26) << fmt(row.max_error) << '\n';
  out << "slope " << fmt(report.slope) << ", " << report.bound_name << " " << fmt(report.bound_slope) << '\n';
}

void print_conditioning(const Scenario& scenario, std::ostream& out) {
  const ProblemSetup setup = resolve(scenario);
  auto opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string("unset"); };
  if (scenario.kind == ScenarioKind::NhppNoa) {
    const NhppRun r = make_nhpp(setup);
    const auto batch = barrier_batch_minimize(r.instance.losses, r.schedule);
    const auto c = nhpp_rates(r, batch);
    out << "mu_min " << fmt(c.mu_min) << "\nL_max " << fmt(c.l_max) << "\nkappa " << fmt(c.kappa) << "\ndelta "
        << fmt(c.delta) << "\ntheta " << fmt(c.theta) << "\neps_star " << opt(c.eps_star) << "\nrho " << opt(c.rho)
        << "\na " << fmt(c.a) << "\nM_x " << fmt(c.m_x) << "\nM_g " << fmt(c.m_g) << "\nC0 " << fmt(c.c0) << "\nC1 "
        << fmt(c.c1) << "\nC_b " << fmt(c.c_b) << "\ndominant "
        << (c.theta < (1.0 - c.delta) / 2.0 ? "true" : "false") << '\n';
    return;
  }
  const LsProblem p = make_ls_problem(scenario, setup);
  if (p.batches.empty()) {
    out << "empty stream\n";
    return;
  }
  const auto c = stream_conditioning(p.batches, p.gamma);
  out << "kappa " << fmt(c.kappa) << "\ndelta " << fmt(c.delta) << "\ntheta " << fmt(c.theta) << "\neps_star "
      << opt(c.eps_star) << "\nrho " << opt(c.rho) << "\nM " << fmt(stream_rhs_bound(p.batches)) << "\ndominant "
      << (c.dominant ? "true" : "false") << '\n';
  if (p.batches.size() < 2) return;
  std::vector<FrameLossPtr> losses;
  for (std::size_t t = 1; t < p.batches.size(); ++t)
    losses.push_back(std::make_shared<QuadraticFrameLoss>(p.batches[t], p.gamma, t == 1 ? &p.batches[0] : nullptr));
  const ChainObjective obj(losses);
  std::vector<IsolatedMinimizer> isolated;
  for (const auto& f : losses) isolated.push_back(isolated_minimizer(*f));
  const std::vector<BlockVector> samples{solve_dense(normal_equations(p.batches, p.gamma))};
  const auto r = rate_report(obj, isolated, samples);
  out << "a " << fmt(r.a) << "\nM_g " << fmt(r.m_g) << "\nC0 " << fmt(r.c0) << "\nC1 " << fmt(r.c1) << "\nC_b "
      << fmt(r.c_b) << '\n';
}

bool selftest(std::ostream& out) {
  bool all = true;
  auto report = [&](const std::string& name, bool passed, const std::string& detail) {
    out << (passed ? "PASS " : "FAIL ") << name << ": " << detail << '\n';
    all = all && passed;
  };

  SyntheticStreamConfig sc;
  sc.n = 3;
  sc.m_min = 4;
  sc.m_max = 8;
  sc.frames = 15;
  const auto batches = make_synthetic_stream(sc);
  LsProblem p{sc.n, 0.1, batches, std::nullopt};
  const auto full = stream(p, BufferSize::full());
  const double oracle = max_relative_block_error(full.estimates(), solve_dense(normal_equations(batches, 0.1)));
  report("stream_vs_dense", oracle < 1e-9, fmt(oracle));

  const auto eps = iterate_epsilon_recursion(0.1, 0.2);
  const auto closed = limiting_epsilon(0.1, 0.2);
  const double gap = closed ? std::abs(eps.limit - *closed) : 1.0;
  report("epsilon_fixed_point", gap < 1e-10, fmt(gap));

  std::vector<FrameLossPtr> losses;
  for (std::size_t t = 1; t < batches.size(); ++t)
    losses.push_back(std::make_shared<QuadraticFrameLoss>(batches[t], 0.1, t == 1 ? &batches[0] : nullptr));
  NoaConfig nc;
  nc.buffer = BufferSize::full();
  NewtonOnline noa(sc.n, nc);
  for (const auto& f : losses) noa.advance(f);
  const double noa_err = max_relative_block_error(noa.estimates(), full.estimates());
  report("noa_full_vs_stream", noa_err < 1e-9, fmt(noa_err));

  nhpp::SplineNhppConfig hc;
  hc.frames = 6;
  ProblemSetup setup;
  setup.nhpp = hc;
  const NhppRun r = make_nhpp(setup);
  const auto batch = barrier_batch_minimize(r.instance.losses, r.schedule);
  const double nhpp_err = max_relative_block_error(run_noa(r, BufferSize::full(), 1e-16).estimates(), batch.x);
  report("nhpp_noa_vs_batch", nhpp_err < 1e-6, fmt(nhpp_err));
  return all;
}

}  // namespace streamopt
