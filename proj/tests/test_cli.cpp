#include "streamopt/config.hpp"
#include "streamopt/scenario.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace streamopt;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("streamopt-test-" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

KeyValueConfig parse(const std::string& text) {
  std::istringstream in(text);
  return KeyValueConfig::parse(in);
}

}  // namespace

TEST_CASE("key-value config") {
  auto cfg = parse("# comment\nn = 5\nlevels = 0.1, 0.2 ,0.3\nname = lot  # trailing\n");
  CHECK(cfg.take_integer("n") == 5);
  CHECK(cfg.take_doubles("levels") == std::vector<double>{0.1, 0.2, 0.3});
  CHECK(cfg.take_string("name") == "lot");
  CHECK(!cfg.take_double("missing"));
  CHECK_NOTHROW(cfg.finish());

  CHECK_THROWS_AS(parse("n 5\n"), ConfigError);
  CHECK_THROWS_AS(parse("n = 1\nn = 2\n"), ConfigError);
  auto bad = parse("n = five\n");
  CHECK_THROWS_AS(bad.take_integer("n"), ConfigError);
  auto leftover = parse("typo = 1\n");
  CHECK_THROWS_AS(leftover.finish(), ConfigError);
}

TEST_CASE("config application") {
  auto cfg = parse("n = 6\nframes = 9\nm_min = 3\nm_max = 4\n");
  SyntheticStreamConfig s;
  apply(cfg, s);
  cfg.finish();
  CHECK(s.n == 6);
  CHECK(s.frames == 9);
  auto lcfg = parse("eta = 0.2\ngamma = 0.001\n");
  lot::LotConfig l;
  apply(lcfg, l);
  lcfg.finish();
  CHECK(l.eta == 0.2);
  CHECK(l.gamma == 0.001);
  CHECK(parse_size_list("2, 4,6") == std::vector<std::size_t>{2, 4, 6});
  CHECK_THROWS(parse_size_list("2,x"));
}

TEST_CASE("scenario names") {
  CHECK(parse_scenario_kind("lot-ls") == ScenarioKind::LotLs);
  CHECK(to_string(ScenarioKind::NhppNoa) == "nhpp-noa");
  CHECK_THROWS_AS(parse_scenario_kind("other"), std::invalid_argument);
}

TEST_CASE("seed overrides reach every problem") {
  Scenario s;
  s.seed = 42;
  s.frames = 7;
  const auto p = resolve(s);
  CHECK(p.synthetic.seed == 42);
  CHECK(p.lot.signal_seed == 42);
  CHECK(p.nhpp.rate_seed == 42);
  CHECK(p.nhpp.event_seed != 42);
  CHECK(p.synthetic.frames == 7);
  CHECK(p.nhpp.frames == 7);
}

TEST_CASE("runs are reproducible byte for byte") {
  for (const auto kind : {ScenarioKind::SyntheticLs, ScenarioKind::NhppNoa}) {
    Scenario s;
    s.kind = kind;
    s.seed = 3;
    s.frames = 10;
    s.buffer = BufferSize::of(4);
    const auto first = scratch("repro-a");
    s.out_dir = first;
    CHECK(run(s).ok());
    s.out_dir = scratch("repro-b");
    run(s);
    for (const auto& entry : fs::directory_iterator(s.out_dir))
      CHECK(slurp(entry.path()) == slurp(first / entry.path().filename()));
  }
}

TEST_CASE("zero frames gives empty outputs") {
  Scenario s;
  s.frames = 0;
  s.out_dir = scratch("empty");
  const auto report = run(s);
  CHECK(report.ok());
  CHECK(slurp(s.out_dir / "archive.csv") == "frame,component,value\n");
}

TEST_CASE("FULL least-squares run writes history and its lag table") {
  Scenario s;
  s.frames = 12;
  s.out_dir = scratch("lag");
  const auto report = run(s);
  REQUIRE(report.ok());
  REQUIRE(fs::exists(s.out_dir / "history.csv"));
  std::ostringstream text;
  const auto table = lag_table_from_run(s.out_dir, text);
  CHECK(table.entries.size() == 12);
  CHECK(fs::exists(s.out_dir / "lag_table.csv"));
  CHECK(!text.str().empty());

  std::ifstream in(s.out_dir / "history.csv");
  const auto history = read_history_csv(in);
  std::ostringstream again;
  write_history_csv(again, history);
  CHECK(again.str() == slurp(s.out_dir / "history.csv"));
}

TEST_CASE("lag table needs a history") {
  std::ostringstream text;
  const auto dir = scratch("nohistory");
  fs::create_directories(dir);
  CHECK_THROWS(lag_table_from_run(dir, text));
}

TEST_CASE("buffer sweep report") {
  Scenario s;
  s.seed = 5;
  s.frames = 16;
  s.buffer_sweep = {1, 2, 3, 4};
  const auto report = buffer_sweep(s);
  REQUIRE(report.rows.size() == 4);
  for (std::size_t i = 1; i < report.rows.size(); ++i) CHECK(report.rows[i].max_error <= report.rows[i - 1].max_error);
  CHECK(report.slope <= report.bound_slope + 0.05);
}

TEST_CASE("unknown config keys fail the run") {
  const auto dir = scratch("badcfg");
  fs::create_directories(dir);
  std::ofstream(dir / "cfg.txt") << "no_such_key = 1\n";
  Scenario s;
  s.config_path = dir / "cfg.txt";
  s.out_dir = dir / "out";
  CHECK_THROWS_AS(run(s), ConfigError);
}

TEST_CASE("selftest passes") {
  std::ostringstream out;
  CHECK(selftest(out));
}
