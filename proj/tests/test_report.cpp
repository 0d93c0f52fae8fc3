#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "exarray/report.hpp"

using namespace exarray;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("exarray-test-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(Config, KeyValueParsing) {
  ExperimentConfig c;
  parse_config_text(c,
                    "# comment\n"
                    "model = pareto_tail:1.8\n"
                    "k=3\n"
                    "r=0.8   # trailing\n"
                    "seeds=5,6\n"
                    "seeds=7\n"
                    "check=false\n");
  EXPECT_EQ(c.model, "pareto_tail:1.8");
  EXPECT_EQ(c.k, 3);
  EXPECT_DOUBLE_EQ(c.r, 0.8);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{5, 6, 7}));
  EXPECT_FALSE(c.check);
  EXPECT_THROW(parse_config_text(c, "bogus=1\n"), UsageError);
  EXPECT_THROW(parse_config_text(c, "k\n"), UsageError);
  EXPECT_THROW(parse_config_text(c, "k=-1\n"), UsageError);
}

TEST(Config, Grids) {
  EXPECT_EQ(parse_grid("dyadic:4..6").points, (std::vector<std::uint64_t>{16, 32, 64}));
  EXPECT_EQ(parse_grid("list:9,3,5").hi, 9u);
  const auto r = parse_grid("range:1000..100000");
  EXPECT_EQ(r.lo, 1000u);
  EXPECT_EQ(r.hi, 100000u);
  EXPECT_THROW(parse_grid("dyadic:6..4"), UsageError);
  EXPECT_THROW(parse_grid("cubic:1..2"), UsageError);
  EXPECT_THROW(parse_grid("list:"), UsageError);
  EXPECT_THROW(parse_grid("16"), UsageError);
}

TEST(Config, ResolveDefaultsAndErrors) {
  ExperimentConfig c;
  c.command = "verify-mz";
  const auto r = resolve(c);
  EXPECT_EQ(r.model, "pareto_tail:1.8");
  EXPECT_EQ(r.seeds.size(), 64u);
  EXPECT_EQ(r.seeds, derive_seeds(1, 64));
  c.command = "frobnicate";
  EXPECT_THROW(resolve(c), UsageError);
  c.command = "verify-mz";
  c.model = "nope";
  EXPECT_THROW(resolve(c), UsageError);
  c.model = "";
  c.seeds = {1, 2};
  c.reps = 3;
  EXPECT_THROW(resolve(c), UsageError);
}

TEST(Csv, ThreePointSeries) {
  const auto s = mz_series(additive(2, unary("id"), unary("id")), 1.5, {4, 8, 16}, {11}, {1});
  const auto dir = scratch("csv");
  const auto path = emit_csv(s, dir / "s.csv");
  const auto text = slurp(path);
  EXPECT_EQ(lines(text), 4u);
  EXPECT_EQ(text.substr(0, text.find('\n')), kSeriesHeader);
  EXPECT_NE(text.find("\"additive:id,id\",2,1.5,4,0,11,"), std::string::npos);
  EXPECT_NE(text.find(",k-1+1/r\n"), std::string::npos);
}

TEST(Csv, EmptySeriesCreatesNoFile) {
  NormalizedSumSeries empty;
  const auto dir = scratch("empty");
  EXPECT_THROW(emit_csv(empty, dir / "s.csv"), std::invalid_argument);
  EXPECT_THROW(emit_svg(empty, dir / "s.svg"), std::invalid_argument);
  EXPECT_FALSE(fs::exists(dir / "s.csv"));
  EXPECT_FALSE(fs::exists(dir / "s.svg"));
}

TEST(Csv, DoublesRoundTrip) {
  for (double x : {0.1, 1.0 / 3, 6.02e23, -2.5e-300}) EXPECT_EQ(std::stod(fmt_double(x)), x);
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_field("plain"), "plain");
}

TEST(Svg, ChartCarriesRegimeLabel) {
  const auto s = mz_series(additive(2, unary("id"), unary("id")), 1.5, dyadic_grid(3, 7), {1, 2}, {1});
  const auto svg = series_svg(s);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("n^(k−1+1/r)"), std::string::npos);
  EXPECT_EQ(std::count(svg.begin(), svg.end(), '\n') > 5, true);
  std::size_t polylines = 0;
  for (auto p = svg.find("<polyline"); p != std::string::npos; p = svg.find("<polyline", p + 1)) ++polylines;
  EXPECT_EQ(polylines, 3u);  // two seeds and the reference
  const auto r = mz_series(pareto_tail(2, 0.9), 0.8, dyadic_grid(3, 7), {1}, {1});
  EXPECT_NE(series_svg(r).find("n^(k/r)"), std::string::npos);
}

TEST(Run, GenerateWritesManifestAndPasses) {
  ExperimentConfig c;
  c.command = "generate";
  c.out = scratch("generate").string();
  c.seeds = {3, 4};
  c.threads = 1;
  const auto rep = run(c);
  EXPECT_TRUE(rep.all_pass());
  EXPECT_EQ(rep.exit_code(), kExitOk);
  const auto manifest = slurp(rep.manifest);
  EXPECT_NE(manifest.find("seeds=3\nseeds=4\n"), std::string::npos);
  EXPECT_NE(manifest.find("command=generate\n"), std::string::npos);
  EXPECT_EQ(lines(slurp(fs::path(c.out) / "entries.csv")), 1u + 2 * 30);
}

TEST(Run, DecomposeAndSelftestPass) {
  for (const char* cmd : {"decompose", "selftest"}) {
    ExperimentConfig c;
    c.command = cmd;
    c.out = scratch(cmd).string();
    c.threads = 1;
    const auto rep = run(c);
    EXPECT_TRUE(rep.all_pass()) << cmd;
    EXPECT_FALSE(rep.checks.empty());
  }
}

TEST(Run, VerifyMzIsByteIdenticalAcrossRunsAndThreads) {
  std::vector<std::string> outputs;
  for (int threads : {1, 1, 4}) {
    ExperimentConfig c;
    c.command = "verify-mz";
    c.grid = "dyadic:3..7";
    c.reps = 4;
    c.threads = threads;
    c.out = scratch("det" + std::to_string(outputs.size())).string();
    run(c);
    outputs.push_back(slurp(fs::path(c.out) / "series.csv") + slurp(fs::path(c.out) / "series.svg"));
  }
  EXPECT_EQ(outputs[0], outputs[1]);
  EXPECT_EQ(outputs[0], outputs[2]);
}

TEST(Run, NoCheckAlwaysExitsZero) {
  ExperimentConfig c;
  c.command = "verify-mz";
  c.grid = "dyadic:3..7";
  c.reps = 2;
  c.threads = 1;
  c.check = false;
  c.out = scratch("nocheck").string();
  EXPECT_EQ(run(c).exit_code(), kExitOk);
  c.check = true;
  const auto rep = run(c);
  EXPECT_EQ(rep.exit_code(), rep.all_pass() ? kExitOk : kExitCheckFailed);
}
