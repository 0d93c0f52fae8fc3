// Copyright 2026 The exarray Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "exarray/decomposition.hpp"
#include "exarray/limit_lab.hpp"
#include "exarray/model.hpp"

namespace exarray {

inline constexpr const char* kVersion = "0.3.0";

/// Bad command, model, flag value or config line.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitUsage = 2, kExitRuntime = 3 };

//------------------------------------------------------------------------------
// Formatting
//------------------------------------------------------------------------------

/// Shortest round-trip decimal for doubles; identical bytes on every run.
inline std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string join_labels(const std::vector<Label>& t) {
  std::string out;
  for (std::size_t m = 0; m < t.size(); ++m) out += (m ? " " : "") + std::to_string(t[m]);
  return out;
}

//------------------------------------------------------------------------------
// Configuration
//------------------------------------------------------------------------------

struct ExperimentConfig {
  std::string command = "selftest";
  std::string model;  // empty: per-command default
  int k = 2;
  double r = 1.5;
  double alpha = 1.5;
  std::string grid;  // empty: per-command default
  int reps = 0;      // 0: per-command default
  std::vector<std::uint64_t> seeds;
  std::uint64_t master_seed = 1;
  int mc_samples = kDefaultMcSamples;
  std::string out = "exarray-out";
  bool check = true;
  int threads = default_threads();
};

inline const std::vector<std::string>& known_commands() {
  static const std::vector<std::string> c = {"generate", "decompose", "verify-mz", "verify-lil", "counterexample",
                                             "selftest"};
  return c;
}

inline std::uint64_t parse_u64(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &used, 0);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty() || s[0] == '-') throw UsageError(what + ": expected an unsigned integer, got '" + s + "'");
  return v;
}

inline double parse_double(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw UsageError(what + ": expected a number, got '" + s + "'");
  return v;
}

inline std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(parse_u64(item, "seeds"));
  return out;
}

/// Applies one key=value setting. Repeating `seeds` appends.
inline void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& value) {
  if (key == "command") c.command = value;
  else if (key == "model") c.model = value;
  else if (key == "k") c.k = static_cast<int>(parse_u64(value, "k"));
  else if (key == "r") c.r = parse_double(value, "r");
  else if (key == "alpha") c.alpha = parse_double(value, "alpha");
  else if (key == "grid") c.grid = value;
  else if (key == "reps") c.reps = static_cast<int>(parse_u64(value, "reps"));
  else if (key == "seeds" || key == "seed") {
    for (auto s : parse_seed_list(value)) c.seeds.push_back(s);
  } else if (key == "master_seed") c.master_seed = parse_u64(value, "master_seed");
  else if (key == "mc_samples" || key == "mc-samples") c.mc_samples = static_cast<int>(parse_u64(value, "mc_samples"));
  else if (key == "out") c.out = value;
  else if (key == "check") c.check = value == "true" || value == "1" || value == "yes";
  else if (key == "threads") c.threads = std::max(1, static_cast<int>(parse_u64(value, "threads")));
  else throw UsageError("unknown config key '" + key + "'");
}

/// Flat key=value lines; '#' starts a comment.
inline void parse_config_text(ExperimentConfig& c, const std::string& text) {
  std::stringstream ss(text);
  int line_no = 0;
  for (std::string line; std::getline(ss, line);) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError("config line " + std::to_string(line_no) + ": expected key=value");
    apply_setting(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

/// Grid specs: "dyadic:a..b" (2^a..2^b), "range:a..b" (every n), "list:n1,n2,...".
struct GridSpec {
  std::string kind;
  std::vector<std::uint64_t> points;  // dyadic and list
  std::uint64_t lo = 0, hi = 0;       // range
};

inline GridSpec parse_grid(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw UsageError("grid '" + spec + "': expected kind:values");
  GridSpec g;
  g.kind = spec.substr(0, colon);
  const std::string body = spec.substr(colon + 1);
  auto bounds = [&] {
    const auto dots = body.find("..");
    if (dots == std::string::npos) throw UsageError("grid '" + spec + "': expected a..b");
    return std::pair{parse_u64(body.substr(0, dots), "grid"), parse_u64(body.substr(dots + 2), "grid")};
  };
  if (g.kind == "dyadic") {
    const auto [a, b] = bounds();
    if (b < a || b > 40) throw UsageError("grid '" + spec + "': bad dyadic exponents");
    g.points = dyadic_grid(static_cast<int>(a), static_cast<int>(b));
  } else if (g.kind == "range") {
    std::tie(g.lo, g.hi) = bounds();
    if (g.hi < g.lo) throw UsageError("grid '" + spec + "': empty range");
    for (auto n : log_checkpoints(g.lo, g.hi, 8)) g.points.push_back(n);
  } else if (g.kind == "list") {
    g.points = parse_seed_list(body);
    if (g.points.empty()) throw UsageError("grid '" + spec + "': empty list");
  } else {
    throw UsageError("grid '" + spec + "': kind must be dyadic, range or list");
  }
  if (g.kind != "range") {
    g.lo = *std::min_element(g.points.begin(), g.points.end());
    g.hi = *std::max_element(g.points.begin(), g.points.end());
  }
  return g;
}

/// Per-command defaults and derived seeds, so the manifest is explicit.
inline ExperimentConfig resolve(ExperimentConfig c) {
  const auto& cmds = known_commands();
  if (std::find(cmds.begin(), cmds.end(), c.command) == cmds.end())
    throw UsageError("unknown command '" + c.command + "'");
  struct Defaults {
    const char* model;
    const char* grid;
    int reps;
  };
  static const std::map<std::string, Defaults> table = {
      {"generate", {"additive:id,id", "list:6", 1}},
      {"decompose", {"interaction:id,id", "list:1", 8}},
      {"verify-mz", {"pareto_tail:1.8", "dyadic:4..12", 64}},
      {"verify-lil", {"additive:id,id", "range:1000..100000", 8}},
      {"counterexample", {"stable_factor", "dyadic:4..12", 64}},
      {"selftest", {"additive:id,id", "list:6", 1}},
  };
  const auto& d = table.at(c.command);
  if (c.model.empty()) c.model = d.model;
  if (c.grid.empty()) c.grid = d.grid;
  if (c.reps == 0) c.reps = c.seeds.empty() ? d.reps : static_cast<int>(c.seeds.size());
  if (c.command == "counterexample") {
    std::ostringstream m;
    m << "stable_factor:" << c.alpha;
    c.model = m.str();
    c.r = c.alpha;
  }
  if (c.seeds.empty()) c.seeds = derive_seeds(c.master_seed, static_cast<std::size_t>(c.reps));
  if (static_cast<int>(c.seeds.size()) != c.reps)
    throw UsageError("reps (" + std::to_string(c.reps) + ") differs from the number of seeds (" +
                     std::to_string(c.seeds.size()) + ")");
  if (c.k < 1 || c.k > 6) throw UsageError("k must lie in 1..6");
  if (c.mc_samples < 1) throw UsageError("mc_samples must be positive");
  (void)parse_grid(c.grid);
  try {
    (void)make_model(c.model, c.k);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return c;
}

//------------------------------------------------------------------------------
// Report
//------------------------------------------------------------------------------

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;  // names the CSV rows it came from
};

struct ExperimentReport {
  ExperimentConfig config;
  std::filesystem::path manifest;
  std::vector<std::filesystem::path> csv;
  std::vector<std::filesystem::path> svg;
  std::vector<CheckResult> checks;
  double wall_clock_seconds = 0.0;

  [[nodiscard]] bool all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
  }
  [[nodiscard]] int exit_code() const { return !config.check || all_pass() ? kExitOk : kExitCheckFailed; }
};

/// Whole-file write; the file only appears once its content is complete.
inline void write_file(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
    f << content;
    if (!f) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

inline constexpr const char* kSeriesHeader = "model,k,r,n,replication,seed,raw_sum,normalized,regime";

inline std::string regime_tag(double r) { return r >= 1.0 ? "k-1+1/r" : "k/r"; }

/// One row per (replication, grid point), replication-major.
inline std::string series_csv(const NormalizedSumSeries& s) {
  std::string out = std::string(kSeriesHeader) + "\n";
  for (std::size_t rep = 0; rep < s.seeds.size(); ++rep)
    for (std::size_t g = 0; g < s.grid.size(); ++g) {
      out += csv_field(s.model) + "," + std::to_string(s.k) + "," + fmt_double(s.r) + "," + std::to_string(s.grid[g]) +
             "," + std::to_string(rep) + "," + std::to_string(s.seeds[rep]) + "," + fmt_double(s.raw_sum[rep][g]) +
             "," + fmt_double(s.normalized[rep][g]) + "," + regime_tag(s.r) + "\n";
    }
  return out;
}

inline std::filesystem::path emit_csv(const NormalizedSumSeries& s, const std::filesystem::path& path) {
  require(!s.grid.empty() && !s.seeds.empty(), "emit_csv: empty series");
  write_file(path, series_csv(s));
  return path;
}

//------------------------------------------------------------------------------
// SVG charts
//------------------------------------------------------------------------------

struct Polyline {
  std::vector<double> x, y;
  std::string color = "#4477aa";
  std::string dash;
};

namespace detail {

inline std::string svg_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string palette(std::size_t i) {
  static const char* colors[] = {"#4477aa", "#66ccee", "#228833", "#ccbb44", "#ee6677", "#aa3377", "#bbbbbb", "#332288"};
  return colors[i % 8];
}

/// Axes, decade ticks and labels around [x0,x1] x [y0,y1] in data units; the
/// caller passes data already in the plotted scale (log10 for log axes).
class Canvas {
 public:
  Canvas(double x0, double x1, double y0, double y1) : x0_(x0), x1_(x1), y0_(y0), y1_(y1) {
    if (!(x1_ > x0_)) x1_ = x0_ + 1;
    if (!(y1_ > y0_)) y1_ = y0_ + 1;
  }
  [[nodiscard]] double px(double x) const { return kLeft + (x - x0_) / (x1_ - x0_) * kPlotW; }
  [[nodiscard]] double py(double y) const { return kTop + (1 - (y - y0_) / (y1_ - y0_)) * kPlotH; }

  void polyline(const Polyline& p) {
    std::string pts;
    for (std::size_t i = 0; i < p.x.size(); ++i) {
      if (!std::isfinite(p.x[i]) || !std::isfinite(p.y[i])) continue;
      pts += svg_number(px(p.x[i])) + "," + svg_number(py(p.y[i])) + " ";
    }
    if (pts.empty()) return;
    body_ += "<polyline fill=\"none\" stroke=\"" + p.color + "\" stroke-width=\"1.2\"" +
             (p.dash.empty() ? "" : " stroke-dasharray=\"" + p.dash + "\"") + " points=\"" + pts + "\"/>\n";
  }
  void text(double x, double y, const std::string& s, const std::string& anchor = "start") {
    body_ += "<text x=\"" + svg_number(x) + "\" y=\"" + svg_number(y) + "\" font-size=\"12\" text-anchor=\"" + anchor +
             "\">" + s + "</text>\n";
  }
  void legend(std::size_t row, const std::string& color, const std::string& dash, const std::string& label) {
    const double y = kTop + 14 + 16 * static_cast<double>(row);
    const double x = kLeft + 12;
    body_ += "<line x1=\"" + svg_number(x) + "\" y1=\"" + svg_number(y - 4) + "\" x2=\"" + svg_number(x + 24) +
             "\" y2=\"" + svg_number(y - 4) + "\" stroke=\"" + color + "\" stroke-width=\"2\"" +
             (dash.empty() ? "" : " stroke-dasharray=\"" + dash + "\"") + "/>\n";
    text(x + 30, y, label);
  }

  std::string render(const std::string& title, const std::string& xlabel, const std::string& ylabel, bool log_x,
                     bool log_y) const {
    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(kWidth) + "\" height=\"" +
                    std::to_string(kHeight) + "\" viewBox=\"0 0 " + std::to_string(kWidth) + " " +
                    std::to_string(kHeight) + "\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<text x=\"" + svg_number(kWidth / 2.0) + "\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">" + title +
         "</text>\n";
    s += "<rect x=\"" + svg_number(kLeft) + "\" y=\"" + svg_number(kTop) + "\" width=\"" + svg_number(kPlotW) +
         "\" height=\"" + svg_number(kPlotH) + "\" fill=\"none\" stroke=\"black\"/>\n";
    s += ticks(x0_, x1_, true, log_x) + ticks(y0_, y1_, false, log_y);
    s += "<text x=\"" + svg_number(kLeft + kPlotW / 2) + "\" y=\"" + svg_number(kHeight - 8.0) +
         "\" font-size=\"12\" text-anchor=\"middle\">" + xlabel + "</text>\n";
    s += "<text x=\"14\" y=\"" + svg_number(kTop + kPlotH / 2) + "\" font-size=\"12\" text-anchor=\"middle\" " +
         "transform=\"rotate(-90 14 " + svg_number(kTop + kPlotH / 2) + ")\">" + ylabel + "</text>\n";
    s += "<g clip-path=\"none\">\n" + body_ + "</g>\n</svg>\n";
    return s;
  }

  static constexpr int kWidth = 720, kHeight = 480;
  static constexpr double kLeft = 70, kTop = 34, kPlotW = 620, kPlotH = 390;

 private:
  std::string ticks(double lo, double hi, bool horizontal, bool log_scale) const {
    std::string s;
    double step = 1.0;
    if (!log_scale) {
      const double span = hi - lo;
      step = std::pow(10.0, std::floor(std::log10(span / 4)));
      if (span / step > 10) step *= 2;
    }
    for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9; t += step) {
      std::string label;
      if (log_scale) {
        label = "1e" + std::to_string(static_cast<int>(std::lround(t)));
      } else {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%g", std::abs(t) < 1e-12 ? 0.0 : t);
        label = buf;
      }
      if (horizontal) {
        const double x = px(t);
        s += "<line x1=\"" + svg_number(x) + "\" y1=\"" + svg_number(kTop + kPlotH) + "\" x2=\"" + svg_number(x) +
             "\" y2=\"" + svg_number(kTop + kPlotH + 5) + "\" stroke=\"black\"/>\n";
        s += "<text x=\"" + svg_number(x) + "\" y=\"" + svg_number(kTop + kPlotH + 18) +
             "\" font-size=\"11\" text-anchor=\"middle\">" + label + "</text>\n";
      } else {
        const double y = py(t);
        s += "<line x1=\"" + svg_number(kLeft - 5) + "\" y1=\"" + svg_number(y) + "\" x2=\"" + svg_number(kLeft) +
             "\" y2=\"" + svg_number(y) + "\" stroke=\"black\"/>\n";
        s += "<text x=\"" + svg_number(kLeft - 8) + "\" y=\"" + svg_number(y + 4) +
             "\" font-size=\"11\" text-anchor=\"end\">" + label + "</text>\n";
      }
    }
    return s;
  }

  double x0_, x1_, y0_, y1_;
  std::string body_;
};

}  // namespace detail

/// Log-log chart of |centered sum| against n, one polyline per seed, plus a
/// reference line of slope equal to the normalization exponent.
inline std::string series_svg(const NormalizedSumSeries& s) {
  require(!s.grid.empty() && !s.seeds.empty(), "emit_svg: empty series");
  std::vector<Polyline> lines;
  double ylo = kInf, yhi = -kInf;
  for (std::size_t rep = 0; rep < s.seeds.size(); ++rep) {
    Polyline p;
    p.color = detail::palette(rep);
    for (std::size_t g = 0; g < s.grid.size(); ++g) {
      const double v = std::abs(s.centered_sum[rep][g]);
      p.x.push_back(std::log10(static_cast<double>(s.grid[g])));
      p.y.push_back(v > 0 ? std::log10(v) : std::numeric_limits<double>::quiet_NaN());
      if (v > 0) {
        ylo = std::min(ylo, p.y.back());
        yhi = std::max(yhi, p.y.back());
      }
    }
    lines.push_back(std::move(p));
  }
  const double x0 = std::log10(static_cast<double>(s.grid.front()));
  const double x1 = std::log10(static_cast<double>(s.grid.back()));
  if (!std::isfinite(ylo)) ylo = 0, yhi = 1;
  // reference through the median first point
  std::vector<double> firsts;
  for (const auto& l : lines)
    if (std::isfinite(l.y.front())) firsts.push_back(l.y.front());
  const double anchor = firsts.empty() ? ylo : stats::median(firsts);
  Polyline ref{{x0, x1}, {anchor, anchor + s.exponent * (x1 - x0)}, "#000000", "6,4"};
  ylo = std::min(ylo, std::min(ref.y[0], ref.y[1]));
  yhi = std::max(yhi, std::max(ref.y[0], ref.y[1]));
  detail::Canvas c(x0, x1, std::floor(ylo), std::ceil(yhi));
  for (const auto& l : lines) c.polyline(l);
  c.polyline(ref);
  c.legend(0, "#000000", "6,4", s.regime + " = n^" + fmt_double(std::round(s.exponent * 1000) / 1000));
  c.legend(1, detail::palette(0), "", "|sum| per seed (" + std::to_string(s.seeds.size()) + " seeds)");
  return c.render(s.model + ", k=" + std::to_string(s.k) + ", r=" + fmt_double(s.r), "n", "|sum over I(n,k)|", true,
                  true);
}

inline std::filesystem::path emit_svg(const NormalizedSumSeries& s, const std::filesystem::path& path) {
  const std::string content = series_svg(s);
  write_file(path, content);
  return path;
}

/// Envelope chart: the LIL statistic per seed against log n with +/- sqrt(V).
inline std::string envelope_svg(const LilEnvelope& env) {
  require(!env.trajectories.empty(), "envelope_svg: no trajectories");
  const double root = std::sqrt(std::max(env.v, 0.0));
  double ylo = -root, yhi = root;
  std::vector<Polyline> lines;
  for (std::size_t i = 0; i < env.trajectories.size(); ++i) {
    const auto& t = env.trajectories[i];
    Polyline p;
    p.color = detail::palette(i);
    for (std::size_t j = 0; j < t.checkpoints.size(); ++j) {
      p.x.push_back(std::log10(static_cast<double>(t.checkpoints[j])));
      p.y.push_back(t.statistic[j]);
      ylo = std::min(ylo, t.statistic[j]);
      yhi = std::max(yhi, t.statistic[j]);
    }
    lines.push_back(std::move(p));
  }
  const double x0 = std::log10(static_cast<double>(env.n_min)), x1 = std::log10(static_cast<double>(env.n_max));
  const double pad = 0.1 * (yhi - ylo + 1e-9);
  detail::Canvas c(x0, x1, ylo - pad, yhi + pad);
  for (const auto& l : lines) c.polyline(l);
  c.polyline({{x0, x1}, {root, root}, "#000000", "6,4"});
  c.polyline({{x0, x1}, {-root, -root}, "#000000", "6,4"});
  c.legend(0, "#000000", "6,4", "±sqrt(V), V = " + fmt_double(env.v));
  return c.render(env.model + ", k=" + std::to_string(env.k) + ": sum(X - mean) / sqrt(2 n^(2k-1) log log n)", "n",
                  "statistic", true, false);
}

//------------------------------------------------------------------------------
// Experiments
//------------------------------------------------------------------------------

namespace detail {

inline std::string rows(std::size_t first, std::size_t last, const std::string& file) {
  return "[" + file + " rows " + std::to_string(first) + "-" + std::to_string(last) + "]";
}

inline std::string manifest_text(const ExperimentConfig& c, const ExperimentReport& r) {
  std::string s;
  s += "version=" + std::string(kVersion) + "\n";
  s += "command=" + c.command + "\n";
  s += "model=" + c.model + "\n";
  s += "k=" + std::to_string(c.k) + "\n";
  s += "r=" + fmt_double(c.r) + "\n";
  if (c.command == "counterexample") s += "alpha=" + fmt_double(c.alpha) + "\n";
  s += "grid=" + c.grid + "\n";
  s += "reps=" + std::to_string(c.reps) + "\n";
  s += "master_seed=" + std::to_string(c.master_seed) + "\n";
  for (auto seed : c.seeds) s += "seeds=" + std::to_string(seed) + "\n";
  s += "mc_samples=" + std::to_string(c.mc_samples) + "\n";
  s += "threads=" + std::to_string(c.threads) + "\n";
  s += "check=" + std::string(c.check ? "true" : "false") + "\n";
  for (const auto& p : r.csv) s += "csv=" + p.filename().string() + "\n";
  for (const auto& p : r.svg) s += "svg=" + p.filename().string() + "\n";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", r.wall_clock_seconds);
  s += "wall_clock_seconds=" + std::string(buf) + "\n";
  return s;
}

inline void run_generate(const ExperimentConfig& c, ExperimentReport& rep, const std::filesystem::path& dir) {
  const auto model = make_model(c.model, c.k);
  const auto g = parse_grid(c.grid);
  std::string csv = "model,k,seed,tuple,value\n";
  std::size_t row = 1;
  CompensatedSum block_total;
  for (auto seed : c.seeds) {
    const UniformSource src(seed, model.k());
    for (const auto& [t, v] : sample_block(model, src, g.hi, false)) {
      csv += csv_field(model.name) + "," + std::to_string(model.k()) + "," + std::to_string(seed) + "," +
             join_labels(t.entries()) + "," + fmt_double(v) + "\n";
      block_total += v;
      ++row;
    }
  }
  write_file(dir / "entries.csv", csv);
  rep.csv.push_back(dir / "entries.csv");
  CompensatedSum stream_total;
  for (auto seed : c.seeds) stream_total += streaming_sum(model, UniformSource(seed, model.k()), g.hi, c.threads);
  const double gap = std::abs(block_total.value() - stream_total.value()) /
                     std::max(1.0, std::abs(stream_total.value()));
  rep.checks.push_back({"block sum equals streaming sum", gap <= 1e-12,
                        "relative gap " + fmt_double(gap) + " " + rows(2, row, "entries.csv")});
}

inline void run_decompose(const ExperimentConfig& c, ExperimentReport& rep, const std::filesystem::path& dir) {
  const auto model = make_model(c.model, c.k);
  std::string csv = "model,k,seed,tuple,level,h,h_binomial,h_std_error,method\n";
  std::size_t row = 1;
  double worst_gap = 0.0;
  bool all_ok = true;
  ProjectionOptions po;
  po.mc_samples = c.mc_samples;
  const auto probes = disjoint_probe_tuples(model.k(), 1);
  for (auto seed : c.seeds) {
    const UniformSource src(seed, model.k());
    const auto h = hoeffding(model, src, probes.front(), po);
    CompensatedSum total;
    double se2 = 0;
    for (int l = 0; l <= model.k(); ++l) {
      total += h.h[l];
      se2 += h.h_std_error[l] * h.h_std_error[l];
      csv += csv_field(model.name) + "," + std::to_string(model.k()) + "," + std::to_string(seed) + "," +
             join_labels(h.tuple.entries()) + "," + std::to_string(l) + "," + fmt_double(h.h[l]) + "," +
             fmt_double(h.h_binomial[l]) + "," + fmt_double(h.h_std_error[l]) + "," +
             (h.method == Method::analytic ? "analytic" : "monte_carlo") + "\n";
      ++row;
    }
    const double gap = std::abs(total.value() - h.entry);
    worst_gap = std::max(worst_gap, gap);
    const double tol = h.method == Method::analytic ? 1e-12 : kToleranceSe * std::sqrt(se2) + 1e-12;
    all_ok = all_ok && gap <= tol && h.recombination_gap <= std::max(1e-12, tol);
  }
  write_file(dir / "hoeffding.csv", csv);
  rep.csv.push_back(dir / "hoeffding.csv");
  rep.checks.push_back({"components sum to the entry", all_ok,
                        "max |sum H - X| = " + fmt_double(worst_gap) + " " + rows(2, row, "hoeffding.csv")});
}

inline void add_series_checks(const NormalizedSumSeries& s, ExperimentReport& rep, bool expect_convergence) {
  const std::size_t last_row = 1 + s.seeds.size() * s.grid.size();
  const auto lr = s.lr_moments();
  if (expect_convergence) {
    const bool mono = s.grid.size() >= 5 && monotone_tail(lr, 5);
    std::string d = "mean |S_n|^r at the last 5 grid points:";
    for (std::size_t g = lr.size() - std::min<std::size_t>(5, lr.size()); g < lr.size(); ++g) d += " " + fmt_double(lr[g]);
    rep.checks.push_back({"L^r moment decreases over the last 5 grid points", mono, d + " " + rows(2, last_row, "series.csv")});
    if (s.grid.size() >= 5 && s.seeds.size() >= 16) {
      const auto fit = rate_fit(s);
      const bool gap = !fit.degenerate && fit.slope < s.exponent - 0.05;
      rep.checks.push_back({"rate slope below the normalization exponent", gap,
                            "slope " + fmt_double(fit.slope) + " ± " + fmt_double(fit.half_width) + " vs exponent " +
                                fmt_double(s.exponent) + " " + rows(2, last_row, "series.csv")});
    }
  }
}

inline void run_verify_mz(const ExperimentConfig& c, ExperimentReport& rep, const std::filesystem::path& dir) {
  const auto model = make_model(c.model, c.k);
  const auto g = parse_grid(c.grid);
  MzOptions mo;
  mo.threads = c.threads;
  mo.estimate_missing_mean = true;
  mo.mean_seed = c.master_seed;
  const auto s = mz_series(model, c.r, g.points, c.seeds, mo);
  rep.csv.push_back(emit_csv(s, dir / "series.csv"));
  rep.svg.push_back(emit_svg(s, dir / "series.svg"));
  if (s.hypothesis_violated)
    rep.checks.push_back({"moment hypothesis", false,
                          "model moment exponent does not exceed r; convergence is not guaranteed"});
  add_series_checks(s, rep, true);
}

inline void run_verify_lil(const ExperimentConfig& c, ExperimentReport& rep, const std::filesystem::path& dir) {
  const auto model = make_model(c.model, c.k);
  const auto g = parse_grid(c.grid);
  if (!model.finite_second_moment()) throw UsageError("verify-lil: model '" + model.name + "' has no finite second moment");
  VOptions vo;
  vo.projection.mc_samples = c.mc_samples;
  const auto v = estimate_V(model, c.master_seed, vo);
  const double v_band = model.symmetric && model.has_analytic(PatternVector::slot_bit(model.k(), 0))
                            ? v.conditional_variance
                            : v.covariance_form;
  const auto env = lil_envelope(model, std::max<std::uint64_t>(g.lo, 3), g.hi, c.seeds, v_band, c.threads);

  std::string vcsv = "model,k,estimator,value,std_error,replications\n";
  vcsv += csv_field(model.name) + "," + std::to_string(model.k()) + ",covariance," + fmt_double(v.covariance_form) + "," +
          fmt_double(v.covariance_form_se) + "," + std::to_string(v.replications) + "\n";
  vcsv += csv_field(model.name) + "," + std::to_string(model.k()) + ",conditional_variance," +
          fmt_double(v.conditional_variance) + "," + fmt_double(v.conditional_variance_se) + "," +
          std::to_string(v.replications) + "\n";
  write_file(dir / "v_estimates.csv", vcsv);
  rep.csv.push_back(dir / "v_estimates.csv");

  std::string lcsv = "model,k,seed,n,statistic,running_max,running_min\n";
  std::size_t row = 1;
  for (const auto& t : env.trajectories)
    for (std::size_t j = 0; j < t.checkpoints.size(); ++j, ++row)
      lcsv += csv_field(model.name) + "," + std::to_string(model.k()) + "," + std::to_string(t.seed) + "," +
              std::to_string(t.checkpoints[j]) + "," + fmt_double(t.statistic[j]) + "," + fmt_double(t.running_max) +
              "," + fmt_double(t.running_min) + "\n";
  write_file(dir / "lil.csv", lcsv);
  rep.csv.push_back(dir / "lil.csv");
  write_file(dir / "lil_envelope.svg", envelope_svg(env));
  rep.svg.push_back(dir / "lil_envelope.svg");

  rep.checks.push_back({"V estimators agree within 3 SE", v.agree(3.0),
                        "A = " + fmt_double(v.covariance_form) + ", B = " + fmt_double(v.conditional_variance) +
                            ", combined SE " + fmt_double(v.combined_se()) + " " + rows(2, 3, "v_estimates.csv")});
  const bool nonneg = v.covariance_form >= -3 * v.covariance_form_se &&
                      v.conditional_variance >= -3 * v.conditional_variance_se;
  rep.checks.push_back({"V >= -3 SE", nonneg, rows(2, 3, "v_estimates.csv")});
  const int inside = env.within_band(0.4, 1.3);
  const int need = static_cast<int>(std::ceil(7.0 / 8.0 * static_cast<double>(env.trajectories.size())));
  rep.checks.push_back({"LIL peak within (0.4, 1.3) sqrt(V)", inside >= need,
                        std::to_string(inside) + " of " + std::to_string(env.trajectories.size()) +
                            " seeds inside " + rows(2, row, "lil.csv")});
}

inline void run_counterexample(const ExperimentConfig& c, ExperimentReport& rep, const std::filesystem::path& dir) {
  const auto g = parse_grid(c.grid);
  CounterexampleOptions co;
  co.threads = c.threads;
  const auto ce = counterexample(c.alpha, c.k, g.points, c.seeds, co);
  rep.csv.push_back(emit_csv(ce.series, dir / "series.csv"));
  rep.svg.push_back(emit_svg(ce.series, dir / "series.svg"));
  const std::size_t last_row = 1 + ce.series.seeds.size() * ce.series.grid.size();
  std::string ks = "model,statistic,value\n";
  ks += csv_field(ce.series.model) + ",ks_distance," + fmt_double(ce.ks_distance) + "\n";
  ks += csv_field(ce.series.model) + ",ks_critical_1pct," + fmt_double(ce.ks_critical) + "\n";
  ks += csv_field(ce.series.model) + ",factorization_max_rel_error," + fmt_double(ce.factorization_max_rel_error) + "\n";
  write_file(dir / "counterexample.csv", ks);
  rep.csv.push_back(dir / "counterexample.csv");
  rep.checks.push_back({"normalized sums do not shrink", ce.non_shrinking,
                        "median |S_n| " + fmt_double(ce.median_first) + " at n=" + std::to_string(ce.series.grid.front()) +
                            ", " + fmt_double(ce.median_last) + " at n=" + std::to_string(ce.series.grid.back()) + " " +
                            rows(2, last_row, "series.csv")});
  rep.checks.push_back({"sum factorizes over the first label", ce.factorization_holds,
                        "max relative error " + fmt_double(ce.factorization_max_rel_error) + " for n <= " +
                            std::to_string(ce.factorization_max_n) + " " + rows(4, 4, "counterexample.csv")});
  rep.checks.push_back({"n^(-1/alpha) sum matches a single draw (KS)", ce.self_similar,
                        "D = " + fmt_double(ce.ks_distance) + " < " + fmt_double(ce.ks_critical) + " " +
                            rows(2, 3, "counterexample.csv")});
}

}  // namespace detail

/// Fast invariant suite used by `selftest`.
inline std::vector<CheckResult> selftest_checks(int threads);

inline ExperimentReport run(const ExperimentConfig& raw) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentReport rep;
  rep.config = resolve(raw);
  const auto& c = rep.config;
  const std::filesystem::path dir(c.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + dir.string() + "': " + ec.message());

  if (c.command == "generate") detail::run_generate(c, rep, dir);
  else if (c.command == "decompose") detail::run_decompose(c, rep, dir);
  else if (c.command == "verify-mz") detail::run_verify_mz(c, rep, dir);
  else if (c.command == "verify-lil") detail::run_verify_lil(c, rep, dir);
  else if (c.command == "counterexample") detail::run_counterexample(c, rep, dir);
  else {
    rep.checks = selftest_checks(c.threads);
    std::string csv = "check,pass,detail\n";
    for (const auto& ch : rep.checks) csv += csv_field(ch.name) + "," + (ch.pass ? "1" : "0") + "," + csv_field(ch.detail) + "\n";
    write_file(dir / "selftest.csv", csv);
    rep.csv.push_back(dir / "selftest.csv");
  }

  std::string summary;
  for (const auto& ch : rep.checks) summary += std::string(ch.pass ? "PASS " : "FAIL ") + ch.name + ": " + ch.detail + "\n";
  write_file(dir / "summary.txt", summary);
  rep.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  rep.manifest = dir / "manifest.txt";
  write_file(rep.manifest, detail::manifest_text(c, rep));
  return rep;
}

}  // namespace exarray

#include "exarray/selftest.hpp"
