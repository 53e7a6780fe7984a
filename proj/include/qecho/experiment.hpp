#pragma once

#include "qecho/ed_oracle.hpp"
#include "qecho/observables.hpp"

#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

namespace qecho::runner {

enum class ScenarioKind {
  epsilon_sweep,
  quench_protocol_grid,
  lambda_scan,
  derivative_scan,
  size_scaling,
  short_time,
  alpha_vs_distance,
  revival,
  independence,
  oracle_compare,
};

inline const char* to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::epsilon_sweep: return "epsilon-sweep";
    case ScenarioKind::quench_protocol_grid: return "quench-protocol-grid";
    case ScenarioKind::lambda_scan: return "lambda-scan-at-fixed-time";
    case ScenarioKind::derivative_scan: return "derivative-scan";
    case ScenarioKind::size_scaling: return "size-scaling";
    case ScenarioKind::short_time: return "short-time";
    case ScenarioKind::alpha_vs_distance: return "alpha-vs-distance";
    case ScenarioKind::revival: return "revival";
    case ScenarioKind::independence: return "independence";
    case ScenarioKind::oracle_compare: return "oracle-compare";
  }
  return "?";
}

struct TimeGridSpec {
  double t_max = 10.0;
  double dt = 0.05;
  std::vector<double> explicit_times;

  std::vector<double> materialize() const {
    if (!explicit_times.empty()) return explicit_times;
    return time_grid(t_max, dt);
  }
};

struct Scenario {
  ScenarioKind kind = ScenarioKind::epsilon_sweep;
  QuenchProtocol base;
  std::string sweep_param;
  std::vector<double> sweep_values;
  std::vector<double> lambda_i_values;
  std::vector<double> lambda_f_values;
  std::vector<int> sizes;
  TimeGridSpec time_grid;
  double t_fixed = 10.0;
  int cases = 20;
  std::uint64_t seed = 1;
  bool fit_alpha = true;
  double memory_limit_gb = 4.0;
  std::string output = "out.csv";

  void validate() const;
};

struct ResultTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<std::pair<std::string, std::string>> metadata;

  void add_meta(const std::string& key, const std::string& value) { metadata.emplace_back(key, value); }
  void add_meta(const std::string& key, double value) { metadata.emplace_back(key, format_full(value)); }
};

// ------------------------------------------------------------- config parsing

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_number(const std::string& value, int line) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0')
    throw ValidationError("line " + std::to_string(line) + ": expected a number, got '" + value + "'");
  return v;
}

inline long parse_integer(const std::string& value, int line) {
  const double v = parse_number(value, line);
  const long i = std::lround(v);
  if (std::abs(v - static_cast<double>(i)) > 1e-9)
    throw ValidationError("line " + std::to_string(line) + ": expected an integer, got '" + value + "'");
  return i;
}

inline std::vector<double> parse_list(const std::string& value, int line) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty())
      throw ValidationError("line " + std::to_string(line) + ": empty entry in list");
    out.push_back(parse_number(item, line));
  }
  if (out.empty()) throw ValidationError("line " + std::to_string(line) + ": empty list");
  return out;
}

inline ScenarioKind parse_kind(const std::string& value, int line) {
  static const std::map<std::string, ScenarioKind> kinds = {
      {"epsilon-sweep", ScenarioKind::epsilon_sweep},
      {"quench-protocol-grid", ScenarioKind::quench_protocol_grid},
      {"lambda-scan-at-fixed-time", ScenarioKind::lambda_scan},
      {"derivative-scan", ScenarioKind::derivative_scan},
      {"size-scaling", ScenarioKind::size_scaling},
      {"short-time", ScenarioKind::short_time},
      {"alpha-vs-distance", ScenarioKind::alpha_vs_distance},
      {"revival", ScenarioKind::revival},
      {"independence", ScenarioKind::independence},
      {"oracle-compare", ScenarioKind::oracle_compare},
  };
  const auto it = kinds.find(value);
  if (it == kinds.end()) throw ValidationError("line " + std::to_string(line) + ": unknown kind '" + value + "'");
  return it->second;
}

inline Boundary parse_boundary(const std::string& value, int line) {
  if (value == "periodic-spin") return Boundary::periodic;
  if (value == "open") return Boundary::open;
  throw ValidationError("line " + std::to_string(line) + ": unknown boundary '" + value + "'");
}

}  // namespace detail

// Line-oriented `key = value` document. Unknown and duplicate keys are hard
// errors; '#' starts a comment line.
inline Scenario parse_config(const std::string& text) {
  Scenario s;
  std::map<std::string, int> seen;
  bool have_kind = false;
  std::stringstream stream(text);
  std::string raw;
  int line = 0;
  while (std::getline(stream, raw)) {
    ++line;
    const std::string stripped = detail::trim(raw);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ValidationError("line " + std::to_string(line) + ": expected 'key = value'");
    const std::string key = detail::trim(stripped.substr(0, eq));
    const std::string value = detail::trim(stripped.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ValidationError("line " + std::to_string(line) + ": expected 'key = value'");
    if (auto [it, inserted] = seen.emplace(key, line); !inserted)
      throw ValidationError("line " + std::to_string(line) + ": duplicate key '" + key + "' (first on line " +
                            std::to_string(it->second) + ")");

    if (key == "kind") {
      s.kind = detail::parse_kind(value, line);
      have_kind = true;
    } else if (key == "n") {
      s.base.n_sites = static_cast<int>(detail::parse_integer(value, line));
    } else if (key == "j") {
      s.base.coupling_j = detail::parse_number(value, line);
    } else if (key == "lambda_i") {
      s.base.lambda_initial = detail::parse_number(value, line);
    } else if (key == "lambda_f") {
      s.base.lambda_final = detail::parse_number(value, line);
    } else if (key == "epsilon") {
      s.base.epsilon = detail::parse_number(value, line);
    } else if (key == "d") {
      s.base.separation = static_cast<int>(detail::parse_integer(value, line));
    } else if (key == "boundary") {
      s.base.boundary = detail::parse_boundary(value, line);
    } else if (key == "sweep_param") {
      s.sweep_param = value;
    } else if (key == "sweep_values") {
      s.sweep_values = detail::parse_list(value, line);
    } else if (key == "sweep_range") {
      const auto r = detail::parse_list(value, line);
      if (r.size() != 3)
        throw ValidationError("line " + std::to_string(line) + ": sweep_range needs start,stop,step");
      s.sweep_values = range_grid(r[0], r[1], r[2]);
    } else if (key == "lambda_i_values") {
      s.lambda_i_values = detail::parse_list(value, line);
    } else if (key == "lambda_f_values") {
      s.lambda_f_values = detail::parse_list(value, line);
    } else if (key == "sizes") {
      for (double v : detail::parse_list(value, line)) s.sizes.push_back(static_cast<int>(std::lround(v)));
    } else if (key == "t_max") {
      s.time_grid.t_max = detail::parse_number(value, line);
    } else if (key == "dt") {
      s.time_grid.dt = detail::parse_number(value, line);
    } else if (key == "times") {
      s.time_grid.explicit_times = detail::parse_list(value, line);
    } else if (key == "t_fixed") {
      s.t_fixed = detail::parse_number(value, line);
    } else if (key == "cases") {
      s.cases = static_cast<int>(detail::parse_integer(value, line));
    } else if (key == "seed") {
      s.seed = static_cast<std::uint64_t>(detail::parse_integer(value, line));
    } else if (key == "fit_alpha") {
      s.fit_alpha = detail::parse_integer(value, line) != 0;
    } else if (key == "memory_limit_gb") {
      s.memory_limit_gb = detail::parse_number(value, line);
    } else if (key == "output") {
      s.output = value;
    } else {
      throw ValidationError("line " + std::to_string(line) + ": unknown key '" + key + "'");
    }
  }
  if (!have_kind) throw ValidationError("missing required key 'kind'");
  s.validate();
  return s;
}

inline void Scenario::validate() const {
  base.validate();
  const auto require_sweep = [&](std::initializer_list<const char*> allowed, const char* fallback) {
    const std::string param = sweep_param.empty() ? fallback : sweep_param;
    for (const char* a : allowed)
      if (param == a) return;
    throw ValidationError("sweep parameter '" + param + "' not valid for kind " + to_string(kind));
  };
  switch (kind) {
    case ScenarioKind::epsilon_sweep:
    case ScenarioKind::revival:
    case ScenarioKind::independence:
      require_sweep({"epsilon", "d", "lambda_i", "lambda_f"},
                    kind == ScenarioKind::epsilon_sweep ? "epsilon" : (kind == ScenarioKind::revival ? "d" : "lambda_i"));
      if (sweep_values.empty()) throw ValidationError("sweep value list must not be empty");
      break;
    case ScenarioKind::quench_protocol_grid:
      if (lambda_i_values.empty() || lambda_f_values.empty())
        throw ValidationError("quench-protocol-grid needs lambda_i_values and lambda_f_values");
      break;
    case ScenarioKind::lambda_scan:
      require_sweep({"lambda_i", "lambda_f"}, "lambda_i");
      if (sweep_values.empty()) throw ValidationError("sweep value list must not be empty");
      break;
    case ScenarioKind::derivative_scan:
      require_sweep({"lambda_i", "lambda_f"}, "lambda_i");
      break;
    case ScenarioKind::size_scaling:
      if (sizes.size() < 4) throw ValidationError("size-scaling needs at least 4 sizes");
      break;
    case ScenarioKind::short_time:
      require_sweep({"lambda_f"}, "lambda_f");
      if (sweep_values.empty()) throw ValidationError("sweep value list must not be empty");
      break;
    case ScenarioKind::alpha_vs_distance:
      require_sweep({"d"}, "d");
      if (sweep_values.empty()) throw ValidationError("sweep value list must not be empty");
      break;
    case ScenarioKind::oracle_compare:
      if (cases < 1) throw ValidationError("oracle-compare needs at least one case");
      if (base.n_sites > oracle::kMaxSitesEcho)
        throw ValidationError("oracle-compare limited to n <= 10");
      break;
  }
  for (int n : sizes) {
    QuenchProtocol q = base;
    q.n_sites = n;
    if (n <= q.separation) q.separation = 0;  // sizes override n; separation rechecked per size
    q.validate();
  }
  for (double v : sweep_values)
    if (!std::isfinite(v)) throw ValidationError("sweep values must be finite");
  for (const auto* list : {&lambda_i_values, &lambda_f_values})
    for (double v : *list)
      if (!std::isfinite(v) || v < 0) throw ValidationError("field lists must be non-negative");
}

// ------------------------------------------------------------ resource guards

namespace detail {

inline void guard_fermion_run(int n_sites, double memory_limit_gb) {
  if (n_sites > 2048) throw ValidationError("fermion path limited to n <= 2048");
  unsigned threads = std::thread::hardware_concurrency();
  if (threads == 0) threads = 1;
  const double dim = 2.0 * n_sites;
  const double bytes = 110.0 * dim * dim * static_cast<double>(threads);
  if (bytes > memory_limit_gb * (1ull << 30))
    throw ValidationError("estimated memory " + format_full(bytes / double(1ull << 30)) +
                          " GiB exceeds the configured limit");
}

inline QuenchProtocol with_param(QuenchProtocol p, const std::string& param, double value) {
  if (param == "epsilon") {
    p.epsilon = value;
  } else if (param == "d") {
    p.separation = static_cast<int>(std::lround(value));
  } else if (param == "lambda_i") {
    p.lambda_initial = value;
  } else if (param == "lambda_f") {
    p.lambda_final = value;
  } else {
    throw ValidationError("unknown sweep parameter '" + param + "'");
  }
  p.validate();
  return p;
}

inline void append_protocol_meta(ResultTable& table, const QuenchProtocol& p) {
  table.add_meta("n", static_cast<double>(p.n_sites));
  table.add_meta("j", p.coupling_j);
  table.add_meta("lambda_i", p.lambda_initial);
  table.add_meta("lambda_f", p.lambda_final);
  table.add_meta("epsilon", p.epsilon);
  table.add_meta("d", static_cast<double>(p.separation));
  table.add_meta("boundary", std::string(qecho::to_string(p.boundary)));
}

inline void append_grid_meta(ResultTable& table, const TimeGridSpec& g) {
  if (g.explicit_times.empty()) {
    table.add_meta("t_max", g.t_max);
    table.add_meta("dt", g.dt);
  } else {
    table.add_meta("times", static_cast<double>(g.explicit_times.size()));
  }
}

// deterministic uniform double in [0, 1) independent of the standard library's
// distribution implementation
struct UniformSource {
  std::mt19937_64 engine;
  explicit UniformSource(std::uint64_t seed) : engine(seed) {}
  double next() { return static_cast<double>(engine() >> 11) * 0x1.0p-53; }
  double in(double lo, double hi) { return lo + (hi - lo) * next(); }
  int below(int n) { return static_cast<int>(next() * n) % n; }
};

}  // namespace detail

// ----------------------------------------------------------- scenario runners

namespace detail {

inline ResultTable run_parameter_sweep(const Scenario& s) {
  guard_fermion_run(s.base.n_sites, s.memory_limit_gb);
  const std::string param = s.sweep_param.empty() ? "epsilon" : s.sweep_param;
  const auto times = s.time_grid.materialize();
  std::vector<std::vector<double>> echoes(s.sweep_values.size());
  parallel_for(s.sweep_values.size(), [&](std::size_t i) {
    const QuenchProtocol p = with_param(s.base, param, s.sweep_values[i]);
    echoes[i] = echo_timeseries(p, times).echo;
  });
  ResultTable table;
  table.columns = {param, "t", "L", "concurrence"};
  for (std::size_t i = 0; i < s.sweep_values.size(); ++i)
    for (std::size_t k = 0; k < times.size(); ++k)
      table.rows.push_back({s.sweep_values[i], times[k], echoes[i][k], concurrence_from_echo(echoes[i][k])});
  return table;
}

inline ResultTable run_grid(const Scenario& s) {
  guard_fermion_run(s.base.n_sites, s.memory_limit_gb);
  const auto times = s.time_grid.materialize();
  const auto& lis = s.lambda_i_values;
  const auto& lfs = s.lambda_f_values;

  // covariances depend on lambda_i only, channel pairs on lambda_f only
  std::vector<MatrixXd> c0(lis.size());
  parallel_for(lis.size(), [&](std::size_t i) {
    c0[i] = ground_state_covariance(
        decompose_uniform(s.base.n_sites, s.base.coupling_j, lis[i], s.base.boundary));
  });
  std::vector<BdGDecomposition> dec_dd(lfs.size()), dec_uu(lfs.size());
  parallel_for(lfs.size(), [&](std::size_t f) {
    QuenchProtocol p = s.base;
    p.lambda_initial = lis[0];
    p.lambda_final = lfs[f];
    dec_dd[f] = channel_decomposition(p, Channel::down_down, Stage::post_quench);
    dec_uu[f] = channel_decomposition(p, Channel::up_up, Stage::post_quench);
  });

  std::vector<std::vector<double>> echoes(lis.size() * lfs.size());
  parallel_for(echoes.size(), [&](std::size_t slot) {
    const std::size_t i = slot / lfs.size();
    const std::size_t f = slot % lfs.size();
    EchoEngine engine(c0[i], dec_dd[f], dec_uu[f]);
    echoes[slot] = engine.echo_at(times);
  });

  ResultTable table;
  table.columns = {"lambda_i", "lambda_f", "t", "L", "concurrence"};
  for (std::size_t i = 0; i < lis.size(); ++i)
    for (std::size_t f = 0; f < lfs.size(); ++f) {
      const auto& echo = echoes[i * lfs.size() + f];
      for (std::size_t k = 0; k < times.size(); ++k)
        table.rows.push_back({lis[i], lfs[f], times[k], echo[k], concurrence_from_echo(echo[k])});
    }
  return table;
}

inline ResultTable run_lambda_scan(const Scenario& s) {
  guard_fermion_run(s.base.n_sites, s.memory_limit_gb);
  const std::string param = s.sweep_param.empty() ? "lambda_i" : s.sweep_param;
  const bool scan_initial = param == "lambda_i";
  const std::vector<double> curves = scan_initial
                                         ? (s.lambda_f_values.empty() ? std::vector<double>{s.base.lambda_final}
                                                                      : s.lambda_f_values)
                                         : (s.lambda_i_values.empty() ? std::vector<double>{s.base.lambda_initial}
                                                                      : s.lambda_i_values);
  const auto& grid = s.sweep_values;
  const double t = s.t_fixed;

  // polarized-initial-state reference (J = 0 covariance) for the saturation limit
  const MatrixXd c0_polarized =
      ground_state_covariance(decompose_uniform(s.base.n_sites, 0.0, 1.0, s.base.boundary));

  std::vector<std::vector<double>> echo(curves.size(), std::vector<double>(grid.size()));
  std::vector<std::vector<double>> echo_pol(curves.size(), std::vector<double>(grid.size()));

  if (scan_initial) {
    std::vector<BdGDecomposition> dec_dd(curves.size()), dec_uu(curves.size());
    std::vector<double> pol_value(curves.size());
    parallel_for(curves.size(), [&](std::size_t c) {
      QuenchProtocol p = s.base;
      p.lambda_final = curves[c];
      dec_dd[c] = channel_decomposition(p, Channel::down_down, Stage::post_quench);
      dec_uu[c] = channel_decomposition(p, Channel::up_up, Stage::post_quench);
      EchoEngine pol(c0_polarized, dec_dd[c], dec_uu[c]);
      pol_value[c] = pol.echo_at(t);
    });
    parallel_for(grid.size(), [&](std::size_t i) {
      const MatrixXd c0 = ground_state_covariance(
          decompose_uniform(s.base.n_sites, s.base.coupling_j, grid[i], s.base.boundary));
      for (std::size_t c = 0; c < curves.size(); ++c) {
        EchoEngine engine(c0, dec_dd[c], dec_uu[c]);
        echo[c][i] = engine.echo_at(t);
        echo_pol[c][i] = pol_value[c];
      }
    });
  } else {
    std::vector<MatrixXd> c0(curves.size());
    parallel_for(curves.size(), [&](std::size_t c) {
      c0[c] = ground_state_covariance(
          decompose_uniform(s.base.n_sites, s.base.coupling_j, curves[c], s.base.boundary));
    });
    parallel_for(grid.size(), [&](std::size_t i) {
      QuenchProtocol p = s.base;
      p.lambda_final = grid[i];
      const auto dec_dd = channel_decomposition(p, Channel::down_down, Stage::post_quench);
      const auto dec_uu = channel_decomposition(p, Channel::up_up, Stage::post_quench);
      EchoEngine pol(c0_polarized, dec_dd, dec_uu);
      const double pol_value = pol.echo_at(t);
      for (std::size_t c = 0; c < curves.size(); ++c) {
        EchoEngine engine(c0[c], dec_dd, dec_uu);
        echo[c][i] = engine.echo_at(t);
        echo_pol[c][i] = pol_value;
      }
    });
  }

  ResultTable table;
  table.columns = {"lambda_i", "lambda_f", "t", "L", "concurrence", "L_polarized"};
  for (std::size_t c = 0; c < curves.size(); ++c)
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double li = scan_initial ? grid[i] : curves[c];
      const double lf = scan_initial ? curves[c] : grid[i];
      table.rows.push_back({li, lf, t, echo[c][i], concurrence_from_echo(echo[c][i]), echo_pol[c][i]});
    }
  table.add_meta("t_fixed", t);
  return table;
}

// window and step used for the scans that have to resolve the near-critical
// derivative peak; the window shrinks with the system size like the peak itself
inline std::vector<double> size_scan_grid(int n) {
  const double w = std::clamp(2.6 / n, 0.009, 0.055);
  return range_grid(1.0 - w, 1.0 + w, w / 26.0);
}

struct DerivativeSweep {
  int n_sites = 0;
  double curve_value = 0;  // the lambda held fixed
  std::vector<double> grid;
  std::vector<double> echo;
  std::vector<double> derivative;
};

inline std::vector<DerivativeSweep> compute_derivative_sweeps(const Scenario& s) {
  const std::string param = s.sweep_param.empty() ? "lambda_i" : s.sweep_param;
  const bool scan_initial = param == "lambda_i";
  const std::vector<int> sizes = s.sizes.empty() ? std::vector<int>{s.base.n_sites} : s.sizes;
  const std::vector<double> curves = scan_initial
                                         ? (s.lambda_f_values.empty() ? std::vector<double>{s.base.lambda_final}
                                                                      : s.lambda_f_values)
                                         : (s.lambda_i_values.empty() ? std::vector<double>{s.base.lambda_initial}
                                                                      : s.lambda_i_values);
  std::vector<DerivativeSweep> sweeps;
  for (int n : sizes) {
    guard_fermion_run(n, s.memory_limit_gb);
    const std::vector<double> grid = s.sweep_values.empty() ? size_scan_grid(n) : s.sweep_values;
    QuenchProtocol base = s.base;
    base.n_sites = n;
    if (base.separation >= n) throw ValidationError("separation exceeds size in derivative scan");

    if (scan_initial) {
      for (double curve : curves) {
        QuenchProtocol p = base;
        p.lambda_final = curve;
        const auto dec_dd = channel_decomposition(p, Channel::down_down, Stage::post_quench);
        const auto dec_uu = channel_decomposition(p, Channel::up_up, Stage::post_quench);
        DerivativeSweep sweep{n, curve, grid, std::vector<double>(grid.size()), {}};
        parallel_for(grid.size(), [&](std::size_t i) {
          const MatrixXd c0 =
              ground_state_covariance(decompose_uniform(n, p.coupling_j, grid[i], p.boundary));
          EchoEngine engine(c0, dec_dd, dec_uu);
          sweep.echo[i] = engine.echo_at(s.t_fixed);
        });
        sweep.derivative = field_derivative(grid, sweep.echo);
        sweeps.push_back(std::move(sweep));
      }
    } else {
      for (double curve : curves) {
        const MatrixXd c0 =
            ground_state_covariance(decompose_uniform(n, base.coupling_j, curve, base.boundary));
        DerivativeSweep sweep{n, curve, grid, std::vector<double>(grid.size()), {}};
        parallel_for(grid.size(), [&](std::size_t i) {
          QuenchProtocol p = base;
          p.lambda_initial = curve;
          p.lambda_final = grid[i];
          EchoEngine engine(c0, channel_decomposition(p, Channel::down_down, Stage::post_quench),
                            channel_decomposition(p, Channel::up_up, Stage::post_quench));
          sweep.echo[i] = engine.echo_at(s.t_fixed);
        });
        sweep.derivative = field_derivative(grid, sweep.echo);
        sweeps.push_back(std::move(sweep));
      }
    }
  }
  return sweeps;
}

inline ResultTable run_derivative_scan(const Scenario& s) {
  const std::string param = s.sweep_param.empty() ? "lambda_i" : s.sweep_param;
  const bool scan_initial = param == "lambda_i";
  const auto sweeps = compute_derivative_sweeps(s);
  ResultTable table;
  table.columns = {"n", "lambda_i", "lambda_f", "t", "L", "dL_dlambda"};
  for (const auto& sweep : sweeps)
    for (std::size_t i = 0; i < sweep.grid.size(); ++i) {
      const double li = scan_initial ? sweep.grid[i] : sweep.curve_value;
      const double lf = scan_initial ? sweep.curve_value : sweep.grid[i];
      table.rows.push_back({static_cast<double>(sweep.n_sites), li, lf, s.t_fixed, sweep.echo[i],
                            sweep.derivative[i]});
    }
  table.add_meta("t_fixed", s.t_fixed);
  table.add_meta("scan_parameter", param);
  return table;
}

inline ResultTable run_size_scaling(const Scenario& s) {
  Scenario scan = s;
  scan.kind = ScenarioKind::derivative_scan;
  scan.sweep_param = "lambda_i";
  const auto sweeps = compute_derivative_sweeps(scan);

  std::vector<int> sizes;
  std::vector<PeakLocation> peaks;
  for (const auto& sweep : sweeps) {
    sizes.push_back(sweep.n_sites);
    peaks.push_back(locate_peak(sweep.grid, sweep.derivative));
  }
  const auto [distance_fit, height_fit] = fit_peak_scaling(sizes, peaks);

  ResultTable table;
  table.columns = {"n", "lambda_max", "peak_height", "dist_to_critical"};
  for (std::size_t i = 0; i < sizes.size(); ++i)
    table.rows.push_back({static_cast<double>(sizes[i]), peaks[i].position, peaks[i].height,
                          std::abs(1.0 - peaks[i].position)});
  table.add_meta("t_fixed", s.t_fixed);
  table.add_meta("gamma_exponent", distance_fit.exponent);
  table.add_meta("gamma_prefactor", distance_fit.prefactor);
  table.add_meta("gamma_fit_rms", distance_fit.residual);
  table.add_meta("logN_slope", height_fit.exponent);
  table.add_meta("logN_intercept", height_fit.prefactor);
  table.add_meta("logN_fit_rms", height_fit.residual);
  return table;
}

inline ResultTable run_short_time(const Scenario& s) {
  guard_fermion_run(s.base.n_sites, s.memory_limit_gb);
  const auto times = s.time_grid.materialize();
  const double t_typ = typical_time(s.base.epsilon);
  std::vector<EchoSeries> series(s.sweep_values.size());
  std::vector<double> alpha_fit(s.sweep_values.size());
  parallel_for(s.sweep_values.size(), [&](std::size_t i) {
    const QuenchProtocol p = with_param(s.base, "lambda_f", s.sweep_values[i]);
    series[i] = echo_timeseries(p, times);
    alpha_fit[i] = fit_short_time_rate(series[i], t_typ).alpha;
  });
  const MatrixXd c0 = ground_state_covariance(
      decompose_uniform(s.base.n_sites, s.base.coupling_j, s.base.lambda_initial, s.base.boundary));
  const double alpha_corr = gaussian_rate_correlator(c0, s.base.epsilon, s.base.separation).alpha;

  ResultTable table;
  table.columns = {"lambda_f", "t", "L", "concurrence", "alpha_fit"};
  for (std::size_t i = 0; i < s.sweep_values.size(); ++i)
    for (std::size_t k = 0; k < times.size(); ++k)
      table.rows.push_back({s.sweep_values[i], times[k], series[i].echo[k],
                            concurrence_from_echo(series[i].echo[k]), alpha_fit[i]});
  table.add_meta("t_typ", t_typ);
  table.add_meta("alpha_correlator", alpha_corr);
  return table;
}

inline ResultTable run_alpha_vs_distance(const Scenario& s) {
  guard_fermion_run(s.base.n_sites, s.memory_limit_gb);
  const std::vector<double> lis =
      s.lambda_i_values.empty() ? std::vector<double>{s.base.lambda_initial} : s.lambda_i_values;
  const double eps = s.base.epsilon;
  const double t_typ = typical_time(eps);
  const bool with_fit = s.fit_alpha && s.base.n_sites <= 200;
  const auto fit_times = time_grid(0.12 * t_typ, 0.001 * t_typ);

  struct Row {
    double li, d, mode_sum, corr, fit, plateau;
  };
  std::vector<Row> rows(lis.size() * s.sweep_values.size());
  for (std::size_t c = 0; c < lis.size(); ++c) {
    const auto dec = decompose_uniform(s.base.n_sites, s.base.coupling_j, lis[c], s.base.boundary);
    const MatrixXd c0 = ground_state_covariance(dec);
    const double magnetization = sigma_z_expectation(c0, 0);
    const double plateau = 2.0 * eps * eps * (1.0 - magnetization * magnetization);
    parallel_for(s.sweep_values.size(), [&](std::size_t k) {
      const int d = static_cast<int>(std::lround(s.sweep_values[k]));
      Row& row = rows[c * s.sweep_values.size() + k];
      row.li = lis[c];
      row.d = d;
      row.mode_sum = gaussian_rate_mode_sum(dec, eps, d).alpha;
      row.corr = gaussian_rate_correlator(c0, eps, d).alpha;
      row.plateau = plateau;
      if (with_fit) {
        QuenchProtocol p = s.base;
        p.lambda_initial = lis[c];
        p.separation = d;
        row.fit = fit_short_time_rate(echo_timeseries(p, fit_times), t_typ).alpha;
      } else {
        row.fit = std::numeric_limits<double>::quiet_NaN();
      }
    });
  }

  ResultTable table;
  table.columns = {"lambda_i", "d", "alpha_mode_sum", "alpha_correlator", "alpha_fit", "alpha_plateau"};
  for (const auto& r : rows) table.rows.push_back({r.li, r.d, r.mode_sum, r.corr, r.fit, r.plateau});
  table.add_meta("t_typ", t_typ);
  table.add_meta("fit_alpha", with_fit ? 1.0 : 0.0);
  return table;
}

inline ResultTable run_revival(const Scenario& s) {
  guard_fermion_run(s.base.n_sites, s.memory_limit_gb);
  const std::string param = s.sweep_param.empty() ? "d" : s.sweep_param;
  const auto times = s.time_grid.materialize();
  std::vector<EchoSeries> series(s.sweep_values.size());
  std::vector<double> onsets(s.sweep_values.size());
  parallel_for(s.sweep_values.size(), [&](std::size_t i) {
    const QuenchProtocol p = with_param(s.base, param, s.sweep_values[i]);
    series[i] = echo_timeseries(p, times);
    onsets[i] = detect_revival_onset(series[i]);
  });

  ResultTable table;
  table.columns = {param, "t", "L", "concurrence", "dL_dt_smooth"};
  for (std::size_t i = 0; i < s.sweep_values.size(); ++i) {
    const auto smooth = smoothed_time_derivative(series[i]);
    for (std::size_t k = 0; k < times.size(); ++k)
      table.rows.push_back({s.sweep_values[i], times[k], series[i].echo[k],
                            concurrence_from_echo(series[i].echo[k]), smooth[k]});
  }
  const auto ct = characteristic_times(s.base);
  table.add_meta("v_g", ct.v_g);
  table.add_meta("t_star", ct.t_star);
  table.add_meta("tau_star", ct.tau_star);
  table.add_meta("t_star_equilibrium", ct.t_star_equilibrium);
  for (std::size_t i = 0; i < s.sweep_values.size(); ++i)
    table.add_meta("revival_onset[" + param + "=" + format_full(s.sweep_values[i]) + "]", onsets[i]);
  return table;
}

inline ResultTable run_independence(const Scenario& s) {
  guard_fermion_run(s.base.n_sites, s.memory_limit_gb);
  const std::string param = s.sweep_param.empty() ? "lambda_i" : s.sweep_param;
  const auto times = s.time_grid.materialize();
  std::vector<EchoSeries> common(s.sweep_values.size()), single(s.sweep_values.size());
  parallel_for(s.sweep_values.size(), [&](std::size_t i) {
    const QuenchProtocol p = with_param(s.base, param, s.sweep_values[i]);
    common[i] = echo_timeseries(p, times);
    single[i] = single_defect_echo(p, times);
  });

  ResultTable table;
  table.columns = {param, "t", "L", "L_single", "L_ind", "delta_L"};
  for (std::size_t i = 0; i < s.sweep_values.size(); ++i) {
    const auto delta = delta_echo(common[i], single[i]);
    for (std::size_t k = 0; k < times.size(); ++k) {
      const double ls = single[i].echo[k];
      table.rows.push_back({s.sweep_values[i], times[k], common[i].echo[k], ls, ls * ls, delta[k]});
    }
  }
  const auto ct = characteristic_times(s.base);
  table.add_meta("t_ind", ct.t_ind);
  table.add_meta("v_g", ct.v_g);
  if (param == "lambda_i")
    for (double li : s.sweep_values)
      table.add_meta("xi[lambda_i=" + format_full(li) + "]", correlation_length(li));
  return table;
}

inline ResultTable run_oracle_compare(const Scenario& s) {
  struct Case {
    QuenchProtocol p;
    std::vector<double> ts;
  };
  UniformSource rng(s.seed);
  std::vector<Case> cases(s.cases);
  for (auto& c : cases) {
    c.p = s.base;
    c.p.lambda_initial = rng.in(0.2, 2.0);
    c.p.lambda_final = rng.in(0.2, 2.0);
    c.p.epsilon = rng.in(0.05, 20.0);
    c.p.separation = rng.below(s.base.n_sites);
    c.ts.resize(4);
    for (auto& t : c.ts) t = rng.in(0.0, 10.0);
    std::sort(c.ts.begin(), c.ts.end());
  }
  struct Outcome {
    std::vector<double> fermion, exact;
  };
  std::vector<Outcome> outcomes(cases.size());
  parallel_for(cases.size(), [&](std::size_t i) {
    outcomes[i].fermion = echo_timeseries(cases[i].p, cases[i].ts).echo;
    outcomes[i].exact = oracle::oracle_echo_series(cases[i].p, cases[i].ts);
  });

  ResultTable table;
  table.columns = {"case", "n", "lambda_i", "lambda_f", "epsilon", "d", "t", "L_fermion", "L_oracle", "abs_diff"};
  double max_diff = 0;
  for (std::size_t i = 0; i < cases.size(); ++i)
    for (std::size_t k = 0; k < cases[i].ts.size(); ++k) {
      const double diff = std::abs(outcomes[i].fermion[k] - outcomes[i].exact[k]);
      max_diff = std::max(max_diff, diff);
      table.rows.push_back({static_cast<double>(i), static_cast<double>(cases[i].p.n_sites),
                            cases[i].p.lambda_initial, cases[i].p.lambda_final, cases[i].p.epsilon,
                            static_cast<double>(cases[i].p.separation), cases[i].ts[k],
                            outcomes[i].fermion[k], outcomes[i].exact[k], diff});
    }
  table.add_meta("cases", static_cast<double>(s.cases));
  table.add_meta("seed", static_cast<double>(s.seed));
  table.add_meta("max_abs_diff", max_diff);
  return table;
}

}  // namespace detail

inline ResultTable run_scenario(const Scenario& s) {
  s.validate();
  ResultTable table;
  switch (s.kind) {
    case ScenarioKind::epsilon_sweep: table = detail::run_parameter_sweep(s); break;
    case ScenarioKind::quench_protocol_grid: table = detail::run_grid(s); break;
    case ScenarioKind::lambda_scan: table = detail::run_lambda_scan(s); break;
    case ScenarioKind::derivative_scan: table = detail::run_derivative_scan(s); break;
    case ScenarioKind::size_scaling: table = detail::run_size_scaling(s); break;
    case ScenarioKind::short_time: table = detail::run_short_time(s); break;
    case ScenarioKind::alpha_vs_distance: table = detail::run_alpha_vs_distance(s); break;
    case ScenarioKind::revival: table = detail::run_revival(s); break;
    case ScenarioKind::independence: table = detail::run_independence(s); break;
    case ScenarioKind::oracle_compare: table = detail::run_oracle_compare(s); break;
  }
  std::vector<std::pair<std::string, std::string>> head;
  head.emplace_back("qecho-version", kVersion);
  {
    std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    head.emplace_back("timestamp", buf);
  }
  head.emplace_back("kind", to_string(s.kind));
  ResultTable with_head;
  with_head.columns = std::move(table.columns);
  with_head.rows = std::move(table.rows);
  with_head.metadata = std::move(head);
  detail::append_protocol_meta(with_head, s.base);
  detail::append_grid_meta(with_head, s.time_grid);
  if (!s.sweep_param.empty()) with_head.add_meta("sweep_param", s.sweep_param);
  for (auto& kv : table.metadata) with_head.metadata.push_back(std::move(kv));
  return with_head;
}

// ------------------------------------------------------------------ csv output

namespace detail {

inline void write_file_atomically(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp);
    out << content;
    if (!out.good()) throw IoError("write failed: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move results into place: " + path + " (" + ec.message() + ")");
}

inline std::string plot_script_path(const std::string& csv_path) {
  std::filesystem::path p(csv_path);
  p.replace_extension(".gp");
  return p.string();
}

inline std::string make_plot_script(const ResultTable& table, const std::string& csv_path) {
  std::ostringstream out;
  out << "# gnuplot script for " << csv_path << "\n# columns:";
  for (std::size_t i = 0; i < table.columns.size(); ++i) out << " " << (i + 1) << ":" << table.columns[i];
  out << "\nset datafile separator ','\nset key autotitle columnhead\n";
  // default: second column on x, third on y; the header names the rest
  const std::size_t xcol = table.columns.size() > 1 ? 2 : 1;
  const std::size_t ycol = table.columns.size() > 2 ? 3 : table.columns.size();
  out << "plot '" << std::filesystem::path(csv_path).filename().string() << "' using " << xcol << ":" << ycol
      << " with lines\n";
  return out.str();
}

}  // namespace detail

// CSV with `# key: value` metadata lines, a header row, then 17-significant-digit
// rows. A sibling .gp plot script referencing the columns is written next to it.
inline void write_results(const ResultTable& table, const std::string& path) {
  if (table.rows.empty()) throw ValidationError("refusing to write an empty result table");
  if (table.columns.empty()) throw ValidationError("result table has no columns");
  std::ostringstream out;
  for (const auto& [key, value] : table.metadata) out << "# " << key << ": " << value << "\n";
  for (std::size_t i = 0; i < table.columns.size(); ++i)
    out << table.columns[i] << (i + 1 < table.columns.size() ? "," : "\n");
  for (const auto& row : table.rows) {
    if (row.size() != table.columns.size()) throw NumericError("ragged row in result table");
    for (std::size_t i = 0; i < row.size(); ++i)
      out << format_full(row[i]) << (i + 1 < row.size() ? "," : "\n");
  }
  detail::write_file_atomically(path, out.str());
  detail::write_file_atomically(detail::plot_script_path(path), detail::make_plot_script(table, path));
}

inline ResultTable parse_csv(const std::string& text) {
  ResultTable table;
  std::stringstream stream(text);
  std::string line;
  bool have_header = false;
  while (std::getline(stream, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto colon = line.find(": ");
      if (colon != std::string::npos)
        table.metadata.emplace_back(detail::trim(line.substr(1, colon - 1)), line.substr(colon + 2));
      continue;
    }
    std::stringstream fields(line);
    std::string field;
    if (!have_header) {
      while (std::getline(fields, field, ',')) table.columns.push_back(detail::trim(field));
      have_header = true;
      continue;
    }
    std::vector<double> row;
    while (std::getline(fields, field, ',')) row.push_back(std::strtod(field.c_str(), nullptr));
    if (row.size() != table.columns.size()) throw IoError("ragged CSV row: " + line);
    table.rows.push_back(std::move(row));
  }
  return table;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace qecho::runner
