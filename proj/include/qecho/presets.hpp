#pragma once

#include "qecho/experiment.hpp"

namespace qecho::runner {

// Named, versioned parameter bundles. Each preset reproduces one figure's data
// as one or more scenarios; the configs are ordinary `run` documents, so
// `preset --show` output can be edited and replayed.
struct Preset {
  std::string name;
  std::string figure;
  std::string summary;
  std::vector<std::string> configs;
};

inline const std::vector<Preset>& presets() {
  static const std::vector<Preset> list = {
      {"fig-epsilon", "fig_epsilon", "echo vs time for several coupling strengths after a 1.5 -> 0.5 quench",
       {R"(kind = epsilon-sweep
n = 100
lambda_i = 1.5
lambda_f = 0.5
d = 1
sweep_param = epsilon
sweep_values = 0.1, 0.5, 1, 5, 10, 20
t_max = 6
dt = 0.01
output = fig_epsilon.csv
)"}},

      {"fig-distance", "fig_distance", "echo vs time for d = 1, 5, 10 in the weak and strong coupling regimes",
       {R"(kind = epsilon-sweep
n = 100
lambda_i = 1.5
lambda_f = 0.5
epsilon = 0.1
sweep_param = d
sweep_values = 1, 5, 10
t_max = 10
dt = 0.05
output = fig_distance_weak.csv
)",
        R"(kind = epsilon-sweep
n = 100
lambda_i = 1.5
lambda_f = 0.5
epsilon = 20
sweep_param = d
sweep_values = 1, 5, 10
t_max = 4
dt = 0.01
output = fig_distance_strong.csv
)"}},

      {"fig-echo", "echo", "weak-coupling echo for a grid of quench protocols",
       {R"(kind = quench-protocol-grid
n = 100
epsilon = 0.1
d = 1
lambda_i_values = 0.5, 0.7, 1, 1.5
lambda_f_values = 0.5, 0.7, 1, 1.5
t_max = 10
dt = 0.05
output = fig_echo.csv
)"}},

      {"fig-echo-sc", "echo_sc", "strong-coupling echo for a grid of quench protocols",
       {R"(kind = quench-protocol-grid
n = 100
epsilon = 20
d = 1
lambda_i_values = 0.5, 1.5
lambda_f_values = 0.5, 0.7, 1, 1.5
t_max = 4
dt = 0.01
output = fig_echo_sc_final.csv
)",
        R"(kind = quench-protocol-grid
n = 100
epsilon = 20
d = 1
lambda_i_values = 0.7, 1, 1.5, 1.7, 1.9
lambda_f_values = 0.5, 1.5
t_max = 4
dt = 0.01
output = fig_echo_sc_initial.csv
)"}},

      {"fig-lambda", "lambda", "echo at t = 10 vs the initial (left) and final (right) field, with polarized reference",
       {R"(kind = lambda-scan-at-fixed-time
n = 100
epsilon = 0.1
d = 1
sweep_param = lambda_i
sweep_range = 0.1, 2.5, 0.05
lambda_f_values = 0.5, 1.5
t_fixed = 10
output = fig_lambda_initial.csv
)",
        R"(kind = lambda-scan-at-fixed-time
n = 100
epsilon = 0.1
d = 1
sweep_param = lambda_f
sweep_range = 0.1, 2.5, 0.05
lambda_i_values = 0.5, 1.5
t_fixed = 10
output = fig_lambda_final.csv
)"}},

      {"fig-der-lambda", "der_lambda", "field derivative of the echo at t = 10 vs lambda_i (and vs lambda_f, inset)",
       {R"(kind = derivative-scan
n = 100
epsilon = 0.1
d = 1
sweep_param = lambda_i
sweep_range = 0.5, 1.5, 0.005
lambda_f_values = 0.5, 1.5
t_fixed = 10
output = fig_der_lambda.csv
)",
        R"(kind = derivative-scan
n = 100
epsilon = 0.1
d = 1
sweep_param = lambda_f
sweep_range = 0.5, 1.5, 0.005
lambda_i_values = 0.5, 1.5
t_fixed = 10
output = fig_der_lambda_inset.csv
)"}},

      {"fig-der-lambda-size", "der_lambda_size", "derivative peak near criticality for several bath sizes",
       {R"(kind = derivative-scan
n = 100
epsilon = 0.1
d = 1
lambda_f = 1.5
sweep_param = lambda_i
sizes = 50, 100, 200, 400
t_fixed = 10
output = fig_der_lambda_size.csv
)"}},

      {"fig-scaling", "scaling", "finite-size scaling of the derivative peak position and height",
       {R"(kind = size-scaling
n = 100
epsilon = 0.1
d = 1
lambda_f = 1.5
sizes = 50, 100, 200, 400
t_fixed = 10
output = fig_scaling.csv
)"}},

      {"fig-short-time", "short_time", "short-time echo for several final fields, weak and strong coupling",
       {R"(kind = short-time
n = 100
lambda_i = 0.7
epsilon = 0.1
d = 1
sweep_param = lambda_f
sweep_values = 0.5, 1, 1.5
t_max = 0.6
dt = 0.001
output = fig_short_time_weak.csv
)",
        R"(kind = short-time
n = 100
lambda_i = 0.7
epsilon = 20
d = 1
sweep_param = lambda_f
sweep_values = 0.5, 1, 1.5
t_max = 0.03
dt = 0.0002
output = fig_short_time_strong.csv
)"}},

      {"fig-parameter", "parameter", "Gaussian rate vs separation (left) and its critical approach to the plateau (right)",
       {R"(kind = alpha-vs-distance
n = 100
epsilon = 0.1
lambda_f = 0.5
lambda_i_values = 0.7, 1, 1.5
sweep_param = d
sweep_values = 1, 2, 3, 4, 5, 6, 8, 10, 12, 15, 20, 25, 30, 40, 50
output = fig_parameter.csv
)",
        R"(kind = alpha-vs-distance
n = 400
epsilon = 0.1
lambda_f = 0.5
lambda_i_values = 1
sweep_param = d
sweep_values = 4, 6, 8, 10, 12, 16, 20, 25, 30, 35, 40, 45, 50
fit_alpha = 0
output = fig_parameter_critical.csv
)"}},

      {"fig-revival", "revival", "echo revivals for separations near the opposite site, N = 100 and N = 200",
       {R"(kind = revival
n = 100
lambda_i = 1.5
lambda_f = 0.99
epsilon = 0.1
sweep_param = d
sweep_values = 50, 49, 48, 45, 35
t_max = 30
dt = 0.2
output = fig_revival_n100.csv
)",
        R"(kind = revival
n = 200
lambda_i = 1.5
lambda_f = 0.99
epsilon = 0.1
sweep_param = d
sweep_values = 100, 99, 98, 95, 85
t_max = 58
dt = 0.4
output = fig_revival_n200.csv
)"}},

      {"fig-revival-der", "revival_der", "echo and its time derivative at d = 1 for quenched and equilibrium baths",
       {R"(kind = revival
n = 100
lambda_f = 0.99
epsilon = 0.1
d = 1
sweep_param = lambda_i
sweep_values = 0.7, 0.9, 0.99
t_max = 58
dt = 0.2
output = fig_revival_der.csv
)"}},

      {"fig-revival-crit", "revival_crit", "revivals out of a critical initial state",
       {R"(kind = revival
n = 100
lambda_i = 1
lambda_f = 1.5
epsilon = 0.1
sweep_param = d
sweep_values = 50, 49, 45, 35
t_max = 30
dt = 0.2
output = fig_revival_crit.csv
)"}},

      {"fig-ind", "ind", "difference to the independent-baths echo for d = 10 and d = 20",
       {R"(kind = independence
n = 100
lambda_f = 0.2
epsilon = 0.1
d = 10
sweep_param = lambda_i
sweep_values = 0.4, 0.5, 0.7, 0.8, 0.9, 0.95, 1
t_max = 30
dt = 0.15
output = fig_ind_d10.csv
)",
        R"(kind = independence
n = 100
lambda_f = 0.2
epsilon = 0.1
d = 20
sweep_param = lambda_i
sweep_values = 0.4, 0.5, 0.7, 0.8, 0.9, 0.95, 1
t_max = 30
dt = 0.15
output = fig_ind_d20.csv
)"}},

      {"oracle-compare", "(validation)", "free-fermion echo vs dense many-body reference on randomized protocols",
       {R"(kind = oracle-compare
n = 8
cases = 20
seed = 20260808
output = oracle_compare.csv
)"}},
  };
  return list;
}

inline const Preset* find_preset(const std::string& name) {
  for (const auto& p : presets())
    if (p.name == name) return &p;
  return nullptr;
}

// Runs every scenario of a preset, writing into out_dir. Returns the written
// CSV paths.
inline std::vector<std::string> run_preset(const Preset& preset, const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + out_dir);
  std::vector<std::string> written;
  for (const auto& config : preset.configs) {
    Scenario s = parse_config(config);
    ResultTable table = run_scenario(s);
    table.metadata.insert(table.metadata.begin(), {"preset", preset.name});
    const std::string path = (std::filesystem::path(out_dir) / s.output).string();
    write_results(table, path);
    written.push_back(path);
  }
  return written;
}

}  // namespace qecho::runner
