#include "qecho/presets.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

int run_config_file(const std::string& path) {
  const std::string text = qecho::runner::read_file(path);
  qecho::runner::Scenario scenario = qecho::runner::parse_config(text);
  qecho::runner::ResultTable table = qecho::runner::run_scenario(scenario);
  qecho::runner::write_results(table, scenario.output);
  std::cout << "wrote " << scenario.output << " (" << table.rows.size() << " rows)\n";
  return 0;
}

int run_named_preset(const std::string& name, const std::string& out_dir, bool show_only) {
  const auto* preset = qecho::runner::find_preset(name);
  if (!preset) throw qecho::ValidationError("unknown preset '" + name + "' (see list-presets)");
  if (show_only) {
    for (const auto& config : preset->configs) std::cout << config << "\n";
    return 0;
  }
  const auto written = qecho::runner::run_preset(*preset, out_dir);
  for (const auto& path : written) std::cout << "wrote " << path << "\n";
  return 0;
}

int list_presets() {
  for (const auto& p : qecho::runner::presets()) {
    std::printf("%-20s %-16s %s\n", p.name.c_str(), p.figure.c_str(), p.summary.c_str());
  }
  return 0;
}

int run_oracle_compare(int n, int cases, std::uint64_t seed, const std::string& out) {
  qecho::runner::Scenario s;
  s.kind = qecho::runner::ScenarioKind::oracle_compare;
  s.base.n_sites = n;
  s.cases = cases;
  s.seed = seed;
  s.output = out;
  s.validate();
  qecho::runner::ResultTable table = qecho::runner::run_scenario(s);
  qecho::runner::write_results(table, s.output);
  double max_diff = 0;
  const auto diff_col = table.columns.size() - 1;
  for (const auto& row : table.rows) max_diff = std::max(max_diff, row[diff_col]);
  std::cout << "wrote " << s.output << "; max |L_fermion - L_oracle| = " << qecho::format_full(max_diff)
            << " over " << table.rows.size() << " points\n";
  if (max_diff >= 1e-7)
    throw qecho::NumericError("oracle comparison exceeds 1e-7: " + qecho::format_full(max_diff));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Loschmidt-echo and disentanglement dynamics of two qubits on a quenched transverse-field Ising chain"};
  app.require_subcommand(1);

  std::string config_path;
  auto* cmd_run = app.add_subcommand("run", "run a scenario from a config file");
  cmd_run->add_option("config", config_path, "key = value config file")->required();

  std::string preset_name, out_dir = "results";
  bool show_only = false;
  auto* cmd_preset = app.add_subcommand("preset", "run a named preset (one per figure)");
  cmd_preset->add_option("name", preset_name, "preset name")->required();
  cmd_preset->add_option("--out", out_dir, "output directory (default: results)");
  cmd_preset->add_flag("--show", show_only, "print the preset's config instead of running it");

  auto* cmd_list = app.add_subcommand("list-presets", "list presets and the figures they reproduce");

  int oc_n = 8, oc_cases = 20;
  std::uint64_t oc_seed = 20260808ull;
  std::string oc_out = "oracle_compare.csv";
  auto* cmd_oracle = app.add_subcommand("oracle-compare", "randomized fermion vs dense-reference comparison");
  cmd_oracle->add_option("--n", oc_n, "chain size (even, <= 10)");
  cmd_oracle->add_option("--cases", oc_cases, "number of random protocols");
  cmd_oracle->add_option("--seed", oc_seed, "random seed");
  cmd_oracle->add_option("--out", oc_out, "output CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (cmd_run->parsed()) return run_config_file(config_path);
    if (cmd_preset->parsed()) return run_named_preset(preset_name, out_dir, show_only);
    if (cmd_list->parsed()) return list_presets();
    if (cmd_oracle->parsed()) return run_oracle_compare(oc_n, oc_cases, oc_seed, oc_out);
  } catch (const qecho::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const qecho::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const qecho::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
