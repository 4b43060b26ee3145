// Command-line front end. Links only the C API of the mesb shared library.

#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mesb/mesb.h"

namespace {

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> values;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t comma = csv.find(',', start);
    const std::string token = csv.substr(start, comma == std::string::npos ? std::string::npos
                                                                           : comma - start);
    if (!token.empty()) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(token, &used);
      } catch (...) {
        used = 0;
      }
      if (used != token.size()) {
        std::fprintf(stderr, "error: invalid sweep value '%s'\n", token.c_str());
        std::exit(1);
      }
      values.push_back(v);
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return values;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Schrodinger-bridge samplers for inverse problems"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mesb_version()));

  std::string config_path;
  auto* run = app.add_subcommand("run", "run a sampler config and write images + metrics.csv");
  run->add_option("config", config_path, "config file path")->required();

  std::string sweep_config, sweep_param, sweep_values;
  auto* sweep = app.add_subcommand("sweep", "sweep k_y or k_E and write sweep.csv");
  sweep->add_option("config", sweep_config, "config file path")->required();
  sweep->add_option("--param", sweep_param, "parameter to sweep: k_y or k_E")->required();
  sweep->add_option("--values", sweep_values, "comma-separated values, e.g. 1,4,16,32")
      ->required();

  std::string check_name;
  auto* verify = app.add_subcommand("verify", "run a numerical verification check");
  verify->add_option("--check", check_name,
                     "one of: psi_pde, psi_hat_pde, grad_log_psi, theorem2, equivalence")
      ->required();

  std::string dnz_command;
  int timeout_ms = 5000;
  auto* check = app.add_subcommand("denoiser-check",
                                   "probe an external denoiser command over the wire protocol");
  check->add_option("--command", dnz_command, "denoiser server command line")->required();
  check->add_option("--timeout-ms", timeout_ms, "per-request timeout (default 5000)");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return mesb_cmd_run(config_path.c_str());
  if (sweep->parsed()) {
    const auto values = parse_values(sweep_values);
    return mesb_cmd_sweep(sweep_config.c_str(), sweep_param.c_str(), values.data(),
                          static_cast<uint32_t>(values.size()));
  }
  if (verify->parsed()) return mesb_cmd_verify(check_name.c_str());
  if (check->parsed()) return mesb_cmd_denoiser_check(dnz_command.c_str(), timeout_ms);
  return 1;
}
