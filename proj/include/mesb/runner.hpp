#pragma once

#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace mesb {

/// Command entry points shared by the CLI and the C API. Each returns a
/// process exit code: 0 success, 1 config error, 2 runtime error
/// (sampler/denoiser/check failure), 3 I/O error. Reports and diagnostics
/// go to `out` / `err`.
int cmd_run(const std::string& config_path, std::ostream& out, std::ostream& err);

int cmd_sweep(const std::string& config_path, const std::string& param,
              std::span<const double> values, std::ostream& out, std::ostream& err);

int cmd_verify(const std::string& check_name, std::ostream& out, std::ostream& err);

int cmd_denoiser_check(const std::string& command, int timeout_ms, std::ostream& out,
                       std::ostream& err);

std::vector<std::string> available_checks();

}  // namespace mesb
