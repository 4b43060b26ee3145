#pragma once

#include <string>

#include "mesb/harness.hpp"

namespace mesb {

struct DenoiserConfig {
  std::string kind = "gaussian_analytic";  // gaussian_analytic | oracle | external
  double mu0 = 0.5;
  double s0sq = 1.0;
  std::string command;
  int timeout_ms = 5000;
};

struct OutputConfig {
  std::string directory;
  bool emit_trajectory = false;
  bool wall_clock = false;  // off by default so reruns are byte-identical
  bool images = true;
};

struct RunConfig {
  TaskSpec task;
  std::size_t n_phantoms = 1;
  SamplerSetup sampler;
  DenoiserConfig denoiser;
  OutputConfig output;
};

/// Parses the flat key=value config format:
///
///   [task]
///   kind = deblur_gauss
///   size = 32
///   ...
///
/// Sections: [task], [sampler], [denoiser], [output]. '#' starts a comment.
/// Unknown sections or keys are rejected with a file:line message
/// (ErrorKind::Config). "inf" is accepted for k_y only.
RunConfig parse_run_config_text(const std::string& text, const std::string& origin);
RunConfig parse_run_config_file(const std::string& path);

}  // namespace mesb
