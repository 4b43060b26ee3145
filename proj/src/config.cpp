#include "mesb/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mesb {

namespace {

struct Parser {
  std::string origin;
  int line_no = 0;

  [[noreturn]] void reject(const std::string& message) const {
    fail(ErrorKind::Config, origin + ":" + std::to_string(line_no) + ": " + message);
  }

  double number(const std::string& key, const std::string& value, bool allow_inf = false) const {
    if (value == "inf") {
      if (allow_inf) return std::numeric_limits<double>::infinity();
      reject("'inf' is not valid for key '" + key + "'");
    }
    double out = 0.0;
    const auto* begin = value.data();
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc{} || ptr != end) reject("invalid number '" + value + "' for key '" + key + "'");
    return out;
  }

  std::size_t count(const std::string& key, const std::string& value) const {
    const double v = number(key, value);
    if (!(v >= 0.0) || v != std::floor(v) || v > 1e15) {
      reject("key '" + key + "' needs a nonnegative integer, got '" + value + "'");
    }
    return static_cast<std::size_t>(v);
  }

  std::uint64_t seed(const std::string& key, const std::string& value) const {
    std::uint64_t out = 0;
    const auto* begin = value.data();
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc{} || ptr != end) reject("key '" + key + "' needs an unsigned integer");
    return out;
  }

  bool boolean(const std::string& key, const std::string& value) const {
    if (value == "true") return true;
    if (value == "false") return false;
    reject("key '" + key + "' needs true or false, got '" + value + "'");
  }
};

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

RunConfig parse_run_config_text(const std::string& text, const std::string& origin) {
  RunConfig config;
  Parser parser{origin};

  bool saw_task_kind = false, saw_sampler_kind = false, saw_denoiser_kind = false;
  std::string section;
  std::istringstream stream(text);
  std::string raw;
  while (std::getline(stream, raw)) {
    ++parser.line_no;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') parser.reject("malformed section header '" + line + "'");
      section = line.substr(1, line.size() - 2);
      if (section != "task" && section != "sampler" && section != "denoiser" &&
          section != "output") {
        parser.reject("unknown section [" + section + "]");
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) parser.reject("expected KEY = VALUE, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) parser.reject("empty key or value in '" + line + "'");
    if (section.empty()) parser.reject("key '" + key + "' appears before any section");

    if (section == "task") {
      if (key == "kind") {
        try {
          config.task.kind = task_kind_from_name(value);
        } catch (const Error& e) {
          parser.reject(e.what());
        }
        saw_task_kind = true;
      } else if (key == "size") {
        config.task.size = parser.count(key, value);
      } else if (key == "noise_percent") {
        config.task.noise_percent = parser.number(key, value);
      } else if (key == "phantom_seed") {
        config.task.phantom_seed = parser.seed(key, value);
      } else if (key == "n_phantoms") {
        config.n_phantoms = parser.count(key, value);
      } else if (key == "blur_sigma") {
        config.task.blur_sigma = parser.number(key, value);
      } else if (key == "sr_factor") {
        config.task.sr_factor = parser.count(key, value);
      } else if (key == "keep_fraction") {
        config.task.keep_fraction = parser.number(key, value);
      } else if (key == "ct_views") {
        config.task.ct_views = parser.count(key, value);
      } else if (key == "ct_detectors") {
        config.task.ct_detectors = parser.count(key, value);
      } else {
        parser.reject("unknown key '" + key + "' in [task]");
      }
    } else if (section == "sampler") {
      if (key == "kind") {
        try {
          config.sampler.config.kind = sampler_kind_from_name(value);
        } catch (const Error& e) {
          parser.reject(e.what());
        }
        saw_sampler_kind = true;
      } else if (key == "N") {
        config.sampler.config.steps = parser.count(key, value);
      } else if (key == "p") {
        config.sampler.config.cg_iters = parser.count(key, value);
      } else if (key == "k_y") {
        config.sampler.config.k_y = parser.number(key, value, /*allow_inf=*/true);
      } else if (key == "k_E") {
        config.sampler.config.k_E = parser.number(key, value);
      } else if (key == "T") {
        if (value != "none" && value != "laplacian") {
          parser.reject("key 'T' needs none or laplacian, got '" + value + "'");
        }
        config.sampler.t_kind = value;
      } else if (key == "alpha") {
        config.sampler.config.alpha = parser.number(key, value);
      } else if (key == "stochastic") {
        config.sampler.config.stochastic = parser.boolean(key, value);
      } else if (key == "seed") {
        config.sampler.config.seed = parser.seed(key, value);
      } else if (key == "grid") {
        if (value == "quadratic") {
          config.sampler.config.dense_near_one = false;
        } else if (value == "quadratic_dense_end") {
          config.sampler.config.dense_near_one = true;
        } else {
          parser.reject("key 'grid' needs quadratic or quadratic_dense_end");
        }
      } else {
        parser.reject("unknown key '" + key + "' in [sampler]");
      }
    } else if (section == "denoiser") {
      if (key == "kind") {
        if (value != "gaussian_analytic" && value != "oracle" && value != "external") {
          parser.reject("denoiser kind must be gaussian_analytic|oracle|external");
        }
        config.denoiser.kind = value;
        saw_denoiser_kind = true;
      } else if (key == "mu0") {
        config.denoiser.mu0 = parser.number(key, value);
      } else if (key == "s0sq") {
        config.denoiser.s0sq = parser.number(key, value);
      } else if (key == "command") {
        config.denoiser.command = value;
      } else if (key == "timeout_ms") {
        config.denoiser.timeout_ms = static_cast<int>(parser.count(key, value));
      } else {
        parser.reject("unknown key '" + key + "' in [denoiser]");
      }
    } else {  // output
      if (key == "directory") {
        config.output.directory = value;
      } else if (key == "emit_trajectory") {
        config.output.emit_trajectory = parser.boolean(key, value);
      } else if (key == "wall_clock") {
        config.output.wall_clock = parser.boolean(key, value);
      } else if (key == "images") {
        config.output.images = parser.boolean(key, value);
      } else {
        parser.reject("unknown key '" + key + "' in [output]");
      }
    }
  }

  parser.line_no = 0;  // whole-file diagnostics below
  if (!saw_task_kind) fail(ErrorKind::Config, origin + ": missing required key 'kind' in [task]");
  if (!saw_sampler_kind) {
    fail(ErrorKind::Config, origin + ": missing required key 'kind' in [sampler]");
  }
  if (!saw_denoiser_kind) {
    fail(ErrorKind::Config, origin + ": missing required key 'kind' in [denoiser]");
  }
  if (config.output.directory.empty()) {
    fail(ErrorKind::Config, origin + ": missing required key 'directory' in [output]");
  }
  if (config.denoiser.kind == "external" && config.denoiser.command.empty()) {
    fail(ErrorKind::Config, origin + ": external denoiser requires 'command'");
  }
  if (config.n_phantoms < 1) fail(ErrorKind::Config, origin + ": n_phantoms must be >= 1");
  return config;
}

RunConfig parse_run_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open config file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config_text(buffer.str(), path);
}

}  // namespace mesb
