#pragma once

#include <string>

#include "mesb/denoise.hpp"

namespace mesb {

/// Denoiser backed by a subprocess speaking the wire protocol (see
/// mesb/wire.hpp) over its stdin/stdout. The command line is split on
/// whitespace (no shell quoting) and exec'd directly. Requests are
/// serialized: one in flight per subprocess, concurrent callers queue.
///
/// Failures (subprocess exit, malformed frame, timeout) surface as
/// ErrorKind::External or ErrorKind::Protocol with captured diagnostics;
/// after a failure the subprocess is killed and every later call fails.
/// has_vjp() is false.
DenoiserPtr make_external_denoiser(const std::string& command_line, int timeout_ms);

}  // namespace mesb
