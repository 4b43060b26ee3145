// Reference external-denoiser server speaking the stdin/stdout wire
// protocol. `--mode analytic` evaluates the Gaussian analytic posterior-mean
// formula (the in-process denoiser's closed form); the remaining modes are
// failure-injection fixtures for client tests:
//   zeros    - replies eps = 0 for every request
//   error    - replies an error frame
//   die      - reads one request, exits without replying
//   hang     - reads one request, sleeps forever
//   badmagic - replies with a corrupted magic

#include <unistd.h>

#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "mesb/denoise.hpp"
#include "mesb/wire.hpp"

namespace {

using namespace mesb;

bool read_exact(std::uint8_t* buf, std::size_t len) {
  std::size_t off = 0;
  while (off < len) {
    const ssize_t n = read(STDIN_FILENO, buf + off, len - off);
    if (n <= 0) return false;
    off += static_cast<std::size_t>(n);
  }
  return true;
}

bool write_exact(const std::uint8_t* buf, std::size_t len) {
  std::size_t off = 0;
  while (off < len) {
    const ssize_t n = write(STDOUT_FILENO, buf + off, len - off);
    if (n <= 0) return false;
    off += static_cast<std::size_t>(n);
  }
  return true;
}

struct Request {
  Shape shape;
  double t = 0.0;
  std::vector<float> x_t;
  std::vector<float> x_corrupt;
};

bool read_request(Request& request) {
  std::uint8_t head[16];
  if (!read_exact(head, sizeof head)) return false;
  if (std::memcmp(head, wire::kMagic.data(), 8) != 0) return false;
  if (wire::get_u32(head + 8) != wire::kDenoiseRequest) return false;
  const std::uint32_t ndim = wire::get_u32(head + 12);
  if (ndim == 0 || ndim > wire::kMaxDims) return false;

  std::vector<std::uint8_t> dims(4 * ndim);
  if (!read_exact(dims.data(), dims.size())) return false;
  request.shape.assign(ndim, 0);
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    request.shape[i] = wire::get_u32(dims.data() + 4 * i);
    count *= request.shape[i];
  }
  if (count == 0 || count > (1u << 26)) return false;

  std::uint8_t t_bytes[8];
  if (!read_exact(t_bytes, 8)) return false;
  request.t = wire::get_f64(t_bytes);

  std::vector<std::uint8_t> payload(8 * count);
  if (!read_exact(payload.data(), payload.size())) return false;
  request.x_t.resize(count);
  request.x_corrupt.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    request.x_t[i] = wire::get_f32(payload.data() + 4 * i);
    request.x_corrupt[i] = wire::get_f32(payload.data() + 4 * (count + i));
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  std::string mode = "analytic";
  double mu0 = 0.5, s0sq = 1.0, beta_min = 1e-4, beta_max = 0.15;
  long n_base = 1000;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    const auto next = [&](double& slot) {
      if (i + 1 >= argc) {
        std::fprintf(stderr, "missing value for %s\n", arg.c_str());
        return false;
      }
      slot = std::stod(argv[++i]);
      return true;
    };
    if (arg == "--mode" && i + 1 < argc) {
      mode = argv[++i];
    } else if (arg == "--mu0") {
      if (!next(mu0)) return 2;
    } else if (arg == "--s0sq") {
      if (!next(s0sq)) return 2;
    } else if (arg == "--beta-min") {
      if (!next(beta_min)) return 2;
    } else if (arg == "--beta-max") {
      if (!next(beta_max)) return 2;
    } else if (arg == "--n-base" && i + 1 < argc) {
      n_base = std::stol(argv[++i]);
    } else {
      std::fprintf(stderr, "unknown argument '%s'\n", arg.c_str());
      return 2;
    }
  }

  const NoiseSchedule schedule = NoiseSchedule::symmetric_beta(beta_min, beta_max,
                                                               static_cast<std::size_t>(n_base));

  Request request;
  while (read_request(request)) {
    if (mode == "die") return 0;
    if (mode == "hang") {
      for (;;) sleep(3600);
    }

    std::vector<std::uint8_t> reply;
    if (mode == "error") {
      reply = wire::encode_error_reply("injected failure");
    } else if (mode == "badmagic") {
      reply = wire::encode_eps_reply(request.shape,
                                     std::vector<float>(request.x_t.size(), 0.0f));
      reply[0] = 'X';
    } else if (mode == "zeros") {
      reply = wire::encode_eps_reply(request.shape,
                                     std::vector<float>(request.x_t.size(), 0.0f));
    } else if (mode == "analytic") {
      Tensor x_t = Tensor::zeros(request.shape);
      Tensor x_corrupt = Tensor::zeros(request.shape);
      for (std::size_t i = 0; i < x_t.size(); ++i) {
        x_t[i] = static_cast<double>(request.x_t[i]);
        x_corrupt[i] = static_cast<double>(request.x_corrupt[i]);
      }
      const auto denoiser = make_gaussian_analytic_denoiser(
          Tensor::full(request.shape, mu0), s0sq, schedule);
      std::vector<float> eps(x_t.size());
      try {
        const Tensor eps_t = denoiser->predict_eps(x_t, request.t, Conditioning{x_corrupt});
        for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = static_cast<float>(eps_t[i]);
        reply = wire::encode_eps_reply(request.shape, eps);
      } catch (const Error& e) {
        reply = wire::encode_error_reply(e.what());
      }
    } else {
      std::fprintf(stderr, "unknown mode '%s'\n", mode.c_str());
      return 2;
    }

    if (!write_exact(reply.data(), reply.size())) return 1;
    // flush is implicit: write(2) on the pipe is unbuffered
  }
  return 0;
}
