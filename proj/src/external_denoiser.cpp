#include "mesb/external_denoiser.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstring>
#include <mutex>
#include <sstream>
#include <vector>

#include "mesb/wire.hpp"

namespace mesb {

namespace {

using Clock = std::chrono::steady_clock;

std::vector<std::string> split_command(const std::string& command_line) {
  std::vector<std::string> tokens;
  std::istringstream stream(command_line);
  std::string token;
  while (stream >> token) tokens.push_back(token);
  if (tokens.empty()) fail_invalid("external denoiser: empty command line");
  return tokens;
}

class Subprocess {
 public:
  explicit Subprocess(const std::string& command_line) : command_(command_line) {
    const auto tokens = split_command(command_line);
    int to_child[2], from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0) {
      fail(ErrorKind::External, "external denoiser: pipe() failed: " + std::string(strerror(errno)));
    }
    pid_ = fork();
    if (pid_ < 0) fail(ErrorKind::External, "external denoiser: fork() failed");
    if (pid_ == 0) {
      // child: own process group so the whole tree can be killed on timeout
      setpgid(0, 0);
      dup2(to_child[0], STDIN_FILENO);
      dup2(from_child[1], STDOUT_FILENO);
      close(to_child[0]);
      close(to_child[1]);
      close(from_child[0]);
      close(from_child[1]);
      std::vector<char*> argv;
      for (const auto& t : tokens) argv.push_back(const_cast<char*>(t.c_str()));
      argv.push_back(nullptr);
      execvp(argv[0], argv.data());
      _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
  }

  ~Subprocess() { terminate(); }

  Subprocess(const Subprocess&) = delete;
  Subprocess& operator=(const Subprocess&) = delete;

  bool alive() const { return pid_ > 0; }
  const std::string& command() const { return command_; }

  void terminate() {
    if (pid_ > 0) {
      kill(-pid_, SIGKILL);
      kill(pid_, SIGKILL);
      int status = 0;
      waitpid(pid_, &status, 0);
      pid_ = -1;
    }
    if (write_fd_ >= 0) close(write_fd_);
    if (read_fd_ >= 0) close(read_fd_);
    write_fd_ = read_fd_ = -1;
  }

  void write_all(const std::uint8_t* data, std::size_t len, Clock::time_point deadline) {
    std::size_t off = 0;
    while (off < len) {
      wait_ready(write_fd_, POLLOUT, deadline, "writing request");
      const ssize_t n = ::write(write_fd_, data + off, len - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        fail_external("write to subprocess failed: " + std::string(strerror(errno)));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  void read_all(std::uint8_t* data, std::size_t len, Clock::time_point deadline) {
    std::size_t off = 0;
    while (off < len) {
      wait_ready(read_fd_, POLLIN, deadline, "awaiting reply");
      const ssize_t n = ::read(read_fd_, data + off, len - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        fail_external("read from subprocess failed: " + std::string(strerror(errno)));
      }
      if (n == 0) fail_external("subprocess closed its output (exited?)");
      off += static_cast<std::size_t>(n);
    }
  }

 private:
  void wait_ready(int fd, short events, Clock::time_point deadline, const char* stage) {
    for (;;) {
      const auto remaining =
          std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
      if (remaining.count() <= 0) fail_external(std::string("timeout while ") + stage);
      pollfd p{fd, events, 0};
      const int rc = poll(&p, 1, static_cast<int>(std::min<long long>(remaining.count(), 1000)));
      if (rc < 0) {
        if (errno == EINTR) continue;
        fail_external("poll failed: " + std::string(strerror(errno)));
      }
      if (rc > 0) {
        if (p.revents & (events | POLLHUP | POLLERR)) return;
      }
    }
  }

  [[noreturn]] void fail_external(const std::string& detail) {
    const std::string cmd = command_;
    terminate();
    fail(ErrorKind::External, "external denoiser '" + cmd + "': " + detail);
  }

  std::string command_;
  pid_t pid_ = -1;
  int write_fd_ = -1;
  int read_fd_ = -1;
};

class ExternalDenoiser final : public Denoiser {
 public:
  ExternalDenoiser(const std::string& command_line, int timeout_ms)
      : timeout_ms_(timeout_ms), command_(command_line) {
    if (timeout_ms <= 0) fail_invalid("external denoiser requires timeout_ms > 0");
    process_ = std::make_unique<Subprocess>(command_line);
  }

  Tensor predict_eps(const Tensor& x_t, double t, const Conditioning& cond) const override {
    std::lock_guard<std::mutex> lock(mutex_);
    if (!process_ || !process_->alive()) {
      fail(ErrorKind::External,
           "external denoiser '" + command_ + "' is not running (previous failure?)");
    }
    const auto deadline = Clock::now() + std::chrono::milliseconds(timeout_ms_);
    const auto request = wire::encode_denoise_request(x_t, t, cond.x_corrupt);
    process_->write_all(request.data(), request.size(), deadline);
    return read_reply(x_t.shape(), deadline);
  }

 private:
  Tensor read_reply(const Shape& expected, Clock::time_point deadline) const {
    std::uint8_t head[12];
    process_->read_all(head, sizeof head, deadline);
    if (std::memcmp(head, wire::kMagic.data(), 8) != 0) {
      fail_protocol("bad magic in reply");
    }
    const std::uint32_t type = wire::get_u32(head + 8);
    if (type == wire::kErrorReply) {
      std::uint8_t len_buf[4];
      process_->read_all(len_buf, 4, deadline);
      const std::uint32_t len = wire::get_u32(len_buf);
      if (len > (1u << 20)) fail_protocol("oversized error message");
      std::string message(len, '\0');
      process_->read_all(reinterpret_cast<std::uint8_t*>(message.data()), len, deadline);
      fail(ErrorKind::External, "external denoiser '" + command_ + "' reported: " + message);
    }
    if (type != wire::kEpsReply) {
      fail_protocol("unexpected message type " + std::to_string(type));
    }
    std::uint8_t ndim_buf[4];
    process_->read_all(ndim_buf, 4, deadline);
    const std::uint32_t ndim = wire::get_u32(ndim_buf);
    if (ndim == 0 || ndim > wire::kMaxDims) {
      fail_protocol("reply ndim " + std::to_string(ndim) + " out of range");
    }
    std::vector<std::uint8_t> dims_buf(4 * ndim);
    process_->read_all(dims_buf.data(), dims_buf.size(), deadline);
    Shape shape(ndim);
    for (std::uint32_t i = 0; i < ndim; ++i) shape[i] = wire::get_u32(dims_buf.data() + 4 * i);
    if (shape != expected) {
      fail_protocol("reply shape " + shape_to_string(shape) + " does not match request shape " +
                    shape_to_string(expected));
    }
    const std::size_t count = shape_size(shape);
    std::vector<std::uint8_t> payload(4 * count);
    process_->read_all(payload.data(), payload.size(), deadline);
    Tensor eps = Tensor::zeros(shape);
    for (std::size_t i = 0; i < count; ++i) {
      const double v = static_cast<double>(wire::get_f32(payload.data() + 4 * i));
      if (!std::isfinite(v)) fail_protocol("non-finite value in eps payload");
      eps[i] = v;
    }
    return eps;
  }

  [[noreturn]] void fail_protocol(const std::string& detail) const {
    process_->terminate();
    fail(ErrorKind::Protocol, "external denoiser '" + command_ + "': " + detail);
  }

  int timeout_ms_;
  std::string command_;
  mutable std::mutex mutex_;
  mutable std::unique_ptr<Subprocess> process_;
};

}  // namespace

DenoiserPtr make_external_denoiser(const std::string& command_line, int timeout_ms) {
  return std::make_shared<ExternalDenoiser>(command_line, timeout_ms);
}

}  // namespace mesb
