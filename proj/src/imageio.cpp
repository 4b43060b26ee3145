#include "mesb/imageio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace mesb {

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, result.ptr);
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open '" + path + "' for writing");
  return out;
}

}  // namespace

void write_pgm16(const std::string& path, const Tensor& image) {
  const std::size_t rows = image.rows();
  const std::size_t cols = image.cols();
  double lo = image[0], hi = image[0];
  for (std::size_t i = 0; i < image.size(); ++i) {
    lo = std::min(lo, image[i]);
    hi = std::max(hi, image[i]);
  }
  const double span = hi > lo ? hi - lo : 1.0;

  auto out = open_out(path);
  out << "P5\n# min=" << format_double(lo) << " max=" << format_double(hi) << "\n"
      << cols << " " << rows << "\n65535\n";
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double scaled01 = (image[i] - lo) / span;
    const auto v = static_cast<std::uint16_t>(std::lround(scaled01 * 65535.0));
    const unsigned char bytes[2] = {static_cast<unsigned char>(v >> 8),
                                    static_cast<unsigned char>(v & 0xff)};
    out.write(reinterpret_cast<const char*>(bytes), 2);
  }
  if (!out) fail(ErrorKind::Io, "failed writing '" + path + "'");
}

void write_f32(const std::string& path, const Tensor& image) {
  const auto rows = static_cast<std::uint32_t>(image.rows());
  const auto cols = static_cast<std::uint32_t>(image.cols());
  auto out = open_out(path);
  out.write("MESBIMG1", 8);
  const unsigned char dims[8] = {
      static_cast<unsigned char>(rows),       static_cast<unsigned char>(rows >> 8),
      static_cast<unsigned char>(rows >> 16), static_cast<unsigned char>(rows >> 24),
      static_cast<unsigned char>(cols),       static_cast<unsigned char>(cols >> 8),
      static_cast<unsigned char>(cols >> 16), static_cast<unsigned char>(cols >> 24)};
  out.write(reinterpret_cast<const char*>(dims), 8);
  for (std::size_t i = 0; i < image.size(); ++i) {
    const float f = static_cast<float>(image[i]);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    const unsigned char b[4] = {static_cast<unsigned char>(bits),
                                static_cast<unsigned char>(bits >> 8),
                                static_cast<unsigned char>(bits >> 16),
                                static_cast<unsigned char>(bits >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
  }
  if (!out) fail(ErrorKind::Io, "failed writing '" + path + "'");
}

Tensor read_f32(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path + "'");
  char magic[8];
  unsigned char header[8];
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(header), 8);
  if (!in || std::memcmp(magic, "MESBIMG1", 8) != 0) {
    fail(ErrorKind::Io, "'" + path + "' is not a MESBIMG1 file");
  }
  const std::uint32_t rows = header[0] | (header[1] << 8) | (header[2] << 16) | (header[3] << 24);
  const std::uint32_t cols = header[4] | (header[5] << 8) | (header[6] << 16) | (header[7] << 24);
  if (rows == 0 || cols == 0) fail(ErrorKind::Io, "'" + path + "' has a degenerate shape");
  Tensor image = Tensor::zeros({rows, cols});
  for (std::size_t i = 0; i < image.size(); ++i) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) fail(ErrorKind::Io, "'" + path + "' truncated");
    const std::uint32_t bits = b[0] | (b[1] << 8) | (b[2] << 16) | (std::uint32_t(b[3]) << 24);
    float f;
    std::memcpy(&f, &bits, 4);
    image[i] = static_cast<double>(f);
  }
  return image;
}

std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::ostringstream out;
  out << "task,sampler,N,p,k_y,k_E,T,phantom_index,seed,psnr_db,ssim,data_residual,wall_ms\n";
  for (const auto& r : rows) {
    out << r.task << ',' << r.sampler << ',' << r.steps << ',' << r.cg_iters << ','
        << format_double(r.k_y) << ',' << format_double(r.k_E) << ',' << r.t_kind << ','
        << r.phantom_index << ',' << r.seed << ',' << format_double(r.psnr_db) << ','
        << format_double(r.ssim_value) << ',' << format_double(r.data_residual) << ','
        << r.wall_ms << '\n';
  }
  return out.str();
}

void write_metrics_csv(const std::string& path, const std::vector<MetricRow>& rows) {
  auto out = open_out(path);
  const std::string body = metrics_csv(rows);
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  if (!out) fail(ErrorKind::Io, "failed writing '" + path + "'");
}

}  // namespace mesb
