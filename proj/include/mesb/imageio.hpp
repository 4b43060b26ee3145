#pragma once

#include <string>
#include <vector>

#include "mesb/harness.hpp"
#include "mesb/tensor.hpp"

namespace mesb {

/// 16-bit binary PGM (P5, maxval 65535, big-endian samples per the netpbm
/// spec) with the applied min/max scaling recorded in a header comment.
void write_pgm16(const std::string& path, const Tensor& image);

/// Lossless raw dump: 16-byte header (magic "MESBIMG1", u32 rows, u32 cols,
/// little-endian) followed by float32 little-endian row-major samples.
void write_f32(const std::string& path, const Tensor& image);
Tensor read_f32(const std::string& path);

/// Metric rows in the fixed CSV schema:
/// task,sampler,N,p,k_y,k_E,T,phantom_index,seed,psnr_db,ssim,data_residual,wall_ms
/// Header always present; UTF-8, LF line endings, '.' decimal separator,
/// shortest round-trip float formatting, "inf" for infinities.
std::string metrics_csv(const std::vector<MetricRow>& rows);
void write_metrics_csv(const std::string& path, const std::vector<MetricRow>& rows);

std::string format_double(double v);

}  // namespace mesb
