#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "mesb/tensor.hpp"

namespace mesb::wire {

// External denoiser protocol, little-endian throughout.
//
// Request frame:
//   8 bytes magic "MESBDNZ1"
//   u32 message_type (1 = denoise)
//   u32 ndim (1..4)
//   u32 dims[ndim]
//   f64 t
//   f32 payload X_t        (prod(dims) values, row-major)
//   f32 payload X_corrupt  (same shape)
//
// Response frame:
//   8 bytes magic
//   u32 message_type (2 = eps reply, 3 = error)
//   on 2: u32 ndim, u32 dims[ndim], f32 payload eps_hat
//   on 3: u32 byte_length, UTF-8 message
//
// One request, one response, in order; the server flushes after each
// response.

inline constexpr std::array<std::uint8_t, 8> kMagic = {'M', 'E', 'S', 'B',
                                                       'D', 'N', 'Z', '1'};
inline constexpr std::uint32_t kDenoiseRequest = 1;
inline constexpr std::uint32_t kEpsReply = 2;
inline constexpr std::uint32_t kErrorReply = 3;
inline constexpr std::uint32_t kMaxDims = 4;

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 24));
}

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_f64(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  put_u64(out, bits);
}

inline void put_f32(std::vector<std::uint8_t>& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  put_u32(out, bits);
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline double get_f64(const std::uint8_t* p) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | p[i];
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

inline float get_f32(const std::uint8_t* p) {
  const std::uint32_t bits = get_u32(p);
  float v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

/// Serializes a denoise request frame. Shapes are narrowed to float32 on
/// the wire by protocol.
std::vector<std::uint8_t> encode_denoise_request(const Tensor& x_t, double t,
                                                 const Tensor& x_corrupt);

/// Serializes an eps reply for the given tensor (float32 payload).
std::vector<std::uint8_t> encode_eps_reply(const Shape& shape, const std::vector<float>& eps);

/// Serializes an error reply.
std::vector<std::uint8_t> encode_error_reply(const std::string& message);

}  // namespace mesb::wire
