#include "mesb/wire.hpp"

namespace mesb::wire {

std::vector<std::uint8_t> encode_denoise_request(const Tensor& x_t, double t,
                                                 const Tensor& x_corrupt) {
  if (!x_t.same_shape(x_corrupt)) {
    fail_invalid("denoise request: X_t shape " + shape_to_string(x_t.shape()) +
                 " does not match X_corrupt shape " + shape_to_string(x_corrupt.shape()));
  }
  const Shape& shape = x_t.shape();
  if (shape.size() > kMaxDims) {
    fail_invalid("denoise request supports at most " + std::to_string(kMaxDims) +
                 " dims, got " + shape_to_string(shape));
  }
  std::vector<std::uint8_t> out;
  out.reserve(8 + 4 * (2 + shape.size()) + 8 + 8 * x_t.size());
  out.insert(out.end(), kMagic.begin(), kMagic.end());
  put_u32(out, kDenoiseRequest);
  put_u32(out, static_cast<std::uint32_t>(shape.size()));
  for (std::size_t d : shape) put_u32(out, static_cast<std::uint32_t>(d));
  put_f64(out, t);
  for (std::size_t i = 0; i < x_t.size(); ++i) put_f32(out, static_cast<float>(x_t[i]));
  for (std::size_t i = 0; i < x_corrupt.size(); ++i) {
    put_f32(out, static_cast<float>(x_corrupt[i]));
  }
  return out;
}

std::vector<std::uint8_t> encode_eps_reply(const Shape& shape, const std::vector<float>& eps) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic.begin(), kMagic.end());
  put_u32(out, kEpsReply);
  put_u32(out, static_cast<std::uint32_t>(shape.size()));
  for (std::size_t d : shape) put_u32(out, static_cast<std::uint32_t>(d));
  for (float v : eps) put_f32(out, v);
  return out;
}

std::vector<std::uint8_t> encode_error_reply(const std::string& message) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic.begin(), kMagic.end());
  put_u32(out, kErrorReply);
  put_u32(out, static_cast<std::uint32_t>(message.size()));
  out.insert(out.end(), message.begin(), message.end());
  return out;
}

}  // namespace mesb::wire
