#include "mfm/video.hpp"

#include <cmath>
#include <string>

#include "mfm/error.hpp"

namespace mfm {

VideoTensor::VideoTensor(int t, int h, int w, int c, double fill)
    : frames(t), height(h), width(w), channels(c) {
  if (t < 0 || h < 0 || w < 0 || c < 0) throw ShapeError("negative video dimension");
  data.assign(static_cast<std::size_t>(t) * h * w * c, fill);
}

LatentGrid::LatentGrid(int t_, int h_, int w_, int c_, double fill) : t(t_), h(h_), w(w_), c(c_) {
  if (t_ < 0 || h_ < 0 || w_ < 0 || c_ < 0) throw ShapeError("negative latent dimension");
  data.assign(static_cast<std::size_t>(t_) * h_ * w_ * c_, fill);
}

bool valid_frame_count(int frames) {
  return frames >= 1 && (frames % 4 == 0 || frames % 4 == 1);
}

int latent_frames(int frames) {
  if (!valid_frame_count(frames)) {
    throw ShapeError("frame count " + std::to_string(frames) +
                     " is neither 1 nor congruent to 0 or 1 mod 4");
  }
  if (frames % 4 == 0) return frames / 4;
  return (frames - 1) / 4 + 1;
}

void validate_video(const VideoTensor& video) {
  if (video.height <= 0 || video.width <= 0 || video.height % 8 != 0 || video.width % 8 != 0) {
    throw ShapeError("video height/width must be positive multiples of 8, got " +
                     std::to_string(video.height) + "x" + std::to_string(video.width));
  }
  if (video.channels <= 0) throw ShapeError("video must have at least one channel");
  latent_frames(video.frames);
  if (video.data.size() != static_cast<std::size_t>(video.frames) * video.frame_size()) {
    throw ShapeError("video data size does not match its dimensions");
  }
  for (double v : video.data) {
    if (!std::isfinite(v)) throw NumericError("video contains non-finite values");
  }
}

void validate_mask(const VideoTensor& mask) {
  for (double v : mask.data) {
    if (v != 0.0 && v != 1.0) throw ValidationError("mask is not binary");
  }
}

void require_same_shape(const LatentGrid& a, const LatentGrid& b, const char* what) {
  if (!a.same_shape(b)) throw ShapeError(std::string(what) + ": latent shapes differ");
}

VideoTensor luminance(const VideoTensor& rgb) {
  if (rgb.channels != 3) throw ShapeError("luminance expects a 3-channel clip");
  VideoTensor y(rgb.frames, rgb.height, rgb.width, 1);
  const std::size_t n = y.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double* p = rgb.data.data() + 3 * i;
    y.data[i] = kLumaR * p[0] + kLumaG * p[1] + kLumaB * p[2];
  }
  return y;
}

}  // namespace mfm
