#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mfm {

/// Pixel-space clip stored channels-last as T x H x W x C.
///
/// Pixel data lives in [-1, 1]; masks use {0, 1}. A single frame (T = 1) is an image.
struct VideoTensor {
  int frames = 0;
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  VideoTensor() = default;
  VideoTensor(int t, int h, int w, int c, double fill = 0.0);

  std::size_t size() const { return data.size(); }
  std::size_t frame_size() const {
    return static_cast<std::size_t>(height) * width * channels;
  }
  std::size_t index(int t, int h, int w, int c) const {
    return ((static_cast<std::size_t>(t) * height + h) * width + w) * channels + c;
  }
  double& at(int t, int h, int w, int c) { return data[index(t, h, w, c)]; }
  double at(int t, int h, int w, int c) const { return data[index(t, h, w, c)]; }

  std::span<double> frame(int t) { return {data.data() + t * frame_size(), frame_size()}; }
  std::span<const double> frame(int t) const {
    return {data.data() + t * frame_size(), frame_size()};
  }

  bool same_shape(const VideoTensor& o) const {
    return frames == o.frames && height == o.height && width == o.width && channels == o.channels;
  }
  bool operator==(const VideoTensor&) const = default;
};

/// Latent-space tensor t x h x w x c aligned with the codec's compression ratios.
struct LatentGrid {
  int t = 0;
  int h = 0;
  int w = 0;
  int c = 0;
  std::vector<double> data;

  LatentGrid() = default;
  LatentGrid(int t_, int h_, int w_, int c_, double fill = 0.0);

  std::size_t size() const { return data.size(); }
  std::size_t tokens() const { return static_cast<std::size_t>(t) * h * w; }
  std::size_t index(int ti, int hi, int wi, int ci) const {
    return ((static_cast<std::size_t>(ti) * h + hi) * w + wi) * c + ci;
  }
  double& at(int ti, int hi, int wi, int ci) { return data[index(ti, hi, wi, ci)]; }
  double at(int ti, int hi, int wi, int ci) const { return data[index(ti, hi, wi, ci)]; }

  bool same_shape(const LatentGrid& o) const {
    return t == o.t && h == o.h && w == o.w && c == o.c;
  }
  bool operator==(const LatentGrid&) const = default;
};

/// Latent frame count for a clip of `frames` frames; throws ShapeError for invalid counts.
int latent_frames(int frames);

/// True when `frames` is 1, or congruent to 0 or 1 modulo 4.
bool valid_frame_count(int frames);

/// Checks the VideoTensor invariants: H, W multiples of 8, frame residue, finiteness.
void validate_video(const VideoTensor& video);

/// Checks the mask invariant: every value exactly 0 or 1.
void validate_mask(const VideoTensor& mask);

void require_same_shape(const LatentGrid& a, const LatentGrid& b, const char* what);

// BT.601 luma weights; luminance of a [-1, 1] RGB pixel stays in [-1, 1].
inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

/// Per-pixel luminance of a 3-channel clip, as a 1-channel clip.
VideoTensor luminance(const VideoTensor& rgb);

}  // namespace mfm
