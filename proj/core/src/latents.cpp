#include "mfm/latents.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "mfm/error.hpp"

namespace mfm {
namespace {

// Maps source frame -> latent frame for the temporal grouping rule.
int latent_frame_of(int frame, int total_frames) {
  if (total_frames % 4 == 0) return frame / 4;
  return frame == 0 ? 0 : (frame - 1) / 4 + 1;
}

}  // namespace

LatentCodec::LatentCodec(int source_channels)
    : source_channels_(source_channels), latent_channels_(64 * source_channels) {
  if (source_channels <= 0) throw ShapeError("codec needs at least one source channel");
}

LatentCodec::LatentCodec(int source_channels, int latent_channels) : LatentCodec(source_channels) {
  const int folded = folded_channels();
  if (latent_channels <= 0 || latent_channels > folded) {
    throw ShapeError("latent channels must lie in [1, " + std::to_string(folded) + "]");
  }
  latent_channels_ = latent_channels;
  if (latent_channels == folded) return;

  // 8x8 DCT-II atoms ordered by total frequency u+v (then u), colour channels
  // interleaved, so a prefix keeps the lowest frequencies of every channel.
  std::array<std::pair<int, int>, 64> order;
  for (int i = 0; i < 64; ++i) order[i] = {i / 8, i % 8};
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    return a.first + a.second != b.first + b.second ? a.first + a.second < b.first + b.second
                                                      : a.first < b.first;
  });
  const double pi = std::acos(-1.0);
  const auto dct = [pi](int k, int x) {
    const double a = k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
    return a * std::cos((2 * x + 1) * k * pi / 16.0);
  };
  const int C = source_channels_;
  const auto n = static_cast<std::size_t>(folded);
  basis_.assign(static_cast<std::size_t>(latent_channels) * n, 0.0);
  for (int r = 0; r < latent_channels; ++r) {
    const auto [u, v] = order[r / C];
    const int c = r % C;
    double* row = basis_.data() + r * n;
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) row[(y * 8 + x) * C + c] = dct(u, y) * dct(v, x);
    }
  }
}

std::array<int, 3> LatentCodec::latent_dims(int frames, int height, int width) {
  if (height <= 0 || width <= 0 || height % kSpatialFactor != 0 || width % kSpatialFactor != 0) {
    throw ShapeError("height and width must be positive multiples of 8, got " +
                     std::to_string(height) + "x" + std::to_string(width));
  }
  return {latent_frames(frames), height / kSpatialFactor, width / kSpatialFactor};
}

LatentGrid LatentCodec::encode(const VideoTensor& video) const {
  validate_video(video);
  if (video.channels != source_channels_) {
    throw ShapeError("codec expects " + std::to_string(source_channels_) + " channels, got " +
                     std::to_string(video.channels));
  }
  const auto [t, h, w] = latent_dims(video.frames, video.height, video.width);
  const int C = source_channels_;
  const int folded = folded_channels();

  // Spatial folding per frame, then temporal grouping. Groups of four are
  // summed pairwise so that four equal frames average back exactly.
  const std::size_t plane = static_cast<std::size_t>(h) * w * folded;
  std::vector<double> frames(static_cast<std::size_t>(video.frames) * plane);
  for (int f = 0; f < video.frames; ++f) {
    double* dst = frames.data() + f * plane;
    for (int y = 0; y < video.height; ++y) {
      for (int x = 0; x < video.width; ++x) {
        const std::size_t tok = static_cast<std::size_t>(y / 8) * w + x / 8;
        const int ch_base = ((y % 8) * 8 + (x % 8)) * C;
        for (int c = 0; c < C; ++c) dst[tok * folded + ch_base + c] = video.at(f, y, x, c);
      }
    }
  }

  LatentGrid fold(t, h, w, folded);
  const int lead = video.frames % 4 == 0 ? 0 : 1;
  if (lead) std::copy_n(frames.data(), plane, fold.data.data());
  for (int g = 0; g + lead < t; ++g) {
    const double* f0 = frames.data() + (lead + 4 * g) * plane;
    double* dst = fold.data.data() + (g + lead) * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      dst[i] = ((f0[i] + f0[i + plane]) + (f0[i + 2 * plane] + f0[i + 3 * plane])) * 0.25;
    }
  }
  if (!projects()) return fold;

  LatentGrid out(t, h, w, latent_channels_);
  const auto n = static_cast<std::size_t>(folded);
  for (std::size_t tok = 0; tok < fold.tokens(); ++tok) {
    const double* src = fold.data.data() + tok * n;
    double* dst = out.data.data() + tok * latent_channels_;
    for (int r = 0; r < latent_channels_; ++r) {
      const double* row = basis_.data() + r * n;
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += row[j] * src[j];
      dst[r] = s;
    }
  }
  return out;
}

VideoTensor LatentCodec::decode(const LatentGrid& latent) const {
  return decode(latent, latent.t == 1 ? 1 : 4 * (latent.t - 1) + 1);
}

VideoTensor LatentCodec::decode(const LatentGrid& latent, int frames) const {
  if (latent.c != latent_channels_) {
    throw ShapeError("decode: latent has " + std::to_string(latent.c) + " channels, codec expects " +
                     std::to_string(latent_channels_));
  }
  if (latent.data.size() != latent.tokens() * static_cast<std::size_t>(latent.c)) {
    throw ShapeError("decode: latent data size does not match its dimensions");
  }
  if (latent_frames(frames) != latent.t) {
    throw ShapeError("decode: " + std::to_string(frames) + " frames do not map to t=" +
                     std::to_string(latent.t));
  }
  const int folded = folded_channels();
  const auto n = static_cast<std::size_t>(folded);
  std::vector<double> unfolded;
  const double* src = latent.data.data();
  if (projects()) {
    unfolded.assign(latent.tokens() * n, 0.0);
    for (std::size_t tok = 0; tok < latent.tokens(); ++tok) {
      const double* z = latent.data.data() + tok * latent_channels_;
      double* dst = unfolded.data() + tok * n;
      for (int r = 0; r < latent_channels_; ++r) {
        const double* row = basis_.data() + r * n;
        for (std::size_t j = 0; j < n; ++j) dst[j] += z[r] * row[j];
      }
    }
    src = unfolded.data();
  }

  const int C = source_channels_;
  VideoTensor video(frames, latent.h * 8, latent.w * 8, C);
  for (int f = 0; f < frames; ++f) {
    const int lt = latent_frame_of(f, frames);
    for (int y = 0; y < video.height; ++y) {
      for (int x = 0; x < video.width; ++x) {
        const std::size_t tok = (static_cast<std::size_t>(lt) * latent.h + y / 8) * latent.w + x / 8;
        const int ch_base = ((y % 8) * 8 + (x % 8)) * C;
        for (int c = 0; c < C; ++c) video.at(f, y, x, c) = src[tok * n + ch_base + c];
      }
    }
  }
  return video;
}

}  // namespace mfm
