#pragma once

#include <array>
#include <vector>

#include "mfm/video.hpp"

namespace mfm {

/// Deterministic, non-learned, linear stand-in for a video VAE.
///
/// Each 8x8 spatial patch is folded into 64*C channels (lossless), and frames
/// are averaged in groups of four after a separately kept first frame
/// (T = 1 mod 4) or in plain groups of four (T = 0 mod 4). An optional fixed
/// orthonormal projection onto low-frequency 8x8 DCT atoms reduces the folded
/// channel count.
class LatentCodec {
 public:
  static constexpr int kSpatialFactor = 8;
  static constexpr int kTemporalFactor = 4;

  /// Full folding: latent channels = 64 * source_channels.
  explicit LatentCodec(int source_channels = 3);
  /// Folding followed by projection onto the `latent_channels` lowest-frequency
  /// DCT atoms (interleaved over source channels).
  LatentCodec(int source_channels, int latent_channels);

  int source_channels() const { return source_channels_; }
  int folded_channels() const { return 64 * source_channels_; }
  int latent_channels() const { return latent_channels_; }
  bool projects() const { return latent_channels_ != folded_channels(); }

  LatentGrid encode(const VideoTensor& video) const;

  /// Inverse folding. `frames` selects the source frame count; it must map to latent.t.
  VideoTensor decode(const LatentGrid& latent, int frames) const;
  /// Decode assuming the first-frame-preserving convention, T = 4(t-1) + 1.
  VideoTensor decode(const LatentGrid& latent) const;

  /// Latent dims (t, h, w) for a clip; throws ShapeError on invalid sizes.
  static std::array<int, 3> latent_dims(int frames, int height, int width);

 private:
  int source_channels_;
  int latent_channels_;
  std::vector<double> basis_;  // [latent_channels, folded_channels], orthonormal rows
};

}  // namespace mfm
