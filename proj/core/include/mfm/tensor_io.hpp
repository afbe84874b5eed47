#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "mfm/video.hpp"

namespace mfm::io {

// Container layout (all little-endian):
//   8 x uint32 header: magic "MFMT", version, T, H, W, C, dtype tag, reserved
//   T*H*W*C x float32 payload, channels fastest
inline constexpr std::uint32_t kTensorMagic = 0x544D464Du;  // "MFMT"
inline constexpr std::uint32_t kTensorVersion = 1;
inline constexpr std::uint32_t kDtypeF32 = 0;

/// A 4-D tensor as stored on disk. Lower-rank tensors are padded with leading 1s.
struct RawTensor {
  std::array<std::uint32_t, 4> dims{1, 1, 1, 1};
  std::vector<double> values;

  std::size_t count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2] * dims[3];
  }
};

void write_tensor(std::ostream& out, const RawTensor& tensor);
RawTensor read_tensor(std::istream& in);

RawTensor to_raw(const VideoTensor& video);
VideoTensor to_video(RawTensor raw);
RawTensor to_raw(const LatentGrid& latent);
LatentGrid to_latent(RawTensor raw);

void save_video(const std::filesystem::path& path, const VideoTensor& video);
VideoTensor load_video(const std::filesystem::path& path);
void save_latent(const std::filesystem::path& path, const LatentGrid& latent);
LatentGrid load_latent(const std::filesystem::path& path);

/// Ordered named-tensor container used for checkpoints.
using NamedTensors = std::vector<std::pair<std::string, RawTensor>>;

void save_named(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors load_named(const std::filesystem::path& path);

/// Rounds every value to float32 precision, matching what a save/load cycle yields.
void round_to_f32(std::vector<double>& values);

}  // namespace mfm::io
