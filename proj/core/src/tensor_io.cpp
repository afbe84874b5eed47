#include "mfm/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "mfm/error.hpp"

namespace mfm::io {
namespace {

constexpr std::uint32_t kNamedMagic = 0x434D464Du;  // "MFMC"
constexpr std::uint32_t kNamedVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw IoError("truncated tensor container");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void round_to_f32(std::vector<double>& values) {
  for (double& v : values) v = static_cast<double>(static_cast<float>(v));
}

void write_tensor(std::ostream& out, const RawTensor& tensor) {
  if (tensor.values.size() != tensor.count()) throw ShapeError("tensor payload/dims mismatch");
  put_u32(out, kTensorMagic);
  put_u32(out, kTensorVersion);
  for (std::uint32_t d : tensor.dims) put_u32(out, d);
  put_u32(out, kDtypeF32);
  put_u32(out, 0);
  std::vector<unsigned char> bytes(tensor.values.size() * 4);
  for (std::size_t i = 0; i < tensor.values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(tensor.values[i]));
    bytes[4 * i + 0] = static_cast<unsigned char>(bits);
    bytes[4 * i + 1] = static_cast<unsigned char>(bits >> 8);
    bytes[4 * i + 2] = static_cast<unsigned char>(bits >> 16);
    bytes[4 * i + 3] = static_cast<unsigned char>(bits >> 24);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing tensor container");
}

RawTensor read_tensor(std::istream& in) {
  if (get_u32(in) != kTensorMagic) throw IoError("bad tensor magic");
  if (const auto v = get_u32(in); v != kTensorVersion) {
    throw IoError("unsupported tensor container version " + std::to_string(v));
  }
  RawTensor t;
  for (auto& d : t.dims) d = get_u32(in);
  if (get_u32(in) != kDtypeF32) throw IoError("unsupported dtype tag");
  get_u32(in);  // reserved
  const std::size_t n = t.count();
  std::vector<unsigned char> bytes(n * 4);
  if (!in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()))) {
    throw IoError("truncated tensor payload");
  }
  t.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t bits = static_cast<std::uint32_t>(bytes[4 * i]) |
                               (static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8) |
                               (static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16) |
                               (static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24);
    t.values[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return t;
}

RawTensor to_raw(const VideoTensor& video) {
  RawTensor r;
  r.dims = {static_cast<std::uint32_t>(video.frames), static_cast<std::uint32_t>(video.height),
            static_cast<std::uint32_t>(video.width), static_cast<std::uint32_t>(video.channels)};
  r.values = video.data;
  return r;
}

VideoTensor to_video(RawTensor raw) {
  VideoTensor v;
  v.frames = static_cast<int>(raw.dims[0]);
  v.height = static_cast<int>(raw.dims[1]);
  v.width = static_cast<int>(raw.dims[2]);
  v.channels = static_cast<int>(raw.dims[3]);
  v.data = std::move(raw.values);
  return v;
}

RawTensor to_raw(const LatentGrid& latent) {
  RawTensor r;
  r.dims = {static_cast<std::uint32_t>(latent.t), static_cast<std::uint32_t>(latent.h),
            static_cast<std::uint32_t>(latent.w), static_cast<std::uint32_t>(latent.c)};
  r.values = latent.data;
  return r;
}

LatentGrid to_latent(RawTensor raw) {
  LatentGrid g;
  g.t = static_cast<int>(raw.dims[0]);
  g.h = static_cast<int>(raw.dims[1]);
  g.w = static_cast<int>(raw.dims[2]);
  g.c = static_cast<int>(raw.dims[3]);
  g.data = std::move(raw.values);
  return g;
}

namespace {

RawTensor load_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_tensor(in);
}

void save_raw(const std::filesystem::path& path, const RawTensor& raw) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  write_tensor(out, raw);
}

}  // namespace

void save_video(const std::filesystem::path& path, const VideoTensor& video) {
  save_raw(path, to_raw(video));
}
VideoTensor load_video(const std::filesystem::path& path) { return to_video(load_raw(path)); }
void save_latent(const std::filesystem::path& path, const LatentGrid& latent) {
  save_raw(path, to_raw(latent));
}
LatentGrid load_latent(const std::filesystem::path& path) { return to_latent(load_raw(path)); }

void save_named(const std::filesystem::path& path, const NamedTensors& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  put_u32(out, kNamedMagic);
  put_u32(out, kNamedVersion);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_tensor(out, tensor);
  }
  if (!out) throw IoError("failed writing " + path.string());
}

NamedTensors load_named(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  if (get_u32(in) != kNamedMagic) throw IoError("bad checkpoint magic in " + path.string());
  if (get_u32(in) != kNamedVersion) throw IoError("unsupported checkpoint version");
  const std::uint32_t count = get_u32(in);
  NamedTensors out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = get_u32(in);
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw IoError("truncated checkpoint entry name");
    out.emplace_back(std::move(name), read_tensor(in));
  }
  return out;
}

}  // namespace mfm::io
