#include "mfm/conditioning.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mfm/error.hpp"

namespace mfm {
namespace {

struct TaskInfo {
  TaskTag tag;
  std::string_view short_name;
  std::string_view canonical;
  bool image;
  bool generation;
};

constexpr std::array<TaskInfo, kTaskCount> kTaskInfo = {{
    {TaskTag::T2V, "T2V", "text-to-video", false, true},
    {TaskTag::I2V, "I2V", "image-to-video", false, true},
    {TaskTag::VEXT, "VEXT", "video-extension", false, true},
    {TaskTag::VINP, "VINP", "video-inpainting", false, false},
    {TaskTag::VOUTP, "VOUTP", "video-outpainting", false, false},
    {TaskTag::VCOLOR, "VCOLOR", "video-colorization", false, false},
    {TaskTag::FLF2V, "FLF2V", "first-last-frame-to-video", false, true},
    {TaskTag::FLC2V, "FLC2V", "first-last-clip-to-video", false, true},
    {TaskTag::VSR, "VSR", "video-super-resolution", false, false},
    {TaskTag::VEDIT, "VEDIT", "video-editing", false, false},
    {TaskTag::T2I, "T2I", "text-to-image", true, true},
    {TaskTag::SISR, "SISR", "image-super-resolution", true, false},
    {TaskTag::IINP, "IINP", "image-inpainting", true, false},
    {TaskTag::IOUTP, "IOUTP", "image-outpainting", true, false},
    {TaskTag::ICOLOR, "ICOLOR", "image-colorization", true, false},
    {TaskTag::IEDIT, "IEDIT", "image-editing", true, false},
}};

const TaskInfo& info(TaskTag task) { return kTaskInfo[static_cast<std::size_t>(task)]; }

constexpr std::string_view kSuffixOpen = "[task: ";

// Minimum clip length for the two-clip tasks (VEXT, FLC2V).
constexpr int kTwoClipMinFrames = 17;
constexpr int kClipMin = 8;
constexpr int kClipMax = 16;

constexpr std::array<std::string_view, 4> kStyles = {"oil painting", "watercolor", "pencil sketch",
                                                     "anime"};

void copy_frame(const VideoTensor& src, VideoTensor& dst, int t) {
  std::copy(src.frame(t).begin(), src.frame(t).end(), dst.frame(t).begin());
}

void fill_frame(VideoTensor& v, int t, double value) {
  std::fill(v.frame(t).begin(), v.frame(t).end(), value);
}

// Condition frames [0, k) and the listed trailing frames; all others are generated.
void condition_frames(const VideoTensor& clip, const VideoTensor& depth, ConditionBundle& b,
                      const std::vector<int>& frames) {
  for (int t : frames) {
    copy_frame(clip, b.pixel, t);
    copy_frame(depth, b.depth, t);
    fill_frame(b.mask, t, 1.0);
  }
}

std::vector<int> range_frames(int begin, int end) {
  std::vector<int> out;
  for (int t = begin; t < end; ++t) out.push_back(t);
  return out;
}

// Applies a per-pixel spatial mask (1 = keep) to every frame.
void condition_spatial(const VideoTensor& clip, const VideoTensor& depth, ConditionBundle& b,
                       const std::vector<unsigned char>& keep) {
  const int H = clip.height, W = clip.width;
  for (int t = 0; t < clip.frames; ++t) {
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        if (!keep[static_cast<std::size_t>(y) * W + x]) continue;
        for (int c = 0; c < 3; ++c) b.pixel.at(t, y, x, c) = clip.at(t, y, x, c);
        b.depth.at(t, y, x, 0) = depth.at(t, y, x, 0);
        b.mask.at(t, y, x, 0) = 1.0;
      }
    }
  }
}

void condition_full(const VideoTensor& pixel_source, const VideoTensor& depth, ConditionBundle& b) {
  b.pixel.data = pixel_source.data;
  b.depth.data = depth.data;
  std::fill(b.mask.data.begin(), b.mask.data.end(), 1.0);
}

// Interior rectangle covering between 1/9 and 1/4 of the frame, one pixel from every border.
std::vector<unsigned char> inpainting_keep_mask(int H, int W, Rng& rng, std::string& detail) {
  const long area = static_cast<long>(H) * W;
  std::vector<int> heights;
  for (int rh = 1; rh <= H - 2; ++rh) {
    const long lo = std::max<long>(1, (area + 9L * rh - 1) / (9L * rh));
    const long hi = std::min<long>(W - 2, area / (4L * rh));
    if (lo <= hi) heights.push_back(rh);
  }
  if (heights.empty()) throw ValidationError("frame too small for an interior inpainting mask");
  const int rh = heights[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(heights.size()) - 1))];
  const int lo = static_cast<int>(std::max<long>(1, (area + 9L * rh - 1) / (9L * rh)));
  const int hi = static_cast<int>(std::min<long>(W - 2, area / (4L * rh)));
  const int rw = uniform_int(rng, lo, hi);
  const int top = uniform_int(rng, 1, H - 1 - rh);
  const int left = uniform_int(rng, 1, W - 1 - rw);
  std::vector<unsigned char> keep(static_cast<std::size_t>(area), 1);
  for (int y = top; y < top + rh; ++y)
    for (int x = left; x < left + rw; ++x) keep[static_cast<std::size_t>(y) * W + x] = 0;
  detail = "rect=" + std::to_string(top) + "," + std::to_string(left) + "," + std::to_string(rh) +
           "," + std::to_string(rw);
  return keep;
}

// Boundary band; each side's width lies in [D/8, D/4] of its dimension D.
std::vector<unsigned char> outpainting_keep_mask(int H, int W, Rng& rng, std::string& detail) {
  auto band = [&rng](int dim) { return uniform_int(rng, (dim + 7) / 8, dim / 4); };
  const int top = band(H), bottom = band(H), left = band(W), right = band(W);
  std::vector<unsigned char> keep(static_cast<std::size_t>(H) * W, 0);
  for (int y = top; y < H - bottom; ++y)
    for (int x = left; x < W - right; ++x) keep[static_cast<std::size_t>(y) * W + x] = 1;
  detail = "bands=" + std::to_string(top) + "," + std::to_string(bottom) + "," +
           std::to_string(left) + "," + std::to_string(right);
  return keep;
}

VideoTensor grayscale(const VideoTensor& clip) {
  VideoTensor y = luminance(clip);
  VideoTensor out(clip.frames, clip.height, clip.width, 3);
  for (std::size_t i = 0; i < y.size(); ++i) out.data[3 * i] = out.data[3 * i + 1] = out.data[3 * i + 2] = y.data[i];
  return out;
}

std::vector<double> gaussian_kernel(int radius, double sigma) {
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double s = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    s += k[static_cast<std::size_t>(i + radius)];
  }
  for (double& v : k) v /= s;
  return k;
}

}  // namespace

std::string_view task_short_name(TaskTag task) { return info(task).short_name; }
std::string_view task_canonical(TaskTag task) { return info(task).canonical; }
bool is_image_task(TaskTag task) { return info(task).image; }
bool is_generation_task(TaskTag task) { return info(task).generation; }
std::size_t task_index(TaskTag task) { return static_cast<std::size_t>(task); }

std::optional<TaskTag> parse_task(std::string_view text) {
  for (const auto& i : kTaskInfo) {
    if (text == i.short_name || text == i.canonical) return i.tag;
  }
  return std::nullopt;
}

std::string append_task_suffix(std::string_view prompt, TaskTag task) {
  std::string out(prompt);
  if (!out.empty()) out += ' ';
  out += kSuffixOpen;
  out += task_canonical(task);
  out += ']';
  return out;
}

std::optional<TaskTag> parse_task_suffix(std::string_view prompt) {
  if (prompt.empty() || prompt.back() != ']') return std::nullopt;
  const auto pos = prompt.rfind(kSuffixOpen);
  if (pos == std::string_view::npos) return std::nullopt;
  const auto name = prompt.substr(pos + kSuffixOpen.size(),
                                  prompt.size() - 1 - (pos + kSuffixOpen.size()));
  const auto tag = parse_task(name);
  if (!tag || task_canonical(*tag) != name) return std::nullopt;
  return tag;
}

VideoTensor depth_proxy(const VideoTensor& clip, const DepthProxyOptions& options) {
  if (clip.channels != 3) throw ShapeError("depth_proxy expects a 3-channel clip");
  if (options.radius < 0) throw ValidationError("depth_proxy radius must be >= 0");
  const VideoTensor y = luminance(clip);
  const int H = clip.height, W = clip.width, r = options.radius;
  VideoTensor inv(clip.frames, H, W, 1);
  for (std::size_t i = 0; i < y.size(); ++i) inv.data[i] = 1.0 - 0.5 * (y.data[i] + 1.0);
  if (r == 0) {
    for (double& v : inv.data) v = std::clamp(v, 0.0, 1.0);
    return inv;
  }
  // Separable normalized Gaussian, replicate borders: constants stay constant.
  const auto k = gaussian_kernel(r, options.sigma);
  VideoTensor tmp(clip.frames, H, W, 1), out(clip.frames, H, W, 1);
  for (int t = 0; t < clip.frames; ++t) {
    for (int yy = 0; yy < H; ++yy)
      for (int x = 0; x < W; ++x) {
        double s = 0.0;
        for (int d = -r; d <= r; ++d) s += k[static_cast<std::size_t>(d + r)] * inv.at(t, yy, std::clamp(x + d, 0, W - 1), 0);
        tmp.at(t, yy, x, 0) = s;
      }
    for (int yy = 0; yy < H; ++yy)
      for (int x = 0; x < W; ++x) {
        double s = 0.0;
        for (int d = -r; d <= r; ++d) s += k[static_cast<std::size_t>(d + r)] * tmp.at(t, std::clamp(yy + d, 0, H - 1), x, 0);
        out.at(t, yy, x, 0) = std::clamp(s, 0.0, 1.0);
      }
  }
  return out;
}

double motion_proxy(const VideoTensor& clip) {
  if (clip.frames < 2) return 0.0;
  const VideoTensor y = clip.channels == 3 ? luminance(clip) : clip;
  if (y.channels != 1) throw ShapeError("motion_proxy expects a 1- or 3-channel clip");
  const std::size_t plane = y.frame_size();
  double total = 0.0;
  for (int t = 0; t + 1 < y.frames; ++t) {
    const auto a = y.frame(t), b = y.frame(t + 1);
    double s = 0.0;
    for (std::size_t i = 0; i < plane; ++i) s += std::abs(b[i] - a[i]);
    total += s / static_cast<double>(plane);
  }
  return total / static_cast<double>(y.frames - 1);
}

std::vector<TaskTag> qualified_tasks(const VideoTensor& clip, bool has_edit_pair) {
  std::vector<TaskTag> out;
  const int T = clip.frames;
  for (TaskTag task : kAllTasks) {
    if (is_image_task(task) != (T == 1)) continue;
    if ((task == TaskTag::VEDIT || task == TaskTag::IEDIT) && !has_edit_pair) continue;
    if ((task == TaskTag::VEXT || task == TaskTag::FLC2V) && T < kTwoClipMinFrames) continue;
    if (task == TaskTag::FLF2V && T < 3) continue;
    out.push_back(task);
  }
  return out;
}

VideoTensor degrade_resolution(const VideoTensor& clip, int factor) {
  if (factor < 1) throw ValidationError("downsampling factor must be >= 1");
  const int H = clip.height, W = clip.width, C = clip.channels;
  VideoTensor out(clip.frames, H, W, C);
  for (int t = 0; t < clip.frames; ++t) {
    for (int by = 0; by < H; by += factor) {
      for (int bx = 0; bx < W; bx += factor) {
        const int ey = std::min(by + factor, H), ex = std::min(bx + factor, W);
        const double inv = 1.0 / static_cast<double>((ey - by) * (ex - bx));
        for (int c = 0; c < C; ++c) {
          double s = 0.0;
          for (int y = by; y < ey; ++y)
            for (int x = bx; x < ex; ++x) s += clip.at(t, y, x, c);
          s *= inv;
          for (int y = by; y < ey; ++y)
            for (int x = bx; x < ex; ++x) out.at(t, y, x, c) = s;
        }
      }
    }
  }
  return out;
}

ConditionBundle build_condition(const VideoTensor& clip, TaskTag task, std::string_view prompt,
                                Rng& rng, const BuildOptions& options) {
  validate_video(clip);
  if (clip.channels != 3) throw ShapeError("build_condition expects a 3-channel clip");
  const int T = clip.frames, H = clip.height, W = clip.width;
  if (is_image_task(task) && T != 1) {
    throw ValidationError(std::string(task_short_name(task)) + " is an image task but the clip has " +
                          std::to_string(T) + " frames");
  }
  if (!is_image_task(task) && T < 2) {
    throw ValidationError(std::string(task_short_name(task)) + " needs a multi-frame clip");
  }
  if ((task == TaskTag::T2V || task == TaskTag::T2I) && prompt.empty()) {
    throw ValidationError(std::string(task_short_name(task)) + " requires a non-empty prompt");
  }

  ConditionBundle b;
  b.task = task;
  b.pixel = VideoTensor(T, H, W, 3);
  b.depth = VideoTensor(T, H, W, 1);
  b.mask = VideoTensor(T, H, W, 1);
  b.motion_score = motion_proxy(clip);
  std::string text(prompt);

  const bool needs_depth = task != TaskTag::T2V && task != TaskTag::T2I;
  const VideoTensor depth = needs_depth ? depth_proxy(clip) : VideoTensor{};

  switch (task) {
    case TaskTag::T2V:
    case TaskTag::T2I:
      break;
    case TaskTag::I2V:
      condition_frames(clip, depth, b, {0});
      break;
    case TaskTag::VEXT: {
      if (T < kTwoClipMinFrames) throw ValidationError("VEXT needs at least 17 frames");
      const int k = options.extension_frames ? *options.extension_frames : uniform_int(rng, kClipMin, kClipMax);
      if (k < 1 || k >= T) throw ValidationError("VEXT conditioned frame count out of range");
      condition_frames(clip, depth, b, range_frames(0, k));
      b.detail = "k=" + std::to_string(k);
      break;
    }
    case TaskTag::FLF2V:
      if (T < 3) throw ValidationError("FLF2V needs at least 3 frames");
      condition_frames(clip, depth, b, {0, T - 1});
      break;
    case TaskTag::FLC2V: {
      if (T < kTwoClipMinFrames) throw ValidationError("FLC2V needs at least 17 frames");
      // Both clips are shortened as needed so that at least one frame stays unconditioned.
      const int k1 = options.first_clip_frames ? *options.first_clip_frames
                                               : uniform_int(rng, kClipMin, std::min(kClipMax, T - 1 - kClipMin));
      if (k1 < 1 || k1 > T - 2) throw ValidationError("FLC2V first clip length out of range");
      const int k2 = options.last_clip_frames ? *options.last_clip_frames
                                              : uniform_int(rng, kClipMin, std::max(kClipMin, std::min(kClipMax, T - 1 - k1)));
      if (k1 < 1 || k2 < 1 || k1 + k2 >= T) throw ValidationError("FLC2V clips overlap the whole video");
      auto frames = range_frames(0, k1);
      for (int t = T - k2; t < T; ++t) frames.push_back(t);
      condition_frames(clip, depth, b, frames);
      b.detail = "k1=" + std::to_string(k1) + " k2=" + std::to_string(k2);
      break;
    }
    case TaskTag::VINP:
    case TaskTag::IINP:
      condition_spatial(clip, depth, b, inpainting_keep_mask(H, W, rng, b.detail));
      break;
    case TaskTag::VOUTP:
    case TaskTag::IOUTP:
      condition_spatial(clip, depth, b, outpainting_keep_mask(H, W, rng, b.detail));
      break;
    case TaskTag::VCOLOR:
    case TaskTag::ICOLOR:
      condition_full(grayscale(clip), depth, b);
      break;
    case TaskTag::VSR:
    case TaskTag::SISR: {
      const int s = options.sr_factor ? *options.sr_factor : uniform_int(rng, 2, 6);
      if (s < 2 || s > 6) throw ValidationError("super-resolution factor must lie in [2, 6]");
      condition_full(degrade_resolution(clip, s), depth, b);
      b.detail = "factor=" + std::to_string(s);
      break;
    }
    case TaskTag::VEDIT:
    case TaskTag::IEDIT: {
      condition_full(clip, depth, b);
      if (options.style_prompt) {
        text = *options.style_prompt;
      } else {
        const auto style = kStyles[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(kStyles.size()) - 1))];
        text = std::string("change the ") + (task == TaskTag::VEDIT ? "video" : "image") + " to " +
               std::string(style) + " style";
      }
      break;
    }
  }
  b.prompt = append_task_suffix(text, task);
  return b;
}

VideoTensor condition_input(const ConditionBundle& b) {
  VideoTensor out(b.frames(), b.height(), b.width(), kConditionChannels);
  const std::size_t n = static_cast<std::size_t>(b.frames()) * b.height() * b.width();
  for (std::size_t i = 0; i < n; ++i) {
    double* dst = out.data.data() + i * kConditionChannels;
    dst[0] = b.pixel.data[3 * i];
    dst[1] = b.pixel.data[3 * i + 1];
    dst[2] = b.pixel.data[3 * i + 2];
    dst[3] = b.depth.data[i];
    dst[4] = b.mask.data[i];
  }
  return out;
}

void validate_bundle(const ConditionBundle& b) {
  if (b.pixel.channels != 3 || b.depth.channels != 1 || b.mask.channels != 1) {
    throw ValidationError("bundle channel counts must be 3/1/1");
  }
  if (b.pixel.frames != b.depth.frames || b.pixel.frames != b.mask.frames ||
      b.pixel.height != b.depth.height || b.pixel.height != b.mask.height ||
      b.pixel.width != b.depth.width || b.pixel.width != b.mask.width) {
    throw ValidationError("bundle tensors do not share (T, H, W)");
  }
  validate_video(b.pixel);
  validate_mask(b.mask);
  const std::size_t n = b.mask.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (b.mask.data[i] != 0.0) continue;
    if (b.depth.data[i] != 0.0 || b.pixel.data[3 * i] != 0.0 || b.pixel.data[3 * i + 1] != 0.0 ||
        b.pixel.data[3 * i + 2] != 0.0) {
      throw ValidationError("condition data present where the mask is 0");
    }
  }
  if (b.task == TaskTag::T2V || b.task == TaskTag::T2I) {
    for (double v : b.mask.data)
      if (v != 0.0) throw ValidationError("text-only task carries a non-zero mask");
  }
  if (is_image_task(b.task) != (b.frames() == 1)) {
    throw ValidationError("task kind does not match the frame count");
  }
}

ConditionBundle zero_conditions(ConditionBundle b) {
  std::fill(b.pixel.data.begin(), b.pixel.data.end(), 0.0);
  std::fill(b.depth.data.begin(), b.depth.data.end(), 0.0);
  std::fill(b.mask.data.begin(), b.mask.data.end(), 0.0);
  return b;
}

ConditionBundle null_text(ConditionBundle b) {
  b.prompt.clear();
  return b;
}

}  // namespace mfm
