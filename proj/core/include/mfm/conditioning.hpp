#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mfm/rng.hpp"
#include "mfm/video.hpp"

namespace mfm {

/// The sixteen supported generation/manipulation tasks.
enum class TaskTag {
  T2V,
  I2V,
  VEXT,
  VINP,
  VOUTP,
  VCOLOR,
  FLF2V,
  FLC2V,
  VSR,
  VEDIT,
  T2I,
  SISR,
  IINP,
  IOUTP,
  ICOLOR,
  IEDIT,
};

inline constexpr std::size_t kTaskCount = 16;
inline constexpr std::array<TaskTag, kTaskCount> kAllTasks = {
    TaskTag::T2V,   TaskTag::I2V,   TaskTag::VEXT,  TaskTag::VINP,  TaskTag::VOUTP, TaskTag::VCOLOR,
    TaskTag::FLF2V, TaskTag::FLC2V, TaskTag::VSR,   TaskTag::VEDIT, TaskTag::T2I,   TaskTag::SISR,
    TaskTag::IINP,  TaskTag::IOUTP, TaskTag::ICOLOR, TaskTag::IEDIT};

/// Short name, e.g. "T2V".
std::string_view task_short_name(TaskTag task);
/// Lowercase hyphenated label appended to prompts, e.g. "text-to-video".
std::string_view task_canonical(TaskTag task);
std::optional<TaskTag> parse_task(std::string_view text);  // accepts either form
bool is_image_task(TaskTag task);
/// Generation tasks leave at least one whole frame unconditioned.
bool is_generation_task(TaskTag task);
std::size_t task_index(TaskTag task);

/// Unified 3-D condition: pixel (3) | depth (1) | mask (1), plus text and motion.
struct ConditionBundle {
  VideoTensor pixel;  // T x H x W x 3
  VideoTensor depth;  // T x H x W x 1
  VideoTensor mask;   // T x H x W x 1, 1 = conditioned, 0 = to generate
  TaskTag task = TaskTag::T2V;
  std::string prompt;  // includes the " [task: ...]" suffix unless nulled
  double motion_score = 0.0;
  std::string detail;  // sampled construction parameters, "key=value" pairs

  int frames() const { return pixel.frames; }
  int height() const { return pixel.height; }
  int width() const { return pixel.width; }
  bool operator==(const ConditionBundle&) const = default;
};

inline constexpr int kConditionChannels = 5;

/// Per-call overrides for sampled construction parameters (used by the benchmark).
struct BuildOptions {
  std::optional<int> extension_frames;  // VEXT k
  std::optional<int> first_clip_frames;  // FLC2V k1
  std::optional<int> last_clip_frames;   // FLC2V k2
  std::optional<int> sr_factor;          // VSR/SISR s
  std::optional<std::string> style_prompt;  // VEDIT/IEDIT instruction
};

struct DepthProxyOptions {
  int radius = 2;
  double sigma = 1.0;
};

/// Smoothed inverse luminance in [0, 1]; stands in for a monocular depth model.
VideoTensor depth_proxy(const VideoTensor& clip, const DepthProxyOptions& options = {});

/// Mean absolute luminance difference over consecutive frames; 0 for single images.
double motion_proxy(const VideoTensor& clip);

/// Tasks whose construction rules fit the clip.
std::vector<TaskTag> qualified_tasks(const VideoTensor& clip, bool has_edit_pair);

ConditionBundle build_condition(const VideoTensor& clip, TaskTag task, std::string_view prompt,
                                Rng& rng, const BuildOptions& options = {});

/// "<prompt> [task: <canonical>]" (no leading space for an empty prompt).
std::string append_task_suffix(std::string_view prompt, TaskTag task);
/// Task named by a trailing "[task: ...]" suffix, if any.
std::optional<TaskTag> parse_task_suffix(std::string_view prompt);

/// Concatenates pixel | depth | mask into a T x H x W x 5 tensor.
VideoTensor condition_input(const ConditionBundle& bundle);

/// Throws ValidationError when any ConditionBundle invariant is violated.
void validate_bundle(const ConditionBundle& bundle);

/// Copy with pixel/depth/mask zeroed.
ConditionBundle zero_conditions(ConditionBundle bundle);

/// Copy carrying the null (empty) prompt and identical condition tensors.
ConditionBundle null_text(ConditionBundle bundle);

/// Block-average downsampling by `factor` followed by nearest upsampling back to H x W.
VideoTensor degrade_resolution(const VideoTensor& clip, int factor);

}  // namespace mfm
