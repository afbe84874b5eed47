#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mfm/conditioning.hpp"
#include "mfm/rng.hpp"
#include "mfm/video.hpp"

namespace mfm {

struct BenchConfig {
  int target_frames = 97;
  int segments = 16;
  double blur_threshold = 200.0;   // Laplacian variance, 0-255 luminance
  double motion_threshold = 0.02;  // mean |dY| on [-1, 1] luminance
  int per_task_count = 30;
  int clip_condition_frames = 8;  // VEXT and FLC2V clip length
  std::vector<TaskTag> tasks{kAllTasks.begin(), kAllTasks.end()};
};

void validate_bench_config(const BenchConfig& cfg);

/// Variance of the 4-neighbour Laplacian of the 0-255 luminance of frame `t`
/// (mirror border without edge repetition).
double blur_score(const VideoTensor& clip, int t = 0);

/// Indices of clips passing both filters; survivors are truncated to target_frames.
std::vector<std::size_t> filter_indices(const std::vector<VideoTensor>& clips, const BenchConfig& cfg);
std::vector<VideoTensor> filter_videos(const std::vector<VideoTensor>& clips, const BenchConfig& cfg);

struct BenchSample {
  std::string id;  // "<task-canonical>/NNNN"
  TaskTag task = TaskTag::T2V;
  int index = 0;
  int segment = 0;
  std::size_t clip = 0;
  std::uint64_t seed = 0;
  ConditionBundle bundle;
  VideoTensor ground_truth;
};

/// Per-task condition sets over standardized clips. One 64-bit base seed is drawn
/// from `rng`; each sample builds from its own derived seed.
std::vector<BenchSample> build_benchmark(const std::vector<VideoTensor>& clips,
                                         const std::vector<std::string>& captions, const BenchConfig& cfg,
                                         Rng& rng);

/// Bundle fixture: text header (task, prompt, motion score, detail) then pixel, depth
/// and mask tensor containers.
void save_bundle(const std::filesystem::path& path, const ConditionBundle& bundle);
ConditionBundle load_bundle(const std::filesystem::path& path);

struct ManifestRow {
  std::string id;
  TaskTag task = TaskTag::T2V;
  std::string prompt;
  std::uint64_t seed = 0;
  int segment = 0;
  std::size_t clip = 0;
};

/// Writes <dir>/<task>/NNNN.bundle, NNNN.gt.tensor and manifest.tsv per task plus a
/// top-level manifest.tsv; returns every written file.
std::vector<std::filesystem::path> write_benchmark(const std::filesystem::path& dir,
                                                   const std::vector<BenchSample>& samples);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& manifest_tsv);

// ---------------------------------------------------------------------------
// Metrics (inputs in [-1, 1], mapped to [0, 1])

/// 10 log10(1 / MSE); +infinity for identical inputs.
double psnr(const VideoTensor& x, const VideoTensor& y);
/// Mean local SSIM (11x11 Gaussian window, sigma 1.5, truncated and renormalized
/// at borders), averaged over channels and frames.
double ssim(const VideoTensor& x, const VideoTensor& y);

struct ReportRow {
  std::string id;
  TaskTag task = TaskTag::T2V;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct BenchReport {
  std::vector<ReportRow> rows;

  struct Summary {
    TaskTag task = TaskTag::T2V;
    int count = 0;
    double mean_psnr = 0.0;  // over finite values; +inf when every row is exact
    double mean_ssim = 0.0;
  };
  std::vector<Summary> summaries() const;
  std::string to_tsv() const;
};

/// Compares <outputs>/<id>.tensor against each ground truth listed in the manifest.
/// Missing or unexpected outputs raise ValidationError.
BenchReport evaluate_benchmark(const std::filesystem::path& bench_dir, const std::filesystem::path& outputs_dir);

}  // namespace mfm
