#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mfm/conditioning.hpp"
#include "mfm/model.hpp"
#include "mfm/rng.hpp"
#include "mfm/video.hpp"

namespace mfm {

// ---------------------------------------------------------------------------
// Recipe

/// One row of a resolution-progressive training schedule.
struct RecipeStage {
  std::string name;
  std::string dataset;  // descriptive only
  int frames = 1;
  int height = 8;
  int width = 8;
  double image_video_ratio = 0.1;  // probability that a sample is an image
  int batch_size = 1;
  double learning_rate = 1e-4;
  int iterations = 1;
  int sequence_parallel = 1;  // accepted, ignored

  long long volume() const { return static_cast<long long>(frames) * height * width; }
  bool operator==(const RecipeStage&) const = default;
};

void validate_stage(const RecipeStage& stage);
/// Every stage valid and T*H*W non-decreasing from stage to stage.
void validate_recipe(const std::vector<RecipeStage>& recipe);

/// Splits `key=value key2="quoted value"` into ordered pairs. Throws ValidationError.
std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view line);

/// One stage per non-blank line, '#' starts a comment. Fields:
///   name, dataset, resolution=TxHxW, sp, bs, lr, iters, image_ratio
/// Parse errors carry the 1-based line number.
std::vector<RecipeStage> parse_recipe(std::string_view text);
std::string recipe_to_text(const std::vector<RecipeStage>& recipe);
std::vector<RecipeStage> load_recipe(const std::filesystem::path& path);

/// The four-stage 8B schedule (128px, 360px, 720px, multi-res) as configuration.
std::vector<RecipeStage> reference_recipe();

/// Image ratios falling linearly from `first` to `last` over `stages` stages.
std::vector<double> linear_ratio_schedule(int stages, double first, double last);

// ---------------------------------------------------------------------------
// Synthetic corpus

enum class Archetype { Static, Translating, Oscillating, Gradient };

inline constexpr std::array<Archetype, 4> kAllArchetypes = {Archetype::Static, Archetype::Translating,
                                                            Archetype::Oscillating, Archetype::Gradient};

std::string_view archetype_name(Archetype a);
Archetype parse_archetype(std::string_view name);

struct CorpusSpec {
  int videos = 8;
  int images = 0;
  int frames = 17;
  int height = 32;
  int width = 32;
  std::vector<Archetype> archetypes{kAllArchetypes.begin(), kAllArchetypes.end()};
  bool operator==(const CorpusSpec&) const = default;
};

void validate_corpus_spec(const CorpusSpec& spec);
/// `key=value` fields on any number of lines: videos, images, frames, height, width,
/// archetypes (comma list). Parse errors carry the line number.
CorpusSpec parse_corpus_spec(std::string_view text);
std::string corpus_spec_to_text(const CorpusSpec& spec);
CorpusSpec load_corpus_spec(const std::filesystem::path& path);

struct CorpusItem {
  VideoTensor clip;
  std::string caption;
  Archetype archetype = Archetype::Static;
};
using Corpus = std::vector<CorpusItem>;

/// Procedural clips (videos first, then T = 1 images), archetypes assigned round-robin.
Corpus make_synthetic_corpus(const CorpusSpec& spec, Rng& rng);

/// Renders one clip of the given archetype with colours/direction drawn from `rng`.
CorpusItem render_archetype(Archetype archetype, int frames, int height, int width, Rng& rng);

/// Temporal crop (at `start`) or cyclic repeat to `frames`, then nearest spatial resize.
VideoTensor fit_clip(const VideoTensor& clip, int frames, int height, int width, int start = 0);

// ---------------------------------------------------------------------------
// Task sampling and dropout

/// Selection weights; T2V, T2I and I2V carry three times the common weight.
struct TaskWeights {
  std::array<double, kTaskCount> weight{};

  static TaskWeights standard(double base = 1.0);
  double operator[](TaskTag task) const { return weight[task_index(task)]; }
};

void validate_weights(const TaskWeights& weights);

/// Exact categorical probabilities over `qualified` (in the order given).
std::vector<double> task_probabilities(const std::vector<TaskTag>& qualified, const TaskWeights& weights);

TaskTag sample_task(const std::vector<TaskTag>& qualified, const TaskWeights& weights, Rng& rng);

struct DropoutPolicy {
  double null_text_rate_video = 0.10;
  double null_text_rate_image = 0.30;
  double zero_condition_rate = 0.10;
};

void validate_policy(const DropoutPolicy& policy);

struct DropoutEvent {
  bool null_text = false;
  bool zero_condition = false;
};

/// Consumes exactly one uniform draw. T2V/T2I may lose their prompt (suffix included);
/// every other task may have its pixel/depth/mask tensors zeroed.
ConditionBundle apply_dropout(ConditionBundle bundle, const DropoutPolicy& policy, Rng& rng,
                              DropoutEvent* event = nullptr);

// ---------------------------------------------------------------------------
// Training loop

struct StepRecord {
  int step = 0;  // global, 0-based
  std::string stage;
  int slot = 0;  // index within the batch
  TaskTag task = TaskTag::T2V;
  double loss = 0.0;
  double lr = 0.0;
  double time = 0.0;
  bool null_text = false;
  bool zero_condition = false;
  bool image = false;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainOptions {
  TaskWeights weights = TaskWeights::standard();
  DropoutPolicy policy;
  AdamConfig adam;
  int warmup_steps = 100;
  int invariant_check_every = 100;  // bundle invariants spot-checked on this fraction of steps
  std::function<void(const StepRecord&)> on_record;
};

struct TrainResult {
  std::vector<StepRecord> records;
  std::vector<double> step_loss;  // batch mean per step
};

/// Multi-task joint training. Throws NumericError (naming step and task) on a
/// non-finite loss.
TrainResult train(MfmModel& model, const std::vector<RecipeStage>& recipe, const Corpus& corpus,
                  const TrainOptions& options, Rng& rng);

/// Warm-up scaled learning rate for a 0-based step within a stage.
double warmup_lr(double base_lr, int step_in_stage, int warmup_steps);

std::string metrics_header();
std::string metrics_line(const StepRecord& record);

/// Mean of step_loss over [begin, end).
double window_mean(const std::vector<double>& values, std::size_t begin, std::size_t end);

}  // namespace mfm
