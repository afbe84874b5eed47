#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mfm::cli {

namespace fs = std::filesystem;

struct SynthClipsArgs {
  std::optional<fs::path> spec;
  int videos = 30;
  int images = 0;
  int frames = 97;
  int height = 32;
  int width = 32;
  std::string archetypes = "translating";
  std::optional<std::uint64_t> seed;
  fs::path out;
};

struct BuildConditionsArgs {
  fs::path input;
  std::string task;
  std::string prompt;
  std::optional<std::uint64_t> seed;
  fs::path out;
  std::optional<int> extension_frames;
  std::optional<int> first_clip_frames;
  std::optional<int> last_clip_frames;
  std::optional<int> sr_factor;
  std::optional<std::string> style;
};

struct TrainArgs {
  fs::path recipe;
  fs::path corpus;
  std::string preset = "toy";
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<int> iterations;
  fs::path out;
};

struct SampleArgs {
  fs::path checkpoint;
  std::optional<fs::path> config;
  fs::path bundle;
  int steps = 50;
  double cfg_scale = 9.0;
  bool unguided = false;
  std::optional<std::uint64_t> seed;
  fs::path out;
  std::optional<fs::path> latent_out;
};

struct BenchBuildArgs {
  fs::path clips;
  fs::path out;
  std::optional<std::uint64_t> seed;
  int per_task = 30;
  int frames = 97;
  int segments = 16;
  double blur_threshold = 200.0;
  double motion_threshold = 0.02;
};

struct BenchEvalArgs {
  fs::path bench;
  fs::path outputs;
  fs::path out;
};

using Argv = std::vector<std::string>;

int cmd_synth_clips(const SynthClipsArgs& a, const Argv& argv);
int cmd_build_conditions(const BuildConditionsArgs& a, const Argv& argv);
int cmd_train(const TrainArgs& a, const Argv& argv);
int cmd_sample(const SampleArgs& a, const Argv& argv);
int cmd_bench_build(const BenchBuildArgs& a, const Argv& argv);
int cmd_bench_eval(const BenchEvalArgs& a, const Argv& argv);
int cmd_inspect(const fs::path& path);

/// Entry point shared by main() and replay: argv excludes the program name.
int run(const Argv& argv);
int cmd_replay(const fs::path& manifest);

}  // namespace mfm::cli
