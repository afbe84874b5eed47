#include <cstdio>
#include <functional>
#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "mfm/error.hpp"

namespace mfm::cli {
namespace {

constexpr int kExitIo = 1;
constexpr int kExitValidation = 2;
constexpr int kExitNumeric = 3;

template <class T>
void optional_option(CLI::App* app, const std::string& name, std::optional<T>& target, const std::string& help) {
  app->add_option_function<T>(name, [&target](const T& v) { target = v; }, help);
}

}  // namespace

int run(const Argv& argv) {
  CLI::App app{"Unified conditional video generation toolkit"};
  app.name("mfm");
  app.require_subcommand(1);
  std::function<int()> action;

  SynthClipsArgs synth;
  auto* sc = app.add_subcommand("synth-clips", "Render a procedural clip collection with captions");
  optional_option(sc, "--spec", synth.spec, "Corpus spec file (overrides the inline flags)");
  sc->add_option("--videos", synth.videos, "Number of videos")->capture_default_str();
  sc->add_option("--images", synth.images, "Number of single-frame images")->capture_default_str();
  sc->add_option("--frames", synth.frames, "Frames per video")->capture_default_str();
  sc->add_option("--height", synth.height)->capture_default_str();
  sc->add_option("--width", synth.width)->capture_default_str();
  sc->add_option("--archetypes", synth.archetypes, "Comma list of static,translating,oscillating,gradient")
      ->capture_default_str();
  optional_option(sc, "--seed", synth.seed, "Seed (default: $MFM_SEED or 0)");
  sc->add_option("--out", synth.out, "Output directory")->required();
  sc->callback([&] { action = [&] { return cmd_synth_clips(synth, argv); }; });

  BuildConditionsArgs bc;
  auto* b = app.add_subcommand("build-conditions", "Build a task condition bundle from a clip fixture");
  b->add_option("--input", bc.input, "Clip tensor fixture")->required();
  b->add_option("--task", bc.task, "Task short name or canonical label")->required();
  b->add_option("--prompt", bc.prompt, "Caption");
  optional_option(b, "--seed", bc.seed, "Seed (default: $MFM_SEED or 0)");
  b->add_option("--out", bc.out, "Bundle output path")->required();
  optional_option(b, "--k", bc.extension_frames, "Video-extension conditioned frames");
  optional_option(b, "--k1", bc.first_clip_frames, "First-clip length");
  optional_option(b, "--k2", bc.last_clip_frames, "Last-clip length");
  optional_option(b, "--sr-factor", bc.sr_factor, "Super-resolution downsampling factor");
  optional_option(b, "--style", bc.style, "Editing instruction");
  b->callback([&] { action = [&] { return cmd_build_conditions(bc, argv); }; });

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train on a synthetic corpus following a recipe");
  t->add_option("--recipe", tr.recipe, "Recipe file")->required();
  t->add_option("--corpus", tr.corpus, "Corpus spec file")->required();
  t->add_option("--preset", tr.preset, "toy, 2B or 8B")->capture_default_str();
  optional_option(t, "--config", tr.config, "Model config file (overrides --preset)");
  optional_option(t, "--seed", tr.seed, "Seed (default: $MFM_SEED or 0)");
  optional_option(t, "--iterations", tr.iterations, "Override every stage's iteration count");
  t->add_option("--out", tr.out, "Output directory")->required();
  t->callback([&] { action = [&] { return cmd_train(tr, argv); }; });

  SampleArgs sa;
  auto* s = app.add_subcommand("sample", "Sample a clip for a bundle with the Euler guidance sampler");
  s->add_option("--checkpoint", sa.checkpoint)->required();
  optional_option(s, "--config", sa.config, "Model config (default: config.txt beside the checkpoint)");
  s->add_option("--bundle", sa.bundle)->required();
  s->add_option("--steps", sa.steps)->capture_default_str();
  s->add_option("--cfg-scale", sa.cfg_scale)->capture_default_str();
  s->add_flag("--unguided", sa.unguided, "Integrate the conditional velocity only");
  optional_option(s, "--seed", sa.seed, "Seed (default: $MFM_SEED or 0)");
  s->add_option("--out", sa.out, "Decoded clip output")->required();
  optional_option(s, "--latent-out", sa.latent_out, "Also write the sampled latent");
  s->callback([&] { action = [&] { return cmd_sample(sa, argv); }; });

  BenchBuildArgs bb;
  auto* bbc = app.add_subcommand("bench-build", "Filter clips and emit the per-task benchmark");
  bbc->add_option("--clips", bb.clips, "Directory with captions.tsv and clip tensors")->required();
  bbc->add_option("--out", bb.out, "Benchmark directory")->required();
  optional_option(bbc, "--seed", bb.seed, "Seed (default: $MFM_SEED or 0)");
  bbc->add_option("--per-task", bb.per_task)->capture_default_str();
  bbc->add_option("--frames", bb.frames)->capture_default_str();
  bbc->add_option("--segments", bb.segments)->capture_default_str();
  bbc->add_option("--blur-threshold", bb.blur_threshold)->capture_default_str();
  bbc->add_option("--motion-threshold", bb.motion_threshold)->capture_default_str();
  bbc->callback([&] { action = [&] { return cmd_bench_build(bb, argv); }; });

  BenchEvalArgs be;
  auto* bec = app.add_subcommand("bench-eval", "Score outputs against benchmark ground truths");
  bec->add_option("--bench", be.bench)->required();
  bec->add_option("--outputs", be.outputs, "Directory of <task>/NNNN.tensor outputs")->required();
  bec->add_option("--out", be.out, "Report path")->required();
  bec->callback([&] { action = [&] { return cmd_bench_eval(be, argv); }; });

  fs::path inspect_path;
  auto* in = app.add_subcommand("inspect", "Print a fixture's header and value statistics");
  in->add_option("path", inspect_path)->required();
  in->callback([&] { action = [&] { return cmd_inspect(inspect_path); }; });

  fs::path replay_path;
  auto* rp = app.add_subcommand("replay", "Re-run a command from its run manifest and compare artifact hashes");
  rp->add_option("manifest", replay_path)->required();
  rp->callback([&] { action = [&] { return cmd_replay(replay_path); }; });

  try {
    std::vector<std::string> args(argv.rbegin(), argv.rend());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    return action();
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric abort: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  }
}

}  // namespace mfm::cli

int main(int argc, char** argv) {
  return mfm::cli::run(mfm::cli::Argv(argv + 1, argv + argc));
}
