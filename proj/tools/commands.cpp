#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mfm/bench.hpp"
#include "mfm/error.hpp"
#include "mfm/hash.hpp"
#include "mfm/model.hpp"
#include "mfm/model_config.hpp"
#include "mfm/sampler.hpp"
#include "mfm/tensor_io.hpp"
#include "mfm/trainer.hpp"
#include "run_manifest.hpp"

namespace mfm::cli {
namespace {

using nlohmann::json;

std::string grouped(std::size_t n) {
  std::string s = std::to_string(n);
  for (int i = static_cast<int>(s.size()) - 3; i > 0; i -= 3) s.insert(static_cast<std::size_t>(i), ",");
  return s;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

fs::path sibling_manifest(const fs::path& out) { return fs::path(out.string() + ".run.json"); }

template <class T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

json path_json(const std::optional<fs::path>& p) { return p ? json(p->string()) : json(nullptr); }

TaskTag require_task(const std::string& name) {
  const auto t = parse_task(name);
  if (!t) throw ValidationError("unknown task '" + name + "'");
  return *t;
}

void replay_argv(RunManifest& m, const Argv& argv, const SeedChoice& seed) {
  Argv r = argv;
  if (seed.source != "flag") {
    r.push_back("--seed");
    r.push_back(std::to_string(seed.value));
  }
  m.extra("replay_argv", r);
}

void print_stats(std::span<const double> v) {
  if (v.empty()) {
    std::printf("  (empty)\n");
    return;
  }
  double lo = v[0], hi = v[0], sum = 0.0, sq = 0.0;
  for (double x : v) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
    sum += x;
    sq += x * x;
  }
  const double mean = sum / v.size();
  std::printf("  min %.6g  max %.6g  mean %.6g  std %.6g\n", lo, hi, mean,
              std::sqrt(std::max(0.0, sq / v.size() - mean * mean)));
}

}  // namespace

int cmd_synth_clips(const SynthClipsArgs& a, const Argv& argv) {
  const SeedChoice seed = resolve_seed(a.seed);
  RunManifest m("synth-clips", argv);
  m.seed(seed);
  CorpusSpec spec;
  if (a.spec) {
    spec = load_corpus_spec(*a.spec);
    m.input("corpus_spec", *a.spec);
  } else {
    spec = parse_corpus_spec("videos=" + std::to_string(a.videos) + " images=" + std::to_string(a.images) +
                             " frames=" + std::to_string(a.frames) + " height=" + std::to_string(a.height) +
                             " width=" + std::to_string(a.width) + " archetypes=" + a.archetypes);
  }
  m.flag("spec", path_json(a.spec));
  m.flag("corpus", corpus_spec_to_text(spec));
  m.flag("out", a.out.string());

  Rng rng(derive_seed(seed.value, "corpus"));
  const Corpus corpus = make_synthetic_corpus(spec, rng);
  fs::create_directories(a.out);
  std::ostringstream captions;
  captions << "file\tcaption\tarchetype\n";
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "clip_%04zu.tensor", i);
    io::save_video(a.out / name, corpus[i].clip);
    m.artifact(a.out / name);
    captions << name << '\t' << corpus[i].caption << '\t' << archetype_name(corpus[i].archetype) << '\n';
  }
  write_text(a.out / "captions.tsv", captions.str());
  m.artifact(a.out / "captions.tsv");
  replay_argv(m, argv, seed);
  m.write(a.out / "run.json");
  std::printf("wrote %zu clips to %s\n", corpus.size(), a.out.string().c_str());
  return 0;
}

int cmd_build_conditions(const BuildConditionsArgs& a, const Argv& argv) {
  const SeedChoice seed = resolve_seed(a.seed);
  const TaskTag task = require_task(a.task);
  RunManifest m("build-conditions", argv);
  m.seed(seed);
  m.flag("input", a.input.string());
  m.flag("task", std::string(task_canonical(task)));
  m.flag("prompt", a.prompt);
  m.flag("out", a.out.string());
  m.flag("k", opt(a.extension_frames));
  m.flag("k1", opt(a.first_clip_frames));
  m.flag("k2", opt(a.last_clip_frames));
  m.flag("sr_factor", opt(a.sr_factor));
  m.flag("style", opt(a.style));
  m.input("clip", a.input);

  const VideoTensor clip = io::load_video(a.input);
  BuildOptions options;
  options.extension_frames = a.extension_frames;
  options.first_clip_frames = a.first_clip_frames;
  options.last_clip_frames = a.last_clip_frames;
  options.sr_factor = a.sr_factor;
  options.style_prompt = a.style;
  Rng rng(derive_seed(seed.value, "build-conditions"));
  const ConditionBundle bundle = build_condition(clip, task, a.prompt, rng, options);

  ensure_parent(a.out);
  save_bundle(a.out, bundle);
  m.artifact(a.out);
  m.extra("detail", bundle.detail);
  replay_argv(m, argv, seed);
  m.write(sibling_manifest(a.out));
  std::printf("%s %s -> %s\n", std::string(task_short_name(task)).c_str(), bundle.detail.c_str(),
              a.out.string().c_str());
  return 0;
}

int cmd_train(const TrainArgs& a, const Argv& argv) {
  const SeedChoice seed = resolve_seed(a.seed);
  std::vector<RecipeStage> recipe = load_recipe(a.recipe);
  const CorpusSpec spec = load_corpus_spec(a.corpus);
  const ModelConfig config = a.config ? load_config(*a.config) : model_preset(a.preset);
  if (config.name == "2B" || config.name == "8B") {
    const std::size_t n = backbone_parameter_count(config) + adapter_parameter_count(config);
    throw ValidationError("preset " + config.name + " has " + grouped(n) +
                          " parameters; training it is refused on a desk-scale CPU. Its configuration is valid; "
                          "use --preset toy to train.");
  }
  if (a.iterations) {
    if (*a.iterations < 0) throw ValidationError("--iterations must be >= 0");
    for (RecipeStage& s : recipe) s.iterations = *a.iterations;
  }

  RunManifest m("train", argv);
  m.seed(seed);
  m.flag("recipe", a.recipe.string());
  m.flag("corpus", a.corpus.string());
  m.flag("preset", a.preset);
  m.flag("config", path_json(a.config));
  m.flag("iterations", opt(a.iterations));
  m.flag("out", a.out.string());
  m.input("recipe", a.recipe);
  m.input("corpus_spec", a.corpus);
  if (a.config) m.input("model_config", *a.config);

  fs::create_directories(a.out);
  Rng corpus_rng(derive_seed(seed.value, "corpus"));
  const Corpus corpus = make_synthetic_corpus(spec, corpus_rng);
  MfmModel model(config, derive_seed(seed.value, "model"));

  save_config(a.out / "config.txt", config);
  model.save(a.out / "init.mfmc");
  m.extra("init_checkpoint_hash", hash_file(a.out / "init.mfmc"));

  std::ofstream metrics(a.out / "metrics.tsv", std::ios::binary);
  if (!metrics) throw IoError("cannot write metrics log");
  metrics << metrics_header() << '\n';
  TrainOptions options;
  options.on_record = [&metrics](const StepRecord& r) { metrics << metrics_line(r) << '\n'; };

  Rng train_rng(derive_seed(seed.value, "train"));
  TrainResult result;
  try {
    result = train(model, recipe, corpus, options, train_rng);
  } catch (const NumericError& e) {
    metrics.flush();
    m.extra("aborted", e.what());
    replay_argv(m, argv, seed);
    m.write(a.out / "run.json");
    throw;
  }
  metrics.close();
  model.save(a.out / "checkpoint.mfmc");

  m.artifact(a.out / "config.txt");
  m.artifact(a.out / "init.mfmc");
  m.artifact(a.out / "checkpoint.mfmc");
  m.artifact(a.out / "metrics.tsv");
  const std::size_t n = result.step_loss.size();
  m.extra("steps", n);
  if (n > 0) {
    const std::size_t w = std::min<std::size_t>(100, n);
    const double first = window_mean(result.step_loss, 0, w);
    const double last = window_mean(result.step_loss, n - w, n);
    m.extra("loss_window", w);
    m.extra("loss_first_window", first);
    m.extra("loss_last_window", last);
    m.extra("loss_ratio", last / first);
    std::printf("steps %zu  loss first-%zu %.5f  last-%zu %.5f  ratio %.4f\n", n, w, first, w, last, last / first);
  } else {
    std::printf("no training steps; checkpoint equals initialization\n");
  }
  replay_argv(m, argv, seed);
  m.write(a.out / "run.json");
  return 0;
}

int cmd_sample(const SampleArgs& a, const Argv& argv) {
  const SeedChoice seed = resolve_seed(a.seed);
  const fs::path config_path = a.config ? *a.config : a.checkpoint.parent_path() / "config.txt";
  RunManifest m("sample", argv);
  m.seed(seed);
  m.flag("checkpoint", a.checkpoint.string());
  m.flag("config", config_path.string());
  m.flag("bundle", a.bundle.string());
  m.flag("steps", a.steps);
  m.flag("cfg_scale", a.cfg_scale);
  m.flag("unguided", a.unguided);
  m.flag("out", a.out.string());
  m.flag("latent_out", path_json(a.latent_out));
  m.input("checkpoint", a.checkpoint);
  m.input("model_config", config_path);
  m.input("bundle", a.bundle);

  const ModelConfig config = load_config(config_path);
  MfmModel model(config, 0);
  model.load(a.checkpoint);
  const ConditionBundle bundle = load_bundle(a.bundle);
  SamplerConfig sampler{a.steps, a.cfg_scale};
  Rng rng(derive_seed(seed.value, "sample"));
  const SampleResult result = sample_clip(model, bundle, sampler, rng, a.unguided);

  ensure_parent(a.out);
  io::save_video(a.out, result.video);
  m.artifact(a.out);
  if (a.latent_out) {
    ensure_parent(*a.latent_out);
    io::save_latent(*a.latent_out, result.latent);
    m.artifact(*a.latent_out);
  }
  replay_argv(m, argv, seed);
  m.write(sibling_manifest(a.out));
  std::printf("sampled %s (%d steps, cfg %g%s) -> %s\n", std::string(task_short_name(bundle.task)).c_str(),
              a.steps, a.cfg_scale, a.unguided ? ", unguided" : "", a.out.string().c_str());
  return 0;
}

int cmd_bench_build(const BenchBuildArgs& a, const Argv& argv) {
  const SeedChoice seed = resolve_seed(a.seed);
  RunManifest m("bench-build", argv);
  m.seed(seed);
  m.flag("clips", a.clips.string());
  m.flag("out", a.out.string());
  m.flag("per_task", a.per_task);
  m.flag("frames", a.frames);
  m.flag("segments", a.segments);
  m.flag("blur_threshold", a.blur_threshold);
  m.flag("motion_threshold", a.motion_threshold);

  BenchConfig cfg;
  cfg.per_task_count = a.per_task;
  cfg.target_frames = a.frames;
  cfg.segments = a.segments;
  cfg.blur_threshold = a.blur_threshold;
  cfg.motion_threshold = a.motion_threshold;
  validate_bench_config(cfg);

  // captions.tsv lists the clip files in order: file, caption[, ...].
  const fs::path listing = a.clips / "captions.tsv";
  m.input("captions", listing);
  std::istringstream in(read_text(listing));
  std::string line;
  std::getline(in, line);
  std::vector<std::string> files, captions;
  std::vector<VideoTensor> clips;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) throw ValidationError("captions.tsv rows need file<TAB>caption");
    const std::size_t tab2 = line.find('\t', tab + 1);
    files.push_back(line.substr(0, tab));
    captions.push_back(line.substr(tab + 1, tab2 == std::string::npos ? std::string::npos : tab2 - tab - 1));
    clips.push_back(io::load_video(a.clips / files.back()));
    m.input("clip", a.clips / files.back());
  }

  const std::vector<std::size_t> kept = filter_indices(clips, cfg);
  std::vector<VideoTensor> survivors;
  std::vector<std::string> kept_captions;
  json kept_files = json::array();
  for (std::size_t i : kept) {
    survivors.push_back(clips[i]);
    kept_captions.push_back(captions[i]);
    kept_files.push_back(files[i]);
  }
  m.extra("clips_total", clips.size());
  m.extra("clips_kept", kept_files);
  std::printf("%zu of %zu clips pass the blur/motion filters\n", survivors.size(), clips.size());

  Rng rng(derive_seed(seed.value, "bench"));
  const std::vector<BenchSample> samples = build_benchmark(survivors, kept_captions, cfg, rng);
  for (const fs::path& p : write_benchmark(a.out, samples)) m.artifact(p);
  m.extra("samples", samples.size());
  replay_argv(m, argv, seed);
  m.write(a.out / "run.json");
  std::printf("wrote %zu samples to %s\n", samples.size(), a.out.string().c_str());
  return 0;
}

int cmd_bench_eval(const BenchEvalArgs& a, const Argv& argv) {
  RunManifest m("bench-eval", argv);
  m.flag("bench", a.bench.string());
  m.flag("outputs", a.outputs.string());
  m.flag("out", a.out.string());
  m.input("bench_manifest", a.bench / "manifest.tsv");
  const BenchReport report = evaluate_benchmark(a.bench, a.outputs);
  ensure_parent(a.out);
  write_text(a.out, report.to_tsv());
  m.artifact(a.out);
  m.extra("replay_argv", argv);
  m.write(sibling_manifest(a.out));
  for (const auto& s : report.summaries()) {
    std::printf("%-28s n=%-3d psnr %8.3f  ssim %.4f\n", std::string(task_canonical(s.task)).c_str(), s.count,
                s.mean_psnr, s.mean_ssim);
  }
  return 0;
}

int cmd_inspect(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  const std::string tag(magic, 4);
  in.close();
  std::printf("%s\n", path.string().c_str());
  std::printf("  hash %s\n", hash_file(path).c_str());
  if (tag == "MFMT") {
    const io::RawTensor t = [&] {
      std::ifstream f(path, std::ios::binary);
      return io::read_tensor(f);
    }();
    std::printf("  tensor T=%u H=%u W=%u C=%u (%zu values, float32)\n", t.dims[0], t.dims[1], t.dims[2], t.dims[3],
                t.count());
    print_stats(t.values);
  } else if (tag == "MFMB") {
    const ConditionBundle b = load_bundle(path);
    std::printf("  bundle task=%s\n  prompt=\"%s\"\n  motion_score=%.6g\n  detail=%s\n",
                std::string(task_canonical(b.task)).c_str(), b.prompt.c_str(), b.motion_score, b.detail.c_str());
    std::printf("  shape T=%d H=%d W=%d\n", b.frames(), b.height(), b.width());
    double covered = 0.0;
    for (double v : b.mask.data) covered += v;
    std::printf("  mask coverage %.4f\n", b.mask.size() ? covered / b.mask.size() : 0.0);
    std::printf("  pixel:");
    print_stats(b.pixel.data);
    std::printf("  depth:");
    print_stats(b.depth.data);
  } else if (tag == "MFMC") {
    const io::NamedTensors named = io::load_named(path);
    std::size_t total = 0;
    for (const auto& [name, t] : named) {
      total += t.count();
      std::printf("  %-32s [%u,%u,%u,%u]", name.c_str(), t.dims[0], t.dims[1], t.dims[2], t.dims[3]);
      print_stats(t.values);
    }
    std::printf("  %zu tensors, %s parameters\n", named.size(), grouped(total).c_str());
  } else {
    throw ValidationError(path.string() + " is not a tensor, bundle or checkpoint fixture");
  }
  return 0;
}

int cmd_replay(const fs::path& manifest) {
  const json before = json::parse(read_text(manifest));
  if (!before.contains("replay_argv")) throw ValidationError(manifest.string() + " has no replay_argv");
  const Argv argv = before.at("replay_argv").get<Argv>();
  const int code = run(argv);
  if (code != 0) return code;
  int mismatches = 0;
  for (const json& art : before.at("artifacts")) {
    const fs::path p = art.at("path").get<std::string>();
    const std::string now = fs::exists(p) ? hash_file(p) : "missing";
    const bool same = now == art.at("hash").get<std::string>();
    if (!same) {
      ++mismatches;
      std::printf("MISMATCH %s (%s -> %s)\n", p.string().c_str(), art.at("hash").get<std::string>().c_str(),
                  now.c_str());
    }
  }
  std::printf("replay: %zu artifacts, %d mismatched\n", before.at("artifacts").size(), mismatches);
  return mismatches == 0 ? 0 : 1;
}

}  // namespace mfm::cli
