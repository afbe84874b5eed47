// Acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero
// when any criterion fails. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "mfm/bench.hpp"
#include "mfm/conditioning.hpp"
#include "mfm/error.hpp"
#include "mfm/flow.hpp"
#include "mfm/hash.hpp"
#include "mfm/latents.hpp"
#include "mfm/model.hpp"
#include "mfm/rope.hpp"
#include "mfm/sampler.hpp"
#include "mfm/tensor_io.hpp"
#include "mfm/trainer.hpp"

using namespace mfm;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mfm_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

LatentGrid random_latent(int t, int h, int w, int c, Rng& rng) { return sample_noise(t, h, w, c, rng); }

VideoTensor random_clip(int t, int h, int w, Rng& rng) {
  VideoTensor v(t, h, w, 3);
  for (double& x : v.data) x = uniform01(rng) * 2.0 - 1.0;
  return v;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

// ---------------------------------------------------------------------------

Outcome flow_identities() {
  Rng rng(101);
  long endpoint_mismatch = 0, identity_mismatch = 0, checked = 0;
  double raw_residual = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int t = uniform_int(rng, 1, 4), h = uniform_int(rng, 1, 4), w = uniform_int(rng, 1, 4);
    LatentGrid x0 = random_latent(t, h, w, 16, rng);
    LatentGrid eps = random_latent(t, h, w, 16, rng);
    // Raw 64-bit draws: the subtraction rounds, so measure the residual in ulps.
    const FlowSample raw = make_flow_sample(x0, eps, 0.5);
    for (std::size_t k = 0; k < x0.size(); ++k) {
      const double scale = std::max(std::abs(x0.data[k]), std::abs(eps.data[k]));
      const double ulp = std::nextafter(scale, INFINITY) - scale;
      raw_residual = std::max(raw_residual, std::abs(raw.v_target.data[k] + x0.data[k] - eps.data[k]) / ulp);
    }
    // Latents at container precision (float32 values held in doubles).
    io::round_to_f32(x0.data);
    io::round_to_f32(eps.data);
    const FlowSample s0 = make_flow_sample(x0, eps, 0.0);
    const FlowSample s1 = make_flow_sample(x0, eps, 1.0);
    for (std::size_t k = 0; k < x0.size(); ++k) {
      endpoint_mismatch += !same_bits(s0.xt.data[k], x0.data[k]);
      endpoint_mismatch += !same_bits(s1.xt.data[k], eps.data[k]);
      identity_mismatch += !same_bits(s0.v_target.data[k] + x0.data[k], eps.data[k]);
      ++checked;
    }
  }
  const bool pass = endpoint_mismatch == 0 && identity_mismatch == 0 && raw_residual <= 1.0;
  return {pass, fmt("%ld values; endpoint mismatches %ld, v+x0!=eps %ld; raw-double residual %.2f ulp", checked,
                    endpoint_mismatch, identity_mismatch, raw_residual)};
}

// ---------------------------------------------------------------------------

Outcome gradient_check() {
  const ModelConfig config = model_preset("toy");
  MfmModel model(config, 201);
  model.randomize(202, 0.1);

  Rng rng(203);
  const VideoTensor clip = random_clip(5, 32, 32, rng);
  const ConditionBundle bundle = build_condition(clip, TaskTag::I2V, "a red square moving left", rng);
  const ConditionBundle null_bundle = null_text(bundle);
  const LatentGrid x0 = random_latent(2, 4, 4, config.latent_channels, rng);
  const FlowSample sample = make_flow_sample(x0, rng);

  auto loss_for = [&](const ConditionBundle& b) {
    const auto prepared = model.prepare(b);
    const ad::Var v = model.velocity(latent_to_tokens(sample.xt), prepared, {sample.time, b.motion_score});
    return ad::mse(v, sample.v_target.data);
  };

  std::map<std::string, double> worst;
  std::map<std::string, int> counted;
  std::map<std::string, std::string> worst_name;
  for (const ConditionBundle* b : {&bundle, &null_bundle}) {
    const bool null_pass = b == &null_bundle;
    model.params().zero_grad();
    ad::backward(loss_for(*b));
    for (const auto& [name, var] : model.params().entries()) {
      const std::string group = MfmModel::parameter_group(name);
      if ((group == "text") != null_pass) continue;
      const auto grad = var.grad();
      // The entry with the largest analytic gradient keeps the comparison
      // well above finite-difference noise.
      const auto it = std::max_element(grad.begin(), grad.end(),
                                       [](double a, double c) { return std::abs(a) < std::abs(c); });
      const auto k = static_cast<std::size_t>(it - grad.begin());
      ad::Var p = var;
      auto values = p.mutable_value();
      const double saved = values[k];
      const double h = 1e-5;
      values[k] = saved + h;
      const double up = [&] { ad::NoGradGuard g; return loss_for(*b).item(); }();
      values[k] = saved - h;
      const double down = [&] { ad::NoGradGuard g; return loss_for(*b).item(); }();
      values[k] = saved;
      const double numeric = (up - down) / (2 * h);
      const double denom = std::max({std::abs(*it), std::abs(numeric), 1e-300});
      const double rel = std::abs(*it - numeric) / denom;
      // A tensor the loss is invariant to (the key bias under softmax) has a zero
      // gradient up to rounding; it agrees when the difference quotient vanishes too.
      if (std::abs(*it) < 1e-12) {
        worst[group] = std::max(worst[group], std::abs(numeric) < 1e-9 ? 0.0 : 1.0);
        continue;
      }
      if (rel >= worst[group]) worst_name[group] = name;
      worst[group] = std::max(worst[group], rel);
      ++counted[group];
    }
  }
  bool pass = !worst.empty() && worst.count("adapter");
  std::string detail;
  for (const auto& [group, err] : worst) {
    pass = pass && err < 1e-4 && counted[group] > 0;
    detail += fmt("%s %.1e (%d tensors) ", group.c_str(), err, counted[group]);
    if (err >= 1e-4) detail += "[worst " + worst_name[group] + "] ";
  }
  return {pass, detail};
}

// ---------------------------------------------------------------------------

Outcome rope_invariance() {
  const int d = 64;
  const bool split_ok = rope_axis_split(d) == std::array<int, 3>{16, 24, 24};
  Rng rng(301);
  auto vec = [&] {
    std::vector<double> v(d);
    for (double& x : v) x = standard_normal(rng);
    return v;
  };
  auto rot_dot = [&](std::vector<double> q, std::vector<double> k, GridPos a, GridPos b) {
    rope3d(q, a, d);
    rope3d(k, b, d);
    double s = 0.0;
    for (int i = 0; i < d; ++i) s += q[i] * k[i];
    return s;
  };
  std::array<double, 4> worst{};
  for (int mode = 0; mode < 4; ++mode) {  // t, h, w, joint
    for (int trial = 0; trial < 100; ++trial) {
      const auto q = vec(), k = vec();
      auto pos = [&] { return GridPos{uniform_int(rng, 0, 24), uniform_int(rng, 0, 24), uniform_int(rng, 0, 24)}; };
      const GridPos p = pos(), pp = pos();
      GridPos delta{};
      const int m = uniform_int(rng, -12, 12);
      if (mode == 0 || mode == 3) delta.t = mode == 3 ? uniform_int(rng, -12, 12) : m;
      if (mode == 1 || mode == 3) delta.h = mode == 3 ? uniform_int(rng, -12, 12) : m;
      if (mode == 2 || mode == 3) delta.w = mode == 3 ? uniform_int(rng, -12, 12) : m;
      const GridPos ps{p.t + delta.t, p.h + delta.h, p.w + delta.w};
      const GridPos pps{pp.t + delta.t, pp.h + delta.h, pp.w + delta.w};
      worst[mode] = std::max(worst[mode], std::abs(rot_dot(q, k, p, pp) - rot_dot(q, k, ps, pps)));
    }
  }
  const double max_err = *std::max_element(worst.begin(), worst.end());
  return {split_ok && max_err < 1e-10,
          fmt("split(64)=%s; max discrepancy t %.1e h %.1e w %.1e joint %.1e", split_ok ? "16/24/24" : "wrong",
              worst[0], worst[1], worst[2], worst[3])};
}

// ---------------------------------------------------------------------------

Outcome shape_law() {
  const ModelConfig config = model_preset("toy");
  const LatentCodec codec = codec_for(config);
  ParamStore store;
  Rng rng(401);
  AdapterParams ap;
  ap.widths = {config.adapter_width, config.adapter_width, config.adapter_width};
  ap.out_channels = config.latent_channels;
  const ConditionAdapter adapter(ap, store, rng);

  bool ok = true;
  std::string detail;
  {
    const VideoTensor big(49, 128, 224, 3, 0.1);
    const LatentGrid z = codec.encode(big);
    const VideoTensor cond(49, 128, 224, kConditionChannels, 0.1);
    ad::NoGradGuard guard;
    const ad::Var f = adapter.forward(cond);
    const bool big_ok = z.t == 13 && z.h == 16 && z.w == 28 && f.dim(0) == 13 && f.dim(1) == 16 && f.dim(2) == 28 &&
                        f.dim(3) == static_cast<std::size_t>(z.c);
    ok = ok && big_ok;
    detail += fmt("49x128x224 -> codec %dx%dx%d, adapter %zux%zux%zu; ", z.t, z.h, z.w, f.dim(0), f.dim(1), f.dim(2));
  }
  int cases = 0, wrong = 0;
  ad::NoGradGuard guard;
  for (int t = 1; t <= 21; ++t) {
    for (int h = 8; h <= 32; h += 8) {
      for (int w = 8; w <= 32; w += 8) {
        ++cases;
        if (!valid_frame_count(t)) {
          bool threw = false;
          try {
            codec.encode(VideoTensor(t, h, w, 3));
          } catch (const ShapeError&) {
            threw = true;
          }
          try {
            adapter.forward(VideoTensor(t, h, w, kConditionChannels));
            threw = false;
          } catch (const ShapeError&) {
          }
          wrong += !threw;
          continue;
        }
        const int lt = t % 4 == 0 ? t / 4 : (t - 1) / 4 + 1;
        const LatentGrid z = codec.encode(VideoTensor(t, h, w, 3));
        const ad::Var f = adapter.forward(VideoTensor(t, h, w, kConditionChannels));
        const bool good = z.t == lt && z.h == h / 8 && z.w == w / 8 && f.dim(0) == static_cast<std::size_t>(lt) &&
                          f.dim(1) == static_cast<std::size_t>(h / 8) && f.dim(2) == static_cast<std::size_t>(w / 8);
        wrong += !good;
      }
    }
  }
  ok = ok && wrong == 0;
  detail += fmt("small grid %d cases, %d wrong", cases, wrong);
  return {ok, detail};
}

// ---------------------------------------------------------------------------

// Overfit configuration.
constexpr int kOverfitVideos = 8;
constexpr int kOverfitSteps = 2000;
constexpr int kOverfitBatch = 8;
constexpr double kOverfitLr = 1e-3;
constexpr double kOverfitGuidance = 1.0;

Outcome overfit() {
  CorpusSpec spec;
  spec.videos = kOverfitVideos;
  spec.frames = 5;
  spec.height = 32;
  spec.width = 32;
  Rng corpus_rng(7);
  const Corpus corpus = make_synthetic_corpus(spec, corpus_rng);
  const ModelConfig config = model_preset("toy");
  MfmModel model(config, 11);
  RecipeStage stage;
  stage.name = "overfit";
  stage.frames = spec.frames;
  stage.height = spec.height;
  stage.width = spec.width;
  stage.image_video_ratio = 0.0;
  stage.batch_size = kOverfitBatch;
  stage.learning_rate = kOverfitLr;
  stage.iterations = kOverfitSteps;
  Rng train_rng(7001);
  const TrainResult result = train(model, {stage}, corpus, TrainOptions{}, train_rng);
  const std::size_t n = result.step_loss.size();
  const double first = window_mean(result.step_loss, 0, 100);
  const double last = window_mean(result.step_loss, n - 100, n);
  const double ratio = last / first;

  // I2V on the first training clip; the reference is the clip as the codec
  // represents it, which is what the model can memorize.
  const LatentCodec codec = codec_for(config);
  const CorpusItem& item = corpus[0];
  Rng bundle_rng(7002);
  const ConditionBundle bundle = build_condition(item.clip, TaskTag::I2V, item.caption, bundle_rng);
  const VideoTensor memorized = codec.decode(codec.encode(item.clip), item.clip.frames);
  Rng sample_rng(7003);
  const SampleResult s = sample_clip(model, bundle, {50, kOverfitGuidance}, sample_rng);
  const double db = psnr(s.video, memorized);

  std::string others;
  for (std::size_t k = 1; k < corpus.size(); ++k) {
    Rng br(7002 + k);
    const ConditionBundle b = build_condition(corpus[k].clip, TaskTag::I2V, corpus[k].caption, br);
    Rng sr(7003);
    const SampleResult o = sample_clip(model, b, {50, kOverfitGuidance}, sr);
    others += fmt("%.1f ", psnr(o.video, codec.decode(codec.encode(corpus[k].clip), corpus[k].clip.frames)));
  }
  return {ratio <= 0.10 && db >= 18.0,
          fmt("loss %.4f -> %.4f (ratio %.4f); I2V clip 0 PSNR %.2f dB [other clips: %s]", first, last, ratio, db,
              others.c_str())};
}

// ---------------------------------------------------------------------------

Outcome task_sampling() {
  Rng rng(601);
  const VideoTensor clip = random_clip(17, 8, 8, rng);
  const auto qualified = qualified_tasks(clip, true);
  const auto weights = TaskWeights::standard();
  const int n = 100000;
  int hits = 0;
  for (int i = 0; i < n; ++i) hits += sample_task(qualified, weights, rng) == TaskTag::T2V;
  const double p = 3.0 / 14.0, sigma = std::sqrt(p * (1 - p) / n);
  const double phat = hits / static_cast<double>(n);
  return {qualified.size() == 10 && std::abs(phat - p) <= 3 * sigma,
          fmt("%zu tasks qualified; P(T2V) %.5f vs %.5f (%.2f sigma)", qualified.size(), phat, p,
              (phat - p) / sigma)};
}

// ---------------------------------------------------------------------------

Outcome dropout_rates() {
  Rng rng(701);
  const VideoTensor video = random_clip(5, 8, 8, rng);
  const VideoTensor image = random_clip(1, 8, 8, rng);
  const ConditionBundle t2v = build_condition(video, TaskTag::T2V, "a clip", rng);
  const ConditionBundle t2i = build_condition(image, TaskTag::T2I, "an image", rng);
  const ConditionBundle i2v = build_condition(video, TaskTag::I2V, "a clip", rng);
  const DropoutPolicy policy;
  const int n = 100000;
  auto rate = [&](const ConditionBundle& b, bool text) {
    int hits = 0;
    DropoutEvent ev;
    for (int i = 0; i < n; ++i) {
      const ConditionBundle out = apply_dropout(b, policy, rng, &ev);
      const bool dropped = text ? out.prompt.empty() : std::all_of(out.mask.data.begin(), out.mask.data.end(),
                                                                   [](double m) { return m == 0.0; });
      if (dropped != (text ? ev.null_text : ev.zero_condition)) return -1.0;
      hits += dropped;
    }
    return hits / static_cast<double>(n);
  };
  auto z = [&](double phat, double p) { return (phat - p) / std::sqrt(p * (1 - p) / n); };
  const double video_text = rate(t2v, true), image_text = rate(t2i, true), zero = rate(i2v, false);
  const bool pass = std::abs(z(video_text, 0.10)) <= 3 && std::abs(z(image_text, 0.30)) <= 3 &&
                    std::abs(z(zero, 0.10)) <= 3;
  return {pass, fmt("null-text video %.4f (%.2f sigma), image %.4f (%.2f sigma); zeroing %.4f (%.2f sigma)",
                    video_text, z(video_text, 0.10), image_text, z(image_text, 0.30), zero, z(zero, 0.10))};
}

// ---------------------------------------------------------------------------

Outcome mask_coverage() {
  Rng rng(801);
  const std::array<int, 4> sizes{32, 48, 64, 128};
  double inp_lo = 1.0, inp_hi = 0.0, out_lo = 1.0, out_hi = 0.0;
  int inp_bad = 0, out_bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const int h = sizes[static_cast<std::size_t>(uniform_int(rng, 0, 3))];
    const int w = sizes[static_cast<std::size_t>(uniform_int(rng, 0, 3))];
    const VideoTensor clip(5, h, w, 3, 0.0);
    Rng seeded(derive_seed(801, "vinp", static_cast<std::uint64_t>(i)));
    const ConditionBundle b = build_condition(clip, TaskTag::VINP, "p", seeded);
    const auto f = b.mask.frame(0);
    const double frac = static_cast<double>(std::count(f.begin(), f.end(), 0.0)) / static_cast<double>(f.size());
    inp_lo = std::min(inp_lo, frac);
    inp_hi = std::max(inp_hi, frac);
    inp_bad += frac < 1.0 / 9.0 || frac > 0.25;
  }
  for (int i = 0; i < 1000; ++i) {
    const int h = sizes[static_cast<std::size_t>(uniform_int(rng, 0, 3))];
    const int w = sizes[static_cast<std::size_t>(uniform_int(rng, 0, 3))];
    const VideoTensor clip(5, h, w, 3, 0.0);
    Rng seeded(derive_seed(801, "voutp", static_cast<std::uint64_t>(i)));
    const ConditionBundle b = build_condition(clip, TaskTag::VOUTP, "p", seeded);
    auto row_empty = [&](int y) {
      for (int x = 0; x < w; ++x)
        if (b.mask.at(0, y, x, 0) != 0.0) return false;
      return true;
    };
    auto col_empty = [&](int x) {
      for (int y = 0; y < h; ++y)
        if (b.mask.at(0, y, x, 0) != 0.0) return false;
      return true;
    };
    int top = 0, bottom = 0, left = 0, right = 0;
    while (top < h && row_empty(top)) ++top;
    while (bottom < h && row_empty(h - 1 - bottom)) ++bottom;
    while (left < w && col_empty(left)) ++left;
    while (right < w && col_empty(w - 1 - right)) ++right;
    for (double frac : {top / static_cast<double>(h), bottom / static_cast<double>(h), left / static_cast<double>(w),
                        right / static_cast<double>(w)}) {
      out_lo = std::min(out_lo, frac);
      out_hi = std::max(out_hi, frac);
      out_bad += frac < 1.0 / 8.0 || frac > 0.25;
    }
  }
  return {inp_bad == 0 && out_bad == 0,
          fmt("VINP hole fraction in [%.4f, %.4f], %d outside; VOUTP side fraction in [%.4f, %.4f], %d outside",
              inp_lo, inp_hi, inp_bad, out_lo, out_hi, out_bad)};
}

// ---------------------------------------------------------------------------

VideoTensor gaussian_blur(const VideoTensor& v, double sigma) {
  const int r = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) sum += k[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& x : k) x /= sum;
  VideoTensor tmp = v, out = v;
  for (int t = 0; t < v.frames; ++t)
    for (int y = 0; y < v.height; ++y)
      for (int x = 0; x < v.width; ++x)
        for (int c = 0; c < v.channels; ++c) {
          double a = 0.0;
          for (int d = -r; d <= r; ++d)
            a += k[static_cast<std::size_t>(d + r)] * v.at(t, y, std::clamp(x + d, 0, v.width - 1), c);
          tmp.at(t, y, x, c) = a;
        }
  for (int t = 0; t < v.frames; ++t)
    for (int y = 0; y < v.height; ++y)
      for (int x = 0; x < v.width; ++x)
        for (int c = 0; c < v.channels; ++c) {
          double a = 0.0;
          for (int d = -r; d <= r; ++d)
            a += k[static_cast<std::size_t>(d + r)] * tmp.at(t, std::clamp(y + d, 0, v.height - 1), x, c);
          out.at(t, y, x, c) = a;
        }
  return out;
}

// Hard-edged vertical stripes, 16 px wide, moving `speed` px per frame.
VideoTensor moving_stripes(int frames, int h, int w, int speed) {
  VideoTensor v(frames, h, w, 3);
  for (int t = 0; t < frames; ++t)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c) v.at(t, y, x, c) = ((x + speed * t) / 16) % 2 ? 0.8 : -0.8;
  return v;
}

Outcome bench_filters() {
  const BenchConfig cfg;
  Rng rng(901);
  const VideoTensor sharp = moving_stripes(97, 32, 32, 4);
  const VideoTensor smooth = gaussian_blur(sharp, 2.0);
  const VideoTensor still = moving_stripes(97, 32, 32, 0);
  const auto kept = filter_indices({sharp, smooth, still}, cfg);
  const double smooth_blur = blur_score(smooth);
  const double still_motion = motion_proxy(still);
  // Each rejection must come from the filter it targets.
  const bool reasons = smooth_blur < cfg.blur_threshold && motion_proxy(smooth) > cfg.motion_threshold &&
                       still_motion <= cfg.motion_threshold && blur_score(still) >= cfg.blur_threshold;

  std::vector<VideoTensor> clips;
  std::vector<std::string> captions;
  for (int i = 0; i < cfg.per_task_count; ++i) {
    CorpusItem item = render_archetype(Archetype::Translating, 97, 32, 32, rng);
    clips.push_back(std::move(item.clip));
    captions.push_back(item.caption);
  }
  const auto idx = filter_indices(clips, cfg);
  std::vector<VideoTensor> survivors;
  std::vector<std::string> survivor_captions;
  for (std::size_t i : idx) {
    survivors.push_back(clips[i]);
    survivor_captions.push_back(captions[i]);
  }
  Rng bench_rng(902);
  const auto samples = build_benchmark(survivors, survivor_captions, cfg, bench_rng);
  const fs::path dir = scratch("bench");
  write_benchmark(dir, samples);
  const auto rows = read_manifest(dir / "manifest.tsv");
  std::map<TaskTag, int> per_task;
  for (const auto& r : rows) ++per_task[r.task];
  bool balanced = per_task.size() == kTaskCount;
  for (const auto& [task, count] : per_task) balanced = balanced && count == 30;
  fs::remove_all(dir);

  const bool pass = kept == std::vector<std::size_t>{0} && reasons && rows.size() == 480 && balanced;
  return {pass, fmt("kept %zu of 3 (sharp kept: %s); sharp blur %.1f motion %.4f; smoothed blur %.1f motion %.4f; "
                    "static blur %.1f motion %.4f; %zu/%d clips pass; %zu manifest rows, %zu tasks x 30: %s",
                    kept.size(), (!kept.empty() && kept[0] == 0) ? "yes" : "no", blur_score(sharp),
                    motion_proxy(sharp), smooth_blur, motion_proxy(smooth), blur_score(still), still_motion,
                    idx.size(), cfg.per_task_count, rows.size(), per_task.size(), balanced ? "yes" : "no")};
}

// ---------------------------------------------------------------------------

Outcome euler_convergence() {
  Rng rng(1001);
  const LatentGrid x1 = random_latent(2, 3, 3, 8, rng);

  // The straight field (x - a) / t has constant velocity along every path, so
  // Euler reproduces x(0) = a up to rounding at every step count.
  const LatentGrid a = random_latent(2, 3, 3, 8, rng);
  const VelocityFn straight = [&](const LatentGrid& x, double t, const ConditionBundle&) {
    LatentGrid v = x;
    for (std::size_t i = 0; i < v.size(); ++i) v.data[i] = (x.data[i] - a.data[i]) / t;
    return v;
  };
  // Rectified flow between N(mu, sigma^2) and N(0, 1): linear in x with a
  // time-varying rate; exact terminal point mu + sigma * x(1).
  const double mu = 0.7, sigma = 0.3;
  const VelocityFn gaussian = [&](const LatentGrid& x, double t, const ConditionBundle&) {
    const double var = (1 - t) * (1 - t) * sigma * sigma + t * t;
    const double k = (t - (1 - t) * sigma * sigma) / var;
    LatentGrid v = x;
    for (double& e : v.data) e = -mu + k * (e - (1 - t) * mu);
    return v;
  };
  const std::array<int, 4> steps{10, 20, 40, 80};
  std::array<double, 4> err{}, straight_err{};
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const LatentGrid g = euler_integrate_unguided(gaussian, x1, {}, steps[i]);
    const LatentGrid s = euler_integrate_unguided(straight, x1, {}, steps[i]);
    for (std::size_t k = 0; k < x1.size(); ++k) {
      err[i] = std::max(err[i], std::abs(g.data[k] - (mu + sigma * x1.data[k])));
      straight_err[i] = std::max(straight_err[i], std::abs(s.data[k] - a.data[k]));
    }
  }
  // Least-squares slope of log(error) against log(step size).
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const double x = std::log(1.0 / steps[i]), y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (4 * sxy - sx * sy) / (4 * sxx - sx * sx);
  const double straight_max = *std::max_element(straight_err.begin(), straight_err.end());

  MfmModel model(model_preset("toy"), 1002);
  model.randomize(1003, 0.1);
  const VideoTensor clip = random_clip(5, 16, 16, rng);
  const ConditionBundle bundle = build_condition(clip, TaskTag::I2V, "a clip", rng);
  const ConditionBundle null_bundle = null_text(bundle);
  const VelocityFn fn = model_velocity(model, bundle, null_bundle);
  const LatentGrid start = random_latent(2, 2, 2, model.config().latent_channels, rng);
  const LatentGrid guided = euler_integrate(fn, start, bundle, null_bundle, {20, 1.0});
  const LatentGrid plain = euler_integrate_unguided(fn, start, bundle, 20);
  const bool identical = guided == plain;

  return {slope >= 0.8 && slope <= 1.2 && straight_max < 1e-12 && identical,
          fmt("slope %.4f (errors %.2e %.2e %.2e %.2e); straight-field error %.1e; CFG 1 == unguided: %s", slope,
              err[0], err[1], err[2], err[3], straight_max, identical ? "yes" : "no")};
}

// ---------------------------------------------------------------------------

#ifdef MFM_CLI_PATH
int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + MFM_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Hashes of every file under `root` except run manifests (which carry timestamps).
std::map<std::string, std::string> artifact_hashes(const fs::path& root) {
  std::map<std::string, std::string> out;
  if (fs::is_regular_file(root)) {
    out["."] = hash_file(root);
    return out;
  }
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const std::string name = e.path().filename().string();
    if (name.size() >= 8 && name.compare(name.size() - 8, 8, "run.json") == 0) continue;
    out[fs::relative(e.path(), root).string()] = hash_file(e.path());
  }
  return out;
}
#endif

Outcome cli_determinism() {
#ifndef MFM_CLI_PATH
  return {false, "CLI binary not built"};
#else
  const fs::path dir = scratch("cli");
  auto q = [](const fs::path& p) { return "\"" + p.string() + "\""; };
  {
    std::ofstream(dir / "recipe.txt") << "name=smoke resolution=5x16x16 bs=1 lr=1e-3 iters=50 image_ratio=0.2\n";
    std::ofstream(dir / "corpus.txt") << "videos=4\nimages=2\nframes=5\nheight=16\nwidth=16\n";
  }
  if (run_cli("synth-clips --videos 30 --frames 97 --height 32 --width 32 --seed 5 --out " + q(dir / "clips")) != 0) {
    return {false, "synth-clips failed"};
  }
  std::vector<std::string> report;
  bool all_same = true;
  auto twice = [&](const std::string& name, const std::function<std::string(int)>& args,
                   const std::function<fs::path(int)>& artifact) {
    std::map<std::string, std::string> hashes[2];
    for (int run = 0; run < 2; ++run) {
      const int code = run_cli(args(run));
      if (code != 0) {
        report.push_back(name + " exit " + std::to_string(code));
        all_same = false;
        return;
      }
      hashes[run] = artifact_hashes(artifact(run));
    }
    const bool same = !hashes[0].empty() && hashes[0] == hashes[1];
    all_same = all_same && same;
    report.push_back(name + (same ? " identical (" + std::to_string(hashes[0].size()) + " files)" : " DIFFER"));
  };
  auto out = [&](const std::string& stem) {
    return [&, stem](int run) { return dir / (stem + std::to_string(run)); };
  };

  twice(
      "build-conditions",
      [&](int r) {
        return "build-conditions --input " + q(dir / "clips" / "clip_0000.tensor") +
               " --task FLC2V --prompt \"a moving square\" --seed 11 --out " + q(dir / ("cond" + std::to_string(r)));
      },
      out("cond"));
  twice(
      "train",
      [&](int r) {
        return "train --recipe " + q(dir / "recipe.txt") + " --corpus " + q(dir / "corpus.txt") +
               " --preset toy --seed 12 --out " + q(dir / ("train" + std::to_string(r)));
      },
      out("train"));
  // A small bundle keeps sampling quick.
  {
    Rng rng(14);
    const VideoTensor clip = fit_clip(io::load_video(dir / "clips" / "clip_0001.tensor"), 5, 16, 16);
    save_bundle(dir / "i2v_small.bundle", build_condition(clip, TaskTag::I2V, "a square", rng));
  }
  twice(
      "sample",
      [&](int r) {
        return "sample --checkpoint " + q(dir / "train0" / "checkpoint.mfmc") + " --bundle " + q(dir / "i2v_small.bundle") +
               " --steps 10 --seed 15 --out " + q(dir / ("sample" + std::to_string(r)));
      },
      out("sample"));
  twice(
      "bench-build",
      [&](int r) {
        return "bench-build --clips " + q(dir / "clips") + " --per-task 30 --seed 16 --out " +
               q(dir / ("bench" + std::to_string(r)));
      },
      out("bench"));
  // Outputs for evaluation: every ground truth, with its first value nudged.
  bool outputs_ok = true;
  try {
    for (const auto& row : read_manifest(dir / "bench0" / "manifest.tsv")) {
      VideoTensor gt = io::load_video(dir / "bench0" / (row.id + ".gt.tensor"));
      gt.data[0] = -gt.data[0];
      fs::create_directories((dir / "outputs" / row.id).parent_path());
      io::save_video(dir / "outputs" / (row.id + ".tensor"), gt);
    }
  } catch (const std::exception&) {
    outputs_ok = false;
  }
  if (outputs_ok) {
    twice(
        "bench-eval",
        [&](int r) {
          return "bench-eval --bench " + q(dir / "bench0") + " --outputs " + q(dir / "outputs") + " --out " +
                 q(dir / ("report" + std::to_string(r) + ".tsv"));
        },
        [&](int r) { return dir / ("report" + std::to_string(r) + ".tsv"); });
  } else {
    all_same = false;
    report.push_back("bench-eval inputs missing");
  }
  std::string detail;
  for (const auto& s : report) detail += s + "; ";
  fs::remove_all(dir);
  return {all_same && report.size() == 5, detail};
#endif
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "flow identities", 1.0, flow_identities},
      {2, "gradient correctness", 120.0, gradient_check},
      {3, "3D RoPE relative-position invariance", 5.0, rope_invariance},
      {4, "shape law", 10.0, shape_law},
      {5, "overfit smoke test", 900.0, overfit},
      {6, "task-sampling statistics", 5.0, task_sampling},
      {7, "dropout statistics", 30.0, dropout_rates},
      {8, "mask coverage", 30.0, mask_coverage},
      {9, "benchmark filters", 60.0, bench_filters},
      {10, "Euler convergence", 10.0, euler_convergence},
      {11, "determinism", 300.0, cli_determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.budget_seconds;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::printf("criterion %2d %s %s: %s [%.1fs, budget %.0fs%s]\n", c.id, pass ? "PASS" : "FAIL", c.name,
                o.detail.c_str(), secs, c.budget_seconds, in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
