#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "mfm/error.hpp"
#include "mfm/flow.hpp"
#include "mfm/model.hpp"
#include "mfm/trainer.hpp"

using namespace mfm;

TEST(Recipe, ReferenceScheduleIsProgressive) {
  const auto r = reference_recipe();
  ASSERT_EQ(r.size(), 4u);
  EXPECT_NO_THROW(validate_recipe(r));
  EXPECT_EQ(r[0].frames, 49);
  EXPECT_EQ(r[0].height, 128);
  EXPECT_EQ(r[0].width, 224);
  EXPECT_EQ(r[0].iterations, 170000);
  EXPECT_DOUBLE_EQ(r[0].image_video_ratio, 1.0);
  EXPECT_NEAR(r[3].image_video_ratio, 0.1, 1e-12);
  for (std::size_t i = 1; i < r.size(); ++i) {
    EXPECT_GE(r[i].volume(), r[i - 1].volume());
    EXPECT_LE(r[i].image_video_ratio, r[i - 1].image_video_ratio);
  }
}

TEST(Recipe, TextRoundTrip) {
  const auto r = reference_recipe();
  EXPECT_EQ(parse_recipe(recipe_to_text(r)), r);
}

TEST(Recipe, ParseErrorsNameTheLine) {
  try {
    parse_recipe("name=a resolution=5x8x8 bs=1 lr=1e-3 iters=2\n\nname=b resolution=5x8x8 bs=x lr=1 iters=1\n");
    FAIL() << "expected a ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_recipe("name=a resolution=5x8 lr=1 iters=1"), ValidationError);
  EXPECT_THROW(parse_recipe("name=a resolution=9x16x16 lr=1 iters=1\nname=b resolution=5x8x8 lr=1 iters=1"),
               ValidationError);
  EXPECT_THROW(parse_recipe("name=a resolution=3x8x8 lr=1 iters=1"), ValidationError);
  EXPECT_THROW(parse_recipe("name=a resolution=5x8x8 iters=1"), ValidationError);
  EXPECT_NO_THROW(parse_recipe("# comment\nname=a resolution=5x8x8 lr=1 iters=1  # trailing\n"));
}

TEST(Recipe, KeyValuesWithQuotes) {
  const auto kv = parse_key_values(R"(name="stage one" lr=1e-4)");
  ASSERT_EQ(kv.size(), 2u);
  EXPECT_EQ(kv[0].second, "stage one");
  EXPECT_EQ(kv[1].first, "lr");
  EXPECT_THROW(parse_key_values("name=\"open"), ValidationError);
}

TEST(Corpus, SyntheticClipsAreValidAndSeeded) {
  CorpusSpec spec;
  spec.videos = 8;
  spec.images = 2;
  spec.frames = 9;
  spec.height = 16;
  spec.width = 16;
  Rng a(1), b(1);
  const Corpus ca = make_synthetic_corpus(spec, a);
  const Corpus cb = make_synthetic_corpus(spec, b);
  ASSERT_EQ(ca.size(), 10u);
  for (std::size_t i = 0; i < ca.size(); ++i) {
    EXPECT_EQ(ca[i].clip, cb[i].clip);
    EXPECT_NO_THROW(validate_video(ca[i].clip));
    EXPECT_EQ(ca[i].clip.frames, i < 8 ? 9 : 1);
    EXPECT_FALSE(ca[i].caption.empty());
  }
  EXPECT_EQ(ca[1].archetype, Archetype::Translating);
  EXPECT_EQ(motion_proxy(ca[0].clip), 0.0);
  EXPECT_GT(motion_proxy(ca[1].clip), 0.0);
  EXPECT_EQ(parse_corpus_spec(corpus_spec_to_text(spec)), spec);
  EXPECT_THROW(parse_archetype("wobbly"), ValidationError);
}

TEST(Corpus, FitClipCropsAndRepeats) {
  VideoTensor v(3, 8, 8, 3);
  for (int t = 0; t < 3; ++t)
    for (double& x : v.frame(t)) x = 0.1 * t;
  const VideoTensor longer = fit_clip(v, 5, 8, 8);
  EXPECT_EQ(longer.at(3, 0, 0, 0), v.at(0, 0, 0, 0));
  EXPECT_EQ(longer.at(4, 0, 0, 0), v.at(1, 0, 0, 0));
  const VideoTensor cropped = fit_clip(v, 1, 16, 16, 2);
  EXPECT_EQ(cropped.at(0, 15, 15, 2), v.at(2, 7, 7, 2));
}

TEST(TaskSampling, WeightsTripleTheCoreTasks) {
  const auto w = TaskWeights::standard();
  EXPECT_EQ(w[TaskTag::T2V], 3.0);
  EXPECT_EQ(w[TaskTag::T2I], 3.0);
  EXPECT_EQ(w[TaskTag::I2V], 3.0);
  EXPECT_EQ(w[TaskTag::VSR], 1.0);
  std::vector<TaskTag> video;
  for (TaskTag t : kAllTasks)
    if (!is_image_task(t)) video.push_back(t);
  const auto p = task_probabilities(video, w);
  EXPECT_NEAR(p[0], 3.0 / 14.0, 1e-15);
  EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-15);
  TaskWeights bad = w;
  bad.weight[0] = -1;
  EXPECT_THROW(validate_weights(bad), ValidationError);
  EXPECT_THROW(task_probabilities({}, w), ValidationError);
}

TEST(TaskSampling, EmpiricalFrequencyMatches) {
  const std::vector<TaskTag> tasks{TaskTag::T2I, TaskTag::SISR, TaskTag::IINP};
  const auto w = TaskWeights::standard();
  Rng rng(2);
  int hits = 0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) hits += sample_task(tasks, w, rng) == TaskTag::T2I;
  const double p = 0.6, sigma = std::sqrt(p * (1 - p) / n);
  EXPECT_NEAR(hits / static_cast<double>(n), p, 4 * sigma);
}

TEST(Dropout, ScopesByTask) {
  Rng crng(3);
  VideoTensor clip(5, 8, 8, 3, 0.3);
  const auto t2v = build_condition(clip, TaskTag::T2V, "p", crng);
  const auto i2v = build_condition(clip, TaskTag::I2V, "p", crng);
  DropoutPolicy always{1.0, 1.0, 1.0};
  Rng rng(4);
  DropoutEvent ev;
  const auto a = apply_dropout(t2v, always, rng, &ev);
  EXPECT_TRUE(ev.null_text);
  EXPECT_FALSE(ev.zero_condition);
  EXPECT_EQ(a.prompt, "");
  const auto b = apply_dropout(i2v, always, rng, &ev);
  EXPECT_TRUE(ev.zero_condition);
  EXPECT_FALSE(ev.null_text);
  EXPECT_EQ(b.prompt, i2v.prompt);
  for (double m : b.mask.data) EXPECT_EQ(m, 0.0);
  DropoutPolicy never{0.0, 0.0, 0.0};
  EXPECT_EQ(apply_dropout(i2v, never, rng), i2v);
  EXPECT_THROW(validate_policy({1.5, 0.1, 0.1}), ValidationError);
}

TEST(Training, WarmupIsLinear) {
  EXPECT_DOUBLE_EQ(warmup_lr(1e-3, 0, 100), 1e-5);
  EXPECT_DOUBLE_EQ(warmup_lr(1e-3, 49, 100), 5e-4);
  EXPECT_DOUBLE_EQ(warmup_lr(1e-3, 100, 100), 1e-3);
  EXPECT_DOUBLE_EQ(warmup_lr(1e-3, 0, 0), 1e-3);
}

TEST(Training, ShortRunIsDeterministicAndLogged) {
  CorpusSpec spec;
  spec.videos = 2;
  spec.frames = 5;
  spec.height = 16;
  spec.width = 16;
  RecipeStage stage;
  stage.name = "tiny";
  stage.frames = 5;
  stage.height = 16;
  stage.width = 16;
  stage.image_video_ratio = 0.5;
  stage.batch_size = 2;
  stage.learning_rate = 1e-3;
  stage.iterations = 3;
  auto run = [&] {
    Rng crng(5);
    const Corpus corpus = make_synthetic_corpus(spec, crng);
    MfmModel model(model_preset("toy"), 6);
    Rng rng(7);
    TrainOptions opts;
    int seen = 0;
    opts.on_record = [&](const StepRecord&) { ++seen; };
    auto result = train(model, {stage}, corpus, opts, rng);
    EXPECT_EQ(seen, 6);
    return std::make_pair(result, model.params().to_named());
  };
  const auto [ra, pa] = run();
  const auto [rb, pb] = run();
  ASSERT_EQ(ra.step_loss.size(), 3u);
  EXPECT_EQ(ra.step_loss, rb.step_loss);
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i].second.values, pb[i].second.values);
  ASSERT_EQ(ra.records.size(), 6u);
  for (const auto& r : ra.records) {
    EXPECT_TRUE(std::isfinite(r.loss));
    EXPECT_GT(r.time, 0.0);
    EXPECT_LT(r.time, 1.0);
    if (r.image) {
      EXPECT_TRUE(is_image_task(r.task));
    }
  }
  const std::string line = metrics_line(ra.records[0]);
  const std::string header = metrics_header();
  EXPECT_EQ(std::count(line.begin(), line.end(), '\t'), std::count(header.begin(), header.end(), '\t'));
}

TEST(Training, HeldOutFlowLossDecreasesOnATinyCorpus) {
  CorpusSpec spec;
  spec.videos = 1;
  spec.frames = 5;
  spec.height = 16;
  spec.width = 16;
  spec.archetypes = {Archetype::Static};
  Rng crng(8);
  const Corpus corpus = make_synthetic_corpus(spec, crng);
  MfmModel model(model_preset("toy"), 9);

  // Fixed probe set: the same clip under fixed noise and times.
  const LatentCodec codec = codec_for(model.config());
  const LatentGrid x0 = codec.encode(corpus[0].clip);
  Rng prng(11);
  const ConditionBundle bundle = build_condition(corpus[0].clip, TaskTag::T2V, corpus[0].caption, prng);
  std::vector<FlowSample> probes;
  for (int i = 0; i < 16; ++i) {
    const LatentGrid eps = sample_noise(x0.t, x0.h, x0.w, x0.c, prng);
    probes.push_back(make_flow_sample(x0, eps, (i + 0.5) / 16.0));
  }
  auto probe_loss = [&] {
    double s = 0.0;
    for (const auto& p : probes) s += flow_loss(model.forward(p.xt, bundle, {p.time, bundle.motion_score}), p);
    return s / probes.size();
  };

  RecipeStage stage;
  stage.name = "fit";
  stage.frames = 5;
  stage.height = 16;
  stage.width = 16;
  stage.image_video_ratio = 0.0;
  stage.batch_size = 2;
  stage.learning_rate = 2e-3;
  stage.iterations = 150;
  const double before = probe_loss();
  Rng rng(10);
  TrainOptions opts;
  opts.warmup_steps = 10;
  train(model, {stage}, corpus, opts, rng);
  EXPECT_LT(probe_loss(), 0.7 * before);
}

TEST(Training, ImageFractionFollowsTheStageRatio) {
  CorpusSpec spec;
  spec.videos = 2;
  spec.images = 1;
  spec.frames = 5;
  spec.height = 8;
  spec.width = 8;
  Rng crng(12);
  const Corpus corpus = make_synthetic_corpus(spec, crng);
  const auto ratios = linear_ratio_schedule(4, 1.0, 0.1);
  EXPECT_DOUBLE_EQ(ratios.front(), 1.0);
  EXPECT_NEAR(ratios.back(), 0.1, 1e-15);
  RecipeStage stage;
  stage.name = "mix";
  stage.frames = 5;
  stage.height = 8;
  stage.width = 8;
  stage.image_video_ratio = 0.3;
  stage.learning_rate = 1e-4;
  stage.iterations = 600;
  MfmModel model(model_preset("toy"), 13);
  Rng rng(14);
  const auto r = train(model, {stage}, corpus, TrainOptions{}, rng);
  int images = 0;
  for (const auto& rec : r.records) images += rec.image;
  const double n = static_cast<double>(r.records.size());
  EXPECT_NEAR(images / n, 0.3, 3 * std::sqrt(0.3 * 0.7 / n));
}
