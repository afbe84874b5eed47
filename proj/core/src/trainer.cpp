#include "mfm/trainer.hpp"

#include <charconv>
#include <cmath>
#include <numeric>

#include "mfm/error.hpp"
#include "mfm/flow.hpp"
#include "mfm/latents.hpp"
#include "mfm/ops.hpp"

namespace mfm {

TaskWeights TaskWeights::standard(double base) {
  TaskWeights w;
  w.weight.fill(base);
  for (TaskTag t : {TaskTag::T2V, TaskTag::T2I, TaskTag::I2V}) w.weight[task_index(t)] = 3.0 * base;
  return w;
}

void validate_weights(const TaskWeights& w) {
  for (double v : w.weight) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("task weights must be positive and finite");
  }
}

std::vector<double> task_probabilities(const std::vector<TaskTag>& qualified, const TaskWeights& weights) {
  if (qualified.empty()) throw ValidationError("no qualified task to sample from");
  validate_weights(weights);
  std::vector<double> p;
  p.reserve(qualified.size());
  double total = 0.0;
  for (TaskTag t : qualified) total += weights[t];
  for (TaskTag t : qualified) p.push_back(weights[t] / total);
  return p;
}

TaskTag sample_task(const std::vector<TaskTag>& qualified, const TaskWeights& weights, Rng& rng) {
  if (qualified.empty()) throw ValidationError("no qualified task to sample from");
  validate_weights(weights);
  double total = 0.0;
  for (TaskTag t : qualified) total += weights[t];
  const double u = uniform01(rng) * total;
  double acc = 0.0;
  for (TaskTag t : qualified) {
    acc += weights[t];
    if (u < acc) return t;
  }
  return qualified.back();
}

void validate_policy(const DropoutPolicy& p) {
  for (double r : {p.null_text_rate_video, p.null_text_rate_image, p.zero_condition_rate}) {
    if (!(r >= 0.0 && r <= 1.0)) throw ValidationError("dropout rates must lie in [0, 1]");
  }
}

ConditionBundle apply_dropout(ConditionBundle bundle, const DropoutPolicy& policy, Rng& rng,
                              DropoutEvent* event) {
  validate_policy(policy);
  const double u = uniform01(rng);
  DropoutEvent ev;
  if (bundle.task == TaskTag::T2V || bundle.task == TaskTag::T2I) {
    const double rate = bundle.task == TaskTag::T2V ? policy.null_text_rate_video : policy.null_text_rate_image;
    if (u < rate) {
      bundle = null_text(std::move(bundle));
      ev.null_text = true;
    }
  } else if (u < policy.zero_condition_rate) {
    bundle = zero_conditions(std::move(bundle));
    ev.zero_condition = true;
  }
  if (event) *event = ev;
  return bundle;
}

double warmup_lr(double base_lr, int step_in_stage, int warmup_steps) {
  if (warmup_steps <= 0 || step_in_stage >= warmup_steps) return base_lr;
  return base_lr * static_cast<double>(step_in_stage + 1) / warmup_steps;
}

double window_mean(const std::vector<double>& values, std::size_t begin, std::size_t end) {
  end = std::min(end, values.size());
  if (begin >= end) throw ValidationError("empty averaging window");
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) s += values[i];
  return s / static_cast<double>(end - begin);
}

std::string metrics_header() { return "step\tstage\tslot\ttask\tloss\tlr\ttime\tnull_text\tzero_cond\timage"; }

std::string metrics_line(const StepRecord& r) {
  const auto real = [](double v) {
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
  };
  return std::to_string(r.step) + '\t' + r.stage + '\t' + std::to_string(r.slot) + '\t' +
         std::string(task_short_name(r.task)) + '\t' + real(r.loss) + '\t' + real(r.lr) + '\t' + real(r.time) +
         '\t' + (r.null_text ? '1' : '0') + '\t' + (r.zero_condition ? '1' : '0') + '\t' + (r.image ? '1' : '0');
}

namespace {

class Adam {
 public:
  Adam(const ParamStore& store, AdamConfig cfg) : cfg_(cfg) {
    for (const auto& [name, var] : store.entries()) {
      m_.emplace_back(var.size(), 0.0);
      v_.emplace_back(var.size(), 0.0);
    }
  }

  void step(ParamStore& store, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
    std::size_t k = 0;
    for (const auto& entry : store.entries()) {
      ad::Var var = entry.second;
      const std::vector<double>& g = var.node()->grad;
      if (!g.empty()) {
        auto value = var.mutable_value();
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < value.size(); ++i) {
          m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
          v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
          value[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps);
        }
      }
      ++k;
    }
  }

 private:
  AdamConfig cfg_;
  int t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace

TrainResult train(MfmModel& model, const std::vector<RecipeStage>& recipe, const Corpus& corpus,
                  const TrainOptions& options, Rng& rng) {
  validate_recipe(recipe);
  validate_weights(options.weights);
  validate_policy(options.policy);
  if (corpus.empty()) throw ValidationError("training corpus is empty");

  std::vector<std::size_t> videos, images;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    validate_video(corpus[i].clip);
    if (corpus[i].clip.channels != 3) throw ValidationError("corpus clips must be RGB");
    (corpus[i].clip.frames > 1 ? videos : images).push_back(i);
  }

  const LatentCodec codec = codec_for(model.config());
  Adam adam(model.params(), options.adam);
  TrainResult result;
  int step = 0;

  for (const RecipeStage& stage : recipe) {
    for (int it = 0; it < stage.iterations; ++it, ++step) {
      const double lr = warmup_lr(stage.learning_rate, it, options.warmup_steps);
      model.params().zero_grad();
      double step_loss = 0.0;
      for (int slot = 0; slot < stage.batch_size; ++slot) {
        const bool want_image = uniform01(rng) < stage.image_video_ratio;
        const bool image = want_image || videos.empty();
        VideoTensor clip;
        const CorpusItem* item = nullptr;
        if (image && !images.empty()) {
          item = &corpus[images[uniform_int(rng, 0, static_cast<int>(images.size()) - 1)]];
          clip = fit_clip(item->clip, 1, stage.height, stage.width);
        } else if (image) {
          // No stills in the corpus: use a random frame of a random video.
          item = &corpus[videos[uniform_int(rng, 0, static_cast<int>(videos.size()) - 1)]];
          clip = fit_clip(item->clip, 1, stage.height, stage.width, uniform_int(rng, 0, item->clip.frames - 1));
        } else {
          item = &corpus[videos[uniform_int(rng, 0, static_cast<int>(videos.size()) - 1)]];
          const int start = item->clip.frames > stage.frames
                                ? uniform_int(rng, 0, item->clip.frames - stage.frames)
                                : 0;
          clip = fit_clip(item->clip, stage.frames, stage.height, stage.width, start);
        }

        const TaskTag task = sample_task(qualified_tasks(clip, false), options.weights, rng);
        ConditionBundle bundle = build_condition(clip, task, item->caption, rng);
        if (options.invariant_check_every > 0 && slot == 0 && step % options.invariant_check_every == 0) {
          validate_bundle(bundle);
        }
        DropoutEvent event;
        bundle = apply_dropout(std::move(bundle), options.policy, rng, &event);

        const FlowSample fs = make_flow_sample(codec.encode(clip), rng);
        const MfmModel::Prepared prepared = model.prepare(bundle);
        const ad::Var v = model.velocity(latent_to_tokens(fs.xt), prepared, {fs.time, bundle.motion_score});
        const ad::Var loss = ad::mse(v, fs.v_target.data);
        const double value = loss.item();
        if (!std::isfinite(value)) {
          throw NumericError("non-finite loss at step " + std::to_string(step) + " (task " +
                             std::string(task_short_name(task)) + ")");
        }
        ad::backward(ad::scale(loss, 1.0 / stage.batch_size));
        step_loss += value;

        StepRecord rec{step, stage.name, slot, task, value, lr, fs.time, event.null_text, event.zero_condition,
                       clip.frames == 1};
        if (options.on_record) options.on_record(rec);
        result.records.push_back(std::move(rec));
      }
      adam.step(model.params(), lr);
      result.step_loss.push_back(step_loss / stage.batch_size);
    }
  }
  return result;
}

}  // namespace mfm
