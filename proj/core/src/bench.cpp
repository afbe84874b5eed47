#include "mfm/bench.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "mfm/error.hpp"
#include "mfm/tensor_io.hpp"

namespace fs = std::filesystem;

namespace mfm {
namespace {

constexpr const char* kBundleMagic = "MFMB 1";

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out += s[i];
      continue;
    }
    if (++i >= s.size()) throw IoError("dangling escape in fixture text");
    switch (s[i]) {
      case '\\': out += '\\'; break;
      case 'n': out += '\n'; break;
      case 't': out += '\t'; break;
      case 'r': out += '\r'; break;
      default: throw IoError(std::string("unknown escape \\") + s[i]);
    }
  }
  return out;
}

std::string real_text(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string number4(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d", i);
  return buf;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  for (;;) {
    const std::size_t tab = line.find('\t', pos);
    out.push_back(line.substr(pos, tab == std::string::npos ? std::string::npos : tab - pos));
    if (tab == std::string::npos) break;
    pos = tab + 1;
  }
  return out;
}

VideoTensor first_frame(const VideoTensor& clip) {
  VideoTensor f(1, clip.height, clip.width, clip.channels);
  std::copy_n(clip.data.begin(), f.size(), f.data.begin());
  return f;
}

VideoTensor truncate_frames(const VideoTensor& clip, int frames) {
  VideoTensor out(frames, clip.height, clip.width, clip.channels);
  std::copy_n(clip.data.begin(), out.size(), out.data.begin());
  return out;
}

void write_manifest(const fs::path& path, const std::vector<const BenchSample*>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "id\ttask\tprompt\tseed\tsegment\tclip\n";
  for (const BenchSample* s : rows) {
    out << s->id << '\t' << task_canonical(s->task) << '\t' << escape(s->bundle.prompt) << '\t' << s->seed << '\t'
        << s->segment << '\t' << s->clip << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

void validate_bench_config(const BenchConfig& c) {
  if (c.target_frames < 2 || c.target_frames % 4 != 1) {
    throw ValidationError("target_frames must be >= 5 and congruent to 1 mod 4");
  }
  if (c.segments < 1) throw ValidationError("segments must be >= 1");
  if (c.per_task_count < 1) throw ValidationError("per_task_count must be >= 1");
  if (c.tasks.empty()) throw ValidationError("task list is empty");
  if (!(c.blur_threshold >= 0.0) || !(c.motion_threshold >= 0.0)) {
    throw ValidationError("filter thresholds must be >= 0");
  }
  if (c.clip_condition_frames < 1 || 2 * c.clip_condition_frames >= c.target_frames) {
    throw ValidationError("clip_condition_frames leaves no frame to generate");
  }
  std::set<TaskTag> seen;
  for (TaskTag t : c.tasks) {
    if (!seen.insert(t).second) throw ValidationError("task list repeats " + std::string(task_short_name(t)));
  }
}

std::vector<std::size_t> filter_indices(const std::vector<VideoTensor>& clips, const BenchConfig& cfg) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const VideoTensor& clip = clips[i];
    if (clip.frames < cfg.target_frames) continue;
    bool sharp = true;
    for (int t = 0; t < clip.frames && sharp; ++t) sharp = blur_score(clip, t) >= cfg.blur_threshold;
    if (sharp && motion_proxy(clip) > cfg.motion_threshold) kept.push_back(i);
  }
  return kept;
}

std::vector<VideoTensor> filter_videos(const std::vector<VideoTensor>& clips, const BenchConfig& cfg) {
  std::vector<VideoTensor> out;
  for (std::size_t i : filter_indices(clips, cfg)) out.push_back(truncate_frames(clips[i], cfg.target_frames));
  return out;
}

std::vector<BenchSample> build_benchmark(const std::vector<VideoTensor>& clips,
                                         const std::vector<std::string>& captions, const BenchConfig& cfg,
                                         Rng& rng) {
  validate_bench_config(cfg);
  if (clips.size() != captions.size()) throw ValidationError("clip and caption counts differ");
  const std::size_t n = clips.size();
  const auto need = static_cast<std::size_t>(cfg.per_task_count);
  if (n < need) {
    throw ValidationError("insufficient clips: need " + std::to_string(need) + ", have " + std::to_string(n) +
                          " (short by " + std::to_string(need - n) + ")");
  }
  std::vector<VideoTensor> standard;
  standard.reserve(n);
  for (const VideoTensor& c : clips) {
    if (c.frames < cfg.target_frames) {
      throw ValidationError("benchmark clips need at least " + std::to_string(cfg.target_frames) + " frames");
    }
    standard.push_back(truncate_frames(c, cfg.target_frames));
  }

  const std::uint64_t base = rng();
  std::vector<BenchSample> samples;
  samples.reserve(cfg.tasks.size() * need);
  for (std::size_t s = 0; s < cfg.tasks.size(); ++s) {
    const TaskTag task = cfg.tasks[s];
    for (int i = 0; i < cfg.per_task_count; ++i) {
      BenchSample out;
      out.task = task;
      out.index = i;
      out.clip = (s * need + static_cast<std::size_t>(i)) % n;
      out.segment = static_cast<int>(out.clip * static_cast<std::size_t>(cfg.segments) / n);
      out.seed = derive_seed(base, task_canonical(task), static_cast<std::uint64_t>(i));
      out.id = std::string(task_canonical(task)) + "/" + number4(i);

      BuildOptions opts;
      if (task == TaskTag::VEXT) opts.extension_frames = cfg.clip_condition_frames;
      if (task == TaskTag::FLC2V) {
        opts.first_clip_frames = cfg.clip_condition_frames;
        opts.last_clip_frames = cfg.clip_condition_frames;
      }
      out.ground_truth = is_image_task(task) ? first_frame(standard[out.clip]) : standard[out.clip];
      io::round_to_f32(out.ground_truth.data);
      Rng sample_rng(out.seed);
      out.bundle = build_condition(out.ground_truth, task, captions[out.clip], sample_rng, opts);
      // Stored fixtures are float32; keep the in-memory bundle identical to what reloads.
      io::round_to_f32(out.bundle.pixel.data);
      io::round_to_f32(out.bundle.depth.data);
      samples.push_back(std::move(out));
    }
  }
  return samples;
}

void save_bundle(const fs::path& path, const ConditionBundle& b) {
  validate_bundle(b);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << kBundleMagic << '\n'
      << "task=" << task_canonical(b.task) << '\n'
      << "prompt=" << escape(b.prompt) << '\n'
      << "motion_score=" << real_text(b.motion_score) << '\n'
      << "detail=" << escape(b.detail) << '\n'
      << "end\n";
  io::write_tensor(out, io::to_raw(b.pixel));
  io::write_tensor(out, io::to_raw(b.depth));
  io::write_tensor(out, io::to_raw(b.mask));
  if (!out) throw IoError("failed writing " + path.string());
}

ConditionBundle load_bundle(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kBundleMagic) throw IoError(path.string() + " is not a bundle fixture");
  ConditionBundle b;
  bool has_task = false;
  for (;;) {
    if (!std::getline(in, line)) throw IoError(path.string() + ": truncated header");
    if (line == "end") break;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw IoError(path.string() + ": malformed header line '" + line + "'");
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "task") {
      const auto t = parse_task(value);
      if (!t) throw IoError(path.string() + ": unknown task '" + value + "'");
      b.task = *t;
      has_task = true;
    } else if (key == "prompt") {
      b.prompt = unescape(value);
    } else if (key == "motion_score") {
      const auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), b.motion_score);
      if (ec != std::errc() || p != value.data() + value.size()) throw IoError(path.string() + ": bad motion_score");
    } else if (key == "detail") {
      b.detail = unescape(value);
    } else {
      throw IoError(path.string() + ": unknown header field '" + key + "'");
    }
  }
  if (!has_task) throw IoError(path.string() + ": header lacks a task");
  b.pixel = io::to_video(io::read_tensor(in));
  b.depth = io::to_video(io::read_tensor(in));
  b.mask = io::to_video(io::read_tensor(in));
  try {
    validate_bundle(b);
  } catch (const std::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return b;
}

std::vector<fs::path> write_benchmark(const fs::path& dir, const std::vector<BenchSample>& samples) {
  std::vector<fs::path> written;
  std::vector<const BenchSample*> all;
  std::vector<TaskTag> order;
  for (const BenchSample& s : samples) {
    if (std::find(order.begin(), order.end(), s.task) == order.end()) order.push_back(s.task);
  }
  fs::create_directories(dir);
  for (TaskTag task : order) {
    const fs::path sub = dir / std::string(task_canonical(task));
    fs::create_directories(sub);
    std::vector<const BenchSample*> rows;
    for (const BenchSample& s : samples) {
      if (s.task != task) continue;
      const fs::path stem = dir / s.id;
      save_bundle(stem.string() + ".bundle", s.bundle);
      io::save_video(stem.string() + ".gt.tensor", s.ground_truth);
      written.emplace_back(stem.string() + ".bundle");
      written.emplace_back(stem.string() + ".gt.tensor");
      rows.push_back(&s);
      all.push_back(&s);
    }
    write_manifest(sub / "manifest.tsv", rows);
    written.push_back(sub / "manifest.tsv");
  }
  write_manifest(dir / "manifest.tsv", all);
  written.push_back(dir / "manifest.tsv");
  return written;
}

std::vector<ManifestRow> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "id\ttask\tprompt\tseed\tsegment\tclip") {
    throw IoError(path.string() + ": unexpected manifest header");
  }
  std::vector<ManifestRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    const auto task = f.size() == 6 ? parse_task(f[1]) : std::nullopt;
    if (!task) throw IoError(path.string() + ": malformed row at line " + std::to_string(line_no));
    ManifestRow r;
    r.id = f[0];
    r.task = *task;
    r.prompt = unescape(f[2]);
    try {
      r.seed = std::stoull(f[3]);
      r.segment = std::stoi(f[4]);
      r.clip = std::stoull(f[5]);
    } catch (const std::exception&) {
      throw IoError(path.string() + ": malformed number at line " + std::to_string(line_no));
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

BenchReport evaluate_benchmark(const fs::path& bench_dir, const fs::path& outputs_dir) {
  const auto rows = read_manifest(bench_dir / "manifest.tsv");
  if (!fs::is_directory(outputs_dir)) throw IoError("outputs directory " + outputs_dir.string() + " not found");
  std::set<std::string> expected;
  for (const ManifestRow& r : rows) expected.insert(r.id);
  for (const auto& entry : fs::recursive_directory_iterator(outputs_dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() < 7 || name.compare(name.size() - 7, 7, ".tensor") != 0 || name.find(".gt.") != std::string::npos) {
      continue;
    }
    fs::path rel = fs::relative(entry.path(), outputs_dir);
    rel.replace_extension();
    if (!expected.count(rel.generic_string())) {
      throw ValidationError("output " + rel.generic_string() + " has no benchmark sample");
    }
  }
  BenchReport report;
  for (const ManifestRow& r : rows) {
    const fs::path out_path = outputs_dir / (r.id + ".tensor");
    if (!fs::exists(out_path)) throw ValidationError("missing output for benchmark sample " + r.id);
    const VideoTensor gt = io::load_video(bench_dir / (r.id + ".gt.tensor"));
    const VideoTensor out = io::load_video(out_path);
    if (!gt.same_shape(out)) throw ValidationError("output " + r.id + " does not match the ground-truth shape");
    report.rows.push_back({r.id, r.task, psnr(out, gt), ssim(out, gt)});
  }
  return report;
}

}  // namespace mfm
