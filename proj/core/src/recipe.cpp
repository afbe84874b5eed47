#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mfm/error.hpp"
#include "mfm/trainer.hpp"
#include "mfm/video.hpp"

namespace mfm {
namespace {

std::string line_error(int line, const std::string& message) {
  return "line " + std::to_string(line) + ": " + message;
}

int to_int(const std::string& s, const std::string& key) {
  int v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw ValidationError("field '" + key + "' expects an integer, got '" + s + "'");
  }
  return v;
}

double to_real(const std::string& s, const std::string& key) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) {
    throw ValidationError("field '" + key + "' expects a number, got '" + s + "'");
  }
  return v;
}

std::string real_text(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string quoted(const std::string& s) {
  if (!s.empty() && s.find_first_of(" \t\"#") == std::string::npos) return s;
  return "\"" + s + "\"";
}

// "49x128x224"
void parse_resolution(const std::string& s, RecipeStage& stage) {
  std::array<int, 3> dims{};
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    const std::size_t end = i < 2 ? s.find('x', pos) : s.size();
    if (end == std::string::npos) throw ValidationError("resolution must look like TxHxW, got '" + s + "'");
    dims[i] = to_int(s.substr(pos, end - pos), "resolution");
    pos = end + 1;
  }
  stage.frames = dims[0];
  stage.height = dims[1];
  stage.width = dims[2];
}

std::string strip_comment(std::string_view line) {
  bool in_quote = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_quote = !in_quote;
    if (line[i] == '#' && !in_quote) return std::string(line.substr(0, i));
  }
  return std::string(line);
}

}  // namespace

void validate_stage(const RecipeStage& s) {
  const std::string who = "stage '" + s.name + "': ";
  if (s.name.empty()) throw ValidationError("stage name must not be empty");
  if (!(s.learning_rate > 0.0) || !std::isfinite(s.learning_rate)) {
    throw ValidationError(who + "learning rate must be positive");
  }
  if (s.iterations < 0) throw ValidationError(who + "iterations must be >= 0");
  if (s.batch_size < 1) throw ValidationError(who + "batch size must be >= 1");
  if (s.sequence_parallel < 1) throw ValidationError(who + "sp must be >= 1");
  if (!(s.image_video_ratio >= 0.0 && s.image_video_ratio <= 1.0)) {
    throw ValidationError(who + "image ratio must lie in [0, 1]");
  }
  if (s.height <= 0 || s.width <= 0 || s.height % 8 != 0 || s.width % 8 != 0) {
    throw ValidationError(who + "height and width must be positive multiples of 8");
  }
  if (!valid_frame_count(s.frames)) {
    throw ValidationError(who + "frame count " + std::to_string(s.frames) + " is not codec-valid");
  }
}

void validate_recipe(const std::vector<RecipeStage>& recipe) {
  if (recipe.empty()) throw ValidationError("recipe has no stages");
  for (std::size_t i = 0; i < recipe.size(); ++i) {
    validate_stage(recipe[i]);
    if (i > 0 && recipe[i].volume() < recipe[i - 1].volume()) {
      throw ValidationError("stage '" + recipe[i].name + "' has a smaller resolution than the stage before it");
    }
  }
}

std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view line) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t i = 0;
  const auto space = [&](char c) { return c == ' ' || c == '\t' || c == '\r'; };
  while (i < line.size()) {
    while (i < line.size() && space(line[i])) ++i;
    if (i >= line.size()) break;
    const std::size_t key_start = i;
    while (i < line.size() && line[i] != '=' && !space(line[i])) ++i;
    if (i >= line.size() || line[i] != '=') {
      throw ValidationError("expected key=value, got '" + std::string(line.substr(key_start, i - key_start)) + "'");
    }
    std::string key(line.substr(key_start, i - key_start));
    if (key.empty()) throw ValidationError("empty field name");
    ++i;
    std::string value;
    if (i < line.size() && line[i] == '"') {
      const std::size_t close = line.find('"', i + 1);
      if (close == std::string_view::npos) throw ValidationError("unterminated quote in field '" + key + "'");
      value = std::string(line.substr(i + 1, close - i - 1));
      i = close + 1;
      if (i < line.size() && !space(line[i])) throw ValidationError("text after closing quote in field '" + key + "'");
    } else {
      const std::size_t start = i;
      while (i < line.size() && !space(line[i])) ++i;
      value = std::string(line.substr(start, i - start));
    }
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

std::vector<RecipeStage> parse_recipe(std::string_view text) {
  std::vector<RecipeStage> recipe;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = strip_comment(raw);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      RecipeStage stage;
      bool has_name = false, has_res = false, has_lr = false, has_iters = false;
      for (const auto& [key, value] : parse_key_values(line)) {
        if (key == "name") {
          stage.name = value;
          has_name = true;
        } else if (key == "dataset") {
          stage.dataset = value;
        } else if (key == "resolution") {
          parse_resolution(value, stage);
          has_res = true;
        } else if (key == "sp") {
          stage.sequence_parallel = to_int(value, key);
        } else if (key == "bs") {
          stage.batch_size = to_int(value, key);
        } else if (key == "lr") {
          stage.learning_rate = to_real(value, key);
          has_lr = true;
        } else if (key == "iters") {
          stage.iterations = to_int(value, key);
          has_iters = true;
        } else if (key == "image_ratio") {
          stage.image_video_ratio = to_real(value, key);
        } else {
          throw ValidationError("unknown field '" + key + "'");
        }
      }
      if (!has_name || !has_res || !has_lr || !has_iters) {
        throw ValidationError("stage needs name, resolution, lr and iters");
      }
      validate_stage(stage);
      recipe.push_back(std::move(stage));
    } catch (const ValidationError& e) {
      throw ValidationError(line_error(line_no, e.what()));
    }
  }
  validate_recipe(recipe);
  return recipe;
}

std::string recipe_to_text(const std::vector<RecipeStage>& recipe) {
  std::ostringstream out;
  for (const RecipeStage& s : recipe) {
    out << "name=" << quoted(s.name);
    if (!s.dataset.empty()) out << " dataset=" << quoted(s.dataset);
    out << " resolution=" << s.frames << 'x' << s.height << 'x' << s.width << " sp=" << s.sequence_parallel
        << " bs=" << s.batch_size << " lr=" << real_text(s.learning_rate) << " iters=" << s.iterations
        << " image_ratio=" << real_text(s.image_video_ratio) << '\n';
  }
  return out.str();
}

std::vector<RecipeStage> load_recipe(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read recipe " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_recipe(buf.str());
}

std::vector<double> linear_ratio_schedule(int stages, double first, double last) {
  if (stages < 1) throw ValidationError("schedule needs at least one stage");
  if (stages == 1) return {last};
  std::vector<double> r(static_cast<std::size_t>(stages));
  for (int i = 0; i < stages; ++i) r[i] = first + (last - first) * i / (stages - 1);
  r.back() = last;
  return r;
}

std::vector<RecipeStage> reference_recipe() {
  const std::vector<double> ratio = linear_ratio_schedule(4, 1.0, 0.1);
  std::vector<RecipeStage> r(4);
  r[0] = {"128px", "160M images, 120M videos", 49, 128, 224, ratio[0], 16, 1e-4, 170000, 1};
  r[1] = {"360px", "160M images, 120M videos", 89, 352, 640, ratio[1], 2, 8e-5, 100000, 1};
  r[2] = {"720px", "160M images, 10M videos", 97, 720, 1280, ratio[2], 1, 5e-5, 50000, 2};
  // Native-resolution packing is out of scope; the stage keeps one portrait resolution.
  r[3] = {"multi-res", "160M images, 5M videos", 97, 1280, 720, ratio[3], 1, 5e-5, 40000, 2};
  return r;
}

}  // namespace mfm
