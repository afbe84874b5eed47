#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mfm/error.hpp"
#include "mfm/trainer.hpp"

namespace mfm {
namespace {

struct Color {
  const char* name;
  double r, g, b;
  double luma() const { return kLumaR * r + kLumaG * g + kLumaB * b; }
};

constexpr std::array<Color, 10> kPalette = {{
    {"red", 1.0, -1.0, -1.0},
    {"green", -1.0, 1.0, -1.0},
    {"blue", -1.0, -1.0, 1.0},
    {"yellow", 1.0, 1.0, -1.0},
    {"cyan", -1.0, 1.0, 1.0},
    {"magenta", 1.0, -1.0, 1.0},
    {"white", 1.0, 1.0, 1.0},
    {"black", -1.0, -1.0, -1.0},
    {"orange", 1.0, 0.0, -1.0},
    {"purple", 0.0, -1.0, 1.0},
}};

constexpr std::array<const char*, 4> kDirections = {"left", "right", "up", "down"};

// Foreground/background pair with a clearly visible luminance step.
std::pair<Color, Color> draw_colors(Rng& rng) {
  for (;;) {
    const Color fg = kPalette[uniform_int(rng, 0, kPalette.size() - 1)];
    const Color bg = kPalette[uniform_int(rng, 0, kPalette.size() - 1)];
    if (std::abs(fg.luma() - bg.luma()) >= 0.5) return {fg, bg};
  }
}

void put(VideoTensor& v, int t, int y, int x, const Color& c, double gain = 1.0) {
  v.at(t, y, x, 0) = c.r * gain;
  v.at(t, y, x, 1) = c.g * gain;
  v.at(t, y, x, 2) = c.b * gain;
}

int wrap(int v, int n) { return ((v % n) + n) % n; }

int to_int(const std::string& s, const std::string& key) {
  int v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw ValidationError("field '" + key + "' expects an integer, got '" + s + "'");
  }
  return v;
}

}  // namespace

std::string_view archetype_name(Archetype a) {
  switch (a) {
    case Archetype::Static: return "static";
    case Archetype::Translating: return "translating";
    case Archetype::Oscillating: return "oscillating";
    case Archetype::Gradient: return "gradient";
  }
  return "static";
}

Archetype parse_archetype(std::string_view name) {
  for (Archetype a : kAllArchetypes) {
    if (archetype_name(a) == name) return a;
  }
  throw ValidationError("unknown archetype '" + std::string(name) + "'");
}

void validate_corpus_spec(const CorpusSpec& s) {
  if (s.videos < 0 || s.images < 0) throw ValidationError("corpus counts must be >= 0");
  if (s.videos + s.images == 0) throw ValidationError("corpus must contain at least one sample");
  if (s.height <= 0 || s.width <= 0 || s.height % 8 != 0 || s.width % 8 != 0) {
    throw ValidationError("corpus height and width must be positive multiples of 8");
  }
  if (s.videos > 0 && (s.frames < 2 || !valid_frame_count(s.frames))) {
    throw ValidationError("corpus frame count " + std::to_string(s.frames) + " is not a codec-valid video length");
  }
  if (s.archetypes.empty()) throw ValidationError("corpus needs at least one archetype");
}

CorpusSpec parse_corpus_spec(std::string_view text) {
  CorpusSpec spec;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = raw.substr(0, raw.find('#'));
    try {
      for (const auto& [key, value] : parse_key_values(line)) {
        if (key == "videos") {
          spec.videos = to_int(value, key);
        } else if (key == "images") {
          spec.images = to_int(value, key);
        } else if (key == "frames") {
          spec.frames = to_int(value, key);
        } else if (key == "height") {
          spec.height = to_int(value, key);
        } else if (key == "width") {
          spec.width = to_int(value, key);
        } else if (key == "archetypes") {
          spec.archetypes.clear();
          std::size_t pos = 0;
          while (pos <= value.size()) {
            const std::size_t comma = std::min(value.find(',', pos), value.size());
            spec.archetypes.push_back(parse_archetype(value.substr(pos, comma - pos)));
            pos = comma + 1;
          }
        } else {
          throw ValidationError("unknown field '" + key + "'");
        }
      }
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  validate_corpus_spec(spec);
  return spec;
}

std::string corpus_spec_to_text(const CorpusSpec& s) {
  std::ostringstream out;
  out << "videos=" << s.videos << "\nimages=" << s.images << "\nframes=" << s.frames << "\nheight=" << s.height
      << "\nwidth=" << s.width << "\narchetypes=";
  for (std::size_t i = 0; i < s.archetypes.size(); ++i) {
    out << (i ? "," : "") << archetype_name(s.archetypes[i]);
  }
  out << '\n';
  return out.str();
}

CorpusSpec load_corpus_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read corpus spec " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_corpus_spec(buf.str());
}

CorpusItem render_archetype(Archetype archetype, int frames, int height, int width, Rng& rng) {
  CorpusItem item;
  item.archetype = archetype;
  VideoTensor& v = item.clip = VideoTensor(frames, height, width, 3);
  const auto [fg, bg] = draw_colors(rng);
  const int dir = uniform_int(rng, 0, 3);
  const int size = std::max(4, std::min(height, width) / 3);
  const int y0 = uniform_int(rng, 0, height - size);
  const int x0 = uniform_int(rng, 0, width - size);
  const int speed = uniform_int(rng, 1, 3);
  const int dx = dir == 0 ? -speed : dir == 1 ? speed : 0;
  const int dy = dir == 2 ? -speed : dir == 3 ? speed : 0;
  const std::string fg_name = fg.name, bg_name = bg.name;

  switch (archetype) {
    case Archetype::Static:
    case Archetype::Translating: {
      // A square with a 2-pixel checker texture; translating clips wrap around the frame.
      for (int t = 0; t < frames; ++t) {
        const int oy = archetype == Archetype::Translating ? dy * t : 0;
        const int ox = archetype == Archetype::Translating ? dx * t : 0;
        for (int y = 0; y < height; ++y) {
          for (int x = 0; x < width; ++x) put(v, t, y, x, bg);
        }
        for (int sy = 0; sy < size; ++sy) {
          for (int sx = 0; sx < size; ++sx) {
            const bool dark = ((sy / 2) + (sx / 2)) % 2 == 1;
            put(v, t, wrap(y0 + sy + oy, height), wrap(x0 + sx + ox, width), dark ? bg : fg);
          }
        }
      }
      item.caption = archetype == Archetype::Static
                         ? "a static " + fg_name + " checkered square on a " + bg_name + " background"
                         : "a " + fg_name + " checkered square moving " + kDirections[dir] + " on a " + bg_name +
                               " background";
      break;
    }
    case Archetype::Oscillating: {
      const double period = uniform_int(rng, 4, 8);
      const double phase = uniform01(rng) * 2.0 * std::acos(-1.0);
      for (int t = 0; t < frames; ++t) {
        const double gain = 0.6 + 0.4 * std::cos(2.0 * std::acos(-1.0) * t / period + phase);
        for (int y = 0; y < height; ++y) {
          for (int x = 0; x < width; ++x) {
            const bool inside = y >= y0 && y < y0 + size && x >= x0 && x < x0 + size;
            put(v, t, y, x, inside ? fg : bg, gain);
          }
        }
      }
      item.caption = "a " + fg_name + " square pulsing in brightness on a " + bg_name + " background";
      break;
    }
    case Archetype::Gradient: {
      const double pi = std::acos(-1.0);
      const double wavelength = std::max(height, width);
      for (int t = 0; t < frames; ++t) {
        for (int y = 0; y < height; ++y) {
          for (int x = 0; x < width; ++x) {
            const double along = dy != 0 ? y - dy * t : x - dx * t;
            const double a = 0.5 + 0.5 * std::sin(2.0 * pi * along / wavelength);
            v.at(t, y, x, 0) = a * fg.r + (1.0 - a) * bg.r;
            v.at(t, y, x, 1) = a * fg.g + (1.0 - a) * bg.g;
            v.at(t, y, x, 2) = a * fg.b + (1.0 - a) * bg.b;
          }
        }
      }
      item.caption = "a " + fg_name + " to " + bg_name + " gradient drifting " + kDirections[dir];
      break;
    }
  }
  return item;
}

Corpus make_synthetic_corpus(const CorpusSpec& spec, Rng& rng) {
  validate_corpus_spec(spec);
  Corpus corpus;
  corpus.reserve(static_cast<std::size_t>(spec.videos + spec.images));
  const auto n_arch = spec.archetypes.size();
  for (int i = 0; i < spec.videos; ++i) {
    corpus.push_back(render_archetype(spec.archetypes[i % n_arch], spec.frames, spec.height, spec.width, rng));
  }
  for (int i = 0; i < spec.images; ++i) {
    corpus.push_back(render_archetype(spec.archetypes[i % n_arch], 1, spec.height, spec.width, rng));
  }
  return corpus;
}

VideoTensor fit_clip(const VideoTensor& clip, int frames, int height, int width, int start) {
  if (clip.frames <= 0 || clip.height <= 0 || clip.width <= 0) throw ShapeError("fit_clip: empty clip");
  if (frames <= 0 || height <= 0 || width <= 0) throw ShapeError("fit_clip: target size must be positive");
  if (start < 0 || start >= clip.frames) throw ShapeError("fit_clip: start frame out of range");
  VideoTensor out(frames, height, width, clip.channels);
  for (int t = 0; t < frames; ++t) {
    const int st = (start + t) % clip.frames;
    for (int y = 0; y < height; ++y) {
      const int sy = static_cast<int>(static_cast<long long>(y) * clip.height / height);
      for (int x = 0; x < width; ++x) {
        const int sx = static_cast<int>(static_cast<long long>(x) * clip.width / width);
        for (int c = 0; c < clip.channels; ++c) out.at(t, y, x, c) = clip.at(st, sy, sx, c);
      }
    }
  }
  return out;
}

}  // namespace mfm
