#include "mfm/model_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "mfm/conditioning.hpp"
#include "mfm/error.hpp"

namespace mfm {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

int parse_int(const std::string& key, const std::string& value) {
  int out = 0;
  const auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || p != value.data() + value.size()) {
    throw ValidationError("config key '" + key + "' expects an integer, got '" + value + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ValidationError("config key '" + key + "' expects a number, got '" + value + "'");
  }
}

}  // namespace

ModelConfig model_preset(std::string_view name) {
  ModelConfig c;
  if (name == "toy") return c;
  if (name == "2B" || name == "8B") {
    const bool big = name == "8B";
    c.name = std::string(name);
    c.layers = big ? 40 : 28;
    c.heads = big ? 48 : 28;
    c.head_dim = 64;
    c.ffn_dim = big ? 12288 : 7168;
    c.text_dim = 2048;
    c.latent_channels = 16;
    c.adapter_width = 4;
    c.max_text_len = 256;
    return c;
  }
  throw ValidationError("unknown model preset '" + std::string(name) + "' (expected toy, 2B or 8B)");
}

void validate_config(const ModelConfig& c) {
  auto positive = [](int v, const char* what) {
    if (v <= 0) throw ValidationError(std::string(what) + " must be positive");
  };
  positive(c.layers, "layers");
  positive(c.heads, "heads");
  positive(c.head_dim, "head_dim");
  positive(c.ffn_dim, "ffn_dim");
  positive(c.text_dim, "text_dim");
  positive(c.latent_channels, "latent_channels");
  positive(c.adapter_width, "adapter_width");
  positive(c.max_text_len, "max_text_len");
  if (c.head_dim % 16 != 0) {
    throw ValidationError("head_dim must be a multiple of 16 for the 2/8-3/8-3/8 rotary split, got " +
                          std::to_string(c.head_dim));
  }
  if (c.latent_channels > 192) {
    throw ValidationError("latent_channels cannot exceed the 192 folded channels of an RGB 8x8 patch");
  }
  if (c.model_dim() % 2 != 0) throw ValidationError("model_dim must be even");
  if (!(c.rope_base > 1.0)) throw ValidationError("rope_base must exceed 1");
  if (!(c.norm_eps > 0.0)) throw ValidationError("norm_eps must be positive");
}

std::string config_to_text(const ModelConfig& c) {
  std::ostringstream out;
  out.precision(17);
  out << "name = " << c.name << "\n"
      << "layers = " << c.layers << "\n"
      << "heads = " << c.heads << "\n"
      << "head_dim = " << c.head_dim << "\n"
      << "ffn_dim = " << c.ffn_dim << "\n"
      << "cross_attn_dims = " << c.model_dim() << "," << c.text_dim << "\n"
      << "text_dim = " << c.text_dim << "\n"
      << "latent_channels = " << c.latent_channels << "\n"
      << "adapter_width = " << c.adapter_width << "\n"
      << "max_text_len = " << c.max_text_len << "\n"
      << "rope_base = " << c.rope_base << "\n"
      << "norm_eps = " << c.norm_eps << "\n";
  return out.str();
}

ModelConfig config_from_text(std::string_view text) {
  ModelConfig c;
  std::string cross;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(stripped).substr(0, eq));
    const std::string value = trim(std::string_view(stripped).substr(eq + 1));
    if (key == "name") c.name = value;
    else if (key == "layers") c.layers = parse_int(key, value);
    else if (key == "heads") c.heads = parse_int(key, value);
    else if (key == "head_dim") c.head_dim = parse_int(key, value);
    else if (key == "ffn_dim") c.ffn_dim = parse_int(key, value);
    else if (key == "text_dim") c.text_dim = parse_int(key, value);
    else if (key == "latent_channels") c.latent_channels = parse_int(key, value);
    else if (key == "adapter_width") c.adapter_width = parse_int(key, value);
    else if (key == "max_text_len") c.max_text_len = parse_int(key, value);
    else if (key == "rope_base") c.rope_base = parse_double(key, value);
    else if (key == "norm_eps") c.norm_eps = parse_double(key, value);
    else if (key == "cross_attn_dims") cross = value;
    else throw ValidationError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  if (!cross.empty()) {
    const auto comma = cross.find(',');
    if (comma == std::string::npos) throw ValidationError("cross_attn_dims expects 'model_dim,text_dim'");
    const int md = parse_int("cross_attn_dims", trim(std::string_view(cross).substr(0, comma)));
    const int td = parse_int("cross_attn_dims", trim(std::string_view(cross).substr(comma + 1)));
    if (md != c.model_dim() || td != c.text_dim) {
      throw ValidationError("cross_attn_dims (" + cross + ") disagrees with heads*head_dim and text_dim");
    }
  }
  validate_config(c);
  return c;
}

void save_config(const std::filesystem::path& path, const ModelConfig& config) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << config_to_text(config);
}

ModelConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_text(ss.str());
}

std::size_t backbone_parameter_count(const ModelConfig& c) {
  const std::size_t D = static_cast<std::size_t>(c.model_dim());
  const std::size_t F = static_cast<std::size_t>(c.ffn_dim);
  const std::size_t S = static_cast<std::size_t>(c.text_dim);
  const std::size_t L = static_cast<std::size_t>(c.latent_channels);
  const std::size_t d = static_cast<std::size_t>(c.head_dim);
  const std::size_t per_block = (D * 6 * D + 6 * D)        // AdaLN
                                + 4 * (D * D + D) + 2 * d  // self-attention + QK-Norm gains
                                + 2 * (D * D + D) + 2 * (S * D + D)  // cross-attention
                                + (D * F + F) + (F * D + D);         // FFN
  const std::size_t embed = (L * D + D) + 2 * (D * D + D);
  const std::size_t final_layer = (D * 2 * D + 2 * D) + (D * L + L);
  return embed + static_cast<std::size_t>(c.layers) * per_block + final_layer + S;
}

std::size_t adapter_parameter_count(const ModelConfig& c) {
  const std::size_t w = static_cast<std::size_t>(c.adapter_width);
  const std::size_t out = static_cast<std::size_t>(c.latent_channels);
  const std::size_t k = 27;
  return (k * kConditionChannels * w + w) + 2 * (k * w * w + w) + (k * w * out + out);
}

}  // namespace mfm
