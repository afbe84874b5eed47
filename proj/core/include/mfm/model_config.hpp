#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>

namespace mfm {

/// Transformer and adapter hyper-parameters.
struct ModelConfig {
  std::string name = "toy";
  int layers = 2;
  int heads = 4;
  int head_dim = 16;
  int ffn_dim = 256;
  int text_dim = 64;
  int latent_channels = 48;
  int adapter_width = 16;
  int max_text_len = 32;
  double rope_base = 10000.0;
  double norm_eps = 1e-6;

  int model_dim() const { return heads * head_dim; }
  bool operator==(const ModelConfig&) const = default;
};

/// "toy", "2B" or "8B"; throws ValidationError for other names.
ModelConfig model_preset(std::string_view name);

/// Throws ValidationError when an invariant fails (e.g. head_dim not a multiple of 16).
void validate_config(const ModelConfig& config);

/// Plain "key = value" text, one field per line.
std::string config_to_text(const ModelConfig& config);
ModelConfig config_from_text(std::string_view text);
void save_config(const std::filesystem::path& path, const ModelConfig& config);
ModelConfig load_config(const std::filesystem::path& path);

/// Analytic parameter counts matching the tensors the modules allocate.
std::size_t backbone_parameter_count(const ModelConfig& config);
std::size_t adapter_parameter_count(const ModelConfig& config);

}  // namespace mfm
