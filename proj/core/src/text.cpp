#include "mfm/text.hpp"

#include <cmath>
#include <sstream>

#include "mfm/error.hpp"
#include "mfm/hash.hpp"
#include "mfm/rng.hpp"

namespace mfm {

std::vector<std::string> tokenize(std::string_view prompt) {
  std::vector<std::string> out;
  std::istringstream in{std::string(prompt)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

bool is_null_prompt(std::string_view prompt) { return tokenize(prompt).empty(); }

TextEmbedding embed_text(std::string_view prompt, int text_dim, int max_len) {
  if (text_dim <= 0) throw ValidationError("text_dim must be positive");
  if (max_len < 2) throw ValidationError("max text length must be at least 2");
  TextEmbedding e;
  e.dim = text_dim;
  auto tokens = tokenize(prompt);
  if (tokens.empty()) {
    e.is_null = true;
    e.length = 1;
    e.data.assign(static_cast<std::size_t>(text_dim), 0.0);
    return e;
  }
  if (tokens.size() > static_cast<std::size_t>(max_len)) {
    std::vector<std::string> kept(tokens.begin(), tokens.begin() + (max_len - 2));
    kept.insert(kept.end(), tokens.end() - 2, tokens.end());
    tokens = std::move(kept);
  }
  e.length = static_cast<int>(tokens.size());
  e.data.resize(tokens.size() * static_cast<std::size_t>(text_dim));
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    Rng rng(splitmix64(fnv1a64(tokens[i])));
    double* row = e.data.data() + i * text_dim;
    double norm = 0.0;
    for (int j = 0; j < text_dim; ++j) {
      row[j] = standard_normal(rng);
      norm += row[j] * row[j];
    }
    norm = std::sqrt(norm);
    for (int j = 0; j < text_dim; ++j) row[j] /= norm;
  }
  return e;
}

}  // namespace mfm
