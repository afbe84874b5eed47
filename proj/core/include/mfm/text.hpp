#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mfm {

/// Hashed-token text embedding standing in for an LLM text encoder.
///
/// Each whitespace token seeds a fixed pseudo-random unit vector. The null
/// prompt (empty or whitespace only) yields a single placeholder row that the
/// model replaces with its learned null vector.
struct TextEmbedding {
  int length = 0;
  int dim = 0;
  bool is_null = false;
  std::vector<double> data;  // [length, dim]

  bool operator==(const TextEmbedding&) const = default;
};

std::vector<std::string> tokenize(std::string_view prompt);

/// Prompts longer than `max_len` tokens keep their head and the two-token task suffix.
TextEmbedding embed_text(std::string_view prompt, int text_dim, int max_len = 64);

bool is_null_prompt(std::string_view prompt);

}  // namespace mfm
