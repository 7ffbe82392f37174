#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "normlens/embeddings.hpp"
#include "normlens/text.hpp"

namespace normlens {

inline constexpr int kFixedInputLength = 25;

// Right-pads with the PAD token, whose embedding is all-zeros.
inline std::vector<std::string> pad_sequence(std::vector<std::string> tokens,
                                             std::size_t target_len) {
  if (tokens.size() > target_len)
    throw std::runtime_error("pad_sequence: sequence longer than target length");
  tokens.resize(target_len, kPadToken);
  return tokens;
}

// Token row indices for a padded sequence: PAD -> -1 (zero vector), unknown
// tokens -> the <rare> row (or -1 when the vocabulary has none).
inline std::vector<int> sequence_to_ids(const std::vector<std::string>& tokens,
                                        const EmbeddingMatrix& emb) {
  const int rare = emb.has(kRareToken) ? emb.index(kRareToken) : -1;
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (t == kPadToken) {
      ids.push_back(-1);
      continue;
    }
    auto it = emb.vocab.find(t);
    ids.push_back(it != emb.vocab.end() ? it->second : rare);
  }
  return ids;
}

// Dense t x d input matrix for one sequence.
inline std::vector<std::vector<double>> embed_sequence(const std::vector<std::string>& tokens,
                                                       const EmbeddingMatrix& emb) {
  std::vector<std::vector<double>> x;
  x.reserve(tokens.size());
  for (int id : sequence_to_ids(tokens, emb)) {
    if (id < 0) {
      x.emplace_back(emb.dim, 0.0);
    } else {
      auto row = emb.row(id);
      x.emplace_back(row.begin(), row.end());
    }
  }
  return x;
}

}  // namespace normlens
