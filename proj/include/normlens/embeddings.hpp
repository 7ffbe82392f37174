#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "normlens/rng.hpp"
#include "normlens/text.hpp"

namespace normlens {

struct SgnsConfig {
  int dim = 300;
  int window = 10;
  int negative = 5;
  int min_count = 10;
  int epochs = 5;
  double lr_start = 0.025;   // linear decay over total examples
  double lr_min = 1e-4;
  bool subsample = false;    // off by default
  double subsample_t = 1e-3;
  std::uint64_t seed = 1;
};

struct EmbeddingMatrix {
  std::vector<std::string> tokens;                 // row index -> token
  std::unordered_map<std::string, int> vocab;      // token -> row index
  std::vector<long long> counts;                   // corpus frequency per row
  std::vector<double> vectors;                     // |V| x dim, row major
  int dim = 0;
  bool normalized = false;

  std::size_t size() const { return tokens.size(); }
  bool has(const std::string& token) const { return vocab.count(token) > 0; }
  int index(const std::string& token) const {
    auto it = vocab.find(token);
    if (it == vocab.end()) throw std::runtime_error("unknown token: " + token);
    return it->second;
  }
  std::span<double> row(int i) { return {vectors.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)}; }
  std::span<const double> row(int i) const { return {vectors.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)}; }
  std::span<const double> row(const std::string& token) const { return row(index(token)); }

  void add_token(const std::string& token, long long count, const std::vector<double>& vec) {
    if (has(token)) throw std::runtime_error("token already present: " + token);
    if (static_cast<int>(vec.size()) != dim) throw std::runtime_error("dimension mismatch");
    vocab.emplace(token, static_cast<int>(tokens.size()));
    tokens.push_back(token);
    counts.push_back(count);
    vectors.insert(vectors.end(), vec.begin(), vec.end());
  }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// --- SGNS objective ----------------------------------------------------------
//
// For one positive (center, context) pair and k sampled negatives the loss is
//   -log sigmoid(v_c . u_o) - sum_j log sigmoid(-v_c . u_nj)
// with v the input (center) vectors and u the output (context) vectors.

inline double sgns_pair_loss(std::span<const double> center, std::span<const double> context,
                             const std::vector<std::span<const double>>& negatives) {
  auto dot = [](std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };
  double loss = -std::log(std::max(sigmoid(dot(center, context)), 1e-300));
  for (const auto& neg : negatives)
    loss += -std::log(std::max(sigmoid(-dot(center, neg)), 1e-300));
  return loss;
}

// Analytic gradient of sgns_pair_loss wrt the center, context and negative
// vectors. grad_* must be pre-sized and zeroed by the caller.
inline void sgns_pair_grad(std::span<const double> center, std::span<const double> context,
                           const std::vector<std::span<const double>>& negatives,
                           std::span<double> grad_center, std::span<double> grad_context,
                           std::vector<std::vector<double>>& grad_negatives) {
  auto dot = [](std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };
  const std::size_t d = center.size();
  const double g_pos = sigmoid(dot(center, context)) - 1.0;
  for (std::size_t i = 0; i < d; ++i) {
    grad_center[i] += g_pos * context[i];
    grad_context[i] += g_pos * center[i];
  }
  grad_negatives.assign(negatives.size(), std::vector<double>(d, 0.0));
  for (std::size_t j = 0; j < negatives.size(); ++j) {
    const double g_neg = sigmoid(dot(center, negatives[j]));
    for (std::size_t i = 0; i < d; ++i) {
      grad_center[i] += g_neg * negatives[j][i];
      grad_negatives[j][i] += g_neg * center[i];
    }
  }
}

namespace detail {

// negative-sampling table over unigram^0.75
inline std::vector<int> build_negative_table(const std::vector<long long>& counts,
                                             std::size_t table_size = 1 << 20) {
  std::vector<double> pow_counts(counts.size());
  double total = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    pow_counts[i] = std::pow(static_cast<double>(counts[i]), 0.75);
    total += pow_counts[i];
  }
  std::vector<int> table(table_size);
  std::size_t i = 0;
  double cum = pow_counts.empty() ? 0.0 : pow_counts[0] / total;
  for (std::size_t t = 0; t < table_size; ++t) {
    table[t] = static_cast<int>(i);
    if (static_cast<double>(t) / table_size > cum && i + 1 < counts.size()) {
      ++i;
      cum += pow_counts[i] / total;
    }
  }
  return table;
}

}  // namespace detail

// Trains skip-gram-with-negative-sampling vectors. Tokens below min_count are
// replaced by <rare>, which trains like any other token. Window is
// dynamic-uniform in [1, window] per center word. Single-threaded and
// deterministic given config.seed; epochs=0 returns the initialization.
class SkipGramTrainer {
 public:
  explicit SkipGramTrainer(SgnsConfig config) : cfg_(std::move(config)) {}

  EmbeddingMatrix train(const std::vector<std::vector<std::string>>& sentences,
                        std::vector<double>* loss_trace = nullptr) {
    build_vocab(sentences);
    if (emb_.tokens.empty()) throw std::runtime_error("train_skipgram: empty vocabulary");
    init_weights();
    if (cfg_.epochs <= 0) return finish();

    neg_table_ = detail::build_negative_table(emb_.counts);
    const long long total_words = total_count_ * cfg_.epochs;
    long long processed = 0;
    Rng rng(derive_seed(cfg_.seed, "sgns-train"));

    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
      for (const auto& sentence : sentences) {
        std::vector<int> ids = to_ids(sentence, rng);
        for (std::size_t pos = 0; pos < ids.size(); ++pos) {
          const double frac = std::min(1.0, static_cast<double>(processed) / std::max<long long>(1, total_words));
          const double lr = std::max(cfg_.lr_min, cfg_.lr_start * (1.0 - frac));
          ++processed;
          const int b = 1 + static_cast<int>(rng.uniform_int(cfg_.window));
          for (int off = -b; off <= b; ++off) {
            if (off == 0) continue;
            const long long cpos = static_cast<long long>(pos) + off;
            if (cpos < 0 || cpos >= static_cast<long long>(ids.size())) continue;
            const double loss = update_pair(ids[pos], ids[cpos], lr, rng);
            if (loss_trace) loss_trace->push_back(loss);
          }
        }
      }
    }
    return finish();
  }

 private:
  void build_vocab(const std::vector<std::vector<std::string>>& sentences) {
    std::unordered_map<std::string, long long> raw_counts;
    for (const auto& s : sentences)
      for (const auto& t : s) ++raw_counts[t];
    long long rare_count = 0;
    std::vector<std::pair<std::string, long long>> kept;
    for (const auto& [tok, c] : raw_counts) {
      if (c >= cfg_.min_count)
        kept.emplace_back(tok, c);
      else
        rare_count += c;
    }
    // frequency order (vocabulary order for tie-breaks), then lexicographic
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    emb_.dim = cfg_.dim;
    if (rare_count > 0 && !raw_counts.count(kRareToken))
      kept.emplace_back(kRareToken, rare_count);
    for (const auto& [tok, c] : kept) {
      emb_.vocab.emplace(tok, static_cast<int>(emb_.tokens.size()));
      emb_.tokens.push_back(tok);
      emb_.counts.push_back(c);
    }
    total_count_ = std::accumulate(emb_.counts.begin(), emb_.counts.end(), 0LL);
  }

  void init_weights() {
    Rng rng(derive_seed(cfg_.seed, "sgns-init"));
    const std::size_t n = emb_.tokens.size() * static_cast<std::size_t>(cfg_.dim);
    emb_.vectors.resize(n);
    for (auto& v : emb_.vectors) v = (rng.uniform() - 0.5) / cfg_.dim;
    syn1_.assign(n, 0.0);
  }

  std::vector<int> to_ids(const std::vector<std::string>& sentence, Rng& rng) {
    std::vector<int> ids;
    ids.reserve(sentence.size());
    const int rare = emb_.vocab.count(kRareToken) ? emb_.vocab.at(kRareToken) : -1;
    for (const auto& t : sentence) {
      auto it = emb_.vocab.find(t);
      int id = it != emb_.vocab.end() ? it->second : rare;
      if (id < 0) continue;
      if (cfg_.subsample) {
        const double f = static_cast<double>(emb_.counts[id]) / total_count_;
        const double keep = (std::sqrt(f / cfg_.subsample_t) + 1.0) * cfg_.subsample_t / f;
        if (keep < 1.0 && rng.uniform() > keep) continue;
      }
      ids.push_back(id);
    }
    return ids;
  }

  double update_pair(int center, int context, double lr, Rng& rng) {
    const int d = cfg_.dim;
    double* v = emb_.vectors.data() + static_cast<std::size_t>(center) * d;
    std::vector<double> grad_v(d, 0.0);
    double loss = 0.0;
    auto step_output = [&](int target, double label) {
      double* u = syn1_.data() + static_cast<std::size_t>(target) * d;
      double dot = 0.0;
      for (int i = 0; i < d; ++i) dot += v[i] * u[i];
      const double p = sigmoid(dot);
      loss += label > 0.5 ? -std::log(std::max(p, 1e-300)) : -std::log(std::max(1.0 - p, 1e-300));
      const double g = p - label;
      for (int i = 0; i < d; ++i) {
        grad_v[i] += g * u[i];
        u[i] -= lr * g * v[i];
      }
    };
    step_output(context, 1.0);
    for (int k = 0; k < cfg_.negative; ++k) {
      int neg = neg_table_[rng.uniform_int(neg_table_.size())];
      if (neg == context) continue;
      step_output(neg, 0.0);
    }
    for (int i = 0; i < d; ++i) v[i] -= lr * grad_v[i];
    return loss;
  }

  EmbeddingMatrix finish() {
    syn1_.clear();
    return std::move(emb_);
  }

  SgnsConfig cfg_;
  EmbeddingMatrix emb_;
  std::vector<double> syn1_;  // output (context) vectors, discarded after training
  std::vector<int> neg_table_;
  long long total_count_ = 0;
};

inline EmbeddingMatrix train_skipgram(const std::vector<std::vector<std::string>>& sentences,
                                      const SgnsConfig& config,
                                      std::vector<double>* loss_trace = nullptr) {
  return SkipGramTrainer(config).train(sentences, loss_trace);
}

// --- queries -----------------------------------------------------------------

// Row-wise L2 normalization. Zero rows stay zero; the return value counts them.
inline int normalize(EmbeddingMatrix& m) {
  int zero_rows = 0;
  for (std::size_t r = 0; r < m.size(); ++r) {
    auto row = m.row(static_cast<int>(r));
    double norm = 0.0;
    for (double x : row) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) {
      ++zero_rows;
      continue;
    }
    for (double& x : row) x /= norm;
  }
  m.normalized = true;
  return zero_rows;
}

// Unit-norm sum of the tokens' vectors; used for masked fictive tokens and
// the blank sentinel.
inline std::vector<double> merge_vectors(const std::vector<std::string>& merge_tokens,
                                         const EmbeddingMatrix& m) {
  if (merge_tokens.empty()) throw std::runtime_error("merge_vectors: empty token list");
  std::vector<double> sum(m.dim, 0.0);
  for (const auto& t : merge_tokens) {
    auto row = m.row(t);  // throws naming the token when unknown
    for (int i = 0; i < m.dim; ++i) sum[i] += row[i];
  }
  double norm = 0.0;
  for (double x : sum) norm += x * x;
  norm = std::sqrt(norm);
  if (norm > 0.0)
    for (double& x : sum) x /= norm;
  return sum;
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

struct Neighbor {
  std::string token;
  double similarity;
};

namespace detail {

inline std::vector<Neighbor> rank_by_cosine(const EmbeddingMatrix& m,
                                            std::span<const double> query, int k,
                                            const std::vector<int>& excluded) {
  std::vector<Neighbor> all;
  all.reserve(m.size());
  for (std::size_t r = 0; r < m.size(); ++r) {
    if (std::find(excluded.begin(), excluded.end(), static_cast<int>(r)) != excluded.end())
      continue;
    all.push_back({m.tokens[r], cosine(query, m.row(static_cast<int>(r)))});
  }
  // ties broken by vocabulary order; stable_sort keeps insertion (row) order
  std::stable_sort(all.begin(), all.end(),
                   [](const Neighbor& a, const Neighbor& b) { return a.similarity > b.similarity; });
  if (k >= 0 && static_cast<std::size_t>(k) < all.size()) all.resize(k);
  return all;
}

}  // namespace detail

inline std::vector<Neighbor> nearest_neighbors(const std::string& token, int k,
                                               const EmbeddingMatrix& m) {
  const int idx = m.index(token);
  if (k <= 0) return {};
  return detail::rank_by_cosine(m, m.row(idx), k, {idx});
}

// argmax cosine(v_b - v_a + v_c, .) excluding {a, b, c}
inline std::string analogy(const std::string& a, const std::string& b, const std::string& c,
                           const EmbeddingMatrix& m) {
  const int ia = m.index(a), ib = m.index(b), ic = m.index(c);
  std::vector<double> query(m.dim);
  for (int i = 0; i < m.dim; ++i) query[i] = m.row(ib)[i] - m.row(ia)[i] + m.row(ic)[i];
  auto ranked = detail::rank_by_cosine(m, query, 1, {ia, ib, ic});
  if (ranked.empty()) throw std::runtime_error("analogy: vocabulary too small");
  return ranked[0].token;
}

// --- persistence (word2vec text format + counts sidecar) ---------------------

inline void save_embeddings(const EmbeddingMatrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.precision(17);
  out << m.size() << " " << m.dim << "\n";
  for (std::size_t r = 0; r < m.size(); ++r) {
    out << m.tokens[r];
    for (double x : m.row(static_cast<int>(r))) out << " " << x;
    out << "\n";
  }
  std::ofstream counts(path + ".counts");
  for (std::size_t r = 0; r < m.size(); ++r)
    counts << m.tokens[r] << " " << m.counts[r] << "\n";
}

inline EmbeddingMatrix load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::size_t n;
  EmbeddingMatrix m;
  in >> n >> m.dim;
  m.vectors.resize(n * static_cast<std::size_t>(m.dim));
  m.tokens.resize(n);
  m.counts.assign(n, 0);
  for (std::size_t r = 0; r < n; ++r) {
    in >> m.tokens[r];
    m.vocab.emplace(m.tokens[r], static_cast<int>(r));
    for (int i = 0; i < m.dim; ++i) in >> m.vectors[r * m.dim + i];
  }
  std::ifstream counts(path + ".counts");
  if (counts) {
    std::string tok;
    long long c;
    while (counts >> tok >> c)
      if (m.vocab.count(tok)) m.counts[m.vocab.at(tok)] = c;
  }
  return m;
}

}  // namespace normlens
