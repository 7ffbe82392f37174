#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "normlens/corpus.hpp"
#include "normlens/embeddings.hpp"

namespace normlens {

// Multinomial Naive Bayes in log-odds form: the classifier is an exact linear
// model over word counts, score = log_prior + sum_v count_v * log_ratio_v,
// with alpha-smoothed class-conditional word probabilities.
struct NaiveBayesModel {
  double log_prior = 0.0;  // log[P(C1)/P(C2)]
  std::unordered_map<std::string, double> log_ratios;  // log[p_{1,v}/p_{2,v}]
  double smoothing = 1.0;
};

inline NaiveBayesModel train_naive_bayes(const std::vector<CorpusRecord>& records,
                                         double alpha = 1.0) {
  long long n1 = 0, n0 = 0;
  std::unordered_map<std::string, std::pair<long long, long long>> counts;  // {class1, class0}
  long long total1 = 0, total0 = 0;
  for (const auto& r : records) {
    if (r.label == 1)
      ++n1;
    else
      ++n0;
    for (const auto& t : r.tokens) {
      auto& c = counts[t];
      if (r.label == 1) {
        ++c.first;
        ++total1;
      } else {
        ++c.second;
        ++total0;
      }
    }
  }
  if (n1 == 0 || n0 == 0) throw std::runtime_error("train_naive_bayes: single-class input");
  NaiveBayesModel model;
  model.smoothing = alpha;
  model.log_prior = std::log(static_cast<double>(n1) / static_cast<double>(n0));
  const double vocab = static_cast<double>(counts.size());
  for (const auto& [tok, c] : counts) {
    const double p1 = (c.first + alpha) / (total1 + alpha * vocab);
    const double p2 = (c.second + alpha) / (total0 + alpha * vocab);
    model.log_ratios.emplace(tok, std::log(p1 / p2));
  }
  return model;
}

// P(class 1 | tokens) = sigmoid(log_prior + sum count_v * log_ratio_v);
// unknown tokens are skipped.
inline double predict_nb(const NaiveBayesModel& model, const std::vector<std::string>& tokens) {
  double score = model.log_prior;
  for (const auto& t : tokens) {
    auto it = model.log_ratios.find(t);
    if (it != model.log_ratios.end()) score += it->second;
  }
  return sigmoid(score);
}

}  // namespace normlens
