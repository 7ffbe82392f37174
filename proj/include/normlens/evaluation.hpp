#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "normlens/corpus.hpp"
#include "normlens/rng.hpp"

namespace normlens {

struct PredictionRecord {
  std::string id;
  std::string user;
  int day = 0;  // days since panel start
  double score = 0.5;
  int label = 0;
  int predicted = 0;
  std::vector<std::string> tokens;
};

struct MetricReport {
  double roc_auc = 0.0;
  double accuracy = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double threshold = 0.5;
  std::string sample = "unbalanced";
};

// Mann-Whitney formulation: P(score_pos > score_neg) with ties counted 1/2.
// Computed from midranks, so exact under ties.
inline double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw std::runtime_error("roc_auc: size mismatch");
  std::size_t n1 = 0, n0 = 0;
  for (int l : labels) (l == 1 ? n1 : n0) += 1;
  if (n1 == 0 || n0 == 0) throw std::runtime_error("roc_auc: one class absent");
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = (static_cast<double>(i) + static_cast<double>(j) + 1.0) / 2.0;  // 1-based
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) rank_sum_pos += midrank;
    i = j;
  }
  const double u = rank_sum_pos - static_cast<double>(n1) * (n1 + 1) / 2.0;
  return u / (static_cast<double>(n1) * static_cast<double>(n0));
}

inline MetricReport confusion_metrics(const std::vector<PredictionRecord>& preds) {
  if (preds.empty()) throw std::runtime_error("confusion_metrics: empty input");
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  for (const auto& p : preds) {
    if (p.label == 1)
      (p.predicted == 1 ? tp : fn) += 1;
    else
      (p.predicted == 0 ? tn : fp) += 1;
  }
  MetricReport r;
  r.accuracy = static_cast<double>(tp + tn) / preds.size();
  r.sensitivity = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn);
  r.specificity = tn + fp == 0 ? 0.0 : static_cast<double>(tn) / (tn + fp);
  return r;
}

// Candidate cutoffs are midpoints between adjacent distinct sorted scores,
// plus 0 and 1. predicted = 1 iff score >= threshold. Ties between equally
// good candidates go to the lower threshold.
inline double choose_threshold(const std::vector<double>& scores, const std::vector<int>& labels,
                               const std::string& objective) {
  if (scores.size() != labels.size() || scores.empty())
    throw std::runtime_error("choose_threshold: bad input");
  if (objective != "accuracy" && objective != "balanced")
    throw std::runtime_error("choose_threshold: unknown objective " + objective);
  std::vector<double> uniq = scores;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  std::vector<double> candidates = {0.0};
  for (std::size_t i = 0; i + 1 < uniq.size(); ++i)
    candidates.push_back((uniq[i] + uniq[i + 1]) / 2.0);
  candidates.push_back(1.0);
  std::sort(candidates.begin(), candidates.end());

  double n1 = 0, n0 = 0;
  for (int l : labels) (l == 1 ? n1 : n0) += 1;

  double best = candidates.front(), best_obj = -1.0;
  for (double t : candidates) {
    double tp = 0, tn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= t) {
        if (labels[i] == 1) tp += 1;
      } else if (labels[i] == 0) {
        tn += 1;
      }
    }
    double obj;
    if (objective == "accuracy") {
      obj = (tp + tn) / static_cast<double>(scores.size());
    } else {
      const double sens = n1 == 0 ? 0.0 : tp / n1;
      const double spec = n0 == 0 ? 0.0 : tn / n0;
      obj = std::min(sens, spec);
    }
    if (obj > best_obj) {
      best_obj = obj;
      best = t;
    }
  }
  return best;
}

// Throw away excess majority records (at random, per seed) until the class
// counts match. Minority records are untouched; relative order is preserved.
template <typename Record>
std::vector<Record> balanced_subsample(const std::vector<Record>& records, std::uint64_t seed) {
  std::vector<std::size_t> idx1, idx0;
  for (std::size_t i = 0; i < records.size(); ++i)
    (records[i].label == 1 ? idx1 : idx0).push_back(i);
  if (idx1.empty() || idx0.empty()) throw std::runtime_error("balanced_subsample: one class absent");
  auto& maj = idx1.size() > idx0.size() ? idx1 : idx0;
  const std::size_t keep = std::min(idx1.size(), idx0.size());
  Rng rng(derive_seed(seed, "balanced-subsample"));
  rng.shuffle(maj);
  maj.resize(keep);
  std::vector<std::size_t> all = idx1;
  all.insert(all.end(), idx0.begin(), idx0.end());
  std::sort(all.begin(), all.end());
  std::vector<Record> out;
  out.reserve(all.size());
  for (std::size_t i : all) out.push_back(records[i]);
  return out;
}

// Word Color: per-token median predicted probability over all records that
// contain the token (counted once per record). Even counts take the lower
// median. Returned sorted by descending color, ties by token.
inline std::vector<std::pair<std::string, double>> word_color(
    const std::vector<PredictionRecord>& preds) {
  std::unordered_map<std::string, std::vector<double>> scores;
  std::vector<std::string> seen;
  for (const auto& p : preds) {
    seen.assign(p.tokens.begin(), p.tokens.end());
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    for (const auto& t : seen) scores[t].push_back(p.score);
  }
  std::vector<std::pair<std::string, double>> out;
  out.reserve(scores.size());
  for (auto& [tok, v] : scores) {
    std::sort(v.begin(), v.end());
    out.emplace_back(tok, v[(v.size() - 1) / 2]);  // lower median
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return out;
}

struct WordDiffRow {
  std::string token;
  long long count_a = 0;
  long long count_b = 0;
  double acc_a = 0.0;
  double acc_b = 0.0;
  double diff = 0.0;  // acc_a - acc_b
  int bin = 0;        // diff bin index, 0 = most positive
};

// Per-token mean accuracy in two prediction sets; diff = acc_a - acc_b is
// discretized into `bins` groups of `bin_width` steps starting at the maximum
// observed diff, and within each bin the top_k most frequent period-A tokens
// are kept. Tokens with fewer than min_support records in either period drop.
inline std::vector<WordDiffRow> accuracy_diff_by_word(const std::vector<PredictionRecord>& preds_a,
                                                      const std::vector<PredictionRecord>& preds_b,
                                                      double bin_width = 0.005, int bins = 20,
                                                      int top_k = 10, int min_support = 5) {
  auto tally = [](const std::vector<PredictionRecord>& preds) {
    std::unordered_map<std::string, std::pair<long long, long long>> t;  // {records, correct}
    std::vector<std::string> seen;
    for (const auto& p : preds) {
      seen.assign(p.tokens.begin(), p.tokens.end());
      std::sort(seen.begin(), seen.end());
      seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
      const long long correct = p.predicted == p.label ? 1 : 0;
      for (const auto& tok : seen) {
        auto& c = t[tok];
        ++c.first;
        c.second += correct;
      }
    }
    return t;
  };
  const auto ta = tally(preds_a);
  const auto tb = tally(preds_b);

  std::vector<WordDiffRow> rows;
  for (const auto& [tok, ca] : ta) {
    auto it = tb.find(tok);
    if (it == tb.end()) continue;
    if (ca.first < min_support || it->second.first < min_support) continue;
    WordDiffRow r;
    r.token = tok;
    r.count_a = ca.first;
    r.count_b = it->second.first;
    r.acc_a = static_cast<double>(ca.second) / ca.first;
    r.acc_b = static_cast<double>(it->second.second) / it->second.first;
    r.diff = r.acc_a - r.acc_b;
    rows.push_back(std::move(r));
  }
  if (rows.empty()) return rows;
  double max_diff = rows.front().diff;
  for (const auto& r : rows) max_diff = std::max(max_diff, r.diff);
  for (auto& r : rows) {
    int b = static_cast<int>(std::floor((max_diff - r.diff) / bin_width));
    r.bin = std::clamp(b, 0, bins - 1);
  }

  // keep the top_k most frequent period-A tokens per bin
  std::stable_sort(rows.begin(), rows.end(), [](const WordDiffRow& a, const WordDiffRow& b) {
    if (a.bin != b.bin) return a.bin < b.bin;
    if (a.count_a != b.count_a) return a.count_a > b.count_a;
    return a.token < b.token;
  });
  std::vector<WordDiffRow> out;
  int current_bin = -1, kept = 0;
  for (auto& r : rows) {
    if (r.bin != current_bin) {
      current_bin = r.bin;
      kept = 0;
    }
    if (kept < top_k) {
      out.push_back(std::move(r));
      ++kept;
    }
  }
  return out;
}

// --- prediction file I/O -----------------------------------------------------

inline void write_predictions(const std::vector<PredictionRecord>& preds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (const auto& p : preds) {
    nlohmann::json j = {{"id", p.id},       {"user", p.user},           {"day", p.day},
                        {"score", p.score}, {"label", p.label},         {"predicted", p.predicted},
                        {"tokens", p.tokens}};
    out << j.dump() << "\n";
  }
}

inline std::vector<PredictionRecord> read_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<PredictionRecord> preds;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    PredictionRecord p;
    p.id = j.at("id");
    p.user = j.at("user");
    p.day = j.at("day");
    p.score = j.at("score");
    p.label = j.at("label");
    p.predicted = j.at("predicted");
    if (j.contains("tokens")) p.tokens = j.at("tokens").get<std::vector<std::string>>();
    preds.push_back(std::move(p));
  }
  return preds;
}

inline void write_metric_report(const MetricReport& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "metric,value\n";
  out << "roc_auc," << r.roc_auc << "\n";
  out << "accuracy," << r.accuracy << "\n";
  out << "sensitivity," << r.sensitivity << "\n";
  out << "specificity," << r.specificity << "\n";
  out << "threshold," << r.threshold << "\n";
  out << "sample," << r.sample << "\n";
}

inline void write_word_color(const std::vector<std::pair<std::string, double>>& wc,
                             const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "token,word_color\n";
  for (const auto& [tok, c] : wc) out << tok << "," << c << "\n";
}

inline void write_word_diff(const std::vector<WordDiffRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "bin,token,count_a,count_b,acc_a,acc_b,diff\n";
  for (const auto& r : rows)
    out << r.bin << "," << r.token << "," << r.count_a << "," << r.count_b << "," << r.acc_a << ","
        << r.acc_b << "," << r.diff << "\n";
}

}  // namespace normlens
