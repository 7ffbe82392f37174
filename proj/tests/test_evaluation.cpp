#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "normlens/evaluation.hpp"

using namespace normlens;

namespace {

PredictionRecord pred(double score, int label, int predicted,
                      std::vector<std::string> tokens = {}) {
  PredictionRecord p;
  p.score = score;
  p.label = label;
  p.predicted = predicted;
  p.tokens = std::move(tokens);
  return p;
}

// brute-force P(score_pos > score_neg) with ties as 1/2
double auc_oracle(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  long long pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j])
        wins += 1.0;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  }
  return wins / pairs;
}

double threshold_accuracy(const std::vector<double>& scores, const std::vector<int>& labels,
                          double t) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    correct += (scores[i] >= t ? 1 : 0) == labels[i];
  return static_cast<double>(correct) / scores.size();
}

}  // namespace

TEST_CASE("roc_auc hand examples") {
  CHECK(roc_auc({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}) == 1.0);
  CHECK(roc_auc({0.9, 0.8, 0.2, 0.1}, {0, 0, 1, 1}) == 0.0);
  CHECK(roc_auc({0.5, 0.5, 0.5, 0.5}, {0, 0, 1, 1}) == 0.5);
  CHECK(roc_auc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) == doctest::Approx(0.75));
}

TEST_CASE("roc_auc matches the pairwise oracle on random inputs") {
  Rng rng(99);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 5 + rng.uniform_int(45);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    bool has0 = false, has1 = false;
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = std::round(rng.uniform() * 10) / 10.0;  // force ties
      labels[i] = static_cast<int>(rng.uniform_int(2));
      (labels[i] ? has1 : has0) = true;
    }
    if (!has0 || !has1) continue;
    CHECK(roc_auc(scores, labels) == doctest::Approx(auc_oracle(scores, labels)).epsilon(1e-12));
  }
}

TEST_CASE("roc_auc invariances and errors") {
  const std::vector<double> scores{0.1, 0.4, 0.35, 0.8, 0.6};
  const std::vector<int> labels{0, 0, 1, 1, 0};
  const double base = roc_auc(scores, labels);
  // monotone transform invariance
  std::vector<double> squashed;
  for (double s : scores) squashed.push_back(1.0 / (1.0 + std::exp(-5 * s)));
  CHECK(roc_auc(squashed, labels) == doctest::Approx(base).epsilon(1e-12));
  // complement identity: flipping labels gives 1 - auc
  std::vector<int> flipped;
  for (int l : labels) flipped.push_back(1 - l);
  CHECK(roc_auc(scores, flipped) == doctest::Approx(1.0 - base).epsilon(1e-12));

  CHECK_THROWS(roc_auc({0.5}, {0, 1}));
  CHECK_THROWS(roc_auc({0.5, 0.6}, {1, 1}));
}

TEST_CASE("confusion_metrics hand count") {
  std::vector<PredictionRecord> preds{pred(0.9, 1, 1), pred(0.4, 1, 0), pred(0.3, 0, 0),
                                      pred(0.2, 0, 0)};
  auto r = confusion_metrics(preds);
  CHECK(r.accuracy == doctest::Approx(0.75));
  CHECK(r.sensitivity == doctest::Approx(0.5));
  CHECK(r.specificity == doctest::Approx(1.0));
  CHECK_THROWS(confusion_metrics({}));
}

TEST_CASE("choose_threshold matches an exhaustive grid search") {
  Rng rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 20 + rng.uniform_int(30);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = static_cast<int>(rng.uniform_int(2));
      scores[i] = std::clamp(0.3 + 0.4 * labels[i] + rng.gaussian() * 0.2, 0.0, 1.0);
    }
    const double t = choose_threshold(scores, labels, "accuracy");
    const double acc = threshold_accuracy(scores, labels, t);
    for (double g = 0.0; g <= 1.0001; g += 0.001)
      CHECK(acc >= threshold_accuracy(scores, labels, g) - 1e-12);
  }
}

TEST_CASE("choose_threshold separates a separable set perfectly") {
  const std::vector<double> scores{0.1, 0.2, 0.3, 0.7, 0.8, 0.9};
  const std::vector<int> labels{0, 0, 0, 1, 1, 1};
  const double t = choose_threshold(scores, labels, "accuracy");
  CHECK(threshold_accuracy(scores, labels, t) == 1.0);
  CHECK(t > 0.3);
  CHECK(t <= 0.7);
}

TEST_CASE("accuracy at the chosen threshold beats the majority share") {
  Rng rng(13);
  std::vector<double> scores;
  std::vector<int> labels;
  for (int i = 0; i < 200; ++i) {
    labels.push_back(i < 150 ? 0 : 1);
    scores.push_back(rng.uniform());
  }
  const double t = choose_threshold(scores, labels, "accuracy");
  CHECK(threshold_accuracy(scores, labels, t) >= 0.75);  // majority share
}

TEST_CASE("balanced objective equalizes sensitivity and specificity on symmetric data") {
  std::vector<double> scores;
  std::vector<int> labels;
  for (int i = 0; i < 50; ++i) {
    scores.push_back(0.3 + i * 0.001);
    labels.push_back(0);
    scores.push_back(0.7 - i * 0.001);
    labels.push_back(1);
  }
  const double t = choose_threshold(scores, labels, "balanced");
  std::vector<PredictionRecord> preds;
  for (std::size_t i = 0; i < scores.size(); ++i)
    preds.push_back(pred(scores[i], labels[i], scores[i] >= t ? 1 : 0));
  auto r = confusion_metrics(preds);
  CHECK(std::abs(r.sensitivity - r.specificity) <= 0.02);
  CHECK_THROWS(choose_threshold(scores, labels, "f1"));
}

TEST_CASE("balanced_subsample equalizes class counts deterministically") {
  std::vector<PredictionRecord> preds;
  for (int i = 0; i < 100; ++i)
    preds.push_back(pred(0.5, i < 75 ? 0 : 1, 0, {"t" + std::to_string(i)}));
  for (int i = 0; i < 100; ++i) preds[i].id = "p" + std::to_string(i);
  auto sub = balanced_subsample(preds, 5);
  std::size_t n1 = 0, n0 = 0;
  for (const auto& p : sub) (p.label == 1 ? n1 : n0) += 1;
  CHECK(n1 == 25);
  CHECK(n0 == 25);
  // original order preserved and deterministic
  auto again = balanced_subsample(preds, 5);
  REQUIRE(again.size() == sub.size());
  for (std::size_t i = 0; i + 1 < sub.size(); ++i) {
    CHECK(sub[i].id == again[i].id);
    CHECK(std::stoi(sub[i].id.substr(1)) < std::stoi(sub[i + 1].id.substr(1)));
  }
  // an already balanced input passes through whole
  std::vector<PredictionRecord> even{pred(0.1, 0, 0), pred(0.9, 1, 1)};
  CHECK(balanced_subsample(even, 1).size() == 2);
}

TEST_CASE("word_color takes the lower median per token") {
  std::vector<PredictionRecord> preds{pred(0.2, 1, 1, {"hem"}), pred(0.8, 1, 1, {"hem"}),
                                      pred(0.5, 1, 1, {"hem"}), pred(0.9, 1, 1, {"bil"})};
  auto wc = word_color(preds);
  REQUIRE(wc.size() == 2);
  CHECK(wc[0].first == "bil");  // sorted by descending color
  CHECK(wc[0].second == doctest::Approx(0.9));
  CHECK(wc[1].second == doctest::Approx(0.5));  // odd count: exact median

  // even count takes the lower of the two central values
  std::vector<PredictionRecord> even{pred(0.2, 1, 1, {"x"}), pred(0.6, 1, 1, {"x"})};
  CHECK(word_color(even)[0].second == doctest::Approx(0.2));

  // a token repeated inside one record counts once
  std::vector<PredictionRecord> repeated{pred(0.3, 1, 1, {"y", "y"}), pred(0.7, 1, 1, {"y"})};
  CHECK(word_color(repeated)[0].second == doctest::Approx(0.3));
}

TEST_CASE("word_color is invariant to record order") {
  std::vector<PredictionRecord> preds{pred(0.1, 0, 0, {"a", "b"}), pred(0.4, 1, 0, {"b"}),
                                      pred(0.7, 1, 1, {"a"})};
  auto base = word_color(preds);
  std::reverse(preds.begin(), preds.end());
  CHECK(word_color(preds) == base);
}

TEST_CASE("accuracy_diff_by_word") {
  auto batch = [](int correct_of_6, const std::string& tok) {
    std::vector<PredictionRecord> out;
    for (int i = 0; i < 6; ++i) out.push_back(pred(0.5, 1, i < correct_of_6 ? 1 : 0, {tok}));
    return out;
  };

  SUBCASE("identical inputs give zero diffs") {
    auto a = batch(4, "w");
    auto rows = accuracy_diff_by_word(a, a);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].diff == 0.0);
    CHECK(rows[0].bin == 0);
  }

  SUBCASE("all-correct vs all-wrong spans the full range") {
    auto rows = accuracy_diff_by_word(batch(6, "w"), batch(0, "w"));
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].diff == doctest::Approx(1.0));
  }

  SUBCASE("min_support excludes thin tokens") {
    auto a = batch(6, "w");
    auto thin = batch(6, "w");
    thin.resize(3);  // only 3 period-B records
    CHECK(accuracy_diff_by_word(a, thin).empty());
  }

  SUBCASE("top_k keeps the most frequent period-A tokens in a bin") {
    std::vector<PredictionRecord> a, b;
    for (int tok = 0; tok < 5; ++tok) {
      const std::string name = "t" + std::to_string(tok);
      for (int i = 0; i < 5 + tok; ++i) {
        a.push_back(pred(0.5, 1, 1, {name}));
        b.push_back(pred(0.5, 1, 1, {name}));
      }
    }
    auto rows = accuracy_diff_by_word(a, b, 0.005, 20, 2, 5);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].token == "t4");
    CHECK(rows[1].token == "t3");
  }
}

TEST_CASE("predictions JSONL round trip") {
  const std::string path = (std::filesystem::temp_directory_path() / "preds_rt.jsonl").string();
  std::vector<PredictionRecord> preds{pred(0.25, 1, 0, {"hej", "du"}), pred(0.75, 0, 1)};
  preds[0].id = "a";
  preds[0].user = "u1";
  preds[0].day = 42;
  write_predictions(preds, path);
  auto back = read_predictions(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].id == "a");
  CHECK(back[0].user == "u1");
  CHECK(back[0].day == 42);
  CHECK(back[0].score == 0.25);
  CHECK(back[0].label == 1);
  CHECK(back[0].predicted == 0);
  CHECK(back[0].tokens == std::vector<std::string>{"hej", "du"});
  std::remove(path.c_str());
}
