#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "normlens/train.hpp"

using namespace normlens;

namespace {

// linearly separable toy problem: class decided by which planted token appears
struct ToyProblem {
  std::vector<CorpusRecord> train, val;
  EmbeddingMatrix emb;
};

ToyProblem make_toy(int n_train, int n_val, std::uint64_t seed, double minority = 0.5) {
  ToyProblem toy;
  Rng rng(seed);
  toy.emb.dim = 8;
  std::vector<std::string> vocab{"fem", "mal", "bg0", "bg1", "bg2", "bg3", "bg4", "bg5"};
  for (const auto& t : vocab) {
    std::vector<double> v(8);
    for (auto& x : v) x = rng.uniform(-0.5, 0.5);
    toy.emb.add_token(t, 100, v);
  }
  normalize(toy.emb);
  auto draw = [&](int label) {
    CorpusRecord r;
    r.label = label;
    const int len = 10 + static_cast<int>(rng.uniform_int(6));
    for (int j = 0; j < len; ++j) r.tokens.push_back(vocab[2 + rng.uniform_int(6)]);
    r.tokens[rng.uniform_int(r.tokens.size())] = label == 1 ? "fem" : "mal";
    r.word_count = len;
    return r;
  };
  for (int i = 0; i < n_train; ++i) toy.train.push_back(draw(rng.uniform() < minority ? 1 : 0));
  for (int i = 0; i < n_val; ++i) toy.val.push_back(draw(i % 2));
  return toy;
}

double accuracy(const TrainedModel& m, const std::vector<CorpusRecord>& set,
                const EmbeddingMatrix* emb) {
  std::size_t correct = 0;
  for (const auto& r : set) correct += (m.score(r.tokens, emb) >= 0.5 ? 1 : 0) == r.label;
  return static_cast<double>(correct) / set.size();
}

}  // namespace

TEST_CASE("weighted_loss") {
  CHECK(weighted_loss(0.5, 1) == doctest::Approx(std::log(2.0)));
  CHECK(weighted_loss(0.5, 0) == doctest::Approx(std::log(2.0)));
  CHECK(weighted_loss(0.5, 1, 3.0) == doctest::Approx(3.0 * std::log(2.0)));
  CHECK(weighted_loss(0.9, 1) == doctest::Approx(-std::log(0.9)));
  bool clamped = false;
  CHECK(std::isfinite(weighted_loss(0.0, 1, 1.0, 1.0, &clamped)));
  CHECK(clamped);
  clamped = false;
  CHECK(std::isfinite(weighted_loss(1.0, 0, 1.0, 1.0, &clamped)));
  CHECK(clamped);
  clamped = false;
  weighted_loss(0.5, 1, 1.0, 1.0, &clamped);
  CHECK_FALSE(clamped);
}

TEST_CASE("balanced_minibatch draws half from each class") {
  std::vector<int> labels;
  for (int i = 0; i < 1000; ++i) labels.push_back(i < 100 ? 1 : 0);  // 10% minority
  Rng rng(3);
  long long ones = 0, total = 0;
  for (int b = 0; b < 1000; ++b) {
    auto idx = balanced_minibatch(labels, 100, rng);
    REQUIRE(idx.size() == 100);
    for (auto i : idx) ones += labels[i];
    total += 100;
  }
  const double share = static_cast<double>(ones) / total;
  CHECK(share == doctest::Approx(0.5).epsilon(0.01));

  std::vector<int> single(50, 1);
  CHECK_THROWS(balanced_minibatch(single, 10, rng));
}

TEST_CASE("balanced_minibatch odd batch sizes split 50/50 in expectation") {
  std::vector<int> labels(200);
  for (int i = 0; i < 200; ++i) labels[i] = i % 4 == 0;
  Rng rng(9);
  long long ones = 0;
  for (int b = 0; b < 2000; ++b) {
    auto idx = balanced_minibatch(labels, 11, rng);
    for (auto i : idx) ones += labels[i];
  }
  CHECK(static_cast<double>(ones) / (2000 * 11) == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("all four model kinds learn a separable toy corpus") {
  auto toy = make_toy(600, 200, 77);
  TrainConfig cfg;
  cfg.minibatch = 32;
  cfg.max_epochs = 25;
  cfg.eval_every = 0.25;
  cfg.early_stop_epochs = 100;  // let every model train to the end
  cfg.imbalance = ImbalanceStrategy::none;
  cfg.dropout = 0.0;
  cfg.nodes = 16;
  cfg.learning_rate = 0.2;
  cfg.seed = 5;
  for (ModelKind kind : {ModelKind::nb, ModelKind::bow, ModelKind::lstm, ModelKind::cnn}) {
    CAPTURE(model_kind_name(kind));
    TrainConfig c = cfg;
    if (kind == ModelKind::lstm) {
      // recurrent credit assignment needs a tighter window and more passes
      c.input_len = 16;
      c.learning_rate = 0.5;
      c.max_epochs = 100;
    }
    auto m = train_model(kind, toy.train, toy.val, &toy.emb, c);
    CHECK(accuracy(m, toy.val, &toy.emb) >= 0.95);
  }
}

TEST_CASE("training is deterministic in the seed") {
  auto toy = make_toy(200, 50, 21);
  TrainConfig cfg;
  cfg.minibatch = 20;
  cfg.max_epochs = 2;
  cfg.dropout = 0.0;
  cfg.seed = 42;
  auto a = train_model(ModelKind::bow, toy.train, toy.val, &toy.emb, cfg);
  auto b = train_model(ModelKind::bow, toy.train, toy.val, &toy.emb, cfg);
  CHECK(a.bow->params() == b.bow->params());
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i)
    CHECK(a.trace[i].val_accuracy == b.trace[i].val_accuracy);
}

TEST_CASE("max_epochs zero returns the untouched initialization") {
  auto toy = make_toy(100, 20, 8);
  TrainConfig cfg;
  cfg.max_epochs = 0;
  cfg.nodes = 4;
  cfg.seed = 6;
  auto m = train_model(ModelKind::lstm, toy.train, toy.val, &toy.emb, cfg);
  REQUIRE(m.trace.size() == 1);
  CHECK(m.trace[0].epoch == 0.0);
  // same init as a fresh model with the derived seed
  LstmModel fresh(toy.emb.dim, cfg.nodes, cfg.dropout);
  Rng init(derive_seed(cfg.seed, "model-init"));
  fresh.init(init);
  CHECK(m.lstm->params() == fresh.params());
}

TEST_CASE("naive bayes bypasses the sgd loop") {
  auto toy = make_toy(100, 40, 10);
  TrainConfig cfg;
  auto m = train_model(ModelKind::nb, toy.train, toy.val, nullptr, cfg);
  REQUIRE(m.nb.has_value());
  REQUIRE(m.trace.size() == 1);
  CHECK(m.trace[0].val_accuracy > 0.9);
}

TEST_CASE("loss weighting upweights the minority class") {
  auto toy = make_toy(400, 100, 14, 0.15);
  TrainConfig cfg;
  cfg.minibatch = 32;
  cfg.max_epochs = 25;
  cfg.early_stop_epochs = 100;
  cfg.dropout = 0.0;
  cfg.imbalance = ImbalanceStrategy::loss_weighting;
  cfg.learning_rate = 0.2;
  cfg.seed = 4;
  auto m = train_model(ModelKind::bow, toy.train, toy.val, &toy.emb, cfg);
  CHECK(accuracy(m, toy.val, &toy.emb) >= 0.9);
}

TEST_CASE("retrain_vectors produces a modified embedding copy") {
  auto toy = make_toy(200, 50, 19);
  TrainConfig cfg;
  cfg.minibatch = 20;
  cfg.max_epochs = 2;
  cfg.dropout = 0.0;
  cfg.retrain_vectors = true;
  cfg.seed = 3;
  auto m = train_model(ModelKind::bow, toy.train, toy.val, &toy.emb, cfg);
  REQUIRE(m.retrained_embeddings.has_value());
  CHECK(m.retrained_embeddings->tokens == toy.emb.tokens);
  CHECK(m.retrained_embeddings->vectors != toy.emb.vectors);
}

TEST_CASE("model save/load round trip") {
  auto toy = make_toy(150, 40, 25);
  const auto dir = std::filesystem::temp_directory_path();

  TrainConfig cfg;
  cfg.minibatch = 20;
  cfg.max_epochs = 1;
  cfg.nodes = 4;
  cfg.dropout = 0.0;
  cfg.seed = 12;

  SUBCASE("naive bayes") {
    auto m = train_model(ModelKind::nb, toy.train, toy.val, nullptr, cfg);
    m.threshold = 0.42;
    m.balanced_threshold = 0.37;
    const std::string path = (dir / "model_nb.json").string();
    save_model(m, path);
    auto back = load_model(path);
    CHECK(back.kind == ModelKind::nb);
    CHECK(back.threshold == 0.42);
    CHECK(back.balanced_threshold == 0.37);
    CHECK(back.nb->log_prior == m.nb->log_prior);
    CHECK(back.nb->log_ratios == m.nb->log_ratios);
    for (const auto& r : toy.val)
      CHECK(back.score(r.tokens, nullptr) == m.score(r.tokens, nullptr));
    std::remove(path.c_str());
  }

  SUBCASE("lstm") {
    auto m = train_model(ModelKind::lstm, toy.train, toy.val, &toy.emb, cfg);
    const std::string path = (dir / "model_lstm.json").string();
    save_model(m, path, toy.emb.dim);
    auto back = load_model(path);
    CHECK(back.kind == ModelKind::lstm);
    CHECK(back.vocab_hash == vocab_hash(toy.emb));
    CHECK(back.lstm->params() == m.lstm->params());
    for (const auto& r : toy.val)
      CHECK(back.score(r.tokens, &toy.emb) ==
            doctest::Approx(m.score(r.tokens, &toy.emb)).epsilon(1e-12));
    std::remove(path.c_str());
  }
}
