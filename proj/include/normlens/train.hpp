#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "normlens/bow.hpp"
#include "normlens/cnn.hpp"
#include "normlens/corpus.hpp"
#include "normlens/embeddings.hpp"
#include "normlens/lstm.hpp"
#include "normlens/nb.hpp"
#include "normlens/rng.hpp"
#include "normlens/sequence.hpp"

namespace normlens {

enum class ModelKind { nb, bow, lstm, cnn };

inline const char* model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::nb: return "nb";
    case ModelKind::bow: return "bow";
    case ModelKind::lstm: return "lstm";
    case ModelKind::cnn: return "cnn";
  }
  return "?";
}

inline ModelKind model_kind_from_name(const std::string& s) {
  if (s == "nb") return ModelKind::nb;
  if (s == "bow") return ModelKind::bow;
  if (s == "lstm") return ModelKind::lstm;
  if (s == "cnn") return ModelKind::cnn;
  throw std::runtime_error("unknown model kind: " + s);
}

enum class ImbalanceStrategy { balanced_batch, loss_weighting, none };

inline const char* imbalance_name(ImbalanceStrategy s) {
  switch (s) {
    case ImbalanceStrategy::balanced_batch: return "balanced-batch";
    case ImbalanceStrategy::loss_weighting: return "loss-weighting";
    case ImbalanceStrategy::none: return "none";
  }
  return "?";
}

inline ImbalanceStrategy imbalance_from_name(const std::string& s) {
  if (s == "balanced-batch" || s == "balanced_batch") return ImbalanceStrategy::balanced_batch;
  if (s == "loss-weighting" || s == "loss_weighting") return ImbalanceStrategy::loss_weighting;
  if (s == "none") return ImbalanceStrategy::none;
  throw std::runtime_error("unknown imbalance strategy: " + s);
}

struct TrainConfig {
  int minibatch = 100;
  int max_epochs = 5;
  double eval_every = 0.1;       // fraction of an epoch between checkpoints
  double early_stop_epochs = 1.0;  // stop when no gain over this span
  double early_stop_gain = 0.001;  // +0.1 percentage point
  ImbalanceStrategy imbalance = ImbalanceStrategy::balanced_batch;
  bool retrain_vectors = false;
  double learning_rate = 0.05;  // plain SGD, fixed rate
  int input_len = kFixedInputLength;
  int nodes = 125;       // LSTM
  double dropout = 0.25;
  std::uint64_t seed = 1;
};

// Class-weighted binary cross-entropy. Scores exactly at 0 or 1 are clamped
// at eps; *clamped is set when that happens.
inline double weighted_loss(double y_hat, int y, double weight1 = 1.0, double weight0 = 1.0,
                            bool* clamped = nullptr) {
  constexpr double eps = 1e-12;
  if (y_hat <= 0.0 || y_hat >= 1.0) {
    y_hat = std::clamp(y_hat, eps, 1.0 - eps);
    if (clamped) *clamped = true;
  }
  return y == 1 ? -weight1 * std::log(y_hat) : -weight0 * std::log(1.0 - y_hat);
}

// One balanced mini-batch of record indices: redraw until the minority quota
// is met, cut majority draws beyond theirs. Each class gets floor..ceil of
// half the batch.
inline std::vector<std::size_t> balanced_minibatch(const std::vector<int>& labels,
                                                   std::size_t batch_size, Rng& rng) {
  bool has0 = false, has1 = false;
  for (int l : labels) {
    has0 |= l == 0;
    has1 |= l == 1;
    if (has0 && has1) break;
  }
  if (!has0 || !has1) throw std::runtime_error("balanced_minibatch: a class is absent");
  std::size_t want1 = batch_size / 2 + (batch_size % 2 == 1 && rng.uniform() < 0.5 ? 1 : 0);
  std::size_t want0 = batch_size - want1;
  std::vector<std::size_t> batch;
  batch.reserve(batch_size);
  std::size_t n1 = 0, n0 = 0;
  while (n1 < want1 || n0 < want0) {
    const std::size_t i = rng.uniform_int(labels.size());
    if (labels[i] == 1) {
      if (n1 < want1) {
        batch.push_back(i);
        ++n1;
      }
    } else if (n0 < want0) {
      batch.push_back(i);
      ++n0;
    }
  }
  rng.shuffle(batch);
  return batch;
}

struct MetricPoint {
  double epoch = 0.0;
  double val_accuracy = 0.0;
  double train_loss = 0.0;
};

struct TrainedModel {
  ModelKind kind = ModelKind::nb;
  TrainConfig config;
  std::optional<NaiveBayesModel> nb;
  std::shared_ptr<BowWvModel> bow;
  std::shared_ptr<LstmModel> lstm;
  std::shared_ptr<CnnModel> cnn;
  std::optional<EmbeddingMatrix> retrained_embeddings;  // when retrain_vectors
  double threshold = 0.5;           // accuracy-optimal, set by evaluation
  double balanced_threshold = 0.5;  // min(sens,spec)-optimal
  std::uint64_t vocab_hash = 0;
  std::vector<MetricPoint> trace;

  // probability of class 1 for an (unpadded) token sequence
  double score(const std::vector<std::string>& tokens, const EmbeddingMatrix* emb) const {
    if (kind == ModelKind::nb) return predict_nb(*nb, tokens);
    const EmbeddingMatrix* use = retrained_embeddings ? &*retrained_embeddings : emb;
    if (!use) throw std::runtime_error("word-vector model needs embeddings");
    Matrix x = embed_sequence(pad_sequence(tokens, config.input_len), *use);
    switch (kind) {
      case ModelKind::bow: return bow->predict(x);
      case ModelKind::lstm: return lstm->predict(x);
      case ModelKind::cnn: return cnn->predict(x);
      default: throw std::runtime_error("bad model kind");
    }
  }
};

inline std::uint64_t vocab_hash(const EmbeddingMatrix& emb) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& t : emb.tokens) {
    h = fnv1a(t, h);
    h = fnv1a("\x1f", h);
  }
  return h;
}

inline CnnSpec default_cnn_spec(int input_dim, int input_len, double dropout) {
  CnnSpec s;
  s.input_dim = input_dim;
  s.input_len = input_len;
  s.dropout = dropout;
  return s;
}

namespace detail {

// Dispatch wrapper so the SGD loop is written once.
struct NeuralModel {
  std::shared_ptr<BowWvModel> bow;
  std::shared_ptr<LstmModel> lstm;
  std::shared_ptr<CnnModel> cnn;

  std::vector<double>& params() {
    if (bow) return bow->params();
    if (lstm) return lstm->params();
    return cnn->params();
  }
  double forward(const Matrix& x, bool training, Rng* rng) {
    if (bow) return bow->forward(x, training, rng);
    if (lstm) return lstm->forward(x, training, rng);
    return cnn->forward(x, training, rng);
  }
  double predict(const Matrix& x) const {
    if (bow) return bow->predict(x);
    if (lstm) return lstm->predict(x);
    return cnn->predict(x);
  }
  void backward(double grad_logit, Matrix* grad_x) {
    if (bow)
      bow->backward(grad_logit, grad_x);
    else if (lstm)
      lstm->backward(grad_logit, grad_x);
    else
      cnn->backward(grad_logit, grad_x);
  }
  std::vector<double>& grads() {
    if (bow) return bow->grads();
    if (lstm) return lstm->grads();
    return cnn->grads();
  }
  void zero_grads() {
    if (bow)
      bow->zero_grads();
    else if (lstm)
      lstm->zero_grads();
    else
      cnn->zero_grads();
  }
};

}  // namespace detail

// Shared training loop: plain SGD on cross-entropy, minibatch config.minibatch,
// checkpoint every eval_every epoch on validation accuracy (0.5 cutoff), early
// stop when the best checkpoint has not gained early_stop_gain over the last
// early_stop_epochs. Returns the best checkpoint. NB bypasses SGD entirely.
inline TrainedModel train_model(ModelKind kind, const std::vector<CorpusRecord>& train_set,
                                const std::vector<CorpusRecord>& val_set,
                                const EmbeddingMatrix* emb, const TrainConfig& config) {
  TrainedModel out;
  out.kind = kind;
  out.config = config;
  if (emb) out.vocab_hash = vocab_hash(*emb);

  if (kind == ModelKind::nb) {
    out.nb = train_naive_bayes(train_set);
    std::size_t correct = 0;
    for (const auto& r : val_set)
      correct += (predict_nb(*out.nb, r.tokens) >= 0.5 ? 1 : 0) == r.label;
    out.trace.push_back({0.0, val_set.empty() ? 0.0 : static_cast<double>(correct) / val_set.size(), 0.0});
    return out;
  }

  if (!emb) throw std::runtime_error("train_model: word-vector models need embeddings");
  if (train_set.empty()) throw std::runtime_error("train_model: empty training set");

  // local embedding copy when backprop into the vectors is requested;
  // only rows of tokens present in the training data receive updates
  EmbeddingMatrix local_emb;
  const EmbeddingMatrix* use_emb = emb;
  if (config.retrain_vectors) {
    local_emb = *emb;
    use_emb = &local_emb;
  }

  detail::NeuralModel model;
  Rng init_rng(derive_seed(config.seed, "model-init"));
  switch (kind) {
    case ModelKind::bow:
      model.bow = std::make_shared<BowWvModel>(emb->dim);
      model.bow->init(init_rng);
      out.bow = model.bow;
      break;
    case ModelKind::lstm:
      model.lstm = std::make_shared<LstmModel>(emb->dim, config.nodes, config.dropout);
      model.lstm->init(init_rng);
      out.lstm = model.lstm;
      break;
    case ModelKind::cnn:
      model.cnn = std::make_shared<CnnModel>(
          default_cnn_spec(emb->dim, config.input_len, config.dropout));
      model.cnn->init(init_rng);
      out.cnn = model.cnn;
      break;
    default: break;
  }

  // pre-resolve padded id sequences once
  auto resolve = [&](const std::vector<CorpusRecord>& rs) {
    std::vector<std::vector<int>> ids;
    ids.reserve(rs.size());
    for (const auto& r : rs)
      ids.push_back(sequence_to_ids(pad_sequence(r.tokens, config.input_len), *use_emb));
    return ids;
  };
  const std::vector<std::vector<int>> train_ids = resolve(train_set);
  const std::vector<std::vector<int>> val_ids = resolve(val_set);
  std::vector<int> train_labels(train_set.size());
  for (std::size_t i = 0; i < train_set.size(); ++i) train_labels[i] = train_set[i].label;

  auto build_input = [&](const std::vector<int>& ids, Matrix& x) {
    x.assign(ids.size(), {});
    for (std::size_t t = 0; t < ids.size(); ++t) {
      if (ids[t] < 0) {
        x[t].assign(use_emb->dim, 0.0);
      } else {
        auto row = use_emb->row(ids[t]);
        x[t].assign(row.begin(), row.end());
      }
    }
  };

  double w1 = 1.0, w0 = 1.0;
  if (config.imbalance == ImbalanceStrategy::loss_weighting) {
    double n1 = 0, n0 = 0;
    for (int l : train_labels) (l == 1 ? n1 : n0) += 1;
    if (n1 == 0 || n0 == 0) throw std::runtime_error("loss weighting: a class is absent");
    if (n1 <= n0)
      w1 = n0 / n1;
    else
      w0 = n1 / n0;
  }

  auto val_accuracy = [&]() {
    if (val_ids.empty()) return 0.0;
    Matrix x;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < val_ids.size(); ++i) {
      build_input(val_ids[i], x);
      correct += (model.predict(x) >= 0.5 ? 1 : 0) == val_set[i].label;
    }
    return static_cast<double>(correct) / val_ids.size();
  };

  std::vector<double> best_params = model.params();
  EmbeddingMatrix best_emb;
  double best_acc = val_accuracy();
  out.trace.push_back({0.0, best_acc, 0.0});
  if (config.retrain_vectors) best_emb = local_emb;

  const std::size_t n = train_set.size();
  const std::size_t batch = std::max<std::size_t>(1, config.minibatch);
  const std::size_t steps_per_epoch = std::max<std::size_t>(1, (n + batch - 1) / batch);
  const std::size_t eval_interval =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(steps_per_epoch * config.eval_every)));
  const double evals_per_epoch = static_cast<double>(steps_per_epoch) / eval_interval;
  const std::size_t patience_evals =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(evals_per_epoch * config.early_stop_epochs)));

  Rng rng(derive_seed(config.seed, "sgd"));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  Matrix x, grad_x;
  std::size_t evals_done = 0, last_improvement_eval = 0;
  bool stop = false;
  for (int epoch = 0; epoch < config.max_epochs && !stop; ++epoch) {
    rng.shuffle(order);
    for (std::size_t step = 0; step < steps_per_epoch && !stop; ++step) {
      std::vector<std::size_t> idx;
      if (config.imbalance == ImbalanceStrategy::balanced_batch) {
        idx = balanced_minibatch(train_labels, batch, rng);
      } else {
        for (std::size_t k = step * batch; k < std::min(n, (step + 1) * batch); ++k)
          idx.push_back(order[k]);
      }
      model.zero_grads();
      double batch_loss = 0.0;
      std::vector<std::pair<std::size_t, Matrix>> input_grads;
      for (std::size_t i : idx) {
        build_input(train_ids[i], x);
        const int y = train_labels[i];
        const double y_hat = model.forward(x, true, &rng);
        batch_loss += weighted_loss(y_hat, y, w1, w0);
        // d/dlogit of weighted cross-entropy
        const double weight = y == 1 ? w1 : w0;
        const double grad_logit = weight * (y_hat - y);
        model.backward(grad_logit, config.retrain_vectors ? &grad_x : nullptr);
        if (config.retrain_vectors) input_grads.emplace_back(i, grad_x);
      }
      if (!std::isfinite(batch_loss))
        throw std::runtime_error("train_model: loss diverged (non-finite) at epoch " +
                                 std::to_string(epoch));
      const double scale = config.learning_rate / static_cast<double>(idx.size());
      auto& g = model.grads();
      auto& p = model.params();
      for (std::size_t j = 0; j < p.size(); ++j) p[j] -= scale * g[j];
      if (config.retrain_vectors) {
        for (std::size_t b = 0; b < input_grads.size(); ++b) {
          const auto& ids = train_ids[input_grads[b].first];
          const Matrix& gx = input_grads[b].second;
          for (std::size_t t = 0; t < ids.size(); ++t) {
            if (ids[t] < 0) continue;
            auto row = local_emb.row(ids[t]);
            for (int j = 0; j < local_emb.dim; ++j) row[j] -= scale * gx[t][j];
          }
        }
      }

      const std::size_t global_step = static_cast<std::size_t>(epoch) * steps_per_epoch + step + 1;
      if (global_step % eval_interval == 0) {
        const double acc = val_accuracy();
        ++evals_done;
        out.trace.push_back({static_cast<double>(global_step) / steps_per_epoch, acc,
                             batch_loss / static_cast<double>(idx.size())});
        if (acc > best_acc) {
          if (acc >= best_acc + config.early_stop_gain) last_improvement_eval = evals_done;
          best_acc = acc;
          best_params = model.params();
          if (config.retrain_vectors) best_emb = local_emb;
        }
        if (evals_done >= last_improvement_eval + patience_evals &&
            static_cast<double>(global_step) / steps_per_epoch >= 1.0)
          stop = true;
      }
    }
  }

  model.params() = best_params;
  if (config.retrain_vectors) out.retrained_embeddings = std::move(best_emb);
  return out;
}

// --- model persistence -------------------------------------------------------

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"minibatch", c.minibatch},
          {"max_epochs", c.max_epochs},
          {"eval_every", c.eval_every},
          {"early_stop_epochs", c.early_stop_epochs},
          {"early_stop_gain", c.early_stop_gain},
          {"imbalance", imbalance_name(c.imbalance)},
          {"retrain_vectors", c.retrain_vectors},
          {"learning_rate", c.learning_rate},
          {"input_len", c.input_len},
          {"nodes", c.nodes},
          {"dropout", c.dropout},
          {"seed", c.seed}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.minibatch = j.at("minibatch");
  c.max_epochs = j.at("max_epochs");
  c.eval_every = j.at("eval_every");
  c.early_stop_epochs = j.at("early_stop_epochs");
  c.early_stop_gain = j.at("early_stop_gain");
  c.imbalance = imbalance_from_name(j.at("imbalance"));
  c.retrain_vectors = j.at("retrain_vectors");
  c.learning_rate = j.at("learning_rate");
  c.input_len = j.at("input_len");
  c.nodes = j.at("nodes");
  c.dropout = j.at("dropout");
  c.seed = j.at("seed");
  return c;
}

inline void save_model(const TrainedModel& m, const std::string& path, int emb_dim = 0) {
  nlohmann::json j;
  j["kind"] = model_kind_name(m.kind);
  j["config"] = train_config_to_json(m.config);
  j["threshold"] = m.threshold;
  j["balanced_threshold"] = m.balanced_threshold;
  j["vocab_hash"] = m.vocab_hash;
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& p : m.trace)
    trace.push_back({{"epoch", p.epoch}, {"val_accuracy", p.val_accuracy}, {"train_loss", p.train_loss}});
  j["trace"] = trace;
  if (m.kind == ModelKind::nb) {
    j["nb"] = {{"log_prior", m.nb->log_prior},
               {"smoothing", m.nb->smoothing},
               {"log_ratios", m.nb->log_ratios}};
  } else {
    j["input_dim"] = emb_dim;
    if (m.kind == ModelKind::bow) j["params"] = m.bow->params();
    if (m.kind == ModelKind::lstm) j["params"] = m.lstm->params();
    if (m.kind == ModelKind::cnn) j["params"] = m.cnn->params();
  }
  if (m.retrained_embeddings) {
    save_embeddings(*m.retrained_embeddings, path + ".emb");
    j["retrained_embeddings"] = path + ".emb";
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
}

inline TrainedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  in >> j;
  TrainedModel m;
  m.kind = model_kind_from_name(j.at("kind"));
  m.config = train_config_from_json(j.at("config"));
  m.threshold = j.at("threshold");
  m.balanced_threshold = j.at("balanced_threshold");
  m.vocab_hash = j.at("vocab_hash");
  for (const auto& p : j.at("trace"))
    m.trace.push_back({p.at("epoch"), p.at("val_accuracy"), p.at("train_loss")});
  if (m.kind == ModelKind::nb) {
    NaiveBayesModel nb;
    nb.log_prior = j.at("nb").at("log_prior");
    nb.smoothing = j.at("nb").at("smoothing");
    nb.log_ratios = j.at("nb").at("log_ratios").get<std::unordered_map<std::string, double>>();
    m.nb = std::move(nb);
  } else {
    const int dim = j.at("input_dim");
    const std::vector<double> params = j.at("params").get<std::vector<double>>();
    if (m.kind == ModelKind::bow) {
      m.bow = std::make_shared<BowWvModel>(dim);
      m.bow->params() = params;
    } else if (m.kind == ModelKind::lstm) {
      m.lstm = std::make_shared<LstmModel>(dim, m.config.nodes, m.config.dropout);
      m.lstm->params() = params;
    } else {
      m.cnn = std::make_shared<CnnModel>(default_cnn_spec(dim, m.config.input_len, m.config.dropout));
      m.cnn->params() = params;
    }
  }
  if (j.contains("retrained_embeddings"))
    m.retrained_embeddings = load_embeddings(j.at("retrained_embeddings"));
  return m;
}

}  // namespace normlens
