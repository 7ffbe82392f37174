#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "normlens/corpus.hpp"
#include "normlens/econometrics.hpp"
#include "normlens/embeddings.hpp"
#include "normlens/evaluation.hpp"
#include "normlens/mask.hpp"
#include "normlens/rng.hpp"
#include "normlens/synth.hpp"
#include "normlens/train.hpp"

namespace normlens {

// --- run configuration -------------------------------------------------------

// Flat key = value file with [section] headers; every key has a default.
struct RunConfig {
  // [paths]
  std::string input;
  std::string outdir = "run";
  std::string mask_pairs, mask_family, mask_names, mask_exclusions;
  std::string drop_hashtags;
  // [target]
  TargetPair pair{"han", "hon"};
  // [corpus]
  int min_words = 10, max_words = 25;
  double train_frac = 0.64, val_frac = 0.16;
  // [sgns]
  SgnsConfig sgns;
  // [train]
  std::string model = "nb";
  TrainConfig train;
  // [estimate]
  std::vector<std::string> specs = {"baseline"};
  std::string vcov = "cluster:day";
  std::string outcome = "follow_norms";
  int year1 = 2016;
  // [run]
  std::uint64_t seed = 1;
  bool deterministic = true;

  bool operator==(const RunConfig&) const = default;
};

inline bool operator==(const TargetPair& a, const TargetPair& b) {
  return a.word_a == b.word_a && a.word_b == b.word_b && a.sentinel == b.sentinel;
}
inline bool operator==(const SgnsConfig& a, const SgnsConfig& b) {
  return a.dim == b.dim && a.window == b.window && a.negative == b.negative &&
         a.min_count == b.min_count && a.epochs == b.epochs && a.lr_start == b.lr_start &&
         a.lr_min == b.lr_min && a.subsample == b.subsample && a.subsample_t == b.subsample_t &&
         a.seed == b.seed;
}
inline bool operator==(const TrainConfig& a, const TrainConfig& b) {
  return a.minibatch == b.minibatch && a.max_epochs == b.max_epochs &&
         a.eval_every == b.eval_every && a.early_stop_epochs == b.early_stop_epochs &&
         a.early_stop_gain == b.early_stop_gain && a.imbalance == b.imbalance &&
         a.retrain_vectors == b.retrain_vectors && a.learning_rate == b.learning_rate &&
         a.input_len == b.input_len && a.nodes == b.nodes && a.dropout == b.dropout &&
         a.seed == b.seed;
}

inline std::string serialize_config(const RunConfig& c) {
  std::ostringstream out;
  out.precision(17);
  out << "[paths]\n";
  out << "input = " << c.input << "\n";
  out << "outdir = " << c.outdir << "\n";
  out << "mask_pairs = " << c.mask_pairs << "\n";
  out << "mask_family = " << c.mask_family << "\n";
  out << "mask_names = " << c.mask_names << "\n";
  out << "mask_exclusions = " << c.mask_exclusions << "\n";
  out << "drop_hashtags = " << c.drop_hashtags << "\n";
  out << "[target]\n";
  out << "word_a = " << c.pair.word_a << "\n";
  out << "word_b = " << c.pair.word_b << "\n";
  out << "[corpus]\n";
  out << "min_words = " << c.min_words << "\n";
  out << "max_words = " << c.max_words << "\n";
  out << "train_frac = " << c.train_frac << "\n";
  out << "val_frac = " << c.val_frac << "\n";
  out << "[sgns]\n";
  out << "dim = " << c.sgns.dim << "\n";
  out << "window = " << c.sgns.window << "\n";
  out << "negative = " << c.sgns.negative << "\n";
  out << "min_count = " << c.sgns.min_count << "\n";
  out << "epochs = " << c.sgns.epochs << "\n";
  out << "lr_start = " << c.sgns.lr_start << "\n";
  out << "lr_min = " << c.sgns.lr_min << "\n";
  out << "[train]\n";
  out << "model = " << c.model << "\n";
  out << "minibatch = " << c.train.minibatch << "\n";
  out << "max_epochs = " << c.train.max_epochs << "\n";
  out << "eval_every = " << c.train.eval_every << "\n";
  out << "early_stop_epochs = " << c.train.early_stop_epochs << "\n";
  out << "early_stop_gain = " << c.train.early_stop_gain << "\n";
  out << "imbalance = " << imbalance_name(c.train.imbalance) << "\n";
  out << "retrain_vectors = " << (c.train.retrain_vectors ? "true" : "false") << "\n";
  out << "learning_rate = " << c.train.learning_rate << "\n";
  out << "input_len = " << c.train.input_len << "\n";
  out << "nodes = " << c.train.nodes << "\n";
  out << "dropout = " << c.train.dropout << "\n";
  out << "[estimate]\n";
  std::string specs;
  for (const auto& s : c.specs) {
    if (!specs.empty()) specs += ",";
    specs += s;
  }
  out << "specs = " << specs << "\n";
  out << "vcov = " << c.vcov << "\n";
  out << "outcome = " << c.outcome << "\n";
  out << "year1 = " << c.year1 << "\n";
  out << "[run]\n";
  out << "seed = " << c.seed << "\n";
  out << "deterministic = " << (c.deterministic ? "true" : "false") << "\n";
  return out.str();
}

inline RunConfig parse_config_text(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string line, section;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    const std::string k = section + "." + key;
    auto as_bool = [&] { return val == "true" || val == "1"; };
    if (k == "paths.input") c.input = val;
    else if (k == "paths.outdir") c.outdir = val;
    else if (k == "paths.mask_pairs") c.mask_pairs = val;
    else if (k == "paths.mask_family") c.mask_family = val;
    else if (k == "paths.mask_names") c.mask_names = val;
    else if (k == "paths.mask_exclusions") c.mask_exclusions = val;
    else if (k == "paths.drop_hashtags") c.drop_hashtags = val;
    else if (k == "target.word_a") c.pair.word_a = val;
    else if (k == "target.word_b") c.pair.word_b = val;
    else if (k == "corpus.min_words") c.min_words = std::stoi(val);
    else if (k == "corpus.max_words") c.max_words = std::stoi(val);
    else if (k == "corpus.train_frac") c.train_frac = std::stod(val);
    else if (k == "corpus.val_frac") c.val_frac = std::stod(val);
    else if (k == "sgns.dim") c.sgns.dim = std::stoi(val);
    else if (k == "sgns.window") c.sgns.window = std::stoi(val);
    else if (k == "sgns.negative") c.sgns.negative = std::stoi(val);
    else if (k == "sgns.min_count") c.sgns.min_count = std::stoi(val);
    else if (k == "sgns.epochs") c.sgns.epochs = std::stoi(val);
    else if (k == "sgns.lr_start") c.sgns.lr_start = std::stod(val);
    else if (k == "sgns.lr_min") c.sgns.lr_min = std::stod(val);
    else if (k == "train.model") c.model = val;
    else if (k == "train.minibatch") c.train.minibatch = std::stoi(val);
    else if (k == "train.max_epochs") c.train.max_epochs = std::stoi(val);
    else if (k == "train.eval_every") c.train.eval_every = std::stod(val);
    else if (k == "train.early_stop_epochs") c.train.early_stop_epochs = std::stod(val);
    else if (k == "train.early_stop_gain") c.train.early_stop_gain = std::stod(val);
    else if (k == "train.imbalance") c.train.imbalance = imbalance_from_name(val);
    else if (k == "train.retrain_vectors") c.train.retrain_vectors = as_bool();
    else if (k == "train.learning_rate") c.train.learning_rate = std::stod(val);
    else if (k == "train.input_len") c.train.input_len = std::stoi(val);
    else if (k == "train.nodes") c.train.nodes = std::stoi(val);
    else if (k == "train.dropout") c.train.dropout = std::stod(val);
    else if (k == "estimate.specs") {
      c.specs.clear();
      std::stringstream ss(val);
      std::string s;
      while (std::getline(ss, s, ','))
        if (!s.empty()) c.specs.push_back(s);
    } else if (k == "estimate.vcov") c.vcov = val;
    else if (k == "estimate.outcome") c.outcome = val;
    else if (k == "estimate.year1") c.year1 = std::stoi(val);
    else if (k == "run.seed") c.seed = std::stoull(val);
    else if (k == "run.deterministic") c.deterministic = as_bool();
    else throw std::runtime_error("unknown config key: " + k);
  }
  c.sgns.seed = derive_seed(c.seed, "sgns");
  c.train.seed = derive_seed(c.seed, "train");
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

inline void validate_config(const RunConfig& c) {
  namespace fs = std::filesystem;
  if (c.input.empty()) throw std::runtime_error("config: paths.input is required");
  if (!fs::exists(c.input)) throw std::runtime_error("config: input file missing: " + c.input);
  for (const std::string& p :
       {c.mask_pairs, c.mask_family, c.mask_names, c.mask_exclusions, c.drop_hashtags})
    if (!p.empty() && !fs::exists(p))
      throw std::runtime_error("config: referenced file missing: " + p);
  model_kind_from_name(c.model);  // throws on junk
  if (c.model != "nb" && c.sgns.dim <= 0)
    throw std::runtime_error("config: word-vector model requires sgns.dim > 0");
}

// --- digests & manifest ------------------------------------------------------

inline std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot digest missing file: " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    h = fnv1a(std::string_view(buf, static_cast<std::size_t>(in.gcount())), h);
    if (!in) break;
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

struct StageRecord {
  std::map<std::string, std::string> inputs;   // path -> digest
  std::map<std::string, std::string> outputs;  // path -> digest
  long long wall_ms = 0;
};

struct RunManifest {
  std::string config_hash;
  std::string version = "1";
  std::map<std::string, StageRecord> stages;
};

inline nlohmann::json manifest_to_json(const RunManifest& m) {
  nlohmann::json j;
  j["config_hash"] = m.config_hash;
  j["version"] = m.version;
  nlohmann::json stages;
  for (const auto& [name, s] : m.stages) {
    stages[name] = {{"inputs", s.inputs}, {"outputs", s.outputs}, {"wall_ms", s.wall_ms}};
  }
  j["stages"] = stages;
  return j;
}

inline RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  m.config_hash = j.at("config_hash");
  m.version = j.at("version");
  for (const auto& [name, s] : j.at("stages").items()) {
    StageRecord r;
    r.inputs = s.at("inputs").get<std::map<std::string, std::string>>();
    r.outputs = s.at("outputs").get<std::map<std::string, std::string>>();
    r.wall_ms = s.at("wall_ms");
    m.stages[name] = r;
  }
  return m;
}

// --- pipeline ----------------------------------------------------------------

class Pipeline {
 public:
  explicit Pipeline(RunConfig config) : cfg_(std::move(config)) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg_.outdir);
    manifest_.config_hash = [&] {
      // hash a canonical form with outdir-relative paths so identical runs in
      // different directories produce identical manifests
      RunConfig canon = cfg_;
      for (std::string* p : {&canon.input, &canon.mask_pairs, &canon.mask_family,
                             &canon.mask_names, &canon.mask_exclusions, &canon.drop_hashtags})
        *p = rel_key(*p);
      canon.outdir = ".";
      const std::uint64_t h = fnv1a(serialize_config(canon));
      char hex[17];
      std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
      return std::string(hex);
    }();
    const std::string mpath = manifest_path();
    if (fs::exists(mpath)) {
      std::ifstream in(mpath);
      nlohmann::json j;
      in >> j;
      previous_ = manifest_from_json(j);
    }
  }

  std::string manifest_path() const { return cfg_.outdir + "/manifest.json"; }
  std::string path(const std::string& name) const { return cfg_.outdir + "/" + name; }

  // manifest keys are stored relative to outdir so runs are relocatable
  std::string rel_key(const std::string& p) const {
    const std::string prefix = cfg_.outdir + "/";
    return p.rfind(prefix, 0) == 0 ? p.substr(prefix.size()) : p;
  }
  std::string resolve_key(const std::string& k) const {
    return std::filesystem::exists(k) ? k : path(k);
  }
  const RunManifest& manifest() const { return manifest_; }

  // Just the ingest stage, for the standalone CLI command.
  RunManifest ingest_only() {
    validate_config(cfg_);
    run_stage("ingest", {cfg_.input},
              {path("train.jsonl"), path("validation.jsonl"), path("test.jsonl"),
               path("evaluation.jsonl")},
              [&] { ingest(); });
    save_manifest();
    return manifest_;
  }

  RunManifest run() {
    validate_config(cfg_);
    run_stage("ingest", {cfg_.input},
              {path("train.jsonl"), path("validation.jsonl"), path("test.jsonl"),
               path("evaluation.jsonl")},
              [&] { ingest(); });
    if (cfg_.model != "nb") {
      run_stage("embed", {path("train.jsonl")}, {path("embeddings.txt")}, [&] { embed(); });
    }
    std::vector<std::string> train_in = {path("train.jsonl"), path("validation.jsonl")};
    if (cfg_.model != "nb") train_in.push_back(path("embeddings.txt"));
    run_stage("train", train_in, {path("model.json")}, [&] { train_stage(); });
    run_stage("evaluate", {path("model.json"), path("test.jsonl"), path("evaluation.jsonl")},
              {path("predictions_test.jsonl"), path("predictions_eval.jsonl"),
               path("metrics_unbalanced.csv"), path("metrics_balanced.csv"),
               path("wordcolor.csv")},
              [&] { evaluate_stage(); });
    run_stage("estimate",
              {path("predictions_test.jsonl"), path("predictions_eval.jsonl")},
              estimate_outputs(), [&] { estimate_stage(); });
    run_stage("report", estimate_outputs(), {path("report.txt")},
              [&] { write_report(cfg_.outdir, path("report.txt")); });
    save_manifest();
    return manifest_;
  }

  // Human-readable summary of whatever outputs exist in a run directory.
  static void write_report(const std::string& run_dir, const std::string& out_path) {
    namespace fs = std::filesystem;
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot open " + out_path + " for writing");
    bool any = false;
    auto cat = [&](const std::string& file, const std::string& title) {
      const std::string p = run_dir + "/" + file;
      if (!fs::exists(p)) {
        out << "[missing] " << file << "\n\n";
        return;
      }
      any = true;
      out << "== " << title << " ==\n";
      std::ifstream in(p);
      std::string line;
      int n = 0;
      while (std::getline(in, line) && n++ < 40) out << line << "\n";
      out << "\n";
    };
    cat("metrics_unbalanced.csv", "Model evaluation on test set (unbalanced sample)");
    cat("metrics_balanced.csv", "Model evaluation on test set (balanced sample)");
    cat("wordcolor.csv", "Word color (top of list)");
    for (const auto& e : fs::directory_iterator(run_dir)) {
      const std::string name = e.path().filename().string();
      if (name.rfind("regression_", 0) == 0 && name.size() > 4 &&
          name.substr(name.size() - 4) == ".csv")
        cat(name, "Estimates: " + name.substr(11, name.size() - 15));
    }
    if (!any) out << "nothing to report\n";
  }

 private:
  std::vector<std::string> estimate_outputs() const {
    std::vector<std::string> out = {path("observations.csv")};
    for (const auto& s : cfg_.specs) {
      out.push_back(path("regression_" + s + ".csv"));
      out.push_back(path("regression_" + s + ".json"));
    }
    return out;
  }

  void run_stage(const std::string& name, const std::vector<std::string>& inputs,
                 const std::vector<std::string>& outputs, const std::function<void()>& fn) {
    namespace fs = std::filesystem;
    StageRecord rec;
    for (const auto& p : inputs) rec.inputs[rel_key(p)] = file_digest(p);

    // skip when the previous run recorded the same inputs and the outputs
    // are still present with their recorded digests
    auto prev = previous_.stages.find(name);
    if (prev != previous_.stages.end() && prev->second.inputs == rec.inputs) {
      bool ok = true;
      for (const auto& [k, digest] : prev->second.outputs) {
        const std::string p = resolve_key(k);
        if (!fs::exists(p) || file_digest(p) != digest) {
          ok = false;
          break;
        }
      }
      if (ok) {
        manifest_.stages[name] = prev->second;
        if (cfg_.deterministic) manifest_.stages[name].wall_ms = 0;
        return;
      }
    }

    const auto t0 = std::chrono::steady_clock::now();
    try {
      fn();
    } catch (const std::exception& e) {
      for (const auto& p : outputs)
        if (fs::exists(p)) fs::rename(p, p + ".quarantine");
      save_manifest();
      throw std::runtime_error("stage '" + name + "' failed: " + e.what());
    }
    const auto t1 = std::chrono::steady_clock::now();
    for (const auto& p : outputs) rec.outputs[rel_key(p)] = file_digest(p);
    rec.wall_ms =
        cfg_.deterministic
            ? 0
            : std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
    manifest_.stages[name] = rec;
  }

  void save_manifest() const {
    std::ofstream out(manifest_path());
    out << manifest_to_json(manifest_).dump(2) << "\n";
  }

  // panel year of a calendar day string (years run May 1 .. Apr 30)
  int panel_year(const std::string& day, int* month = nullptr, int* mday = nullptr) const {
    const int y = std::stoi(day.substr(0, 4));
    const int m = std::stoi(day.substr(5, 2));
    if (month) *month = m;
    if (mday) *mday = std::stoi(day.substr(8, 2));
    return m >= 5 ? y : y - 1;
  }

  void ingest() {
    const auto raw = read_raw_messages(cfg_.input);
    MaskTable mask;
    const bool masking = !cfg_.mask_pairs.empty() || !cfg_.mask_family.empty() ||
                         !cfg_.mask_names.empty();
    if (masking)
      mask = build_mask_table(cfg_.mask_pairs, cfg_.mask_family, cfg_.mask_names,
                              cfg_.mask_exclusions);
    std::vector<std::string> drop_tags;
    if (!cfg_.drop_hashtags.empty()) {
      std::ifstream in(cfg_.drop_hashtags);
      std::string line;
      while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) drop_tags.push_back(line);
      }
    }

    std::vector<CorpusRecord> year1, year2;
    std::unordered_map<std::string, std::string> raw_text;
    for (const auto& m : raw) {
      if (m.retweet_flag) continue;
      auto tokens = tokenize(m.text);
      if (masking) tokens = apply_mask(tokens, mask);
      auto extracted = extract_target(tokens, cfg_.pair);
      if (!extracted) continue;
      CorpusRecord r;
      r.id = m.id;
      r.user_id = m.user_id;
      r.calendar_day = calendar_day(m.timestamp);
      r.tokens = std::move(extracted->first);
      r.label = extracted->second;
      r.word_count = static_cast<int>(r.tokens.size());
      if (!filter_length(r, cfg_.min_words, cfg_.max_words)) continue;
      raw_text[r.id] = m.text;
      const int py = panel_year(r.calendar_day);
      if (py <= cfg_.year1)
        year1.push_back(std::move(r));
      else if (py == cfg_.year1 + 1)
        year2.push_back(std::move(r));
    }
    year1 = filter_hashtag_correlated(year1, raw_text, drop_tags);
    year2 = filter_hashtag_correlated(year2, raw_text, drop_tags);

    SplitSets split =
        split_sets(std::move(year1), derive_seed(cfg_.seed, "split"), cfg_.train_frac, cfg_.val_frac);
    for (auto& r : year2) r.group = Group::evaluation;
    std::stable_sort(year2.begin(), year2.end(),
                     [](const CorpusRecord& a, const CorpusRecord& b) { return a.id < b.id; });
    write_records(path("train.jsonl"), split.train);
    write_records(path("validation.jsonl"), split.validation);
    write_records(path("test.jsonl"), split.test);
    write_records(path("evaluation.jsonl"), year2);
  }

  void embed() {
    const auto train = read_records(path("train.jsonl"));
    std::vector<std::vector<std::string>> sentences;
    sentences.reserve(train.size());
    for (const auto& r : train) sentences.push_back(r.tokens);
    SgnsConfig sc = cfg_.sgns;
    sc.seed = derive_seed(cfg_.seed, "sgns");
    EmbeddingMatrix emb = train_skipgram(sentences, sc);
    normalize(emb);
    save_embeddings(emb, path("embeddings.txt"));
  }

  void train_stage() {
    const auto train = read_records(path("train.jsonl"));
    const auto val = read_records(path("validation.jsonl"));
    const ModelKind kind = model_kind_from_name(cfg_.model);
    EmbeddingMatrix emb;
    const EmbeddingMatrix* embp = nullptr;
    if (kind != ModelKind::nb) {
      emb = load_embeddings(path("embeddings.txt"));
      embp = &emb;
    }
    TrainConfig tc = cfg_.train;
    tc.seed = derive_seed(cfg_.seed, "train");
    TrainedModel model = train_model(kind, train, val, embp, tc);

    // thresholds come from the validation set
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& r : val) {
      scores.push_back(model.score(r.tokens, embp));
      labels.push_back(r.label);
    }
    model.threshold = choose_threshold(scores, labels, "accuracy");
    model.balanced_threshold = choose_threshold(scores, labels, "balanced");
    save_model(model, path("model.json"), embp ? embp->dim : 0);
  }

  std::vector<PredictionRecord> score_set(const TrainedModel& model, const EmbeddingMatrix* emb,
                                          const std::vector<CorpusRecord>& records) const {
    std::vector<PredictionRecord> preds;
    preds.reserve(records.size());
    for (const auto& r : records) {
      PredictionRecord p;
      p.id = r.id;
      p.user = r.user_id;
      int month, mday;
      panel_year(r.calendar_day, &month, &mday);
      p.day = day_index_from_date(0, month, mday);
      p.score = model.score(r.tokens, emb);
      p.label = r.label;
      p.predicted = p.score >= model.threshold ? 1 : 0;
      p.tokens = r.tokens;
      preds.push_back(std::move(p));
    }
    return preds;
  }

  void evaluate_stage() {
    TrainedModel model = load_model(path("model.json"));
    EmbeddingMatrix emb;
    const EmbeddingMatrix* embp = nullptr;
    if (model.kind != ModelKind::nb) {
      emb = load_embeddings(path("embeddings.txt"));
      embp = &emb;
    }
    const auto test = read_records(path("test.jsonl"));
    const auto eval = read_records(path("evaluation.jsonl"));
    auto preds_test = score_set(model, embp, test);
    auto preds_eval = score_set(model, embp, eval);
    // drop Feb 29 observations (no cross-year day pair)
    std::erase_if(preds_test, [](const PredictionRecord& p) { return p.day < 0; });
    std::erase_if(preds_eval, [](const PredictionRecord& p) { return p.day < 0; });
    write_predictions(preds_test, path("predictions_test.jsonl"));
    write_predictions(preds_eval, path("predictions_eval.jsonl"));

    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& p : preds_test) {
      scores.push_back(p.score);
      labels.push_back(p.label);
    }
    MetricReport unb = confusion_metrics(preds_test);
    unb.roc_auc = roc_auc(scores, labels);
    unb.threshold = model.threshold;
    unb.sample = "unbalanced";
    write_metric_report(unb, path("metrics_unbalanced.csv"));

    auto balanced = balanced_subsample(preds_test, derive_seed(cfg_.seed, "balanced-eval"));
    std::vector<double> bscores;
    std::vector<int> blabels;
    for (auto& p : balanced) {
      p.predicted = p.score >= model.balanced_threshold ? 1 : 0;
      bscores.push_back(p.score);
      blabels.push_back(p.label);
    }
    MetricReport bal = confusion_metrics(balanced);
    bal.roc_auc = roc_auc(bscores, blabels);
    bal.threshold = model.balanced_threshold;
    bal.sample = "balanced";
    write_metric_report(bal, path("metrics_balanced.csv"));

    write_word_color(word_color(preds_test), path("wordcolor.csv"));
  }

  void estimate_stage() {
    const auto preds_test = read_predictions(path("predictions_test.jsonl"));
    const auto preds_eval = read_predictions(path("predictions_eval.jsonl"));
    std::vector<PanelObservation> obs;
    auto add = [&](const std::vector<PredictionRecord>& preds, int year2) {
      for (const auto& p : preds) {
        PanelObservation o;
        o.id = p.id;
        o.user = p.user;
        o.series = "heshe";
        o.day_index = p.day;
        o.year2 = year2;
        o.after = year2 && p.day >= kEventDayIndex ? 1 : 0;
        o.follow_norms = follow_norms(p.predicted, p.label);
        o.gendered_language = p.score;
        o.she_count = p.label;
        obs.push_back(std::move(o));
      }
    };
    add(preds_test, 0);
    add(preds_eval, 1);
    write_observations(obs, path("observations.csv"));
    for (const auto& spec : cfg_.specs) {
      RegressionResult r = estimate_spec(spec, obs, cfg_.outcome, cfg_.vcov);
      write_regression_result(r, path("regression_" + spec + ".csv"),
                              path("regression_" + spec + ".json"));
    }
  }

  RunConfig cfg_;
  RunManifest manifest_, previous_;
};

inline RunManifest run_pipeline(const RunConfig& config) { return Pipeline(config).run(); }

// Generates the synthetic demo corpus and runs the full pipeline on it.
inline RunManifest run_demo(const std::string& outdir, std::uint64_t seed,
                            std::size_t n_messages = 20000) {
  namespace fs = std::filesystem;
  fs::create_directories(outdir);
  SynthCorpusConfig sc;
  sc.n_messages = n_messages;
  sc.post_event_flip = 0.05;
  sc.seed = derive_seed(seed, "demo-corpus");
  const std::string raw_path = outdir + "/raw.jsonl";
  {
    const auto msgs = generate_synthetic_corpus(sc);
    std::ofstream out(raw_path);
    if (!out) throw std::runtime_error("cannot open " + raw_path + " for writing");
    for (const auto& m : msgs) out << raw_message_to_json(m).dump() << "\n";
  }
  RunConfig cfg;
  cfg.input = raw_path;
  cfg.outdir = outdir;
  cfg.model = "nb";
  cfg.specs = {"raw", "baseline"};
  cfg.seed = seed;
  cfg.year1 = sc.year1;
  std::ofstream cfg_out(outdir + "/run.cfg");
  cfg_out << serialize_config(cfg);
  cfg_out.close();
  return run_pipeline(cfg);
}

}  // namespace normlens
