#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "normlens/corpus.hpp"
#include "normlens/econometrics.hpp"
#include "normlens/embeddings.hpp"
#include "normlens/evaluation.hpp"
#include "normlens/mask.hpp"
#include "normlens/pipeline.hpp"
#include "normlens/synth.hpp"
#include "normlens/train.hpp"

namespace {

using namespace normlens;

std::vector<CorpusRecord> read_set(const std::string& dir, const std::string& name) {
  return read_records(dir + "/" + name + ".jsonl");
}

int run(int argc, char** argv) {
  CLI::App app{"normlens: gender-norm measurement pipeline"};
  app.require_subcommand(1);

  // ingest --------------------------------------------------------------------
  auto* ingest = app.add_subcommand("ingest", "tokenize, censor and split raw messages");
  std::string in_file, out_dir = "run", pair_arg = "han,hon", mask_dir, drop_file, split_arg = "64,16,20";
  int min_words = 10, max_words = 25;
  std::uint64_t seed = 1;
  ingest->add_option("--in", in_file, "raw messages JSONL")->required();
  ingest->add_option("--pair", pair_arg, "target pair wordA,wordB (majority first)");
  ingest->add_option("--min-words", min_words);
  ingest->add_option("--max-words", max_words);
  ingest->add_option("--seed", seed);
  ingest->add_option("--split", split_arg, "train,val,test percentages");
  ingest->add_option("--mask", mask_dir, "directory with pairs.csv/family.txt/first.txt/exclusions.txt");
  ingest->add_option("--drop-hashtags", drop_file, "file with hashtags to drop");
  ingest->add_option("--out", out_dir);
  int year1 = 2016;
  ingest->add_option("--year1", year1, "first panel year (May 1 start)");

  // embed ---------------------------------------------------------------------
  auto* embed = app.add_subcommand("embed", "train skip-gram word vectors");
  std::string embed_in, embed_out = "embeddings.txt";
  SgnsConfig sgns;
  embed->add_option("--in", embed_in, "directory with train.jsonl")->required();
  embed->add_option("--dim", sgns.dim);
  embed->add_option("--window", sgns.window);
  embed->add_option("--neg", sgns.negative);
  embed->add_option("--min-count", sgns.min_count);
  embed->add_option("--epochs", sgns.epochs);
  embed->add_option("--seed", seed);
  embed->add_option("--out", embed_out);

  // train ---------------------------------------------------------------------
  auto* train = app.add_subcommand("train", "train a classifier");
  std::string model_name = "nb", train_dir, val_dir, emb_file, model_out = "model.json";
  std::string imbalance = "balanced-batch";
  TrainConfig tc;
  bool retrain = false;
  train->add_option("--model", model_name, "nb|bow|lstm|cnn")->required();
  train->add_option("--nodes", tc.nodes);
  train->add_option("--dropout", tc.dropout);
  train->add_option("--imbalance", imbalance, "balanced-batch|loss-weighting|none");
  train->add_flag("--retrain-vectors", retrain);
  train->add_option("--minibatch", tc.minibatch);
  train->add_option("--max-epochs", tc.max_epochs);
  train->add_option("--lr", tc.learning_rate);
  train->add_option("--seed", seed);
  train->add_option("--train", train_dir, "directory with train.jsonl")->required();
  train->add_option("--val", val_dir, "directory with validation.jsonl")->required();
  train->add_option("--emb", emb_file, "embeddings file (word-vector models)");
  train->add_option("--out", model_out);

  // grid ----------------------------------------------------------------------
  auto* grid = app.add_subcommand("grid", "hyperparameter grid for the LSTM");
  std::string grid_out = "grid.csv";
  std::vector<int> grid_nodes = {125, 250, 500};
  std::vector<double> grid_dropout = {0.0, 0.25, 0.5};
  grid->add_option("--train", train_dir)->required();
  grid->add_option("--val", val_dir)->required();
  grid->add_option("--emb", emb_file)->required();
  grid->add_option("--model", model_name, "lstm|cnn|bow");
  grid->add_option("--nodes", grid_nodes, "node counts to try");
  grid->add_option("--dropout", grid_dropout, "dropout rates to try");
  grid->add_option("--max-epochs", tc.max_epochs);
  grid->add_option("--seed", seed);
  grid->add_option("--out", grid_out);

  // evaluate ------------------------------------------------------------------
  auto* evaluate = app.add_subcommand("evaluate", "score a model on a data set");
  std::string eval_model, eval_data, eval_out = "eval", objective = "accuracy";
  bool balanced_sample = false;
  evaluate->add_option("--model", eval_model)->required();
  evaluate->add_option("--data", eval_data, "directory with test.jsonl")->required();
  evaluate->add_option("--emb", emb_file);
  evaluate->add_option("--objective", objective, "accuracy|balanced");
  evaluate->add_flag("--balanced-sample", balanced_sample);
  evaluate->add_option("--seed", seed);
  evaluate->add_option("--out", eval_out);
  std::string eval_set = "test";
  evaluate->add_option("--set", eval_set, "which <set>.jsonl to score");

  // wordcolor -----------------------------------------------------------------
  auto* wordcolor = app.add_subcommand("wordcolor", "word-color ranking from predictions");
  std::string wc_in, wc_out = "wordcolor.csv";
  wordcolor->add_option("--in", wc_in, "predictions JSONL")->required();
  wordcolor->add_option("--out", wc_out);

  // worddiff ------------------------------------------------------------------
  auto* worddiff = app.add_subcommand("worddiff", "word-level accuracy differences");
  std::string wd_a, wd_b, wd_out = "worddiff.csv";
  double bin_width = 0.005;
  int bins = 20, top_k = 10, min_support = 5;
  worddiff->add_option("--a", wd_a, "period-A predictions JSONL")->required();
  worddiff->add_option("--b", wd_b, "period-B predictions JSONL")->required();
  worddiff->add_option("--bin-width", bin_width);
  worddiff->add_option("--bins", bins);
  worddiff->add_option("--top-k", top_k);
  worddiff->add_option("--min-support", min_support);
  worddiff->add_option("--out", wd_out);

  // estimate ------------------------------------------------------------------
  auto* estimate = app.add_subcommand("estimate", "panel regressions");
  std::string est_spec = "baseline", est_outcome = "follow_norms", est_vcov = "cluster:day";
  std::string est_data, est_out = "est", subset = "all";
  bool aggregate = false;
  estimate->add_option("--spec", est_spec, "raw|baseline|user_fe|day_user_fe|trend_*");
  estimate->add_option("--outcome", est_outcome, "follow_norms|gendered_language|she_count");
  estimate->add_option("--vcov", est_vcov, "cluster:day|cluster:user|twoway:day,user|newey-west:L");
  estimate->add_flag("--aggregate", aggregate, "aggregate to daily differences (newey-west)");
  estimate->add_option("--subset", subset, "all|she|he");
  estimate->add_option("--data", est_data, "observations CSV")->required();
  estimate->add_option("--out", est_out);

  // report --------------------------------------------------------------------
  auto* report = app.add_subcommand("report", "summarize a run directory");
  std::string report_dir;
  report->add_option("--run", report_dir)->required();

  // demo ----------------------------------------------------------------------
  auto* demo = app.add_subcommand("demo", "synthetic corpus + full pipeline");
  std::string demo_out = "demo";
  std::size_t demo_n = 20000;
  demo->add_option("--out", demo_out);
  demo->add_option("--seed", seed);
  demo->add_option("--messages", demo_n);

  // run (config-driven) -------------------------------------------------------
  auto* runcmd = app.add_subcommand("run", "run the pipeline from a config file");
  std::string config_path;
  runcmd->add_option("--config", config_path)->required();

  CLI11_PARSE(app, argc, argv);

  if (*ingest) {
    RunConfig cfg;
    cfg.input = in_file;
    cfg.outdir = out_dir;
    const auto comma = pair_arg.find(',');
    if (comma == std::string::npos) throw std::runtime_error("--pair needs wordA,wordB");
    cfg.pair.word_a = pair_arg.substr(0, comma);
    cfg.pair.word_b = pair_arg.substr(comma + 1);
    cfg.min_words = min_words;
    cfg.max_words = max_words;
    double s_train = 64, s_val = 16, s_test = 20;
    if (std::sscanf(split_arg.c_str(), "%lf,%lf,%lf", &s_train, &s_val, &s_test) != 3)
      throw std::runtime_error("--split needs three comma-separated percentages");
    cfg.train_frac = s_train / 100.0;
    cfg.val_frac = s_val / 100.0;
    if (!mask_dir.empty()) {
      auto opt = [&](const std::string& f) {
        const std::string p = mask_dir + "/" + f;
        return std::filesystem::exists(p) ? p : std::string();
      };
      cfg.mask_pairs = opt("pairs.csv");
      cfg.mask_family = opt("family.txt");
      cfg.mask_names = opt("first.txt");
      cfg.mask_exclusions = opt("exclusions.txt");
    }
    cfg.drop_hashtags = drop_file;
    cfg.seed = seed;
    cfg.year1 = year1;
    Pipeline(cfg).ingest_only();
    std::cout << "ingested into " << out_dir << "\n";
    return 0;
  }

  if (*embed) {
    const auto train_set = read_set(embed_in, "train");
    std::vector<std::vector<std::string>> sentences;
    for (const auto& r : train_set) sentences.push_back(r.tokens);
    sgns.seed = derive_seed(seed, "sgns");
    EmbeddingMatrix emb = train_skipgram(sentences, sgns);
    normalize(emb);
    save_embeddings(emb, embed_out);
    std::cout << "trained " << emb.size() << " vectors of dim " << sgns.dim << "\n";
    return 0;
  }

  if (*train) {
    const auto train_set = read_set(train_dir, "train");
    const auto val_set = read_set(val_dir, "validation");
    const ModelKind kind = model_kind_from_name(model_name);
    EmbeddingMatrix emb;
    const EmbeddingMatrix* embp = nullptr;
    if (kind != ModelKind::nb) {
      if (emb_file.empty()) throw std::runtime_error("word-vector models need --emb");
      emb = load_embeddings(emb_file);
      embp = &emb;
    }
    tc.imbalance = imbalance_from_name(imbalance);
    tc.retrain_vectors = retrain;
    tc.seed = derive_seed(seed, "train");
    TrainedModel model = train_model(kind, train_set, val_set, embp, tc);
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& r : val_set) {
      scores.push_back(model.score(r.tokens, embp));
      labels.push_back(r.label);
    }
    model.threshold = choose_threshold(scores, labels, "accuracy");
    model.balanced_threshold = choose_threshold(scores, labels, "balanced");
    save_model(model, model_out, embp ? embp->dim : 0);
    std::cout << "trained " << model_name << "; best val accuracy ";
    double best = 0;
    for (const auto& p : model.trace) best = std::max(best, p.val_accuracy);
    std::cout << best << "\n";
    return 0;
  }

  if (*grid) {
    const auto train_set = read_set(train_dir, "train");
    const auto val_set = read_set(val_dir, "validation");
    EmbeddingMatrix emb = load_embeddings(emb_file);
    const ModelKind kind = model_kind_from_name(model_name.empty() ? "lstm" : model_name);
    std::ofstream out(grid_out);
    out << "nodes,dropout,val_accuracy\n";
    for (int nodes : grid_nodes) {
      for (double dropout : grid_dropout) {
        TrainConfig gc = tc;
        gc.nodes = nodes;
        gc.dropout = dropout;
        gc.seed = derive_seed(seed, "grid:" + std::to_string(nodes) + ":" + std::to_string(dropout));
        TrainedModel m = train_model(kind, train_set, val_set, &emb, gc);
        double best = 0;
        for (const auto& p : m.trace) best = std::max(best, p.val_accuracy);
        out << nodes << "," << dropout << "," << best << "\n";
        std::cout << "nodes=" << nodes << " dropout=" << dropout << " val_acc=" << best << "\n";
      }
    }
    return 0;
  }

  if (*evaluate) {
    TrainedModel model = load_model(eval_model);
    EmbeddingMatrix emb;
    const EmbeddingMatrix* embp = nullptr;
    if (model.kind != ModelKind::nb) {
      if (emb_file.empty()) throw std::runtime_error("word-vector models need --emb");
      emb = load_embeddings(emb_file);
      embp = &emb;
    }
    auto records = read_set(eval_data, eval_set);
    if (balanced_sample) records = balanced_subsample(records, derive_seed(seed, "balanced-eval"));
    const double threshold = objective == "balanced" ? model.balanced_threshold : model.threshold;
    std::vector<PredictionRecord> preds;
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& r : records) {
      PredictionRecord p;
      p.id = r.id;
      p.user = r.user_id;
      p.day = 0;
      p.score = model.score(r.tokens, embp);
      p.label = r.label;
      p.predicted = p.score >= threshold ? 1 : 0;
      p.tokens = r.tokens;
      scores.push_back(p.score);
      labels.push_back(p.label);
      preds.push_back(std::move(p));
    }
    std::filesystem::create_directories(eval_out);
    write_predictions(preds, eval_out + "/predictions.jsonl");
    MetricReport r = confusion_metrics(preds);
    r.roc_auc = roc_auc(scores, labels);
    r.threshold = threshold;
    r.sample = balanced_sample ? "balanced" : "unbalanced";
    write_metric_report(r, eval_out + "/metrics.csv");
    std::cout << "roc_auc=" << r.roc_auc << " accuracy=" << r.accuracy
              << " sensitivity=" << r.sensitivity << " specificity=" << r.specificity << "\n";
    return 0;
  }

  if (*wordcolor) {
    const auto preds = read_predictions(wc_in);
    write_word_color(word_color(preds), wc_out);
    std::cout << "wrote " << wc_out << "\n";
    return 0;
  }

  if (*worddiff) {
    const auto a = read_predictions(wd_a);
    const auto b = read_predictions(wd_b);
    write_word_diff(accuracy_diff_by_word(a, b, bin_width, bins, top_k, min_support), wd_out);
    std::cout << "wrote " << wd_out << "\n";
    return 0;
  }

  if (*estimate) {
    auto obs = read_observations(est_data);
    if (subset == "she")
      std::erase_if(obs, [](const PanelObservation& o) { return o.she_count != 1; });
    else if (subset == "he")
      std::erase_if(obs, [](const PanelObservation& o) { return o.she_count != 0; });
    else if (subset != "all")
      throw std::runtime_error("--subset must be all|she|he");
    if (aggregate && est_vcov.rfind("newey-west", 0) != 0) est_vcov = "newey-west:4";
    RegressionResult r = estimate_spec(est_spec, obs, est_outcome, est_vcov);
    std::filesystem::create_directories(est_out);
    write_regression_result(r, est_out + "/regression_" + est_spec + ".csv",
                            est_out + "/regression_" + est_spec + ".json");
    for (std::size_t j = 0; j < r.names.size(); ++j)
      std::cout << r.names[j] << " = " << r.beta[static_cast<Eigen::Index>(j)] << " ("
                << r.se[j] << ")" << r.stars[j] << "\n";
    return 0;
  }

  if (*report) {
    Pipeline::write_report(report_dir, report_dir + "/report.txt");
    std::ifstream in(report_dir + "/report.txt");
    std::cout << in.rdbuf();
    return 0;
  }

  if (*demo) {
    run_demo(demo_out, seed, demo_n);
    std::cout << "demo pipeline finished in " << demo_out << "\n";
    return 0;
  }

  if (*runcmd) {
    RunConfig cfg = load_config(config_path);
    run_pipeline(cfg);
    std::cout << "pipeline finished in " << cfg.outdir << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
