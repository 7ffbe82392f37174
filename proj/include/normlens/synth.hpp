#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "normlens/corpus.hpp"
#include "normlens/econometrics.hpp"
#include "normlens/rng.hpp"

namespace normlens {

// Synthetic corpus with planted gendered vocabulary: n_signal/2 tokens tilted
// toward each class at +-log_odds, a flat background vocabulary, and a single
// target-pair word per message. In order_only mode the unigram distributions
// are identical across classes and the label is carried purely by the order
// of an adjacent marker bigram (p q vs q p).
struct SynthCorpusConfig {
  std::size_t n_messages = 50000;
  double minority_share = 0.255;
  int n_signal = 40;       // planted tokens, half per side
  double log_odds = 1.5;   // class log-odds carried by each signal token
  int n_background = 200;
  int min_len = 10, max_len = 25;  // includes the target word
  bool order_only = false;
  int n_marker_pairs = 5;
  std::string word_a = "han", word_b = "hon";
  int year1 = 2016;           // panel years: May 1 year1 .. Apr 30 year1+2
  double post_event_flip = 0.0;  // post-event share drawn from the flipped class
  std::uint64_t seed = 1;
};

inline std::vector<std::string> signal_tokens(const SynthCorpusConfig& cfg, int side) {
  std::vector<std::string> out;
  const int half = cfg.n_signal / 2;
  char buf[16];
  for (int i = 0; i < half; ++i) {
    std::snprintf(buf, sizeof buf, "%s%02d", side == 1 ? "fem" : "mal", i);
    out.emplace_back(buf);
  }
  return out;
}

namespace detail {

struct TokenSampler {
  std::vector<std::string> tokens;
  std::vector<double> cum;  // cumulative weights
  void build(const std::vector<std::pair<std::string, double>>& weighted) {
    double total = 0;
    for (const auto& [t, w] : weighted) {
      tokens.push_back(t);
      total += w;
      cum.push_back(total);
    }
  }
  const std::string& draw(Rng& rng) const {
    const double u = rng.uniform() * cum.back();
    const std::size_t i = std::lower_bound(cum.begin(), cum.end(), u) - cum.begin();
    return tokens[std::min(i, tokens.size() - 1)];
  }
};

inline std::string iso_day_for_index(int year1, int year_offset, int day_index) {
  static const int len[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  int y = year1 + year_offset, m = 5, d = 1 + day_index;
  int mi = 4;  // May
  while (d > len[mi]) {
    d -= len[mi];
    mi = (mi + 1) % 12;
    if (mi == 0) ++y;
  }
  m = mi + 1;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT12:00:00Z", y, m, d);
  return buf;
}

}  // namespace detail

inline std::vector<RawMessage> generate_synthetic_corpus(const SynthCorpusConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, "synth-corpus"));
  const auto fem = signal_tokens(cfg, 1);
  const auto mal = signal_tokens(cfg, 0);
  std::vector<std::string> background;
  char buf[16];
  for (int i = 0; i < cfg.n_background; ++i) {
    std::snprintf(buf, sizeof buf, "ord%03d", i);
    background.emplace_back(buf);
  }

  const double tilt = std::exp(cfg.log_odds / 2.0);
  detail::TokenSampler by_class[2];
  for (int c = 0; c < 2; ++c) {
    std::vector<std::pair<std::string, double>> w;
    for (const auto& t : background) w.emplace_back(t, 1.0);
    if (!cfg.order_only) {
      for (const auto& t : fem) w.emplace_back(t, c == 1 ? tilt : 1.0 / tilt);
      for (const auto& t : mal) w.emplace_back(t, c == 0 ? tilt : 1.0 / tilt);
    }
    by_class[c].build(w);
  }
  std::vector<std::pair<std::string, std::string>> markers;
  for (int i = 0; i < cfg.n_marker_pairs; ++i) {
    std::snprintf(buf, sizeof buf, "pre%02d", i);
    std::string p = buf;
    std::snprintf(buf, sizeof buf, "post%02d", i);
    markers.emplace_back(p, buf);
  }

  std::vector<RawMessage> out;
  out.reserve(cfg.n_messages);
  for (std::size_t i = 0; i < cfg.n_messages; ++i) {
    const int label = rng.uniform() < cfg.minority_share ? 1 : 0;
    const int year_offset = static_cast<int>(rng.uniform_int(2));
    const int day_index = static_cast<int>(rng.uniform_int(365));
    const bool post_event = year_offset == 1 && day_index >= kEventDayIndex;
    int draw_class = label;
    if (post_event && cfg.post_event_flip > 0.0 && rng.uniform() < cfg.post_event_flip)
      draw_class = 1 - label;

    const int len =
        cfg.min_len + static_cast<int>(rng.uniform_int(cfg.max_len - cfg.min_len + 1));
    std::vector<std::string> tokens;
    tokens.reserve(len);
    while (static_cast<int>(tokens.size()) < len - (cfg.order_only ? 3 : 1))
      tokens.push_back(by_class[draw_class].draw(rng));
    if (cfg.order_only) {
      // adjacent marker bigram at a random position; inverted for class 0
      const auto& [p, q] = markers[rng.uniform_int(markers.size())];
      const std::size_t at = rng.uniform_int(tokens.size() + 1);
      tokens.insert(tokens.begin() + at, {draw_class == 1 ? p : q, draw_class == 1 ? q : p});
    }
    // target word at a random position
    const std::size_t pos = rng.uniform_int(tokens.size() + 1);
    tokens.insert(tokens.begin() + pos, label == 1 ? cfg.word_b : cfg.word_a);

    RawMessage m;
    m.id = "msg" + std::to_string(i);
    m.user_id = "user" + std::to_string(rng.uniform_int(500));
    m.timestamp = detail::iso_day_for_index(cfg.year1, year_offset, day_index);
    std::string text;
    for (const auto& t : tokens) {
      if (!text.empty()) text += ' ';
      text += t;
    }
    m.text = std::move(text);
    out.push_back(std::move(m));
  }
  return out;
}

// Synthetic follow-norms panel: common day effects, user effects, and a
// planted post-event shift in the success probability.
struct SynthPanelConfig {
  int n_users = 100;
  int n_days = 365;
  int obs_per_day = 40;  // per year
  double base_rate = 0.75;
  double day_sd = 0.02;
  double user_sd = 0.03;
  double effect = -0.015;  // planted After Metoo shift
  int event_day = kEventDayIndex;
  std::uint64_t seed = 1;
};

inline std::vector<PanelObservation> generate_synthetic_panel(const SynthPanelConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, "synth-panel"));
  std::vector<double> day_eff(cfg.n_days), user_eff(cfg.n_users);
  for (auto& d : day_eff) d = cfg.day_sd * rng.gaussian();
  for (auto& u : user_eff) u = cfg.user_sd * rng.gaussian();

  std::vector<PanelObservation> obs;
  obs.reserve(static_cast<std::size_t>(2) * cfg.n_days * cfg.obs_per_day);
  std::size_t id = 0;
  for (int year2 = 0; year2 <= 1; ++year2) {
    for (int t = 0; t < cfg.n_days; ++t) {
      for (int k = 0; k < cfg.obs_per_day; ++k) {
        const std::size_t u = rng.uniform_int(cfg.n_users);
        const int after = year2 == 1 && t >= cfg.event_day ? 1 : 0;
        double p = cfg.base_rate + day_eff[t] + user_eff[u] + after * cfg.effect;
        p = std::clamp(p, 0.0, 1.0);
        PanelObservation o;
        o.id = "obs" + std::to_string(id++);
        o.user = "u" + std::to_string(u);
        o.day_index = t;
        o.year2 = year2;
        o.after = after;
        o.follow_norms = rng.uniform() < p ? 1 : 0;
        o.gendered_language = p;
        o.she_count = 0;
        obs.push_back(std::move(o));
      }
    }
  }
  return obs;
}

}  // namespace normlens
