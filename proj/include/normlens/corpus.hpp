#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "normlens/rng.hpp"
#include "normlens/text.hpp"

namespace normlens {

struct RawMessage {
  std::string id;
  std::string user_id;
  std::string timestamp;  // ISO-8601 UTC
  std::string text;
  bool retweet_flag = false;
};

enum class Group { train, validation, test, evaluation };

inline const char* group_name(Group g) {
  switch (g) {
    case Group::train: return "train";
    case Group::validation: return "validation";
    case Group::test: return "test";
    case Group::evaluation: return "evaluation";
  }
  return "?";
}

inline Group group_from_name(const std::string& s) {
  if (s == "train") return Group::train;
  if (s == "validation") return Group::validation;
  if (s == "test") return Group::test;
  if (s == "evaluation") return Group::evaluation;
  throw std::runtime_error("unknown group: " + s);
}

struct CorpusRecord {
  std::string id;
  std::string user_id;
  std::string calendar_day;  // "YYYY-MM-DD"
  std::vector<std::string> tokens;  // target word replaced by the blank sentinel
  int label = 0;                    // 1 = infrequent class
  int word_count = 0;
  Group group = Group::train;
};

struct TargetPair {
  std::string word_a;  // majority class, e.g. "han"
  std::string word_b;  // minority class, e.g. "hon"
  std::string sentinel = kBlankToken;
};

// --- timestamp helpers -------------------------------------------------------

inline std::string calendar_day(const std::string& iso_timestamp) {
  if (iso_timestamp.size() < 10) throw std::runtime_error("unparseable timestamp: " + iso_timestamp);
  return iso_timestamp.substr(0, 10);
}

// --- operations --------------------------------------------------------------

// Censors the target word. Returns nothing when the tokens contain both pair
// words, neither, or repeated occurrences (ambiguous which slot to fill).
inline std::optional<std::pair<std::vector<std::string>, int>> extract_target(
    const std::vector<std::string>& tokens, const TargetPair& pair) {
  int count_a = 0, count_b = 0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] == pair.word_a) {
      ++count_a;
      pos = i;
    } else if (tokens[i] == pair.word_b) {
      ++count_b;
      pos = i;
    }
  }
  if (count_a + count_b != 1) return std::nullopt;
  std::vector<std::string> censored = tokens;
  censored[pos] = pair.sentinel;
  return std::make_pair(std::move(censored), count_b == 1 ? 1 : 0);
}

inline bool filter_length(const CorpusRecord& record, int min_words = 10, int max_words = 25) {
  return record.word_count >= min_words && record.word_count <= max_words;
}

struct SplitSets {
  std::vector<CorpusRecord> train, validation, test;
};

// Random 64-16-20 split, deterministic given the seed. Records are ordered by
// id before shuffling so the partition does not depend on input order.
inline SplitSets split_sets(std::vector<CorpusRecord> records, std::uint64_t seed,
                            double train_frac = 0.64, double val_frac = 0.16) {
  if (records.size() < 5) throw std::runtime_error("split_sets: need at least 5 records");
  std::stable_sort(records.begin(), records.end(),
                   [](const CorpusRecord& a, const CorpusRecord& b) { return a.id < b.id; });
  Rng rng(seed);
  rng.shuffle(records);
  const std::size_t n = records.size();
  const std::size_t n_train = static_cast<std::size_t>(std::llround(train_frac * n));
  const std::size_t n_val = static_cast<std::size_t>(std::llround(val_frac * n));
  SplitSets out;
  for (std::size_t i = 0; i < n; ++i) {
    CorpusRecord& r = records[i];
    if (i < n_train) {
      r.group = Group::train;
      out.train.push_back(std::move(r));
    } else if (i < n_train + n_val) {
      r.group = Group::validation;
      out.validation.push_back(std::move(r));
    } else {
      r.group = Group::test;
      out.test.push_back(std::move(r));
    }
  }
  return out;
}

inline double class_balance(const std::vector<CorpusRecord>& records) {
  if (records.empty()) throw std::runtime_error("class_balance: empty input");
  std::size_t minority = 0;
  for (const auto& r : records) minority += r.label == 1;
  return static_cast<double>(minority) / static_cast<double>(records.size());
}

// Removes records whose original raw text contains any listed hashtag,
// case-insensitively. Empty tag list is the identity.
inline std::vector<CorpusRecord> filter_hashtag_correlated(
    const std::vector<CorpusRecord>& records,
    const std::unordered_map<std::string, std::string>& raw_text_by_id,
    const std::vector<std::string>& tag_list) {
  if (tag_list.empty()) return records;
  std::vector<std::string> lowered_tags;
  for (const auto& t : tag_list) {
    std::string low;
    detail::append_lowered(low, t);
    lowered_tags.push_back(low);
  }
  std::vector<CorpusRecord> out;
  for (const auto& r : records) {
    auto it = raw_text_by_id.find(r.id);
    bool drop = false;
    if (it != raw_text_by_id.end()) {
      std::string low;
      detail::append_lowered(low, it->second);
      for (const auto& tag : lowered_tags) {
        if (low.find(tag) != std::string::npos) {
          drop = true;
          break;
        }
      }
    }
    if (!drop) out.push_back(r);
  }
  return out;
}

struct DailyShare {
  std::string day;
  std::size_t tagged = 0;
  std::size_t total = 0;
  double share = 0.0;
};

// Per-day fraction of messages containing the tag (case-insensitive substring
// on the raw text). Days appear in calendar order; absent days are simply not
// present, callers can flag gaps against an expected range.
inline std::vector<DailyShare> hashtag_share_series(const std::vector<RawMessage>& messages,
                                                    const std::string& tag) {
  std::string low_tag;
  detail::append_lowered(low_tag, tag);
  std::map<std::string, DailyShare> days;
  for (const auto& m : messages) {
    if (m.retweet_flag) continue;
    auto& d = days[calendar_day(m.timestamp)];
    d.day = calendar_day(m.timestamp);
    ++d.total;
    std::string low;
    detail::append_lowered(low, m.text);
    if (low.find(low_tag) != std::string::npos) ++d.tagged;
  }
  std::vector<DailyShare> out;
  for (auto& [day, d] : days) {
    d.share = d.total ? static_cast<double>(d.tagged) / d.total : 0.0;
    out.push_back(d);
  }
  return out;
}

// --- JSONL I/O ---------------------------------------------------------------

inline RawMessage raw_message_from_json(const nlohmann::json& j) {
  RawMessage m;
  m.id = j.at("id").get<std::string>();
  m.user_id = j.at("user").get<std::string>();
  m.timestamp = j.at("ts").get<std::string>();
  m.text = j.at("text").get<std::string>();
  m.retweet_flag = j.at("retweet").get<bool>();
  return m;
}

inline nlohmann::json raw_message_to_json(const RawMessage& m) {
  return {{"id", m.id}, {"user", m.user_id}, {"ts", m.timestamp},
          {"text", m.text}, {"retweet", m.retweet_flag}};
}

inline std::vector<RawMessage> read_raw_messages(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<RawMessage> out;
  std::unordered_set<std::string> seen;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    RawMessage m = raw_message_from_json(nlohmann::json::parse(line));
    if (!seen.insert(m.id).second)
      throw std::runtime_error("duplicate message id: " + m.id);
    out.push_back(std::move(m));
  }
  return out;
}

inline nlohmann::json record_to_json(const CorpusRecord& r) {
  return {{"id", r.id},     {"user", r.user_id}, {"day", r.calendar_day},
          {"tokens", r.tokens}, {"label", r.label},  {"group", group_name(r.group)}};
}

inline CorpusRecord record_from_json(const nlohmann::json& j) {
  CorpusRecord r;
  r.id = j.at("id").get<std::string>();
  r.user_id = j.at("user").get<std::string>();
  r.calendar_day = j.at("day").get<std::string>();
  r.tokens = j.at("tokens").get<std::vector<std::string>>();
  r.label = j.at("label").get<int>();
  r.word_count = static_cast<int>(r.tokens.size());
  r.group = group_from_name(j.at("group").get<std::string>());
  return r;
}

inline void write_records(const std::string& path, const std::vector<CorpusRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (const auto& r : records) out << record_to_json(r).dump() << "\n";
}

inline std::vector<CorpusRecord> read_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<CorpusRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(record_from_json(nlohmann::json::parse(line)));
  }
  return out;
}

}  // namespace normlens
