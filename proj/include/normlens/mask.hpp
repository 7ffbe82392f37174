#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "normlens/text.hpp"

namespace normlens {

inline constexpr const char* kFamilyNameToken = "familyname";
inline constexpr const char* kFirstNameToken = "firstname";

// Token -> fictive merged token mapping for the three mask groups. Matching is
// exact on whole tokens after tokenization; inflected forms are listed
// explicitly in the pairs file rather than stemmed.
struct MaskTable {
  std::unordered_map<std::string, std::string> pair_map;
  std::unordered_set<std::string> family_names;
  std::unordered_set<std::string> first_names;
  std::unordered_set<std::string> exclusions;

  bool empty() const { return pair_map.empty() && family_names.empty() && first_names.empty(); }

  // merged replacement for a token, or nullptr when unmasked
  const std::string* lookup(const std::string& token) const {
    static const std::string family = kFamilyNameToken;
    static const std::string first = kFirstNameToken;
    if (auto it = pair_map.find(token); it != pair_map.end()) return &it->second;
    if (family_names.count(token)) return &family;
    if (first_names.count(token)) return &first;
    return nullptr;
  }
};

namespace detail {

inline std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // trim spaces
    std::size_t b = field.find_first_not_of(" \t\r");
    std::size_t e = field.find_last_not_of(" \t\r");
    fields.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
  }
  return fields;
}

inline std::vector<std::string> read_token_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    std::size_t b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    std::size_t e = line.find_last_not_of(" \t\r");
    std::string low;
    append_lowered(low, line.substr(b, e - b + 1));
    out.push_back(low);
  }
  return out;
}

}  // namespace detail

// Builds the mask table from the pairs / family-name / first-name /
// exclusions files. Pairs file rows are `wordA,wordB,...,merged`; the names
// files hold one name per line; exclusions one token per line. Exclusions
// override membership: an excluded name is dropped rather than masked.
// A token claimed by more than one group is an error.
inline MaskTable build_mask_table(const std::string& pairs_file,
                                  const std::string& family_file,
                                  const std::string& names_file,
                                  const std::string& exclusions_file) {
  MaskTable table;
  if (!exclusions_file.empty())
    for (auto& t : detail::read_token_lines(exclusions_file)) table.exclusions.insert(t);

  auto check_new = [&](const std::string& token, const char* group) {
    if (table.pair_map.count(token) || table.family_names.count(token) ||
        table.first_names.count(token))
      throw std::runtime_error(std::string("mask token in multiple groups (") + group +
                               "): " + token);
  };

  if (!pairs_file.empty()) {
    std::ifstream in(pairs_file);
    if (!in) throw std::runtime_error("cannot open " + pairs_file);
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      auto fields = detail::split_csv_row(line);
      if (fields.size() < 2)
        throw std::runtime_error("pairs row needs at least word,merged: " + line);
      std::string merged;
      detail::append_lowered(merged, fields.back());
      for (std::size_t i = 0; i + 1 < fields.size(); ++i) {
        std::string tok;
        detail::append_lowered(tok, fields[i]);
        if (tok.empty() || table.exclusions.count(tok)) continue;
        check_new(tok, "pairs");
        table.pair_map.emplace(tok, merged);
      }
    }
  }
  if (!family_file.empty()) {
    for (auto& t : detail::read_token_lines(family_file)) {
      if (table.exclusions.count(t)) continue;
      check_new(t, "family");
      table.family_names.insert(t);
    }
  }
  if (!names_file.empty()) {
    for (auto& t : detail::read_token_lines(names_file)) {
      if (table.exclusions.count(t)) continue;
      check_new(t, "first");
      table.first_names.insert(t);
    }
  }
  return table;
}

// Replaces every token present in a mask map by its merged form; everything
// else passes through. Idempotent as long as merged tokens are not themselves
// mask keys.
inline std::vector<std::string> apply_mask(const std::vector<std::string>& tokens,
                                           const MaskTable& mask) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    const std::string* repl = mask.lookup(t);
    out.push_back(repl ? *repl : t);
  }
  return out;
}

}  // namespace normlens
