#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace normlens {

inline constexpr const char* kUserToken = "<user>";
inline constexpr const char* kUrlToken = "<url>";
inline constexpr const char* kHashtagToken = "<hashtag>";
inline constexpr const char* kRareToken = "<rare>";
inline constexpr const char* kPadToken = "<pad>";
inline constexpr const char* kBlankToken = "___";

namespace detail {

// ASCII plus the Latin-1 supplement, which covers Swedish (Å Ä Ö É Ü ...).
// Other scripts pass through unchanged.
inline void append_lowered(std::string& out, std::string_view s) {
  for (std::size_t i = 0; i < s.size();) {
    unsigned char c = s[i];
    if (c < 0x80) {
      out.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c + 32 : c));
      ++i;
    } else if (c == 0xC3 && i + 1 < s.size()) {
      unsigned char c2 = s[i + 1];
      // U+00C0..U+00DE (except multiplication sign) lower to U+00E0..U+00FE
      if (c2 >= 0x80 && c2 <= 0x9E && c2 != 0x97) c2 += 0x20;
      out.push_back(static_cast<char>(c));
      out.push_back(static_cast<char>(c2));
      i += 2;
    } else {
      out.push_back(s[i]);
      ++i;
    }
  }
}

inline bool is_ascii_alnum(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

inline bool is_word_byte(unsigned char c) {
  return is_ascii_alnum(c) || c == '_' || c >= 0x80;
}

// Western-style emoticons: optional reversed forms, eyes [:;=8xX],
// optional nose [-o'^], mouth from a small set. ":)" ":-D" "=(" ";P" "(:".
inline bool is_emoticon(std::string_view t) {
  if (t.size() < 2 || t.size() > 4) return false;
  auto is_eyes = [](char c) {
    return c == ':' || c == ';' || c == '=' || c == '8' || c == 'x' || c == 'X';
  };
  auto is_mouth = [](char c) {
    return c == ')' || c == '(' || c == 'D' || c == 'P' || c == 'p' || c == 'd' ||
           c == '|' || c == '/' || c == '\\' || c == ']' || c == '[' || c == '3' ||
           c == 'o' || c == 'O' || c == '*';
  };
  auto is_nose = [](char c) { return c == '-' || c == 'o' || c == '\'' || c == '^'; };
  // forward: eyes [nose] mouth
  if (is_eyes(t[0])) {
    std::size_t i = 1;
    if (i < t.size() - 1 && is_nose(t[i])) ++i;
    if (i == t.size() - 1 && is_mouth(t[i])) return true;
  }
  // reversed: mouth [nose] eyes, e.g. "(:"
  auto is_rmouth = [](char c) { return c == ')' || c == '(' || c == ']' || c == '['; };
  if (is_rmouth(t[0])) {
    std::size_t i = 1;
    if (i < t.size() - 1 && is_nose(t[i])) ++i;
    if (i == t.size() - 1 && is_eyes(t[i])) return true;
  }
  return false;
}

inline bool starts_url(std::string_view s) {
  return s.substr(0, 7) == "http://" || s.substr(0, 8) == "https://" ||
         s.substr(0, 4) == "www.";
}

}  // namespace detail

// Tweet tokenizer. Lowercases, maps @mentions / URLs / #hashtags to
// placeholder tokens, keeps emoticons whole, and splits other punctuation
// into its own tokens. Token order is preserved; empty input yields an
// empty list.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::function<void(std::string_view)> flush_chunk = [&](std::string_view raw) {
    if (raw.empty()) return;
    if (raw[0] == '@' && raw.size() > 1 && detail::is_word_byte(raw[1])) {
      tokens.emplace_back(kUserToken);
      return;
    }
    if (raw[0] == '#' && raw.size() > 1 && detail::is_word_byte(raw[1])) {
      // hashtag body may carry trailing punctuation: "#MeToo." -> <hashtag> "."
      std::size_t end = 1;
      while (end < raw.size() && detail::is_word_byte(raw[end])) ++end;
      tokens.emplace_back(kHashtagToken);
      flush_chunk(raw.substr(end));
      return;
    }
    if (detail::starts_url(raw)) {
      tokens.emplace_back(kUrlToken);
      return;
    }
    if (detail::is_emoticon(raw)) {
      tokens.emplace_back(raw);
      return;
    }
    // peel leading punctuation
    std::size_t i = 0;
    while (i < raw.size() && !detail::is_word_byte(raw[i])) {
      // a punctuation prefix may itself start an emoticon
      if (detail::is_emoticon(raw.substr(i))) {
        if (i == 0) break;
        std::string low;
        detail::append_lowered(low, raw.substr(0, i));
        for (char c : low) tokens.emplace_back(1, c);
        flush_chunk(raw.substr(i));
        return;
      }
      ++i;
    }
    if (i == raw.size()) {
      // pure punctuation run: one token per character
      for (std::size_t k = 0; k < raw.size(); ++k) tokens.emplace_back(1, raw[k]);
      return;
    }
    for (std::size_t k = 0; k < i; ++k) tokens.emplace_back(1, raw[k]);
    raw.remove_prefix(i);
    // an emoticon glued to the end of a word: "bra:-D" -> "bra" ":-D"
    std::size_t w = 0;
    while (w < raw.size()) {
      unsigned char c = raw[w];
      if (detail::is_word_byte(c) ||
          ((c == '\'' || c == '-') && w > 0 && w + 1 < raw.size() &&
           detail::is_word_byte(raw[w + 1]))) {
        ++w;
        continue;
      }
      break;
    }
    if (w < raw.size() && detail::is_emoticon(raw.substr(w))) {
      std::string head;
      detail::append_lowered(head, raw.substr(0, w));
      tokens.push_back(std::move(head));
      tokens.emplace_back(raw.substr(w));
      return;
    }
    // peel trailing punctuation (apostrophes and hyphens inside words stay)
    std::size_t end = raw.size();
    while (end > 0) {
      unsigned char c = raw[end - 1];
      if (detail::is_word_byte(c)) break;
      if ((c == '\'' || c == '-') && end >= 2 && detail::is_word_byte(raw[end - 2]))
        break;
      --end;
    }
    std::string word;
    detail::append_lowered(word, raw.substr(0, end));
    if (!word.empty()) tokens.push_back(std::move(word));
    if (end < raw.size()) flush_chunk(raw.substr(end));
  };

  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == ' ' || text[i] == '\t' || text[i] == '\n' ||
        text[i] == '\r') {
      if (i > start) flush_chunk(text.substr(start, i - start));
      start = i + 1;
    }
  }
  return tokens;
}

}  // namespace normlens
