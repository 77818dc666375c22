#pragma once

// Radiology report preprocessing, four steps:
//
// 1. extract_main_content: the text after the first case-insensitive,
//    whole-word occurrence of any keyword (default FINDINGS, REPORT), skipping
//    the separator characters " \t\r\n:-" that follow it, trimmed. Without a
//    keyword the whole trimmed text is kept and flagged "no_keyword"; an empty
//    result is flagged "empty_content".
// 2. clean_and_segment: noise removal, then sentence splitting.
//    Noise rules, in order:
//      a. banners: a run of >= 2 '_', '-' or '=', a span without lowercase
//         letters, '.', '_', '-', '=' or newline, and another such run;
//      b. bracketed tags "[...]";
//      c. leftover runs of >= 2 '_', '-' or '=';
//      d. whitespace runs collapse to one space; ends trimmed.
//    A sentence ends at '.', '!' or '?' followed by a space and an uppercase
//    ASCII letter or digit, unless the word ending there is a listed
//    abbreviation. Decimals never split since no space follows their point.
// 3. filter_and_merge: a sentence of fewer than 3 whitespace tokens is
//    appended (space-joined) to the preceding kept sentence, or dropped and
//    logged when there is none. Empty output is flagged "all_short".
// 4. make_short_reports: consecutive sentence pairs joined by a space; an odd
//    count leaves a final single-sentence unit.

#include <algorithm>
#include <cctype>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "xrprobe/error.hpp"

namespace xrprobe::report {

struct RawReport {
  std::string id;
  std::string text;
};

struct ShortReport {
  std::string id;
  std::vector<std::string> sentences;
  std::vector<std::string> short_units;
};

struct AuditEntry {
  std::string id;
  std::vector<std::string> flags;
  std::vector<std::string> dropped;

  bool empty() const noexcept { return flags.empty() && dropped.empty(); }
};

inline const std::vector<std::string>& default_keywords() {
  static const std::vector<std::string> k{"FINDINGS", "REPORT"};
  return k;
}

inline const std::vector<std::string>& abbreviations() {
  static const std::vector<std::string> a{"Dr.", "e.g.", "i.e.", "No.", "vs.", "approx.", "Fig.", "Mr.", "Mrs.", "Ms."};
  return a;
}

inline constexpr std::size_t kMinSentenceTokens = 3;

inline std::string trim(std::string_view s) {
  const auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  std::size_t b = 0, e = s.size();
  while (b < e && ws(s[b])) ++b;
  while (e > b && ws(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

inline std::size_t count_tokens(std::string_view s) {
  std::size_t n = 0;
  bool in = false;
  for (char c : s) {
    const bool ws = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!ws && !in) ++n;
    in = !ws;
  }
  return n;
}

struct Extracted {
  std::string content;
  std::vector<std::string> flags;
};

inline Extracted extract_main_content(std::string_view text, const std::vector<std::string>& keywords = default_keywords()) {
  const auto alnum = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
  const auto ieq = [](char a, char b) {
    return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
  };
  std::size_t best = std::string_view::npos, best_len = 0;
  for (const auto& kw : keywords) {
    if (kw.empty()) continue;
    for (std::size_t p = 0; p + kw.size() <= text.size(); ++p) {
      if (p >= best) break;
      if (!std::equal(kw.begin(), kw.end(), text.begin() + p, ieq)) continue;
      if (p > 0 && alnum(text[p - 1])) continue;
      if (p + kw.size() < text.size() && alnum(text[p + kw.size()])) continue;
      best = p;
      best_len = kw.size();
      break;
    }
  }
  Extracted out;
  if (best == std::string_view::npos) {
    out.content = trim(text);
    out.flags.push_back("no_keyword");
  } else {
    std::size_t p = best + best_len;
    while (p < text.size() && std::string_view(" \t\r\n:-").find(text[p]) != std::string_view::npos) ++p;
    out.content = trim(text.substr(p));
  }
  if (out.content.empty()) out.flags.push_back("empty_content");
  return out;
}

inline std::string remove_noise(std::string_view content) {
  static const std::regex banner(R"((?:_{2,}|-{2,}|={2,})[^a-z._=\n-]*(?:_{2,}|-{2,}|={2,}))");
  static const std::regex bracket(R"(\[[^\]]*\])");
  static const std::regex runs(R"(_{2,}|-{2,}|={2,})");
  static const std::regex spaces(R"(\s+)");
  std::string s(content);
  s = std::regex_replace(s, banner, " ");
  s = std::regex_replace(s, bracket, " ");
  s = std::regex_replace(s, runs, " ");
  s = std::regex_replace(s, spaces, " ");
  return trim(s);
}

inline std::vector<std::string> clean_and_segment(std::string_view content) {
  const std::string s = remove_noise(content);
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i + 2 < s.size(); ++i) {
    if (s[i] != '.' && s[i] != '!' && s[i] != '?') continue;
    if (s[i + 1] != ' ') continue;
    const auto next = static_cast<unsigned char>(s[i + 2]);
    if (!std::isupper(next) && !std::isdigit(next)) continue;
    const std::size_t word_start = s.rfind(' ', i) == std::string::npos ? 0 : s.rfind(' ', i) + 1;
    const std::string_view word(s.data() + word_start, i + 1 - word_start);
    if (std::find(abbreviations().begin(), abbreviations().end(), word) != abbreviations().end()) continue;
    std::string piece = trim(std::string_view(s).substr(start, i + 1 - start));
    if (!piece.empty()) out.push_back(std::move(piece));
    start = i + 2;
  }
  std::string tail = trim(std::string_view(s).substr(std::min(start, s.size())));
  if (!tail.empty()) out.push_back(std::move(tail));
  return out;
}

struct Filtered {
  std::vector<std::string> sentences;
  std::vector<std::string> dropped;
};

inline Filtered filter_and_merge(const std::vector<std::string>& sentences) {
  Filtered out;
  for (const auto& s : sentences) {
    if (count_tokens(s) >= kMinSentenceTokens) {
      out.sentences.push_back(s);
    } else if (!out.sentences.empty()) {
      out.sentences.back() += " " + s;
    } else {
      out.dropped.push_back(s);
    }
  }
  return out;
}

inline std::vector<std::string> make_short_reports(const std::vector<std::string>& sentences) {
  std::vector<std::string> units;
  for (std::size_t i = 0; i < sentences.size(); i += 2)
    units.push_back(i + 1 < sentences.size() ? sentences[i] + " " + sentences[i + 1] : sentences[i]);
  return units;
}

/// Full pipeline for one report; `audit` receives flags and dropped fragments.
inline ShortReport preprocess(const RawReport& raw, AuditEntry& audit,
                              const std::vector<std::string>& keywords = default_keywords()) {
  if (trim(raw.text).empty()) throw DataError("report '" + raw.id + "' is empty");
  audit = {raw.id, {}, {}};
  auto ex = extract_main_content(raw.text, keywords);
  audit.flags = ex.flags;
  auto filtered = filter_and_merge(clean_and_segment(ex.content));
  for (const auto& d : filtered.dropped) {
    audit.dropped.push_back(d);
  }
  if (!filtered.dropped.empty()) audit.flags.push_back("dropped_fragment");
  if (filtered.sentences.empty() && !ex.content.empty()) audit.flags.push_back("all_short");
  ShortReport out{raw.id, std::move(filtered.sentences), {}};
  out.short_units = make_short_reports(out.sentences);
  return out;
}

inline nlohmann::ordered_json to_json(const ShortReport& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["sentences"] = r.sentences;
  j["short_units"] = r.short_units;
  return j;
}

inline nlohmann::ordered_json to_json(const AuditEntry& a) {
  nlohmann::ordered_json j;
  j["id"] = a.id;
  j["flags"] = a.flags;
  j["dropped"] = a.dropped;
  return j;
}

}  // namespace xrprobe::report
