#pragma once

// Label canonicalization and synonym grouping.
//
// Model responses end with a bracketed summary such as "[happy, surprised]".
// The last bracketed block is extracted, split on ASCII/full-width/enumeration
// commas, normalized, and de-duplicated into a LabelSet. A SynonymLexicon maps
// labels onto synonym groups for scoring; labels it does not know are their
// own singleton group.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ovemo/error.hpp"
#include "ovemo/jsonl.hpp"

namespace ovemo {

namespace utf8 {

inline constexpr char32_t kReplacement = 0xFFFD;

inline std::u32string decode(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    int len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      cp = b0;
      len = 1;
    } else if ((b0 & 0xE0) == 0xC0) {
      cp = b0 & 0x1F;
      len = 2;
    } else if ((b0 & 0xF0) == 0xE0) {
      cp = b0 & 0x0F;
      len = 3;
    } else if ((b0 & 0xF8) == 0xF0) {
      cp = b0 & 0x07;
      len = 4;
    } else {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    if (i + static_cast<std::size_t>(len) > s.size()) {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    bool valid = true;
    for (int k = 1; k < len; ++k) {
      const auto b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80) {
        valid = false;
        break;
      }
      cp = (cp << 6) | (b & 0x3F);
    }
    if (!valid) {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += static_cast<std::size_t>(len);
  }
  return out;
}

inline void append(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

inline std::string encode(std::u32string_view cps) {
  std::string out;
  out.reserve(cps.size());
  for (char32_t cp : cps) append(out, cp);
  return out;
}

}  // namespace utf8

namespace detail {

inline bool is_space(char32_t c) {
  return (c >= 0x09 && c <= 0x0D) || c == 0x20 || c == 0x85 || c == 0xA0 || c == 0x1680 ||
         (c >= 0x2000 && c <= 0x200B) || c == 0x2028 || c == 0x2029 || c == 0x202F ||
         c == 0x205F || c == 0x3000 || c == 0xFEFF;
}

inline bool is_punct(char32_t c) {
  if (c < 0x80) {
    return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
           (c >= 0x7B && c <= 0x7E);
  }
  switch (c) {
    case 0xA1: case 0xA7: case 0xAB: case 0xB6: case 0xB7: case 0xBB: case 0xBF:
    case 0x30FB:
      return true;
    default:
      break;
  }
  return (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205E) ||
         (c >= 0x3001 && c <= 0x3003) || (c >= 0x3008 && c <= 0x3011) ||
         (c >= 0x3014 && c <= 0x301F) || (c >= 0xFF01 && c <= 0xFF0F) ||
         (c >= 0xFF1A && c <= 0xFF20) || (c >= 0xFF3B && c <= 0xFF40) ||
         (c >= 0xFF5B && c <= 0xFF65);
}

// Simple case folding for Latin, Greek and Cyrillic. Lowercase code points
// always map to themselves.
inline char32_t to_lower(char32_t c) {
  if (c >= U'A' && c <= U'Z') return c + 0x20;
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 0x20;
  if ((c >= 0x100 && c <= 0x137) || (c >= 0x14A && c <= 0x177)) return c | 1U;
  if (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) return c + 0x20;
  if (c >= 0x400 && c <= 0x40F) return c + 0x50;
  if (c >= 0x410 && c <= 0x42F) return c + 0x20;
  if (c >= 0xFF21 && c <= 0xFF3A) return c + 0x20;
  return c;
}

}  // namespace detail

// Lowercases, strips surrounding whitespace and punctuation, and collapses
// internal whitespace runs to one ASCII space. Idempotent.
inline std::string normalize_label(std::string_view raw) {
  const std::u32string cps = utf8::decode(raw);
  std::size_t begin = 0;
  std::size_t end = cps.size();
  auto strippable = [](char32_t c) { return detail::is_space(c) || detail::is_punct(c); };
  while (begin < end && strippable(cps[begin])) ++begin;
  while (end > begin && strippable(cps[end - 1])) --end;
  if (begin == end) {
    throw Error(ErrorCode::kEmptyAfterNormalization,
                "label '" + std::string(raw) + "' is empty after normalization");
  }
  std::u32string out;
  out.reserve(end - begin);
  bool in_space = false;
  for (std::size_t i = begin; i < end; ++i) {
    const char32_t c = cps[i];
    if (detail::is_space(c)) {
      in_space = true;
      continue;
    }
    if (in_space) out.push_back(U' ');
    in_space = false;
    out.push_back(detail::to_lower(c));
  }
  return utf8::encode(out);
}

// Ordered, duplicate-free collection of normalized labels. A default-constructed
// (empty) LabelSet stands for an empty prediction.
class LabelSet {
 public:
  LabelSet() = default;
  LabelSet(std::initializer_list<std::string_view> labels) {
    for (auto label : labels) insert(label);
  }

  // Normalizes `label` and appends it unless already present.
  bool insert(std::string_view label) {
    std::string canonical = normalize_label(label);
    for (const auto& existing : labels_) {
      if (existing == canonical) return false;
    }
    labels_.push_back(std::move(canonical));
    return true;
  }

  bool contains(std::string_view label) const {
    for (const auto& existing : labels_) {
      if (existing == label) return true;
    }
    return false;
  }

  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  auto begin() const { return labels_.begin(); }
  auto end() const { return labels_.end(); }

  bool operator==(const LabelSet&) const = default;

 private:
  std::vector<std::string> labels_;
};

inline std::vector<std::string> extract_label_block(std::string_view text) {
  const std::size_t close = text.rfind(']');
  const std::size_t open = close == std::string_view::npos ? close : text.rfind('[', close);
  if (open == std::string_view::npos) {
    throw Error(ErrorCode::kNoLabelBlock, "response contains no [..] label block");
  }
  const std::string_view body = text.substr(open + 1, close - open - 1);

  static constexpr std::string_view kSeparators[] = {",", "\xEF\xBC\x8C" /* ， */,
                                                     "\xE3\x80\x81" /* 、 */};
  auto trim = [](std::string_view item) {
    const std::u32string cps = utf8::decode(item);
    std::size_t b = 0;
    std::size_t e = cps.size();
    while (b < e && detail::is_space(cps[b])) ++b;
    while (e > b && detail::is_space(cps[e - 1])) --e;
    return utf8::encode(std::u32string_view(cps).substr(b, e - b));
  };

  std::vector<std::string> items;
  std::size_t pos = 0;
  while (pos <= body.size()) {
    std::size_t next = std::string_view::npos;
    std::size_t sep_len = 0;
    for (auto sep : kSeparators) {
      const std::size_t at = body.find(sep, pos);
      if (at < next) {
        next = at;
        sep_len = sep.size();
      }
    }
    const std::string_view piece =
        body.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos);
    std::string item = trim(piece);
    if (!item.empty()) items.push_back(std::move(item));
    if (next == std::string_view::npos) break;
    pos = next + sep_len;
  }
  return items;
}

struct LabelSetResult {
  LabelSet labels;
  std::vector<std::string> warnings;
};

// Items that normalize to nothing are skipped with a warning; throws EmptySet
// when nothing survives.
inline LabelSetResult to_label_set(const std::vector<std::string>& raw) {
  LabelSetResult result;
  for (const auto& item : raw) {
    try {
      result.labels.insert(item);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kEmptyAfterNormalization) throw;
      result.warnings.push_back(e.what());
    }
  }
  if (result.labels.empty()) {
    throw Error(ErrorCode::kEmptySet, "no label survived normalization");
  }
  return result;
}

// Identifies a synonym group. Lexicon groups and implicit singleton groups live
// in separate namespaces so an unknown label can never alias a named group.
struct GroupId {
  bool from_lexicon = false;
  std::string name;

  auto operator<=>(const GroupId&) const = default;
  bool operator==(const GroupId&) const = default;

  std::string str() const { return (from_lexicon ? "group:" : "label:") + name; }
};

class SynonymLexicon {
 public:
  SynonymLexicon() = default;

  // Members are normalized. A label may belong to one group only.
  void add_group(const std::string& group, const std::vector<std::string>& members) {
    if (group.empty()) throw Error(ErrorCode::kParse, "lexicon group name is empty");
    if (representative_.count(group)) {
      throw Error(ErrorCode::kParse, "lexicon group '" + group + "' defined twice");
    }
    if (members.empty()) {
      throw Error(ErrorCode::kParse, "lexicon group '" + group + "' has no members");
    }
    std::vector<std::string> canonical;
    for (const auto& m : members) {
      std::string label = normalize_label(m);
      auto it = label_to_group_.find(label);
      if (it != label_to_group_.end() && it->second != group) {
        throw Error(ErrorCode::kParse, "label '" + label + "' belongs to both '" + it->second +
                                           "' and '" + group + "'");
      }
      canonical.push_back(std::move(label));
    }
    for (const auto& label : canonical) label_to_group_.emplace(label, group);
    representative_.emplace(group, canonical.front());
    group_order_.push_back(group);
  }

  GroupId group_of(std::string_view label) const {
    auto it = label_to_group_.find(std::string(label));
    if (it == label_to_group_.end()) return {false, std::string(label)};
    return {true, it->second};
  }

  const std::string& representative(const std::string& group) const {
    return representative_.at(group);
  }

  const std::vector<std::string>& groups() const { return group_order_; }
  std::size_t label_count() const { return label_to_group_.size(); }
  bool empty() const { return group_order_.empty(); }

  // One JSON object per line: {"group": "...", "members": ["...", ...]}.
  static SynonymLexicon parse(std::istream& in, const std::string& source) {
    SynonymLexicon lexicon;
    for_each_jsonl(in, source, [&](const Json& j, std::size_t line) {
      const std::string where = source + ":" + std::to_string(line);
      try {
        lexicon.add_group(detail::require_string(j, "group", where),
                          detail::require_string_array(j, "members", where));
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kEmptyAfterNormalization) {
          throw Error(ErrorCode::kParse, where + ": " + e.what());
        }
        throw;
      }
    });
    return lexicon;
  }

  static SynonymLexicon load(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::kConfig, "cannot open lexicon " + path.string());
    return parse(in, path.string());
  }

 private:
  std::unordered_map<std::string, std::string> label_to_group_;
  std::map<std::string, std::string> representative_;
  std::vector<std::string> group_order_;
};

// Maps each label to its group, keeping the first occurrence of every group.
inline std::vector<GroupId> to_group_set(const LabelSet& labels, const SynonymLexicon& lexicon) {
  std::vector<GroupId> groups;
  groups.reserve(labels.size());
  for (const auto& label : labels) {
    GroupId g = lexicon.group_of(label);
    if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(std::move(g));
  }
  return groups;
}

}  // namespace ovemo
