#include "longir/tokenizer.hpp"

namespace longir {

Tokenizer::Tokenizer(TokenizerConfig cfg) : config_(std::move(cfg)) {
  for (const auto& w : config_.stopwords) stopword_set_.insert(w);
}

std::vector<std::string> Tokenizer::tokenize(std::string_view text) const {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (current.empty()) return;
    std::string token = config_.stem ? porter_stem(current) : current;
    current.clear();
    if (token.empty()) return;
    if (!stopword_set_.empty() && stopword_set_.count(token)) return;
    out.push_back(std::move(token));
  };
  for (unsigned char c : text) {
    if (c >= 'A' && c <= 'Z') {
      current.push_back(static_cast<char>(c - 'A' + 'a'));
    } else if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c >= 0x80) {
      current.push_back(static_cast<char>(c));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

// ---------------------------------------------------------------------------
// Porter stemmer. Straight transcription of the 1980 algorithm; operates on
// lowercase ASCII words and leaves anything shorter than 3 characters alone.

namespace {

bool is_vowel(const std::string& w, size_t i) {
  switch (w[i]) {
    case 'a': case 'e': case 'i': case 'o': case 'u':
      return true;
    case 'y':
      return i > 0 && !is_vowel(w, i - 1);
    default:
      return false;
  }
}

// The measure m of the stem w[0..len): number of VC sequences.
int measure(const std::string& w, size_t len) {
  int m = 0;
  size_t i = 0;
  while (i < len && !is_vowel(w, i)) ++i;
  while (i < len) {
    while (i < len && is_vowel(w, i)) ++i;
    if (i < len) ++m;
    while (i < len && !is_vowel(w, i)) ++i;
  }
  return m;
}

bool has_vowel(const std::string& w, size_t len) {
  for (size_t i = 0; i < len; ++i)
    if (is_vowel(w, i)) return true;
  return false;
}

bool double_consonant(const std::string& w, size_t len) {
  return len >= 2 && w[len - 1] == w[len - 2] && !is_vowel(w, len - 1);
}

// *o: stem ends cvc where the second c is not w, x or y.
bool cvc(const std::string& w, size_t len) {
  if (len < 3) return false;
  if (is_vowel(w, len - 1) || !is_vowel(w, len - 2) || is_vowel(w, len - 3))
    return false;
  char c = w[len - 1];
  return c != 'w' && c != 'x' && c != 'y';
}

bool ends_with(const std::string& w, std::string_view suffix) {
  return w.size() >= suffix.size() &&
         w.compare(w.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Replaces `suffix` by `repl` when the remaining stem has measure > m_min.
bool replace_if(std::string& w, std::string_view suffix, std::string_view repl,
                int m_min) {
  if (!ends_with(w, suffix)) return false;
  size_t stem_len = w.size() - suffix.size();
  if (measure(w, stem_len) <= m_min) return true;  // matched, no change
  w.resize(stem_len);
  w.append(repl);
  return true;
}

}  // namespace

std::string porter_stem(std::string w) {
  if (w.size() < 3) return w;

  // Step 1a
  if (ends_with(w, "sses")) w.resize(w.size() - 2);
  else if (ends_with(w, "ies")) w.resize(w.size() - 2);
  else if (!ends_with(w, "ss") && ends_with(w, "s")) w.resize(w.size() - 1);

  // Step 1b
  bool step1b_extra = false;
  if (ends_with(w, "eed")) {
    if (measure(w, w.size() - 3) > 0) w.resize(w.size() - 1);
  } else if (ends_with(w, "ed") && has_vowel(w, w.size() - 2)) {
    w.resize(w.size() - 2);
    step1b_extra = true;
  } else if (ends_with(w, "ing") && has_vowel(w, w.size() - 3)) {
    w.resize(w.size() - 3);
    step1b_extra = true;
  }
  if (step1b_extra) {
    if (ends_with(w, "at") || ends_with(w, "bl") || ends_with(w, "iz")) {
      w.push_back('e');
    } else if (double_consonant(w, w.size()) && !ends_with(w, "l") &&
               !ends_with(w, "s") && !ends_with(w, "z")) {
      w.resize(w.size() - 1);
    } else if (measure(w, w.size()) == 1 && cvc(w, w.size())) {
      w.push_back('e');
    }
  }

  // Step 1c
  if (ends_with(w, "y") && has_vowel(w, w.size() - 1)) w.back() = 'i';

  // Step 2
  static const std::pair<std::string_view, std::string_view> step2[] = {
      {"ational", "ate"}, {"tional", "tion"}, {"enci", "ence"}, {"anci", "ance"},
      {"izer", "ize"},    {"abli", "able"},   {"alli", "al"},   {"entli", "ent"},
      {"eli", "e"},       {"ousli", "ous"},   {"ization", "ize"}, {"ation", "ate"},
      {"ator", "ate"},    {"alism", "al"},    {"iveness", "ive"}, {"fulness", "ful"},
      {"ousness", "ous"}, {"aliti", "al"},    {"iviti", "ive"},  {"biliti", "ble"}};
  for (const auto& [suf, rep] : step2)
    if (replace_if(w, suf, rep, 0)) break;

  // Step 3
  static const std::pair<std::string_view, std::string_view> step3[] = {
      {"icate", "ic"}, {"ative", ""}, {"alize", "al"}, {"iciti", "ic"},
      {"ical", "ic"},  {"ful", ""},   {"ness", ""}};
  for (const auto& [suf, rep] : step3)
    if (replace_if(w, suf, rep, 0)) break;

  // Step 4: at most one suffix is removed. "ion" only counts as a match
  // when the stem ends in s or t.
  static const std::string_view step4[] = {
      "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment",
      "ent", "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize"};
  for (std::string_view suf : step4) {
    if (!ends_with(w, suf)) continue;
    size_t stem_len = w.size() - suf.size();
    if (suf == "ion" &&
        !(stem_len >= 1 && (w[stem_len - 1] == 's' || w[stem_len - 1] == 't')))
      continue;
    if (measure(w, stem_len) > 1) w.resize(stem_len);
    break;
  }

  // Step 5a
  if (ends_with(w, "e")) {
    size_t stem_len = w.size() - 1;
    int m = measure(w, stem_len);
    if (m > 1 || (m == 1 && !cvc(w, stem_len))) w.resize(stem_len);
  }
  // Step 5b
  if (measure(w, w.size()) > 1 && double_consonant(w, w.size()) &&
      ends_with(w, "l"))
    w.resize(w.size() - 1);

  return w;
}

}  // namespace longir
