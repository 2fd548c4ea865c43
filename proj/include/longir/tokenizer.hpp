#pragma once

#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace longir {

/// Defaults: lowercase, split on non-alphanumeric codepoints, no stemming,
/// no stopword removal.
struct TokenizerConfig {
  bool stem = false;
  std::vector<std::string> stopwords;  // removed after lowercasing/stemming

  friend bool operator==(const TokenizerConfig&, const TokenizerConfig&) = default;
};

class Tokenizer {
public:
  Tokenizer() = default;
  explicit Tokenizer(TokenizerConfig cfg);

  /// Lowercases ASCII letters and splits on any non-alphanumeric codepoint
  /// (bytes >= 0x80 count as word constituents so multi-byte UTF-8 sequences
  /// stay intact). Empty tokens are dropped.
  std::vector<std::string> tokenize(std::string_view text) const;

  const TokenizerConfig& config() const { return config_; }

private:
  TokenizerConfig config_;
  std::unordered_set<std::string> stopword_set_;
};

/// Classic Porter (1980) suffix stripping; expects a lowercase token.
std::string porter_stem(std::string word);

}  // namespace longir
