#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "longir/formats.hpp"
#include "longir/tokenizer.hpp"

namespace longir {

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

struct Posting {
  std::uint32_t doc = 0;  // ordinal into doc_ids(), ascending
  std::uint32_t tf = 0;

  friend bool operator==(const Posting&, const Posting&) = default;
};

struct TermPostings {
  std::uint64_t cf = 0;  // collection frequency, sum of tf over postings
  std::vector<Posting> postings;
};

struct ScoredDoc {
  std::string doc_id;
  double score = 0.0;

  friend bool operator==(const ScoredDoc&, const ScoredDoc&) = default;
};

struct TfidfTerms {
  std::vector<std::pair<std::string, double>> terms;  // weight-descending
  std::size_t missing_docs = 0;  // requested ids not present in the index
};

/// Immutable handle over a persisted per-snapshot inverted index. Cheap to
/// copy; safe for concurrent searches.
class IndexHandle {
public:
  const std::string& snapshot_id() const;
  std::size_t n_docs() const;
  double avg_doc_len() const;
  std::uint64_t total_doc_len() const;
  std::size_t vocabulary_size() const;
  /// 0 when the term is absent.
  std::size_t df(std::string_view term) const;
  const std::vector<std::string>& doc_ids() const;  // ascending lexicographically
  std::uint32_t doc_len(std::uint32_t ordinal) const;
  std::optional<std::uint32_t> doc_ordinal(std::string_view doc_id) const;
  const std::map<std::string, TermPostings>& postings() const;
  const Tokenizer& tokenizer() const;

private:
  friend IndexHandle build_index(const DocSource&, const std::filesystem::path&,
                                 const std::string&, const TokenizerConfig&);
  friend IndexHandle open_index(const std::filesystem::path&);
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

/// Builds an index over the document stream and persists it under `out_dir`
/// (the directory is created; the artifact is versioned and self-contained).
/// Duplicate doc ids are errors.
IndexHandle build_index(const DocSource& docs, const std::filesystem::path& out_dir,
                        const std::string& snapshot_id,
                        const TokenizerConfig& tok = {});

/// Opens a persisted index from its directory (or the artifact file itself).
/// Unknown magic, a version mismatch, truncation or corruption fail loudly.
IndexHandle open_index(const std::filesystem::path& path);

/// BM25 ranked retrieval: score(d) = sum over matched query terms of
/// idf(t) * tf*(k1+1) / (tf + k1*(1 - b + b*dl/avgdl)) with
/// idf(t) = ln((N - df + 0.5)/(df + 0.5) + 1). Results are score-descending,
/// ties broken by doc_id ascending, at most k entries, zero scores excluded.
std::vector<ScoredDoc> bm25_search(const IndexHandle& index, const Query& query,
                                   std::size_t k, const Bm25Params& params = {});

/// Top-k terms of a document set by weight(t) = (sum of tf over the set) *
/// ln(N/df(t)), excluded terms removed, ties broken lexicographically.
/// Requested doc ids missing from the index are skipped and counted.
TfidfTerms tfidf_top_terms(const IndexHandle& index,
                           const std::vector<std::string>& doc_ids, std::size_t k,
                           const std::set<std::string>& exclude = {});

}  // namespace longir
