#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "longir/timestamp.hpp"

namespace longir {

struct Document {
  std::string id;
  std::string contents;
  std::optional<Timestamp> published_date;
  std::optional<Timestamp> updated_date;

  friend bool operator==(const Document&, const Document&) = default;
};

struct Query {
  std::string qid;
  std::string text;

  friend bool operator==(const Query&, const Query&) = default;
};

struct QrelRecord {
  std::string qid;
  std::string doc_id;
  int rel = 0;  // graded {0,1,2} after clamping

  friend bool operator==(const QrelRecord&, const QrelRecord&) = default;
};

struct RunRecord {
  std::string qid;
  std::string doc_id;
  int rank = 0;
  double score = 0.0;
  std::string tag;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

/// Streaming reader over newline-delimited JSON documents.
/// Expected keys per line: "id", "contents", optional "publishedDate" and
/// "updatedDate". Unknown keys are ignored. Malformed lines throw with the
/// line number.
class DocumentReader {
public:
  explicit DocumentReader(std::istream& in, std::string source = "documents");
  std::optional<Document> next();
  std::size_t line() const { return line_; }

private:
  std::istream& in_;
  std::string source_;
  std::size_t line_ = 0;
};

std::vector<Document> parse_documents(std::istream& in);

/// Queries are TSV lines "qid<TAB>text". The text is everything after the
/// first tab and must be non-empty after trimming. Duplicate qids are errors.
std::vector<Query> parse_queries(std::istream& in);

/// Relevance judgments with deterministic per-query iteration order.
/// Grades outside {0,1,2} are clamped on parse and counted.
class Qrels {
public:
  Qrels() = default;

  /// Parses whitespace-separated "qid 0 docid rel" lines.
  static Qrels parse(std::istream& in);
  static Qrels from_records(const std::vector<QrelRecord>& records);

  std::optional<int> grade(std::string_view qid, std::string_view doc_id) const;
  const std::map<std::string, std::map<std::string, int>>& by_query() const {
    return by_query_;
  }
  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  std::size_t clamp_warnings() const { return clamp_warnings_; }

private:
  std::map<std::string, std::map<std::string, int>> by_query_;
  std::size_t size_ = 0;
  std::size_t clamp_warnings_ = 0;
};

/// Parses TREC run lines "qid Q0 docid rank score tag" in file order.
std::vector<RunRecord> parse_run(std::istream& in);

/// Validates a parsed run: per qid, ranks must be 1..n without gaps, scores
/// non-increasing with rank, (qid, doc_id) unique. Throws on violation.
void validate_run(const std::vector<RunRecord>& records);

/// Writes records sorted by (qid ascending as strings, rank ascending) with
/// scores formatted to 6 decimal digits. A non-empty tag overrides the
/// records' own tags. Rank gaps within a qid are errors.
void write_run(std::ostream& out, std::vector<RunRecord> records,
               const std::string& tag = "");

/// Random-access view over a JSONL document corpus. The first open scans the
/// file and persists a byte-offset sidecar next to it; later opens reuse the
/// sidecar while the corpus bytes are unchanged. Safe for concurrent readers.
class DocsStore {
public:
  static DocsStore open(const std::filesystem::path& documents_file);

  std::optional<Document> get(std::string_view doc_id) const;
  /// Calls fn for every document in file order.
  void for_each(const std::function<void(const Document&)>& fn) const;
  std::size_t size() const;

  /// Pull-style document stream in file order (shared by index building).
  std::function<std::optional<Document>()> stream() const;

private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

using DocSource = std::function<std::optional<Document>()>;

}  // namespace longir
