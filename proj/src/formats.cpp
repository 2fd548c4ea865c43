#include "longir/formats.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

namespace longir {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

[[noreturn]] void fail_at(const std::string& source, std::size_t line,
                          const std::string& msg) {
  fail(source + " line " + std::to_string(line) + ": " + msg);
}

std::string_view trim(std::string_view v) {
  while (!v.empty() && (v.front() == ' ' || v.front() == '\t' || v.front() == '\r'))
    v.remove_prefix(1);
  while (!v.empty() && (v.back() == ' ' || v.back() == '\t' || v.back() == '\r'))
    v.remove_suffix(1);
  return v;
}

std::vector<std::string_view> split_ws(std::string_view v) {
  std::vector<std::string_view> out;
  size_t i = 0;
  while (i < v.size()) {
    while (i < v.size() && (v[i] == ' ' || v[i] == '\t' || v[i] == '\r')) ++i;
    size_t j = i;
    while (j < v.size() && v[j] != ' ' && v[j] != '\t' && v[j] != '\r') ++j;
    if (j > i) out.push_back(v.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_int(std::string_view v, long& out) {
  if (v.empty()) return false;
  size_t i = v[0] == '-' || v[0] == '+' ? 1 : 0;
  if (i == v.size()) return false;
  long r = 0;
  for (; i < v.size(); ++i) {
    if (v[i] < '0' || v[i] > '9') return false;
    r = r * 10 + (v[i] - '0');
  }
  out = v[0] == '-' ? -r : r;
  return true;
}

bool parse_double(std::string_view v, double& out) {
  std::string s(v);
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && !s.empty();
}

// Strict UTF-8 validity (rejects overlongs, surrogates, > U+10FFFF).
bool utf8_valid(std::string_view v) {
  size_t i = 0;
  while (i < v.size()) {
    const unsigned char c = v[i];
    size_t len;
    unsigned min_cp, cp;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2; min_cp = 0x80; cp = c & 0x1Fu;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3; min_cp = 0x800; cp = c & 0x0Fu;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4; min_cp = 0x10000; cp = c & 0x07u;
    } else {
      return false;
    }
    if (i + len > v.size()) return false;
    for (size_t j = 1; j < len; ++j) {
      const unsigned char cc = v[i + j];
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3Fu);
    }
    if (cp < min_cp || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
      return false;
    i += len;
  }
  return true;
}

void require_utf8(std::string_view line, const char* source, std::size_t line_no) {
  if (!utf8_valid(line))
    fail_at(source, line_no, "invalid UTF-8 byte sequence");
}

Timestamp parse_doc_date(const json& j, const char* key,
                         const std::string& source, std::size_t line) {
  if (!j.is_string())
    fail_at(source, line, std::string(key) + " must be a string");
  auto t = Timestamp::try_parse(j.get<std::string>());
  if (!t) fail_at(source, line, std::string("unparseable ") + key);
  return *t;
}

bool getline_keep_offset(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

}  // namespace

DocumentReader::DocumentReader(std::istream& in, std::string source)
    : in_(in), source_(std::move(source)) {}

std::optional<Document> DocumentReader::next() {
  std::string line;
  while (getline_keep_offset(in_, line)) {
    ++line_;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail_at(source_, line_, std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) fail_at(source_, line_, "expected a JSON object");
    Document d;
    auto id = j.find("id");
    if (id == j.end() || !id->is_string() || id->get<std::string>().empty())
      fail_at(source_, line_, "missing or empty 'id'");
    d.id = id->get<std::string>();
    auto contents = j.find("contents");
    if (contents == j.end() || !contents->is_string())
      fail_at(source_, line_, "missing 'contents'");
    d.contents = contents->get<std::string>();
    if (auto it = j.find("publishedDate"); it != j.end() && !it->is_null())
      d.published_date = parse_doc_date(*it, "publishedDate", source_, line_);
    if (auto it = j.find("updatedDate"); it != j.end() && !it->is_null())
      d.updated_date = parse_doc_date(*it, "updatedDate", source_, line_);
    return d;
  }
  return std::nullopt;
}

std::vector<Document> parse_documents(std::istream& in) {
  DocumentReader reader(in);
  std::vector<Document> out;
  while (auto d = reader.next()) out.push_back(std::move(*d));
  return out;
}

std::vector<Query> parse_queries(std::istream& in) {
  std::vector<Query> out;
  std::set<std::string, std::less<>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (getline_keep_offset(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    require_utf8(line, "queries", line_no);
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      fail_at("queries", line_no, "expected qid<TAB>text");
    std::string qid(trim(std::string_view(line).substr(0, tab)));
    std::string_view text = trim(std::string_view(line).substr(tab + 1));
    if (qid.empty()) fail_at("queries", line_no, "empty qid");
    if (text.empty()) fail_at("queries", line_no, "empty query text");
    if (!seen.insert(qid).second)
      fail_at("queries", line_no, "duplicate qid '" + qid + "'");
    out.push_back(Query{std::move(qid), std::string(text)});
  }
  return out;
}

Qrels Qrels::parse(std::istream& in) {
  Qrels q;
  std::string line;
  std::size_t line_no = 0;
  while (getline_keep_offset(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    require_utf8(line, "qrels", line_no);
    auto fields = split_ws(line);
    if (fields.size() != 4)
      fail_at("qrels", line_no, "expected 4 fields, got " +
                                     std::to_string(fields.size()));
    long rel = 0;
    if (!parse_int(fields[3], rel))
      fail_at("qrels", line_no, "non-integer relevance grade");
    int grade = static_cast<int>(rel);
    if (grade < 0) {
      grade = 0;
      ++q.clamp_warnings_;
    } else if (grade > 2) {
      grade = 2;
      ++q.clamp_warnings_;
    }
    std::string qid(fields[0]);
    std::string doc(fields[2]);
    auto [it, inserted] = q.by_query_[qid].emplace(doc, grade);
    (void)it;
    if (!inserted)
      fail_at("qrels", line_no,
              "duplicate judgment for (" + qid + ", " + doc + ")");
    ++q.size_;
  }
  return q;
}

Qrels Qrels::from_records(const std::vector<QrelRecord>& records) {
  Qrels q;
  for (const auto& r : records) {
    int grade = std::clamp(r.rel, 0, 2);
    if (grade != r.rel) ++q.clamp_warnings_;
    auto [it, inserted] = q.by_query_[r.qid].emplace(r.doc_id, grade);
    (void)it;
    if (!inserted)
      fail("duplicate judgment for (" + r.qid + ", " + r.doc_id + ")");
    ++q.size_;
  }
  return q;
}

std::optional<int> Qrels::grade(std::string_view qid,
                                std::string_view doc_id) const {
  auto q = by_query_.find(std::string(qid));
  if (q == by_query_.end()) return std::nullopt;
  auto d = q->second.find(std::string(doc_id));
  if (d == q->second.end()) return std::nullopt;
  return d->second;
}

std::vector<RunRecord> parse_run(std::istream& in) {
  std::vector<RunRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (getline_keep_offset(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    require_utf8(line, "run", line_no);
    auto fields = split_ws(line);
    if (fields.size() != 6)
      fail_at("run", line_no,
              "expected 6 fields, got " + std::to_string(fields.size()));
    long rank = 0;
    if (!parse_int(fields[3], rank) || rank < 1)
      fail_at("run", line_no, "rank must be a positive integer");
    double score = 0.0;
    if (!parse_double(fields[4], score))
      fail_at("run", line_no, "unparseable score");
    out.push_back(RunRecord{std::string(fields[0]), std::string(fields[2]),
                            static_cast<int>(rank), score,
                            std::string(fields[5])});
  }
  return out;
}

void validate_run(const std::vector<RunRecord>& records) {
  std::map<std::string, std::vector<const RunRecord*>> by_qid;
  for (const auto& r : records) by_qid[r.qid].push_back(&r);
  for (auto& [qid, rs] : by_qid) {
    std::sort(rs.begin(), rs.end(),
              [](const RunRecord* a, const RunRecord* b) { return a->rank < b->rank; });
    std::set<std::string_view> docs;
    for (size_t i = 0; i < rs.size(); ++i) {
      if (rs[i]->rank != static_cast<int>(i) + 1)
        fail("run for qid '" + qid + "': ranks are not contiguous from 1");
      if (i > 0 && rs[i]->score > rs[i - 1]->score)
        fail("run for qid '" + qid + "': scores increase with rank");
      if (!docs.insert(rs[i]->doc_id).second)
        fail("run for qid '" + qid + "': duplicate doc_id '" + rs[i]->doc_id + "'");
    }
  }
}

void write_run(std::ostream& out, std::vector<RunRecord> records,
               const std::string& tag) {
  std::sort(records.begin(), records.end(),
            [](const RunRecord& a, const RunRecord& b) {
              if (a.qid != b.qid) return a.qid < b.qid;
              return a.rank < b.rank;
            });
  // Rank contiguity per qid is a write-time error.
  for (size_t i = 0; i < records.size(); ++i) {
    int expected = (i == 0 || records[i].qid != records[i - 1].qid)
                       ? 1
                       : records[i - 1].rank + 1;
    if (records[i].rank != expected)
      fail("write_run: rank gap in qid '" + records[i].qid + "' (expected " +
           std::to_string(expected) + ", got " + std::to_string(records[i].rank) +
           ")");
  }
  char buf[64];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%.6f", r.score);
    out << r.qid << " Q0 " << r.doc_id << ' ' << r.rank << ' ' << buf << ' '
        << (tag.empty() ? r.tag : tag) << '\n';
  }
}

// ---------------------------------------------------------------------------
// DocsStore

namespace {

constexpr char kSidecarMagic[4] = {'L', 'I', 'R', 'D'};
constexpr std::uint32_t kSidecarVersion = 2;

std::int64_t mtime_ticks(const std::filesystem::path& p) {
  return std::filesystem::last_write_time(p).time_since_epoch().count();
}

struct OffsetEntry {
  std::string id;
  std::uint64_t offset;
};

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
bool read_pod(std::istream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return static_cast<bool>(in);
}

Document parse_doc_line(const std::string& line, std::size_t line_no) {
  // Reuse the reader on a single line to keep one parsing path.
  struct OneLine : std::streambuf {
    explicit OneLine(const std::string& s) {
      char* p = const_cast<char*>(s.data());
      setg(p, p, p + s.size());
    }
  } sb(line);
  std::istream in(&sb);
  DocumentReader r(in, "documents");
  auto d = r.next();
  if (!d) fail_at("documents", line_no, "empty record");
  return *d;
}

}  // namespace

struct DocsStore::Impl {
  std::filesystem::path path;
  std::vector<OffsetEntry> order;                       // file order
  std::unordered_map<std::string, std::uint64_t> by_id; // id -> byte offset
};

DocsStore DocsStore::open(const std::filesystem::path& documents_file) {
  namespace fs = std::filesystem;
  if (!fs::exists(documents_file))
    fail("documents file not found: " + documents_file.string());
  const std::uint64_t corpus_size = fs::file_size(documents_file);
  auto impl = std::make_shared<Impl>();
  impl->path = documents_file;

  const fs::path sidecar = documents_file.string() + ".offsets";
  const std::int64_t corpus_mtime = mtime_ticks(documents_file);
  bool loaded = false;
  if (fs::exists(sidecar)) {
    std::ifstream in(sidecar, std::ios::binary);
    char magic[4];
    std::uint32_t version = 0;
    std::uint64_t size = 0, count = 0;
    std::int64_t mtime = 0;
    if (in.read(magic, 4) && std::memcmp(magic, kSidecarMagic, 4) == 0 &&
        read_pod(in, version) && version == kSidecarVersion &&
        read_pod(in, size) && size == corpus_size && read_pod(in, mtime) &&
        mtime == corpus_mtime && read_pod(in, count)) {
      std::vector<OffsetEntry> entries;
      entries.reserve(count);
      bool ok = true;
      for (std::uint64_t i = 0; i < count && ok; ++i) {
        std::uint32_t len = 0;
        std::uint64_t off = 0;
        ok = read_pod(in, len);
        std::string id(len, '\0');
        ok = ok && static_cast<bool>(in.read(id.data(), len)) && read_pod(in, off);
        if (ok) entries.push_back({std::move(id), off});
      }
      if (ok) {
        impl->order = std::move(entries);
        loaded = true;
      }
    }
  }

  if (!loaded) {
    std::ifstream in(documents_file, std::ios::binary);
    if (!in) fail("cannot open documents file: " + documents_file.string());
    std::string line;
    std::size_t line_no = 0;
    while (true) {
      const auto offset = static_cast<std::uint64_t>(in.tellg());
      if (!std::getline(in, line)) break;
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (trim(line).empty()) continue;
      Document d = parse_doc_line(line, line_no);
      impl->order.push_back({std::move(d.id), offset});
    }
    // Best-effort sidecar persist; a read-only corpus directory is fine.
    std::ofstream out(sidecar, std::ios::binary | std::ios::trunc);
    if (out) {
      out.write(kSidecarMagic, 4);
      write_pod(out, kSidecarVersion);
      write_pod(out, corpus_size);
      write_pod(out, corpus_mtime);
      write_pod(out, static_cast<std::uint64_t>(impl->order.size()));
      for (const auto& e : impl->order) {
        write_pod(out, static_cast<std::uint32_t>(e.id.size()));
        out.write(e.id.data(), static_cast<std::streamsize>(e.id.size()));
        write_pod(out, e.offset);
      }
    }
  }

  impl->by_id.reserve(impl->order.size());
  for (const auto& e : impl->order) {
    if (!impl->by_id.emplace(e.id, e.offset).second)
      fail("duplicate document id '" + e.id + "' in " + documents_file.string());
  }
  DocsStore store;
  store.impl_ = std::move(impl);
  return store;
}

std::optional<Document> DocsStore::get(std::string_view doc_id) const {
  auto it = impl_->by_id.find(std::string(doc_id));
  if (it == impl_->by_id.end()) return std::nullopt;
  std::ifstream in(impl_->path, std::ios::binary);
  in.seekg(static_cast<std::streamoff>(it->second));
  std::string line;
  if (!std::getline(in, line)) fail("documents file changed under store");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return parse_doc_line(line, 0);
}

void DocsStore::for_each(const std::function<void(const Document&)>& fn) const {
  std::ifstream in(impl_->path, std::ios::binary);
  DocumentReader reader(in);
  while (auto d = reader.next()) fn(*d);
}

std::size_t DocsStore::size() const { return impl_->order.size(); }

std::function<std::optional<Document>()> DocsStore::stream() const {
  auto in = std::make_shared<std::ifstream>(impl_->path, std::ios::binary);
  auto reader = std::make_shared<DocumentReader>(*in);
  return [in, reader]() { return reader->next(); };
}

}  // namespace longir
