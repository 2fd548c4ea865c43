#include "longir/index.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace longir {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'L', 'I', 'R', 'X'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr char kArtifactName[] = "postings.bin";

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

// FNV-1a over the written/read byte stream; stored as a trailer so that
// truncated or bit-flipped artifacts are detected on open.
struct Fnv1a {
  std::uint64_t h = 1469598103934665603ull;
  void update(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  }
};

class CheckedWriter {
public:
  explicit CheckedWriter(const fs::path& path)
      : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
    if (!out_) fail("cannot write index artifact: " + path.string());
  }
  void bytes(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    fnv_.update(data, n);
  }
  template <typename T>
  void pod(T v) {
    bytes(&v, sizeof v);
  }
  void str(std::string_view s) {
    pod(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void finish() {
    const std::uint64_t checksum = fnv_.h;
    out_.write(reinterpret_cast<const char*>(&checksum), sizeof checksum);
    out_.flush();
    if (!out_) fail("write failure on index artifact: " + path_.string());
  }

private:
  std::ofstream out_;
  fs::path path_;
  Fnv1a fnv_;
};

class CheckedReader {
public:
  explicit CheckedReader(const fs::path& path)
      : in_(path, std::ios::binary), path_(path) {
    if (!in_) fail("cannot open index artifact: " + path.string());
  }
  void bytes(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
      fail("corrupt index (truncated): " + path_.string());
    fnv_.update(data, n);
  }
  template <typename T>
  T pod() {
    T v;
    bytes(&v, sizeof v);
    return v;
  }
  std::string str(std::size_t max_len = 1u << 28) {
    const auto len = pod<std::uint32_t>();
    if (len > max_len) fail("corrupt index (oversized string): " + path_.string());
    std::string s(len, '\0');
    if (len) bytes(s.data(), len);
    return s;
  }
  void verify_trailer() {
    const std::uint64_t expected = fnv_.h;
    std::uint64_t stored = 0;
    in_.read(reinterpret_cast<char*>(&stored), sizeof stored);
    if (static_cast<std::size_t>(in_.gcount()) != sizeof stored)
      fail("corrupt index (truncated): " + path_.string());
    if (stored != expected)
      fail("corrupt index (checksum mismatch): " + path_.string());
    in_.peek();
    if (!in_.eof())
      fail("corrupt index (trailing bytes): " + path_.string());
  }

private:
  std::ifstream in_;
  fs::path path_;
  Fnv1a fnv_;
};

fs::path artifact_path(const fs::path& path) {
  return fs::is_directory(path) ? path / kArtifactName : path;
}

}  // namespace

struct IndexHandle::Impl {
  std::string snapshot_id;
  Tokenizer tokenizer;
  std::vector<std::string> doc_ids;  // ordinal order == lexicographic order
  std::vector<std::uint32_t> doc_len;
  std::uint64_t total_len = 0;
  std::map<std::string, TermPostings> terms;
  std::unordered_map<std::string, std::uint32_t> ordinal_by_id;

  void finalize_lookup() {
    ordinal_by_id.reserve(doc_ids.size());
    for (std::uint32_t i = 0; i < doc_ids.size(); ++i)
      ordinal_by_id.emplace(doc_ids[i], i);
  }
};

const std::string& IndexHandle::snapshot_id() const { return impl_->snapshot_id; }
std::size_t IndexHandle::n_docs() const { return impl_->doc_ids.size(); }
std::uint64_t IndexHandle::total_doc_len() const { return impl_->total_len; }
double IndexHandle::avg_doc_len() const {
  return impl_->doc_ids.empty()
             ? 0.0
             : static_cast<double>(impl_->total_len) / impl_->doc_ids.size();
}
std::size_t IndexHandle::vocabulary_size() const { return impl_->terms.size(); }
std::size_t IndexHandle::df(std::string_view term) const {
  auto it = impl_->terms.find(std::string(term));
  return it == impl_->terms.end() ? 0 : it->second.postings.size();
}
const std::vector<std::string>& IndexHandle::doc_ids() const { return impl_->doc_ids; }
std::uint32_t IndexHandle::doc_len(std::uint32_t ordinal) const {
  return impl_->doc_len.at(ordinal);
}
std::optional<std::uint32_t> IndexHandle::doc_ordinal(std::string_view doc_id) const {
  auto it = impl_->ordinal_by_id.find(std::string(doc_id));
  if (it == impl_->ordinal_by_id.end()) return std::nullopt;
  return it->second;
}
const std::map<std::string, TermPostings>& IndexHandle::postings() const {
  return impl_->terms;
}
const Tokenizer& IndexHandle::tokenizer() const { return impl_->tokenizer; }

IndexHandle build_index(const DocSource& docs, const fs::path& out_dir,
                        const std::string& snapshot_id,
                        const TokenizerConfig& tok) {
  auto impl = std::make_shared<IndexHandle::Impl>();
  impl->snapshot_id = snapshot_id;
  impl->tokenizer = Tokenizer(tok);

  // First pass over the stream: per-document term counts in arrival order.
  std::vector<std::string> arrival_ids;
  std::vector<std::uint32_t> arrival_len;
  std::map<std::string, std::vector<Posting>> arrival_postings;
  {
    std::unordered_map<std::string, std::uint32_t> seen;
    std::optional<Document> d;
    DocSource source = docs;
    while ((d = source())) {
      const auto ordinal = static_cast<std::uint32_t>(arrival_ids.size());
      if (!seen.emplace(d->id, ordinal).second)
        fail("duplicate doc id '" + d->id + "' while building index");
      auto tokens = impl->tokenizer.tokenize(d->contents);
      std::map<std::string, std::uint32_t> counts;
      for (auto& t : tokens) ++counts[t];
      for (auto& [term, tf] : counts)
        arrival_postings[term].push_back({ordinal, tf});
      arrival_ids.push_back(d->id);
      arrival_len.push_back(static_cast<std::uint32_t>(tokens.size()));
      impl->total_len += tokens.size();
    }
  }

  // Remap ordinals so that ordinal order equals doc_id order; postings then
  // sort by plain integer comparison.
  const auto n = static_cast<std::uint32_t>(arrival_ids.size());
  std::vector<std::uint32_t> by_id(n);
  std::iota(by_id.begin(), by_id.end(), 0u);
  std::sort(by_id.begin(), by_id.end(), [&](std::uint32_t a, std::uint32_t b) {
    return arrival_ids[a] < arrival_ids[b];
  });
  std::vector<std::uint32_t> new_ordinal(n);
  impl->doc_ids.resize(n);
  impl->doc_len.resize(n);
  for (std::uint32_t rank = 0; rank < n; ++rank) {
    new_ordinal[by_id[rank]] = rank;
    impl->doc_ids[rank] = arrival_ids[by_id[rank]];
    impl->doc_len[rank] = arrival_len[by_id[rank]];
  }
  for (auto& [term, postings] : arrival_postings) {
    TermPostings tp;
    tp.postings = std::move(postings);
    for (auto& p : tp.postings) {
      p.doc = new_ordinal[p.doc];
      tp.cf += p.tf;
    }
    std::sort(tp.postings.begin(), tp.postings.end(),
              [](const Posting& a, const Posting& b) { return a.doc < b.doc; });
    impl->terms.emplace(term, std::move(tp));
  }
  impl->finalize_lookup();

  fs::create_directories(out_dir);
  CheckedWriter w(out_dir / kArtifactName);
  w.bytes(kMagic, sizeof kMagic);
  w.pod(kFormatVersion);
  w.pod(static_cast<std::uint8_t>(tok.stem ? 1 : 0));
  w.pod(static_cast<std::uint32_t>(tok.stopwords.size()));
  for (const auto& s : tok.stopwords) w.str(s);
  w.str(snapshot_id);
  w.pod(static_cast<std::uint64_t>(n));
  for (std::uint32_t i = 0; i < n; ++i) {
    w.str(impl->doc_ids[i]);
    w.pod(impl->doc_len[i]);
  }
  w.pod(static_cast<std::uint64_t>(impl->terms.size()));
  for (const auto& [term, tp] : impl->terms) {
    w.str(term);
    w.pod(tp.cf);
    w.pod(static_cast<std::uint64_t>(tp.postings.size()));
    for (const auto& p : tp.postings) {
      w.pod(p.doc);
      w.pod(p.tf);
    }
  }
  w.finish();

  IndexHandle h;
  h.impl_ = std::move(impl);
  return h;
}

IndexHandle open_index(const fs::path& path) {
  const fs::path file = artifact_path(path);
  if (!fs::exists(file)) fail("index artifact not found: " + file.string());
  CheckedReader r(file);

  char magic[4];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    fail("not an index artifact (bad magic): " + file.string());
  const auto version = r.pod<std::uint32_t>();
  if (version != kFormatVersion)
    fail("unsupported index format version " + std::to_string(version) +
         " (expected " + std::to_string(kFormatVersion) + "): " + file.string());

  TokenizerConfig tok;
  tok.stem = r.pod<std::uint8_t>() != 0;
  const auto n_stop = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_stop; ++i) tok.stopwords.push_back(r.str());

  auto impl = std::make_shared<IndexHandle::Impl>();
  impl->tokenizer = Tokenizer(tok);
  impl->snapshot_id = r.str();

  const auto n_docs = r.pod<std::uint64_t>();
  impl->doc_ids.reserve(n_docs);
  impl->doc_len.reserve(n_docs);
  for (std::uint64_t i = 0; i < n_docs; ++i) {
    impl->doc_ids.push_back(r.str());
    if (i > 0 && !(impl->doc_ids[i - 1] < impl->doc_ids[i]))
      fail("corrupt index (doc ids out of order): " + file.string());
    impl->doc_len.push_back(r.pod<std::uint32_t>());
    impl->total_len += impl->doc_len.back();
  }

  const auto n_terms = r.pod<std::uint64_t>();
  std::string prev_term;
  for (std::uint64_t i = 0; i < n_terms; ++i) {
    std::string term = r.str();
    if (i > 0 && !(prev_term < term))
      fail("corrupt index (terms out of order): " + file.string());
    TermPostings tp;
    tp.cf = r.pod<std::uint64_t>();
    const auto n_post = r.pod<std::uint64_t>();
    if (n_post == 0 || n_post > n_docs)
      fail("corrupt index (posting count out of range): " + file.string());
    tp.postings.reserve(n_post);
    std::uint64_t tf_sum = 0;
    for (std::uint64_t p = 0; p < n_post; ++p) {
      Posting post;
      post.doc = r.pod<std::uint32_t>();
      post.tf = r.pod<std::uint32_t>();
      if (post.doc >= n_docs || post.tf == 0)
        fail("corrupt index (bad posting): " + file.string());
      if (p > 0 && post.doc <= tp.postings.back().doc)
        fail("corrupt index (postings out of order): " + file.string());
      tf_sum += post.tf;
      tp.postings.push_back(post);
    }
    if (tf_sum != tp.cf)
      fail("corrupt index (collection frequency mismatch): " + file.string());
    prev_term = term;
    impl->terms.emplace(std::move(term), std::move(tp));
  }
  r.verify_trailer();
  impl->finalize_lookup();

  IndexHandle h;
  h.impl_ = std::move(impl);
  return h;
}

std::vector<ScoredDoc> bm25_search(const IndexHandle& index, const Query& query,
                                   std::size_t k, const Bm25Params& params) {
  if (k < 1) throw std::invalid_argument("bm25_search: k must be >= 1");
  const auto& terms = index.postings();
  const double n_docs = static_cast<double>(index.n_docs());
  const double avgdl = index.avg_doc_len();

  auto tokens = index.tokenizer().tokenize(query.text);
  // Query terms enter the sum once each; keep first-occurrence order so that
  // accumulation is deterministic.
  std::vector<std::string> unique;
  for (auto& t : tokens)
    if (std::find(unique.begin(), unique.end(), t) == unique.end())
      unique.push_back(std::move(t));

  std::vector<double> score(index.n_docs(), 0.0);
  std::vector<std::uint32_t> matched;
  std::vector<char> touched(index.n_docs(), 0);
  for (const auto& term : unique) {
    auto it = terms.find(term);
    if (it == terms.end()) continue;  // df = 0 contributes nothing
    const auto df = static_cast<double>(it->second.postings.size());
    const double idf = std::log((n_docs - df + 0.5) / (df + 0.5) + 1.0);
    for (const auto& p : it->second.postings) {
      const double tf = p.tf;
      const double dl = index.doc_len(p.doc);
      const double denom =
          tf + params.k1 * (1.0 - params.b + params.b * dl / avgdl);
      score[p.doc] += idf * tf * (params.k1 + 1.0) / denom;
      if (!touched[p.doc]) {
        touched[p.doc] = 1;
        matched.push_back(p.doc);
      }
    }
  }

  std::sort(matched.begin(), matched.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (score[a] != score[b]) return score[a] > score[b];
    return a < b;  // ordinal order equals doc_id order
  });
  std::vector<ScoredDoc> out;
  out.reserve(std::min(k, matched.size()));
  for (auto d : matched) {
    if (out.size() == k) break;
    if (score[d] == 0.0) continue;
    out.push_back({index.doc_ids()[d], score[d]});
  }
  return out;
}

TfidfTerms tfidf_top_terms(const IndexHandle& index,
                           const std::vector<std::string>& doc_ids, std::size_t k,
                           const std::set<std::string>& exclude) {
  if (k < 1) throw std::invalid_argument("tfidf_top_terms: k must be >= 1");
  TfidfTerms result;
  std::vector<char> in_set(index.n_docs(), 0);
  std::set<std::string> distinct(doc_ids.begin(), doc_ids.end());
  for (const auto& id : distinct) {
    if (auto ord = index.doc_ordinal(id))
      in_set[*ord] = 1;
    else
      ++result.missing_docs;
  }

  const double n_docs = static_cast<double>(index.n_docs());
  std::vector<std::pair<std::string, double>> candidates;
  for (const auto& [term, tp] : index.postings()) {
    if (exclude.count(term)) continue;
    std::uint64_t tf_sum = 0;
    for (const auto& p : tp.postings)
      if (in_set[p.doc]) tf_sum += p.tf;
    if (tf_sum == 0) continue;
    const double weight =
        static_cast<double>(tf_sum) * std::log(n_docs / tp.postings.size());
    candidates.emplace_back(term, weight);
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const auto& a, const auto& b) {
              if (a.second != b.second) return a.second > b.second;
              return a.first < b.first;
            });
  if (candidates.size() > k) candidates.resize(k);
  result.terms = std::move(candidates);
  return result;
}

}  // namespace longir
