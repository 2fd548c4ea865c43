#include "longir/snapshot.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace longir {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

json read_manifest(const fs::path& dir) {
  const fs::path manifest = dir / "metadata.json";
  if (!fs::exists(manifest))
    fail("missing manifest: " + manifest.string());
  std::ifstream in(manifest);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail("malformed manifest " + manifest.string() + ": " + e.what());
  }
  if (!j.is_object()) fail("manifest must be a JSON object: " + manifest.string());
  return j;
}

std::string require_string(const json& j, const char* key, const fs::path& where) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string())
    fail("manifest " + (where / "metadata.json").string() +
         ": missing string field '" + key + "'");
  return it->get<std::string>();
}

struct SnapshotManifest {
  std::string id;
  Timestamp timestamp;
  bool has_explicit_prior = false;
  std::vector<std::string> prior;  // declared order
};

SnapshotManifest read_snapshot_manifest(const fs::path& dir) {
  json j = read_manifest(dir);
  if (!j.contains("snapshot"))
    fail("manifest " + (dir / "metadata.json").string() +
         ": expected a snapshot manifest with a 'snapshot' field");
  SnapshotManifest m;
  m.id = require_string(j, "snapshot", dir);
  if (m.id != dir.filename().string())
    fail("snapshot id '" + m.id + "' does not match directory name '" +
         dir.filename().string() + "'");
  m.timestamp = Timestamp::parse(require_string(j, "timestamp", dir));
  if (auto it = j.find("prior"); it != j.end()) {
    if (!it->is_array())
      fail("manifest " + (dir / "metadata.json").string() + ": 'prior' must be an array");
    m.has_explicit_prior = true;
    for (const auto& p : *it) {
      if (!p.is_string())
        fail("manifest " + (dir / "metadata.json").string() + ": 'prior' entries must be strings");
      m.prior.push_back(p.get<std::string>());
    }
  }
  return m;
}

void check_snapshot_files(const fs::path& dir) {
  if (!fs::exists(dir / "documents.jsonl"))
    fail("snapshot " + dir.string() + ": missing documents.jsonl");
  if (!fs::exists(dir / "queries.tsv"))
    fail("snapshot " + dir.string() + ": missing queries.tsv");
}

}  // namespace

class DatasetLoader {
public:
  static LoadedDataset load_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) fail("dataset directory not found: " + dir.string());
    json j = read_manifest(dir);
    if (j.contains("snapshots")) return load_meta(dir, j);
    if (j.contains("snapshot")) {
      std::vector<fs::path> stack;
      return LoadedDataset{load_single(dir, stack)};
    }
    fail("manifest " + (dir / "metadata.json").string() +
         ": expected either 'snapshots' (meta dataset) or 'snapshot'");
  }

  static MetaDataset load_meta(const fs::path& dir, const json& j) {
    MetaDataset meta;
    meta.name_ = require_string(j, "name", dir);
    auto ids_json = j.at("snapshots");
    if (!ids_json.is_array())
      fail("manifest " + (dir / "metadata.json").string() + ": 'snapshots' must be an array");

    std::vector<SnapshotManifest> manifests;
    std::set<std::string> ids;
    for (const auto& v : ids_json) {
      if (!v.is_string()) fail("'snapshots' entries must be strings");
      const std::string id = v.get<std::string>();
      if (!ids.insert(id).second) fail("duplicate snapshot id '" + id + "'");
      const fs::path sdir = dir / id;
      if (!fs::is_directory(sdir))
        fail("manifest references nonexistent snapshot directory: " + sdir.string());
      manifests.push_back(read_snapshot_manifest(sdir));
    }

    // Equal timestamps are ambiguous unless both sides declare lineage.
    for (size_t a = 0; a < manifests.size(); ++a)
      for (size_t b = a + 1; b < manifests.size(); ++b)
        if (manifests[a].timestamp == manifests[b].timestamp &&
            (!manifests[a].has_explicit_prior || !manifests[b].has_explicit_prior))
          fail("snapshots '" + manifests[a].id + "' and '" + manifests[b].id +
               "' have identical timestamps and no explicit lineage");

    std::sort(manifests.begin(), manifests.end(),
              [](const SnapshotManifest& a, const SnapshotManifest& b) {
                if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
                return a.id < b.id;
              });

    std::map<std::string, SnapshotPtr> built;
    for (const auto& m : manifests) {
      std::vector<std::string> prior_ids;
      if (m.has_explicit_prior) {
        prior_ids = m.prior;
        std::set<std::string> seen;
        for (const auto& p : prior_ids) {
          if (p == m.id) fail("snapshot '" + m.id + "' lists itself as prior");
          if (!seen.insert(p).second)
            fail("snapshot '" + m.id + "' lists duplicate prior '" + p + "'");
          if (!ids.count(p))
            fail("snapshot '" + m.id + "' references unknown prior '" + p + "'");
        }
      } else {
        for (const auto& other : manifests)
          if (other.timestamp < m.timestamp) prior_ids.push_back(other.id);
      }

      auto ts_of = [&](const std::string& id) -> const Timestamp& {
        auto it = std::find_if(manifests.begin(), manifests.end(),
                               [&](const SnapshotManifest& x) { return x.id == id; });
        return it->timestamp;
      };
      std::sort(prior_ids.begin(), prior_ids.end(),
                [&](const std::string& a, const std::string& b) {
                  const Timestamp &ta = ts_of(a), &tb = ts_of(b);
                  if (ta != tb) return tb < ta;  // most recent first
                  return a < b;
                });
      for (const auto& p : prior_ids) {
        if (!(ts_of(p) < m.timestamp))
          fail("snapshot '" + m.id + "' lists prior '" + p +
               "' whose timestamp is not strictly earlier");
      }
      for (size_t i = 1; i < prior_ids.size(); ++i)
        if (ts_of(prior_ids[i - 1]) == ts_of(prior_ids[i]))
          fail("snapshot '" + m.id + "': priors '" + prior_ids[i - 1] + "' and '" +
               prior_ids[i] + "' have identical timestamps (ambiguous order)");

      auto snap = std::make_shared<Snapshot>();
      snap->id_ = m.id;
      snap->timestamp_ = m.timestamp;
      snap->dir_ = dir / m.id;
      check_snapshot_files(snap->dir_);
      snap->has_qrels_ = fs::exists(snap->dir_ / "qrels.txt");
      snap->prior_ids_ = prior_ids;
      for (const auto& p : prior_ids) snap->priors_.push_back(built.at(p));
      built.emplace(m.id, std::move(snap));
    }

    for (const auto& m : manifests) meta.snapshots_.push_back(built.at(m.id));

    if (auto it = j.find("subsets"); it != j.end()) {
      if (!it->is_object()) fail("'subsets' must be an object");
      for (const auto& [name, list] : it->items()) {
        if (!list.is_array()) fail("subset '" + name + "' must be an array");
        std::vector<std::string> members;
        for (const auto& v : list) {
          const std::string id = v.get<std::string>();
          if (!ids.count(id))
            fail("subset '" + name + "' references unknown snapshot '" + id + "'");
          members.push_back(id);
        }
        meta.subsets_.emplace(name, std::move(members));
      }
    }
    return meta;
  }

  // Loads a standalone snapshot directory; priors resolve to sibling
  // directories, recursively, with cycle detection.
  static SnapshotPtr load_single(const fs::path& dir, std::vector<fs::path>& stack) {
    const fs::path canonical = fs::weakly_canonical(dir);
    if (std::find(stack.begin(), stack.end(), canonical) != stack.end())
      fail("cyclic lineage involving snapshot directory " + dir.string());
    stack.push_back(canonical);

    SnapshotManifest m = read_snapshot_manifest(dir);
    auto snap = std::make_shared<Snapshot>();
    snap->id_ = m.id;
    snap->timestamp_ = m.timestamp;
    snap->dir_ = dir;
    check_snapshot_files(dir);
    snap->has_qrels_ = fs::exists(dir / "qrels.txt");

    std::vector<std::string> prior_ids;
    if (m.has_explicit_prior) {
      prior_ids = m.prior;
    } else {
      // Infer from sibling snapshot directories with earlier timestamps.
      for (const auto& entry : fs::directory_iterator(dir.parent_path())) {
        if (!entry.is_directory() || entry.path() == dir) continue;
        if (!fs::exists(entry.path() / "metadata.json")) continue;
        json sj;
        try {
          sj = read_manifest(entry.path());
        } catch (const std::runtime_error&) {
          continue;
        }
        if (!sj.contains("snapshot") || !sj.contains("timestamp")) continue;
        Timestamp ts = Timestamp::parse(sj.at("timestamp").get<std::string>());
        if (ts < snap->timestamp_)
          prior_ids.push_back(entry.path().filename().string());
        else if (ts == snap->timestamp_)
          fail("sibling snapshot '" + entry.path().filename().string() +
               "' shares timestamp with '" + m.id + "' and no explicit lineage");
      }
      std::sort(prior_ids.begin(), prior_ids.end());
    }

    std::vector<std::pair<Timestamp, SnapshotPtr>> priors;
    std::set<std::string> seen;
    for (const auto& p : prior_ids) {
      if (p == m.id) fail("snapshot '" + m.id + "' lists itself as prior");
      if (!seen.insert(p).second)
        fail("snapshot '" + m.id + "' lists duplicate prior '" + p + "'");
      const fs::path pdir = dir.parent_path() / p;
      if (!fs::is_directory(pdir))
        fail("snapshot '" + m.id + "' references nonexistent prior directory: " +
             pdir.string());
      SnapshotPtr ps = load_single(pdir, stack);
      if (!(ps->get_timestamp() < snap->timestamp_))
        fail("snapshot '" + m.id + "' lists prior '" + p +
             "' whose timestamp is not strictly earlier");
      priors.emplace_back(ps->get_timestamp(), ps);
    }
    std::sort(priors.begin(), priors.end(),
              [](const auto& a, const auto& b) {
                if (a.first != b.first) return b.first < a.first;  // recent first
                return a.second->get_snapshot() < b.second->get_snapshot();
              });
    for (size_t i = 1; i < priors.size(); ++i)
      if (priors[i - 1].first == priors[i].first)
        fail("snapshot '" + m.id + "': priors with identical timestamps (ambiguous order)");

    snap->prior_ids_.clear();
    for (const auto& [ts, p] : priors) {
      (void)ts;
      snap->prior_ids_.push_back(p->get_snapshot());
      snap->priors_.push_back(p);
    }
    stack.pop_back();
    return snap;
  }
};

std::vector<SnapshotPtr> Snapshot::get_prior_datasets(
    std::optional<int> memory) const {
  if (memory && *memory < 1)
    throw std::invalid_argument("memory must be a positive integer");
  if (!memory || static_cast<size_t>(*memory) >= priors_.size()) return priors_;
  return {priors_.begin(), priors_.begin() + *memory};
}

DocsStore Snapshot::docs_store() const { return DocsStore::open(documents_path()); }

std::vector<Query> Snapshot::load_queries() const {
  std::ifstream in(queries_path());
  if (!in) fail("cannot open " + queries_path().string());
  return parse_queries(in);
}

std::optional<Qrels> Snapshot::load_qrels() const {
  if (!has_qrels_) return std::nullopt;
  std::ifstream in(qrels_path());
  if (!in) fail("cannot open " + qrels_path().string());
  return Qrels::parse(in);
}

SnapshotPtr MetaDataset::get(const std::string& id) const {
  for (const auto& s : snapshots_)
    if (s->get_snapshot() == id) return s;
  fail("meta dataset '" + name_ + "' has no snapshot '" + id + "'");
}

MetaDataset MetaDataset::resolve_subset(const std::string& subset_name) const {
  auto it = subsets_.find(subset_name);
  if (it == subsets_.end())
    fail("unknown subset '" + subset_name + "' in meta dataset '" + name_ + "'");
  MetaDataset sub;
  sub.name_ = name_ + "/" + subset_name;
  for (const auto& id : it->second) sub.snapshots_.push_back(get(id));
  std::sort(sub.snapshots_.begin(), sub.snapshots_.end(),
            [](const SnapshotPtr& a, const SnapshotPtr& b) {
              if (a->get_timestamp() != b->get_timestamp())
                return a->get_timestamp() < b->get_timestamp();
              return a->get_snapshot() < b->get_snapshot();
            });
  return sub;
}

LoadedDataset load(const std::filesystem::path& locator) {
  return DatasetLoader::load_dir(locator);
}

LoadedDataset load_locator(const std::string& locator,
                           const std::optional<std::filesystem::path>& registry_root) {
  if (fs::is_directory(locator)) return load(locator);
  if (registry_root) {
    const fs::path direct = *registry_root / locator;
    if (fs::is_directory(direct)) return load(direct);
    const auto slash = locator.rfind('/');
    if (slash != std::string::npos) {
      const std::string head = locator.substr(0, slash);
      const std::string tail = locator.substr(slash + 1);
      const fs::path base = *registry_root / head;
      if (fs::is_directory(base)) {
        LoadedDataset loaded = load(base);
        auto* meta = std::get_if<MetaDataset>(&loaded);
        if (!meta)
          fail("registry id '" + head + "' is a single snapshot, not a meta dataset");
        if (tail == "*") return loaded;
        if (meta->subsets().count(tail))
          return LoadedDataset{meta->resolve_subset(tail)};
        for (const auto& s : meta->get_datasets())
          if (s->get_snapshot() == tail) return LoadedDataset{s};
        fail("meta dataset '" + head + "' has no subset or snapshot '" + tail + "'");
      }
    }
  }
  fail("dataset not found: " + locator +
       (registry_root ? " (registry root: " + registry_root->string() + ")"
                      : " (no registry root configured)"));
}

std::vector<SnapshotPtr> snapshots_of(const LoadedDataset& loaded) {
  if (const auto* meta = std::get_if<MetaDataset>(&loaded))
    return meta->get_datasets();
  return {std::get<SnapshotPtr>(loaded)};
}

}  // namespace longir
