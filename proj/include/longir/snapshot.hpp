#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "longir/formats.hpp"
#include "longir/timestamp.hpp"

namespace longir {

class Snapshot;
using SnapshotPtr = std::shared_ptr<const Snapshot>;

/// One timestamped capture of a search setting: a document corpus, queries
/// and (optionally) qrels, plus lineage to strictly earlier snapshots.
/// Immutable after load; safe to share across threads.
class Snapshot {
public:
  /// The snapshot name; equals the on-disk directory name.
  const std::string& get_snapshot() const { return id_; }
  const Timestamp& get_timestamp() const { return timestamp_; }

  /// Prior snapshots, most recent first. With memory = m, at most the first
  /// m entries. memory < 1 is an argument error.
  std::vector<SnapshotPtr> get_prior_datasets(
      std::optional<int> memory = std::nullopt) const;

  const std::vector<std::string>& prior_ids() const { return prior_ids_; }

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path documents_path() const { return dir_ / "documents.jsonl"; }
  std::filesystem::path queries_path() const { return dir_ / "queries.tsv"; }
  std::filesystem::path qrels_path() const { return dir_ / "qrels.txt"; }
  bool has_qrels() const { return has_qrels_; }

  DocsStore docs_store() const;
  std::vector<Query> load_queries() const;
  /// nullopt when the snapshot is unjudged.
  std::optional<Qrels> load_qrels() const;

private:
  friend class DatasetLoader;

  std::string id_;
  Timestamp timestamp_;
  std::filesystem::path dir_;
  bool has_qrels_ = false;
  std::vector<std::string> prior_ids_;        // most recent first
  std::vector<SnapshotPtr> priors_;           // parallel to prior_ids_
};

/// An ordered family of snapshots of the same search setting.
class MetaDataset {
public:
  const std::string& name() const { return name_; }

  /// All member snapshots, ascending by timestamp.
  std::vector<SnapshotPtr> get_datasets() const { return snapshots_; }

  /// Member lookup by id; throws if unknown.
  SnapshotPtr get(const std::string& id) const;

  const std::map<std::string, std::vector<std::string>>& subsets() const {
    return subsets_;
  }

  /// A view containing only the snapshots of a declared subset. Members keep
  /// their full original lineage; priors may lie outside the subset.
  MetaDataset resolve_subset(const std::string& subset_name) const;

private:
  friend class DatasetLoader;

  std::string name_;
  std::vector<SnapshotPtr> snapshots_;  // ascending by (timestamp, id)
  std::map<std::string, std::vector<std::string>> subsets_;
};

using LoadedDataset = std::variant<MetaDataset, SnapshotPtr>;

/// Loads a dataset directory. A `metadata.json` declaring "snapshots" yields
/// a MetaDataset with lineage resolved; one declaring a single "snapshot"
/// yields that Snapshot (priors resolved from sibling directories).
LoadedDataset load(const std::filesystem::path& locator);

/// Resolves a locator that is either a filesystem path or a registry id
/// under `registry_root`: "<name>", "<name>/*", "<name>/<subset>" or
/// "<name>/<snapshot-id>".
LoadedDataset load_locator(const std::string& locator,
                           const std::optional<std::filesystem::path>&
                               registry_root = std::nullopt);

/// The snapshots of either variant, ascending by timestamp.
std::vector<SnapshotPtr> snapshots_of(const LoadedDataset& loaded);

}  // namespace longir
