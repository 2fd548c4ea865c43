#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace longir::testing {

/// Unique scratch directory removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& label = "longir-test");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

private:
  std::filesystem::path path_;
};

struct SnapshotSpec {
  std::string id;
  std::string timestamp;
  std::optional<std::vector<std::string>> prior;  // nullopt = inferred
  std::vector<std::string> documents;             // JSONL lines
  std::vector<std::string> queries;               // TSV lines
  std::optional<std::vector<std::string>> qrels;  // nullopt = unjudged
};

/// Writes a meta-dataset directory with the given snapshots.
void write_meta_dataset(const std::filesystem::path& dir, const std::string& name,
                        const std::vector<SnapshotSpec>& snapshots,
                        const std::map<std::string, std::vector<std::string>>&
                            subsets = {});

/// Writes one standalone snapshot directory (under `parent`/`spec.id`).
void write_snapshot_dir(const std::filesystem::path& parent,
                        const SnapshotSpec& spec);

std::string doc_line(const std::string& id, const std::string& contents,
                     const std::string& published = "",
                     const std::string& updated = "");

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace longir::testing
