#include "support/fixtures.hpp"

#include <atomic>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace longir::testing {

namespace fs = std::filesystem;
using nlohmann::json;

TempDir::TempDir(const std::string& label) {
  static std::atomic<unsigned> counter{0};
  std::random_device rd;
  const auto unique = std::to_string(rd()) + "-" + std::to_string(counter++);
  path_ = fs::temp_directory_path() / (label + "-" + unique);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void write_file(const fs::path& path, const std::string& content) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("fixture: cannot write " + path.string());
  out << content;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("fixture: cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

std::string joined_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) {
    out += l;
    out += '\n';
  }
  return out;
}

}  // namespace

void write_snapshot_dir(const fs::path& parent, const SnapshotSpec& spec) {
  const fs::path dir = parent / spec.id;
  json manifest;
  manifest["snapshot"] = spec.id;
  manifest["timestamp"] = spec.timestamp;
  if (spec.prior) manifest["prior"] = *spec.prior;
  write_file(dir / "metadata.json", manifest.dump(2));
  write_file(dir / "documents.jsonl", joined_lines(spec.documents));
  write_file(dir / "queries.tsv", joined_lines(spec.queries));
  if (spec.qrels) write_file(dir / "qrels.txt", joined_lines(*spec.qrels));
}

void write_meta_dataset(const fs::path& dir, const std::string& name,
                        const std::vector<SnapshotSpec>& snapshots,
                        const std::map<std::string, std::vector<std::string>>&
                            subsets) {
  json manifest;
  manifest["name"] = name;
  auto ids = json::array();
  for (const auto& s : snapshots) ids.push_back(s.id);
  manifest["snapshots"] = ids;
  if (!subsets.empty()) {
    json subs = json::object();
    for (const auto& [sub_name, members] : subsets) subs[sub_name] = members;
    manifest["subsets"] = subs;
  }
  write_file(dir / "metadata.json", manifest.dump(2));
  for (const auto& s : snapshots) write_snapshot_dir(dir, s);
}

std::string doc_line(const std::string& id, const std::string& contents,
                     const std::string& published, const std::string& updated) {
  json j;
  j["id"] = id;
  j["contents"] = contents;
  if (!published.empty()) j["publishedDate"] = published;
  if (!updated.empty()) j["updatedDate"] = updated;
  return j.dump();
}

}  // namespace longir::testing
