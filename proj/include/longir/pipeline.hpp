#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "longir/formats.hpp"
#include "longir/index.hpp"
#include "longir/snapshot.hpp"

namespace longir {

// ---------------------------------------------------------------------------
// Access instrumentation

enum class Resource { Documents, Queries, Qrels, Index };

struct AccessEvent {
  std::string snapshot_id;
  Timestamp timestamp;  // of the accessed snapshot
  Resource resource = Resource::Documents;
};

/// Thread-safe append-only log of snapshot data reads, used to check that
/// experiments never touch data from the future.
class AccessLog {
public:
  void record(AccessEvent event);
  std::vector<AccessEvent> events() const;
  void clear();

private:
  mutable std::mutex mutex_;
  std::vector<AccessEvent> events_;
};

/// Events that break temporal isolation for an experiment on `current`:
/// reads of strictly later snapshots, reads of a different snapshot with an
/// equal timestamp, and reads of the current snapshot's own qrels (the
/// hidden labels of the run).
std::vector<AccessEvent> isolation_violations(const std::vector<AccessEvent>& events,
                                              const Snapshot& current);

// ---------------------------------------------------------------------------
// Configs

/// Free parameters of the judgment-history boost. lambda must lie in the
/// open interval (0,1), mu must be positive, memory (if set) positive.
struct QrelBoostConfig {
  double lambda = 0.7;
  double mu = 1.5;
  std::optional<int> memory;

  QrelBoostConfig() { validate(); }
  QrelBoostConfig(double lambda_, double mu_,
                  std::optional<int> memory_ = std::nullopt)
      : lambda(lambda_), mu(mu_), memory(memory_) {
    validate();
  }
  void validate() const;
};

/// Parameters of relevance-feedback query expansion.
struct RFConfig {
  int k = 10;                 // expansion terms
  std::optional<int> memory;  // priors consulted
  int min_rel = 1;            // judgment grade threshold, 1 or 2
  std::filesystem::path indices_root;

  RFConfig() { validate(); }
  RFConfig(int k_, std::optional<int> memory_, int min_rel_,
           std::filesystem::path indices_root_)
      : k(k_), memory(memory_), min_rel(min_rel_),
        indices_root(std::move(indices_root_)) {
    validate();
  }
  void validate() const;
};

// ---------------------------------------------------------------------------
// Rankings

struct RankedEntry {
  std::string doc_id;
  double score0 = 0.0;  // raw retriever score, preserved through reranking
  double score = 0.0;   // current score
  std::uint32_t rank = 0;
};

struct Ranking {
  std::string qid;
  std::vector<RankedEntry> entries;  // rank order
};

// ---------------------------------------------------------------------------
// Qrel boost

/// Multiplicative boost from a judgment history ordered most-recent-first:
/// grade 0 contributes (1-lambda)^2, grade 1 contributes lambda^2, grade 2
/// contributes lambda^2 * mu; unjudged entries contribute 1. The empty
/// history yields 1.
double qrel_boost_factor(const std::vector<std::optional<int>>& history,
                         double lambda, double mu);

/// Core reranking over in-memory prior qrels, most recent first (already
/// limited by memory). Entry scores become score0 times the boost factor;
/// entries re-sort score-descending with doc_id ascending ties and ranks
/// reassigned from 1. A null entry stands for an unjudged prior.
Ranking apply_qrel_boost(Ranking ranking,
                         const std::vector<const Qrels*>& prior_qrels,
                         double lambda, double mu);

/// Snapshot-level variant: looks up the history in the snapshot's prior
/// qrels (limited by config.memory). Priors without qrels contribute
/// unjudged entries.
Ranking apply_qrel_boost(Ranking ranking, const Snapshot& snapshot,
                         const QrelBoostConfig& config,
                         AccessLog* log = nullptr);

// ---------------------------------------------------------------------------
// Relevance feedback

/// Expands the query with the top-k tf-idf terms of documents judged
/// >= min_rel for this qid in the prior snapshots (limited by memory).
/// Term statistics come from the most recent prior's index under
/// config.indices_root. Queries without prior relevant documents pass
/// through unchanged; a needed but missing prior index is an error naming
/// the expected path.
Query expand_query(const Query& query, const Snapshot& snapshot,
                   const RFConfig& config, AccessLog* log = nullptr);

// ---------------------------------------------------------------------------
// Pipelines

enum class StageKind { Rewriter, Retriever, Reranker };

/// Ordered stage names, e.g. {"rf", "bm25", "qrel_boost"}. Valid pipelines
/// are rewriters, then exactly one retriever, then rerankers.
struct PipelineSpec {
  std::vector<std::string> stages;

  /// Parses "rf >> bm25 >> qrel_boost" (whitespace optional; ',' also
  /// accepted as separator).
  static PipelineSpec parse(std::string_view text);
  /// Throws on unknown stage names or invalid ordering.
  void validate() const;
  bool has_stage(std::string_view name) const;
};

StageKind stage_kind(std::string_view name);

struct RunOptions {
  int depth = 1000;
  std::string tag = "run";
  std::filesystem::path indices_root;
  QrelBoostConfig qrel_boost;
  RFConfig rf;
  Bm25Params bm25;
};

/// Executes the pipeline per query over all of the snapshot's queries and
/// returns the run, deterministically. The snapshot's own index must exist
/// under indices_root as "index-<snapshot-id>".
std::vector<RunRecord> run_pipeline(const Snapshot& snapshot,
                                    const PipelineSpec& pipeline,
                                    const RunOptions& options,
                                    AccessLog* log = nullptr);

/// Index directory name for a snapshot id ("index-<id>").
std::filesystem::path index_dir_for(const std::filesystem::path& indices_root,
                                    const std::string& snapshot_id);

}  // namespace longir
