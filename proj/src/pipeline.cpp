#include "longir/pipeline.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace longir {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

}  // namespace

// ---------------------------------------------------------------------------
// AccessLog

void AccessLog::record(AccessEvent event) {
  std::lock_guard<std::mutex> lock(mutex_);
  events_.push_back(std::move(event));
}

std::vector<AccessEvent> AccessLog::events() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return events_;
}

void AccessLog::clear() {
  std::lock_guard<std::mutex> lock(mutex_);
  events_.clear();
}

std::vector<AccessEvent> isolation_violations(const std::vector<AccessEvent>& events,
                                              const Snapshot& current) {
  std::vector<AccessEvent> out;
  for (const auto& e : events) {
    const bool future = current.get_timestamp() < e.timestamp;
    const bool same_time_sibling = e.timestamp == current.get_timestamp() &&
                                   e.snapshot_id != current.get_snapshot();
    const bool own_qrels = e.snapshot_id == current.get_snapshot() &&
                           e.resource == Resource::Qrels;
    if (future || same_time_sibling || own_qrels) out.push_back(e);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Configs

void QrelBoostConfig::validate() const {
  if (!(lambda > 0.0 && lambda < 1.0))
    throw std::invalid_argument("qrel boost: lambda must lie in (0,1)");
  if (!(mu > 0.0)) throw std::invalid_argument("qrel boost: mu must be > 0");
  if (memory && *memory < 1)
    throw std::invalid_argument("qrel boost: memory must be a positive integer");
}

void RFConfig::validate() const {
  if (k < 1)
    throw std::invalid_argument("relevance feedback: k must be >= 1");
  if (memory && *memory < 1)
    throw std::invalid_argument("relevance feedback: memory must be a positive integer");
  if (min_rel != 1 && min_rel != 2)
    throw std::invalid_argument("relevance feedback: min_rel must be 1 or 2");
}

// ---------------------------------------------------------------------------
// Qrel boost

double qrel_boost_factor(const std::vector<std::optional<int>>& history,
                         double lambda, double mu) {
  QrelBoostConfig check(lambda, mu);  // bounds enforcement
  (void)check;
  double factor = 1.0;
  for (const auto& grade : history) {
    if (!grade) continue;  // unjudged: neutral element
    switch (*grade) {
      case 0: factor *= (1.0 - lambda) * (1.0 - lambda); break;
      case 1: factor *= lambda * lambda; break;
      case 2: factor *= lambda * lambda * mu; break;
      default:
        throw std::invalid_argument("qrel boost: grades must lie in {0,1,2}");
    }
  }
  return factor;
}

namespace {

Ranking rerank_with_history(
    Ranking ranking,
    const std::function<std::optional<int>(const std::string& qid,
                                           const std::string& doc_id, size_t prior)>&
        grade_at,
    size_t n_priors, double lambda, double mu) {
  for (auto& entry : ranking.entries) {
    std::vector<std::optional<int>> history;
    history.reserve(n_priors);
    for (size_t i = 0; i < n_priors; ++i)
      history.push_back(grade_at(ranking.qid, entry.doc_id, i));
    entry.score = entry.score0 * qrel_boost_factor(history, lambda, mu);
  }
  std::sort(ranking.entries.begin(), ranking.entries.end(),
            [](const RankedEntry& a, const RankedEntry& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.doc_id < b.doc_id;
            });
  for (size_t i = 0; i < ranking.entries.size(); ++i)
    ranking.entries[i].rank = static_cast<std::uint32_t>(i) + 1;
  return ranking;
}

}  // namespace

Ranking apply_qrel_boost(Ranking ranking,
                         const std::vector<const Qrels*>& prior_qrels,
                         double lambda, double mu) {
  return rerank_with_history(
      std::move(ranking),
      [&](const std::string& qid, const std::string& doc_id,
          size_t prior) -> std::optional<int> {
        const Qrels* q = prior_qrels[prior];
        if (!q) return std::nullopt;
        return q->grade(qid, doc_id);
      },
      prior_qrels.size(), lambda, mu);
}

namespace {

// Prior qrels of a snapshot, most recent first, limited by memory. Missing
// qrels stay unloaded (unjudged). Reads are logged per prior.
std::vector<std::shared_ptr<const Qrels>> load_prior_qrels(
    const Snapshot& snapshot, std::optional<int> memory, AccessLog* log) {
  std::vector<std::shared_ptr<const Qrels>> out;
  for (const auto& prior : snapshot.get_prior_datasets(memory)) {
    if (!prior->has_qrels()) {
      out.push_back(nullptr);
      continue;
    }
    if (log)
      log->record({prior->get_snapshot(), prior->get_timestamp(), Resource::Qrels});
    out.push_back(std::make_shared<Qrels>(*prior->load_qrels()));
  }
  return out;
}

}  // namespace

Ranking apply_qrel_boost(Ranking ranking, const Snapshot& snapshot,
                         const QrelBoostConfig& config, AccessLog* log) {
  config.validate();
  auto prior_qrels = load_prior_qrels(snapshot, config.memory, log);
  std::vector<const Qrels*> raw;
  raw.reserve(prior_qrels.size());
  for (const auto& q : prior_qrels) raw.push_back(q.get());
  return apply_qrel_boost(std::move(ranking), raw, config.lambda, config.mu);
}

// ---------------------------------------------------------------------------
// Stages

namespace {

class QrelBoostStage {
public:
  QrelBoostStage(const Snapshot& snapshot, const QrelBoostConfig& config,
                 AccessLog* log)
      : lambda_(config.lambda), mu_(config.mu) {
    config.validate();
    prior_qrels_ = load_prior_qrels(snapshot, config.memory, log);
  }

  Ranking rerank(Ranking ranking) const {
    std::vector<const Qrels*> raw;
    raw.reserve(prior_qrels_.size());
    for (const auto& q : prior_qrels_) raw.push_back(q.get());
    return apply_qrel_boost(std::move(ranking), raw, lambda_, mu_);
  }

private:
  std::vector<std::shared_ptr<const Qrels>> prior_qrels_;
  double lambda_;
  double mu_;
};

class RfStage {
public:
  RfStage(const Snapshot& snapshot, const RFConfig& config, AccessLog* log)
      : k_(static_cast<size_t>(config.k)), min_rel_(config.min_rel) {
    config.validate();
    auto priors = snapshot.get_prior_datasets(config.memory);
    auto prior_qrels = load_prior_qrels(snapshot, config.memory, log);

    bool any_feedback = false;
    for (size_t i = 0; i < priors.size(); ++i) {
      if (!prior_qrels[i]) continue;
      for (const auto& [qid, docs] : prior_qrels[i]->by_query()) {
        auto& collected = feedback_docs_[qid];
        for (const auto& [doc_id, grade] : docs) {
          if (grade < min_rel_) continue;
          if (std::find(collected.begin(), collected.end(), doc_id) ==
              collected.end())
            collected.push_back(doc_id);
          any_feedback = true;
        }
      }
    }

    // Term statistics come from the most recent prior's index; only open it
    // when some query can actually be expanded.
    if (any_feedback) {
      const auto& recent = priors.front();
      const fs::path dir = index_dir_for(config.indices_root, recent->get_snapshot());
      if (!fs::exists(dir))
        fail("relevance feedback: missing prior index for snapshot '" +
             recent->get_snapshot() + "': expected " + dir.string());
      if (log)
        log->record({recent->get_snapshot(), recent->get_timestamp(), Resource::Index});
      feedback_index_ = open_index(dir);
    }
  }

  Query rewrite(const Query& query) const {
    auto it = feedback_docs_.find(query.qid);
    if (it == feedback_docs_.end() || it->second.empty()) return query;
    const auto& index = *feedback_index_;
    auto query_tokens = index.tokenizer().tokenize(query.text);
    std::set<std::string> exclude(query_tokens.begin(), query_tokens.end());
    auto top = tfidf_top_terms(index, it->second, k_, exclude);
    if (top.terms.empty()) return query;
    Query expanded = query;
    for (const auto& [term, weight] : top.terms) {
      (void)weight;
      expanded.text += ' ';
      expanded.text += term;
    }
    return expanded;
  }

private:
  std::map<std::string, std::vector<std::string>> feedback_docs_;  // qid -> docs
  std::optional<IndexHandle> feedback_index_;
  size_t k_;
  int min_rel_;
};

}  // namespace

Query expand_query(const Query& query, const Snapshot& snapshot,
                   const RFConfig& config, AccessLog* log) {
  RfStage stage(snapshot, config, log);
  return stage.rewrite(query);
}

// ---------------------------------------------------------------------------
// Pipeline composition

StageKind stage_kind(std::string_view name) {
  if (name == "rf") return StageKind::Rewriter;
  if (name == "bm25") return StageKind::Retriever;
  if (name == "qrel_boost") return StageKind::Reranker;
  fail("unknown pipeline stage '" + std::string(name) + "'");
}

PipelineSpec PipelineSpec::parse(std::string_view text) {
  PipelineSpec spec;
  std::string current;
  auto flush = [&] {
    std::string name = current;
    current.clear();
    // trim
    while (!name.empty() && name.front() == ' ') name.erase(name.begin());
    while (!name.empty() && name.back() == ' ') name.pop_back();
    if (!name.empty()) spec.stages.push_back(name);
  };
  for (size_t i = 0; i < text.size(); ++i) {
    if (text[i] == ',' || (text[i] == '>' && i + 1 < text.size() && text[i + 1] == '>')) {
      flush();
      if (text[i] == '>') ++i;
    } else {
      current.push_back(text[i]);
    }
  }
  flush();
  if (spec.stages.empty()) fail("empty pipeline");
  return spec;
}

void PipelineSpec::validate() const {
  if (stages.empty()) fail("empty pipeline");
  int retrievers = 0;
  bool seen_retriever = false;
  for (const auto& name : stages) {
    const StageKind kind = stage_kind(name);
    switch (kind) {
      case StageKind::Rewriter:
        if (seen_retriever)
          fail("invalid stage order: rewriter '" + name + "' after the retriever");
        break;
      case StageKind::Retriever:
        if (seen_retriever) fail("invalid pipeline: more than one retriever");
        seen_retriever = true;
        ++retrievers;
        break;
      case StageKind::Reranker:
        if (!seen_retriever)
          fail("invalid stage order: reranker '" + name + "' before the retriever");
        break;
    }
  }
  if (retrievers != 1) fail("invalid pipeline: exactly one retriever required");
}

bool PipelineSpec::has_stage(std::string_view name) const {
  return std::find(stages.begin(), stages.end(), std::string(name)) != stages.end();
}

fs::path index_dir_for(const fs::path& indices_root, const std::string& snapshot_id) {
  return indices_root / ("index-" + snapshot_id);
}

std::vector<RunRecord> run_pipeline(const Snapshot& snapshot,
                                    const PipelineSpec& pipeline,
                                    const RunOptions& options,
                                    AccessLog* log) {
  pipeline.validate();
  if (options.depth < 1) throw std::invalid_argument("depth must be >= 1");

  const fs::path own_index_dir =
      index_dir_for(options.indices_root, snapshot.get_snapshot());
  if (!fs::exists(own_index_dir))
    fail("missing index for snapshot '" + snapshot.get_snapshot() +
         "': expected " + own_index_dir.string());
  if (log)
    log->record({snapshot.get_snapshot(), snapshot.get_timestamp(), Resource::Index});
  IndexHandle index = open_index(own_index_dir);

  std::vector<std::unique_ptr<RfStage>> rewriters;
  std::vector<std::unique_ptr<QrelBoostStage>> rerankers;
  for (const auto& name : pipeline.stages) {
    switch (stage_kind(name)) {
      case StageKind::Rewriter:
        rewriters.push_back(std::make_unique<RfStage>(snapshot, options.rf, log));
        break;
      case StageKind::Retriever:
        break;
      case StageKind::Reranker:
        rerankers.push_back(
            std::make_unique<QrelBoostStage>(snapshot, options.qrel_boost, log));
        break;
    }
  }

  if (log)
    log->record({snapshot.get_snapshot(), snapshot.get_timestamp(), Resource::Queries});
  const auto queries = snapshot.load_queries();

  std::vector<RunRecord> run;
  for (const auto& query : queries) {
    Query rewritten = query;
    for (const auto& stage : rewriters) rewritten = stage->rewrite(rewritten);

    auto scored = bm25_search(index, rewritten,
                              static_cast<size_t>(options.depth), options.bm25);
    Ranking ranking;
    ranking.qid = query.qid;
    ranking.entries.reserve(scored.size());
    for (size_t i = 0; i < scored.size(); ++i)
      ranking.entries.push_back({scored[i].doc_id, scored[i].score,
                                 scored[i].score,
                                 static_cast<std::uint32_t>(i) + 1});

    for (const auto& stage : rerankers) ranking = stage->rerank(std::move(ranking));

    for (const auto& entry : ranking.entries)
      run.push_back({query.qid, entry.doc_id, static_cast<int>(entry.rank),
                     entry.score, options.tag});
  }
  return run;
}

}  // namespace longir
