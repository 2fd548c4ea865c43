#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "longir/formats.hpp"

namespace longir {

enum class GainFunction { Linear, Exponential };
enum class TTestVariant { Pooled, Welch };

/// Per-topic nDCG over the qrels' topic set. Topics whose ideal gain is zero
/// score 0 and are tallied; topics judged but absent from the run score 0.
struct EvalResult {
  std::map<std::string, double> per_topic;
  double mean = 0.0;
  std::size_t topics_without_relevant = 0;
};

/// nDCG@k with rank discount 1/log2(rank+1). Linear gain (gain = grade) is
/// the default; the exponential variant uses 2^grade - 1.
EvalResult ndcg_at_k(const std::vector<RunRecord>& run, const Qrels& qrels,
                     int k = 10, GainFunction gain = GainFunction::Linear);

/// Effect Ratio: the re-implementation's mean per-topic delta against the
/// reference system divided by the original's. nullopt when the original
/// mean delta is zero.
std::optional<double> effect_ratio(const EvalResult& orig_adv,
                                   const EvalResult& orig_base,
                                   const EvalResult& repl_adv,
                                   const EvalResult& repl_base);

/// Delta Relative Improvement: RI_original - RI_reimplementation with
/// RI = (mean_adv - mean_base)/mean_base. nullopt when a base mean is zero.
std::optional<double> delta_ri(const EvalResult& orig_adv,
                               const EvalResult& orig_base,
                               const EvalResult& repl_adv,
                               const EvalResult& repl_base);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
};

/// Two-sided unpaired Student's t-test (pooled variance by default; Welch
/// via the variant flag). Each sample needs >= 2 values. Zero-variance
/// degenerate cases: equal means yield (0, 1), unequal means yield
/// (signed infinity, 0).
TTestResult unpaired_ttest(std::span<const double> sample_a,
                           std::span<const double> sample_b,
                           TTestVariant variant = TTestVariant::Pooled);

struct ReplicationInput {
  std::string snapshot_id;
  std::string system;
  std::vector<RunRecord> orig_adv;
  std::vector<RunRecord> orig_base;
  std::vector<RunRecord> repl_adv;
  std::vector<RunRecord> repl_base;
  Qrels qrels_original;
  Qrels qrels_reimplementation;
};

struct ReplicationRow {
  std::string snapshot_id;
  std::string system;
  std::optional<double> er;        // nullopt = undefined (zero denominator)
  std::optional<double> delta_ri;
  double p_value = 1.0;
  double mean_ndcg_original = 0.0;
  double mean_ndcg_reimplementation = 0.0;
};

/// One row per (snapshot, system): original runs are evaluated against the
/// original qrels, re-implementation runs against the current ones; the
/// p-value compares per-topic nDCG of the two advanced runs. Rows sort by
/// (snapshot, system).
std::vector<ReplicationRow> replication_report(
    std::vector<ReplicationInput> inputs, int k = 10,
    GainFunction gain = GainFunction::Linear,
    TTestVariant variant = TTestVariant::Pooled);

/// Tab-separated rows: snapshot, system, ER, delta_RI, p_value, nDCG@10 pair
/// rendered "orig/repl". Undefined metrics print "undef".
std::string format_replication_tsv(const std::vector<ReplicationRow>& rows);
/// Aligned plain-text table with the same six columns.
std::string format_replication_table(const std::vector<ReplicationRow>& rows);

}  // namespace longir
