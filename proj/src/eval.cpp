#include "longir/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace longir {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

double gain_of(int grade, GainFunction gain) {
  return gain == GainFunction::Linear
             ? static_cast<double>(grade)
             : std::exp2(static_cast<double>(grade)) - 1.0;
}

// ---------------------------------------------------------------------------
// Regularized incomplete beta via Lentz's continued fraction, the standard
// route to the Student-t tail probability.

double betacf(double a, double b, double x) {
  constexpr double kTiny = 1e-30;
  constexpr double kEps = 1e-14;
  constexpr int kMaxIter = 500;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  fail("incomplete beta: continued fraction did not converge");
}

double regularized_incomplete_beta(double a, double b, double x) {
  if (x < 0.0 || x > 1.0) fail("incomplete beta: x outside [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double front = std::exp(std::lgamma(a + b) - std::lgamma(a) -
                                std::lgamma(b) + a * std::log(x) +
                                b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

// Two-sided tail of Student's t: 2*(1 - F(|t|)) = I_{df/(df+t^2)}(df/2, 1/2).
double student_t_two_sided_p(double t, double df) {
  if (std::isinf(t)) return 0.0;
  return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v, double mean) {
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s / static_cast<double>(v.size() - 1);
}

// Mean per-topic delta over the topics shared by the pair.
std::optional<double> mean_delta(const EvalResult& adv, const EvalResult& base) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [qid, score] : adv.per_topic) {
    auto it = base.per_topic.find(qid);
    if (it == base.per_topic.end()) continue;
    sum += score - it->second;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

}  // namespace

EvalResult ndcg_at_k(const std::vector<RunRecord>& run, const Qrels& qrels,
                     int k, GainFunction gain) {
  if (k < 1) throw std::invalid_argument("ndcg_at_k: k must be >= 1");

  std::map<std::string, std::vector<const RunRecord*>> by_qid;
  for (const auto& r : run) by_qid[r.qid].push_back(&r);
  for (auto& [qid, rs] : by_qid)
    std::sort(rs.begin(), rs.end(), [](const RunRecord* a, const RunRecord* b) {
      return a->rank < b->rank;
    });

  EvalResult result;
  double sum = 0.0;
  for (const auto& [qid, judged] : qrels.by_query()) {
    std::vector<int> grades;
    grades.reserve(judged.size());
    for (const auto& [doc, grade] : judged) grades.push_back(grade);
    std::sort(grades.begin(), grades.end(), std::greater<int>());

    double idcg = 0.0;
    for (std::size_t i = 0; i < grades.size() && i < static_cast<std::size_t>(k); ++i)
      idcg += gain_of(grades[i], gain) / std::log2(static_cast<double>(i) + 2.0);

    if (idcg == 0.0) {
      result.per_topic[qid] = 0.0;
      ++result.topics_without_relevant;
      continue;
    }

    double dcg = 0.0;
    if (auto it = by_qid.find(qid); it != by_qid.end()) {
      const auto& rs = it->second;
      for (std::size_t i = 0; i < rs.size() && i < static_cast<std::size_t>(k); ++i) {
        auto g = judged.find(rs[i]->doc_id);
        const int grade = g == judged.end() ? 0 : g->second;  // unjudged = 0
        dcg += gain_of(grade, gain) / std::log2(static_cast<double>(i) + 2.0);
      }
    }
    const double ndcg = dcg / idcg;
    result.per_topic[qid] = ndcg;
    sum += ndcg;
  }
  result.mean =
      result.per_topic.empty() ? 0.0 : sum / static_cast<double>(result.per_topic.size());
  return result;
}

std::optional<double> effect_ratio(const EvalResult& orig_adv,
                                   const EvalResult& orig_base,
                                   const EvalResult& repl_adv,
                                   const EvalResult& repl_base) {
  auto orig = mean_delta(orig_adv, orig_base);
  auto repl = mean_delta(repl_adv, repl_base);
  if (!orig || !repl || *orig == 0.0) return std::nullopt;
  return *repl / *orig;
}

std::optional<double> delta_ri(const EvalResult& orig_adv,
                               const EvalResult& orig_base,
                               const EvalResult& repl_adv,
                               const EvalResult& repl_base) {
  if (orig_base.mean == 0.0 || repl_base.mean == 0.0) return std::nullopt;
  const double ri_orig = (orig_adv.mean - orig_base.mean) / orig_base.mean;
  const double ri_repl = (repl_adv.mean - repl_base.mean) / repl_base.mean;
  return ri_orig - ri_repl;
}

TTestResult unpaired_ttest(std::span<const double> sample_a,
                           std::span<const double> sample_b,
                           TTestVariant variant) {
  const std::size_t na = sample_a.size(), nb = sample_b.size();
  if (na < 2 || nb < 2)
    throw std::invalid_argument("unpaired_ttest: each sample needs >= 2 values");
  const double ma = mean_of(sample_a), mb = mean_of(sample_b);
  const double va = sample_variance(sample_a, ma);
  const double vb = sample_variance(sample_b, mb);
  const double diff = ma - mb;

  double se2 = 0.0, df = 0.0;
  if (variant == TTestVariant::Pooled) {
    df = static_cast<double>(na + nb - 2);
    const double sp2 = ((na - 1) * va + (nb - 1) * vb) / df;
    se2 = sp2 * (1.0 / na + 1.0 / nb);
  } else {
    const double ra = va / static_cast<double>(na);
    const double rb = vb / static_cast<double>(nb);
    se2 = ra + rb;
    if (se2 > 0.0)
      df = se2 * se2 /
           (ra * ra / static_cast<double>(na - 1) + rb * rb / static_cast<double>(nb - 1));
  }

  if (se2 == 0.0) {
    if (diff == 0.0) return {0.0, 1.0};
    return {std::copysign(std::numeric_limits<double>::infinity(), diff), 0.0};
  }
  const double t = diff / std::sqrt(se2);
  return {t, student_t_two_sided_p(t, df)};
}

std::vector<ReplicationRow> replication_report(std::vector<ReplicationInput> inputs,
                                               int k, GainFunction gain,
                                               TTestVariant variant) {
  std::sort(inputs.begin(), inputs.end(),
            [](const ReplicationInput& a, const ReplicationInput& b) {
              if (a.snapshot_id != b.snapshot_id) return a.snapshot_id < b.snapshot_id;
              return a.system < b.system;
            });
  std::vector<ReplicationRow> rows;
  rows.reserve(inputs.size());
  for (const auto& in : inputs) {
    const EvalResult orig_adv = ndcg_at_k(in.orig_adv, in.qrels_original, k, gain);
    const EvalResult orig_base = ndcg_at_k(in.orig_base, in.qrels_original, k, gain);
    const EvalResult repl_adv =
        ndcg_at_k(in.repl_adv, in.qrels_reimplementation, k, gain);
    const EvalResult repl_base =
        ndcg_at_k(in.repl_base, in.qrels_reimplementation, k, gain);

    ReplicationRow row;
    row.snapshot_id = in.snapshot_id;
    row.system = in.system;
    row.er = effect_ratio(orig_adv, orig_base, repl_adv, repl_base);
    row.delta_ri = delta_ri(orig_adv, orig_base, repl_adv, repl_base);

    std::vector<double> a, b;
    a.reserve(orig_adv.per_topic.size());
    b.reserve(repl_adv.per_topic.size());
    for (const auto& [qid, v] : orig_adv.per_topic) a.push_back(v);
    for (const auto& [qid, v] : repl_adv.per_topic) b.push_back(v);
    row.p_value = unpaired_ttest(a, b, variant).p;
    row.mean_ndcg_original = orig_adv.mean;
    row.mean_ndcg_reimplementation = repl_adv.mean;
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string opt_fmt(const std::optional<double>& v) {
  return v ? fmt("%.3f", *v) : "undef";
}

std::vector<std::vector<std::string>> render_cells(
    const std::vector<ReplicationRow>& rows) {
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows)
    cells.push_back({r.snapshot_id, r.system, opt_fmt(r.er), opt_fmt(r.delta_ri),
                     fmt("%.3g", r.p_value),
                     fmt("%.4f", r.mean_ndcg_original) + "/" +
                         fmt("%.4f", r.mean_ndcg_reimplementation)});
  return cells;
}

}  // namespace

std::string format_replication_tsv(const std::vector<ReplicationRow>& rows) {
  std::string out = "snapshot\tsystem\tER\tdelta_RI\tp_value\tnDCG@10\n";
  for (const auto& row : render_cells(rows)) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out += row[i];
      out += i + 1 == row.size() ? '\n' : '\t';
    }
  }
  return out;
}

std::string format_replication_table(const std::vector<ReplicationRow>& rows) {
  const std::vector<std::string> header = {"snapshot", "system",  "ER",
                                           "ΔRI", "p-value", "nDCG@10"};
  auto cells = render_cells(rows);
  cells.insert(cells.begin(), header);
  std::vector<std::size_t> widths(header.size(), 0);
  for (const auto& row : cells)
    for (std::size_t i = 0; i < row.size(); ++i) {
      // Width in display characters, not UTF-8 bytes.
      std::size_t w = 0;
      for (unsigned char c : row[i])
        if ((c & 0xC0) != 0x80) ++w;
      widths[i] = std::max(widths[i], w);
    }
  std::string out;
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::size_t w = 0;
      for (unsigned char c : row[i])
        if ((c & 0xC0) != 0x80) ++w;
      out += row[i];
      if (i + 1 == row.size()) break;
      out.append(widths[i] - w + 2, ' ');
    }
    out += '\n';
  }
  return out;
}

}  // namespace longir
