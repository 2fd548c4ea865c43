// Acceptance suite: one pass/fail line per criterion. Takes the CLI binary
// path as argv[1] (used by the determinism and reporting criteria).

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "longir/eval.hpp"
#include "longir/index.hpp"
#include "longir/pipeline.hpp"
#include "longir/snapshot.hpp"
#include "support/fixtures.hpp"
#include "support/synthetic.hpp"

using namespace longir;
using namespace longir::testing;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

class Timer {
public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

private:
  std::chrono::steady_clock::time_point start_;
};

void report(int id, const std::string& name, bool pass,
            const std::string& detail) {
  if (!pass) ++g_failures;
  std::printf("[%s] %d. %s%s%s\n", pass ? "PASS" : "FAIL", id, name.c_str(),
              detail.empty() ? "" : " -- ", detail.c_str());
  std::fflush(stdout);
}

struct CommandResult {
  int exit_code = -1;
  std::string output;
};

CommandResult run_command(const std::string& command) {
  CommandResult result;
  FILE* pipe = popen((command + " 2>&1").c_str(), "r");
  if (!pipe) return result;
  char buf[4096];
  while (size_t n = fread(buf, 1, sizeof buf, pipe)) result.output.append(buf, n);
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

// ---------------------------------------------------------------------------
// 1. Boost factors against an independently coded direct product.

void criterion_1() {
  Timer timer;
  std::mt19937 rng(1001);
  std::uniform_real_distribution<double> lam(0.0001, 0.9999), mu_d(0.0001, 3.0),
      score0(0.001, 100.0);
  std::uniform_int_distribution<int> hist_len(0, 5), grade(-1, 2);

  int checked = 0;
  double max_err = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double l = lam(rng), m = mu_d(rng), s0 = score0(rng);
    const int n = hist_len(rng);
    std::vector<Qrels> storage;
    std::vector<const Qrels*> priors;
    double expected = s0;  // direct product, evaluated inline
    storage.reserve(n);
    for (int i = 0; i < n; ++i) {
      const int g = grade(rng);
      if (g < 0) {
        storage.push_back(Qrels{});
      } else {
        storage.push_back(Qrels::from_records({{"q", "doc", g}}));
        if (g == 0) expected *= (1.0 - l) * (1.0 - l);
        if (g == 1) expected *= l * l;
        if (g == 2) expected *= l * l * m;
      }
    }
    for (const auto& qs : storage) priors.push_back(&qs);

    Ranking ranking;
    ranking.qid = "q";
    ranking.entries.push_back({"doc", s0, s0, 1});
    auto boosted = apply_qrel_boost(std::move(ranking), priors, l, m);
    max_err = std::max(max_err, std::fabs(boosted.entries[0].score - expected));
    ++checked;
  }
  const double elapsed = timer.seconds();
  char detail[160];
  std::snprintf(detail, sizeof detail,
                "%d cases, max |err| = %.2e, %.3f s (budget 1 s)", checked,
                max_err, elapsed);
  report(1, "boost factors match the direct product oracle (1e-12)",
         checked == 1000 && max_err < 1e-12 && elapsed < 1.0, detail);
}

// ---------------------------------------------------------------------------
// 2. nDCG@10 against a from-scratch oracle, exhaustively for <= 6 docs.

void criterion_2() {
  Timer timer;
  long long cases = 0;
  double max_err = 0.0;

  for (int n = 1; n <= 6; ++n) {
    std::vector<std::string> docs;
    for (int i = 0; i < n; ++i) docs.push_back("d" + std::to_string(i));
    long long assignments = 1;
    for (int i = 0; i < n; ++i) assignments *= 3;

    for (long long mask = 0; mask < assignments; ++mask) {
      long long m = mask;
      std::vector<int> grades(n);
      for (auto& g : grades) {
        g = static_cast<int>(m % 3);
        m /= 3;
      }
      std::vector<QrelRecord> records;
      for (int i = 0; i < n; ++i) records.push_back({"q", docs[i], grades[i]});
      const Qrels qrels = Qrels::from_records(records);

      std::vector<int> perm(n);
      for (int i = 0; i < n; ++i) perm[i] = i;
      do {
        std::vector<RunRecord> run;
        run.reserve(n);
        for (int i = 0; i < n; ++i)
          run.push_back({"q", docs[perm[i]], i + 1,
                         static_cast<double>(n - i), "t"});
        const double got = ndcg_at_k(run, qrels, 10).per_topic.at("q");

        double dcg = 0.0;
        for (int i = 0; i < n && i < 10; ++i)
          dcg += grades[perm[i]] / std::log2(i + 2.0);
        std::vector<int> ideal = grades;
        std::sort(ideal.begin(), ideal.end(), std::greater<int>());
        double idcg = 0.0;
        for (int i = 0; i < n && i < 10; ++i)
          idcg += ideal[i] / std::log2(i + 2.0);
        const double expected = idcg == 0.0 ? 0.0 : dcg / idcg;

        max_err = std::max(max_err, std::fabs(got - expected));
        ++cases;
      } while (std::next_permutation(perm.begin(), perm.end()));
    }
  }

  // The worked mixed-grade example reproduces to 1e-4.
  const Qrels worked = Qrels::from_records(
      {{"q", "r1", 0}, {"q", "r2", 2}, {"q", "r3", 1}});
  const double worked_ndcg =
      ndcg_at_k({{"q", "r1", 1, 3.0, "t"}, {"q", "r2", 2, 2.0, "t"},
                 {"q", "r3", 3, 1.0, "t"}},
                worked, 10)
          .per_topic.at("q");

  const double elapsed = timer.seconds();
  char detail[200];
  std::snprintf(detail, sizeof detail,
                "%lld permutations, max |err| = %.2e, example = %.4f, %.2f s "
                "(budget 10 s)",
                cases, max_err, worked_ndcg, elapsed);
  report(2, "nDCG@10 matches the brute-force oracle (1e-12) and 0.6697 example",
         max_err < 1e-12 && std::fabs(worked_ndcg - 0.6697) < 1e-4 &&
             elapsed < 10.0,
         detail);
}

// ---------------------------------------------------------------------------
// 3. Replication-metric identities and an independent t-distribution oracle.

double t_pdf(double x, double df) {
  const double logc = std::lgamma((df + 1.0) / 2.0) - std::lgamma(df / 2.0) -
                      0.5 * std::log(df * M_PI);
  return std::exp(logc - (df + 1.0) / 2.0 * std::log1p(x * x / df));
}

double simpson(double a, double b, double df, int depth, double fa, double fm,
               double fb) {
  const double mid = (a + b) / 2.0;
  const double lm = (a + mid) / 2.0, rm = (mid + b) / 2.0;
  const double flm = t_pdf(lm, df), frm = t_pdf(rm, df);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double left = (mid - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - mid) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::fabs(left + right - whole) < 1e-13) return left + right;
  return simpson(a, mid, df, depth - 1, fa, flm, fm) +
         simpson(mid, b, df, depth - 1, fm, frm, fb);
}

double oracle_two_sided_p(double t, double df) {
  const double b = std::fabs(t);
  if (b == 0.0) return 1.0;
  const double integral =
      simpson(0.0, b, df, 40, t_pdf(0.0, df), t_pdf(b / 2.0, df), t_pdf(b, df));
  return 2.0 * (0.5 - integral);
}

void criterion_3() {
  std::mt19937 rng(3003);
  std::uniform_real_distribution<double> val(0.01, 1.0);
  std::uniform_int_distribution<int> len(2, 25);

  bool identities = true;
  for (int i = 0; i < 100; ++i) {
    EvalResult x, y;
    double sx = 0.0, sy = 0.0;
    for (int t = 0; t < 5; ++t) {
      const std::string qid = "q" + std::to_string(t);
      x.per_topic[qid] = val(rng);
      y.per_topic[qid] = val(rng);
      sx += x.per_topic[qid];
      sy += y.per_topic[qid];
    }
    x.mean = sx / 5.0;
    y.mean = sy / 5.0;

    auto er = effect_ratio(x, y, x, y);
    auto dri = delta_ri(x, y, x, y);
    if (er && std::fabs(*er - 1.0) > 1e-9) identities = false;
    if (!dri || std::fabs(*dri) > 1e-12) identities = false;

    std::vector<double> sample;
    for (const auto& [qid, v] : x.per_topic) sample.push_back(v);
    if (unpaired_ttest(sample, sample).p != 1.0) identities = false;
  }

  double max_p_err = 0.0;
  for (int i = 0; i < 50; ++i) {
    std::vector<double> a, b;
    for (int j = 0, n = len(rng); j < n; ++j) a.push_back(val(rng));
    for (int j = 0, n = len(rng); j < n; ++j) b.push_back(val(rng));
    const auto r = unpaired_ttest(a, b);
    if (std::isinf(r.t)) continue;
    const double df = static_cast<double>(a.size() + b.size() - 2);
    max_p_err = std::max(max_p_err, std::fabs(r.p - oracle_two_sided_p(r.t, df)));
  }

  char detail[120];
  std::snprintf(detail, sizeof detail, "max |p err| vs quadrature = %.2e",
                max_p_err);
  report(3, "ER/deltaRI/self-t-test identities; p-values match oracle (1e-6)",
         identities && max_p_err < 1e-6, detail);
}

// ---------------------------------------------------------------------------
// Shared synthetic experiment state for criteria 4-8.

struct Experiment {
  TempDir tmp;
  SyntheticCollection collection;
  MetaDataset meta;
  fs::path indices;
  RunOptions options;
  PipelineSpec plain = PipelineSpec::parse("bm25");
  PipelineSpec boosted = PipelineSpec::parse("bm25 >> qrel_boost");
  PipelineSpec feedback = PipelineSpec::parse("rf >> bm25");

  Experiment()
      : collection(generate_synthetic_collection(tmp.path() / "data")),
        meta(std::get<MetaDataset>(load(collection.root))),
        indices(tmp.path() / "indices") {
    for (const auto& s : meta.get_datasets()) {
      auto store = s->docs_store();
      build_index(store.stream(), index_dir_for(indices, s->get_snapshot()),
                  s->get_snapshot());
    }
    options.depth = 100;
    options.indices_root = indices;
    options.qrel_boost = QrelBoostConfig(0.9, 1.5, 1);
    options.rf = RFConfig(10, 1, 1, indices);
    options.tag = "acc";
  }
};

void criterion_4(Experiment& exp, AccessLog& log) {
  Timer timer;
  bool pass = true;
  std::string detail;
  for (size_t i = 1; i < 3; ++i) {  // snapshots 2 and 3
    const auto& snap = *exp.meta.get_datasets()[i];
    const auto qrels = *snap.load_qrels();
    const auto plain = run_pipeline(snap, exp.plain, exp.options, &log);
    const auto boosted = run_pipeline(snap, exp.boosted, exp.options, &log);
    const double mean_plain = ndcg_at_k(plain, qrels, 10).mean;
    const double mean_boosted = ndcg_at_k(boosted, qrels, 10).mean;
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s%s: %.4f > %.4f", i == 1 ? "" : "; ",
                  snap.get_snapshot().c_str(), mean_boosted, mean_plain);
    detail += buf;
    if (!(mean_boosted > mean_plain)) pass = false;
  }
  const double elapsed = timer.seconds();
  char buf[64];
  std::snprintf(buf, sizeof buf, ", %.2f s (budget 30 s)", elapsed);
  detail += buf;
  report(4, "boost with prior judgments beats plain retrieval on snapshots 2-3",
         pass && elapsed < 30.0, detail);
}

void criterion_5(Experiment& exp, AccessLog& log) {
  const auto& earliest = *exp.meta.get_datasets()[0];
  const auto plain = run_pipeline(earliest, exp.plain, exp.options, &log);
  const auto boosted = run_pipeline(earliest, exp.boosted, exp.options, &log);
  const auto feedback = run_pipeline(earliest, exp.feedback, exp.options, &log);

  auto identical = [](const std::vector<RunRecord>& a,
                      const std::vector<RunRecord>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i) {
      if (a[i].qid != b[i].qid || a[i].doc_id != b[i].doc_id ||
          a[i].rank != b[i].rank)
        return false;
      if (std::fabs(a[i].score - b[i].score) > 1e-12) return false;
    }
    return true;
  };
  char detail[96];
  std::snprintf(detail, sizeof detail, "%zu records per run", plain.size());
  report(5, "boost and feedback pass through on the earliest snapshot",
         identical(plain, boosted) && identical(plain, feedback), detail);
}

void criterion_6(Experiment& exp, AccessLog& log) {
  // Re-run the full experiment per snapshot with a scoped log so violations
  // attribute to the snapshot under evaluation.
  size_t total_events = 0, violations = 0;
  for (const auto& snap : exp.meta.get_datasets()) {
    AccessLog scoped;
    run_pipeline(*snap, exp.boosted, exp.options, &scoped);
    run_pipeline(*snap, exp.feedback, exp.options, &scoped);
    const auto events = scoped.events();
    total_events += events.size();
    violations += isolation_violations(events, *snap).size();
    for (const auto& e : events) log.record(e);
  }
  char detail[96];
  std::snprintf(detail, sizeof detail, "%zu reads logged, %zu violations",
                total_events, violations);
  report(6, "temporal isolation: no reads at or after the evaluated snapshot",
         total_events > 0 && violations == 0, detail);
}

void criterion_7(Experiment& exp, const std::string& cli) {
  // (a) Byte-identical run files across two CLI executions.
  const fs::path runs1 = exp.tmp.path() / "runs1";
  const fs::path runs2 = exp.tmp.path() / "runs2";
  const std::string base_cmd =
      cli + " run --dataset " + q(exp.collection.root) +
      " --pipeline 'rf >> bm25 >> qrel_boost' --lambda 0.9 --mu 1.5" +
      " --memory 1 --depth 100 --tag det --indices-root " + q(exp.indices);
  const auto r1 = run_command(base_cmd + " --out " + q(runs1));
  const auto r2 = run_command(base_cmd + " --out " + q(runs2));
  bool deterministic = r1.exit_code == 0 && r2.exit_code == 0;
  if (deterministic)
    for (const auto& id : exp.collection.snapshot_ids)
      deterministic = deterministic &&
                      read_file(runs1 / ("det." + id + ".run")) ==
                          read_file(runs2 / ("det." + id + ".run"));

  // (b) Index persist/reopen equivalence on randomized corpora.
  std::mt19937 rng(7007);
  std::uniform_int_distribution<int> n_docs(1, 40), len(1, 18), pick(0, 9);
  const std::vector<std::string> vocab = {"ash", "birch", "cedar", "dune",
                                          "elm", "fern", "gale", "heath",
                                          "iris", "juno"};
  bool persist_ok = true;
  for (int trial = 0; trial < 5 && persist_ok; ++trial) {
    TempDir scratch;
    std::vector<Document> docs;
    const int n = n_docs(rng);
    for (int i = 0; i < n; ++i) {
      std::string text;
      for (int w = 0, l = len(rng); w < l; ++w) text += vocab[pick(rng)] + " ";
      docs.push_back({"d" + std::to_string(i), text, std::nullopt, std::nullopt});
    }
    auto shared = std::make_shared<std::vector<Document>>(docs);
    auto pos = std::make_shared<size_t>(0);
    auto built = build_index(
        [shared, pos]() -> std::optional<Document> {
          if (*pos >= shared->size()) return std::nullopt;
          return (*shared)[(*pos)++];
        },
        scratch.path() / "idx", "s");
    auto reopened = open_index(scratch.path() / "idx");
    for (int query = 0; query < 20 && persist_ok; ++query) {
      const std::string text = vocab[pick(rng)] + " " + vocab[pick(rng)];
      auto a = bm25_search(built, Query{"q", text}, 100);
      auto b = bm25_search(reopened, Query{"q", text}, 100);
      persist_ok = a.size() == b.size();
      for (size_t i = 0; persist_ok && i < a.size(); ++i)
        persist_ok = a[i].doc_id == b[i].doc_id &&
                     std::fabs(a[i].score - b[i].score) <= 1e-12;
    }
  }

  // (c) Run and qrels parser roundtrips on randomized fixtures.
  bool roundtrip_ok = true;
  std::uniform_int_distribution<int> nq(1, 6), nd(1, 9), grade(0, 2),
      milli(0, 999999);
  for (int trial = 0; trial < 20 && roundtrip_ok; ++trial) {
    std::vector<RunRecord> records;
    std::string qrels_text;
    std::vector<std::pair<std::string, int>> qrel_pairs;
    const int queries = nq(rng);
    for (int qi = 0; qi < queries; ++qi) {
      long score_milli = 2000000;  // exact 6-decimal scores
      const int docs = nd(rng);
      for (int di = 0; di < docs; ++di) {
        score_milli -= milli(rng);
        records.push_back({"q" + std::to_string(qi), "d" + std::to_string(di),
                           di + 1, score_milli / 1000.0, "tag"});
        const int g = grade(rng);
        qrels_text += "q" + std::to_string(qi) + " 0 d" + std::to_string(di) +
                      " " + std::to_string(g) + "\n";
        qrel_pairs.emplace_back("q" + std::to_string(qi) + "|d" + std::to_string(di), g);
      }
    }
    std::ostringstream run_stream;
    write_run(run_stream, records);
    std::istringstream run_in(run_stream.str());
    auto parsed = parse_run(run_in);
    std::sort(records.begin(), records.end(),
              [](const RunRecord& a, const RunRecord& b) {
                if (a.qid != b.qid) return a.qid < b.qid;
                return a.rank < b.rank;
              });
    roundtrip_ok = parsed == records;

    std::istringstream qrels_in(qrels_text);
    const auto qrels = Qrels::parse(qrels_in);
    for (const auto& [key, g] : qrel_pairs) {
      const auto bar = key.find('|');
      if (qrels.grade(key.substr(0, bar), key.substr(bar + 1)) != g)
        roundtrip_ok = false;
    }
  }

  char detail[128];
  std::snprintf(detail, sizeof detail, "cli determinism %s, persist %s, roundtrips %s",
                deterministic ? "ok" : "FAILED", persist_ok ? "ok" : "FAILED",
                roundtrip_ok ? "ok" : "FAILED");
  report(7, "determinism and persistence/parser roundtrips",
         deterministic && persist_ok && roundtrip_ok, detail);
}

void criterion_8(Experiment& exp, const std::string& cli) {
  // Build per-snapshot plain and boosted runs through the CLI, then compare
  // "original" and an identical "re-implementation".
  const fs::path runs = exp.tmp.path() / "runs8";
  const std::string common = " --dataset " + q(exp.collection.root) +
                             " --depth 100 --indices-root " + q(exp.indices) +
                             " --out " + q(runs);
  bool ok =
      run_command(cli + " run --pipeline bm25 --tag base" + common).exit_code == 0;
  ok = ok && run_command(cli +
                         " run --pipeline 'bm25 >> qrel_boost' --lambda 0.9 "
                         "--mu 1.5 --memory 1 --tag adv" +
                         common)
                     .exit_code == 0;

  std::string first_row;
  bool shape_ok = ok;
  for (const auto& id : std::vector<std::string>{"2023-02", "2023-03"}) {
    const auto qrels = exp.collection.root / id / "qrels.txt";
    const auto adv = runs / ("adv." + id + ".run");
    const auto base = runs / ("base." + id + ".run");
    const auto r = run_command(
        cli + " compare --orig-adv " + q(adv) + " --orig-base " + q(base) +
        " --repl-adv " + q(adv) + " --repl-base " + q(base) + " --qrels-orig " +
        q(qrels) + " --qrels-repl " + q(qrels) + " --snapshot " + id +
        " --system qrel_boost --format tsv");
    if (r.exit_code != 0) {
      shape_ok = false;
      break;
    }
    std::istringstream lines(r.output);
    std::string header, row;
    std::getline(lines, header);
    std::getline(lines, row);
    if (header != "snapshot\tsystem\tER\tdelta_RI\tp_value\tnDCG@10")
      shape_ok = false;
    // Exactly six tab-separated fields: snapshot, system, ER, dRI, p, pair.
    std::vector<std::string> fields;
    std::istringstream row_in(row);
    std::string field;
    while (std::getline(row_in, field, '\t')) fields.push_back(field);
    if (fields.size() != 6 || fields[0] != id || fields[1] != "qrel_boost" ||
        fields[2] != "1.000" || fields[3] != "0.000" || fields[4] != "1" ||
        fields[5].find('/') == std::string::npos)
      shape_ok = false;
    if (first_row.empty()) first_row = row;
  }
  report(8, "compare emits rows shaped snapshot/system/ER/dRI/p/nDCG-pair",
         shape_ok, first_row);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <path-to-cli-binary>\n";
    return 64;
  }
  const std::string cli = argv[1];

  criterion_1();
  criterion_2();
  criterion_3();

  Experiment exp;
  AccessLog log;
  criterion_4(exp, log);
  criterion_5(exp, log);
  criterion_6(exp, log);
  criterion_7(exp, cli);
  criterion_8(exp, cli);

  if (g_failures == 0) {
    std::printf("all 8 acceptance criteria passed\n");
  } else {
    std::printf("%d acceptance criteria FAILED\n", g_failures);
  }
  return g_failures == 0 ? 0 : 1;
}
