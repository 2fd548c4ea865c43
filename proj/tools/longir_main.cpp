// longir - longitudinal retrieval experiments over snapshot test collections.
//
// Subcommands: snapshots, index, run, evaluate, compare. See README.md.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "longir/eval.hpp"
#include "longir/index.hpp"
#include "longir/pipeline.hpp"
#include "longir/snapshot.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::optional<fs::path> registry_root() {
  if (const char* env = std::getenv("LONGIR_DATA_ROOT"); env && *env)
    return fs::path(env);
  return std::nullopt;
}

longir::LoadedDataset load_dataset(const std::string& locator,
                                   const std::string& subset) {
  auto loaded = longir::load_locator(locator, registry_root());
  if (subset.empty()) return loaded;
  auto* meta = std::get_if<longir::MetaDataset>(&loaded);
  if (!meta)
    throw std::runtime_error("--subset given but '" + locator +
                             "' is a single snapshot");
  return longir::LoadedDataset{meta->resolve_subset(subset)};
}

std::vector<longir::RunRecord> read_run_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open run file: " + path.string());
  auto records = longir::parse_run(in);
  longir::validate_run(records);
  return records;
}

longir::Qrels read_qrels_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open qrels file: " + path.string());
  return longir::Qrels::parse(in);
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, path);
}

longir::GainFunction parse_gain(const std::string& v) {
  if (v == "linear") return longir::GainFunction::Linear;
  if (v == "exp") return longir::GainFunction::Exponential;
  throw std::runtime_error("unknown gain '" + v + "' (expected linear or exp)");
}

longir::TTestVariant parse_ttest(const std::string& v) {
  if (v == "pooled") return longir::TTestVariant::Pooled;
  if (v == "welch") return longir::TTestVariant::Welch;
  throw std::runtime_error("unknown ttest '" + v + "' (expected pooled or welch)");
}

// One canonical, diffable experiment record: a JSON config file whose keys
// CLI flags override.
struct ExperimentConfig {
  std::string dataset;
  std::string subset;
  std::string pipeline = "bm25";
  double lambda = 0.7;
  double mu = 1.5;
  std::optional<int> memory;
  int k_expansion = 10;
  int min_rel = 1;
  int depth = 1000;
  std::string out = "runs";
  std::string tag = "run";
  std::string indices_root = "indices";

  void apply_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path.string());
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw std::runtime_error("malformed config " + path.string() + ": " + e.what());
    }
    auto get = [&](const char* key, auto& target) {
      if (auto it = j.find(key); it != j.end()) target = it->get<std::decay_t<decltype(target)>>();
    };
    get("dataset", dataset);
    get("subset", subset);
    get("pipeline", pipeline);
    get("lambda", lambda);
    get("mu", mu);
    if (auto it = j.find("memory"); it != j.end() && !it->is_null())
      memory = it->get<int>();
    get("k_expansion", k_expansion);
    get("min_rel", min_rel);
    get("depth", depth);
    get("out", out);
    get("tag", tag);
    get("indices_root", indices_root);
  }
};

int cmd_snapshots(const std::string& dataset, const std::string& subset) {
  auto snapshots = longir::snapshots_of(load_dataset(dataset, subset));
  for (const auto& s : snapshots) {
    std::string priors;
    for (const auto& p : s->prior_ids()) {
      if (!priors.empty()) priors += ',';
      priors += p;
    }
    std::cout << s->get_snapshot() << '\t' << s->get_timestamp().to_string()
              << "\tpriors=" << priors << '\n';
  }
  return 0;
}

int cmd_index(const std::string& dataset, const std::string& subset,
              const std::string& out_root, bool stem,
              const std::string& stopwords_file) {
  longir::TokenizerConfig tok;
  tok.stem = stem;
  if (!stopwords_file.empty()) {
    std::ifstream in(stopwords_file);
    if (!in) throw std::runtime_error("cannot open stopword list: " + stopwords_file);
    std::string word;
    while (in >> word) tok.stopwords.push_back(word);
  }
  auto snapshots = longir::snapshots_of(load_dataset(dataset, subset));
  for (const auto& s : snapshots) {
    auto store = s->docs_store();
    auto handle = longir::build_index(
        store.stream(), longir::index_dir_for(out_root, s->get_snapshot()),
        s->get_snapshot(), tok);
    std::cout << "index-" << s->get_snapshot() << '\t' << handle.n_docs()
              << " docs\t" << handle.vocabulary_size() << " terms\n";
  }
  return 0;
}

int cmd_run(const ExperimentConfig& cfg) {
  if (cfg.dataset.empty()) throw std::runtime_error("run: --dataset is required");
  auto pipeline = longir::PipelineSpec::parse(cfg.pipeline);
  pipeline.validate();

  longir::RunOptions options;
  options.depth = cfg.depth;
  options.tag = cfg.tag;
  options.indices_root = cfg.indices_root;
  options.bm25 = longir::Bm25Params{};
  options.qrel_boost = longir::QrelBoostConfig(cfg.lambda, cfg.mu, cfg.memory);
  options.rf = longir::RFConfig(cfg.k_expansion, cfg.memory, cfg.min_rel,
                                cfg.indices_root);

  auto snapshots = longir::snapshots_of(load_dataset(cfg.dataset, cfg.subset));
  for (const auto& s : snapshots) {
    auto records = longir::run_pipeline(*s, pipeline, options);
    std::ostringstream body;
    longir::write_run(body, std::move(records), cfg.tag);
    const fs::path out_path =
        fs::path(cfg.out) / (cfg.tag + "." + s->get_snapshot() + ".run");
    write_file_atomic(out_path, body.str());
    std::cout << out_path.string() << '\n';
  }
  return 0;
}

int cmd_evaluate(const std::string& run_file, const std::string& qrels_file,
                 int cutoff, const std::string& gain) {
  auto run = read_run_file(run_file);
  auto qrels = read_qrels_file(qrels_file);
  auto result = longir::ndcg_at_k(run, qrels, cutoff, parse_gain(gain));
  char buf[64];
  const std::string metric = "ndcg@" + std::to_string(cutoff);
  for (const auto& [qid, value] : result.per_topic) {
    std::snprintf(buf, sizeof buf, "%.6f", value);
    std::cout << metric << '\t' << qid << '\t' << buf << '\n';
  }
  std::snprintf(buf, sizeof buf, "%.6f", result.mean);
  std::cout << metric << "\tall\t" << buf << '\n';
  return 0;
}

int cmd_compare(const std::string& orig_adv, const std::string& orig_base,
                const std::string& repl_adv, const std::string& repl_base,
                const std::string& qrels_orig, const std::string& qrels_repl,
                const std::string& snapshot, const std::string& system,
                int cutoff, const std::string& gain, const std::string& ttest,
                const std::string& format) {
  longir::ReplicationInput input;
  input.snapshot_id = snapshot;
  input.system = system;
  input.orig_adv = read_run_file(orig_adv);
  input.orig_base = read_run_file(orig_base);
  input.repl_adv = read_run_file(repl_adv);
  input.repl_base = read_run_file(repl_base);
  input.qrels_original = read_qrels_file(qrels_orig);
  input.qrels_reimplementation = read_qrels_file(qrels_repl);

  auto rows = longir::replication_report({std::move(input)}, cutoff,
                                         parse_gain(gain), parse_ttest(ttest));
  if (format == "tsv")
    std::cout << longir::format_replication_tsv(rows);
  else if (format == "table")
    std::cout << longir::format_replication_table(rows);
  else
    throw std::runtime_error("unknown format '" + format + "' (expected table or tsv)");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"longitudinal retrieval experiments over snapshot collections"};
  app.require_subcommand(1);

  std::string dataset, subset;

  auto* snapshots = app.add_subcommand("snapshots", "list snapshots with lineage");
  snapshots->add_option("--dataset", dataset, "dataset directory or registry id")
      ->required();
  snapshots->add_option("--subset", subset, "named subset of the meta dataset");

  auto* index = app.add_subcommand("index", "build one index per snapshot");
  std::string out_root = "indices";
  bool stem = false;
  std::string stopwords_file;
  index->add_option("--dataset", dataset)->required();
  index->add_option("--subset", subset);
  index->add_option("--out", out_root, "directory for index-<snapshot-id>/");
  index->add_flag("--stem", stem, "apply Porter stemming");
  index->add_option("--stopwords", stopwords_file, "stopword list, one per line");

  auto* run = app.add_subcommand("run", "run a pipeline over every snapshot");
  ExperimentConfig cfg;
  std::string config_file;
  std::string pipeline_flag, out_flag, tag_flag, indices_flag;
  double lambda_flag = 0, mu_flag = 0;
  int memory_flag = 0, k_exp_flag = 0, min_rel_flag = 0, depth_flag = 0;
  run->add_option("--config", config_file, "JSON experiment config");
  auto* run_dataset = run->add_option("--dataset", dataset);
  auto* run_subset = run->add_option("--subset", subset);
  auto* o_pipeline = run->add_option("--pipeline", pipeline_flag,
                                     "e.g. \"bm25 >> qrel_boost\" or \"rf >> bm25\"");
  auto* o_lambda = run->add_option("--lambda", lambda_flag);
  auto* o_mu = run->add_option("--mu", mu_flag);
  auto* o_memory = run->add_option("--memory", memory_flag, "prior snapshots consulted");
  auto* o_k = run->add_option("--k-expansion", k_exp_flag);
  auto* o_min_rel = run->add_option("--min-rel", min_rel_flag);
  auto* o_depth = run->add_option("--depth", depth_flag);
  auto* o_out = run->add_option("--out", out_flag);
  auto* o_tag = run->add_option("--tag", tag_flag);
  auto* o_indices = run->add_option("--indices-root", indices_flag);

  auto* evaluate = app.add_subcommand("evaluate", "per-topic and mean nDCG@k");
  std::string run_file, qrels_file, gain = "linear";
  int cutoff = 10;
  evaluate->add_option("--run", run_file)->required();
  evaluate->add_option("--qrels", qrels_file)->required();
  evaluate->add_option("--cutoff", cutoff, "rank cutoff k");
  evaluate->add_option("--gain", gain, "linear|exp");

  auto* compare = app.add_subcommand(
      "compare", "replication metrics of a re-implementation vs the original");
  std::string orig_adv, orig_base, repl_adv, repl_base, qrels_orig, qrels_repl;
  std::string snapshot_label = "-", system_label = "-";
  std::string ttest = "pooled", format = "table";
  compare->add_option("--orig-adv", orig_adv)->required();
  compare->add_option("--orig-base", orig_base)->required();
  compare->add_option("--repl-adv", repl_adv)->required();
  compare->add_option("--repl-base", repl_base)->required();
  compare->add_option("--qrels-orig", qrels_orig)->required();
  compare->add_option("--qrels-repl", qrels_repl)->required();
  compare->add_option("--snapshot", snapshot_label, "row label");
  compare->add_option("--system", system_label, "row label");
  compare->add_option("--cutoff", cutoff);
  compare->add_option("--gain", gain, "linear|exp");
  compare->add_option("--ttest", ttest, "pooled|welch");
  compare->add_option("--format", format, "table|tsv");

  CLI11_PARSE(app, argc, argv);

  try {
    if (snapshots->parsed()) return cmd_snapshots(dataset, subset);
    if (index->parsed())
      return cmd_index(dataset, subset, out_root, stem, stopwords_file);
    if (run->parsed()) {
      if (!config_file.empty()) cfg.apply_json(config_file);
      if (run_dataset->count()) cfg.dataset = dataset;
      if (run_subset->count()) cfg.subset = subset;
      if (o_pipeline->count()) cfg.pipeline = pipeline_flag;
      if (o_lambda->count()) cfg.lambda = lambda_flag;
      if (o_mu->count()) cfg.mu = mu_flag;
      if (o_memory->count()) cfg.memory = memory_flag;
      if (o_k->count()) cfg.k_expansion = k_exp_flag;
      if (o_min_rel->count()) cfg.min_rel = min_rel_flag;
      if (o_depth->count()) cfg.depth = depth_flag;
      if (o_out->count()) cfg.out = out_flag;
      if (o_tag->count()) cfg.tag = tag_flag;
      if (o_indices->count()) cfg.indices_root = indices_flag;
      return cmd_run(cfg);
    }
    if (evaluate->parsed())
      return cmd_evaluate(run_file, qrels_file, cutoff, gain);
    if (compare->parsed())
      return cmd_compare(orig_adv, orig_base, repl_adv, repl_base, qrels_orig,
                         qrels_repl, snapshot_label, system_label, cutoff, gain,
                         ttest, format);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
