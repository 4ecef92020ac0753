#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stand/analysis.hpp"
#include "stand/engine.hpp"
#include "stand/ngram_store.hpp"
#include "stand/optimize.hpp"
#include "stand/remote_model.hpp"
#include "stand/target_model.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelOptions {
  std::string spec_path;
  std::string corpus_path;
  std::string builtin;  // "redundant" or "random"
  std::string remote;   // host:port
  int vocab = 32;
  std::uint64_t model_seed = 1;
  double temperature = 0.6;
};

void add_model_flags(CLI::App* cmd, ModelOptions& opts) {
  auto* spec = cmd->add_option("--model", opts.spec_path,
                               "Markov model spec file (JSON)");
  auto* corpus = cmd->add_option("--corpus", opts.corpus_path,
                                 "corpus-replay trajectory file (JSONL)");
  auto* builtin = cmd->add_option("--builtin", opts.builtin,
                                  "builtin synthetic model: redundant|random");
  auto* remote = cmd->add_option("--remote", opts.remote,
                                 "logit server endpoint host:port");
  spec->excludes(corpus)->excludes(builtin)->excludes(remote);
  corpus->excludes(builtin)->excludes(remote);
  builtin->excludes(remote);
  cmd->add_option("--vocab", opts.vocab,
                  "vocab size for builtin/corpus/remote models");
  cmd->add_option("--model-seed", opts.model_seed, "builtin model seed");
  cmd->add_option("--temperature", opts.temperature, "sampling temperature");
}

std::shared_ptr<const stand::TargetModel> make_model(const ModelOptions& o) {
  int sources = !o.spec_path.empty() + !o.corpus_path.empty() +
                !o.builtin.empty() + !o.remote.empty();
  if (sources != 1)
    throw UsageError("exactly one model source required "
                     "(--model | --corpus | --builtin | --remote)");
  if (!o.spec_path.empty()) {
    if (!fs::exists(o.spec_path))
      throw UsageError("model spec file not found: " + o.spec_path);
    auto spec = stand::load_markov_spec(o.spec_path);
    return std::make_shared<stand::MarkovModel>(std::move(spec));
  }
  if (!o.corpus_path.empty()) {
    if (!fs::exists(o.corpus_path))
      throw UsageError("corpus file not found: " + o.corpus_path);
    return std::make_shared<stand::CorpusReplayModel>(
        stand::load_trajectories(o.corpus_path), o.vocab, o.temperature);
  }
  if (!o.builtin.empty()) {
    if (o.builtin == "redundant")
      return std::make_shared<stand::MarkovModel>(stand::make_redundant_spec(
          o.vocab, o.model_seed, 4, 10, 0.85, o.temperature));
    if (o.builtin == "random")
      return std::make_shared<stand::MarkovModel>(
          stand::make_random_spec(o.vocab, o.model_seed, o.temperature));
    throw UsageError("unknown builtin model: " + o.builtin);
  }
  auto colon = o.remote.rfind(':');
  if (colon == std::string::npos)
    throw UsageError("remote endpoint must be host:port");
  stand::RemoteConfig rc;
  rc.host = o.remote.substr(0, colon);
  rc.port = std::stoi(o.remote.substr(colon + 1));
  rc.vocab_size = o.vocab;
  rc.temperature = o.temperature;
  return std::make_shared<stand::RemoteModel>(rc);
}

stand::TreeTopology resolve_tree(const std::string& tree_arg) {
  if (tree_arg == "builtin:initial-625") return stand::build_initial_tree();
  if (tree_arg == "builtin:optimized-80")
    return stand::builtin_optimized_tree();
  if (!fs::exists(tree_arg))
    throw UsageError("tree file not found: " + tree_arg);
  return stand::load_topology(tree_arg);
}

std::vector<stand::TokenId> parse_token_list(const std::string& text) {
  std::vector<stand::TokenId> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t next = text.find(',', pos);
    if (next == std::string::npos) next = text.size();
    if (next > pos) out.push_back(std::stoi(text.substr(pos, next - pos)));
    pos = next + 1;
  }
  return out;
}

stand::DraftMode parse_mode(const std::string& mode) {
  if (mode == "stochastic") return stand::DraftMode::stochastic;
  if (mode == "deterministic") return stand::DraftMode::deterministic;
  throw UsageError("unknown draft mode: " + mode);
}

stand::StoreScope parse_scope(const std::string& scope) {
  if (scope == "per-trajectory") return stand::StoreScope::per_trajectory;
  if (scope == "per-problem") return stand::StoreScope::per_problem;
  if (scope == "global") return stand::StoreScope::global;
  throw UsageError("unknown store scope: " + scope);
}

void ensure_output_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw UsageError("cannot create output dir: " + dir);
}

json metrics_to_json(const std::vector<stand::TrajectoryResult>& results,
                     bool with_timing) {
  json per_traj = json::array();
  std::uint64_t tokens = 0, rounds = 0, positions = 0;
  double wall = 0.0;
  for (const auto& r : results) {
    tokens += r.metrics.tokens;
    rounds += r.metrics.rounds;
    positions += r.metrics.target_positions;
    wall += r.metrics.wall_ms;
    json t = {{"tokens", r.metrics.tokens},
              {"rounds", r.metrics.rounds},
              {"accept_len_mean", r.metrics.accept_len_mean},
              {"target_positions", r.metrics.target_positions},
              {"prefill_positions", r.metrics.prefill_positions}};
    if (with_timing) t["wall_ms"] = r.metrics.wall_ms;
    per_traj.push_back(std::move(t));
  }
  json out = {{"tokens", tokens},
              {"rounds", rounds},
              {"accept_len_mean",
               rounds ? static_cast<double>(tokens) / rounds : 1.0},
              {"target_positions", positions},
              {"per_trajectory", per_traj}};
  out["wall_ms"] = with_timing ? wall : 0.0;
  return out;
}

// JSON config file mirrors long flags ("trajectories": 4 -> --trajectories 4).
// Explicit command-line flags win: config values are injected only for flags
// absent from argv.
std::vector<std::string> apply_config_file(std::vector<std::string> args) {
  std::string config_path;
  for (std::size_t i = 0; i + 1 < args.size(); ++i)
    if (args[i] == "--config") config_path = args[i + 1];
  if (config_path.empty()) return args;
  if (!fs::exists(config_path))
    throw UsageError("config file not found: " + config_path);
  std::ifstream in(config_path);
  json cfg = json::parse(in);
  for (const auto& [key, value] : cfg.items()) {
    std::string flag = "--" + key;
    if (std::find(args.begin(), args.end(), flag) != args.end()) continue;
    args.push_back(flag);
    args.push_back(value.is_string() ? value.get<std::string>()
                                     : value.dump());
  }
  return args;
}

int cmd_decode(const ModelOptions& model_opts, const std::string& tree_arg,
               const std::string& mode, const std::string& scope,
               const std::string& prompt_text, const std::string& stop_text,
               int trajectories, int max_tokens, std::uint64_t seed,
               const std::string& output_dir, bool timing) {
  auto model = make_model(model_opts);
  auto topology = resolve_tree(tree_arg);
  ensure_output_dir(output_dir);

  stand::SessionConfig sc;
  sc.mode = parse_mode(mode);
  sc.scope = parse_scope(scope);
  sc.seed = seed;
  sc.max_tokens = max_tokens;
  sc.stop_tokens = parse_token_list(stop_text);
  stand::Session session(model, topology, sc);

  auto prompt = parse_token_list(prompt_text);
  if (prompt.empty()) throw UsageError("prompt must contain tokens");
  auto results = session.run_problem(prompt, trajectories);

  std::vector<std::vector<stand::TokenId>> token_seqs;
  for (const auto& r : results) token_seqs.push_back(r.tokens);
  stand::save_trajectories(token_seqs, output_dir + "/trajectories.jsonl");

  json report = metrics_to_json(results, timing);
  std::ofstream mout(output_dir + "/metrics.json");
  mout << report.dump(2) << '\n';

  std::ofstream csv(output_dir + "/metrics.csv");
  csv << "trajectory,tokens,rounds,accept_len_mean,target_positions\n";
  for (std::size_t i = 0; i < results.size(); ++i)
    csv << i << ',' << results[i].metrics.tokens << ','
        << results[i].metrics.rounds << ','
        << results[i].metrics.accept_len_mean << ','
        << results[i].metrics.target_positions << '\n';

  std::cout << "decoded " << report["tokens"] << " tokens in "
            << report["rounds"] << " rounds, mean acceptance length "
            << report["accept_len_mean"] << '\n';
  return 0;
}

int cmd_tree_optimize(const ModelOptions& model_opts, int problems,
                      int trajectories, int max_tokens, std::size_t nodes,
                      const std::string& mode, std::uint64_t seed,
                      const std::string& output_dir) {
  if (problems < 1) throw UsageError("measurement problem set is empty");
  auto model = make_model(model_opts);
  ensure_output_dir(output_dir);

  stand::OptimizationConfig oc;
  oc.n_problems = problems;
  oc.trajectories_per_problem = trajectories;
  oc.max_tokens = max_tokens;
  oc.target_nodes = nodes;
  oc.seed = seed;
  oc.mode = parse_mode(mode);
  auto result =
      stand::optimize_tree(model, stand::build_initial_tree(), oc);

  stand::save_topology(result.tree, output_dir + "/tree.json");
  stand::save_stats(result.stats, output_dir + "/stats.json");

  auto hist = stand::depth_histogram(result.tree);
  std::ofstream csv(output_dir + "/depth_histogram.csv");
  csv << "depth,nodes\n";
  for (std::size_t d = 0; d < hist.size(); ++d)
    csv << (d + 1) << ',' << hist[d] << '\n';

  std::cout << "optimized tree: " << result.tree.draft_node_count()
            << " nodes, max depth " << result.tree.max_depth() << '\n';
  return 0;
}

int cmd_overlap(const std::vector<std::string>& inputs,
                const std::string& output_dir) {
  if (inputs.empty()) throw UsageError("at least one trajectory file needed");
  std::vector<std::vector<stand::TokenId>> trajectories;
  for (const auto& path : inputs) {
    if (!fs::exists(path))
      throw UsageError("trajectory file not found: " + path);
    auto loaded = stand::load_trajectories(path);
    trajectories.insert(trajectories.end(), loaded.begin(), loaded.end());
  }
  ensure_output_dir(output_dir);
  auto report = stand::overlap_report(trajectories);

  json j = json::array();
  std::ofstream csv(output_dir + "/overlap.csv");
  csv << "k,n,overlap_pct,distinct_pct,occurrences\n";
  for (const auto& e : report.entries) {
    j.push_back({{"k", e.k},
                 {"n", e.n},
                 {"overlap_pct", e.overlap_pct},
                 {"distinct_pct", e.distinct_pct},
                 {"occurrences", e.occurrences}});
    csv << e.k << ',' << e.n << ',' << e.overlap_pct << ','
        << e.distinct_pct << ',' << e.occurrences << '\n';
  }
  std::ofstream jout(output_dir + "/overlap.json");
  jout << j.dump(2) << '\n';
  if (!report.entries.empty()) {
    const auto& last = report.entries.back();
    std::cout << "overlap at k=" << last.k << ", n=" << last.n << ": "
              << last.overlap_pct << "%\n";
  }
  return 0;
}

int cmd_store_inspect(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("store file not found: " + path);
  auto store = stand::NGramStore::load(path);
  auto stats = store.snapshot_stats();
  json j = {{"vocab_size", store.vocab_size()},
            {"total_entries", stats.total_entries},
            {"memory_estimate_bytes", stats.memory_estimate_bytes}};
  for (int n = 0; n < stand::kMaxGram; ++n)
    j["entries_per_level"][std::to_string(n + 1)] =
        stats.entries_per_level[n];
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_store_export(const std::string& in_path, const std::string& out_path) {
  if (!fs::exists(in_path))
    throw UsageError("store file not found: " + in_path);
  auto store = stand::NGramStore::load(in_path);
  store.save(out_path);
  std::cout << "exported " << store.snapshot_stats().total_entries
            << " entries to " << out_path << '\n';
  return 0;
}

int cmd_store_import(const std::string& path, int vocab) {
  if (!fs::exists(path)) throw UsageError("store file not found: " + path);
  auto store = stand::NGramStore::load(path);
  if (vocab > 0 && store.vocab_size() != vocab)
    throw UsageError("store vocab_size " +
                     std::to_string(store.vocab_size()) +
                     " does not match expected " + std::to_string(vocab));
  std::cout << "imported " << store.snapshot_stats().total_entries
            << " entries (vocab " << store.vocab_size() << ")\n";
  return 0;
}

int cmd_probe(const ModelOptions& model_opts, int warmup_tokens, int rounds,
              std::uint64_t seed, const std::string& output_dir) {
  auto model = make_model(model_opts);
  ensure_output_dir(output_dir);

  // Warm the store with a few plain trajectories.
  stand::NGramStore store(model->vocab_size());
  stand::Rng rng(seed);
  std::vector<stand::TokenId> ctx{0};
  for (int i = 0; i < warmup_tokens; ++i) {
    auto p = model->next_distribution(ctx);
    store.update(ctx, p);
    ctx.push_back(stand::sample_from(p, rng));
  }

  auto stoch = stand::acceptance_probe(*model, store,
                                       stand::DraftMode::stochastic, rounds,
                                       seed + 1);
  auto det = stand::acceptance_probe(*model, store,
                                     stand::DraftMode::deterministic, rounds,
                                     seed + 1);
  json j = {{"stochastic", stoch.mean_acceptance},
            {"deterministic", det.mean_acceptance},
            {"contexts", stoch.contexts}};
  std::ofstream out(output_dir + "/probe.json");
  out << j.dump(2) << '\n';
  std::cout << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"STAND: model-free speculative decoding harness"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::string output_dir = "out";
  std::string config_path;
  app.add_option("--seed", seed, "global rng seed")->capture_default_str();
  app.add_option("--output-dir", output_dir, "output directory")
      ->capture_default_str();
  app.add_option("--config", config_path,
                 "JSON config file mirroring the flags");

  ModelOptions model_opts;

  auto* decode = app.add_subcommand("decode", "run speculative decoding");
  std::string tree_arg = "builtin:optimized-80";
  std::string mode = "stochastic";
  std::string scope = "per-problem";
  std::string prompt_text = "0";
  std::string stop_text;
  int trajectories = 4;
  int max_tokens = 256;
  bool timing = false;
  add_model_flags(decode, model_opts);
  decode->add_option("--tree", tree_arg,
                     "tree file or builtin:initial-625|builtin:optimized-80")
      ->capture_default_str();
  decode->add_option("--mode", mode, "stochastic|deterministic")
      ->capture_default_str();
  decode->add_option("--scope", scope, "per-trajectory|per-problem|global")
      ->capture_default_str();
  decode->add_option("--prompt", prompt_text, "comma-separated prompt tokens")
      ->capture_default_str();
  decode->add_option("--stop", stop_text, "comma-separated stop tokens");
  decode->add_option("--trajectories", trajectories, "trajectories per run")
      ->capture_default_str();
  decode->add_option("--max-tokens", max_tokens, "tokens per trajectory")
      ->capture_default_str();
  decode->add_flag("--timing", timing,
                   "include wall-clock timing in metrics.json (breaks "
                   "byte-for-byte replay of the report)");

  auto* treeopt =
      app.add_subcommand("tree-optimize", "625 -> 80 tree optimization");
  ModelOptions treeopt_model;
  treeopt_model.builtin = "redundant";
  int problems = 30;
  int opt_trajectories = 4;
  int opt_max_tokens = 200;
  std::size_t target_nodes = 80;
  std::string opt_mode = "stochastic";
  add_model_flags(treeopt, treeopt_model);
  treeopt->add_option("--problems", problems, "measurement problems")
      ->capture_default_str();
  treeopt->add_option("--trajectories", opt_trajectories,
                      "trajectories per problem")
      ->capture_default_str();
  treeopt->add_option("--max-tokens", opt_max_tokens, "tokens per trajectory")
      ->capture_default_str();
  treeopt->add_option("--target-nodes", target_nodes, "pruned tree size")
      ->capture_default_str();
  treeopt->add_option("--mode", opt_mode, "stochastic|deterministic")
      ->capture_default_str();

  auto* overlap_cmd =
      app.add_subcommand("overlap", "n-gram overlap analysis");
  std::vector<std::string> overlap_inputs;
  overlap_cmd->add_option("inputs", overlap_inputs,
                          "trajectory files (JSONL)");

  auto* store_cmd = app.add_subcommand("store", "store persistence tools");
  store_cmd->require_subcommand(1);
  auto* inspect = store_cmd->add_subcommand("inspect", "summarize a store");
  std::string store_path;
  inspect->add_option("file", store_path, "store file")->required();
  auto* store_export =
      store_cmd->add_subcommand("export", "re-export a store file");
  std::string export_in, export_out;
  store_export->add_option("file", export_in, "store file")->required();
  store_export->add_option("--out", export_out, "output path")->required();
  auto* store_import =
      store_cmd->add_subcommand("import", "validate a store file");
  std::string import_path;
  int import_vocab = 0;
  store_import->add_option("file", import_path, "store file")->required();
  store_import->add_option("--vocab", import_vocab,
                           "expected vocab size (0 = accept any)");

  auto* probe = app.add_subcommand(
      "probe", "stochastic vs deterministic acceptance probe");
  ModelOptions probe_model;
  probe_model.builtin = "redundant";
  int warmup_tokens = 2000;
  int probe_rounds = 200;
  add_model_flags(probe, probe_model);
  probe->add_option("--warmup-tokens", warmup_tokens,
                    "store warmup decode length")
      ->capture_default_str();
  probe->add_option("--rounds", probe_rounds, "probed contexts")
      ->capture_default_str();

  // Let the global flags (--seed, --output-dir, --config) appear after the
  // subcommand name as well.
  for (auto* sub : app.get_subcommands({})) {
    sub->fallthrough();
    for (auto* nested : sub->get_subcommands({})) nested->fallthrough();
  }

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    args = apply_config_file(std::move(args));
    std::vector<const char*> cargs{argv[0]};
    for (const auto& a : args) cargs.push_back(a.c_str());
    app.parse(static_cast<int>(cargs.size()),
              const_cast<char**>(cargs.data()));

    if (decode->parsed())
      return cmd_decode(model_opts, tree_arg, mode, scope, prompt_text,
                        stop_text, trajectories, max_tokens, seed, output_dir,
                        timing);
    if (treeopt->parsed())
      return cmd_tree_optimize(treeopt_model, problems, opt_trajectories,
                               opt_max_tokens, target_nodes, opt_mode, seed,
                               output_dir);
    if (overlap_cmd->parsed()) return cmd_overlap(overlap_inputs, output_dir);
    if (store_cmd->parsed()) {
      if (inspect->parsed()) return cmd_store_inspect(store_path);
      if (store_export->parsed())
        return cmd_store_export(export_in, export_out);
      if (store_import->parsed())
        return cmd_store_import(import_path, import_vocab);
    }
    if (probe->parsed())
      return cmd_probe(probe_model, warmup_tokens, probe_rounds, seed,
                       output_dir);
    return 2;
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
