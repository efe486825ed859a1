/**
 * cellsim command-line front end. Links only the public C API.
 *
 * Subcommands: preprocess, match, index, query, simulate, evaluate, bench.
 */

#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cellsim/cellsim.h"

namespace {

struct ConfigHandle {
  cellsim_config *ptr = cellsim_config_create();
  ~ConfigHandle() { cellsim_config_destroy(ptr); }
};
struct NetworkHandle {
  cellsim_network *ptr = nullptr;
  ~NetworkHandle() { cellsim_network_destroy(ptr); }
};
struct TowersHandle {
  cellsim_towers *ptr = nullptr;
  ~TowersHandle() { cellsim_towers_destroy(ptr); }
};
struct StoreHandle {
  cellsim_store *ptr = nullptr;
  ~StoreHandle() { cellsim_store_destroy(ptr); }
};

int fail(cellsim_status status, const char *stage) {
  std::fprintf(stderr, "cellsim %s failed (%s): %s\n", stage,
               cellsim_status_name(status), cellsim_last_error());
  return static_cast<int>(status);
}

struct CommonOptions {
  std::string config_file;
  int workers = 0;
  double tau = -1.0;
  double epsilon = -1.0;
  int m_max = 0;
  bool no_global_prune = false;
  bool no_local_prune = false;
  std::int64_t seed = -1;
};

void add_common(CLI::App *cmd, CommonOptions *opts) {
  cmd->add_option("--config", opts->config_file, "key=value config file");
  cmd->add_option("--workers", opts->workers, "worker thread count");
  cmd->add_option("--tau", opts->tau, "similarity threshold");
  cmd->add_option("--epsilon", opts->epsilon, "global pruning radius");
  cmd->add_option("--m-max", opts->m_max, "maximum trajectory candidates");
  cmd->add_flag("--no-global-prune", opts->no_global_prune, "disable global pruning");
  cmd->add_flag("--no-local-prune", opts->no_local_prune, "disable local pruning");
  cmd->add_option("--seed", opts->seed, "benchmark seed");
}

cellsim_status apply_common(cellsim_config *config, const CommonOptions &opts) {
  cellsim_status s = CELLSIM_OK;
  const auto set = [&](const char *key, const std::string &value) {
    if (s == CELLSIM_OK) s = cellsim_config_set(config, key, value.c_str());
  };
  if (!opts.config_file.empty()) {
    s = cellsim_config_load_file(config, opts.config_file.c_str());
    if (s != CELLSIM_OK) return s;
  }
  if (opts.workers > 0) set("workers", std::to_string(opts.workers));
  if (opts.tau >= 0.0) set("search.tau", std::to_string(opts.tau));
  if (opts.epsilon >= 0.0) set("search.epsilon0", std::to_string(opts.epsilon));
  if (opts.m_max > 0) {
    set("match.m_max", std::to_string(opts.m_max));
    set("search.m_cap", std::to_string(opts.m_max));
  }
  if (opts.no_global_prune) set("search.global_pruning", "false");
  if (opts.no_local_prune) set("search.local_pruning", "false");
  if (opts.seed >= 0) set("sim.seed", std::to_string(opts.seed));
  return s;
}

int write_manifest(cellsim_config *config, const std::string &out,
                   const std::string &command) {
  const std::string path = out + ".manifest";
  const cellsim_status s =
      cellsim_config_write_manifest(config, path.c_str(), command.c_str());
  if (s != CELLSIM_OK) return fail(s, "manifest");
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"cellsim: similar-trajectory retrieval from cellular data"};
  app.require_subcommand(1);

  CommonOptions opts;
  std::string network_path, towers_path, records_path, store_path, index_path;
  std::string query_path, report_path, out_path, world_dir, truth_path;
  std::string results_path, workers_list = "1,2,4,8";
  bool query_is_gps = false;

  auto *preprocess = app.add_subcommand("preprocess", "filter raw records");
  preprocess->add_option("--network", network_path)->required();
  preprocess->add_option("--towers", towers_path)->required();
  preprocess->add_option("--records", records_path)->required();
  preprocess->add_option("--out", out_path)->required();
  add_common(preprocess, &opts);

  auto *match = app.add_subcommand("match", "map-match records into a store");
  match->add_option("--network", network_path)->required();
  match->add_option("--towers", towers_path)->required();
  match->add_option("--records", records_path)->required();
  match->add_option("--out", out_path)->required();
  add_common(match, &opts);

  auto *index = app.add_subcommand("index", "build the summary index of a store");
  index->add_option("--network", network_path)->required();
  index->add_option("--store", store_path)->required();
  index->add_option("--out", out_path)->required();
  add_common(index, &opts);

  auto *query = app.add_subcommand("query", "search similar trajectories");
  query->add_option("--network", network_path)->required();
  query->add_option("--towers", towers_path)->required();
  query->add_option("--store", store_path)->required();
  query->add_option("--query", query_path)->required();
  query->add_flag("--gps", query_is_gps, "query file is a GPS trace");
  query->add_option("--out", out_path)->required();
  add_common(query, &opts);

  auto *simulate = app.add_subcommand("simulate", "generate a benchmark world");
  simulate->add_option("--out", out_path)->required();
  add_common(simulate, &opts);

  auto *evaluate = app.add_subcommand("evaluate", "score results against truth");
  evaluate->add_option("--truth", truth_path)->required();
  evaluate->add_option("--results", results_path, "query report file");
  evaluate->add_option("--store", store_path, "candidate store for matching metrics");
  evaluate->add_option("--network", network_path);
  add_common(evaluate, &opts);

  auto *bench = app.add_subcommand("bench", "time matching and query stages");
  bench->add_option("--world", world_dir)->required();
  bench->add_option("--worker-counts", workers_list, "comma-separated counts");
  bench->add_option("--out", out_path)->required();
  add_common(bench, &opts);

  CLI11_PARSE(app, argc, argv);

  ConfigHandle config;
  if (const cellsim_status s = apply_common(config.ptr, opts); s != CELLSIM_OK)
    return fail(s, "config");

  std::string command;
  for (int i = 0; i < argc; ++i) {
    if (i) command += ' ';
    command += argv[i];
  }

  const auto load_network = [&](NetworkHandle &net) -> int {
    const cellsim_status s = cellsim_network_load(network_path.c_str(), &net.ptr);
    return s == CELLSIM_OK ? 0 : fail(s, "network load");
  };
  const auto load_towers = [&](const NetworkHandle &net, TowersHandle &tw) -> int {
    const cellsim_status s =
        cellsim_towers_load(towers_path.c_str(), net.ptr, &tw.ptr);
    return s == CELLSIM_OK ? 0 : fail(s, "towers load");
  };

  if (preprocess->parsed()) {
    NetworkHandle net;
    TowersHandle towers;
    if (int rc = load_network(net)) return rc;
    if (int rc = load_towers(net, towers)) return rc;
    cellsim_preprocess_stats stats{};
    const cellsim_status s = cellsim_preprocess(
        config.ptr, records_path.c_str(), towers.ptr, out_path.c_str(), &stats);
    if (s != CELLSIM_OK) return fail(s, "preprocess");
    std::printf(
        "preprocess: %llu lines, %llu malformed, %llu unknown-tower, "
        "%llu sequences in, %llu kept (%llu screened), points %llu -> %llu\n",
        (unsigned long long)stats.lines, (unsigned long long)stats.malformed,
        (unsigned long long)stats.unknown_tower,
        (unsigned long long)stats.sequences_in,
        (unsigned long long)stats.sequences_kept,
        (unsigned long long)stats.screened_low_rate,
        (unsigned long long)stats.points_in,
        (unsigned long long)stats.points_kept);
    return write_manifest(config.ptr, out_path, command);
  }

  if (match->parsed()) {
    NetworkHandle net;
    TowersHandle towers;
    if (int rc = load_network(net)) return rc;
    if (int rc = load_towers(net, towers)) return rc;
    cellsim_match_stats stats{};
    const cellsim_status s =
        cellsim_match(config.ptr, net.ptr, towers.ptr, records_path.c_str(),
                      out_path.c_str(), &stats);
    if (s != CELLSIM_OK) return fail(s, "match");
    std::printf(
        "match: %llu sequences, %llu matched, %llu too-short, %llu unmatchable, "
        "%.3f s\n",
        (unsigned long long)stats.sequences, (unsigned long long)stats.matched,
        (unsigned long long)stats.failed_too_short,
        (unsigned long long)stats.failed_unmatchable, stats.elapsed_s);
    return write_manifest(config.ptr, out_path, command);
  }

  if (index->parsed()) {
    NetworkHandle net;
    if (int rc = load_network(net)) return rc;
    const cellsim_status s =
        cellsim_index(net.ptr, store_path.c_str(), out_path.c_str());
    if (s != CELLSIM_OK) return fail(s, "index");
    std::printf("index: wrote %s\n", out_path.c_str());
    return write_manifest(config.ptr, out_path, command);
  }

  if (query->parsed()) {
    NetworkHandle net;
    TowersHandle towers;
    StoreHandle store;
    if (int rc = load_network(net)) return rc;
    if (int rc = load_towers(net, towers)) return rc;
    if (const cellsim_status s = cellsim_store_open(store_path.c_str(), &store.ptr);
        s != CELLSIM_OK)
      return fail(s, "store open");
    cellsim_query_stats stats{};
    const cellsim_status s = cellsim_query(
        config.ptr, net.ptr, towers.ptr, store.ptr, query_path.c_str(),
        query_is_gps ? 1 : 0, out_path.c_str(), &stats);
    if (s != CELLSIM_OK) return fail(s, "query");
    std::printf(
        "query: %llu results of %llu entries (%llu pruned globally, "
        "%llu pairs cut), %.3f s\n",
        (unsigned long long)stats.results, (unsigned long long)stats.entries_total,
        (unsigned long long)stats.entries_skipped_global,
        (unsigned long long)stats.pairs_cut_local, stats.elapsed_s);
    return write_manifest(config.ptr, out_path, command);
  }

  if (simulate->parsed()) {
    const cellsim_status s = cellsim_simulate(config.ptr, out_path.c_str());
    if (s != CELLSIM_OK) return fail(s, "simulate");
    std::printf("simulate: world written to %s\n", out_path.c_str());
    return write_manifest(config.ptr, out_path + "/world", command);
  }

  if (evaluate->parsed()) {
    cellsim_metrics metrics{};
    if (!results_path.empty()) {
      const cellsim_status s = cellsim_evaluate_search(
          results_path.c_str(), truth_path.c_str(), &metrics);
      if (s != CELLSIM_OK) return fail(s, "evaluate");
      std::printf("search precision %.4f recall %.4f f-measure %.4f\n",
                  metrics.precision, metrics.recall, metrics.f_measure);
    }
    if (!store_path.empty()) {
      if (network_path.empty()) {
        std::fprintf(stderr, "evaluate --store requires --network\n");
        return 2;
      }
      NetworkHandle net;
      StoreHandle store;
      if (int rc = load_network(net)) return rc;
      if (const cellsim_status s =
              cellsim_store_open(store_path.c_str(), &store.ptr);
          s != CELLSIM_OK)
        return fail(s, "store open");
      const cellsim_status s = cellsim_evaluate_matching(
          net.ptr, store.ptr, truth_path.c_str(), &metrics);
      if (s != CELLSIM_OK) return fail(s, "evaluate");
      std::printf("matching precision %.4f recall %.4f\n",
                  metrics.matching_precision, metrics.matching_recall);
    }
    if (results_path.empty() && store_path.empty()) {
      std::fprintf(stderr, "evaluate needs --results and/or --store\n");
      return 2;
    }
    return 0;
  }

  if (bench->parsed()) {
    std::vector<std::int32_t> counts;
    std::string item;
    for (char c : workers_list + ",") {
      if (c == ',') {
        if (!item.empty()) counts.push_back(std::stoi(item));
        item.clear();
      } else {
        item += c;
      }
    }
    cellsim_bench_report report{};
    const cellsim_status s =
        cellsim_bench(config.ptr, world_dir.c_str(), counts.data(),
                      static_cast<std::int32_t>(counts.size()), out_path.c_str(),
                      &report);
    if (s != CELLSIM_OK) return fail(s, "bench");
    for (std::int32_t i = 0; i < report.row_count; ++i)
      std::printf("bench: workers %d -> %.3f s (%.2f seq/s)\n",
                  report.rows[i].workers, report.rows[i].match_seconds,
                  report.rows[i].throughput);
    std::printf("bench: query pruned %.3f s vs unpruned %.3f s on %llu entries\n",
                report.query_pruned_s, report.query_unpruned_s,
                (unsigned long long)report.dataset_entries);
    return write_manifest(config.ptr, out_path, command);
  }

  return 0;
}
