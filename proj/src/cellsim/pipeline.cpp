#include "cellsim/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cellsim/error.hpp"
#include "cellsim/worker_pool.hpp"

namespace cellsim {

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::vector<CellRecord> read_records_file(const std::string &path,
                                          ParseStats *stats) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open records file: " + path);
  return parse_records(in, stats);
}

double density_near(const TowerMap &towers, const Point &p) {
  double best_d = kUnreachable;
  double density = 50.0;  // dense default when the map is empty
  for (const CellTower &t : towers.towers()) {
    const double d = distance(t.position, p);
    if (d < best_d) {
      best_d = d;
      density = t.local_density;
    }
  }
  return density;
}

}  // namespace

std::vector<TowerSequence> preprocess_sequences(const RunConfig &cfg,
                                                const std::string &records_path,
                                                const TowerMap &towers,
                                                PreprocessStats *stats) {
  PreprocessStats local;
  ParseStats parse_stats;
  auto records = read_records_file(records_path, &parse_stats);
  local.lines = parse_stats.lines;
  local.malformed = parse_stats.skipped;

  // Records whose tower is absent from the map cannot be positioned.
  std::vector<CellRecord> resolved;
  resolved.reserve(records.size());
  for (CellRecord &r : records) {
    if (towers.find(r.tower) == nullptr)
      ++local.unknown_tower;
    else
      resolved.push_back(std::move(r));
  }

  SequenceStats seq_stats;
  auto sequences = build_sequences(resolved, &seq_stats);
  local.duplicates = seq_stats.duplicates;
  local.conflicts = seq_stats.conflicts;
  local.sequences_in = sequences.size();

  std::vector<TowerSequence> kept;
  for (TowerSequence &seq : sequences) {
    local.points_in += seq.points.size();
    if (cfg.filter.screen_min_rate && !passes_rate_screen(seq)) {
      ++local.screened_low_rate;
      continue;
    }
    TowerSequence filtered = apply_filters(seq, towers, cfg.filter);
    local.points_kept += filtered.points.size();
    kept.push_back(std::move(filtered));
  }
  local.sequences_kept = kept.size();
  if (stats) *stats = local;
  return kept;
}

PreprocessStats preprocess_stage(const RunConfig &cfg,
                                 const std::string &records_path,
                                 const TowerMap &towers,
                                 const std::string &out_records_path) {
  PreprocessStats stats;
  const auto sequences = preprocess_sequences(cfg, records_path, towers, &stats);
  std::ofstream out(out_records_path);
  if (!out)
    throw Error(ErrorCode::io, "cannot write records file: " + out_records_path);
  for (const TowerSequence &seq : sequences)
    for (const SequencePoint &p : seq.points)
      out << seq.user_id << ',' << format_compact_time(p.timestamp) << ','
          << p.tower.lac << ',' << p.tower.cid << '\n';
  return stats;
}

std::vector<CandidateSet> match_sequences(const RunConfig &cfg,
                                          const RoadNetwork &net,
                                          const TowerMap &towers,
                                          const std::vector<TowerSequence> &seqs,
                                          MatchStats *stats) {
  MatchStats local;
  local.sequences = seqs.size();

  std::vector<CandidateSet> slots(seqs.size());
  std::vector<char> ok(seqs.size(), 0);
  std::atomic<std::uint64_t> too_short{0}, unmatchable{0}, dropped{0};

  const double t0 = now_seconds();
  parallel_for(seqs.size(), cfg.workers, [&](std::size_t i) {
    try {
      const MatchOutcome outcome = match_sequence(seqs[i], net, towers, cfg.match);
      dropped.fetch_add(outcome.dropped_observations.size(),
                        std::memory_order_relaxed);
      slots[i] = expand_candidates(outcome, seqs[i].user_id, net, cfg.match,
                                   cfg.match.m_max);
      ok[i] = 1;
    } catch (const Error &e) {
      if (e.code() == ErrorCode::too_short)
        too_short.fetch_add(1, std::memory_order_relaxed);
      else if (e.code() == ErrorCode::unmatchable)
        unmatchable.fetch_add(1, std::memory_order_relaxed);
      else
        throw;
    }
  });
  local.elapsed_s = now_seconds() - t0;

  std::vector<CandidateSet> out;
  out.reserve(seqs.size());
  for (std::size_t i = 0; i < seqs.size(); ++i)
    if (ok[i]) out.push_back(std::move(slots[i]));
  local.matched = out.size();
  local.failed_too_short = too_short.load();
  local.failed_unmatchable = unmatchable.load();
  local.dropped_points = dropped.load();
  if (stats) *stats = local;
  return out;
}

MatchStats match_stage(const RunConfig &cfg, const RoadNetwork &net,
                       const TowerMap &towers, const std::string &records_path,
                       const std::string &store_path) {
  // The match stage consumes preprocessed records verbatim; filtering
  // belongs to the preprocess stage.
  ParseStats parse_stats;
  const auto records = read_records_file(records_path, &parse_stats);
  const auto sequences = build_sequences(records);

  MatchStats stats;
  const auto sets = match_sequences(cfg, net, towers, sequences, &stats);
  CandidateStore::write(store_path, sets);
  return stats;
}

void index_stage(const std::string &store_path, const RoadNetwork &net,
                 const std::string &out_index_path) {
  const CandidateStore store = CandidateStore::open(store_path);
  CandidateStore::write_summaries(out_index_path, store.build_summaries(net));
}

CandidateSet snap_gps_trace(const std::string &path, const RoadNetwork &net) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open GPS trace: " + path);

  std::vector<std::pair<std::int64_t, Point>> pts;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string t_str, lon_str, lat_str;
    if (!std::getline(ss, t_str, ',') || !std::getline(ss, lon_str, ',') ||
        !std::getline(ss, lat_str, ','))
      throw Error(ErrorCode::parse, "GPS trace line " + std::to_string(lineno) +
                                        ": expected time,lon,lat");
    std::int64_t t = 0;
    if (t_str.size() == 14) {
      const auto parsed = parse_compact_time(t_str);
      if (!parsed)
        throw Error(ErrorCode::parse,
                    "GPS trace line " + std::to_string(lineno) + ": bad time");
      t = *parsed;
    } else {
      try {
        t = std::stoll(t_str);
      } catch (const std::exception &) {
        throw Error(ErrorCode::parse,
                    "GPS trace line " + std::to_string(lineno) + ": bad time");
      }
    }
    try {
      pts.emplace_back(t, net.frame().to_planar(
                              LonLat{std::stod(lon_str), std::stod(lat_str)}));
    } catch (const std::exception &) {
      throw Error(ErrorCode::parse,
                  "GPS trace line " + std::to_string(lineno) + ": bad coordinate");
    }
  }
  if (pts.size() < 2)
    throw Error(ErrorCode::too_short, "GPS trace has fewer than 2 points");
  std::stable_sort(pts.begin(), pts.end(),
                   [](const auto &a, const auto &b) { return a.first < b.first; });

  CandidateTrajectory traj;
  std::vector<PointOnSegment> snapped;
  for (const auto &[t, p] : pts) {
    std::vector<SegmentCandidate> cands;
    for (double radius = 50.0; radius <= 3200.0 && cands.empty(); radius *= 2.0)
      cands = net.candidates_in_disc(p, radius);
    if (cands.empty())
      throw Error(ErrorCode::unmatchable, "GPS point too far from the network");
    const SegmentCandidate *best = &cands.front();
    for (const SegmentCandidate &c : cands)
      if (c.distance_m < best->distance_m) best = &c;
    snapped.push_back(PointOnSegment{best->segment, best->offset_m, best->projected});
    traj.timestamps.push_back(t);
  }
  for (std::size_t i = 1; i < snapped.size(); ++i) {
    auto path = net.shortest_path(snapped[i - 1], snapped[i]);
    if (!path)
      throw Error(ErrorCode::unmatchable,
                  "GPS trace crosses disconnected network parts");
    traj.gap_scores.push_back(0.0);
    traj.subpaths.push_back(std::move(*path));
  }
  traj.raw_log_prob = 0.0;
  traj.confidence = 1.0;

  CandidateSet set;
  set.sequence_id = "gps-query";
  set.candidates.push_back(std::move(traj));
  return set;
}

CandidateSet match_query_file(const RunConfig &cfg, const RoadNetwork &net,
                              const TowerMap &towers, const std::string &path,
                              double *query_density) {
  PreprocessStats stats;
  auto sequences = preprocess_sequences(cfg, path, towers, &stats);
  if (sequences.empty())
    throw Error(ErrorCode::too_short, "query file has no usable sequence");
  const TowerSequence &seq = sequences.front();
  if (query_density) {
    const CellTower *first = towers.find(seq.points.front().tower);
    const CellTower *last = towers.find(seq.points.back().tower);
    *query_density = std::min(first ? first->local_density : 50.0,
                              last ? last->local_density : 50.0);
  }
  return expand_candidates(seq, net, towers, cfg.match, cfg.match.m_max);
}

QueryStats query_stage(const RunConfig &cfg, const RoadNetwork &net,
                       const TowerMap &towers, const CandidateStore &store,
                       const std::string &query_path, bool query_is_gps,
                       const std::string &out_report_path) {
  QueryStats stats;
  double density = 50.0;
  CandidateSet query;
  if (query_is_gps) {
    query = snap_gps_trace(query_path, net);
    const auto summary = summarize(query, net);
    density = std::min(density_near(towers, summary.start),
                       density_near(towers, summary.end));
  } else {
    query = match_query_file(cfg, net, towers, query_path, &density);
  }
  stats.query_id = query.sequence_id;

  const SearchDataset dataset(store.entries(), net);
  const double t0 = now_seconds();
  const SearchReport report =
      search(query, density, dataset, net, cfg.search, cfg.workers);
  stats.elapsed_s = now_seconds() - t0;
  stats.search = report.stats;
  stats.results = report.results.size();

  std::ofstream out(out_report_path);
  if (!out) throw Error(ErrorCode::io, "cannot write report: " + out_report_path);
  out << "# query " << query.sequence_id << " tau " << cfg.search.tau
      << " results " << report.results.size() << "\n";
  out << "# entries " << report.stats.entries_total << " skipped_global "
      << report.stats.entries_skipped_global << " pairs_cut_local "
      << report.stats.pairs_cut_local << "\n";
  out << "query_id,result_id,similarity,query_rank,entry_rank\n";
  out.precision(17);
  for (const QueryResult &r : report.results)
    out << query.sequence_id << ',' << r.id << ',' << r.similarity << ','
        << r.query_rank << ',' << r.entry_rank << '\n';
  return stats;
}

void simulate_stage(const RunConfig &cfg, const std::string &out_dir) {
  const BenchmarkWorld world = synthesize_benchmark(cfg.bench);
  write_world(world, out_dir);
}

Metrics evaluate_search_file(const std::string &results_path,
                             const GroundTruth &truth) {
  std::ifstream in(results_path);
  if (!in) throw Error(ErrorCode::io, "cannot open results file: " + results_path);
  std::map<std::string, std::vector<std::string>> retrieved;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    if (line.rfind("query_id,", 0) == 0) continue;  // header
    std::stringstream ss(line);
    std::string query_id, result_id;
    std::getline(ss, query_id, ',');
    std::getline(ss, result_id, ',');
    retrieved[query_id].push_back(result_id);
  }
  return evaluate_search(retrieved, truth);
}

Metrics evaluate_matching_store(const CandidateStore &store,
                                const GroundTruth &truth, const RoadNetwork &net) {
  std::map<std::string, const CandidateTrajectory *> matched;
  for (const CandidateSet &set : store.entries()) {
    if (truth.find(set.sequence_id) == nullptr) continue;
    matched[set.sequence_id] = &set.candidates.front();
  }
  return evaluate_matching(matched, truth, net);
}

BenchReport bench_stage(const RunConfig &cfg, const std::string &world_dir,
                        const std::vector<int> &worker_counts,
                        const std::string &out_report_path) {
  const RoadNetwork net = RoadNetwork::load(world_dir + "/network.json");
  const TowerMap towers = TowerMap::load(world_dir + "/towers.csv", net.frame());
  const auto sequences =
      preprocess_sequences(cfg, world_dir + "/records.csv", towers);

  BenchReport report;
  std::vector<CandidateSet> sets;
  for (int workers : worker_counts) {
    RunConfig run = cfg;
    run.workers = workers;
    MatchStats stats;
    auto matched = match_sequences(run, net, towers, sequences, &stats);
    BenchRow row;
    row.workers = workers;
    row.sequences = stats.matched;
    row.match_seconds = stats.elapsed_s;
    row.throughput = stats.elapsed_s > 0.0
                         ? static_cast<double>(stats.matched) / stats.elapsed_s
                         : 0.0;
    report.worker_sweep.push_back(row);
    if (sets.empty()) sets = std::move(matched);
  }

  if (!sets.empty()) {
    const SearchDataset dataset(sets, net);
    report.dataset_entries = dataset.size();
    CandidateSet query = sets.front();
    const double density = 50.0;

    SearchConfig pruned = cfg.search;
    pruned.global_pruning = true;
    pruned.local_pruning = true;
    SearchConfig unpruned = cfg.search;
    unpruned.global_pruning = false;
    unpruned.local_pruning = false;

    double t0 = now_seconds();
    const auto rep_pruned = search(query, density, dataset, net, pruned, cfg.workers);
    report.query_pruned_s = now_seconds() - t0;
    t0 = now_seconds();
    const auto rep_unpruned =
        search(query, density, dataset, net, unpruned, cfg.workers);
    report.query_unpruned_s = now_seconds() - t0;
    (void)rep_pruned;
    (void)rep_unpruned;
  }

  std::ofstream out(out_report_path);
  if (!out) throw Error(ErrorCode::io, "cannot write bench report: " + out_report_path);
  out << "workers,sequences,match_seconds,throughput_seq_per_s\n";
  out.precision(6);
  for (const BenchRow &row : report.worker_sweep)
    out << row.workers << ',' << row.sequences << ',' << std::fixed
        << row.match_seconds << ',' << row.throughput << '\n';
  out << "query_pruned_s," << report.query_pruned_s << '\n';
  out << "query_unpruned_s," << report.query_unpruned_s << '\n';
  out << "dataset_entries," << report.dataset_entries << '\n';
  return report;
}

}  // namespace cellsim
