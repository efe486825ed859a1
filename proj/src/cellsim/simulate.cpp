#include "cellsim/simulate.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "cellsim/error.hpp"
#include "cellsim/rng.hpp"

namespace cellsim {

void BenchmarkConfig::validate() const {
  const auto bad = [](const std::string &what) {
    throw Error(ErrorCode::validation, "benchmark config: " + what);
  };
  if (grid_rows < 2 || grid_cols < 2) bad("grid must be at least 2x2");
  if (block_m <= 0.0) bad("block_m must be positive");
  if (group_size_min < 2 || group_size_max < group_size_min)
    bad("group size range must satisfy 2 <= min <= max");
  if (group_count < 0 || singles_count < 0) bad("counts must be non-negative");
  for (double r : {pingpong_rate, backward_rate, drift_rate})
    if (r < 0.0 || r > 1.0) bad("noise rates must be in [0, 1]");
  if (carrier_count < 1) bad("carrier_count must be >= 1");
  if (trip_km_min <= 0.0 || trip_km_max < trip_km_min) bad("trip length range");
  if (sample_interval_min_s <= 0.0 || sample_interval_max_s < sample_interval_min_s)
    bad("sample interval range");
  if (urban_density < rural_density) bad("urban density below rural density");
}

const MemberTruth *GroundTruth::find(const std::string &member_id) const {
  for (const MemberTruth &m : members)
    if (m.member_id == member_id) return &m;
  return nullptr;
}

namespace {

// Fixed geographic anchor of generated worlds.
constexpr double kBaseLon = 108.0;
constexpr double kBaseLat = 34.0;

std::string fmt_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string grid_network_json(const BenchmarkConfig &cfg) {
  const PlanarFrame frame(LonLat{kBaseLon, kBaseLat});
  std::string out = "{\n\"nodes\": [\n";
  for (int r = 0; r < cfg.grid_rows; ++r) {
    for (int c = 0; c < cfg.grid_cols; ++c) {
      const LonLat ll =
          frame.to_lonlat(Point{c * cfg.block_m, r * cfg.block_m});
      const int id = r * cfg.grid_cols + c;
      out += "{\"id\": " + std::to_string(id) + ", \"lon\": " + fmt_double(ll.lon) +
             ", \"lat\": " + fmt_double(ll.lat) + "}";
      if (id + 1 < cfg.grid_rows * cfg.grid_cols) out += ",";
      out += "\n";
    }
  }
  out += "],\n\"segments\": [\n";
  // Every third line is an arterial with a higher limit.
  std::vector<std::string> rows;
  int sid = 0;
  for (int r = 0; r < cfg.grid_rows; ++r)
    for (int c = 0; c + 1 < cfg.grid_cols; ++c) {
      const int a = r * cfg.grid_cols + c;
      const double speed = (r % 3 == 0) ? 80.0 : 50.0;
      rows.push_back("{\"id\": " + std::to_string(sid++) + ", \"from\": " +
                     std::to_string(a) + ", \"to\": " + std::to_string(a + 1) +
                     ", \"speed_kmh\": " + fmt_double(speed) +
                     ", \"oneway\": false}");
    }
  for (int r = 0; r + 1 < cfg.grid_rows; ++r)
    for (int c = 0; c < cfg.grid_cols; ++c) {
      const int a = r * cfg.grid_cols + c;
      const double speed = (c % 3 == 0) ? 80.0 : 50.0;
      rows.push_back("{\"id\": " + std::to_string(sid++) + ", \"from\": " +
                     std::to_string(a) + ", \"to\": " +
                     std::to_string(a + cfg.grid_cols) +
                     ", \"speed_kmh\": " + fmt_double(speed) +
                     ", \"oneway\": false}");
    }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out += rows[i];
    if (i + 1 < rows.size()) out += ",";
    out += "\n";
  }
  out += "]\n}\n";
  return out;
}

struct TowerSite {
  Point position;
  int carrier;
};

std::vector<TowerSite> place_towers(const BenchmarkConfig &cfg,
                                    const RoadNetwork &net, Rng &rng) {
  // Work in the loaded network's frame so towers and roads agree.
  double min_x = kUnreachable, min_y = kUnreachable;
  double max_x = -kUnreachable, max_y = -kUnreachable;
  for (const RoadNode &n : net.nodes()) {
    min_x = std::min(min_x, n.position.x);
    max_x = std::max(max_x, n.position.x);
    min_y = std::min(min_y, n.position.y);
    max_y = std::max(max_y, n.position.y);
  }
  const double width = max_x - min_x;
  const double height = max_y - min_y;
  const double area_km2 = width * height / 1e6;
  const Point center{(min_x + max_x) / 2.0, (min_y + max_y) / 2.0};
  const double urban_radius =
      cfg.urban_radius_frac * 0.5 * std::min(width, height);
  const double urban_area_km2 = kPi * urban_radius * urban_radius / 1e6;

  std::vector<TowerSite> sites;
  const auto n_rural = static_cast<std::size_t>(cfg.rural_density * area_km2);
  for (std::size_t i = 0; i < n_rural; ++i) {
    sites.push_back(TowerSite{Point{min_x + rng.uniform() * width,
                                    min_y + rng.uniform() * height},
                              0});
  }
  const auto n_extra = static_cast<std::size_t>(
      (cfg.urban_density - cfg.rural_density) * urban_area_km2);
  for (std::size_t i = 0; i < n_extra; ++i) {
    // Uniform in the urban disc.
    const double ang = rng.uniform() * kTwoPi;
    const double rad = urban_radius * std::sqrt(rng.uniform());
    sites.push_back(TowerSite{
        Point{center.x + rad * std::cos(ang), center.y + rad * std::sin(ang)}, 0});
  }
  for (std::size_t i = 0; i < sites.size(); ++i)
    sites[i].carrier = static_cast<int>(i % cfg.carrier_count);
  return sites;
}

struct Trip {
  std::vector<SegmentId> segments;
  double start_time = 0.0;
  std::vector<double> seg_speeds_m_s;  // parallel to segments
};

// Random walk that avoids immediate reversals until the target length.
std::vector<SegmentId> random_route(const RoadNetwork &net, Rng &rng,
                                    double target_m) {
  const std::uint32_t start_node =
      static_cast<std::uint32_t>(rng.uniform_u64(net.nodes().size()));
  std::vector<SegmentId> route;
  double len = 0.0;
  std::uint32_t node = start_node;
  SegmentId prev = kNoSegment;
  while (len < target_m) {
    const auto &out = net.out_segments(node);
    if (out.empty()) break;
    std::vector<SegmentId> options;
    for (SegmentId s : out) {
      if (prev != kNoSegment && net.segment(prev).twin == s) continue;
      options.push_back(s);
    }
    if (options.empty()) options.assign(out.begin(), out.end());
    const SegmentId chosen =
        options[rng.uniform_u64(options.size())];
    route.push_back(chosen);
    len += net.segment(chosen).length_m;
    node = net.segment(chosen).to_node;
    prev = chosen;
  }
  return route;
}

std::vector<TruthArc> timed_arcs(const RoadNetwork &net, const Trip &trip) {
  std::vector<TruthArc> arcs;
  double t = trip.start_time;
  for (std::size_t i = 0; i < trip.segments.size(); ++i) {
    const RoadSegment &seg = net.segment(trip.segments[i]);
    TruthArc arc;
    arc.segment = trip.segments[i];
    arc.lo = 0.0;
    arc.hi = seg.length_m;
    arc.t_enter = t;
    t += seg.length_m / trip.seg_speeds_m_s[i];
    arc.t_exit = t;
    arcs.push_back(arc);
  }
  return arcs;
}

Point true_position(const RoadNetwork &net, const std::vector<TruthArc> &arcs,
                    double t) {
  if (arcs.empty()) return Point{};
  if (t <= arcs.front().t_enter)
    return net.point_on_segment(arcs.front().segment, arcs.front().lo).position;
  for (const TruthArc &arc : arcs) {
    if (t <= arc.t_exit) {
      const double f = (arc.t_exit > arc.t_enter)
                           ? (t - arc.t_enter) / (arc.t_exit - arc.t_enter)
                           : 0.0;
      return net
          .point_on_segment(arc.segment, arc.lo + f * (arc.hi - arc.lo))
          .position;
    }
  }
  return net.point_on_segment(arcs.back().segment, arcs.back().hi).position;
}

// Nearest tower of one carrier; k-th nearest via `skip`.
int nearest_tower(const std::vector<TowerSite> &sites, int carrier,
                  const Point &p, int skip = 0) {
  int best = -1;
  double best_d = kUnreachable;
  int second = -1;
  double second_d = kUnreachable;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    if (sites[i].carrier != carrier) continue;
    const double d = distance(sites[i].position, p);
    if (d < best_d) {
      second = best;
      second_d = best_d;
      best = static_cast<int>(i);
      best_d = d;
    } else if (d < second_d) {
      second = static_cast<int>(i);
      second_d = d;
    }
  }
  return skip == 0 ? best : second;
}

}  // namespace

BenchmarkWorld synthesize_benchmark(const BenchmarkConfig &cfg) {
  cfg.validate();
  Rng rng(cfg.seed);

  BenchmarkWorld world;
  world.network_json = grid_network_json(cfg);
  world.network = RoadNetwork::from_json_text(world.network_json);
  const RoadNetwork &net = world.network;

  const auto sites = place_towers(cfg, net, rng);
  if (sites.empty())
    throw Error(ErrorCode::validation, "benchmark produced no towers");
  world.tower_carrier.reserve(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) {
    CellTower t;
    t.key = TowerKey{static_cast<std::int32_t>(37000 + sites[i].carrier),
                     static_cast<std::int32_t>(10000 + i)};
    t.position = sites[i].position;
    world.towers.push_back(t);
    world.tower_carrier.push_back(sites[i].carrier);
  }
  compute_local_density(world.towers);

  // Trips: co-moving groups first, then background singles.
  int member_counter = 0;
  const auto make_trip = [&](double target_km) {
    Trip trip;
    trip.segments = random_route(net, rng, target_km * 1000.0);
    trip.start_time = static_cast<double>(cfg.start_epoch) +
                      std::floor(rng.uniform() * cfg.start_window_s);
    for (SegmentId s : trip.segments) {
      const double factor = rng.uniform(0.6, 0.9);
      trip.seg_speeds_m_s.push_back(net.segment(s).speed_limit_kmh / 3.6 * factor);
    }
    return trip;
  };

  struct PlannedMember {
    std::string id;
    int group;
    int carrier;
    std::vector<TruthArc> arcs;
  };
  std::vector<PlannedMember> planned;

  int group_counter = 0;
  for (int g = 0; g < cfg.group_count; ++g) {
    const int size = static_cast<int>(
        rng.uniform_int(cfg.group_size_min, cfg.group_size_max));
    const double target_km = rng.uniform(cfg.trip_km_min, cfg.trip_km_max);
    const Trip trip = make_trip(target_km);
    if (trip.segments.empty()) continue;
    const auto arcs = timed_arcs(net, trip);
    const int gid = group_counter++;
    world.truth.groups.emplace_back();
    for (int member = 0; member < size; ++member) {
      PlannedMember pm;
      char buf[16];
      std::snprintf(buf, sizeof buf, "U%05d", member_counter++);
      pm.id = buf;
      pm.group = gid;
      pm.carrier = static_cast<int>(rng.uniform_u64(cfg.carrier_count));
      pm.arcs = arcs;
      world.truth.groups.back().push_back(pm.id);
      planned.push_back(std::move(pm));
    }
  }
  for (int s = 0; s < cfg.singles_count; ++s) {
    const double target_km = rng.uniform(cfg.trip_km_min, cfg.trip_km_max);
    const Trip trip = make_trip(target_km);
    if (trip.segments.empty()) continue;
    PlannedMember pm;
    char buf[16];
    std::snprintf(buf, sizeof buf, "U%05d", member_counter++);
    pm.id = buf;
    pm.group = group_counter++;
    pm.carrier = static_cast<int>(rng.uniform_u64(cfg.carrier_count));
    pm.arcs = timed_arcs(net, trip);
    world.truth.groups.emplace_back();
    world.truth.groups.back().push_back(pm.id);
    planned.push_back(std::move(pm));
  }

  // Observation pass: nearest carrier tower with 10% hysteresis, then the
  // three noise kinds injected post-hoc at the configured rates.
  std::vector<TowerSite> sites_by_world;
  sites_by_world.reserve(world.towers.size());
  for (std::size_t i = 0; i < world.towers.size(); ++i)
    sites_by_world.push_back(TowerSite{world.towers[i].position, world.tower_carrier[i]});

  for (const PlannedMember &pm : planned) {
    MemberTruth mt;
    mt.member_id = pm.id;
    mt.group_id = pm.group;
    mt.arcs = pm.arcs;
    world.truth.members.push_back(mt);

    const double t0 = pm.arcs.front().t_enter;
    const double t1 = pm.arcs.back().t_exit;
    const double interval =
        rng.uniform(cfg.sample_interval_min_s, cfg.sample_interval_max_s);
    const double phase = rng.uniform() * interval;

    std::vector<std::pair<std::int64_t, int>> obs;
    int current = -1;
    for (double t = t0 + phase; t <= t1; t += interval) {
      const Point pos = true_position(net, pm.arcs, t);
      const int best = nearest_tower(sites_by_world, pm.carrier, pos);
      if (best < 0) continue;
      if (current < 0) {
        current = best;
      } else if (best != current) {
        const double d_new = distance(sites_by_world[best].position, pos);
        const double d_cur = distance(sites_by_world[current].position, pos);
        if (d_new <= 0.9 * d_cur) current = best;  // sticky handover
      }
      obs.emplace_back(static_cast<std::int64_t>(std::floor(t)), current);
    }

    // Noise injection.
    for (std::size_t i = 0; i + 1 < obs.size(); ++i) {
      if (cfg.pingpong_rate > 0.0 && rng.chance(cfg.pingpong_rate)) {
        const Point pos = true_position(net, pm.arcs, static_cast<double>(obs[i].first));
        const int second = nearest_tower(sites_by_world, pm.carrier, pos, 1);
        if (second >= 0) {
          for (std::size_t j = i + 1; j < std::min(obs.size(), i + 5); j += 2)
            obs[j].second = second;
        }
      }
      if (cfg.backward_rate > 0.0 && i >= 1 && rng.chance(cfg.backward_rate)) {
        const Point here = true_position(net, pm.arcs, static_cast<double>(obs[i].first));
        const Point before = true_position(net, pm.arcs, static_cast<double>(obs[i - 1].first));
        if (distance(before, here) > 1.0) {
          const double ang = bearing(before, here);
          const double back = rng.uniform(300.0, 800.0);
          const Point target{here.x - back * std::cos(ang),
                             here.y - back * std::sin(ang)};
          const int t_ix = nearest_tower(sites_by_world, pm.carrier, target);
          if (t_ix >= 0) obs[i].second = t_ix;
        }
      }
      if (cfg.drift_rate > 0.0 && rng.chance(cfg.drift_rate)) {
        const Point here = true_position(net, pm.arcs, static_cast<double>(obs[i].first));
        const double ang = rng.uniform() * kTwoPi;
        const double dist = rng.uniform(5000.0, 15000.0);
        const Point target{here.x + dist * std::cos(ang),
                           here.y + dist * std::sin(ang)};
        const int t_ix = nearest_tower(sites_by_world, pm.carrier, target);
        if (t_ix >= 0 && distance(sites_by_world[t_ix].position, here) > 2000.0)
          obs[i].second = t_ix;
      }
    }

    for (const auto &[t, tower_ix] : obs) {
      CellRecord rec;
      rec.user_id = pm.id;
      rec.timestamp = t;
      rec.tower = world.towers[tower_ix].key;
      world.records.push_back(std::move(rec));
    }
  }

  std::stable_sort(world.records.begin(), world.records.end(),
                   [](const CellRecord &a, const CellRecord &b) {
                     if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
                     return a.user_id < b.user_id;
                   });
  return world;
}

void write_world(const BenchmarkWorld &world, const std::string &dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir + "/network.json", std::ios::binary);
    if (!out) throw Error(ErrorCode::io, "cannot write " + dir + "/network.json");
    out << world.network_json;
  }
  {
    std::ofstream out(dir + "/towers.csv", std::ios::binary);
    if (!out) throw Error(ErrorCode::io, "cannot write " + dir + "/towers.csv");
    const PlanarFrame &frame = world.network.frame();
    for (const CellTower &t : world.towers) {
      const LonLat ll = frame.to_lonlat(t.position);
      out << t.key.lac << ',' << t.key.cid << ',' << fmt_double(ll.lon) << ','
          << fmt_double(ll.lat) << '\n';
    }
  }
  {
    std::ofstream out(dir + "/records.csv", std::ios::binary);
    if (!out) throw Error(ErrorCode::io, "cannot write " + dir + "/records.csv");
    for (const CellRecord &r : world.records)
      out << r.user_id << ',' << format_compact_time(r.timestamp) << ','
          << r.tower.lac << ',' << r.tower.cid << '\n';
  }
  write_truth(world.truth, dir + "/truth.txt");
}

void write_truth(const GroundTruth &truth, const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path);
  for (const MemberTruth &m : truth.members) {
    out << m.member_id << ',' << m.group_id << ',' << m.arcs.size();
    for (const TruthArc &a : m.arcs)
      out << ',' << a.segment << ':' << fmt_double(a.lo) << ':' << fmt_double(a.hi)
          << ':' << fmt_double(a.t_enter) << ':' << fmt_double(a.t_exit);
    out << '\n';
  }
}

GroundTruth read_truth(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open truth file: " + path);
  GroundTruth truth;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    MemberTruth m;
    std::string field;
    try {
      std::getline(ss, m.member_id, ',');
      std::getline(ss, field, ',');
      m.group_id = std::stoi(field);
      std::getline(ss, field, ',');
      const int n = std::stoi(field);
      for (int i = 0; i < n; ++i) {
        std::getline(ss, field, ',');
        std::stringstream as(field);
        std::string part;
        TruthArc a;
        std::getline(as, part, ':');
        a.segment = static_cast<SegmentId>(std::stoul(part));
        std::getline(as, part, ':');
        a.lo = std::stod(part);
        std::getline(as, part, ':');
        a.hi = std::stod(part);
        std::getline(as, part, ':');
        a.t_enter = std::stod(part);
        std::getline(as, part, ':');
        a.t_exit = std::stod(part);
        m.arcs.push_back(a);
      }
    } catch (const std::exception &) {
      throw Error(ErrorCode::parse,
                  "truth file line " + std::to_string(lineno) + ": bad field");
    }
    while (truth.groups.size() <= static_cast<std::size_t>(m.group_id))
      truth.groups.emplace_back();
    truth.groups[m.group_id].push_back(m.member_id);
    truth.members.push_back(std::move(m));
  }
  return truth;
}

double f_measure(double precision, double recall) {
  if (precision + recall <= 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

Metrics evaluate_search(
    const std::map<std::string, std::vector<std::string>> &retrieved_per_query,
    const GroundTruth &truth, int *excluded_queries) {
  double p_sum = 0.0, r_sum = 0.0;
  int used = 0, excluded = 0;
  for (const auto &[query_id, retrieved_raw] : retrieved_per_query) {
    const MemberTruth *q = truth.find(query_id);
    if (!q) throw Error(ErrorCode::invalid_argument,
                        "query " + query_id + " not in ground truth");
    std::set<std::string> relevant(truth.groups[q->group_id].begin(),
                                   truth.groups[q->group_id].end());
    relevant.erase(query_id);
    if (relevant.empty()) {
      ++excluded;
      continue;
    }
    std::set<std::string> retrieved(retrieved_raw.begin(), retrieved_raw.end());
    retrieved.erase(query_id);
    std::size_t hit = 0;
    for (const std::string &id : retrieved)
      if (relevant.contains(id)) ++hit;
    const double p = retrieved.empty()
                         ? 1.0
                         : static_cast<double>(hit) / retrieved.size();
    const double r = static_cast<double>(hit) / relevant.size();
    p_sum += p;
    r_sum += r;
    ++used;
  }
  Metrics m;
  if (used > 0) {
    m.precision = p_sum / used;
    m.recall = r_sum / used;
    m.f_measure = f_measure(m.precision, m.recall);
  }
  if (excluded_queries) *excluded_queries = excluded;
  return m;
}

Metrics evaluate_matching(
    const std::map<std::string, const CandidateTrajectory *> &matched,
    const GroundTruth &truth, const RoadNetwork &net) {
  double correct = 0.0, matched_total = 0.0, truth_total = 0.0;
  for (const auto &[id, traj] : matched) {
    const MemberTruth *mt = truth.find(id);
    if (!mt) throw Error(ErrorCode::invalid_argument,
                         "sequence " + id + " not in ground truth");
    std::vector<SegmentInterval> truth_ivs;
    for (const TruthArc &a : mt->arcs)
      truth_ivs.push_back(SegmentInterval{a.segment, a.lo, a.hi});

    std::vector<SegmentInterval> match_ivs;
    for (const PathOnNetwork &p : traj->subpaths) {
      for (std::size_t s = 0; s < p.segments.size(); ++s) {
        const RoadSegment &seg = net.segment(p.segments[s]);
        const double lo = (s == 0) ? p.entry_offset_m : 0.0;
        const double hi =
            (s + 1 == p.segments.size()) ? p.exit_offset_m : seg.length_m;
        if (hi > lo) match_ivs.push_back(SegmentInterval{p.segments[s], lo, hi});
      }
    }
    correct += interval_overlap_length(match_ivs, truth_ivs);
    matched_total += interval_union_length(match_ivs);
    truth_total += interval_union_length(truth_ivs);
  }
  Metrics m;
  m.matching_precision = matched_total > 0.0 ? correct / matched_total : 0.0;
  m.matching_recall = truth_total > 0.0 ? correct / truth_total : 0.0;
  return m;
}

}  // namespace cellsim
