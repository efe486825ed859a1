/**
 * cellsim
 *
 * Carrier-log ingestion: record parsing, per-user sequence building,
 * tower density, and the three noise filters (Ping-Pong, backward,
 * drifting) applied before map matching.
 */

#ifndef CELLSIM_INGEST_HPP_
#define CELLSIM_INGEST_HPP_

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cellsim/geom.hpp"

namespace cellsim {

struct TowerKey {
  std::int32_t lac = 0;
  std::int32_t cid = 0;

  friend auto operator<=>(const TowerKey &, const TowerKey &) = default;
};

struct CellTower {
  TowerKey key;
  Point position;
  double local_density = 0.0;  // towers per km^2 within a 1-km disc
};

struct CellRecord {
  std::string user_id;
  std::int64_t timestamp = 0;  // seconds since epoch, from YYYYMMDDHHMMSS
  TowerKey tower;
};

struct SequencePoint {
  std::int64_t timestamp = 0;
  TowerKey tower;
};

struct TowerSequence {
  std::string user_id;
  std::vector<SequencePoint> points;
};

struct FilterConfig {
  int w_p = 3;                  // Ping-Pong lookahead, points
  int w_b = 5;                  // backward lookahead, points; 0 disables
  double speed_cap_kmh = 120.0; // drifting cap
  bool screen_min_rate = true;  // drop sequences under 1 sample / 10 min
  std::string order = "pbd";    // p=Ping-Pong, b=backward, d=drifting
};

class TowerMap {
public:
  void add(const CellTower &tower);

  const CellTower *find(const TowerKey &key) const;
  const std::vector<CellTower> &towers() const { return towers_; }
  std::vector<CellTower> &towers() { return towers_; }
  std::size_t size() const { return towers_.size(); }

  /** Loads `lac,cid,lon,lat` rows and computes local densities. */
  static TowerMap load(const std::string &path, const PlanarFrame &frame);

private:
  std::vector<CellTower> towers_;
  std::map<TowerKey, std::size_t> index_;
};

struct ParseStats {
  std::uint64_t lines = 0;
  std::uint64_t records = 0;
  std::uint64_t skipped = 0;
};

/** Parses `id,time,lac,cid` rows (time as YYYYMMDDHHMMSS). Malformed lines
 *  are counted and skipped, never fatal. */
std::vector<CellRecord> parse_records(std::istream &in, ParseStats *stats = nullptr);

/** Epoch seconds for a 14-digit YYYYMMDDHHMMSS string (UTC);
 *  nullopt when malformed. */
std::optional<std::int64_t> parse_compact_time(const std::string &digits);
std::string format_compact_time(std::int64_t epoch_seconds);

struct SequenceStats {
  std::uint64_t duplicates = 0;
  std::uint64_t conflicts = 0;  // same user+time, different tower: first kept
};

/** One time-sorted sequence per user. Exact duplicates collapse; equal-time
 *  records with different towers keep the first seen and count a conflict. */
std::vector<TowerSequence> build_sequences(const std::vector<CellRecord> &records,
                                           SequenceStats *stats = nullptr);

/** density = (towers within 1 km, inclusive of self) / pi km^2. */
void compute_local_density(std::vector<CellTower> &towers);

TowerSequence pingpong_filter(const TowerSequence &seq, int w_p);
TowerSequence backward_filter(const TowerSequence &seq, const TowerMap &towers, int w_b);
TowerSequence drifting_filter(const TowerSequence &seq, const TowerMap &towers,
                              double speed_cap_kmh);

/** True when the sequence clears the minimum-rate screen
 *  (at least 1 sample per 10 minutes on average). */
bool passes_rate_screen(const TowerSequence &seq);

/** Full preprocessing pass in the configured filter order. */
TowerSequence apply_filters(const TowerSequence &seq, const TowerMap &towers,
                            const FilterConfig &cfg);

}  // namespace cellsim

#endif  // CELLSIM_INGEST_HPP_
