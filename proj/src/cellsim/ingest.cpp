#include "cellsim/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "cellsim/error.hpp"

namespace cellsim {

namespace {

bool all_digits(const std::string &s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isdigit(c) != 0;
  });
}

std::optional<std::int64_t> parse_i64(const std::string &s) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<double> parse_f64(const std::string &s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::vector<std::string> split_csv(const std::string &line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  return fields;
}

// Days since 1970-01-01 for a civil date (Howard Hinnant's algorithm).
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2) / 5 +
                       static_cast<unsigned>(d) - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int &y, int &m, int &d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y = static_cast<int>(yy + (m <= 2));
}

int days_in_month(int y, int m) {
  static const int lengths[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (m == 2) {
    const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    return leap ? 29 : 28;
  }
  return lengths[m - 1];
}

}  // namespace

std::optional<std::int64_t> parse_compact_time(const std::string &digits) {
  if (digits.size() != 14 || !all_digits(digits)) return std::nullopt;
  const int y = std::stoi(digits.substr(0, 4));
  const int mo = std::stoi(digits.substr(4, 2));
  const int d = std::stoi(digits.substr(6, 2));
  const int h = std::stoi(digits.substr(8, 2));
  const int mi = std::stoi(digits.substr(10, 2));
  const int s = std::stoi(digits.substr(12, 2));
  if (mo < 1 || mo > 12 || d < 1 || d > days_in_month(y, mo) || h > 23 ||
      mi > 59 || s > 59)
    return std::nullopt;
  return days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + s;
}

std::string format_compact_time(std::int64_t epoch_seconds) {
  std::int64_t days = epoch_seconds / 86400;
  std::int64_t rem = epoch_seconds % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  int y, m, d;
  civil_from_days(days, y, m, d);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d%02d%02d%02d%02d%02d", y, m, d,
                static_cast<int>(rem / 3600), static_cast<int>(rem / 60 % 60),
                static_cast<int>(rem % 60));
  return buf;
}

std::vector<CellRecord> parse_records(std::istream &in, ParseStats *stats) {
  std::vector<CellRecord> out;
  std::string line;
  ParseStats local;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++local.lines;
    const auto fields = split_csv(line);
    if (fields.size() != 4) {
      ++local.skipped;
      continue;
    }
    const auto t = parse_compact_time(fields[1]);
    const auto lac = parse_i64(fields[2]);
    const auto cid = parse_i64(fields[3]);
    if (fields[0].empty() || !t || !lac || !cid) {
      ++local.skipped;
      continue;
    }
    CellRecord rec;
    rec.user_id = fields[0];
    rec.timestamp = *t;
    rec.tower = TowerKey{static_cast<std::int32_t>(*lac),
                         static_cast<std::int32_t>(*cid)};
    out.push_back(std::move(rec));
    ++local.records;
  }
  if (stats) *stats = local;
  return out;
}

std::vector<TowerSequence> build_sequences(const std::vector<CellRecord> &records,
                                           SequenceStats *stats) {
  SequenceStats local;
  std::unordered_map<std::string, std::vector<const CellRecord *>> by_user;
  std::vector<std::string> order;  // first-appearance order keeps output stable
  for (const CellRecord &r : records) {
    auto [it, inserted] = by_user.try_emplace(r.user_id);
    if (inserted) order.push_back(r.user_id);
    it->second.push_back(&r);
  }

  std::vector<TowerSequence> out;
  out.reserve(order.size());
  for (const std::string &user : order) {
    auto &recs = by_user[user];
    std::stable_sort(recs.begin(), recs.end(),
                     [](const CellRecord *a, const CellRecord *b) {
                       return a->timestamp < b->timestamp;
                     });
    TowerSequence seq;
    seq.user_id = user;
    for (const CellRecord *r : recs) {
      if (!seq.points.empty() && seq.points.back().timestamp == r->timestamp) {
        if (seq.points.back().tower == r->tower)
          ++local.duplicates;
        else
          ++local.conflicts;
        continue;  // first record at a timestamp wins
      }
      seq.points.push_back(SequencePoint{r->timestamp, r->tower});
    }
    out.push_back(std::move(seq));
  }
  if (stats) *stats = local;
  return out;
}

void compute_local_density(std::vector<CellTower> &towers) {
  // 1-km disc, inclusive of the tower itself; cell-bucketed so city-sized
  // maps stay O(n) instead of all-pairs.
  constexpr double radius = 1000.0;
  std::unordered_map<std::int64_t, std::vector<std::size_t>> cells;
  const auto cell_key = [](double x, double y) {
    const std::int64_t cx = static_cast<std::int64_t>(std::floor(x / radius));
    const std::int64_t cy = static_cast<std::int64_t>(std::floor(y / radius));
    return cx * 2147483647ll + cy;
  };
  for (std::size_t i = 0; i < towers.size(); ++i)
    cells[cell_key(towers[i].position.x, towers[i].position.y)].push_back(i);

  for (CellTower &t : towers) {
    int count = 0;
    const std::int64_t cx = static_cast<std::int64_t>(std::floor(t.position.x / radius));
    const std::int64_t cy = static_cast<std::int64_t>(std::floor(t.position.y / radius));
    for (std::int64_t dx = -1; dx <= 1; ++dx)
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        const auto it = cells.find((cx + dx) * 2147483647ll + (cy + dy));
        if (it == cells.end()) continue;
        for (std::size_t j : it->second)
          if (distance(t.position, towers[j].position) <= radius) ++count;
      }
    t.local_density = static_cast<double>(count) / kPi;
  }
}

void TowerMap::add(const CellTower &tower) {
  if (index_.contains(tower.key))
    throw Error(ErrorCode::validation,
                "duplicate tower " + std::to_string(tower.key.lac) + "," +
                    std::to_string(tower.key.cid));
  index_[tower.key] = towers_.size();
  towers_.push_back(tower);
}

const CellTower *TowerMap::find(const TowerKey &key) const {
  const auto it = index_.find(key);
  return it == index_.end() ? nullptr : &towers_[it->second];
}

TowerMap TowerMap::load(const std::string &path, const PlanarFrame &frame) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open tower file: " + path);
  TowerMap map;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != 4)
      throw Error(ErrorCode::parse,
                  "tower file line " + std::to_string(lineno) + ": expected lac,cid,lon,lat");
    const auto lac = parse_i64(fields[0]);
    const auto cid = parse_i64(fields[1]);
    const auto lon = parse_f64(fields[2]);
    const auto lat = parse_f64(fields[3]);
    if (!lac || !cid || !lon || !lat)
      throw Error(ErrorCode::parse,
                  "tower file line " + std::to_string(lineno) + ": bad field");
    CellTower t;
    t.key = TowerKey{static_cast<std::int32_t>(*lac), static_cast<std::int32_t>(*cid)};
    t.position = frame.to_planar(LonLat{*lon, *lat});
    map.add(t);
  }
  compute_local_density(map.towers_);
  return map;
}

TowerSequence pingpong_filter(const TowerSequence &seq, int w_p) {
  TowerSequence current = seq;
  if (w_p < 1) return current;
  while (true) {
    const std::size_t before = current.points.size();
    auto &pts = current.points;
    // Deletions apply immediately, so a discarded bounce never anchors a
    // window of its own.
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const TowerKey here = pts[i].tower;
      const auto window_end = [&] {
        return std::min(pts.size(), i + 1 + static_cast<std::size_t>(w_p));
      };
      bool any_same = false, any_other = false;
      for (std::size_t j = i + 1; j < window_end(); ++j) {
        if (pts[j].tower == here)
          any_same = true;
        else
          any_other = true;
      }
      if (any_same && any_other) {
        std::size_t j = i + 1;
        while (j < window_end()) {
          if (!(pts[j].tower == here))
            pts.erase(pts.begin() + static_cast<std::ptrdiff_t>(j));
          else
            ++j;
        }
      }
    }
    if (pts.size() == before) break;
  }
  return current;
}

namespace {

Point tower_position(const TowerMap &towers, const TowerKey &key) {
  const CellTower *t = towers.find(key);
  if (!t)
    throw Error(ErrorCode::validation,
                "tower " + std::to_string(key.lac) + "," + std::to_string(key.cid) +
                    " not in tower map");
  return t->position;
}

}  // namespace

TowerSequence backward_filter(const TowerSequence &seq, const TowerMap &towers,
                              int w_b) {
  if (w_b <= 0 || seq.points.size() < 3) return seq;

  TowerSequence out;
  out.user_id = seq.user_id;
  const auto &pts = seq.points;

  std::optional<double> heading;
  std::optional<Point> last_pos;

  std::size_t i = 0;
  while (i < pts.size()) {
    const Point pos = tower_position(towers, pts[i].tower);
    if (!last_pos) {
      out.points.push_back(pts[i]);
      last_pos = pos;
      ++i;
      continue;
    }
    if (distance(*last_pos, pos) == 0.0) {
      // No displacement, no direction information.
      out.points.push_back(pts[i]);
      ++i;
      continue;
    }
    const double b = bearing(*last_pos, pos);
    if (!heading || angle_difference(b, *heading) <= kPi / 2.0) {
      out.points.push_back(pts[i]);
      heading = b;
      last_pos = pos;
      ++i;
      continue;
    }

    // Direction reversal: hold this point and check whether the next w_b
    // points sustain the new heading.
    const std::size_t lookahead_end =
        std::min(pts.size(), i + 1 + static_cast<std::size_t>(w_b));
    bool sustained = true;
    Point chain_pos = pos;
    for (std::size_t j = i + 1; j < lookahead_end; ++j) {
      const Point qp = tower_position(towers, pts[j].tower);
      if (distance(chain_pos, qp) > 0.0) {
        if (angle_difference(bearing(chain_pos, qp), b) > kPi / 2.0) {
          sustained = false;
          break;
        }
        chain_pos = qp;
      }
    }

    if (sustained) {
      // Confirmed change: keep the cached point and the lookahead, reset
      // the heading to the new direction.
      out.points.push_back(pts[i]);
      last_pos = pos;
      heading = b;
    }
    // Either way the w_b lookahead points are kept verbatim.
    for (std::size_t j = i + 1; j < lookahead_end; ++j) {
      out.points.push_back(pts[j]);
      const Point qp = tower_position(towers, pts[j].tower);
      if (distance(*last_pos, qp) > 0.0) {
        heading = bearing(*last_pos, qp);
        last_pos = qp;
      }
    }
    i = lookahead_end;
  }
  return out;
}

TowerSequence drifting_filter(const TowerSequence &seq, const TowerMap &towers,
                              double speed_cap_kmh) {
  TowerSequence out;
  out.user_id = seq.user_id;
  const double cap_m_s = speed_cap_kmh / 3.6;
  for (const SequencePoint &p : seq.points) {
    if (out.points.empty()) {
      out.points.push_back(p);
      continue;
    }
    const SequencePoint &prev = out.points.back();
    const double dist = distance(tower_position(towers, prev.tower),
                                 tower_position(towers, p.tower));
    const double dt = static_cast<double>(p.timestamp - prev.timestamp);
    const double speed =
        dt > 0.0 ? dist / dt
                 : (dist == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    if (speed <= cap_m_s) out.points.push_back(p);
  }
  return out;
}

bool passes_rate_screen(const TowerSequence &seq) {
  if (seq.points.size() < 2) return false;
  const double span = static_cast<double>(seq.points.back().timestamp -
                                          seq.points.front().timestamp);
  if (span <= 0.0) return true;
  return static_cast<double>(seq.points.size() - 1) / span >= 1.0 / 600.0;
}

TowerSequence apply_filters(const TowerSequence &seq, const TowerMap &towers,
                            const FilterConfig &cfg) {
  TowerSequence cur = seq;
  for (char stage : cfg.order) {
    switch (stage) {
      case 'p': cur = pingpong_filter(cur, cfg.w_p); break;
      case 'b': cur = backward_filter(cur, towers, cfg.w_b); break;
      case 'd': cur = drifting_filter(cur, towers, cfg.speed_cap_kmh); break;
      default:
        throw Error(ErrorCode::config,
                    std::string("unknown filter stage '") + stage + "'");
    }
  }
  return cur;
}

}  // namespace cellsim
