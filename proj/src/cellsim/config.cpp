#include "cellsim/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "cellsim/error.hpp"

namespace cellsim {

const char *version_string() { return "0.1.0"; }

namespace {

double to_double(const std::string &key, const std::string &v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception &) {
    throw Error(ErrorCode::config, "config key " + key + ": bad number '" + v + "'");
  }
}

std::int64_t to_int(const std::string &key, const std::string &v) {
  std::int64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw Error(ErrorCode::config, "config key " + key + ": bad integer '" + v + "'");
  return out;
}

bool to_bool(const std::string &key, const std::string &v) {
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  throw Error(ErrorCode::config, "config key " + key + ": bad boolean '" + v + "'");
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

std::string table_to_string(const std::vector<std::pair<double, int>> &table) {
  std::string out;
  for (const auto &[km, m] : table) {
    if (!out.empty()) out += ",";
    out += fmt(km) + ":" + std::to_string(m);
  }
  return out;
}

std::vector<std::pair<double, int>> table_from_string(const std::string &key,
                                                      const std::string &v) {
  std::vector<std::pair<double, int>> table;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos)
      throw Error(ErrorCode::config, "config key " + key + ": expected km:M pairs");
    table.emplace_back(to_double(key, item.substr(0, colon)),
                       static_cast<int>(to_int(key, item.substr(colon + 1))));
  }
  if (table.empty())
    throw Error(ErrorCode::config, "config key " + key + ": empty table");
  for (std::size_t i = 1; i < table.size(); ++i)
    if (table[i].first <= table[i - 1].first || table[i].second < table[i - 1].second)
      throw Error(ErrorCode::config,
                  "config key " + key + ": table must be increasing");
  return table;
}

}  // namespace

void RunConfig::set(const std::string &key, const std::string &value) {
  if (key == "workers") {
    workers = static_cast<int>(to_int(key, value));
    if (workers < 1) throw Error(ErrorCode::config, "workers must be >= 1");
  } else if (key == "filter.w_p") {
    filter.w_p = static_cast<int>(to_int(key, value));
    if (filter.w_p < 1) throw Error(ErrorCode::config, "filter.w_p must be >= 1");
  } else if (key == "filter.w_b") {
    filter.w_b = static_cast<int>(to_int(key, value));
    if (filter.w_b < 0) throw Error(ErrorCode::config, "filter.w_b must be >= 0");
  } else if (key == "filter.speed_cap_kmh") {
    filter.speed_cap_kmh = to_double(key, value);
    if (filter.speed_cap_kmh <= 0.0)
      throw Error(ErrorCode::config, "filter.speed_cap_kmh must be positive");
  } else if (key == "filter.screen_min_rate") {
    filter.screen_min_rate = to_bool(key, value);
  } else if (key == "filter.order") {
    for (char c : value)
      if (c != 'p' && c != 'b' && c != 'd')
        throw Error(ErrorCode::config, "filter.order may contain only p, b, d");
    filter.order = value;
  } else if (key == "match.beta_km") {
    match.beta_km = to_double(key, value);
    if (match.beta_km <= 0.0)
      throw Error(ErrorCode::config, "match.beta_km must be positive");
  } else if (key == "match.c_speed") {
    match.c_speed = to_double(key, value);
    if (match.c_speed < 0.0 || match.c_speed >= 1.0)
      throw Error(ErrorCode::config, "match.c_speed must be in [0, 1)");
  } else if (key == "match.sigma_scale") {
    match.sigma_scale = to_double(key, value);
    if (match.sigma_scale <= 0.0)
      throw Error(ErrorCode::config, "match.sigma_scale must be positive");
  } else if (key == "match.w_d_floor") {
    match.w_d_floor = to_double(key, value);
    if (match.w_d_floor <= 0.0 || match.w_d_floor > 1.0)
      throw Error(ErrorCode::config, "match.w_d_floor must be in (0, 1]");
  } else if (key == "match.k_paths") {
    match.k_paths = static_cast<int>(to_int(key, value));
    if (match.k_paths < 1)
      throw Error(ErrorCode::config, "match.k_paths must be >= 1");
  } else if (key == "match.path_slack") {
    match.path_slack = to_double(key, value);
    if (match.path_slack < 0.0)
      throw Error(ErrorCode::config, "match.path_slack must be >= 0");
  } else if (key == "match.single_path_tol") {
    match.single_path_tol = to_double(key, value);
    if (match.single_path_tol < 0.0)
      throw Error(ErrorCode::config, "match.single_path_tol must be >= 0");
  } else if (key == "match.m_max") {
    match.m_max = static_cast<int>(to_int(key, value));
    if (match.m_max < 1) throw Error(ErrorCode::config, "match.m_max must be >= 1");
  } else if (key == "search.tau") {
    search.tau = to_double(key, value);
    if (search.tau <= 0.0 || search.tau > 1.0)
      throw Error(ErrorCode::config, "search.tau must be in (0, 1]");
  } else if (key == "search.epsilon0") {
    search.epsilon0 = to_double(key, value);
    if (search.epsilon0 <= 0.0)
      throw Error(ErrorCode::config, "search.epsilon0 must be positive");
  } else if (key == "search.space_scale_m") {
    search.space_scale_m = to_double(key, value);
  } else if (key == "search.time_scale_s") {
    search.time_scale_s = to_double(key, value);
  } else if (key == "search.local_pruning") {
    search.local_pruning = to_bool(key, value);
  } else if (key == "search.global_pruning") {
    search.global_pruning = to_bool(key, value);
  } else if (key == "search.m_cap") {
    search.m_cap = static_cast<int>(to_int(key, value));
    if (search.m_cap < 1) throw Error(ErrorCode::config, "search.m_cap must be >= 1");
  } else if (key == "search.m_table") {
    search.m_table = table_from_string(key, value);
  } else if (key == "sim.seed") {
    bench.seed = static_cast<std::uint64_t>(to_int(key, value));
  } else if (key == "sim.grid_rows") {
    bench.grid_rows = static_cast<int>(to_int(key, value));
  } else if (key == "sim.grid_cols") {
    bench.grid_cols = static_cast<int>(to_int(key, value));
  } else if (key == "sim.block_m") {
    bench.block_m = to_double(key, value);
  } else if (key == "sim.urban_density") {
    bench.urban_density = to_double(key, value);
  } else if (key == "sim.rural_density") {
    bench.rural_density = to_double(key, value);
  } else if (key == "sim.urban_radius_frac") {
    bench.urban_radius_frac = to_double(key, value);
  } else if (key == "sim.group_count") {
    bench.group_count = static_cast<int>(to_int(key, value));
  } else if (key == "sim.group_size_min") {
    bench.group_size_min = static_cast<int>(to_int(key, value));
  } else if (key == "sim.group_size_max") {
    bench.group_size_max = static_cast<int>(to_int(key, value));
  } else if (key == "sim.singles_count") {
    bench.singles_count = static_cast<int>(to_int(key, value));
  } else if (key == "sim.trip_km_min") {
    bench.trip_km_min = to_double(key, value);
  } else if (key == "sim.trip_km_max") {
    bench.trip_km_max = to_double(key, value);
  } else if (key == "sim.sample_interval_min_s") {
    bench.sample_interval_min_s = to_double(key, value);
  } else if (key == "sim.sample_interval_max_s") {
    bench.sample_interval_max_s = to_double(key, value);
  } else if (key == "sim.pingpong_rate") {
    bench.pingpong_rate = to_double(key, value);
  } else if (key == "sim.backward_rate") {
    bench.backward_rate = to_double(key, value);
  } else if (key == "sim.drift_rate") {
    bench.drift_rate = to_double(key, value);
  } else if (key == "sim.carrier_count") {
    bench.carrier_count = static_cast<int>(to_int(key, value));
  } else if (key == "sim.start_epoch") {
    bench.start_epoch = to_int(key, value);
  } else if (key == "sim.start_window_s") {
    bench.start_window_s = to_double(key, value);
  } else {
    throw Error(ErrorCode::config, "unknown config key: " + key);
  }
}

std::map<std::string, std::string> RunConfig::dump() const {
  std::map<std::string, std::string> out;
  out["workers"] = std::to_string(workers);
  out["filter.w_p"] = std::to_string(filter.w_p);
  out["filter.w_b"] = std::to_string(filter.w_b);
  out["filter.speed_cap_kmh"] = fmt(filter.speed_cap_kmh);
  out["filter.screen_min_rate"] = filter.screen_min_rate ? "true" : "false";
  out["filter.order"] = filter.order;
  out["match.beta_km"] = fmt(match.beta_km);
  out["match.c_speed"] = fmt(match.c_speed);
  out["match.sigma_scale"] = fmt(match.sigma_scale);
  out["match.w_d_floor"] = fmt(match.w_d_floor);
  out["match.k_paths"] = std::to_string(match.k_paths);
  out["match.path_slack"] = fmt(match.path_slack);
  out["match.single_path_tol"] = fmt(match.single_path_tol);
  out["match.m_max"] = std::to_string(match.m_max);
  out["search.tau"] = fmt(search.tau);
  out["search.epsilon0"] = fmt(search.epsilon0);
  out["search.space_scale_m"] = fmt(search.space_scale_m);
  out["search.time_scale_s"] = fmt(search.time_scale_s);
  out["search.local_pruning"] = search.local_pruning ? "true" : "false";
  out["search.global_pruning"] = search.global_pruning ? "true" : "false";
  out["search.m_cap"] = std::to_string(search.m_cap);
  out["search.m_table"] = table_to_string(search.m_table);
  out["sim.seed"] = std::to_string(bench.seed);
  out["sim.grid_rows"] = std::to_string(bench.grid_rows);
  out["sim.grid_cols"] = std::to_string(bench.grid_cols);
  out["sim.block_m"] = fmt(bench.block_m);
  out["sim.urban_density"] = fmt(bench.urban_density);
  out["sim.rural_density"] = fmt(bench.rural_density);
  out["sim.urban_radius_frac"] = fmt(bench.urban_radius_frac);
  out["sim.group_count"] = std::to_string(bench.group_count);
  out["sim.group_size_min"] = std::to_string(bench.group_size_min);
  out["sim.group_size_max"] = std::to_string(bench.group_size_max);
  out["sim.singles_count"] = std::to_string(bench.singles_count);
  out["sim.trip_km_min"] = fmt(bench.trip_km_min);
  out["sim.trip_km_max"] = fmt(bench.trip_km_max);
  out["sim.sample_interval_min_s"] = fmt(bench.sample_interval_min_s);
  out["sim.sample_interval_max_s"] = fmt(bench.sample_interval_max_s);
  out["sim.pingpong_rate"] = fmt(bench.pingpong_rate);
  out["sim.backward_rate"] = fmt(bench.backward_rate);
  out["sim.drift_rate"] = fmt(bench.drift_rate);
  out["sim.carrier_count"] = std::to_string(bench.carrier_count);
  out["sim.start_epoch"] = std::to_string(bench.start_epoch);
  out["sim.start_window_s"] = fmt(bench.start_window_s);
  return out;
}

std::string RunConfig::get(const std::string &key) const {
  const auto all = dump();
  const auto it = all.find(key);
  if (it == all.end())
    throw Error(ErrorCode::config, "unknown config key: " + key);
  return it->second;
}

void RunConfig::load_file(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r'))
      line.pop_back();
    std::size_t begin = 0;
    while (begin < line.size() && (line[begin] == ' ' || line[begin] == '\t')) ++begin;
    if (begin == line.size()) continue;
    const auto eq = line.find('=', begin);
    if (eq == std::string::npos)
      throw Error(ErrorCode::config, "config file line " + std::to_string(lineno) +
                                         ": expected key=value");
    set(line.substr(begin, eq - begin), line.substr(eq + 1));
  }
}

std::uint64_t RunConfig::config_hash() const {
  std::uint64_t h = 1469598103934665603ull;
  const auto mix = [&h](const std::string &s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
  };
  for (const auto &[k, v] : dump()) {
    mix(k);
    mix("=");
    mix(v);
    mix("\n");
  }
  return h;
}

void RunConfig::write_manifest(const std::string &path,
                               const std::map<std::string, std::string> &extra) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write manifest: " + path);
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(config_hash()));
  out << "cellsim_version=" << version_string() << "\n";
  out << "config_hash=" << hash << "\n";
  for (const auto &[k, v] : extra) out << k << "=" << v << "\n";
  for (const auto &[k, v] : dump()) out << k << "=" << v << "\n";
}

}  // namespace cellsim
