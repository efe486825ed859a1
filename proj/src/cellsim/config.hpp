/**
 * cellsim
 *
 * Run configuration: defaults, key=value config files, and flag
 * overrides, merged in that order. Unknown keys are rejected. Every run
 * can echo its full configuration into a manifest for reproduction.
 */

#ifndef CELLSIM_CONFIG_HPP_
#define CELLSIM_CONFIG_HPP_

#include <cstdint>
#include <map>
#include <string>

#include "cellsim/ingest.hpp"
#include "cellsim/mapmatch.hpp"
#include "cellsim/simsearch.hpp"
#include "cellsim/simulate.hpp"

namespace cellsim {

struct RunConfig {
  FilterConfig filter;
  MatchConfig match;
  SearchConfig search;
  BenchmarkConfig bench;
  int workers = 1;

  /** Applies one `key=value` setting. Throws Error{config} on unknown keys
   *  or unparsable values. */
  void set(const std::string &key, const std::string &value);
  std::string get(const std::string &key) const;

  /** Loads a flat key=value file ('#' comments, blank lines allowed). */
  void load_file(const std::string &path);

  /** All keys with their current values, sorted by key. */
  std::map<std::string, std::string> dump() const;

  std::uint64_t config_hash() const;  // FNV-1a over the sorted dump

  /** manifest: config hash, version, and every key=value line. `extra`
   *  entries (command, seed, inputs) are included verbatim. */
  void write_manifest(const std::string &path,
                      const std::map<std::string, std::string> &extra = {}) const;
};

const char *version_string();

}  // namespace cellsim

#endif  // CELLSIM_CONFIG_HPP_
