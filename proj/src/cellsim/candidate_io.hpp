/**
 * cellsim
 *
 * Shared-subpath serialization of candidate sets and the file-backed
 * candidate store. Gaps whose sub-path is identical across all M
 * candidates are written once (Type=1); divergent gaps store the distinct
 * alternatives with their score contributions plus one index per
 * candidate (Type=0).
 */

#ifndef CELLSIM_CANDIDATE_IO_HPP_
#define CELLSIM_CANDIDATE_IO_HPP_

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "cellsim/mapmatch.hpp"

namespace cellsim {

inline constexpr std::uint8_t kCandidateFormatVersion = 1;

std::vector<std::uint8_t> encode_candidate_set(const CandidateSet &set);

/** Inverse of encode_candidate_set. Throws Error{format} naming the byte
 *  offset of the first corrupt field. */
CandidateSet decode_candidate_set(const std::vector<std::uint8_t> &bytes);

/** Reference size of `m` independently stored trajectories (no sharing),
 *  for compression accounting. */
std::size_t uncompressed_size(const CandidateSet &set);

void write_debug_text(std::ostream &os, const CandidateSet &set);

/** Space-time endpoints of the rank-1 candidate, the inputs of global
 *  pruning; kept in a sidecar index so pruning never decodes full sets. */
struct EntrySummary {
  std::string id;
  Point start;
  Point end;
  std::int64_t start_time = 0;
  std::int64_t end_time = 0;
  double length_m = 0.0;
};

EntrySummary summarize(const CandidateSet &set, const RoadNetwork &net);

/**
 * Candidate store file: magic, version byte, entry count, then one
 * length-prefixed encoded candidate set per sequence.
 */
class CandidateStore {
public:
  static void write(const std::string &path, const std::vector<CandidateSet> &sets);
  static CandidateStore open(const std::string &path);

  const std::vector<CandidateSet> &entries() const { return entries_; }
  std::vector<CandidateSet> &entries() { return entries_; }

  std::vector<EntrySummary> build_summaries(const RoadNetwork &net) const;
  static void write_summaries(const std::string &path,
                              const std::vector<EntrySummary> &summaries);
  static std::vector<EntrySummary> read_summaries(const std::string &path);

private:
  std::vector<CandidateSet> entries_;
};

}  // namespace cellsim

#endif  // CELLSIM_CANDIDATE_IO_HPP_
