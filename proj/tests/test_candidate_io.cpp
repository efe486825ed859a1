#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "cellsim/candidate_io.hpp"
#include "cellsim/error.hpp"
#include "cellsim/rng.hpp"

#include "helpers.hpp"

using namespace cellsim;
using namespace cellsim::testing;

namespace {

PathOnNetwork make_path(const RoadNetwork &net, const std::vector<SegmentId> &segs,
                        double entry, double exit) {
  PathOnNetwork p;
  p.segments = segs;
  p.entry_offset_m = entry;
  p.exit_offset_m = exit;
  if (segs.size() == 1) {
    p.length_m = exit - entry;
  } else {
    p.length_m = net.segment(segs.front()).length_m - entry;
    for (std::size_t i = 1; i + 1 < segs.size(); ++i)
      p.length_m += net.segment(segs[i]).length_m;
    p.length_m += exit;
  }
  return p;
}

// Synthetic candidate sets with controlled shared/divergent gaps. Gap g
// diverges when g is listed in `divergent`; all candidates then rotate
// through a small pool of alternatives.
CandidateSet synthetic_set(const RoadNetwork &net, Rng &rng, int m, int n_gaps,
                           const std::vector<int> &divergent) {
  CandidateSet set;
  set.sequence_id = "seq-" + std::to_string(rng.uniform_u64(100000));

  std::vector<std::vector<PathOnNetwork>> pool(n_gaps);
  std::vector<std::vector<double>> pool_scores(n_gaps);
  for (int g = 0; g < n_gaps; ++g) {
    const bool div = std::find(divergent.begin(), divergent.end(), g) != divergent.end();
    const int alts = div ? 2 + static_cast<int>(rng.uniform_u64(3)) : 1;
    for (int a = 0; a < alts; ++a) {
      const SegmentId s1 = static_cast<SegmentId>(rng.uniform_u64(net.segments().size()));
      const SegmentId s2 = static_cast<SegmentId>(rng.uniform_u64(net.segments().size()));
      pool[g].push_back(make_path(net, {s1, s2}, rng.uniform(0.0, 50.0),
                                  rng.uniform(0.0, 50.0)));
      pool_scores[g].push_back(-rng.uniform(0.0, 30.0));
    }
  }

  std::int64_t t = 1504224000;
  std::vector<std::int64_t> timestamps;
  for (int i = 0; i <= n_gaps; ++i) {
    timestamps.push_back(t);
    t += 30 + static_cast<std::int64_t>(rng.uniform_u64(60));
  }

  for (int c = 0; c < m; ++c) {
    CandidateTrajectory traj;
    traj.timestamps = timestamps;
    double score = -5.0;
    for (int g = 0; g < n_gaps; ++g) {
      const std::size_t pick = c % pool[g].size();
      traj.subpaths.push_back(pool[g][pick]);
      traj.gap_scores.push_back(pool_scores[g][pick]);
      score += pool_scores[g][pick];
    }
    traj.raw_log_prob = score;
    set.candidates.push_back(std::move(traj));
  }
  std::sort(set.candidates.begin(), set.candidates.end(),
            [](const CandidateTrajectory &a, const CandidateTrajectory &b) {
              return a.raw_log_prob > b.raw_log_prob;
            });
  const double top = set.candidates.front().raw_log_prob;
  for (auto &cand : set.candidates) cand.confidence = std::exp(cand.raw_log_prob - top);
  return set;
}

}  // namespace

TEST_CASE("single-candidate sets encode as shared blocks only") {
  const RoadNetwork net = grid_builder(3, 3, 300.0).build();
  Rng rng(1);
  const CandidateSet set = synthetic_set(net, rng, 1, 4, {});
  const auto bytes = encode_candidate_set(set);
  CHECK(bytes.front() == kCandidateFormatVersion);
  const CandidateSet back = decode_candidate_set(bytes);
  CHECK(back == set);
}

TEST_CASE("shared gaps are stored once") {
  const RoadNetwork net = grid_builder(3, 3, 300.0).build();
  Rng rng(2);
  // 10 gaps, exactly one divergent, M = 4.
  const CandidateSet set = synthetic_set(net, rng, 4, 10, {6});
  const auto bytes = encode_candidate_set(set);
  const CandidateSet back = decode_candidate_set(bytes);
  CHECK(back == set);
  CHECK(bytes.size() < uncompressed_size(set));

  SUBCASE("debug export mentions every candidate") {
    std::ostringstream os;
    write_debug_text(os, set);
    CHECK(os.str().find("candidate 3") != std::string::npos);
  }
}

TEST_CASE("round trip on random candidate sets") {
  const RoadNetwork net = grid_builder(4, 4, 300.0).build();
  Rng rng(33);
  for (int trial = 0; trial < 1000; ++trial) {
    const int m = 1 + static_cast<int>(rng.uniform_u64(7));
    const int n_gaps = 1 + static_cast<int>(rng.uniform_u64(9));
    std::vector<int> divergent;
    for (int g = 0; g < n_gaps; ++g)
      if (rng.chance(0.3)) divergent.push_back(g);
    const CandidateSet set = synthetic_set(net, rng, m, n_gaps, divergent);

    const auto bytes = encode_candidate_set(set);
    const CandidateSet back = decode_candidate_set(bytes);
    REQUIRE(back == set);
    // Re-encoding the decoded set is byte-identical.
    CHECK(encode_candidate_set(back) == bytes);
    // Compression beats M independent copies whenever a gap is shared.
    if (m > 1 && static_cast<int>(divergent.size()) < n_gaps)
      CHECK(bytes.size() < uncompressed_size(set));
  }
}

TEST_CASE("corrupt bytes fail with an offset") {
  const RoadNetwork net = grid_builder(3, 3, 300.0).build();
  Rng rng(4);
  const CandidateSet set = synthetic_set(net, rng, 3, 5, {1, 3});
  auto bytes = encode_candidate_set(set);

  SUBCASE("truncation") {
    bytes.resize(bytes.size() / 2);
    try {
      decode_candidate_set(bytes);
      FAIL("expected format error");
    } catch (const Error &e) {
      CHECK(e.code() == ErrorCode::format);
      CHECK(std::string(e.what()).find("offset") != std::string::npos);
    }
  }
  SUBCASE("bad version byte") {
    bytes[0] = 99;
    CHECK_THROWS_AS(decode_candidate_set(bytes), Error);
  }
  SUBCASE("garbled candidate count") {
    // Candidate count lives after version byte and the id string.
    const std::size_t pos = 1 + 4 + set.sequence_id.size() + 4;
    bytes[pos] = 0xFF;
    bytes[pos + 1] = 0xFF;
    CHECK_THROWS_AS(decode_candidate_set(bytes), Error);
  }
}

TEST_CASE("store writes and reopens entries in order") {
  const RoadNetwork net = grid_builder(3, 3, 300.0).build();
  Rng rng(5);
  std::vector<CandidateSet> sets;
  for (int i = 0; i < 20; ++i)
    sets.push_back(synthetic_set(net, rng, 1 + i % 4, 3 + i % 5, {1}));

  const std::string path =
      (std::filesystem::temp_directory_path() / "cellsim_store_test.bin").string();
  CandidateStore::write(path, sets);
  const CandidateStore store = CandidateStore::open(path);
  REQUIRE(store.entries().size() == sets.size());
  for (std::size_t i = 0; i < sets.size(); ++i)
    CHECK(store.entries()[i] == sets[i]);

  SUBCASE("summaries land in the sidecar index") {
    const auto summaries = store.build_summaries(net);
    const std::string index_path =
        (std::filesystem::temp_directory_path() / "cellsim_index_test.csv").string();
    CandidateStore::write_summaries(index_path, summaries);
    const auto back = CandidateStore::read_summaries(index_path);
    REQUIRE(back.size() == summaries.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
      CHECK(back[i].id == summaries[i].id);
      CHECK(back[i].start_time == summaries[i].start_time);
      CHECK(back[i].length_m == doctest::Approx(summaries[i].length_m));
    }
    std::filesystem::remove(index_path);
  }
  std::filesystem::remove(path);
}
