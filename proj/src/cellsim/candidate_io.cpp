#include "cellsim/candidate_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cellsim/error.hpp"

namespace cellsim {

namespace {

class Writer {
public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { raw(&v, sizeof v); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void i64(std::int64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void str(const std::string &s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void bytes(const std::vector<std::uint8_t> &b) {
    buf_.insert(buf_.end(), b.begin(), b.end());
  }
  std::size_t size() const { return buf_.size(); }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
  void raw(const void *p, std::size_t n) {
    const auto *b = static_cast<const std::uint8_t *>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  std::vector<std::uint8_t> buf_;
};

class Reader {
public:
  Reader(const std::uint8_t *data, std::size_t size, std::size_t base = 0)
      : data_(data), size_(size), base_(base) {}

  std::uint8_t u8() { return *take(1); }
  std::uint16_t u16() { return scalar<std::uint16_t>(); }
  std::uint32_t u32() { return scalar<std::uint32_t>(); }
  std::uint64_t u64() { return scalar<std::uint64_t>(); }
  std::int64_t i64() { return scalar<std::int64_t>(); }
  double f64() { return scalar<double>(); }
  std::string str() {
    const std::uint32_t n = u32();
    const std::uint8_t *p = take(n);
    return std::string(reinterpret_cast<const char *>(p), n);
  }
  void skip(std::size_t n) { take(n); }
  std::size_t offset() const { return base_ + pos_; }
  bool done() const { return pos_ == size_; }

  [[noreturn]] void fail(const std::string &what) const {
    throw Error(ErrorCode::format,
                "candidate-set format error at offset " + std::to_string(offset()) +
                    ": " + what);
  }

private:
  template <typename T>
  T scalar() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  const std::uint8_t *take(std::size_t n) {
    if (pos_ + n > size_) fail("truncated field");
    const std::uint8_t *p = data_ + pos_;
    pos_ += n;
    return p;
  }

  const std::uint8_t *data_;
  std::size_t size_;
  std::size_t base_;
  std::size_t pos_ = 0;
};

void write_path(Writer &w, const PathOnNetwork &p) {
  w.u32(static_cast<std::uint32_t>(p.segments.size()));
  for (SegmentId s : p.segments) w.u32(s);
  w.f64(p.entry_offset_m);
  w.f64(p.exit_offset_m);
  w.f64(p.length_m);
}

PathOnNetwork read_path(Reader &r) {
  PathOnNetwork p;
  const std::uint32_t n = r.u32();
  if (n > 1u << 24) r.fail("implausible path segment count");
  p.segments.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) p.segments.push_back(r.u32());
  p.entry_offset_m = r.f64();
  p.exit_offset_m = r.f64();
  p.length_m = r.f64();
  return p;
}

}  // namespace

std::vector<std::uint8_t> encode_candidate_set(const CandidateSet &set) {
  if (set.candidates.empty())
    throw Error(ErrorCode::invalid_argument, "cannot encode an empty candidate set");
  const std::size_t m = set.candidates.size();
  const std::size_t n_obs = set.candidates.front().timestamps.size();
  const std::size_t n_gaps = set.candidates.front().subpaths.size();

  Writer w;
  w.u8(kCandidateFormatVersion);
  w.str(set.sequence_id);
  w.u32(static_cast<std::uint32_t>(n_obs));
  w.u32(static_cast<std::uint32_t>(m));
  for (std::int64_t t : set.candidates.front().timestamps) w.i64(t);
  for (const CandidateTrajectory &c : set.candidates) w.f64(c.raw_log_prob);
  for (const CandidateTrajectory &c : set.candidates) w.f64(c.confidence);
  w.u32(static_cast<std::uint32_t>(n_gaps));

  for (std::size_t g = 0; g < n_gaps; ++g) {
    bool shared = true;
    for (const CandidateTrajectory &c : set.candidates)
      if (!(c.subpaths[g] == set.candidates.front().subpaths[g]) ||
          c.gap_scores[g] != set.candidates.front().gap_scores[g])
        shared = false;

    Writer block;
    block.u32(static_cast<std::uint32_t>(g));
    if (shared) {
      block.u8(1);
      write_path(block, set.candidates.front().subpaths[g]);
      block.f64(set.candidates.front().gap_scores[g]);
    } else {
      block.u8(0);
      // Distinct alternatives in first-appearance order, then one index
      // per candidate.
      std::vector<const CandidateTrajectory *> owners;
      std::vector<std::uint16_t> index_of(m);
      std::vector<std::size_t> alt_of;
      for (std::size_t c = 0; c < m; ++c) {
        std::size_t found = owners.size();
        for (std::size_t a = 0; a < owners.size(); ++a) {
          if (owners[a]->subpaths[g] == set.candidates[c].subpaths[g] &&
              owners[a]->gap_scores[g] == set.candidates[c].gap_scores[g]) {
            found = a;
            break;
          }
        }
        if (found == owners.size()) owners.push_back(&set.candidates[c]);
        index_of[c] = static_cast<std::uint16_t>(found);
      }
      block.u16(static_cast<std::uint16_t>(owners.size()));
      for (const CandidateTrajectory *o : owners) {
        write_path(block, o->subpaths[g]);
        block.f64(o->gap_scores[g]);
      }
      for (std::uint16_t ix : index_of) block.u16(ix);
    }
    auto body = block.take();
    w.u32(static_cast<std::uint32_t>(body.size()));
    w.bytes(body);
  }
  return w.take();
}

CandidateSet decode_candidate_set(const std::vector<std::uint8_t> &bytes) {
  Reader r(bytes.data(), bytes.size());
  const std::uint8_t version = r.u8();
  if (version != kCandidateFormatVersion) r.fail("unsupported format version");

  CandidateSet set;
  set.sequence_id = r.str();
  const std::uint32_t n_obs = r.u32();
  const std::uint32_t m = r.u32();
  if (m == 0) r.fail("zero candidates");
  if (n_obs == 0) r.fail("zero observations");

  std::vector<std::int64_t> timestamps(n_obs);
  for (auto &t : timestamps) t = r.i64();
  set.candidates.resize(m);
  for (auto &c : set.candidates) {
    c.timestamps = timestamps;
    c.raw_log_prob = r.f64();
  }
  for (auto &c : set.candidates) c.confidence = r.f64();

  const std::uint32_t n_gaps = r.u32();
  if (n_gaps != n_obs - 1) r.fail("gap count does not match observations");
  for (auto &c : set.candidates) {
    c.subpaths.resize(n_gaps);
    c.gap_scores.resize(n_gaps);
  }

  for (std::uint32_t g = 0; g < n_gaps; ++g) {
    const std::uint32_t block_len = r.u32();
    const std::size_t block_start = r.offset();
    if (block_start + block_len > bytes.size()) r.fail("truncated gap block");
    Reader block(bytes.data() + block_start, block_len, block_start);

    const std::uint32_t gap_index = block.u32();
    if (gap_index != g) block.fail("gap index out of order");
    const std::uint8_t type = block.u8();
    if (type == 1) {
      const PathOnNetwork path = read_path(block);
      const double score = block.f64();
      for (auto &c : set.candidates) {
        c.subpaths[g] = path;
        c.gap_scores[g] = score;
      }
    } else if (type == 0) {
      const std::uint16_t n_alt = block.u16();
      if (n_alt == 0) block.fail("divergent gap with no alternatives");
      std::vector<PathOnNetwork> paths(n_alt);
      std::vector<double> scores(n_alt);
      for (std::uint16_t a = 0; a < n_alt; ++a) {
        paths[a] = read_path(block);
        scores[a] = block.f64();
      }
      for (auto &c : set.candidates) {
        const std::uint16_t ix = block.u16();
        if (ix >= n_alt) block.fail("alternative index out of range");
        c.subpaths[g] = paths[ix];
        c.gap_scores[g] = scores[ix];
      }
    } else {
      block.fail("unknown block type");
    }
    if (!block.done()) block.fail("trailing bytes in gap block");
    r.skip(block_len);
  }
  if (!r.done()) r.fail("trailing bytes after last gap block");
  return set;
}

std::size_t uncompressed_size(const CandidateSet &set) {
  // Reference cost of M independently stored trajectories: each candidate
  // encoded as its own single-candidate set.
  std::size_t total = 0;
  for (const CandidateTrajectory &c : set.candidates) {
    CandidateSet one;
    one.sequence_id = set.sequence_id;
    one.candidates.push_back(c);
    total += encode_candidate_set(one).size();
  }
  return total;
}

void write_debug_text(std::ostream &os, const CandidateSet &set) {
  os << "sequence " << set.sequence_id << " candidates "
     << set.candidates.size() << "\n";
  for (std::size_t i = 0; i < set.candidates.size(); ++i) {
    const CandidateTrajectory &c = set.candidates[i];
    os << "  candidate " << i << " confidence " << c.confidence
       << " log_prob " << c.raw_log_prob << "\n";
    for (std::size_t g = 0; g < c.subpaths.size(); ++g) {
      os << "    gap " << g << " len " << c.subpaths[g].length_m << " segs";
      for (SegmentId s : c.subpaths[g].segments) os << ' ' << s;
      os << "\n";
    }
  }
}

EntrySummary summarize(const CandidateSet &set, const RoadNetwork &net) {
  const CandidateTrajectory &top = set.candidates.front();
  EntrySummary s;
  s.id = set.sequence_id;
  const PathOnNetwork &first = top.subpaths.front();
  const PathOnNetwork &last = top.subpaths.back();
  s.start = net.point_on_segment(first.segments.front(), first.entry_offset_m).position;
  s.end = net.point_on_segment(last.segments.back(), last.exit_offset_m).position;
  s.start_time = top.timestamps.front();
  s.end_time = top.timestamps.back();
  s.length_m = trajectory_length_m(top);
  return s;
}

namespace {
constexpr char kStoreMagic[4] = {'C', 'S', 'S', 'T'};
}

void CandidateStore::write(const std::string &path,
                           const std::vector<CandidateSet> &sets) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write candidate store: " + path);
  out.write(kStoreMagic, 4);
  const std::uint8_t version = kCandidateFormatVersion;
  out.put(static_cast<char>(version));
  const std::uint64_t n = sets.size();
  out.write(reinterpret_cast<const char *>(&n), sizeof n);
  for (const CandidateSet &set : sets) {
    const auto blob = encode_candidate_set(set);
    const std::uint64_t len = blob.size();
    out.write(reinterpret_cast<const char *>(&len), sizeof len);
    out.write(reinterpret_cast<const char *>(blob.data()),
              static_cast<std::streamsize>(blob.size()));
  }
  if (!out) throw Error(ErrorCode::io, "short write to candidate store: " + path);
}

CandidateStore CandidateStore::open(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open candidate store: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kStoreMagic, 4) != 0)
    throw Error(ErrorCode::format, "not a candidate store: " + path);
  const int version = in.get();
  if (version != kCandidateFormatVersion)
    throw Error(ErrorCode::format, "unsupported store version");
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char *>(&n), sizeof n);
  CandidateStore store;
  for (std::uint64_t i = 0; i < n; ++i) {
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char *>(&len), sizeof len);
    std::vector<std::uint8_t> blob(len);
    in.read(reinterpret_cast<char *>(blob.data()), static_cast<std::streamsize>(len));
    if (!in) throw Error(ErrorCode::format, "truncated candidate store: " + path);
    store.entries_.push_back(decode_candidate_set(blob));
  }
  return store;
}

std::vector<EntrySummary> CandidateStore::build_summaries(const RoadNetwork &net) const {
  std::vector<EntrySummary> out;
  out.reserve(entries_.size());
  for (const CandidateSet &set : entries_) out.push_back(summarize(set, net));
  return out;
}

void CandidateStore::write_summaries(const std::string &path,
                                     const std::vector<EntrySummary> &summaries) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write summary index: " + path);
  out << "id,x0,y0,t0,x1,y1,t1,length_m\n";
  out.precision(17);
  for (const EntrySummary &s : summaries)
    out << s.id << ',' << s.start.x << ',' << s.start.y << ',' << s.start_time
        << ',' << s.end.x << ',' << s.end.y << ',' << s.end_time << ','
        << s.length_m << '\n';
}

std::vector<EntrySummary> CandidateStore::read_summaries(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open summary index: " + path);
  std::vector<EntrySummary> out;
  std::string line;
  std::getline(in, line);  // header
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    EntrySummary s;
    std::string field;
    try {
      std::getline(ss, s.id, ',');
      std::getline(ss, field, ',');
      s.start.x = std::stod(field);
      std::getline(ss, field, ',');
      s.start.y = std::stod(field);
      std::getline(ss, field, ',');
      s.start_time = std::stoll(field);
      std::getline(ss, field, ',');
      s.end.x = std::stod(field);
      std::getline(ss, field, ',');
      s.end.y = std::stod(field);
      std::getline(ss, field, ',');
      s.end_time = std::stoll(field);
      std::getline(ss, field, ',');
      s.length_m = std::stod(field);
    } catch (const std::exception &) {
      throw Error(ErrorCode::parse,
                  "summary index line " + std::to_string(lineno) + ": bad field");
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace cellsim
