#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "seqdec/bitstream.hpp"
#include "seqdec/rng.hpp"

namespace seqdec {

inline double ber(const BitStream& truth, const BitStream& decided) {
  if (truth.size() != decided.size() || truth.empty())
    throw std::invalid_argument("ber: streams must be non-empty and equal length");
  return static_cast<double>(count_bit_errors(truth, decided)) / static_cast<double>(truth.size());
}

// Error rate per intra-window position; inputs are per-window bit groups of
// equal length (position k aggregates bit k of every window).
inline std::vector<double> ber_per_position(const std::vector<BitStream>& truth,
                                            const std::vector<BitStream>& decided) {
  if (truth.empty() || truth.size() != decided.size())
    throw std::invalid_argument("ber_per_position: window count mismatch");
  const std::size_t depth = truth.front().size();
  std::vector<std::uint64_t> errors(depth, 0);
  for (std::size_t w = 0; w < truth.size(); ++w) {
    if (truth[w].size() != depth || decided[w].size() != depth)
      throw std::invalid_argument("ber_per_position: ragged windows");
    for (std::size_t k = 0; k < depth; ++k) errors[k] += truth[w][k] != decided[w][k];
  }
  std::vector<double> out(depth);
  for (std::size_t k = 0; k < depth; ++k)
    out[k] = static_cast<double>(errors[k]) / static_cast<double>(truth.size());
  return out;
}

struct BerPoint {
  double snr_db = 0.0;
  double ber = 0.0;
  std::uint64_t errors = 0;
  std::uint64_t bits = 0;
  bool censored = false;  // stopped on the bit budget before reaching min_errors
};

struct BerTable {
  std::vector<BerPoint> points;
};

inline std::vector<double> snr_grid(double min_db, double max_db, int count) {
  if (count < 1) throw std::invalid_argument("snr_grid: count must be positive");
  std::vector<double> grid(count);
  for (int i = 0; i < count; ++i)
    grid[i] = count == 1 ? min_db : min_db + (max_db - min_db) * i / (count - 1);
  return grid;
}

// ---------------------------------------------------------------------------
// BerTable CSV

inline void write_ber_csv(std::ostream& os, const BerTable& table) {
  os << "# seqdec-csv-v1 ber-table\n";
  os << "snr_db,ber,errors,bits,censored\n";
  char line[160];
  for (const BerPoint& p : table.points) {
    std::snprintf(line, sizeof(line), "%.6g,%.10g,%llu,%llu,%d\n", p.snr_db, p.ber,
                  static_cast<unsigned long long>(p.errors), static_cast<unsigned long long>(p.bits),
                  p.censored ? 1 : 0);
    os << line;
  }
}

inline void write_ber_csv(const std::string& path, const BerTable& table) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_ber_csv(os, table);
}

inline BerTable read_ber_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  BerTable table;
  std::string line;
  bool header_seen = false;
  while (std::getline(is, line)) {
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {  // column header
      header_seen = true;
      continue;
    }
    BerPoint p;
    unsigned long long errors = 0, bits = 0;
    int censored = 0;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    if (!(ls >> p.snr_db >> p.ber >> errors >> bits >> censored))
      throw std::runtime_error("malformed BER table row in " + path + ": " + line);
    p.errors = errors;
    p.bits = bits;
    p.censored = censored != 0;
    table.points.push_back(p);
  }
  return table;
}

// ---------------------------------------------------------------------------
// NVE

struct NveReport {
  double nve = 0.0;
  int points_used = 0;
  std::vector<int> skipped;  // grid indices where the reference measured zero errors
};

// Mean over the grid of BER_candidate / BER_reference. Both tables must cover
// the same SNR points; points where the reference BER is exactly zero cannot
// form a ratio and are excluded (reported in `skipped`).
inline NveReport nve(const BerTable& candidate, const BerTable& reference) {
  if (candidate.points.size() != reference.points.size() || candidate.points.empty())
    throw std::invalid_argument("nve: tables must be non-empty and the same size");
  NveReport report;
  double sum = 0.0;
  for (std::size_t i = 0; i < candidate.points.size(); ++i) {
    const auto& c = candidate.points[i];
    const auto& r = reference.points[i];
    if (std::abs(c.snr_db - r.snr_db) > 1e-9)
      throw std::invalid_argument("nve: SNR grids differ");
    if (r.ber <= 0.0) {
      report.skipped.push_back(static_cast<int>(i));
      continue;
    }
    sum += c.ber / r.ber;
    ++report.points_used;
  }
  if (report.points_used == 0) throw std::invalid_argument("nve: no usable grid points");
  report.nve = sum / report.points_used;
  return report;
}

// ---------------------------------------------------------------------------
// Monte-Carlo BER estimation

struct McStopRule {
  std::uint64_t min_errors = 100;
  std::uint64_t max_bits = 2'000'000;
  std::uint64_t chunk_bits = 16'384;
};

// A system under test simulates `info_bits` bits with the given noise level and
// chunk seed, returning (bit_errors, bits_actually_simulated).
using ChunkSystem =
    std::function<std::pair<std::uint64_t, std::uint64_t>(double snr_db, std::uint64_t info_bits,
                                                          std::uint64_t seed)>;

// Fixed-seed Monte-Carlo sweep with error-count stopping. Chunk seeds depend
// only on (seed, grid index, chunk index); a fixed (seed, threads) pair always
// reproduces the same table. threads>1 runs chunks in parallel waves, so the
// number of chunks consumed before stopping can differ across thread counts.
inline BerTable monte_carlo_ber(const ChunkSystem& system, std::span<const double> snr_db,
                                const McStopRule& stop, std::uint64_t seed, int threads = 1) {
  if (stop.chunk_bits == 0) throw std::invalid_argument("monte_carlo_ber: chunk_bits must be positive");
  BerTable table;
  for (std::size_t pi = 0; pi < snr_db.size(); ++pi) {
    const std::uint64_t point_seed = seed_lane(seed, 0x4d43u, pi);
    BerPoint point;
    point.snr_db = snr_db[pi];
    std::uint64_t chunk_index = 0;
    while (point.errors < stop.min_errors && point.bits < stop.max_bits) {
      const int wave =
          std::max(1, std::min(threads, static_cast<int>((stop.max_bits - point.bits + stop.chunk_bits - 1) /
                                                         stop.chunk_bits)));
      std::vector<std::pair<std::uint64_t, std::uint64_t>> results(wave);
      if (wave == 1) {
        results[0] = system(point.snr_db, stop.chunk_bits, seed_lane(point_seed, chunk_index));
      } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < wave; ++w)
          pool.emplace_back([&, w] {
            results[w] = system(point.snr_db, stop.chunk_bits, seed_lane(point_seed, chunk_index + w));
          });
        for (auto& th : pool) th.join();
      }
      for (const auto& [errors, bits] : results) {
        point.errors += errors;
        point.bits += bits;
      }
      chunk_index += wave;
    }
    point.ber = point.bits ? static_cast<double>(point.errors) / static_cast<double>(point.bits) : 0.0;
    point.censored = point.errors < stop.min_errors;
    table.points.push_back(point);
  }
  return table;
}

}  // namespace seqdec
