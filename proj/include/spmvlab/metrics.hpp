#pragma once

#include <cstdint>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "spmvlab/cache_sim.hpp"
#include "spmvlab/errors.hpp"

namespace spmvlab {

/// The six logical event counts behind the derived metrics. Both providers
/// (hardware counters and the simulator) emit this same record.
struct RawCounters {
    std::uint64_t l2_demand_misses = 0;
    std::uint64_t l3_demand_misses = 0;
    std::uint64_t prefetch_l2_misses = 0;
    std::uint64_t l2_stall_cycles = 0;
    std::uint64_t instructions = 0;
    std::uint64_t total_cycles = 0;
};

/// Misses per thousand instructions.
inline double l2_miss_rate(const RawCounters& c) {
    if (c.instructions == 0) throw metric_error("l2_miss_rate: zero instructions");
    return 1e3 * static_cast<double>(c.l2_demand_misses) / static_cast<double>(c.instructions);
}

inline double l3_miss_rate(const RawCounters& c) {
    if (c.instructions == 0) throw metric_error("l3_miss_rate: zero instructions");
    return 1e3 * static_cast<double>(c.l3_demand_misses) / static_cast<double>(c.instructions);
}

/// Prefetcher fills from beyond L2 per thousand instructions. Unlike the
/// demand miss rates, higher means the prefetcher is doing useful work.
inline double prefetch_miss_rate(const RawCounters& c) {
    if (c.instructions == 0) throw metric_error("prefetch_miss_rate: zero instructions");
    return 1e3 * static_cast<double>(c.prefetch_l2_misses) / static_cast<double>(c.instructions);
}

/// Fraction of all cycles spent waiting on L2 misses, in [0, 1].
inline double l2_stall_fraction(const RawCounters& c) {
    if (c.total_cycles == 0) throw metric_error("l2_stall_fraction: zero cycles");
    return static_cast<double>(c.l2_stall_cycles) / static_cast<double>(c.total_cycles);
}

/// 2 flops per nonzero, per second, in billions.
inline double gflops(std::uint64_t nnz, double runtime_seconds) {
    if (!(runtime_seconds > 0.0)) throw metric_error("gflops: nonpositive runtime");
    return 2.0 * static_cast<double>(nnz) / runtime_seconds / 1e9;
}

/// Converts instruction-free simulator tallies into the counter record.
/// The simulator executes no instructions, so the denominator comes from a
/// fixed linear model; it only needs to be a stable normalizer.
struct InstructionModel {
    std::uint64_t per_nnz = 10;
    std::uint64_t per_row = 4;

    std::uint64_t instructions(std::uint64_t nnz, std::uint64_t nrows) const {
        return per_nnz * nnz + per_row * nrows;
    }
};

inline RawCounters simulated_counters(const SimResult& r, const InstructionModel& model = {}) {
    RawCounters c;
    c.l2_demand_misses = r.l2.demand_misses;
    c.l3_demand_misses = r.l3.demand_misses;
    c.prefetch_l2_misses = r.l2.prefetch_fills;
    c.l2_stall_cycles = r.l2_stall_cycles;
    c.instructions = model.instructions(r.nnz, r.nrows);
    c.total_cycles = r.total_cycles;
    return c;
}

/// One (matrix, thread-count) measurement: raw counters plus the five
/// derived values. The derived fields are exactly recomputable from the raw
/// ones; compute_metrics() is the only code path that fills them.
struct MetricsRecord {
    std::string kind;
    int scale = -1; // -1 when the matrix came from a file
    std::uint64_t nnz = 0;
    unsigned threads = 1;
    RawCounters raw;
    double runtime_seconds = 0.0;

    double l2_miss_rate = 0.0;
    double l3_miss_rate = 0.0;
    double prefetch_miss_rate = 0.0;
    double l2_stall_fraction = 0.0;
    double gflops = 0.0;

    static MetricsRecord compute_metrics(std::string kind, int scale, std::uint64_t nnz,
                                         unsigned threads, const RawCounters& raw,
                                         double runtime_seconds) {
        MetricsRecord r;
        r.kind = std::move(kind);
        r.scale = scale;
        r.nnz = nnz;
        r.threads = threads;
        r.raw = raw;
        r.runtime_seconds = runtime_seconds;
        r.l2_miss_rate = spmvlab::l2_miss_rate(raw);
        r.l3_miss_rate = spmvlab::l3_miss_rate(raw);
        r.prefetch_miss_rate = spmvlab::prefetch_miss_rate(raw);
        r.l2_stall_fraction = spmvlab::l2_stall_fraction(raw);
        r.gflops = runtime_seconds > 0.0 ? spmvlab::gflops(nnz, runtime_seconds) : 0.0;
        return r;
    }
};

namespace detail {

/// Shortest decimal form that parses back to the identical double.
inline std::string format_double(double v) {
    for (int precision = 15; precision <= 17; ++precision) {
        std::ostringstream os;
        os.precision(precision);
        os << v;
        double back = 0.0;
        std::istringstream(os.str()) >> back;
        if (back == v) return os.str();
    }
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

} // namespace detail

inline const char* metrics_csv_header() {
    return "kind,scale,nnz,threads,l2_demand_misses,l3_demand_misses,prefetch_l2_misses,"
           "l2_stall_cycles,instructions,total_cycles,l2_miss_rate,l3_miss_rate,"
           "prefetch_miss_rate,l2_stall_fraction,gflops,runtime_seconds";
}

inline void write_metrics_csv_fields(std::ostream& os, const MetricsRecord& r) {
    os << r.kind << ',' << r.scale << ',' << r.nnz << ',' << r.threads << ','
       << r.raw.l2_demand_misses << ',' << r.raw.l3_demand_misses << ','
       << r.raw.prefetch_l2_misses << ',' << r.raw.l2_stall_cycles << ','
       << r.raw.instructions << ',' << r.raw.total_cycles << ','
       << detail::format_double(r.l2_miss_rate) << ','
       << detail::format_double(r.l3_miss_rate) << ','
       << detail::format_double(r.prefetch_miss_rate) << ','
       << detail::format_double(r.l2_stall_fraction) << ','
       << detail::format_double(r.gflops) << ','
       << detail::format_double(r.runtime_seconds);
}

} // namespace spmvlab
