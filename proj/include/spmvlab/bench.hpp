#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "spmvlab/cache_sim.hpp"
#include "spmvlab/csr.hpp"
#include "spmvlab/csr_io.hpp"
#include "spmvlab/errors.hpp"
#include "spmvlab/gen.hpp"
#include "spmvlab/metrics.hpp"
#include "spmvlab/perf_events.hpp"
#include "spmvlab/trace.hpp"

namespace spmvlab {

/// Constant-work run count: 2^33 / nnz, clamped to at least one run, so the
/// total arithmetic is independent of matrix size.
inline std::uint64_t num_runs(std::uint64_t nnz) {
    if (nnz == 0) throw invalid_spec_error("num_runs requires nnz >= 1");
    const std::uint64_t runs = (std::uint64_t{1} << 33) / nnz;
    return runs == 0 ? 1 : runs;
}

enum class Provider { Hardware, Simulated };

inline const char* to_string(Provider p) {
    return p == Provider::Hardware ? "hardware" : "simulated";
}

inline Provider provider_from_string(const std::string& name) {
    if (name == "hardware") return Provider::Hardware;
    if (name == "simulated") return Provider::Simulated;
    throw invalid_spec_error("unknown provider: " + name);
}

struct BenchPlan {
    GenSpec spec;
    std::optional<std::string> matrix_path; // overrides spec when set
    std::vector<unsigned> threads{1, 2, 4, 8, 16};
    std::optional<std::uint64_t> runs_override;
    unsigned warmup = 3;
    Provider provider = Provider::Simulated;
    CacheConfig cache = CacheConfig::sandy_bridge();
    InstructionModel instr_model;
    EventMap events = EventMap::defaults();

    void validate() const {
        if (threads.empty()) throw invalid_spec_error("thread list must not be empty");
        for (unsigned t : threads)
            if (t == 0) throw invalid_spec_error("thread counts must be >= 1");
        if (runs_override && *runs_override == 0)
            throw invalid_spec_error("runs override must be >= 1");
        if (!matrix_path) spec.validate();
    }

    std::uint64_t effective_runs(std::uint64_t nnz) const {
        return runs_override ? *runs_override : num_runs(nnz);
    }
};

struct BenchRecord {
    MetricsRecord metrics;
    std::uint64_t runs = 0;
    double mean_time_s = 0.0;
    double std_time_s = 0.0;
    std::string provider;
    std::uint64_t seed = 0;
    std::string config_hash;
};

/// Hash pinning the measurement configuration, recorded with every record so
/// mixed-configuration reports can be detected.
inline std::string bench_config_hash(const BenchPlan& plan) {
    std::ostringstream os;
    os << to_text(plan.cache) << "instr.per_nnz = " << plan.instr_model.per_nnz << '\n'
       << "instr.per_row = " << plan.instr_model.per_row << '\n'
       << "provider = " << to_string(plan.provider) << '\n';
    std::ostringstream hex;
    hex << std::hex << detail::fnv1a64(os.str());
    return hex.str();
}

namespace detail {

/// std::thread twin of the OpenMP kernel path, used by the hardware counter
/// pass: workers are spawned inside the counted region so inherited
/// per-thread counts cover them. Same row blocks, same serial loop, so the
/// result is bitwise identical to spmv_parallel().
inline void spmv_parallel_fresh_threads(const CsrMatrix& a, std::span<const double> x,
                                        std::span<double> y, unsigned threads) {
    if (threads <= 1) {
        spmv_rows(a, x, y, 0, a.nrows);
        return;
    }
    std::vector<std::thread> workers;
    workers.reserve(threads);
    for (unsigned b = 0; b < threads; ++b) {
        const RowBlock blk = row_block(a.nrows, threads, b);
        workers.emplace_back([&, blk] { spmv_rows(a, x, y, blk.begin, blk.end); });
    }
    for (auto& w : workers) w.join();
}

struct Timing {
    double mean_s = 0.0;
    double std_s = 0.0;
};

inline Timing time_runs(const std::function<void()>& run_once, std::uint64_t runs,
                        unsigned warmup) {
    for (unsigned i = 0; i < warmup; ++i) run_once();
    double sum = 0.0, sum_sq = 0.0;
    for (std::uint64_t i = 0; i < runs; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        run_once();
        const auto t1 = std::chrono::steady_clock::now();
        const double dt = std::chrono::duration<double>(t1 - t0).count();
        sum += dt;
        sum_sq += dt * dt;
    }
    Timing t;
    t.mean_s = sum / static_cast<double>(runs);
    const double var = sum_sq / static_cast<double>(runs) - t.mean_s * t.mean_s;
    t.std_s = var > 0.0 ? std::sqrt(var) : 0.0;
    return t;
}

} // namespace detail

/// Run the plan: per thread count, untimed warmup runs, then the
/// constant-work number of timed SpMV passes, then a separate counter pass
/// (hardware counters around the same work, or one warmed simulation).
inline std::vector<BenchRecord> run_bench(const BenchPlan& plan) {
    plan.validate();

    CsrMatrix a;
    std::string kind;
    int scale = -1;
    if (plan.matrix_path) {
        a = load_csr(*plan.matrix_path);
        kind = "file";
    } else {
        a = from_triplets(generate(plan.spec));
        kind = to_string(plan.spec.kind);
        scale = plan.spec.scale;
    }

    const std::uint64_t nnz = a.nnz();
    const std::uint64_t runs = plan.effective_runs(nnz);
    const std::string hash = bench_config_hash(plan);
    const DenseVector x(a.ncols, 1.0);
    DenseVector y(a.nrows, 0.0);

    std::vector<BenchRecord> records;
    records.reserve(plan.threads.size());
    for (unsigned t : plan.threads) {
        const detail::Timing timing = detail::time_runs(
            [&] { spmv_parallel(a, std::span<const double>(x), std::span<double>(y), t); },
            runs, plan.warmup);

        RawCounters raw;
        if (plan.provider == Provider::Simulated) {
            const std::vector<AccessTrace> traces = trace_spmv_blocks(a, t);
            raw = simulated_counters(
                simulate_multicore(traces, plan.cache, plan.warmup), plan.instr_model);
        } else {
            raw = collect_hardware(
                [&] {
                    for (std::uint64_t i = 0; i < runs; ++i)
                        detail::spmv_parallel_fresh_threads(
                            a, std::span<const double>(x), std::span<double>(y), t);
                },
                plan.events);
        }

        BenchRecord rec;
        rec.metrics = MetricsRecord::compute_metrics(kind, scale, nnz, t, raw, timing.mean_s);
        rec.runs = runs;
        rec.mean_time_s = timing.mean_s;
        rec.std_time_s = timing.std_s;
        rec.provider = to_string(plan.provider);
        rec.seed = plan.spec.seed;
        rec.config_hash = hash;
        records.push_back(std::move(rec));
    }
    return records;
}

inline const char* bench_csv_header() {
    static const std::string header = std::string(metrics_csv_header()) +
                                      ",runs,mean_time_s,std_time_s,provider,seed,config_hash";
    return header.c_str();
}

inline void write_bench_csv_row(std::ostream& os, const BenchRecord& r) {
    write_metrics_csv_fields(os, r.metrics);
    os << ',' << r.runs << ',' << detail::format_double(r.mean_time_s) << ','
       << detail::format_double(r.std_time_s) << ',' << r.provider << ',' << r.seed << ','
       << r.config_hash << '\n';
}

/// Run run_bench once per scale in [scale_begin, scale_end], streaming rows
/// into `report`. A sub-run failure flushes what exists, appends a partial
/// marker, and rethrows.
inline std::vector<BenchRecord> sweep(MatrixKind kind, int scale_begin, int scale_end,
                                      const BenchPlan& plan_template, std::ostream& report) {
    if (scale_begin > scale_end)
        throw invalid_spec_error("sweep requires scale_begin <= scale_end");
    report << bench_csv_header() << '\n';
    std::vector<BenchRecord> all;
    for (int s = scale_begin; s <= scale_end; ++s) {
        BenchPlan plan = plan_template;
        plan.matrix_path.reset();
        plan.spec.kind = kind;
        plan.spec.scale = s;
        plan.spec.nnz_per_row = kind == MatrixKind::FD9 ? 9 : plan.spec.nnz_per_row;
        try {
            std::vector<BenchRecord> recs = run_bench(plan);
            for (const BenchRecord& r : recs) write_bench_csv_row(report, r);
            report.flush();
            all.insert(all.end(), recs.begin(), recs.end());
        } catch (const std::exception& e) {
            report << "# partial: aborted at scale " << s << ": " << e.what() << '\n';
            report.flush();
            throw;
        }
    }
    return all;
}

/// Parse rows previously written by write_bench_csv_row. Comment lines
/// (leading '#') are skipped; a partial marker makes `partial` true.
struct BenchCsv {
    std::vector<BenchRecord> records;
    bool partial = false;
};

inline BenchCsv read_bench_csv(std::istream& is) {
    BenchCsv out;
    std::string line;
    if (!std::getline(is, line)) throw io_error("empty bench CSV");
    if (line != bench_csv_header()) throw io_error("unrecognized bench CSV header");
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line.find("# partial") == 0) out.partial = true;
            continue;
        }
        std::vector<std::string> fields;
        std::string field;
        std::istringstream row(line);
        while (std::getline(row, field, ',')) fields.push_back(field);
        if (fields.size() != 22)
            throw io_error("bench CSV line " + std::to_string(lineno) + ": expected 22 fields");
        try {
            BenchRecord r;
            MetricsRecord& m = r.metrics;
            m.kind = fields[0];
            m.scale = std::stoi(fields[1]);
            m.nnz = std::stoull(fields[2]);
            m.threads = static_cast<unsigned>(std::stoul(fields[3]));
            m.raw.l2_demand_misses = std::stoull(fields[4]);
            m.raw.l3_demand_misses = std::stoull(fields[5]);
            m.raw.prefetch_l2_misses = std::stoull(fields[6]);
            m.raw.l2_stall_cycles = std::stoull(fields[7]);
            m.raw.instructions = std::stoull(fields[8]);
            m.raw.total_cycles = std::stoull(fields[9]);
            m.l2_miss_rate = std::stod(fields[10]);
            m.l3_miss_rate = std::stod(fields[11]);
            m.prefetch_miss_rate = std::stod(fields[12]);
            m.l2_stall_fraction = std::stod(fields[13]);
            m.gflops = std::stod(fields[14]);
            m.runtime_seconds = std::stod(fields[15]);
            r.runs = std::stoull(fields[16]);
            r.mean_time_s = std::stod(fields[17]);
            r.std_time_s = std::stod(fields[18]);
            r.provider = fields[19];
            r.seed = std::stoull(fields[20]);
            r.config_hash = fields[21];
            out.records.push_back(std::move(r));
        } catch (const std::exception&) {
            throw io_error("bench CSV line " + std::to_string(lineno) + ": malformed field");
        }
    }
    return out;
}

inline double metric_by_name(const MetricsRecord& r, const std::string& name) {
    if (name == "l2_miss_rate") return r.l2_miss_rate;
    if (name == "l3_miss_rate") return r.l3_miss_rate;
    if (name == "prefetch_miss_rate") return r.prefetch_miss_rate;
    if (name == "l2_stall_fraction") return r.l2_stall_fraction;
    if (name == "gflops") return r.gflops;
    throw invalid_spec_error("unknown metric: " + name);
}

inline const std::vector<std::string>& plot_metric_names() {
    static const std::vector<std::string> names = {
        "l2_miss_rate", "l3_miss_rate", "prefetch_miss_rate", "l2_stall_fraction", "gflops"};
    return names;
}

/// Plot-data table for one metric: one row per (scale, nnz), one column per
/// thread count, ready for external plotting tools.
inline void write_plot_data(const std::vector<BenchRecord>& records, const std::string& metric,
                            std::ostream& os) {
    std::vector<unsigned> threads;
    std::vector<std::pair<int, std::uint64_t>> sizes;
    for (const BenchRecord& r : records) {
        if (std::find(threads.begin(), threads.end(), r.metrics.threads) == threads.end())
            threads.push_back(r.metrics.threads);
        const auto size = std::make_pair(r.metrics.scale, r.metrics.nnz);
        if (std::find(sizes.begin(), sizes.end(), size) == sizes.end()) sizes.push_back(size);
    }
    std::sort(threads.begin(), threads.end());
    std::sort(sizes.begin(), sizes.end(),
              [](const auto& a, const auto& b) { return a.second < b.second; });

    os << "scale,nnz";
    for (unsigned t : threads) os << ",t" << t;
    os << '\n';
    for (const auto& [scale, nnz] : sizes) {
        os << scale << ',' << nnz;
        for (unsigned t : threads) {
            bool found = false;
            for (const BenchRecord& r : records) {
                if (r.metrics.scale == scale && r.metrics.nnz == nnz && r.metrics.threads == t) {
                    os << ',' << detail::format_double(metric_by_name(r.metrics, metric));
                    found = true;
                    break;
                }
            }
            if (!found) os << ',';
        }
        os << '\n';
    }
}

} // namespace spmvlab
