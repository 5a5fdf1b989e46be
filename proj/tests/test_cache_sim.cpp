#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include <spmvlab/cache_sim.hpp>
#include <spmvlab/gen.hpp>
#include <spmvlab/metrics.hpp>
#include <spmvlab/trace.hpp>

#include "test_support.hpp"

using namespace spmvlab;

namespace {

CacheConfig tiny_config(std::uint64_t l1_lines, std::uint64_t l2_lines, std::uint64_t l3_lines,
                        unsigned assoc = 0) {
    // assoc == 0 means fully associative.
    CacheConfig c = CacheConfig::desk();
    c.l1 = {l1_lines * 64, assoc == 0 ? static_cast<unsigned>(l1_lines) : assoc, 4};
    c.l2 = {l2_lines * 64, assoc == 0 ? static_cast<unsigned>(l2_lines) : assoc, 12};
    c.l3 = {l3_lines * 64, assoc == 0 ? static_cast<unsigned>(l3_lines) : assoc, 30};
    c.prefetch.enabled = false;
    return c;
}

void check_conservation(const SimResult& r, std::uint64_t events, bool bypass) {
    CHECK(r.l1.demand_accesses() == events);
    CHECK(r.l2.demand_accesses() == r.l1.demand_misses);
    if (bypass) {
        CHECK(r.l3.demand_accesses() == 0);
        CHECK(r.l3.prefetch_fills == 0);
        CHECK(r.l3.prefetch_hits == 0);
        CHECK(r.dram_demand_accesses == r.l2.demand_misses);
    } else {
        CHECK(r.l3.demand_accesses() == r.l2.demand_misses);
        CHECK(r.dram_demand_accesses == r.l3.demand_misses);
    }
}

} // namespace

TEST_CASE("repeated access to one line: one cold miss, then L1 hits") {
    const AccessTrace t = testsupport::synthetic_trace(std::vector<std::uint64_t>(100, 7));
    const SimResult r = simulate(t, CacheConfig::desk());
    CHECK(r.l1.demand_misses == 1);
    CHECK(r.l1.demand_hits == 99);
    CHECK(r.l2.demand_misses == 1);
    CHECK(r.l3.demand_misses == 1);
    CHECK(r.dram_demand_accesses == 1);
}

TEST_CASE("cyclic sweep through a smaller LRU cache misses every access") {
    // N distinct lines, cache of C < N lines, two passes: LRU evicts each
    // line before its reuse, so all 2N accesses miss.
    const std::uint64_t n_lines = 32;
    std::vector<std::uint64_t> lines;
    for (int pass = 0; pass < 2; ++pass)
        for (std::uint64_t l = 0; l < n_lines; ++l) lines.push_back(l);

    const CacheConfig cfg = tiny_config(16, 16, 64); // fully associative
    const SimResult r = simulate(testsupport::synthetic_trace(lines), cfg);
    CHECK(r.l1.demand_misses == 2 * n_lines);
    CHECK(r.l2.demand_misses == 2 * n_lines);
}

TEST_CASE("conservation identities hold on random traces") {
    Rng rng(101);
    for (int i = 0; i < 10; ++i) {
        std::vector<std::uint64_t> lines;
        const std::uint64_t region = 1 + rng.next_below(4096);
        for (int k = 0; k < 3000; ++k) lines.push_back(rng.next_below(region));
        const AccessTrace t = testsupport::synthetic_trace(lines);

        CacheConfig cfg = CacheConfig::desk();
        cfg.prefetch.enabled = i % 2 == 0;
        SimResult r = simulate(t, cfg);
        check_conservation(r, t.events.size(), false);
        CHECK(r.l2.prefetch_fills == r.l3.prefetch_hits + r.dram_prefetch_accesses);
        CHECK(r.total_cycles == r.compute_cycles + r.l2_stall_cycles);

        cfg.l3_bypass = true;
        r = simulate(t, cfg);
        check_conservation(r, t.events.size(), true);
    }
}

TEST_CASE("simulation is deterministic") {
    const CsrMatrix a = from_triplets(generate(GenSpec::rmat(9, 77)));
    const AccessTrace t = trace_spmv(a);
    const SimResult r1 = simulate(t, CacheConfig::desk(), 1);
    const SimResult r2 = simulate(t, CacheConfig::desk(), 1);
    CHECK(r1.l1.demand_misses == r2.l1.demand_misses);
    CHECK(r1.l2.demand_misses == r2.l2.demand_misses);
    CHECK(r1.l3.demand_misses == r2.l3.demand_misses);
    CHECK(r1.l2.prefetch_fills == r2.l2.prefetch_fills);
    CHECK(r1.l2_stall_cycles == r2.l2_stall_cycles);
    CHECK(r1.total_cycles == r2.total_cycles);
}

TEST_CASE("prefetcher strictly reduces misses on a sequential trace") {
    // One pass over 4x the L2 line count, sequential.
    CacheConfig cfg = CacheConfig::desk();
    const std::uint64_t n_lines = 4 * cfg.l2.capacity_bytes / cfg.line_size;
    std::vector<std::uint64_t> lines;
    for (std::uint64_t l = 0; l < n_lines; ++l) lines.push_back(l);
    const AccessTrace t = testsupport::synthetic_trace(lines);

    cfg.prefetch.enabled = false;
    const SimResult off = simulate(t, cfg);
    cfg.prefetch.enabled = true;
    const SimResult on = simulate(t, cfg);

    CHECK(on.l2.demand_misses < off.l2.demand_misses);
    CHECK(on.l2.prefetch_fills > 0);
    // Steady state: one trigger miss per degree+1 lines, plus page restarts.
    CHECK(on.l2.demand_misses < off.l2.demand_misses / 2);
}

TEST_CASE("prefetcher barely changes misses on a uniformly random trace") {
    CacheConfig cfg = CacheConfig::desk();
    // Region far larger than L2 (128 lines): 8192 lines.
    Rng rng(5);
    std::vector<std::uint64_t> lines;
    for (int k = 0; k < 60000; ++k) lines.push_back(rng.next_below(8192));
    const AccessTrace t = testsupport::synthetic_trace(lines);

    cfg.prefetch.enabled = false;
    const SimResult off = simulate(t, cfg);
    cfg.prefetch.enabled = true;
    const SimResult on = simulate(t, cfg);

    const double delta =
        std::abs(static_cast<double>(on.l2.demand_misses) -
                 static_cast<double>(off.l2.demand_misses)) /
        static_cast<double>(off.l2.demand_misses);
    CHECK(delta < 0.05);
}

TEST_CASE("congestion shutoff suppresses prefetch under DRAM-bound demand") {
    // Interleave one sequential stream with three random accesses over a
    // region far beyond L3: most demand traffic reaches DRAM, so a sane
    // threshold suppresses the stream prefetches.
    Rng rng(11);
    std::vector<MemEvent> events;
    std::uint64_t seq = 0;
    for (int k = 0; k < 40000; ++k) {
        events.push_back({(seq++) * 8, AccessKind::Read, StreamTag::ColIdx});
        for (int j = 0; j < 3; ++j)
            events.push_back({(1 << 24) + rng.next_below(1 << 23) * 64, AccessKind::Read,
                              StreamTag::X});
    }
    AccessTrace t;
    t.events = events;

    CacheConfig cfg = CacheConfig::desk();
    cfg.prefetch.dram_threshold = 0.15;
    const SimResult suppressed = simulate(t, cfg);

    cfg.prefetch.dram_threshold = 1.0; // never congested
    const SimResult free_running = simulate(t, cfg);

    CHECK(free_running.l2.prefetch_fills > 0);
    CHECK(suppressed.l2.prefetch_fills < free_running.l2.prefetch_fills / 5);
}

TEST_CASE("L3 bypass reports zero L3 activity") {
    const CsrMatrix a = from_triplets(generate(GenSpec::rmat(13, 3)));
    const AccessTrace t = trace_spmv(a);

    CacheConfig cfg = CacheConfig::desk();
    cfg.l3_bypass = true;
    const SimResult bypass = simulate(t, cfg, 1);

    CHECK(bypass.l3.demand_accesses() == 0);
    CHECK(bypass.l3.prefetch_fills == 0);
    CHECK(bypass.l3.prefetch_hits == 0);
    CHECK(bypass.dram_demand_accesses == bypass.l2.demand_misses);
}

TEST_CASE("L3 bypass saves cycles once the L3 hit ratio is below break-even") {
    // Uniform random lines over 64x the desk L3: the L3 hit ratio lands far
    // below the l3_latency/dram_latency = 30/200 break-even.
    Rng rng(21);
    std::vector<std::uint64_t> lines;
    for (int k = 0; k < 200000; ++k) lines.push_back(rng.next_below(64 * 1024));
    const AccessTrace t = testsupport::synthetic_trace(lines);

    CacheConfig cfg = CacheConfig::desk();
    const SimResult with_l3 = simulate(t, cfg, 1);
    const double hit_ratio = static_cast<double>(with_l3.l3.demand_hits) /
                             static_cast<double>(with_l3.l3.demand_accesses());
    REQUIRE(hit_ratio <
            static_cast<double>(cfg.l3.hit_latency) / static_cast<double>(cfg.dram_latency));

    cfg.l3_bypass = true;
    const SimResult bypass = simulate(t, cfg, 1);
    CHECK(bypass.total_cycles <= with_l3.total_cycles);
    CHECK(bypass.l2_stall_cycles < with_l3.l2_stall_cycles);
}

TEST_CASE("multicore with one trace equals the single-core simulation") {
    const CsrMatrix a = from_triplets(generate(GenSpec::rmat(9, 31)));
    const std::vector<AccessTrace> traces = {trace_spmv(a)};
    const SimResult multi = simulate_multicore(traces, CacheConfig::desk());
    const SimResult single = simulate(traces[0], CacheConfig::desk());

    CHECK(multi.l1.demand_misses == single.l1.demand_misses);
    CHECK(multi.l2.demand_misses == single.l2.demand_misses);
    CHECK(multi.l3.demand_misses == single.l3.demand_misses);
    CHECK(multi.l2.prefetch_fills == single.l2.prefetch_fills);
    CHECK(multi.total_cycles == single.total_cycles);
}

TEST_CASE("per-core L2 behavior matches single-core runs of each block") {
    const CsrMatrix a = from_triplets(generate(GenSpec::rmat(12, 8)));
    const std::vector<AccessTrace> blocks = trace_spmv_blocks(a, 2);
    const SimResult multi = simulate_multicore(blocks, CacheConfig::desk(), 1);
    REQUIRE(multi.per_core_l2.size() == 2);

    for (unsigned c = 0; c < 2; ++c) {
        const SimResult solo = simulate(blocks[c], CacheConfig::desk(), 1);
        const double multi_ratio = static_cast<double>(multi.per_core_l2[c].demand_misses) /
                                   static_cast<double>(blocks[c].events.size());
        const double solo_ratio = static_cast<double>(solo.l2.demand_misses) /
                                  static_cast<double>(blocks[c].events.size());
        CHECK(multi_ratio == Catch::Approx(solo_ratio).margin(0.1 * solo_ratio));
    }
}

TEST_CASE("shared L3 demand accesses equal summed per-core L2 misses") {
    const CsrMatrix a = from_triplets(generate(GenSpec::rmat(10, 19)));
    const std::vector<AccessTrace> blocks = trace_spmv_blocks(a, 4);
    CacheConfig cfg = CacheConfig::desk();
    cfg.prefetch.enabled = false;
    const SimResult r = simulate_multicore(blocks, cfg);

    std::uint64_t core_l2_misses = 0;
    for (const LevelStats& s : r.per_core_l2) core_l2_misses += s.demand_misses;
    CHECK(r.l2.demand_misses == core_l2_misses);
    CHECK(r.l3.demand_accesses() == core_l2_misses);
}

TEST_CASE("trace/core count mismatch is rejected") {
    const CsrMatrix a = from_triplets(gen_fd9(GenSpec::fd9(4)));
    const std::vector<AccessTrace> blocks = trace_spmv_blocks(a, 2);
    CacheConfig cfg = CacheConfig::desk();
    cfg.cores = 3;
    CHECK_THROWS_AS(simulate_multicore(blocks, cfg), invalid_spec_error);
}

TEST_CASE("FD9 vs R-MAT structure gap at scale 14 under the desk preset") {
    const CsrMatrix rmat = from_triplets(generate(GenSpec::rmat(14, 1)));
    const CsrMatrix fd = from_triplets(generate(GenSpec::fd9(14)));
    const AccessTrace rmat_trace = trace_spmv(rmat);
    const AccessTrace fd_trace = trace_spmv(fd);

    // Cross-check the engine against the independent fully-associative LRU
    // reference first (no prefetch; the reference has none).
    CacheConfig plain = CacheConfig::desk();
    plain.prefetch.enabled = false;
    for (const AccessTrace* t : {&rmat_trace, &fd_trace}) {
        const SimResult sim = simulate(*t, plain);
        const auto ref = testsupport::reference_hierarchy(*t, 32, 128, 1024);
        CHECK(std::abs(static_cast<double>(sim.l2.demand_misses) -
                       static_cast<double>(ref.l2)) <= 0.2 * static_cast<double>(ref.l2));
    }

    // Under the default desk hierarchy the unstructured matrix misses at
    // least 10x more often per access.
    const CacheConfig cfg = CacheConfig::desk();
    const SimResult r = simulate(rmat_trace, cfg, 1);
    const SimResult f = simulate(fd_trace, cfg, 1);
    const double rmat_ratio = static_cast<double>(r.l2.demand_misses) /
                              static_cast<double>(rmat_trace.events.size());
    const double fd_ratio = static_cast<double>(f.l2.demand_misses) /
                            static_cast<double>(fd_trace.events.size());
    CHECK(rmat_ratio >= 10.0 * fd_ratio);
}

TEST_CASE("R-MAT miss-rate cliff completes where x outgrows L2, then plateaus") {
    // The rise starts at the problem-fit boundary (scale 7 here) but only
    // levels out once the x vector itself dwarfs the L2 (x bytes = n * 8 vs
    // 8KB: scales 14+). FD stays an order of magnitude lower throughout the
    // plateau.
    const CacheConfig cfg = CacheConfig::desk();
    auto rate = [&](const GenSpec& spec) {
        const CsrMatrix a = from_triplets(generate(spec));
        return l2_miss_rate(simulated_counters(simulate(trace_spmv(a), cfg, 1)));
    };

    const double fit = rate(GenSpec::rmat(6, 1));
    const double r9 = rate(GenSpec::rmat(9, 1));
    const double r14 = rate(GenSpec::rmat(14, 1));
    const double r15 = rate(GenSpec::rmat(15, 1));
    const double r16 = rate(GenSpec::rmat(16, 1));

    CHECK(r9 >= 5.0 * std::max(fit, 0.5)); // sharp rise past the boundary
    CHECK(r14 > r9);                       // still climbing while x shrinks vs L2
    CHECK(std::abs(r16 - r15) <= 0.25 * r15); // plateau once x >> L2

    CHECK(rate(GenSpec::fd9(14)) < 0.10 * r14);
    CHECK(rate(GenSpec::fd9(16)) < 0.10 * r16);
}

TEST_CASE("x-stream miss ratio jumps across the cache capacity cliffs") {
    const CacheConfig cfg = CacheConfig::desk();
    auto x_ratio_l2 = [&](int scale) {
        const CsrMatrix a = from_triplets(generate(GenSpec::rmat(scale, 6)));
        const SimResult r = simulate(trace_spmv(a), cfg, 1);
        const auto x = static_cast<unsigned>(StreamTag::X);
        return static_cast<double>(r.l2_misses_by_tag[x]) /
               static_cast<double>(r.accesses_by_tag[x]);
    };
    // Largest fitting R-MAT under the 8KB desk L2 is scale 6 (512 nnz,
    // max_nnz_fitting = 564); 8x that size is scale 9.
    const double fit = x_ratio_l2(6);
    const double beyond = x_ratio_l2(9);
    if (fit > 0.0)
        CHECK(beyond >= 5.0 * fit);
    else
        CHECK(beyond > 0.0);

    auto x_ratio_l3 = [&](int scale) {
        const CsrMatrix a = from_triplets(generate(GenSpec::rmat(scale, 6)));
        const SimResult r = simulate(trace_spmv(a), cfg, 1);
        const auto x = static_cast<unsigned>(StreamTag::X);
        return static_cast<double>(r.l3_misses_by_tag[x]) /
               static_cast<double>(r.accesses_by_tag[x]);
    };
    // Largest fitting under the 64KB desk L3 is scale 9 (4096 nnz,
    // max_nnz_fitting = 4519); 8x that size is scale 12.
    const double fit3 = x_ratio_l3(9);
    const double beyond3 = x_ratio_l3(12);
    if (fit3 > 0.0)
        CHECK(beyond3 >= 5.0 * fit3);
    else
        CHECK(beyond3 > 0.0);
}

TEST_CASE("simulated_counters maps tallies onto the six logical counters") {
    SimResult zero;
    const RawCounters z = simulated_counters(zero);
    CHECK(z.l2_demand_misses == 0);
    CHECK(z.l3_demand_misses == 0);
    CHECK(z.prefetch_l2_misses == 0);
    CHECK(z.l2_stall_cycles == 0);

    const CsrMatrix a = from_triplets(generate(GenSpec::fd9(10)));
    const SimResult r = simulate(trace_spmv(a), CacheConfig::desk(), 1);
    const RawCounters c = simulated_counters(r, InstructionModel{10, 4});
    CHECK(c.instructions == 10 * a.nnz() + 4 * a.nrows);
    CHECK(c.l2_demand_misses == r.l2.demand_misses);
    CHECK(c.prefetch_l2_misses == r.l2.prefetch_fills);
    CHECK(c.total_cycles == 2 * a.nnz() + r.l2_stall_cycles);
    CHECK(c.l2_stall_cycles <= c.total_cycles);
}

TEST_CASE("cache config text round-trips and validates") {
    CacheConfig c = CacheConfig::desk();
    c.prefetch.degree = 6;
    c.l3_bypass = true;
    c.cores = 4;

    std::stringstream buf(to_text(c));
    const CacheConfig back = parse_cache_config(buf);
    CHECK(to_text(back) == to_text(c));

    std::stringstream bad("l1.capacity = 999\n"); // not a multiple of line*assoc
    CHECK_THROWS_AS(parse_cache_config(bad), invalid_spec_error);

    std::stringstream junk("what is this\n");
    CHECK_THROWS_AS(parse_cache_config(junk), io_error);

    CacheConfig order = CacheConfig::desk();
    order.l2.capacity_bytes = order.l3.capacity_bytes * 2;
    CHECK_THROWS_AS(order.validate(), invalid_spec_error);
}
