#pragma once

#include <array>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "spmvlab/errors.hpp"
#include "spmvlab/trace.hpp"

namespace spmvlab {

struct LevelConfig {
    std::uint64_t capacity_bytes = 0;
    unsigned associativity = 8;
    unsigned hit_latency = 1;
};

/// Next-line streaming prefetcher into L2. Detection state is kept per
/// (stream tag, 4KB page): `trigger` consecutive ascending-line demand
/// misses inside one page arm the stream, after which each further miss
/// issues `degree` next-line fills (never crossing the page).
///
/// Issue is suppressed while, over the last `window` demand accesses, the
/// fraction that had to be served from DRAM exceeds dram_threshold.
struct PrefetchConfig {
    bool enabled = true;
    unsigned trigger = 2;
    unsigned degree = 4;
    unsigned window = 1000;
    double dram_threshold = 0.15;
};

/// Memory hierarchy parameters: private L1D/L2 per core, one shared L3,
/// flat-latency DRAM, true-LRU replacement everywhere.
struct CacheConfig {
    LevelConfig l1{32 * 1024, 8, 4};
    LevelConfig l2{256 * 1024, 8, 12};
    LevelConfig l3{20 * 1024 * 1024, 20, 30};
    unsigned line_size = 64;
    unsigned dram_latency = 200;
    PrefetchConfig prefetch;
    bool l3_bypass = false;
    unsigned cores = 1;

    /// Sandy Bridge-like defaults. Associativities and latencies are model
    /// constants, not measurements.
    static CacheConfig sandy_bridge() { return CacheConfig{}; }

    /// Scaled-down preset so capacity cliffs appear at desk-size problems.
    static CacheConfig desk() {
        CacheConfig c;
        c.l1 = {2 * 1024, 8, 4};
        c.l2 = {8 * 1024, 8, 12};
        c.l3 = {64 * 1024, 16, 30};
        return c;
    }

    void validate() const {
        auto check_level = [&](const LevelConfig& l, const char* name) {
            if (l.capacity_bytes == 0 || l.associativity == 0)
                throw invalid_spec_error(std::string(name) + ": zero capacity or associativity");
            if (l.capacity_bytes % (static_cast<std::uint64_t>(line_size) * l.associativity) != 0)
                throw invalid_spec_error(std::string(name) +
                                         ": capacity must be a multiple of line_size * associativity");
        };
        if (line_size < 8 || line_size > 4096 || (line_size & (line_size - 1)) != 0)
            throw invalid_spec_error("line_size must be a power of two in [8, 4096]");
        check_level(l1, "l1");
        check_level(l2, "l2");
        check_level(l3, "l3");
        if (l1.capacity_bytes > l2.capacity_bytes || l2.capacity_bytes > l3.capacity_bytes)
            throw invalid_spec_error("capacities must be nondecreasing up the hierarchy");
        if (!(prefetch.dram_threshold > 0.0 && prefetch.dram_threshold <= 1.0))
            throw invalid_spec_error("prefetch.dram_threshold must be in (0, 1]");
        if (prefetch.trigger == 0 || prefetch.degree == 0 || prefetch.window == 0)
            throw invalid_spec_error("prefetch trigger/degree/window must be >= 1");
        if (cores == 0) throw invalid_spec_error("core count must be >= 1");
    }
};

struct LevelStats {
    std::uint64_t demand_hits = 0;
    std::uint64_t demand_misses = 0;
    std::uint64_t prefetch_fills = 0; // lines installed here by prefetch requests
    std::uint64_t prefetch_hits = 0;  // prefetch requests that found the line present

    std::uint64_t demand_accesses() const { return demand_hits + demand_misses; }
};

/// Tallies of one (measured) simulation run.
struct SimResult {
    LevelStats l1, l2, l3;
    std::uint64_t dram_demand_accesses = 0;
    std::uint64_t dram_prefetch_accesses = 0;
    std::uint64_t l2_stall_cycles = 0; // sum over L2 demand misses of (service - L2 hit latency)
    std::uint64_t compute_cycles = 0;  // 2 per nonzero
    std::uint64_t total_cycles = 0;    // compute + stall
    std::uint64_t nnz = 0;             // of the measured traces
    std::uint64_t nrows = 0;
    std::uint64_t demand_accesses = 0; // total trace events seen
    std::vector<LevelStats> per_core_l2; // private-L2 breakdown, one entry per core

    // Per-stream breakdown of L2/L3 demand misses (index = StreamTag).
    std::array<std::uint64_t, kNumStreamTags> l2_misses_by_tag{};
    std::array<std::uint64_t, kNumStreamTags> l3_misses_by_tag{};
    std::array<std::uint64_t, kNumStreamTags> accesses_by_tag{};
};

namespace detail {

/// Set-associative cache with true LRU order per set, line granularity.
class SetAssocCache {
public:
    SetAssocCache(std::uint64_t capacity_bytes, unsigned associativity, unsigned line_size)
        : assoc_(associativity),
          num_sets_(capacity_bytes / (static_cast<std::uint64_t>(line_size) * associativity)),
          sets_(num_sets_) {
        for (auto& s : sets_) s.reserve(assoc_);
    }

    /// Probe and update recency; fills on miss. Returns true on hit.
    bool access(std::uint64_t line) {
        auto& set = sets_[line % num_sets_];
        for (std::size_t i = 0; i < set.size(); ++i) {
            if (set[i] == line) {
                // move to MRU (front)
                for (std::size_t j = i; j > 0; --j) set[j] = set[j - 1];
                set[0] = line;
                return true;
            }
        }
        insert_mru(set, line);
        return false;
    }

    /// Presence check without recency update (used for prefetch requests).
    bool contains(std::uint64_t line) const {
        const auto& set = sets_[line % num_sets_];
        for (std::uint64_t l : set)
            if (l == line) return true;
        return false;
    }

    /// Install a line at MRU without hit/miss semantics (prefetch fill).
    void fill(std::uint64_t line) {
        auto& set = sets_[line % num_sets_];
        for (std::size_t i = 0; i < set.size(); ++i) {
            if (set[i] == line) {
                for (std::size_t j = i; j > 0; --j) set[j] = set[j - 1];
                set[0] = line;
                return;
            }
        }
        insert_mru(set, line);
    }

private:
    void insert_mru(std::vector<std::uint64_t>& set, std::uint64_t line) {
        if (set.size() < assoc_) set.push_back(0);
        for (std::size_t j = set.size() - 1; j > 0; --j) set[j] = set[j - 1];
        set[0] = line;
    }

    unsigned assoc_;
    std::uint64_t num_sets_;
    std::vector<std::vector<std::uint64_t>> sets_;
};

/// Sliding window over the last W demand accesses, tracking how many were
/// served from DRAM. Undefined (not congested) until W accesses were seen.
class CongestionWindow {
public:
    explicit CongestionWindow(unsigned window) : ring_(window, 0) {}

    void record(bool reached_dram) {
        if (ring_[head_]) --dram_count_;
        ring_[head_] = reached_dram ? 1 : 0;
        if (reached_dram) ++dram_count_;
        head_ = (head_ + 1) % ring_.size();
        ++seen_;
    }

    bool congested(double threshold) const {
        return seen_ >= ring_.size() &&
               static_cast<double>(dram_count_) > threshold * static_cast<double>(ring_.size());
    }

private:
    std::vector<std::uint8_t> ring_;
    std::size_t head_ = 0;
    std::uint64_t seen_ = 0;
    std::uint64_t dram_count_ = 0;
};

class StreamPrefetcher {
public:
    StreamPrefetcher(const PrefetchConfig& cfg, unsigned line_size)
        : cfg_(cfg), lines_per_page_(4096 / line_size) {}

    /// Feed one L2 demand miss; appends the line addresses to prefetch.
    void on_demand_miss(StreamTag tag, std::uint64_t line, bool issue_allowed,
                        std::vector<std::uint64_t>& out) {
        auto& pages = trackers_[static_cast<unsigned>(tag)];
        const std::uint64_t page = line / lines_per_page_;

        PageState* st = nullptr;
        for (std::size_t i = 0; i < pages.size(); ++i) {
            if (pages[i].page == page) {
                // move to front: tracker table is itself LRU-managed
                PageState tmp = pages[i];
                pages.erase(pages.begin() + static_cast<std::ptrdiff_t>(i));
                pages.insert(pages.begin(), tmp);
                st = &pages.front();
                break;
            }
        }
        if (st == nullptr) {
            pages.insert(pages.begin(), PageState{page, line, 1});
            if (pages.size() > kMaxTrackedPages) pages.pop_back();
            st = &pages.front();
        } else {
            st->streak = line > st->last_line ? st->streak + 1 : 1;
            st->last_line = line;
        }

        if (st->streak >= cfg_.trigger && issue_allowed) {
            const std::uint64_t page_end = (page + 1) * lines_per_page_; // exclusive
            for (unsigned i = 1; i <= cfg_.degree; ++i) {
                const std::uint64_t next = line + i;
                if (next >= page_end) break;
                out.push_back(next);
            }
        }
    }

private:
    struct PageState {
        std::uint64_t page;
        std::uint64_t last_line;
        unsigned streak;
    };

    static constexpr std::size_t kMaxTrackedPages = 64;

    PrefetchConfig cfg_;
    std::uint64_t lines_per_page_;
    std::array<std::vector<PageState>, kNumStreamTags> trackers_;
};

} // namespace detail

/// Trace-driven simulator. Cache and prefetcher state persists across run()
/// calls; reset_stats() zeroes the tallies without disturbing the contents,
/// which is how warm (steady-state) measurements are taken.
class CacheSim {
public:
    explicit CacheSim(const CacheConfig& cfg) : cfg_(cfg) {
        cfg.validate();
        cores_.reserve(cfg.cores);
        for (unsigned c = 0; c < cfg.cores; ++c) cores_.emplace_back(cfg);
        l3_ = std::make_unique<detail::SetAssocCache>(cfg.l3.capacity_bytes,
                                                      cfg.l3.associativity, cfg.line_size);
        result_.per_core_l2.resize(cfg.cores);
    }

    /// Run one trace on one core, tallying into the result.
    void run(const AccessTrace& trace, unsigned core = 0) {
        if (core >= cores_.size()) throw invalid_spec_error("core index out of range");
        for (const MemEvent& e : trace.events) access(core, e);
        account_trace(trace);
    }

    /// Round-robin interleaving, one event per core per step; traces[i]
    /// runs on core i.
    void run_interleaved(std::span<const AccessTrace> traces) {
        if (traces.size() != cores_.size())
            throw invalid_spec_error("trace count does not match configured core count");
        std::vector<std::size_t> cursor(traces.size(), 0);
        bool any = true;
        while (any) {
            any = false;
            for (std::size_t c = 0; c < traces.size(); ++c) {
                if (cursor[c] < traces[c].events.size()) {
                    access(static_cast<unsigned>(c), traces[c].events[cursor[c]++]);
                    any = true;
                }
            }
        }
        for (const AccessTrace& t : traces) account_trace(t);
    }

    /// Zero all tallies; cache contents, prefetch trackers and the
    /// congestion window keep their state.
    void reset_stats() {
        const auto cores = result_.per_core_l2.size();
        result_ = SimResult{};
        result_.per_core_l2.resize(cores);
    }

    SimResult result() const {
        SimResult r = result_;
        r.total_cycles = r.compute_cycles + r.l2_stall_cycles;
        return r;
    }

private:
    struct Core {
        explicit Core(const CacheConfig& cfg)
            : l1(cfg.l1.capacity_bytes, cfg.l1.associativity, cfg.line_size),
              l2(cfg.l2.capacity_bytes, cfg.l2.associativity, cfg.line_size),
              prefetcher(cfg.prefetch, cfg.line_size),
              window(cfg.prefetch.window) {}

        detail::SetAssocCache l1;
        detail::SetAssocCache l2;
        detail::StreamPrefetcher prefetcher;
        detail::CongestionWindow window;
    };

    void access(unsigned core_idx, const MemEvent& e) {
        Core& core = cores_[core_idx];
        const std::uint64_t line = e.addr / cfg_.line_size;
        const auto tag = static_cast<unsigned>(e.tag);
        bool reached_dram = false;
        ++result_.demand_accesses;
        ++result_.accesses_by_tag[tag];

        if (core.l1.access(line)) {
            ++result_.l1.demand_hits;
        } else {
            ++result_.l1.demand_misses;
            if (core.l2.access(line)) {
                ++result_.l2.demand_hits;
                ++result_.per_core_l2[core_idx].demand_hits;
            } else {
                ++result_.l2.demand_misses;
                ++result_.per_core_l2[core_idx].demand_misses;
                ++result_.l2_misses_by_tag[tag];

                // An L3 miss pays the probe before going to DRAM, which is
                // what makes bypassing the L3 a win once its hit ratio
                // drops below l3_latency / dram_latency.
                unsigned service = 0;
                if (cfg_.l3_bypass) {
                    ++result_.dram_demand_accesses;
                    reached_dram = true;
                    service = cfg_.dram_latency;
                } else if (l3_->access(line)) {
                    ++result_.l3.demand_hits;
                    service = cfg_.l3.hit_latency;
                } else {
                    ++result_.l3.demand_misses;
                    ++result_.l3_misses_by_tag[tag];
                    ++result_.dram_demand_accesses;
                    reached_dram = true;
                    service = cfg_.l3.hit_latency + cfg_.dram_latency;
                }
                result_.l2_stall_cycles += service - cfg_.l2.hit_latency;

                if (cfg_.prefetch.enabled) {
                    pending_prefetches_.clear();
                    const bool allowed =
                        !core.window.congested(cfg_.prefetch.dram_threshold);
                    core.prefetcher.on_demand_miss(e.tag, line, allowed, pending_prefetches_);
                    for (std::uint64_t pf_line : pending_prefetches_)
                        issue_prefetch(core, pf_line);
                }
            }
        }
        core.window.record(reached_dram);
    }

    void issue_prefetch(Core& core, std::uint64_t line) {
        if (core.l2.contains(line)) {
            ++result_.l2.prefetch_hits;
            return;
        }
        // Fetch from L3 or DRAM into L2 (not into L1); inclusive fill of L3
        // on a DRAM fetch. Bypass mode never touches L3.
        if (cfg_.l3_bypass) {
            ++result_.dram_prefetch_accesses;
        } else if (l3_->contains(line)) {
            ++result_.l3.prefetch_hits;
        } else {
            ++result_.dram_prefetch_accesses;
            l3_->fill(line);
            ++result_.l3.prefetch_fills;
        }
        core.l2.fill(line);
        ++result_.l2.prefetch_fills;
    }

    void account_trace(const AccessTrace& t) {
        result_.nnz += t.nnz;
        result_.nrows += t.nrows;
        result_.compute_cycles += 2 * t.nnz;
    }

    CacheConfig cfg_;
    std::vector<Core> cores_;
    std::unique_ptr<detail::SetAssocCache> l3_;
    std::vector<std::uint64_t> pending_prefetches_;
    SimResult result_;
};

/// One cold pass of the trace through a single-core hierarchy.
inline SimResult simulate(const AccessTrace& trace, const CacheConfig& cfg) {
    CacheConfig c = cfg;
    c.cores = 1;
    CacheSim sim(c);
    sim.run(trace);
    return sim.result();
}

/// Warm measurement: `warmup_passes` untallied passes, then one tallied one.
inline SimResult simulate(const AccessTrace& trace, const CacheConfig& cfg,
                          unsigned warmup_passes) {
    CacheConfig c = cfg;
    c.cores = 1;
    CacheSim sim(c);
    for (unsigned i = 0; i < warmup_passes; ++i) sim.run(trace);
    sim.reset_stats();
    sim.run(trace);
    return sim.result();
}

/// Multicore run: private L1/L2/prefetcher per core, shared L3, round-robin
/// event interleaving, aggregated tallies.
inline SimResult simulate_multicore(std::span<const AccessTrace> traces, const CacheConfig& cfg,
                                    unsigned warmup_passes = 0) {
    CacheConfig c = cfg;
    c.cores = static_cast<unsigned>(traces.size());
    if (cfg.cores != 1 && cfg.cores != c.cores)
        throw invalid_spec_error("trace count does not match configured core count");
    CacheSim sim(c);
    for (unsigned i = 0; i < warmup_passes; ++i) sim.run_interleaved(traces);
    sim.reset_stats();
    sim.run_interleaved(traces);
    return sim.result();
}

// ----------------------------------------------------------------------
// Plain-text config format: "key = value" lines, '#' comments.

inline std::string to_text(const CacheConfig& c) {
    std::ostringstream os;
    os << "line_size = " << c.line_size << '\n'
       << "dram_latency = " << c.dram_latency << '\n';
    auto level = [&os](const char* name, const LevelConfig& l) {
        os << name << ".capacity = " << l.capacity_bytes << '\n'
           << name << ".associativity = " << l.associativity << '\n'
           << name << ".latency = " << l.hit_latency << '\n';
    };
    level("l1", c.l1);
    level("l2", c.l2);
    level("l3", c.l3);
    os << "prefetch.enabled = " << (c.prefetch.enabled ? 1 : 0) << '\n'
       << "prefetch.trigger = " << c.prefetch.trigger << '\n'
       << "prefetch.degree = " << c.prefetch.degree << '\n'
       << "prefetch.window = " << c.prefetch.window << '\n'
       << "prefetch.dram_threshold = " << c.prefetch.dram_threshold << '\n'
       << "l3_bypass = " << (c.l3_bypass ? 1 : 0) << '\n'
       << "cores = " << c.cores << '\n';
    return os.str();
}

inline CacheConfig parse_cache_config(std::istream& is) {
    CacheConfig c;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            bool blank = true;
            for (char ch : line)
                if (!std::isspace(static_cast<unsigned char>(ch))) blank = false;
            if (blank) continue;
            throw io_error("cache config line " + std::to_string(lineno) + ": expected key = value");
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "line_size") c.line_size = static_cast<unsigned>(std::stoul(value));
            else if (key == "dram_latency") c.dram_latency = static_cast<unsigned>(std::stoul(value));
            else if (key == "l1.capacity") c.l1.capacity_bytes = std::stoull(value);
            else if (key == "l1.associativity") c.l1.associativity = static_cast<unsigned>(std::stoul(value));
            else if (key == "l1.latency") c.l1.hit_latency = static_cast<unsigned>(std::stoul(value));
            else if (key == "l2.capacity") c.l2.capacity_bytes = std::stoull(value);
            else if (key == "l2.associativity") c.l2.associativity = static_cast<unsigned>(std::stoul(value));
            else if (key == "l2.latency") c.l2.hit_latency = static_cast<unsigned>(std::stoul(value));
            else if (key == "l3.capacity") c.l3.capacity_bytes = std::stoull(value);
            else if (key == "l3.associativity") c.l3.associativity = static_cast<unsigned>(std::stoul(value));
            else if (key == "l3.latency") c.l3.hit_latency = static_cast<unsigned>(std::stoul(value));
            else if (key == "prefetch.enabled") c.prefetch.enabled = std::stoul(value) != 0;
            else if (key == "prefetch.trigger") c.prefetch.trigger = static_cast<unsigned>(std::stoul(value));
            else if (key == "prefetch.degree") c.prefetch.degree = static_cast<unsigned>(std::stoul(value));
            else if (key == "prefetch.window") c.prefetch.window = static_cast<unsigned>(std::stoul(value));
            else if (key == "prefetch.dram_threshold") c.prefetch.dram_threshold = std::stod(value);
            else if (key == "l3_bypass") c.l3_bypass = std::stoul(value) != 0;
            else if (key == "cores") c.cores = static_cast<unsigned>(std::stoul(value));
            else throw io_error("cache config line " + std::to_string(lineno) + ": unknown key " + key);
        } catch (const std::invalid_argument&) {
            throw io_error("cache config line " + std::to_string(lineno) + ": bad value for " + key);
        } catch (const std::out_of_range&) {
            throw io_error("cache config line " + std::to_string(lineno) + ": value out of range for " + key);
        }
    }
    c.validate();
    return c;
}

inline CacheConfig load_cache_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot open cache config: " + path);
    return parse_cache_config(is);
}

namespace detail {
inline std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}
} // namespace detail

} // namespace spmvlab
