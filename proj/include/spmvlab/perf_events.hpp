#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>

#include "spmvlab/errors.hpp"
#include "spmvlab/metrics.hpp"

#if defined(__linux__)
#include <linux/perf_event.h>
#include <sys/ioctl.h>
#include <sys/syscall.h>
#include <unistd.h>
#include <cstring>
#endif

namespace spmvlab {

/// Logical counter name -> platform event identifier. The defaults carry
/// the Sandy Bridge identifiers; other microarchitectures supply their own
/// mapping via a config file ("name = identifier" lines).
///
/// Recognized identifier forms:
///   INST_RETIRED.ANY / CPU_CLK_UNHALTED.THREAD   generalized hw events
///   MEM_LOAD_UOPS_RETIRED.L2_MISS etc.           known Sandy Bridge raw encodings
///   raw:0xUUEE[:cmask=N]                         explicit raw encoding
struct EventMap {
    std::map<std::string, std::string> events;

    static const std::array<const char*, 6>& logical_names() {
        static const std::array<const char*, 6> names = {
            "l2_demand_misses", "l3_demand_misses", "prefetch_l2_misses",
            "l2_stall_cycles",  "instructions",     "total_cycles"};
        return names;
    }

    static EventMap defaults() {
        EventMap m;
        m.events["l2_demand_misses"] = "MEM_LOAD_UOPS_RETIRED.L2_MISS";
        m.events["l3_demand_misses"] = "MEM_LOAD_UOPS_RETIRED.LLC_MISS";
        m.events["prefetch_l2_misses"] = "L2_RQSTS.PF_MISS";
        m.events["l2_stall_cycles"] = "CYCLE_ACTIVITY.STALL_CYCLES_L2_PENDING";
        m.events["instructions"] = "INST_RETIRED.ANY";
        m.events["total_cycles"] = "CPU_CLK_UNHALTED.THREAD";
        return m;
    }

    const std::string& platform_event(const std::string& logical) const {
        auto it = events.find(logical);
        if (it == events.end())
            throw capability_error("event map has no entry for logical counter '" + logical + "'");
        return it->second;
    }
};

inline EventMap parse_event_map(std::istream& is) {
    EventMap m = EventMap::defaults();
    std::string line;
    while (std::getline(is, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        if (!key.empty()) m.events[key] = trim(line.substr(eq + 1));
    }
    return m;
}

inline EventMap load_event_map(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot open event map: " + path);
    return parse_event_map(is);
}

#if defined(__linux__)

namespace detail {

struct PerfEventSpec {
    std::uint32_t type = 0;
    std::uint64_t config = 0;
};

/// Translate a platform identifier into a perf_event_open attribute.
inline PerfEventSpec resolve_platform_event(const std::string& id) {
    // Generalized events.
    if (id == "INST_RETIRED.ANY" || id == "hw:instructions")
        return {PERF_TYPE_HARDWARE, PERF_COUNT_HW_INSTRUCTIONS};
    if (id == "CPU_CLK_UNHALTED.THREAD" || id == "hw:cycles")
        return {PERF_TYPE_HARDWARE, PERF_COUNT_HW_CPU_CYCLES};

    // Sandy Bridge raw encodings (event | umask<<8 | cmask<<24).
    if (id == "MEM_LOAD_UOPS_RETIRED.L2_MISS") return {PERF_TYPE_RAW, 0x10d1};
    if (id == "MEM_LOAD_UOPS_RETIRED.LLC_MISS") return {PERF_TYPE_RAW, 0x20d1};
    if (id == "L2_RQSTS.PF_MISS") return {PERF_TYPE_RAW, 0x8024};
    if (id == "CYCLE_ACTIVITY.STALL_CYCLES_L2_PENDING")
        return {PERF_TYPE_RAW, 0x05a3 | (0x5ull << 24)};

    if (id.rfind("raw:", 0) == 0) {
        std::uint64_t config = 0;
        std::uint64_t cmask = 0;
        std::string body = id.substr(4);
        const auto colon = body.find(':');
        std::string hex = colon == std::string::npos ? body : body.substr(0, colon);
        if (colon != std::string::npos) {
            const std::string opt = body.substr(colon + 1);
            if (opt.rfind("cmask=", 0) == 0) cmask = std::stoull(opt.substr(6));
        }
        config = std::stoull(hex, nullptr, 16) | (cmask << 24);
        return {PERF_TYPE_RAW, config};
    }
    throw capability_error("unrecognized platform event identifier: " + id);
}

class PerfCounter {
public:
    PerfCounter(const std::string& logical, const std::string& platform) {
        const PerfEventSpec spec = resolve_platform_event(platform);
        perf_event_attr attr{};
        attr.size = sizeof(attr);
        attr.type = spec.type;
        attr.config = spec.config;
        attr.disabled = 1;
        attr.exclude_kernel = 1;
        attr.exclude_hv = 1;
        attr.inherit = 1; // sum counts of threads spawned inside the work unit
        attr.read_format = PERF_FORMAT_TOTAL_TIME_ENABLED | PERF_FORMAT_TOTAL_TIME_RUNNING;
        fd_ = static_cast<int>(
            syscall(SYS_perf_event_open, &attr, 0, -1, -1, 0));
        if (fd_ < 0)
            throw capability_error("perf_event_open failed for '" + logical + "' (" + platform +
                                   "): " + std::strerror(errno));
    }

    PerfCounter(const PerfCounter&) = delete;
    PerfCounter& operator=(const PerfCounter&) = delete;
    ~PerfCounter() {
        if (fd_ >= 0) close(fd_);
    }

    void start() {
        ioctl(fd_, PERF_EVENT_IOC_RESET, 0);
        ioctl(fd_, PERF_EVENT_IOC_ENABLE, 0);
    }

    void stop() { ioctl(fd_, PERF_EVENT_IOC_DISABLE, 0); }

    /// Multiplexing-scaled count.
    std::uint64_t read_scaled() const {
        struct {
            std::uint64_t value, enabled, running;
        } data{};
        if (read(fd_, &data, sizeof(data)) != sizeof(data))
            throw capability_error("failed reading perf counter");
        if (data.running == 0) return 0;
        if (data.running == data.enabled) return data.value;
        const double scale =
            static_cast<double>(data.enabled) / static_cast<double>(data.running);
        return static_cast<std::uint64_t>(static_cast<double>(data.value) * scale);
    }

private:
    int fd_ = -1;
};

} // namespace detail

/// Run the work unit with the six logical counters enabled around it only.
/// Throws capability_error (leaving no partial record) when the platform
/// cannot provide an event; callers treat that as "provider unavailable".
inline RawCounters collect_hardware(const std::function<void()>& work,
                                    const EventMap& map = EventMap::defaults()) {
    std::array<std::unique_ptr<detail::PerfCounter>, 6> counters;
    const auto& names = EventMap::logical_names();
    for (std::size_t i = 0; i < names.size(); ++i)
        counters[i] = std::make_unique<detail::PerfCounter>(names[i],
                                                            map.platform_event(names[i]));

    for (auto& c : counters) c->start();
    work();
    for (auto& c : counters) c->stop();

    RawCounters raw;
    raw.l2_demand_misses = counters[0]->read_scaled();
    raw.l3_demand_misses = counters[1]->read_scaled();
    raw.prefetch_l2_misses = counters[2]->read_scaled();
    raw.l2_stall_cycles = counters[3]->read_scaled();
    raw.instructions = counters[4]->read_scaled();
    raw.total_cycles = counters[5]->read_scaled();
    if (raw.l2_stall_cycles > raw.total_cycles) raw.l2_stall_cycles = raw.total_cycles;
    return raw;
}

inline bool hardware_counters_available() {
    try {
        detail::PerfCounter probe("probe", "hw:instructions");
        return true;
    } catch (const capability_error&) {
        return false;
    }
}

#else // !__linux__

inline RawCounters collect_hardware(const std::function<void()>&,
                                    const EventMap& = EventMap::defaults()) {
    throw capability_error("hardware counters are only supported on Linux (perf_event_open)");
}

inline bool hardware_counters_available() { return false; }

#endif

} // namespace spmvlab
