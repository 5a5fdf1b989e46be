// Generates one structured (FD9) and one unstructured (R-MAT) matrix of the
// same scale, runs both traces through the desk-scale hierarchy, and prints
// the resulting miss rates side by side.

#include <cstdio>

#include <spmvlab/spmvlab.hpp>

int main() {
    using namespace spmvlab;

    const int scale = 12;
    const CacheConfig cfg = CacheConfig::desk();

    std::printf("%-6s %10s %14s %14s %14s\n", "kind", "nnz", "l2_miss_rate", "l3_miss_rate",
                "pf_miss_rate");
    for (const GenSpec spec : {GenSpec::rmat(scale, 42), GenSpec::fd9(scale)}) {
        const CsrMatrix a = from_triplets(generate(spec));
        const AccessTrace trace = trace_spmv(a);
        const SimResult r = simulate(trace, cfg, /*warmup_passes=*/1);
        const RawCounters raw = simulated_counters(r);
        std::printf("%-6s %10llu %14.3f %14.3f %14.3f\n", to_string(spec.kind),
                    static_cast<unsigned long long>(a.nnz()), l2_miss_rate(raw),
                    l3_miss_rate(raw), prefetch_miss_rate(raw));
    }
    return 0;
}
