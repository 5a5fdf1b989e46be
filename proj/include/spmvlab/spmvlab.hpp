#pragma once

// Umbrella header: matrix generation, CSR kernels, the trace-driven cache
// simulator, counter providers, derived metrics, and the benchmark harness.

#include "spmvlab/errors.hpp"
#include "spmvlab/rng.hpp"
#include "spmvlab/gen.hpp"
#include "spmvlab/csr.hpp"
#include "spmvlab/csr_io.hpp"
#include "spmvlab/trace.hpp"
#include "spmvlab/cache_sim.hpp"
#include "spmvlab/metrics.hpp"
#include "spmvlab/perf_events.hpp"
#include "spmvlab/bench.hpp"
