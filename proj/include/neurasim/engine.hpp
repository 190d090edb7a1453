#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "neurasim/compiler.hpp"
#include "neurasim/config.hpp"
#include "neurasim/memsys.hpp"
#include "neurasim/noc.hpp"
#include "neurasim/sparse.hpp"

namespace neura {

using Histogram = std::map<std::uint64_t, std::uint64_t>;  // value -> count, bin width 1

struct Activity {
  std::string name;  // core3, mem0, mc1
  std::uint64_t busy = 0;
  std::uint64_t stall = 0;
  std::uint64_t idle = 0;
};

struct TraceSample {
  std::uint64_t cycle = 0;
  std::uint64_t dispatched = 0;
  std::uint64_t haccs_emitted = 0;
  std::uint64_t mem_inflight = 0;    // channel transactions in flight
  std::uint64_t mem_buffered = 0;    // requests waiting in controller buffers
  std::uint64_t hashpad_occupancy = 0;
  std::uint64_t in_network = 0;
};

struct MetricsReport {
  std::string preset;
  std::string mapping;
  std::string eviction;
  std::uint32_t mmh_width = 4;
  std::uint64_t seed = 0;
  std::uint32_t output_rows = 0;
  std::uint32_t output_cols = 0;
  std::uint64_t instructions = 0;
  std::uint64_t row_blocks = 0;

  std::uint64_t total_cycles = 0;
  std::uint64_t expected_pp = 0;
  std::uint64_t expected_nnz = 0;
  std::uint64_t haccs_emitted = 0;
  std::uint64_t haccs_received = 0;
  std::uint64_t evictions = 0;
  std::uint64_t forced_evictions = 0;
  std::uint64_t writes_landed = 0;
  double hacc_data_sum = 0.0;
  double evicted_sum = 0.0;
  double frequency_ghz = 1.0;
  double gops = 0.0;

  Histogram mmh_cpi;
  Histogram hacc_cpi;
  double mean_mmh_cpi = 0.0;
  double mean_hacc_cpi = 0.0;

  std::uint64_t peak_hashpad_occupancy = 0;  // all pads together
  double mean_hashpad_occupancy = 0.0;       // time average, all pads together
  std::uint64_t engine_stalls = 0;
  std::uint64_t probe_cycles = 0;  // hash-engine cycles spent probing past one window
  std::uint64_t register_stalls = 0;
  std::uint64_t dispatch_holds = 0;  // cycles the dispatcher waited on the open-tag budget

  std::vector<Activity> activity;
  std::vector<std::vector<std::uint64_t>> heatmap;  // [core][mem] HACC count
  std::vector<std::uint64_t> multiplications;       // per core
  std::vector<std::uint64_t> accumulations;         // per mem, HACCs executed

  RouterStats network;
  std::vector<RouterStats> routers;
  std::vector<McStats> controllers;
  std::uint64_t peak_mem_inflight = 0;

  std::vector<TraceSample> trace;
};

struct RunOptions {
  unsigned threads = 1;             // phase-1 workers; results do not depend on it
  std::uint64_t trace_interval = 1;  // 0 disables the trace
};

struct RunResult {
  SparseMatrix output;  // CSR
  MetricsReport metrics;
};

/// Cycle-level execution of a compiled workload on the configured chip.
/// Throws DeadlockError when the watchdog sees no progress, IntegrityError
/// when a conservation check fails, SimulationFault on a bad address and
/// ConfigError for an invalid config.
RunResult run(const CompiledWorkload& wl, const TileConfig& cfg, std::uint64_t seed,
              const RunOptions& opts = {});

/// metrics.json content; keys in fixed order, numbers in shortest round-trip form.
std::string metrics_json(const MetricsReport& m);

/// metrics.json, cpi_mmh.csv, cpi_hacc.csv, trace.csv, heatmap_work.csv,
/// mapping_heatmap.csv, activity.csv and routers.csv. Returns the file names written.
std::vector<std::string> write_metrics(const MetricsReport& m, const std::filesystem::path& dir);

}  // namespace neura
