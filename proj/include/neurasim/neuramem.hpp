#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "neurasim/config.hpp"
#include "neurasim/isa.hpp"
#include "neurasim/noc.hpp"

namespace neura {

inline constexpr std::uint32_t kInternalHashMultiplier = 0x9E3779B1u;

struct HashLine {
  enum class State : std::uint8_t { EMPTY, OCCUPIED };
  State state = State::EMPTY;
  std::uint32_t tag = 0;
  double data = 0.0;
  std::uint16_t counter = 0;   // remaining contributions
  std::uint16_t initial = 0;   // counter carried by every HACC of this tag
  std::vector<std::uint64_t> created;  // creation cycle of each contribution
};

struct Eviction {
  std::uint32_t tag = 0;
  double value = 0.0;
  std::uint64_t cycle = 0;
  std::vector<std::uint64_t> created;
};

enum class HaccOutcome : std::uint8_t { INSERTED, ACCUMULATED, EVICTED, STALLED };

struct HaccResult {
  HaccOutcome outcome = HaccOutcome::STALLED;
  std::uint32_t slot = 0;
  std::uint32_t probes = 0;  // slots compared
  std::uint32_t cycles = 1;  // engine cycles spent: ceil(probes / comparators)
  bool completed = false;    // this contribution brought the counter to zero
  std::optional<Eviction> eviction;  // the tag's own completion (ROLLING)
  std::optional<Eviction> forced;    // a completed line displaced to make room (BARRIER)
};

/// Open-addressed accumulation store with linear probing. An engine compares
/// `comparators` slots per cycle starting at the tag's home index. Because
/// lines leave the pad as soon as they complete, a tag can sit further from
/// home than an empty slot in front of it, so every lookup covers the largest
/// displacement in use before it may insert. A miss takes the first empty
/// slot, or (BARRIER) displaces a completed line; a probe that runs past the
/// first comparator window simply costs more cycles. STALLED only happens
/// when every line holds an unfinished tag.
class HashPad {
 public:
  HashPad(std::uint32_t lines, std::uint32_t engines, std::uint32_t comparators, EvictionMode mode);

  std::uint32_t home_index(std::uint32_t tag) const;
  std::uint32_t bank_of(std::uint32_t tag) const { return home_index(tag) & (engines_ - 1); }

  /// Whether execute_hacc would make progress (anything but STALLED).
  bool can_execute(std::uint32_t tag) const;

  /// One HACC. Evictions are stamped with the cycle the probe
  /// finishes. Throws IntegrityError on counter disagreement or a
  /// contribution to a line that already reached zero.
  HaccResult execute_hacc(const HaccInstruction& h, std::uint64_t cycle,
                          std::uint64_t created_cycle = 0);

  /// Writes back every completed line (BARRIER); a no-op under ROLLING.
  std::vector<Eviction> barrier_flush(std::uint64_t cycle);

  /// Throws IntegrityError if any line still waits for contributions.
  void check_drained() const;

  std::uint32_t occupancy() const { return occupancy_; }
  std::uint32_t peak_occupancy() const { return peak_; }
  std::uint32_t size() const { return static_cast<std::uint32_t>(lines_.size()); }
  std::uint32_t completed_resident() const { return completed_; }
  std::uint32_t max_displacement() const { return max_disp_; }
  const HashLine& line(std::uint32_t i) const { return lines_[i]; }
  EvictionMode mode() const { return mode_; }

 private:
  Eviction take(std::uint32_t slot, std::uint64_t cycle);

  std::vector<HashLine> lines_;
  std::uint32_t shift_;
  std::uint32_t engines_;
  std::uint32_t probes_;
  EvictionMode mode_;
  std::uint32_t occupancy_ = 0;
  std::uint32_t peak_ = 0;
  std::uint32_t completed_ = 0;
  std::uint32_t max_disp_ = 0;  // furthest any line was placed from its home
};

/// Row block of an output tag: block_of_group[(tag / cols) / width].
struct TagBlocks {
  std::uint32_t cols = 1;
  std::uint32_t width = 4;
  std::vector<std::uint32_t> block_of_group;
  std::uint32_t blocks = 0;

  std::uint32_t block_of(std::uint32_t tag) const { return block_of_group[tag / cols / width]; }
};

struct MemParams {
  ComponentId id = 0;
  std::uint32_t hashlines = 4096;
  std::uint32_t engines = 2;
  std::uint32_t comparators = 1;
  EvictionMode mode = EvictionMode::ROLLING;
  std::uint32_t output_base = 0;
  std::vector<ComponentId> controllers;  // indexed by channel
  std::shared_ptr<const TagBlocks> blocks;  // optional: per-block completion counts
};

struct MemStats {
  std::uint64_t received = 0;  // HACCs executed
  std::uint64_t inserted = 0;
  std::uint64_t accumulated = 0;
  std::uint64_t evictions = 0;
  std::uint64_t forced_evictions = 0;
  std::uint64_t engine_stalls = 0;   // engine cycles lost to a blocked oldest HACC
  std::uint64_t probe_cycles = 0;    // extra engine cycles spent probing past one window
  std::uint64_t peak_writeback = 0;
  std::uint64_t busy = 0;
  std::uint64_t stall = 0;
  std::uint64_t idle = 0;
  double hacc_data_sum = 0.0;
  double evicted_sum = 0.0;
  std::uint64_t hacc_cpi_sum = 0;
  std::uint64_t hacc_cpi_count = 0;
  std::map<std::uint64_t, std::uint64_t> hacc_cpi_hist;
  std::vector<std::uint64_t> from_core;         // HACCs received per source core
  std::vector<std::uint32_t> completed_by_block;  // lines whose counter reached zero
};

/// NeuraMem: hash engines over a banked HashPad, fed from the ingress
/// buffer, writing evictions to the owning memory controller.
class NeuraMem {
 public:
  NeuraMem(MemParams params, Endpoint& ep, std::uint32_t n_cores);

  void tick(std::uint64_t cycle);
  /// Row-block barrier (phase 2). Completed lines go to the write-back queue.
  void barrier(std::uint64_t cycle);

  bool idle() const;
  const HashPad& pad() const { return pad_; }
  const MemStats& stats() const { return stats_; }
  std::size_t writeback_pending() const { return writeback_.size(); }

 private:
  void record(Eviction&& ev);
  void completed(std::uint32_t tag);

  MemParams params_;
  Endpoint* ep_;
  HashPad pad_;
  std::vector<std::uint64_t> engine_free_at_;
  std::deque<Packet> writeback_;
  MemStats stats_;
};

}  // namespace neura
