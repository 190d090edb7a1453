#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <vector>

#include "neurasim/compiler.hpp"
#include "neurasim/isa.hpp"
#include "neurasim/mapping.hpp"
#include "neurasim/noc.hpp"

namespace neura {

struct CoreParams {
  ComponentId id = 0;
  std::uint32_t pipelines = 2;
  std::uint32_t regs_per_pipeline = 4;  // 128-bit registers, pooled per core
  std::uint32_t multipliers = 2;
  std::uint32_t addr_generators = 1;
  std::uint32_t instr_buffer = 4;
  std::uint32_t decode_latency = 1;
  std::uint32_t addrgen_latency = 1;
  std::vector<ComponentId> mems;         // accumulation targets, indexed by map_tag
  std::vector<ComponentId> controllers;  // indexed by channel
};

struct CoreStats {
  std::uint64_t accepted = 0;
  std::uint64_t retired = 0;
  std::uint64_t multiplications = 0;
  std::uint64_t emitted = 0;  // HACC packets
  std::uint64_t requests = 0;
  std::uint64_t responses = 0;
  std::uint64_t register_stalls = 0;
  std::uint64_t busy = 0;
  std::uint64_t stall = 0;
  std::uint64_t idle = 0;
  std::uint64_t mmh_cpi_sum = 0;
  std::map<std::uint64_t, std::uint64_t> mmh_cpi_hist;
  std::vector<std::uint64_t> to_mem;  // HACCs sent per mem (heat-map row)
};

/// Registers one instruction needs: A values, B column indices, B values and
/// its counter block, each rounded up to whole 128-bit registers.
std::uint32_t registers_needed(const MmhInstruction& m);

/// Distinct 64-byte lines the instruction reads (A data, B column indices,
/// B data, counters), ascending.
std::vector<std::uint32_t> operand_lines(const MmhInstruction& m);

/// In-order multiply engine. Instructions are bound to a pipeline round-robin
/// when accepted; each pipeline walks DECODE (plus register allocation),
/// ADDR_GEN, FETCH, EXECUTE and EMIT, advancing at most one stage per cycle.
class NeuraCore {
 public:
  enum class Stage : std::uint8_t { DECODE, ADDR_GEN, FETCH, EXECUTE, EMIT };

  NeuraCore(CoreParams params, Endpoint& ep, const MemoryImage& image, const MappingPolicy& mapping);

  /// Dispatcher side (phase 2). False when the instruction buffer is full.
  bool accept(const MmhInstruction& m, std::uint32_t row_block, std::uint64_t cycle);

  void tick(std::uint64_t cycle);

  std::size_t buffered() const { return buffer_.size(); }
  bool idle() const;
  std::uint32_t free_registers() const { return free_regs_; }
  const CoreStats& stats() const { return stats_; }
  std::uint32_t pipeline_of_next() const { return rr_; }

  struct Slot {
    MmhInstruction instr;
    std::uint32_t row_block = 0;
    std::uint32_t pipeline = 0;
    std::uint64_t dispatched = 0;
  };
  const std::deque<Slot>& buffer() const { return buffer_; }

 private:
  struct Pipeline {
    bool busy = false;
    Slot slot;
    Stage stage = Stage::DECODE;
    std::uint64_t entered = 0;  // cycle the current stage began
    std::uint64_t serial = 0;
    std::uint32_t regs = 0;
    std::vector<std::uint32_t> lines;  // read requests still to issue
    std::uint32_t outstanding = 0;     // responses still missing (scoreboard)
    std::uint32_t lanes_left = 0;      // products still to compute
    std::vector<HaccInstruction> out;  // products ready to emit
    std::size_t next_out = 0;
  };

  void load(Pipeline& p, std::uint32_t index, std::uint64_t cycle);
  void build_products(Pipeline& p);

  CoreParams params_;
  Endpoint* ep_;
  const MemoryImage* image_;
  const MappingPolicy* mapping_;
  std::deque<Slot> buffer_;
  std::vector<Pipeline> pipes_;
  std::vector<std::uint64_t> gen_free_at_;
  std::uint32_t rr_ = 0;       // next pipeline for accept
  std::uint32_t mult_rr_ = 0;  // first pipeline served by the multipliers
  std::uint32_t free_regs_;
  std::uint64_t serial_ = 0;
  std::uint32_t active_ = 0;  // busy pipelines
  std::vector<Pipeline*> decoding_;
  CoreStats stats_;
};

}  // namespace neura
