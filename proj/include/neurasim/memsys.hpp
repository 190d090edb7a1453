#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <vector>

#include "neurasim/compiler.hpp"
#include "neurasim/config.hpp"
#include "neurasim/noc.hpp"

namespace neura {

/// Line-interleaved channel ownership: consecutive 64-byte lines go to
/// consecutive controllers.
inline std::uint32_t owning_channel(std::uint32_t addr, std::uint32_t channels) {
  return (addr / kLineBytes) % channels;
}

struct McParams {
  ComponentId id = 0;
  ChannelModel channel;
  std::uint32_t read_buffer = 32;
  std::uint32_t write_buffer = 32;
  std::uint32_t coalesce_window = 16;
};

struct McStats {
  std::uint64_t reads = 0;
  std::uint64_t writes = 0;
  std::uint64_t transactions = 0;
  std::uint64_t served_bytes = 0;
  std::uint64_t max_window_bytes = 0;  // largest byte count issued in any aligned 1000-cycle window
  std::uint64_t adjacent_picks = 0;    // transactions chosen for locality rather than age
  std::uint64_t busy = 0;
  std::uint64_t stall = 0;
  std::uint64_t idle = 0;
};

/// Read/write buffers, 64-byte coalescing over a window of W requests,
/// locality-aware issue, and a latency + bandwidth channel.
class MemoryController {
 public:
  static constexpr std::uint64_t kBandwidthWindow = 1000;

  MemoryController(McParams params, const MemoryImage& image);

  /// Accepts a MEM_READ_REQ or MEM_WRITE. Returns false when the matching
  /// buffer is full. Throws SimulationFault for addresses outside the image
  /// (reads) or the output region (writes).
  bool submit(const Packet& req);

  /// Retires finished transactions (read responses returned, one per
  /// coalesced requester; writes land in the output store) and issues at
  /// most one new transaction.
  std::vector<Packet> tick(std::uint64_t cycle);

  std::size_t inflight() const { return inflight_.size(); }
  std::size_t buffered_reads() const { return reads_.size(); }
  std::size_t buffered_writes() const { return writes_.size(); }
  bool idle() const { return reads_.empty() && writes_.empty() && inflight_.empty(); }
  bool issued_last_tick() const { return issued_; }

  const std::map<std::uint32_t, double>& output_store() const { return store_; }
  const McStats& stats() const { return stats_; }
  McStats& stats() { return stats_; }

 private:
  struct Transaction {
    bool write = false;
    std::uint64_t completion = 0;
    std::vector<Packet> requests;
  };
  bool issue_from(std::deque<Packet>& buf, bool write, std::uint64_t cycle);

  McParams params_;
  const MemoryImage* image_;
  std::deque<Packet> reads_;
  std::deque<Packet> writes_;
  std::deque<Transaction> inflight_;
  std::uint64_t bus_free_ = 0;
  std::int64_t last_line_ = -2;
  std::uint64_t window_start_ = 0;
  std::uint64_t window_bytes_ = 0;
  bool issued_ = false;
  std::map<std::uint32_t, double> store_;
  McStats stats_;
};

/// Controller plus its network endpoint: drains ingress into the buffers
/// (backpressure when full) and injects responses, at most one per port per
/// cycle, from an unbounded pending queue.
class MemoryControllerNode {
 public:
  MemoryControllerNode(McParams params, const MemoryImage& image, Endpoint& ep);

  void tick(std::uint64_t cycle);
  bool idle() const { return ctrl_.idle() && pending_.empty(); }
  const MemoryController& controller() const { return ctrl_; }
  MemoryController& controller() { return ctrl_; }
  std::size_t pending_responses() const { return pending_.size(); }

 private:
  MemoryController ctrl_;
  Endpoint* ep_;
  std::deque<Packet> pending_;
};

}  // namespace neura
