#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "neurasim/config.hpp"
#include "neurasim/isa.hpp"
#include "neurasim/queue.hpp"

namespace neura {

using ComponentId = std::uint32_t;

enum class PacketKind : std::uint8_t { MEM_READ_REQ, MEM_READ_RESP, MEM_WRITE, HACC };

struct Packet {
  PacketKind kind = PacketKind::HACC;
  ComponentId src = 0;
  ComponentId dst = 0;

  // memory traffic
  std::uint32_t addr = 0;
  std::uint16_t bytes = 0;
  std::uint16_t req_pipeline = 0;
  std::uint64_t req_serial = 0;
  double value = 0.0;  // write payload

  // HACC traffic
  HaccInstruction hacc;
  std::uint64_t created_cycle = 0;

  // network bookkeeping
  std::uint64_t injected_cycle = 0;
  std::uint64_t ready_cycle = 0;
  std::uint16_t min_hops = 0;
  std::uint16_t hops = 0;
};

enum Direction : std::uint8_t { NORTH = 0, EAST = 1, SOUTH = 2, WEST = 3 };

struct Coord {
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  bool operator==(const Coord&) const = default;
};

enum class ComponentKind : std::uint8_t { CORE, MEM, MC };

/// Router grid plus component attachment. Component ids are dense:
/// cores first, then mems, then memory controllers.
class Topology {
 public:
  Topology(std::uint32_t width, std::uint32_t height);

  /// Chip layout: tiles in a tile_grid_cols-wide grid, each tile a block of
  /// routers; cores on the tile's even (checkerboard) squares, mems on the
  /// odd ones, the memory controller sharing the last even square. Core i
  /// and mem i live on tile i % tiles.
  static Topology for_config(const TileConfig& cfg);

  ComponentId attach(ComponentKind kind, Coord where);

  std::uint32_t width() const { return width_; }
  std::uint32_t height() const { return height_; }
  std::uint32_t router_count() const { return width_ * height_; }
  std::uint32_t router_index(Coord c) const { return c.y * width_ + c.x; }
  Coord coord_of(std::uint32_t router) const { return {router % width_, router / width_}; }

  std::uint32_t component_count() const { return static_cast<std::uint32_t>(kinds_.size()); }
  ComponentKind kind(ComponentId id) const { return kinds_[id]; }
  std::uint32_t router_of(ComponentId id) const { return attach_[id]; }
  const std::vector<ComponentId>& attached(std::uint32_t router) const { return by_router_[router]; }
  std::vector<ComponentId> components(ComponentKind kind) const;

  std::uint32_t neighbor(std::uint32_t router, Direction d) const { return neighbors_[router][d]; }
  /// Minimal hop count on the torus.
  std::uint32_t distance(std::uint32_t from, std::uint32_t to) const;

 private:
  std::uint32_t width_;
  std::uint32_t height_;
  std::vector<ComponentKind> kinds_;
  std::vector<std::uint32_t> attach_;
  std::vector<std::vector<ComponentId>> by_router_;
  std::vector<std::array<std::uint32_t, 4>> neighbors_;
};

/// A component's view of the network: one injection queue per port and one
/// ingress queue the router ejects into.
struct Endpoint {
  std::vector<BoundedQueue<Packet>> ports;
  BoundedQueue<Packet> ingress;
  bool touched = false;  // component side pushed or popped this cycle; commit() looks only at these

  void send(int port, Packet p) {
    ports[static_cast<std::size_t>(port)].push(std::move(p));
    touched = true;
  }
  Packet receive() {
    Packet p = std::move(ingress.front());
    ingress.pop();
    touched = true;
    return p;
  }

  /// Least-occupied port that can take a packet this cycle and has not been
  /// used yet (bit i of used_mask); -1 if none.
  int pick_port(std::uint32_t used_mask) const;
};

struct NetworkParams {
  std::uint32_t buffer_capacity = 8;  // adaptive queue
  std::uint32_t escape_capacity = 2;  // escape queue, >= 2
  std::uint32_t port_capacity = 4;
  std::uint32_t ingress_capacity = 16;
  std::uint32_t hop_latency = 1;
  std::vector<std::uint32_t> ports_per_component;  // empty: 4 each
};

struct RouterStats {
  std::uint64_t forwarded = 0;
  std::uint64_t injected = 0;
  std::uint64_t delivered = 0;
  std::uint64_t latency_sum = 0;
  std::uint64_t latency_max = 0;
  std::uint64_t latency_violations = 0;
  std::uint64_t blocked = 0;  // ready head packets that could not move
  std::uint64_t escaped = 0;  // hops taken through escape queues
};

/// 2D torus of routers with bounded input buffers and minimal adaptive
/// routing. Every input side holds an adaptive queue and a small escape
/// queue. A head packet first tries the minimal hops into the neighbors'
/// adaptive queues (most free slots wins, X on ties); failing that it takes
/// the dimension-order hop into the escape queue under the bubble rule. The
/// escape queues alone form a deadlock-free network, so adaptive cycles can
/// always drain through them.
///
/// Each router's input queues on side d are filled only by the neighbor on
/// that side, and every queue has one producer and one consumer, so routers
/// can be ticked in parallel within a cycle.
class Network {
 public:
  Network(Topology topo, NetworkParams params);
  Network(const Network&) = delete;  // router input lists point into the queues
  Network& operator=(const Network&) = delete;

  const Topology& topology() const { return topo_; }
  Endpoint& endpoint(ComponentId id) { return endpoints_[id]; }
  const Endpoint& endpoint(ComponentId id) const { return endpoints_[id]; }

  /// Phase 1: arbitrate and move packets out of this router's inputs.
  void route_step(std::uint32_t router, std::uint64_t cycle);
  /// Phase 2: make this cycle's pushes visible.
  void commit();

  const RouterStats& stats(std::uint32_t router) const { return stats_[router]; }
  RouterStats totals() const;
  std::uint64_t in_network() const;  // packets inside router buffers
  std::uint64_t waiting_injection() const;
  std::uint64_t waiting_ingress() const;
  bool idle() const { return in_network() == 0 && waiting_injection() == 0 && waiting_ingress() == 0; }

  enum Lane : std::uint8_t { ADAPTIVE = 0, ESCAPE = 1 };
  std::size_t buffer_occupancy(std::uint32_t router, Direction side, Lane lane = ADAPTIVE) const {
    return inputs_[router][side][lane].size();
  }

 private:
  struct Input {
    BoundedQueue<Packet>* q;
    int side;  // -1 for injection
    Lane lane;
  };
  struct Hop {
    int dir = -1;
    Lane lane = ADAPTIVE;
  };
  Hop choose_hop(std::uint32_t router, const Packet& p, int from_side, Lane from_lane,
                 const std::array<bool, 4>& used);

  Topology topo_;
  NetworkParams params_;
  std::vector<Endpoint> endpoints_;
  // [router][side it arrived from][lane]
  std::vector<std::array<std::array<BoundedQueue<Packet>, 2>, 4>> inputs_;
  std::vector<RouterStats> stats_;
  std::vector<std::vector<Input>> router_inputs_;  // arbitration order
  struct Dirty {
    BoundedQueue<Packet>* q;
    std::int64_t owner;  // router whose input this is, -1 for an ingress
  };
  std::vector<std::vector<Dirty>> dirty_;  // per router: queues it pushed or popped
  std::vector<std::uint8_t> busy_;         // router may hold packets; cleared by the router itself
};

}  // namespace neura
