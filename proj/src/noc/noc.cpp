#include "neurasim/noc.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace neura {

namespace {

Direction opposite(Direction d) { return static_cast<Direction>((d + 2) % 4); }

}  // namespace

Topology::Topology(std::uint32_t width, std::uint32_t height)
    : width_(width), height_(height), by_router_(static_cast<std::size_t>(width) * height) {
  if (width == 0 || height == 0) throw std::invalid_argument("torus dimensions must be positive");
  neighbors_.resize(by_router_.size());
  for (std::uint32_t r = 0; r < router_count(); ++r) {
    const Coord c = coord_of(r);
    neighbors_[r][NORTH] = router_index({c.x, (c.y + height_ - 1) % height_});
    neighbors_[r][SOUTH] = router_index({c.x, (c.y + 1) % height_});
    neighbors_[r][EAST] = router_index({(c.x + 1) % width_, c.y});
    neighbors_[r][WEST] = router_index({(c.x + width_ - 1) % width_, c.y});
  }
}

ComponentId Topology::attach(ComponentKind kind, Coord where) {
  if (where.x >= width_ || where.y >= height_) throw std::out_of_range("attachment outside the torus");
  const auto id = static_cast<ComponentId>(kinds_.size());
  kinds_.push_back(kind);
  attach_.push_back(router_index(where));
  by_router_[router_index(where)].push_back(id);
  return id;
}

Topology Topology::for_config(const TileConfig& cfg) {
  const std::uint32_t tw = cfg.tile_router_cols;
  const std::uint32_t th = cfg.routers_per_tile / tw;
  const std::uint32_t grid_rows = cfg.tiles / cfg.tile_grid_cols;
  Topology topo(cfg.tile_grid_cols * tw, grid_rows * th);

  // Checkerboard squares of one tile in row-major order.
  std::vector<Coord> even, odd;
  for (std::uint32_t ly = 0; ly < th; ++ly) {
    for (std::uint32_t lx = 0; lx < tw; ++lx) ((lx + ly) % 2 == 0 ? even : odd).push_back({lx, ly});
  }
  if (cfg.cores_per_tile > even.size() || cfg.mems_per_tile > odd.size()) {
    throw std::invalid_argument("tile has too few router squares for its components");
  }
  auto place = [&](std::uint32_t tile, Coord local) {
    const std::uint32_t tx = tile % cfg.tile_grid_cols;
    const std::uint32_t ty = tile / cfg.tile_grid_cols;
    return Coord{tx * tw + local.x, ty * th + local.y};
  };
  for (std::uint32_t i = 0; i < cfg.cores(); ++i) {
    topo.attach(ComponentKind::CORE, place(i % cfg.tiles, even[i / cfg.tiles]));
  }
  for (std::uint32_t i = 0; i < cfg.mems(); ++i) {
    topo.attach(ComponentKind::MEM, place(i % cfg.tiles, odd[i / cfg.tiles]));
  }
  for (std::uint32_t t = 0; t < cfg.tiles; ++t) topo.attach(ComponentKind::MC, place(t, even.back()));
  return topo;
}

std::vector<ComponentId> Topology::components(ComponentKind kind) const {
  std::vector<ComponentId> out;
  for (ComponentId id = 0; id < kinds_.size(); ++id) {
    if (kinds_[id] == kind) out.push_back(id);
  }
  return out;
}

std::uint32_t Topology::distance(std::uint32_t from, std::uint32_t to) const {
  const Coord a = coord_of(from);
  const Coord b = coord_of(to);
  const std::uint32_t fx = (b.x + width_ - a.x) % width_;
  const std::uint32_t fy = (b.y + height_ - a.y) % height_;
  return std::min(fx, width_ - fx) + std::min(fy, height_ - fy);
}

int Endpoint::pick_port(std::uint32_t used_mask) const {
  int best = -1;
  std::size_t best_occ = 0;
  for (std::size_t i = 0; i < ports.size(); ++i) {
    if ((used_mask >> i & 1u) || !ports[i].can_push()) continue;
    const std::size_t occ = ports[i].occupancy_snapshot() + ports[i].staged();
    if (best < 0 || occ < best_occ) {
      best = static_cast<int>(i);
      best_occ = occ;
    }
  }
  return best;
}

Network::Network(Topology topo, NetworkParams params)
    : topo_(std::move(topo)), params_(std::move(params)) {
  const auto n = topo_.component_count();
  if (!params_.ports_per_component.empty() && params_.ports_per_component.size() != n) {
    throw std::invalid_argument("ports_per_component must list every component");
  }
  endpoints_.resize(n);
  for (ComponentId id = 0; id < n; ++id) {
    const std::uint32_t ports =
        params_.ports_per_component.empty() ? 4 : params_.ports_per_component[id];
    endpoints_[id].ports.assign(ports, BoundedQueue<Packet>(params_.port_capacity));
    endpoints_[id].ingress = BoundedQueue<Packet>(params_.ingress_capacity);
  }
  inputs_.resize(topo_.router_count());
  if (params_.escape_capacity < 2) throw std::invalid_argument("escape queues need at least 2 slots");
  for (auto& sides : inputs_) {
    for (auto& lanes : sides) {
      lanes[ADAPTIVE] = BoundedQueue<Packet>(params_.buffer_capacity);
      lanes[ESCAPE] = BoundedQueue<Packet>(params_.escape_capacity);
    }
  }
  stats_.resize(topo_.router_count());

  // Input order: four sides (adaptive, escape), then every port of every
  // attached component.
  router_inputs_.resize(topo_.router_count());
  dirty_.resize(topo_.router_count());
  busy_.assign(topo_.router_count(), 0);
  for (std::uint32_t r = 0; r < topo_.router_count(); ++r) {
    auto& list = router_inputs_[r];
    for (int s = 0; s < 4; ++s) {
      list.push_back({&inputs_[r][s][ADAPTIVE], s, ADAPTIVE});
      list.push_back({&inputs_[r][s][ESCAPE], s, ESCAPE});
    }
    for (ComponentId id : topo_.attached(r)) {
      for (auto& port : endpoints_[id].ports) list.push_back({&port, -1, ADAPTIVE});
    }
  }
}

Network::Hop Network::choose_hop(std::uint32_t router, const Packet& p, int from_side, Lane from_lane,
                                 const std::array<bool, 4>& used) {
  const Coord here = topo_.coord_of(router);
  const Coord dst = topo_.coord_of(topo_.router_of(p.dst));
  const std::uint32_t w = topo_.width();
  const std::uint32_t h = topo_.height();

  // Minimal directions, X first; on a torus tie the + direction.
  Direction cand[2] = {EAST, EAST};
  int n = 0;
  const std::uint32_t fx = (dst.x + w - here.x) % w;
  if (fx != 0) cand[n++] = fx <= w - fx ? EAST : WEST;
  const std::uint32_t fy = (dst.y + h - here.y) % h;
  if (fy != 0) cand[n++] = fy <= h - fy ? SOUTH : NORTH;

  Hop best;
  std::size_t best_free = 0;
  for (int i = 0; i < n; ++i) {
    const Direction d = cand[i];
    if (used[d]) continue;
    const std::size_t free = inputs_[topo_.neighbor(router, d)][opposite(d)][ADAPTIVE].free_slots();
    if (free > best_free) {
      best.dir = d;
      best_free = free;
    }
  }
  if (best.dir >= 0) return best;

  // Escape: dimension order, bubble rule. Entering an escape ring (from
  // injection, from an adaptive queue or by turning) must leave a free slot.
  const Direction d = cand[0];
  if (used[d]) return {};
  const bool same_ring = from_lane == ESCAPE && from_side >= 0 && opposite(static_cast<Direction>(from_side)) == d;
  const std::size_t need = same_ring ? 1 : 2;
  if (inputs_[topo_.neighbor(router, d)][opposite(d)][ESCAPE].free_slots() < need) return {};
  return {d, ESCAPE};
}

void Network::route_step(std::uint32_t router, std::uint64_t cycle) {
  auto& st = stats_[router];
  const auto& local = topo_.attached(router);
  std::array<bool, 4> used{};
  // Ejections per attached component this cycle, limited to its port count.
  std::array<std::uint32_t, 8> ejected{};

  if (!busy_[router]) return;
  const auto& inputs = router_inputs_[router];
  if (std::all_of(inputs.begin(), inputs.end(), [](const Input& in) { return in.q->empty(); })) {
    busy_[router] = 0;
    return;
  }
  const std::size_t n_inputs = inputs.size();
  const std::size_t start = cycle % n_inputs;
  for (std::size_t i = 0; i < n_inputs; ++i) {
    const Input& in = inputs[(start + i) % n_inputs];
    if (in.q->empty()) continue;
    Packet& p = in.q->front();
    if (p.ready_cycle > cycle) continue;
    const bool entering = in.side < 0;
    const std::uint32_t dst_router = topo_.router_of(p.dst);

    if (dst_router == router) {
      std::size_t slot = 0;
      while (slot < local.size() && local[slot] != p.dst) ++slot;
      auto& ep = endpoints_[p.dst];
      if (slot >= ejected.size() || ejected[slot] >= ep.ports.size() || !ep.ingress.can_push()) {
        ++st.blocked;
        continue;
      }
      ++ejected[slot];
      if (entering) {
        p.injected_cycle = cycle;
        p.min_hops = 0;
        ++st.injected;
      }
      const std::uint64_t latency = cycle - p.injected_cycle;
      ++st.delivered;
      st.latency_sum += latency;
      st.latency_max = std::max(st.latency_max, latency);
      if (latency < static_cast<std::uint64_t>(p.min_hops) * params_.hop_latency) ++st.latency_violations;
      p.ready_cycle = cycle + 1;
      ep.ingress.push(std::move(p));
      in.q->pop();
      dirty_[router].push_back({&ep.ingress, -1});
      dirty_[router].push_back({in.q, router});
      continue;
    }

    const Hop hop = choose_hop(router, p, in.side, in.lane, used);
    if (hop.dir < 0) {
      ++st.blocked;
      continue;
    }
    const auto d = static_cast<Direction>(hop.dir);
    used[d] = true;
    if (entering) {
      p.injected_cycle = cycle;
      p.min_hops = static_cast<std::uint16_t>(topo_.distance(router, dst_router));
      ++st.injected;
    }
    ++p.hops;
    p.ready_cycle = cycle + params_.hop_latency;
    ++st.forwarded;
    if (hop.lane == ESCAPE) ++st.escaped;
    auto& next = inputs_[topo_.neighbor(router, d)][opposite(d)][hop.lane];
    next.push(std::move(p));
    in.q->pop();
    dirty_[router].push_back({&next, topo_.neighbor(router, d)});
    dirty_[router].push_back({in.q, router});
  }
}

// Only queues somebody pushed or popped this cycle can change.
void Network::commit() {
  for (auto& list : dirty_) {
    for (auto [q, owner] : list) {
      q->commit();
      if (owner >= 0 && !q->empty()) busy_[static_cast<std::size_t>(owner)] = 1;
    }
    list.clear();
  }
  for (ComponentId id = 0; id < endpoints_.size(); ++id) {
    auto& ep = endpoints_[id];
    if (!ep.touched) continue;
    for (auto& port : ep.ports) {
      port.commit();
      if (!port.empty()) busy_[topo_.router_of(id)] = 1;
    }
    ep.ingress.commit();
    ep.touched = false;
  }
}

RouterStats Network::totals() const {
  RouterStats t;
  for (const auto& s : stats_) {
    t.forwarded += s.forwarded;
    t.injected += s.injected;
    t.delivered += s.delivered;
    t.latency_sum += s.latency_sum;
    t.latency_max = std::max(t.latency_max, s.latency_max);
    t.latency_violations += s.latency_violations;
    t.blocked += s.blocked;
    t.escaped += s.escaped;
  }
  return t;
}

std::uint64_t Network::in_network() const {
  std::uint64_t n = 0;
  for (const auto& sides : inputs_) {
    for (const auto& lanes : sides) {
      for (const auto& q : lanes) n += q.size() + q.staged();
    }
  }
  return n;
}

std::uint64_t Network::waiting_injection() const {
  std::uint64_t n = 0;
  for (const auto& ep : endpoints_) {
    for (const auto& port : ep.ports) n += port.size() + port.staged();
  }
  return n;
}

std::uint64_t Network::waiting_ingress() const {
  std::uint64_t n = 0;
  for (const auto& ep : endpoints_) n += ep.ingress.size() + ep.ingress.staged();
  return n;
}

}  // namespace neura
