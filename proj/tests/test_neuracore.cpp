#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <vector>

#include "neurasim/neuracore.hpp"
#include "test_util.hpp"

using namespace neura;

namespace {

struct Emitted {
  std::uint64_t cycle;
  HaccInstruction h;
};

// Drives one core against an ideal memory that answers every read after
// `latency` cycles. Returns the HACCs in emission order.
struct Harness {
  Endpoint ep;
  MappingPolicy mapping{MappingKind::RING, 1};
  std::unique_ptr<NeuraCore> core;
  std::uint64_t latency;
  std::uint64_t cycle = 0;
  std::multimap<std::uint64_t, Packet> due;
  std::vector<Emitted> out;

  Harness(const CompiledWorkload& wl, CoreParams cp, std::uint64_t lat = 5) : latency(lat) {
    ep.ports.assign(4, BoundedQueue<Packet>(4));
    ep.ingress = BoundedQueue<Packet>(64);
    cp.id = 0;
    cp.mems = {10};
    cp.controllers = {11};
    core = std::make_unique<NeuraCore>(cp, ep, wl.image, mapping);
  }

  void step() {
    core->tick(cycle);
    for (auto& port : ep.ports) {
      port.commit();
      while (!port.empty()) {
        const Packet p = port.front();
        port.pop();
        if (p.kind == PacketKind::MEM_READ_REQ) {
          Packet r = p;
          r.kind = PacketKind::MEM_READ_RESP;
          r.dst = p.src;
          due.emplace(cycle + latency, r);
        } else {
          CHECK(p.kind == PacketKind::HACC);
          CHECK(p.dst == 10);
          out.push_back({cycle, p.hacc});
        }
      }
    }
    for (auto it = due.begin(); it != due.end() && it->first <= cycle;) {
      ep.ingress.push(it->second);
      it = due.erase(it);
    }
    ep.ingress.commit();
    ++cycle;
  }

  void run(std::uint64_t limit = 10000) {
    while ((!core->idle() || !due.empty()) && cycle < limit) step();
  }
};

CoreParams tile16_core() {
  const TileConfig cfg = preset("tile16");
  CoreParams cp;
  cp.pipelines = cfg.pipelines;
  cp.regs_per_pipeline = cfg.regs_per_pipeline;
  cp.multipliers = cfg.multipliers;
  cp.addr_generators = cfg.addr_generators;
  return cp;
}

}  // namespace

TEST_CASE("register demand rounds each operand group to 128-bit registers") {
  MmhInstruction m;
  m.width = 4;
  m.lane_mask_a = 0b1111;
  m.lane_mask_b = 0b1111;
  // 32 B of A, 16 B of column ids, 32 B of B, 32 B of counters
  CHECK(registers_needed(m) == 2 + 1 + 2 + 2);
  m.lane_mask_a = 0b0001;
  m.lane_mask_b = 0b0001;
  CHECK(registers_needed(m) == 4);
}

TEST_CASE("accept binds pipelines round-robin and rejects when full") {
  const auto wl = compile_spgemm(test::hand_a(), test::hand_b(), 4);
  CoreParams cp;
  cp.pipelines = 2;
  cp.instr_buffer = 3;
  Harness h(wl, cp);
  REQUIRE(h.core->accept(wl.instructions[0], 0, 0));
  REQUIRE(h.core->accept(wl.instructions[1], 0, 0));
  REQUIRE(h.core->accept(wl.instructions[0], 0, 0));
  CHECK(h.core->buffer()[0].pipeline == 0);
  CHECK(h.core->buffer()[1].pipeline == 1);
  CHECK(h.core->buffer()[2].pipeline == 0);
  CHECK_FALSE(h.core->accept(wl.instructions[1], 0, 0));
  CHECK(h.core->stats().accepted == 3);
}

TEST_CASE("single-lane MMH emits one HACC with the product") {
  const auto a = test::from_dense({{3}});
  const auto b = test::from_dense({{5}});
  const auto wl = compile_spgemm(a, b, 4);
  REQUIRE(wl.instructions.size() == 1);
  const std::uint64_t latency = 7;
  Harness h(wl, CoreParams{}, latency);
  REQUIRE(h.core->accept(wl.instructions[0], 0, 0));
  h.run();
  REQUIRE(h.out.size() == 1);
  CHECK(h.out[0].h.tag == 0);
  CHECK(h.out[0].h.data == 15.0);
  CHECK(h.out[0].h.counter == 0);
  // decode, memory round trip and one execute cycle at the least
  CHECK(h.out[0].cycle >= 1 + latency + 1);
  CHECK(h.core->stats().mmh_cpi_hist.size() == 1);
  CHECK(h.core->stats().retired == 1);
}

TEST_CASE("full 4x4 MMH with four ports emits 16 HACCs over four cycles") {
  // one A column of 4 nonzeros times one B row of 4: a single full-width tile
  const auto a = test::from_dense({{1}, {2}, {3}, {4}});
  const auto b = test::from_dense({{1, 2, 3, 4}});
  const auto wl = compile_spgemm(a, b, 4);
  REQUIRE(wl.instructions.size() == 1);
  REQUIRE(wl.instructions[0].lanes() == 16);
  Harness h(wl, tile16_core());
  REQUIRE(h.core->accept(wl.instructions[0], 0, 0));
  h.run();
  REQUIRE(h.out.size() == 16);
  std::map<std::uint64_t, int> per_cycle;
  for (auto& e : h.out) ++per_cycle[e.cycle];
  CHECK(per_cycle.size() == 4);
  for (auto [c, n] : per_cycle) CHECK(n == 4);
  // products and tags match the dense outer product
  for (auto& e : h.out) {
    const std::uint32_t r = e.h.tag / 4;
    const std::uint32_t c = e.h.tag % 4;
    CHECK(e.h.data == static_cast<double>((r + 1) * (c + 1)));
    CHECK(e.h.counter == 0);
  }
}

TEST_CASE("hand example stream: products match the interpreter and cycles are accounted") {
  const auto wl = compile_spgemm(test::hand_a(), test::hand_b(), 4);
  CoreParams cp;
  Harness h(wl, cp);
  std::size_t next = 0;
  while (next < wl.instructions.size() || !h.core->idle() || !h.due.empty()) {
    if (next < wl.instructions.size() && h.core->accept(wl.instructions[next], wl.row_block_of(next), h.cycle)) {
      ++next;
    }
    h.step();
    REQUIRE(h.cycle < 10000);
  }
  CHECK(h.out.size() == wl.expected_pp_count);
  std::map<std::uint32_t, double> sums;
  for (auto& e : h.out) sums[e.h.tag] += e.h.data;
  const auto want = test::dense_product(test::hand_a(), test::hand_b());
  for (auto [tag, v] : sums) CHECK(v == want[tag / 3][tag % 3]);
  const auto& s = h.core->stats();
  CHECK(s.busy + s.stall + s.idle == h.cycle);
  CHECK(s.requests == s.responses);
  CHECK(s.retired == wl.instructions.size());
  std::uint64_t sum = 0;
  for (auto [v, n] : s.mmh_cpi_hist) sum += n;
  CHECK(sum == wl.instructions.size());
}

TEST_CASE("a small register pool serializes decode and counts stalls") {
  const auto a = test::random_matrix(8, 8, 1.0, 1);
  const auto b = test::random_matrix(8, 8, 1.0, 2);
  const auto wl = compile_spgemm(a, b, 4);
  CoreParams cp;
  cp.pipelines = 2;
  cp.regs_per_pipeline = 4;  // pool of 8: one full tile (7 registers) at a time
  Harness h(wl, cp);
  std::size_t next = 0;
  while (next < wl.instructions.size() || !h.core->idle() || !h.due.empty()) {
    if (next < wl.instructions.size() && h.core->accept(wl.instructions[next], 0, h.cycle)) ++next;
    h.step();
    REQUIRE(h.cycle < 100000);
    CHECK(h.core->free_registers() <= 8);
  }
  CHECK(h.core->stats().register_stalls > 0);
  CHECK(h.out.size() == wl.expected_pp_count);
}
