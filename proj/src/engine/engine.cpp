#include "neurasim/engine.hpp"

#include <algorithm>
#include <barrier>
#include <cmath>
#include <exception>
#include <memory>
#include <sstream>
#include <thread>

#include "neurasim/errors.hpp"
#include "neurasim/mapping.hpp"
#include "neurasim/neuracore.hpp"
#include "neurasim/neuramem.hpp"

namespace neura {

namespace {

/// Runs n independent tasks per phase on a fixed set of workers. Tasks are
/// split into contiguous chunks by index; the calling thread takes chunk 0.
template <typename Task>
class PhaseRunner {
 public:
  PhaseRunner(unsigned threads, std::size_t n_tasks, Task task)
      : threads_(std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, n_tasks))))),
        n_(n_tasks),
        task_(std::move(task)),
        errors_(threads_),
        sync_(threads_) {
    for (unsigned w = 1; w < threads_; ++w) {
      workers_.emplace_back([this, w] {
        for (;;) {
          sync_.arrive_and_wait();
          if (stop_) return;
          chunk(w);
          sync_.arrive_and_wait();
        }
      });
    }
  }

  ~PhaseRunner() {
    if (threads_ > 1) {
      stop_ = true;
      sync_.arrive_and_wait();
    }
  }

  void run() {
    if (threads_ == 1) {
      for (std::size_t i = 0; i < n_; ++i) task_(i);
      return;
    }
    sync_.arrive_and_wait();
    chunk(0);
    sync_.arrive_and_wait();
    // lowest worker first, so the reported error does not depend on timing
    for (auto& e : errors_) {
      if (e) {
        auto err = e;
        for (auto& x : errors_) x = nullptr;
        std::rethrow_exception(err);
      }
    }
  }

 private:
  void chunk(unsigned w) {
    const std::size_t lo = n_ * w / threads_;
    const std::size_t hi = n_ * (w + 1) / threads_;
    try {
      for (std::size_t i = lo; i < hi; ++i) task_(i);
    } catch (...) {
      errors_[w] = std::current_exception();
    }
  }

  unsigned threads_;
  std::size_t n_;
  Task task_;
  std::vector<std::exception_ptr> errors_;
  std::barrier<> sync_;
  bool stop_ = false;
  std::vector<std::jthread> workers_;
};

double mean_of(const Histogram& h) {
  std::uint64_t n = 0;
  long double s = 0;
  for (auto [v, c] : h) {
    n += c;
    s += static_cast<long double>(v) * c;
  }
  return n == 0 ? 0.0 : static_cast<double>(s / n);
}

}  // namespace

RunResult run(const CompiledWorkload& wl, const TileConfig& cfg, std::uint64_t seed,
              const RunOptions& opts) {
  cfg.validate();
  if (wl.mmh_width != cfg.mmh_width) {
    throw ConfigError("mmh_width", "workload compiled for width " + std::to_string(wl.mmh_width) +
                                       " but config says " + std::to_string(cfg.mmh_width));
  }
  const MemoryImage& image = wl.image;

  Topology topo = Topology::for_config(cfg);
  const auto core_ids = topo.components(ComponentKind::CORE);
  const auto mem_ids = topo.components(ComponentKind::MEM);
  const auto mc_ids = topo.components(ComponentKind::MC);

  NetworkParams np;
  np.buffer_capacity = cfg.router_buffer;
  np.escape_capacity = cfg.escape_buffer;
  np.port_capacity = cfg.port_buffer;
  np.ingress_capacity = cfg.ingress_buffer;
  np.hop_latency = cfg.hop_latency;
  np.ports_per_component.resize(topo.component_count());
  for (auto id : core_ids) np.ports_per_component[id] = cfg.core_ports;
  for (auto id : mem_ids) np.ports_per_component[id] = cfg.mem_ports;
  for (auto id : mc_ids) np.ports_per_component[id] = cfg.mc_ports;
  Network net(topo, np);
  // NeuraMem buffers its own ingress depth.
  for (auto id : mem_ids) net.endpoint(id).ingress = BoundedQueue<Packet>(cfg.mem_ingress);

  MappingPolicy mapping(cfg.mapping, static_cast<std::uint32_t>(mem_ids.size()), cfg.drhm_k, seed,
                        std::max<std::uint32_t>(1, image.output_cols));

  std::vector<std::unique_ptr<NeuraCore>> cores;
  for (auto id : core_ids) {
    CoreParams cp;
    cp.id = id;
    cp.pipelines = cfg.pipelines;
    cp.regs_per_pipeline = cfg.regs_per_pipeline;
    cp.multipliers = cfg.multipliers;
    cp.addr_generators = cfg.addr_generators;
    cp.instr_buffer = cfg.instr_buffer;
    cp.decode_latency = cfg.decode_latency;
    cp.addrgen_latency = cfg.addrgen_latency;
    cp.mems = mem_ids;
    cp.controllers = mc_ids;
    cores.push_back(std::make_unique<NeuraCore>(cp, net.endpoint(id), image, mapping));
  }
  // Output tags per row block, and the block each tag belongs to, for the
  // dispatcher's open-tag budget.
  auto blocks = std::make_shared<TagBlocks>();
  std::vector<std::uint32_t> block_tags(wl.row_block_count(), 0);
  {
    const std::uint32_t w = std::max<std::uint32_t>(1, wl.mmh_width);
    const std::uint32_t ncols = std::max<std::uint32_t>(1, image.output_cols);
    blocks->cols = ncols;
    blocks->width = w;
    blocks->blocks = static_cast<std::uint32_t>(wl.row_block_count());
    blocks->block_of_group.assign((image.output_rows + w - 1) / w + 1, 0);
    std::vector<std::uint8_t> seen(static_cast<std::size_t>(w) * ncols, 0);
    std::vector<std::uint32_t> touched;
    for (std::size_t b = 0; b < wl.row_block_count(); ++b) {
      const std::size_t lo = wl.row_block_boundaries[b];
      const std::size_t hi = b + 1 < wl.row_block_count() ? wl.row_block_boundaries[b + 1] : wl.instructions.size();
      for (std::size_t i = lo; i < hi; ++i) {
        const auto& in = wl.instructions[i];
        const std::uint32_t group = in.a_row_ids[0] / w;
        blocks->block_of_group[group] = static_cast<std::uint32_t>(b);
        for (int a = 0; a < in.lanes_a(); ++a) {
          for (int j = 0; j < in.lanes_b(); ++j) {
            const std::uint32_t col = image.read_u32(in.base_addr + in.b_col_ind_addr + j * 4);
            const std::uint32_t k = (in.a_row_ids[a] - group * w) * ncols + col;
            if (!seen[k]) {
              seen[k] = 1;
              touched.push_back(k);
            }
          }
        }
      }
      block_tags[b] = static_cast<std::uint32_t>(touched.size());
      for (auto k : touched) seen[k] = 0;
      touched.clear();
    }
  }

  std::vector<std::unique_ptr<NeuraMem>> mems;
  for (auto id : mem_ids) {
    MemParams mp;
    mp.id = id;
    mp.hashlines = cfg.hashlines;
    mp.engines = cfg.engines;
    mp.comparators = cfg.comparators;
    mp.mode = cfg.eviction;
    mp.blocks = blocks;
    mp.output_base = image.output_base;
    mp.controllers = mc_ids;
    mems.push_back(std::make_unique<NeuraMem>(mp, net.endpoint(id), static_cast<std::uint32_t>(core_ids.size())));
  }
  std::vector<std::unique_ptr<MemoryControllerNode>> mcs;
  for (std::uint32_t ch = 0; ch < mc_ids.size(); ++ch) {
    McParams mp;
    mp.id = mc_ids[ch];
    mp.channel = cfg.channel;
    mp.read_buffer = cfg.mc_read_buffer;
    mp.write_buffer = cfg.mc_write_buffer;
    mp.coalesce_window = cfg.coalesce_window;
    mcs.push_back(std::make_unique<MemoryControllerNode>(mp, image, net.endpoint(mc_ids[ch])));
  }

  std::uint64_t cycle = 0;
  const std::size_t n_routers = topo.router_count();
  const std::size_t n_tasks = n_routers + cores.size() + mems.size() + mcs.size();
  PhaseRunner phase1(opts.threads, n_tasks, [&](std::size_t i) {
    if (i < n_routers) return net.route_step(static_cast<std::uint32_t>(i), cycle);
    i -= n_routers;
    if (i < cores.size()) return cores[i]->tick(cycle);
    i -= cores.size();
    if (i < mems.size()) return mems[i]->tick(cycle);
    i -= mems.size();
    mcs[i]->tick(cycle);
  });

  MetricsReport m;
  m.preset = cfg.preset;
  m.mapping = std::string(to_string(cfg.mapping));
  m.eviction = std::string(to_string(cfg.eviction));
  m.mmh_width = cfg.mmh_width;
  m.seed = seed;
  m.output_rows = image.output_rows;
  m.output_cols = image.output_cols;
  m.instructions = wl.instructions.size();
  m.row_blocks = wl.row_block_count();
  m.expected_pp = wl.expected_pp_count;
  m.expected_nnz = wl.expected_output_nnz;
  m.frequency_ghz = cfg.frequency_ghz;

  std::size_t next = 0;
  std::int64_t block = -1;
  std::size_t open_lo = 0;  // oldest row block with unfinished tags
  std::uint64_t open_tags = 0;
  const std::uint64_t budget = cfg.tag_budget();
  bool final_flush = false;
  long double occupancy_area = 0;
  std::uint64_t last_token = 0;
  std::uint64_t last_progress = 0;

  auto progress_token = [&] {
    const RouterStats t = net.totals();
    std::uint64_t tok = next + t.forwarded + t.delivered;
    for (auto& c : cores) {
      const auto& s = c->stats();
      tok += s.requests + s.responses + s.emitted + s.multiplications + s.retired + s.busy;
    }
    for (auto& mm : mems) tok += mm->stats().received + mm->stats().evictions;
    for (auto& mc : mcs) tok += mc->controller().stats().transactions + mc->controller().output_store().size();
    return tok;
  };

  for (;;) {
    phase1.run();

    // phase 2: serial, fixed order
    net.commit();

    while (static_cast<std::int64_t>(open_lo) <= block) {
      std::uint64_t finished = 0;
      for (auto& mm : mems) finished += mm->stats().completed_by_block[open_lo];
      if (finished < block_tags[open_lo]) break;
      open_tags -= block_tags[open_lo];
      ++open_lo;
    }

    for (std::uint32_t d = 0; d < cfg.dispatch_width && next < wl.instructions.size(); ++d) {
      const std::uint32_t blk = wl.row_block_of(next);
      if (static_cast<std::int64_t>(blk) != block) {
        // A new block waits until its tags fit the budget, unless nothing is open.
        if (static_cast<std::int64_t>(open_lo) <= block && open_tags + block_tags[blk] > budget) {
          ++m.dispatch_holds;
          break;
        }
        open_tags += block_tags[blk];
        // Entering a new row block: barrier for the finished ones, then a fresh seed.
        if (cfg.eviction == EvictionMode::BARRIER && block >= 0) {
          for (auto& mm : mems) mm->barrier(cycle);
        }
        while (mapping.seed_table().size() <= blk) {
          mapping.reseed(static_cast<std::uint32_t>(mapping.seed_table().size()));
        }
        block = blk;
      }
      std::size_t best = 0;
      for (std::size_t c = 1; c < cores.size(); ++c) {
        if (cores[c]->buffered() < cores[best]->buffered()) best = c;
      }
      if (!cores[best]->accept(wl.instructions[next], blk, cycle)) break;
      ++next;
    }

    std::uint64_t emitted = 0;
    std::uint64_t received = 0;
    for (auto& c : cores) emitted += c->stats().emitted;
    for (auto& mm : mems) received += mm->stats().received;

    const bool cores_done = next == wl.instructions.size() &&
                            std::all_of(cores.begin(), cores.end(), [](auto& c) { return c->idle(); });
    if (cfg.eviction == EvictionMode::BARRIER && !final_flush && cores_done && received == emitted) {
      for (auto& mm : mems) mm->barrier(cycle);
      final_flush = true;
    }

    std::uint64_t occ = 0;
    for (auto& mm : mems) occ += mm->pad().occupancy();
    occupancy_area += occ;
    m.peak_hashpad_occupancy = std::max<std::uint64_t>(m.peak_hashpad_occupancy, occ);
    std::uint64_t inflight = 0;
    std::uint64_t buffered = 0;
    for (auto& mc : mcs) {
      inflight += mc->controller().inflight();
      buffered += mc->controller().buffered_reads() + mc->controller().buffered_writes();
    }
    m.peak_mem_inflight = std::max(m.peak_mem_inflight, inflight);
    if (opts.trace_interval > 0 && cycle % opts.trace_interval == 0) {
      m.trace.push_back({cycle, next, emitted, inflight, buffered, occ, net.in_network()});
    }

    ++cycle;

    const bool done = cores_done && received == emitted && net.idle() &&
                      std::all_of(mems.begin(), mems.end(), [](auto& x) { return x->idle(); }) &&
                      std::all_of(mcs.begin(), mcs.end(), [](auto& x) { return x->idle(); });
    if (done) break;

    if (cycle % 64 != 0) continue;
    const std::uint64_t tok = progress_token();
    if (tok != last_token) {
      last_token = tok;
      last_progress = cycle;
    } else if (cycle - last_progress >= cfg.watchdog_cycles) {
      std::ostringstream msg;
      msg << "no progress for " << cfg.watchdog_cycles << " cycles at cycle " << cycle << ": dispatched "
          << next << "/" << wl.instructions.size() << ", HACCs emitted " << emitted << " received " << received
          << ", packets in network " << net.in_network() << ", waiting injection " << net.waiting_injection();
      std::size_t fullest = 0;
      for (std::size_t j = 1; j < mems.size(); ++j) {
        if (mems[j]->pad().occupancy() > mems[fullest]->pad().occupancy()) fullest = j;
      }
      const auto& pad = mems[fullest]->pad();
      msg << "; fullest HashPad mem" << fullest << " holds " << pad.occupancy() << "/" << pad.size()
          << " lines, ingress " << net.endpoint(mem_ids[fullest]).ingress.size() << ", write-back "
          << mems[fullest]->writeback_pending();
      throw DeadlockError(msg.str());
    }
  }

  m.total_cycles = cycle;
  m.mean_hashpad_occupancy = static_cast<double>(occupancy_area / cycle);

  m.heatmap.assign(cores.size(), std::vector<std::uint64_t>(mems.size(), 0));
  for (std::size_t c = 0; c < cores.size(); ++c) {
    const auto& s = cores[c]->stats();
    m.haccs_emitted += s.emitted;
    m.register_stalls += s.register_stalls;
    m.multiplications.push_back(s.multiplications);
    for (std::size_t j = 0; j < mems.size(); ++j) m.heatmap[c][j] = s.to_mem[j];
    for (auto [v, n] : s.mmh_cpi_hist) m.mmh_cpi[v] += n;
    m.activity.push_back({"core" + std::to_string(c), s.busy, s.stall, s.idle});
  }
  for (std::size_t j = 0; j < mems.size(); ++j) {
    const auto& s = mems[j]->stats();
    m.haccs_received += s.received;
    m.evictions += s.evictions;
    m.forced_evictions += s.forced_evictions;
    m.engine_stalls += s.engine_stalls;
    m.probe_cycles += s.probe_cycles;
    m.hacc_data_sum += s.hacc_data_sum;
    m.evicted_sum += s.evicted_sum;
    m.accumulations.push_back(s.received);
    for (auto [v, n] : s.hacc_cpi_hist) m.hacc_cpi[v] += n;
    m.activity.push_back({"mem" + std::to_string(j), s.busy, s.stall, s.idle});
    mems[j]->pad().check_drained();
  }
  for (std::size_t ch = 0; ch < mcs.size(); ++ch) {
    const auto& s = mcs[ch]->controller().stats();
    m.controllers.push_back(s);
    m.writes_landed += mcs[ch]->controller().output_store().size();
    m.activity.push_back({"mc" + std::to_string(ch), s.busy, s.stall, s.idle});
  }
  m.network = net.totals();
  for (std::uint32_t r = 0; r < n_routers; ++r) m.routers.push_back(net.stats(r));
  m.mean_mmh_cpi = mean_of(m.mmh_cpi);
  m.mean_hacc_cpi = mean_of(m.hacc_cpi);
  m.gops = 2.0 * static_cast<double>(m.expected_pp) * cfg.frequency_ghz / static_cast<double>(cycle);

  // Conservation.
  auto fail = [](const std::string& what) { throw IntegrityError(what); };
  if (m.haccs_emitted != m.expected_pp) {
    fail("cores emitted " + std::to_string(m.haccs_emitted) + " HACCs, expected " + std::to_string(m.expected_pp));
  }
  if (m.haccs_received != m.haccs_emitted) {
    fail("mems received " + std::to_string(m.haccs_received) + " of " + std::to_string(m.haccs_emitted) + " HACCs");
  }
  if (m.evictions != m.expected_nnz || m.writes_landed != m.expected_nnz) {
    fail("evictions " + std::to_string(m.evictions) + ", writes landed " + std::to_string(m.writes_landed) +
         ", expected " + std::to_string(m.expected_nnz));
  }
  if (std::abs(m.evicted_sum - m.hacc_data_sum) > 1e-9 * std::max(1.0, std::abs(m.hacc_data_sum))) {
    fail("evicted values do not add up to the HACC payloads");
  }
  if (m.network.injected != m.network.delivered) fail("packets were lost in the network");

  std::vector<Triplet> entries;
  entries.reserve(m.writes_landed);
  const std::uint32_t ncols = image.output_cols;
  for (auto& mc : mcs) {
    for (auto [addr, v] : mc->controller().output_store()) {
      const std::uint32_t tag = (addr - image.output_base) / 8;
      entries.push_back({tag / ncols, tag % ncols, v});
    }
  }
  RunResult res;
  res.output = SparseMatrix::from_triplets(image.output_rows, image.output_cols, Layout::CSR, std::move(entries));
  res.metrics = std::move(m);
  return res;
}

}  // namespace neura
