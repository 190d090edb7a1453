#include "neurasim/neuracore.hpp"

#include <algorithm>
#include <stdexcept>

#include "neurasim/memsys.hpp"

namespace neura {

namespace {

std::uint32_t regs_for(std::uint32_t bytes) { return (bytes + 15) / 16; }

void add_lines(std::vector<std::uint32_t>& out, std::uint64_t addr, std::uint64_t len) {
  if (len == 0) return;
  for (std::uint64_t l = addr / kLineBytes; l <= (addr + len - 1) / kLineBytes; ++l) {
    out.push_back(static_cast<std::uint32_t>(l * kLineBytes));
  }
}

}  // namespace

std::uint32_t registers_needed(const MmhInstruction& m) {
  const std::uint32_t na = m.lanes_a();
  const std::uint32_t nb = m.lanes_b();
  return regs_for(8 * na) + regs_for(4 * nb) + regs_for(8 * nb) + regs_for(2 * na * nb);
}

std::vector<std::uint32_t> operand_lines(const MmhInstruction& m) {
  const std::uint64_t na = m.lanes_a();
  const std::uint64_t nb = m.lanes_b();
  std::vector<std::uint32_t> out;
  add_lines(out, std::uint64_t{m.base_addr} + m.a_data_addr, 8 * na);
  add_lines(out, std::uint64_t{m.base_addr} + m.b_col_ind_addr, 4 * nb);
  add_lines(out, std::uint64_t{m.base_addr} + m.b_data_addr, 8 * nb);
  // counters of lanes (i, j) with i < na, j < nb sit at (i * width + j) * 2
  if (na > 0 && nb > 0) {
    add_lines(out, std::uint64_t{m.base_addr} + m.roll_counter_addr, ((na - 1) * m.width + nb) * 2);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

NeuraCore::NeuraCore(CoreParams params, Endpoint& ep, const MemoryImage& image,
                     const MappingPolicy& mapping)
    : params_(std::move(params)),
      ep_(&ep),
      image_(&image),
      mapping_(&mapping),
      pipes_(params_.pipelines),
      gen_free_at_(params_.addr_generators, 0),
      free_regs_(params_.pipelines * params_.regs_per_pipeline) {
  if (params_.pipelines == 0 || params_.multipliers == 0 || params_.addr_generators == 0 ||
      params_.regs_per_pipeline == 0 || params_.instr_buffer == 0) {
    throw std::invalid_argument("core resources must be positive");
  }
  if (params_.mems.empty() || params_.controllers.empty()) {
    throw std::invalid_argument("core needs accumulation targets and memory controllers");
  }
  stats_.to_mem.assign(params_.mems.size(), 0);
}

bool NeuraCore::accept(const MmhInstruction& m, std::uint32_t row_block, std::uint64_t cycle) {
  if (buffer_.size() >= params_.instr_buffer) return false;
  buffer_.push_back({m, row_block, rr_, cycle});
  rr_ = (rr_ + 1) % params_.pipelines;
  ++stats_.accepted;
  return true;
}

bool NeuraCore::idle() const { return buffer_.empty() && active_ == 0; }

void NeuraCore::load(Pipeline& p, std::uint32_t index, std::uint64_t cycle) {
  auto it = std::find_if(buffer_.begin(), buffer_.end(), [&](const Slot& s) { return s.pipeline == index; });
  if (it == buffer_.end()) return;
  p = Pipeline{};
  p.busy = true;
  p.slot = *it;
  p.stage = Stage::DECODE;
  p.entered = cycle;
  p.serial = ++serial_;
  ++active_;
  buffer_.erase(it);
}

void NeuraCore::build_products(Pipeline& p) {
  const MmhInstruction& m = p.slot.instr;
  const std::uint32_t w = m.width;
  const std::uint32_t ncols = image_->output_cols;
  const int na = m.lanes_a();
  const int nb = m.lanes_b();
  p.out.clear();
  p.out.reserve(static_cast<std::size_t>(na) * nb);
  for (int i = 0; i < na; ++i) {
    const double av = image_->read_f64(m.base_addr + m.a_data_addr + i * 8);
    for (int j = 0; j < nb; ++j) {
      HaccInstruction h;
      const std::uint32_t col = image_->read_u32(m.base_addr + m.b_col_ind_addr + j * 4);
      h.tag = m.a_row_ids[i] * ncols + col;
      h.data = av * image_->read_f64(m.base_addr + m.b_data_addr + j * 8);
      h.counter = image_->read_u16(m.base_addr + m.roll_counter_addr + (i * w + j) * 2);
      p.out.push_back(h);
    }
  }
  p.next_out = 0;
  p.lanes_left = static_cast<std::uint32_t>(p.out.size());
}

void NeuraCore::tick(std::uint64_t cycle) {
  if (ep_->ingress.empty()) {
    // Nothing can move while every busy pipeline waits on memory and no
    // buffered instruction has a free pipeline.
    bool frozen = true;
    for (const auto& p : pipes_) {
      if (p.busy && !(p.stage == Stage::FETCH && p.lines.empty() && p.outstanding > 0)) {
        frozen = false;
        break;
      }
    }
    for (const auto& s : buffer_) {
      if (!frozen) break;
      if (!pipes_[s.pipeline].busy) frozen = false;
    }
    if (frozen) {
      ++(idle() ? stats_.idle : stats_.stall);
      return;
    }
  }
  bool progress = false;
  const std::uint32_t n = params_.pipelines;
  const std::uint32_t start = static_cast<std::uint32_t>(cycle % n);

  // Memory responses fill the scoreboard.
  while (!ep_->ingress.empty()) {
    const Packet r = ep_->receive();
    if (r.kind != PacketKind::MEM_READ_RESP || r.req_pipeline >= n) {
      throw std::logic_error("core received an unexpected packet");
    }
    Pipeline& p = pipes_[r.req_pipeline];
    if (!p.busy || p.serial != r.req_serial || p.outstanding == 0) {
      throw std::logic_error("read response does not match an outstanding request");
    }
    --p.outstanding;
    ++stats_.responses;
    progress = true;
  }

  std::uint32_t used_ports = 0;

  // EMIT: one HACC per port per cycle, shared by all pipelines.
  for (std::uint32_t k = 0; k < n; ++k) {
    Pipeline& p = pipes_[(start + k) % n];
    if (!p.busy || p.stage != Stage::EMIT || p.entered >= cycle) continue;
    while (p.next_out < p.out.size()) {
      const int port = ep_->pick_port(used_ports);
      if (port < 0) break;
      used_ports |= 1u << port;
      const HaccInstruction& h = p.out[p.next_out++];
      const std::uint32_t target = mapping_->map_tag(h.tag, p.slot.row_block);
      Packet pkt;
      pkt.kind = PacketKind::HACC;
      pkt.src = params_.id;
      pkt.dst = params_.mems[target];
      pkt.hacc = h;
      pkt.created_cycle = cycle;
      pkt.ready_cycle = cycle + 1;
      ep_->send(port, std::move(pkt));
      ++stats_.emitted;
      ++stats_.to_mem[target];
      progress = true;
    }
    if (p.next_out == p.out.size()) {
      const std::uint64_t cpi = cycle - p.slot.dispatched;
      ++stats_.mmh_cpi_hist[cpi];
      stats_.mmh_cpi_sum += cpi;
      ++stats_.retired;
      free_regs_ += p.regs;
      p.busy = false;
      --active_;
    }
  }

  // EXECUTE: each multiplier produces one lane per cycle, handed out
  // round-robin over the executing pipelines.
  {
    std::uint32_t mults = params_.multipliers;
    bool any = true;
    while (mults > 0 && any) {
      any = false;
      for (std::uint32_t k = 0; k < n && mults > 0; ++k) {
        Pipeline& p = pipes_[(mult_rr_ + k) % n];
        if (!p.busy || p.stage != Stage::EXECUTE || p.entered >= cycle || p.lanes_left == 0) continue;
        --p.lanes_left;
        --mults;
        ++stats_.multiplications;
        any = true;
        progress = true;
      }
    }
    mult_rr_ = (mult_rr_ + 1) % n;
    for (auto& p : pipes_) {
      if (p.busy && p.stage == Stage::EXECUTE && p.entered < cycle && p.lanes_left == 0) {
        p.stage = Stage::EMIT;
        p.entered = cycle;
      }
    }
  }

  // FETCH: one read request per line, at most one packet per port per cycle;
  // EXECUTE starts once the scoreboard is full.
  for (std::uint32_t k = 0; k < n; ++k) {
    const std::uint32_t idx = (start + k) % n;
    Pipeline& p = pipes_[idx];
    if (!p.busy || p.stage != Stage::FETCH || p.entered >= cycle) continue;
    while (!p.lines.empty()) {
      const int port = ep_->pick_port(used_ports);
      if (port < 0) break;
      used_ports |= 1u << port;
      Packet req;
      req.kind = PacketKind::MEM_READ_REQ;
      req.src = params_.id;
      req.addr = p.lines.front();
      req.dst = params_.controllers[owning_channel(req.addr, static_cast<std::uint32_t>(params_.controllers.size()))];
      req.bytes = static_cast<std::uint16_t>(kLineBytes);
      req.req_pipeline = static_cast<std::uint16_t>(idx);
      req.req_serial = p.serial;
      req.created_cycle = cycle;
      req.ready_cycle = cycle + 1;
      ep_->send(port, std::move(req));
      p.lines.erase(p.lines.begin());
      ++p.outstanding;
      ++stats_.requests;
      progress = true;
    }
    if (p.lines.empty() && p.outstanding == 0) {
      build_products(p);
      p.stage = Stage::EXECUTE;
      p.entered = cycle;
      progress = true;
    }
  }

  // ADDR_GEN: shared generators, each busy for addrgen_latency cycles.
  for (std::uint32_t k = 0; k < n; ++k) {
    Pipeline& p = pipes_[(start + k) % n];
    if (!p.busy || p.stage != Stage::ADDR_GEN || p.entered >= cycle) continue;
    auto gen = std::find_if(gen_free_at_.begin(), gen_free_at_.end(), [&](std::uint64_t t) { return t <= cycle; });
    if (gen == gen_free_at_.end()) continue;
    *gen = cycle + params_.addrgen_latency;
    p.lines = operand_lines(p.slot.instr);
    p.stage = Stage::FETCH;
    p.entered = cycle + params_.addrgen_latency - 1;
    progress = true;
  }

  // DECODE then register allocation, oldest instruction first.
  auto& decoding = decoding_;
  decoding.clear();
  for (auto& p : pipes_) {
    if (p.busy && p.stage == Stage::DECODE && cycle >= p.entered + params_.decode_latency) decoding.push_back(&p);
  }
  std::sort(decoding.begin(), decoding.end(), [](const Pipeline* a, const Pipeline* b) { return a->serial < b->serial; });
  const std::uint32_t pool = params_.pipelines * params_.regs_per_pipeline;
  for (Pipeline* p : decoding) {
    const std::uint32_t need = std::min(registers_needed(p->slot.instr), pool);
    if (need > free_regs_) {
      ++stats_.register_stalls;
      break;  // in order: younger instructions wait behind the older one
    }
    free_regs_ -= need;
    p->regs = need;
    p->stage = Stage::ADDR_GEN;
    p->entered = cycle;
    progress = true;
  }

  // Free pipelines pick up their oldest buffered instruction.
  for (std::uint32_t k = 0; k < n && !buffer_.empty(); ++k) {
    if (pipes_[k].busy) continue;
    load(pipes_[k], k, cycle);
    if (pipes_[k].busy) progress = true;
  }

  if (progress) {
    ++stats_.busy;
  } else if (!idle()) {
    ++stats_.stall;
  } else {
    ++stats_.idle;
  }
}

}  // namespace neura
