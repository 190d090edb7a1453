#include "neurasim/neuramem.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>
#include <string>

#include "neurasim/errors.hpp"
#include "neurasim/memsys.hpp"

namespace neura {

HashPad::HashPad(std::uint32_t lines, std::uint32_t engines, std::uint32_t comparators,
                 EvictionMode mode)
    : lines_(lines), engines_(engines), probes_(comparators), mode_(mode) {
  if (lines < 2 || !std::has_single_bit(lines)) throw std::invalid_argument("hashlines must be a power of two >= 2");
  if (engines == 0 || !std::has_single_bit(engines) || engines > lines) {
    throw std::invalid_argument("engines must be a power of two no larger than hashlines");
  }
  if (comparators == 0 || comparators > lines) throw std::invalid_argument("comparators out of range");
  shift_ = 32 - static_cast<std::uint32_t>(std::countr_zero(lines));
}

std::uint32_t HashPad::home_index(std::uint32_t tag) const {
  return (tag * kInternalHashMultiplier) >> shift_;
}

bool HashPad::can_execute(std::uint32_t tag) const {
  if (occupancy_ < size() || completed_ > 0) return true;
  const std::uint32_t mask = size() - 1;
  const std::uint32_t home = home_index(tag);
  for (std::uint32_t j = 0; j <= max_disp_; ++j) {
    if (lines_[(home + j) & mask].tag == tag) return true;
  }
  return false;
}

Eviction HashPad::take(std::uint32_t slot, std::uint64_t cycle) {
  auto& l = lines_[slot];
  Eviction ev{l.tag, l.data, cycle, std::move(l.created)};
  if (l.counter == 0 && mode_ == EvictionMode::BARRIER) --completed_;
  l.state = HashLine::State::EMPTY;
  l.created.clear();
  if (--occupancy_ == 0) max_disp_ = 0;
  return ev;
}

HaccResult HashPad::execute_hacc(const HaccInstruction& h, std::uint64_t cycle,
                                 std::uint64_t created_cycle) {
  const std::uint32_t n = size();
  const std::uint32_t mask = n - 1;
  const std::uint32_t home = home_index(h.tag);
  const std::uint32_t reach = std::min(n, std::max(probes_, max_disp_ + 1));
  HaccResult res;
  auto cost = [&](std::uint32_t probes) {
    res.probes = probes;
    res.cycles = (probes + probes_ - 1) / probes_;
    return cycle + res.cycles - 1;
  };

  // Lookup: compare `probes_` slots per cycle until the tag shows up or the
  // largest displacement in use is covered.
  std::int64_t empty = -1;
  std::int64_t done = -1;
  for (std::uint32_t j = 0; j < reach; ++j) {
    const std::uint32_t slot = (home + j) & mask;
    auto& l = lines_[slot];
    if (l.state == HashLine::State::EMPTY) {
      if (empty < 0) empty = slot;
      continue;
    }
    if (l.tag != h.tag) {
      if (done < 0 && mode_ == EvictionMode::BARRIER && l.counter == 0) done = slot;
      continue;
    }
    if (l.counter == 0) {
      throw IntegrityError("tag " + std::to_string(h.tag) + " received a contribution after its counter reached zero");
    }
    if (h.counter != l.initial) {
      throw IntegrityError("tag " + std::to_string(h.tag) + " carries counters " +
                           std::to_string(l.initial) + " and " + std::to_string(h.counter));
    }
    const std::uint64_t at = cost(j + 1);
    l.data += h.data;
    --l.counter;
    l.created.push_back(created_cycle);
    res.slot = slot;
    res.outcome = HaccOutcome::ACCUMULATED;
    if (l.counter == 0) {
      res.completed = true;
      if (mode_ == EvictionMode::ROLLING) {
        res.outcome = HaccOutcome::EVICTED;
        res.eviction = take(slot, at);
      } else {
        ++completed_;
      }
    }
    return res;
  }

  // Miss: first empty slot, else (BARRIER) the first completed line, else
  // keep probing past the window.
  std::uint32_t probes = reach;
  if (empty < 0 && done < 0) {
    for (std::uint32_t j = reach; j < n; ++j) {
      const std::uint32_t slot = (home + j) & mask;
      const auto& l = lines_[slot];
      if (l.state == HashLine::State::EMPTY) {
        empty = slot;
      } else if (mode_ == EvictionMode::BARRIER && l.counter == 0) {
        done = slot;
      } else {
        continue;
      }
      probes = j + 1;
      break;
    }
  }
  if (empty < 0 && done < 0) {
    cost(n);
    res.outcome = HaccOutcome::STALLED;
    return res;
  }
  const std::uint64_t at = cost(probes);
  std::int64_t target = empty;
  if (target < 0) {
    res.forced = take(static_cast<std::uint32_t>(done), at);
    target = done;
  }

  const auto slot = static_cast<std::uint32_t>(target);
  auto& l = lines_[slot];
  l.state = HashLine::State::OCCUPIED;
  l.tag = h.tag;
  l.data = h.data;
  l.counter = h.counter;
  l.initial = h.counter;
  l.created.clear();
  l.created.push_back(created_cycle);
  ++occupancy_;
  if (occupancy_ > peak_) peak_ = occupancy_;
  max_disp_ = std::max(max_disp_, (slot - home) & mask);
  res.slot = slot;
  res.outcome = HaccOutcome::INSERTED;
  // Singletons: a zero counter at insertion completes the line at once.
  if (h.counter == 0) {
    res.completed = true;
    if (mode_ == EvictionMode::ROLLING) {
      res.outcome = HaccOutcome::EVICTED;
      res.eviction = take(slot, at);
    } else {
      ++completed_;
    }
  }
  return res;
}

std::vector<Eviction> HashPad::barrier_flush(std::uint64_t cycle) {
  std::vector<Eviction> out;
  if (mode_ != EvictionMode::BARRIER || completed_ == 0) return out;
  for (std::uint32_t i = 0; i < size(); ++i) {
    const auto& l = lines_[i];
    if (l.state == HashLine::State::OCCUPIED && l.counter == 0) out.push_back(take(i, cycle));
  }
  return out;
}

void HashPad::check_drained() const {
  std::uint32_t waiting = 0;
  std::uint32_t example = 0;
  for (const auto& l : lines_) {
    if (l.state == HashLine::State::OCCUPIED && l.counter > 0) {
      if (waiting++ == 0) example = l.tag;
    }
  }
  if (waiting > 0) {
    throw IntegrityError(std::to_string(waiting) + " hash lines still wait for contributions (e.g. tag " +
                         std::to_string(example) + "): partial products were lost");
  }
}

NeuraMem::NeuraMem(MemParams params, Endpoint& ep, std::uint32_t n_cores)
    : params_(std::move(params)),
      ep_(&ep),
      pad_(params_.hashlines, params_.engines, params_.comparators, params_.mode),
      engine_free_at_(params_.engines, 0) {
  stats_.from_core.assign(n_cores, 0);
  if (params_.blocks) stats_.completed_by_block.assign(params_.blocks->blocks, 0);
}

void NeuraMem::record(Eviction&& ev) {
  ++stats_.evictions;
  stats_.evicted_sum += ev.value;
  for (auto c : ev.created) {
    const std::uint64_t cpi = ev.cycle - c;
    ++stats_.hacc_cpi_hist[cpi];
    stats_.hacc_cpi_sum += cpi;
    ++stats_.hacc_cpi_count;
  }
  Packet w;
  w.kind = PacketKind::MEM_WRITE;
  w.src = params_.id;
  w.addr = params_.output_base + ev.tag * 8u;
  w.dst = params_.controllers[owning_channel(w.addr, static_cast<std::uint32_t>(params_.controllers.size()))];
  w.bytes = 8;
  w.value = ev.value;
  w.hacc.tag = ev.tag;
  writeback_.push_back(w);
}

void NeuraMem::completed(std::uint32_t tag) {
  if (params_.blocks) ++stats_.completed_by_block[params_.blocks->block_of(tag)];
}

void NeuraMem::tick(std::uint64_t cycle) {
  bool worked = false;
  auto& in = ep_->ingress;
  // Each free engine takes the oldest HACC of its bank that can make
  // progress; a blocked oldest HACC counts as an engine stall but does not
  // block the younger ones behind it.
  for (std::uint32_t e = 0; e < params_.engines && !in.empty(); ++e) {
    if (engine_free_at_[e] > cycle) {
      worked = true;
      continue;
    }
    bool oldest = true;
    for (auto it = in.begin(); it != in.end(); ++it) {
      if (pad_.bank_of(it->hacc.tag) != e) continue;
      if (!pad_.can_execute(it->hacc.tag)) {
        if (oldest) ++stats_.engine_stalls;
        oldest = false;
        continue;
      }
      const Packet p = *it;
      in.erase(it);
      ep_->touched = true;
      auto res = pad_.execute_hacc(p.hacc, cycle, p.created_cycle);
      engine_free_at_[e] = cycle + res.cycles;
      stats_.probe_cycles += res.cycles - 1;
      ++stats_.received;
      stats_.hacc_data_sum += p.hacc.data;
      if (p.src < stats_.from_core.size()) ++stats_.from_core[p.src];
      if (res.outcome == HaccOutcome::INSERTED || (res.outcome == HaccOutcome::EVICTED && p.hacc.counter == 0)) {
        ++stats_.inserted;
      } else {
        ++stats_.accumulated;
      }
      if (res.completed) completed(p.hacc.tag);
      if (res.forced) {
        ++stats_.forced_evictions;
        record(std::move(*res.forced));
      }
      if (res.eviction) record(std::move(*res.eviction));
      worked = true;
      break;
    }
  }
  stats_.peak_writeback = std::max<std::uint64_t>(stats_.peak_writeback, writeback_.size());

  std::uint32_t used = 0;
  while (!writeback_.empty()) {
    const int port = ep_->pick_port(used);
    if (port < 0) break;
    used |= 1u << port;
    Packet w = std::move(writeback_.front());
    writeback_.pop_front();
    w.ready_cycle = cycle + 1;
    ep_->send(port, std::move(w));
    worked = true;
  }

  if (worked) {
    ++stats_.busy;
  } else if (!in.empty() || !writeback_.empty()) {
    ++stats_.stall;
  } else {
    ++stats_.idle;
  }
}

void NeuraMem::barrier(std::uint64_t cycle) {
  for (auto& ev : pad_.barrier_flush(cycle)) record(std::move(ev));
}

bool NeuraMem::idle() const {
  return ep_->ingress.empty() && ep_->ingress.staged() == 0 && writeback_.empty() &&
         pad_.occupancy() == 0;
}

}  // namespace neura
