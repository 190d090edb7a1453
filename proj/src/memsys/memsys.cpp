#include "neurasim/memsys.hpp"

#include <algorithm>
#include <string>

#include "neurasim/errors.hpp"

namespace neura {

MemoryController::MemoryController(McParams params, const MemoryImage& image)
    : params_(params), image_(&image) {}

bool MemoryController::submit(const Packet& req) {
  if (req.kind == PacketKind::MEM_READ_REQ) {
    if (!image_->readable(req.addr, req.bytes) || req.bytes == 0) {
      throw SimulationFault(req.addr, "read of " + std::to_string(req.bytes) + " bytes at address " +
                                          std::to_string(req.addr) + " is outside the memory image (size " +
                                          std::to_string(image_->total_size) + ")");
    }
    if (reads_.size() >= params_.read_buffer) return false;
    reads_.push_back(req);
    ++stats_.reads;
    return true;
  }
  if (req.kind == PacketKind::MEM_WRITE) {
    if (!image_->writable(req.addr, 8)) {
      throw SimulationFault(req.addr, "write at address " + std::to_string(req.addr) +
                                          " is outside the output region");
    }
    if (writes_.size() >= params_.write_buffer) return false;
    writes_.push_back(req);
    ++stats_.writes;
    return true;
  }
  throw SimulationFault(req.addr, "memory controller received a non-memory packet");
}

bool MemoryController::issue_from(std::deque<Packet>& buf, bool write, std::uint64_t cycle) {
  if (buf.empty()) return false;
  const std::size_t window = std::min<std::size_t>(buf.size(), params_.coalesce_window);

  // Oldest line unless the window holds the line right after the last one issued.
  std::uint32_t line = buf.front().addr / kLineBytes;
  for (std::size_t i = 0; i < window; ++i) {
    if (static_cast<std::int64_t>(buf[i].addr / kLineBytes) == last_line_ + 1) {
      if (line != buf[i].addr / kLineBytes) ++stats_.adjacent_picks;
      line = buf[i].addr / kLineBytes;
      break;
    }
  }

  Transaction t;
  t.write = write;
  std::size_t kept = 0;
  for (std::size_t i = 0; i < buf.size(); ++i) {
    if (i < window && buf[i].addr / kLineBytes == line) {
      t.requests.push_back(std::move(buf[i]));
    } else {
      buf[kept++] = std::move(buf[i]);
    }
  }
  buf.resize(kept);

  const std::uint64_t bytes = write ? 8 * t.requests.size() : kLineBytes;
  const std::uint64_t xfer = (bytes + params_.channel.bandwidth - 1) / params_.channel.bandwidth;
  t.completion = cycle + params_.channel.base_latency + xfer;
  bus_free_ = cycle + xfer;
  last_line_ = line;
  inflight_.push_back(std::move(t));

  ++stats_.transactions;
  stats_.served_bytes += bytes;
  if (cycle / kBandwidthWindow != window_start_) {
    window_start_ = cycle / kBandwidthWindow;
    window_bytes_ = 0;
  }
  window_bytes_ += bytes;
  stats_.max_window_bytes = std::max(stats_.max_window_bytes, window_bytes_);
  return true;
}

std::vector<Packet> MemoryController::tick(std::uint64_t cycle) {
  std::vector<Packet> responses;
  while (!inflight_.empty() && inflight_.front().completion <= cycle) {
    auto& t = inflight_.front();
    for (auto& r : t.requests) {
      if (t.write) {
        if (!store_.emplace(r.addr, r.value).second) {
          throw IntegrityError("duplicate write to output address " + std::to_string(r.addr));
        }
      } else {
        Packet resp = r;
        resp.kind = PacketKind::MEM_READ_RESP;
        resp.src = params_.id;
        resp.dst = r.src;
        resp.hops = 0;
        responses.push_back(resp);
      }
    }
    inflight_.pop_front();
  }

  issued_ = false;
  if (cycle >= bus_free_ && inflight_.size() < params_.channel.max_inflight) {
    // Reads first; writes when no read waits or the write buffer runs high.
    const bool drain_writes = writes_.size() * 4 >= static_cast<std::size_t>(params_.write_buffer) * 3;
    if (drain_writes || reads_.empty()) {
      issued_ = issue_from(writes_, true, cycle) || issue_from(reads_, false, cycle);
    } else {
      issued_ = issue_from(reads_, false, cycle);
    }
  }
  if (issued_ || !inflight_.empty()) {
    ++stats_.busy;
  } else if (!reads_.empty() || !writes_.empty()) {
    ++stats_.stall;
  } else {
    ++stats_.idle;
  }
  return responses;
}

MemoryControllerNode::MemoryControllerNode(McParams params, const MemoryImage& image, Endpoint& ep)
    : ctrl_(params, image), ep_(&ep) {}

void MemoryControllerNode::tick(std::uint64_t cycle) {
  // Accept in arrival order; a request that does not fit blocks the rest.
  for (std::size_t n = 0; n < ep_->ports.size() && !ep_->ingress.empty(); ++n) {
    if (!ctrl_.submit(ep_->ingress.front())) break;
    ep_->receive();
  }
  for (auto& r : ctrl_.tick(cycle)) pending_.push_back(std::move(r));

  std::uint32_t used = 0;
  while (!pending_.empty()) {
    const int port = ep_->pick_port(used);
    if (port < 0) break;
    used |= 1u << port;
    Packet p = std::move(pending_.front());
    pending_.pop_front();
    p.ready_cycle = cycle + 1;
    ep_->send(port, std::move(p));
  }
}

}  // namespace neura
