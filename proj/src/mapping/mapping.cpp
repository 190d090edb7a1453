#include "neurasim/mapping.hpp"

#include <cctype>
#include <stdexcept>

namespace neura {

std::uint64_t splitmix64(std::uint64_t x) {
  std::uint64_t z = x + 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Xorshift64Star::Xorshift64Star(std::uint64_t seed) : state_(splitmix64(seed)) {
  if (state_ == 0) state_ = 0x9E3779B97F4A7C15ull;
}

std::uint64_t Xorshift64Star::next() {
  state_ ^= state_ >> 12;
  state_ ^= state_ << 25;
  state_ ^= state_ >> 27;
  return state_ * 0x2545F4914F6CDD1Dull;
}

std::string_view to_string(MappingKind kind) {
  switch (kind) {
    case MappingKind::RING: return "ring";
    case MappingKind::PRIME_MODULAR: return "prime-modular";
    case MappingKind::RANDOM_TABLE: return "random-table";
    case MappingKind::DRHM_LOWER: return "drhm-lower";
    case MappingKind::DRHM_UPPER: return "drhm-upper";
  }
  return "?";
}

// Case-insensitive, '_' and '-' interchangeable: DRHM_LOWER and drhm-lower
// name the same policy.
std::optional<MappingKind> parse_mapping_kind(std::string_view name) {
  std::string norm(name);
  for (auto& ch : norm) ch = ch == '_' ? '-' : static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  for (auto kind : {MappingKind::RING, MappingKind::PRIME_MODULAR, MappingKind::RANDOM_TABLE,
                    MappingKind::DRHM_LOWER, MappingKind::DRHM_UPPER}) {
    if (to_string(kind) == norm) return kind;
  }
  return std::nullopt;
}

// Shifts are done in 64 bits and truncated, so k = 0 is well defined and bits
// pushed past position 31 are discarded.
std::uint32_t drhm_lower(std::uint32_t tag, std::uint32_t gamma, std::uint32_t k, std::uint32_t n) {
  const auto kept = static_cast<std::uint32_t>(static_cast<std::uint32_t>(
                        static_cast<std::uint64_t>(tag) << k) >> k);
  const std::uint32_t product = kept * gamma;  // wraps mod 2^32
  return product % n;
}

std::uint32_t drhm_upper(std::uint32_t tag, std::uint32_t gamma, std::uint32_t k, std::uint32_t n) {
  const auto kept = static_cast<std::uint32_t>(static_cast<std::uint64_t>(tag >> k) << k);
  const std::uint32_t product = kept * gamma;
  return product % n;
}

MappingPolicy::MappingPolicy(MappingKind kind, std::uint32_t n_targets, std::uint32_t k_bits,
                             std::uint64_t rng_seed, std::uint32_t ring_span)
    : kind_(kind),
      n_targets_(n_targets),
      k_bits_(k_bits),
      rng_seed_(rng_seed),
      ring_span_(ring_span),
      rng_(rng_seed) {
  if (n_targets_ == 0) throw std::invalid_argument("mapping needs at least one target");
  if (k_bits_ >= 32) throw std::invalid_argument("k_bits must be below 32");
  if (ring_span_ == 0) throw std::invalid_argument("ring_span must be positive");
}

MappingPolicy::MappingPolicy(const MappingPolicy& other)
    : kind_(other.kind_),
      n_targets_(other.n_targets_),
      k_bits_(other.k_bits_),
      rng_seed_(other.rng_seed_),
      ring_span_(other.ring_span_),
      rng_(other.rng_),
      seeds_(other.seeds_) {
  std::lock_guard lock(other.memo_mutex_);
  memo_ = other.memo_;
}

MappingPolicy& MappingPolicy::operator=(const MappingPolicy& other) {
  if (this == &other) return *this;
  MappingPolicy copy(other);
  std::scoped_lock lock(memo_mutex_);
  kind_ = copy.kind_;
  n_targets_ = copy.n_targets_;
  k_bits_ = copy.k_bits_;
  rng_seed_ = copy.rng_seed_;
  ring_span_ = copy.ring_span_;
  rng_ = copy.rng_;
  seeds_ = std::move(copy.seeds_);
  memo_ = std::move(copy.memo_);
  return *this;
}

std::uint32_t MappingPolicy::map_tag(std::uint32_t tag, std::uint32_t row_block) const {
  switch (kind_) {
    case MappingKind::RING:
      return (tag / ring_span_) % n_targets_;
    case MappingKind::PRIME_MODULAR:
      return (tag % kModularPrime) % n_targets_;
    case MappingKind::RANDOM_TABLE: {
      std::lock_guard lock(memo_mutex_);
      auto it = memo_.find(tag);
      if (it != memo_.end()) return it->second;
      // The draw is keyed by the tag, so the table contents do not depend on
      // the order in which tags are first seen.
      const std::uint64_t r = splitmix64(rng_seed_ ^ splitmix64(tag)) >> 32;
      const auto target = static_cast<std::uint32_t>((r * n_targets_) >> 32);
      memo_.emplace(tag, target);
      return target;
    }
    case MappingKind::DRHM_LOWER:
    case MappingKind::DRHM_UPPER: {
      if (row_block >= seeds_.size()) {
        throw std::out_of_range("no seed for row block " + std::to_string(row_block));
      }
      const std::uint32_t gamma = seeds_[row_block];
      return kind_ == MappingKind::DRHM_LOWER ? drhm_lower(tag, gamma, k_bits_, n_targets_)
                                              : drhm_upper(tag, gamma, k_bits_, n_targets_);
    }
  }
  return 0;
}

void MappingPolicy::reseed(std::uint32_t row_block) {
  if (row_block != seeds_.size()) {
    throw std::invalid_argument("reseed out of order: row block " + std::to_string(row_block) +
                                ", table holds " + std::to_string(seeds_.size()));
  }
  seeds_.push_back(static_cast<std::uint32_t>(rng_.next() >> 32) | 1u);
}

std::size_t MappingPolicy::lookup_table_size() const {
  std::lock_guard lock(memo_mutex_);
  return memo_.size();
}

std::vector<std::uint64_t> heatmap(const MappingPolicy& policy, std::span<const TagEvent> stream) {
  std::vector<std::uint64_t> counts(policy.n_targets(), 0);
  for (const auto& ev : stream) ++counts[policy.map_tag(ev.tag, ev.row_block)];
  return counts;
}

}  // namespace neura
