#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace neura {

/// splitmix64 finalizer; used to expand seeds and key the random table.
std::uint64_t splitmix64(std::uint64_t x);

/// xorshift64* generator. State is seeded through splitmix64 so that seed 0 is
/// usable.
class Xorshift64Star {
 public:
  explicit Xorshift64Star(std::uint64_t seed);
  std::uint64_t next();

 private:
  std::uint64_t state_;
};

enum class MappingKind : std::uint8_t { RING, PRIME_MODULAR, RANDOM_TABLE, DRHM_LOWER, DRHM_UPPER };

std::string_view to_string(MappingKind kind);
std::optional<MappingKind> parse_mapping_kind(std::string_view name);

inline constexpr std::uint32_t kModularPrime = 2147483647u;

/// Lower-bit DRHM hash: keep the low (32 - k) bits, multiply by gamma mod 2^32,
/// reduce mod n.
std::uint32_t drhm_lower(std::uint32_t tag, std::uint32_t gamma, std::uint32_t k, std::uint32_t n);
/// Upper-bit DRHM hash: clear the low k bits, multiply by gamma mod 2^32,
/// reduce mod n.
std::uint32_t drhm_upper(std::uint32_t tag, std::uint32_t gamma, std::uint32_t k, std::uint32_t n);

/// TAG -> accumulation-target mapping. Every kind is consistent: the target is
/// a pure function of (tag, row block) once the block's seed exists.
///
/// RING walks the targets round-robin in output-row order: consecutive runs of
/// `ring_span` tags (one output row when ring_span = n_cols) share a target.
class MappingPolicy {
 public:
  MappingPolicy(MappingKind kind, std::uint32_t n_targets, std::uint32_t k_bits = 16,
                std::uint64_t rng_seed = 0, std::uint32_t ring_span = 1);
  MappingPolicy(const MappingPolicy& other);
  MappingPolicy& operator=(const MappingPolicy& other);

  MappingKind kind() const { return kind_; }
  std::uint32_t n_targets() const { return n_targets_; }
  std::uint32_t k_bits() const { return k_bits_; }
  std::uint64_t rng_seed() const { return rng_seed_; }
  std::uint32_t ring_span() const { return ring_span_; }
  const std::vector<std::uint32_t>& seed_table() const { return seeds_; }

  /// Throws std::out_of_range for DRHM kinds when row_block has no seed yet.
  std::uint32_t map_tag(std::uint32_t tag, std::uint32_t row_block) const;

  /// Appends gamma for `row_block`, which must equal the current table length.
  void reseed(std::uint32_t row_block);

  /// Distinct tags memoized by RANDOM_TABLE so far.
  std::size_t lookup_table_size() const;

 private:
  MappingKind kind_;
  std::uint32_t n_targets_;
  std::uint32_t k_bits_;
  std::uint64_t rng_seed_;
  std::uint32_t ring_span_;
  Xorshift64Star rng_;
  std::vector<std::uint32_t> seeds_;
  mutable std::mutex memo_mutex_;
  mutable std::unordered_map<std::uint32_t, std::uint32_t> memo_;
};

struct TagEvent {
  std::uint32_t tag = 0;
  std::uint32_t row_block = 0;
};

/// Count of mapped tags per target (length n_targets).
std::vector<std::uint64_t> heatmap(const MappingPolicy& policy, std::span<const TagEvent> stream);

}  // namespace neura
