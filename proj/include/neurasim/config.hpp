#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "neurasim/mapping.hpp"

namespace neura {

enum class EvictionMode : std::uint8_t { ROLLING, BARRIER };

std::string_view to_string(EvictionMode mode);
EvictionMode parse_eviction_mode(std::string_view name);  // throws ConfigError

/// Parametric HBM channel (one per tile).
struct ChannelModel {
  std::uint32_t bandwidth = 16;     // bytes per cycle
  std::uint32_t base_latency = 40;  // cycles
  std::uint32_t max_inflight = 16;  // transactions

  bool operator==(const ChannelModel&) const = default;
};

inline constexpr std::uint32_t kLineBytes = 64;

struct TileConfig {
  std::string preset = "custom";

  // chip
  std::uint32_t tiles = 8;
  std::uint32_t tile_grid_cols = 4;  // tiles are laid out tile_grid_cols x (tiles / tile_grid_cols)
  std::uint32_t routers_per_tile = 4;
  std::uint32_t tile_router_cols = 2;  // routers inside a tile: cols x (routers_per_tile / cols)

  // NeuraCore
  std::uint32_t cores_per_tile = 1;
  std::uint32_t pipelines = 2;
  std::uint32_t regs_per_pipeline = 4;  // 128-bit registers
  std::uint32_t multipliers = 2;
  std::uint32_t addr_generators = 1;
  std::uint32_t core_ports = 4;
  std::uint32_t instr_buffer = 4;
  std::uint32_t decode_latency = 1;
  std::uint32_t addrgen_latency = 1;

  // NeuraMem
  std::uint32_t mems_per_tile = 1;
  std::uint32_t hashlines = 4096;
  std::uint32_t engines = 2;
  std::uint32_t comparators = 1;
  std::uint32_t accumulators = 128;
  std::uint32_t mem_ports = 4;
  std::uint32_t mem_ingress = 16;
  double hashpad_mb = 0.75;  // nominal size, reported only

  // NoC
  std::uint32_t router_buffer = 8;  // adaptive queue per input side
  std::uint32_t escape_buffer = 2;  // dimension-order escape queue per input side
  std::uint32_t port_buffer = 4;
  std::uint32_t ingress_buffer = 16;
  std::uint32_t hop_latency = 1;

  // memory controller
  ChannelModel channel;
  std::uint32_t mc_ports = 4;
  std::uint32_t mc_read_buffer = 32;
  std::uint32_t mc_write_buffer = 32;
  std::uint32_t coalesce_window = 16;

  // workload / policy
  std::uint8_t mmh_width = 4;
  EvictionMode eviction = EvictionMode::ROLLING;
  MappingKind mapping = MappingKind::DRHM_LOWER;
  std::uint32_t drhm_k = 16;
  std::uint32_t dispatch_width = 1;
  // Output tags allowed in open row blocks at once; 0 means half a HashPad,
  // which keeps even a single-target mapping from filling one pad.
  std::uint32_t open_tag_budget = 0;
  std::uint64_t watchdog_cycles = 100000;
  double frequency_ghz = 1.0;

  std::uint32_t cores() const { return tiles * cores_per_tile; }
  std::uint32_t mems() const { return tiles * mems_per_tile; }
  std::uint32_t routers() const { return tiles * routers_per_tile; }
  std::uint32_t tag_budget() const { return open_tag_budget != 0 ? open_tag_budget : hashlines / 2; }

  /// Throws ConfigError naming the first field that is out of range.
  void validate() const;

  bool operator==(const TileConfig&) const = default;
};

/// "tile4", "tile16", "tile64" and "tile64-hbm256" (Tile-64 on a 256 GB/s stack).
TileConfig preset(std::string_view name);
std::vector<std::string> preset_names();

/// Sets one field from its key=value spelling; unknown keys or malformed
/// values raise ConfigError naming the key.
void apply_setting(TileConfig& cfg, std::string_view key, std::string_view value);

/// Line-oriented "key = value" file; '#' starts a comment. A `preset` line
/// selects the base (tile4 if absent); later lines override field by field.
/// `label` renames the config without touching any field.
TileConfig load_config_file(const std::filesystem::path& path);
TileConfig parse_config(std::string_view text, const std::string& origin = "<config>");

/// Every field as key=value lines, in a fixed order; parse_config of the
/// result reproduces the config.
std::string to_config_text(const TileConfig& cfg);

}  // namespace neura
