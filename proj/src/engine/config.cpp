#include "neurasim/config.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <limits>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "neurasim/errors.hpp"

namespace neura {

std::string_view to_string(EvictionMode mode) {
  return mode == EvictionMode::ROLLING ? "rolling" : "barrier";
}

EvictionMode parse_eviction_mode(std::string_view name) {
  std::string norm(name);
  for (auto& ch : norm) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (norm == "rolling") return EvictionMode::ROLLING;
  if (norm == "barrier") return EvictionMode::BARRIER;
  throw ConfigError("eviction", "expected rolling or barrier, got '" + std::string(name) + "'");
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_uint(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || out > std::numeric_limits<T>::max()) {
    throw ConfigError(std::string(key), "expected an unsigned integer, got '" + std::string(v) + "'");
  }
  return static_cast<T>(out);
}

double parse_double(std::string_view key, std::string_view v) {
  std::string s(v);
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) {
    throw ConfigError(std::string(key), "expected a number, got '" + s + "'");
  }
  return out;
}

struct Field {
  std::function<void(TileConfig&, std::string_view, std::string_view)> set;
  std::function<std::string(const TileConfig&)> get;
};

template <typename T>
Field uint_field(T TileConfig::*member) {
  return {[member](TileConfig& c, std::string_view k, std::string_view v) {
            c.*member = parse_uint<T>(k, v);
          },
          [member](const TileConfig& c) { return std::to_string(c.*member); }};
}

template <typename T>
Field channel_field(T ChannelModel::*member) {
  return {[member](TileConfig& c, std::string_view k, std::string_view v) {
            c.channel.*member = parse_uint<T>(k, v);
          },
          [member](const TileConfig& c) { return std::to_string(c.channel.*member); }};
}

std::string format_double(double d) {
  std::ostringstream os;
  os.precision(17);
  os << d;
  return os.str();
}

// Ordered registry; to_config_text walks it in this order.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"tiles", uint_field(&TileConfig::tiles)},
      {"tile_grid_cols", uint_field(&TileConfig::tile_grid_cols)},
      {"routers_per_tile", uint_field(&TileConfig::routers_per_tile)},
      {"tile_router_cols", uint_field(&TileConfig::tile_router_cols)},
      {"cores_per_tile", uint_field(&TileConfig::cores_per_tile)},
      {"pipelines", uint_field(&TileConfig::pipelines)},
      {"regs_per_pipeline", uint_field(&TileConfig::regs_per_pipeline)},
      {"multipliers", uint_field(&TileConfig::multipliers)},
      {"addr_generators", uint_field(&TileConfig::addr_generators)},
      {"core_ports", uint_field(&TileConfig::core_ports)},
      {"instr_buffer", uint_field(&TileConfig::instr_buffer)},
      {"decode_latency", uint_field(&TileConfig::decode_latency)},
      {"addrgen_latency", uint_field(&TileConfig::addrgen_latency)},
      {"mems_per_tile", uint_field(&TileConfig::mems_per_tile)},
      {"hashlines", uint_field(&TileConfig::hashlines)},
      {"engines", uint_field(&TileConfig::engines)},
      {"comparators", uint_field(&TileConfig::comparators)},
      {"accumulators", uint_field(&TileConfig::accumulators)},
      {"mem_ports", uint_field(&TileConfig::mem_ports)},
      {"mem_ingress", uint_field(&TileConfig::mem_ingress)},
      {"hashpad_mb",
       {[](TileConfig& c, std::string_view k, std::string_view v) { c.hashpad_mb = parse_double(k, v); },
        [](const TileConfig& c) { return format_double(c.hashpad_mb); }}},
      {"router_buffer", uint_field(&TileConfig::router_buffer)},
      {"escape_buffer", uint_field(&TileConfig::escape_buffer)},
      {"port_buffer", uint_field(&TileConfig::port_buffer)},
      {"ingress_buffer", uint_field(&TileConfig::ingress_buffer)},
      {"hop_latency", uint_field(&TileConfig::hop_latency)},
      {"channel_bandwidth", channel_field(&ChannelModel::bandwidth)},
      {"channel_latency", channel_field(&ChannelModel::base_latency)},
      {"channel_max_inflight", channel_field(&ChannelModel::max_inflight)},
      {"mc_ports", uint_field(&TileConfig::mc_ports)},
      {"mc_read_buffer", uint_field(&TileConfig::mc_read_buffer)},
      {"mc_write_buffer", uint_field(&TileConfig::mc_write_buffer)},
      {"coalesce_window", uint_field(&TileConfig::coalesce_window)},
      {"mmh_width", uint_field(&TileConfig::mmh_width)},
      {"eviction",
       {[](TileConfig& c, std::string_view, std::string_view v) { c.eviction = parse_eviction_mode(v); },
        [](const TileConfig& c) { return std::string(to_string(c.eviction)); }}},
      {"mapping",
       {[](TileConfig& c, std::string_view k, std::string_view v) {
          auto kind = parse_mapping_kind(v);
          if (!kind) throw ConfigError(std::string(k), "unknown mapping policy '" + std::string(v) + "'");
          c.mapping = *kind;
        },
        [](const TileConfig& c) { return std::string(to_string(c.mapping)); }}},
      {"drhm_k", uint_field(&TileConfig::drhm_k)},
      {"dispatch_width", uint_field(&TileConfig::dispatch_width)},
      {"open_tag_budget", uint_field(&TileConfig::open_tag_budget)},
      {"watchdog_cycles", uint_field(&TileConfig::watchdog_cycles)},
      {"frequency_ghz",
       {[](TileConfig& c, std::string_view k, std::string_view v) { c.frequency_ghz = parse_double(k, v); },
        [](const TileConfig& c) { return format_double(c.frequency_ghz); }}},
  };
  return table;
}

void require(bool ok, const char* field, const std::string& why) {
  if (!ok) throw ConfigError(field, why);
}

}  // namespace

void TileConfig::validate() const {
  require(tiles >= 1, "tiles", "must be at least 1");
  require(tile_grid_cols >= 1 && tiles % tile_grid_cols == 0, "tile_grid_cols",
          "must divide tiles");
  require(tile_router_cols >= 1 && routers_per_tile % tile_router_cols == 0, "tile_router_cols",
          "must divide routers_per_tile");
  const std::uint32_t even = (routers_per_tile + 1) / 2;
  const std::uint32_t odd = routers_per_tile / 2;
  require(cores_per_tile >= 1 && cores_per_tile <= even, "cores_per_tile",
          "must fit the tile's even router squares (" + std::to_string(even) + ")");
  require(mems_per_tile >= 1 && mems_per_tile <= std::max(odd, 1u), "mems_per_tile",
          "must fit the tile's odd router squares (" + std::to_string(odd) + ")");
  require(routers_per_tile >= 2, "routers_per_tile", "needs one even and one odd square");
  require(pipelines >= 1, "pipelines", "must be at least 1");
  require(regs_per_pipeline >= 1, "regs_per_pipeline", "must be at least 1");
  require(multipliers >= 1, "multipliers", "must be at least 1");
  require(addr_generators >= 1, "addr_generators", "must be at least 1");
  require(core_ports >= 1 && core_ports <= 8, "core_ports", "must be between 1 and 8");
  require(instr_buffer >= 1, "instr_buffer", "must be at least 1");
  require(decode_latency >= 1, "decode_latency", "must be at least 1");
  require(addrgen_latency >= 1, "addrgen_latency", "must be at least 1");
  require(hashlines >= 2 && std::has_single_bit(hashlines), "hashlines", "must be a power of two >= 2");
  require(engines >= 1 && std::has_single_bit(engines) && engines <= hashlines, "engines",
          "must be a power of two no larger than hashlines");
  require(comparators >= 1 && comparators <= hashlines, "comparators",
          "must be between 1 and hashlines");
  require(mem_ports >= 1 && mem_ports <= 8, "mem_ports", "must be between 1 and 8");
  require(mem_ingress >= 1, "mem_ingress", "must be at least 1");
  require(router_buffer >= 1, "router_buffer", "must be at least 1");
  require(escape_buffer >= 2, "escape_buffer", "must be at least 2 (bubble rule)");
  require(port_buffer >= 1, "port_buffer", "must be at least 1");
  require(ingress_buffer >= 1, "ingress_buffer", "must be at least 1");
  require(hop_latency >= 1, "hop_latency", "must be at least 1");
  require(channel.bandwidth >= 1, "channel_bandwidth", "must be at least 1 byte per cycle");
  require(channel.max_inflight >= 1, "channel_max_inflight", "must be at least 1");
  require(mc_ports >= 1 && mc_ports <= 8, "mc_ports", "must be between 1 and 8");
  require(mc_read_buffer >= 1, "mc_read_buffer", "must be at least 1");
  require(mc_write_buffer >= 1, "mc_write_buffer", "must be at least 1");
  require(coalesce_window >= 1, "coalesce_window", "must be at least 1");
  require(mmh_width == 1 || mmh_width == 2 || mmh_width == 4 || mmh_width == 8, "mmh_width",
          "must be 1, 2, 4 or 8");
  require(drhm_k < 32, "drhm_k", "must be below 32");
  require(dispatch_width >= 1, "dispatch_width", "must be at least 1");
  require(watchdog_cycles >= 1, "watchdog_cycles", "must be at least 1");
  require(frequency_ghz > 0.0, "frequency_ghz", "must be positive");
}

TileConfig preset(std::string_view name) {
  TileConfig c;
  if (name == "tile4") {
    // defaults already hold Tile-4
  } else if (name == "tile16") {
    c.routers_per_tile = 8;
    c.tile_router_cols = 2;
    c.cores_per_tile = 4;
    c.pipelines = 4;
    c.regs_per_pipeline = 8;
    c.multipliers = 4;
    c.addr_generators = 2;
    c.mems_per_tile = 4;
    c.hashlines = 2048;
    c.engines = 4;
    c.comparators = 4;
    c.accumulators = 256;
    c.hashpad_mb = 3.0;
  } else if (name == "tile64" || name == "tile64-hbm256") {
    c.routers_per_tile = 32;
    c.tile_router_cols = 4;
    c.cores_per_tile = 16;
    c.pipelines = 8;
    c.regs_per_pipeline = 16;
    c.multipliers = 8;
    c.addr_generators = 2;
    c.mems_per_tile = 16;
    c.hashlines = 2048;
    c.engines = 8;
    c.comparators = 8;
    c.accumulators = 512;
    c.hashpad_mb = 12.0;
    if (name == "tile64-hbm256") c.channel.bandwidth = 32;
  } else {
    throw ConfigError("preset", "unknown preset '" + std::string(name) +
                                    "' (known: tile4, tile16, tile64, tile64-hbm256)");
  }
  c.preset = std::string(name);
  return c;
}

std::vector<std::string> preset_names() { return {"tile4", "tile16", "tile64", "tile64-hbm256"}; }

void apply_setting(TileConfig& cfg, std::string_view key, std::string_view value) {
  if (key == "preset") {
    cfg = preset(value);
    return;
  }
  if (key == "label") {
    cfg.preset = std::string(value);
    return;
  }
  for (const auto& [name, field] : fields()) {
    if (name == key) {
      field.set(cfg, key, value);
      return;
    }
  }
  throw ConfigError(std::string(key), "unknown configuration key");
}

TileConfig parse_config(std::string_view text, const std::string& origin) {
  TileConfig cfg = preset("tile4");
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(t, origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    apply_setting(cfg, key, value);
  }
  cfg.validate();
  return cfg;
}

TileConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string to_config_text(const TileConfig& cfg) {
  // Every field is written, so the base preset is irrelevant on re-read;
  // the label restores the display name.
  std::string out;
  for (const auto& [name, field] : fields()) out += name + " = " + field.get(cfg) + "\n";
  out += "label = " + cfg.preset + "\n";
  return out;
}

}  // namespace neura
