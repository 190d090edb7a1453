#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

namespace neura {

enum class Opcode : std::uint8_t { MMH4 = 0x01, HACC = 0x02, END = 0xFF };

inline constexpr std::size_t kMaxMmhWidth = 8;

/// Multiply instruction. Width 4 is the architectural MMH4; widths 1, 2 and 8
/// exist only as simulator tile-size variants and have no binary encoding.
/// Lane i of A is valid when bit i of lane_mask_a is set (same for B).
struct MmhInstruction {
  std::uint8_t width = 4;
  std::uint32_t base_addr = 0;
  std::uint32_t a_data_addr = 0;
  std::uint32_t b_col_ind_addr = 0;
  std::uint32_t b_data_addr = 0;
  std::uint32_t roll_counter_addr = 0;
  std::array<std::uint32_t, kMaxMmhWidth> a_row_ids{};
  std::uint8_t lane_mask_a = 0;
  std::uint8_t lane_mask_b = 0;

  int lanes_a() const { return std::popcount(lane_mask_a); }
  int lanes_b() const { return std::popcount(lane_mask_b); }
  int lanes() const { return lanes_a() * lanes_b(); }

  bool operator==(const MmhInstruction&) const = default;
};

struct HaccInstruction {
  std::uint32_t tag = 0;
  double data = 0.0;
  std::uint16_t counter = 0;

  bool operator==(const HaccInstruction& o) const {
    // Bitwise so that round-trips distinguish -0.0 and preserve NaN payloads.
    return tag == o.tag && counter == o.counter &&
           std::bit_cast<std::uint64_t>(data) == std::bit_cast<std::uint64_t>(o.data);
  }
};

using Instruction = std::variant<MmhInstruction, HaccInstruction>;

inline constexpr std::size_t kMmh4Bytes = 41;  // 38 bytes of fields + 3 reserved
inline constexpr std::size_t kHaccBytes = 15;

class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Little-endian fixed-width packing. MMH instructions must be width 4 with
/// non-empty lane masks; anything else throws std::invalid_argument.
std::vector<std::uint8_t> encode(const Instruction& instr);

/// Decodes one record from the front of `bytes`.
Instruction decode(std::span<const std::uint8_t> bytes);

/// Record length for the opcode in `first_byte`; throws DecodeError if unknown.
std::size_t record_size(std::uint8_t first_byte);

// Instruction-stream file: "NCIS" | u16 version | u32 count | records | 0xFF.
inline constexpr std::uint16_t kStreamVersion = 1;

std::vector<std::uint8_t> serialize_stream(std::span<const Instruction> instrs);
std::vector<Instruction> deserialize_stream(std::span<const std::uint8_t> bytes);
void write_stream(const std::filesystem::path& path, std::span<const Instruction> instrs);
std::vector<Instruction> read_stream(const std::filesystem::path& path);

}  // namespace neura
