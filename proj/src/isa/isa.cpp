#include "neurasim/isa.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>
#include <string>

namespace neura {

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
}

template <typename T>
T get(std::span<const std::uint8_t> bytes, std::size_t pos) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(static_cast<T>(bytes[pos + i]) << (8 * i));
  }
  return value;
}

void check_mmh4(const MmhInstruction& m) {
  if (m.width != 4) {
    throw std::invalid_argument("only width-4 MMH instructions have a binary encoding (got " +
                                std::to_string(m.width) + ")");
  }
  if ((m.lane_mask_a & 0x0F) == 0 || (m.lane_mask_b & 0x0F) == 0 ||
      (m.lane_mask_a & 0xF0) != 0 || (m.lane_mask_b & 0xF0) != 0) {
    throw std::invalid_argument("MMH4 lane masks must be non-empty 4-bit values");
  }
}

}  // namespace

std::size_t record_size(std::uint8_t first_byte) {
  switch (static_cast<Opcode>(first_byte)) {
    case Opcode::MMH4: return kMmh4Bytes;
    case Opcode::HACC: return kHaccBytes;
    default: {
      char buf[8];
      std::snprintf(buf, sizeof(buf), "0x%02X", first_byte);
      throw DecodeError(std::string("unknown opcode ") + buf);
    }
  }
}

std::vector<std::uint8_t> encode(const Instruction& instr) {
  std::vector<std::uint8_t> out;
  if (const auto* m = std::get_if<MmhInstruction>(&instr)) {
    check_mmh4(*m);
    out.reserve(kMmh4Bytes);
    out.push_back(static_cast<std::uint8_t>(Opcode::MMH4));
    put(out, m->base_addr);
    put(out, m->a_data_addr);
    put(out, m->b_col_ind_addr);
    put(out, m->b_data_addr);
    put(out, m->roll_counter_addr);
    for (std::size_t i = 0; i < 4; ++i) put(out, m->a_row_ids[i]);
    out.push_back(static_cast<std::uint8_t>(m->lane_mask_a | (m->lane_mask_b << 4)));
    out.resize(kMmh4Bytes, 0);
  } else {
    const auto& h = std::get<HaccInstruction>(instr);
    out.reserve(kHaccBytes);
    out.push_back(static_cast<std::uint8_t>(Opcode::HACC));
    put(out, h.tag);
    put(out, std::bit_cast<std::uint64_t>(h.data));
    put(out, h.counter);
  }
  return out;
}

Instruction decode(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw DecodeError("short buffer: no opcode");
  const std::size_t need = record_size(bytes[0]);
  if (bytes.size() < need) {
    throw DecodeError("short buffer: need " + std::to_string(need) + " bytes, have " +
                      std::to_string(bytes.size()));
  }
  if (static_cast<Opcode>(bytes[0]) == Opcode::MMH4) {
    MmhInstruction m;
    m.width = 4;
    m.base_addr = get<std::uint32_t>(bytes, 1);
    m.a_data_addr = get<std::uint32_t>(bytes, 5);
    m.b_col_ind_addr = get<std::uint32_t>(bytes, 9);
    m.b_data_addr = get<std::uint32_t>(bytes, 13);
    m.roll_counter_addr = get<std::uint32_t>(bytes, 17);
    for (std::size_t i = 0; i < 4; ++i) m.a_row_ids[i] = get<std::uint32_t>(bytes, 21 + 4 * i);
    m.lane_mask_a = bytes[37] & 0x0F;
    m.lane_mask_b = bytes[37] >> 4;
    if (m.lane_mask_a == 0 || m.lane_mask_b == 0) throw DecodeError("MMH4 with empty lane mask");
    return m;
  }
  HaccInstruction h;
  h.tag = get<std::uint32_t>(bytes, 1);
  h.data = std::bit_cast<double>(get<std::uint64_t>(bytes, 5));
  h.counter = get<std::uint16_t>(bytes, 13);
  return h;
}

std::vector<std::uint8_t> serialize_stream(std::span<const Instruction> instrs) {
  std::vector<std::uint8_t> out{'N', 'C', 'I', 'S'};
  put(out, kStreamVersion);
  put(out, static_cast<std::uint32_t>(instrs.size()));
  for (const auto& instr : instrs) {
    const auto rec = encode(instr);
    out.insert(out.end(), rec.begin(), rec.end());
  }
  out.push_back(static_cast<std::uint8_t>(Opcode::END));
  return out;
}

std::vector<Instruction> deserialize_stream(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 10 || bytes[0] != 'N' || bytes[1] != 'C' || bytes[2] != 'I' ||
      bytes[3] != 'S') {
    throw DecodeError("not an instruction stream (bad magic)");
  }
  const auto version = get<std::uint16_t>(bytes, 4);
  if (version != kStreamVersion) {
    throw DecodeError("unsupported stream version " + std::to_string(version));
  }
  const auto count = get<std::uint32_t>(bytes, 6);
  std::vector<Instruction> out;
  out.reserve(count);
  std::size_t pos = 10;
  for (std::uint32_t i = 0; i < count; ++i) {
    if (pos >= bytes.size()) throw DecodeError("stream truncated at record " + std::to_string(i));
    const auto rec = bytes.subspan(pos);
    out.push_back(decode(rec));
    pos += record_size(rec[0]);
  }
  if (pos >= bytes.size() || bytes[pos] != static_cast<std::uint8_t>(Opcode::END)) {
    throw DecodeError("missing stream terminator");
  }
  return out;
}

void write_stream(const std::filesystem::path& path, std::span<const Instruction> instrs) {
  const auto bytes = serialize_stream(instrs);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<Instruction> read_stream(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize_stream(bytes);
}

}  // namespace neura
