#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <limits>
#include <random>

#include "neurasim/isa.hpp"

using namespace neura;

namespace {

Instruction random_instruction(std::mt19937_64& rng) {
  if (rng() & 1) {
    HaccInstruction h;
    h.tag = static_cast<std::uint32_t>(rng());
    h.data = std::bit_cast<double>(rng());
    h.counter = static_cast<std::uint16_t>(rng());
    return h;
  }
  MmhInstruction m;
  m.base_addr = static_cast<std::uint32_t>(rng());
  m.a_data_addr = static_cast<std::uint32_t>(rng());
  m.b_col_ind_addr = static_cast<std::uint32_t>(rng());
  m.b_data_addr = static_cast<std::uint32_t>(rng());
  m.roll_counter_addr = static_cast<std::uint32_t>(rng());
  for (int i = 0; i < 4; ++i) m.a_row_ids[i] = static_cast<std::uint32_t>(rng());
  m.lane_mask_a = static_cast<std::uint8_t>(1 + rng() % 15);
  m.lane_mask_b = static_cast<std::uint8_t>(1 + rng() % 15);
  return m;
}

}  // namespace

TEST_CASE("HACC zero record") {
  auto bytes = encode(HaccInstruction{0, 0.0, 0});
  REQUIRE(bytes.size() == 15);
  CHECK(bytes[0] == 0x02);
  for (std::size_t i = 1; i < bytes.size(); ++i) CHECK(bytes[i] == 0);
  CHECK(std::get<HaccInstruction>(decode(bytes)) == HaccInstruction{0, 0.0, 0});
}

TEST_CASE("HACC field layout") {
  auto bytes = encode(HaccInstruction{0x11223344u, 1.0, 0xBEEF});
  CHECK(bytes[1] == 0x44);
  CHECK(bytes[4] == 0x11);
  CHECK(bytes[12] == 0x3F);  // top byte of 1.0
  CHECK(bytes[11] == 0xF0);
  CHECK(bytes[13] == 0xEF);
  CHECK(bytes[14] == 0xBE);
}

TEST_CASE("MMH4 base address is little-endian at bytes 1..4") {
  MmhInstruction m;
  m.base_addr = 0x10;
  m.lane_mask_a = 1;
  m.lane_mask_b = 1;
  auto bytes = encode(m);
  REQUIRE(bytes.size() == 41);
  CHECK(bytes[0] == 0x01);
  CHECK(bytes[1] == 0x10);
  CHECK(bytes[2] == 0);
  CHECK(bytes[3] == 0);
  CHECK(bytes[4] == 0);
  CHECK(bytes[37] == 0x11);
  CHECK(bytes[38] == 0);
  CHECK(std::get<MmhInstruction>(decode(bytes)) == m);
}

TEST_CASE("property: encode/decode round-trip over 1000 random instructions") {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const auto instr = random_instruction(rng);
    const auto bytes = encode(instr);
    REQUIRE(bytes.size() == record_size(bytes[0]));
    REQUIRE(decode(bytes) == instr);
  }
}

TEST_CASE("NaN and negative zero survive bitwise") {
  HaccInstruction h{5, -0.0, 1};
  CHECK(std::get<HaccInstruction>(decode(encode(h))) == h);
  HaccInstruction n{5, std::numeric_limits<double>::quiet_NaN(), 1};
  CHECK(std::get<HaccInstruction>(decode(encode(n))) == n);
}

TEST_CASE("decode errors") {
  std::vector<std::uint8_t> unknown{0x07, 0, 0};
  CHECK_THROWS_WITH_AS(decode(unknown), "unknown opcode 0x07", DecodeError);
  CHECK_THROWS_AS(decode(std::vector<std::uint8_t>{}), DecodeError);
  auto bytes = encode(HaccInstruction{1, 2.0, 3});
  bytes.pop_back();
  CHECK_THROWS_AS(decode(bytes), DecodeError);
  MmhInstruction m;
  m.lane_mask_a = 1;
  m.lane_mask_b = 1;
  auto mb = encode(m);
  mb[37] = 0x10;  // empty A mask
  CHECK_THROWS_AS(decode(mb), DecodeError);
}

TEST_CASE("encode rejects widths without an encoding and empty masks") {
  MmhInstruction m;
  m.width = 8;
  m.lane_mask_a = 1;
  m.lane_mask_b = 1;
  CHECK_THROWS_AS(encode(m), std::invalid_argument);
  m.width = 4;
  m.lane_mask_a = 0;
  CHECK_THROWS_AS(encode(m), std::invalid_argument);
  m.lane_mask_a = 0x1F;
  CHECK_THROWS_AS(encode(m), std::invalid_argument);
}

TEST_CASE("popcount lanes") {
  MmhInstruction m;
  m.lane_mask_a = 0b1011;
  m.lane_mask_b = 0b0110;
  CHECK(m.lanes() == 6);
}

TEST_CASE("stream serialization") {
  std::mt19937_64 rng(7);
  std::vector<Instruction> instrs;
  for (int i = 0; i < 50; ++i) instrs.push_back(random_instruction(rng));
  auto bytes = serialize_stream(instrs);
  CHECK(bytes[0] == 'N');
  CHECK(bytes.back() == 0xFF);
  CHECK(deserialize_stream(bytes) == instrs);

  auto path = std::filesystem::temp_directory_path() / "neurasim_test_stream.bin";
  write_stream(path, instrs);
  CHECK(read_stream(path) == instrs);
  std::filesystem::remove(path);

  auto missing_end = bytes;
  missing_end.pop_back();
  CHECK_THROWS_AS(deserialize_stream(missing_end), DecodeError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(deserialize_stream(bad_magic), DecodeError);
  auto bad_version = bytes;
  bad_version[4] = 9;
  CHECK_THROWS_AS(deserialize_stream(bad_version), DecodeError);
  CHECK(deserialize_stream(serialize_stream({})).empty());
}
