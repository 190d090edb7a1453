#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "neurasim/isa.hpp"
#include "neurasim/sparse.hpp"

namespace neura {

inline constexpr std::uint32_t kSegmentAlign = 64;

enum class SegmentRole : std::uint8_t { A_DATA, A_ROW_IDS, B_COL_IND, B_DATA, COUNTERS };

struct Segment {
  SegmentRole role = SegmentRole::A_DATA;
  std::uint32_t base = 0;
  std::vector<std::uint8_t> bytes;

  std::uint64_t end() const { return static_cast<std::uint64_t>(base) + bytes.size(); }
  bool operator==(const Segment&) const = default;
};

/// Simulated address space: five read-only input segments in ascending
/// order, followed by a dense write-only output region for C.
struct MemoryImage {
  std::vector<Segment> segments;
  std::uint64_t total_size = 0;  // sum of 64-byte-aligned segment sizes
  std::uint32_t output_rows = 0;
  std::uint32_t output_cols = 0;
  std::uint32_t output_base = 0;

  const Segment& segment(SegmentRole role) const;
  std::uint64_t output_size() const {
    return static_cast<std::uint64_t>(output_rows) * output_cols * sizeof(double);
  }
  bool readable(std::uint64_t addr, std::uint64_t len) const { return addr + len <= total_size; }
  bool writable(std::uint64_t addr, std::uint64_t len) const {
    return addr >= output_base && addr + len <= output_base + output_size();
  }
  std::uint32_t output_address(std::uint32_t tag) const {
    return output_base + tag * static_cast<std::uint32_t>(sizeof(double));
  }

  std::uint16_t read_u16(std::uint32_t addr) const;
  std::uint32_t read_u32(std::uint32_t addr) const;
  double read_f64(std::uint32_t addr) const;

  bool operator==(const MemoryImage&) const = default;
};

class CompileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Places A values, A row ids, B column indices, B values and the rolling
/// counters (little-endian) in that order, each on a 64-byte boundary.
/// Throws CompileError when the image plus output region exceeds 2^32 bytes.
MemoryImage layout_memory(const SparseMatrix& a_csc, const SparseMatrix& b_csr,
                          std::span<const std::uint16_t> counters);

struct CompiledWorkload {
  MemoryImage image;
  std::vector<MmhInstruction> instructions;
  std::vector<std::uint32_t> row_block_boundaries;  // first instruction of each block
  std::uint64_t expected_pp_count = 0;
  std::uint64_t expected_output_nnz = 0;
  std::uint8_t mmh_width = 4;

  std::uint32_t row_block_of(std::size_t instr_index) const;
  std::size_t row_block_count() const { return row_block_boundaries.size(); }
};

/// Tiled Gustavson lowering. Output rows are processed in groups of `width`
/// (one row block each); inside a group every column k of A contributes the
/// group's nonzeros of that column as one A tile, multiplied against row k of
/// B cut into tiles of `width`. One MMH instruction per (A tile, B tile).
CompiledWorkload compile_spgemm(const SparseMatrix& a, const SparseMatrix& b,
                                std::uint8_t width = 4);

/// Aggregation (A.X) and combination ((A.X).W) workloads. The second is
/// compiled from the functional A.X; ReLU is left to the caller.
std::pair<CompiledWorkload, CompiledWorkload> compile_gcn_layer(const SparseMatrix& a,
                                                                const SparseMatrix& x,
                                                                const SparseMatrix& w,
                                                                std::uint8_t width = 4);

/// Zero-latency replay of the instruction stream with HashPad-style counter
/// bookkeeping. Throws CompileError if a counter disagrees with the number of
/// contributions actually seen.
SparseMatrix interpret(const CompiledWorkload& wl);

// Memory-image file: "NCIM" | u16 version | u32 rows | u32 cols | u32 output_base
// | u8 width | u8 segment count | per segment (u8 role, u32 base, u32 size)
// | segment payloads in table order.
inline constexpr std::uint16_t kImageVersion = 1;

void write_image(const std::filesystem::path& path, const MemoryImage& image, std::uint8_t width);
std::pair<MemoryImage, std::uint8_t> read_image(const std::filesystem::path& path);

/// Rebuilds the derived workload fields (row blocks, pp and nnz counts) from
/// an instruction stream and its memory image.
CompiledWorkload reconstruct_workload(MemoryImage image, std::vector<MmhInstruction> instrs,
                                      std::uint8_t width);

}  // namespace neura
