#include "neurasim/compiler.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <unordered_map>
#include <unordered_set>

namespace neura {

namespace {

constexpr std::uint64_t kAddressSpace = std::uint64_t{1} << 32;

std::uint64_t align_up(std::uint64_t n) {
  return (n + kSegmentAlign - 1) / kSegmentAlign * kSegmentAlign;
}

template <typename T>
void append_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

template <typename T>
T load_le(const std::uint8_t* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(p[i]) << (8 * i));
  return v;
}

void check_width(std::uint8_t width) {
  if (width != 1 && width != 2 && width != 4 && width != 8) {
    throw CompileError("MMH width must be 1, 2, 4 or 8 (got " + std::to_string(width) + ")");
  }
}

// Intermediate form: operand positions, patched into addresses once the
// counter segment size (and so every segment base) is known.
struct PendingMmh {
  std::uint64_t a_pos;
  std::uint64_t b_pos;
  std::uint8_t na;
  std::uint8_t nb;
  std::array<std::uint32_t, kMaxMmhWidth> rows;
};

}  // namespace

const Segment& MemoryImage::segment(SegmentRole role) const {
  for (const auto& s : segments) {
    if (s.role == role) return s;
  }
  throw std::out_of_range("memory image has no such segment");
}

namespace {

const std::uint8_t* locate(const MemoryImage& img, std::uint32_t addr, std::size_t len) {
  for (const auto& s : img.segments) {
    if (addr >= s.base && static_cast<std::uint64_t>(addr) + len <= s.end()) {
      return s.bytes.data() + (addr - s.base);
    }
  }
  throw std::out_of_range("read of " + std::to_string(len) + " bytes at address " +
                          std::to_string(addr) + " is outside every segment");
}

}  // namespace

std::uint16_t MemoryImage::read_u16(std::uint32_t addr) const {
  return load_le<std::uint16_t>(locate(*this, addr, 2));
}
std::uint32_t MemoryImage::read_u32(std::uint32_t addr) const {
  return load_le<std::uint32_t>(locate(*this, addr, 4));
}
double MemoryImage::read_f64(std::uint32_t addr) const {
  return std::bit_cast<double>(load_le<std::uint64_t>(locate(*this, addr, 8)));
}

MemoryImage layout_memory(const SparseMatrix& a_in, const SparseMatrix& b_in,
                          std::span<const std::uint16_t> counters) {
  const SparseMatrix a = convert_layout(a_in, Layout::CSC);
  const SparseMatrix b = convert_layout(b_in, Layout::CSR);

  std::vector<std::vector<std::uint8_t>> payloads(5);
  for (double v : a.values) append_le(payloads[0], std::bit_cast<std::uint64_t>(v));
  for (Index r : a.minor_indices) append_le(payloads[1], r);
  for (Index c : b.minor_indices) append_le(payloads[2], c);
  for (double v : b.values) append_le(payloads[3], std::bit_cast<std::uint64_t>(v));
  for (std::uint16_t c : counters) append_le(payloads[4], c);

  MemoryImage img;
  img.output_rows = a.n_rows;
  img.output_cols = b.n_cols;
  std::uint64_t cursor = 0;
  for (std::size_t i = 0; i < payloads.size(); ++i) {
    Segment s;
    s.role = static_cast<SegmentRole>(i);
    if (cursor >= kAddressSpace) throw CompileError("memory image exceeds the 32-bit address space");
    s.base = static_cast<std::uint32_t>(cursor);
    cursor += align_up(payloads[i].size());
    s.bytes = std::move(payloads[i]);
    img.segments.push_back(std::move(s));
  }
  img.total_size = cursor;
  if (img.total_size + img.output_size() > kAddressSpace) {
    throw CompileError("memory image (" + std::to_string(img.total_size) + " bytes) plus output (" +
                       std::to_string(img.output_size()) + " bytes) exceeds the 32-bit address space");
  }
  img.output_base = static_cast<std::uint32_t>(img.total_size);
  return img;
}

std::uint32_t CompiledWorkload::row_block_of(std::size_t instr_index) const {
  auto it = std::upper_bound(row_block_boundaries.begin(), row_block_boundaries.end(),
                             static_cast<std::uint32_t>(instr_index));
  if (it == row_block_boundaries.begin()) return 0;
  return static_cast<std::uint32_t>(it - row_block_boundaries.begin() - 1);
}

CompiledWorkload compile_spgemm(const SparseMatrix& a_in, const SparseMatrix& b_in,
                                std::uint8_t width) {
  check_width(width);
  if (a_in.n_cols != b_in.n_rows) {
    throw CompileError("dimension mismatch: A is " + std::to_string(a_in.n_rows) + "x" +
                       std::to_string(a_in.n_cols) + ", B is " + std::to_string(b_in.n_rows) +
                       "x" + std::to_string(b_in.n_cols));
  }
  if (static_cast<std::uint64_t>(a_in.n_rows) * b_in.n_cols >= kAddressSpace) {
    throw CompileError("output index space " + std::to_string(a_in.n_rows) + "x" +
                       std::to_string(b_in.n_cols) + " does not fit a 32-bit TAG");
  }
  const SparseMatrix a = convert_layout(a_in, Layout::CSC);
  const SparseMatrix a_rows = convert_layout(a_in, Layout::CSR);
  const SparseMatrix b = convert_layout(b_in, Layout::CSR);
  const Index ncols = b.n_cols;
  const std::size_t lanes_per_instr = static_cast<std::size_t>(width) * width;

  CompiledWorkload wl;
  wl.mmh_width = width;
  std::vector<PendingMmh> pending;
  std::vector<std::uint16_t> counters;

  // Multiplicity of every output in the current row group, indexed
  // (row - group_start) * ncols + col and reset through `touched`.
  std::vector<std::uint32_t> mult(static_cast<std::size_t>(width) * ncols, 0);
  std::vector<std::size_t> touched;
  std::vector<Offset> cursor(a.offsets.begin(), a.offsets.end() - 1);
  std::vector<Index> cols;

  for (Index g0 = 0; g0 < a.n_rows; g0 += width) {
    const Index g1 = std::min<Index>(a.n_rows, g0 + width);

    // Symbolic pre-pass for this group.
    cols.clear();
    for (Index r = g0; r < g1; ++r) {
      for (Offset p = a_rows.offsets[r]; p < a_rows.offsets[r + 1]; ++p) {
        const Index k = a_rows.minor_indices[p];
        cols.push_back(k);
        for (Offset q = b.offsets[k]; q < b.offsets[k + 1]; ++q) {
          const std::size_t slot = static_cast<std::size_t>(r - g0) * ncols + b.minor_indices[q];
          if (mult[slot]++ == 0) touched.push_back(slot);
        }
      }
    }
    for (std::size_t slot : touched) {
      if (mult[slot] - 1 > std::numeric_limits<std::uint16_t>::max()) {
        throw CompileError("output (" + std::to_string(g0 + slot / ncols) + "," +
                           std::to_string(slot % ncols) + ") has " + std::to_string(mult[slot]) +
                           " contributions; the 16-bit counter cannot hold it");
      }
    }
    std::sort(cols.begin(), cols.end());
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());

    bool block_open = false;
    for (Index k : cols) {
      // The group's nonzeros in column k are contiguous in CSC order.
      const Offset a_begin = cursor[k];
      Offset a_end = a_begin;
      while (a_end < a.offsets[k + 1] && a.minor_indices[a_end] < g1) ++a_end;
      cursor[k] = a_end;
      const Offset b_begin = b.offsets[k];
      const Offset b_end = b.offsets[k + 1];
      if (a_begin == a_end || b_begin == b_end) continue;

      for (Offset bp = b_begin; bp < b_end; bp += width) {
        PendingMmh m{};
        m.a_pos = a_begin;
        m.b_pos = bp;
        m.na = static_cast<std::uint8_t>(a_end - a_begin);
        m.nb = static_cast<std::uint8_t>(std::min<Offset>(width, b_end - bp));
        for (int i = 0; i < m.na; ++i) m.rows[i] = a.minor_indices[a_begin + i];

        if (!block_open) {
          wl.row_block_boundaries.push_back(static_cast<std::uint32_t>(pending.size()));
          block_open = true;
        }
        const std::size_t cbase = counters.size();
        counters.resize(cbase + lanes_per_instr, 0);
        for (int i = 0; i < m.na; ++i) {
          for (int j = 0; j < m.nb; ++j) {
            const std::size_t slot =
                static_cast<std::size_t>(m.rows[i] - g0) * ncols + b.minor_indices[bp + j];
            counters[cbase + static_cast<std::size_t>(i) * width + j] =
                static_cast<std::uint16_t>(mult[slot] - 1);
          }
        }
        wl.expected_pp_count += static_cast<std::uint64_t>(m.na) * m.nb;
        pending.push_back(m);
      }
    }

    wl.expected_output_nnz += touched.size();
    for (std::size_t slot : touched) mult[slot] = 0;
    touched.clear();
  }

  wl.image = layout_memory(a, b, counters);
  const auto& img = wl.image;
  const std::uint32_t a_data = img.segment(SegmentRole::A_DATA).base;
  const std::uint32_t b_ind = img.segment(SegmentRole::B_COL_IND).base;
  const std::uint32_t b_data = img.segment(SegmentRole::B_DATA).base;
  const std::uint32_t cnt = img.segment(SegmentRole::COUNTERS).base;

  wl.instructions.reserve(pending.size());
  for (std::size_t n = 0; n < pending.size(); ++n) {
    const auto& p = pending[n];
    MmhInstruction m;
    m.width = width;
    m.base_addr = 0;
    m.a_data_addr = static_cast<std::uint32_t>(a_data + p.a_pos * 8);
    m.b_col_ind_addr = static_cast<std::uint32_t>(b_ind + p.b_pos * 4);
    m.b_data_addr = static_cast<std::uint32_t>(b_data + p.b_pos * 8);
    m.roll_counter_addr = static_cast<std::uint32_t>(cnt + n * lanes_per_instr * 2);
    m.a_row_ids = p.rows;
    m.lane_mask_a = static_cast<std::uint8_t>((1u << p.na) - 1);
    m.lane_mask_b = static_cast<std::uint8_t>((1u << p.nb) - 1);
    wl.instructions.push_back(m);
  }
  return wl;
}

std::pair<CompiledWorkload, CompiledWorkload> compile_gcn_layer(const SparseMatrix& a,
                                                                const SparseMatrix& x,
                                                                const SparseMatrix& w,
                                                                std::uint8_t width) {
  if (x.n_cols != w.n_rows) {
    throw CompileError("dimension mismatch: X has " + std::to_string(x.n_cols) +
                       " columns, W has " + std::to_string(w.n_rows) + " rows");
  }
  CompiledWorkload aggregation = compile_spgemm(a, x, width);
  const SparseMatrix p = oracle_spgemm(a, x);
  CompiledWorkload combination = compile_spgemm(convert_layout(p, Layout::CSC), w, width);
  return {std::move(aggregation), std::move(combination)};
}

SparseMatrix interpret(const CompiledWorkload& wl) {
  struct Line {
    double data;
    std::uint16_t counter;
    std::uint16_t initial;
  };
  const auto& img = wl.image;
  const std::uint32_t w = wl.mmh_width;
  std::unordered_map<std::uint32_t, Line> pad;
  std::unordered_set<std::uint32_t> evicted_tags;
  std::vector<Triplet> out;

  for (const auto& m : wl.instructions) {
    for (std::uint32_t i = 0; i < w; ++i) {
      if (!(m.lane_mask_a >> i & 1u)) continue;
      const double av = img.read_f64(m.base_addr + m.a_data_addr + i * 8);
      const std::uint32_t row = m.a_row_ids[i];
      for (std::uint32_t j = 0; j < w; ++j) {
        if (!(m.lane_mask_b >> j & 1u)) continue;
        const std::uint32_t col = img.read_u32(m.base_addr + m.b_col_ind_addr + j * 4);
        const double bv = img.read_f64(m.base_addr + m.b_data_addr + j * 8);
        const std::uint16_t counter = img.read_u16(m.base_addr + m.roll_counter_addr + (i * w + j) * 2);
        const std::uint32_t tag = row * img.output_cols + col;
        if (evicted_tags.count(tag)) {
          throw CompileError("tag " + std::to_string(tag) + " received a product after eviction");
        }
        auto it = pad.find(tag);
        if (it == pad.end()) {
          if (counter == 0) {
            out.push_back({row, col, av * bv});
            evicted_tags.insert(tag);
          } else {
            pad.emplace(tag, Line{av * bv, counter, counter});
          }
          continue;
        }
        if (counter != it->second.initial) {
          throw CompileError("tag " + std::to_string(tag) + " carries counters " +
                             std::to_string(it->second.initial) + " and " + std::to_string(counter));
        }
        it->second.data += av * bv;
        if (--it->second.counter == 0) {
          out.push_back({row, col, it->second.data});
          evicted_tags.insert(tag);
          pad.erase(it);
        }
      }
    }
  }
  if (!pad.empty()) {
    throw CompileError(std::to_string(pad.size()) + " outputs never reached a zero counter");
  }
  return SparseMatrix::from_triplets(img.output_rows, img.output_cols, Layout::CSR, std::move(out));
}

void write_image(const std::filesystem::path& path, const MemoryImage& image, std::uint8_t width) {
  std::vector<std::uint8_t> out{'N', 'C', 'I', 'M'};
  append_le(out, kImageVersion);
  append_le(out, image.output_rows);
  append_le(out, image.output_cols);
  append_le(out, image.output_base);
  out.push_back(width);
  out.push_back(static_cast<std::uint8_t>(image.segments.size()));
  for (const auto& s : image.segments) {
    out.push_back(static_cast<std::uint8_t>(s.role));
    append_le(out, s.base);
    append_le(out, static_cast<std::uint32_t>(s.bytes.size()));
  }
  for (const auto& s : image.segments) out.insert(out.end(), s.bytes.begin(), s.bytes.end());

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

std::pair<MemoryImage, std::uint8_t> read_image(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  auto fail = [&](const std::string& why) -> std::runtime_error {
    return std::runtime_error(path.string() + ": " + why);
  };
  constexpr std::size_t kHeader = 4 + 2 + 4 + 4 + 4 + 1 + 1;
  if (bytes.size() < kHeader || std::memcmp(bytes.data(), "NCIM", 4) != 0) {
    throw fail("not a memory image (bad magic)");
  }
  const auto version = load_le<std::uint16_t>(&bytes[4]);
  if (version != kImageVersion) throw fail("unsupported image version " + std::to_string(version));

  MemoryImage img;
  img.output_rows = load_le<std::uint32_t>(&bytes[6]);
  img.output_cols = load_le<std::uint32_t>(&bytes[10]);
  img.output_base = load_le<std::uint32_t>(&bytes[14]);
  const std::uint8_t width = bytes[18];
  const std::uint8_t count = bytes[19];
  std::size_t pos = kHeader;
  if (bytes.size() < pos + count * std::size_t{9}) throw fail("truncated segment table");
  std::vector<std::uint32_t> sizes;
  for (std::uint8_t i = 0; i < count; ++i) {
    Segment s;
    if (bytes[pos] > static_cast<std::uint8_t>(SegmentRole::COUNTERS)) throw fail("unknown segment role");
    s.role = static_cast<SegmentRole>(bytes[pos]);
    s.base = load_le<std::uint32_t>(&bytes[pos + 1]);
    sizes.push_back(load_le<std::uint32_t>(&bytes[pos + 5]));
    pos += 9;
    img.segments.push_back(std::move(s));
  }
  std::uint64_t expect_base = 0;
  for (std::size_t i = 0; i < img.segments.size(); ++i) {
    auto& s = img.segments[i];
    if (bytes.size() < pos + sizes[i]) throw fail("truncated segment payload");
    if (s.base != expect_base) throw fail("segment " + std::to_string(i) + " is not at its aligned base");
    s.bytes.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                   bytes.begin() + static_cast<std::ptrdiff_t>(pos + sizes[i]));
    pos += sizes[i];
    expect_base += align_up(sizes[i]);
  }
  if (pos != bytes.size()) throw fail("trailing bytes after the last segment");
  img.total_size = expect_base;
  if (img.output_base != img.total_size) throw fail("output region does not follow the segments");
  check_width(width);
  return {std::move(img), width};
}

CompiledWorkload reconstruct_workload(MemoryImage image, std::vector<MmhInstruction> instrs,
                                      std::uint8_t width) {
  check_width(width);
  CompiledWorkload wl;
  wl.mmh_width = width;
  wl.image = std::move(image);
  std::unordered_set<std::uint32_t> tags;
  std::int64_t last_group = -1;
  for (std::size_t n = 0; n < instrs.size(); ++n) {
    auto& m = instrs[n];
    m.width = width;
    if (m.lane_mask_a == 0 || m.lane_mask_b == 0) {
      throw CompileError("instruction " + std::to_string(n) + " has an empty lane mask");
    }
    const std::int64_t group = m.a_row_ids[0] / width;
    if (group != last_group) {
      wl.row_block_boundaries.push_back(static_cast<std::uint32_t>(n));
      last_group = group;
    }
    wl.expected_pp_count += static_cast<std::uint64_t>(m.lanes());
    for (std::uint32_t j = 0; j < width; ++j) {
      if (!(m.lane_mask_b >> j & 1u)) continue;
      const std::uint32_t col = wl.image.read_u32(m.base_addr + m.b_col_ind_addr + j * 4);
      for (std::uint32_t i = 0; i < width; ++i) {
        if (m.lane_mask_a >> i & 1u) tags.insert(m.a_row_ids[i] * wl.image.output_cols + col);
      }
    }
  }
  wl.expected_output_nnz = tags.size();
  wl.instructions = std::move(instrs);
  return wl;
}

}  // namespace neura
