#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace neura {

using Index = std::uint32_t;
using Offset = std::uint64_t;

enum class Layout : std::uint8_t { CSR, CSC };

struct Triplet {
  Index row = 0;
  Index col = 0;
  double value = 0.0;
};

/// Compressed sparse matrix. `offsets` runs over the major dimension (rows for
/// CSR, columns for CSC); `minor_indices` are strictly increasing per slice.
struct SparseMatrix {
  Index n_rows = 0;
  Index n_cols = 0;
  Layout layout = Layout::CSR;
  std::vector<Offset> offsets{0};
  std::vector<Index> minor_indices;
  std::vector<double> values;

  std::size_t nnz() const { return values.size(); }
  Index major_dim() const { return layout == Layout::CSR ? n_rows : n_cols; }
  Index minor_dim() const { return layout == Layout::CSR ? n_cols : n_rows; }

  /// Throws std::invalid_argument when the canonical-form invariants fail.
  void validate() const;

  bool operator==(const SparseMatrix&) const = default;

  /// Builds a canonical matrix; duplicate coordinates are summed.
  static SparseMatrix from_triplets(Index n_rows, Index n_cols, Layout layout,
                                    std::vector<Triplet> entries);
  static SparseMatrix identity(Index n, Layout layout = Layout::CSR);
};

/// Row-major (row, col) ordered entries, independent of storage layout.
std::vector<Triplet> to_triplets(const SparseMatrix& m);

SparseMatrix convert_layout(const SparseMatrix& m, Layout target);

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

SparseMatrix parse_matrix_market(std::istream& in, Layout layout = Layout::CSR);
SparseMatrix load_matrix_market(const std::filesystem::path& path,
                                Layout layout = Layout::CSR);
void write_matrix_market(std::ostream& out, const SparseMatrix& m);
void save_matrix_market(const std::filesystem::path& path, const SparseMatrix& m);

/// Reference product: Gustavson with a dense accumulator, k ascending per row.
/// Cancellation zeros stay in the output structure.
SparseMatrix oracle_spgemm(const SparseMatrix& a, const SparseMatrix& b);

struct BloatReport {
  std::uint64_t pp_interim = 0;
  std::uint64_t nnz_output = 0;
  double bloat_percent = 0.0;
  bool defined = true;  // false when nnz_output == 0; bloat_percent is NaN then
};

BloatReport bloat_analysis(const SparseMatrix& a, const SparseMatrix& b);

SparseMatrix relu(SparseMatrix m);

}  // namespace neura
