#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "neurasim/sparse.hpp"

namespace neura {

namespace {

void check_chain(const SparseMatrix& a, const SparseMatrix& b) {
  if (a.n_cols != b.n_rows) {
    throw std::invalid_argument("dimension mismatch: " + std::to_string(a.n_rows) + "x" +
                                std::to_string(a.n_cols) + " times " +
                                std::to_string(b.n_rows) + "x" + std::to_string(b.n_cols));
  }
}

}  // namespace

SparseMatrix oracle_spgemm(const SparseMatrix& a_in, const SparseMatrix& b_in) {
  check_chain(a_in, b_in);
  const SparseMatrix a = convert_layout(a_in, Layout::CSR);
  const SparseMatrix b = convert_layout(b_in, Layout::CSR);

  SparseMatrix c;
  c.n_rows = a.n_rows;
  c.n_cols = b.n_cols;
  c.layout = Layout::CSR;
  c.offsets.assign(static_cast<std::size_t>(c.n_rows) + 1, 0);

  std::vector<double> acc(b.n_cols, 0.0);
  std::vector<std::int64_t> marker(b.n_cols, -1);
  std::vector<Index> touched;
  for (Index r = 0; r < a.n_rows; ++r) {
    touched.clear();
    for (Offset pa = a.offsets[r]; pa < a.offsets[r + 1]; ++pa) {
      const Index k = a.minor_indices[pa];
      const double av = a.values[pa];
      for (Offset pb = b.offsets[k]; pb < b.offsets[k + 1]; ++pb) {
        const Index col = b.minor_indices[pb];
        if (marker[col] != r) {
          marker[col] = r;
          acc[col] = av * b.values[pb];
          touched.push_back(col);
        } else {
          acc[col] += av * b.values[pb];
        }
      }
    }
    std::sort(touched.begin(), touched.end());
    for (Index col : touched) {
      c.minor_indices.push_back(col);
      c.values.push_back(acc[col]);
    }
    c.offsets[r + 1] = c.minor_indices.size();
  }
  return c;
}

BloatReport bloat_analysis(const SparseMatrix& a_in, const SparseMatrix& b_in) {
  check_chain(a_in, b_in);
  const SparseMatrix a = convert_layout(a_in, Layout::CSR);
  const SparseMatrix b = convert_layout(b_in, Layout::CSR);

  BloatReport report;
  for (Index k : a.minor_indices) report.pp_interim += b.offsets[k + 1] - b.offsets[k];
  report.nnz_output = oracle_spgemm(a, b).nnz();
  if (report.nnz_output == 0) {
    report.defined = false;
    report.bloat_percent = std::numeric_limits<double>::quiet_NaN();
    return report;
  }
  const auto pp = static_cast<double>(report.pp_interim);
  const auto nnz = static_cast<double>(report.nnz_output);
  report.bloat_percent = (pp - nnz) / nnz * 100.0;
  return report;
}

}  // namespace neura
