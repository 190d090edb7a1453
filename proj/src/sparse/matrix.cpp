#include "neurasim/sparse.hpp"

#include <algorithm>
#include <string>

namespace neura {

void SparseMatrix::validate() const {
  const Index major = major_dim();
  const Index minor = minor_dim();
  if (offsets.size() != static_cast<std::size_t>(major) + 1) {
    throw std::invalid_argument("offsets length " + std::to_string(offsets.size()) +
                                " does not match major dimension " +
                                std::to_string(major) + " + 1");
  }
  if (offsets.front() != 0) throw std::invalid_argument("offsets[0] must be 0");
  if (offsets.back() != minor_indices.size() || minor_indices.size() != values.size()) {
    throw std::invalid_argument("offsets[last], minor_indices and values disagree on nnz");
  }
  for (Index s = 0; s < major; ++s) {
    if (offsets[s] > offsets[s + 1]) throw std::invalid_argument("offsets decrease");
    for (Offset p = offsets[s]; p < offsets[s + 1]; ++p) {
      if (minor_indices[p] >= minor) {
        throw std::invalid_argument("minor index " + std::to_string(minor_indices[p]) +
                                    " out of range");
      }
      if (p > offsets[s] && minor_indices[p] <= minor_indices[p - 1]) {
        throw std::invalid_argument("minor indices not strictly increasing in slice " +
                                    std::to_string(s));
      }
    }
  }
}

SparseMatrix SparseMatrix::from_triplets(Index n_rows, Index n_cols, Layout layout,
                                         std::vector<Triplet> entries) {
  SparseMatrix m;
  m.n_rows = n_rows;
  m.n_cols = n_cols;
  m.layout = layout;
  const bool csr = layout == Layout::CSR;
  auto major_of = [csr](const Triplet& t) { return csr ? t.row : t.col; };
  auto minor_of = [csr](const Triplet& t) { return csr ? t.col : t.row; };

  for (const auto& t : entries) {
    if (t.row >= n_rows || t.col >= n_cols) {
      throw std::invalid_argument("triplet (" + std::to_string(t.row) + "," +
                                  std::to_string(t.col) + ") outside " +
                                  std::to_string(n_rows) + "x" + std::to_string(n_cols));
    }
  }
  std::stable_sort(entries.begin(), entries.end(), [&](const Triplet& x, const Triplet& y) {
    if (major_of(x) != major_of(y)) return major_of(x) < major_of(y);
    return minor_of(x) < minor_of(y);
  });

  m.offsets.assign(static_cast<std::size_t>(m.major_dim()) + 1, 0);
  m.minor_indices.reserve(entries.size());
  m.values.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& t = entries[i];
    const bool dup = i > 0 && major_of(entries[i - 1]) == major_of(t) &&
                     minor_of(entries[i - 1]) == minor_of(t);
    if (dup) {
      m.values.back() += t.value;
      continue;
    }
    m.minor_indices.push_back(minor_of(t));
    m.values.push_back(t.value);
    ++m.offsets[major_of(t) + 1];
  }
  for (std::size_t s = 1; s < m.offsets.size(); ++s) m.offsets[s] += m.offsets[s - 1];
  return m;
}

SparseMatrix SparseMatrix::identity(Index n, Layout layout) {
  std::vector<Triplet> entries;
  entries.reserve(n);
  for (Index i = 0; i < n; ++i) entries.push_back({i, i, 1.0});
  return from_triplets(n, n, layout, std::move(entries));
}

std::vector<Triplet> to_triplets(const SparseMatrix& m) {
  const SparseMatrix csr = convert_layout(m, Layout::CSR);
  std::vector<Triplet> out;
  out.reserve(csr.nnz());
  for (Index r = 0; r < csr.n_rows; ++r) {
    for (Offset p = csr.offsets[r]; p < csr.offsets[r + 1]; ++p) {
      out.push_back({r, csr.minor_indices[p], csr.values[p]});
    }
  }
  return out;
}

SparseMatrix convert_layout(const SparseMatrix& m, Layout target) {
  if (m.layout == target) return m;
  // Counting-sort transpose of the index structure; slices come out sorted.
  SparseMatrix out;
  out.n_rows = m.n_rows;
  out.n_cols = m.n_cols;
  out.layout = target;
  const Index new_major = out.major_dim();
  out.offsets.assign(static_cast<std::size_t>(new_major) + 1, 0);
  for (Index idx : m.minor_indices) ++out.offsets[idx + 1];
  for (std::size_t s = 1; s < out.offsets.size(); ++s) out.offsets[s] += out.offsets[s - 1];
  out.minor_indices.resize(m.nnz());
  out.values.resize(m.nnz());
  std::vector<Offset> cursor(out.offsets.begin(), out.offsets.end() - 1);
  for (Index s = 0; s < m.major_dim(); ++s) {
    for (Offset p = m.offsets[s]; p < m.offsets[s + 1]; ++p) {
      const Offset dst = cursor[m.minor_indices[p]]++;
      out.minor_indices[dst] = s;
      out.values[dst] = m.values[p];
    }
  }
  return out;
}

SparseMatrix relu(SparseMatrix m) {
  for (double& v : m.values) v = std::max(v, 0.0);
  return m;
}

}  // namespace neura
