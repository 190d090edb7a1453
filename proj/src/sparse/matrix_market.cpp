#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "neurasim/sparse.hpp"

namespace neura {

ParseError::ParseError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

SparseMatrix parse_matrix_market(std::istream& in, Layout layout) {
  std::string line;
  std::size_t line_no = 0;

  if (!std::getline(in, line)) throw ParseError(1, "empty input");
  ++line_no;
  std::istringstream header(line);
  std::string banner, object, format, field, symmetry;
  header >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%MatrixMarket") throw ParseError(line_no, "missing %%MatrixMarket banner");
  object = lower(object);
  format = lower(format);
  field = lower(field);
  symmetry = lower(symmetry);
  if (object != "matrix") throw ParseError(line_no, "unsupported object '" + object + "'");
  if (format != "coordinate") {
    throw ParseError(line_no, "unsupported format '" + format + "' (coordinate only)");
  }
  const bool pattern = field == "pattern";
  if (!pattern && field != "real" && field != "integer") {
    throw ParseError(line_no, "unsupported field '" + field + "'");
  }
  const bool symmetric = symmetry == "symmetric";
  if (!symmetric && symmetry != "general") {
    throw ParseError(line_no, "unsupported symmetry '" + symmetry + "'");
  }

  // Size line: first non-comment, non-blank line.
  std::uint64_t rows = 0, cols = 0, declared = 0;
  for (;;) {
    if (!std::getline(in, line)) throw ParseError(line_no + 1, "missing size line");
    ++line_no;
    if (blank(line) || line[0] == '%') continue;
    std::istringstream size_line(line);
    if (!(size_line >> rows >> cols >> declared)) {
      throw ParseError(line_no, "malformed size line");
    }
    break;
  }
  if (rows > std::numeric_limits<Index>::max() || cols > std::numeric_limits<Index>::max()) {
    throw ParseError(line_no, "dimensions exceed 32-bit index range");
  }
  if (symmetric && rows != cols) throw ParseError(line_no, "symmetric matrix must be square");

  std::vector<Triplet> entries;
  entries.reserve(symmetric ? 2 * declared : declared);
  std::uint64_t seen = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line) || line[0] == '%') continue;
    if (seen == declared) throw ParseError(line_no, "more entries than declared");
    std::istringstream entry(line);
    std::uint64_t i = 0, j = 0;
    double v = 1.0;
    if (!(entry >> i >> j)) throw ParseError(line_no, "malformed coordinate entry");
    if (!pattern && !(entry >> v)) throw ParseError(line_no, "missing value");
    if (i < 1 || j < 1 || i > rows || j > cols) {
      throw ParseError(line_no, "coordinate (" + std::to_string(i) + "," + std::to_string(j) +
                                    ") outside " + std::to_string(rows) + "x" +
                                    std::to_string(cols));
    }
    const auto r = static_cast<Index>(i - 1);
    const auto c = static_cast<Index>(j - 1);
    entries.push_back({r, c, v});
    if (symmetric && r != c) entries.push_back({c, r, v});
    ++seen;
  }
  if (seen != declared) {
    throw ParseError(line_no, "expected " + std::to_string(declared) + " entries, found " +
                                  std::to_string(seen));
  }
  return SparseMatrix::from_triplets(static_cast<Index>(rows), static_cast<Index>(cols),
                                     layout, std::move(entries));
}

SparseMatrix load_matrix_market(const std::filesystem::path& path, Layout layout) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return parse_matrix_market(in, layout);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + e.what());
  }
}

void write_matrix_market(std::ostream& out, const SparseMatrix& m) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << m.n_rows << ' ' << m.n_cols << ' ' << m.nnz() << '\n';
  out << std::setprecision(17);
  for (const auto& t : to_triplets(m)) {
    out << t.row + 1 << ' ' << t.col + 1 << ' ' << t.value << '\n';
  }
}

void save_matrix_market(const std::filesystem::path& path, const SparseMatrix& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_matrix_market(out, m);
}

}  // namespace neura
