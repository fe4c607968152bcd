#include "softq/sparse_matrix.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "softq/format.hpp"

namespace softq {

namespace {

constexpr std::size_t kDenseComplementLimit = 1024;

void check_square(std::size_t n, std::size_t expected, const char* what) {
  if (n != expected) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

}  // namespace

DefaultSparseMatrix::DefaultSparseMatrix(std::size_t n, double default_value,
                                         std::vector<MatrixCell> cells)
    : n_(n), default_(default_value) {
  std::erase_if(cells, [&](const MatrixCell& c) { return c.value == default_value; });
  for (const auto& c : cells) {
    if (c.row >= n || c.col >= n) throw std::invalid_argument("matrix cell out of range");
  }
  std::sort(cells.begin(), cells.end(), [](const MatrixCell& a, const MatrixCell& b) {
    return a.col != b.col ? a.col < b.col : a.row < b.row;
  });
  for (std::size_t i = 1; i < cells.size(); ++i) {
    if (cells[i].row == cells[i - 1].row && cells[i].col == cells[i - 1].col) {
      throw std::invalid_argument("duplicate matrix cell");
    }
  }
  col_ptr_.assign(n + 1, 0);
  row_ptr_.assign(n + 1, 0);
  col_rows_.reserve(cells.size());
  col_values_.reserve(cells.size());
  for (const auto& c : cells) {
    ++col_ptr_[c.col + 1];
    ++row_ptr_[c.row + 1];
    col_rows_.push_back(c.row);
    col_values_.push_back(c.value);
  }
  std::partial_sum(col_ptr_.begin(), col_ptr_.end(), col_ptr_.begin());
  std::partial_sum(row_ptr_.begin(), row_ptr_.end(), row_ptr_.begin());
  row_cols_.resize(cells.size());
  row_values_.resize(cells.size());
  std::vector<std::uint32_t> fill(row_ptr_.begin(), row_ptr_.end() - 1);
  // Cells are column-major, so each row receives ascending columns.
  for (const auto& c : cells) {
    const auto at = fill[c.row]++;
    row_cols_[at] = c.col;
    row_values_[at] = c.value;
  }
}

double DefaultSparseMatrix::at(std::size_t row, std::size_t col) const {
  if (row >= n_ || col >= n_) throw std::out_of_range("matrix index out of range");
  const auto rows = column_rows(col);
  auto it = std::lower_bound(rows.begin(), rows.end(), row);
  if (it != rows.end() && *it == row) return column_values(col)[it - rows.begin()];
  return default_;
}

std::span<const std::uint32_t> DefaultSparseMatrix::column_rows(std::size_t col) const {
  return std::span(col_rows_).subspan(col_ptr_[col], col_ptr_[col + 1] - col_ptr_[col]);
}

std::span<const double> DefaultSparseMatrix::column_values(std::size_t col) const {
  return std::span(col_values_).subspan(col_ptr_[col], col_ptr_[col + 1] - col_ptr_[col]);
}

std::span<const std::uint32_t> DefaultSparseMatrix::row_cols(std::size_t row) const {
  return std::span(row_cols_).subspan(row_ptr_[row], row_ptr_[row + 1] - row_ptr_[row]);
}

std::span<const double> DefaultSparseMatrix::row_values(std::size_t row) const {
  return std::span(row_values_).subspan(row_ptr_[row], row_ptr_[row + 1] - row_ptr_[row]);
}

std::vector<double> DefaultSparseMatrix::row(std::size_t r) const {
  if (r >= n_) throw std::out_of_range("row out of range");
  std::vector<double> out(n_, default_);
  const auto cols = row_cols(r);
  const auto vals = row_values(r);
  for (std::size_t i = 0; i < cols.size(); ++i) out[cols[i]] = vals[i];
  return out;
}

std::vector<double> DefaultSparseMatrix::column(std::size_t c) const {
  if (c >= n_) throw std::out_of_range("column out of range");
  std::vector<double> out(n_, default_);
  const auto rows = column_rows(c);
  const auto vals = column_values(c);
  for (std::size_t i = 0; i < rows.size(); ++i) out[rows[i]] = vals[i];
  return out;
}

std::vector<double> DefaultSparseMatrix::diagonal() const {
  std::vector<double> out(n_);
  for (std::size_t i = 0; i < n_; ++i) out[i] = at(i, i);
  return out;
}

std::vector<double> DefaultSparseMatrix::to_dense() const {
  std::vector<double> out(n_ * n_, default_);
  for (std::size_t c = 0; c < n_; ++c) {
    const auto rows = column_rows(c);
    const auto vals = column_values(c);
    for (std::size_t i = 0; i < rows.size(); ++i) out[rows[i] * n_ + c] = vals[i];
  }
  return out;
}

std::vector<MatrixCell> DefaultSparseMatrix::cells() const {
  std::vector<MatrixCell> out;
  out.reserve(stored_count());
  for (std::size_t c = 0; c < n_; ++c) {
    const auto rows = column_rows(c);
    const auto vals = column_values(c);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out.push_back({rows[i], static_cast<std::uint32_t>(c), vals[i]});
    }
  }
  return out;
}

DefaultSparseMatrix DefaultSparseMatrix::transposed() const {
  std::vector<MatrixCell> out = cells();
  for (auto& c : out) std::swap(c.row, c.col);
  return DefaultSparseMatrix(n_, default_, std::move(out));
}

DefaultSparseMatrix DefaultSparseMatrix::otimes(const DefaultSparseMatrix& other) const {
  check_square(other.n_, n_, "otimes");
  std::vector<MatrixCell> out;
  out.reserve(stored_count() + other.stored_count());
  for (std::size_t c = 0; c < n_; ++c) {
    const auto ar = column_rows(c), br = other.column_rows(c);
    const auto av = column_values(c), bv = other.column_values(c);
    std::size_t i = 0, j = 0;
    while (i < ar.size() || j < br.size()) {
      std::uint32_t row;
      double a = default_, b = other.default_;
      if (j >= br.size() || (i < ar.size() && ar[i] < br[j])) {
        row = ar[i];
        a = av[i++];
      } else if (i >= ar.size() || br[j] < ar[i]) {
        row = br[j];
        b = bv[j++];
      } else {
        row = ar[i];
        a = av[i++];
        b = bv[j++];
      }
      out.push_back({row, static_cast<std::uint32_t>(c), semiring::otimes(a, b)});
    }
  }
  return DefaultSparseMatrix(n_, semiring::otimes(default_, other.default_), std::move(out));
}

void DefaultSparseMatrix::dump(std::ostream& out) const {
  out << "#default=" << format_double(default_) << '\n';
  std::vector<MatrixCell> sorted = cells();
  std::sort(sorted.begin(), sorted.end(), [](const MatrixCell& a, const MatrixCell& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  for (const auto& c : sorted) {
    out << c.row << '\t' << c.col << '\t' << format_double(c.value) << '\n';
  }
}

ShiftedMatrix::ShiftedMatrix(const DefaultSparseMatrix& base, std::vector<double> row_shift,
                             std::vector<double> col_shift)
    : base_(&base), row_shift_(std::move(row_shift)), col_shift_(std::move(col_shift)) {
  check_square(row_shift_.size(), base.size(), "row_add");
  check_square(col_shift_.size(), base.size(), "col_add");
}

double ShiftedMatrix::at(std::size_t s, std::size_t o) const {
  return semiring::otimes(semiring::otimes(base_->at(s, o), row_shift_[s]), col_shift_[o]);
}

ShiftedMatrix row_add(const DefaultSparseMatrix& m, const StateVector& b) {
  check_square(b.size(), m.size(), "row_add");
  return ShiftedMatrix(m, std::vector<double>(b.values().begin(), b.values().end()),
                       std::vector<double>(m.size(), semiring::kOne));
}

ShiftedMatrix col_add(const DefaultSparseMatrix& m, const StateVector& b) {
  check_square(b.size(), m.size(), "col_add");
  return ShiftedMatrix(m, std::vector<double>(m.size(), semiring::kOne),
                       std::vector<double>(b.values().begin(), b.values().end()));
}

ShiftedMatrix row_add(const ShiftedMatrix& m, const StateVector& b) {
  check_square(b.size(), m.base().size(), "row_add");
  std::vector<double> rows(m.row_shift().begin(), m.row_shift().end());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = semiring::otimes(rows[i], b[i]);
  return ShiftedMatrix(m.base(), std::move(rows),
                       std::vector<double>(m.col_shift().begin(), m.col_shift().end()));
}

ShiftedMatrix col_add(const ShiftedMatrix& m, const StateVector& b) {
  check_square(b.size(), m.base().size(), "col_add");
  std::vector<double> cols(m.col_shift().begin(), m.col_shift().end());
  for (std::size_t i = 0; i < cols.size(); ++i) cols[i] = semiring::otimes(cols[i], b[i]);
  return ShiftedMatrix(m.base(), std::vector<double>(m.row_shift().begin(), m.row_shift().end()),
                       std::move(cols));
}

StateVector column_max(const ShiftedMatrix& m) {
  // The column shift is constant per column and rounding is monotone, so it
  // can be applied after the max without changing a single bit.
  StateVector row_state(std::vector<double>(m.row_shift().begin(), m.row_shift().end()));
  StateVector col_state(std::vector<double>(m.col_shift().begin(), m.col_shift().end()));
  return max_plus_join(row_state, m.base(), col_state);
}

namespace {

StateVector join_dense(const StateVector& c_u, const DefaultSparseMatrix& m,
                       const StateVector& c_v) {
  const std::size_t n = m.size();
  const std::vector<double> dense = m.to_dense();
  StateVector out(n, semiring::kZero);
  for (std::size_t o = 0; o < n; ++o) {
    double best = semiring::kZero;
    for (std::size_t s = 0; s < n; ++s) {
      best = semiring::oplus(best, semiring::otimes(c_u[s], dense[s * n + o]));
    }
    out[o] = semiring::otimes(c_v[o], best);
  }
  return out;
}

// Default is the semiring zero: only stored cells in finite rows matter.
StateVector join_rows(const StateVector& c_u, const DefaultSparseMatrix& m,
                      const StateVector& c_v) {
  const std::size_t n = m.size();
  std::vector<double> best(n, semiring::kZero);
  for (std::size_t s = 0; s < n; ++s) {
    const double cs = c_u[s];
    if (semiring::is_zero(cs)) continue;
    const auto cols = m.row_cols(s);
    const auto vals = m.row_values(s);
    for (std::size_t i = 0; i < cols.size(); ++i) {
      best[cols[i]] = semiring::oplus(best[cols[i]], semiring::otimes(cs, vals[i]));
    }
  }
  StateVector out(n, semiring::kZero);
  for (std::size_t o = 0; o < n; ++o) out[o] = semiring::otimes(c_v[o], best[o]);
  return out;
}

// Finite default: per column, the stored cells plus default + the best C_u
// entry among rows not stored in that column.
StateVector join_columns(const StateVector& c_u, const DefaultSparseMatrix& m,
                         const StateVector& c_v) {
  const std::size_t n = m.size();
  const double d = m.default_value();
  StateVector out(n, semiring::kZero);

  std::vector<std::uint32_t> order;
  std::vector<std::uint32_t> stamp;
  if (n > kDenseComplementLimit) {
    order.reserve(n);
    for (std::uint32_t s = 0; s < n; ++s) {
      if (!semiring::is_zero(c_u[s])) order.push_back(s);
    }
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      return c_u[a] != c_u[b] ? c_u[a] > c_u[b] : a < b;
    });
  } else {
    stamp.assign(n, UINT32_MAX);
  }

  for (std::size_t o = 0; o < n; ++o) {
    const auto rows = m.column_rows(o);
    const auto vals = m.column_values(o);
    double best = semiring::kZero;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      best = semiring::oplus(best, semiring::otimes(c_u[rows[i]], vals[i]));
    }
    if (rows.size() < n) {
      double rest = semiring::kZero;
      if (n > kDenseComplementLimit) {
        // At most |rows| + 1 probes: some entry among the top |rows|+1 is unstored.
        for (std::uint32_t s : order) {
          if (!std::binary_search(rows.begin(), rows.end(), s)) {
            rest = c_u[s];
            break;
          }
        }
      } else {
        for (std::uint32_t s : rows) stamp[s] = static_cast<std::uint32_t>(o);
        for (std::size_t s = 0; s < n; ++s) {
          if (stamp[s] != o) rest = semiring::oplus(rest, c_u[s]);
        }
      }
      best = semiring::oplus(best, semiring::otimes(rest, d));
    }
    out[o] = semiring::otimes(c_v[o], best);
  }
  return out;
}

}  // namespace

StateVector max_plus_join(const StateVector& c_u, const DefaultSparseMatrix& m,
                          const StateVector& c_v, JoinMode mode) {
  check_square(c_u.size(), m.size(), "max_plus_join");
  check_square(c_v.size(), m.size(), "max_plus_join");
  if (mode == JoinMode::kDense) return join_dense(c_u, m, c_v);
  if (semiring::is_zero(m.default_value())) return join_rows(c_u, m, c_v);
  return join_columns(c_u, m, c_v);
}

}  // namespace softq
