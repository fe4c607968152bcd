#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "softq/semiring.hpp"

namespace softq {

struct MatrixCell {
  std::uint32_t row;
  std::uint32_t col;
  double value;
};

// Square |E| x |E| matrix stored as exceptions over one default value.
//
// Canonical form: no stored cell equals the default. Cells are kept in both
// column-major and row-major order so that joins can walk whichever side is
// sparser; iteration within a column (row) is by ascending row (column).
class DefaultSparseMatrix {
 public:
  DefaultSparseMatrix() = default;
  // Throws std::invalid_argument on out-of-range or duplicate cells.
  DefaultSparseMatrix(std::size_t n, double default_value, std::vector<MatrixCell> cells);

  static DefaultSparseMatrix uniform(std::size_t n, double default_value) {
    return DefaultSparseMatrix(n, default_value, {});
  }

  std::size_t size() const { return n_; }
  double default_value() const { return default_; }
  std::size_t stored_count() const { return col_rows_.size(); }

  double at(std::size_t row, std::size_t col) const;

  std::span<const std::uint32_t> column_rows(std::size_t col) const;
  std::span<const double> column_values(std::size_t col) const;
  std::span<const std::uint32_t> row_cols(std::size_t row) const;
  std::span<const double> row_values(std::size_t row) const;

  std::vector<double> row(std::size_t r) const;
  std::vector<double> column(std::size_t c) const;
  std::vector<double> diagonal() const;
  std::vector<double> to_dense() const;  // row-major, n*n
  std::vector<MatrixCell> cells() const;  // column-major order

  DefaultSparseMatrix transposed() const;

  // Applies f to the default and to every stored cell, then re-canonicalizes.
  template <class F>
  DefaultSparseMatrix map(F&& f) const {
    std::vector<MatrixCell> out = cells();
    for (auto& c : out) c.value = f(c.value);
    return DefaultSparseMatrix(n_, f(default_), std::move(out));
  }

  // Cellwise otimes; the defaults combine too.
  DefaultSparseMatrix otimes(const DefaultSparseMatrix& other) const;

  // `#default=<value>` header, then `row\tcol\tvalue` per stored cell.
  void dump(std::ostream& out) const;

 private:
  std::size_t n_ = 0;
  double default_ = semiring::kZero;
  std::vector<std::uint32_t> col_ptr_;
  std::vector<std::uint32_t> col_rows_;
  std::vector<double> col_values_;
  std::vector<std::uint32_t> row_ptr_;
  std::vector<std::uint32_t> row_cols_;
  std::vector<double> row_values_;
};

// Lazy M +_r b / M +_c b. Value at (s, o) is (M(s,o) + row_shift(s)) + col_shift(o);
// never materialized densely.
class ShiftedMatrix {
 public:
  ShiftedMatrix(const DefaultSparseMatrix& base, std::vector<double> row_shift,
                std::vector<double> col_shift);

  double at(std::size_t s, std::size_t o) const;
  const DefaultSparseMatrix& base() const { return *base_; }
  std::span<const double> row_shift() const { return row_shift_; }
  std::span<const double> col_shift() const { return col_shift_; }

 private:
  const DefaultSparseMatrix* base_;
  std::vector<double> row_shift_;
  std::vector<double> col_shift_;
};

ShiftedMatrix row_add(const DefaultSparseMatrix& m, const StateVector& b);
ShiftedMatrix col_add(const DefaultSparseMatrix& m, const StateVector& b);
ShiftedMatrix row_add(const ShiftedMatrix& m, const StateVector& b);
ShiftedMatrix col_add(const ShiftedMatrix& m, const StateVector& b);

// max over s of the shifted matrix, per column o.
StateVector column_max(const ShiftedMatrix& m);

enum class JoinMode {
  kAuto,   // default-aware sparse kernel
  kDense,  // reference: evaluate every (s, o) cell
};

// C_v'(o) = C_v(o) (x) max_s [C_u(s) (x) M(s, o)], honoring M's default for
// unstored cells. Both modes produce bit-identical results.
StateVector max_plus_join(const StateVector& c_u, const DefaultSparseMatrix& m,
                          const StateVector& c_v, JoinMode mode = JoinMode::kAuto);

}  // namespace softq
