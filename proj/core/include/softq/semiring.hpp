#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace softq {

// Values of the (max, +, -inf) semiring: extended reals encoded as doubles.
// oplus = max, otimes = +, zero = -inf (absorbing under otimes), one = 0.
namespace semiring {

inline constexpr double kZero = -std::numeric_limits<double>::infinity();
inline constexpr double kOne = 0.0;

constexpr bool is_zero(double v) { return v == kZero; }

constexpr double oplus(double a, double b) { return a < b ? b : a; }

constexpr double otimes(double a, double b) {
  if (a == kZero || b == kZero) return kZero;
  return a + b;
}

}  // namespace semiring

// [p]_alpha: p if p >= alpha, else the semiring zero.
double threshold(double p, double alpha);

// beta * [p]_alpha for positive atoms, beta * [1 - p]_alpha for negated ones.
// beta * (-inf) = -inf. Throws std::invalid_argument on NaN or out-of-range input.
double atom_value(double p, double alpha, double beta, bool negated);

// A length-|E| vector of semiring values. StateVector starts at the otimes
// identity (all zeros); UtilityVector is what inference returns.
class SemiringVector {
 public:
  SemiringVector() = default;
  explicit SemiringVector(std::size_t n, double fill = semiring::kOne) : values_(n, fill) {}
  explicit SemiringVector(std::vector<double> values) : values_(std::move(values)) {}

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  // Number of entries that are not the semiring zero.
  std::size_t support() const;
  double max() const;

  // Elementwise oplus / otimes.
  SemiringVector& oplus_assign(const SemiringVector& other);
  SemiringVector& otimes_assign(const SemiringVector& other);
  SemiringVector& otimes_assign(double scalar);

  friend bool operator==(const SemiringVector&, const SemiringVector&) = default;

 private:
  std::vector<double> values_;
};

using StateVector = SemiringVector;
using UtilityVector = SemiringVector;

// Entries strictly below delta2 become the semiring zero; nullopt disables.
StateVector prune_state(const StateVector& state, std::optional<double> delta2);

}  // namespace softq
