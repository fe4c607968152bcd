#include "softq/semiring.hpp"

#include <cmath>
#include <stdexcept>

namespace softq {

double threshold(double p, double alpha) {
  if (std::isnan(p) || std::isnan(alpha)) throw std::invalid_argument("threshold: NaN input");
  return p >= alpha ? p : semiring::kZero;
}

double atom_value(double p, double alpha, double beta, bool negated) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("atom_value: confidence outside [0,1]");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("atom_value: alpha outside [0,1]");
  if (!(beta > 0.0) || std::isinf(beta)) throw std::invalid_argument("atom_value: beta must be positive");
  const double t = threshold(negated ? 1.0 - p : p, alpha);
  if (semiring::is_zero(t)) return semiring::kZero;
  return beta * t;
}

std::size_t SemiringVector::support() const {
  std::size_t n = 0;
  for (double v : values_) n += semiring::is_zero(v) ? 0 : 1;
  return n;
}

double SemiringVector::max() const {
  double m = semiring::kZero;
  for (double v : values_) m = semiring::oplus(m, v);
  return m;
}

SemiringVector& SemiringVector::oplus_assign(const SemiringVector& other) {
  if (other.size() != size()) throw std::invalid_argument("vector size mismatch");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    values_[i] = semiring::oplus(values_[i], other.values_[i]);
  }
  return *this;
}

SemiringVector& SemiringVector::otimes_assign(const SemiringVector& other) {
  if (other.size() != size()) throw std::invalid_argument("vector size mismatch");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    values_[i] = semiring::otimes(values_[i], other.values_[i]);
  }
  return *this;
}

SemiringVector& SemiringVector::otimes_assign(double scalar) {
  for (double& v : values_) v = semiring::otimes(v, scalar);
  return *this;
}

StateVector prune_state(const StateVector& state, std::optional<double> delta2) {
  if (!delta2) return state;
  if (std::isnan(*delta2) || *delta2 < 0.0) throw std::invalid_argument("delta2 must be >= 0");
  StateVector out = state;
  for (double& v : out.values()) {
    if (!semiring::is_zero(v) && v < *delta2) v = semiring::kZero;
  }
  return out;
}

}  // namespace softq
