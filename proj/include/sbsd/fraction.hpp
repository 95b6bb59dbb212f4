#pragma once

#include <compare>
#include <cstdint>

namespace sbsd {

// Exact non-negative ratio of counts. Comparisons use cross multiplication,
// never floating point.
struct Fraction {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  double to_double() const { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); }

  friend std::strong_ordering operator<=>(const Fraction& a, const Fraction& b) {
    const auto lhs = static_cast<unsigned __int128>(a.num) * b.den;
    const auto rhs = static_cast<unsigned __int128>(b.num) * a.den;
    return lhs <=> rhs;
  }
  friend bool operator==(const Fraction& a, const Fraction& b) { return (a <=> b) == 0; }
};

}  // namespace sbsd
