#pragma once

#include "isarah/problems.hpp"
#include "isarah/types.hpp"

#include <initializer_list>
#include <vector>

namespace isarah::test {

inline Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

/// Separable 1-D quadratic f_i(w) = a_i/2 (w - c_i)^2.
inline QuadraticFiniteSum quad_1d(const std::vector<double>& a, const std::vector<double>& c) {
  QuadraticFiniteSum::Matrix A(static_cast<Eigen::Index>(a.size()), 1), C(static_cast<Eigen::Index>(a.size()), 1);
  for (std::size_t i = 0; i < a.size(); ++i) {
    A(static_cast<Eigen::Index>(i), 0) = a[i];
    C(static_cast<Eigen::Index>(i), 0) = c[i];
  }
  return QuadraticFiniteSum(A, C);
}

inline QuadraticFiniteSum quad_1d(const std::vector<double>& a) { return quad_1d(a, std::vector<double>(a.size(), 0.0)); }

inline SampleId id(std::uint64_t i) { return SampleId{i}; }

}  // namespace isarah::test
