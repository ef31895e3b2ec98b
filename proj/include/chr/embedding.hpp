#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <ranges>
#include <string>

#include "chr/error.hpp"

namespace chr {

using Embedding = Eigen::VectorXd;
using EmbeddingMatrix = Eigen::MatrixXd;  // one embedding per column

inline constexpr double kZeroNormThreshold = 1e-12;

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& v) {
  if (!v.allFinite()) throw Error(Errc::NonFinite, "embedding has NaN or Inf components");
}

template <typename DerivedA, typename DerivedB>
void require_same_dimension(const Eigen::MatrixBase<DerivedA>& a,
                            const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() != b.size()) {
    throw Error(Errc::DimensionMismatch,
                std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
}

// Accumulates in double whatever the storage scalar is.
template <typename DerivedA, typename DerivedB>
double dot(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  require_same_dimension(a, b);
  return a.template cast<double>().dot(b.template cast<double>());
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> normalize(
    const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  if (v.size() == 0) throw Error(Errc::DimensionMismatch, "empty embedding");
  require_finite(v);
  const double norm = v.template cast<double>().norm();
  if (norm < kZeroNormThreshold) throw Error(Errc::ZeroVector, "cannot normalize a zero vector");
  return (v.template cast<double>() / norm).template cast<Scalar>();
}

template <typename Derived>
bool is_unit(const Eigen::MatrixBase<Derived>& v, double tolerance = 1e-9) {
  return std::abs(v.template cast<double>().norm() - 1.0) <= tolerance;
}

// dot(normalize(a), normalize(b)), clamped to [-1, 1]. Symmetric bit-for-bit.
template <typename DerivedA, typename DerivedB>
double cosine_sim(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  require_same_dimension(a, b);
  const Embedding na = normalize(a.template cast<double>());
  const Embedding nb = normalize(b.template cast<double>());
  return std::clamp(na.dot(nb), -1.0, 1.0);
}

// Componentwise mean, then normalized.
template <std::ranges::input_range Range>
Embedding mean_embedding(const Range& vectors) {
  auto it = std::ranges::begin(vectors);
  const auto end = std::ranges::end(vectors);
  if (it == end) throw Error(Errc::EmptyList, "mean of an empty list");

  Embedding sum = (*it).template cast<double>();
  std::size_t count = 1;
  for (++it; it != end; ++it) {
    require_same_dimension(sum, *it);
    sum += (*it).template cast<double>();
    ++count;
  }
  return normalize(sum / static_cast<double>(count));
}

}  // namespace chr
