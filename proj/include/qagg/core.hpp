#pragma once

// Fixed-design regression algebra. A function is represented by its values
// at the n design points, so a dictionary of M functions is an n x M matrix
// and every norm is the empirical one, ||f||^2 = (1/n) sum_i f_i^2.

#include <Eigen/Core>

#include <string>
#include <vector>

#include "qagg/errors.hpp"
#include "qagg/numeric.hpp"

namespace qagg {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Tolerance on |sum - 1| under which SimplexWeights silently renormalizes.
inline constexpr double kSimplexRenormTol = 1e-9;

namespace detail {

template <typename A, typename B>
void require_same_size(const Eigen::MatrixBase<A>& f,
                       const Eigen::MatrixBase<B>& g, const char* what) {
  if (f.size() != g.size()) {
    throw ContractViolation(std::string(what) + ": length mismatch (" +
                            std::to_string(f.size()) + " vs " +
                            std::to_string(g.size()) + ")");
  }
}

}  // namespace detail

/// Columns are dictionary functions, rows are design points.
class FunctionDictionary {
 public:
  explicit FunctionDictionary(Matrix values);

  Index num_points() const { return values_.rows(); }
  Index num_functions() const { return values_.cols(); }

  const Matrix& values() const { return values_; }
  auto column(Index j) const { return values_.col(j); }

 private:
  Matrix values_;
};

/// Observations Y at the design points (also used to hold eta when known).
class ResponseVector {
 public:
  explicit ResponseVector(Vector values);

  Index size() const { return values_.size(); }
  const Vector& values() const { return values_; }
  double operator[](Index i) const { return values_[i]; }

 private:
  Vector values_;
};

/// A point of the flat simplex with its strictly positive support.
///
/// Construction accepts vectors whose sum is within kSimplexRenormTol of one
/// and divides by the sum; anything further off, or any negative or
/// non-finite entry, is rejected.
class SimplexWeights {
 public:
  explicit SimplexWeights(Vector weights);

  static SimplexWeights vertex(Index size, Index j);
  static SimplexWeights uniform(Index size);

  Index size() const { return weights_.size(); }
  const Vector& weights() const { return weights_; }
  const std::vector<Index>& support() const { return support_; }
  double operator[](Index j) const { return weights_[j]; }

  bool is_vertex() const { return support_.size() == 1; }

 private:
  Vector weights_;
  std::vector<Index> support_;
};

/// <f, g> = (1/n) sum_i f_i g_i, accumulated with compensated summation.
template <typename A, typename B>
typename A::Scalar inner_product(const Eigen::MatrixBase<A>& f,
                                 const Eigen::MatrixBase<B>& g) {
  detail::require_same_size(f, g, "inner_product");
  if (f.size() == 0) throw ContractViolation("inner_product: empty vectors");
  using Scalar = typename A::Scalar;
  return accurate_dot(f, g) / static_cast<Scalar>(f.size());
}

template <typename A>
typename A::Scalar sq_norm(const Eigen::MatrixBase<A>& f) {
  return inner_product(f, f);
}

/// ||target - f||^2. Against eta this is MSE(f); against Y it is hMSE(f).
template <typename A, typename B>
typename A::Scalar mse(const Eigen::MatrixBase<A>& target,
                       const Eigen::MatrixBase<B>& f) {
  detail::require_same_size(target, f, "mse");
  if (f.size() == 0) throw ContractViolation("mse: empty vectors");
  using Scalar = typename A::Scalar;
  CompensatedSum<Scalar> acc;
  for (Index i = 0; i < f.size(); ++i) {
    const Scalar d = target.derived().coeff(i) - f.derived().coeff(i);
    acc.add(d * d);
  }
  return acc.value() / static_cast<Scalar>(f.size());
}

template <typename B>
double mse(const ResponseVector& target, const Eigen::MatrixBase<B>& f) {
  return mse(target.values(), f);
}

/// f_lambda = sum_j lambda_j f_j, visiting only the support of lambda.
Vector combine(const FunctionDictionary& dict, const SimplexWeights& lambda);

/// Entry j is hMSE(f_j) = mse(Y, f_j).
Vector per_function_empirical_mse(const FunctionDictionary& dict,
                                  const ResponseVector& y);

/// Throws ContractViolation unless y.size() == dict.num_points().
void require_compatible(const FunctionDictionary& dict,
                        const ResponseVector& y);
void require_compatible(const FunctionDictionary& dict,
                        const SimplexWeights& lambda);

}  // namespace qagg
