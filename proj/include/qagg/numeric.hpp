#pragma once

#include <Eigen/Core>

#include <cmath>

namespace qagg {

/// Neumaier's variant of Kahan summation.
template <typename Scalar>
class CompensatedSum {
 public:
  void add(Scalar x) {
    const Scalar t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }

  Scalar value() const { return sum_ + comp_; }

 private:
  Scalar sum_{0};
  Scalar comp_{0};
};

template <typename Derived>
typename Derived::Scalar accurate_sum(const Eigen::DenseBase<Derived>& v) {
  CompensatedSum<typename Derived::Scalar> acc;
  for (Eigen::Index i = 0; i < v.size(); ++i) acc.add(v.derived().coeff(i));
  return acc.value();
}

template <typename A, typename B>
typename A::Scalar accurate_dot(const Eigen::MatrixBase<A>& a,
                                const Eigen::MatrixBase<B>& b) {
  CompensatedSum<typename A::Scalar> acc;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    acc.add(a.derived().coeff(i) * b.derived().coeff(i));
  }
  return acc.value();
}

/// x log(x / p) with the convention 0 log 0 = 0.
template <typename Scalar>
Scalar xlogx_over(Scalar x, Scalar p) {
  return x > Scalar(0) ? x * std::log(x / p) : Scalar(0);
}

}  // namespace qagg
