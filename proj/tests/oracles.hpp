#pragma once

// Independent reference computations used only by the tests.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "qagg/core.hpp"
#include "qagg/objective.hpp"

namespace oracle {

using qagg::Index;
using qagg::Matrix;
using qagg::Vector;

inline Matrix gaussian_matrix(std::mt19937_64& rng, Index n, Index m) {
  std::normal_distribution<double> normal;
  Matrix x(n, m);
  for (Index j = 0; j < m; ++j)
    for (Index i = 0; i < n; ++i) x(i, j) = normal(rng);
  return x;
}

inline Vector gaussian_vector(std::mt19937_64& rng, Index n) {
  std::normal_distribution<double> normal;
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

inline Vector interior(std::mt19937_64& rng, Index m) {
  std::uniform_real_distribution<double> u(0.2, 1.0);
  Vector v(m);
  for (Index j = 0; j < m; ++j) v[j] = u(rng);
  return v / v.sum();
}

// Q written out directly from its definition, on any positive vector.
inline double q_direct(const Matrix& x, const Vector& y, double nu, double beta,
                       const Vector& prior, bool kl, const Vector& lambda) {
  const double n = static_cast<double>(x.rows());
  double h_mix = 0.0;
  double pen = 0.0;
  for (Index j = 0; j < x.cols(); ++j) {
    h_mix += lambda[j] * (y - x.col(j)).squaredNorm() / n;
    if (lambda[j] > 0.0) {
      pen += lambda[j] * (kl ? std::log(lambda[j] / prior[j]) : std::log(1.0 / prior[j]));
    }
  }
  return (1.0 - nu) * (y - x * lambda).squaredNorm() / n + nu * h_mix + beta / n * pen;
}

inline Vector central_differences(const std::function<double(const Vector&)>& f,
                                  const Vector& at, double h) {
  Vector g(at.size());
  for (Index j = 0; j < at.size(); ++j) {
    Vector up = at, down = at;
    up[j] += h;
    down[j] -= h;
    g[j] = (f(up) - f(down)) / (2.0 * h);
  }
  return g;
}

// Euclidean projection onto the simplex by sorting.
inline Vector project_simplex(const Vector& v) {
  std::vector<double> u(v.data(), v.data() + v.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double tau = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    cumulative += u[i];
    const double t = (cumulative - 1.0) / static_cast<double>(i + 1);
    if (u[i] - t > 0.0) tau = t;
  }
  return (v.array() - tau).max(0.0).matrix();
}

// FISTA with restarts on the Linear-penalty Q, which is the quadratic
// (1 - nu) ||y - X l||^2 / n plus a linear term.
inline Vector fista_linear_q(const Matrix& x, const Vector& y, double nu, double beta,
                             const Vector& prior, int iterations) {
  const double n = static_cast<double>(x.rows());
  const Index m = x.cols();
  const Matrix gram = x.transpose() * x / n;
  const Vector cross = x.transpose() * y / n;
  Vector lin(m);
  for (Index j = 0; j < m; ++j) {
    lin[j] = nu * (y - x.col(j)).squaredNorm() / n + beta / n * std::log(1.0 / prior[j]);
  }
  const auto grad = [&](const Vector& l) {
    return Vector(2.0 * (1.0 - nu) * (gram * l - cross) + lin);
  };
  const auto value = [&](const Vector& l) {
    return (1.0 - nu) * (l.dot(gram * l) - 2.0 * cross.dot(l)) + lin.dot(l);
  };
  const double lip =
      std::max(2.0 * (1.0 - nu) * Eigen::SelfAdjointEigenSolver<Matrix>(gram).eigenvalues().maxCoeff(),
               1e-12);
  Vector l = Vector::Constant(m, 1.0 / static_cast<double>(m));
  Vector z = l;
  double t = 1.0;
  double prev = value(l);
  for (int it = 0; it < iterations; ++it) {
    const Vector next = project_simplex(z - grad(z) / lip);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double v = value(next);
    if (v > prev) {
      z = l;
      t = 1.0;
      continue;
    }
    z = next + ((t - 1.0) / t_next) * (next - l);
    l = next;
    t = t_next;
    prev = v;
  }
  return l;
}

// min over the simplex of ||y - X l||^2 / n by enumerating supports.
inline double brute_force_projection(const Matrix& x, const Vector& y) {
  const Index m = x.cols();
  const double n = static_cast<double>(x.rows());
  double best = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask < (1u << m); ++mask) {
    std::vector<Index> s;
    for (Index j = 0; j < m; ++j)
      if (mask & (1u << j)) s.push_back(j);
    const Index k = static_cast<Index>(s.size());
    Matrix xs(x.rows(), k);
    for (Index c = 0; c < k; ++c) xs.col(c) = x.col(s[static_cast<std::size_t>(c)]);
    Matrix kkt = Matrix::Zero(k + 1, k + 1);
    kkt.topLeftCorner(k, k) = xs.transpose() * xs;
    kkt.block(0, k, k, 1).setOnes();
    kkt.block(k, 0, 1, k).setOnes();
    Vector rhs(k + 1);
    rhs.head(k) = xs.transpose() * y;
    rhs[k] = 1.0;
    const Vector w = kkt.colPivHouseholderQr().solve(rhs).head(k);
    if (w.minCoeff() < -1e-14) continue;
    best = std::min(best, (y - xs * w).squaredNorm() / n);
  }
  return best;
}

}  // namespace oracle
