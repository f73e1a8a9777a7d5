#include "qagg/checks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "qagg/simulation.hpp"
#include "qagg/solvers.hpp"

namespace qagg {

bool CheckReport::all_passed() const {
  return std::all_of(properties.begin(), properties.end(),
                     [](const PropertyResult& p) { return p.passed; });
}

std::vector<std::string> CheckReport::failed() const {
  std::vector<std::string> names;
  for (const auto& p : properties) {
    if (!p.passed) names.push_back(p.name);
  }
  return names;
}

namespace {

struct Instance {
  FunctionDictionary dict;
  ResponseVector y;
};

Index uniform_index(Rng& rng, Index lo, Index hi) {
  return std::uniform_int_distribution<Index>(lo, hi)(rng);
}

double uniform_real(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Instance random_instance(Rng& rng, Index n, Index m) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix x(n, m);
  for (Index j = 0; j < m; ++j) {
    for (Index i = 0; i < n; ++i) x(i, j) = normal(rng);
  }
  Vector y(n);
  for (Index i = 0; i < n; ++i) y[i] = normal(rng) + x(i, 0);
  return {FunctionDictionary(std::move(x)), ResponseVector(std::move(y))};
}

// Entries bounded away from zero.
SimplexWeights interior_point(Rng& rng, Index m) {
  Vector w(m);
  for (Index j = 0; j < m; ++j) w[j] = uniform_real(rng, 0.1, 1.0);
  return SimplexWeights(w / accurate_sum(w));
}

// Roughly half the coordinates zeroed.
SimplexWeights sparse_point(Rng& rng, Index m) {
  Vector w(m);
  for (Index j = 0; j < m; ++j) {
    w[j] = uniform_real(rng, 0.0, 1.0) < 0.5 ? 0.0 : uniform_real(rng, 0.0, 1.0);
  }
  if (w.sum() <= 0.0) w[uniform_index(rng, 0, m - 1)] = 1.0;
  return SimplexWeights(w / accurate_sum(w));
}

QConfig random_config(Rng& rng, Index m, EntropyVariant variant) {
  return QConfig{uniform_real(rng, 0.0, 1.0), uniform_real(rng, 0.1, 10.0),
                 interior_point(rng, m), variant};
}

// Q extended to all of (0, inf)^M, for finite differences off the simplex.
double q_extended(const FunctionDictionary& dict, const ResponseVector& y,
                  const QConfig& cfg, const Vector& lambda) {
  const Index n = dict.num_points();
  const Vector h = per_function_empirical_mse(dict, y);
  const Vector r = y.values() - dict.values() * lambda;
  double pen = 0.0;
  for (Index j = 0; j < lambda.size(); ++j) {
    const double ratio = cfg.variant == EntropyVariant::Linear
                             ? 1.0 / cfg.prior[j]
                             : lambda[j] / cfg.prior[j];
    pen += lambda[j] * std::log(ratio);
  }
  return (1.0 - cfg.nu) * r.squaredNorm() / static_cast<double>(n) +
         cfg.nu * lambda.dot(h) + cfg.beta / static_cast<double>(n) * pen;
}

// min hMSE(f_lambda) over the simplex by enumerating supports and solving
// the equality-constrained least squares on each.
double brute_force_projection(const FunctionDictionary& dict, const ResponseVector& y) {
  const Index m = dict.num_functions();
  const double n = static_cast<double>(dict.num_points());
  double best = per_function_empirical_mse(dict, y).minCoeff();
  for (unsigned mask = 1; mask < (1u << m); ++mask) {
    std::vector<Index> s;
    for (Index j = 0; j < m; ++j) {
      if (mask & (1u << j)) s.push_back(j);
    }
    const Index k = static_cast<Index>(s.size());
    if (k < 2) continue;
    const Matrix xs = dict.values()(Eigen::all, s);
    Matrix kkt = Matrix::Zero(k + 1, k + 1);
    kkt.topLeftCorner(k, k) = 2.0 * xs.transpose() * xs / n;
    kkt.block(0, k, k, 1).setOnes();
    kkt.block(k, 0, 1, k).setOnes();
    Vector rhs(k + 1);
    rhs.head(k) = 2.0 * xs.transpose() * y.values() / n;
    rhs[k] = 1.0;
    const Vector sol = kkt.fullPivLu().solve(rhs);
    const Vector w = sol.head(k);
    if (w.minCoeff() < 0.0) continue;
    best = std::min(best, (y.values() - xs * w).squaredNorm() / n);
  }
  return best;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001B3ULL;
  return h;
}

class Suite {
 public:
  Suite(std::uint64_t seed, int cases, const CheckHooks& hooks)
      : seed_(seed), cases_(cases), hooks_(hooks) {}

  CheckReport run() {
    property("gradient_vs_finite_differences", 1e-6, [&](Rng& rng) { return gradient(rng); });
    property("convexity", 1e-10, [&](Rng& rng) { return convexity(rng); });
    property("vertex_collapse", 1e-12, [&](Rng& rng) { return vertex_collapse(rng); });
    property("variance_decomposition", 1e-10, [&](Rng& rng) { return decomposition(rng); });
    property("variance_nonnegative", 0.0, [&](Rng& rng) { return variance_sign(rng); });
    property("exp_weights_shift_invariance", 1e-12, [&](Rng& rng) { return shift(rng); });
    property("reduction_nu1_kl_to_exp", 1e-9, [&](Rng& rng) { return reduction_exp(rng); });
    property("reduction_nu0_linear_to_proj", 1e-8, [&](Rng& rng) { return reduction_proj(rng); });
    property("greedy_sparsity", 0.0, [&](Rng& rng) { return sparsity(rng); });
    property("fully_corrective_monotone", 0.0, [&](Rng& rng) { return monotone(rng); });
    property("greedy_step_optimality", 0.0, [&](Rng& rng) { return step_optimality(rng); });
    property("convergence_rate_bound", 0.0, [&](Rng& rng) { return rate(rng); });
    property("beta_min_ordering", 0.0, [&](Rng& rng) { return beta_order(rng); });
    return std::move(report_);
  }

 private:
  // Each case returns an error that must not exceed the tolerance.
  template <class Fn>
  void property(const std::string& name, double tolerance, Fn fn) {
    PropertyResult result;
    result.name = name;
    result.tolerance = tolerance;
    const std::uint64_t stream = mix64(seed_ ^ fnv1a(name));
    for (int c = 0; c < cases_; ++c) {
      Rng rng(child_seed(stream, static_cast<std::uint64_t>(c)));
      double err = 0.0;
      try {
        err = fn(rng);
      } catch (const Error&) {
        err = std::numeric_limits<double>::infinity();
      }
      if (!(err <= tolerance)) ++result.failures;
      if (!(err <= result.worst)) result.worst = err;
      ++result.cases;
    }
    result.passed = result.failures == 0;
    report_.properties.push_back(std::move(result));
  }

  Vector grad(const FunctionDictionary& d, const ResponseVector& y, const QConfig& c,
              const SimplexWeights& l) const {
    return hooks_.gradient ? hooks_.gradient(d, y, c, l) : q_gradient(d, y, c, l);
  }

  static EntropyVariant any_variant(Rng& rng) {
    return uniform_real(rng, 0.0, 1.0) < 0.5 ? EntropyVariant::Linear
                                             : EntropyVariant::KullbackLeibler;
  }

  double gradient(Rng& rng) const {
    const Index n = uniform_index(rng, 5, 50);
    const Index m = uniform_index(rng, 2, 20);
    const Instance p = random_instance(rng, n, m);
    const QConfig cfg = random_config(rng, m, any_variant(rng));
    const SimplexWeights lambda = interior_point(rng, m);
    const Vector g = grad(p.dict, p.y, cfg, lambda);
    const double q = q_value(p.dict, p.y, cfg, lambda);
    double err = std::abs(q - q_extended(p.dict, p.y, cfg, lambda.weights())) /
                 std::max(1.0, std::abs(q));
    Vector fd(m);
    const double h = 1e-6;
    for (Index j = 0; j < m; ++j) {
      Vector up = lambda.weights();
      Vector down = lambda.weights();
      up[j] += h;
      down[j] -= h;
      fd[j] = (q_extended(p.dict, p.y, cfg, up) - q_extended(p.dict, p.y, cfg, down)) /
              (2.0 * h);
    }
    if (g.size() != m) return std::numeric_limits<double>::infinity();
    err = std::max(err, (g - fd).lpNorm<Eigen::Infinity>() /
                            std::max(1.0, fd.lpNorm<Eigen::Infinity>()));
    return err;
  }

  double convexity(Rng& rng) const {
    const Index m = uniform_index(rng, 2, 15);
    const Instance p = random_instance(rng, uniform_index(rng, 5, 40), m);
    const EntropyVariant v = any_variant(rng);
    const QConfig cfg = random_config(rng, m, v);
    const auto draw = [&] {
      return v == EntropyVariant::Linear ? sparse_point(rng, m) : interior_point(rng, m);
    };
    const SimplexWeights a = draw();
    const SimplexWeights b = draw();
    const double t = uniform_real(rng, 0.0, 1.0);
    const SimplexWeights mid(t * a.weights() + (1.0 - t) * b.weights());
    const double lhs = q_value(p.dict, p.y, cfg, mid);
    const double rhs = t * q_value(p.dict, p.y, cfg, a) +
                       (1.0 - t) * q_value(p.dict, p.y, cfg, b);
    return std::max(0.0, lhs - rhs);
  }

  double vertex_collapse(Rng& rng) const {
    const Index m = uniform_index(rng, 2, 15);
    const Index n = uniform_index(rng, 5, 40);
    const Instance p = random_instance(rng, n, m);
    const QConfig cfg = random_config(rng, m, any_variant(rng));
    const Vector h = per_function_empirical_mse(p.dict, p.y);
    double err = 0.0;
    for (Index j = 0; j < m; ++j) {
      const double q = q_value(p.dict, p.y, cfg, SimplexWeights::vertex(m, j));
      const double expected =
          h[j] + cfg.beta / static_cast<double>(n) * std::log(1.0 / cfg.prior[j]);
      err = std::max(err, std::abs(q - expected) / std::max(1.0, std::abs(expected)));
    }
    return err;
  }

  double decomposition(Rng& rng) const {
    const Index m = uniform_index(rng, 2, 20);
    const Index n = uniform_index(rng, 5, 50);
    const Instance p = random_instance(rng, n, m);
    const SimplexWeights lambda = sparse_point(rng, m);
    const SimplexWeights mu = sparse_point(rng, m);
    const Matrix& x = p.dict.values();
    const Vector f_lambda = x * lambda.weights();
    const Vector f_mu = x * mu.weights();
    double lhs = 0.0;
    for (Index j = 0; j < m; ++j) {
      lhs += lambda[j] * (x.col(j) - f_mu).squaredNorm() / static_cast<double>(n);
    }
    const double rhs = dictionary_variance(p.dict, lambda) +
                       (f_lambda - f_mu).squaredNorm() / static_cast<double>(n);
    return std::abs(lhs - rhs);
  }

  double variance_sign(Rng& rng) const {
    const Index m = uniform_index(rng, 1, 15);
    const Instance p = random_instance(rng, uniform_index(rng, 3, 30), m);
    const double v = dictionary_variance(p.dict, sparse_point(rng, m));
    const double at_vertex =
        dictionary_variance(p.dict, SimplexWeights::vertex(m, uniform_index(rng, 0, m - 1)));
    return std::max(-v, std::abs(at_vertex));
  }

  double shift(Rng& rng) const {
    const Index m = uniform_index(rng, 2, 30);
    const Index n = uniform_index(rng, 5, 100);
    Vector h(m);
    for (Index j = 0; j < m; ++j) h[j] = uniform_real(rng, 0.0, 5.0);
    const SimplexWeights prior = interior_point(rng, m);
    const double beta = uniform_real(rng, 1.0, 20.0);
    const double c = uniform_real(rng, -10.0, 10.0);
    const Vector shifted = h.array() + c;
    return (exponential_weights(h, prior, beta, n).weights() -
            exponential_weights(shifted, prior, beta, n).weights())
        .lpNorm<Eigen::Infinity>();
  }

  double reduction_exp(Rng& rng) const {
    const Index m = uniform_index(rng, 2, 5);
    const Index n = uniform_index(rng, 5, 30);
    const Instance p = random_instance(rng, n, m);
    QConfig cfg = random_config(rng, m, EntropyVariant::KullbackLeibler);
    cfg.nu = 1.0;
    const SimplexWeights w = exponential_weights(
        per_function_empirical_mse(p.dict, p.y), cfg.prior, cfg.beta, n);
    const SimplexWeights ref = reference_minimize(p.dict, p.y, cfg);
    return std::abs(q_value(p.dict, p.y, cfg, w) - q_value(p.dict, p.y, cfg, ref));
  }

  double reduction_proj(Rng& rng) const {
    const Index m = uniform_index(rng, 2, 6);
    const Index n = uniform_index(rng, m + 2, 30);
    const Instance p = random_instance(rng, n, m);
    const QConfig cfg = QConfig::uniform(m, 0.0, uniform_real(rng, 0.1, 10.0));
    const SimplexWeights ref = reference_minimize(p.dict, p.y, cfg);
    return std::abs(mse(p.y, combine(p.dict, ref)) - brute_force_projection(p.dict, p.y));
  }

  struct Traced {
    Instance problem;
    QConfig cfg;
    GmaVariant variant;
    SolveTrace trace;
  };

  Traced random_trace(Rng& rng, int k_max, bool linear_only) const {
    const Index m = uniform_index(rng, 2, 20);
    Instance p = random_instance(rng, uniform_index(rng, 5, 40), m);
    const auto variant = static_cast<GmaVariant>(uniform_index(rng, 0, 3));
    const EntropyVariant ev = linear_only || is_first_order(variant)
                                  ? EntropyVariant::Linear
                                  : any_variant(rng);
    QConfig cfg = random_config(rng, m, ev);
    SolveTrace trace = gma(p.dict, p.y, cfg, variant, k_max);
    return {std::move(p), std::move(cfg), variant, std::move(trace)};
  }

  double sparsity(Rng& rng) const {
    const Traced t = random_trace(rng, static_cast<int>(uniform_index(rng, 1, 15)), false);
    for (int k = 1; k <= t.trace.iterations(); ++k) {
      if (static_cast<int>(t.trace.iterates[k - 1].support().size()) > k) return 1.0;
    }
    return 0.0;
  }

  double monotone(Rng& rng) const {
    const Index m = uniform_index(rng, 2, 20);
    const Instance p = random_instance(rng, uniform_index(rng, 5, 40), m);
    const bool first = uniform_real(rng, 0.0, 1.0) < 0.5;
    const QConfig cfg =
        random_config(rng, m, first ? EntropyVariant::Linear : any_variant(rng));
    const SolveTrace trace =
        gma(p.dict, p.y, cfg, first ? GmaVariant::FirstOrderFC : GmaVariant::ZeroOrderFC,
            static_cast<int>(uniform_index(rng, 2, 12)));
    double err = 0.0;
    for (std::size_t k = 1; k < trace.q_values.size(); ++k) {
      const double rise = trace.q_values[k] - trace.q_values[k - 1];
      err = std::max(err, rise - 1e-12 * std::max(1.0, std::abs(trace.q_values[k - 1])));
    }
    return err;
  }

  double step_optimality(Rng& rng) const {
    const Index m = uniform_index(rng, 2, 15);
    const Instance p = random_instance(rng, uniform_index(rng, 5, 30), m);
    const QConfig cfg = random_config(rng, m, any_variant(rng));
    const int k_max = static_cast<int>(uniform_index(rng, 1, 8));
    const SolveTrace trace = gma(p.dict, p.y, cfg, GmaVariant::ZeroOrder, k_max);
    double err = 0.0;
    Vector prev = Vector::Zero(m);
    for (int k = 1; k <= k_max; ++k) {
      const double alpha = gma_step(k);
      const double got = trace.q_values[static_cast<std::size_t>(k - 1)];
      for (Index j = 0; j < m; ++j) {
        Vector cand = (1.0 - alpha) * prev;
        cand[j] += alpha;
        const double q = q_value(p.dict, p.y, cfg, SimplexWeights(cand));
        err = std::max(err, got - q - 1e-12 * std::max(1.0, std::abs(q)));
      }
      prev = trace.iterates[static_cast<std::size_t>(k - 1)].weights();
    }
    return err;
  }

  double rate(Rng& rng) const {
    const int k_max = static_cast<int>(uniform_index(rng, 1, 60));
    const Traced t = random_trace(rng, k_max, true);
    const Index m = t.problem.dict.num_functions();
    double l2 = 0.0;
    for (Index j = 0; j < m; ++j) l2 = std::max(l2, sq_norm(t.problem.dict.column(j)));
    double q_star = q_value(t.problem.dict, t.problem.y, t.cfg,
                            reference_minimize(t.problem.dict, t.problem.y, t.cfg));
    for (double q : t.trace.q_values) q_star = std::min(q_star, q);
    double err = 0.0;
    for (int k = 1; k <= k_max; ++k) {
      const double bound = 16.0 * (1.0 - t.cfg.nu) * l2 / (k + 3.0);
      err = std::max(err, t.trace.q_values[static_cast<std::size_t>(k - 1)] - q_star - bound);
    }
    return std::max(0.0, err);
  }

  double beta_order(Rng& rng) const {
    const double nu = uniform_real(rng, 0.01, 0.99);
    const double sigma2 = uniform_real(rng, 0.1, 5.0);
    const double floor = beta_min_main(nu, sigma2);
    double prev = std::numeric_limits<double>::infinity();
    double err = 0.0;
    for (int k = 2; k <= 60; ++k) {
      const double b = beta_min_gma(nu, k, sigma2);
      err = std::max(err, b - prev);
      err = std::max(err, floor - b);
      prev = b;
    }
    return err;
  }

  std::uint64_t seed_;
  int cases_;
  const CheckHooks& hooks_;
  CheckReport report_;
};

}  // namespace

CheckReport run_checks(std::uint64_t seed, int cases, const CheckHooks& hooks) {
  if (cases < 1) throw DomainError("check: at least one case is required");
  return Suite(seed, cases, hooks).run();
}

std::string format_report(const CheckReport& report) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-32s %-6s %6s %9s %12s %10s\n", "property",
                "result", "cases", "failures", "worst", "tolerance");
  out << line;
  for (const auto& p : report.properties) {
    std::snprintf(line, sizeof line, "%-32s %-6s %6d %9d %12.3e %10.1e\n",
                  p.name.c_str(), p.passed ? "PASS" : "FAIL", p.cases, p.failures,
                  p.worst, p.tolerance);
    out << line;
  }
  return out.str();
}

}  // namespace qagg
