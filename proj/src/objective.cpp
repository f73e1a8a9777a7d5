#include "qagg/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qagg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_prior(const SimplexWeights& prior) {
  if (prior.weights().minCoeff() <= 0.0) {
    throw DomainError("prior must be strictly positive");
  }
}

void require_nu_open(double nu, const char* what) {
  if (!(nu > 0.0 && nu < 1.0)) {
    throw DomainError(std::string(what) + ": nu must lie in (0, 1)");
  }
}

void require_sigma2(double sigma2, const char* what) {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
    throw DomainError(std::string(what) + ": sigma2 must be positive");
  }
}

}  // namespace

const char* to_string(EntropyVariant v) {
  return v == EntropyVariant::Linear ? "linear" : "kl";
}

EntropyVariant parse_entropy_variant(const std::string& name) {
  if (name == "linear") return EntropyVariant::Linear;
  if (name == "kl") return EntropyVariant::KullbackLeibler;
  throw ConfigError("unknown entropy variant '" + name + "'");
}

QConfig QConfig::uniform(Index num_functions, double nu, double beta,
                         EntropyVariant variant) {
  return QConfig{nu, beta, SimplexWeights::uniform(num_functions), variant};
}

void QConfig::validate() const {
  if (!(nu >= 0.0 && nu <= 1.0)) throw DomainError("nu must lie in [0, 1]");
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw DomainError("beta must be positive and finite");
  }
  require_prior(prior);
}

void BoundParameters::validate(double nu) const {
  if (!(eps_v >= 0.0) || !(eps >= 0.0)) {
    throw DomainError("eps_v and eps must be nonnegative");
  }
  if (!(nu > 0.0) || !(nu + eps_v < 1.0)) {
    throw DomainError("need nu > 0 and nu + eps_v < 1");
  }
  const double lo = eps_v / (nu + eps_v);
  if (!(theta > lo && theta <= 1.0)) {
    throw DomainError("theta must lie in (eps_v / (nu + eps_v), 1]");
  }
  if (!(delta > 0.0 && delta <= 1.0)) {
    throw DomainError("delta must lie in (0, 1]");
  }
  require_sigma2(sigma2, "BoundParameters");
}

double entropy_penalty(const SimplexWeights& lambda, const SimplexWeights& prior,
                       EntropyVariant variant) {
  require_prior(prior);
  if (lambda.size() != prior.size()) {
    throw ContractViolation("entropy_penalty: weights and prior differ in size");
  }
  CompensatedSum<double> acc;
  for (Index j : lambda.support()) {
    const double w = lambda[j];
    if (variant == EntropyVariant::Linear) {
      acc.add(-w * std::log(prior[j]));
    } else {
      acc.add(xlogx_over(w, prior[j]));
    }
  }
  return acc.value();
}

double q_value(const FunctionDictionary& dict, const ResponseVector& y,
               const QConfig& cfg, const SimplexWeights& lambda) {
  cfg.validate();
  require_compatible(dict, y);
  require_compatible(dict, lambda);
  const Vector f = combine(dict, lambda);
  CompensatedSum<double> interp;
  for (Index j : lambda.support()) {
    interp.add(lambda[j] * mse(y.values(), dict.column(j)));
  }
  const double n = static_cast<double>(dict.num_points());
  return (1.0 - cfg.nu) * mse(y.values(), f) + cfg.nu * interp.value() +
         (cfg.beta / n) * entropy_penalty(lambda, cfg.prior, cfg.variant);
}

Vector q_gradient(const FunctionDictionary& dict, const ResponseVector& y,
                  const QConfig& cfg, const SimplexWeights& lambda) {
  cfg.validate();
  require_compatible(dict, y);
  require_compatible(dict, lambda);
  if (cfg.variant == EntropyVariant::KullbackLeibler &&
      lambda.weights().minCoeff() <= 0.0) {
    throw ContractViolation(
        "q_gradient: KL penalty is not differentiable at the simplex boundary");
  }
  const Vector residual = y.values() - combine(dict, lambda);
  const double beta_n = cfg.beta / static_cast<double>(dict.num_points());
  Vector grad(dict.num_functions());
  for (Index j = 0; j < dict.num_functions(); ++j) {
    const double penalty =
        cfg.variant == EntropyVariant::Linear
            ? -std::log(cfg.prior[j])
            : std::log(lambda[j] / cfg.prior[j]) + 1.0;
    grad[j] = -2.0 * (1.0 - cfg.nu) * inner_product(residual, dict.column(j)) +
              cfg.nu * mse(y.values(), dict.column(j)) + beta_n * penalty;
  }
  return grad;
}

double p_value(const FunctionDictionary& dict, const ResponseVector& eta,
               double nu, const SimplexWeights& lambda) {
  if (!(nu >= 0.0 && nu <= 1.0)) throw DomainError("nu must lie in [0, 1]");
  require_compatible(dict, eta);
  require_compatible(dict, lambda);
  CompensatedSum<double> interp;
  for (Index j : lambda.support()) {
    interp.add(lambda[j] * mse(eta.values(), dict.column(j)));
  }
  return (1.0 - nu) * mse(eta.values(), combine(dict, lambda)) +
         nu * interp.value();
}

double dictionary_variance(const FunctionDictionary& dict,
                           const SimplexWeights& lambda) {
  require_compatible(dict, lambda);
  const Vector f = combine(dict, lambda);
  CompensatedSum<double> acc;
  for (Index j : lambda.support()) {
    acc.add(lambda[j] * mse(dict.column(j), f));
  }
  return std::max(0.0, acc.value());
}

double beta_min_main(double nu, double sigma2) {
  require_nu_open(nu, "beta_min_main");
  require_sigma2(sigma2, "beta_min_main");
  return 2.0 * sigma2 / std::min(nu, 1.0 - nu);
}

double beta_min_approx(double nu, double eps_v, double theta, double sigma2) {
  BoundParameters params;
  params.eps_v = eps_v;
  params.theta = theta;
  params.sigma2 = sigma2;
  params.delta = 1.0;
  params.validate(nu);
  const double first = nu - eps_v * (1.0 - theta) / theta;
  const double second = (1.0 - theta) * (1.0 - nu - eps_v);
  if (!(first > 0.0) || !(second > 0.0)) return kInf;
  return 2.0 * sigma2 * std::max(1.0 / first, 1.0 / second);
}

namespace {

double gma_eps_v(double nu, int k) {
  return 4.0 * (1.0 - nu) / (static_cast<double>(k) + 3.0);
}

// Golden-section search of the unimodal max-of-two-hyperbolas objective.
double gma_theta_search(double nu, int k) {
  require_nu_open(nu, "beta_min_gma");
  if (k < 2) throw DomainError("beta_min_gma: k must be at least 2");
  const double eps_v = gma_eps_v(nu, k);
  const auto objective = [&](double theta) {
    const double first = nu - eps_v * (1.0 - theta) / theta;
    const double second = (1.0 - theta) * (1.0 - nu - eps_v);
    if (!(first > 0.0) || !(second > 0.0)) return kInf;
    return std::max(1.0 / first, 1.0 / second);
  };
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = eps_v / (nu + eps_v) + 1e-9;
  double b = 1.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = objective(c);
  double fd = objective(d);
  for (int it = 0; it < 200; ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = objective(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

double beta_min_gma_theta(double nu, int k) { return gma_theta_search(nu, k); }

double beta_min_gma(double nu, int k, double sigma2) {
  require_sigma2(sigma2, "beta_min_gma");
  const double theta = gma_theta_search(nu, k);
  return beta_min_approx(nu, gma_eps_v(nu, k), theta, sigma2);
}

double oracle_bound(const FunctionDictionary& dict, const ResponseVector& eta,
                    const QConfig& cfg, double delta) {
  cfg.validate();
  require_compatible(dict, eta);
  if (!(delta > 0.0 && delta <= 1.0)) {
    throw DomainError("oracle_bound: delta must lie in (0, 1]");
  }
  const double beta_n = cfg.beta / static_cast<double>(dict.num_points());
  double best = kInf;
  for (Index j = 0; j < dict.num_functions(); ++j) {
    const double value = mse(eta.values(), dict.column(j)) +
                         beta_n * std::log(1.0 / (cfg.prior[j] * delta));
    best = std::min(best, value);
  }
  return best;
}

double approx_oracle_bound(const FunctionDictionary& dict,
                           const ResponseVector& eta, const QConfig& cfg,
                           const BoundParameters& params) {
  params.validate(cfg.nu);
  const double beta_n = cfg.beta / static_cast<double>(dict.num_points());
  return oracle_bound(dict, eta, cfg, 1.0) + params.eps / params.theta +
         beta_n * std::log(1.0 / params.delta);
}

}  // namespace qagg
