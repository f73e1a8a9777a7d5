#pragma once

// The Q-aggregation objective
//
//   Q(lambda) = (1 - nu) hMSE(f_lambda) + nu sum_j lambda_j hMSE(f_j)
//               + (beta / n) K(lambda, pi),
//
// its population counterpart P, the variance V on the dictionary, and the
// temperature thresholds under which the oracle inequalities hold.

#include "qagg/core.hpp"

namespace qagg {

/// Linear: rho = 1, K = sum_j lambda_j log(1/pi_j) (affine in lambda).
/// KullbackLeibler: rho(t) = t, K = KL(lambda || pi).
enum class EntropyVariant { Linear, KullbackLeibler };

const char* to_string(EntropyVariant v);
EntropyVariant parse_entropy_variant(const std::string& name);

struct QConfig {
  double nu;
  double beta;
  SimplexWeights prior;
  EntropyVariant variant;

  /// Uniform prior of the given size, Linear penalty.
  static QConfig uniform(Index num_functions, double nu, double beta,
                         EntropyVariant variant = EntropyVariant::Linear);

  /// Throws DomainError unless 0 <= nu <= 1, beta > 0 and pi > 0.
  void validate() const;
};

/// Slack and confidence parameters of the approximate oracle inequality.
struct BoundParameters {
  double eps_v = 0.0;
  double eps = 0.0;
  double theta = 1.0;
  double delta = 0.05;
  double sigma2 = 1.0;

  /// theta must lie in (eps_v / (nu + eps_v), 1].
  void validate(double nu) const;
};

double entropy_penalty(const SimplexWeights& lambda, const SimplexWeights& prior,
                       EntropyVariant variant);

double q_value(const FunctionDictionary& dict, const ResponseVector& y,
               const QConfig& cfg, const SimplexWeights& lambda);

/// Analytic gradient of Q with respect to lambda. The KL variant is only
/// differentiable in the interior of the simplex; a zero weight throws.
Vector q_gradient(const FunctionDictionary& dict, const ResponseVector& y,
                  const QConfig& cfg, const SimplexWeights& lambda);

/// P(lambda) = (1 - nu) MSE(f_lambda) + nu sum_j lambda_j MSE(f_j).
double p_value(const FunctionDictionary& dict, const ResponseVector& eta,
               double nu, const SimplexWeights& lambda);

/// V(lambda) = sum_j lambda_j ||f_j - f_lambda||^2.
double dictionary_variance(const FunctionDictionary& dict,
                           const SimplexWeights& lambda);

/// 2 sigma^2 / min(nu, 1 - nu); nu must be in (0, 1).
double beta_min_main(double nu, double sigma2);

/// Temperature condition for (eps_v, eps)-approximate minimizers:
/// 2 sigma^2 max{1 / (nu - eps_v (1 - theta) / theta),
///               1 / ((1 - theta)(1 - nu - eps_v))}.
/// Returns +inf at theta = 1 where the second term has no finite bound.
double beta_min_approx(double nu, double eps_v, double theta, double sigma2);

/// Smallest temperature for which k GMA-0 steps are deviation optimal: the
/// infimum over theta of beta_min_approx with eps_v = 4 (1 - nu) / (k + 3),
/// found by golden-section search.
double beta_min_gma(double nu, int k, double sigma2);

/// The theta attaining the infimum in beta_min_gma.
double beta_min_gma_theta(double nu, int k);

/// min_j { MSE(f_j) + (beta / n) log(1 / (pi_j delta)) }. With delta = 1
/// this is the in-expectation bound.
double oracle_bound(const FunctionDictionary& dict, const ResponseVector& eta,
                    const QConfig& cfg, double delta);

/// Vertex form of the approximate-minimizer bound:
/// min_j { MSE(f_j) + eps / theta + (beta / n) log(1 / pi_j) }
///   + (beta / n) log(1 / delta).
double approx_oracle_bound(const FunctionDictionary& dict,
                           const ResponseVector& eta, const QConfig& cfg,
                           const BoundParameters& params);

}  // namespace qagg
