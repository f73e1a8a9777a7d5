#pragma once

#include <span>
#include <optional>
#include <string>
#include <vector>

#include "qagg/core.hpp"
#include "qagg/objective.hpp"

namespace qagg {

/// Greedy model averaging flavours. Zero-order variants pick the vertex
/// whose convex step minimizes Q; first-order variants pick the smallest
/// gradient coordinate. The FC variants re-optimize Q over every index
/// selected so far instead of taking the plain convex step.
enum class GmaVariant { ZeroOrder, ZeroOrderFC, FirstOrder, FirstOrderFC };

const char* to_string(GmaVariant v);
bool is_fully_corrective(GmaVariant v);
bool is_first_order(GmaVariant v);

/// Per-iteration record of a greedy run; entry k-1 describes lambda^(k).
struct SolveTrace {
  std::vector<SimplexWeights> iterates;
  std::vector<double> q_values;
  std::vector<Index> selected;

  const SimplexWeights& final() const { return iterates.back(); }
  int iterations() const { return static_cast<int>(iterates.size()); }
};

/// Step size of iteration k (k >= 1): 2 / (k + 1).
inline double gma_step(int k) { return 2.0 / (static_cast<double>(k) + 1.0); }

SolveTrace gma(const FunctionDictionary& dict, const ResponseVector& y,
               const QConfig& cfg, GmaVariant variant, int k_max);

/// Minimizes Q over weights supported on `support`, starting from `warm`
/// (which must already be supported there). The result never has a larger
/// Q than `warm`.
SimplexWeights fully_corrective(const FunctionDictionary& dict,
                                const ResponseVector& y, const QConfig& cfg,
                                std::span<const Index> support,
                                const SimplexWeights& warm);

/// lambda_j proportional to pi_j exp(-n hmse_j / beta).
SimplexWeights exponential_weights(const Vector& hmse, const SimplexWeights& prior,
                                   double beta, Index n);

/// Approximate argmin of hMSE(f_lambda) over the simplex by `iterations`
/// zero-order greedy steps with nu = 0.
SimplexWeights projection_weights(const FunctionDictionary& dict,
                                  const ResponseVector& y,
                                  int iterations = 250);

/// argmin_j hmse_j + (beta / n) log(1 / pi_j), lowest index on ties.
Index erm(const Vector& hmse, const SimplexWeights& prior, double beta, Index n);

/// Empirical risk minimizer followed by the best two-point convex
/// combination of it with any other dictionary function.
SimplexWeights star(const FunctionDictionary& dict, const ResponseVector& y);

/// Scores each temperature in `grid` by k-fold cross-validated held-out
/// error of the exponential weights and returns the best (smallest on ties).
double cv_beta(const FunctionDictionary& dict, const ResponseVector& y,
               const SimplexWeights& prior, std::span<const double> grid,
               int folds = 10);

/// Mean held-out squared error of the exponential weights at temperature
/// beta under contiguous k-fold splitting. Exposed for diagnostics.
double cv_score(const FunctionDictionary& dict, const ResponseVector& y,
                const SimplexWeights& prior, double beta, int folds);

/// scale * 2^i for i = -2..8, with scale = sigma2 when known and the median
/// per-function hMSE otherwise.
std::vector<double> default_beta_grid(std::optional<double> sigma2,
                                      const Vector& hmse);

struct ReferenceOptions {
  int max_sweeps = 20000;
  double tolerance = 1e-15;
};

/// High-accuracy minimizer of Q for small dictionaries by exact pairwise
/// coordinate descent (move mass between two coordinates, minimize along
/// that segment). Independent of the greedy solvers; used as a check oracle.
SimplexWeights reference_minimize(const FunctionDictionary& dict,
                                  const ResponseVector& y, const QConfig& cfg,
                                  const ReferenceOptions& opts = {});

}  // namespace qagg
