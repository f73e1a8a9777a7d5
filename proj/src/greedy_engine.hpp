#pragma once

// Incremental machinery shared by the greedy solvers. Q is tracked through
// the residual r = Y - f_lambda so that all M line-search candidates of a
// step are scored from one pass of correlations <r, f_j>:
//
//   hMSE((1-a) f_lambda + a f_j) = (1-a)^2 ||r||^2
//                                  + 2a(1-a) (<r, Y> - <r, f_j>) + a^2 hMSE(f_j)

#include <vector>

#include "qagg/core.hpp"
#include "qagg/objective.hpp"
#include "qagg/solvers.hpp"

namespace qagg::detail {

struct GreedyProblem {
  double nu = 0.5;
  double beta_n = 0.0;  // beta / n
  EntropyVariant variant = EntropyVariant::Linear;
  Vector hmse;          // hMSE(f_j) per column
  Vector log_prior;     // log(pi_j) per column
};

GreedyProblem make_problem(const FunctionDictionary& dict,
                           const ResponseVector& y, const QConfig& cfg);

/// Residual kept explicitly; correlations cost one n x M product per step.
class DenseBackend {
 public:
  DenseBackend(const Matrix& x, const Vector& y);

  Index size() const { return x_.cols(); }
  const Vector& lambda() const { return lambda_; }

  void reset();
  void assign(const Vector& lambda);
  void step(Index j, double alpha);

  void correlations(Vector& out) const;
  double resid_sq() const;
  double resid_dot_y() const;

 private:
  const Matrix& x_;
  const Vector& y_;
  Vector lambda_;
  Vector fitted_;
};

/// Works from the Gram matrix G = X^T X / n; every step is O(M). Used on
/// the small restricted problems of the fully-corrective solver.
class GramBackend {
 public:
  GramBackend(const Matrix& x, const Vector& y);

  Index size() const { return gram_.cols(); }
  const Vector& lambda() const { return lambda_; }

  void reset();
  void assign(const Vector& lambda);
  void step(Index j, double alpha);

  void correlations(Vector& out) const;
  double resid_sq() const;
  double resid_dot_y() const;

 private:
  Matrix gram_;
  Vector cross_;  // X^T y / n
  double yy_;     // ||y||^2
  Vector lambda_;
  Vector gram_lambda_;
};

template <class Backend>
class GreedyEngine {
 public:
  GreedyEngine(const GreedyProblem& problem, Backend& backend)
      : problem_(problem), backend_(backend), corr_(backend.size()) {}

  /// Q at the current weights (which must be on the simplex).
  double objective() const;

  /// argmin_j Q((1 - alpha) lambda + alpha e_j), lowest index on ties.
  Index select_zero_order(double alpha, double* best_q = nullptr);

  /// argmin_j of the Q gradient at the current weights (Linear only).
  Index select_first_order();

  void step(Index j, double alpha) { backend_.step(j, alpha); }

 private:
  double interpolation() const;
  double penalty() const;

  const GreedyProblem& problem_;
  Backend& backend_;
  Vector corr_;
};

/// Restricted zero-order minimization over `support` (sorted, unique),
/// returning the best of the inner run and the supplied candidates. Each
/// candidate is a full-length weight vector supported within `support`.
Vector fully_corrective_impl(const GreedyProblem& problem, const Matrix& x,
                             const Vector& y, const std::vector<Index>& support,
                             const std::vector<Vector>& candidates);

/// gma() with optional trace recording; without it only the final iterate
/// is kept.
SolveTrace run_gma(const FunctionDictionary& dict, const ResponseVector& y,
                   const QConfig& cfg, GmaVariant variant, int k_max,
                   bool record);

}  // namespace qagg::detail
