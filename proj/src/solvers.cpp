#include "qagg/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "greedy_engine.hpp"

namespace qagg {

SimplexWeights exponential_weights(const Vector& hmse, const SimplexWeights& prior,
                                   double beta, Index n) {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw DomainError("exponential_weights: beta must be positive");
  }
  if (n < 1) throw DomainError("exponential_weights: n must be positive");
  if (hmse.size() != prior.size()) {
    throw ContractViolation("exponential_weights: hmse and prior differ in size");
  }
  if (prior.weights().minCoeff() <= 0.0) {
    throw DomainError("exponential_weights: prior must be strictly positive");
  }
  const double scale = static_cast<double>(n) / beta;
  const double shift = scale * hmse.minCoeff();
  Vector logits(hmse.size());
  for (Index j = 0; j < hmse.size(); ++j) {
    logits[j] = std::log(prior[j]) - (scale * hmse[j] - shift);
  }
  logits.array() -= logits.maxCoeff();
  Vector w = logits.unaryExpr([](double v) { return std::exp(v); });
  w /= accurate_sum(w);
  return SimplexWeights(std::move(w));
}

SimplexWeights projection_weights(const FunctionDictionary& dict,
                                  const ResponseVector& y, int iterations) {
  if (iterations < 1) throw DomainError("projection_weights: iterations < 1");
  // With nu = 0, a linear penalty and a flat prior the penalty is constant,
  // so every argmin is that of hMSE(f_lambda).
  const QConfig cfg = QConfig::uniform(dict.num_functions(), 0.0, 1.0);
  return detail::run_gma(dict, y, cfg, GmaVariant::ZeroOrder, iterations, false)
      .final();
}

Index erm(const Vector& hmse, const SimplexWeights& prior, double beta,
          Index n) {
  if (hmse.size() != prior.size()) {
    throw ContractViolation("erm: hmse and prior differ in size");
  }
  if (prior.weights().minCoeff() <= 0.0) {
    throw DomainError("erm: prior must be strictly positive");
  }
  if (n < 1) throw DomainError("erm: n must be positive");
  const double beta_n = beta / static_cast<double>(n);
  Index best = 0;
  double best_value = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < hmse.size(); ++j) {
    const double value = hmse[j] - beta_n * std::log(prior[j]);
    if (value < best_value) {
      best_value = value;
      best = j;
    }
  }
  return best;
}

SimplexWeights star(const FunctionDictionary& dict, const ResponseVector& y) {
  require_compatible(dict, y);
  const Vector hmse = per_function_empirical_mse(dict, y);
  const Index m = dict.num_functions();
  const Index first = erm(hmse, SimplexWeights::uniform(m), 0.0, 1);
  const Vector residual = y.values() - dict.column(first);

  double best_value = hmse[first];
  Index best_j = first;
  double best_t = 0.0;
  for (Index j = 0; j < m; ++j) {
    if (j == first) continue;
    const Vector direction = dict.column(j) - dict.column(first);
    const double dd = sq_norm(direction);
    if (dd <= 0.0) continue;
    const double t = std::clamp(inner_product(residual, direction) / dd, 0.0, 1.0);
    if (t <= 0.0) continue;
    const double value = mse(residual, t * direction);
    if (value < best_value) {
      best_value = value;
      best_j = j;
      best_t = t;
    }
  }
  Vector w = Vector::Zero(m);
  w[first] = 1.0 - best_t;
  w[best_j] += best_t;
  return SimplexWeights(std::move(w));
}

namespace {

struct Fold {
  Index begin;
  Index end;
};

std::vector<Fold> contiguous_folds(Index n, int folds) {
  std::vector<Fold> out;
  const Index base = n / folds;
  const Index extra = n % folds;
  Index start = 0;
  for (int f = 0; f < folds; ++f) {
    const Index len = base + (f < extra ? 1 : 0);
    out.push_back({start, start + len});
    start += len;
  }
  return out;
}

void require_cv_inputs(const FunctionDictionary& dict, const ResponseVector& y,
                       const SimplexWeights& prior, int folds) {
  require_compatible(dict, y);
  if (prior.size() != dict.num_functions()) {
    throw ContractViolation("cv: prior size does not match the dictionary");
  }
  if (folds < 2) throw DomainError("cv: need at least 2 folds");
  if (dict.num_points() < folds) {
    throw DomainError("cv: fewer design points than folds");
  }
}

// Held-out data of one fold plus the training hMSE of every column.
struct FoldData {
  Vector train_hmse;
  Index train_size;
  Matrix test_x;
  Vector test_y;
};

std::vector<FoldData> prepare_folds(const FunctionDictionary& dict,
                                    const ResponseVector& y, int folds) {
  const Index n = dict.num_points();
  const Index m = dict.num_functions();
  std::vector<FoldData> out;
  for (const Fold& fold : contiguous_folds(n, folds)) {
    FoldData data;
    data.train_size = n - (fold.end - fold.begin);
    data.train_hmse.resize(m);
    for (Index j = 0; j < m; ++j) {
      CompensatedSum<double> acc;
      for (Index i = 0; i < n; ++i) {
        if (i >= fold.begin && i < fold.end) continue;
        const double d = y[i] - dict.values()(i, j);
        acc.add(d * d);
      }
      data.train_hmse[j] = acc.value() / static_cast<double>(data.train_size);
    }
    const Index len = fold.end - fold.begin;
    data.test_x = dict.values().middleRows(fold.begin, len);
    data.test_y = y.values().segment(fold.begin, len);
    out.push_back(std::move(data));
  }
  return out;
}

double score_folds(const std::vector<FoldData>& folds,
                   const SimplexWeights& prior, double beta) {
  CompensatedSum<double> total;
  for (const FoldData& fold : folds) {
    const SimplexWeights w =
        exponential_weights(fold.train_hmse, prior, beta, fold.train_size);
    Vector pred = Vector::Zero(fold.test_y.size());
    for (Index j : w.support()) pred.noalias() += w[j] * fold.test_x.col(j);
    total.add(mse(fold.test_y, pred));
  }
  return total.value() / static_cast<double>(folds.size());
}

}  // namespace

double cv_score(const FunctionDictionary& dict, const ResponseVector& y,
                const SimplexWeights& prior, double beta, int folds) {
  require_cv_inputs(dict, y, prior, folds);
  return score_folds(prepare_folds(dict, y, folds), prior, beta);
}

double cv_beta(const FunctionDictionary& dict, const ResponseVector& y,
               const SimplexWeights& prior, std::span<const double> grid,
               int folds) {
  if (grid.empty()) throw DomainError("cv_beta: empty grid");
  for (double b : grid) {
    if (!(b > 0.0) || !std::isfinite(b)) {
      throw DomainError("cv_beta: grid values must be positive");
    }
  }
  require_cv_inputs(dict, y, prior, folds);
  const std::vector<FoldData> data = prepare_folds(dict, y, folds);
  double best_beta = grid[0];
  double best_score = std::numeric_limits<double>::infinity();
  for (double beta : grid) {
    const double score = score_folds(data, prior, beta);
    if (score < best_score || (score == best_score && beta < best_beta)) {
      best_score = score;
      best_beta = beta;
    }
  }
  return best_beta;
}

std::vector<double> default_beta_grid(std::optional<double> sigma2,
                                      const Vector& hmse) {
  double scale;
  if (sigma2) {
    if (!(*sigma2 > 0.0)) throw DomainError("default_beta_grid: sigma2 <= 0");
    scale = *sigma2;
  } else {
    if (hmse.size() == 0) throw DomainError("default_beta_grid: empty hmse");
    std::vector<double> sorted(hmse.data(), hmse.data() + hmse.size());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = sorted.size() / 2;
    scale = sorted.size() % 2 == 1 ? sorted[mid]
                                   : 0.5 * (sorted[mid - 1] + sorted[mid]);
    if (!(scale > 0.0)) scale = 1.0;
  }
  std::vector<double> grid;
  for (int i = -2; i <= 8; ++i) grid.push_back(scale * std::ldexp(1.0, i));
  return grid;
}

namespace {

// Q along lambda + t (e_j - e_i) for the reference solver.
class PairwiseSolver {
 public:
  PairwiseSolver(const FunctionDictionary& dict, const ResponseVector& y,
                 const QConfig& cfg)
      : problem_(detail::make_problem(dict, y, cfg)) {
    const Matrix& x = dict.values();
    const double n = static_cast<double>(x.rows());
    gram_.noalias() = x.transpose() * x;
    gram_ /= n;
    cross_.noalias() = x.transpose() * y.values();
    cross_ /= n;
    yy_ = sq_norm(y.values());
  }

  double objective(const Vector& lambda, const Vector& gl) const {
    const double quad = yy_ - 2.0 * cross_.dot(lambda) + lambda.dot(gl);
    CompensatedSum<double> lin;
    CompensatedSum<double> pen;
    for (Index j = 0; j < lambda.size(); ++j) {
      const double w = lambda[j];
      if (w <= 0.0) continue;
      lin.add(w * problem_.hmse[j]);
      pen.add(problem_.variant == EntropyVariant::Linear
                  ? -w * problem_.log_prior[j]
                  : w * (std::log(w) - problem_.log_prior[j]));
    }
    return (1.0 - problem_.nu) * quad + problem_.nu * lin.value() +
           problem_.beta_n * pen.value();
  }

  // Optimal transfer t in [-lambda_j, lambda_i] from coordinate i to j.
  double best_transfer(const Vector& lambda, const Vector& gl, Index i,
                       Index j) const {
    const double lo = -lambda[j];
    const double hi = lambda[i];
    if (hi - lo <= 0.0) return 0.0;
    const double c = 1.0 - problem_.nu;
    const double r_d = (cross_[j] - gl[j]) - (cross_[i] - gl[i]);
    const double dd =
        std::max(0.0, gram_(j, j) + gram_(i, i) - 2.0 * gram_(i, j));
    const double lin_slope = problem_.nu * (problem_.hmse[j] - problem_.hmse[i]);
    if (problem_.variant == EntropyVariant::Linear) {
      const double slope0 = -2.0 * c * r_d + lin_slope +
                            problem_.beta_n *
                                (problem_.log_prior[i] - problem_.log_prior[j]);
      const double curv = 2.0 * c * dd;
      if (curv > 0.0) return std::clamp(-slope0 / curv, lo, hi);
      if (slope0 < 0.0) return hi;
      if (slope0 > 0.0) return lo;
      return 0.0;
    }
    const auto derivative = [&](double t) {
      return -2.0 * c * r_d + 2.0 * c * t * dd + lin_slope +
             problem_.beta_n *
                 ((std::log(lambda[j] + t) - problem_.log_prior[j]) -
                  (std::log(lambda[i] - t) - problem_.log_prior[i]));
    };
    double a = lo;
    double b = hi;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (a + b);
      if (mid <= a || mid >= b) break;
      if (derivative(mid) > 0.0) {
        b = mid;
      } else {
        a = mid;
      }
    }
    const double t = 0.5 * (a + b);
    // Stay strictly inside so the logarithms remain finite.
    return std::clamp(t, std::nextafter(lo, hi), std::nextafter(hi, lo));
  }

  const Matrix& gram() const { return gram_; }

 private:
  detail::GreedyProblem problem_;
  Matrix gram_;
  Vector cross_;
  double yy_;
};

}  // namespace

SimplexWeights reference_minimize(const FunctionDictionary& dict,
                                  const ResponseVector& y, const QConfig& cfg,
                                  const ReferenceOptions& opts) {
  const PairwiseSolver solver(dict, y, cfg);
  const Index m = dict.num_functions();
  Vector lambda = Vector::Constant(m, 1.0 / static_cast<double>(m));
  Vector gl = solver.gram() * lambda;
  double q = solver.objective(lambda, gl);
  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    for (Index i = 0; i < m; ++i) {
      for (Index j = i + 1; j < m; ++j) {
        const double t = solver.best_transfer(lambda, gl, i, j);
        if (t == 0.0) continue;
        const double new_i = t == lambda[i] ? 0.0 : lambda[i] - t;
        const double new_j = t == -lambda[j] ? 0.0 : lambda[j] + t;
        const double di = new_i - lambda[i];
        const double dj = new_j - lambda[j];
        lambda[i] = new_i;
        lambda[j] = new_j;
        gl.noalias() += di * solver.gram().col(i) + dj * solver.gram().col(j);
      }
    }
    gl.noalias() = solver.gram() * lambda;
    const double next = solver.objective(lambda, gl);
    const bool done = q - next <= opts.tolerance * std::max(1.0, std::abs(q));
    q = std::min(q, next);
    if (done && sweep > 0) break;
  }
  lambda = lambda.cwiseMax(0.0);
  lambda /= accurate_sum(lambda);
  return SimplexWeights(std::move(lambda));
}

}  // namespace qagg
