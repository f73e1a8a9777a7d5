#include <algorithm>
#include <cmath>
#include <limits>

#include "greedy_engine.hpp"
#include "qagg/solvers.hpp"

namespace qagg {

namespace detail {

GreedyProblem make_problem(const FunctionDictionary& dict,
                           const ResponseVector& y, const QConfig& cfg) {
  cfg.validate();
  require_compatible(dict, y);
  if (cfg.prior.size() != dict.num_functions()) {
    throw ContractViolation("prior size does not match the dictionary");
  }
  GreedyProblem p;
  p.nu = cfg.nu;
  p.beta_n = cfg.beta / static_cast<double>(dict.num_points());
  p.variant = cfg.variant;
  p.hmse = per_function_empirical_mse(dict, y);
  p.log_prior = cfg.prior.weights().array().log().matrix();
  return p;
}

DenseBackend::DenseBackend(const Matrix& x, const Vector& y) : x_(x), y_(y) {
  reset();
}

void DenseBackend::reset() {
  lambda_ = Vector::Zero(x_.cols());
  fitted_ = Vector::Zero(x_.rows());
}

void DenseBackend::assign(const Vector& lambda) {
  lambda_ = lambda;
  fitted_ = Vector::Zero(x_.rows());
  for (Index j = 0; j < lambda_.size(); ++j) {
    if (lambda_[j] != 0.0) fitted_.noalias() += lambda_[j] * x_.col(j);
  }
}

void DenseBackend::step(Index j, double alpha) {
  lambda_ *= (1.0 - alpha);
  lambda_[j] += alpha;
  fitted_ *= (1.0 - alpha);
  fitted_.noalias() += alpha * x_.col(j);
}

void DenseBackend::correlations(Vector& out) const {
  const Vector r = y_ - fitted_;
  out.noalias() = x_.transpose() * r;
  out /= static_cast<double>(x_.rows());
}

double DenseBackend::resid_sq() const { return mse(y_, fitted_); }

double DenseBackend::resid_dot_y() const {
  return inner_product(y_ - fitted_, y_);
}

GramBackend::GramBackend(const Matrix& x, const Vector& y) {
  const double n = static_cast<double>(x.rows());
  gram_.noalias() = x.transpose() * x;
  gram_ /= n;
  cross_.noalias() = x.transpose() * y;
  cross_ /= n;
  yy_ = sq_norm(y);
  reset();
}

void GramBackend::reset() {
  lambda_ = Vector::Zero(gram_.cols());
  gram_lambda_ = Vector::Zero(gram_.cols());
}

void GramBackend::assign(const Vector& lambda) {
  lambda_ = lambda;
  gram_lambda_.noalias() = gram_ * lambda_;
}

void GramBackend::step(Index j, double alpha) {
  lambda_ *= (1.0 - alpha);
  lambda_[j] += alpha;
  gram_lambda_ *= (1.0 - alpha);
  gram_lambda_.noalias() += alpha * gram_.col(j);
}

void GramBackend::correlations(Vector& out) const {
  out = cross_ - gram_lambda_;
}

double GramBackend::resid_sq() const {
  return std::max(0.0, yy_ - 2.0 * cross_.dot(lambda_) +
                           lambda_.dot(gram_lambda_));
}

double GramBackend::resid_dot_y() const { return yy_ - cross_.dot(lambda_); }

template <class Backend>
double GreedyEngine<Backend>::interpolation() const {
  const Vector& lambda = backend_.lambda();
  CompensatedSum<double> acc;
  for (Index j = 0; j < lambda.size(); ++j) {
    if (lambda[j] > 0.0) acc.add(lambda[j] * problem_.hmse[j]);
  }
  return acc.value();
}

template <class Backend>
double GreedyEngine<Backend>::penalty() const {
  const Vector& lambda = backend_.lambda();
  CompensatedSum<double> acc;
  for (Index j = 0; j < lambda.size(); ++j) {
    const double w = lambda[j];
    if (w <= 0.0) continue;
    if (problem_.variant == EntropyVariant::Linear) {
      acc.add(-w * problem_.log_prior[j]);
    } else {
      acc.add(w * (std::log(w) - problem_.log_prior[j]));
    }
  }
  return acc.value();
}

template <class Backend>
double GreedyEngine<Backend>::objective() const {
  return (1.0 - problem_.nu) * backend_.resid_sq() +
         problem_.nu * interpolation() + problem_.beta_n * penalty();
}

namespace {

double entropy_term(double w, double log_prior) {
  return w > 0.0 ? w * (std::log(w) - log_prior) : 0.0;
}

}  // namespace

template <class Backend>
Index GreedyEngine<Backend>::select_zero_order(double alpha, double* best_q) {
  backend_.correlations(corr_);
  const Vector& lambda = backend_.lambda();
  const double keep = 1.0 - alpha;
  const double rr = backend_.resid_sq();
  const double ry = backend_.resid_dot_y();
  const double lin = interpolation();
  const double pen = penalty();
  const bool kl = problem_.variant == EntropyVariant::KullbackLeibler;
  // Entropy of the shrunk weights (1 - alpha) lambda, before adding e_j.
  const double kl_base = keep > 0.0 ? keep * (pen + std::log(keep)) : 0.0;

  Index best = 0;
  double best_value = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < lambda.size(); ++j) {
    const double h = problem_.hmse[j];
    const double quad = keep * keep * rr +
                        2.0 * alpha * keep * (ry - corr_[j]) +
                        alpha * alpha * h;
    const double interp = keep * lin + alpha * h;
    double k_j;
    if (kl) {
      const double shrunk = keep * lambda[j];
      k_j = kl_base - entropy_term(shrunk, problem_.log_prior[j]) +
            entropy_term(shrunk + alpha, problem_.log_prior[j]);
    } else {
      k_j = keep * pen - alpha * problem_.log_prior[j];
    }
    const double value = (1.0 - problem_.nu) * std::max(0.0, quad) +
                         problem_.nu * interp + problem_.beta_n * k_j;
    if (value < best_value) {
      best_value = value;
      best = j;
    }
  }
  if (best_q != nullptr) *best_q = best_value;
  return best;
}

template <class Backend>
Index GreedyEngine<Backend>::select_first_order() {
  if (problem_.variant != EntropyVariant::Linear) {
    throw ConfigError("first-order greedy steps require the linear penalty");
  }
  backend_.correlations(corr_);
  Index best = 0;
  double best_value = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < corr_.size(); ++j) {
    const double grad = -2.0 * (1.0 - problem_.nu) * corr_[j] +
                        problem_.nu * problem_.hmse[j] -
                        problem_.beta_n * problem_.log_prior[j];
    if (grad < best_value) {
      best_value = grad;
      best = j;
    }
  }
  return best;
}

template class GreedyEngine<DenseBackend>;
template class GreedyEngine<GramBackend>;

Vector fully_corrective_impl(const GreedyProblem& problem, const Matrix& x,
                             const Vector& y, const std::vector<Index>& support,
                             const std::vector<Vector>& candidates) {
  const auto s = static_cast<Index>(support.size());
  const Matrix x_s = x(Eigen::all, support);
  GreedyProblem restricted;
  restricted.nu = problem.nu;
  restricted.beta_n = problem.beta_n;
  restricted.variant = problem.variant;
  restricted.hmse = problem.hmse(support);
  restricted.log_prior = problem.log_prior(support);

  GramBackend backend(x_s, y);
  GreedyEngine<GramBackend> engine(restricted, backend);

  Vector best_lambda;
  double best_q = std::numeric_limits<double>::infinity();
  for (const Vector& c : candidates) {
    backend.assign(c(support));
    const double q = engine.objective();
    if (q < best_q) {
      best_q = q;
      best_lambda = backend.lambda();
    }
  }

  const int iterations = std::max(200, 20 * static_cast<int>(s));
  constexpr int kWindow = 10;
  constexpr double kMinImprovement = 1e-12;
  std::vector<double> inner_best;
  inner_best.reserve(static_cast<std::size_t>(iterations));
  double running = std::numeric_limits<double>::infinity();
  backend.reset();
  for (int t = 1; t <= iterations; ++t) {
    const double alpha = gma_step(t);
    const Index j = engine.select_zero_order(alpha);
    engine.step(j, alpha);
    const double q = engine.objective();
    if (q < running) running = q;
    if (q < best_q) {
      best_q = q;
      best_lambda = backend.lambda();
    }
    inner_best.push_back(running);
    if (t > kWindow &&
        inner_best[static_cast<std::size_t>(t - 1 - kWindow)] - running <
            kMinImprovement) {
      break;
    }
  }

  Vector full = Vector::Zero(x.cols());
  full(support) = best_lambda;
  return full;
}

SolveTrace run_gma(const FunctionDictionary& dict, const ResponseVector& y,
                   const QConfig& cfg, GmaVariant variant, int k_max,
                   bool record) {
  if (k_max < 1) throw DomainError("gma: k_max must be at least 1");
  if (is_first_order(variant) && cfg.variant != EntropyVariant::Linear) {
    throw ConfigError("first-order GMA variants require the linear penalty");
  }
  const GreedyProblem problem = make_problem(dict, y, cfg);
  const Matrix& x = dict.values();
  const Vector& yv = y.values();
  DenseBackend backend(x, yv);
  GreedyEngine<DenseBackend> engine(problem, backend);

  SolveTrace trace;
  std::vector<Index> support;
  for (int k = 1; k <= k_max; ++k) {
    const double alpha = gma_step(k);
    const Index j = is_first_order(variant) ? engine.select_first_order()
                                            : engine.select_zero_order(alpha);
    trace.selected.push_back(j);
    if (!is_fully_corrective(variant)) {
      engine.step(j, alpha);
    } else {
      const auto pos = std::lower_bound(support.begin(), support.end(), j);
      if (pos == support.end() || *pos != j) support.insert(pos, j);
      std::vector<Vector> candidates;
      Vector stepped = (1.0 - alpha) * backend.lambda();
      stepped[j] += alpha;
      candidates.push_back(std::move(stepped));
      if (k > 1) candidates.push_back(backend.lambda());
      backend.assign(fully_corrective_impl(problem, x, yv, support, candidates));
    }
    if (record || k == k_max) {
      SimplexWeights iterate(backend.lambda());
      trace.q_values.push_back(record ? q_value(dict, y, cfg, iterate)
                                      : engine.objective());
      trace.iterates.push_back(std::move(iterate));
    }
  }
  return trace;
}

}  // namespace detail

const char* to_string(GmaVariant v) {
  switch (v) {
    case GmaVariant::ZeroOrder: return "gma0";
    case GmaVariant::ZeroOrderFC: return "gma0p";
    case GmaVariant::FirstOrder: return "gma1";
    case GmaVariant::FirstOrderFC: return "gma1p";
  }
  return "?";
}

bool is_fully_corrective(GmaVariant v) {
  return v == GmaVariant::ZeroOrderFC || v == GmaVariant::FirstOrderFC;
}

bool is_first_order(GmaVariant v) {
  return v == GmaVariant::FirstOrder || v == GmaVariant::FirstOrderFC;
}

SolveTrace gma(const FunctionDictionary& dict, const ResponseVector& y,
               const QConfig& cfg, GmaVariant variant, int k_max) {
  return detail::run_gma(dict, y, cfg, variant, k_max, true);
}

SimplexWeights fully_corrective(const FunctionDictionary& dict,
                                const ResponseVector& y, const QConfig& cfg,
                                std::span<const Index> support,
                                const SimplexWeights& warm) {
  if (support.empty()) throw DomainError("fully_corrective: empty support");
  require_compatible(dict, warm);
  std::vector<Index> sorted(support.begin(), support.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (Index j : sorted) {
    if (j < 0 || j >= dict.num_functions()) {
      throw ContractViolation("fully_corrective: support index out of range");
    }
  }
  for (Index j : warm.support()) {
    if (!std::binary_search(sorted.begin(), sorted.end(), j)) {
      throw ContractViolation(
          "fully_corrective: warm start is not supported within the support");
    }
  }
  const detail::GreedyProblem problem = detail::make_problem(dict, y, cfg);
  return SimplexWeights(detail::fully_corrective_impl(
      problem, dict.values(), y.values(), sorted, {warm.weights()}));
}

}  // namespace qagg
