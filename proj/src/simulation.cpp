#include "qagg/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

namespace qagg {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t child_seed(std::uint64_t base_seed, std::uint64_t index) {
  return mix64(mix64(base_seed) ^ (index * 0xD1B54A32D192ED03ULL + 1));
}

Vector draw_noise(Index n, double sigma, NoiseKind kind, Rng& rng) {
  Vector xi(n);
  if (kind == NoiseKind::Gaussian) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index i = 0; i < n; ++i) xi[i] = sigma * normal(rng);
  } else {
    std::bernoulli_distribution coin(0.5);
    for (Index i = 0; i < n; ++i) xi[i] = coin(rng) ? sigma : -sigma;
  }
  return xi;
}

void SyntheticSpec::validate() const {
  if (n < 1 || m < 1) throw DomainError("synthetic spec: need n >= 1, M >= 1");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw DomainError("synthetic spec: sigma must be positive");
  }
  if (!(misfit >= 0.0) || !std::isfinite(misfit)) {
    throw DomainError("synthetic spec: misfit must be nonnegative");
  }
}

namespace {

Index argmin_mse(const FunctionDictionary& dict, const ResponseVector& eta) {
  Index best = 0;
  double best_value = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < dict.num_functions(); ++j) {
    const double v = mse(eta.values(), dict.column(j));
    if (v < best_value) {
      best_value = v;
      best = j;
    }
  }
  return best;
}

double min_mse(const FunctionDictionary& dict, const ResponseVector& eta) {
  return mse(eta.values(), dict.column(argmin_mse(dict, eta)));
}

}  // namespace

SyntheticProblem gen_problem(const SyntheticSpec& spec, Rng& rng) {
  spec.validate();
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix x(spec.n, spec.m);
  for (Index j = 0; j < spec.m; ++j) {
    for (Index i = 0; i < spec.n; ++i) x(i, j) = normal(rng);
  }
  Vector delta(spec.n);
  for (Index i = 0; i < spec.n; ++i) delta[i] = normal(rng);
  const Vector xi = draw_noise(spec.n, spec.sigma, spec.noise, rng);
  Vector eta = x.col(0) + spec.misfit * delta;
  Vector y = eta + xi;
  FunctionDictionary dict(std::move(x));
  ResponseVector eta_v(std::move(eta));
  const Index best = argmin_mse(dict, eta_v);
  return SyntheticProblem{std::move(dict), std::move(eta_v),
                          ResponseVector(std::move(y)), best};
}

SyntheticProblem gen_problem(const SyntheticSpec& spec) {
  Rng rng(spec.seed);
  return gen_problem(spec, rng);
}

double low_temperature_cap(Index n, double sigma) {
  const double root = std::sqrt(static_cast<double>(n));
  return 2.0 * sigma * sigma * root / std::log(8.0 * root);
}

double any_temp_alpha_min(Index m) {
  return 2.0 * std::sqrt(2.0 * std::log(100.0 * static_cast<double>(m)));
}

double any_temp_alpha_max(Index n) {
  return std::pow(static_cast<double>(n), 0.25);
}

Index projection_block_size(Index n) {
  Index m = 0;
  while (13 * m * m < 4 * n) ++m;
  return m;
}

void LowerBoundSpec::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw DomainError("lower-bound spec: sigma must be positive");
  }
  const double root_n = std::sqrt(static_cast<double>(n));
  if (kind == LowerBoundKind::Proj) {
    const Index blk = projection_block_size(n);
    if (blk < 16) {
      throw DomainError("projection construction needs m >= 16, got m = " +
                        std::to_string(blk) + " for n = " + std::to_string(n));
    }
    if (m - 1 < 2 * blk) {
      throw DomainError("projection construction needs M - 1 >= 2m (M = " +
                        std::to_string(m) + ", m = " + std::to_string(blk) + ")");
    }
    if (static_cast<double>(m) < root_n) {
      throw DomainError("projection construction needs M >= sqrt(n)");
    }
    if (blk > n) throw DomainError("projection construction needs m <= n");
    return;
  }
  if (m < 4 || n < 3) {
    throw DomainError("exponential-weights construction needs M >= 4 and n >= 3");
  }
  if (m > n) {
    throw DomainError("exponential-weights construction needs M <= n (M = " +
                      std::to_string(m) + ", n = " + std::to_string(n) + ")");
  }
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw DomainError("lower-bound spec: beta must be positive");
  }
  if (kind == LowerBoundKind::ExpLowTemp) {
    const double cap = low_temperature_cap(n, sigma);
    if (beta > cap) {
      throw DomainError("low temperature requires beta <= 2 sigma^2 sqrt(n) / "
                        "log(8 sqrt(n)) = " +
                        std::to_string(cap) + ", got beta = " +
                        std::to_string(beta));
    }
    return;
  }
  if (static_cast<double>(m) < 8.0 * root_n) {
    throw DomainError("any-temperature construction needs M >= 8 sqrt(n) = " +
                      std::to_string(8.0 * root_n));
  }
  const double lo = any_temp_alpha_min(m);
  const double hi = any_temp_alpha_max(n);
  if (lo > hi) {
    throw DomainError("any-temperature construction needs 2 sqrt(2 log(100 M)) "
                      "= " + std::to_string(lo) + " <= n^(1/4) = " +
                      std::to_string(hi));
  }
  if (!alpha.empty()) {
    if (static_cast<Index>(alpha.size()) != m - 2) {
      throw DomainError("alpha must have M - 2 entries");
    }
    for (double a : alpha) {
      if (!(a >= lo && a <= hi)) {
        throw DomainError("alpha_j must satisfy 2 sqrt(2 log(100 M)) <= alpha_j "
                          "<= n^(1/4)");
      }
    }
  }
}

LowerBoundProblem gen_lowexp(const LowerBoundSpec& spec) {
  if (spec.kind == LowerBoundKind::Proj) {
    throw ConfigError("gen_lowexp: spec kind is Proj");
  }
  spec.validate();
  const Index n = spec.n;
  const double root_n = std::sqrt(static_cast<double>(n));
  Matrix x = Matrix::Zero(n, spec.m);
  x(0, 0) = spec.sigma * root_n;
  for (Index j = 1; j < spec.m; ++j) x(1, j) = spec.sigma * (1.0 + root_n);
  if (spec.kind == LowerBoundKind::ExpAnyTemp) {
    const double fallback = any_temp_alpha_min(spec.m);
    for (Index j = 2; j < spec.m; ++j) {
      const double a = spec.alpha.empty()
                           ? fallback
                           : spec.alpha[static_cast<std::size_t>(j - 2)];
      x(j, j) = spec.sigma * a;
    }
  }
  return LowerBoundProblem{FunctionDictionary(std::move(x)),
                           ResponseVector(Vector::Zero(n))};
}

LowerBoundProblem gen_lowproj(const LowerBoundSpec& spec) {
  if (spec.kind != LowerBoundKind::Proj) {
    throw ConfigError("gen_lowproj: spec kind is not Proj");
  }
  spec.validate();
  const Index n = spec.n;
  const Index blk = projection_block_size(n);
  const double scale = spec.sigma * std::sqrt(static_cast<double>(n));
  Matrix x = Matrix::Zero(n, spec.m);
  for (Index j = 0; j < blk; ++j) {
    x(j, j) = scale;
    x(j, j + blk) = -scale;
  }
  for (Index j = 2 * blk + 1; j < spec.m; ++j) x.col(j) = x.col(0);
  return LowerBoundProblem{FunctionDictionary(std::move(x)),
                           ResponseVector(Vector::Zero(n))};
}

const char* to_string(MethodKind kind) {
  switch (kind) {
    case MethodKind::Gma0: return "gma0";
    case MethodKind::Gma0FC: return "gma0p";
    case MethodKind::Gma1: return "gma1";
    case MethodKind::Gma1FC: return "gma1p";
    case MethodKind::Exp: return "exp";
    case MethodKind::Proj: return "proj";
    case MethodKind::Erm: return "erm";
    case MethodKind::Star: return "star";
  }
  return "?";
}

MethodKind parse_method(const std::string& name) {
  for (MethodKind k : {MethodKind::Gma0, MethodKind::Gma0FC, MethodKind::Gma1,
                       MethodKind::Gma1FC, MethodKind::Exp, MethodKind::Proj,
                       MethodKind::Erm, MethodKind::Star}) {
    if (name == to_string(k)) return k;
  }
  throw ConfigError("unknown method '" + name + "'");
}

bool is_greedy(MethodKind kind) {
  return kind == MethodKind::Gma0 || kind == MethodKind::Gma0FC ||
         kind == MethodKind::Gma1 || kind == MethodKind::Gma1FC;
}

GmaVariant gma_variant(MethodKind kind) {
  switch (kind) {
    case MethodKind::Gma0: return GmaVariant::ZeroOrder;
    case MethodKind::Gma0FC: return GmaVariant::ZeroOrderFC;
    case MethodKind::Gma1: return GmaVariant::FirstOrder;
    case MethodKind::Gma1FC: return GmaVariant::FirstOrderFC;
    default: throw ConfigError(std::string(to_string(kind)) + " is not greedy");
  }
}

std::vector<SeriesKey> series_keys(const std::vector<MethodSpec>& methods) {
  std::vector<SeriesKey> keys;
  for (const MethodSpec& m : methods) {
    if (is_greedy(m.kind)) {
      if (m.k_max < 1) throw DomainError("greedy methods need k_max >= 1");
      for (int k = 1; k <= m.k_max; ++k) keys.push_back({to_string(m.kind), m.nu, k});
    } else {
      keys.push_back({to_string(m.kind), std::nullopt, std::nullopt});
    }
  }
  return keys;
}

ReplicationRecord replicate(const SyntheticSpec& spec,
                            const std::vector<MethodSpec>& methods,
                            std::size_t replication, std::uint64_t base_seed,
                            const ReplicationOptions& opts) {
  ReplicationRecord record;
  record.replication = replication;
  record.seed = child_seed(base_seed, replication);
  Rng rng(record.seed);
  const SyntheticProblem p = gen_problem(spec, rng);
  record.best = p.best;
  const double oracle = mse(p.eta.values(), p.dict.column(p.best));
  const auto regret = [&](const SimplexWeights& w) {
    return mse(p.eta.values(), combine(p.dict, w)) - oracle;
  };
  const Index m = p.dict.num_functions();
  const Index n = p.dict.num_points();
  const double sigma2 = spec.sigma * spec.sigma;
  const SimplexWeights flat = SimplexWeights::uniform(m);

  for (const MethodSpec& method : methods) {
    switch (method.kind) {
      case MethodKind::Gma0:
      case MethodKind::Gma0FC:
      case MethodKind::Gma1:
      case MethodKind::Gma1FC: {
        const QConfig cfg =
            QConfig::uniform(m, method.nu, opts.beta.value_or(4.0 * sigma2));
        const SolveTrace trace =
            gma(p.dict, p.y, cfg, gma_variant(method.kind), method.k_max);
        for (const SimplexWeights& w : trace.iterates) {
          record.regrets.push_back(regret(w));
        }
        break;
      }
      case MethodKind::Exp: {
        const Vector hmse = per_function_empirical_mse(p.dict, p.y);
        const std::vector<double> grid =
            opts.cv_grid.empty() ? default_beta_grid(sigma2, hmse) : opts.cv_grid;
        const double beta = cv_beta(p.dict, p.y, flat, grid, opts.cv_folds);
        record.regrets.push_back(regret(exponential_weights(hmse, flat, beta, n)));
        break;
      }
      case MethodKind::Proj:
        record.regrets.push_back(
            regret(projection_weights(p.dict, p.y, opts.proj_iterations)));
        break;
      case MethodKind::Erm: {
        const Vector hmse = per_function_empirical_mse(p.dict, p.y);
        record.regrets.push_back(
            regret(SimplexWeights::vertex(m, erm(hmse, flat, 1.0, n))));
        break;
      }
      case MethodKind::Star:
        record.regrets.push_back(regret(star(p.dict, p.y)));
        break;
    }
  }
  return record;
}

void parallel_for(std::size_t count, int threads,
                  const std::function<void(std::size_t)>& body) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(threads), count);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<ReplicationSummary> run_replications(
    const SyntheticSpec& spec, const std::vector<MethodSpec>& methods, int reps,
    std::uint64_t base_seed, const ReplicationOptions& opts,
    std::vector<ReplicationRecord>* records) {
  if (reps < 1) throw DomainError("run_replications: reps must be >= 1");
  spec.validate();
  const std::vector<SeriesKey> keys = series_keys(methods);
  std::vector<ReplicationRecord> local(static_cast<std::size_t>(reps));
  parallel_for(local.size(), opts.threads, [&](std::size_t r) {
    local[r] = replicate(spec, methods, r, base_seed, opts);
  });

  std::vector<ReplicationSummary> out;
  for (std::size_t s = 0; s < keys.size(); ++s) {
    CompensatedSum<double> total;
    for (const auto& rec : local) total.add(rec.regrets[s]);
    const double mean = total.value() / reps;
    CompensatedSum<double> spread;
    for (const auto& rec : local) {
      const double d = rec.regrets[s] - mean;
      spread.add(d * d);
    }
    out.push_back({keys[s].method, keys[s].nu, keys[s].k, mean,
                   std::sqrt(spread.value() / reps), reps});
  }
  if (records != nullptr) *records = std::move(local);
  return out;
}

GapResult gap_experiment(const LowerBoundSpec& spec, MethodKind method, int reps,
                         std::uint64_t base_seed, int threads) {
  if (reps < 1) throw DomainError("gap_experiment: reps must be >= 1");
  const bool proj = spec.kind == LowerBoundKind::Proj;
  if (proj && method != MethodKind::Proj) {
    throw ConfigError("the projection construction is tested with 'proj'");
  }
  if (!proj && method != MethodKind::Exp) {
    throw ConfigError("the exponential-weights construction is tested with 'exp'");
  }
  const LowerBoundProblem problem = proj ? gen_lowproj(spec) : gen_lowexp(spec);
  const Index n = spec.n;
  const double sigma2 = spec.sigma * spec.sigma;
  const double root_n = std::sqrt(static_cast<double>(n));

  GapResult result;
  result.reps = reps;
  result.min_mse = min_mse(problem.dict, problem.eta);
  result.gap = proj ? sigma2 / std::sqrt(48.0 * static_cast<double>(n))
                    : sigma2 / (4.0 * root_n);
  result.indicators.assign(static_cast<std::size_t>(reps), 0);
  const SimplexWeights flat = SimplexWeights::uniform(problem.dict.num_functions());

  parallel_for(result.indicators.size(), threads, [&](std::size_t r) {
    Rng rng(child_seed(base_seed, r));
    const Vector xi = draw_noise(n, spec.sigma, NoiseKind::Gaussian, rng);
    const ResponseVector y(problem.eta.values() + xi);
    SimplexWeights w =
        proj ? projection_weights(problem.dict, y, 250)
             : exponential_weights(per_function_empirical_mse(problem.dict, y),
                                   flat, spec.beta, n);
    const double risk = mse(problem.eta.values(), combine(problem.dict, w));
    result.indicators[r] = risk >= result.min_mse + result.gap ? 1 : 0;
  });
  for (char hit : result.indicators) result.hits += hit;
  result.frequency = static_cast<double>(result.hits) / reps;
  return result;
}

double gap_frequency(const LowerBoundSpec& spec, MethodKind method, int reps,
                     std::uint64_t base_seed) {
  return gap_experiment(spec, method, reps, base_seed).frequency;
}

ViolationResult oracle_violation_rate(const SyntheticSpec& spec,
                                      const ViolationConfig& cfg, int reps,
                                      std::uint64_t base_seed, int threads) {
  if (reps < 1) throw DomainError("oracle_violation_rate: reps must be >= 1");
  if (cfg.k < 2) throw DomainError("oracle_violation_rate: k must be >= 2");
  if (!(cfg.delta > 0.0 && cfg.delta <= 1.0)) {
    throw DomainError("oracle_violation_rate: delta must lie in (0, 1]");
  }
  spec.validate();
  ViolationResult result;
  result.reps = reps;
  const double sigma2 = spec.sigma * spec.sigma;
  if (cfg.nu > 0.0 && cfg.nu < 1.0) {
    const double threshold = beta_min_gma(cfg.nu, cfg.k, sigma2);
    if (cfg.beta < threshold) {
      result.beta_below_threshold = true;
      result.warning = "beta = " + std::to_string(cfg.beta) +
                       " is below the deviation threshold " +
                       std::to_string(threshold);
    }
  }
  std::vector<char> violated(static_cast<std::size_t>(reps), 0);
  parallel_for(violated.size(), threads, [&](std::size_t r) {
    Rng rng(child_seed(base_seed, r));
    const SyntheticProblem p = gen_problem(spec, rng);
    const QConfig q = QConfig::uniform(p.dict.num_functions(), cfg.nu, cfg.beta);
    const SolveTrace trace = gma(p.dict, p.y, q, cfg.variant, cfg.k);
    const double risk = mse(p.eta.values(), combine(p.dict, trace.final()));
    violated[r] = risk > oracle_bound(p.dict, p.eta, q, cfg.delta) ? 1 : 0;
  });
  for (char v : violated) result.violations += v;
  result.rate = static_cast<double>(result.violations) / reps;
  return result;
}

}  // namespace qagg
