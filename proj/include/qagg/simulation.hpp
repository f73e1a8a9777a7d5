#pragma once

// Synthetic problems, adversarial dictionaries and the Monte Carlo harness.
// Every replication owns a generator seeded from (base_seed, replication)
// so results do not depend on scheduling or thread count.

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qagg/core.hpp"
#include "qagg/objective.hpp"
#include "qagg/solvers.hpp"

namespace qagg {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Seed of replication `index` under `base_seed`.
std::uint64_t child_seed(std::uint64_t base_seed, std::uint64_t index);

enum class NoiseKind { Gaussian, Rademacher };

/// n i.i.d. draws with variance proxy sigma^2: N(0, sigma^2) or sigma * (+-1).
Vector draw_noise(Index n, double sigma, NoiseKind kind, Rng& rng);

struct SyntheticSpec {
  Index n = 50;
  Index m = 200;
  double sigma = 2.0;
  double misfit = 0.5;
  std::uint64_t seed = 0;
  NoiseKind noise = NoiseKind::Gaussian;

  void validate() const;
};

struct SyntheticProblem {
  FunctionDictionary dict;
  ResponseVector eta;
  ResponseVector y;
  Index best;  // argmin_j MSE(f_j), lowest index on ties
};

/// X has i.i.d. N(0,1) entries, eta = f_1 + misfit * Delta with
/// Delta ~ N(0, I_n), Y = eta + xi. Draw order: X (column-major), Delta, xi.
SyntheticProblem gen_problem(const SyntheticSpec& spec, Rng& rng);
SyntheticProblem gen_problem(const SyntheticSpec& spec);

enum class LowerBoundKind { ExpLowTemp, ExpAnyTemp, Proj };

struct LowerBoundSpec {
  LowerBoundKind kind = LowerBoundKind::ExpLowTemp;
  Index n = 100;
  Index m = 4;
  double sigma = 1.0;
  double beta = 4.0;
  std::vector<double> alpha;  // length m - 2, ExpAnyTemp only
  std::uint64_t seed = 0;

  /// Throws DomainError naming the violated inequality.
  void validate() const;
};

/// Largest low temperature: 2 sigma^2 sqrt(n) / log(8 sqrt(n)).
double low_temperature_cap(Index n, double sigma);

/// Admissible alpha range [2 sqrt(2 log(100 M)), n^(1/4)] for ExpAnyTemp.
double any_temp_alpha_min(Index m);
double any_temp_alpha_max(Index n);

/// Smallest m with m^2 >= 4n/13.
Index projection_block_size(Index n);

struct LowerBoundProblem {
  FunctionDictionary dict;
  ResponseVector eta;
};

/// f_1 = sigma sqrt(n) e1, f_2 = sigma (1 + sqrt(n)) e2,
/// f_j = f_2 + sigma alpha_j e_j for j >= 3; eta = 0.
LowerBoundProblem gen_lowexp(const LowerBoundSpec& spec);

/// sigma sqrt(n) e_j for j <= m, their negations for m < j <= 2m, zero at
/// 2m + 1 and copies of f_1 beyond; eta = 0.
LowerBoundProblem gen_lowproj(const LowerBoundSpec& spec);

enum class MethodKind { Gma0, Gma0FC, Gma1, Gma1FC, Exp, Proj, Erm, Star };

const char* to_string(MethodKind kind);
MethodKind parse_method(const std::string& name);
bool is_greedy(MethodKind kind);
GmaVariant gma_variant(MethodKind kind);

struct MethodSpec {
  MethodKind kind = MethodKind::Gma0;
  double nu = 0.5;  // greedy methods only
  int k_max = 1;    // greedy methods only
};

struct ReplicationOptions {
  std::optional<double> beta;  // greedy Q temperature; default 4 sigma^2
  std::vector<double> cv_grid;  // empty: default_beta_grid(sigma^2)
  int cv_folds = 10;
  int proj_iterations = 250;
  int threads = 1;
};

/// One output row: a method, and for greedy methods a nu and iteration k.
struct SeriesKey {
  std::string method;
  std::optional<double> nu;
  std::optional<int> k;

  bool operator==(const SeriesKey&) const = default;
};

struct ReplicationRecord {
  std::size_t replication = 0;
  std::uint64_t seed = 0;
  Index best = 0;
  std::vector<double> regrets;  // aligned with series_keys()
};

struct ReplicationSummary {
  std::string method;
  std::optional<double> nu;
  std::optional<int> k;
  double regret_mean = 0.0;
  double regret_std = 0.0;
  int reps = 0;

  bool operator==(const ReplicationSummary&) const = default;
};

std::vector<SeriesKey> series_keys(const std::vector<MethodSpec>& methods);

/// Runs every method on one replication's problem.
ReplicationRecord replicate(const SyntheticSpec& spec,
                            const std::vector<MethodSpec>& methods,
                            std::size_t replication, std::uint64_t base_seed,
                            const ReplicationOptions& opts = {});

/// Mean and population standard deviation of regret per series.
std::vector<ReplicationSummary> run_replications(
    const SyntheticSpec& spec, const std::vector<MethodSpec>& methods, int reps,
    std::uint64_t base_seed, const ReplicationOptions& opts = {},
    std::vector<ReplicationRecord>* records = nullptr);

struct GapResult {
  double frequency = 0.0;
  double gap = 0.0;
  double min_mse = 0.0;
  int hits = 0;
  int reps = 0;
  std::vector<char> indicators;
};

/// Fraction of fresh-noise replications on the fixed adversarial dictionary
/// where MSE(estimate) >= min_j MSE(f_j) + gap.
GapResult gap_experiment(const LowerBoundSpec& spec, MethodKind method, int reps,
                         std::uint64_t base_seed, int threads = 1);

double gap_frequency(const LowerBoundSpec& spec, MethodKind method, int reps,
                     std::uint64_t base_seed);

struct ViolationConfig {
  GmaVariant variant = GmaVariant::ZeroOrder;
  double nu = 0.5;
  int k = 2;
  double beta = 0.0;
  double delta = 0.1;
};

struct ViolationResult {
  double rate = 0.0;
  int violations = 0;
  int reps = 0;
  bool beta_below_threshold = false;
  std::string warning;
};

/// Fraction of replications where MSE(f_lambda^(k)) exceeds the
/// deviation oracle bound at confidence delta (flat prior).
ViolationResult oracle_violation_rate(const SyntheticSpec& spec,
                                      const ViolationConfig& cfg, int reps,
                                      std::uint64_t base_seed, int threads = 1);

/// Runs body(i) for i in [0, count) on up to `threads` workers.
void parallel_for(std::size_t count, int threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace qagg
