#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include "qagg/io.hpp"
#include "qagg/simulation.hpp"
#include "qagg/solvers.hpp"

namespace qagg::cli {

namespace {

using nlohmann::json;

std::string join(const std::vector<std::string>& items) {
  std::string s;
  for (std::size_t i = 0; i < items.size(); ++i) s += (i ? "," : "") + items[i];
  return s;
}

std::string join(const std::vector<double>& items) {
  std::string s;
  for (std::size_t i = 0; i < items.size(); ++i) {
    s += (i ? "," : "") + format_double(items[i]);
  }
  return s;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream file(path, std::ios::binary);
  if (!file || !(file << text) || !file.flush()) {
    throw FormatError("cannot write '" + path + "'");
  }
}

RunManifest start_manifest(const std::string& command, bool timestamps) {
  RunManifest m;
  m.command = command;
  m.artifact_version = QAGG_VERSION;
  if (timestamps) m.started = utc_timestamp();
  return m;
}

void finish_manifest(RunManifest& m, bool timestamps) {
  if (timestamps) m.finished = utc_timestamp();
}

// ---------------------------------------------------------------- solve

struct SolveArgs {
  std::string dict;
  std::string response;
  std::string method;
  double nu = 0.5;
  std::string beta;
  std::optional<double> sigma2;
  std::string rho = "linear";
  std::string prior = "uniform";
  std::optional<int> k;
  std::string out;
  bool timestamps = false;
};

void add_solve(CLI::App& app, SolveArgs& a) {
  app.add_option("--dict", a.dict, "dictionary CSV (n rows, M columns)")->required();
  app.add_option("--response", a.response, "response CSV (one column)")->required();
  app.add_option("--method", a.method, "gma0|gma0p|gma1|gma1p|exp|proj|erm|star")
      ->required();
  app.add_option("--nu", a.nu, "mixing parameter of Q")->capture_default_str();
  app.add_option("--beta", a.beta, "temperature: a number, auto or cv");
  app.add_option("--sigma2", a.sigma2, "noise variance");
  app.add_option("--rho", a.rho, "entropy variant: linear|kl")->capture_default_str();
  app.add_option("--prior", a.prior, "uniform or a prior CSV")->capture_default_str();
  app.add_option("--k", a.k, "iterations (greedy: 40, proj: 250)");
  app.add_option("--out", a.out, "result JSON path (default: stdout)");
  app.add_flag("--timestamps", a.timestamps, "record start and finish times");
}

int cmd_solve(const SolveArgs& a, std::ostream& out) {
  RunManifest manifest = start_manifest("solve", a.timestamps);
  const MethodKind method = parse_method(a.method);
  const EntropyVariant rho = parse_entropy_variant(a.rho);
  const FunctionDictionary dict = read_dictionary_file(a.dict);
  const ResponseVector y = read_response_file(a.response);
  if (y.size() != dict.num_points()) {
    throw FormatError("response has " + std::to_string(y.size()) +
                      " rows but the dictionary has " +
                      std::to_string(dict.num_points()));
  }
  const Index m = dict.num_functions();
  const Index n = dict.num_points();
  const SimplexWeights prior =
      a.prior == "uniform" ? SimplexWeights::uniform(m) : read_prior_file(a.prior);
  if (prior.size() != m) {
    throw FormatError("prior has " + std::to_string(prior.size()) +
                      " entries but the dictionary has " + std::to_string(m) +
                      " columns");
  }
  const bool greedy = is_greedy(method);
  const int k = a.k.value_or(method == MethodKind::Proj ? 250 : 40);
  if (k < 1) throw ConfigError("--k must be at least 1");
  const Vector hmse = per_function_empirical_mse(dict, y);

  std::string beta_mode = a.beta;
  if (beta_mode.empty()) {
    if (a.sigma2) {
      beta_mode = "auto";
    } else if (method == MethodKind::Exp) {
      beta_mode = "cv";
    } else if (greedy) {
      throw ConfigError("--beta or --sigma2 is required for " + a.method);
    }
  }
  std::optional<double> beta;
  if (beta_mode == "auto") {
    if (!a.sigma2) throw ConfigError("--beta auto requires --sigma2");
    const bool zero_order = method == MethodKind::Gma0 || method == MethodKind::Gma0FC;
    beta = zero_order && k >= 2 ? beta_min_gma(a.nu, k, *a.sigma2)
                                : beta_min_main(a.nu, *a.sigma2);
  } else if (beta_mode == "cv") {
    if (method != MethodKind::Exp) throw ConfigError("--beta cv applies to exp only");
    const std::vector<double> grid = default_beta_grid(a.sigma2, hmse);
    beta = cv_beta(dict, y, prior, grid, 10);
  } else if (!beta_mode.empty()) {
    try {
      beta = parse_double(beta_mode);
    } catch (const FormatError&) {
      throw ConfigError("--beta must be a number, auto or cv");
    }
  }

  std::vector<double> trajectory;
  std::optional<SimplexWeights> w;
  switch (method) {
    case MethodKind::Gma0:
    case MethodKind::Gma0FC:
    case MethodKind::Gma1:
    case MethodKind::Gma1FC: {
      const QConfig cfg{a.nu, *beta, prior, rho};
      SolveTrace trace = gma(dict, y, cfg, gma_variant(method), k);
      trajectory = trace.q_values;
      w = trace.final();
      break;
    }
    case MethodKind::Exp:
      w = exponential_weights(hmse, prior, *beta, n);
      break;
    case MethodKind::Proj:
      w = projection_weights(dict, y, k);
      break;
    case MethodKind::Erm:
      w = SimplexWeights::vertex(m, erm(hmse, prior, beta.value_or(0.0), n));
      break;
    case MethodKind::Star:
      w = star(dict, y);
      break;
  }

  manifest.parameters = {{"dict", a.dict},
                         {"response", a.response},
                         {"method", a.method},
                         {"nu", format_double(a.nu)},
                         {"rho", a.rho},
                         {"prior", a.prior},
                         {"k", std::to_string(k)}};
  if (!a.beta.empty()) manifest.parameters["beta"] = a.beta;
  if (a.sigma2) manifest.parameters["sigma2"] = format_double(*a.sigma2);
  if (beta) manifest.resolved["beta"] = format_double(*beta);
  finish_manifest(manifest, a.timestamps);

  const std::string text =
      emit_result(make_result(dict, y, *w, std::move(trajectory), std::move(manifest)));
  if (a.out.empty()) {
    out << text;
  } else {
    write_file(a.out, text);
  }
  return kSuccess;
}

// ------------------------------------------------------------- simulate

struct SimulateArgs {
  Index n = 50;
  Index m = 200;
  double sigma = 2.0;
  double misfit = 0.5;
  int reps = 500;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> methods{"gma0", "gma0p", "gma1", "gma1p", "star", "proj", "exp"};
  std::vector<double> nu{0.5};
  int kmax = 40;
  std::vector<double> cv_grid;
  std::optional<double> beta;
  int threads = 1;
  std::string out;
  std::string records;
  bool wide = false;
  bool timestamps = false;
};

void add_simulate(CLI::App& app, SimulateArgs& a) {
  app.add_option("--n", a.n, "design points")->capture_default_str();
  app.add_option("--m", a.m, "dictionary size")->capture_default_str();
  app.add_option("--sigma", a.sigma, "noise standard deviation")->capture_default_str();
  app.add_option("--misfit", a.misfit, "weight of the off-dictionary component")
      ->capture_default_str();
  app.add_option("--reps", a.reps, "replications")->capture_default_str();
  app.add_option("--seed", a.seed, "base seed")->required();
  app.add_option("--methods", a.methods, "comma-separated methods")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--nu", a.nu, "comma-separated nu values for greedy methods")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--kmax", a.kmax, "greedy iterations recorded")->capture_default_str();
  app.add_option("--cv-grid", a.cv_grid, "beta grid for exp (default sigma^2 2^i)")
      ->delimiter(',');
  app.add_option("--beta", a.beta, "greedy temperature (default 4 sigma^2)");
  app.add_option("--threads", a.threads, "worker threads")->capture_default_str();
  app.add_option("--out", a.out, "summary CSV path (default: stdout)");
  app.add_option("--records", a.records, "per-replication regret CSV path");
  app.add_flag("--wide", a.wide, "print a method x k table");
  app.add_flag("--timestamps", a.timestamps, "record start and finish times");
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  RunManifest manifest = start_manifest("simulate", a.timestamps);
  if (a.reps < 1) throw ConfigError("--reps must be at least 1");
  if (a.kmax < 1) throw ConfigError("--kmax must be at least 1");
  if (a.threads < 1) throw ConfigError("--threads must be at least 1");
  SyntheticSpec spec;
  spec.n = a.n;
  spec.m = a.m;
  spec.sigma = a.sigma;
  spec.misfit = a.misfit;
  spec.seed = *a.seed;
  spec.validate();

  std::vector<MethodSpec> methods;
  for (const std::string& name : a.methods) {
    const MethodKind kind = parse_method(name);
    if (is_greedy(kind)) {
      for (double nu : a.nu) {
        if (!(nu >= 0.0 && nu <= 1.0)) throw DomainError("nu must lie in [0, 1]");
        methods.push_back({kind, nu, a.kmax});
      }
    } else {
      methods.push_back({kind, 0.5, 1});
    }
  }
  ReplicationOptions opts;
  opts.beta = a.beta;
  opts.cv_grid = a.cv_grid;
  opts.threads = a.threads;
  if (opts.beta && !(*opts.beta > 0.0)) throw DomainError("--beta must be positive");
  for (double b : opts.cv_grid) {
    if (!(b > 0.0)) throw DomainError("--cv-grid entries must be positive");
  }
  if (spec.n < opts.cv_folds &&
      std::find(a.methods.begin(), a.methods.end(), "exp") != a.methods.end()) {
    throw DomainError("exp needs n >= 10 for 10-fold cross-validation");
  }

  std::vector<ReplicationRecord> records;
  SummaryTable table;
  table.seed = *a.seed;
  table.rows = run_replications(spec, methods, a.reps, *a.seed, opts,
                                a.records.empty() ? nullptr : &records);

  manifest.seed = *a.seed;
  manifest.parameters = {{"n", std::to_string(a.n)},
                         {"m", std::to_string(a.m)},
                         {"sigma", format_double(a.sigma)},
                         {"misfit", format_double(a.misfit)},
                         {"reps", std::to_string(a.reps)},
                         {"seed", std::to_string(*a.seed)},
                         {"methods", join(a.methods)},
                         {"nu", join(a.nu)},
                         {"kmax", std::to_string(a.kmax)},
                         {"threads", std::to_string(a.threads)}};
  if (!a.cv_grid.empty()) manifest.parameters["cv-grid"] = join(a.cv_grid);
  if (a.beta) manifest.parameters["beta"] = format_double(*a.beta);
  manifest.resolved["greedy_beta"] = format_double(a.beta.value_or(4.0 * a.sigma * a.sigma));
  if (a.cv_grid.empty()) {
    manifest.resolved["cv-grid"] = join(default_beta_grid(a.sigma * a.sigma, Vector()));
  }
  finish_manifest(manifest, a.timestamps);

  std::ostringstream csv;
  write_summary_csv(csv, table);
  if (!a.out.empty()) {
    write_file(a.out, csv.str());
    write_file(a.out + ".manifest.json", emit_manifest(manifest));
  } else if (!a.wide) {
    out << csv.str();
  }
  if (!a.records.empty()) {
    std::ostringstream rec;
    write_records_csv(rec, series_keys(methods), records);
    write_file(a.records, rec.str());
  }
  if (a.wide) out << format_wide(table.rows);
  return kSuccess;
}

// ----------------------------------------------------------- lowerbound

struct LowerBoundArgs {
  std::string kind;
  Index n = 100;
  Index m = 4;
  double sigma = 1.0;
  int reps = 1000;
  std::optional<std::uint64_t> seed;
  std::optional<double> beta;
  std::vector<double> alpha;
  bool any_temp = false;
  int threads = 1;
  std::string out;
  bool timestamps = false;
};

void add_lowerbound(CLI::App& app, LowerBoundArgs& a) {
  app.add_option("kind", a.kind, "exp or proj")
      ->required()
      ->check(CLI::IsMember({"exp", "proj"}));
  app.add_option("--n", a.n, "design points")->capture_default_str();
  app.add_option("--m", a.m, "dictionary size")->capture_default_str();
  app.add_option("--sigma", a.sigma, "noise standard deviation")->capture_default_str();
  app.add_option("--reps", a.reps, "replications")->capture_default_str();
  app.add_option("--seed", a.seed, "base seed")->required();
  app.add_option("--beta", a.beta, "exponential-weights temperature (default 4 sigma^2)");
  app.add_option("--alpha", a.alpha, "comma-separated alpha_3..alpha_M (any temperature)")
      ->delimiter(',');
  app.add_flag("--any-temp", a.any_temp, "use the any-temperature construction");
  app.add_option("--threads", a.threads, "worker threads")->capture_default_str();
  app.add_option("--out", a.out, "result JSON path");
  app.add_flag("--timestamps", a.timestamps, "record start and finish times");
}

int cmd_lowerbound(const LowerBoundArgs& a, std::ostream& out) {
  RunManifest manifest = start_manifest("lowerbound", a.timestamps);
  if (a.reps < 1) throw ConfigError("--reps must be at least 1");
  if (a.threads < 1) throw ConfigError("--threads must be at least 1");
  const bool proj = a.kind == "proj";
  if (proj && a.any_temp) throw ConfigError("--any-temp applies to exp only");
  LowerBoundSpec spec;
  spec.kind = proj ? LowerBoundKind::Proj
                   : (a.any_temp ? LowerBoundKind::ExpAnyTemp : LowerBoundKind::ExpLowTemp);
  spec.n = a.n;
  spec.m = a.m;
  spec.sigma = a.sigma;
  spec.beta = a.beta.value_or(4.0 * a.sigma * a.sigma);
  spec.alpha = a.alpha;
  spec.seed = *a.seed;
  spec.validate();

  const GapResult r = gap_experiment(spec, proj ? MethodKind::Proj : MethodKind::Exp,
                                     a.reps, *a.seed, a.threads);
  const double threshold = proj ? 0.25 : (a.any_temp ? 0.06 : 0.07);
  const double envelope = 3.0 * std::sqrt(threshold * (1.0 - threshold) / a.reps);
  const double lower = threshold - envelope;
  const bool passed = r.frequency >= lower;

  const char* label = proj ? "proj" : (a.any_temp ? "exp (any temperature)"
                                                  : "exp (low temperature)");
  char line[256];
  out << "construction  " << label << '\n';
  std::snprintf(line, sizeof line,
                "n = %ld, M = %ld, sigma = %g, reps = %d, seed = %llu\n",
                static_cast<long>(a.n), static_cast<long>(a.m), a.sigma, a.reps,
                static_cast<unsigned long long>(*a.seed));
  out << line;
  if (!proj) {
    std::snprintf(line, sizeof line, "beta          %.6g\n", spec.beta);
    out << line;
  }
  std::snprintf(line, sizeof line,
                "gap           %.6g\nmin MSE       %.6g\nfrequency     %.4f (%d/%d)\n"
                "threshold     %.2f\nlower limit   %.4f\nresult        %s\n",
                r.gap, r.min_mse, r.frequency, r.hits, r.reps, threshold, lower,
                passed ? "PASS" : "FAIL");
  out << line;

  if (!a.out.empty()) {
    manifest.seed = *a.seed;
    manifest.parameters = {{"kind", a.kind},
                           {"n", std::to_string(a.n)},
                           {"m", std::to_string(a.m)},
                           {"sigma", format_double(a.sigma)},
                           {"reps", std::to_string(a.reps)},
                           {"seed", std::to_string(*a.seed)},
                           {"any-temp", a.any_temp ? "true" : "false"},
                           {"threads", std::to_string(a.threads)}};
    if (a.beta) manifest.parameters["beta"] = format_double(*a.beta);
    if (!a.alpha.empty()) manifest.parameters["alpha"] = join(a.alpha);
    if (!proj) manifest.resolved["beta"] = format_double(spec.beta);
    finish_manifest(manifest, a.timestamps);
    const json doc{{"frequency", r.frequency}, {"hits", r.hits},
                   {"reps", r.reps},           {"gap", r.gap},
                   {"min_mse", r.min_mse},     {"threshold", threshold},
                   {"lower_limit", lower},     {"passed", passed},
                   {"manifest", manifest}};
    write_file(a.out, doc.dump(2) + "\n");
  }
  return passed ? kSuccess : kNumericFailure;
}

}  // namespace

int run_check(std::uint64_t seed, int cases, std::ostream& out, std::ostream& err,
              const CheckHooks& hooks) {
  if (cases < 1) {
    err << "error: --cases must be at least 1\n";
    return kUsageError;
  }
  const CheckReport report = run_checks(seed, cases, hooks);
  out << format_report(report);
  if (report.all_passed()) return kSuccess;
  for (const std::string& name : report.failed()) err << "FAILED: " << name << '\n';
  return kNumericFailure;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Q-aggregation of regression estimators", "qagg"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(QAGG_VERSION));

  SolveArgs solve_args;
  SimulateArgs simulate_args;
  LowerBoundArgs lowerbound_args;
  std::uint64_t check_seed = 1;
  int check_cases = 100;

  CLI::App* solve = app.add_subcommand("solve", "aggregate a dictionary on data");
  add_solve(*solve, solve_args);
  CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo regret study");
  add_simulate(*simulate, simulate_args);
  CLI::App* lowerbound =
      app.add_subcommand("lowerbound", "adversarial constructions for exp and proj");
  add_lowerbound(*lowerbound, lowerbound_args);
  CLI::App* check = app.add_subcommand("check", "randomized property suite");
  check->add_option("--seed", check_seed, "base seed")->capture_default_str();
  check->add_option("--cases", check_cases, "random instances per property")
      ->capture_default_str();

  std::vector<const char*> argv{"qagg"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsageError;
  }

  try {
    if (*solve) return cmd_solve(solve_args, out);
    if (*simulate) return cmd_simulate(simulate_args, out);
    if (*lowerbound) return cmd_lowerbound(lowerbound_args, out);
    return run_check(check_seed, check_cases, out, err);
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kFormatError;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const ContractViolation& e) {
    err << "error: " << e.what() << '\n';
    return kNumericFailure;
  }
}

}  // namespace qagg::cli
