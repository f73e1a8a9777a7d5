#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "qagg/objective.hpp"

using namespace qagg;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

// n = 2, M = 2, Y = (1, 0), f1 = (1, 1), f2 = (0, 0).
struct Tiny {
  FunctionDictionary dict{(Matrix(2, 2) << 1, 0, 1, 0).finished()};
  ResponseVector y{vec({1, 0})};
};

}  // namespace

TEST_CASE("entropy penalty") {
  const SimplexWeights pi(vec({0.1, 0.2, 0.3, 0.4}));
  CHECK(std::abs(entropy_penalty(pi, pi, EntropyVariant::KullbackLeibler)) < 1e-15);
  const SimplexWeights flat = SimplexWeights::uniform(4);
  const SimplexWeights e1 = SimplexWeights::vertex(4, 0);
  CHECK(entropy_penalty(e1, flat, EntropyVariant::Linear) == doctest::Approx(std::log(4.0)));
  CHECK(entropy_penalty(e1, flat, EntropyVariant::KullbackLeibler) ==
        doctest::Approx(std::log(4.0)));
  CHECK(entropy_penalty(flat, pi, EntropyVariant::KullbackLeibler) >= 0.0);
  CHECK_THROWS_AS(entropy_penalty(e1, SimplexWeights(vec({0, 0.5, 0.5, 0})),
                                  EntropyVariant::Linear),
                  DomainError);
}

TEST_CASE("q value on the hand example") {
  Tiny t;
  const SimplexWeights half(vec({0.5, 0.5}));
  const QConfig nearly_cold = QConfig::uniform(2, 0.5, 1e-13);
  CHECK(q_value(t.dict, t.y, nearly_cold, half) == doctest::Approx(0.375).epsilon(1e-12));
  const QConfig warm = QConfig::uniform(2, 0.5, 2.0);
  CHECK(q_value(t.dict, t.y, warm, half) == doctest::Approx(0.375 + std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("q value collapses at vertices") {
  std::mt19937_64 rng(11);
  const Matrix x = oracle::gaussian_matrix(rng, 12, 5);
  const FunctionDictionary d(x);
  const ResponseVector y(oracle::gaussian_vector(rng, 12));
  const SimplexWeights pi(oracle::interior(rng, 5));
  for (double nu : {0.0, 0.3, 1.0}) {
    for (auto v : {EntropyVariant::Linear, EntropyVariant::KullbackLeibler}) {
      const QConfig cfg{nu, 3.0, pi, v};
      for (Index j = 0; j < 5; ++j) {
        const double expected = (y.values() - x.col(j)).squaredNorm() / 12.0 +
                                3.0 / 12.0 * std::log(1.0 / pi[j]);
        CHECK(q_value(d, y, cfg, SimplexWeights::vertex(5, j)) ==
              doctest::Approx(expected).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("q value with nu = 0 and a flat prior is hMSE plus a constant") {
  std::mt19937_64 rng(5);
  const Matrix x = oracle::gaussian_matrix(rng, 10, 4);
  const FunctionDictionary d(x);
  const ResponseVector y(oracle::gaussian_vector(rng, 10));
  const SimplexWeights l(oracle::interior(rng, 4));
  const QConfig cfg = QConfig::uniform(4, 0.0, 2.5);
  CHECK(q_value(d, y, cfg, l) ==
        doctest::Approx(mse(y, combine(d, l)) + 0.25 * std::log(4.0)).epsilon(1e-13));
}

TEST_CASE("q value agrees with the direct formula") {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 30; ++t) {
    const Matrix x = oracle::gaussian_matrix(rng, 15, 7);
    const Vector y = oracle::gaussian_vector(rng, 15);
    const Vector pi = oracle::interior(rng, 7);
    const Vector l = oracle::interior(rng, 7);
    const bool kl = t % 2 == 0;
    const QConfig cfg{0.37, 1.7, SimplexWeights(pi),
                      kl ? EntropyVariant::KullbackLeibler : EntropyVariant::Linear};
    const double direct = oracle::q_direct(x, y, 0.37, 1.7, pi, kl, l);
    CHECK(q_value(FunctionDictionary(x), ResponseVector(y), cfg, SimplexWeights(l)) ==
          doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("gradient matches central finite differences") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    const Index n = 5 + t % 46;
    const Index m = 2 + t % 19;
    const Matrix x = oracle::gaussian_matrix(rng, n, m);
    const Vector y = oracle::gaussian_vector(rng, n);
    const Vector pi = oracle::interior(rng, m);
    const Vector l = oracle::interior(rng, m);
    const double nu = u(rng);
    const double beta = 0.1 + 10.0 * u(rng);
    const bool kl = t % 2 == 1;
    const QConfig cfg{nu, beta, SimplexWeights(pi),
                      kl ? EntropyVariant::KullbackLeibler : EntropyVariant::Linear};
    const Vector g =
        q_gradient(FunctionDictionary(x), ResponseVector(y), cfg, SimplexWeights(l));
    const Vector fd = oracle::central_differences(
        [&](const Vector& v) { return oracle::q_direct(x, y, nu, beta, pi, kl, v); }, l,
        1e-6);
    const double rel = (g - fd).lpNorm<Eigen::Infinity>() /
                       std::max(1.0, fd.lpNorm<Eigen::Infinity>());
    CHECK(rel < 1e-6);
  }
}

TEST_CASE("gradient special cases") {
  std::mt19937_64 rng(4);
  const Matrix x = oracle::gaussian_matrix(rng, 8, 3);
  const FunctionDictionary d(x);
  const ResponseVector y(oracle::gaussian_vector(rng, 8));
  const SimplexWeights pi(vec({0.2, 0.3, 0.5}));

  SUBCASE("nu = 1 with the linear penalty is constant in lambda") {
    const QConfig cfg{1.0, 2.0, pi, EntropyVariant::Linear};
    const Vector a = q_gradient(d, y, cfg, SimplexWeights::uniform(3));
    const Vector b = q_gradient(d, y, cfg, SimplexWeights::vertex(3, 1));
    for (Index j = 0; j < 3; ++j) {
      const double expected =
          (y.values() - x.col(j)).squaredNorm() / 8.0 + 2.0 / 8.0 * std::log(1.0 / pi[j]);
      CHECK(a[j] == doctest::Approx(expected).epsilon(1e-13));
      CHECK(b[j] == doctest::Approx(expected).epsilon(1e-13));
    }
  }

  SUBCASE("symmetric dictionary at the uniform point") {
    Matrix s(3, 3);
    s << 1, 2, 3,
         2, 3, 1,
         3, 1, 2;
    const QConfig cfg = QConfig::uniform(3, 0.4, 1.0, EntropyVariant::KullbackLeibler);
    const Vector g = q_gradient(FunctionDictionary(s), ResponseVector(vec({1, 1, 1})), cfg,
                                SimplexWeights::uniform(3));
    CHECK(g[0] == doctest::Approx(g[1]).epsilon(1e-14));
    CHECK(g[1] == doctest::Approx(g[2]).epsilon(1e-14));
  }

  SUBCASE("the KL gradient is undefined on the boundary") {
    const QConfig cfg{0.5, 1.0, pi, EntropyVariant::KullbackLeibler};
    CHECK_THROWS_AS(q_gradient(d, y, cfg, SimplexWeights::vertex(3, 0)), ContractViolation);
  }
}

TEST_CASE("q is convex") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    const Matrix x = oracle::gaussian_matrix(rng, 10, 6);
    const FunctionDictionary d(x);
    const ResponseVector y(oracle::gaussian_vector(rng, 10));
    const auto v = t % 2 ? EntropyVariant::KullbackLeibler : EntropyVariant::Linear;
    const QConfig cfg{u(rng), 0.1 + u(rng) * 5, SimplexWeights(oracle::interior(rng, 6)), v};
    const Vector a = oracle::interior(rng, 6);
    const Vector b = oracle::interior(rng, 6);
    const double s = u(rng);
    const double lhs = q_value(d, y, cfg, SimplexWeights(s * a + (1 - s) * b));
    const double rhs = s * q_value(d, y, cfg, SimplexWeights(a)) +
                       (1 - s) * q_value(d, y, cfg, SimplexWeights(b));
    CHECK(lhs <= rhs + 1e-10);
  }
}

TEST_CASE("p value") {
  const FunctionDictionary d((Matrix(2, 2) << 1, 0, 1, 0).finished());
  const ResponseVector eta(vec({0, 0}));
  CHECK(p_value(d, eta, 1.0, SimplexWeights(vec({0.5, 0.5}))) == 0.5);
  CHECK(p_value(d, eta, 0.0, SimplexWeights(vec({0.5, 0.5}))) == 0.25);
  for (double nu : {0.0, 0.5, 1.0}) {
    CHECK(p_value(d, eta, nu, SimplexWeights::vertex(2, 0)) == 1.0);
  }
}

TEST_CASE("dictionary variance") {
  const FunctionDictionary d((Matrix(2, 2) << 1, -1, 0, 0).finished());
  CHECK(dictionary_variance(d, SimplexWeights(vec({0.5, 0.5}))) == doctest::Approx(0.5));
  CHECK(dictionary_variance(d, SimplexWeights::vertex(2, 1)) == 0.0);
  const FunctionDictionary dup((Matrix(3, 3) << 1, 1, 5, 2, 2, 6, 3, 3, 7).finished());
  CHECK(dictionary_variance(dup, SimplexWeights(vec({0.3, 0.7, 0.0}))) ==
        doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("variance decomposition") {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 50; ++t) {
    const Matrix x = oracle::gaussian_matrix(rng, 20, 8);
    const FunctionDictionary d(x);
    const Vector l = oracle::interior(rng, 8);
    const Vector mu = oracle::interior(rng, 8);
    const Vector fl = x * l;
    const Vector fm = x * mu;
    double lhs = 0.0;
    for (Index j = 0; j < 8; ++j) lhs += l[j] * (x.col(j) - fm).squaredNorm() / 20.0;
    const double rhs =
        dictionary_variance(d, SimplexWeights(l)) + (fl - fm).squaredNorm() / 20.0;
    CHECK(std::abs(lhs - rhs) < 1e-10);

    const Vector eta = oracle::gaussian_vector(rng, 20);
    double mixed = 0.0;
    for (Index j = 0; j < 8; ++j) mixed += l[j] * (eta - x.col(j)).squaredNorm() / 20.0;
    CHECK(std::abs(mixed - ((eta - fl).squaredNorm() / 20.0 +
                            dictionary_variance(d, SimplexWeights(l)))) < 1e-10);
  }
}

TEST_CASE("beta_min_main") {
  CHECK(beta_min_main(0.5, 1.0) == 4.0);
  CHECK(beta_min_main(0.1, 1.0) == doctest::Approx(20.0));
  CHECK(beta_min_main(0.9, 4.0) == doctest::Approx(80.0));
  CHECK_THROWS_AS(beta_min_main(0.0, 1.0), DomainError);
  CHECK_THROWS_AS(beta_min_main(1.0, 1.0), DomainError);
}

TEST_CASE("beta_min_approx") {
  CHECK(beta_min_approx(0.5, 0.0, 0.5, 1.0) == doctest::Approx(8.0));
  CHECK(beta_min_approx(0.5, 0.1, 0.5, 1.0) == doctest::Approx(10.0));
  for (double nu : {0.5, 0.7, 0.9}) {
    CHECK(beta_min_approx(nu, 0.0, 1e-9, 1.0) ==
          doctest::Approx(beta_min_main(nu, 1.0)).epsilon(1e-6));
  }
  CHECK(std::isinf(beta_min_approx(0.5, 0.1, 1.0, 1.0)));
  CHECK_THROWS_AS(beta_min_approx(0.5, 0.1, 0.1, 1.0), DomainError);
  CHECK_THROWS_AS(beta_min_approx(0.5, 0.6, 0.9, 1.0), DomainError);
}

TEST_CASE("beta_min_gma") {
  CHECK(beta_min_gma(0.5, 2, 1.0) ==
        doctest::Approx(4.0 / (1.0 - 2.0 / std::sqrt(5.0))).epsilon(1e-6));
  CHECK(beta_min_gma(0.5, 2, 1.0) == doctest::Approx(37.889).epsilon(1e-4));
  CHECK(beta_min_gma(0.5, 13, 1.0) == doctest::Approx(8.0).epsilon(1e-6));
  for (int k = 2; k <= 200; k += 7) {
    const double closed = 4.0 / (1.0 - 2.0 / std::sqrt(k + 3.0));
    CHECK(beta_min_gma(0.5, k, 2.0) == doctest::Approx(2.0 * closed).epsilon(1e-6));
    CHECK(beta_min_gma_theta(0.5, k) ==
          doctest::Approx(2.0 / (std::sqrt(k + 3.0) + 2.0)).epsilon(1e-5));
  }
  CHECK(beta_min_gma(0.5, 1000000, 1.0) == doctest::Approx(4.0).epsilon(1e-2));
  for (double nu : {0.05, 0.2, 0.5, 0.8, 0.95}) {
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 2; k <= 100; ++k) {
      const double b = beta_min_gma(nu, k, 1.0);
      CHECK(b <= prev * (1 + 1e-12));
      CHECK(b >= beta_min_main(nu, 1.0));
      prev = b;
    }
  }
  CHECK_THROWS_AS(beta_min_gma(0.5, 1, 1.0), DomainError);
  CHECK_THROWS_AS(beta_min_gma(0.0, 5, 1.0), DomainError);
}

TEST_CASE("oracle bound") {
  const FunctionDictionary d((Matrix(2, 2) << std::sqrt(0.2), std::sqrt(10.0), 0, 0).finished());
  const ResponseVector eta(vec({0, 0}));
  const QConfig cfg = QConfig::uniform(2, 0.5, 2.0);
  CHECK(oracle_bound(d, eta, cfg, 0.5) == doctest::Approx(0.1 + std::log(4.0)).epsilon(1e-14));
  CHECK(oracle_bound(d, eta, QConfig::uniform(2, 0.5, 1e-14), 1.0) ==
        doctest::Approx(0.1).epsilon(1e-12));
  CHECK_THROWS_AS(oracle_bound(d, eta, cfg, 0.0), DomainError);
  CHECK_THROWS_AS(oracle_bound(d, eta, cfg, 1.5), DomainError);

  const FunctionDictionary e((Matrix(3, 3) << 1, 0, 4, 2, 0, 4, 3, 1, 4).finished());
  const ResponseVector target(vec({1, 2, 3}));
  CHECK(oracle_bound(e, target, QConfig::uniform(3, 0.5, 1.5), 1.0) ==
        doctest::Approx(1.5 / 3.0 * std::log(3.0)).epsilon(1e-14));

  BoundParameters params{0.1, 0.2, 0.5, 0.1, 1.0};
  CHECK(approx_oracle_bound(e, target, QConfig::uniform(3, 0.5, 1.5), params) ==
        doctest::Approx(0.5 * std::log(3.0) + 0.4 + 0.5 * std::log(10.0)).epsilon(1e-13));
}

TEST_CASE("entropy variant names") {
  CHECK(parse_entropy_variant("linear") == EntropyVariant::Linear);
  CHECK(parse_entropy_variant("kl") == EntropyVariant::KullbackLeibler);
  CHECK(std::string(to_string(EntropyVariant::KullbackLeibler)) == "kl");
  CHECK_THROWS_AS(parse_entropy_variant("entropy"), ConfigError);
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(QConfig::uniform(3, 1.5, 1.0).validate(), DomainError);
  CHECK_THROWS_AS(QConfig::uniform(3, 0.5, 0.0).validate(), DomainError);
  const QConfig zero_prior{0.5, 1.0, SimplexWeights(vec({0.0, 1.0})), EntropyVariant::Linear};
  CHECK_THROWS_AS(zero_prior.validate(), DomainError);
}
