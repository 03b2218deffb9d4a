#include "doctest.h"

#include <functional>
#include <sstream>
#include <stdexcept>

#include <algorithm>
#include <cmath>

#include "mb/variance.hpp"

using namespace mb;

namespace {

PairGradTable real_table(std::uint64_t seed, int classes = 3,
                         std::size_t per_class = 2, std::size_t dim = 2) {
  const Dataset ds =
      gen_gaussian_clusters(classes, per_class, dim, 2.0, 0.6, seed);
  Rng init(seed ^ 0xABCDEF);
  const EmbeddingState state = init_state({ModelKind::linear, {dim, 2}}, init);
  return build_pair_grad_table(state, ds, PairWeighting::unit());
}

// Hand-built table with the given centered rows; full gradient zero.
PairGradTable synthetic_table(std::size_t m, std::size_t plen,
                              const std::function<Vec(std::size_t, std::size_t)>& entry) {
  PairGradTable t;
  t.m = m;
  t.param_len = plen;
  t.full_grad.assign(plen, 0.0);
  t.pair_grads = Mat(m * m, plen);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b)
      if (a != b) {
        const Vec v = entry(a, b);
        std::copy(v.begin(), v.end(), t.pair_grads.row(a * m + b));
      }
  return t;
}

}  // namespace

TEST_CASE("table mean over ordered pairs is the full gradient") {
  const Dataset ds = gen_gaussian_clusters(3, 2, 2, 2.0, 0.6, 51);
  Rng init(52);
  const EmbeddingState state = init_state({ModelKind::mlp, {2, 4, 2}}, init);
  const PairWeighting w = PairWeighting::balanced_for(ds.labels);
  const PairGradTable table = build_pair_grad_table(state, ds, w);
  const GradientEstimate full = full_gradient(state, ds, w);
  for (std::size_t r = 0; r < table.param_len; ++r)
    CHECK(table.full_grad[r] ==
          doctest::Approx(full.grad[r]).epsilon(1e-12));

  // Centered rows average to zero per coordinate.
  for (std::size_t r = 0; r < table.param_len; ++r) {
    double sum = 0.0;
    for (std::size_t a = 0; a < table.m; ++a)
      for (std::size_t b = 0; b < table.m; ++b)
        if (a != b) sum += table.pair(a, b)[r] - table.full_grad[r];
    CHECK(std::abs(sum) < 1e-10);
  }
}

TEST_CASE("table of an all-inactive state is zero") {
  Mat f(4, 1);
  f.at(0, 0) = 0.0;
  f.at(1, 0) = 0.01;
  f.at(2, 0) = 50.0;
  f.at(3, 0) = 50.01;
  const Dataset ds = Dataset::from_parts(std::move(f), {0, 0, 1, 1});
  const PairGradTable table = build_pair_grad_table(
      make_identity_linear(1, 3.0), ds, PairWeighting::unit());
  for (double v : table.pair_grads.data) CHECK(v == 0.0);
  CHECK(vanilla_variance(table) == 0.0);
  CHECK(abar_term(table) == 0.0);
}

TEST_CASE("table memory guard") {
  const Dataset ds = gen_gaussian_clusters(2, 3, 1, 1.0, 0.1, 53);
  CHECK_THROWS_AS(build_pair_grad_table(make_identity_linear(1), ds,
                                        PairWeighting::unit(), 5),
                  std::invalid_argument);
}

TEST_CASE("vanilla variance hand cases and brute force") {
  // Two opposite pair gradients around a zero full gradient.
  const Vec g = {1.5, -2.0, 0.5};
  const PairGradTable t2 = synthetic_table(
      2, 3, [&](std::size_t a, std::size_t) { return a == 0 ? g : Vec{-1.5, 2.0, -0.5}; });
  double norm_g = 0.0;
  for (double v : g) norm_g += v * v;
  CHECK(vanilla_variance(t2) == doctest::Approx(norm_g).epsilon(1e-15));

  const PairGradTable same = synthetic_table(
      3, 2, [](std::size_t, std::size_t) { return Vec{0.0, 0.0}; });
  CHECK(vanilla_variance(same) == 0.0);

  const PairGradTable real = real_table(54);
  double brute = 0.0;
  for (std::size_t a = 0; a < real.m; ++a)
    for (std::size_t b = 0; b < real.m; ++b) {
      if (a == b) continue;
      for (std::size_t r = 0; r < real.param_len; ++r) {
        const double d = real.pair(a, b)[r] - real.full_grad[r];
        brute += d * d;
      }
    }
  brute /= static_cast<double>(real.m * real.m - real.m);
  CHECK(vanilla_variance(real) == doctest::Approx(brute).epsilon(1e-12));
}

TEST_CASE("abar term: zero rows, zero-row-mean construction, brute force") {
  const PairGradTable zero = synthetic_table(
      4, 2, [](std::size_t, std::size_t) { return Vec{0.0, 0.0}; });
  CHECK(abar_term(zero) == 0.0);

  // Rows constructed to have zero mean: the term vanishes.
  Rng rng(55);
  Mat vals(5, 5);
  for (std::size_t a = 0; a < 5; ++a) {
    double sum = 0.0;
    for (std::size_t b = 0; b < 5; ++b)
      if (a != b) sum += (vals.at(a, b) = rng.uniform(-1, 1));
    for (std::size_t b = 0; b < 5; ++b)
      if (a != b) vals.at(a, b) -= sum / 4.0;
  }
  const PairGradTable centered = synthetic_table(
      5, 1, [&](std::size_t a, std::size_t b) { return Vec{vals.at(a, b)}; });
  CHECK(abar_term(centered) < 1e-28);

  const PairGradTable real = real_table(56);
  double brute = 0.0;
  for (std::size_t a = 0; a < real.m; ++a) {
    for (std::size_t r = 0; r < real.param_len; ++r) {
      double mean = 0.0;
      for (std::size_t b = 0; b < real.m; ++b)
        if (b != a) mean += real.pair(a, b)[r] - real.full_grad[r];
      mean /= static_cast<double>(real.m - 1);
      brute += mean * mean;
    }
  }
  brute /= static_cast<double>(real.m);
  CHECK(abar_term(real) == doctest::Approx(brute).epsilon(1e-12));
}

TEST_CASE("variance bound arithmetic and exhaustive validity") {
  const PairGradTable real = real_table(57);
  const double nu2 = vanilla_variance(real);
  const double abar = abar_term(real);
  CHECK(variance_bound(real, 2) == doctest::Approx(nu2 / 2 + 2 * abar));
  CHECK(variance_bound(real, 3) ==
        doctest::Approx(nu2 / 6 + (4.0 / 3.0) * abar));

  const PairGradTable centered = synthetic_table(
      4, 1, [](std::size_t a, std::size_t b) {
        // zero-mean rows: bound reduces to the first term
        const double v[4][4] = {{0, 1, -1, 0},
                                {1, 0, 0, -1},
                                {-1, 0, 0, 1},
                                {0, -1, 1, 0}};
        return Vec{v[a][b]};
      });
  CHECK(abar_term(centered) == 0.0);
  CHECK(variance_bound(centered, 4) ==
        doctest::Approx(vanilla_variance(centered) / 12.0));

  // The bound dominates the true exhaustive variance on real tables.
  for (std::uint64_t seed : {58, 59, 60}) {
    const PairGradTable t = real_table(seed, 3, 2);
    CHECK(exhaustive_variance(t, 3) <= variance_bound(t, 3) + 1e-12);
  }
}

TEST_CASE("subsequence enumeration counts and order") {
  CHECK(ordered_subsequence_count(6, 3) == 120);
  CHECK(ordered_subsequence_count(60, 8) > 1000000ULL);
  std::vector<std::vector<std::size_t>> seqs;
  for_each_ordered_subsequence(3, 2, [&](std::span<const std::size_t> s) {
    seqs.emplace_back(s.begin(), s.end());
  });
  CHECK(seqs.size() == 6);
  CHECK(seqs.front() == std::vector<std::size_t>{0, 1});
  CHECK(seqs.back() == std::vector<std::size_t>{2, 1});
}

TEST_CASE("empirical variance: exact estimator and exhaustive batch give zero") {
  const Dataset ds = gen_gaussian_clusters(3, 2, 2, 2.0, 0.5, 61);
  Rng init(62);
  const EmbeddingState state = init_state({ModelKind::linear, {2, 2}}, init);
  const PairWeighting w = PairWeighting::unit();

  const VarianceReport full =
      empirical_variance(EstimatorKind::full, state, ds, 6, 50, 1, w);
  CHECK(full.empirical_variance == 0.0);

  const VarianceReport exhaustive =
      empirical_variance(EstimatorKind::multibatch, state, ds, 6, 50, 1, w);
  CHECK(exhaustive.empirical_variance == 0.0);
}

TEST_CASE("empirical variance is independent of the thread count") {
  const Dataset ds = gen_gaussian_clusters(4, 4, 2, 2.0, 0.6, 63);
  Rng init(64);
  const EmbeddingState state = init_state({ModelKind::linear, {2, 2}}, init);
  const PairWeighting w = PairWeighting::unit();
  const VarianceReport one = empirical_variance(
      EstimatorKind::multibatch, state, ds, 4, 200, 9, w, nullptr, 1);
  const VarianceReport three = empirical_variance(
      EstimatorKind::multibatch, state, ds, 4, 200, 9, w, nullptr, 3);
  CHECK(one.empirical_variance == three.empirical_variance);
  CHECK(one.std_error == three.std_error);

  CHECK_THROWS_AS(empirical_variance(EstimatorKind::multibatch, state, ds, 4,
                                     1, 9, w),
                  std::invalid_argument);
}

TEST_CASE("variance slope on exact and noisy power laws") {
  using P = std::pair<double, double>;
  const std::vector<P> quad = {{2, 1.0 / 4}, {4, 1.0 / 16}};
  CHECK(variance_slope(quad) == doctest::Approx(-2.0).epsilon(1e-12));
  const std::vector<P> lin = {{2, 1.0 / 2}, {4, 1.0 / 4}};
  CHECK(variance_slope(lin) == doctest::Approx(-1.0).epsilon(1e-12));

  Rng rng(65);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<P> noisy;
    for (double k : {4.0, 8.0, 16.0}) {
      const double noise = std::exp(rng.uniform(-0.15, 0.15));
      noisy.emplace_back(k, noise / (k * k));
    }
    const double slope = variance_slope(noisy);
    CHECK(slope > -2.3);
    CHECK(slope < -1.7);
  }

  const std::vector<P> bad = {{2, 0.0}, {4, 1.0}};
  CHECK_THROWS_AS(variance_slope(bad), std::invalid_argument);
  CHECK_THROWS_AS(variance_slope(std::vector<P>{{2, 1.0}}),
                  std::invalid_argument);
}

TEST_CASE("offdiag product check hand cases and fuzz") {
  const OffdiagProductCheck anti = offdiag_product_check(Vec{1.0, -1.0});
  CHECK(anti.lhs == doctest::Approx(-1.0));
  CHECK(anti.rhs == 0.0);
  CHECK(anti.holds);

  const OffdiagProductCheck flat = offdiag_product_check(Vec{2.5, 2.5, 2.5});
  CHECK(flat.lhs == doctest::Approx(flat.rhs).epsilon(1e-14));
  CHECK(flat.holds);

  Rng rng(66);
  for (int rep = 0; rep < 1000; ++rep) {
    Vec v(2 + rng.uniform_int(49));
    for (double& x : v) x = rng.uniform(-10, 10);
    CHECK(offdiag_product_check(v).holds);
  }

  CHECK_THROWS_AS(offdiag_product_check(Vec{1.0}), std::invalid_argument);
}

TEST_CASE("decomposition sums to the exhaustive variance") {
  for (std::uint64_t seed : {67, 68}) {
    const PairGradTable t = real_table(seed, 3, 2);  // m = 6
    for (std::size_t k : {2, 3, 4}) {
      const VarianceDecomposition d = decomposition_diagnostic(t, k, 1, 0);
      REQUIRE(d.exhaustive);
      const double exact = exhaustive_variance(t, k);
      if (exact > 0) CHECK(std::abs(d.total() - exact) / exact < 1e-10);
      if (k < 4) CHECK(d.disjoint == 0.0);  // no four-distinct quadruples
    }
  }
}

TEST_CASE("decomposition on a zero-row-mean table has no disjoint mass at k=3") {
  Rng rng(71);
  Mat vals(6, 6);
  for (std::size_t a = 0; a < 6; ++a) {
    double sum = 0.0;
    for (std::size_t b = 0; b < 6; ++b)
      if (a != b) sum += (vals.at(a, b) = rng.uniform(-1, 1));
    for (std::size_t b = 0; b < 6; ++b)
      if (a != b) vals.at(a, b) -= sum / 5.0;
  }
  const PairGradTable centered = synthetic_table(
      6, 1, [&](std::size_t a, std::size_t b) { return Vec{vals.at(a, b)}; });
  const VarianceDecomposition d = decomposition_diagnostic(centered, 3, 1, 0);
  CHECK(d.disjoint <= 1e-12);
  CHECK(d.total() ==
        doctest::Approx(exhaustive_variance(centered, 3)).epsilon(1e-12));
}

TEST_CASE("decomposition at k=2: identical term is half the vanilla variance") {
  const PairGradTable t = real_table(69, 2, 2);
  const VarianceDecomposition d = decomposition_diagnostic(t, 2, 1, 0);
  CHECK(d.identical == doctest::Approx(vanilla_variance(t) / 2.0));
  CHECK(d.disjoint == 0.0);
  // The reversed-pair share is nonzero for a symmetric loss.
  CHECK(d.shared > 0.0);
  CHECK(d.total() == doctest::Approx(exhaustive_variance(t, 2)).epsilon(1e-12));
}

TEST_CASE("decomposition Monte Carlo agrees with exhaustive mode") {
  const PairGradTable t = real_table(70, 3, 3);  // m = 9
  const double exact = exhaustive_variance(t, 3);
  // Force sampling by setting the exhaustive limit below 9*8*7.
  const VarianceDecomposition mc = decomposition_diagnostic(t, 3, 123, 3000, 10);
  CHECK_FALSE(mc.exhaustive);
  CHECK(mc.trials == 3000);
  CHECK(std::abs(mc.total() - exact) <= 4.0 * mc.std_error + 1e-12);
}
