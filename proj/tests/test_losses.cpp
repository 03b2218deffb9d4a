#include "doctest.h"

#include <limits>
#include <stdexcept>

#include <cmath>

#include "mb/dataio.hpp"
#include "mb/losses.hpp"
#include "mb/rng.hpp"

using namespace mb;

TEST_CASE("pair_loss hand values") {
  const Vec a = {0.5, -1.0};
  CHECK(pair_loss(2.0, a, a, true, 1.0) == 0.0);

  const Vec zero = {0.0, 0.0};
  const Vec sqrt2 = {std::sqrt(2.0), 0.0};  // squared distance 2
  CHECK(pair_loss(2.0, zero, sqrt2, false, 1.0) == doctest::Approx(1.0));

  const Vec offset = {std::sqrt(1.5), 0.0};  // squared distance 1.5
  CHECK(pair_loss(1.0, zero, offset, true, 2.0) == doctest::Approx(3.0));

  CHECK_THROWS_AS(pair_loss(1.0, a, Vec{1.0}, true, 1.0),
                  std::invalid_argument);
}

TEST_CASE("pair_loss_grad hand values and antisymmetry") {
  // Inactive hinge: same pair already inside the margin.
  const Vec p = {0.1, 0.0};
  const PairLossGrad inactive = pair_loss_grad(5.0, p, p, true, 1.0);
  CHECK_FALSE(inactive.active);
  CHECK(inactive.dtheta == 0.0);
  CHECK(inactive.dsig_i == Vec{0, 0});
  CHECK(inactive.dsig_j == Vec{0, 0});

  const PairLossGrad g =
      pair_loss_grad(1.0, Vec{1, 0}, Vec{0, 0}, true, 1.0);
  CHECK(g.active);
  CHECK(g.dtheta == -1.0);
  CHECK(g.dsig_i == Vec{2, 0});
  CHECK(g.dsig_j == Vec{-2, 0});

  Rng rng(17);
  for (int rep = 0; rep < 50; ++rep) {
    Vec a(3), b(3);
    for (int i = 0; i < 3; ++i) {
      a[i] = rng.uniform(-2, 2);
      b[i] = rng.uniform(-2, 2);
    }
    const PairLossGrad r =
        pair_loss_grad(rng.uniform(0.5, 3.0), a, b, rep % 2 == 0, 1.5);
    for (int i = 0; i < 3; ++i) CHECK(r.dsig_i[i] + r.dsig_j[i] == 0.0);
  }
}

TEST_CASE("pair_loss_grad matches finite differences away from the kink") {
  Rng rng(18);
  const double h = 1e-7;
  int checked = 0;
  while (checked < 40) {
    Vec a(3), b(3);
    for (int i = 0; i < 3; ++i) {
      a[i] = rng.uniform(-1.5, 1.5);
      b[i] = rng.uniform(-1.5, 1.5);
    }
    const double theta = rng.uniform(0.5, 3.0);
    const bool same = rng.uniform_int(2) == 0;
    const double y = same ? 1.0 : -1.0;
    const double arg = 1.0 - y * (theta - sq_dist(a, b));
    if (std::abs(arg) < 1e-6) continue;  // precondition: away from the kink
    ++checked;

    const double w = 1.3;
    const PairLossGrad g = pair_loss_grad(theta, a, b, same, w);
    const auto check_rel = [](double analytic, double fd) {
      const double denom = std::max({std::abs(analytic), std::abs(fd), 1e-8});
      CHECK(std::abs(analytic - fd) / denom < 1e-6);
    };
    for (int i = 0; i < 3; ++i) {
      Vec up = a, down = a;
      up[i] += h;
      down[i] -= h;
      check_rel(g.dsig_i[i], (pair_loss(theta, up, b, same, w) -
                              pair_loss(theta, down, b, same, w)) /
                                 (2 * h));
    }
    check_rel(g.dtheta, (pair_loss(theta + h, a, b, same, w) -
                         pair_loss(theta - h, a, b, same, w)) /
                            (2 * h));
  }
}

TEST_CASE("pair_loss is nonnegative and symmetric") {
  Rng rng(19);
  for (int rep = 0; rep < 100; ++rep) {
    Vec a(2), b(2);
    for (int i = 0; i < 2; ++i) {
      a[i] = rng.uniform(-3, 3);
      b[i] = rng.uniform(-3, 3);
    }
    const double theta = rng.uniform(-1, 4);
    const bool same = rng.uniform_int(2) == 0;
    const double w = rng.uniform(0, 2);
    const double lij = pair_loss(theta, a, b, same, w);
    CHECK(lij >= 0.0);
    CHECK(lij == pair_loss(theta, b, a, same, w));
  }
}

TEST_CASE("sns_satisfied uses strict margins") {
  const Vec zero = {0.0, 0.0};
  const Vec s2 = {std::sqrt(2.0), 0.0};
  const Vec s4 = {2.0, 0.0};
  CHECK(sns_satisfied(2.0, zero, zero, true));        // d2=0 < 1
  CHECK_FALSE(sns_satisfied(2.0, zero, s2, false));   // d2=2 inside margin
  CHECK(sns_satisfied(2.0, zero, s4, false));         // d2=4 > 3
  CHECK_FALSE(sns_satisfied(2.0, zero, s2, true));
}

TEST_CASE("full_objective on the equidistant trio is exactly 1 at theta=2") {
  // Identity embedding: all six ordered pairs have squared distance 2, so
  // each contributes a hinge value of 1 and the average is 1.
  const Dataset trio = equidistant_trio();
  const EmbeddingState ident = make_identity_linear(3, 2.0);
  CHECK(full_objective(ident, trio, PairWeighting::unit()) ==
        doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("full_objective vanishes when all margins hold") {
  // Two tight clusters far apart, theta between the scales.
  Mat f(4, 1);
  f.at(0, 0) = 0.0;
  f.at(1, 0) = 0.1;
  f.at(2, 0) = 10.0;
  f.at(3, 0) = 10.1;
  const Dataset ds = Dataset::from_parts(std::move(f), {0, 0, 1, 1});
  const EmbeddingState ident = make_identity_linear(1, 2.0);
  CHECK(full_objective(ident, ds, PairWeighting::unit()) == 0.0);

  Mat single(2, 1);
  const Dataset twins = Dataset::from_parts(std::move(single), {0, 0});
  CHECK(full_objective(make_identity_linear(1, 2.0), twins,
                       PairWeighting::unit()) == 0.0);
}

TEST_CASE("objective needs at least two samples") {
  Mat f(1, 1);
  const Dataset one = Dataset::from_parts(std::move(f), {0});
  CHECK_THROWS_AS(
      full_objective(make_identity_linear(1), one, PairWeighting::unit()),
      std::invalid_argument);
}

TEST_CASE("balanced weighting equalizes aggregate pair mass") {
  const std::vector<int> labels = {0, 0, 0, 1};
  const auto [same, not_same] = ordered_pair_counts(labels);
  CHECK(same == 6);
  CHECK(not_same == 6);
  const std::vector<int> skew = {0, 0, 1, 2};
  const auto [s2, n2] = ordered_pair_counts(skew);
  CHECK(s2 == 2);
  CHECK(n2 == 10);
  const PairWeighting w = PairWeighting::balanced(s2, n2);
  CHECK(w.same == 1.0);
  CHECK(w.not_same == doctest::Approx(0.2));
}

TEST_CASE("multiclass hinge on the trio with the mean-direction head") {
  const Dataset trio = equidistant_trio();
  MulticlassHead head;
  head.weights = Mat(2, 3);
  head.weights.at(0, 0) = 1.0;  // class 0 scorer: e1 + e3
  head.weights.at(0, 2) = 1.0;
  head.weights.at(1, 1) = 1.0;  // class 1 scorer: e2
  head.bias.assign(2, 0.0);
  CHECK(multiclass_hinge(head, trio.features, trio.labels) == 0.0);
}

TEST_CASE("multiclass hinge degenerate cases") {
  Mat sigs(3, 2);
  sigs.at(0, 0) = 1.0;
  sigs.at(1, 1) = 1.0;
  sigs.at(2, 0) = -1.0;
  const std::vector<int> one_class = {0, 0, 0};
  MulticlassHead head;
  head.weights = Mat(1, 2);
  head.weights.at(0, 0) = 0.7;
  head.bias.assign(1, -0.3);
  CHECK(multiclass_hinge(head, sigs, one_class) == 0.0);

  // Identical signatures for two classes force at least the unit margin.
  Mat twin(2, 2, 0.5);
  MulticlassHead head2;
  head2.weights = Mat(2, 2);
  head2.bias.assign(2, 0.0);
  const std::vector<int> two = {0, 1};
  CHECK(multiclass_hinge(head2, twin, two) >= 1.0);

  const std::vector<int> bad = {0, 7};
  CHECK_THROWS_AS(multiclass_hinge(head2, twin, bad), std::invalid_argument);
}

TEST_CASE("construct_multiclass_head hand case in one dimension") {
  Mat sigs(2, 1);
  sigs.at(0, 0) = -2.0;
  sigs.at(1, 0) = 2.0;
  const std::vector<int> labels = {0, 1};
  const MulticlassHead head = construct_multiclass_head(sigs, labels, 2);
  CHECK(head.weights.at(0, 0) == -2.0);
  CHECK(head.weights.at(1, 0) == 2.0);
  CHECK(head.bias[0] == -2.0);
  CHECK(head.bias[1] == -2.0);
  CHECK(multiclass_hinge(head, sigs, labels) == 0.0);
}

TEST_CASE("construct_multiclass_head degenerate cases") {
  Mat zeros(4, 3);
  const std::vector<int> labels = {0, 1, 0, 1};
  const MulticlassHead head = construct_multiclass_head(zeros, labels, 2);
  for (double v : head.weights.data) CHECK(v == 0.0);
  for (double v : head.bias) CHECK(v == 0.0);

  Mat singles(3, 2);
  singles.at(0, 0) = 1.0;
  singles.at(1, 1) = -2.0;
  singles.at(2, 0) = 0.5;
  const std::vector<int> each = {0, 1, 2};
  const MulticlassHead h2 = construct_multiclass_head(singles, each, 3);
  for (int c = 0; c < 3; ++c)
    for (std::size_t j = 0; j < 2; ++j)
      CHECK(h2.weights.at(c, j) == singles.at(c, j));

  CHECK_THROWS_AS(construct_multiclass_head(singles, each, 4),
                  std::invalid_argument);
}

TEST_CASE("a margin-satisfying embedding yields a zero-loss multiclass head") {
  // Three classes of two signatures each: same-pair squared distances 0.16
  // (below theta-1 = 1), cross-pair at least 7.84 (above theta+1 = 3), so
  // the metric objective is exactly zero and the constructed head must
  // score every sample with zero hinge loss.
  Mat f(6, 2);
  const std::vector<int> labels = {0, 0, 1, 1, 2, 2};
  for (int c = 0; c < 3; ++c) {
    f.at(2 * c, 0) = 3.0 * c;
    f.at(2 * c, 1) = 0.2;
    f.at(2 * c + 1, 0) = 3.0 * c;
    f.at(2 * c + 1, 1) = -0.2;
  }
  const Dataset ds = Dataset::from_parts(f, labels);
  const EmbeddingState ident = make_identity_linear(2, 2.0);
  REQUIRE(full_objective(ident, ds, PairWeighting::unit()) == 0.0);

  const MulticlassHead head = construct_multiclass_head(f, labels, 3);
  CHECK(multiclass_hinge(head, f, labels) == 0.0);
}

TEST_CASE("no threshold works for the trio but the multiclass head does") {
  const Dataset trio = equidistant_trio();
  double min_objective = std::numeric_limits<double>::infinity();
  for (double theta = 0.1; theta <= 10.0 + 1e-9; theta += 0.01) {
    const EmbeddingState ident = make_identity_linear(3, theta);
    min_objective = std::min(
        min_objective, full_objective(ident, trio, PairWeighting::unit()));
  }
  CHECK(min_objective > 0.5);
}
