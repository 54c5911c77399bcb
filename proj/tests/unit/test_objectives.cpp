#include <doctest.h>

#include <cmath>

#include "qmireg/error.hpp"
#include "qmireg/objectives.hpp"
#include "qmireg/rng.hpp"
#include "support/oracles.hpp"

using namespace qmireg;
using namespace qmireg::objectives;

namespace {

ScoreBatch one(float s0, float s1, int label) { return ScoreBatch{1, {s0, s1}, {label}}; }

} // namespace

TEST_CASE("hinge loss values") {
    CHECK(hinge_loss(one(-1.0f, 1.0f, 1)).loss == 0.0);
    CHECK(hinge_loss(one(0.0f, 0.0f, 1)).loss == 2.0);
    CHECK(hinge_loss(one(0.0f, 0.0f, 0)).loss == 2.0);
    CHECK(hinge_loss(one(2.0f, -0.5f, 1)).loss == 4.5);
    CHECK(hinge_loss(one(0.5f, -2.0f, 0)).loss == doctest::Approx(0.5));
}

TEST_CASE("hinge loss is zero exactly when both margins are met") {
    Rng rng(1);
    for (int i = 0; i < 200; ++i) {
        const auto b = one(float(rng.uniform(-3, 3)), float(rng.uniform(-3, 3)), int(rng.below(2)));
        const auto r = hinge_loss(b);
        CHECK(r.loss >= 0.0);
        const int y = b.labels[0];
        const bool met = b.score(0, y) >= 1.0f && b.score(0, 1 - y) <= -1.0f;
        CHECK((r.loss == 0.0) == met);
    }
}

TEST_CASE("hinge gradient at the hinge point is zero") {
    const auto r = hinge_loss(one(-1.0f, 1.0f, 1));
    CHECK(r.grad[0] == 0.0f);
    CHECK(r.grad[1] == 0.0f);
    const auto s = hinge_loss(one(0.0f, 0.0f, 1));
    CHECK(s.grad[0] == 1.0f);
    CHECK(s.grad[1] == -1.0f);
}

TEST_CASE("hinge loss is not shift invariant") {
    CHECK(hinge_loss(one(-1.0f, 1.0f, 1)).loss != hinge_loss(one(4.0f, 6.0f, 1)).loss);
}

TEST_CASE("cross-entropy values") {
    CHECK(cross_entropy_loss(one(0.0f, 0.0f, 0)).loss == doctest::Approx(std::log(2.0)).epsilon(1e-7));
    CHECK(cross_entropy_loss(one(0.0f, 10.0f, 1)).loss == doctest::Approx(std::log1p(std::exp(-10.0))).epsilon(1e-4));
    const auto saturated = cross_entropy_loss(one(-50.0f, 50.0f, 1));
    CHECK(std::isfinite(saturated.loss));
    CHECK(saturated.loss <= 1e-30);
    CHECK(std::isfinite(cross_entropy_loss(one(1000.0f, -1000.0f, 1)).loss));
}

TEST_CASE("cross-entropy is shift invariant") {
    Rng rng(2);
    for (int i = 0; i < 50; ++i) {
        const float a = float(rng.uniform(-5, 5)), b = float(rng.uniform(-5, 5)), c = float(rng.uniform(-5, 5));
        const int y = int(rng.below(2));
        CHECK(cross_entropy_loss(one(a, b, y)).loss ==
              doctest::Approx(cross_entropy_loss(one(a + c, b + c, y)).loss).epsilon(1e-5));
    }
}

TEST_CASE("loss gradients match central differences") {
    Rng rng(3);
    ScoreBatch b{6, {}, {}};
    for (int i = 0; i < 12; ++i) b.scores.push_back(float(rng.uniform(-3, 3)));
    for (int i = 0; i < 6; ++i) b.labels.push_back(int(rng.below(2)));
    for (auto [kind, tol] : {std::pair{LossKind::CrossEntropy, 1e-4}, std::pair{LossKind::Hinge, 1e-4}}) {
        const auto r = classification_loss(kind, b);
        std::vector<double> x(b.scores.begin(), b.scores.end());
        const auto num = qmireg::testing::numeric_gradient(x, [&](const std::vector<double>& v) {
            ScoreBatch p = b;
            for (std::size_t i = 0; i < v.size(); ++i) p.scores[i] = float(v[i]);
            return classification_loss(kind, p).loss;
        }, 1e-2);
        std::vector<double> g(r.grad.begin(), r.grad.end());
        CHECK(qmireg::testing::relative_error(g, num) <= tol);
    }
}

TEST_CASE("score batch validation") {
    CHECK_THROWS_AS(hinge_loss(ScoreBatch{1, {0.0f}, {0}}), InvalidInput);
    CHECK_THROWS_AS(hinge_loss(ScoreBatch{1, {0.0f, 1.0f}, {3}}), InvalidInput);
    const auto empty = cross_entropy_loss(ScoreBatch{0, {}, {}});
    CHECK(empty.loss == 0.0);
    CHECK(empty.grad.empty());
}

TEST_CASE("total loss") {
    CHECK(total_loss(0.5, -0.8, 0.0).j_total == 0.5);
    CHECK(total_loss(1.0, -0.8, 0.001).j_total == doctest::Approx(0.9992).epsilon(1e-12));
    CHECK(total_loss(0.0, -1.0, 1.0).j_total == -1.0);
    CHECK(total_loss(0.3, -0.2).eta == kDefaultEta);
    CHECK_THROWS_AS(total_loss(0.5, -0.8, -0.1), InvalidConfig);
    CHECK_THROWS_AS(total_loss(0.5, -0.8, 1.5), InvalidConfig);
    CHECK_THROWS_AS(validate_eta(std::nan("")), InvalidConfig);
}

TEST_CASE("total loss is affine in eta") {
    Rng rng(4);
    for (int i = 0; i < 20; ++i) {
        const double jc = rng.uniform(0, 2), jm = rng.uniform(-1, 0);
        const double e1 = rng.uniform(0, 0.5), e2 = rng.uniform(0.5, 1);
        const double mid = total_loss(jc, jm, 0.5 * (e1 + e2)).j_total;
        CHECK(mid == doctest::Approx(0.5 * (total_loss(jc, jm, e1).j_total + total_loss(jc, jm, e2).j_total)));
    }
}
