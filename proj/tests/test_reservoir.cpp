#include "doctest.h"

#include <cmath>
#include <numbers>

#include "linalg_oracle.hpp"
#include "rsm/errors.hpp"
#include "rsm/reservoir.hpp"

using namespace rsm;

namespace {

// Zero-order hold via truncated power series: Ad = sum A^k/k!, Bd = sum A^k/(k+1)! B.
LegendreSystem zoh_series(const LegendreSystem& c, int terms = 60) {
    const auto q = c.a.rows();
    Eigen::MatrixXd ad = Eigen::MatrixXd::Identity(q, q);
    Eigen::MatrixXd integral = Eigen::MatrixXd::Identity(q, q);
    Eigen::MatrixXd power = Eigen::MatrixXd::Identity(q, q);
    double fact = 1.0;
    for (int k = 1; k < terms; ++k) {
        power = power * c.a;
        fact *= k;
        ad += power / fact;
        integral += power / (fact * (k + 1));
    }
    return {ad, integral * c.b};
}

// Shifted Legendre polynomial evaluated by the three-term recurrence on x = 2r - 1.
double shifted_legendre(int i, double r) {
    const double x = 2.0 * r - 1.0;
    double p0 = 1.0, p1 = x;
    if (i == 0) return p0;
    for (int k = 1; k < i; ++k) {
        const double p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
    }
    return p1;
}

}  // namespace

TEST_CASE("random reservoir hits the requested spectral radius") {
    for (double radius : {0.5, 0.9, 1.2}) {
        const auto r = build_random(40, 3, radius, 1.0, 11);
        CHECK(r.spectral_radius() == doctest::Approx(radius).epsilon(1e-9));
        CHECK(oracle::gelfand_radius(r.recurrent_weights()) == doctest::Approx(radius).epsilon(2e-3));
    }
}

TEST_CASE("construction is deterministic in the seed") {
    const auto a = build_random(20, 2, 0.9, 0.5, 3);
    const auto b = build_random(20, 2, 0.9, 0.5, 3);
    const auto c = build_random(20, 2, 0.9, 0.5, 4);
    CHECK(a.recurrent_weights() == b.recurrent_weights());
    CHECK(a.input_weights() == b.input_weights());
    CHECK(a.recurrent_weights() != c.recurrent_weights());
    CHECK_THROWS_AS(build_random(0, 2, 0.9, 1.0, 1), DimensionError);
}

TEST_CASE("CRJ structure") {
    const auto r = build_crj(8, 2, 0.5, 0.2, 3, 0.7);
    const auto& w = r.recurrent_weights();
    for (int i = 0; i < 8; ++i) {
        CHECK(w(i, (i + 7) % 8) == doctest::Approx(0.5));
        int nonzero = 0;
        for (int j = 0; j < 8; ++j) nonzero += w(i, j) != 0.0;
        CHECK(nonzero <= 3);
    }
    CHECK(r.input_weights().cwiseAbs().minCoeff() == doctest::Approx(0.7));
    CHECK(r.input_weights().cwiseAbs().maxCoeff() == doctest::Approx(0.7));
    CHECK(oracle::gelfand_radius(w) < 1.0);
    CHECK(r.spectral_radius() == doctest::Approx(oracle::gelfand_radius(w)).epsilon(2e-3));
    // Chords are symmetric.
    CHECK((w - w.transpose()).cwiseAbs().maxCoeff() == doctest::Approx(0.5));
}

TEST_CASE("Legendre block closed form") {
    const auto c = legendre_continuous(2, 1.0);
    Eigen::MatrixXd a(2, 2);
    a << -1, -1, 3, -3;
    CHECK((c.a - a).norm() == doctest::Approx(0.0));
    CHECK(c.b(0) == doctest::Approx(1.0));
    CHECK(c.b(1) == doctest::Approx(-3.0));

    const auto one = legendre_continuous(1, 4.0);
    CHECK(one.a(0, 0) == doctest::Approx(-0.25));
    CHECK(one.b(0) == doctest::Approx(0.25));
    const auto d1 = legendre_discrete(1, 4.0);
    CHECK(d1.a(0, 0) == doctest::Approx(std::exp(-0.25)));
    CHECK(d1.b(0) == doctest::Approx(1.0 - std::exp(-0.25)));
}

TEST_CASE("discretization matches a power series") {
    for (auto [q, theta] : {std::pair{2, 1.0}, std::pair{6, 10.0}, std::pair{12, 30.0}}) {
        const auto d = legendre_discrete(q, theta);
        const auto s = zoh_series(legendre_continuous(q, theta));
        CHECK((d.a - s.a).norm() < 1e-9);
        CHECK((d.b - s.b).norm() < 1e-9);
    }
}

TEST_CASE("LDN state decodes the recent input window") {
    const int q = 12;
    const double theta = 20.0;
    const auto r = build_ldn(q, 1, theta);
    CHECK(r.activation() == Activation::identity);
    const int steps = 120;
    Sequence u(steps, 1);
    for (int t = 0; t < steps; ++t) u(t, 0) = std::sin(2.0 * std::numbers::pi * t / 60.0);
    const Eigen::MatrixXd h = r.states(u);
    const auto t = steps - 1;
    for (int delay = 0; delay <= 10; ++delay) {
        // A zero-order hold lags the continuous window by half a step.
        const double rr = (delay + 0.5) / theta;
        double decoded = 0.0;
        for (int i = 0; i < q; ++i) decoded += shifted_legendre(i, rr) * h(t, i);
        CHECK(std::abs(decoded - u(t - delay, 0)) < 2e-2);
    }
}

TEST_CASE("LDN is block diagonal per input") {
    const auto r = build_ldn(12, 3, 5.0);
    const auto& w = r.recurrent_weights();
    CHECK(w.block(0, 4, 4, 8).isZero());
    CHECK(w.block(0, 0, 4, 4) == w.block(8, 8, 4, 4));
    CHECK(r.input_weights().block(0, 1, 4, 2).isZero());
    CHECK_THROWS_AS(build_ldn(10, 3, 5.0), DimensionError);
}

TEST_CASE("state update matches a hand-rolled loop") {
    const auto r = build_random(6, 2, 0.8, 1.0, 7);
    Sequence x(2, 2);
    x << 1, 0, 0, 1;
    Eigen::VectorXd h = Eigen::VectorXd::Zero(6);
    for (int t = 0; t < 2; ++t) {
        Eigen::VectorXd pre = r.input_weights() * x.row(t).transpose() + r.recurrent_weights() * h;
        for (int i = 0; i < 6; ++i) h(i) = std::tanh(pre(i));
    }
    CHECK((r.encode_sequence(x) - h).norm() < 1e-14);
    CHECK((r.states(x).row(1).transpose() - h).norm() < 1e-14);
    CHECK(r.encode_sequence(Sequence(0, 2)) == r.zero_state());
    CHECK_THROWS_AS(r.step(h, Eigen::VectorXd::Zero(3)), DimensionError);
}

TEST_CASE("batched states agree with one sequence at a time") {
    const auto r = build_random(20, 3, 0.9, 1.0, 11);
    std::vector<Sequence> xs;
    for (int len : {5, 0, 9, 1}) xs.push_back(Sequence::Random(len, 3));
    const auto batch = r.states_batch(xs, 1);
    REQUIRE(batch.size() == xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        Sequence padded = Sequence::Zero(xs[i].rows() + 1, 3);
        padded.topRows(xs[i].rows()) = xs[i];
        REQUIRE(batch[i].rows() == padded.rows());
        CHECK((batch[i] - r.states(padded)).cwiseAbs().maxCoeff() < 1e-12);
    }
    CHECK(r.states_batch({}).empty());
    CHECK_THROWS_AS(r.states_batch({Sequence::Zero(2, 4)}), DimensionError);
}

TEST_CASE("contractive reservoirs forget their prefix") {
    const auto r = build_random(30, 1, 0.5, 0.5, 2);
    Eigen::VectorXd a = r.step(r.zero_state(), Eigen::VectorXd::Constant(1, 1.0));
    Eigen::VectorXd b = r.zero_state();
    const Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
    double prev = (a - b).norm();
    for (int t = 0; t < 40; ++t) {
        a = r.step(a, x);
        b = r.step(b, x);
    }
    CHECK((a - b).norm() < 1e-6 * prev);
}

TEST_CASE("reservoir JSON round trip") {
    for (const auto& r : {build_random(5, 2, 0.9, 1.0, 1), build_crj(6, 2, 0.5, 0.2, 2, 1.0), build_ldn(6, 2, 3.0)}) {
        const auto back = Reservoir::from_json(json::parse(r.to_json().dump()));
        CHECK(back.recurrent_weights() == r.recurrent_weights());
        CHECK(back.input_weights() == r.input_weights());
        CHECK(back.activation() == r.activation());
        CHECK(back.kind() == r.kind());
        CHECK(back.meta() == r.meta());
    }
}
