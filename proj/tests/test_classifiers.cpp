#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "rsm/classifiers.hpp"
#include "rsm/errors.hpp"

using namespace rsm;

namespace {

struct Labeled {
    Eigen::MatrixXd x;
    std::vector<int> y;
};

Labeled circles(int per_class, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    std::normal_distribution<double> jitter(0.0, 0.1);
    Labeled d{Eigen::MatrixXd(2 * per_class, 2), {}};
    for (int i = 0; i < 2 * per_class; ++i) {
        const int label = i % 2;
        const double r = (label == 0 ? 1.0 : 3.0) + jitter(rng);
        const double a = angle(rng);
        d.x(i, 0) = r * std::cos(a);
        d.x(i, 1) = r * std::sin(a);
        d.y.push_back(label == 0 ? 7 : 2);
    }
    return d;
}

Labeled blobs(int per_class, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.3);
    const double centers[3][3] = {{0, 0, 0}, {3, 0, 1}, {0, 3, -1}};
    Labeled d{Eigen::MatrixXd(3 * per_class, 3), {}};
    for (int i = 0; i < 3 * per_class; ++i) {
        for (int k = 0; k < 3; ++k) d.x(i, k) = centers[i % 3][k] + noise(rng);
        d.y.push_back(i % 3);
    }
    return d;
}

double accuracy(const std::vector<int>& a, const std::vector<int>& b) {
    int hits = 0;
    for (std::size_t i = 0; i < a.size(); ++i) hits += a[i] == b[i];
    return static_cast<double>(hits) / static_cast<double>(a.size());
}

// One-vs-rest least squares on [x, 1], argmax decision.
std::vector<int> linear_ovr(const Labeled& train, const Eigen::MatrixXd& test, const std::vector<int>& classes) {
    Eigen::MatrixXd a(train.x.rows(), train.x.cols() + 1);
    a << train.x, Eigen::VectorXd::Ones(train.x.rows());
    Eigen::MatrixXd t = -Eigen::MatrixXd::Ones(train.x.rows(), static_cast<Eigen::Index>(classes.size()));
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (std::size_t c = 0; c < classes.size(); ++c)
            if (train.y[static_cast<std::size_t>(i)] == classes[c]) t(i, static_cast<Eigen::Index>(c)) = 1.0;
    const Eigen::MatrixXd beta = a.colPivHouseholderQr().solve(t);
    Eigen::MatrixXd b(test.rows(), test.cols() + 1);
    b << test, Eigen::VectorXd::Ones(test.rows());
    const Eigen::MatrixXd s = b * beta;
    std::vector<int> out;
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        Eigen::Index best;
        s.row(i).maxCoeff(&best);
        out.push_back(classes[static_cast<std::size_t>(best)]);
    }
    return out;
}

}  // namespace

TEST_CASE("kernel width heuristic") {
    Eigen::MatrixXd x(2, 2);
    x << 0, 0, 2, 0;
    CHECK(rbf_gamma_scale(x) == doctest::Approx(1.0));
    CHECK(rbf_gamma_scale(3.0 * x) == doctest::Approx(1.0 / 9.0));
    CHECK_THROWS_AS(rbf_gamma_scale(Eigen::MatrixXd::Ones(4, 3)), ZeroVarianceError);
    CHECK_THROWS_AS(fit_kernel_classifier(Eigen::MatrixXd::Ones(2, 3), {0, 1}, 1e-3), ZeroVarianceError);

    const auto c = fit_kernel_classifier(x, {0, 1}, 1e-3, 0.25);
    CHECK(c.gamma() == doctest::Approx(0.25));
}

TEST_CASE("RBF kernel entries") {
    Eigen::MatrixXd a(2, 2), b(1, 2);
    a << 0, 0, 1, 1;
    b << 1, 0;
    const auto k = rbf_kernel(a, b, 0.5);
    CHECK(k(0, 0) == doctest::Approx(std::exp(-0.5)));
    CHECK(k(1, 0) == doctest::Approx(std::exp(-0.5)));
    CHECK(rbf_kernel(a, a, 2.0).diagonal().isOnes(1e-15));
}

TEST_CASE("separable blobs are classified exactly") {
    const auto train = blobs(40, 1);
    const auto test = blobs(40, 2);
    const auto c = fit_kernel_classifier(train.x, train.y, 1e-3);
    CHECK(c.labels() == std::vector<int>{0, 1, 2});
    CHECK(accuracy(c.predict(train.x), train.y) == 1.0);
    CHECK(accuracy(c.predict(test.x), test.y) == 1.0);
}

TEST_CASE("concentric circles need the kernel") {
    const auto train = circles(60, 3);
    const auto test = circles(60, 4);
    const auto c = fit_kernel_classifier(train.x, train.y, 1e-3);
    CHECK(c.labels() == std::vector<int>{2, 7});
    CHECK(accuracy(c.predict(train.x), train.y) == 1.0);
    CHECK(accuracy(c.predict(test.x), test.y) == 1.0);
    CHECK(accuracy(linear_ovr(train, test.x, {2, 7}), test.y) < 0.8);
}

TEST_CASE("single-class training yields a constant classifier") {
    const auto train = blobs(5, 1);
    const auto c = fit_kernel_classifier(train.x, std::vector<int>(15, 4), 1e-3);
    CHECK(c.is_constant());
    CHECK(c.predict(train.x) == std::vector<int>(15, 4));
    CHECK(c.predict_one(Eigen::VectorXd::Zero(3)) == 4);
}

TEST_CASE("jointly fitted classifiers share one kernel") {
    const auto train = blobs(10, 5);
    std::vector<int> parity;
    for (int y : train.y) parity.push_back(y % 2);
    const auto cs = fit_kernel_classifiers(train.x, {train.y, parity, std::vector<int>(30, 1)}, 1e-3);
    REQUIRE(cs.size() == 3);
    CHECK(cs[0].shares_kernel_with(cs[1]));
    CHECK_FALSE(cs[0].shares_kernel_with(cs[2]));
    const auto alone = fit_kernel_classifier(train.x, parity, 1e-3);
    CHECK((alone.dual_coefficients() - cs[1].dual_coefficients()).norm() < 1e-8);
    const auto k = cs[0].kernel(train.x);
    CHECK(cs[1].predict_from_kernel(k) == cs[1].predict(train.x));
}

TEST_CASE("fitting is deterministic and survives JSON") {
    const auto train = circles(20, 8);
    const auto a = fit_kernel_classifier(train.x, train.y, 1e-2);
    const auto b = fit_kernel_classifier(train.x, train.y, 1e-2);
    CHECK(a.dual_coefficients() == b.dual_coefficients());
    const auto back = KernelClassifier::from_json(json::parse(a.to_json().dump()));
    CHECK(back.predict(train.x) == a.predict(train.x));
    CHECK(back.gamma() == a.gamma());
    const auto cst = KernelClassifier::from_json(json::parse(KernelClassifier::constant(3).to_json().dump()));
    CHECK(cst.is_constant());
    CHECK(cst.predict_one(Eigen::VectorXd::Zero(2)) == 3);
}

TEST_CASE("ridge recovers planted affine maps") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd x(200, 4), w(2, 4);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = normal(rng);
    Eigen::Vector2d b(0.5, -2.0);
    Eigen::MatrixXd y = x * w.transpose();
    y.rowwise() += b.transpose();

    const auto r = fit_linear_ridge(x, y, 1e-8);
    CHECK((r.weights() - w).cwiseAbs().maxCoeff() < 1e-4);
    CHECK((r.bias() - b).cwiseAbs().maxCoeff() < 1e-4);
    CHECK((r.predict(x) - y).cwiseAbs().maxCoeff() < 1e-4);

    // Constant targets give zero weights and the constant as bias.
    const auto c = fit_linear_ridge(x, Eigen::MatrixXd::Constant(200, 1, 3.0), 1.0);
    CHECK(c.weights().cwiseAbs().maxCoeff() < 1e-12);
    CHECK(c.bias()(0) == doctest::Approx(3.0));
}

TEST_CASE("ridge satisfies the augmented normal equations") {
    std::mt19937_64 rng(10);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd x(50, 6), y(50, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
    for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = normal(rng);
    const double lambda = 2.5;
    const auto r = fit_linear_ridge(x, y, lambda);

    // Unknowns [W^T; b^T] on design [X, 1]; the bias row is unpenalized.
    Eigen::MatrixXd a(50, 7);
    a << x, Eigen::VectorXd::Ones(50);
    Eigen::MatrixXd beta(7, 3);
    beta << r.weights().transpose(), r.bias().transpose();
    Eigen::MatrixXd penalty = Eigen::MatrixXd::Identity(7, 7) * lambda;
    penalty(6, 6) = 0.0;
    const Eigen::MatrixXd residual = (a.transpose() * a + penalty) * beta - a.transpose() * y;
    CHECK(residual.cwiseAbs().maxCoeff() < 1e-8);

    const auto back = LinearReadout::from_json(json::parse(r.to_json().dump()));
    CHECK(back.weights() == r.weights());
    CHECK(back.bias() == r.bias());
    CHECK_THROWS_AS(fit_linear_ridge(x, y.topRows(10), 1.0), DimensionError);
}

TEST_CASE("refits shrink the regularization until the training set is reproduced") {
    // One positive among evenly spaced negatives: heavy regularization smooths it away.
    Eigen::MatrixXd x(11, 1);
    std::vector<int> y(11, 0);
    for (int i = 0; i < 11; ++i) x(i, 0) = i;
    y[5] = 1;
    const auto loose = fit_kernel_classifiers(x, {y}, 10.0, 1.0).front();
    CHECK(loose.predict(x) != y);
    CHECK(loose.regularization() == 10.0);

    const auto tight = fit_kernel_classifiers(x, {y}, 10.0, 1.0, 8).front();
    CHECK(tight.predict(x) == y);
    CHECK(tight.regularization() < 10.0);

    // Already consistent: no refit happens.
    const auto train = blobs(10, 1);
    CHECK(fit_kernel_classifiers(train.x, {train.y}, 1e-3, 1.0, 5).front().regularization() == 1e-3);
    CHECK_THROWS_AS(fit_kernel_classifiers(train.x, {train.y}, 1e-3, 1.0, -1), ConfigurationError);
}
