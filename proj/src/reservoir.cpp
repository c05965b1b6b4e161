#include "rsm/reservoir.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "rsm/errors.hpp"
#include "rsm/json_util.hpp"

namespace rsm {

std::string to_string(Activation a) { return a == Activation::tanh ? "tanh" : "identity"; }

std::string to_string(ReservoirKind k) {
    switch (k) {
        case ReservoirKind::rand: return "rand";
        case ReservoirKind::crj: return "crj";
        case ReservoirKind::ldn: return "ldn";
        case ReservoirKind::custom: return "custom";
    }
    return "custom";
}

ReservoirKind reservoir_kind_from_string(const std::string& s) {
    if (s == "rand") return ReservoirKind::rand;
    if (s == "crj") return ReservoirKind::crj;
    if (s == "ldn") return ReservoirKind::ldn;
    if (s == "custom") return ReservoirKind::custom;
    throw Error("unknown reservoir kind '" + s + "'");
}

Reservoir::Reservoir(Eigen::MatrixXd input_weights, Eigen::MatrixXd recurrent_weights, Activation activation,
                     ReservoirKind kind, json meta)
    : input_(std::move(input_weights)),
      recurrent_(std::move(recurrent_weights)),
      activation_(activation),
      kind_(kind),
      meta_(std::move(meta)) {
    if (recurrent_.rows() != recurrent_.cols()) throw DimensionError("recurrent matrix must be square");
    if (input_.rows() != recurrent_.rows())
        throw DimensionError("input matrix must have as many rows as the reservoir has neurons");
    if (recurrent_.rows() < 1 || input_.cols() < 1) throw DimensionError("reservoir needs m, n >= 1");
}

Eigen::VectorXd Reservoir::step(const Eigen::VectorXd& h, const Eigen::VectorXd& x) const {
    if (h.size() != neurons() || x.size() != inputs())
        throw DimensionError("reservoir step: expected state of size " + std::to_string(neurons()) +
                             " and input of size " + std::to_string(inputs()));
    Eigen::VectorXd pre = input_ * x + recurrent_ * h;
    if (activation_ == Activation::tanh) return pre.array().tanh().matrix();
    return pre;
}

Eigen::VectorXd Reservoir::encode_sequence(const Sequence& seq) const {
    Eigen::VectorXd h = zero_state();
    for (Eigen::Index t = 0; t < seq.rows(); ++t) h = step(h, seq.row(t).transpose());
    return h;
}

Eigen::MatrixXd Reservoir::states(const Sequence& seq) const {
    Eigen::MatrixXd out(seq.rows(), neurons());
    Eigen::VectorXd h = zero_state();
    for (Eigen::Index t = 0; t < seq.rows(); ++t) {
        h = step(h, seq.row(t).transpose());
        out.row(t) = h.transpose();
    }
    return out;
}

std::vector<Eigen::MatrixXd> Reservoir::states_batch(const std::vector<Sequence>& xs, int trailing_zero_steps) const {
    if (trailing_zero_steps < 0) throw Error("states_batch: negative trailing step count");
    const auto batch = static_cast<Eigen::Index>(xs.size());
    Eigen::Index longest = 0;
    std::vector<Eigen::MatrixXd> out;
    out.reserve(xs.size());
    for (const auto& x : xs) {
        if (x.cols() != inputs()) throw DimensionError("states_batch: input dimension mismatch");
        longest = std::max(longest, x.rows());
        out.emplace_back(x.rows() + trailing_zero_steps, neurons());
    }
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(neurons(), batch);
    Eigen::MatrixXd x_t(inputs(), batch);
    for (Eigen::Index t = 0; t < longest + trailing_zero_steps; ++t) {
        // Finished sequences keep stepping on zero input; their columns are no longer read.
        for (Eigen::Index b = 0; b < batch; ++b) {
            const auto& x = xs[static_cast<std::size_t>(b)];
            if (t < x.rows()) x_t.col(b) = x.row(t).transpose();
            else x_t.col(b).setZero();
        }
        Eigen::MatrixXd pre = input_ * x_t;
        pre.noalias() += recurrent_ * h;
        h = activation_ == Activation::tanh ? Eigen::MatrixXd(pre.array().tanh().matrix()) : pre;
        for (Eigen::Index b = 0; b < batch; ++b) {
            auto& o = out[static_cast<std::size_t>(b)];
            if (t < o.rows()) o.row(t) = h.col(b).transpose();
        }
    }
    return out;
}

double Reservoir::spectral_radius() const { return rsm::spectral_radius(recurrent_); }

json Reservoir::to_json() const {
    return {{"kind", to_string(kind_)},
            {"activation", to_string(activation_)},
            {"meta", meta_},
            {"m", neurons()},
            {"n", inputs()},
            {"U", matrix_to_json(input_)},
            {"W", matrix_to_json(recurrent_)}};
}

Reservoir Reservoir::from_json(const json& j) {
    const auto act = j.at("activation").get<std::string>();
    if (act != "tanh" && act != "identity") throw Error("unknown activation '" + act + "'");
    Eigen::MatrixXd u = matrix_from_json(j.at("U"));
    Eigen::MatrixXd w = matrix_from_json(j.at("W"));
    if (j.contains("m") && j.at("m").get<int>() != w.rows()) throw DimensionError("reservoir JSON: m mismatch");
    if (j.contains("n") && j.at("n").get<int>() != u.cols()) throw DimensionError("reservoir JSON: n mismatch");
    return Reservoir(std::move(u), std::move(w), act == "tanh" ? Activation::tanh : Activation::identity,
                     reservoir_kind_from_string(j.at("kind").get<std::string>()),
                     j.value("meta", json::object()));
}

double spectral_radius(const Eigen::MatrixXd& w) {
    if (w.size() == 0) return 0.0;
    if (w.rows() != w.cols()) throw DimensionError("spectral_radius: matrix must be square");
    // LAPACK's dgeev is an order of magnitude faster than Eigen's EigenSolver at m = 1024.
    Eigen::MatrixXd a = w;
    const auto n = static_cast<lapack_int>(a.rows());
    Eigen::VectorXd re(n), im(n);
    const lapack_int info =
        LAPACKE_dgeev(LAPACK_COL_MAJOR, 'N', 'N', n, a.data(), n, re.data(), im.data(), nullptr, 1, nullptr, 1);
    if (info != 0) throw NumericalError("eigenvalue computation failed");
    double radius = 0.0;
    for (lapack_int i = 0; i < n; ++i) radius = std::max(radius, std::hypot(re(i), im(i)));
    return radius;
}

Reservoir build_random(int m, int n, double radius, double input_scale, std::uint64_t seed) {
    if (m < 1 || n < 1) throw DimensionError("build_random: m and n must be positive");
    if (!(radius > 0.0)) throw Error("build_random: spectral radius must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd w(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) w(i, j) = normal(rng);
    Eigen::MatrixXd u(m, n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) u(i, j) = input_scale * normal(rng);
    const double current = spectral_radius(w);
    if (!(current > 0.0)) throw NumericalError("build_random: sampled matrix has zero spectral radius");
    w *= radius / current;
    json meta = {{"spectral_radius", radius}, {"input_scale", input_scale}, {"seed", seed}};
    return Reservoir(std::move(u), std::move(w), Activation::tanh, ReservoirKind::rand, std::move(meta));
}

Reservoir build_crj(int m, int n, double cycle_weight, double jump_weight, int jump_length, double input_weight,
                    std::uint64_t sign_seed) {
    if (m < 2 || n < 1) throw DimensionError("build_crj: needs m >= 2 and n >= 1");
    if (jump_length < 1 || jump_length >= m) throw Error("build_crj: jump length must lie in [1, m)");
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(m, m);
    // w(i, j) is the weight from neuron j to neuron i.
    for (int i = 0; i < m; ++i) w((i + 1) % m, i) = cycle_weight;
    std::set<std::pair<int, int>> chords;
    int node = 0;
    do {
        const int next = (node + jump_length) % m;
        chords.insert(std::minmax(node, next));
        node = next;
    } while (node != 0);
    for (const auto& [a, b] : chords) {
        w(a, b) += jump_weight;
        w(b, a) += jump_weight;
    }

    std::mt19937_64 rng(sign_seed);
    std::bernoulli_distribution coin(0.5);
    Eigen::MatrixXd u(m, n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) u(i, j) = coin(rng) ? input_weight : -input_weight;

    json meta = {{"cycle_weight", cycle_weight},
                 {"jump_weight", jump_weight},
                 {"jump_length", jump_length},
                 {"input_weight", input_weight},
                 {"sign_seed", sign_seed}};
    return Reservoir(std::move(u), std::move(w), Activation::tanh, ReservoirKind::crj, std::move(meta));
}

LegendreSystem legendre_continuous(int q, double theta) {
    if (q < 1 || !(theta > 0.0)) throw Error("legendre_continuous: needs q >= 1 and theta > 0");
    LegendreSystem sys{Eigen::MatrixXd(q, q), Eigen::VectorXd(q)};
    for (int i = 0; i < q; ++i) {
        const double scale = (2.0 * i + 1.0) / theta;
        for (int j = 0; j < q; ++j) {
            const double sign = i < j ? -1.0 : (((i - j + 1) % 2 == 0) ? 1.0 : -1.0);
            sys.a(i, j) = scale * sign;
        }
        sys.b(i) = scale * (i % 2 == 0 ? 1.0 : -1.0);
    }
    return sys;
}

LegendreSystem legendre_discrete(int q, double theta) {
    const LegendreSystem c = legendre_continuous(q, theta);
    // exp([[A, B], [0, 0]]) = [[Ad, Bd], [0, 1]] gives both zero-order-hold matrices at once.
    Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(q + 1, q + 1);
    aug.topLeftCorner(q, q) = c.a;
    aug.topRightCorner(q, 1) = c.b;
    const Eigen::MatrixXd e = aug.exp();
    return {e.topLeftCorner(q, q), e.topRightCorner(q, 1)};
}

Reservoir build_ldn(int m, int n, double theta) {
    if (m < 1 || n < 1) throw DimensionError("build_ldn: m and n must be positive");
    if (m % n != 0)
        throw DimensionError("build_ldn: " + std::to_string(m) + " neurons cannot be split into " +
                             std::to_string(n) + " equal Legendre blocks");
    const int q = m / n;
    const LegendreSystem block = legendre_discrete(q, theta);
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(m, m);
    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(m, n);
    for (int c = 0; c < n; ++c) {
        w.block(c * q, c * q, q, q) = block.a;
        u.block(c * q, c, q, 1) = block.b;
    }
    json meta = {{"theta", theta}, {"order", q}};
    return Reservoir(std::move(u), std::move(w), Activation::identity, ReservoirKind::ldn, std::move(meta));
}

}  // namespace rsm
