#pragma once

// The fixed recurrent core (U, W, sigma) shared by echo state networks, stack machines and
// memory machines.

#include <Eigen/Dense>

#include <cstdint>
#include <string>

#include "rsm/alphabet.hpp"

namespace rsm {

enum class Activation { tanh, identity };
enum class ReservoirKind { rand, crj, ldn, custom };

std::string to_string(Activation a);
std::string to_string(ReservoirKind k);
ReservoirKind reservoir_kind_from_string(const std::string& s);

/// A reservoir with n inputs and m neurons. Immutable once built.
class Reservoir {
public:
    Reservoir(Eigen::MatrixXd input_weights, Eigen::MatrixXd recurrent_weights, Activation activation,
              ReservoirKind kind = ReservoirKind::custom, json meta = json::object());

    int neurons() const { return static_cast<int>(recurrent_.rows()); }
    int inputs() const { return static_cast<int>(input_.cols()); }
    const Eigen::MatrixXd& input_weights() const { return input_; }
    const Eigen::MatrixXd& recurrent_weights() const { return recurrent_; }
    Activation activation() const { return activation_; }
    ReservoirKind kind() const { return kind_; }
    const json& meta() const { return meta_; }

    Eigen::VectorXd zero_state() const { return Eigen::VectorXd::Zero(neurons()); }

    /// sigma(U x + W h).
    Eigen::VectorXd step(const Eigen::VectorXd& h, const Eigen::VectorXd& x) const;

    /// Folds `step` over the rows of `seq`, starting from the zero state.
    Eigen::VectorXd encode_sequence(const Sequence& seq) const;

    /// All states h_1..h_T as rows of a T x m matrix.
    Eigen::MatrixXd states(const Sequence& seq) const;

    /// states() of every sequence, stepped in lockstep as one matrix product per time step,
    /// with `trailing_zero_steps` zero inputs appended to each. Agrees with states() up to
    /// rounding.
    std::vector<Eigen::MatrixXd> states_batch(const std::vector<Sequence>& xs, int trailing_zero_steps = 0) const;

    double spectral_radius() const;

    json to_json() const;
    static Reservoir from_json(const json& j);

private:
    Eigen::MatrixXd input_;
    Eigen::MatrixXd recurrent_;
    Activation activation_;
    ReservoirKind kind_;
    json meta_;
};

double spectral_radius(const Eigen::MatrixXd& w);

/// i.i.d. standard normal W rescaled to the requested spectral radius; U standard normal
/// times `input_scale`; tanh activation.
Reservoir build_random(int m, int n, double spectral_radius, double input_scale, std::uint64_t seed);

inline constexpr std::uint64_t kCrjSignSeed = 20210531;

/// Cycle reservoir with jumps: `cycle_weight` on the ring i -> i+1, `jump_weight` on the
/// bidirectional chords visited by stepping `jump_length` from neuron 0 until the walk closes.
/// Input weights all have magnitude `input_weight`, with signs drawn from `sign_seed`.
Reservoir build_crj(int m, int n, double cycle_weight, double jump_weight, int jump_length,
                    double input_weight, std::uint64_t sign_seed = kCrjSignSeed);

/// Continuous-time Legendre state-space block of order q with window length theta.
struct LegendreSystem {
    Eigen::MatrixXd a;
    Eigen::VectorXd b;
};
LegendreSystem legendre_continuous(int q, double theta);

/// The same system discretized with a zero-order hold at unit time step.
LegendreSystem legendre_discrete(int q, double theta);

/// Legendre delay network: one q = m / n dimensional block per input channel, identity
/// activation, W block diagonal.
Reservoir build_ldn(int m, int n, double theta);

}  // namespace rsm
