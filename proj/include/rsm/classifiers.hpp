#pragma once

// Trainable output functions: one-vs-rest RBF kernel ridge classifiers and an affine ridge
// readout. Samples are rows.

#include <Eigen/Dense>

#include <memory>
#include <vector>

#include "rsm/alphabet.hpp"

namespace rsm {

/// 1 / (d * mean per-column variance of X).
double rbf_gamma_scale(const Eigen::MatrixXd& x);

/// K(i, j) = exp(-gamma * |a_i - b_j|^2) for rows a_i of `a` and b_j of `b`.
Eigen::MatrixXd rbf_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double gamma);

class KernelClassifier {
public:
    KernelClassifier() = default;

    /// Always predicts `label`. Carries no support points.
    static KernelClassifier constant(int label);

    const std::vector<int>& labels() const { return labels_; }
    bool is_constant() const { return labels_.size() == 1; }
    double gamma() const { return gamma_; }
    double regularization() const { return regularization_; }
    const Eigen::MatrixXd& support() const { return *support_; }
    const Eigen::MatrixXd& dual_coefficients() const { return dual_; }
    /// Two classifiers fitted by the same fit_kernel_classifiers call share support points
    /// and gamma, so one kernel evaluation serves both.
    bool shares_kernel_with(const KernelClassifier& other) const;
    /// Re-links to `other`'s support storage when both hold equal support points and gamma.
    void share_support_with(const KernelClassifier& other);

    /// Kernel between the support points and the rows of `x` (N x Q).
    Eigen::MatrixXd kernel(const Eigen::MatrixXd& x) const;

    /// Per-class scores (C x Q) from a kernel block computed by `kernel`.
    Eigen::MatrixXd scores_from_kernel(const Eigen::MatrixXd& k) const;
    std::vector<int> predict_from_kernel(const Eigen::MatrixXd& k) const;

    std::vector<int> predict(const Eigen::MatrixXd& x) const;
    int predict_one(const Eigen::VectorXd& x) const;

    json to_json() const;
    static KernelClassifier from_json(const json& j);

private:
    friend std::vector<KernelClassifier> fit_kernel_classifiers(const Eigen::MatrixXd&,
                                                                const std::vector<std::vector<int>>&, double,
                                                                double, int);
    std::shared_ptr<const Eigen::MatrixXd> support_ = std::make_shared<const Eigen::MatrixXd>();
    double gamma_ = 0.0;
    double regularization_ = 0.0;
    std::vector<int> labels_;  // ascending
    Eigen::MatrixXd dual_;     // N x C
};

/// Fits one one-vs-rest classifier per label vector on the same inputs, factorizing the
/// regularized Gram matrix once. gamma = width_factor * rbf_gamma_scale(x).
///
/// While any training point is misclassified, refits with a tenfold smaller regularization, at
/// most `refits` times. The regularization actually used is recorded in the classifiers.
std::vector<KernelClassifier> fit_kernel_classifiers(const Eigen::MatrixXd& x,
                                                     const std::vector<std::vector<int>>& label_sets,
                                                     double regularization, double width_factor = 1.0,
                                                     int refits = 0);

KernelClassifier fit_kernel_classifier(const Eigen::MatrixXd& x, const std::vector<int>& y, double regularization,
                                       double width_factor = 1.0);

/// Affine map x -> W x + b.
class LinearReadout {
public:
    LinearReadout() = default;
    LinearReadout(Eigen::MatrixXd weights, Eigen::VectorXd bias, double regularization);

    const Eigen::MatrixXd& weights() const { return weights_; }
    const Eigen::VectorXd& bias() const { return bias_; }
    double regularization() const { return regularization_; }
    int outputs() const { return static_cast<int>(weights_.rows()); }
    int inputs() const { return static_cast<int>(weights_.cols()); }

    /// Rows of the result are predictions for rows of `x`.
    Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const;
    Eigen::VectorXd predict_one(const Eigen::VectorXd& x) const;

    json to_json() const;
    static LinearReadout from_json(const json& j);

private:
    Eigen::MatrixXd weights_;
    Eigen::VectorXd bias_;
    double regularization_ = 0.0;
};

/// Ridge regression with an unpenalized bias.
LinearReadout fit_linear_ridge(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double regularization);

}  // namespace rsm
