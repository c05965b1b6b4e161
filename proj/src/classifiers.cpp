#include "rsm/classifiers.hpp"

#include <algorithm>
#include <set>

#include "rsm/errors.hpp"
#include "rsm/json_util.hpp"

namespace rsm {

double rbf_gamma_scale(const Eigen::MatrixXd& x) {
    if (x.rows() < 1 || x.cols() < 1) throw DimensionError("rbf_gamma_scale: empty input");
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const double var = (x.rowwise() - mean).array().square().colwise().mean().mean();
    if (!(var > 0.0)) throw ZeroVarianceError("rbf_gamma_scale: inputs have zero variance");
    return 1.0 / (static_cast<double>(x.cols()) * var);
}

Eigen::MatrixXd rbf_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double gamma) {
    if (a.cols() != b.cols()) throw DimensionError("rbf_kernel: column mismatch");
    Eigen::MatrixXd k(a.rows(), b.rows());
    k.noalias() = a * b.transpose();
    const Eigen::VectorXd na = a.rowwise().squaredNorm();
    const Eigen::RowVectorXd nb = b.rowwise().squaredNorm().transpose();
    // Clamp tiny negative squared distances from cancellation.
    k = (((-2.0 * k).colwise() + na).rowwise() + nb).cwiseMax(0.0);
    return (-gamma * k.array()).exp().matrix();
}

KernelClassifier KernelClassifier::constant(int label) {
    KernelClassifier c;
    c.labels_ = {label};
    return c;
}

bool KernelClassifier::shares_kernel_with(const KernelClassifier& other) const {
    return !is_constant() && !other.is_constant() && support_ == other.support_ && gamma_ == other.gamma_;
}

void KernelClassifier::share_support_with(const KernelClassifier& other) {
    if (is_constant() || other.is_constant() || support_ == other.support_) return;
    if (gamma_ == other.gamma_ && *support_ == *other.support_) support_ = other.support_;
}

Eigen::MatrixXd KernelClassifier::kernel(const Eigen::MatrixXd& x) const {
    if (is_constant()) return Eigen::MatrixXd(0, x.rows());
    if (x.cols() != support_->cols())
        throw DimensionError("kernel classifier expects " + std::to_string(support_->cols()) + " features, got " +
                             std::to_string(x.cols()));
    return rbf_kernel(*support_, x, gamma_);
}

Eigen::MatrixXd KernelClassifier::scores_from_kernel(const Eigen::MatrixXd& k) const {
    if (is_constant()) return Eigen::MatrixXd::Ones(1, k.cols());
    return dual_.transpose() * k;
}

std::vector<int> KernelClassifier::predict_from_kernel(const Eigen::MatrixXd& k) const {
    if (labels_.empty()) throw ConfigurationError("kernel classifier used before fitting");
    std::vector<int> out(static_cast<std::size_t>(k.cols()), labels_.front());
    if (is_constant()) return out;
    const Eigen::MatrixXd s = scores_from_kernel(k);
    for (Eigen::Index q = 0; q < s.cols(); ++q) {
        Eigen::Index best = 0;
        // Strict comparison keeps the lowest index on ties.
        for (Eigen::Index c = 1; c < s.rows(); ++c)
            if (s(c, q) > s(best, q)) best = c;
        out[static_cast<std::size_t>(q)] = labels_[static_cast<std::size_t>(best)];
    }
    return out;
}

std::vector<int> KernelClassifier::predict(const Eigen::MatrixXd& x) const {
    if (is_constant()) return std::vector<int>(static_cast<std::size_t>(x.rows()), labels_.front());
    return predict_from_kernel(kernel(x));
}

int KernelClassifier::predict_one(const Eigen::VectorXd& x) const { return predict(x.transpose()).front(); }

json KernelClassifier::to_json() const {
    return {{"labels", labels_},
            {"gamma", gamma_},
            {"regularization", regularization_},
            {"support", matrix_to_json(*support_)},
            {"dual", matrix_to_json(dual_)}};
}

KernelClassifier KernelClassifier::from_json(const json& j) {
    KernelClassifier c;
    c.labels_ = j.at("labels").get<std::vector<int>>();
    if (c.labels_.empty()) throw ConfigurationError("kernel classifier JSON without labels");
    c.gamma_ = j.at("gamma").get<double>();
    c.regularization_ = j.at("regularization").get<double>();
    c.support_ = std::make_shared<const Eigen::MatrixXd>(matrix_from_json(j.at("support")));
    c.dual_ = matrix_from_json(j.at("dual"), static_cast<Eigen::Index>(c.labels_.size()));
    if (!c.is_constant() && (c.dual_.rows() != c.support_->rows() ||
                             c.dual_.cols() != static_cast<Eigen::Index>(c.labels_.size())))
        throw DimensionError("kernel classifier JSON: dual coefficient shape mismatch");
    return c;
}

std::vector<KernelClassifier> fit_kernel_classifiers(const Eigen::MatrixXd& x,
                                                     const std::vector<std::vector<int>>& label_sets,
                                                     double regularization, double width_factor, int refits) {
    if (refits < 0) throw ConfigurationError("kernel classifier: refit count must be non-negative");
    if (!(regularization > 0.0)) throw ConfigurationError("kernel classifier: regularization must be positive");
    if (!(width_factor > 0.0)) throw ConfigurationError("kernel classifier: width factor must be positive");
    const Eigen::Index n = x.rows();
    if (n < 1) throw DimensionError("kernel classifier: no training data");

    std::vector<KernelClassifier> out(label_sets.size());
    std::vector<std::size_t> fitted;
    Eigen::Index total_columns = 0;
    for (std::size_t s = 0; s < label_sets.size(); ++s) {
        const auto& y = label_sets[s];
        if (static_cast<Eigen::Index>(y.size()) != n) throw DimensionError("kernel classifier: label count mismatch");
        std::set<int> classes(y.begin(), y.end());
        out[s].labels_.assign(classes.begin(), classes.end());
        out[s].regularization_ = regularization;
        if (classes.size() > 1) {
            fitted.push_back(s);
            total_columns += static_cast<Eigen::Index>(classes.size());
        }
    }
    if (fitted.empty()) return out;

    const double gamma = width_factor * rbf_gamma_scale(x);
    auto support = std::make_shared<const Eigen::MatrixXd>(x);
    const Eigen::MatrixXd kernel = rbf_kernel(x, x, gamma);

    Eigen::MatrixXd targets = -Eigen::MatrixXd::Ones(n, total_columns);
    Eigen::Index col = 0;
    for (std::size_t s : fitted) {
        const auto& labels = out[s].labels_;
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto pos = std::lower_bound(labels.begin(), labels.end(), label_sets[s][static_cast<std::size_t>(i)]);
            targets(i, col + (pos - labels.begin())) = 1.0;
        }
        col += static_cast<Eigen::Index>(labels.size());
    }

    auto solve = [&](double lambda) {
        Eigen::MatrixXd gram = kernel;
        gram.diagonal().array() += lambda;
        Eigen::MatrixXd dual;
        Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> llt(gram);
        if (llt.info() == Eigen::Success) {
            dual = llt.solve(targets);
        } else {
            Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
            if (ldlt.info() != Eigen::Success) throw NumericalError("kernel classifier: Gram solve failed");
            dual = ldlt.solve(targets);
        }
        if (!dual.allFinite()) throw NumericalError("kernel classifier: non-finite dual coefficients");
        return dual;
    };
    // Training scores are K * dual = targets - lambda * dual, so no extra kernel product is needed.
    auto fits_training_set = [&](const Eigen::MatrixXd& dual, double lambda) {
        const Eigen::MatrixXd scores = targets - lambda * dual;
        Eigen::Index c0 = 0;
        for (std::size_t s : fitted) {
            const auto c = static_cast<Eigen::Index>(out[s].labels_.size());
            for (Eigen::Index i = 0; i < n; ++i) {
                Eigen::Index best = 0, want = 0;
                scores.row(i).segment(c0, c).maxCoeff(&best);
                targets.row(i).segment(c0, c).maxCoeff(&want);
                if (best != want) return false;
            }
            c0 += c;
        }
        return true;
    };

    double lambda = regularization;
    Eigen::MatrixXd dual = solve(lambda);
    for (int r = 0; r < refits && !fits_training_set(dual, lambda); ++r) {
        lambda *= 0.1;
        dual = solve(lambda);
    }

    col = 0;
    for (std::size_t s : fitted) {
        const auto c = static_cast<Eigen::Index>(out[s].labels_.size());
        out[s].support_ = support;
        out[s].gamma_ = gamma;
        out[s].regularization_ = lambda;
        out[s].dual_ = dual.middleCols(col, c);
        col += c;
    }
    return out;
}

KernelClassifier fit_kernel_classifier(const Eigen::MatrixXd& x, const std::vector<int>& y, double regularization,
                                       double width_factor) {
    return fit_kernel_classifiers(x, {y}, regularization, width_factor).front();
}

LinearReadout::LinearReadout(Eigen::MatrixXd weights, Eigen::VectorXd bias, double regularization)
    : weights_(std::move(weights)), bias_(std::move(bias)), regularization_(regularization) {
    if (weights_.rows() != bias_.size()) throw DimensionError("linear readout: bias size mismatch");
}

Eigen::MatrixXd LinearReadout::predict(const Eigen::MatrixXd& x) const {
    if (x.cols() != weights_.cols()) throw DimensionError("linear readout: feature count mismatch");
    Eigen::MatrixXd y = x * weights_.transpose();
    y.rowwise() += bias_.transpose();
    return y;
}

Eigen::VectorXd LinearReadout::predict_one(const Eigen::VectorXd& x) const {
    if (x.size() != weights_.cols()) throw DimensionError("linear readout: feature count mismatch");
    return weights_ * x + bias_;
}

json LinearReadout::to_json() const {
    return {{"weights", matrix_to_json(weights_)},
            {"bias", vector_to_json(bias_)},
            {"regularization", regularization_},
            {"inputs", inputs()}};
}

LinearReadout LinearReadout::from_json(const json& j) {
    Eigen::VectorXd bias = vector_from_json(j.at("bias"));
    Eigen::MatrixXd w = matrix_from_json(j.at("weights"), j.value("inputs", 0));
    if (w.rows() == 0) w.resize(bias.size(), j.value("inputs", 0));
    return LinearReadout(std::move(w), std::move(bias), j.at("regularization").get<double>());
}

LinearReadout fit_linear_ridge(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double regularization) {
    if (x.rows() < 1) throw DimensionError("ridge: no training data");
    if (x.rows() != y.rows()) throw DimensionError("ridge: X and Y row counts differ");
    if (!(regularization > 0.0)) throw ConfigurationError("ridge: regularization must be positive");
    const Eigen::RowVectorXd mx = x.colwise().mean();
    const Eigen::RowVectorXd my = y.colwise().mean();
    const Eigen::MatrixXd xc = x.rowwise() - mx;
    const Eigen::MatrixXd yc = y.rowwise() - my;
    Eigen::MatrixXd gram(x.cols(), x.cols());
    gram.setZero();
    gram.selfadjointView<Eigen::Lower>().rankUpdate(xc.transpose());
    gram = gram.selfadjointView<Eigen::Lower>();
    gram.diagonal().array() += regularization;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    if (ldlt.info() != Eigen::Success) throw NumericalError("ridge: normal equations could not be factorized");
    const Eigen::MatrixXd beta = ldlt.solve(xc.transpose() * yc);  // d x L
    Eigen::VectorXd bias = (my - mx * beta).transpose();
    return LinearReadout(beta.transpose(), std::move(bias), regularization);
}

}  // namespace rsm
