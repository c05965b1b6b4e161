#pragma once

#include <Eigen/Dense>

#include <vector>

#include "json.hpp"

namespace rsm {

// Dense row-major (de)serialization helpers.

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

/// `cols` is needed to restore the shape of a matrix without rows.
inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, Eigen::Index cols = -1) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    if (rows == 0) return Eigen::MatrixXd(0, cols < 0 ? 0 : cols);
    const auto width = static_cast<Eigen::Index>(j.at(0).size());
    Eigen::MatrixXd m(rows, width);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = j.at(static_cast<std::size_t>(i));
        if (static_cast<Eigen::Index>(row.size()) != width) throw std::runtime_error("ragged matrix in JSON");
        for (Eigen::Index k = 0; k < width; ++k) m(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
    }
    return m;
}

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
    auto v = j.get<std::vector<double>>();
    return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace rsm
