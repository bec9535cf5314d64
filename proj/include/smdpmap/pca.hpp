#pragma once

#include <utility>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "smdpmap/errors.hpp"

namespace smdpmap {

struct PcaModel {
    Eigen::VectorXd mean;                      // F
    Eigen::MatrixXd components;                // F x d, orthonormal columns
    Eigen::VectorXd explained_variance_ratio;  // d, non-increasing
};

// Centers x and projects it onto the top-d principal directions.
// Rank-deficient input keeps orthonormal columns; ratios of the missing
// directions are padded with 0.
inline std::pair<PcaModel, Eigen::MatrixXd> pca_fit_transform(const Eigen::MatrixXd& x,
                                                              Eigen::Index d) {
    const Eigen::Index n = x.rows();
    const Eigen::Index f = x.cols();
    if (d < 1 || d > f || d > n)
        throw DegenerateInput("pca target dimension " + std::to_string(d) +
                              " is outside [1, min(N=" + std::to_string(n) +
                              ", F=" + std::to_string(f) + ")]");
    if (!x.allFinite()) throw DegenerateInput("pca input holds non-finite values");

    PcaModel m;
    m.mean = x.colwise().mean();
    Eigen::MatrixXd centered = x.rowwise() - m.mean.transpose();

    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();

    m.components = svd.matrixV().leftCols(d);
    const double total = sv.array().square().sum();
    m.explained_variance_ratio = Eigen::VectorXd::Zero(d);
    if (total > 0.0)
        for (Eigen::Index i = 0; i < d && i < sv.size(); ++i)
            m.explained_variance_ratio(i) = sv(i) * sv(i) / total;

    Eigen::MatrixXd projected = centered * m.components;
    return {std::move(m), std::move(projected)};
}

// Maps projected coordinates back to the original feature space.
inline Eigen::MatrixXd pca_inverse_transform(const PcaModel& m, const Eigen::MatrixXd& proj) {
    return (proj * m.components.transpose()).rowwise() + m.mean.transpose();
}

}  // namespace smdpmap
