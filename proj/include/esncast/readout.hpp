#pragma once

// Ridge readout: demeaning projector, closed-form regularized solve via a
// symmetric factorization (never an explicit inverse), and expanding-window
// cross-validation for the penalty.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "esncast/util.hpp"

namespace esncast {

struct ReadoutCoefficients {
    double intercept = 0.0;
    Eigen::VectorXd weights;
    double lambda = 0.0;

    double predict(const Eigen::VectorXd& state) const {
        if (state.size() != weights.size()) throw DimensionError("predict: state dimension mismatch");
        return intercept + weights.dot(state);
    }
};

// W = (X~' X~ + lambda I)^{-1} X~' Y~ with X~, Y~ demeaned columnwise;
// b = mean(Y - X W).
inline ReadoutCoefficients fit_ridge(const Eigen::MatrixXd& states,
                                     const Eigen::VectorXd& targets, double lambda) {
    Eigen::Index n = states.rows(), d = states.cols();
    if (n != targets.size()) throw DimensionError("fit_ridge: row count mismatch");
    if (n < 2) throw DataError("fit_ridge: need at least two rows");
    if (!(lambda >= 0.0)) throw ConfigError("fit_ridge: lambda must be >= 0");

    Eigen::RowVectorXd x_mean = states.colwise().mean();
    double y_mean = targets.mean();
    Eigen::MatrixXd xc = states.rowwise() - x_mean;
    Eigen::VectorXd yc = targets.array() - y_mean;

    if (lambda == 0.0) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xc);
        if (qr.rank() < d)
            throw ValidationError("fit_ridge: rank-deficient design at lambda = 0 (rank " +
                                  std::to_string(qr.rank()) + " < " + std::to_string(d) + ")");
    }

    Eigen::MatrixXd gram = xc.transpose() * xc;
    gram.diagonal().array() += lambda;
    Eigen::VectorXd w = gram.ldlt().solve(xc.transpose() * yc);

    ReadoutCoefficients out;
    out.weights = std::move(w);
    out.lambda = lambda;
    out.intercept = (targets - states * out.weights).mean();
    if (!out.weights.allFinite()) throw ValidationError("fit_ridge: non-finite solution");
    return out;
}

struct CvSpec {
    std::size_t folds = 5;
    // Validation block length; 0 means max(4, T/10).
    std::size_t block = 0;
};

inline std::vector<double> default_lambda_grid() {
    // log-spaced 1e-6 .. 1e3, 13 points
    std::vector<double> g;
    for (int i = 0; i < 13; ++i) g.push_back(std::pow(10.0, -6.0 + 0.75 * i));
    return g;
}

// Expanding-window CV: fold f fits on rows [0, split_f) and validates on the
// next contiguous block. Returns the grid value minimizing mean validation
// squared error; ties go to the smallest lambda.
inline double select_lambda(const Eigen::MatrixXd& states, const Eigen::VectorXd& targets,
                            const std::vector<double>& grid, CvSpec cv = {}) {
    if (grid.empty()) throw ConfigError("select_lambda: empty grid");
    if (!std::is_sorted(grid.begin(), grid.end()))
        throw ConfigError("select_lambda: grid must be ascending");
    Eigen::Index n = states.rows();
    if (n != targets.size()) throw DimensionError("select_lambda: row count mismatch");
    if (grid.size() == 1) return grid.front();

    std::size_t block = cv.block ? cv.block
                                 : std::max<std::size_t>(4, static_cast<std::size_t>(n) / 10);
    std::size_t folds = cv.folds;
    // Smallest training prefix: everything not claimed by the validation blocks.
    if (static_cast<std::size_t>(n) < folds * block + 2)
        throw DataError("select_lambda: " + std::to_string(n) + " rows cannot host " +
                        std::to_string(folds) + " folds of block " + std::to_string(block));
    std::size_t first_train = static_cast<std::size_t>(n) - folds * block;

    double best_err = std::numeric_limits<double>::infinity();
    double best_lambda = grid.front();
    for (double lambda : grid) {
        double err = 0.0;
        std::size_t count = 0;
        for (std::size_t f = 0; f < folds; ++f) {
            std::size_t split = first_train + f * block;
            auto coef = fit_ridge(states.topRows(split), targets.head(split), lambda);
            for (std::size_t i = split; i < split + block; ++i) {
                double e = targets(static_cast<Eigen::Index>(i)) -
                           coef.predict(states.row(static_cast<Eigen::Index>(i)).transpose());
                err += e * e;
                ++count;
            }
        }
        err /= static_cast<double>(count);
        if (err < best_err) {
            best_err = err;
            best_lambda = lambda;
        }
    }
    return best_lambda;
}

}  // namespace esncast
