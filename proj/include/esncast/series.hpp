#pragma once

// Tempo-indexed multi-frequency series containers shared by the data layer
// and the forecasting models.
//
// Convention: each frequency group stores its observations chronologically,
// kappa rows per low-frequency reference period. The last sub-observation of
// period t is aligned with t itself (tempo index (t, <0/kappa>)), so the flat
// row of the aligned observation for 0-based period t is t*kappa + kappa - 1.

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "esncast/util.hpp"

namespace esncast {

struct FrequencyGroup {
    std::string name;
    Eigen::Index kappa = 1;  // sub-observations per reference period
    Eigen::Index dim = 0;    // d_q
    // (periods * kappa) x dim, chronological
    Eigen::MatrixXd series;

    Eigen::Index periods() const { return series.rows() / kappa; }

    Eigen::Index aligned_row(Eigen::Index period) const {
        if (period < 0 || period >= periods())
            throw DataError("FrequencyGroup " + name + ": period " + std::to_string(period) +
                            " out of range");
        return period * kappa + kappa - 1;
    }

    void validate() const {
        if (kappa < 1) throw DataError("FrequencyGroup " + name + ": kappa must be >= 1");
        if (series.rows() % kappa != 0)
            throw DataError("FrequencyGroup " + name + ": row count " +
                            std::to_string(series.rows()) + " is not a multiple of kappa " +
                            std::to_string(kappa));
        if (series.cols() != dim) throw DataError("FrequencyGroup " + name + ": dim mismatch");
        if (!series.allFinite())
            throw DataError("FrequencyGroup " + name + ": NaN/Inf after preprocessing");
    }
};

struct MultiFreqSeries {
    Eigen::VectorXd target;  // low-frequency, one entry per period
    std::vector<FrequencyGroup> groups;
    std::string first_period;
    std::string last_period;

    Eigen::Index periods() const { return target.size(); }

    void validate() const {
        if (!target.allFinite()) throw DataError("MultiFreqSeries: non-finite target");
        for (const auto& g : groups) {
            g.validate();
            if (g.periods() != periods())
                throw DataError("MultiFreqSeries: group " + g.name + " covers " +
                                std::to_string(g.periods()) + " periods, target has " +
                                std::to_string(periods()));
        }
    }
};

}  // namespace esncast
