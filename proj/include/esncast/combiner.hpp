#pragma once

// Online expert-combination schemes: simple averaging, rolling MSE,
// Follow-the-Leader, the Hedge family (constant / doubling / decreasing
// learning rate) and AdaHedge. Each combiner is a sequential state machine:
// weights() are the weights used to forecast the upcoming round, observe()
// feeds the realized loss row and advances the state.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "esncast/util.hpp"

namespace esncast {

using LossRow = std::vector<double>;

inline constexpr double kSimplexTol = 1e-12;

// ---------------------------------------------------------------------------
// LossPanel

// Per-expert, per-round losses in [0,1] plus exact running cumulative sums.
// Out-of-range inputs are clamped (thresholding of unbounded losses) and
// counted rather than rejected.
class LossPanel {
  public:
    explicit LossPanel(std::size_t experts) : experts_(experts) {
        if (experts == 0) throw DimensionError("LossPanel: need at least one expert");
        cumulative_.assign(experts, 0.0);
    }

    std::size_t experts() const { return experts_; }
    std::size_t rounds() const { return rows_.size(); }
    std::size_t clamped() const { return clamp_count_; }

    // Clamps to [0,1] and appends; returns the clamped row.
    const LossRow& append(LossRow row) {
        if (row.size() != experts_)
            throw DimensionError("LossPanel: loss row has " + std::to_string(row.size()) +
                                 " entries, expected " + std::to_string(experts_));
        for (double& v : row) {
            if (!std::isfinite(v)) throw DataError("LossPanel: non-finite loss");
            if (v < 0.0 || v > 1.0) {
                v = std::clamp(v, 0.0, 1.0);
                ++clamp_count_;
            }
        }
        // Fixed left-to-right accumulation keeps FTL tie detection deterministic.
        for (std::size_t k = 0; k < experts_; ++k) cumulative_[k] += row[k];
        rows_.push_back(std::move(row));
        return rows_.back();
    }

    const LossRow& row(std::size_t t) const { return rows_.at(t); }
    const std::vector<double>& cumulative() const { return cumulative_; }

    double min_cumulative() const {
        return *std::min_element(cumulative_.begin(), cumulative_.end());
    }

    // Leader set: indices attaining the minimum cumulative loss (exact compare).
    std::vector<std::size_t> leader_set() const {
        double m = min_cumulative();
        std::vector<std::size_t> s;
        for (std::size_t k = 0; k < experts_; ++k)
            if (cumulative_[k] == m) s.push_back(k);
        return s;
    }

  private:
    std::size_t experts_;
    std::vector<LossRow> rows_;
    std::vector<double> cumulative_;
    std::size_t clamp_count_ = 0;
};

// ---------------------------------------------------------------------------
// Weights

inline bool is_simplex(const std::vector<double>& w, double tol = kSimplexTol) {
    double s = 0.0;
    for (double v : w) {
        if (!(v >= 0.0)) return false;
        s += v;
    }
    return std::abs(s - 1.0) <= tol;
}

inline std::vector<double> uniform_weights(std::size_t k) {
    return std::vector<double>(k, 1.0 / static_cast<double>(k));
}

// omega . yhat
inline double combine_forecasts(const std::vector<double>& weights,
                                const std::vector<double>& forecasts) {
    if (weights.size() != forecasts.size())
        throw DimensionError("combine_forecasts: weight/forecast length mismatch");
    double acc = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) acc += weights[k] * forecasts[k];
    return acc;
}

// Exponential weights centered at the minimum cumulative loss,
// w_k ∝ exp(-eta (L_k - min_j L_j)). Shift-invariant in L by construction.
inline std::vector<double> hedge_weights(const std::vector<double>& cumulative, double eta) {
    if (!(eta > 0.0)) throw ConfigError("hedge_weights: learning rate must be positive");
    double m = *std::min_element(cumulative.begin(), cumulative.end());
    std::vector<double> w(cumulative.size());
    double s = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        w[k] = std::exp(-eta * (cumulative[k] - m));
        s += w[k];
    }
    for (double& v : w) v /= s;
    return w;
}

// One step of the instantaneous-loss recursion for constant Hedge
// (equivalent to the batch form above for a constant rate).
inline std::vector<double> hedge_recursive_update(const std::vector<double>& weights,
                                                  const LossRow& loss, double eta) {
    if (!(eta > 0.0)) throw ConfigError("hedge_recursive_update: learning rate must be positive");
    if (weights.size() != loss.size())
        throw DimensionError("hedge_recursive_update: size mismatch");
    std::vector<double> w(weights.size());
    double s = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        w[k] = weights[k] * std::exp(-eta * loss[k]);
        s += w[k];
    }
    for (double& v : w) v /= s;
    return w;
}

// eta_t = c0 sqrt(log K / t); c0 = 2 is the worst-case-optimal scale.
inline double decreasing_rate(std::size_t t, std::size_t experts, double c0 = 2.0) {
    if (t < 1) throw ConfigError("decreasing_rate: round index must be >= 1");
    if (experts < 2) throw ConfigError("decreasing_rate: need at least two experts");
    if (!(c0 > 0.0)) throw ConfigError("decreasing_rate: c0 must be positive");
    return c0 * std::sqrt(std::log(static_cast<double>(experts)) / static_cast<double>(t));
}

// Optimal constant rate for horizon T and loss range bound S.
inline double optimal_constant_rate(std::size_t horizon, std::size_t experts,
                                    double loss_range = 1.0) {
    if (horizon < 1 || experts < 2) throw ConfigError("optimal_constant_rate: bad arguments");
    return std::sqrt(8.0 * std::log(static_cast<double>(experts)) /
                     (loss_range * loss_range * static_cast<double>(horizon)));
}

struct DoublingPhase {
    std::size_t phase;  // r >= 1, covering t in [2^{r-1}, 2^r - 1]
    double eta;
    bool reset;  // true exactly at phase starts: zero the phase-local losses
};

inline DoublingPhase doubling_schedule(std::size_t t, std::size_t experts, double loss_cap = 1.0) {
    if (t < 1) throw ConfigError("doubling_schedule: round index must be >= 1");
    std::size_t r = 1, start = 1;
    while (start * 2 <= t) {
        start *= 2;
        ++r;
    }
    double len = static_cast<double>(start);  // 2^{r-1}
    double eta = std::sqrt(8.0 * std::log(static_cast<double>(experts)) /
                           (loss_cap * loss_cap * len));
    return {r, eta, t == start};
}

// ---------------------------------------------------------------------------
// Regret ledger

// Tracks forecaster loss, best-expert loss, regret, loss ranges and leader
// changes. A leader change at round t means some expert left the leader set
// (the sharper variant of the change counter in the FTL pathwise regret bound).
class RegretLedger {
  public:
    void record(const std::vector<double>& weights, const LossPanel& panel) {
        const LossRow& loss = panel.row(panel.rounds() - 1);
        if (weights.size() != loss.size()) throw DimensionError("RegretLedger: size mismatch");
        forecaster_cumloss_ += combine_forecasts(weights, loss);
        best_cumloss_ = panel.min_cumulative();
        auto [lo, hi] = std::minmax_element(loss.begin(), loss.end());
        double s_t = *hi - *lo;
        max_loss_range_ = std::max(max_loss_range_, s_t);
        sum_sq_range_ += s_t * s_t;
        auto leaders = panel.leader_set();
        if (!prev_leaders_.empty() || rounds_ > 0) {
            for (std::size_t k : prev_leaders_) {
                if (!std::binary_search(leaders.begin(), leaders.end(), k)) {
                    ++leader_changes_;
                    break;
                }
            }
        } else {
            // Round 1: the implicit prior leader set is all experts.
            if (leaders.size() != panel.experts()) ++leader_changes_;
        }
        prev_leaders_ = leaders;
        ++rounds_;
    }

    double forecaster_cumloss() const { return forecaster_cumloss_; }
    double best_cumloss() const { return best_cumloss_; }
    double cumulative_regret() const { return forecaster_cumloss_ - best_cumloss_; }
    std::size_t leader_changes() const { return leader_changes_; }
    double max_loss_range() const { return max_loss_range_; }
    double sum_squared_ranges() const { return sum_sq_range_; }
    std::size_t rounds() const { return rounds_; }

  private:
    double forecaster_cumloss_ = 0.0;
    double best_cumloss_ = 0.0;
    double max_loss_range_ = 0.0;
    double sum_sq_range_ = 0.0;
    std::size_t leader_changes_ = 0;
    std::size_t rounds_ = 0;
    std::vector<std::size_t> prev_leaders_;
};

// ---------------------------------------------------------------------------
// Schemes

enum class Scheme {
    SimpleAverage,
    RollMse,
    Ftl,
    HedgeConstant,
    HedgeDoubling,
    HedgeDecreasing,
    AdaHedge,
};

inline const char* scheme_name(Scheme s) {
    switch (s) {
        case Scheme::SimpleAverage: return "average";
        case Scheme::RollMse: return "rollmse";
        case Scheme::Ftl: return "ftl";
        case Scheme::HedgeConstant: return "hedge";
        case Scheme::HedgeDoubling: return "dblhedge";
        case Scheme::HedgeDecreasing: return "dechedge";
        case Scheme::AdaHedge: return "adahedge";
    }
    return "?";
}

struct SchemeConfig {
    Scheme scheme = Scheme::SimpleAverage;
    // HedgeConstant: rate, or derived from planned horizon when unset.
    std::optional<double> eta;
    std::size_t planned_horizon = 48;
    // HedgeDecreasing
    double c0 = 2.0;
    // HedgeDoubling
    double loss_cap = 1.0;
    // RollMse
    std::size_t window = 4;
    double epsilon = 1e-6;
};

// Sequential combiner state machine. weights() is valid before the first
// observe() (round-1 convention: uniform 1/K for every scheme).
class Combiner {
  public:
    Combiner(SchemeConfig config, std::size_t experts)
        : config_(config), panel_(experts), weights_(uniform_weights(experts)) {
        switch (config_.scheme) {
            case Scheme::HedgeConstant:
                eta_const_ = config_.eta
                                 ? *config_.eta
                                 : optimal_constant_rate(config_.planned_horizon, experts);
                if (!(eta_const_ > 0.0))
                    throw ConfigError("Combiner: constant Hedge rate must be positive");
                break;
            case Scheme::RollMse:
                if (config_.window < 1) throw ConfigError("Combiner: rollMSE window must be >= 1");
                if (!(config_.epsilon > 0.0))
                    throw ConfigError("Combiner: rollMSE epsilon must be positive");
                break;
            default: break;
        }
    }

    Scheme scheme() const { return config_.scheme; }
    std::size_t experts() const { return panel_.experts(); }
    std::size_t round() const { return panel_.rounds(); }
    const std::vector<double>& weights() const { return weights_; }
    const LossPanel& panel() const { return panel_; }
    const RegretLedger& ledger() const { return ledger_; }
    double adahedge_gap() const { return gap_; }

    // Feeds the realized loss row for the round the current weights forecast,
    // records regret with those weights, then computes next-round weights.
    void observe(LossRow loss_row) {
        const LossRow& loss = panel_.append(std::move(loss_row));
        ledger_.record(weights_, panel_);
        std::size_t k = panel_.experts();
        if (k == 1) {
            weights_ = {1.0};
            return;
        }
        switch (config_.scheme) {
            case Scheme::SimpleAverage: break;  // static 1/K
            case Scheme::Ftl: {
                auto leaders = panel_.leader_set();
                std::fill(weights_.begin(), weights_.end(), 0.0);
                for (std::size_t j : leaders) weights_[j] = 1.0 / static_cast<double>(leaders.size());
                break;
            }
            case Scheme::HedgeConstant:
                weights_ = hedge_weights(panel_.cumulative(), eta_const_);
                break;
            case Scheme::HedgeDecreasing: {
                double eta = decreasing_rate(panel_.rounds() + 1, k, config_.c0);
                weights_ = hedge_weights(panel_.cumulative(), eta);
                break;
            }
            case Scheme::HedgeDoubling: {
                auto next = doubling_schedule(panel_.rounds() + 1, k, config_.loss_cap);
                if (next.reset || phase_losses_.empty()) {
                    phase_losses_.assign(k, 0.0);
                } else {
                    for (std::size_t j = 0; j < k; ++j) phase_losses_[j] += loss[j];
                }
                weights_ = hedge_weights(phase_losses_, next.eta);
                break;
            }
            case Scheme::AdaHedge: {
                update_adahedge(loss);
                break;
            }
            case Scheme::RollMse: {
                recent_.push_back(loss);
                while (recent_.size() > config_.window) recent_.pop_front();
                std::vector<double> inv(k);
                double s = 0.0;
                for (std::size_t j = 0; j < k; ++j) {
                    double mse = 0.0;
                    for (const auto& r : recent_) mse += r[j];
                    mse /= static_cast<double>(recent_.size());
                    inv[j] = 1.0 / (mse + config_.epsilon);
                    s += inv[j];
                }
                for (std::size_t j = 0; j < k; ++j) weights_[j] = inv[j] / s;
                break;
            }
        }
    }

  private:
    // AdaHedge: on entry the current weights_ were computed with rate eta_
    // (infinite while the cumulative mixability gap is zero). Updates the mix
    // accumulator at the rate actually used this round, clamps the gap
    // increment at zero, then derives the next rate and weights.
    void update_adahedge(const LossRow& loss) {
        std::size_t k = panel_.experts();
        double lbar = combine_forecasts(weights_, loss);
        double lmin = panel_.min_cumulative();
        double eta_used = (gap_ == 0.0) ? std::numeric_limits<double>::infinity()
                                        : std::log(static_cast<double>(k)) / gap_;
        double mix_new;
        if (std::isinf(eta_used)) {
            mix_new = lmin;
        } else {
            double vbar = 0.0;
            for (double L : panel_.cumulative()) vbar += std::exp(-eta_used * (L - lmin));
            mix_new = lmin - std::log(vbar / static_cast<double>(k)) / eta_used;
        }
        gap_ += std::max(0.0, lbar - (mix_new - mix_acc_));
        mix_acc_ = mix_new;
        if (gap_ == 0.0) {
            // eta = infinity: exact indicator weights on the leader set.
            auto leaders = panel_.leader_set();
            std::fill(weights_.begin(), weights_.end(), 0.0);
            for (std::size_t j : leaders) weights_[j] = 1.0 / static_cast<double>(leaders.size());
        } else {
            weights_ = hedge_weights(panel_.cumulative(), std::log(static_cast<double>(k)) / gap_);
        }
    }

    SchemeConfig config_;
    LossPanel panel_;
    std::vector<double> weights_;
    RegretLedger ledger_;
    double eta_const_ = 0.0;
    std::vector<double> phase_losses_;    // doubling trick, reset each phase
    double gap_ = 0.0;                    // AdaHedge cumulative mixability gap
    double mix_acc_ = 0.0;                // AdaHedge mix-loss accumulator M_t
    std::deque<LossRow> recent_;          // rollMSE window
};

// Runs one scheme over a fixed loss panel; returns the final ledger.
template <typename RowSource>
RegretLedger run_scheme(SchemeConfig config, std::size_t experts, std::size_t rounds,
                        RowSource&& next_row) {
    Combiner c(config, experts);
    for (std::size_t t = 0; t < rounds; ++t) c.observe(next_row(t));
    return c.ledger();
}

}  // namespace esncast
