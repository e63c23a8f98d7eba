#pragma once

// Closed-form regret-bound constants for FTL and decreasing Hedge under
// i.i.d. and phi-mixing losses, anytime worst-case bounds, and seeded
// synthetic loss-process generators used to validate the empirical regret
// against those constants.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "esncast/combiner.hpp"
#include "esncast/util.hpp"

namespace esncast {

// ---------------------------------------------------------------------------
// Profiles

struct GapProfile {
    std::vector<double> means;      // mu_k in [0,1]
    std::vector<double> variances;  // v_k
    double excess_vmax = 0.0;       // max_{k != k*} Var(l_k - l_k*)

    std::size_t experts() const { return means.size(); }

    double vmax() const { return *std::max_element(variances.begin(), variances.end()); }

    // min_{k != k*} (mu_k - mu_{k*})
    double delta() const {
        if (means.size() < 2) throw ConfigError("GapProfile: need at least two experts");
        std::size_t best = 0;
        for (std::size_t k = 1; k < means.size(); ++k)
            if (means[k] < means[best]) best = k;
        double d = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < means.size(); ++k)
            if (k != best) d = std::min(d, means[k] - means[best]);
        return d;
    }
};

// Analytic phi-mixing summary; sums are taken over all lags (sup over t of
// the partial sums equals the full sum for nonnegative coefficients).
struct MixingProfile {
    double sum_phi = 0.0;       // sum_n phi_n
    double sum_sqrt_phi = 0.0;  // sum_n sqrt(phi_n)

    double theta_hoeffding() const { return 1.0 + 4.0 * sum_phi; }
    double theta_bernstein() const {
        return (1.0 + sum_sqrt_phi) * (1.0 + sum_sqrt_phi);
    }
    double rho_hoeffding() const { return 1.0 + sum_phi; }
    double rho_bernstein() const { return 1.0 + sum_sqrt_phi; }

    // phi_n = scale * ratio^n, ratio in [0,1).
    static MixingProfile geometric(double ratio, double scale = 1.0) {
        if (!(ratio >= 0.0 && ratio < 1.0))
            throw ConfigError("MixingProfile: geometric ratio must be in [0,1)");
        if (!(scale >= 0.0)) throw ConfigError("MixingProfile: scale must be >= 0");
        MixingProfile m;
        if (ratio > 0.0 && scale > 0.0) {
            m.sum_phi = scale * ratio / (1.0 - ratio);
            double r = std::sqrt(ratio);
            m.sum_sqrt_phi = std::sqrt(scale) * r / (1.0 - r);
        }
        return m;
    }

    static MixingProfile from_coefficients(const std::vector<double>& phi) {
        MixingProfile m;
        for (std::size_t n = 0; n < phi.size(); ++n) {
            if (!(phi[n] >= 0.0 && phi[n] <= 1.0))
                throw ConfigError("MixingProfile: coefficients must lie in [0,1]");
            m.sum_phi += phi[n];
            m.sum_sqrt_phi += std::sqrt(phi[n]);
        }
        return m;
    }
};

// ---------------------------------------------------------------------------
// Bound evaluators

// Expected-regret constant for FTL: min of the Hoeffding- and Bernstein-type
// constants, i.i.d. or phi-mixing depending on whether a profile is supplied.
inline double ftl_bound(const GapProfile& profile, std::optional<MixingProfile> mixing,
                        std::size_t experts) {
    if (experts < 2) throw ConfigError("ftl_bound: need K >= 2");
    double delta = profile.delta();
    if (!(delta > 0.0)) throw ConfigError("ftl_bound: sub-optimality gap must be positive");
    double log_k = std::log(static_cast<double>(experts));
    double vmax = profile.vmax();
    double d2 = delta * delta;
    double r_hoeff, r_bern;
    if (!mixing) {
        r_hoeff = 2.0 + (2.0 * log_k + 4.0) / d2;
        r_bern = 2.0 + (8.0 * vmax + (4.0 / 3.0) * delta) *
                           (std::log(2.0 * static_cast<double>(experts)) + 2.0) / d2;
    } else {
        r_hoeff = 3.0 + 8.0 * mixing->theta_hoeffding() * (log_k + 4.0) / d2;
        r_bern = 2.0 + 8.0 * mixing->theta_bernstein() * (8.0 * vmax + delta) * (log_k + 2.0) / d2;
    }
    return std::min(r_hoeff, r_bern);
}

// Expected-regret constant for decreasing Hedge at c0 = 2. The mixing
// profile, when given, must describe the excess-loss processes l_k - l_k*.
inline double hedge_bound(const GapProfile& profile, std::optional<MixingProfile> mixing,
                          std::size_t experts) {
    if (experts < 3)
        throw ConfigError("hedge_bound: the stochastic Hedge constants require K >= 3");
    double delta = profile.delta();
    if (!(delta > 0.0)) throw ConfigError("hedge_bound: sub-optimality gap must be positive");
    double log_k = std::log(static_cast<double>(experts));
    double d2 = delta * delta;
    double r_hoeff, r_bern;
    if (!mixing) {
        r_hoeff = (4.0 * delta * log_k + 25.0) / d2;
        r_bern = 1.0 + std::sqrt(log_k) +
                 (4.0 * std::sqrt(2.0 / 3.0) * delta * log_k +
                  8.0 * (profile.excess_vmax + delta / 3.0) + 16.0) /
                     d2;
    } else {
        double rho_h = mixing->rho_hoeffding();
        double rho_b = mixing->rho_bernstein();
        r_hoeff = 2.0 + (1.0 + 3.0 * rho_h) * (delta * log_k + 16.0) / d2;
        r_bern = 1.0 + std::sqrt(log_k) +
                 (4.0 * std::sqrt(5.0) * rho_b * delta * log_k +
                  16.0 * rho_b * rho_b * (4.0 * profile.excess_vmax + delta) + 16.0) /
                     d2;
    }
    return std::min(r_hoeff, r_bern);
}

struct WorstCaseBounds {
    double decreasing;  // sqrt(T log K), anytime, c0 = 2, losses in [0,1]
    double constant;    // S sqrt(T log K / 2) at the optimal constant rate
    double adahedge;    // S sqrt(T log K) + S ((4/3) log K + 2)
};

inline WorstCaseBounds worstcase_hedge_bound(std::size_t horizon, std::size_t experts,
                                             double loss_cap = 1.0) {
    if (horizon < 1 || experts < 2) throw ConfigError("worstcase_hedge_bound: bad arguments");
    double log_k = std::log(static_cast<double>(experts));
    double root = std::sqrt(static_cast<double>(horizon) * log_k);
    return {root, loss_cap * std::sqrt(static_cast<double>(horizon) * log_k / 2.0),
            loss_cap * root + loss_cap * ((4.0 / 3.0) * log_k + 2.0)};
}

// ---------------------------------------------------------------------------
// Synthetic loss processes

enum class NoiseKind {
    Bernoulli,      // l = Bernoulli(mu_k); ties possible
    UniformJitter,  // l = clamp(mu_k + U(-a,a)); continuous, a.s. tie-free
};

struct IidSpec {
    NoiseKind kind = NoiseKind::Bernoulli;
    double jitter = 0.1;  // half-width for UniformJitter
};

struct SimulatedPanel {
    LossPanel panel;
    GapProfile profile;
};

inline SimulatedPanel simulate_iid_losses(const std::vector<double>& means, IidSpec spec,
                                          std::size_t rounds, std::uint64_t seed) {
    std::size_t experts = means.size();
    for (double m : means)
        if (!(m >= 0.0 && m <= 1.0)) throw ConfigError("simulate_iid_losses: means must be in [0,1]");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    LossPanel panel(experts);
    LossRow row(experts);
    for (std::size_t t = 0; t < rounds; ++t) {
        for (std::size_t k = 0; k < experts; ++k) {
            double u = unif(rng);
            if (spec.kind == NoiseKind::Bernoulli)
                row[k] = u < means[k] ? 1.0 : 0.0;
            else
                row[k] = std::clamp(means[k] + spec.jitter * (2.0 * u - 1.0), 0.0, 1.0);
        }
        panel.append(row);
    }
    GapProfile profile;
    profile.means = means;
    profile.variances.resize(experts);
    std::size_t best = 0;
    for (std::size_t k = 0; k < experts; ++k) {
        profile.variances[k] = spec.kind == NoiseKind::Bernoulli
                                   ? means[k] * (1.0 - means[k])
                                   : spec.jitter * spec.jitter / 3.0;
        if (means[k] < means[best]) best = k;
    }
    for (std::size_t k = 0; k < experts; ++k)
        if (k != best)
            profile.excess_vmax =
                std::max(profile.excess_vmax, profile.variances[k] + profile.variances[best]);
    return {std::move(panel), std::move(profile)};
}

// Two-state stationary Markov modulator per expert: transition probabilities
// p = P(0 -> 1), q = P(1 -> 0); second eigenvalue 1 - p - q governs mixing.
struct ChainSpec {
    double p = 0.1;
    double q = 0.1;
    double amplitude = 0.2;  // loss swing around the mean
    double jitter = 0.02;    // small iid jitter to break ties
};

struct SimulatedMixingPanel {
    LossPanel panel;
    GapProfile profile;
    MixingProfile per_expert;   // phi_n of one modulating chain
    MixingProfile excess;       // conservative profile for l_k - l_k*
    double eigenvalue;          // 1 - p - q
};

// Losses l_t = clamp(mu_k + amplitude (s_t - pi_1) + jitter U(-1,1)) with
// independent chains across experts, each started from its stationary law.
// phi_n of a two-state chain is max(pi_0, pi_1) |1-p-q|^n; for the excess
// process driven by two independent chains we report the union bound
// min(1, 2 phi_n), which can only enlarge the evaluated constants.
inline SimulatedMixingPanel simulate_mixing_losses(const std::vector<double>& means,
                                                   ChainSpec chain, std::size_t rounds,
                                                   std::uint64_t seed) {
    std::size_t experts = means.size();
    if (!(chain.p > 0.0 && chain.p < 1.0 && chain.q > 0.0 && chain.q < 1.0))
        throw ConfigError("simulate_mixing_losses: transition probabilities must be in (0,1)");
    double pi1 = chain.p / (chain.p + chain.q);
    double pi0 = 1.0 - pi1;
    double lambda2 = 1.0 - chain.p - chain.q;
    double ratio = std::abs(lambda2);
    double scale = std::max(pi0, pi1);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<int> state(experts);
    for (auto& s : state) s = unif(rng) < pi1 ? 1 : 0;

    LossPanel panel(experts);
    LossRow row(experts);
    for (std::size_t t = 0; t < rounds; ++t) {
        for (std::size_t k = 0; k < experts; ++k) {
            double flip = unif(rng);
            if (state[k] == 0 && flip < chain.p) state[k] = 1;
            else if (state[k] == 1 && flip < chain.q) state[k] = 0;
            double noise = chain.amplitude * (state[k] - pi1) +
                           chain.jitter * (2.0 * unif(rng) - 1.0);
            row[k] = std::clamp(means[k] + noise, 0.0, 1.0);
        }
        panel.append(row);
    }

    GapProfile profile;
    profile.means = means;
    profile.variances.assign(experts,
                             chain.amplitude * chain.amplitude * pi0 * pi1 +
                                 chain.jitter * chain.jitter / 3.0);
    std::size_t best = 0;
    for (std::size_t k = 1; k < experts; ++k)
        if (means[k] < means[best]) best = k;
    profile.excess_vmax = 2.0 * profile.variances[0];

    SimulatedMixingPanel out{std::move(panel), std::move(profile),
                             MixingProfile::geometric(ratio, scale),
                             MixingProfile::geometric(ratio, std::min(1.0, 2.0 * scale)),
                             lambda2};
    return out;
}

// ---------------------------------------------------------------------------
// Monte-Carlo validation

struct BoundsReportRow {
    std::string scheme;
    std::size_t experts;
    double delta;
    double mixing_ratio;  // 0 for i.i.d.
    double empirical_mean_regret;
    double bound;
    bool pass() const { return empirical_mean_regret <= bound; }
};

struct McConfig {
    std::size_t replications = 200;
    std::size_t rounds = 10000;
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

// Mean cumulative regret of a scheme over seeded replications of a panel
// generator: gen(replication seed) -> LossPanel.
template <typename PanelGen>
double monte_carlo_mean_regret(SchemeConfig scheme, std::size_t experts, const McConfig& mc,
                               PanelGen&& gen) {
    std::vector<double> regrets(mc.replications, 0.0);
    parallel_for(mc.replications, mc.threads, [&](std::size_t r) {
        LossPanel panel = gen(split_seed(mc.seed, r));
        Combiner c(scheme, experts);
        for (std::size_t t = 0; t < panel.rounds(); ++t) c.observe(panel.row(t));
        regrets[r] = c.ledger().cumulative_regret();
    });
    // Indexed by replication, so the reduction ignores thread completion order.
    double sum = 0.0;
    for (double r : regrets) sum += r;
    return sum / static_cast<double>(mc.replications);
}

}  // namespace esncast
