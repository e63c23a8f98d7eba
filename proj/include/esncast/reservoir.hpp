#pragma once

// Leaky echo state network state machine: seeded sampling of the random
// state parameters, spectral-radius / norm normalization, and deterministic
// state iteration x' = a x + (1-a) tanh(rho*A x + gamma*C z + shift*zeta).

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "esncast/util.hpp"

namespace esncast {

struct HyperParams {
    double alpha = 0.1;        // leak rate in [0,1)
    double rho = 0.5;          // spectral-radius scale
    double gamma = 1.0;        // input scale
    double sigma_shift = 0.0;  // shift scale

    void validate() const {
        if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("HyperParams: alpha must be in [0,1)");
        if (!(rho > 0.0)) throw ConfigError("HyperParams: rho must be positive");
        if (!(gamma > 0.0)) throw ConfigError("HyperParams: gamma must be positive");
        if (!(sigma_shift >= 0.0)) throw ConfigError("HyperParams: shift scale must be >= 0");
    }
};

// Spectral radius: power iteration (tol 1e-10, <= 1e4 iterations), with a
// dense eigenvalue fallback for small matrices when the iteration stalls
// (complex-conjugate dominant pairs do not converge under plain iteration).
inline double spectral_radius(const Eigen::MatrixXd& a) {
    const double tol = 1e-10;
    const int max_iter = 10000;
    Eigen::Index n = a.rows();
    if (n == 0 || a.cols() != n) throw DimensionError("spectral_radius: square matrix required");
    Eigen::VectorXd v = Eigen::VectorXd::Ones(n).normalized();
    double radius = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        Eigen::VectorXd w = a * v;
        double norm = w.norm();
        if (norm < 1e-300) return 0.0;  // (numerically) nilpotent
        double prev = radius;
        radius = norm;
        v = w / norm;
        if (it > 0 && std::abs(radius - prev) <= tol * std::max(1.0, radius)) {
            // Rayleigh-style confirmation: accept only if Av is (anti)parallel to v.
            Eigen::VectorXd w2 = a * v;
            if ((w2 - radius * v).norm() <= 1e-8 * std::max(1.0, radius) ||
                (w2 + radius * v).norm() <= 1e-8 * std::max(1.0, radius))
                return radius;
        }
    }
    if (n <= 256) {
        Eigen::EigenSolver<Eigen::MatrixXd> es(a, /*computeEigenvectors=*/false);
        return es.eigenvalues().cwiseAbs().maxCoeff();
    }
    throw ValidationError("spectral_radius: power iteration did not converge");
}

struct ReservoirSpec {
    Eigen::Index dim_state = 0;  // D
    Eigen::Index dim_input = 0;  // d
    Eigen::MatrixXd a_bar;       // D x D, unit spectral radius
    Eigen::MatrixXd c_bar;       // D x d, unit Frobenius norm
    Eigen::VectorXd zeta_bar;    // length D, unit norm or zero
    double sparsity = 1.0;
    bool zero_shift = true;
    HyperParams hyper;
    std::uint64_t seed = 0;
};

namespace detail {

// One sampling attempt; the caller retries with substream bumps on
// degenerate draws. A entries iid standard normal, C entries iid U(-1,1),
// both masked by Bernoulli(sparsity); zeta (when enabled) iid U(-1,1).
inline void draw_raw(std::mt19937_64& rng, double sparsity, Eigen::MatrixXd& a,
                     Eigen::MatrixXd& c, Eigen::VectorXd& zeta, bool zero_shift) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::bernoulli_distribution keep(sparsity);
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = keep(rng) ? gauss(rng) : 0.0;
    for (Eigen::Index i = 0; i < c.rows(); ++i)
        for (Eigen::Index j = 0; j < c.cols(); ++j) c(i, j) = keep(rng) ? unif(rng) : 0.0;
    if (!zero_shift)
        for (Eigen::Index i = 0; i < zeta.size(); ++i) zeta(i) = unif(rng);
    else
        zeta.setZero();
}

}  // namespace detail

// Pure function of (dims, sparsity, shift config, hyper, seed). Draws with
// spectral radius below 1e-12 or zero-norm C are resampled on an incremented
// substream; gives up after 100 attempts.
inline ReservoirSpec sample_reservoir(Eigen::Index dim_state, Eigen::Index dim_input,
                                      double sparsity, HyperParams hyper, std::uint64_t seed,
                                      bool zero_shift = true) {
    if (dim_state < 1 || dim_input < 1)
        throw ConfigError("sample_reservoir: dimensions must be >= 1");
    if (!(sparsity > 0.0 && sparsity <= 1.0))
        throw ConfigError("sample_reservoir: sparsity must be in (0,1]");
    hyper.validate();

    ReservoirSpec spec;
    spec.dim_state = dim_state;
    spec.dim_input = dim_input;
    spec.sparsity = sparsity;
    spec.zero_shift = zero_shift;
    spec.hyper = hyper;
    spec.seed = seed;
    spec.a_bar.resize(dim_state, dim_state);
    spec.c_bar.resize(dim_state, dim_input);
    spec.zeta_bar.resize(dim_state);

    for (int attempt = 0; attempt < 100; ++attempt) {
        std::mt19937_64 rng(split_seed(seed, static_cast<std::uint64_t>(attempt)));
        detail::draw_raw(rng, sparsity, spec.a_bar, spec.c_bar, spec.zeta_bar, zero_shift);
        double radius = spectral_radius(spec.a_bar);
        double c_norm = spec.c_bar.norm();
        if (radius < 1e-12 || c_norm < 1e-12) continue;
        spec.a_bar /= radius;
        spec.c_bar /= c_norm;
        if (!zero_shift) {
            double z_norm = spec.zeta_bar.norm();
            if (z_norm < 1e-12) continue;
            spec.zeta_bar /= z_norm;
        }
        return spec;
    }
    throw ValidationError("sample_reservoir: 100 degenerate draws, sparsity too low?");
}

inline Eigen::VectorXd step(const ReservoirSpec& spec, const Eigen::VectorXd& state,
                            const Eigen::VectorXd& input) {
    if (state.size() != spec.dim_state || input.size() != spec.dim_input)
        throw DimensionError("step: state/input dimension mismatch");
    if (!state.allFinite() || !input.allFinite()) throw DataError("step: non-finite state or input");
    const auto& h = spec.hyper;
    Eigen::VectorXd pre = h.rho * (spec.a_bar * state) + h.gamma * (spec.c_bar * input);
    if (h.sigma_shift != 0.0) pre += h.sigma_shift * spec.zeta_bar;
    return h.alpha * state + (1.0 - h.alpha) * pre.array().tanh().matrix();
}

// Iterates the state over the input rows, discarding the first `washout`
// states; returned row t holds the state after input row (washout + t).
inline Eigen::MatrixXd run_sequence(const ReservoirSpec& spec, Eigen::VectorXd state,
                                    const Eigen::MatrixXd& inputs, Eigen::Index washout = 0) {
    if (inputs.rows() == 0) throw DataError("run_sequence: empty input sequence");
    if (washout < 0 || washout >= inputs.rows())
        throw ConfigError("run_sequence: washout must be in [0, T)");
    Eigen::MatrixXd states(inputs.rows() - washout, spec.dim_state);
    for (Eigen::Index t = 0; t < inputs.rows(); ++t) {
        state = step(spec, state, inputs.row(t).transpose());
        if (t >= washout) states.row(t - washout) = state.transpose();
    }
    return states;
}

// Serialization keeps only what is needed to regenerate the matrices.
inline nlohmann::json to_json(const ReservoirSpec& spec) {
    return {
        {"dim_state", spec.dim_state},
        {"dim_input", spec.dim_input},
        {"sparsity", spec.sparsity},
        {"zero_shift", spec.zero_shift},
        {"seed", spec.seed},
        {"distributions", {{"A", "sparse-normal"}, {"C", "sparse-uniform"}, {"zeta", spec.zero_shift ? "zero" : "uniform"}}},
        {"hyper",
         {{"alpha", spec.hyper.alpha},
          {"rho", spec.hyper.rho},
          {"gamma", spec.hyper.gamma},
          {"sigma_shift", spec.hyper.sigma_shift}}},
    };
}

inline ReservoirSpec reservoir_from_json(const nlohmann::json& j) {
    HyperParams h;
    h.alpha = j.at("hyper").at("alpha").get<double>();
    h.rho = j.at("hyper").at("rho").get<double>();
    h.gamma = j.at("hyper").at("gamma").get<double>();
    h.sigma_shift = j.at("hyper").value("sigma_shift", 0.0);
    return sample_reservoir(j.at("dim_state").get<Eigen::Index>(),
                            j.at("dim_input").get<Eigen::Index>(), j.at("sparsity").get<double>(),
                            h, j.at("seed").get<std::uint64_t>(), j.value("zero_shift", true));
}

}  // namespace esncast
