#pragma once

// Multi-frequency ESN forecasters: tempo-aligned state harvesting, ridge
// readout fitting, random-parameter ensembles (with optional leak-rate
// variation), and the online combination exercise.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "esncast/combiner.hpp"
#include "esncast/readout.hpp"
#include "esncast/reservoir.hpp"
#include "esncast/series.hpp"
#include "esncast/util.hpp"

namespace esncast {

enum class Architecture { SingleReservoir, MultiReservoir };

// Per-frequency-group reservoir configuration (dims, sparsity, hyper).
struct ReservoirConfig {
    Eigen::Index dim_state = 30;
    double sparsity = 1.0 / 3.0;
    HyperParams hyper;
};

struct MfesnTemplate {
    Architecture architecture = Architecture::SingleReservoir;
    // SingleReservoir: exactly one entry driving the concatenated inputs;
    // MultiReservoir: one entry per frequency group, in group order.
    std::vector<ReservoirConfig> reservoirs;
    Eigen::Index washout = 4;  // in low-frequency periods
};

struct MfesnModel {
    Architecture architecture = Architecture::SingleReservoir;
    std::vector<ReservoirSpec> reservoirs;  // one per frequency group
    ReadoutCoefficients readout;            // over the stacked state, dim D_1+...+D_Q
    Eigen::Index washout = 4;
    bool fitted = false;

    Eigen::Index stacked_dim() const {
        Eigen::Index d = 0;
        for (const auto& r : reservoirs) d += r.dim_state;
        return d;
    }
};

namespace detail {

// Input matrix a reservoir consumes. SingleReservoir requires all groups at
// one common frequency and concatenates their columns.
inline Eigen::MatrixXd group_inputs(const MultiFreqSeries& data, Architecture arch,
                                    std::size_t q) {
    if (arch == Architecture::MultiReservoir) return data.groups.at(q).series;
    Eigen::Index kappa = data.groups.front().kappa;
    Eigen::Index dim = 0;
    for (const auto& g : data.groups) {
        if (g.kappa != kappa)
            throw ConfigError("SingleReservoir requires all groups at one frequency; group " +
                              g.name + " has kappa " + std::to_string(g.kappa));
        dim += g.dim;
    }
    Eigen::MatrixXd m(data.groups.front().series.rows(), dim);
    Eigen::Index col = 0;
    for (const auto& g : data.groups) {
        m.middleCols(col, g.dim) = g.series;
        col += g.dim;
    }
    return m;
}

inline std::size_t reservoir_count(Architecture arch, const MultiFreqSeries& data) {
    return arch == Architecture::SingleReservoir ? 1 : data.groups.size();
}

}  // namespace detail

// Instantiates the random reservoirs of one model from a seed (one substream
// per frequency group).
inline MfesnModel instantiate_model(const MfesnTemplate& tpl, const MultiFreqSeries& data,
                                    std::uint64_t seed) {
    if (data.groups.empty()) throw ConfigError("instantiate_model: no input groups");
    std::size_t nres = detail::reservoir_count(tpl.architecture, data);
    if (tpl.reservoirs.size() != nres)
        throw ConfigError("instantiate_model: template has " +
                          std::to_string(tpl.reservoirs.size()) + " reservoir configs, need " +
                          std::to_string(nres));
    MfesnModel model;
    model.architecture = tpl.architecture;
    model.washout = tpl.washout;
    for (std::size_t q = 0; q < nres; ++q) {
        Eigen::Index dim_input =
            detail::group_inputs(data, tpl.architecture, q).cols();
        const auto& rc = tpl.reservoirs[q];
        model.reservoirs.push_back(sample_reservoir(rc.dim_state, dim_input, rc.sparsity,
                                                    rc.hyper, split_seed(seed, q)));
    }
    return model;
}

// Stacked aligned states X_{t,Q} for every period: row t is the concatenation
// of each group state iterated through tempo (t, <0/kappa_q>), x0 = 0.
inline Eigen::MatrixXd harvest_states(const MfesnModel& model, const MultiFreqSeries& data) {
    Eigen::Index periods = data.periods();
    Eigen::MatrixXd stacked(periods, model.stacked_dim());
    Eigen::Index col = 0;
    std::size_t nres = model.reservoirs.size();
    for (std::size_t q = 0; q < nres; ++q) {
        const ReservoirSpec& spec = model.reservoirs[q];
        Eigen::MatrixXd inputs = detail::group_inputs(data, model.architecture, q);
        Eigen::Index kappa = inputs.rows() / periods;
        Eigen::VectorXd x = Eigen::VectorXd::Zero(spec.dim_state);
        for (Eigen::Index t = 0; t < periods; ++t) {
            for (Eigen::Index s = 0; s < kappa; ++s)
                x = step(spec, x, inputs.row(t * kappa + s).transpose());
            stacked.block(t, col, 1, spec.dim_state) = x.transpose();
        }
        col += spec.dim_state;
    }
    return stacked;
}

// Stacked state at one period (iterates from the series start; convenience
// wrapper over harvest_states for spot queries).
inline Eigen::VectorXd align_states(const MfesnModel& model, const MultiFreqSeries& data,
                                    Eigen::Index period) {
    if (period < 0 || period >= data.periods())
        throw DataError("align_states: period " + std::to_string(period) + " out of range");
    return harvest_states(model, data).row(period).transpose();
}

struct TrainSpan {
    Eigen::Index first = 0;  // inclusive period indices
    Eigen::Index last = 0;   // inclusive; targets consume Y up to last+1
};

struct FitDiagnostics {
    double lambda = 0.0;
    bool thin_sample_warning = false;  // fewer rows than D_Q / 2
};

// Regresses Y_{t+1} on the aligned stacked state X_t over the training span.
// States before span.first + washout are discarded.
inline FitDiagnostics fit_mfesn(MfesnModel& model, const MultiFreqSeries& data, TrainSpan span,
                                const std::vector<double>& lambda_grid, CvSpec cv = {},
                                std::optional<double> fixed_lambda = {}) {
    if (span.first < 0 || span.last + 1 >= data.periods() || span.first > span.last)
        throw ConfigError("fit_mfesn: train span out of data range");
    Eigen::MatrixXd all_states = harvest_states(model, data);
    Eigen::Index t0 = span.first + model.washout;
    if (t0 > span.last) throw ConfigError("fit_mfesn: washout swallows the training span");
    Eigen::Index rows = span.last - t0 + 1;
    if (rows < 8)
        throw DataError("fit_mfesn: only " + std::to_string(rows) +
                        " training rows after washout, need at least 8");
    FitDiagnostics diag;
    if (rows < model.stacked_dim() / 2) diag.thin_sample_warning = true;

    Eigen::MatrixXd x = all_states.middleRows(t0, rows);
    Eigen::VectorXd y = data.target.segment(t0 + 1, rows);
    diag.lambda = fixed_lambda ? *fixed_lambda : select_lambda(x, y, lambda_grid, cv);
    model.readout = fit_ridge(x, y, diag.lambda);
    model.fitted = true;
    return diag;
}

// One-step forecast of Y_{period+1} from the aligned state at `period`.
inline double forecast_one_step(const MfesnModel& model, const Eigen::MatrixXd& states,
                                Eigen::Index period) {
    if (!model.fitted) throw ConfigError("forecast_one_step: model not fitted");
    return model.readout.predict(states.row(period).transpose());
}

inline double forecast_one_step(const MfesnModel& model, const MultiFreqSeries& data,
                                Eigen::Index period) {
    return forecast_one_step(model, harvest_states(model, data), period);
}

// ---------------------------------------------------------------------------
// Ensembles

enum class EnsembleFamily { RandomParams, AlphaRandomParams };

struct EnsembleSpec {
    EnsembleFamily family = EnsembleFamily::RandomParams;
    std::size_t size = 100;  // K
    MfesnTemplate base;
    std::vector<double> alpha_grid = {0.1, 0.3, 0.5, 0.7, 0.9};
    std::uint64_t master_seed = 1;
};

struct FittedEnsemble {
    std::vector<MfesnModel> models;
    std::vector<double> lambdas;
    std::size_t thin_sample_warnings = 0;
};

// K independently seeded models, each fitted on the training span. The
// alpha-varying family cycles the leak-rate grid with equal allocation
// (every reservoir of a model shares its alpha).
inline FittedEnsemble build_ensemble(const EnsembleSpec& spec, const MultiFreqSeries& data,
                                     TrainSpan train, const std::vector<double>& lambda_grid,
                                     CvSpec cv = {}, unsigned threads = 1) {
    if (spec.size == 0) throw ConfigError("build_ensemble: K must be positive");
    if (spec.family == EnsembleFamily::AlphaRandomParams) {
        if (spec.alpha_grid.empty()) throw ConfigError("build_ensemble: empty alpha grid");
        if (spec.size % spec.alpha_grid.size() != 0)
            throw ConfigError("build_ensemble: K = " + std::to_string(spec.size) +
                              " not divisible by alpha grid size " +
                              std::to_string(spec.alpha_grid.size()) +
                              " (equal allocation required)");
    }
    FittedEnsemble out;
    out.models.resize(spec.size);
    out.lambdas.resize(spec.size);
    std::vector<char> thin(spec.size, 0);
    parallel_for(spec.size, threads, [&](std::size_t k) {
        MfesnTemplate tpl = spec.base;
        if (spec.family == EnsembleFamily::AlphaRandomParams) {
            double alpha = spec.alpha_grid[k % spec.alpha_grid.size()];
            for (auto& rc : tpl.reservoirs) rc.hyper.alpha = alpha;
        }
        MfesnModel model = instantiate_model(tpl, data, split_seed(spec.master_seed, k));
        FitDiagnostics diag = fit_mfesn(model, data, train, lambda_grid, cv);
        out.lambdas[k] = diag.lambda;
        thin[k] = diag.thin_sample_warning ? 1 : 0;
        out.models[k] = std::move(model);
    });
    out.thin_sample_warnings = static_cast<std::size_t>(std::count(thin.begin(), thin.end(), 1));
    return out;
}

// ---------------------------------------------------------------------------
// Online exercise

struct LedgerSnapshot {
    double forecaster_cumloss;
    double best_cumloss;
    double regret;
    std::size_t leader_changes;
};

struct SchemeResult {
    SchemeConfig config;
    std::vector<double> forecasts;               // one per evaluation round
    std::vector<std::vector<double>> weights;    // weights used each round
    std::vector<LedgerSnapshot> trajectory;      // ledger after each round
    RegretLedger ledger;
    double msfe = 0.0;
};

struct OnlineExerciseResult {
    std::vector<SchemeResult> schemes;
    std::vector<double> per_model_msfe;       // K entries
    std::vector<double> realized;             // Y_{t+1} over the eval span
    double baseline_msfe = 0.0;               // supplied baseline forecast series
    double loss_normalizer = 0.0;
    std::size_t clamped_losses = 0;
};

// Runs the frozen experts through the evaluation span: per round every expert
// forecasts, every combiner commits its weights before Y is revealed, squared
// errors are normalized by the training-sample maximum squared error and
// clamped into [0,1], then the combiners update.
inline OnlineExerciseResult run_online_exercise(const std::vector<MfesnModel>& models,
                                                const MultiFreqSeries& data,
                                                const std::vector<SchemeConfig>& schemes,
                                                TrainSpan train, TrainSpan eval,
                                                const std::vector<double>& baseline_forecasts) {
    if (models.empty()) throw ConfigError("run_online_exercise: no models");
    if (schemes.empty()) throw ConfigError("run_online_exercise: no schemes");
    if (eval.first <= train.last)
        throw ConfigError("run_online_exercise: evaluation span overlaps training (look-ahead)");
    if (eval.last + 1 >= data.periods())
        throw ConfigError("run_online_exercise: evaluation span exceeds data");
    std::size_t rounds = static_cast<std::size_t>(eval.last - eval.first + 1);
    if (baseline_forecasts.size() != rounds)
        throw ConfigError("run_online_exercise: baseline forecast series length mismatch");
    std::size_t experts = models.size();

    // Frozen models: state harvesting per expert once over the whole sample.
    std::vector<Eigen::MatrixXd> states(experts);
    for (std::size_t k = 0; k < experts; ++k) states[k] = harvest_states(models[k], data);

    // Normalizer: max squared error over the training sample across experts.
    Eigen::Index t0 = train.first;
    for (const auto& m : models) t0 = std::max(t0, train.first + m.washout);
    double normalizer = 0.0;
    for (std::size_t k = 0; k < experts; ++k) {
        for (Eigen::Index t = t0; t <= train.last; ++t) {
            double e = data.target(t + 1) - forecast_one_step(models[k], states[k], t);
            normalizer = std::max(normalizer, e * e);
        }
    }
    if (normalizer <= 0.0) normalizer = 1.0;  // degenerate perfect fit

    OnlineExerciseResult out;
    out.loss_normalizer = normalizer;
    out.per_model_msfe.assign(experts, 0.0);
    out.schemes.reserve(schemes.size());
    for (const auto& sc : schemes) {
        SchemeResult sr;
        sr.config = sc;
        out.schemes.push_back(std::move(sr));
    }
    std::vector<Combiner> combiners;
    combiners.reserve(schemes.size());
    for (const auto& sc : schemes) combiners.emplace_back(sc, experts);

    std::vector<double> expert_forecasts(experts);
    LossRow losses(experts);
    for (Eigen::Index t = eval.first; t <= eval.last; ++t) {
        for (std::size_t k = 0; k < experts; ++k)
            expert_forecasts[k] = forecast_one_step(models[k], states[k], t);
        // Commit combined forecasts before the outcome is revealed.
        for (std::size_t s = 0; s < combiners.size(); ++s) {
            out.schemes[s].weights.push_back(combiners[s].weights());
            out.schemes[s].forecasts.push_back(
                combine_forecasts(combiners[s].weights(), expert_forecasts));
        }
        double y = data.target(t + 1);
        out.realized.push_back(y);
        for (std::size_t k = 0; k < experts; ++k) {
            double e = y - expert_forecasts[k];
            out.per_model_msfe[k] += e * e;
            losses[k] = std::min(1.0, e * e / normalizer);
        }
        for (std::size_t s = 0; s < combiners.size(); ++s) {
            combiners[s].observe(losses);
            const RegretLedger& lg = combiners[s].ledger();
            out.schemes[s].trajectory.push_back({lg.forecaster_cumloss(), lg.best_cumloss(),
                                                 lg.cumulative_regret(), lg.leader_changes()});
        }
    }

    double n = static_cast<double>(rounds);
    for (auto& m : out.per_model_msfe) m /= n;
    for (std::size_t s = 0; s < combiners.size(); ++s) {
        out.schemes[s].ledger = combiners[s].ledger();
        double acc = 0.0;
        for (std::size_t t = 0; t < rounds; ++t) {
            double e = out.realized[t] - out.schemes[s].forecasts[t];
            acc += e * e;
        }
        out.schemes[s].msfe = acc / n;
        out.clamped_losses += combiners[s].panel().clamped();
    }
    {
        double acc = 0.0;
        for (std::size_t t = 0; t < rounds; ++t) {
            double e = out.realized[t] - baseline_forecasts[t];
            acc += e * e;
        }
        out.baseline_msfe = acc / n;
    }
    return out;
}

}  // namespace esncast
