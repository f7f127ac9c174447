#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "causalmed/dataset.hpp"
#include "causalmed/effects.hpp"
#include "causalmed/graph.hpp"
#include "causalmed/nuisance.hpp"

namespace causalmed {

enum class IntegralMode { ClosedForm, MonteCarlo };

enum class Strategy { M0, M1, M2, M3, QR };

struct QrOptions {
    int mc_n = 100;
    std::uint64_t seed = 1;
    bool truncate = true;
    IntegralMode mode = IntegralMode::ClosedForm;
    // Audit switch: mixed-draw Monte-Carlo weighting kept for comparison, where
    // the importance denominator is evaluated at a draw from a different
    // stream than the numerator's sample.
    bool literal_mc = false;
    int threads = 0;  // 0: runtime default
};

// Raw per-observation score columns for one mediator j over a list of DAGs.
// QR columns separate the plug-in part from the correction (only the
// correction is log(n)-truncated); strategy columns are whole values.
struct PerObsScores {
    Eigen::VectorXd qr_dm_plugin, qr_dm_corr;
    Eigen::VectorXd m0_dm, m1_dm, m2_dm, m3_dm;
    std::vector<Eigen::VectorXd> qr_tm_plugin, qr_tm_corr;
    std::vector<Eigen::VectorXd> m0_tm, m1_tm, m2_tm, m3_tm;
    Eigen::VectorXd te;  // AIPW total-effect score, uncentered
};

PerObsScores per_obs_scores(const Dataset& ds, const NuisanceBundle& bundle,
                            const std::vector<Dag>& mec, int j, const QrOptions& opts);

// Serial reference implementation: identical output, plain loop.
PerObsScores per_obs_scores_serial(const Dataset& ds, const NuisanceBundle& bundle,
                                   const std::vector<Dag>& mec, int j, const QrOptions& opts);

struct MediatorEffects {
    double dm = 0.0, tm_avg = 0.0, im_avg = 0.0;
    std::vector<double> tm_per_dag;
    double dm_se = 0.0, tm_se = 0.0, im_se = 0.0;  // score-based
    std::size_t truncation_count = 0;
    // Uncentered per-observation scores at the reported estimates.
    Eigen::VectorXd dm_scores;
    Eigen::VectorXd tm_scores_avg;
    Eigen::VectorXd im_scores_avg;
};

MediatorEffects assemble_effects(const PerObsScores& rows, Strategy strategy, bool truncate,
                                 Eigen::Index n);

// One-call estimator: fits nothing, consumes a prepared bundle and MEC.
MediatorEffects mediator_effects(const Dataset& ds, const NuisanceBundle& bundle,
                                 const std::vector<Dag>& mec, int j, Strategy strategy,
                                 const QrOptions& opts);

// AIPW total effect with score-based se.
std::pair<double, double> te_aipw(const Dataset& ds, const NuisanceBundle& bundle);

// var_hat = (1/n^2) sum (score_i - estimate)^2.
double score_variance(const Eigen::VectorXd& scores, double estimate);

struct BootstrapCi {
    double ci_low = 0.0, ci_high = 0.0;
    double quantile = 0.0;  // empirical (1-alpha) quantile of |t*|
    int failures = 0;
};

// Symmetric t-bootstrap: rows resampled with replacement, the estimator is
// re-run per replicate (returns point and score-based se), the CI is
// point +- q * se with q the (1-alpha) quantile of |(point* - point)/se*|.
BootstrapCi symmetric_t_bootstrap(
    const std::function<std::pair<double, double>(const Dataset&)>& estimator,
    const Dataset& ds, int replicates, double alpha, std::uint64_t seed, double point,
    double se, int threads = 0);

BootstrapCi symmetric_t_bootstrap_serial(
    const std::function<std::pair<double, double>(const Dataset&)>& estimator,
    const Dataset& ds, int replicates, double alpha, std::uint64_t seed, double point,
    double se);

// Per-arm uncentered efficient-score pieces, exposed for verification.
double score_kappa(const Eigen::VectorXd& c, double a, double y, const NuisanceBundle& bundle,
                   int a_prime);
double score_zeta(const Dataset& ds, int i, const NuisanceBundle& bundle, int j, int a_prime,
                  const QrOptions& opts);
double score_varrho(const Dataset& ds, int i, const NuisanceBundle& bundle, int j, int a_prime,
                    const Dag& mediator_dag, const QrOptions& opts);

// Algorithm-2-style convenience: Gaussian-linear nuisances fitted from the
// data, closed-form adjustments, no Monte Carlo anywhere.
struct FastQrResult {
    MediatorEffects effects;
    EffectEstimate dm;
    EffectEstimate im;
};

FastQrResult fast_qr(const Dataset& ds, int j, const std::vector<Dag>& mec, double alpha,
                     int bootstrap_b, std::uint64_t seed, int threads = 0);

}  // namespace causalmed
