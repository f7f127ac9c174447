#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "causalmed/dataset.hpp"
#include "causalmed/graph.hpp"
#include "causalmed/nuisance.hpp"

namespace causalmed {

enum class Scenario {
    AllCorrect,
    M0Correct,      // exposure generated with a logit link
    M1Correct,      // outcome index passed through the 2/3 power
    M2Correct,      // off-target mediator means passed through the 2/3 power
    M3Correct,      // target mediator loses its A term, gains theta/2 shift
    ContinuousAll,  // observed confounders are transformations of latent Z
    DiscreteAll,    // binary mediators via logit thresholds on latent errors
};

Scenario scenario_from_string(const std::string& name);
const char* scenario_name(Scenario s);

// Ground-truth coefficients of the semi-linear structural model.
struct SemiLinearTruth {
    int p = 1;
    int t = 1;
    Eigen::MatrixXd b_mm;      // p x p, (k, j) = weight of edge M_k -> M_j
    Eigen::MatrixXd b_mc;      // (t-1) x p
    Eigen::VectorXd beta_ma;   // p
    Eigen::VectorXd beta_yc;   // t-1
    double alpha_ya = 0.0;
    Eigen::VectorXd beta_ym;   // p
    Eigen::VectorXd beta_ac;   // t-1
    Eigen::VectorXd sigma_m2;  // structural noise variances, all 1 unless heteroscedastic
    double sigma_y = 1.0;
    int target_j = 0;          // pre-specified mediator for the 7.1 scenarios
    std::uint64_t seed = 0;

    Eigen::MatrixXd theta_mc() const;          // (I - Bmm')^{-1} Bmc'
    Eigen::VectorXd theta_ma() const;          // (I - Bmm')^{-1} beta_ma
    Eigen::MatrixXd reduced_noise_cov() const; // (I-B')^{-1} diag(sigma2) (I-B')^{-T}
    Dag mediator_dag() const;                  // support of b_mm
};

// ER mediator graph with expected degree floor(p/2) over a random topological
// order; all coefficients i.i.d. U(-1, 1). Deterministic given seed.
SemiLinearTruth random_er_truth(int p, int t, std::uint64_t seed, bool hetero_noise = false);

Dataset gen_scenario(const SemiLinearTruth& truth, Scenario scenario, int n,
                     std::uint64_t seed);

// (x^2)^(1/3): the 2/3 power read as an even function, defined for negative
// arguments; used by the misspecified generating arms.
double pow23(double x);

struct TrueEffects {
    double dm = 0.0;
    double im_avg = 0.0;
    double tm_avg = 0.0;
    double de = 0.0;
    double ie = 0.0;
    double te = 0.0;
    double quad_error = 0.0;  // |level - level+1| self-check for quadrature paths
};

// Definition-level values under the scenario law: closed linear algebra for
// the linear scenarios, nested Gauss quadrature otherwise. level scales the
// quadrature density (used for the Richardson-style self check).
TrueEffects true_effects(const SemiLinearTruth& truth, Scenario scenario, int j,
                         int level = 1);

// TM_j for a single mediator DAG (no MEC averaging).
double true_tm_single(const SemiLinearTruth& truth, Scenario scenario, int j, const Dag& g,
                      int level = 1);

// Parametric closed forms for a genuinely linear truth: DM = beta_j theta_j,
// TM_j(true DAG) = beta' theta - beta_{-j}' theta_{-j}, DE/IE/TE.
struct ClosedFormEffects {
    double dm = 0.0;
    double tm_true_dag = 0.0;
    double im_true_dag = 0.0;
    double de = 0.0;
    double ie = 0.0;
    double te = 0.0;
};
ClosedFormEffects closed_form_effects(const SemiLinearTruth& truth, int j);

}  // namespace causalmed
