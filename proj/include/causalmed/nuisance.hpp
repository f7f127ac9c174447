#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "causalmed/dataset.hpp"
#include "causalmed/linmodel.hpp"
#include "causalmed/rng.hpp"

namespace causalmed {

enum class Link { Probit, Logit };

struct PropensityModel {
    Link link = Link::Probit;
    Eigen::VectorXd coefficients;  // over (1, C)
    double clip = 0.01;

    // e1 clipped to [clip, 1-clip]; e0 := 1 - e1, so e0 + e1 == 1 exactly.
    double e1(const Eigen::VectorXd& c) const;
    double e0(const Eigen::VectorXd& c) const { return 1.0 - e1(c); }
};

// Conditional law of M given (C, A). Gaussian mode: mean alpha + Theta c +
// theta a with joint noise covariance. Bernoulli mode: independent
// per-coordinate logistic models (product mass).
struct MediatorLaw {
    enum class Mode { Gaussian, Bernoulli };
    Mode mode = Mode::Gaussian;
    int p = 0;

    // Gaussian mode
    Eigen::VectorXd intercept;  // p
    Eigen::MatrixXd theta_mc;   // p x (t-1)
    Eigen::VectorXd theta_ma;   // p
    Eigen::MatrixXd noise_cov;  // p x p

    // Bernoulli mode: row j holds logistic coefficients over (1, C, A)
    Eigen::MatrixXd logit_coef;

    // E[M | C=c, A=a]; Bernoulli mode returns success probabilities.
    Eigen::VectorXd cond_mean(const Eigen::VectorXd& c, double a) const;

    GaussianLaw joint_gaussian(const Eigen::VectorXd& c, double a) const;

    // log pi_{c,a,given}(target values). Arbitrary disjoint coordinate sets.
    double log_density(const std::vector<int>& target, const Eigen::VectorXd& values,
                       const std::vector<int>& given, const Eigen::VectorXd& given_values,
                       const Eigen::VectorXd& c, double a) const;

    double density(const std::vector<int>& target, const Eigen::VectorXd& values,
                   const std::vector<int>& given, const Eigen::VectorXd& given_values,
                   const Eigen::VectorXd& c, double a) const;

    // pi_C(m_j) = e0 pi_{C,0}(m_j) + e1 pi_{C,1}(m_j).
    double density_marginal(int j, double value, const Eigen::VectorXd& c, double e0,
                            double e1) const;

    // i.i.d. draws (count x |target|) from the conditional law, deterministic
    // given the generator state.
    Eigen::MatrixXd sample_conditional(const std::vector<int>& target,
                                       const std::vector<int>& given,
                                       const Eigen::VectorXd& given_values,
                                       const Eigen::VectorXd& c, double a,
                                       std::size_t count, Rng& rng) const;
};

// Linear conditional-mean model for Y over an explicit conditioning set.
struct MeanSpec {
    bool use_c = true;
    bool use_a = true;
    std::vector<int> med_coords;  // mediator coordinates included, in order

    bool operator<(const MeanSpec& o) const {
        if (use_c != o.use_c) return use_c < o.use_c;
        if (use_a != o.use_a) return use_a < o.use_a;
        return med_coords < o.med_coords;
    }
};

struct MeanModel {
    MeanSpec spec;
    double intercept = 0.0;
    Eigen::VectorXd coef_c;
    double coef_a = 0.0;
    Eigen::VectorXd coef_m;  // aligned with spec.med_coords

    double eval(const Eigen::VectorXd& c, double a, const Eigen::VectorXd& m_values) const;
};

struct NuisanceBundle {
    PropensityModel propensity;
    MediatorLaw mediators;
    MeanModel mean_full;  // mu(C, A, M)
    MeanModel mean_ca;    // mu(C, A)
    std::map<MeanSpec, MeanModel> mean_cache;

    const MeanModel& mean_for(const MeanSpec& spec) const;
};

PropensityModel fit_propensity(const Dataset& ds, Link link = Link::Probit,
                               double clip = 0.01);

MediatorLaw fit_mediator_law(const Dataset& ds);
MediatorLaw fit_mediator_law_discrete(const Dataset& ds);

MeanModel fit_mean(const Dataset& ds, const MeanSpec& spec);

struct BundleOptions {
    Link link = Link::Probit;
    double clip = 0.01;
    bool discrete_mediators = false;
};

NuisanceBundle fit_bundle(const Dataset& ds, const BundleOptions& opts = {});

// Fits and caches mu(C, A, Pa_j, M_j) for every parent set appearing in mecs.
void ensure_parent_means(NuisanceBundle& bundle, const Dataset& ds,
                         const std::vector<std::vector<int>>& parent_sets, int j);

enum class Misspecification { WrongLink, WrongOutcome, WrongMediatorJ, WrongMediatorShift };

// Rebuilds exactly the named component with the deliberately wrong form,
// leaving the rest of the bundle intact.
NuisanceBundle make_misspecified(const NuisanceBundle& bundle, const Dataset& ds,
                                 Misspecification scenario);

}  // namespace causalmed
