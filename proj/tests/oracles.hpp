#pragma once

// Test-only oracles, independent of the estimator implementations they check.

#include <algorithm>
#include <cmath>
#include <vector>

#include "causalmed/nuisance.hpp"
#include "causalmed/sim.hpp"

namespace oracle {

using namespace causalmed;

// Nuisance bundle populated from the generating truth instead of fits.
// Mean models are assembled from the structural coefficients and the exact
// Gaussian conditioning algebra.
inline NuisanceBundle true_bundle(const SemiLinearTruth& tr,
                                  const std::vector<std::vector<int>>& parent_sets, int j,
                                  Link link = Link::Probit) {
    NuisanceBundle b;
    const int p = tr.p;
    const int tc = tr.t - 1;
    const Eigen::MatrixXd theta_c = tr.theta_mc();
    const Eigen::VectorXd theta_a = tr.theta_ma();
    const Eigen::MatrixXd v = tr.reduced_noise_cov();

    b.propensity.link = link;
    b.propensity.coefficients.resize(tc + 1);
    b.propensity.coefficients(0) = 0.0;
    for (int k = 0; k < tc; ++k) b.propensity.coefficients(k + 1) = tr.beta_ac(k);
    b.propensity.clip = 1e-8;

    b.mediators.mode = MediatorLaw::Mode::Gaussian;
    b.mediators.p = p;
    b.mediators.intercept = Eigen::VectorXd::Zero(p);
    b.mediators.theta_mc = theta_c;
    b.mediators.theta_ma = theta_a;
    b.mediators.noise_cov = v;

    MeanSpec full;
    for (int k = 0; k < p; ++k) full.med_coords.push_back(k);
    b.mean_full.spec = full;
    b.mean_full.intercept = 0.0;
    b.mean_full.coef_c = tr.beta_yc;
    b.mean_full.coef_a = tr.alpha_ya;
    b.mean_full.coef_m = tr.beta_ym;
    b.mean_cache[full] = b.mean_full;

    // mu(C, a) = beta_yc'C + alpha a + beta_ym'(Theta C + theta a).
    b.mean_ca.spec = MeanSpec{true, true, {}};
    b.mean_ca.intercept = 0.0;
    b.mean_ca.coef_c = tr.beta_yc + theta_c.transpose() * tr.beta_ym;
    b.mean_ca.coef_a = tr.alpha_ya + tr.beta_ym.dot(theta_a);
    b.mean_ca.coef_m.resize(0);
    b.mean_cache[b.mean_ca.spec] = b.mean_ca;

    // mu(C, a, Pa, M_j): condition the Gaussian mediator block on S = (j, Pa).
    for (const auto& pa : parent_sets) {
        std::vector<int> s{j};
        for (int q : pa) s.push_back(q);
        std::vector<int> r;
        for (int k = 0; k < p; ++k)
            if (std::find(s.begin(), s.end(), k) == s.end()) r.push_back(k);

        MeanSpec spec;
        spec.med_coords = s;
        MeanModel mm;
        mm.spec = spec;
        mm.intercept = 0.0;
        Eigen::VectorXd beta_s(static_cast<Eigen::Index>(s.size()));
        for (std::size_t k = 0; k < s.size(); ++k) beta_s(static_cast<Eigen::Index>(k)) = tr.beta_ym(s[k]);
        if (r.empty()) {
            mm.coef_c = tr.beta_yc;
            mm.coef_a = tr.alpha_ya;
            mm.coef_m = beta_s;
        } else {
            Eigen::MatrixXd vss(s.size(), s.size()), vrs(r.size(), s.size());
            for (std::size_t x = 0; x < s.size(); ++x)
                for (std::size_t yq = 0; yq < s.size(); ++yq)
                    vss(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(yq)) = v(s[x], s[yq]);
            for (std::size_t x = 0; x < r.size(); ++x)
                for (std::size_t yq = 0; yq < s.size(); ++yq)
                    vrs(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(yq)) = v(r[x], s[yq]);
            const Eigen::MatrixXd gain = vrs * vss.inverse();
            Eigen::VectorXd beta_r(static_cast<Eigen::Index>(r.size()));
            for (std::size_t k = 0; k < r.size(); ++k) beta_r(static_cast<Eigen::Index>(k)) = tr.beta_ym(r[k]);
            Eigen::MatrixXd theta_r(r.size(), tc), theta_s(s.size(), tc);
            Eigen::VectorXd th_a_r(static_cast<Eigen::Index>(r.size())), th_a_s(static_cast<Eigen::Index>(s.size()));
            for (std::size_t k = 0; k < r.size(); ++k) {
                theta_r.row(static_cast<Eigen::Index>(k)) = theta_c.row(r[k]);
                th_a_r(static_cast<Eigen::Index>(k)) = theta_a(r[k]);
            }
            for (std::size_t k = 0; k < s.size(); ++k) {
                theta_s.row(static_cast<Eigen::Index>(k)) = theta_c.row(s[k]);
                th_a_s(static_cast<Eigen::Index>(k)) = theta_a(s[k]);
            }
            mm.coef_m = beta_s + gain.transpose() * beta_r;
            mm.coef_c = tr.beta_yc + (theta_r - gain * theta_s).transpose() * beta_r;
            mm.coef_a = tr.alpha_ya + (th_a_r - gain * th_a_s).dot(beta_r);
        }
        b.mean_cache[spec] = mm;
    }
    return b;
}

inline double phi1(double x, double mean, double var) {
    const double d = x - mean;
    return std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * M_PI * var);
}

// Independent p = 1 AIPW implementation (written straight from the usual
// crossworld formulas) of the per-observation DM and TM scores.
struct Aipw1dScores {
    double dm = 0.0;
    double tm = 0.0;
};

inline Aipw1dScores aipw_p1(const Dataset& ds, const NuisanceBundle& b, int i) {
    const Eigen::VectorXd c = ds.c_matrix.row(i).transpose();
    const double a = ds.a_vector(i);
    const double y = ds.y_vector(i);
    const double m = ds.m_matrix(i, 0);

    const double e1 = b.propensity.e1(c);
    const double e0 = 1.0 - e1;
    const double mu1 = b.mean_full.eval(c, 1.0, Eigen::VectorXd::Constant(1, m));
    const double mu0 = b.mean_full.eval(c, 0.0, Eigen::VectorXd::Constant(1, m));
    const double mean1 = b.mediators.cond_mean(c, 1.0)(0);
    const double mean0 = b.mediators.cond_mean(c, 0.0)(0);
    const double var = b.mediators.noise_cov(0, 0);

    // zeta(a') = int mu(C,1,m) pi_{C,a'}(m) dm: linear mean plug-in.
    const double zeta1 = b.mean_full.eval(c, 1.0, Eigen::VectorXd::Constant(1, mean1));
    const double zeta0 = b.mean_full.eval(c, 1.0, Eigen::VectorXd::Constant(1, mean0));

    Aipw1dScores s;
    // E[Y(1)] part: classic AIPW; E[Y(1, M(0))] part: crossworld AIPW.
    const double part1 = (a == 1.0 ? (y - zeta1) / e1 : 0.0) + zeta1;
    const double ratio = phi1(m, mean0, var) / phi1(m, mean1, var);
    const double part0 = (a == 1.0 ? ratio * (y - mu1) / e1 : 0.0) +
                         (a == 0.0 ? (mu1 - zeta0) / e0 : 0.0) + zeta0;
    s.dm = part1 - part0;

    // TM with empty parent set: kappa-AIPW minus the partial-mean AIPW of
    // rho(a', M_j, C) = mu(C, a', M_j), weighted by pi_C(M)/pi_{C,a'}(M).
    const double k1 = b.mean_ca.eval(c, 1.0, Eigen::VectorXd());
    const double k0 = b.mean_ca.eval(c, 0.0, Eigen::VectorXd());
    const double s_kappa = (a == 1.0 ? (y - k1) / e1 : 0.0) + k1 -
                           ((a == 0.0 ? (y - k0) / e0 : 0.0) + k0);
    const double fmix = e0 * phi1(m, mean0, var) + e1 * phi1(m, mean1, var);
    const double rho1 = (a == 1.0 ? (fmix / phi1(m, mean1, var)) * (y - mu1) / e1 : 0.0) + mu1;
    const double rho0 = (a == 0.0 ? (fmix / phi1(m, mean0, var)) * (y - mu0) / e0 : 0.0) + mu0;
    s.tm = s_kappa - (rho1 - rho0);
    return s;
}

}  // namespace oracle
