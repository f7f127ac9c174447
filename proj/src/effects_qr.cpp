#include "causalmed/effects_qr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "causalmed/linmodel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace causalmed {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;
constexpr double kRatioOverflow = 700.0;  // exp argument guard

int runtime_threads(int requested) {
#ifdef _OPENMP
    return requested > 0 ? requested : omp_get_max_threads();
#else
    (void)requested;
    return 1;
#endif
}

struct CholPre {
    Eigen::MatrixXd chol;  // lower factor
    double logdet = 0.0;   // log det of the covariance
    int dim = 0;

    void init(const Eigen::MatrixXd& cov) {
        dim = static_cast<int>(cov.rows());
        if (dim == 0) return;
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        if (llt.info() != Eigen::Success) {
            Eigen::MatrixXd jittered = cov;
            jittered.diagonal().array() += 1e-12;
            llt.compute(jittered);
            if (llt.info() != Eigen::Success)
                throw std::runtime_error("effects_qr: covariance block not positive definite");
        }
        chol = llt.matrixL();
        logdet = 0.0;
        for (int i = 0; i < dim; ++i) logdet += 2.0 * std::log(chol(i, i));
    }

    double logpdf(const Eigen::VectorXd& delta) const {
        if (dim == 0) return 0.0;
        const Eigen::VectorXd z = chol.triangularView<Eigen::Lower>().solve(delta);
        return -0.5 * (dim * kLogTwoPi + logdet + z.squaredNorm());
    }
};

double logpdf1(double x, double mean, double var) {
    const double d = x - mean;
    return -0.5 * (kLogTwoPi + std::log(var) + d * d / var);
}

double pdf1(double x, double mean, double var) { return std::exp(logpdf1(x, mean, var)); }

// Precomputed structure for mediator coordinate j under a Gaussian law; the
// covariance does not depend on (c, a), so all factorizations are shared
// across observations.
struct JPre {
    int p = 0;
    std::vector<int> rest;
    double var_j = 1.0;
    double sd_j = 1.0;
    CholPre joint;      // p x p
    CholPre rest_marg;  // (p-1) x (p-1), marginal of rest
    CholPre rest_cond;  // conditional of rest given coordinate j
    Eigen::VectorXd reg_rest_on_j;  // Sigma_{r,j} / Sigma_jj
};

struct PaPre {
    std::vector<int> pa;            // sorted parent coordinates
    Eigen::VectorXd k;              // Sigma_PP^{-1} Sigma_Pj
    double cond_var_j = 1.0;        // var(M_j | Pa)
    CholPre pa_chol;                // for sampling Pa marginals
    const MeanModel* mu2 = nullptr; // mu(C, A, M_j, Pa)
};

Eigen::VectorXd subvec(const Eigen::VectorXd& v, const std::vector<int>& idx) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(idx[i]);
    return out;
}

Eigen::MatrixXd submat(const Eigen::MatrixXd& m, const std::vector<int>& rows,
                       const std::vector<int>& cols) {
    Eigen::MatrixXd out(rows.size(), cols.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t k = 0; k < cols.size(); ++k)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = m(rows[i], cols[k]);
    return out;
}

struct Workspace {
    const Dataset* ds = nullptr;
    const NuisanceBundle* bundle = nullptr;
    const QrOptions* opts = nullptr;
    int j = 0;
    bool gaussian = true;
    JPre jpre;
    std::vector<PaPre> pas;  // one per MEC member, in order
    double logn = 0.0;
};

Workspace prepare(const Dataset& ds, const NuisanceBundle& bundle, const std::vector<Dag>& mec,
                  int j, const QrOptions& opts) {
    Workspace w;
    w.ds = &ds;
    w.bundle = &bundle;
    w.opts = &opts;
    w.j = j;
    const MediatorLaw& law = bundle.mediators;
    w.gaussian = law.mode == MediatorLaw::Mode::Gaussian;
    const int p = law.p;
    w.jpre.p = p;
    for (int k = 0; k < p; ++k)
        if (k != j) w.jpre.rest.push_back(k);
    if (w.gaussian) {
        const Eigen::MatrixXd& cov = law.noise_cov;
        w.jpre.var_j = cov(j, j);
        w.jpre.sd_j = std::sqrt(cov(j, j));
        w.jpre.joint.init(cov);
        if (!w.jpre.rest.empty()) {
            const Eigen::MatrixXd cov_rr = submat(cov, w.jpre.rest, w.jpre.rest);
            w.jpre.rest_marg.init(cov_rr);
            Eigen::VectorXd cov_rj(static_cast<Eigen::Index>(w.jpre.rest.size()));
            for (std::size_t i = 0; i < w.jpre.rest.size(); ++i) cov_rj(static_cast<Eigen::Index>(i)) = cov(w.jpre.rest[i], j);
            w.jpre.reg_rest_on_j = cov_rj / cov(j, j);
            const Eigen::MatrixXd cond = cov_rr - cov_rj * cov_rj.transpose() / cov(j, j);
            w.jpre.rest_cond.init(cond);
        }
    }
    for (const auto& g : mec) {
        PaPre pp;
        pp.pa = parents_of(g, j);
        std::sort(pp.pa.begin(), pp.pa.end());
        MeanSpec spec;
        spec.med_coords.push_back(j);
        for (int q : pp.pa) spec.med_coords.push_back(q);
        pp.mu2 = &bundle.mean_for(spec);
        if (w.gaussian && !pp.pa.empty()) {
            const Eigen::MatrixXd cov_pp = submat(law.noise_cov, pp.pa, pp.pa);
            Eigen::VectorXd cov_pj(static_cast<Eigen::Index>(pp.pa.size()));
            for (std::size_t i = 0; i < pp.pa.size(); ++i) cov_pj(static_cast<Eigen::Index>(i)) = law.noise_cov(pp.pa[i], j);
            Eigen::LLT<Eigen::MatrixXd> llt(cov_pp);
            if (llt.info() != Eigen::Success)
                throw std::runtime_error("effects_qr: singular parent covariance");
            pp.k = llt.solve(cov_pj);
            pp.cond_var_j = law.noise_cov(j, j) - cov_pj.dot(pp.k);
            pp.pa_chol.init(cov_pp);
        } else if (w.gaussian) {
            pp.cond_var_j = law.noise_cov(j, j);
        }
        w.pas.push_back(std::move(pp));
    }
    w.logn = std::log(static_cast<double>(ds.n()));
    return w;
}

// Bernoulli coordinate mass.
double bern_logmass(double prob, double value) {
    return value > 0.5 ? std::log(prob) : std::log1p(-prob);
}

struct ObsRow {
    double qr_dm_plugin = 0.0, qr_dm_corr = 0.0;
    double m0_dm = 0.0, m1_dm = 0.0, m2_dm = 0.0, m3_dm = 0.0;
    std::vector<double> qr_tm_plugin, qr_tm_corr;
    std::vector<double> m0_tm, m1_tm, m2_tm, m3_tm;
    double te = 0.0;
};

// Mean of mu(c, 1, m-vector of `count` sampled rows with fixed complement):
// linear means let the Monte Carlo average collapse to the draw means.
Eigen::VectorXd col_means(const Eigen::MatrixXd& draws) {
    return draws.colwise().mean().transpose();
}

ObsRow compute_row(const Workspace& w, Eigen::Index i) {
    const Dataset& ds = *w.ds;
    const NuisanceBundle& b = *w.bundle;
    const QrOptions& opts = *w.opts;
    const MediatorLaw& law = b.mediators;
    const int j = w.j;
    const int p = law.p;
    const std::vector<int>& rest = w.jpre.rest;

    const Eigen::VectorXd c = ds.c_matrix.row(i).transpose();
    const double a = ds.a_vector(i);
    const double y = ds.y_vector(i);
    const Eigen::VectorXd m = ds.m_matrix.row(i).transpose();
    const double mj = m(j);
    const Eigen::VectorXd m_rest = subvec(m, rest);

    const double e1 = b.propensity.e1(c);
    const double e0 = 1.0 - e1;
    const double ind1 = a == 1.0 ? 1.0 / e1 : 0.0;
    const double ind0 = a == 0.0 ? 1.0 / e0 : 0.0;

    const Eigen::VectorXd mean0 = law.cond_mean(c, 0.0);
    const Eigen::VectorXd mean1 = law.cond_mean(c, 1.0);

    // log pi_{c,a'}(m_j), log pi_{c,0}(m_rest), log pi_{c,1}(m).
    auto log_fj = [&](double value, const Eigen::VectorXd& mean_arm) {
        if (w.gaussian) return logpdf1(value, mean_arm(j), w.jpre.var_j);
        return bern_logmass(mean_arm(j), value);
    };
    auto log_frest = [&](const Eigen::VectorXd& values, const Eigen::VectorXd& mean_arm) {
        if (rest.empty()) return 0.0;
        if (w.gaussian) return w.jpre.rest_marg.logpdf(values - subvec(mean_arm, rest));
        double ll = 0.0;
        for (std::size_t k = 0; k < rest.size(); ++k)
            ll += bern_logmass(mean_arm(rest[k]), values(static_cast<Eigen::Index>(k)));
        return ll;
    };
    auto log_joint = [&](const Eigen::VectorXd& values, const Eigen::VectorXd& mean_arm) {
        if (w.gaussian) return w.jpre.joint.logpdf(values - mean_arm);
        double ll = 0.0;
        for (int k = 0; k < p; ++k) ll += bern_logmass(mean_arm(k), values(k));
        return ll;
    };

    auto is_weight = [&](const Eigen::VectorXd& mv, int a_prime) {
        const Eigen::VectorXd& mean_arm = a_prime == 1 ? mean1 : mean0;
        const double mvj = mv(j);
        const Eigen::VectorXd mv_rest = subvec(mv, rest);
        const double expo = log_fj(mvj, mean_arm) + log_frest(mv_rest, mean0) - log_joint(mv, mean1);
        if (expo > kRatioOverflow)
            throw std::runtime_error("effects_qr: density ratio overflow (positivity violation)");
        return std::exp(expo);
    };

    const double mu_full_obs1 = b.mean_full.eval(c, 1.0, m);
    const double kappa1 = b.mean_ca.eval(c, 1.0, Eigen::VectorXd());
    const double kappa0 = b.mean_ca.eval(c, 0.0, Eigen::VectorXd());

    auto mu_full_at = [&](double mjv, const Eigen::VectorXd& restv) {
        Eigen::VectorXd mv(p);
        mv(j) = mjv;
        for (std::size_t k = 0; k < rest.size(); ++k) mv(rest[k]) = restv(static_cast<Eigen::Index>(k));
        return b.mean_full.eval(c, 1.0, mv);
    };

    // Integral pieces for the DM block.
    double zeta1, zeta0, tau_j1, tau_j0, tau_mj;
    Rng rng(derive_seed(opts.seed, static_cast<std::uint64_t>(i)));
    const std::size_t N = static_cast<std::size_t>(opts.mc_n);

    if (opts.mode == IntegralMode::ClosedForm) {
        zeta1 = mu_full_at(mean1(j), subvec(mean0, rest));
        zeta0 = mu_full_at(mean0(j), subvec(mean0, rest));
        tau_j1 = mu_full_at(mean1(j), m_rest);
        tau_j0 = mu_full_at(mean0(j), m_rest);
        tau_mj = mu_full_at(mj, subvec(mean0, rest));
    } else {
        // Draw order is fixed so results are reproducible for a given
        // (seed, i) regardless of scheduling.
        const Eigen::MatrixXd joint1 = law.sample_conditional(
            [&] { std::vector<int> all(p); for (int k = 0; k < p; ++k) all[static_cast<std::size_t>(k)] = k; return all; }(),
            {}, Eigen::VectorXd(), c, 1.0, N, rng);
        Eigen::MatrixXd joint0, joint1b;
        if (opts.literal_mc) {
            std::vector<int> all(static_cast<std::size_t>(p));
            for (int k = 0; k < p; ++k) all[static_cast<std::size_t>(k)] = k;
            joint0 = law.sample_conditional(all, {}, Eigen::VectorXd(), c, 0.0, N, rng);
            joint1b = law.sample_conditional(all, {}, Eigen::VectorXd(), c, 1.0, N, rng);
        }
        const Eigen::MatrixXd mj1 = law.sample_conditional({j}, {}, Eigen::VectorXd(), c, 1.0, N, rng);
        const Eigen::MatrixXd mj0 = law.sample_conditional({j}, {}, Eigen::VectorXd(), c, 0.0, N, rng);
        Eigen::MatrixXd rest0;
        if (!rest.empty()) rest0 = law.sample_conditional(rest, {}, Eigen::VectorXd(), c, 0.0, N, rng);

        double acc1 = 0.0, acc0 = 0.0;
        if (!opts.literal_mc) {
            for (std::size_t l = 0; l < N; ++l) {
                const Eigen::VectorXd mv = joint1.row(static_cast<Eigen::Index>(l)).transpose();
                const double mu = b.mean_full.eval(c, 1.0, mv);
                acc1 += mu * is_weight(mv, 1);
                acc0 += mu * is_weight(mv, 0);
            }
        } else {
            // Mixed-draw audit path: numerator evaluated on draws from
            // pi_{C,0}, denominator on a separate stream from pi_{C,1}.
            for (std::size_t l = 0; l < N; ++l) {
                const Eigen::VectorXd mv = joint0.row(static_cast<Eigen::Index>(l)).transpose();
                const Eigen::VectorXd md = joint1b.row(static_cast<Eigen::Index>(l)).transpose();
                const double mu = b.mean_full.eval(c, 1.0, mv);
                const double den = log_joint(md, mean1);
                const double num1 = log_fj(mv(j), mean1) + log_frest(subvec(mv, rest), mean0);
                const double num0 = log_fj(mv(j), mean0) + log_frest(subvec(mv, rest), mean0);
                acc1 += mu * std::exp(num1 - den);
                acc0 += mu * std::exp(num0 - den);
            }
        }
        zeta1 = acc1 / static_cast<double>(N);
        zeta0 = acc0 / static_cast<double>(N);
        tau_j1 = mu_full_at(mj1.col(0).mean(), m_rest);
        tau_j0 = mu_full_at(mj0.col(0).mean(), m_rest);
        tau_mj = rest.empty() ? mu_full_at(mj, Eigen::VectorXd())
                              : mu_full_at(mj, col_means(rest0));
    }

    const double w1 = is_weight(m, 1);
    const double w0 = is_weight(m, 0);
    const double resid1 = y - mu_full_obs1;

    ObsRow row;
    row.qr_dm_plugin = zeta1 - zeta0;
    row.qr_dm_corr = ind1 * (w1 - w0) * resid1 + ind0 * (tau_j1 - tau_j0 - zeta1 + zeta0) +
                     (ind1 - ind0) * tau_mj - ind1 * zeta1 + ind0 * zeta0;
    row.m0_dm = zeta1 - zeta0;
    row.m1_dm = ind1 * (w1 - w0) * y;
    row.m2_dm = ind0 * (tau_j1 - tau_j0);
    row.m3_dm = (ind1 - ind0) * tau_mj;
    row.te = ind1 * (y - kappa1) + kappa1 - (ind0 * (y - kappa0) + kappa0);

    // Mixture draw for the m_j coordinate of the TM integrals (shared by all
    // DAGs). Drawn after the DM block to keep the stream layout stable.
    double mix_mean_j;
    if (opts.mode == IntegralMode::ClosedForm) {
        mix_mean_j = e0 * mean0(j) + e1 * mean1(j);
    } else {
        double acc = 0.0;
        for (std::size_t l = 0; l < N; ++l) {
            const double arm = rng.bernoulli(e1) ? 1.0 : 0.0;
            const Eigen::MatrixXd d = law.sample_conditional({j}, {}, Eigen::VectorXd(), c, arm, 1, rng);
            acc += d(0, 0);
        }
        mix_mean_j = acc / static_cast<double>(N);
    }

    const double f_mix = e0 * (w.gaussian ? pdf1(mj, mean0(j), w.jpre.var_j)
                                          : std::exp(bern_logmass(mean0(j), mj))) +
                         e1 * (w.gaussian ? pdf1(mj, mean1(j), w.jpre.var_j)
                                          : std::exp(bern_logmass(mean1(j), mj)));

    const std::size_t n_dags = w.pas.size();
    row.qr_tm_plugin.resize(n_dags);
    row.qr_tm_corr.resize(n_dags);
    row.m0_tm.resize(n_dags);
    row.m1_tm.resize(n_dags);
    row.m2_tm.resize(n_dags);
    row.m3_tm.resize(n_dags);

    for (std::size_t g = 0; g < n_dags; ++g) {
        const PaPre& pp = w.pas[g];
        const Eigen::VectorXd pa_obs = subvec(m, pp.pa);
        auto mu2_at = [&](double ap, double mjv, const Eigen::VectorXd& pav) {
            Eigen::VectorXd vals(1 + pav.size());
            vals(0) = mjv;
            vals.tail(pav.size()) = pav;
            return pp.mu2->eval(c, ap, vals);
        };

        // pi_{c,a',Pa}(m_j): conditional density of coordinate j at the
        // observed parents. Bernoulli coordinates are independent, so the
        // conditional equals the marginal there.
        auto cond_density_j = [&](int a_prime) {
            const Eigen::VectorXd& mean_arm = a_prime == 1 ? mean1 : mean0;
            if (!w.gaussian) return std::exp(bern_logmass(mean_arm(j), mj));
            if (pp.pa.empty()) return pdf1(mj, mean_arm(j), w.jpre.var_j);
            const double cmean = mean_arm(j) + pp.k.dot(pa_obs - subvec(mean_arm, pp.pa));
            return pdf1(mj, cmean, pp.cond_var_j);
        };

        // Parent-marginal means for the closed-form / factorized integrals.
        Eigen::VectorXd pa_mean1, pa_mean0;
        if (opts.mode == IntegralMode::ClosedForm || pp.pa.empty()) {
            pa_mean1 = subvec(mean1, pp.pa);
            pa_mean0 = subvec(mean0, pp.pa);
        } else {
            const Eigen::MatrixXd d1 = law.sample_conditional(pp.pa, {}, Eigen::VectorXd(), c, 1.0, N, rng);
            const Eigen::MatrixXd d0 = law.sample_conditional(pp.pa, {}, Eigen::VectorXd(), c, 0.0, N, rng);
            pa_mean1 = col_means(d1);
            pa_mean0 = col_means(d0);
        }

        const double tau_cj1 = mu2_at(1.0, mix_mean_j, pa_obs);
        const double tau_cj0 = mu2_at(0.0, mix_mean_j, pa_obs);
        const double erho1 = mu2_at(1.0, mix_mean_j, pa_mean1);
        const double erho0 = mu2_at(0.0, mix_mean_j, pa_mean0);
        const double rho0_1 = mu2_at(1.0, mj, pa_mean1);
        const double rho0_0 = mu2_at(0.0, mj, pa_mean0);

        const double plugin = (kappa1 - kappa0) - (rho0_1 - rho0_0);

        const double ratio1 = f_mix / cond_density_j(1);
        const double ratio0 = f_mix / cond_density_j(0);
        const double mu2_obs1 = mu2_at(1.0, mj, pa_obs);
        const double mu2_obs0 = mu2_at(0.0, mj, pa_obs);

        const double t1 = ind1 * (y - kappa1) - ind0 * (y - kappa0);
        const double t2 = ind1 * ratio1 * (y - mu2_obs1) - ind0 * ratio0 * (y - mu2_obs0);
        const double t3 = ind1 * (tau_cj1 - erho1) - ind0 * (tau_cj0 - erho0);

        row.qr_tm_plugin[g] = plugin;
        row.qr_tm_corr[g] = t1 - t2 - t3;
        row.m0_tm[g] = plugin;
        row.m1_tm[g] = (ind1 - ind0) * y - (ind1 * ratio1 * y - ind0 * ratio0 * y);
        row.m2_tm[g] = (ind1 - ind0) * y - (ind1 * tau_cj1 - ind0 * tau_cj0);
        row.m3_tm[g] = (ind1 - ind0) * y - (ind1 * erho1 - ind0 * erho0);
    }
    return row;
}

PerObsScores run_scores(const Dataset& ds, const NuisanceBundle& bundle,
                        const std::vector<Dag>& mec, int j, const QrOptions& opts,
                        bool parallel) {
    const Workspace w = prepare(ds, bundle, mec, j, opts);
    const Eigen::Index n = ds.n();
    const std::size_t n_dags = mec.size();

    PerObsScores out;
    out.qr_dm_plugin.resize(n);
    out.qr_dm_corr.resize(n);
    out.m0_dm.resize(n);
    out.m1_dm.resize(n);
    out.m2_dm.resize(n);
    out.m3_dm.resize(n);
    out.te.resize(n);
    out.qr_tm_plugin.assign(n_dags, Eigen::VectorXd(n));
    out.qr_tm_corr.assign(n_dags, Eigen::VectorXd(n));
    out.m0_tm.assign(n_dags, Eigen::VectorXd(n));
    out.m1_tm.assign(n_dags, Eigen::VectorXd(n));
    out.m2_tm.assign(n_dags, Eigen::VectorXd(n));
    out.m3_tm.assign(n_dags, Eigen::VectorXd(n));

    auto fill = [&](Eigen::Index i) {
        const ObsRow row = compute_row(w, i);
        out.qr_dm_plugin(i) = row.qr_dm_plugin;
        out.qr_dm_corr(i) = row.qr_dm_corr;
        out.m0_dm(i) = row.m0_dm;
        out.m1_dm(i) = row.m1_dm;
        out.m2_dm(i) = row.m2_dm;
        out.m3_dm(i) = row.m3_dm;
        out.te(i) = row.te;
        for (std::size_t g = 0; g < n_dags; ++g) {
            out.qr_tm_plugin[g](i) = row.qr_tm_plugin[g];
            out.qr_tm_corr[g](i) = row.qr_tm_corr[g];
            out.m0_tm[g](i) = row.m0_tm[g];
            out.m1_tm[g](i) = row.m1_tm[g];
            out.m2_tm[g](i) = row.m2_tm[g];
            out.m3_tm[g](i) = row.m3_tm[g];
        }
    };

    if (parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(runtime_threads(opts.threads))
#endif
        for (Eigen::Index i = 0; i < n; ++i) fill(i);
    } else {
        for (Eigen::Index i = 0; i < n; ++i) fill(i);
    }
    return out;
}

}  // namespace

PerObsScores per_obs_scores(const Dataset& ds, const NuisanceBundle& bundle,
                            const std::vector<Dag>& mec, int j, const QrOptions& opts) {
    return run_scores(ds, bundle, mec, j, opts, /*parallel=*/true);
}

PerObsScores per_obs_scores_serial(const Dataset& ds, const NuisanceBundle& bundle,
                                   const std::vector<Dag>& mec, int j, const QrOptions& opts) {
    return run_scores(ds, bundle, mec, j, opts, /*parallel=*/false);
}

namespace {

// Truncated mean: entries with |v| > logn contribute zero, still divided by n.
double truncated_mean(const Eigen::VectorXd& v, bool truncate, double logn,
                      Eigen::VectorXd& kept, std::size_t& dropped) {
    kept = v;
    if (truncate) {
        for (Eigen::Index i = 0; i < v.size(); ++i)
            if (std::fabs(v(i)) > logn) {
                kept(i) = 0.0;
                ++dropped;
            }
    }
    return kept.mean();
}

}  // namespace

MediatorEffects assemble_effects(const PerObsScores& rows, Strategy strategy, bool truncate,
                                 Eigen::Index n) {
    const double logn = std::log(static_cast<double>(n));
    const std::size_t n_dags = rows.qr_tm_plugin.size();
    MediatorEffects eff;
    eff.tm_per_dag.resize(n_dags);

    Eigen::VectorXd dm_scores(n);
    std::vector<Eigen::VectorXd> tm_scores(n_dags);
    std::size_t dropped = 0;

    if (strategy == Strategy::QR) {
        Eigen::VectorXd kept;
        const double corr = truncated_mean(rows.qr_dm_corr, truncate, logn, kept, dropped);
        eff.dm = rows.qr_dm_plugin.mean() + corr;
        dm_scores = rows.qr_dm_plugin + kept;
        for (std::size_t g = 0; g < n_dags; ++g) {
            const double c = truncated_mean(rows.qr_tm_corr[g], truncate, logn, kept, dropped);
            eff.tm_per_dag[g] = rows.qr_tm_plugin[g].mean() + c;
            tm_scores[g] = rows.qr_tm_plugin[g] + kept;
        }
    } else {
        const Eigen::VectorXd* dm_col = nullptr;
        const std::vector<Eigen::VectorXd>* tm_cols = nullptr;
        switch (strategy) {
            case Strategy::M0: dm_col = &rows.m0_dm; tm_cols = &rows.m0_tm; break;
            case Strategy::M1: dm_col = &rows.m1_dm; tm_cols = &rows.m1_tm; break;
            case Strategy::M2: dm_col = &rows.m2_dm; tm_cols = &rows.m2_tm; break;
            case Strategy::M3: dm_col = &rows.m3_dm; tm_cols = &rows.m3_tm; break;
            case Strategy::QR: break;
        }
        Eigen::VectorXd kept;
        eff.dm = truncated_mean(*dm_col, truncate, logn, kept, dropped);
        dm_scores = kept;
        for (std::size_t g = 0; g < n_dags; ++g) {
            eff.tm_per_dag[g] = truncated_mean((*tm_cols)[g], truncate, logn, kept, dropped);
            tm_scores[g] = kept;
        }
    }

    eff.truncation_count = dropped;
    eff.tm_avg = 0.0;
    Eigen::VectorXd tm_avg_scores = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd im_centered = Eigen::VectorXd::Zero(n);
    for (std::size_t g = 0; g < n_dags; ++g) {
        eff.tm_avg += eff.tm_per_dag[g];
        tm_avg_scores += tm_scores[g];
        im_centered += tm_scores[g].array().matrix() - Eigen::VectorXd::Constant(n, eff.tm_per_dag[g]);
    }
    const double gcount = static_cast<double>(n_dags);
    eff.tm_avg /= gcount;
    tm_avg_scores /= gcount;
    im_centered /= gcount;
    im_centered -= dm_scores - Eigen::VectorXd::Constant(n, eff.dm);

    eff.im_avg = eff.tm_avg - eff.dm;
    eff.dm_scores = dm_scores;
    eff.tm_scores_avg = tm_avg_scores;
    eff.im_scores_avg = im_centered + Eigen::VectorXd::Constant(n, eff.im_avg);

    eff.dm_se = std::sqrt(score_variance(eff.dm_scores, eff.dm));
    eff.tm_se = std::sqrt(score_variance(eff.tm_scores_avg, eff.tm_avg));
    eff.im_se = std::sqrt(score_variance(eff.im_scores_avg, eff.im_avg));
    return eff;
}

MediatorEffects mediator_effects(const Dataset& ds, const NuisanceBundle& bundle,
                                 const std::vector<Dag>& mec, int j, Strategy strategy,
                                 const QrOptions& opts) {
    const PerObsScores rows = per_obs_scores(ds, bundle, mec, j, opts);
    return assemble_effects(rows, strategy, opts.truncate, ds.n());
}

std::pair<double, double> te_aipw(const Dataset& ds, const NuisanceBundle& bundle) {
    const Eigen::Index n = ds.n();
    Eigen::VectorXd scores(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd c = ds.c_matrix.row(i).transpose();
        const double a = ds.a_vector(i);
        const double y = ds.y_vector(i);
        const double e1 = bundle.propensity.e1(c);
        const double e0 = 1.0 - e1;
        const double k1 = bundle.mean_ca.eval(c, 1.0, Eigen::VectorXd());
        const double k0 = bundle.mean_ca.eval(c, 0.0, Eigen::VectorXd());
        const double ind1 = a == 1.0 ? 1.0 / e1 : 0.0;
        const double ind0 = a == 0.0 ? 1.0 / e0 : 0.0;
        scores(i) = ind1 * (y - k1) + k1 - (ind0 * (y - k0) + k0);
    }
    const double point = scores.mean();
    return {point, std::sqrt(score_variance(scores, point))};
}

double score_variance(const Eigen::VectorXd& scores, double estimate) {
    const double n = static_cast<double>(scores.size());
    double acc = 0.0;
    for (Eigen::Index i = 0; i < scores.size(); ++i) {
        const double d = scores(i) - estimate;
        acc += d * d;
    }
    return acc / (n * n);
}

namespace {

Dataset resample_rows(const Dataset& ds, Rng& rng) {
    const Eigen::Index n = ds.n();
    Dataset out = ds;
    Eigen::MatrixXd c(n, ds.c_matrix.cols());
    Eigen::VectorXd a(n);
    Eigen::MatrixXd m(n, ds.m_matrix.cols());
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto k = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::size_t>(n)));
        if (ds.c_matrix.cols() > 0) c.row(i) = ds.c_matrix.row(k);
        a(i) = ds.a_vector(k);
        m.row(i) = ds.m_matrix.row(k);
        y(i) = ds.y_vector(k);
    }
    out.c_matrix = std::move(c);
    out.a_vector = std::move(a);
    out.m_matrix = std::move(m);
    out.y_vector = std::move(y);
    return out;
}

BootstrapCi bootstrap_core(
    const std::function<std::pair<double, double>(const Dataset&)>& estimator,
    const Dataset& ds, int replicates, double alpha, std::uint64_t seed, double point,
    double se, int threads, bool parallel) {
    if (replicates < 50) throw std::invalid_argument("symmetric_t_bootstrap: need B >= 50");
    std::vector<double> tstats(static_cast<std::size_t>(replicates),
                               std::numeric_limits<double>::quiet_NaN());

    auto run_one = [&](int bi) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(bi) + 0x10000ULL));
        try {
            const Dataset boot = resample_rows(ds, rng);
            boot.validate();
            const auto [pt, s] = estimator(boot);
            const double denom = std::max(s, 1e-12);
            tstats[static_cast<std::size_t>(bi)] = std::fabs((pt - point) / denom);
        } catch (const std::exception&) {
            // left as NaN -> counted as failure
        }
    };

    if (parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(runtime_threads(threads))
#endif
        for (int bi = 0; bi < replicates; ++bi) run_one(bi);
    } else {
        for (int bi = 0; bi < replicates; ++bi) run_one(bi);
    }

    std::vector<double> ok;
    int failures = 0;
    for (double t : tstats) {
        if (std::isnan(t)) ++failures;
        else ok.push_back(t);
    }
    if (failures * 10 > replicates)
        throw std::runtime_error("symmetric_t_bootstrap: replicate failure rate > 10%");

    std::sort(ok.begin(), ok.end());
    const std::size_t k = static_cast<std::size_t>(
        std::ceil((1.0 - alpha) * static_cast<double>(ok.size())));
    const double q = ok[std::min(ok.size() - 1, std::max<std::size_t>(k, 1) - 1)];

    BootstrapCi ci;
    ci.quantile = q;
    ci.failures = failures;
    ci.ci_low = point - q * se;
    ci.ci_high = point + q * se;
    return ci;
}

}  // namespace

BootstrapCi symmetric_t_bootstrap(
    const std::function<std::pair<double, double>(const Dataset&)>& estimator,
    const Dataset& ds, int replicates, double alpha, std::uint64_t seed, double point,
    double se, int threads) {
    return bootstrap_core(estimator, ds, replicates, alpha, seed, point, se, threads, true);
}

BootstrapCi symmetric_t_bootstrap_serial(
    const std::function<std::pair<double, double>(const Dataset&)>& estimator,
    const Dataset& ds, int replicates, double alpha, std::uint64_t seed, double point,
    double se) {
    return bootstrap_core(estimator, ds, replicates, alpha, seed, point, se, 0, false);
}

double score_kappa(const Eigen::VectorXd& c, double a, double y, const NuisanceBundle& bundle,
                   int a_prime) {
    const double e1 = bundle.propensity.e1(c);
    const double e = a_prime == 1 ? e1 : 1.0 - e1;
    const double kappa = bundle.mean_ca.eval(c, static_cast<double>(a_prime), Eigen::VectorXd());
    const double ind = a == static_cast<double>(a_prime) ? 1.0 / e : 0.0;
    return ind * (y - kappa) + kappa;
}

double score_zeta(const Dataset& ds, int i, const NuisanceBundle& bundle, int j, int a_prime,
                  const QrOptions& opts) {
    (void)opts;
    const NuisanceBundle& b = bundle;
    // Per-arm value s(a') = ind1*w(a')*resid + ind0*(tau_j(a') - zeta(a'))
    // + ind_{a'}*(tau_mj - zeta(a')) + zeta(a'), closed Gaussian forms.
    const Eigen::VectorXd c = ds.c_matrix.row(i).transpose();
    const double a = ds.a_vector(i);
    const double y = ds.y_vector(i);
    const Eigen::VectorXd m = ds.m_matrix.row(i).transpose();
    const MediatorLaw& law = b.mediators;
    const double e1 = b.propensity.e1(c);
    const double e0 = 1.0 - e1;
    const double ind1 = a == 1.0 ? 1.0 / e1 : 0.0;
    const double ind0 = a == 0.0 ? 1.0 / e0 : 0.0;
    const Eigen::VectorXd mean0 = law.cond_mean(c, 0.0);
    const Eigen::VectorXd mean1 = law.cond_mean(c, 1.0);
    std::vector<int> rest;
    for (int k = 0; k < law.p; ++k)
        if (k != j) rest.push_back(k);

    auto mu_full_at = [&](double mjv, const Eigen::VectorXd& restv) {
        Eigen::VectorXd mv(law.p);
        mv(j) = mjv;
        for (std::size_t k = 0; k < rest.size(); ++k) mv(rest[k]) = restv(static_cast<Eigen::Index>(k));
        return b.mean_full.eval(c, 1.0, mv);
    };
    const Eigen::VectorXd mean_arm = a_prime == 1 ? mean1 : mean0;
    const double zeta = mu_full_at(mean_arm(j), subvec(mean0, rest));
    const double tau_j = mu_full_at(mean_arm(j), subvec(m, rest));
    const double tau_mj = mu_full_at(m(j), subvec(mean0, rest));

    // Importance weight at the observation, w(a') = pi_{C,a'}(M_j)
    // pi_{C,0}(M_rest) / pi_{C,1}(M).
    const double lf_j = law.log_density({j}, Eigen::VectorXd::Constant(1, m(j)), {},
                                        Eigen::VectorXd(), c, static_cast<double>(a_prime));
    double lf_rest = 0.0;
    if (!rest.empty())
        lf_rest = law.log_density(rest, subvec(m, rest), {}, Eigen::VectorXd(), c, 0.0);
    std::vector<int> all(static_cast<std::size_t>(law.p));
    for (int k = 0; k < law.p; ++k) all[static_cast<std::size_t>(k)] = k;
    const double lf_joint = law.log_density(all, m, {}, Eigen::VectorXd(), c, 1.0);
    const double wgt = std::exp(lf_j + lf_rest - lf_joint);

    const double resid1 = y - b.mean_full.eval(c, 1.0, m);
    const double ind_arm = a_prime == 1 ? ind1 : ind0;
    return ind1 * wgt * resid1 + ind0 * (tau_j - zeta) + ind_arm * (tau_mj - zeta) + zeta;
}

double score_varrho(const Dataset& ds, int i, const NuisanceBundle& bundle, int j, int a_prime,
                    const Dag& mediator_dag, const QrOptions& opts) {
    (void)opts;
    const Eigen::VectorXd c = ds.c_matrix.row(i).transpose();
    const double a = ds.a_vector(i);
    const double y = ds.y_vector(i);
    const Eigen::VectorXd m = ds.m_matrix.row(i).transpose();
    const MediatorLaw& law = bundle.mediators;
    const double e1 = bundle.propensity.e1(c);
    const double e0 = 1.0 - e1;
    const double e_arm = a_prime == 1 ? e1 : e0;
    const double ind_arm = a == static_cast<double>(a_prime) ? 1.0 / e_arm : 0.0;

    auto pa = parents_of(mediator_dag, j);
    std::sort(pa.begin(), pa.end());
    MeanSpec spec;
    spec.med_coords.push_back(j);
    for (int q : pa) spec.med_coords.push_back(q);
    const MeanModel& mu2 = bundle.mean_for(spec);

    const Eigen::VectorXd mean_arm = law.cond_mean(c, static_cast<double>(a_prime));
    const Eigen::VectorXd mean0 = law.cond_mean(c, 0.0);
    const Eigen::VectorXd mean1 = law.cond_mean(c, 1.0);
    const Eigen::VectorXd pa_obs = subvec(m, pa);
    const double mj = m(j);
    const double mix_mean_j = e0 * mean0(j) + e1 * mean1(j);

    auto mu2_at = [&](double mjv, const Eigen::VectorXd& pav) {
        Eigen::VectorXd vals(1 + pav.size());
        vals(0) = mjv;
        vals.tail(pav.size()) = pav;
        return mu2.eval(c, static_cast<double>(a_prime), vals);
    };

    // Ratio pi_C(M_j) / pi_{C,a',Pa}(M_j).
    const double f_mix = e0 * law.density({j}, Eigen::VectorXd::Constant(1, mj), {},
                                          Eigen::VectorXd(), c, 0.0) +
                         e1 * law.density({j}, Eigen::VectorXd::Constant(1, mj), {},
                                          Eigen::VectorXd(), c, 1.0);
    double cond;
    if (pa.empty()) {
        cond = law.density({j}, Eigen::VectorXd::Constant(1, mj), {}, Eigen::VectorXd(), c,
                           static_cast<double>(a_prime));
    } else {
        cond = law.density({j}, Eigen::VectorXd::Constant(1, mj), pa, pa_obs, c,
                           static_cast<double>(a_prime));
    }
    const double ratio = f_mix / cond;

    const double tau_cj = mu2_at(mix_mean_j, pa_obs);
    const double erho = mu2_at(mix_mean_j, subvec(mean_arm, pa));
    const double rho = mu2_at(mj, subvec(mean_arm, pa));
    const double mu2_obs = mu2_at(mj, pa_obs);

    return ind_arm * ratio * (y - mu2_obs) + ind_arm * (tau_cj - erho) + rho;
}

FastQrResult fast_qr(const Dataset& ds, int j, const std::vector<Dag>& mec, double alpha,
                     int bootstrap_b, std::uint64_t seed, int threads) {
    BundleOptions bopts;
    NuisanceBundle bundle = fit_bundle(ds, bopts);
    std::vector<std::vector<int>> parent_sets;
    for (const auto& g : mec) parent_sets.push_back(parents_of(g, j));
    ensure_parent_means(bundle, ds, parent_sets, j);

    QrOptions opts;
    opts.mode = IntegralMode::ClosedForm;
    opts.seed = seed;
    opts.truncate = true;
    opts.threads = threads;

    FastQrResult out;
    out.effects = mediator_effects(ds, bundle, mec, j, Strategy::QR, opts);

    auto rerun = [&](const Dataset& boot) {
        NuisanceBundle bb = fit_bundle(boot, bopts);
        ensure_parent_means(bb, boot, parent_sets, j);
        return mediator_effects(boot, bb, mec, j, Strategy::QR, opts);
    };
    auto dm_est = [&](const Dataset& boot) {
        const MediatorEffects e = rerun(boot);
        return std::make_pair(e.dm, e.dm_se);
    };
    auto im_est = [&](const Dataset& boot) {
        const MediatorEffects e = rerun(boot);
        return std::make_pair(e.im_avg, e.im_se);
    };

    const MediatorEffects& eff = out.effects;
    out.dm.estimand = Estimand::DM;
    out.dm.mediator_index = j;
    out.dm.point = eff.dm;
    out.dm.se = eff.dm_se;
    out.dm.level = alpha;
    out.dm.method = "qr-fast";
    out.im = out.dm;
    out.im.estimand = Estimand::IM;
    out.im.point = eff.im_avg;
    out.im.se = eff.im_se;

    if (bootstrap_b >= 50) {
        const BootstrapCi dm_ci = symmetric_t_bootstrap(dm_est, ds, bootstrap_b, alpha,
                                                        derive_seed(seed, 1), eff.dm, eff.dm_se,
                                                        threads);
        const BootstrapCi im_ci = symmetric_t_bootstrap(im_est, ds, bootstrap_b, alpha,
                                                        derive_seed(seed, 2), eff.im_avg,
                                                        eff.im_se, threads);
        out.dm.ci_low = dm_ci.ci_low;
        out.dm.ci_high = dm_ci.ci_high;
        out.im.ci_low = im_ci.ci_low;
        out.im.ci_high = im_ci.ci_high;
    } else {
        const double z = normal_quantile(1.0 - alpha / 2.0);
        out.dm.ci_low = out.dm.point - z * out.dm.se;
        out.dm.ci_high = out.dm.point + z * out.dm.se;
        out.im.ci_low = out.im.point - z * out.im.se;
        out.im.ci_high = out.im.point + z * out.im.se;
    }
    return out;
}

}  // namespace causalmed
