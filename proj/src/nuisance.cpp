#include "causalmed/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace causalmed {

namespace {

double apply_link(Link link, double eta) {
    return link == Link::Probit ? normal_cdf(eta) : logistic_cdf(eta);
}

}  // namespace

double PropensityModel::e1(const Eigen::VectorXd& c) const {
    double eta = coefficients(0);
    for (Eigen::Index j = 0; j < c.size(); ++j) eta += coefficients(j + 1) * c(j);
    const double p = apply_link(link, eta);
    return std::clamp(p, clip, 1.0 - clip);
}

Eigen::VectorXd MediatorLaw::cond_mean(const Eigen::VectorXd& c, double a) const {
    if (mode == Mode::Gaussian) {
        Eigen::VectorXd m = intercept;
        if (theta_mc.cols() > 0) m += theta_mc * c;
        m += theta_ma * a;
        return m;
    }
    Eigen::VectorXd m(p);
    for (int j = 0; j < p; ++j) {
        double eta = logit_coef(j, 0);
        for (Eigen::Index k = 0; k < c.size(); ++k) eta += logit_coef(j, k + 1) * c(k);
        eta += logit_coef(j, c.size() + 1) * a;
        m(j) = logistic_cdf(eta);
    }
    return m;
}

GaussianLaw MediatorLaw::joint_gaussian(const Eigen::VectorXd& c, double a) const {
    if (mode != Mode::Gaussian) throw std::logic_error("joint_gaussian: discrete law");
    return GaussianLaw{cond_mean(c, a), noise_cov};
}

double MediatorLaw::log_density(const std::vector<int>& target, const Eigen::VectorXd& values,
                                const std::vector<int>& given,
                                const Eigen::VectorXd& given_values,
                                const Eigen::VectorXd& c, double a) const {
    if (target.empty()) throw std::invalid_argument("log_density: empty target");
    if (mode == Mode::Gaussian) {
        GaussianLaw law = joint_gaussian(c, a);
        if (!given.empty()) {
            law = gaussian_condition(law, given, given_values);
            // Conditioning re-indexes the remaining coordinates.
            std::vector<int> remap;
            for (int k = 0; k < p; ++k)
                if (std::find(given.begin(), given.end(), k) == given.end()) remap.push_back(k);
            std::vector<int> keep;
            for (int tcoord : target) {
                const auto it = std::find(remap.begin(), remap.end(), tcoord);
                if (it == remap.end()) throw std::invalid_argument("log_density: target in given set");
                keep.push_back(static_cast<int>(it - remap.begin()));
            }
            law = gaussian_marginal(law, keep);
        } else {
            law = gaussian_marginal(law, target);
        }
        return gaussian_log_density(values, law);
    }
    // Bernoulli coordinates are conditionally independent given (C, A).
    const Eigen::VectorXd prob = cond_mean(c, a);
    double ll = 0.0;
    for (std::size_t k = 0; k < target.size(); ++k) {
        const double pj = prob(target[k]);
        ll += values(static_cast<Eigen::Index>(k)) > 0.5 ? std::log(pj) : std::log1p(-pj);
    }
    return ll;
}

double MediatorLaw::density(const std::vector<int>& target, const Eigen::VectorXd& values,
                            const std::vector<int>& given, const Eigen::VectorXd& given_values,
                            const Eigen::VectorXd& c, double a) const {
    return std::exp(log_density(target, values, given, given_values, c, a));
}

double MediatorLaw::density_marginal(int j, double value, const Eigen::VectorXd& c, double e0,
                                     double e1) const {
    const Eigen::VectorXd v = Eigen::VectorXd::Constant(1, value);
    const double f0 = density({j}, v, {}, Eigen::VectorXd(), c, 0.0);
    const double f1 = density({j}, v, {}, Eigen::VectorXd(), c, 1.0);
    return e0 * f0 + e1 * f1;
}

Eigen::MatrixXd MediatorLaw::sample_conditional(const std::vector<int>& target,
                                                const std::vector<int>& given,
                                                const Eigen::VectorXd& given_values,
                                                const Eigen::VectorXd& c, double a,
                                                std::size_t count, Rng& rng) const {
    const Eigen::Index k = static_cast<Eigen::Index>(target.size());
    Eigen::MatrixXd out(static_cast<Eigen::Index>(count), k);
    if (mode == Mode::Bernoulli) {
        const Eigen::VectorXd prob = cond_mean(c, a);
        for (Eigen::Index i = 0; i < out.rows(); ++i)
            for (Eigen::Index t = 0; t < k; ++t)
                out(i, t) = rng.bernoulli(prob(target[static_cast<std::size_t>(t)])) ? 1.0 : 0.0;
        return out;
    }
    GaussianLaw law = joint_gaussian(c, a);
    if (!given.empty()) {
        law = gaussian_condition(law, given, given_values);
        std::vector<int> remap;
        for (int kk = 0; kk < p; ++kk)
            if (std::find(given.begin(), given.end(), kk) == given.end()) remap.push_back(kk);
        std::vector<int> keep;
        for (int tcoord : target) {
            const auto it = std::find(remap.begin(), remap.end(), tcoord);
            if (it == remap.end()) throw std::invalid_argument("sample_conditional: target in given set");
            keep.push_back(static_cast<int>(it - remap.begin()));
        }
        law = gaussian_marginal(law, keep);
    } else {
        law = gaussian_marginal(law, target);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(law.cov);
    Eigen::MatrixXd chol;
    if (llt.info() == Eigen::Success) {
        chol = llt.matrixL();
    } else {
        Eigen::MatrixXd jittered = law.cov;
        jittered.diagonal().array() += 1e-12;
        Eigen::LLT<Eigen::MatrixXd> retry(jittered);
        if (retry.info() != Eigen::Success)
            throw std::runtime_error("sample_conditional: covariance not PSD");
        chol = retry.matrixL();
    }
    Eigen::VectorXd z(k);
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        for (Eigen::Index t = 0; t < k; ++t) z(t) = rng.normal();
        out.row(i) = (law.mean + chol * z).transpose();
    }
    return out;
}

double MeanModel::eval(const Eigen::VectorXd& c, double a, const Eigen::VectorXd& m_values) const {
    double v = intercept;
    if (spec.use_c)
        for (Eigen::Index j = 0; j < c.size(); ++j) v += coef_c(j) * c(j);
    if (spec.use_a) v += coef_a * a;
    for (Eigen::Index j = 0; j < m_values.size(); ++j) v += coef_m(j) * m_values(j);
    return v;
}

const MeanModel& NuisanceBundle::mean_for(const MeanSpec& spec) const {
    const auto it = mean_cache.find(spec);
    if (it == mean_cache.end()) throw std::logic_error("mean_for: model not fitted for spec");
    return it->second;
}

PropensityModel fit_propensity(const Dataset& ds, Link link, double clip) {
    const Eigen::MatrixXd x = with_intercept(ds.c_matrix);
    const Eigen::VectorXd& a = ds.a_vector;
    const Eigen::Index n = x.rows(), k = x.cols();

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
    bool converged = false;
    for (int iter = 0; iter < 100; ++iter) {
        Eigen::VectorXd score = Eigen::VectorXd::Zero(k);
        Eigen::MatrixXd info = Eigen::MatrixXd::Zero(k, k);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double eta = x.row(i).dot(beta);
            const double p = apply_link(link, eta);
            const double pc = std::clamp(p, 1e-10, 1.0 - 1e-10);
            double w, r;
            if (link == Link::Logit) {
                w = pc * (1.0 - pc);
                r = a(i) - pc;
            } else {
                const double phi = std::exp(-0.5 * eta * eta) / std::sqrt(2.0 * M_PI);
                w = phi * phi / (pc * (1.0 - pc));
                r = (a(i) - pc) * phi / (pc * (1.0 - pc));
            }
            score += r * x.row(i).transpose();
            info += w * x.row(i).transpose() * x.row(i);
        }
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        if (ldlt.info() != Eigen::Success)
            throw std::runtime_error("fit_propensity: singular information matrix");
        const Eigen::VectorXd step = ldlt.solve(score);
        beta += step;
        if (beta.lpNorm<Eigen::Infinity>() > 1e6)
            throw std::runtime_error("fit_propensity: perfect separation");
        if (step.lpNorm<Eigen::Infinity>() < 1e-8) {
            converged = true;
            break;
        }
    }
    if (!converged) throw std::runtime_error("fit_propensity: Newton did not converge");

    PropensityModel model;
    model.link = link;
    model.coefficients = beta;
    model.clip = clip;
    return model;
}

MediatorLaw fit_mediator_law(const Dataset& ds) {
    const Eigen::Index n = ds.n(), p = ds.p(), tc = ds.c_matrix.cols();
    if (n <= tc + 1) throw std::invalid_argument("fit_mediator_law: need n > t + 1");
    Eigen::MatrixXd design(n, tc + 2);
    design.col(0).setOnes();
    design.middleCols(1, tc) = ds.c_matrix;
    design.col(tc + 1) = ds.a_vector;

    MediatorLaw law;
    law.mode = MediatorLaw::Mode::Gaussian;
    law.p = static_cast<int>(p);
    law.intercept.resize(p);
    law.theta_mc.resize(p, tc);
    law.theta_ma.resize(p);

    Eigen::MatrixXd resid(n, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const OlsFit fit = ols_fit(design, ds.m_matrix.col(j));
        if (fit.residuals.squaredNorm() == 0.0 && ds.m_matrix.col(j).maxCoeff() == ds.m_matrix.col(j).minCoeff())
            throw std::runtime_error("fit_mediator_law: constant mediator column");
        law.intercept(j) = fit.coefficients(0);
        law.theta_mc.row(j) = fit.coefficients.segment(1, tc).transpose();
        law.theta_ma(j) = fit.coefficients(tc + 1);
        resid.col(j) = fit.residuals;
    }
    // Residual covariance with divisor n - k, k = regression column count.
    law.noise_cov = resid.transpose() * resid / static_cast<double>(n - design.cols());
    for (Eigen::Index j = 0; j < p; ++j)
        if (law.noise_cov(j, j) <= 0.0)
            throw std::runtime_error("fit_mediator_law: zero-variance mediator");
    return law;
}

MediatorLaw fit_mediator_law_discrete(const Dataset& ds) {
    const Eigen::Index n = ds.n(), p = ds.p(), tc = ds.c_matrix.cols();
    Eigen::MatrixXd x(n, tc + 2);
    x.col(0).setOnes();
    x.middleCols(1, tc) = ds.c_matrix;
    x.col(tc + 1) = ds.a_vector;

    MediatorLaw law;
    law.mode = MediatorLaw::Mode::Bernoulli;
    law.p = static_cast<int>(p);
    law.logit_coef.resize(p, tc + 2);

    for (Eigen::Index j = 0; j < p; ++j) {
        Eigen::VectorXd beta = Eigen::VectorXd::Zero(tc + 2);
        const Eigen::VectorXd m = ds.m_matrix.col(j);
        bool converged = false;
        for (int iter = 0; iter < 100; ++iter) {
            Eigen::VectorXd score = Eigen::VectorXd::Zero(tc + 2);
            Eigen::MatrixXd info = Eigen::MatrixXd::Zero(tc + 2, tc + 2);
            for (Eigen::Index i = 0; i < n; ++i) {
                const double pr = std::clamp(logistic_cdf(x.row(i).dot(beta)), 1e-10, 1.0 - 1e-10);
                score += (m(i) - pr) * x.row(i).transpose();
                info += pr * (1.0 - pr) * x.row(i).transpose() * x.row(i);
            }
            Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
            if (ldlt.info() != Eigen::Success)
                throw std::runtime_error("fit_mediator_law_discrete: singular information");
            const Eigen::VectorXd step = ldlt.solve(score);
            beta += step;
            if (beta.lpNorm<Eigen::Infinity>() > 1e6)
                throw std::runtime_error("fit_mediator_law_discrete: separation");
            if (step.lpNorm<Eigen::Infinity>() < 1e-8) {
                converged = true;
                break;
            }
        }
        if (!converged) throw std::runtime_error("fit_mediator_law_discrete: no convergence");
        law.logit_coef.row(j) = beta.transpose();
    }
    return law;
}

MeanModel fit_mean(const Dataset& ds, const MeanSpec& spec) {
    const Eigen::Index n = ds.n(), tc = ds.c_matrix.cols();
    const Eigen::Index k = 1 + (spec.use_c ? tc : 0) + (spec.use_a ? 1 : 0) +
                           static_cast<Eigen::Index>(spec.med_coords.size());
    if (n <= k) throw std::invalid_argument("fit_mean: need n > |s| + 1");
    Eigen::MatrixXd design(n, k);
    Eigen::Index col = 0;
    design.col(col++).setOnes();
    if (spec.use_c) {
        design.middleCols(col, tc) = ds.c_matrix;
        col += tc;
    }
    if (spec.use_a) design.col(col++) = ds.a_vector;
    for (int mc : spec.med_coords) design.col(col++) = ds.m_matrix.col(mc);

    const OlsFit fit = ols_fit(design, ds.y_vector);
    MeanModel model;
    model.spec = spec;
    col = 0;
    model.intercept = fit.coefficients(col++);
    if (spec.use_c) {
        model.coef_c = fit.coefficients.segment(col, tc);
        col += tc;
    } else {
        model.coef_c.resize(0);
    }
    if (spec.use_a) model.coef_a = fit.coefficients(col++);
    model.coef_m = fit.coefficients.tail(static_cast<Eigen::Index>(spec.med_coords.size()));
    return model;
}

NuisanceBundle fit_bundle(const Dataset& ds, const BundleOptions& opts) {
    NuisanceBundle b;
    b.propensity = fit_propensity(ds, opts.link, opts.clip);
    b.mediators = opts.discrete_mediators ? fit_mediator_law_discrete(ds) : fit_mediator_law(ds);
    MeanSpec full;
    for (int j = 0; j < ds.p(); ++j) full.med_coords.push_back(j);
    b.mean_full = fit_mean(ds, full);
    b.mean_ca = fit_mean(ds, MeanSpec{true, true, {}});
    b.mean_cache[full] = b.mean_full;
    b.mean_cache[b.mean_ca.spec] = b.mean_ca;
    return b;
}

void ensure_parent_means(NuisanceBundle& bundle, const Dataset& ds,
                         const std::vector<std::vector<int>>& parent_sets, int j) {
    for (const auto& pa : parent_sets) {
        MeanSpec spec;
        spec.med_coords.push_back(j);
        for (int k : pa) spec.med_coords.push_back(k);
        if (bundle.mean_cache.find(spec) == bundle.mean_cache.end())
            bundle.mean_cache[spec] = fit_mean(ds, spec);
    }
}

NuisanceBundle make_misspecified(const NuisanceBundle& bundle, const Dataset& ds,
                                 Misspecification scenario) {
    NuisanceBundle out = bundle;
    switch (scenario) {
        case Misspecification::WrongLink: {
            const Link other = bundle.propensity.link == Link::Probit ? Link::Logit : Link::Probit;
            out.propensity = fit_propensity(ds, other, bundle.propensity.clip);
            break;
        }
        case Misspecification::WrongOutcome: {
            // Plain linear fits, ignoring any curvature or interactions in
            // the generating process.
            out.mean_cache.clear();
            MeanSpec full;
            for (int j = 0; j < ds.p(); ++j) full.med_coords.push_back(j);
            out.mean_full = fit_mean(ds, full);
            out.mean_ca = fit_mean(ds, MeanSpec{true, true, {}});
            out.mean_cache[full] = out.mean_full;
            out.mean_cache[out.mean_ca.spec] = out.mean_ca;
            break;
        }
        case Misspecification::WrongMediatorJ:
        case Misspecification::WrongMediatorShift:
            // Gaussian-linear law fitted to data whose mediator equations
            // deviate from it; the wrongness lives in the data, the fit is
            // the default form.
            out.mediators = fit_mediator_law(ds);
            break;
    }
    return out;
}

}  // namespace causalmed
