#include "causalmed/effects_ols.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "causalmed/linmodel.hpp"
#include "causalmed/rng.hpp"

namespace causalmed {

namespace {

EffectEstimate make_estimate(Estimand what, std::optional<int> j, double point, double se,
                             double alpha, const char* method) {
    EffectEstimate e;
    e.estimand = what;
    e.mediator_index = j;
    e.point = point;
    e.se = se;
    const double z = normal_quantile(1.0 - alpha / 2.0);
    e.ci_low = point - z * se;
    e.ci_high = point + z * se;
    e.level = alpha;
    e.method = method;
    return e;
}

}  // namespace

OlsEngine::OlsEngine(const Dataset& ds) : ds_(&ds) {
    const Eigen::Index n = ds.n(), p = ds.p(), tc = ds.c_matrix.cols();

    Eigen::MatrixXd xy(n, tc + p + 2);  // (1, C, A, M)
    xy.col(0).setOnes();
    xy.middleCols(1, tc) = ds.c_matrix;
    xy.col(tc + 1) = ds.a_vector;
    xy.rightCols(p) = ds.m_matrix;
    const OlsFit yfit = ols_fit(xy, ds.y_vector);
    beta_yc_ = yfit.coefficients.segment(1, tc);
    alpha_ya_ = yfit.coefficients(tc + 1);
    beta_ym_ = yfit.coefficients.tail(p);
    resid_y_ = yfit.residuals;
    sum_eps_y_sq_ = resid_y_.squaredNorm();

    Eigen::MatrixXd xm(n, tc + 2);  // (1, C, A)
    xm.col(0).setOnes();
    xm.middleCols(1, tc) = ds.c_matrix;
    xm.col(tc + 1) = ds.a_vector;
    theta_mc_.resize(p, tc);
    theta_ma_.resize(p);
    resid_m_.resize(n, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const OlsFit mfit = ols_fit(xm, ds.m_matrix.col(j));
        theta_mc_.row(j) = mfit.coefficients.segment(1, tc).transpose();
        theta_ma_(j) = mfit.coefficients(tc + 1);
        resid_m_.col(j) = mfit.residuals;
    }
    sum_em_outer_ = resid_m_.transpose() * resid_m_;

    // Gamma products. Intercepts ride along in the z-blocks.
    Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(n, 1);
    Eigen::MatrixXd z_mc(n, 1 + tc + p);
    z_mc << ones, ds.c_matrix, ds.m_matrix;
    const Eigen::MatrixXd g_a = gamma_transform(ds.a_vector, z_mc);
    gg_a_ = (g_a * g_a.transpose())(0, 0);

    Eigen::MatrixXd z_ca(n, 2 + tc);
    z_ca << ones, ds.c_matrix, ds.a_vector;
    const Eigen::MatrixXd g_m = gamma_transform(ds.m_matrix, z_ca);
    gg_m_ = g_m * g_m.transpose();
    gg_am_ = g_a * g_m.transpose();

    Eigen::MatrixXd z_c(n, 1 + tc);
    z_c << ones, ds.c_matrix;
    const Eigen::MatrixXd g_ac = gamma_transform(ds.a_vector, z_c);
    gg_a_c_ = (g_ac * g_ac.transpose())(0, 0);
}

double OlsEngine::reg_coef_first(int j, const std::vector<int>& parents) const {
    std::vector<int> key = parents;
    std::sort(key.begin(), key.end());
    const auto cache_key = std::make_pair(j, key);
    const auto it = coef_cache_.find(cache_key);
    if (it != coef_cache_.end()) return it->second;

    const Dataset& ds = *ds_;
    const Eigen::Index n = ds.n(), tc = ds.c_matrix.cols();
    Eigen::MatrixXd x(n, 2 + static_cast<Eigen::Index>(key.size()) + 1 + tc);
    Eigen::Index col = 0;
    x.col(col++).setOnes();
    x.col(col++) = ds.m_matrix.col(j);
    for (int k : key) x.col(col++) = ds.m_matrix.col(k);
    x.col(col++) = ds.a_vector;
    for (Eigen::Index k = 0; k < tc; ++k) x.col(col++) = ds.c_matrix.col(k);
    const OlsFit fit = ols_fit(x, ds.y_vector);
    const double coef = fit.coefficients(1);
    coef_cache_[cache_key] = coef;
    return coef;
}

EffectEstimate OlsEngine::de(double alpha) const {
    const double n = static_cast<double>(ds_->n());
    const double se = std::sqrt(gg_a_ * sum_eps_y_sq_ / n);
    return make_estimate(Estimand::DE, std::nullopt, alpha_ya_, se, alpha, "ols");
}

EffectEstimate OlsEngine::ie(double alpha) const {
    const double n = static_cast<double>(ds_->n());
    const Eigen::MatrixXd sigma_beta = sum_eps_y_sq_ * gg_m_;
    const Eigen::MatrixXd sigma_theta = gg_a_c_ * sum_em_outer_;
    const double var = beta_ym_.dot(sigma_theta * beta_ym_) + theta_ma_.dot(sigma_beta * theta_ma_);
    const double point = beta_ym_.dot(theta_ma_);
    return make_estimate(Estimand::IE, std::nullopt, point, std::sqrt(var / n), alpha, "ols");
}

EffectEstimate OlsEngine::te(double alpha) const {
    const double n = static_cast<double>(ds_->n());
    const EffectEstimate d = de(alpha), i = ie(alpha);
    const double cov = sum_eps_y_sq_ * gg_am_.dot(theta_ma_);
    double var = d.se * d.se + i.se * i.se + 2.0 * cov / n;
    if (var < 0.0) var = 0.0;
    return make_estimate(Estimand::TE, std::nullopt, d.point + i.point, std::sqrt(var), alpha, "ols");
}

EffectEstimate OlsEngine::dm(int j, double alpha) const {
    const double n = static_cast<double>(ds_->n());
    const double s_beta_jj = sum_eps_y_sq_ * gg_m_(j, j);
    const double s_theta_jj = gg_a_c_ * sum_em_outer_(j, j);
    const double var = beta_ym_(j) * beta_ym_(j) * s_theta_jj + theta_ma_(j) * theta_ma_(j) * s_beta_jj;
    const double point = beta_ym_(j) * theta_ma_(j);
    return make_estimate(Estimand::DM, j, point, std::sqrt(var / n), alpha, "ols");
}

double OlsEngine::tm_single(int j, const Dag& g) const {
    return theta_ma_(j) * reg_coef_first(j, parents_of(g, j));
}

double OlsEngine::im_single(int j, const Dag& g) const {
    return theta_ma_(j) * (reg_coef_first(j, parents_of(g, j)) - beta_ym_(j));
}

double OlsEngine::im_avg_point(int j, const std::vector<Dag>& mec) const {
    if (mec.empty()) throw std::invalid_argument("im_avg: empty MEC");
    double acc = 0.0;
    for (const auto& g : mec) acc += im_single(j, g);
    return acc / static_cast<double>(mec.size());
}

double OlsEngine::tm_avg_point(int j, const std::vector<Dag>& mec) const {
    double acc = 0.0;
    for (const auto& g : mec) acc += tm_single(j, g);
    return acc / static_cast<double>(mec.size());
}

// Variance of sqrt(n)(IM_avg - IM): per-observation influence combining the
// W^(j) terms over distinct parent sets (multiplicities m_r / L), the
// beta_YM,j regression influence, and the theta_MA,j influence scaled by the
// reduced-form error variance from the first MEC member's B_MM fit.
double OlsEngine::sigma2_im(int j, const std::vector<Dag>& mec) const {
    const Dataset& ds = *ds_;
    const Eigen::Index n = ds.n(), tc = ds.c_matrix.cols();
    const double nn = static_cast<double>(n);
    const Eigen::Index p = ds.p();

    // Distinct parent sets with multiplicities.
    std::map<std::vector<int>, int> counts;
    for (const auto& g : mec) {
        auto pa = parents_of(g, j);
        std::sort(pa.begin(), pa.end());
        counts[pa] += 1;
    }
    const double L = static_cast<double>(mec.size());

    // W_i: influence of the MEC-averaged first regression coefficient.
    Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
    const double ybar = ds.y_vector.mean();
    for (const auto& [pa, cnt] : counts) {
        // X_S = (M_j, Pa, A, C), centered; moments with divisor n.
        const Eigen::Index k = 1 + static_cast<Eigen::Index>(pa.size()) + 1 + tc;
        Eigen::MatrixXd xs(n, k);
        Eigen::Index col = 0;
        xs.col(col++) = ds.m_matrix.col(j);
        for (int q : pa) xs.col(col++) = ds.m_matrix.col(q);
        xs.col(col++) = ds.a_vector;
        for (Eigen::Index q = 0; q < tc; ++q) xs.col(col++) = ds.c_matrix.col(q);
        const Eigen::RowVectorXd mu = xs.colwise().mean();
        const Eigen::MatrixXd xc = xs.rowwise() - mu;
        const Eigen::MatrixXd sigma = xc.transpose() * xc / nn;
        const Eigen::VectorXd sig_ys = xc.transpose() * (ds.y_vector.array() - ybar).matrix() / nn;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(sigma);
        if (ldlt.info() != Eigen::Success)
            throw std::runtime_error("sigma2_im: singular moment matrix");
        const Eigen::VectorXd first_row = ldlt.solve(Eigen::VectorXd::Unit(k, 0));
        const Eigen::VectorXd proj = ldlt.solve(sig_ys);
        const double weight = static_cast<double>(cnt) / L;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double lin = xc.row(i).dot(first_row);
            const double resid = (ds.y_vector(i) - ybar) - xc.row(i).dot(proj);
            w(i) += weight * lin * resid;
        }
    }

    // xi_tilde_j: MEC-average of the fitted first coefficients.
    double xi = 0.0;
    for (const auto& g : mec) xi += reg_coef_first(j, parents_of(g, j));
    xi /= L;

    // B_MM and structural residuals from the first MEC member.
    const Dag& g0 = mec.front();
    Eigen::MatrixXd b_mm = Eigen::MatrixXd::Zero(p, p);
    Eigen::MatrixXd eps_m(n, p);
    Eigen::VectorXd s2(p);
    for (Eigen::Index k = 0; k < p; ++k) {
        const auto pa = parents_of(g0, static_cast<int>(k));
        Eigen::MatrixXd x(n, 2 + tc + static_cast<Eigen::Index>(pa.size()));
        Eigen::Index col = 0;
        x.col(col++).setOnes();
        for (Eigen::Index q = 0; q < tc; ++q) x.col(col++) = ds.c_matrix.col(q);
        x.col(col++) = ds.a_vector;
        for (int q : pa) x.col(col++) = ds.m_matrix.col(q);
        const OlsFit fit = ols_fit(x, ds.m_matrix.col(k));
        for (std::size_t q = 0; q < pa.size(); ++q)
            b_mm(pa[q], k) = fit.coefficients(2 + tc + static_cast<Eigen::Index>(q));
        eps_m.col(k) = fit.residuals;
        s2(k) = fit.residuals.squaredNorm() / static_cast<double>(n - x.cols());
    }
    const Eigen::MatrixXd ib = Eigen::MatrixXd::Identity(p, p) - b_mm.transpose();
    const Eigen::MatrixXd ib_inv = ib.inverse();
    const Eigen::MatrixXd var_em = ib_inv * s2.asDiagonal() * ib_inv.transpose();
    const double red_sd_j = std::sqrt(std::max(var_em(j, j), 0.0));

    // Per-observation influence scale factors (sqrt(n)-scaled Gamma products).
    const double beta_scale = std::sqrt(nn * gg_m_(j, j));
    const double theta_scale = std::sqrt(nn * gg_a_c_);
    const double sj = std::sqrt(s2(j));

    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double term_theta_block = theta_ma_(j) * (w(i) + beta_scale * resid_y_(i));
        const double term_xi = (xi - beta_ym_(j)) * theta_scale * red_sd_j * (eps_m(i, j) / sj);
        const double v = term_theta_block + term_xi;
        acc += v * v;
    }
    return acc / nn;
}

EffectEstimate OlsEngine::im_avg_analytic(int j, const std::vector<Dag>& mec, double alpha) const {
    const double point = im_avg_point(j, mec);
    const double se = std::sqrt(sigma2_im(j, mec) / static_cast<double>(ds_->n()));
    return make_estimate(Estimand::IM, j, point, se, alpha, "ols");
}

EffectEstimate OlsEngine::tm_avg_analytic(int j, const std::vector<Dag>& mec, double alpha) const {
    // TM = DM + IM per DAG; the IM variance dominates and shares the DM
    // influence pieces, so reuse the IM machinery shifted by DM.
    const EffectEstimate im = im_avg_analytic(j, mec, alpha);
    const EffectEstimate dmj = dm(j, alpha);
    const double point = tm_avg_point(j, mec);
    const double se = std::sqrt(im.se * im.se + dmj.se * dmj.se);
    return make_estimate(Estimand::TM, j, point, se, alpha, "ols");
}

}  // namespace causalmed
