#include "causalmed/linmodel.hpp"

#include <cmath>
#include <stdexcept>

namespace causalmed {

namespace {
constexpr double kRidgeJitter = 1e-10;
constexpr double kLogTwoPi = 1.8378770664093454836;
}  // namespace

OlsFit ols_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& response) {
    const Eigen::Index n = design.rows(), k = design.cols();
    if (response.size() != n) throw std::invalid_argument("ols_fit: row mismatch");
    if (n <= k) throw std::invalid_argument("ols_fit: need n > k");

    OlsFit fit;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() == k) {
        fit.coefficients = qr.solve(response);
    } else {
        Eigen::MatrixXd gram = design.transpose() * design;
        gram.diagonal().array() += kRidgeJitter;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
        if (ldlt.info() != Eigen::Success)
            throw std::runtime_error("ols_fit: rank-deficient design beyond jitter tolerance");
        fit.coefficients = ldlt.solve(design.transpose() * response);
        if (!fit.coefficients.allFinite())
            throw std::runtime_error("ols_fit: rank-deficient design beyond jitter tolerance");
    }
    fit.residuals = response - design * fit.coefficients;
    fit.fitted = response - fit.residuals;
    return fit;
}

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& x) {
    Eigen::MatrixXd out(x.rows(), x.cols() + 1);
    out.col(0).setOnes();
    out.rightCols(x.cols()) = x;
    return out;
}

Eigen::MatrixXd gamma_transform(const Eigen::MatrixXd& x_block,
                                const Eigen::MatrixXd& z_block) {
    const Eigen::Index n = x_block.rows();
    Eigen::MatrixXd x_res = x_block;
    if (z_block.cols() > 0) {
        if (z_block.rows() != n) throw std::invalid_argument("gamma_transform: row mismatch");
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(z_block);
        if (qr.rank() < z_block.cols())
            throw std::runtime_error("gamma_transform: singular z block");
        x_res -= z_block * qr.solve(x_block);
    }
    Eigen::MatrixXd gram = x_res.transpose() * x_res;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    Eigen::MatrixXd out = ldlt.solve(x_res.transpose());
    if (ldlt.info() != Eigen::Success || !out.allFinite()) {
        gram.diagonal().array() += kRidgeJitter;
        Eigen::LDLT<Eigen::MatrixXd> retry(gram);
        out = retry.solve(x_res.transpose());
        if (retry.info() != Eigen::Success || !out.allFinite())
            throw std::runtime_error("gamma_transform: singular stacked design");
    }
    return out;
}

namespace {

std::vector<int> complement(Eigen::Index dim, const std::vector<int>& idx) {
    std::vector<char> in(static_cast<std::size_t>(dim), 0);
    for (int i : idx) {
        if (i < 0 || i >= dim) throw std::invalid_argument("gaussian: index out of range");
        in[static_cast<std::size_t>(i)] = 1;
    }
    std::vector<int> out;
    for (Eigen::Index i = 0; i < dim; ++i)
        if (!in[static_cast<std::size_t>(i)]) out.push_back(static_cast<int>(i));
    return out;
}

Eigen::MatrixXd submatrix(const Eigen::MatrixXd& m, const std::vector<int>& rows,
                          const std::vector<int>& cols) {
    Eigen::MatrixXd out(rows.size(), cols.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(rows[i], cols[j]);
    return out;
}

Eigen::VectorXd subvector(const Eigen::VectorXd& v, const std::vector<int>& idx) {
    Eigen::VectorXd out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(idx[i]);
    return out;
}

Eigen::LDLT<Eigen::MatrixXd> solve_spd(const Eigen::MatrixXd& m, const char* what) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) return ldlt;
    Eigen::MatrixXd jittered = m;
    jittered.diagonal().array() += kRidgeJitter;
    Eigen::LDLT<Eigen::MatrixXd> retry(jittered);
    if (retry.info() != Eigen::Success)
        throw std::runtime_error(std::string(what) + ": singular covariance block");
    return retry;
}

}  // namespace

GaussianLaw gaussian_condition(const GaussianLaw& law, const std::vector<int>& given,
                               const Eigen::VectorXd& values) {
    if (static_cast<Eigen::Index>(given.size()) != values.size())
        throw std::invalid_argument("gaussian_condition: index/value size mismatch");
    const auto keep = complement(law.dim(), given);
    if (given.empty()) return gaussian_marginal(law, keep);

    const Eigen::MatrixXd s11 = submatrix(law.cov, keep, keep);
    const Eigen::MatrixXd s12 = submatrix(law.cov, keep, given);
    const Eigen::MatrixXd s22 = submatrix(law.cov, given, given);
    auto ldlt = solve_spd(s22, "gaussian_condition");
    const Eigen::VectorXd delta = values - subvector(law.mean, given);

    GaussianLaw out;
    out.mean = subvector(law.mean, keep) + s12 * ldlt.solve(delta);
    Eigen::MatrixXd cov = s11 - s12 * ldlt.solve(s12.transpose());
    out.cov = 0.5 * (cov + cov.transpose());
    return out;
}

GaussianLaw gaussian_marginal(const GaussianLaw& law, const std::vector<int>& keep) {
    GaussianLaw out;
    out.mean = subvector(law.mean, keep);
    out.cov = submatrix(law.cov, keep, keep);
    return out;
}

double gaussian_log_density(const Eigen::VectorXd& x, const GaussianLaw& law) {
    if (x.size() != law.dim()) throw std::invalid_argument("gaussian_density: dimension mismatch");
    if (law.dim() == 0) return 0.0;
    auto ldlt = solve_spd(law.cov, "gaussian_density");
    const Eigen::VectorXd d = x - law.mean;
    const double quad = d.dot(ldlt.solve(d));
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < law.dim(); ++i) {
        const double piv = ldlt.vectorD()(i);
        if (piv <= 0.0) throw std::runtime_error("gaussian_density: covariance not positive definite");
        logdet += std::log(piv);
    }
    return -0.5 * (law.dim() * kLogTwoPi + logdet + quad);
}

double gaussian_density(const Eigen::VectorXd& x, const GaussianLaw& law) {
    return std::exp(gaussian_log_density(x, law));
}

}  // namespace causalmed
