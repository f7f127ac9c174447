#pragma once

#include <Eigen/Dense>
#include <vector>

namespace causalmed {

struct OlsFit {
    Eigen::VectorXd coefficients;
    Eigen::VectorXd residuals;  // response - fitted
    Eigen::VectorXd fitted;     // fitted == response - residuals by construction
};

// Least squares via column-pivoted QR; on rank deficiency retries once with
// ridge jitter 1e-10 on the normal equations, then throws.
OlsFit ols_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& response);

// Prepends a column of ones.
Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& x);

// Partitioned-regression operator [X'(I-Pz)X]^{-1} X'(I-Pz), shape k1 x n.
// Empty z gives the plain OLS operator (X'X)^{-1}X'.
Eigen::MatrixXd gamma_transform(const Eigen::MatrixXd& x_block,
                                const Eigen::MatrixXd& z_block);

struct GaussianLaw {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;

    Eigen::Index dim() const { return mean.size(); }
};

// Conditional law of the remaining coordinates given law[idx] = values
// (Schur complement). Covariance is symmetrized after the complement.
GaussianLaw gaussian_condition(const GaussianLaw& law, const std::vector<int>& given,
                               const Eigen::VectorXd& values);

GaussianLaw gaussian_marginal(const GaussianLaw& law, const std::vector<int>& keep);

double gaussian_log_density(const Eigen::VectorXd& x, const GaussianLaw& law);
double gaussian_density(const Eigen::VectorXd& x, const GaussianLaw& law);

}  // namespace causalmed
