#pragma once

#include <Eigen/Dense>
#include <map>
#include <vector>

#include "causalmed/dataset.hpp"
#include "causalmed/effects.hpp"
#include "causalmed/graph.hpp"

namespace causalmed {

// Shared regression state for the closed-form estimators: the outcome
// regression Y ~ (1, C, A, M), the mediator regression M ~ (1, C, A), and the
// partitioned-regression products entering the analytic variances.
class OlsEngine {
  public:
    explicit OlsEngine(const Dataset& ds);

    const Dataset& data() const { return *ds_; }

    // Outcome regression coefficients.
    const Eigen::VectorXd& beta_yc() const { return beta_yc_; }
    double alpha_ya() const { return alpha_ya_; }
    const Eigen::VectorXd& beta_ym() const { return beta_ym_; }
    const Eigen::VectorXd& resid_y() const { return resid_y_; }

    // Mediator regression coefficients (row j = mediator j).
    const Eigen::MatrixXd& theta_mc() const { return theta_mc_; }
    const Eigen::VectorXd& theta_ma() const { return theta_ma_; }
    const Eigen::MatrixXd& resid_m() const { return resid_m_; }

    // First coefficient of Y ~ (1, M_j, Pa, A, C); cached per parent set.
    double reg_coef_first(int j, const std::vector<int>& parents) const;

    EffectEstimate de(double alpha) const;
    EffectEstimate ie(double alpha) const;
    EffectEstimate te(double alpha) const;
    EffectEstimate dm(int j, double alpha) const;

    // Per-DAG values over an explicit MEC.
    double tm_single(int j, const Dag& mediator_dag) const;
    double im_single(int j, const Dag& mediator_dag) const;

    // MEC-averaged IM with the analytic influence-function variance (W^(j) terms,
    // B_MM from the first MEC member's per-node parent regressions).
    EffectEstimate im_avg_analytic(int j, const std::vector<Dag>& mec, double alpha) const;
    EffectEstimate tm_avg_analytic(int j, const std::vector<Dag>& mec, double alpha) const;

    double im_avg_point(int j, const std::vector<Dag>& mec) const;
    double tm_avg_point(int j, const std::vector<Dag>& mec) const;

  private:
    double sigma2_im(int j, const std::vector<Dag>& mec) const;

    const Dataset* ds_;
    Eigen::VectorXd beta_yc_;
    double alpha_ya_ = 0.0;
    Eigen::VectorXd beta_ym_;
    Eigen::VectorXd resid_y_;
    Eigen::MatrixXd theta_mc_;
    Eigen::VectorXd theta_ma_;
    Eigen::MatrixXd resid_m_;

    double sum_eps_y_sq_ = 0.0;
    Eigen::MatrixXd sum_em_outer_;
    double gg_a_ = 0.0;        // Gamma_{A,(M,C,1)} Gamma'
    Eigen::MatrixXd gg_m_;     // Gamma_{M,(C,A,1)} Gamma'
    double gg_a_c_ = 0.0;      // Gamma_{A,(C,1)} Gamma'
    Eigen::VectorXd gg_am_;    // Gamma_{A,(M,C,1)} Gamma_{M,(C,A,1)}'

    mutable std::map<std::pair<int, std::vector<int>>, double> coef_cache_;
};

}  // namespace causalmed
