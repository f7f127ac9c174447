#include <doctest.h>

// The OpenMP kernels must agree bit-for-bit with their serial reference
// implementations: per-unit work is seeded from (master seed, unit index)
// and reductions run over filled buffers in a fixed order.

#include "causalmed/discovery.hpp"
#include "causalmed/effects_qr.hpp"
#include "causalmed/sim.hpp"
#include "oracles.hpp"

using namespace causalmed;

namespace {

struct Fixture {
    SemiLinearTruth truth;
    Dataset ds;
    std::vector<Dag> mec;
    NuisanceBundle bundle;
    int j;

    Fixture()
        : truth(random_er_truth(3, 3, 424242)),
          ds(gen_scenario(truth, Scenario::AllCorrect, 400, 424243)),
          mec(enumerate_mec(cpdag_of_dag(truth.mediator_dag()))),
          bundle(fit_bundle(ds)),
          j(truth.target_j) {
        std::vector<std::vector<int>> ps;
        for (const auto& g : mec) ps.push_back(parents_of(g, j));
        ensure_parent_means(bundle, ds, ps, j);
    }
};

}  // namespace

TEST_CASE("score kernel: serial reference equals the parallel version bitwise") {
    const Fixture fx;
    for (IntegralMode mode : {IntegralMode::ClosedForm, IntegralMode::MonteCarlo}) {
        QrOptions opts;
        opts.mode = mode;
        opts.mc_n = 60;
        opts.seed = 9;
        opts.threads = 8;
        const PerObsScores par = per_obs_scores(fx.ds, fx.bundle, fx.mec, fx.j, opts);
        const PerObsScores ser = per_obs_scores_serial(fx.ds, fx.bundle, fx.mec, fx.j, opts);
        CHECK((par.qr_dm_plugin - ser.qr_dm_plugin).cwiseAbs().maxCoeff() == 0.0);
        CHECK((par.qr_dm_corr - ser.qr_dm_corr).cwiseAbs().maxCoeff() == 0.0);
        CHECK((par.m1_dm - ser.m1_dm).cwiseAbs().maxCoeff() == 0.0);
        for (std::size_t g = 0; g < fx.mec.size(); ++g) {
            CHECK((par.qr_tm_corr[g] - ser.qr_tm_corr[g]).cwiseAbs().maxCoeff() == 0.0);
            CHECK((par.m3_tm[g] - ser.m3_tm[g]).cwiseAbs().maxCoeff() == 0.0);
        }
    }
}

TEST_CASE("estimates are invariant to the thread count") {
    const Fixture fx;
    QrOptions one;
    one.mode = IntegralMode::MonteCarlo;
    one.mc_n = 40;
    one.seed = 5;
    one.threads = 1;
    QrOptions many = one;
    many.threads = 8;
    const MediatorEffects a = mediator_effects(fx.ds, fx.bundle, fx.mec, fx.j, Strategy::QR, one);
    const MediatorEffects b = mediator_effects(fx.ds, fx.bundle, fx.mec, fx.j, Strategy::QR, many);
    CHECK(a.dm == b.dm);
    CHECK(a.im_avg == b.im_avg);
    CHECK(a.dm_se == b.dm_se);
}

TEST_CASE("bootstrap: parallel replicates match the serial reference") {
    const Fixture fx;
    auto estimator = [](const Dataset& d) {
        const double mean = d.y_vector.mean();
        const double sd = std::sqrt((d.y_vector.array() - mean).square().sum()) /
                          static_cast<double>(d.n());
        return std::make_pair(mean, sd);
    };
    const auto [point, se] = estimator(fx.ds);
    const BootstrapCi par =
        symmetric_t_bootstrap(estimator, fx.ds, 120, 0.05, 77, point, se, 8);
    const BootstrapCi ser =
        symmetric_t_bootstrap_serial(estimator, fx.ds, 120, 0.05, 77, point, se);
    CHECK(par.quantile == ser.quantile);
    CHECK(par.ci_low == ser.ci_low);
    CHECK(par.ci_high == ser.ci_high);
}

TEST_CASE("PC skeleton decisions are thread-count invariant") {
    const Fixture fx;
    const Eigen::MatrixXd x = fx.ds.as_matrix();
    PcOptions a;
    a.threads = 1;
    PcOptions b;
    b.threads = 7;
    CHECK(pc_cpdag(x, a).adj == pc_cpdag(x, b).adj);
}
