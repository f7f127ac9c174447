// Timing harness: OpenMP kernels against their serial references, and the
// closed-form path against the Monte Carlo path.
//
//   bench_kernels [n] [mc_n]

#include <chrono>
#include <cstdio>
#include <cstdlib>

#include "causalmed/effects_qr.hpp"
#include "causalmed/sim.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace causalmed;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <typename F>
double time_best_of(int reps, F&& f) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = Clock::now();
        f();
        best = std::min(best, seconds_since(t0));
    }
    return best;
}

}  // namespace

int main(int argc, char** argv) {
    const int n = argc > 1 ? std::atoi(argv[1]) : 1000;
    const int mc_n = argc > 2 ? std::atoi(argv[2]) : 100;
#ifdef _OPENMP
    const int max_threads = omp_get_max_threads();
#else
    const int max_threads = 1;
#endif

    const SemiLinearTruth truth = random_er_truth(4, 3, 2024);
    const Dataset ds = gen_scenario(truth, Scenario::AllCorrect, n, 2025);
    const auto mec = enumerate_mec(cpdag_of_dag(truth.mediator_dag()));
    const int j = truth.target_j;
    NuisanceBundle bundle = fit_bundle(ds);
    std::vector<std::vector<int>> ps;
    for (const auto& g : mec) ps.push_back(parents_of(g, j));
    ensure_parent_means(bundle, ds, ps, j);

    std::printf("n=%d  p=4  |MEC|=%zu  mc_n=%d  threads=%d\n", n, mec.size(), mc_n, max_threads);

    QrOptions mc;
    mc.mode = IntegralMode::MonteCarlo;
    mc.mc_n = mc_n;
    mc.seed = 3;

    QrOptions fast = mc;
    fast.mode = IntegralMode::ClosedForm;

    // Serial reference vs OpenMP kernel on the Monte Carlo score pass.
    const double t_serial = time_best_of(3, [&] {
        per_obs_scores_serial(ds, bundle, mec, j, mc);
    });
    QrOptions mc_par = mc;
    mc_par.threads = max_threads;
    const double t_parallel = time_best_of(3, [&] {
        per_obs_scores(ds, bundle, mec, j, mc_par);
    });
    std::printf("mc scores   serial   %8.4f s\n", t_serial);
    std::printf("mc scores   parallel %8.4f s   speedup %.2fx\n", t_parallel,
                t_serial / t_parallel);

    // Closed-form (fast) path against the Monte Carlo path.
    const double t_fast = time_best_of(3, [&] {
        per_obs_scores_serial(ds, bundle, mec, j, fast);
    });
    std::printf("fast scores serial   %8.4f s   vs mc %.1fx faster\n", t_fast,
                t_serial / t_fast);

    // Bootstrap: serial vs parallel replicates.
    auto estimator = [&](const Dataset& boot) {
        NuisanceBundle bb = fit_bundle(boot);
        ensure_parent_means(bb, boot, ps, j);
        const MediatorEffects eff = mediator_effects(boot, bb, mec, j, Strategy::QR, fast);
        return std::make_pair(eff.dm, eff.dm_se);
    };
    const MediatorEffects full = mediator_effects(ds, bundle, mec, j, Strategy::QR, fast);
    const double tb_serial = time_best_of(1, [&] {
        symmetric_t_bootstrap_serial(estimator, ds, 100, 0.05, 11, full.dm, full.dm_se);
    });
    const double tb_parallel = time_best_of(1, [&] {
        symmetric_t_bootstrap(estimator, ds, 100, 0.05, 11, full.dm, full.dm_se, max_threads);
    });
    std::printf("bootstrap   serial   %8.4f s\n", tb_serial);
    std::printf("bootstrap   parallel %8.4f s   speedup %.2fx\n", tb_parallel,
                tb_serial / tb_parallel);
    return 0;
}
