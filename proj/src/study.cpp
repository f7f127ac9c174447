#include "causalmed/study.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "causalmed/discovery.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace causalmed {

const char* strategy_name(Strategy s) {
    switch (s) {
        case Strategy::M0: return "m0";
        case Strategy::M1: return "m1";
        case Strategy::M2: return "m2";
        case Strategy::M3: return "m3";
        case Strategy::QR: return "qr";
    }
    return "?";
}

std::vector<Dag> learn_mediator_mec(const Dataset& ds, double pc_alpha, int threads,
                                    bool* used_fallback) {
    PcOptions popts;
    popts.alpha = pc_alpha;
    popts.threads = threads;
    const Cpdag full = pc_cpdag(ds.as_matrix(), popts);
    // Mediator nodes occupy indices t .. t+p-1 of the (C, A, M, Y) order.
    Cpdag med = mediator_subgraph(full, static_cast<int>(ds.t()),
                                  static_cast<int>(ds.p()));
    if (used_fallback) *used_fallback = false;
    try {
        med = Cpdag{meek_closure(med.adj, /*strict=*/false)};
        return enumerate_mec(med);
    } catch (const std::exception&) {
        if (used_fallback) *used_fallback = true;
        // Deterministic repair: keep the directed part, orient the remaining
        // undirected edges from the lower to the higher index, and drop
        // whatever still closes a cycle.
        const int p = med.size();
        Adjacency adj(p);
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j)
                if (med.adj.directed(i, j)) adj.set(i, j, true);
        for (int i = 0; i < p; ++i)
            for (int j = i + 1; j < p; ++j)
                if (med.adj.undirected(i, j)) adj.set(i, j, true);
        // Remove edges participating in directed cycles, highest index first.
        while (!is_dag(adj)) {
            bool removed = false;
            for (int i = p - 1; i >= 0 && !removed; --i)
                for (int j = p - 1; j >= 0 && !removed; --j)
                    if (adj.at(i, j)) {
                        Adjacency trial = adj;
                        trial.set(i, j, false);
                        if (is_dag(trial)) {
                            adj = trial;
                            removed = true;
                        }
                    }
            if (!removed) {
                adj = Adjacency(p);
                break;
            }
        }
        return {Dag{adj}};
    }
}

namespace {

struct RepOutcome {
    // [strategy][0 = direct, 1 = indirect]
    std::array<std::array<double, 2>, 5> err{};
    bool fallback = false;
    bool ok = false;
};

int scenario_index(Scenario s) {
    switch (s) {
        case Scenario::AllCorrect: return 0;
        case Scenario::M0Correct: return 1;
        case Scenario::M1Correct: return 2;
        case Scenario::M2Correct: return 3;
        case Scenario::M3Correct: return 4;
        default: return -1;
    }
}

}  // namespace

Table1Result run_table1(const StudyOptions& opts) {
    Table1Result out;
    out.scenarios = {Scenario::AllCorrect, Scenario::M0Correct, Scenario::M1Correct,
                     Scenario::M2Correct, Scenario::M3Correct};

    const int n_scen = static_cast<int>(out.scenarios.size());
    std::vector<std::vector<RepOutcome>> results(
        static_cast<std::size_t>(n_scen),
        std::vector<RepOutcome>(static_cast<std::size_t>(opts.reps)));

    // One generating truth for the whole table; replicates redraw the data
    // only, so each cell's bias keeps a fixed sign.
    const SemiLinearTruth truth = random_er_truth(opts.p, opts.t, derive_seed(opts.seed, 0x7A1ULL));
    const int j = truth.target_j;
    std::vector<TrueEffects> targets(static_cast<std::size_t>(n_scen));
    for (int si = 0; si < n_scen; ++si)
        targets[static_cast<std::size_t>(si)] =
            true_effects(truth, out.scenarios[static_cast<std::size_t>(si)], j, opts.truth_level);

#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(dynamic) \
    num_threads(opts.threads > 0 ? opts.threads : omp_get_max_threads())
#endif
    for (int si = 0; si < n_scen; ++si) {
        for (int rep = 0; rep < opts.reps; ++rep) {
            const Scenario scenario = out.scenarios[static_cast<std::size_t>(si)];
            RepOutcome& res = results[static_cast<std::size_t>(si)][static_cast<std::size_t>(rep)];
            try {
                const std::uint64_t rep_seed = derive_seed(opts.seed, static_cast<std::uint64_t>(rep));
                const TrueEffects& target = targets[static_cast<std::size_t>(si)];

                const Dataset ds = gen_scenario(truth, scenario, opts.n,
                                                derive_seed(rep_seed, 701 + static_cast<std::uint64_t>(si)));
                bool fb = false;
                const std::vector<Dag> mec = learn_mediator_mec(ds, opts.pc_alpha, 1, &fb);
                res.fallback = fb;

                NuisanceBundle bundle = fit_bundle(ds);
                std::vector<std::vector<int>> parent_sets;
                for (const auto& g : mec) parent_sets.push_back(parents_of(g, j));
                ensure_parent_means(bundle, ds, parent_sets, j);

                QrOptions qopts;
                qopts.mode = IntegralMode::ClosedForm;
                qopts.truncate = true;
                qopts.seed = derive_seed(rep_seed, 900);
                qopts.threads = 1;
                const PerObsScores rows = per_obs_scores_serial(ds, bundle, mec, j, qopts);
                for (std::size_t k = 0; k < kStrategies.size(); ++k) {
                    const MediatorEffects eff =
                        assemble_effects(rows, kStrategies[k], true, ds.n());
                    res.err[k][0] = eff.dm - target.dm;
                    res.err[k][1] = eff.im_avg - target.im_avg;
                }
                res.ok = true;
            } catch (const std::exception&) {
                res.ok = false;
            }
        }
    }

    for (int si = 0; si < n_scen; ++si) {
        int fallbacks = 0;
        for (std::size_t k = 0; k < kStrategies.size(); ++k) {
            for (int side = 0; side < 2; ++side) {
                double sum = 0.0;
                int count = 0;
                for (int rep = 0; rep < opts.reps; ++rep) {
                    const RepOutcome& r = results[static_cast<std::size_t>(si)][static_cast<std::size_t>(rep)];
                    if (!r.ok) continue;
                    sum += r.err[k][static_cast<std::size_t>(side)];
                    ++count;
                }
                BiasCell cell;
                cell.reps = count;
                cell.mean_bias = count > 0 ? sum / count : 0.0;
                double ss = 0.0;
                for (int rep = 0; rep < opts.reps; ++rep) {
                    const RepOutcome& r = results[static_cast<std::size_t>(si)][static_cast<std::size_t>(rep)];
                    if (!r.ok) continue;
                    const double d = r.err[k][static_cast<std::size_t>(side)] - cell.mean_bias;
                    ss += d * d;
                }
                cell.sd = count > 1 ? std::sqrt(ss / (count - 1)) : 0.0;
                out.cells[k][static_cast<std::size_t>(si)][static_cast<std::size_t>(side)] = cell;
            }
        }
        for (int rep = 0; rep < opts.reps; ++rep)
            if (results[static_cast<std::size_t>(si)][static_cast<std::size_t>(rep)].fallback) ++fallbacks;
        out.graph_fallbacks += fallbacks;
    }
    return out;
}

Figure1Result run_figure1(const StudyOptions& opts, bool discrete) {
    Figure1Result out;
    const Scenario scenario = discrete ? Scenario::DiscreteAll : Scenario::ContinuousAll;
    const SemiLinearTruth truth = random_er_truth(opts.p, opts.t, opts.seed, /*hetero=*/true);

    // One fixed truth; per-mediator targets from the quadrature engine.
    std::vector<double> dm_truth(static_cast<std::size_t>(opts.p));
    std::vector<double> im_truth(static_cast<std::size_t>(opts.p));
    for (int j = 0; j < opts.p; ++j) {
        const TrueEffects te = true_effects(truth, scenario, j, opts.truth_level);
        dm_truth[static_cast<std::size_t>(j)] = te.dm;
        im_truth[static_cast<std::size_t>(j)] = te.im_avg;
        out.truth_quad_error = std::max(out.truth_quad_error, te.quad_error);
    }

    // err[rep][strategy][j][side]
    struct RepErr {
        std::vector<std::array<std::array<double, 2>, 5>> per_j;
        bool ok = false;
    };
    std::vector<RepErr> results(static_cast<std::size_t>(opts.reps));

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) \
    num_threads(opts.threads > 0 ? opts.threads : omp_get_max_threads())
#endif
    for (int rep = 0; rep < opts.reps; ++rep) {
        RepErr& res = results[static_cast<std::size_t>(rep)];
        res.per_j.assign(static_cast<std::size_t>(opts.p), {});
        try {
            const std::uint64_t rep_seed = derive_seed(opts.seed, 5000 + static_cast<std::uint64_t>(rep));
            const Dataset ds = gen_scenario(truth, scenario, opts.n, rep_seed);
            bool fb = false;
            const std::vector<Dag> mec = learn_mediator_mec(ds, opts.pc_alpha, 1, &fb);

            BundleOptions bopts;
            bopts.discrete_mediators = discrete;
            NuisanceBundle bundle = fit_bundle(ds, bopts);

            for (int j = 0; j < opts.p; ++j) {
                std::vector<std::vector<int>> parent_sets;
                for (const auto& g : mec) parent_sets.push_back(parents_of(g, j));
                ensure_parent_means(bundle, ds, parent_sets, j);

                QrOptions qopts;
                qopts.mode = IntegralMode::ClosedForm;
                qopts.truncate = true;
                qopts.seed = derive_seed(rep_seed, static_cast<std::uint64_t>(j));
                qopts.threads = 1;
                const PerObsScores rows = per_obs_scores_serial(ds, bundle, mec, j, qopts);
                for (std::size_t k = 0; k < kStrategies.size(); ++k) {
                    const MediatorEffects eff = assemble_effects(rows, kStrategies[k], true, ds.n());
                    res.per_j[static_cast<std::size_t>(j)][k][0] = eff.dm;
                    res.per_j[static_cast<std::size_t>(j)][k][1] = eff.im_avg;
                }
            }
            res.ok = true;
        } catch (const std::exception&) {
            res.ok = false;
        }
    }

    for (int j = 0; j < opts.p; ++j) {
        for (std::size_t k = 0; k < kStrategies.size(); ++k) {
            for (int side = 0; side < 2; ++side) {
                double sum = 0.0;
                int count = 0;
                for (const auto& r : results) {
                    if (!r.ok) continue;
                    sum += r.per_j[static_cast<std::size_t>(j)][k][static_cast<std::size_t>(side)];
                    ++count;
                }
                Figure1Row row;
                row.mediator = j;
                row.direct = side == 0;
                row.strategy = kStrategies[k];
                row.mean = count > 0 ? sum / count : 0.0;
                double ss = 0.0;
                for (const auto& r : results) {
                    if (!r.ok) continue;
                    const double d =
                        r.per_j[static_cast<std::size_t>(j)][k][static_cast<std::size_t>(side)] - row.mean;
                    ss += d * d;
                }
                row.sd = count > 1 ? std::sqrt(ss / (count - 1)) : 0.0;
                row.truth = side == 0 ? dm_truth[static_cast<std::size_t>(j)]
                                      : im_truth[static_cast<std::size_t>(j)];
                out.rows.push_back(row);
            }
        }
    }
    return out;
}

}  // namespace causalmed
