// causalmed: interventional mediation effects on causal graphs.
//
// Subcommands: discover (CPDAG estimation), estimate (effect estimation),
// simulate (synthetic data with a truth manifest), replicate (the built-in
// simulation studies).

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "causalmed/dataset.hpp"
#include "causalmed/discovery.hpp"
#include "causalmed/effects.hpp"
#include "causalmed/effects_ols.hpp"
#include "causalmed/effects_qr.hpp"
#include "causalmed/graph.hpp"
#include "causalmed/study.hpp"

using json = nlohmann::ordered_json;
using namespace causalmed;

namespace {

constexpr const char* kSchemaHeader = "# causalmed effects v1";

struct RoleFlags {
    std::vector<std::string> confounders;
    std::string exposure;
    std::vector<std::string> mediators;
    std::string outcome;

    std::map<std::string, Role> to_map() const {
        std::map<std::string, Role> roles;
        for (const auto& c : confounders) roles[c] = Role::Confounder;
        roles[exposure] = Role::Exposure;
        for (const auto& m : mediators) roles[m] = Role::Mediator;
        roles[outcome] = Role::Outcome;
        return roles;
    }
};

void add_role_flags(CLI::App* cmd, RoleFlags& roles, std::string& input) {
    cmd->add_option("--input", input, "input CSV with a header row")
        ->required()
        ->envname("CAUSALMED_INPUT");
    cmd->add_option("--confounders", roles.confounders, "confounder column names")
        ->delimiter(',')
        ->envname("CAUSALMED_CONFOUNDERS");
    cmd->add_option("--exposure", roles.exposure, "binary exposure column")
        ->required()
        ->envname("CAUSALMED_EXPOSURE");
    cmd->add_option("--mediators", roles.mediators, "mediator column names")
        ->required()
        ->delimiter(',')
        ->envname("CAUSALMED_MEDIATORS");
    cmd->add_option("--outcome", roles.outcome, "outcome column")
        ->required()
        ->envname("CAUSALMED_OUTCOME");
}

struct EffectRow {
    std::string estimand;
    int j = -1;  // 1-based in output; -1 = none
    double point = 0.0, se = 0.0, lo = 0.0, hi = 0.0;
    std::string method;
    std::string note;
};

void write_rows(const std::vector<EffectRow>& rows, const std::string& out,
                const std::string& format,
                const std::vector<std::pair<std::string, std::string>>& meta) {
    std::ostringstream body;
    if (format == "json") {
        json doc;
        doc["schema"] = kSchemaHeader;
        for (const auto& [k, v] : meta) doc[k] = v;
        doc["effects"] = json::array();
        for (const auto& r : rows) {
            json e;
            e["estimand"] = r.estimand;
            if (r.j >= 0) e["mediator"] = r.j;
            e["point"] = r.point;
            e["se"] = r.se;
            e["ci_low"] = r.lo;
            e["ci_high"] = r.hi;
            e["method"] = r.method;
            if (!r.note.empty()) e["note"] = r.note;
            doc["effects"].push_back(e);
        }
        body << doc.dump(2) << "\n";
    } else {
        body << kSchemaHeader << "\n";
        for (const auto& [k, v] : meta) body << "# " << k << "=" << v << "\n";
        body << "estimand,mediator,point,se,ci_low,ci_high,method,note\n";
        char buf[512];
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof buf, "%s,%s,%.17g,%.17g,%.17g,%.17g,%s,%s\n",
                          r.estimand.c_str(), r.j >= 0 ? std::to_string(r.j).c_str() : "",
                          r.point, r.se, r.lo, r.hi, r.method.c_str(), r.note.c_str());
            body << buf;
        }
    }
    if (out.empty() || out == "-") {
        std::cout << body.str();
    } else {
        std::ofstream f(out);
        if (!f) throw std::invalid_argument("cannot open output file: " + out);
        f << body.str();
    }
}

std::vector<Dag> mec_from_config(const Dataset& ds, const std::string& graph_source,
                                 double alpha, int threads, std::string* mec_note) {
    if (graph_source.empty() || graph_source == "learn") {
        bool fb = false;
        auto mec = learn_mediator_mec(ds, alpha, threads, &fb);
        if (mec_note) *mec_note = fb ? "learned-graph-repaired" : "learned";
        return mec;
    }
    const Adjacency adj = read_adjacency_csv(graph_source);
    if (adj.size() != ds.p())
        throw std::invalid_argument("--graph adjacency size does not match the mediator count");
    bool all_directed = true;
    for (int i = 0; i < adj.size(); ++i)
        for (int k = 0; k < adj.size(); ++k)
            if (adj.undirected(i, k)) all_directed = false;
    if (all_directed && is_dag(adj)) {
        // A supplied DAG is its own singleton class.
        if (mec_note) *mec_note = "supplied-dag";
        return {Dag{adj}};
    }
    if (mec_note) *mec_note = "supplied-cpdag";
    return enumerate_mec(Cpdag{meek_closure(adj, false)});
}

int cmd_discover(const std::string& input, const RoleFlags& roles, double alpha,
                 const std::string& out, int threads, const std::string& format) {
    const Dataset ds = load_csv(input, roles.to_map());
    PcOptions popts;
    popts.alpha = alpha;
    popts.threads = threads;
    const Cpdag full = pc_cpdag(ds.as_matrix(), popts);
    const Cpdag med = mediator_subgraph(full, static_cast<int>(ds.t()),
                                        static_cast<int>(ds.p()));
    const std::string base = out.empty() ? "discover" : out;
    write_adjacency_csv(full.adj, base + "_cpdag.csv");
    write_adjacency_csv(med.adj, base + "_cpdag_m.csv");

    std::size_t mec_size = 0;
    std::string note = "ok";
    try {
        mec_size = enumerate_mec(Cpdag{meek_closure(med.adj, false)}).size();
    } catch (const std::exception& e) {
        note = e.what();
    }
    if (format == "json") {
        json doc;
        doc["schema"] = kSchemaHeader;
        doc["cpdag"] = base + "_cpdag.csv";
        doc["cpdag_m"] = base + "_cpdag_m.csv";
        doc["mec_size"] = mec_size;
        doc["dropped_rows"] = ds.dropped_rows;
        doc["note"] = note;
        std::cout << doc.dump(2) << "\n";
    } else {
        std::cout << kSchemaHeader << "\n"
                  << "cpdag=" << base + "_cpdag.csv" << "\n"
                  << "cpdag_m=" << base + "_cpdag_m.csv" << "\n"
                  << "mec_size=" << mec_size << "\n"
                  << "dropped_rows=" << ds.dropped_rows << "\n"
                  << "note=" << note << "\n";
    }
    return 0;
}

int cmd_estimate(const std::string& input, const RoleFlags& roles, const std::string& method,
                 double alpha, int mc_n, int bootstrap_b, std::uint64_t seed,
                 const std::string& graph_source, bool truncate, bool centralize_data,
                 const std::string& out, const std::string& format, int threads,
                 double pc_alpha, bool discrete, bool bootstrap_relearn) {
    Dataset ds = load_csv(input, roles.to_map());
    if (centralize_data) ds = centralize(ds);

    std::string mec_note;
    const std::vector<Dag> mec = mec_from_config(ds, graph_source, pc_alpha, threads, &mec_note);

    std::vector<EffectRow> rows;
    std::vector<std::pair<std::string, std::string>> meta{
        {"method", method},
        {"n", std::to_string(ds.n())},
        {"dropped_rows", std::to_string(ds.dropped_rows)},
        {"mec_size", std::to_string(mec.size())},
        {"graph", mec_note},
        {"seed", std::to_string(seed)},
    };

    auto push = [&](const EffectEstimate& e, const std::string& note = "") {
        EffectRow r;
        r.estimand = estimand_name(e.estimand);
        r.j = e.mediator_index ? *e.mediator_index + 1 : -1;
        r.point = e.point;
        r.se = e.se;
        r.lo = e.ci_low;
        r.hi = e.ci_high;
        r.method = e.method;
        r.note = note;
        rows.push_back(r);
    };

    int failures = 0;
    if (method == "ols") {
        const OlsEngine eng(ds);
        push(eng.de(alpha));
        push(eng.ie(alpha));
        push(eng.te(alpha));
        for (int j = 0; j < ds.p(); ++j) {
            try {
                push(eng.dm(j, alpha));
                EffectEstimate tm = eng.tm_avg_analytic(j, mec, alpha);
                push(tm);
                if (bootstrap_b >= 50) {
                    // Bootstrap CI for the MEC-averaged IM (the default);
                    // the analytic interval stays available via
                    // --bootstrap-b 0.
                    EffectEstimate im = eng.im_avg_analytic(j, mec, alpha);
                    auto im_est = [&mec, j](const Dataset& boot) {
                        const OlsEngine e2(boot);
                        const EffectEstimate est = e2.im_avg_analytic(j, mec, 0.05);
                        return std::make_pair(est.point, est.se);
                    };
                    const BootstrapCi ci = symmetric_t_bootstrap(
                        im_est, ds, bootstrap_b, alpha,
                        derive_seed(seed, 31 + static_cast<std::uint64_t>(j)), im.point, im.se,
                        threads);
                    im.ci_low = ci.ci_low;
                    im.ci_high = ci.ci_high;
                    push(im, "ci=bootstrap");
                } else {
                    push(eng.im_avg_analytic(j, mec, alpha), "ci=analytic");
                }
            } catch (const std::exception& e) {
                ++failures;
                EffectRow r;
                r.estimand = "DM";
                r.j = j + 1;
                r.method = method;
                r.note = std::string("error: ") + e.what();
                rows.push_back(r);
            }
        }
    } else if (method == "qr" || method == "qr-fast" || method == "m0" || method == "m1" ||
               method == "m2" || method == "m3") {
        BundleOptions bopts;
        bopts.discrete_mediators = discrete;
        NuisanceBundle bundle = fit_bundle(ds, bopts);

        Strategy strategy = Strategy::QR;
        if (method == "m0") strategy = Strategy::M0;
        else if (method == "m1") strategy = Strategy::M1;
        else if (method == "m2") strategy = Strategy::M2;
        else if (method == "m3") strategy = Strategy::M3;

        QrOptions qopts;
        qopts.mc_n = mc_n;
        qopts.seed = seed;
        qopts.truncate = truncate;
        qopts.threads = threads;
        qopts.mode = method == "qr" ? IntegralMode::MonteCarlo : IntegralMode::ClosedForm;

        {
            const auto [te, te_se] = te_aipw(ds, bundle);
            EffectEstimate e;
            e.estimand = Estimand::TE;
            e.point = te;
            e.se = te_se;
            const double z = normal_quantile(1.0 - alpha / 2.0);
            e.ci_low = te - z * te_se;
            e.ci_high = te + z * te_se;
            e.level = alpha;
            e.method = method;
            push(e);
        }

        for (int j = 0; j < ds.p(); ++j) {
            try {
                std::vector<std::vector<int>> parent_sets;
                for (const auto& g : mec) parent_sets.push_back(parents_of(g, j));
                ensure_parent_means(bundle, ds, parent_sets, j);
                const MediatorEffects eff = mediator_effects(ds, bundle, mec, j, strategy, qopts);

                auto finish = [&](Estimand what, double point, double se) {
                    EffectEstimate e;
                    e.estimand = what;
                    e.mediator_index = j;
                    e.point = point;
                    e.se = se;
                    e.level = alpha;
                    e.method = method;
                    const double z = normal_quantile(1.0 - alpha / 2.0);
                    e.ci_low = point - z * se;
                    e.ci_high = point + z * se;
                    return e;
                };

                EffectEstimate dm = finish(Estimand::DM, eff.dm, eff.dm_se);
                EffectEstimate tm = finish(Estimand::TM, eff.tm_avg, eff.tm_se);
                EffectEstimate im = finish(Estimand::IM, eff.im_avg, eff.im_se);
                std::string note = "trunc=" + std::to_string(eff.truncation_count) +
                                   ";mec=" + std::to_string(mec.size());

                if (bootstrap_b >= 50) {
                    auto rerun = [&](const Dataset& boot, bool want_dm) {
                        // The learned structure is reused per replicate unless
                        // --bootstrap-relearn asks for a fresh PC pass.
                        std::vector<Dag> mec_b = mec;
                        std::vector<std::vector<int>> ps_b = parent_sets;
                        if (bootstrap_relearn) {
                            mec_b = learn_mediator_mec(boot, pc_alpha, 1, nullptr);
                            ps_b.clear();
                            for (const auto& g : mec_b) ps_b.push_back(parents_of(g, j));
                        }
                        NuisanceBundle bb = fit_bundle(boot, bopts);
                        ensure_parent_means(bb, boot, ps_b, j);
                        const MediatorEffects e2 =
                            mediator_effects(boot, bb, mec_b, j, strategy, qopts);
                        return want_dm ? std::make_pair(e2.dm, e2.dm_se)
                                       : std::make_pair(e2.im_avg, e2.im_se);
                    };
                    auto dm_est = [&](const Dataset& b) { return rerun(b, true); };
                    auto im_est = [&](const Dataset& b) { return rerun(b, false); };
                    const BootstrapCi dm_ci = symmetric_t_bootstrap(
                        dm_est, ds, bootstrap_b, alpha,
                        derive_seed(seed, 100 + static_cast<std::uint64_t>(j)), eff.dm,
                        eff.dm_se, threads);
                    const BootstrapCi im_ci = symmetric_t_bootstrap(
                        im_est, ds, bootstrap_b, alpha,
                        derive_seed(seed, 200 + static_cast<std::uint64_t>(j)), eff.im_avg,
                        eff.im_se, threads);
                    dm.ci_low = dm_ci.ci_low;
                    dm.ci_high = dm_ci.ci_high;
                    im.ci_low = im_ci.ci_low;
                    im.ci_high = im_ci.ci_high;
                    note += ";ci=bootstrap";
                }
                push(dm, note);
                push(tm, note);
                push(im, note);
            } catch (const std::exception& e) {
                ++failures;
                EffectRow r;
                r.estimand = "DM";
                r.j = j + 1;
                r.method = method;
                r.note = std::string("error: ") + e.what();
                rows.push_back(r);
            }
        }
    } else {
        std::cerr << "error: unknown method: " << method << "\n";
        return 2;
    }

    write_rows(rows, out, format, meta);
    const bool all_failed = failures > 0 && failures >= ds.p();
    return all_failed ? 1 : 0;
}

int cmd_simulate(const std::string& scenario_name_str, int n, int p, int t, int reps,
                 std::uint64_t seed, const std::string& out) {
    const Scenario scenario = scenario_from_string(scenario_name_str);
    const bool hetero =
        scenario == Scenario::ContinuousAll || scenario == Scenario::DiscreteAll;
    const SemiLinearTruth truth = random_er_truth(p, t, seed, hetero);

    const std::string base = out.empty() ? "sim" : out;
    json manifest;
    manifest["schema"] = kSchemaHeader;
    manifest["scenario"] = scenario_name_str;
    manifest["n"] = n;
    manifest["p"] = p;
    manifest["t"] = t;
    manifest["reps"] = reps;
    manifest["seed"] = seed;
    manifest["target_j"] = truth.target_j + 1;
    auto mat = [](const Eigen::MatrixXd& m) {
        json out = json::array();
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            json row = json::array();
            for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
            out.push_back(row);
        }
        return out;
    };
    auto vec = [](const Eigen::VectorXd& v) {
        json out = json::array();
        for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
        return out;
    };
    manifest["b_mm"] = mat(truth.b_mm);
    manifest["b_mc"] = mat(truth.b_mc);
    manifest["beta_ma"] = vec(truth.beta_ma);
    manifest["beta_yc"] = vec(truth.beta_yc);
    manifest["alpha_ya"] = truth.alpha_ya;
    manifest["beta_ym"] = vec(truth.beta_ym);
    manifest["beta_ac"] = vec(truth.beta_ac);
    manifest["sigma_m2"] = vec(truth.sigma_m2);

    json true_fx = json::array();
    for (int j = 0; j < p; ++j) {
        const TrueEffects te = true_effects(truth, scenario, j, 1);
        json row;
        row["mediator"] = j + 1;
        row["dm"] = te.dm;
        row["im_avg"] = te.im_avg;
        row["tm_avg"] = te.tm_avg;
        row["de"] = te.de;
        row["ie"] = te.ie;
        row["te"] = te.te;
        row["quad_error"] = te.quad_error;
        true_fx.push_back(row);
    }
    manifest["true_effects"] = true_fx;

    std::vector<std::string> files;
    for (int r = 0; r < reps; ++r) {
        const Dataset ds = gen_scenario(truth, scenario, n, derive_seed(seed, 7000 + static_cast<std::uint64_t>(r)));
        const std::string path = base + "_rep" + std::to_string(r + 1) + ".csv";
        write_csv(ds, path);
        files.push_back(path);
    }
    manifest["files"] = files;

    std::ofstream mf(base + "_truth.json");
    mf << manifest.dump(2) << "\n";
    std::cout << "wrote " << reps << " dataset(s) and " << base + "_truth.json" << "\n";
    return 0;
}

int cmd_replicate(const std::string& what, int reps, int n, std::uint64_t seed, int threads,
                  const std::string& out) {
    StudyOptions opts;
    opts.reps = reps;
    opts.n = n;
    opts.seed = seed;
    opts.threads = threads;

    const std::string base = out.empty() ? what : out;
    char buf[512];
    if (what == "table1") {
        const Table1Result r = run_table1(opts);
        std::ofstream f(base + ".csv");
        f << kSchemaHeader << "\n";
        f << "# protocol=table1;reps=" << reps << ";n=" << n << ";seed=" << seed << "\n";
        f << "strategy,effect,scenario,bias,se,reps\n";
        for (std::size_t k = 0; k < kStrategies.size(); ++k)
            for (std::size_t s = 0; s < r.scenarios.size(); ++s)
                for (int side = 0; side < 2; ++side) {
                    const BiasCell& c = r.cells[k][s][static_cast<std::size_t>(side)];
                    std::snprintf(buf, sizeof buf, "%s,%s,%s,%.17g,%.17g,%d\n",
                                  strategy_name(kStrategies[k]),
                                  side == 0 ? "direct" : "indirect",
                                  scenario_name(r.scenarios[s]), c.mean_bias, c.sd, c.reps);
                    f << buf;
                }
        std::cout << "wrote " << base + ".csv" << "\n";
    } else if (what == "figure1" || what == "figure1-discrete") {
        const bool discrete = what == "figure1-discrete";
        const Figure1Result r = run_figure1(opts, discrete);
        std::ofstream f(base + ".csv");
        f << kSchemaHeader << "\n";
        f << "# protocol=" << what << ";reps=" << reps << ";n=" << n << ";seed=" << seed
          << ";truth_quad_error=" << r.truth_quad_error << "\n";
        f << "mediator,estimand,method,mean,se,truth\n";
        for (const auto& row : r.rows) {
            std::snprintf(buf, sizeof buf, "%d,%s,%s,%.17g,%.17g,%.17g\n", row.mediator + 1,
                          row.direct ? "direct" : "indirect", strategy_name(row.strategy),
                          row.mean, row.sd, row.truth);
            f << buf;
        }
        std::cout << "wrote " << base + ".csv" << "\n";
    } else {
        std::cerr << "error: --what expects table1, figure1 or figure1-discrete\n";
        return 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"interventional mediation effects on causal graphs"};
    app.require_subcommand(1);

    // discover
    auto* disc = app.add_subcommand("discover", "estimate the CPDAG with the PC algorithm");
    RoleFlags droles;
    std::string dinput, dout, dformat = "csv";
    double dalpha = 0.01;
    int dthreads = 0;
    add_role_flags(disc, droles, dinput);
    disc->add_option("--alpha", dalpha, "CI-test level")->envname("CAUSALMED_ALPHA");
    disc->add_option("--out", dout, "output file prefix")->envname("CAUSALMED_OUT");
    disc->add_option("--threads", dthreads, "worker threads (0 = all cores)")
        ->envname("CAUSALMED_THREADS");
    disc->add_option("--format", dformat, "csv or json")->envname("CAUSALMED_FORMAT");

    // estimate
    auto* est = app.add_subcommand("estimate", "estimate mediation effects");
    RoleFlags eroles;
    std::string einput, eout, eformat = "csv", emethod = "qr-fast", egraph = "learn";
    double ealpha = 0.05, epc_alpha = 0.01;
    int emc = 100, eboot = 500, ethreads = 0;
    std::uint64_t eseed = 0;
    bool etrunc = true, ecentral = false, ediscrete = false, erelearn = false;
    add_role_flags(est, eroles, einput);
    est->add_option("--method", emethod, "ols | qr | qr-fast | m0 | m1 | m2 | m3")
        ->envname("CAUSALMED_METHOD");
    est->add_option("--alpha", ealpha, "CI level alpha")->envname("CAUSALMED_ALPHA");
    est->add_option("--mc-n", emc, "Monte Carlo sample size N")->envname("CAUSALMED_MC_N");
    est->add_option("--bootstrap-b", eboot, "bootstrap replicates (0 = analytic CIs)")
        ->envname("CAUSALMED_BOOTSTRAP_B");
    auto* seed_opt = est->add_option("--seed", eseed, "RNG seed (required for stochastic runs)")
                         ->envname("CAUSALMED_SEED");
    est->add_option("--graph", egraph, "'learn' or an adjacency CSV over the mediators")
        ->envname("CAUSALMED_GRAPH");
    est->add_option("--pc-alpha", epc_alpha, "PC level when learning")
        ->envname("CAUSALMED_PC_ALPHA");
    est->add_flag("--truncate,!--no-truncate", etrunc, "log(n) truncation of corrections")
        ->envname("CAUSALMED_TRUNCATE");
    est->add_flag("--centralize", ecentral, "center C, M, Y before estimation")
        ->envname("CAUSALMED_CENTRALIZE");
    est->add_flag("--discrete-mediators", ediscrete, "binary mediators (logistic law)")
        ->envname("CAUSALMED_DISCRETE_MEDIATORS");
    est->add_flag("--bootstrap-relearn", erelearn,
                  "re-run structure learning inside each bootstrap replicate")
        ->envname("CAUSALMED_BOOTSTRAP_RELEARN");
    est->add_option("--out", eout, "output file ('-' = stdout)")->envname("CAUSALMED_OUT");
    est->add_option("--format", eformat, "csv or json")->envname("CAUSALMED_FORMAT");
    est->add_option("--threads", ethreads, "worker threads (0 = all cores)")
        ->envname("CAUSALMED_THREADS");

    // simulate
    auto* sim = app.add_subcommand("simulate", "generate scenario datasets with a truth manifest");
    std::string sscenario = "all_correct", sout;
    int sn = 1000, sp = 3, st = 3, sreps = 1;
    std::uint64_t sseed = 0;
    sim->add_option("--scenario", sscenario,
                    "all_correct | m0 | m1 | m2 | m3 | continuous_all | discrete_all")
        ->envname("CAUSALMED_SCENARIO");
    sim->add_option("--n", sn, "rows per dataset")->envname("CAUSALMED_N");
    sim->add_option("--p", sp, "mediator count")->envname("CAUSALMED_P");
    sim->add_option("--t", st, "confounder count plus one")->envname("CAUSALMED_T");
    sim->add_option("--reps", sreps, "dataset count")->envname("CAUSALMED_REPS");
    sim->add_option("--seed", sseed, "RNG seed")->required()->envname("CAUSALMED_SEED");
    sim->add_option("--out", sout, "output prefix")->envname("CAUSALMED_OUT");

    // replicate
    auto* rep = app.add_subcommand("replicate", "run the built-in simulation studies");
    std::string rwhat = "table1", rout;
    int rreps = 100, rn = 1000, rthreads = 0;
    std::uint64_t rseed = 0;
    rep->add_option("--what", rwhat, "table1 | figure1 | figure1-discrete")
        ->envname("CAUSALMED_WHAT");
    rep->add_option("--reps", rreps, "replicates")->envname("CAUSALMED_REPS");
    rep->add_option("--n", rn, "rows per replicate")->envname("CAUSALMED_N");
    rep->add_option("--seed", rseed, "RNG seed")->required()->envname("CAUSALMED_SEED");
    rep->add_option("--threads", rthreads, "worker threads")->envname("CAUSALMED_THREADS");
    rep->add_option("--out", rout, "output file prefix")->envname("CAUSALMED_OUT");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (disc->parsed())
            return cmd_discover(dinput, droles, dalpha, dout, dthreads, dformat);
        if (est->parsed()) {
            const bool stochastic = emethod == "qr" || eboot >= 50;
            if (stochastic && !*seed_opt) {
                std::cerr << "error: --seed is required for stochastic commands\n";
                return 2;
            }
            return cmd_estimate(einput, eroles, emethod, ealpha, emc, eboot, eseed, egraph,
                                etrunc, ecentral, eout, eformat, ethreads, epc_alpha, ediscrete,
                                erelearn);
        }
        if (sim->parsed()) return cmd_simulate(sscenario, sn, sp, st, sreps, sseed, sout);
        if (rep->parsed()) return cmd_replicate(rwhat, rreps, rn, rseed, rthreads, rout);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
