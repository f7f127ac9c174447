#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "causalmed/effects_qr.hpp"
#include "causalmed/sim.hpp"

namespace causalmed {

// Shared replication protocols behind the CLI `replicate` command and the
// acceptance suite.

struct StudyOptions {
    int reps = 100;
    int n = 1000;
    int p = 3;
    int t = 3;
    std::uint64_t seed = 1;
    int threads = 0;
    double pc_alpha = 0.01;
    int truth_level = 1;  // quadrature density for scenario truths
};

inline constexpr std::array<Strategy, 5> kStrategies = {Strategy::M0, Strategy::M1,
                                                        Strategy::M2, Strategy::M3,
                                                        Strategy::QR};
const char* strategy_name(Strategy s);

struct BiasCell {
    double mean_bias = 0.0;  // mean of (estimate - truth) across replicates
    double sd = 0.0;         // sd of the per-replicate errors
    int reps = 0;
};

struct Table1Result {
    // [strategy][scenario][0 = direct, 1 = indirect]
    std::array<std::array<std::array<BiasCell, 2>, 5>, 5> cells;
    std::vector<Scenario> scenarios;
    int graph_fallbacks = 0;  // replicates where MEC enumeration needed repair
};

Table1Result run_table1(const StudyOptions& opts);

struct Figure1Row {
    int mediator = 0;
    bool direct = true;
    Strategy strategy = Strategy::QR;
    double mean = 0.0;
    double sd = 0.0;
    double truth = 0.0;
};

struct Figure1Result {
    std::vector<Figure1Row> rows;
    double truth_quad_error = 0.0;
};

Figure1Result run_figure1(const StudyOptions& opts, bool discrete);

// Learned mediator MEC with a deterministic repair path when the estimated
// sub-block admits no consistent extension.
std::vector<Dag> learn_mediator_mec(const Dataset& ds, double pc_alpha, int threads,
                                    bool* used_fallback = nullptr);

}  // namespace causalmed
