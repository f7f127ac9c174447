#pragma once

#include <Eigen/Dense>
#include <vector>

#include "causalmed/graph.hpp"

namespace causalmed {

struct CiTestResult {
    double statistic = 0.0;  // Fisher z
    double p_value = 1.0;
    bool independent = false;  // p_value > alpha
};

struct PcOptions {
    double alpha = 0.01;
    bool spearman = false;  // rank pre-transform before correlations
    int max_cond_size = -1; // -1: unrestricted
    int threads = 0;        // 0: runtime default
};

// Cached column moments for repeated partial-correlation tests.
class CiTester {
  public:
    // Columns of data are the graph nodes, in (C, A, M, Y) order.
    explicit CiTester(const Eigen::MatrixXd& data, bool spearman = false);

    CiTestResult test(int i, int j, const std::vector<int>& s, double alpha) const;

    Eigen::Index n() const { return n_; }
    int d() const { return static_cast<int>(corr_.rows()); }

  private:
    Eigen::Index n_;
    Eigen::MatrixXd corr_;
};

// PC: level-wise skeleton search against a frozen adjacency snapshot,
// v-structure orientation from lexicographically-first separating sets,
// then Meek closure (cycle-tolerant on finite-sample conflicts).
Cpdag pc_cpdag(const Eigen::MatrixXd& data, const PcOptions& opts = {});

}  // namespace causalmed
