#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

namespace causalmed {

enum class Role { Confounder, Exposure, Mediator, Outcome };

// Column-role-tagged numeric table: confounders C (n x (t-1)), binary
// exposure A, mediators M (n x p), outcome Y. Immutable after construction;
// safe to share read-only across parallel workers.
struct Dataset {
    Eigen::MatrixXd c_matrix;   // n x (t-1); zero columns when t = 1
    Eigen::VectorXd a_vector;   // entries in {0,1}
    Eigen::MatrixXd m_matrix;   // n x p
    Eigen::VectorXd y_vector;

    std::vector<std::string> c_names;
    std::string a_name;
    std::vector<std::string> m_names;
    std::string y_name;

    std::size_t dropped_rows = 0;  // incomplete rows removed at load

    Eigen::Index n() const { return y_vector.size(); }
    Eigen::Index p() const { return m_matrix.cols(); }
    Eigen::Index t() const { return c_matrix.cols() + 1; }
    Eigen::Index d() const { return t() + p() + 1; }

    // Full data matrix in block order (C, A, M, Y); node j of the causal
    // graph is column j here (C: 0..t-2, A: t-1, M: t..t+p-1, Y: t+p).
    Eigen::MatrixXd as_matrix() const;

    void validate() const;  // throws std::invalid_argument on violation
};

// Parses a headered CSV and assembles blocks in (C, A, M, Y) order. Column
// order inside each block follows file order. Rows with missing or
// non-numeric cells are dropped and counted in dropped_rows.
Dataset load_csv(const std::string& path, const std::map<std::string, Role>& roles);

Dataset from_blocks(Eigen::MatrixXd c, Eigen::VectorXd a, Eigen::MatrixXd m,
                    Eigen::VectorXd y);

// Writes values with 17 significant digits so load_csv round-trips bit-exactly.
void write_csv(const Dataset& ds, const std::string& path);

// Returns a copy with C, M, Y columns shifted to empirical mean zero.
// A is left untouched.
Dataset centralize(const Dataset& ds);

}  // namespace causalmed
