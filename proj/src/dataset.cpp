#include "causalmed/dataset.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace causalmed {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool parse_cell(const std::string& raw, double& out) {
    const std::string s = trim(raw);
    if (s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan") return false;
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0' || errno == ERANGE) return false;
    if (!std::isfinite(v)) return false;
    out = v;
    return true;
}

}  // namespace

Eigen::MatrixXd Dataset::as_matrix() const {
    Eigen::MatrixXd x(n(), d());
    Eigen::Index col = 0;
    for (Eigen::Index j = 0; j < c_matrix.cols(); ++j) x.col(col++) = c_matrix.col(j);
    x.col(col++) = a_vector;
    for (Eigen::Index j = 0; j < m_matrix.cols(); ++j) x.col(col++) = m_matrix.col(j);
    x.col(col) = y_vector;
    return x;
}

void Dataset::validate() const {
    const Eigen::Index nrows = y_vector.size();
    if (nrows < 1) throw std::invalid_argument("dataset: zero rows");
    if (a_vector.size() != nrows || m_matrix.rows() != nrows ||
        (c_matrix.cols() > 0 && c_matrix.rows() != nrows))
        throw std::invalid_argument("dataset: block row counts differ");
    bool saw0 = false, saw1 = false;
    for (Eigen::Index i = 0; i < nrows; ++i) {
        const double a = a_vector(i);
        if (a == 0.0) saw0 = true;
        else if (a == 1.0) saw1 = true;
        else throw std::invalid_argument("non-binary exposure");
    }
    if (!saw0 || !saw1) throw std::invalid_argument("exposure must take both values 0 and 1");
    auto check_finite = [](const Eigen::MatrixXd& m, const char* what) {
        if (m.size() > 0 && !m.allFinite())
            throw std::invalid_argument(std::string("non-finite entries in ") + what);
    };
    check_finite(c_matrix, "confounders");
    check_finite(m_matrix, "mediators");
    check_finite(y_vector, "outcome");
}

Dataset load_csv(const std::string& path, const std::map<std::string, Role>& roles) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open file: " + path);

    std::string header;
    if (!std::getline(in, header)) throw std::invalid_argument("empty file: " + path);
    const auto names = split_line(header);

    std::vector<std::string> col_names(names.size());
    for (std::size_t j = 0; j < names.size(); ++j) col_names[j] = trim(names[j]);

    for (const auto& [name, role] : roles) {
        (void)role;
        bool found = false;
        for (const auto& cn : col_names) found = found || (cn == name);
        if (!found) throw std::invalid_argument("unknown column name: " + name);
    }

    // Block membership in file order.
    std::vector<std::size_t> c_cols, m_cols;
    std::ptrdiff_t a_col = -1, y_col = -1;
    for (std::size_t j = 0; j < col_names.size(); ++j) {
        const auto it = roles.find(col_names[j]);
        if (it == roles.end()) continue;
        switch (it->second) {
            case Role::Confounder: c_cols.push_back(j); break;
            case Role::Mediator: m_cols.push_back(j); break;
            case Role::Exposure:
                if (a_col >= 0) throw std::invalid_argument("multiple exposure columns");
                a_col = static_cast<std::ptrdiff_t>(j);
                break;
            case Role::Outcome:
                if (y_col >= 0) throw std::invalid_argument("multiple outcome columns");
                y_col = static_cast<std::ptrdiff_t>(j);
                break;
        }
    }
    if (a_col < 0) throw std::invalid_argument("no exposure column");
    if (y_col < 0) throw std::invalid_argument("no outcome column");
    if (m_cols.empty()) throw std::invalid_argument("no mediator columns");

    std::vector<std::vector<double>> rows;
    std::size_t dropped = 0;
    std::string line;
    std::vector<std::size_t> used = c_cols;
    used.push_back(static_cast<std::size_t>(a_col));
    used.insert(used.end(), m_cols.begin(), m_cols.end());
    used.push_back(static_cast<std::size_t>(y_col));

    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto cells = split_line(line);
        std::vector<double> row(used.size());
        bool complete = true;
        for (std::size_t k = 0; k < used.size() && complete; ++k) {
            if (used[k] >= cells.size() || !parse_cell(cells[used[k]], row[k]))
                complete = false;
        }
        if (complete) rows.push_back(std::move(row));
        else ++dropped;
    }
    if (rows.empty()) throw std::invalid_argument("zero rows after missing-value drop");

    const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
    Dataset ds;
    ds.c_matrix.resize(n, static_cast<Eigen::Index>(c_cols.size()));
    ds.a_vector.resize(n);
    ds.m_matrix.resize(n, static_cast<Eigen::Index>(m_cols.size()));
    ds.y_vector.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        std::size_t k = 0;
        for (std::size_t j = 0; j < c_cols.size(); ++j) ds.c_matrix(i, static_cast<Eigen::Index>(j)) = rows[i][k++];
        ds.a_vector(i) = rows[i][k++];
        for (std::size_t j = 0; j < m_cols.size(); ++j) ds.m_matrix(i, static_cast<Eigen::Index>(j)) = rows[i][k++];
        ds.y_vector(i) = rows[i][k];
    }
    for (auto j : c_cols) ds.c_names.push_back(col_names[j]);
    ds.a_name = col_names[static_cast<std::size_t>(a_col)];
    for (auto j : m_cols) ds.m_names.push_back(col_names[j]);
    ds.y_name = col_names[static_cast<std::size_t>(y_col)];
    ds.dropped_rows = dropped;
    ds.validate();
    return ds;
}

Dataset from_blocks(Eigen::MatrixXd c, Eigen::VectorXd a, Eigen::MatrixXd m,
                    Eigen::VectorXd y) {
    Dataset ds;
    ds.c_matrix = std::move(c);
    ds.a_vector = std::move(a);
    ds.m_matrix = std::move(m);
    ds.y_vector = std::move(y);
    for (Eigen::Index j = 0; j < ds.c_matrix.cols(); ++j) ds.c_names.push_back("c" + std::to_string(j + 1));
    ds.a_name = "a";
    for (Eigen::Index j = 0; j < ds.m_matrix.cols(); ++j) ds.m_names.push_back("m" + std::to_string(j + 1));
    ds.y_name = "y";
    ds.validate();
    return ds;
}

void write_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot open file for write: " + path);
    for (const auto& nm : ds.c_names) out << nm << ',';
    out << ds.a_name << ',';
    for (const auto& nm : ds.m_names) out << nm << ',';
    out << ds.y_name << '\n';
    char buf[64];
    auto put = [&](double v, char sep) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << buf << sep;
    };
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
        for (Eigen::Index j = 0; j < ds.c_matrix.cols(); ++j) put(ds.c_matrix(i, j), ',');
        put(ds.a_vector(i), ',');
        for (Eigen::Index j = 0; j < ds.m_matrix.cols(); ++j) put(ds.m_matrix(i, j), ',');
        std::snprintf(buf, sizeof buf, "%.17g", ds.y_vector(i));
        out << buf << '\n';
    }
}

Dataset centralize(const Dataset& ds) {
    Dataset out = ds;
    for (Eigen::Index j = 0; j < out.c_matrix.cols(); ++j)
        out.c_matrix.col(j).array() -= out.c_matrix.col(j).mean();
    for (Eigen::Index j = 0; j < out.m_matrix.cols(); ++j)
        out.m_matrix.col(j).array() -= out.m_matrix.col(j).mean();
    out.y_vector.array() -= out.y_vector.mean();
    return out;
}

}  // namespace causalmed
