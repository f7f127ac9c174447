#include <doctest.h>

#include <cmath>

#include "causalmed/dataset.hpp"
#include "causalmed/rng.hpp"
#include "test_util.hpp"

using namespace causalmed;

namespace {

std::map<std::string, Role> basic_roles() {
    return {{"c1", Role::Confounder}, {"a", Role::Exposure}, {"m1", Role::Mediator},
            {"y", Role::Outcome}};
}

std::string ten_rows() {
    std::string s = "c1,a,m1,y\n";
    for (int i = 0; i < 10; ++i) {
        s += std::to_string(0.1 * i) + "," + std::to_string(i % 2) + "," +
             std::to_string(0.5 * i) + "," + std::to_string(1.0 + i) + "\n";
    }
    return s;
}

}  // namespace

TEST_CASE("load_csv parses a complete file") {
    TempFile f(ten_rows());
    const Dataset ds = load_csv(f.path, basic_roles());
    CHECK(ds.n() == 10);
    CHECK(ds.t() == 2);
    CHECK(ds.p() == 1);
    CHECK(ds.dropped_rows == 0);
    CHECK(ds.c_names == std::vector<std::string>{"c1"});
    CHECK(ds.m_matrix(3, 0) == doctest::Approx(1.5));
}

TEST_CASE("load_csv drops incomplete rows and reports the count") {
    std::string s = ten_rows();
    s += "0.5,,0.25,2.0\n";  // missing exposure cell
    TempFile f(s);
    const Dataset ds = load_csv(f.path, basic_roles());
    CHECK(ds.n() == 10);
    CHECK(ds.dropped_rows == 1);
}

TEST_CASE("load_csv rejects a non-binary exposure") {
    std::string s = "c1,a,m1,y\n0.0,2,1.0,1.0\n0.1,0,1.0,1.0\n";
    TempFile f(s);
    CHECK_THROWS_WITH_AS(load_csv(f.path, basic_roles()), doctest::Contains("non-binary"),
                         std::invalid_argument);
}

TEST_CASE("load_csv rejects unknown role columns and missing blocks") {
    TempFile f(ten_rows());
    auto roles = basic_roles();
    roles["nope"] = Role::Confounder;
    CHECK_THROWS_AS(load_csv(f.path, roles), std::invalid_argument);

    std::map<std::string, Role> noexp = {{"c1", Role::Confounder}, {"m1", Role::Mediator},
                                         {"y", Role::Outcome}};
    CHECK_THROWS_AS(load_csv(f.path, noexp), std::invalid_argument);
}

TEST_CASE("load_csv errors when every row is incomplete") {
    std::string s = "c1,a,m1,y\nNA,0,1,1\nNA,1,2,2\n";
    TempFile f(s);
    CHECK_THROWS_WITH_AS(load_csv(f.path, basic_roles()), doctest::Contains("zero rows"),
                         std::invalid_argument);
}

TEST_CASE("centralize zeroes C/M/Y means and leaves A alone") {
    Eigen::MatrixXd c(3, 1);
    c << 1, 2, 3;
    Eigen::VectorXd a(3);
    a << 0, 1, 1;
    Eigen::MatrixXd m(3, 1);
    m << 4, 5, 9;
    Eigen::VectorXd y(3);
    y << 1, 1, 4;
    const Dataset ds = from_blocks(c, a, m, y);
    const Dataset cd = centralize(ds);
    CHECK(cd.c_matrix(0, 0) == doctest::Approx(-1.0));
    CHECK(cd.c_matrix(2, 0) == doctest::Approx(1.0));
    CHECK(std::fabs(cd.m_matrix.col(0).mean()) < 1e-12);
    CHECK(std::fabs(cd.y_vector.mean()) < 1e-12);
    CHECK(cd.a_vector(0) == 0.0);
    CHECK(cd.a_vector(1) == 1.0);

    // Idempotence within 1e-12.
    const Dataset cd2 = centralize(cd);
    CHECK((cd2.c_matrix - cd.c_matrix).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((cd2.y_vector - cd.y_vector).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("write_csv then load_csv round-trips bit exactly") {
    Rng rng(7);
    const int n = 23;
    Eigen::MatrixXd c(n, 2);
    Eigen::VectorXd a(n);
    Eigen::MatrixXd m(n, 2);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        c(i, 0) = rng.normal() * 1e3;
        c(i, 1) = rng.normal() * 1e-7;
        a(i) = i % 2;
        m(i, 0) = rng.normal();
        m(i, 1) = rng.normal() / 3.0;
        y(i) = rng.normal() * 17.0;
    }
    const Dataset ds = from_blocks(c, a, m, y);
    TempFile f("", "rt");
    write_csv(ds, f.path);
    std::map<std::string, Role> roles = {{"c1", Role::Confounder}, {"c2", Role::Confounder},
                                         {"a", Role::Exposure},   {"m1", Role::Mediator},
                                         {"m2", Role::Mediator},  {"y", Role::Outcome}};
    const Dataset back = load_csv(f.path, roles);
    REQUIRE(back.n() == n);
    for (int i = 0; i < n; ++i) {
        CHECK(back.c_matrix(i, 0) == ds.c_matrix(i, 0));
        CHECK(back.c_matrix(i, 1) == ds.c_matrix(i, 1));
        CHECK(back.m_matrix(i, 0) == ds.m_matrix(i, 0));
        CHECK(back.m_matrix(i, 1) == ds.m_matrix(i, 1));
        CHECK(back.y_vector(i) == ds.y_vector(i));
    }
}
