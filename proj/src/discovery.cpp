#include "causalmed/discovery.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <stdexcept>

#include "causalmed/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace causalmed {

namespace {

Eigen::MatrixXd rank_transform(const Eigen::MatrixXd& data) {
    Eigen::MatrixXd out(data.rows(), data.cols());
    const Eigen::Index n = data.rows();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
            return data(a, j) < data(b, j);
        });
        // Midranks for ties.
        Eigen::Index i = 0;
        while (i < n) {
            Eigen::Index k = i;
            while (k + 1 < n && data(order[k + 1], j) == data(order[i], j)) ++k;
            const double mid = 0.5 * static_cast<double>(i + k) + 1.0;
            for (Eigen::Index l = i; l <= k; ++l) out(order[l], j) = mid;
            i = k + 1;
        }
    }
    return out;
}

}  // namespace

CiTester::CiTester(const Eigen::MatrixXd& data, bool spearman) : n_(data.rows()) {
    const Eigen::MatrixXd x = spearman ? rank_transform(data) : data;
    const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
    Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n_ - 1);
    const Eigen::VectorXd sd = cov.diagonal().cwiseSqrt();
    corr_ = cov;
    for (Eigen::Index a = 0; a < cov.rows(); ++a)
        for (Eigen::Index b = 0; b < cov.cols(); ++b) {
            const double den = sd(a) * sd(b);
            corr_(a, b) = den > 0.0 ? cov(a, b) / den : 0.0;
        }
}

CiTestResult CiTester::test(int i, int j, const std::vector<int>& s, double alpha) const {
    if (i == j) throw std::invalid_argument("fisher_z_test: i == j");
    for (int v : s)
        if (v == i || v == j) throw std::invalid_argument("fisher_z_test: conditioning on tested node");
    const Eigen::Index k = static_cast<Eigen::Index>(s.size());
    if (n_ <= k + 3) throw std::invalid_argument("fisher_z_test: n too small for |s|");

    double rho;
    if (s.empty()) {
        rho = corr_(i, j);
    } else {
        std::vector<int> idx{i, j};
        idx.insert(idx.end(), s.begin(), s.end());
        const Eigen::Index m = static_cast<Eigen::Index>(idx.size());
        Eigen::MatrixXd sub(m, m);
        for (Eigen::Index a = 0; a < m; ++a)
            for (Eigen::Index b = 0; b < m; ++b) sub(a, b) = corr_(idx[a], idx[b]);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(sub);
        Eigen::MatrixXd prec;
        bool ok = ldlt.info() == Eigen::Success;
        if (ok) {
            prec = ldlt.solve(Eigen::MatrixXd::Identity(m, m));
            ok = prec.allFinite();
        }
        if (!ok) {
            Eigen::MatrixXd jittered = sub;
            jittered.diagonal().array() += 1e-10;
            Eigen::LDLT<Eigen::MatrixXd> retry(jittered);
            if (retry.info() != Eigen::Success)
                throw std::runtime_error("fisher_z_test: singular conditioning covariance");
            prec = retry.solve(Eigen::MatrixXd::Identity(m, m));
            if (!prec.allFinite())
                throw std::runtime_error("fisher_z_test: singular conditioning covariance");
        }
        rho = -prec(0, 1) / std::sqrt(prec(0, 0) * prec(1, 1));
    }
    rho = std::clamp(rho, -1.0 + 1e-15, 1.0 - 1e-15);

    CiTestResult r;
    r.statistic = std::sqrt(static_cast<double>(n_ - k - 3)) * std::atanh(rho);
    r.p_value = 2.0 * (1.0 - normal_cdf(std::fabs(r.statistic)));
    r.independent = r.p_value > alpha;
    return r;
}

namespace {

// All size-l subsets of pool in lexicographic order, visiting cb(subset);
// cb returns true to stop.
bool for_each_subset(const std::vector<int>& pool, int l,
                     const std::function<bool(const std::vector<int>&)>& cb) {
    const int m = static_cast<int>(pool.size());
    if (l > m) return false;
    std::vector<int> pick(static_cast<std::size_t>(l));
    std::vector<int> idx(static_cast<std::size_t>(l));
    std::iota(idx.begin(), idx.end(), 0);
    while (true) {
        for (int k = 0; k < l; ++k) pick[static_cast<std::size_t>(k)] = pool[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];
        if (cb(pick)) return true;
        int k = l - 1;
        while (k >= 0 && idx[static_cast<std::size_t>(k)] == m - l + k) --k;
        if (k < 0) return false;
        ++idx[static_cast<std::size_t>(k)];
        for (int r = k + 1; r < l; ++r) idx[static_cast<std::size_t>(r)] = idx[static_cast<std::size_t>(r - 1)] + 1;
    }
}

struct EdgeDecision {
    bool remove = false;
    std::vector<int> sepset;
};

}  // namespace

Cpdag pc_cpdag(const Eigen::MatrixXd& data, const PcOptions& opts) {
    const int d = static_cast<int>(data.cols());
    if (data.rows() < d + 5) throw std::invalid_argument("pc_cpdag: need n >= d + 5");
    CiTester tester(data, opts.spearman);

    std::vector<std::vector<char>> adj(static_cast<std::size_t>(d),
                                       std::vector<char>(static_cast<std::size_t>(d), 1));
    for (int i = 0; i < d; ++i) adj[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 0;
    std::map<std::pair<int, int>, std::vector<int>> sepsets;

    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) pairs.emplace_back(i, j);

    const int max_level = opts.max_cond_size >= 0 ? opts.max_cond_size : d - 2;
    for (int level = 0; level <= max_level; ++level) {
        // Frozen snapshot: every decision at this level reads `frozen` only.
        const auto frozen = adj;
        auto neighbors = [&](int a, int b) {
            std::vector<int> out;
            for (int v = 0; v < d; ++v)
                if (v != b && frozen[static_cast<std::size_t>(a)][static_cast<std::size_t>(v)]) out.push_back(v);
            return out;
        };
        bool any_large_enough = false;
        std::vector<EdgeDecision> decisions(pairs.size());

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(opts.threads > 0 ? opts.threads : omp_get_max_threads()) reduction(|| : any_large_enough)
#endif
        for (std::ptrdiff_t pi = 0; pi < static_cast<std::ptrdiff_t>(pairs.size()); ++pi) {
            const auto [i, j] = pairs[static_cast<std::size_t>(pi)];
            if (!frozen[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) continue;
            const auto ni = neighbors(i, j);
            const auto nj = neighbors(j, i);
            if (static_cast<int>(ni.size()) >= level || static_cast<int>(nj.size()) >= level)
                any_large_enough = true;
            auto try_pool = [&](const std::vector<int>& pool) {
                return for_each_subset(pool, level, [&](const std::vector<int>& s) {
                    const auto res = tester.test(i, j, s, opts.alpha);
                    if (res.independent) {
                        decisions[static_cast<std::size_t>(pi)].remove = true;
                        decisions[static_cast<std::size_t>(pi)].sepset = s;
                        return true;
                    }
                    return false;
                });
            };
            if (!try_pool(ni)) try_pool(nj);
        }

        for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
            if (!decisions[pi].remove) continue;
            const auto [i, j] = pairs[pi];
            adj[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = 0;
            adj[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = 0;
            sepsets[{i, j}] = decisions[pi].sepset;
        }
        if (!any_large_enough) break;
    }

    // Orient v-structures: i - k - j with i, j nonadjacent and k outside
    // sepset(i, j). Triples in lexicographic order; first orientation wins.
    Adjacency g(d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (adj[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) g.set(i, j, true);

    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            if (adj[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) continue;
            const auto it = sepsets.find({i, j});
            if (it == sepsets.end()) continue;
            for (int k = 0; k < d; ++k) {
                if (k == i || k == j) continue;
                if (!adj[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] ||
                    !adj[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)])
                    continue;
                if (std::find(it->second.begin(), it->second.end(), k) != it->second.end()) continue;
                // Keep earlier orientations; only remove still-undirected tails.
                if (g.undirected(i, k)) g.set(k, i, false);
                if (g.undirected(j, k)) g.set(k, j, false);
            }
        }

    return Cpdag{meek_closure(g, /*strict=*/false)};
}

}  // namespace causalmed
