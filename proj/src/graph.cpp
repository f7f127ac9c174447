#include "causalmed/graph.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace causalmed {

namespace {

bool acyclic(const Adjacency& adj, bool directed_only) {
    const int d = adj.size();
    std::vector<int> indeg(d, 0);
    auto arc = [&](int i, int j) {
        return directed_only ? adj.directed(i, j) : adj.at(i, j);
    };
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (arc(i, j)) ++indeg[j];
    std::vector<int> queue;
    for (int j = 0; j < d; ++j)
        if (indeg[j] == 0) queue.push_back(j);
    int seen = 0;
    while (!queue.empty()) {
        const int u = queue.back();
        queue.pop_back();
        ++seen;
        for (int v = 0; v < d; ++v)
            if (arc(u, v) && --indeg[v] == 0) queue.push_back(v);
    }
    return seen == d;
}

// Would adding arc a -> b close a directed cycle (path b ~> a over directed edges)?
bool creates_cycle(const Adjacency& adj, int a, int b) {
    const int d = adj.size();
    std::vector<std::uint8_t> vis(d, 0);
    std::vector<int> stack{b};
    vis[b] = 1;
    while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        if (u == a) return true;
        for (int v = 0; v < d; ++v)
            if (adj.directed(u, v) && !vis[v]) {
                vis[v] = 1;
                stack.push_back(v);
            }
    }
    return false;
}

}  // namespace

bool is_dag(const Adjacency& adj) {
    if (adj.size() == 0) return true;
    return acyclic(adj, /*directed_only=*/false);
}

bool directed_part_acyclic(const Adjacency& adj) { return acyclic(adj, true); }

std::vector<std::array<int, 3>> v_structures(const Adjacency& adj) {
    const int d = adj.size();
    std::vector<std::array<int, 3>> out;
    for (int k = 0; k < d; ++k)
        for (int i = 0; i < d; ++i) {
            if (!adj.directed(i, k)) continue;
            for (int j = i + 1; j < d; ++j) {
                if (j == k || !adj.directed(j, k)) continue;
                if (!adj.adjacent(i, j)) out.push_back({i, j, k});
            }
        }
    std::sort(out.begin(), out.end());
    return out;
}

Adjacency meek_closure(const Adjacency& pdag, bool strict) {
    Adjacency g = pdag;
    const int d = g.size();
    auto orient = [&](int a, int b) -> bool {
        // a -- b becomes a -> b.
        if (creates_cycle(g, a, b)) {
            if (strict) throw std::runtime_error("meek_closure: orientation would create a cycle");
            return false;
        }
        g.set(b, a, false);
        return true;
    };
    bool changed = true;
    while (changed) {
        changed = false;
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                if (!g.undirected(a, b)) continue;
                bool fire = false;
                // R1: c -> a, a -- b, c and b nonadjacent  =>  a -> b.
                for (int c = 0; c < d && !fire; ++c)
                    if (g.directed(c, a) && c != b && !g.adjacent(c, b)) fire = true;
                // R2: a -> c -> b with a -- b  =>  a -> b.
                for (int c = 0; c < d && !fire; ++c)
                    if (g.directed(a, c) && g.directed(c, b)) fire = true;
                // R3: a -- c, a -- e, c -> b, e -> b, c and e nonadjacent  =>  a -> b.
                for (int c = 0; c < d && !fire; ++c) {
                    if (!(g.undirected(a, c) && g.directed(c, b))) continue;
                    for (int e = c + 1; e < d && !fire; ++e)
                        if (g.undirected(a, e) && g.directed(e, b) && !g.adjacent(c, e)) fire = true;
                }
                // R4: a -- c, c -> e, e -> b, c and b nonadjacent, a and e adjacent  =>  a -> b.
                for (int c = 0; c < d && !fire; ++c) {
                    if (!(g.undirected(a, c)) || g.adjacent(c, b) || c == b) continue;
                    for (int e = 0; e < d && !fire; ++e)
                        if (g.directed(c, e) && g.directed(e, b) && g.adjacent(a, e)) fire = true;
                }
                if (fire && orient(a, b)) changed = true;
            }
    }
    return g;
}

Cpdag cpdag_of_dag(const Dag& g) {
    if (!is_dag(g.adj)) throw std::invalid_argument("cpdag_of_dag: input has a cycle");
    const int d = g.size();
    Adjacency pdag(d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (g.adj.at(i, j)) {
                pdag.set(i, j, true);
                pdag.set(j, i, true);
            }
    for (const auto& [i, j, k] : v_structures(g.adj)) {
        pdag.set(k, i, false);
        pdag.set(k, j, false);
    }
    return Cpdag{meek_closure(pdag)};
}

namespace {

void enumerate_rec(const Adjacency& g, const std::vector<std::array<int, 3>>& want_vs,
                   std::vector<Dag>& out, std::size_t cap) {
    const int d = g.size();
    int ua = -1, ub = -1;
    for (int i = 0; i < d && ua < 0; ++i)
        for (int j = i + 1; j < d; ++j)
            if (g.undirected(i, j)) {
                ua = i;
                ub = j;
                break;
            }
    if (ua < 0) {
        Dag cand{g};
        if (is_dag(cand.adj) && v_structures(cand.adj) == want_vs) {
            if (out.size() >= cap)
                throw std::runtime_error("enumerate_mec: class size exceeds cap");
            out.push_back(std::move(cand));
        }
        return;
    }
    for (int dir = 0; dir < 2; ++dir) {
        const int a = dir == 0 ? ua : ub;
        const int b = dir == 0 ? ub : ua;
        Adjacency next = g;
        next.set(b, a, false);
        // Orienting a -> b must not build a new collider at b or a cycle.
        bool ok = true;
        for (int w = 0; w < d && ok; ++w)
            if (w != a && next.directed(w, b) && !next.adjacent(w, a)) ok = false;
        if (!ok) continue;
        bool closed_ok = true;
        Adjacency closed;
        try {
            closed = meek_closure(next, /*strict=*/true);
        } catch (const std::runtime_error&) {
            closed_ok = false;
        }
        if (closed_ok) enumerate_rec(closed, want_vs, out, cap);
    }
}

}  // namespace

std::vector<Dag> enumerate_mec(const Cpdag& c, std::size_t cap) {
    if (!directed_part_acyclic(c.adj))
        throw std::invalid_argument("enumerate_mec: directed part has a cycle");
    const auto want_vs = v_structures(c.adj);
    std::vector<Dag> out;
    enumerate_rec(c.adj, want_vs, out, cap);
    std::sort(out.begin(), out.end(),
              [](const Dag& x, const Dag& y) { return x.adj < y.adj; });
    out.erase(std::unique(out.begin(), out.end(),
                          [](const Dag& x, const Dag& y) { return x.adj == y.adj; }),
              out.end());
    if (out.empty()) throw std::runtime_error("enumerate_mec: no consistent extension");
    return out;
}

std::vector<Dag> brute_force_mec(const Cpdag& c) {
    const int d = c.size();
    std::vector<std::pair<int, int>> und;
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j)
            if (c.adj.undirected(i, j)) und.emplace_back(i, j);
    if (und.size() > 20) throw std::invalid_argument("brute_force_mec: too many undirected edges");
    const auto want_vs = v_structures(c.adj);
    std::vector<Dag> out;
    const std::size_t total = std::size_t{1} << und.size();
    for (std::size_t mask = 0; mask < total; ++mask) {
        Adjacency g = c.adj;
        for (std::size_t k = 0; k < und.size(); ++k) {
            const auto [i, j] = und[k];
            if (mask & (std::size_t{1} << k)) g.set(j, i, false);
            else g.set(i, j, false);
        }
        if (!is_dag(g)) continue;
        if (v_structures(g) != want_vs) continue;
        out.push_back(Dag{g});
    }
    std::sort(out.begin(), out.end(),
              [](const Dag& x, const Dag& y) { return x.adj < y.adj; });
    return out;
}

std::vector<int> parents_of(const Dag& g, int j) {
    if (j < 0 || j >= g.size()) throw std::invalid_argument("parents_of: node out of range");
    std::vector<int> out;
    for (int i = 0; i < g.size(); ++i)
        if (g.adj.at(i, j)) out.push_back(i);
    return out;
}

Cpdag mediator_subgraph(const Cpdag& c, int t, int p) {
    if (c.size() < t + p + 1) throw std::invalid_argument("mediator_subgraph: dimension mismatch");
    Adjacency sub(p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j)
            sub.set(i, j, c.adj.at(t + i, t + j));
    return Cpdag{sub};
}

void write_adjacency_csv(const Adjacency& adj, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot open file for write: " + path);
    for (int i = 0; i < adj.size(); ++i) {
        for (int j = 0; j < adj.size(); ++j) out << (adj.at(i, j) ? 1 : 0) << (j + 1 < adj.size() ? ',' : '\n');
        if (adj.size() == 0) out << '\n';
    }
}

Adjacency read_adjacency_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open file: " + path);
    std::vector<std::vector<int>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<int> row;
        std::istringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stoi(cell));
        rows.push_back(std::move(row));
    }
    const int d = static_cast<int>(rows.size());
    Adjacency adj(d);
    for (int i = 0; i < d; ++i) {
        if (static_cast<int>(rows[i].size()) != d)
            throw std::invalid_argument("adjacency CSV is not square");
        for (int j = 0; j < d; ++j) adj.set(i, j, rows[i][j] != 0);
    }
    return adj;
}

}  // namespace causalmed
