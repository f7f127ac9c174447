#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace causalmed {

// Binary adjacency over d nodes, adj(i, j) = 1 iff edge i -> j. A pair with
// adj(i, j) = adj(j, i) = 1 encodes an undirected edge (PDAG/CPDAG reading).
class Adjacency {
  public:
    Adjacency() = default;
    explicit Adjacency(int d) : d_(d), bits_(static_cast<std::size_t>(d) * d, 0) {}

    int size() const { return d_; }
    bool at(int i, int j) const { return bits_[static_cast<std::size_t>(i) * d_ + j] != 0; }
    void set(int i, int j, bool v) { bits_[static_cast<std::size_t>(i) * d_ + j] = v ? 1 : 0; }

    bool directed(int i, int j) const { return at(i, j) && !at(j, i); }
    bool undirected(int i, int j) const { return at(i, j) && at(j, i); }
    bool adjacent(int i, int j) const { return at(i, j) || at(j, i); }

    bool operator==(const Adjacency& o) const { return d_ == o.d_ && bits_ == o.bits_; }
    bool operator<(const Adjacency& o) const { return bits_ < o.bits_; }  // lexicographic, flattened

    std::string flatten() const {
        std::string s(bits_.size(), '0');
        for (std::size_t k = 0; k < bits_.size(); ++k) s[k] = bits_[k] ? '1' : '0';
        return s;
    }

  private:
    int d_ = 0;
    std::vector<std::uint8_t> bits_;
};

struct Dag {
    Adjacency adj;
    int size() const { return adj.size(); }
};

struct Cpdag {
    Adjacency adj;
    int size() const { return adj.size(); }
};

// True iff the directed reading of adj (every 1 taken as an arc) is acyclic.
bool is_dag(const Adjacency& adj);

// True iff the directed part (one-sided 1s) of a PDAG is acyclic.
bool directed_part_acyclic(const Adjacency& adj);

// Unshielded colliders i -> k <- j with i, j nonadjacent; returned as
// (min(i,j), max(i,j), k) triples, sorted.
std::vector<std::array<int, 3>> v_structures(const Adjacency& adj);

// Fixpoint of the four Meek orientation rules. Only adds orientations.
// strict = true throws std::runtime_error when a rule application would
// create a directed cycle (inconsistent input); strict = false skips it.
Adjacency meek_closure(const Adjacency& pdag, bool strict = true);

// CPDAG of g's Markov equivalence class: skeleton + v-structures + closure.
Cpdag cpdag_of_dag(const Dag& g);

// All consistent extensions of c, each exactly once, sorted lexicographically
// by flattened adjacency. Throws when the class would exceed cap.
std::vector<Dag> enumerate_mec(const Cpdag& c, std::size_t cap = 10000);

// Test oracle: tries all 2^k orientations of the undirected edges and keeps
// the acyclic ones with unchanged skeleton and v-structures.
std::vector<Dag> brute_force_mec(const Cpdag& c);

std::vector<int> parents_of(const Dag& g, int j);

// Sub-CPDAG over the mediator block, nodes t .. t+p-1 (0-based).
Cpdag mediator_subgraph(const Cpdag& c, int t, int p);

// 0/1 integer CSV, one row per source node.
void write_adjacency_csv(const Adjacency& adj, const std::string& path);
Adjacency read_adjacency_csv(const std::string& path);

}  // namespace causalmed
