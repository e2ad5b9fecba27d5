#include "honestcalib/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace honestcalib {

namespace {

constexpr std::size_t kMaxTokens = 64;
constexpr double kReducedCostTol = 1e-11;

// Basis cells of the transportation simplex, kept as a spanning tree over
// row-nodes [0,m) and col-nodes [0,n).
struct Basis {
    std::size_t m, n;
    std::vector<std::vector<std::size_t>> row_adj;  // row i -> basic cols
    std::vector<std::vector<std::size_t>> col_adj;  // col j -> basic rows

    Basis(std::size_t m_, std::size_t n_) : m(m_), n(n_), row_adj(m_), col_adj(n_) {}

    void add(std::size_t i, std::size_t j) {
        row_adj[i].push_back(j);
        col_adj[j].push_back(i);
    }

    void remove(std::size_t i, std::size_t j) {
        std::erase(row_adj[i], j);
        std::erase(col_adj[j], i);
    }
};

// Solves u_i + v_j = c_ij over the basis tree, u_0 = 0.
void compute_potentials(const Basis& basis, const std::vector<double>& cost, std::size_t n,
                        std::vector<double>& u, std::vector<double>& v) {
    const std::size_t m = basis.m;
    std::vector<char> row_done(m, 0), col_done(basis.n, 0);
    u.assign(m, 0.0);
    v.assign(basis.n, 0.0);
    std::vector<std::pair<char, std::size_t>> stack;  // (is_row, index)
    stack.emplace_back(1, 0);
    row_done[0] = 1;
    while (!stack.empty()) {
        auto [is_row, idx] = stack.back();
        stack.pop_back();
        if (is_row) {
            for (std::size_t j : basis.row_adj[idx]) {
                if (!col_done[j]) {
                    v[j] = cost[idx * n + j] - u[idx];
                    col_done[j] = 1;
                    stack.emplace_back(0, j);
                }
            }
        } else {
            for (std::size_t i : basis.col_adj[idx]) {
                if (!row_done[i]) {
                    u[i] = cost[i * n + idx] - v[idx];
                    row_done[i] = 1;
                    stack.emplace_back(1, i);
                }
            }
        }
    }
}

// Unique alternating cycle created by adding (ei, ej) to the basis tree:
// path from col ej back to row ei, returned as cells starting at (ei, ej).
std::vector<std::pair<std::size_t, std::size_t>> find_cycle(const Basis& basis, std::size_t ei,
                                                            std::size_t ej) {
    const std::size_t m = basis.m, n = basis.n;
    // BFS over basis edges from row ei to col ej.
    std::vector<int> row_parent(m, -2), col_parent(n, -2);  // parent node index on other side
    row_parent[ei] = -1;
    std::vector<std::pair<char, std::size_t>> frontier{{1, ei}};
    while (!frontier.empty()) {
        std::vector<std::pair<char, std::size_t>> next;
        for (auto [is_row, idx] : frontier) {
            if (is_row) {
                for (std::size_t j : basis.row_adj[idx]) {
                    if (col_parent[j] == -2) {
                        col_parent[j] = static_cast<int>(idx);
                        next.emplace_back(0, j);
                    }
                }
            } else {
                for (std::size_t i : basis.col_adj[idx]) {
                    if (row_parent[i] == -2) {
                        row_parent[i] = static_cast<int>(idx);
                        next.emplace_back(1, i);
                    }
                }
            }
        }
        if (col_parent[ej] != -2) break;
        frontier = std::move(next);
    }
    if (col_parent[ej] == -2) throw std::logic_error("transport basis lost connectivity");

    // Walk back: ej -> ... -> ei, collecting basis cells, then prepend the
    // entering cell so the cycle alternates +,-,+,-,...
    std::vector<std::pair<std::size_t, std::size_t>> cells;
    cells.emplace_back(ei, ej);
    std::size_t j = ej;
    while (true) {
        std::size_t i = static_cast<std::size_t>(col_parent[j]);
        cells.emplace_back(i, j);
        if (i == ei) break;
        j = static_cast<std::size_t>(row_parent[i]);
        cells.emplace_back(i, j);
    }
    return cells;
}

void check_bag(const TokenBag& bag, const char* name) {
    if (bag.items.empty()) throw std::invalid_argument(std::string(name) + " bag is empty");
    if (bag.items.size() > kMaxTokens) throw std::invalid_argument("instance too large");
    double sum = 0.0;
    for (const auto& it : bag.items) {
        if (!(it.weight > 0.0)) throw std::invalid_argument(std::string(name) + " bag has non-positive weight");
        sum += it.weight;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument(std::string(name) + " bag weights not normalized");
}

}  // namespace

TokenBag make_bag(const std::vector<std::string>& tokens,
                  const std::map<std::string, Vec>& token_embeddings) {
    if (tokens.empty()) throw std::invalid_argument("cannot build bag from empty token sequence");
    std::map<std::string, double> counts;
    for (const auto& t : tokens) counts[t] += 1.0;
    TokenBag bag;
    const double n = static_cast<double>(tokens.size());
    for (const auto& [tok, cnt] : counts) {
        auto it = token_embeddings.find(tok);
        if (it == token_embeddings.end())
            throw std::invalid_argument("missing embedding for token \"" + tok + "\"");
        bag.items.push_back({tok, cnt / n, it->second});
    }
    return bag;
}

std::vector<double> ground_distances(const TokenBag& a, const TokenBag& b) {
    const std::size_t m = a.items.size(), n = b.items.size();
    std::vector<double> d(m * n);
    for (std::size_t i = 0; i < m; ++i) {
        if (a.items[i].embedding.size() != b.items[0].embedding.size())
            throw std::invalid_argument("embedding dimension mismatch between bags");
        for (std::size_t j = 0; j < n; ++j)
            d[i * n + j] = euclidean(a.items[i].embedding, b.items[j].embedding);
    }
    return d;
}

TransportPlan solve_emd(const TokenBag& a, const TokenBag& b) {
    check_bag(a, "source");
    check_bag(b, "target");
    const std::size_t m = a.items.size(), n = b.items.size();
    const std::vector<double> cost = ground_distances(a, b);

    // Rescale both marginals to sum exactly to the same value.
    std::vector<double> supply(m), demand(n);
    double sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < m; ++i) sa += a.items[i].weight;
    for (std::size_t j = 0; j < n; ++j) sb += b.items[j].weight;
    for (std::size_t i = 0; i < m; ++i) supply[i] = a.items[i].weight / sa;
    for (std::size_t j = 0; j < n; ++j) demand[j] = b.items[j].weight / sb;

    TransportPlan plan;
    plan.rows = m;
    plan.cols = n;
    plan.flows.assign(m * n, 0.0);

    // Northwest-corner initial basic feasible solution; always m+n-1 cells,
    // zero-flow cells kept for degeneracy.
    Basis basis(m, n);
    {
        std::size_t i = 0, j = 0;
        double ra = supply[0], rb = demand[0];
        while (true) {
            basis.add(i, j);
            double f = std::min(ra, rb);
            plan.flows[i * n + j] = f;
            ra -= f;
            rb -= f;
            if (i == m - 1 && j == n - 1) break;
            if (i == m - 1) {
                ++j;
                rb = demand[j];
            } else if (j == n - 1) {
                ++i;
                ra = supply[i];
            } else if (ra <= rb) {
                ++i;
                ra = supply[i];
            } else {
                ++j;
                rb = demand[j];
            }
        }
    }

    std::vector<double> u, v;
    std::vector<char> in_basis(m * n, 0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j : basis.row_adj[i]) in_basis[i * n + j] = 1;

    const std::size_t max_pivots = 1000 + 40 * (m + n) * (m + n);
    for (std::size_t pivot = 0;; ++pivot) {
        if (pivot > max_pivots) throw std::runtime_error("transport solver failed to converge");
        compute_potentials(basis, cost, n, u, v);

        // Entering cell: most negative reduced cost; Bland's rule (first
        // negative in row-major order) after a long stall guarantees
        // termination. Row-major scan makes ties lexicographic.
        const bool bland = pivot > max_pivots / 2;
        double best = -kReducedCostTol;
        std::size_t ei = m, ej = n;
        for (std::size_t i = 0; i < m && (!bland || ei == m); ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (in_basis[i * n + j]) continue;
                double r = cost[i * n + j] - u[i] - v[j];
                if (r < best) {
                    best = r;
                    ei = i;
                    ej = j;
                    if (bland) break;
                }
            }
        }
        if (ei == m) break;  // optimal

        auto cycle = find_cycle(basis, ei, ej);
        // Odd positions are "minus" cells.
        double theta = std::numeric_limits<double>::infinity();
        for (std::size_t k = 1; k < cycle.size(); k += 2)
            theta = std::min(theta, plan.flows[cycle[k].first * n + cycle[k].second]);
        std::size_t li = m, lj = n;
        for (std::size_t k = 1; k < cycle.size(); k += 2) {
            auto [ci, cj] = cycle[k];
            if (plan.flows[ci * n + cj] <= theta &&
                (li == m || ci < li || (ci == li && cj < lj))) {
                li = ci;
                lj = cj;
            }
        }
        for (std::size_t k = 0; k < cycle.size(); ++k) {
            auto [ci, cj] = cycle[k];
            if (k % 2 == 0)
                plan.flows[ci * n + cj] += theta;
            else
                plan.flows[ci * n + cj] -= theta;
        }
        plan.flows[li * n + lj] = 0.0;
        basis.remove(li, lj);
        basis.add(ei, ej);
        in_basis[li * n + lj] = 0;
        in_basis[ei * n + ej] = 1;
    }

    plan.cost = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) plan.cost += plan.flows[i * n + j] * cost[i * n + j];
    return plan;
}

double wmd(const std::vector<std::string>& pred_tokens,
           const std::vector<std::string>& gold_tokens,
           const std::map<std::string, Vec>& token_embeddings) {
    TokenBag a = make_bag(pred_tokens, token_embeddings);
    TokenBag b = make_bag(gold_tokens, token_embeddings);
    return solve_emd(a, b).cost;
}

std::string plan_to_csv(const TransportPlan& plan) {
    std::ostringstream out;
    out << "row,col,flow\n";
    for (std::size_t i = 0; i < plan.rows; ++i)
        for (std::size_t j = 0; j < plan.cols; ++j)
            if (plan.flow(i, j) > 0.0) out << i << "," << j << "," << plan.flow(i, j) << "\n";
    return out.str();
}

}  // namespace honestcalib
