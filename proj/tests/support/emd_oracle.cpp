#include "emd_oracle.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace honestcalib::testsupport {

namespace {

struct Side {
    std::vector<std::string> tokens;
    std::vector<long long> counts;
    std::vector<const Vec*> embs;
};

Side collect(const std::vector<std::string>& tokens, const std::map<std::string, Vec>& embeddings) {
    Side s;
    std::map<std::string, long long> counts;
    for (const auto& t : tokens) ++counts[t];
    for (const auto& [tok, cnt] : counts) {
        auto it = embeddings.find(tok);
        if (it == embeddings.end()) throw std::invalid_argument("oracle: missing embedding " + tok);
        s.tokens.push_back(tok);
        s.counts.push_back(cnt);
        s.embs.push_back(&it->second);
    }
    return s;
}

}  // namespace

double emd_oracle(const std::vector<std::string>& pred_tokens,
                  const std::vector<std::string>& gold_tokens,
                  const std::map<std::string, Vec>& token_embeddings) {
    if (pred_tokens.empty() || gold_tokens.empty())
        throw std::invalid_argument("oracle: empty token list");
    Side src = collect(pred_tokens, token_embeddings);
    Side dst = collect(gold_tokens, token_embeddings);
    const std::size_t m = src.tokens.size();
    const std::size_t n = dst.tokens.size();
    const long long total_src = static_cast<long long>(pred_tokens.size());
    const long long total_dst = static_cast<long long>(gold_tokens.size());

    // Cross-scale both marginals to the common total total_src * total_dst.
    std::vector<long long> supply(m), demand(n);
    for (std::size_t i = 0; i < m; ++i) supply[i] = src.counts[i] * total_dst;
    for (std::size_t j = 0; j < n; ++j) demand[j] = dst.counts[j] * total_src;

    std::vector<double> cost(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = euclidean(*src.embs[i], *dst.embs[j]);

    std::vector<long long> flow(m * n, 0);
    const double inf = std::numeric_limits<double>::infinity();

    long long remaining = total_src * total_dst;
    while (remaining > 0) {
        // Bellman-Ford from the set of sources with remaining supply.
        // Nodes: 0..m-1 sources, m..m+n-1 sinks.
        std::vector<double> dist(m + n, inf);
        std::vector<int> prev(m + n, -1);  // for sinks: the source it came from; for sources: sink
        for (std::size_t i = 0; i < m; ++i)
            if (supply[i] > 0) dist[i] = 0.0;
        bool changed = true;
        while (changed) {
            changed = false;
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    double c = cost[i * n + j];
                    if (dist[i] < inf && dist[i] + c < dist[m + j] - 1e-15) {
                        dist[m + j] = dist[i] + c;
                        prev[m + j] = static_cast<int>(i);
                        changed = true;
                    }
                    if (flow[i * n + j] > 0 && dist[m + j] < inf &&
                        dist[m + j] - c < dist[i] - 1e-15) {
                        dist[i] = dist[m + j] - c;
                        prev[i] = static_cast<int>(m + j);
                        changed = true;
                    }
                }
        }
        // Cheapest reachable sink with remaining demand.
        int best = -1;
        for (std::size_t j = 0; j < n; ++j)
            if (demand[j] > 0 && dist[m + j] < inf &&
                (best < 0 || dist[m + j] < dist[m + static_cast<std::size_t>(best)]))
                best = static_cast<int>(j);
        if (best < 0) throw std::runtime_error("oracle: no augmenting path");

        // Walk back to the tree root, collecting the bottleneck. A source
        // node reached via prev was entered along a backward edge, which is
        // bounded by the flow it would cancel.
        long long push = demand[static_cast<std::size_t>(best)];
        int node = static_cast<int>(m) + best;
        while (prev[node] >= 0) {
            int p = prev[node];
            if (node < static_cast<int>(m))
                push = std::min(push, flow[static_cast<std::size_t>(node) * n +
                                           static_cast<std::size_t>(p - static_cast<int>(m))]);
            node = p;
        }
        push = std::min(push, supply[static_cast<std::size_t>(node)]);
        if (push <= 0) throw std::runtime_error("oracle: stalled augmentation");
        int src_node = node;

        // Apply along the path.
        node = static_cast<int>(m) + best;
        while (true) {
            int p = prev[node];
            if (p < 0) break;
            if (node >= static_cast<int>(m)) {
                flow[static_cast<std::size_t>(p) * n +
                     static_cast<std::size_t>(node - static_cast<int>(m))] += push;
            } else {
                flow[static_cast<std::size_t>(node) * n +
                     static_cast<std::size_t>(p - static_cast<int>(m))] -= push;
            }
            node = p;
        }
        supply[static_cast<std::size_t>(src_node)] -= push;
        demand[static_cast<std::size_t>(best)] -= push;
        remaining -= push;
    }

    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) total += static_cast<double>(flow[i * n + j]) * cost[i * n + j];
    return total / (static_cast<double>(total_src) * static_cast<double>(total_dst));
}

}  // namespace honestcalib::testsupport
