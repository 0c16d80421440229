#include "corrdef/graph.hpp"

#include "corrdef/errors.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace corrdef {

CapacityExceeded::CapacityExceeded(int n_vertices, int cap)
    : std::length_error("exact enumeration over " + std::to_string(n_vertices) +
                        " vertices exceeds the cap of " + std::to_string(cap)),
      n_vertices_(n_vertices),
      cap_(cap) {}

Graph::Graph(int n_vertices, const std::vector<std::pair<int, int>>& edges,
             std::optional<Bipartition> bipartition)
    : n_(n_vertices), bipartition_(std::move(bipartition)) {
    if (n_ < 1 || n_ > kMaxGraphVertices) {
        throw std::invalid_argument("graph needs between 1 and " +
                                    std::to_string(kMaxGraphVertices) + " vertices, got " +
                                    std::to_string(n_));
    }
    const auto n = static_cast<std::size_t>(n_);
    index_.assign(n * n, -1);
    neighbor_masks_.assign(n, 0);

    edges_.reserve(edges.size());
    for (auto [a, b] : edges) {
        if (a < 0 || b < 0 || a >= n_ || b >= n_) {
            throw std::invalid_argument("edge {" + std::to_string(a) + "," + std::to_string(b) +
                                        "} references a vertex outside 0.." +
                                        std::to_string(n_ - 1));
        }
        if (a == b) throw std::invalid_argument("self-loop at vertex " + std::to_string(a));
        edges_.push_back({std::min(a, b), std::max(a, b)});
    }
    std::sort(edges_.begin(), edges_.end(),
              [](const Edge& x, const Edge& y) { return std::pair{x.u, x.v} < std::pair{y.u, y.v}; });
    if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end()) {
        throw std::invalid_argument("duplicate edge in graph");
    }
    for (std::size_t i = 0; i < edges_.size(); ++i) {
        const auto u = static_cast<std::size_t>(edges_[i].u);
        const auto v = static_cast<std::size_t>(edges_[i].v);
        index_[u * n + v] = index_[v * n + u] = static_cast<int>(i);
        neighbor_masks_[u] |= singleton(edges_[i].v);
        neighbor_masks_[v] |= singleton(edges_[i].u);
    }

    if (bipartition_) {
        Subset hat = 0;
        Subset check = 0;
        for (int v : bipartition_->hat) {
            if (v < 0 || v >= n_ || contains(hat, v)) throw std::invalid_argument("bad hat class");
            hat |= singleton(v);
        }
        for (int v : bipartition_->check) {
            if (v < 0 || v >= n_ || contains(check, v)) throw std::invalid_argument("bad check class");
            check |= singleton(v);
        }
        if ((hat & check) != 0 || (hat | check) != full_set(n_)) {
            throw std::invalid_argument("bipartition classes must be disjoint and cover all vertices");
        }
        for (const Edge& e : edges_) {
            if (contains(hat, e.u) == contains(hat, e.v)) {
                throw std::invalid_argument("edge {" + std::to_string(e.u) + "," +
                                            std::to_string(e.v) +
                                            "} does not join the two bipartition classes");
            }
        }
    }
}

Graph Graph::complete(int n) {
    std::vector<std::pair<int, int>> edges;
    for (int u = 0; u < n; ++u)
        for (int v = u + 1; v < n; ++v) edges.emplace_back(u, v);
    return Graph(n, edges);
}

Graph Graph::complete_bipartite(int m, int n) {
    if (m < 1 || n < 1) throw std::invalid_argument("complete bipartite graph needs M, N >= 1");
    Bipartition parts;
    std::vector<std::pair<int, int>> edges;
    for (int u = 0; u < m; ++u) parts.hat.push_back(u);
    for (int v = m; v < m + n; ++v) parts.check.push_back(v);
    for (int u = 0; u < m; ++u)
        for (int v = m; v < m + n; ++v) edges.emplace_back(u, v);
    return Graph(m + n, edges, std::move(parts));
}

Graph Graph::edgeless(int n) { return Graph(n, {}); }

std::optional<std::size_t> Graph::edge_index(int u, int v) const {
    if (u < 0 || v < 0 || u >= n_ || v >= n_) {
        throw std::out_of_range("vertex index out of range");
    }
    const int idx = index_[static_cast<std::size_t>(u * n_ + v)];
    if (idx < 0) return std::nullopt;
    return static_cast<std::size_t>(idx);
}

bool Graph::is_complete() const noexcept {
    return edges_.size() == static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_ - 1) / 2;
}

bool Graph::is_complete_bipartite() const noexcept {
    if (!bipartition_) return false;
    return edges_.size() == bipartition_->hat.size() * bipartition_->check.size();
}

Graph Graph::relabeled(std::span<const int> perm) const {
    check_permutation(perm, n_);
    std::vector<std::pair<int, int>> edges;
    edges.reserve(edges_.size());
    for (const Edge& e : edges_) {
        edges.emplace_back(perm[static_cast<std::size_t>(e.u)], perm[static_cast<std::size_t>(e.v)]);
    }
    std::optional<Bipartition> parts;
    if (bipartition_) {
        parts.emplace();
        for (int v : bipartition_->hat) parts->hat.push_back(perm[static_cast<std::size_t>(v)]);
        for (int v : bipartition_->check) parts->check.push_back(perm[static_cast<std::size_t>(v)]);
    }
    return Graph(n_, edges, std::move(parts));
}

void check_subset(Subset a, int n) {
    if ((a & ~full_set(n)) != 0) {
        throw std::out_of_range("subset references a vertex index >= " + std::to_string(n));
    }
}

void check_permutation(std::span<const int> perm, int n) {
    if (perm.size() != static_cast<std::size_t>(n)) {
        throw std::invalid_argument("permutation has wrong length");
    }
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (int p : perm) {
        if (p < 0 || p >= n || seen[static_cast<std::size_t>(p)]) {
            throw std::invalid_argument("not a permutation of the vertex set");
        }
        seen[static_cast<std::size_t>(p)] = true;
    }
}

Subset permute_subset(Subset a, std::span<const int> perm) {
    Subset out = 0;
    for (std::size_t v = 0; v < perm.size(); ++v) {
        if (contains(a, static_cast<int>(v))) out |= singleton(perm[v]);
    }
    return out;
}

}  // namespace corrdef
