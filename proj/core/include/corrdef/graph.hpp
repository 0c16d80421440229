#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace corrdef {

/// A set of vertices encoded as a bitmask: bit v is set iff vertex v is in the set.
using Subset = std::uint32_t;

/// Largest vertex count a Graph may carry (bitmask width minus one).
inline constexpr int kMaxGraphVertices = 31;

inline constexpr Subset singleton(int v) { return Subset{1} << v; }
inline constexpr bool contains(Subset a, int v) { return ((a >> v) & 1U) != 0; }
inline constexpr Subset full_set(int n) { return n >= 32 ? ~Subset{0} : (Subset{1} << n) - 1; }

/// Unordered edge stored with u < v.
struct Edge {
    int u;
    int v;
    friend bool operator==(const Edge&, const Edge&) = default;
};

/// Two disjoint vertex classes covering the vertex set.
struct Bipartition {
    std::vector<int> hat;
    std::vector<int> check;
};

/// Finite simple undirected graph on vertices 0..n-1.
///
/// Edges are canonicalised (u < v) and kept in lexicographic order; the
/// position of an edge in edges() is its edge index, which is how per-edge
/// parameters are stored elsewhere in the library.
class Graph {
public:
    Graph(int n_vertices, const std::vector<std::pair<int, int>>& edges,
          std::optional<Bipartition> bipartition = std::nullopt);

    static Graph complete(int n);
    /// K_{m,n} with hat = {0..m-1} and check = {m..m+n-1}.
    static Graph complete_bipartite(int m, int n);
    static Graph edgeless(int n);

    int n_vertices() const noexcept { return n_; }
    std::span<const Edge> edges() const noexcept { return edges_; }
    std::size_t n_edges() const noexcept { return edges_.size(); }

    std::optional<std::size_t> edge_index(int u, int v) const;
    bool has_edge(int u, int v) const { return edge_index(u, v).has_value(); }
    Subset neighbors(int u) const { return neighbor_masks_.at(static_cast<std::size_t>(u)); }

    const std::optional<Bipartition>& bipartition() const noexcept { return bipartition_; }

    bool is_complete() const noexcept;
    bool is_complete_bipartite() const noexcept;

    /// Graph with vertex v renamed to perm[v].
    Graph relabeled(std::span<const int> perm) const;

private:
    int n_;
    std::vector<Edge> edges_;
    std::vector<int> index_;  // n*n, -1 for non-edges
    std::vector<Subset> neighbor_masks_;
    std::optional<Bipartition> bipartition_;
};

/// Throws std::out_of_range if the subset has a bit at or above n.
void check_subset(Subset a, int n);

/// Validates a permutation of 0..n-1.
void check_permutation(std::span<const int> perm, int n);

/// Image of a subset under a vertex permutation.
Subset permute_subset(Subset a, std::span<const int> perm);

}  // namespace corrdef
