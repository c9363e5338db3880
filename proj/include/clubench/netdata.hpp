#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "clubench/clustering.hpp"

namespace clubench {

/// An edge list over opaque node tokens. Node indices are positions in
/// `names`; files never see them, so token spelling survives round-trips.
struct Network {
    struct Edge {
        int src = 0;
        int dst = 0;
        double weight = 1.0;
    };

    bool directed = false;
    bool weighted = false;
    std::vector<std::string> names;              // enumeration order
    std::unordered_map<std::string, int> index;  // token -> position in names
    std::vector<Edge> edges;

    int node_count() const { return static_cast<int>(names.size()); }
    int edge_count() const { return static_cast<int>(edges.size()); }

    /// Registers a token if new; returns its index either way.
    int add_node(const std::string& token);

    /// Sum of edge weights (each undirected edge counted once).
    double total_weight() const;

    /// Weighted degree per node; a self-loop contributes twice its weight.
    /// For directed networks this is in-degree + out-degree.
    std::vector<double> weighted_degrees() const;
};

/// Undirected neighbor lists: for each node, (neighbor, weight) pairs.
/// Directed edges are inserted in both directions; self-loops appear once.
std::vector<std::vector<std::pair<int, double>>> build_adjacency(const Network& net);

/// Reads an edge list. The extension selects the dialect:
///   .nse  undirected, .nsa directed — optional header
///         "# Nodes: N Edges|Arcs: M Weighted: 0|1"; lines "src dst [weight]"
///   .ncol undirected; no header; weighted when a third column is present
/// '#'-lines are comments. Duplicate edges (in either orientation for the
/// undirected dialects) and non-positive weights raise ParseError. A header
/// whose counts disagree with the body is reported through `warn` and the
/// body wins.
Network read_network(const std::filesystem::path& path,
                     const std::function<void(const std::string&)>& warn = {});

/// Writes the dialect matching the extension; read_network(write(net))
/// reproduces names, edges and flags exactly.
void write_network(const Network& net, const std::filesystem::path& path);

/// Deterministic reorder: permutes node enumeration order and edge line
/// order, and flips undirected endpoint order per edge. The k-th shuffle of
/// a network under one seed is a pure function of (seed, k); k = 0 returns
/// the input unchanged, so its serialization is byte-identical.
Network shuffle_network(const Network& net, int k, uint64_t seed);

/// Planted-partition generator: n nodes in k near-equal groups; each
/// intra-group pair becomes an edge with probability p_in, each cross-group
/// pair with p_out. Sparse regimes are sampled by geometric gap-skipping,
/// so the cost is proportional to the edges produced, not the pairs
/// considered. Requires n >= 1, 1 <= k <= n, 0 <= p_out <= p_in <= 1.
struct PlantedPartition {
    Network net;        // undirected, unweighted; tokens "1".."n"
    Clustering truth;   // the planted groups, disjoint cover
};
PlantedPartition gen_planted_partition(int n, int k, double p_in, double p_out, uint64_t seed);

} // namespace clubench
