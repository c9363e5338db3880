#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace clubench {

struct Network;

/// Clusters over opaque node tokens. Possibly overlapping; never contains
/// an empty cluster.
struct Clustering {
    std::vector<std::vector<std::string>> clusters;

    size_t cluster_count() const { return clusters.size(); }

    /// Distinct tokens across all clusters.
    std::vector<std::string> universe() const;

    /// True when some token appears in more than one cluster.
    bool overlapping() const;
};

/// Reads "one cluster per line" text: whitespace-separated tokens,
/// '#'-lines and blank lines skipped. A token repeated within one line
/// raises ParseError.
Clustering read_cnl(const std::filesystem::path& path);

/// One line per cluster, tokens space-separated, in stored order.
void write_cnl(const Clustering& c, const std::filesystem::path& path);

/// Clusters resolved against a network: member indices into net.names.
/// Tokens unknown to the network raise InvalidArgument.
struct DenseClusters {
    int n = 0;                              // node count of the network
    std::vector<std::vector<int>> clusters; // member node ids
    std::vector<int> membership_count;      // per node, how many clusters hold it

    bool overlapping() const;
    int assigned_count() const; // nodes with membership_count > 0
};
DenseClusters bind_clusters(const Clustering& c, const Network& net);

/// Resolves two clusterings over their common universe for comparison
/// measures. The token sets must be equal; otherwise InvalidArgument
/// reports the size of the symmetric difference.
struct BoundPair {
    int n = 0;                         // universe size
    std::vector<std::vector<int>> a;   // clusters as node-id lists
    std::vector<std::vector<int>> b;
};
BoundPair bind_pair(const Clustering& a, const Clustering& b);

} // namespace clubench
