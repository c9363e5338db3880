#pragma once

#include <string>
#include <vector>

#include "clubench/clustering.hpp"

namespace clubench {

struct Network;

namespace measures {

/// Newman-Girvan modularity of a disjoint clustering: sum over clusters of
/// (internal weight / W) - (cluster degree / 2W)^2, with W the total edge
/// weight and self-loops counting twice toward degree. Nodes missing from
/// the clustering are treated as singleton clusters. Overlapping input or
/// an empty (zero-weight) network raises InvalidArgument.
double modularity(const Network& net, const DenseClusters& c);

/// Mean conductance over clusters: cut(S) / min(vol(S), vol(V) - vol(S)).
/// Clusters whose denominator is zero (empty cut-universe side) are skipped;
/// `skipped`, when given, receives their count. All clusters degenerate
/// raises InvalidArgument. Lower is better.
double conductance(const Network& net, const DenseClusters& c, int* skipped = nullptr);

/// Mutual information between two disjoint covers of one node set,
/// normalized by the larger entropy (natural logs). Degenerate zero-entropy
/// sides follow the 0/0 -> 0 convention, except two identical trivial
/// partitions, which compare as 1.
double nmi(const BoundPair& p);

/// Omega index: fraction of node pairs whose co-membership counts agree in
/// both clusterings, corrected for chance. Handles overlaps. When the
/// correction denominator vanishes the clusterings agree on every pair and
/// the value is 1 by convention. Requires at least two nodes.
double omega(const BoundPair& p);

/// Average best-match F1 in both directions; `f1a` is their arithmetic
/// mean, `f1h` their harmonic mean (0 when both directions are 0).
struct F1Pair {
    double f1a = 0;
    double f1h = 0;
};
F1Pair f1_scores(const BoundPair& p);

/// Catalog entry for one quality measure.
struct MeasureInfo {
    std::string name;
    bool needs_network = false; // intrinsic: needs the edge list
    bool needs_truth = false;   // extrinsic: needs a reference clustering
    bool lower_better = false;  // aggregation picks min over levels
};

/// Built-in measures in canonical order: modularity, conductance, nmi,
/// omega, f1a, f1h.
const std::vector<MeasureInfo>& catalog();
const MeasureInfo* find_measure(const std::string& name);

/// Dispatch by name; net/truth may be null for measures that do not need
/// them (passing null for a required input raises InvalidArgument).
double evaluate(const std::string& name, const Network* net, const Clustering& cl,
                const Clustering* truth);

/// Straight-line re-implementations used to cross-check the parallel
/// kernels above; same contracts, deliberately different traversals.
namespace serial {
double modularity(const Network& net, const DenseClusters& c);
double conductance(const Network& net, const DenseClusters& c, int* skipped = nullptr);
double nmi(const BoundPair& p);
double omega(const BoundPair& p);
F1Pair f1_scores(const BoundPair& p);
} // namespace serial

} // namespace measures
} // namespace clubench
