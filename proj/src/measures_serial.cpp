#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_set>

#include "clubench/measures.hpp"
#include "clubench/netdata.hpp"
#include "clubench/util.hpp"

// Reference implementations: cluster-centric where the parallel kernels are
// edge-centric, ordered containers where they hash. Slow and obvious on
// purpose; the unit tests hold both routes to identical results.

namespace clubench {
namespace measures {
namespace serial {

double modularity(const Network& net, const DenseClusters& c) {
    const double W = net.total_weight();
    if (net.edges.empty() || W <= 0)
        throw InvalidArgument("modularity is undefined on an empty network");
    if (c.overlapping())
        throw InvalidArgument("measure requires a disjoint clustering, got overlapping clusters");

    const auto adj = build_adjacency(net);
    const auto deg = net.weighted_degrees();

    std::vector<std::vector<int>> groups = c.clusters;
    for (int u = 0; u < c.n; ++u)
        if (c.membership_count[u] == 0) groups.push_back({u});

    double q = 0;
    for (const auto& g : groups) {
        std::unordered_set<int> in_g(g.begin(), g.end());
        double acc = 0; // twice the internal weight
        double dsum = 0;
        for (int u : g) {
            dsum += deg[u];
            for (const auto& [v, w] : adj[u]) {
                if (v == u)
                    acc += 2 * w;
                else if (in_g.count(v))
                    acc += w;
            }
        }
        const double frac = dsum / (2 * W);
        q += (acc / 2) / W - frac * frac;
    }
    return q;
}

double conductance(const Network& net, const DenseClusters& c, int* skipped) {
    if (c.clusters.empty()) throw InvalidArgument("conductance needs at least one cluster");
    const auto adj = build_adjacency(net);
    const auto deg = net.weighted_degrees();
    double total_vol = 0;
    for (double d : deg) total_vol += d;

    double sum = 0;
    int used = 0, skip = 0;
    for (const auto& g : c.clusters) {
        std::set<int> in_g(g.begin(), g.end());
        double vol = 0, cut = 0;
        for (int u : g) {
            vol += deg[u];
            for (const auto& [v, w] : adj[u])
                if (v != u && !in_g.count(v)) cut += w;
        }
        const double denom = std::min(vol, total_vol - vol);
        if (denom <= 0) {
            ++skip;
            continue;
        }
        sum += cut / denom;
        ++used;
    }
    if (skipped) *skipped = skip;
    if (used == 0)
        throw InvalidArgument("conductance degenerate: every cluster has an empty side");
    return sum / used;
}

namespace {

std::vector<int> strict_labels(int n, const std::vector<std::vector<int>>& clusters,
                               const char* side) {
    std::vector<int> label(n, -1);
    for (size_t cid = 0; cid < clusters.size(); ++cid)
        for (int u : clusters[cid]) {
            if (label[u] >= 0)
                throw InvalidArgument(std::string("mutual information requires disjoint covers; "
                                                  "a node appears twice in ") +
                                      side);
            label[u] = static_cast<int>(cid);
        }
    for (int u = 0; u < n; ++u)
        if (label[u] < 0)
            throw InvalidArgument(std::string("mutual information requires full covers; "
                                              "a node is unassigned in ") +
                                  side);
    return label;
}

} // namespace

double nmi(const BoundPair& p) {
    if (p.n == 0) throw InvalidArgument("mutual information needs a non-empty node set");
    const auto la = strict_labels(p.n, p.a, "the first clustering");
    const auto lb = strict_labels(p.n, p.b, "the second clustering");
    if (p.a.size() == 1 && p.b.size() == 1) return 1.0;

    std::map<std::pair<int, int>, long long> cont;
    for (int u = 0; u < p.n; ++u) ++cont[{la[u], lb[u]}];
    std::map<int, long long> na, nb;
    for (const auto& [k, v] : cont) {
        na[k.first] += v;
        nb[k.second] += v;
    }

    const double n = p.n;
    auto entropy = [n](const std::map<int, long long>& marg) {
        double h = 0;
        for (const auto& [k, v] : marg) {
            (void)k;
            if (v > 0) h -= (v / n) * std::log(v / n);
        }
        return h;
    };
    const double norm = std::max(entropy(na), entropy(nb));
    if (norm <= 0) return 0.0;

    double mi = 0;
    for (const auto& [k, v] : cont)
        mi += (v / n) * std::log(n * v / (static_cast<double>(na[k.first]) * nb[k.second]));
    return std::clamp(mi / norm, 0.0, 1.0);
}

namespace {

// pair (i<j) -> number of clusters holding both, skipping zero entries
std::map<std::pair<int, int>, long long> pair_counts(const std::vector<std::vector<int>>& cls) {
    std::map<std::pair<int, int>, long long> cnt;
    for (const auto& cl : cls) {
        std::vector<int> s(cl.begin(), cl.end());
        std::sort(s.begin(), s.end());
        for (size_t i = 0; i < s.size(); ++i)
            for (size_t j = i + 1; j < s.size(); ++j) ++cnt[{s[i], s[j]}];
    }
    return cnt;
}

} // namespace

double omega(const BoundPair& p) {
    if (p.n < 2) throw InvalidArgument("omega needs at least two nodes");
    const auto ca = pair_counts(p.a);
    const auto cb = pair_counts(p.b);

    std::set<std::pair<int, int>> keys;
    for (const auto& [k, v] : ca) {
        (void)v;
        keys.insert(k);
    }
    for (const auto& [k, v] : cb) {
        (void)v;
        keys.insert(k);
    }

    const long long npairs = static_cast<long long>(p.n) * (p.n - 1) / 2;
    std::map<long long, long long> na, nb; // co-membership count -> #pairs
    long long agree = npairs - static_cast<long long>(keys.size()); // (0,0) pairs
    na[0] = npairs - static_cast<long long>(ca.size());
    nb[0] = npairs - static_cast<long long>(cb.size());
    for (const auto& [k, va] : ca) na[va] += 1;
    for (const auto& [k, vb] : cb) nb[vb] += 1;
    for (const auto& k : keys) {
        auto ia = ca.find(k);
        auto ib = cb.find(k);
        const long long ta = ia == ca.end() ? 0 : ia->second;
        const long long tb = ib == cb.end() ? 0 : ib->second;
        if (ta == tb) ++agree;
    }

    const double N = static_cast<double>(npairs);
    const double obs = agree / N;
    double expd = 0;
    for (const auto& [t, va] : na) {
        auto it = nb.find(t);
        if (it != nb.end()) expd += (va / N) * (it->second / N);
    }
    const double denom = 1.0 - expd;
    if (std::abs(denom) < 1e-15) return 1.0;
    return std::min(1.0, (obs - expd) / denom);
}

namespace {

double best_match_mean(const std::vector<std::vector<int>>& xs,
                       const std::vector<std::vector<int>>& ys) {
    if (xs.empty() || ys.empty())
        throw InvalidArgument("f1 needs non-empty clusterings on both sides");
    std::vector<std::vector<int>> ysorted(ys);
    for (auto& y : ysorted) std::sort(y.begin(), y.end());

    double total = 0;
    for (const auto& x : xs) {
        std::vector<int> xsorted(x);
        std::sort(xsorted.begin(), xsorted.end());
        double best = 0;
        for (const auto& y : ysorted) {
            std::vector<int> common;
            std::set_intersection(xsorted.begin(), xsorted.end(), y.begin(), y.end(),
                                  std::back_inserter(common));
            if (common.empty()) continue;
            best = std::max(best, 2.0 * common.size() / (xsorted.size() + y.size()));
        }
        total += best;
    }
    return total / static_cast<double>(xs.size());
}

} // namespace

F1Pair f1_scores(const BoundPair& p) {
    const double dab = best_match_mean(p.a, p.b);
    const double dba = best_match_mean(p.b, p.a);
    F1Pair out;
    out.f1a = (dab + dba) / 2;
    out.f1h = dab + dba > 0 ? 2 * dab * dba / (dab + dba) : 0.0;
    return out;
}

} // namespace serial
} // namespace measures
} // namespace clubench
