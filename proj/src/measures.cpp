#include "clubench/measures.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "clubench/netdata.hpp"
#include "clubench/util.hpp"

#if defined(_OPENMP)
#include <omp.h>
#else
static inline int omp_get_max_threads() { return 1; }
static inline int omp_get_thread_num() { return 0; }
#endif

namespace clubench {
namespace measures {

namespace {

// Cluster id per node for a disjoint clustering; nodes outside any cluster
// get fresh singleton ids. Returns the total cluster count.
int label_nodes(const DenseClusters& c, std::vector<int>& label) {
    if (c.overlapping())
        throw InvalidArgument("measure requires a disjoint clustering, got overlapping clusters");
    label.assign(c.n, -1);
    int next = 0;
    for (const auto& cl : c.clusters) {
        for (int u : cl) label[u] = next;
        ++next;
    }
    for (int u = 0; u < c.n; ++u)
        if (label[u] < 0) label[u] = next++;
    return next;
}

// Per-node sorted membership lists (cluster ids); non-members get empty lists.
std::vector<std::vector<int>> memberships(int n, const std::vector<std::vector<int>>& clusters) {
    std::vector<std::vector<int>> m(n);
    for (size_t c = 0; c < clusters.size(); ++c)
        for (int u : clusters[c]) m[u].push_back(static_cast<int>(c));
    // insertion is already by ascending c, so the lists are sorted
    return m;
}

size_t intersect_count(const std::vector<int>& a, const std::vector<int>& b) {
    size_t n = 0, i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] == b[j]) {
            ++n;
            ++i;
            ++j;
        } else if (a[i] < b[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    return n;
}

// Requires each node in exactly one cluster; returns per-node labels.
std::vector<int> cover_labels(int n, const std::vector<std::vector<int>>& clusters,
                              const char* side) {
    std::vector<int> label(n, -1);
    for (size_t c = 0; c < clusters.size(); ++c) {
        for (int u : clusters[c]) {
            if (label[u] >= 0)
                throw InvalidArgument(std::string("mutual information requires disjoint covers; "
                                                  "a node appears twice in ") +
                                      side);
            label[u] = static_cast<int>(c);
        }
    }
    for (int u = 0; u < n; ++u)
        if (label[u] < 0)
            throw InvalidArgument(std::string("mutual information requires full covers; "
                                              "a node is unassigned in ") +
                                  side);
    return label;
}

} // namespace

double modularity(const Network& net, const DenseClusters& c) {
    const double W = net.total_weight();
    if (net.edges.empty() || W <= 0)
        throw InvalidArgument("modularity is undefined on an empty network");

    std::vector<int> label;
    const int nclusters = label_nodes(c, label);

    const int nthreads = omp_get_max_threads();
    std::vector<std::vector<double>> win_t(nthreads), deg_t(nthreads);
    const auto& edges = net.edges;
    const long long m = static_cast<long long>(edges.size());
#pragma omp parallel
    {
        auto& win = win_t[omp_get_thread_num()];
        auto& deg = deg_t[omp_get_thread_num()];
        win.assign(nclusters, 0.0);
        deg.assign(nclusters, 0.0);
#pragma omp for schedule(static)
        for (long long i = 0; i < m; ++i) {
            const auto& e = edges[i];
            const int cu = label[e.src], cv = label[e.dst];
            if (cu == cv) win[cu] += e.weight;
            deg[cu] += e.weight;
            deg[cv] += e.weight; // self-loops land here twice, as intended
        }
    }
    // merge in thread order, then reduce in cluster order: deterministic
    // for a fixed thread count
    std::vector<double> win(nclusters, 0.0), deg(nclusters, 0.0);
    for (int t = 0; t < nthreads; ++t) {
        if (win_t[t].empty()) continue;
        for (int cid = 0; cid < nclusters; ++cid) {
            win[cid] += win_t[t][cid];
            deg[cid] += deg_t[t][cid];
        }
    }
    double q = 0;
    for (int cid = 0; cid < nclusters; ++cid) {
        const double frac = deg[cid] / (2 * W);
        q += win[cid] / W - frac * frac;
    }
    return q;
}

double conductance(const Network& net, const DenseClusters& c, int* skipped) {
    if (c.clusters.empty()) throw InvalidArgument("conductance needs at least one cluster");
    const std::vector<double> deg = net.weighted_degrees();
    const double total_vol = [&] {
        double s = 0;
        for (double d : deg) s += d;
        return s;
    }();

    const auto memb = memberships(c.n, c.clusters);
    const int nclusters = static_cast<int>(c.clusters.size());

    std::vector<double> vol(nclusters, 0.0);
    for (int cid = 0; cid < nclusters; ++cid)
        for (int u : c.clusters[cid]) vol[cid] += deg[u];

    // cut[c] += w for every edge with exactly one endpoint in c
    const int nthreads = omp_get_max_threads();
    std::vector<std::vector<double>> cut_t(nthreads);
    const auto& edges = net.edges;
    const long long m = static_cast<long long>(edges.size());
#pragma omp parallel
    {
        auto& cut = cut_t[omp_get_thread_num()];
        cut.assign(nclusters, 0.0);
#pragma omp for schedule(static)
        for (long long i = 0; i < m; ++i) {
            const auto& e = edges[i];
            if (e.src == e.dst) continue;
            const auto& mu = memb[e.src];
            const auto& mv = memb[e.dst];
            for (int cid : mu)
                if (!std::binary_search(mv.begin(), mv.end(), cid)) cut[cid] += e.weight;
            for (int cid : mv)
                if (!std::binary_search(mu.begin(), mu.end(), cid)) cut[cid] += e.weight;
        }
    }
    std::vector<double> cut(nclusters, 0.0);
    for (int t = 0; t < nthreads; ++t) {
        if (cut_t[t].empty()) continue;
        for (int cid = 0; cid < nclusters; ++cid) cut[cid] += cut_t[t][cid];
    }

    double sum = 0;
    int used = 0, skip = 0;
    for (int cid = 0; cid < nclusters; ++cid) {
        const double denom = std::min(vol[cid], total_vol - vol[cid]);
        if (denom <= 0) {
            ++skip;
            continue;
        }
        sum += cut[cid] / denom;
        ++used;
    }
    if (skipped) *skipped = skip;
    if (used == 0)
        throw InvalidArgument("conductance degenerate: every cluster has an empty side");
    return sum / used;
}

double nmi(const BoundPair& p) {
    if (p.n == 0) throw InvalidArgument("mutual information needs a non-empty node set");
    const std::vector<int> la = cover_labels(p.n, p.a, "the first clustering");
    const std::vector<int> lb = cover_labels(p.n, p.b, "the second clustering");
    const int ka = static_cast<int>(p.a.size());
    const int kb = static_cast<int>(p.b.size());

    // two single-cluster partitions are identical: zero entropy both sides
    if (ka == 1 && kb == 1) return 1.0;

    // contingency counts via per-thread maps keyed (la << 32) | lb
    const int nthreads = omp_get_max_threads();
    std::vector<std::unordered_map<uint64_t, long long>> cont_t(nthreads);
#pragma omp parallel
    {
        auto& cont = cont_t[omp_get_thread_num()];
#pragma omp for schedule(static)
        for (int u = 0; u < p.n; ++u)
            ++cont[(static_cast<uint64_t>(la[u]) << 32) | static_cast<uint32_t>(lb[u])];
    }
    std::unordered_map<uint64_t, long long> cont;
    for (auto& part : cont_t)
        for (auto& [k, v] : part) cont[k] += v;

    std::vector<long long> na(ka, 0), nb(kb, 0);
    for (const auto& [k, v] : cont) {
        na[static_cast<int>(k >> 32)] += v;
        nb[static_cast<int>(k & 0xffffffffu)] += v;
    }

    const double n = p.n;
    double ha = 0, hb = 0;
    for (long long v : na)
        if (v > 0) ha -= (v / n) * std::log(v / n);
    for (long long v : nb)
        if (v > 0) hb -= (v / n) * std::log(v / n);
    // one trivial side: mutual information is 0, and 0/0 counts as 0
    const double norm = std::max(ha, hb);
    if (norm <= 0) return 0.0;

    // iterate cells in a fixed (sorted) order so the sum is reproducible
    std::vector<std::pair<uint64_t, long long>> cells(cont.begin(), cont.end());
    std::sort(cells.begin(), cells.end());
    double mi = 0;
    for (const auto& [k, v] : cells) {
        const long long ra = na[static_cast<int>(k >> 32)];
        const long long rb = nb[static_cast<int>(k & 0xffffffffu)];
        mi += (v / n) * std::log(n * v / (static_cast<double>(ra) * rb));
    }
    return std::clamp(mi / norm, 0.0, 1.0);
}

double omega(const BoundPair& p) {
    if (p.n < 2) throw InvalidArgument("omega needs at least two nodes");
    const auto ma = memberships(p.n, p.a);
    const auto mb = memberships(p.n, p.b);

    // joint histogram over node pairs: key = (shared in a) << 32 | (shared in b)
    const int nthreads = omp_get_max_threads();
    std::vector<std::unordered_map<uint64_t, long long>> hist_t(nthreads);
#pragma omp parallel
    {
        auto& hist = hist_t[omp_get_thread_num()];
#pragma omp for schedule(dynamic, 64)
        for (int i = 0; i < p.n; ++i) {
            for (int j = i + 1; j < p.n; ++j) {
                const uint64_t ta = intersect_count(ma[i], ma[j]);
                const uint64_t tb = intersect_count(mb[i], mb[j]);
                ++hist[(ta << 32) | tb];
            }
        }
    }
    std::unordered_map<uint64_t, long long> hist;
    for (auto& part : hist_t)
        for (auto& [k, v] : part) hist[k] += v;

    std::unordered_map<uint32_t, long long> na, nb;
    long long agree = 0;
    for (const auto& [k, v] : hist) {
        const uint32_t ta = static_cast<uint32_t>(k >> 32);
        const uint32_t tb = static_cast<uint32_t>(k & 0xffffffffu);
        na[ta] += v;
        nb[tb] += v;
        if (ta == tb) agree += v;
    }

    const double pairs = static_cast<double>(p.n) * (p.n - 1) / 2;
    const double obs = agree / pairs;
    double expd = 0;
    for (const auto& [t, va] : na) {
        auto it = nb.find(t);
        if (it != nb.end()) expd += (va / pairs) * (it->second / pairs);
    }
    const double denom = 1.0 - expd;
    // denominator 0 forces observed agreement 1: perfect score by convention
    if (std::abs(denom) < 1e-15) return 1.0;
    return std::min(1.0, (obs - expd) / denom);
}

namespace {

// Mean over X clusters of the best F1 against any Y cluster.
double best_match_mean(const std::vector<std::vector<int>>& xs,
                       const std::vector<std::vector<int>>& ys, int n) {
    if (xs.empty() || ys.empty())
        throw InvalidArgument("f1 needs non-empty clusterings on both sides");
    const auto ymemb = memberships(n, ys);

    const long long nx = static_cast<long long>(xs.size());
    double total = 0;
#pragma omp parallel reduction(+ : total)
    {
        std::unordered_map<int, long long> overlap;
#pragma omp for schedule(dynamic, 16)
        for (long long xi = 0; xi < nx; ++xi) {
            overlap.clear();
            for (int u : xs[xi])
                for (int yc : ymemb[u]) ++overlap[yc];
            double best = 0;
            for (const auto& [yc, ovl] : overlap) {
                const double f1 =
                    2.0 * ovl / (static_cast<double>(xs[xi].size()) + ys[yc].size());
                best = std::max(best, f1);
            }
            total += best; // stays 0 when nothing overlaps
        }
    }
    return total / static_cast<double>(nx);
}

} // namespace

F1Pair f1_scores(const BoundPair& p) {
    const double dab = best_match_mean(p.a, p.b, p.n);
    const double dba = best_match_mean(p.b, p.a, p.n);
    F1Pair out;
    out.f1a = (dab + dba) / 2;
    out.f1h = dab + dba > 0 ? 2 * dab * dba / (dab + dba) : 0.0;
    return out;
}

const std::vector<MeasureInfo>& catalog() {
    static const std::vector<MeasureInfo> cat = {
        {"modularity", true, false, false},
        {"conductance", true, false, true},
        {"nmi", false, true, false},
        {"omega", false, true, false},
        {"f1a", false, true, false},
        {"f1h", false, true, false},
    };
    return cat;
}

const MeasureInfo* find_measure(const std::string& name) {
    for (const auto& m : catalog())
        if (m.name == name) return &m;
    return nullptr;
}

double evaluate(const std::string& name, const Network* net, const Clustering& cl,
                const Clustering* truth) {
    const MeasureInfo* info = find_measure(name);
    if (!info) throw InvalidArgument("unknown measure '" + name + "'");
    if (info->needs_network && !net)
        throw InvalidArgument("measure '" + name + "' needs the network");
    if (info->needs_truth && !truth)
        throw InvalidArgument("measure '" + name + "' needs a ground-truth clustering");

    if (name == "modularity") return modularity(*net, bind_clusters(cl, *net));
    if (name == "conductance") return conductance(*net, bind_clusters(cl, *net));
    const BoundPair p = bind_pair(cl, *truth);
    if (name == "nmi") return nmi(p);
    if (name == "omega") return omega(p);
    const F1Pair f = f1_scores(p);
    return name == "f1a" ? f.f1a : f.f1h;
}

} // namespace measures
} // namespace clubench
