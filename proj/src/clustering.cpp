#include "clubench/clustering.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include "clubench/netdata.hpp"
#include "clubench/util.hpp"

namespace clubench {

std::vector<std::string> Clustering::universe() const {
    std::unordered_set<std::string> seen;
    std::vector<std::string> out;
    for (const auto& cl : clusters)
        for (const auto& t : cl)
            if (seen.insert(t).second) out.push_back(t);
    return out;
}

bool Clustering::overlapping() const {
    std::unordered_set<std::string> seen;
    for (const auto& cl : clusters)
        for (const auto& t : cl)
            if (!seen.insert(t).second) return true;
    return false;
}

Clustering read_cnl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string() + ": cannot open");
    Clustering c;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view s = trim(line);
        if (s.empty() || s.front() == '#') continue;
        std::vector<std::string> cluster;
        std::unordered_set<std::string_view> in_line;
        for (auto tok : split_ws(s)) {
            if (!in_line.insert(tok).second)
                throw ParseError(path.string(), lineno,
                                 "node '" + std::string(tok) + "' repeated within cluster");
            cluster.emplace_back(tok);
        }
        c.clusters.push_back(std::move(cluster));
    }
    return c;
}

void write_cnl(const Clustering& c, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ParseError(path.string() + ": cannot open for writing");
    for (const auto& cl : c.clusters) {
        for (size_t i = 0; i < cl.size(); ++i) {
            if (i) out << ' ';
            out << cl[i];
        }
        out << '\n';
    }
    if (!out) throw ParseError(path.string() + ": write failed");
}

bool DenseClusters::overlapping() const {
    for (int m : membership_count)
        if (m > 1) return true;
    return false;
}

int DenseClusters::assigned_count() const {
    int n_assigned = 0;
    for (int m : membership_count)
        if (m > 0) ++n_assigned;
    return n_assigned;
}

DenseClusters bind_clusters(const Clustering& c, const Network& net) {
    DenseClusters d;
    d.n = net.node_count();
    d.membership_count.assign(d.n, 0);
    d.clusters.reserve(c.clusters.size());
    for (const auto& cl : c.clusters) {
        std::vector<int> ids;
        ids.reserve(cl.size());
        for (const auto& t : cl) {
            auto it = net.index.find(t);
            if (it == net.index.end())
                throw InvalidArgument("clustering refers to node '" + t +
                                      "' absent from the network");
            ids.push_back(it->second);
            ++d.membership_count[it->second];
        }
        d.clusters.push_back(std::move(ids));
    }
    return d;
}

BoundPair bind_pair(const Clustering& a, const Clustering& b) {
    std::unordered_map<std::string, int> ids;
    auto intern = [&ids](const std::string& t) {
        auto [it, fresh] = ids.emplace(t, static_cast<int>(ids.size()));
        (void)fresh;
        return it->second;
    };

    BoundPair p;
    std::unordered_set<int> in_a, in_b;
    for (const auto& cl : a.clusters) {
        std::vector<int> v;
        v.reserve(cl.size());
        for (const auto& t : cl) {
            int id = intern(t);
            v.push_back(id);
            in_a.insert(id);
        }
        p.a.push_back(std::move(v));
    }
    for (const auto& cl : b.clusters) {
        std::vector<int> v;
        v.reserve(cl.size());
        for (const auto& t : cl) {
            int id = intern(t);
            v.push_back(id);
            in_b.insert(id);
        }
        p.b.push_back(std::move(v));
    }
    if (in_a.size() != ids.size() || in_b.size() != ids.size()) {
        size_t diff = (ids.size() - in_a.size()) + (ids.size() - in_b.size());
        throw InvalidArgument("clusterings cover different node sets (symmetric difference: " +
                              std::to_string(diff) + " nodes)");
    }
    p.n = static_cast<int>(ids.size());
    return p;
}

} // namespace clubench
