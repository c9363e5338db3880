#include "clubench/netdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_set>

#include "clubench/clustering.hpp"
#include "clubench/util.hpp"

namespace clubench {

int Network::add_node(const std::string& token) {
    auto [it, fresh] = index.emplace(token, static_cast<int>(names.size()));
    if (fresh) names.push_back(token);
    return it->second;
}

double Network::total_weight() const {
    double w = 0;
    for (const auto& e : edges) w += e.weight;
    return w;
}

std::vector<double> Network::weighted_degrees() const {
    std::vector<double> deg(names.size(), 0.0);
    for (const auto& e : edges) {
        deg[e.src] += e.weight;
        deg[e.dst] += e.weight; // self-loop: both halves land on one node
    }
    return deg;
}

std::vector<std::vector<std::pair<int, double>>> build_adjacency(const Network& net) {
    std::vector<std::vector<std::pair<int, double>>> adj(net.names.size());
    for (const auto& e : net.edges) {
        adj[e.src].emplace_back(e.dst, e.weight);
        if (e.src != e.dst) adj[e.dst].emplace_back(e.src, e.weight);
    }
    return adj;
}

namespace {

enum class Dialect { Nse, Nsa, Ncol };

Dialect dialect_of(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    for (auto& c : ext) c = static_cast<char>(tolower(static_cast<unsigned char>(c)));
    if (ext == ".nse") return Dialect::Nse;
    if (ext == ".nsa") return Dialect::Nsa;
    if (ext == ".ncol") return Dialect::Ncol;
    throw InvalidArgument("unknown network extension '" + ext + "' (expected .nse, .nsa or .ncol)");
}

struct Header {
    long long nodes = -1;
    long long edges = -1;
    int weighted = -1;
};

// "# Nodes: 6 Edges: 7 Weighted: 0" — keys may be glued to their values.
bool parse_header(std::string_view s, Header& h) {
    s.remove_prefix(1); // '#'
    auto toks = split_ws(s);
    bool any = false;
    for (size_t i = 0; i < toks.size(); ++i) {
        std::string_view key = toks[i];
        std::string_view val;
        size_t colon = key.find(':');
        if (colon == std::string_view::npos) continue;
        if (colon + 1 < key.size()) {
            val = key.substr(colon + 1);
            key = key.substr(0, colon);
        } else {
            key = key.substr(0, colon);
            if (i + 1 < toks.size()) val = toks[++i];
        }
        long long v = 0;
        if (!parse_int(val, v)) continue;
        if (key == "Nodes" || key == "nodes") {
            h.nodes = v;
            any = true;
        } else if (key == "Edges" || key == "edges" || key == "Arcs" || key == "arcs") {
            h.edges = v;
            any = true;
        } else if (key == "Weighted" || key == "weighted") {
            h.weighted = v != 0;
            any = true;
        }
    }
    return any;
}

} // namespace

Network read_network(const std::filesystem::path& path,
                     const std::function<void(const std::string&)>& warn) {
    auto emit_warn = [&](const std::string& msg) {
        if (warn)
            warn(msg);
        else
            fprintf(stderr, "warning: %s\n", msg.c_str());
    };

    Dialect d = dialect_of(path);
    std::ifstream in(path);
    if (!in) throw ParseError(path.string() + ": cannot open");

    Network net;
    net.directed = d == Dialect::Nsa;

    Header hdr;
    bool have_hdr = false;
    bool any_weight_col = false;
    std::unordered_set<uint64_t> seen;
    seen.reserve(1024);

    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view s = trim(line);
        if (s.empty()) continue;
        if (s.front() == '#') {
            if (!have_hdr && d != Dialect::Ncol && net.edges.empty())
                have_hdr = parse_header(s, hdr);
            continue;
        }
        auto toks = split_ws(s);
        if (toks.size() != 2 && toks.size() != 3)
            throw ParseError(path.string(), lineno,
                             "expected 'src dst [weight]', got " + std::to_string(toks.size()) +
                                 " fields");
        Network::Edge e;
        e.src = net.add_node(std::string(toks[0]));
        e.dst = net.add_node(std::string(toks[1]));
        if (toks.size() == 3) {
            if (!parse_double(toks[2], e.weight))
                throw ParseError(path.string(), lineno,
                                 "bad weight '" + std::string(toks[2]) + "'");
            if (!(e.weight > 0) || !std::isfinite(e.weight))
                throw ParseError(path.string(), lineno,
                                 "weight must be a positive finite number");
            any_weight_col = true;
        }
        uint64_t a = static_cast<uint64_t>(e.src), b = static_cast<uint64_t>(e.dst);
        if (!net.directed && a > b) std::swap(a, b);
        if (!seen.insert((a << 32) | b).second)
            throw ParseError(path.string(), lineno,
                             std::string("duplicate ") + (net.directed ? "arc '" : "edge '") +
                                 std::string(toks[0]) + " " + std::string(toks[1]) + "'");
        net.edges.push_back(e);
    }

    if (have_hdr && hdr.weighted == 0 && any_weight_col) {
        // Tolerate explicit unit weights; anything else contradicts the header.
        for (const auto& e : net.edges)
            if (e.weight != 1.0)
                throw ParseError(path.string() +
                                 ": header declares unweighted but a line carries weight " +
                                 fmt_double(e.weight));
    }
    net.weighted = have_hdr && hdr.weighted >= 0 ? hdr.weighted == 1 : any_weight_col;

    if (have_hdr) {
        if (hdr.nodes >= 0 && hdr.nodes != net.node_count())
            emit_warn(path.string() + ": header claims " + std::to_string(hdr.nodes) +
                      " nodes, file has " + std::to_string(net.node_count()));
        if (hdr.edges >= 0 && hdr.edges != net.edge_count())
            emit_warn(path.string() + ": header claims " + std::to_string(hdr.edges) +
                      (net.directed ? " arcs" : " edges") + ", file has " +
                      std::to_string(net.edge_count()));
    }
    return net;
}

void write_network(const Network& net, const std::filesystem::path& path) {
    Dialect d = dialect_of(path);
    if (d == Dialect::Nsa && !net.directed)
        throw InvalidArgument(path.string() + ": .nsa holds directed networks only");
    if (d != Dialect::Nsa && net.directed)
        throw InvalidArgument(path.string() + ": directed networks need the .nsa extension");

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ParseError(path.string() + ": cannot open for writing");
    if (d != Dialect::Ncol)
        out << "# Nodes: " << net.node_count() << (net.directed ? " Arcs: " : " Edges: ")
            << net.edge_count() << " Weighted: " << (net.weighted ? 1 : 0) << "\n";
    for (const auto& e : net.edges) {
        out << net.names[e.src] << ' ' << net.names[e.dst];
        if (net.weighted) out << ' ' << fmt_double(e.weight);
        out << '\n';
    }
    if (!out) throw ParseError(path.string() + ": write failed");
}

Network shuffle_network(const Network& net, int k, uint64_t seed) {
    if (k < 0) throw InvalidArgument("shuffle index must be >= 0");
    if (k == 0) return net;

    auto rng = make_rng(seed, static_cast<uint64_t>(k));

    // New enumeration order: position i holds old node order[i].
    std::vector<int> order(net.names.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    fisher_yates(order, rng);
    std::vector<int> new_pos(order.size());
    for (size_t i = 0; i < order.size(); ++i) new_pos[order[i]] = static_cast<int>(i);

    Network out;
    out.directed = net.directed;
    out.weighted = net.weighted;
    out.names.reserve(net.names.size());
    for (int old : order) out.add_node(net.names[old]);

    out.edges.reserve(net.edges.size());
    for (const auto& e : net.edges) {
        Network::Edge ne{new_pos[e.src], new_pos[e.dst], e.weight};
        if (!net.directed && (rng() & 1u)) std::swap(ne.src, ne.dst);
        out.edges.push_back(ne);
    }
    fisher_yates(out.edges, rng);
    return out;
}

namespace {

// Visit each position of 0..total-1 independently with probability p,
// in ascending order, in O(hits) draws.
template <typename Fn>
void sample_positions(uint64_t total, double p, std::mt19937_64& rng, Fn&& fn) {
    if (total == 0 || p <= 0.0) return;
    if (p >= 1.0) {
        for (uint64_t i = 0; i < total; ++i) fn(i);
        return;
    }
    const double log1mp = std::log1p(-p);
    uint64_t pos = 0;
    while (true) {
        double u = uniform01(rng); // [0,1): log1p(-u) is finite
        uint64_t gap = static_cast<uint64_t>(std::log1p(-u) / log1mp);
        if (gap > total || pos + gap >= total) break;
        pos += gap;
        fn(pos);
        ++pos;
        if (pos >= total) break;
    }
}

} // namespace

PlantedPartition gen_planted_partition(int n, int k, double p_in, double p_out, uint64_t seed) {
    if (n < 1) throw InvalidArgument("planted partition: need n >= 1");
    if (k < 1 || k > n) throw InvalidArgument("planted partition: need 1 <= k <= n");
    if (!(p_in >= 0 && p_in <= 1) || !(p_out >= 0 && p_out <= 1))
        throw InvalidArgument("planted partition: probabilities must lie in [0,1]");
    if (p_out > p_in)
        throw InvalidArgument("planted partition: p_out must not exceed p_in");

    // Near-equal group sizes: the first n%k groups take the extra node.
    std::vector<int> sizes(k, n / k), start(k, 0);
    for (int i = 0; i < n % k; ++i) ++sizes[i];
    for (int i = 1; i < k; ++i) start[i] = start[i - 1] + sizes[i - 1];

    PlantedPartition pp;
    pp.net.directed = false;
    pp.net.weighted = false;
    for (int i = 1; i <= n; ++i) pp.net.add_node(std::to_string(i));
    for (int c = 0; c < k; ++c) {
        std::vector<std::string> cl;
        cl.reserve(sizes[c]);
        for (int i = 0; i < sizes[c]; ++i) cl.push_back(pp.net.names[start[c] + i]);
        pp.truth.clusters.push_back(std::move(cl));
    }

    auto rng = make_rng(seed);
    auto push_edge = [&pp](int u, int v) {
        pp.net.edges.push_back({u, v, 1.0});
    };

    // Intra-group pairs, per group: linear index over (i<j) in row order
    // (0,1),(0,2),...,(1,2),...; positions arrive ascending, so the row
    // walk below is O(s + hits) per group.
    for (int c = 0; c < k; ++c) {
        const int s = sizes[c];
        if (s < 2) continue;
        const uint64_t pairs = static_cast<uint64_t>(s) * (s - 1) / 2;
        int row = 0;
        uint64_t row_start = 0;                          // index of (row, row+1)
        uint64_t row_len = static_cast<uint64_t>(s) - 1; // pairs in this row
        sample_positions(pairs, p_in, rng, [&](uint64_t pos) {
            while (pos >= row_start + row_len) {
                row_start += row_len;
                --row_len;
                ++row;
            }
            const int i = row;
            const int j = row + 1 + static_cast<int>(pos - row_start);
            push_edge(start[c] + i, start[c] + j);
        });
    }

    // Cross-group pairs: the (a,b) block is a sa-by-sb grid.
    for (int a = 0; a < k; ++a) {
        for (int b = a + 1; b < k; ++b) {
            const uint64_t pairs = static_cast<uint64_t>(sizes[a]) * sizes[b];
            sample_positions(pairs, p_out, rng, [&](uint64_t pos) {
                const int i = static_cast<int>(pos / sizes[b]);
                const int j = static_cast<int>(pos % sizes[b]);
                push_edge(start[a] + i, start[b] + j);
            });
        }
    }
    return pp;
}

} // namespace clubench
