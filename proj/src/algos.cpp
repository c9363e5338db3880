#include "clubench/algos.hpp"

#include <algorithm>
#include <deque>

#include "clubench/netdata.hpp"
#include "clubench/util.hpp"

namespace clubench {

void AlgoRegistry::add(AlgoAdapter adapter) {
    if (adapter.name.empty()) throw InvalidArgument("algorithm adapter needs a name");
    if (!adapter.command) throw InvalidArgument("algorithm adapter needs a command builder");
    if (find(adapter.name))
        throw InvalidArgument("algorithm '" + adapter.name + "' registered twice");
    adapters_.push_back(std::move(adapter));
}

const AlgoAdapter* AlgoRegistry::find(const std::string& name) const {
    for (const auto& a : adapters_)
        if (a.name == name) return &a;
    return nullptr;
}

std::vector<std::string> AlgoRegistry::names() const {
    std::vector<std::string> out;
    out.reserve(adapters_.size());
    for (const auto& a : adapters_) out.push_back(a.name);
    std::sort(out.begin(), out.end());
    return out;
}

AlgoRegistry default_registry(const std::filesystem::path& self_exe) {
    AlgoRegistry reg;
    AlgoAdapter rc;
    rc.name = "randcommuns";
    rc.category = "algorithm";
    rc.command = [self = self_exe.string()](const AlgoContext& ctx) {
        if (!ctx.truth_path)
            throw InvalidArgument("randcommuns needs a ground-truth clustering as size template");
        return std::vector<std::string>{self,
                                        "randcommuns",
                                        "--net",
                                        ctx.net_path.string(),
                                        "--truth",
                                        ctx.truth_path->string(),
                                        "--out",
                                        ctx.out_dir.string(),
                                        "--seed",
                                        std::to_string(ctx.seed),
                                        "--levels",
                                        std::to_string(ctx.levels)};
    };
    reg.add(std::move(rc));
    return reg;
}

AlgoAdapter template_adapter(const std::string& name, const std::string& cmd_template,
                             const std::string& category) {
    auto tokens = split_ws(cmd_template);
    if (tokens.empty())
        throw InvalidArgument("algorithm '" + name + "': empty command template");
    std::vector<std::string> tmpl(tokens.begin(), tokens.end());

    AlgoAdapter a;
    a.name = name;
    a.category = category;
    a.command = [name, tmpl](const AlgoContext& ctx) {
        auto subst_all = [](std::string s, const std::string& key, const std::string& val) {
            size_t pos = 0;
            while ((pos = s.find(key, pos)) != std::string::npos) {
                s.replace(pos, key.size(), val);
                pos += val.size();
            }
            return s;
        };
        std::vector<std::string> argv;
        argv.reserve(tmpl.size());
        for (const auto& t : tmpl) {
            std::string s = t;
            if (s.find("{truth}") != std::string::npos) {
                if (!ctx.truth_path)
                    throw InvalidArgument("algorithm '" + name +
                                          "' wants {truth} but no ground truth is available");
                s = subst_all(s, "{truth}", ctx.truth_path->string());
            }
            s = subst_all(s, "{net}", ctx.net_path.string());
            s = subst_all(s, "{out}", ctx.out_dir.string());
            s = subst_all(s, "{seed}", std::to_string(ctx.seed));
            s = subst_all(s, "{levels}", std::to_string(ctx.levels));
            argv.push_back(std::move(s));
        }
        return argv;
    };
    return a;
}

Clustering randcommuns(const Network& net, const Clustering& truth, uint64_t seed) {
    if (truth.clusters.empty())
        throw InvalidArgument("randcommuns: the size template has no clusters");
    const auto adj = build_adjacency(net);
    const int n = net.node_count();
    auto rng = make_rng(seed);

    // template processing order
    std::vector<int> order(truth.clusters.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    fisher_yates(order, rng);

    // pool of unused nodes with O(1) random removal
    std::vector<int> unused(n), pos(n);
    for (int i = 0; i < n; ++i) {
        unused[i] = i;
        pos[i] = i;
    }
    auto take = [&](int node) {
        const int p = pos[node];
        const int last = unused.back();
        unused[p] = last;
        pos[last] = p;
        unused.pop_back();
        pos[node] = -1;
    };

    Clustering out;
    std::vector<int> neigh;
    for (int t : order) {
        const size_t want = truth.clusters[t].size();
        if (unused.empty()) continue; // template dropped
        const int seed_node = unused[rng() % unused.size()];
        take(seed_node);

        std::vector<int> grown{seed_node};
        std::deque<int> frontier{seed_node};
        while (grown.size() < want && !frontier.empty()) {
            const int u = frontier.front();
            frontier.pop_front();
            neigh.clear();
            for (const auto& [v, w] : adj[u]) {
                (void)w;
                if (pos[v] >= 0) neigh.push_back(v);
            }
            fisher_yates(neigh, rng);
            for (int v : neigh) {
                if (grown.size() >= want) break;
                if (pos[v] < 0) continue; // taken via an earlier neighbor this round
                take(v);
                grown.push_back(v);
                frontier.push_back(v);
            }
        }
        std::vector<std::string> tokens;
        tokens.reserve(grown.size());
        for (int u : grown) tokens.push_back(net.names[u]);
        out.clusters.push_back(std::move(tokens));
    }
    return out;
}

std::vector<size_t> unify_indices(size_t count, size_t L) {
    if (L == 0) throw InvalidArgument("level cap must be at least 1");
    std::vector<size_t> idx;
    if (count <= L) {
        for (size_t i = 0; i < count; ++i) idx.push_back(i);
        return idx;
    }
    if (L == 1) return {0};
    for (size_t i = 0; i < L; ++i) {
        const double x = static_cast<double>(i) * (count - 1) / (L - 1);
        idx.push_back(static_cast<size_t>(std::lround(x)));
    }
    return idx;
}

std::vector<std::filesystem::path> list_level_files(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::vector<fs::path> files;
    std::error_code ec;
    for (const auto& ent : fs::directory_iterator(dir, ec))
        if (ent.path().extension() == ".cnl") files.push_back(ent.path());
    std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
        return natural_less(a.filename().string(), b.filename().string());
    });
    return files;
}

std::vector<std::filesystem::path> unify_level_files(const std::filesystem::path& dir, size_t L) {
    namespace fs = std::filesystem;
    auto files = list_level_files(dir);
    if (files.size() <= L) return files;

    const fs::path orig = dir.parent_path() / (dir.filename().string() + "-orig");
    fs::create_directories(orig);
    for (const auto& f : files) fs::rename(f, orig / f.filename());

    std::vector<fs::path> kept;
    for (size_t i : unify_indices(files.size(), L)) {
        const fs::path src = orig / files[i].filename();
        const fs::path dst = dir / files[i].filename();
        std::error_code ec;
        fs::create_symlink(fs::absolute(src), dst, ec);
        if (ec) fs::copy_file(src, dst, fs::copy_options::overwrite_existing);
        kept.push_back(dst);
    }
    return kept;
}

} // namespace clubench
