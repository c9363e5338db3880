#include "clubench/results.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "clubench/measures.hpp"
#include "clubench/util.hpp"

namespace clubench {

namespace fs = std::filesystem;

ResultStore::ResultStore(fs::path root) : root_(std::move(root)) {
    fs::create_directories(root_);
}

fs::path ResultStore::leaf_path(const std::string& algorithm, const std::string& nettype,
                                int instance) const {
    return root_ / algorithm / (nettype + "^" + std::to_string(instance) + ".csv");
}

void ResultStore::record(const ResultKey& key, double value,
                         const std::function<void(const std::string&)>& warn) {
    if (!std::isfinite(value))
        throw InvalidArgument("refusing to record non-finite value for measure '" + key.measure +
                              "'");
    if (key.algorithm.empty() || key.nettype.empty() || key.measure.empty())
        throw InvalidArgument("result key needs algorithm, nettype and measure");

    auto rows = read_leaf(key.algorithm, key.nettype, key.instance);
    bool replaced = false;
    for (auto& r : rows) {
        if (r.shuffle == key.shuffle && r.level == key.level && r.measure == key.measure) {
            if (warn)
                warn(strfmt("overwriting %s/%s^%d shuffle %d level %d measure %s",
                            key.algorithm.c_str(), key.nettype.c_str(), key.instance, key.shuffle,
                            key.level, key.measure.c_str()));
            r.value = value;
            replaced = true;
            break;
        }
    }
    if (!replaced) rows.push_back({key.shuffle, key.level, key.measure, value});

    std::sort(rows.begin(), rows.end(), [](const LeafRow& a, const LeafRow& b) {
        return std::tie(a.shuffle, a.level, a.measure) < std::tie(b.shuffle, b.level, b.measure);
    });

    const fs::path leaf = leaf_path(key.algorithm, key.nettype, key.instance);
    fs::create_directories(leaf.parent_path());
    const fs::path tmp = leaf.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw ParseError(tmp.string() + ": cannot open for writing");
        out << "shuffle,level,measure,value\n";
        for (const auto& r : rows)
            out << r.shuffle << ',' << r.level << ',' << r.measure << ',' << fmt_double(r.value)
                << '\n';
        if (!out) throw ParseError(tmp.string() + ": write failed");
    }
    fs::rename(tmp, leaf);
}

std::vector<ResultStore::LeafRow> ResultStore::read_leaf(const std::string& algorithm,
                                                         const std::string& nettype,
                                                         int instance) const {
    std::vector<LeafRow> rows;
    const fs::path leaf = leaf_path(algorithm, nettype, instance);
    std::ifstream in(leaf);
    if (!in) return rows;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view s = trim(line);
        if (s.empty() || s == "shuffle,level,measure,value") continue;
        auto f = split_char(s, ',');
        if (f.size() != 4)
            throw ParseError(leaf.string(), lineno, "expected 4 fields, got " +
                                                        std::to_string(f.size()));
        LeafRow r;
        long long shf = 0, lvl = 0;
        if (!parse_int(f[0], shf) || !parse_int(f[1], lvl) || !parse_double(f[3], r.value))
            throw ParseError(leaf.string(), lineno, "malformed row");
        r.shuffle = static_cast<int>(shf);
        r.level = static_cast<int>(lvl);
        r.measure = std::string(f[2]);
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<std::string> ResultStore::algorithms() const {
    std::vector<std::string> out;
    std::error_code ec;
    for (const auto& ent : fs::directory_iterator(root_, ec))
        if (ent.is_directory()) out.push_back(ent.path().filename().string());
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::pair<std::string, int>> ResultStore::leaves(const std::string& algorithm) const {
    std::vector<std::pair<std::string, int>> out;
    std::error_code ec;
    for (const auto& ent : fs::directory_iterator(root_ / algorithm, ec)) {
        if (ent.path().extension() != ".csv") continue;
        const std::string stem = ent.path().stem().string();
        const size_t caret = stem.rfind('^');
        if (caret == std::string::npos) continue;
        long long inst = 0;
        if (!parse_int(std::string_view(stem).substr(caret + 1), inst)) continue;
        out.emplace_back(stem.substr(0, caret), static_cast<int>(inst));
    }
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

struct Stage1 {
    double mean = 0;
    double variance = 0;
    long long count = 0;
};

Stage1 mean_popvar(const std::vector<double>& xs) {
    Stage1 s;
    s.count = static_cast<long long>(xs.size());
    if (xs.empty()) return s;
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    for (double x : xs) s.variance += (x - s.mean) * (x - s.mean);
    s.variance /= static_cast<double>(xs.size());
    return s;
}

Aggregate fold_instances(const std::vector<Stage1>& parts) {
    Aggregate a;
    if (parts.empty()) return a;
    for (const auto& p : parts) {
        a.mean += p.mean;
        a.variance += p.variance;
        a.count += p.count;
    }
    a.mean /= static_cast<double>(parts.size());
    a.variance /= static_cast<double>(parts.size());
    return a;
}

} // namespace

Aggregate ResultStore::aggregate(const std::string& algorithm, const std::string& nettype,
                                 const std::string& measure) const {
    const measures::MeasureInfo* info = measures::find_measure(measure);
    const bool lower = info && info->lower_better;

    std::vector<Stage1> parts;
    for (const auto& [nt, inst] : leaves(algorithm)) {
        if (nt != nettype) continue;
        std::map<int, double> best; // shuffle -> best value across levels
        for (const auto& r : read_leaf(algorithm, nettype, inst)) {
            if (r.measure != measure) continue;
            auto [it, fresh] = best.emplace(r.shuffle, r.value);
            if (!fresh) it->second = lower ? std::min(it->second, r.value)
                                           : std::max(it->second, r.value);
        }
        if (best.empty()) continue;
        std::vector<double> xs;
        xs.reserve(best.size());
        for (const auto& [shf, v] : best) {
            (void)shf;
            xs.push_back(v);
        }
        parts.push_back(mean_popvar(xs));
    }
    if (parts.empty())
        throw InvalidArgument("no recorded values for " + algorithm + "/" + nettype + "/" +
                              measure);
    return fold_instances(parts);
}

void ResultStore::export_summary(const fs::path& out, const fs::path& resources_csv) const {
    struct Row {
        std::string algorithm, nettype, measure;
        Aggregate agg;
    };
    std::vector<Row> rows;

    for (const auto& algo : algorithms()) {
        std::map<std::string, std::set<std::string>> measures_by_nettype;
        for (const auto& [nt, inst] : leaves(algo))
            for (const auto& r : read_leaf(algo, nt, inst))
                measures_by_nettype[nt].insert(r.measure);
        for (const auto& [nt, ms] : measures_by_nettype)
            for (const auto& m : ms) rows.push_back({algo, nt, m, aggregate(algo, nt, m)});
    }

    // profiling aggregates: job "<algorithm>:<nettype>^<instance>:<shuffle>"
    if (!resources_csv.empty()) {
        std::ifstream in(resources_csv);
        if (in) {
            struct Run {
                int attempt = -1;
                double wall = 0, cpu = 0, rss = 0;
            };
            // (algo, nettype, instance, shuffle) -> last attempt
            std::map<std::tuple<std::string, std::string, int, int>, Run> runs;
            std::string line;
            while (std::getline(in, line)) {
                auto f = split_char(trim(line), ',');
                if (f.size() < 7 || f[0] == "job") continue;
                auto parts = split_char(f[0], ':');
                if (parts.size() != 3) continue; // not an algorithm job
                const size_t caret = parts[1].rfind('^');
                if (caret == std::string_view::npos) continue;
                long long inst = 0, shf = 0, attempt = 0;
                if (!parse_int(parts[1].substr(caret + 1), inst)) continue;
                if (!parse_int(parts[2], shf)) continue;
                if (!parse_int(f[1], attempt)) continue;
                Run r;
                r.attempt = static_cast<int>(attempt);
                if (!parse_double(f[2], r.wall) || !parse_double(f[3], r.cpu) ||
                    !parse_double(f[4], r.rss))
                    continue;
                auto key = std::make_tuple(std::string(parts[0]),
                                           std::string(parts[1].substr(0, caret)),
                                           static_cast<int>(inst), static_cast<int>(shf));
                auto [it, fresh] = runs.emplace(key, r);
                if (!fresh && r.attempt >= it->second.attempt) it->second = r;
            }

            // (algo, nettype) -> instance -> shuffle values
            for (const char* metric : {"wall_s", "cpu_s", "peak_rss_mib"}) {
                std::map<std::pair<std::string, std::string>, std::map<int, std::vector<double>>>
                    grouped;
                for (const auto& [key, r] : runs) {
                    const auto& [algo, nt, inst, shf] = key;
                    (void)shf;
                    double v = metric == std::string("wall_s")
                                   ? r.wall
                                   : metric == std::string("cpu_s") ? r.cpu : r.rss;
                    grouped[{algo, nt}][inst].push_back(v);
                }
                for (const auto& [key, insts] : grouped) {
                    std::vector<Stage1> parts;
                    for (const auto& [inst, xs] : insts) {
                        (void)inst;
                        parts.push_back(mean_popvar(xs));
                    }
                    rows.push_back({key.first, key.second, metric, fold_instances(parts)});
                }
            }
        }
    }

    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        return std::tie(a.algorithm, a.nettype, a.measure) <
               std::tie(b.algorithm, b.nettype, b.measure);
    });

    fs::create_directories(out.parent_path().empty() ? fs::path(".") : out.parent_path());
    const fs::path tmp = out.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::trunc);
        if (!os) throw ParseError(tmp.string() + ": cannot open for writing");
        os << "algorithm,nettype,measure,mean,variance,count\n";
        for (const auto& r : rows)
            os << r.algorithm << ',' << r.nettype << ',' << r.measure << ','
               << fmt_double(r.agg.mean) << ',' << fmt_double(r.agg.variance) << ','
               << r.agg.count << '\n';
        if (!os) throw ParseError(tmp.string() + ": write failed");
    }
    fs::rename(tmp, out);
}

} // namespace clubench
