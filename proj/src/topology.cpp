#include "clubench/topology.hpp"

#include <sched.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

#include "clubench/util.hpp"

namespace clubench {

CpuSet::CpuSet(std::vector<int> cpus) : cpus_(std::move(cpus)) {
    std::sort(cpus_.begin(), cpus_.end());
    cpus_.erase(std::unique(cpus_.begin(), cpus_.end()), cpus_.end());
}

void CpuSet::add(int cpu) {
    auto it = std::lower_bound(cpus_.begin(), cpus_.end(), cpu);
    if (it == cpus_.end() || *it != cpu) cpus_.insert(it, cpu);
}

bool CpuSet::contains(int cpu) const {
    return std::binary_search(cpus_.begin(), cpus_.end(), cpu);
}

bool CpuSet::intersects(const CpuSet& other) const {
    auto a = cpus_.begin();
    auto b = other.cpus_.begin();
    while (a != cpus_.end() && b != other.cpus_.end()) {
        if (*a == *b) return true;
        if (*a < *b)
            ++a;
        else
            ++b;
    }
    return false;
}

std::string CpuSet::to_string() const {
    std::string s = "{";
    for (size_t i = 0; i < cpus_.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(cpus_[i]);
    }
    return s + "}";
}

const char* to_string(AffinityUnit u) {
    switch (u) {
    case AffinityUnit::LogicalCpu: return "logical_cpu";
    case AffinityUnit::PhysCore: return "phys_core";
    case AffinityUnit::NumaNode: return "numa_node";
    }
    return "?";
}

std::optional<AffinityUnit> affinity_unit_from_string(std::string_view s) {
    if (s == "logical_cpu" || s == "cpu") return AffinityUnit::LogicalCpu;
    if (s == "phys_core" || s == "core") return AffinityUnit::PhysCore;
    if (s == "numa_node" || s == "node") return AffinityUnit::NumaNode;
    return std::nullopt;
}

namespace {

// Reads a one-line sysfs attribute; empty string on failure.
std::string read_sysfs(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) return {};
    std::string line;
    std::getline(in, line);
    return std::string(trim(line));
}

} // namespace

TopologyMap TopologyMap::detect() {
    namespace fs = std::filesystem;
    const fs::path base = "/sys/devices/system/cpu";

    // (numa, core) -> logical cpus
    std::map<std::pair<int, int>, std::vector<int>> groups;
    std::error_code ec;
    for (const auto& ent : fs::directory_iterator(base, ec)) {
        const std::string name = ent.path().filename().string();
        if (name.size() < 4 || name.compare(0, 3, "cpu") != 0) continue;
        long long cpu = 0;
        if (!parse_int(std::string_view(name).substr(3), cpu)) continue;

        // Skip offline CPUs: they have no topology directory.
        fs::path topo = ent.path() / "topology";
        if (!fs::exists(topo, ec)) continue;

        long long core = cpu;
        std::string s = read_sysfs(topo / "core_id");
        if (!s.empty()) parse_int(s, core);

        long long node = 0;
        for (const auto& sub : fs::directory_iterator(ent.path(), ec)) {
            const std::string n = sub.path().filename().string();
            if (n.size() > 4 && n.compare(0, 4, "node") == 0) {
                long long v = 0;
                if (parse_int(std::string_view(n).substr(4), v)) {
                    node = v;
                    break;
                }
            }
        }
        // core_id is only unique within a package; fold the package id in.
        long long pkg = 0;
        s = read_sysfs(topo / "physical_package_id");
        if (!s.empty()) parse_int(s, pkg);
        groups[{static_cast<int>(node), static_cast<int>(pkg * 4096 + core)}].push_back(
            static_cast<int>(cpu));
    }

    if (groups.empty()) {
        long n = sysconf(_SC_NPROCESSORS_ONLN);
        return flat(n > 0 ? static_cast<int>(n) : 1);
    }

    TopologyMap t;
    std::map<int, NumaNode> nodes;
    for (auto& [key, cpus] : groups) {
        auto& node = nodes[key.first];
        node.id = key.first;
        PhysCore core;
        core.id = key.second;
        std::sort(cpus.begin(), cpus.end());
        core.cpus = cpus;
        node.cores.push_back(std::move(core));
    }
    for (auto& [id, node] : nodes) t.nodes_.push_back(std::move(node));
    t.normalize();
    return t;
}

TopologyMap TopologyMap::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string() + ": cannot open topology file");

    std::map<int, std::map<int, std::set<int>>> tree; // numa -> core -> cpus
    std::string line;
    size_t lineno = 0;
    std::set<int> seen_cpus;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view s = trim(line);
        if (s.empty() || s.front() == '#') continue;
        auto tok = split_ws(s);
        if (tok.size() != 3)
            throw ParseError(path.string(), lineno, "expected 'numa_id core_id cpu_id'");
        long long v[3];
        for (int i = 0; i < 3; ++i)
            if (!parse_int(tok[i], v[i]) || v[i] < 0)
                throw ParseError(path.string(), lineno,
                                 "not a non-negative integer: '" + std::string(tok[i]) + "'");
        if (!seen_cpus.insert(static_cast<int>(v[2])).second)
            throw ParseError(path.string(), lineno,
                             "logical cpu " + std::string(tok[2]) + " listed twice");
        tree[static_cast<int>(v[0])][static_cast<int>(v[1])].insert(static_cast<int>(v[2]));
    }
    if (tree.empty()) throw ParseError(path.string() + ": no topology entries");

    TopologyMap t;
    for (auto& [nid, cores] : tree) {
        NumaNode node;
        node.id = nid;
        for (auto& [cid, cpus] : cores) {
            PhysCore core;
            core.id = cid;
            core.cpus.assign(cpus.begin(), cpus.end());
            node.cores.push_back(std::move(core));
        }
        t.nodes_.push_back(std::move(node));
    }
    t.normalize();
    return t;
}

TopologyMap TopologyMap::flat(int ncpus) {
    if (ncpus < 1) throw InvalidArgument("flat topology needs at least one cpu");
    TopologyMap t;
    NumaNode node;
    node.id = 0;
    for (int i = 0; i < ncpus; ++i) {
        PhysCore core;
        core.id = i;
        core.cpus = {i};
        node.cores.push_back(std::move(core));
    }
    t.nodes_.push_back(std::move(node));
    return t;
}

void TopologyMap::normalize() {
    std::sort(nodes_.begin(), nodes_.end(),
              [](const NumaNode& a, const NumaNode& b) { return a.id < b.id; });
    for (auto& n : nodes_)
        std::sort(n.cores.begin(), n.cores.end(),
                  [](const PhysCore& a, const PhysCore& b) { return a.id < b.id; });
}

int TopologyMap::cpu_count() const {
    int n = 0;
    for (const auto& node : nodes_)
        for (const auto& core : node.cores) n += static_cast<int>(core.cpus.size());
    return n;
}

int TopologyMap::core_count() const {
    int n = 0;
    for (const auto& node : nodes_) n += static_cast<int>(node.cores.size());
    return n;
}

CpuSet TopologyMap::all_cpus() const {
    CpuSet s;
    for (const auto& node : nodes_)
        for (const auto& core : node.cores)
            for (int c : core.cpus) s.add(c);
    return s;
}

std::vector<CpuSet> TopologyMap::slots_for(AffinityUnit unit) const {
    std::vector<CpuSet> slots;
    switch (unit) {
    case AffinityUnit::LogicalCpu:
        for (const auto& node : nodes_)
            for (const auto& core : node.cores)
                for (int c : core.cpus) slots.push_back(CpuSet({c}));
        break;
    case AffinityUnit::PhysCore:
        for (const auto& node : nodes_)
            for (const auto& core : node.cores) slots.push_back(CpuSet(core.cpus));
        break;
    case AffinityUnit::NumaNode:
        for (const auto& node : nodes_) {
            CpuSet s;
            for (const auto& core : node.cores)
                for (int c : core.cpus) s.add(c);
            slots.push_back(std::move(s));
        }
        break;
    }
    return slots;
}

bool bind_affinity(int pid, const CpuSet& cpus, std::string* err) {
    if (cpus.empty()) {
        if (err) *err = "empty cpu set";
        return false;
    }
    cpu_set_t mask;
    CPU_ZERO(&mask);
    for (int c : cpus.cpus()) {
        if (c < 0 || c >= CPU_SETSIZE) {
            if (err) *err = "cpu id out of range: " + std::to_string(c);
            return false;
        }
        CPU_SET(c, &mask);
    }
    if (sched_setaffinity(pid, sizeof(mask), &mask) != 0) {
        if (err) *err = std::strerror(errno);
        return false;
    }
    return true;
}

} // namespace clubench
