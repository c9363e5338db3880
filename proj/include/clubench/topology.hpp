#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace clubench {

/// Set of logical CPU ids, kept sorted and unique.
class CpuSet {
public:
    CpuSet() = default;
    explicit CpuSet(std::vector<int> cpus);

    void add(int cpu);
    bool contains(int cpu) const;
    bool empty() const { return cpus_.empty(); }
    size_t size() const { return cpus_.size(); }
    const std::vector<int>& cpus() const { return cpus_; }

    bool intersects(const CpuSet& other) const;
    /// "{0,1,4}" — used in log lines and error messages.
    std::string to_string() const;

    bool operator==(const CpuSet& other) const { return cpus_ == other.cpus_; }

private:
    std::vector<int> cpus_;
};

/// Hardware layout: NUMA nodes hold physical cores, cores hold logical CPUs
/// (hyperthreads). Logical CPU ids are the kernel's; they need not be dense.
struct PhysCore {
    int id = 0;
    std::vector<int> cpus; // logical CPU ids, sorted
};

struct NumaNode {
    int id = 0;
    std::vector<PhysCore> cores;
};

enum class AffinityUnit {
    LogicalCpu, // one slot per logical CPU
    PhysCore,   // one slot per physical core (all of its hyperthreads)
    NumaNode,   // one slot per NUMA node (all of its CPUs)
};

const char* to_string(AffinityUnit u);
std::optional<AffinityUnit> affinity_unit_from_string(std::string_view s);

class TopologyMap {
public:
    /// Reads /sys/devices/system/cpu; falls back to a flat single-node,
    /// one-CPU-per-core layout sized by the online CPU count when sysfs
    /// is absent or unreadable.
    static TopologyMap detect();

    /// Loads a manual description: one "numa_id core_id cpu_id" triple per
    /// line, '#' comments. Malformed lines raise ParseError.
    static TopologyMap from_file(const std::filesystem::path& path);

    /// Flat fallback: one NUMA node, n cores of one logical CPU each.
    static TopologyMap flat(int ncpus);

    const std::vector<NumaNode>& nodes() const { return nodes_; }
    int cpu_count() const;
    int core_count() const;
    int node_count() const { return static_cast<int>(nodes_.size()); }

    /// All logical CPUs of the machine.
    CpuSet all_cpus() const;

    /// Partition the machine into pairwise-disjoint execution slots, one
    /// per unit. Slots come out in node/core/cpu order, so slot lists are
    /// deterministic for a given topology.
    std::vector<CpuSet> slots_for(AffinityUnit unit) const;

private:
    void normalize();
    std::vector<NumaNode> nodes_;
};

/// Pin a process to the given CPUs. Returns false (and fills err) when the
/// kernel refuses — e.g. the process already exited or the CPUs do not
/// exist on this machine. Callers are expected to log and carry on: an
/// unpinned worker still computes correctly.
bool bind_affinity(int pid, const CpuSet& cpus, std::string* err = nullptr);

} // namespace clubench
