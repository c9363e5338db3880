#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "clubench/clustering.hpp"

namespace clubench {

struct Network;

/// Everything an adapter needs to build the command line for one
/// (algorithm, network instance, shuffle) execution.
struct AlgoContext {
    std::filesystem::path net_path;
    std::optional<std::filesystem::path> truth_path;
    std::filesystem::path out_dir; // where level_<k>.cnl files land
    uint64_t seed = 0;
    int levels = 1;
};

/// An external clustering algorithm: a name, the scheduling category its
/// processes run under, and a command builder. Algorithms are always
/// executed as child processes; nothing here links against them.
struct AlgoAdapter {
    std::string name;
    std::string category = "algorithm";
    std::function<std::vector<std::string>(const AlgoContext&)> command;
};

class AlgoRegistry {
public:
    /// Rejects duplicate names.
    void add(AlgoAdapter adapter);
    const AlgoAdapter* find(const std::string& name) const;
    /// Registered names, alphabetical.
    std::vector<std::string> names() const;

private:
    std::vector<AlgoAdapter> adapters_;
};

/// Registry with the built-in baseline registered; `self_exe` is the
/// driver binary re-invoked as "<self> randcommuns ..." for it.
AlgoRegistry default_registry(const std::filesystem::path& self_exe);

/// Adapter from a whitespace-split command template. Placeholders {net},
/// {truth}, {out}, {seed} and {levels} are substituted anywhere inside a
/// token. Having no ground truth while the template mentions {truth} makes
/// the command builder throw.
AlgoAdapter template_adapter(const std::string& name, const std::string& cmd_template,
                             const std::string& category = "algorithm");

/// Ground-truth-shaped random baseline: takes the cluster count and sizes
/// from `truth`, then grows each cluster from a random unused seed node by
/// breadth-first search over unused neighbors (neighbor order reshuffled
/// per expansion). Clusters that find no free seed node are dropped, so
/// the result can have fewer clusters than the template. Deterministic in
/// (net, truth, seed).
Clustering randcommuns(const Network& net, const Clustering& truth, uint64_t seed);

/// Level thinning: which of `count` resolution levels to keep when at most
/// L may remain. Evenly spaced including first and last:
/// round(i*(count-1)/(L-1)) for i in 0..L-1. count <= L keeps everything.
std::vector<size_t> unify_indices(size_t count, size_t L);

/// The level files of one run directory, finest first (natural filename
/// order, so level_2 sorts before level_10).
std::vector<std::filesystem::path> list_level_files(const std::filesystem::path& dir);

/// Applies unify_indices to the .cnl files of `dir`: when more than L are
/// present, all of them move to the sibling directory "<dir>-orig" and the
/// kept ones are linked back under their original names (copied when the
/// filesystem refuses symlinks). Returns the kept paths, finest first.
std::vector<std::filesystem::path> unify_level_files(const std::filesystem::path& dir, size_t L);

} // namespace clubench
