#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace clubench {

/// Address of one recorded quality value.
struct ResultKey {
    std::string algorithm;
    std::string nettype;
    int instance = 0;
    int shuffle = 0;
    int level = 0;
    std::string measure;
};

struct Aggregate {
    double mean = 0;
    double variance = 0; // population variance
    long long count = 0; // shuffles folded in
};

/// CSV tree of evaluation results:
///   <root>/<algorithm>/<nettype>^<instance>.csv
/// with rows "shuffle,level,measure,value". Writes go through a temp file
/// and rename, so a crash never leaves a half-written leaf.
///
/// Aggregation is two-stage. Per instance: each shuffle reduces to its best
/// value across levels (minimum for lower-is-better measures), then the
/// shuffle values give a mean and population variance. Across instances:
/// the mean of the instance means, the mean of the instance variances, and
/// the total shuffle count.
class ResultStore {
public:
    explicit ResultStore(std::filesystem::path root);

    const std::filesystem::path& root() const { return root_; }

    /// Upserts one value; rewriting an existing key reports through the
    /// optional warn sink. Non-finite values are rejected.
    void record(const ResultKey& key, double value,
                const std::function<void(const std::string&)>& warn = {});

    struct LeafRow {
        int shuffle = 0;
        int level = 0;
        std::string measure;
        double value = 0;
    };
    std::vector<LeafRow> read_leaf(const std::string& algorithm, const std::string& nettype,
                                   int instance) const;

    std::vector<std::string> algorithms() const;
    /// (nettype, instance) leaves recorded for an algorithm.
    std::vector<std::pair<std::string, int>> leaves(const std::string& algorithm) const;

    /// Cross-instance aggregate of one measure; InvalidArgument when the
    /// store holds no matching rows.
    Aggregate aggregate(const std::string& algorithm, const std::string& nettype,
                        const std::string& measure) const;

    /// Writes "algorithm,nettype,measure,mean,variance,count" rows, sorted
    /// lexicographically by the three key columns, covering every measure
    /// recorded in the tree. When `resources_csv` points at a profiling
    /// log, per-job wall_s / cpu_s / peak_rss_mib of algorithm executions
    /// (job names "<algorithm>:<nettype>^<instance>:<shuffle>", last
    /// attempt wins) are folded in through the same two-stage scheme.
    void export_summary(const std::filesystem::path& out,
                        const std::filesystem::path& resources_csv = {}) const;

private:
    std::filesystem::path leaf_path(const std::string& algorithm, const std::string& nettype,
                                    int instance) const;
    std::filesystem::path root_;
};

} // namespace clubench
