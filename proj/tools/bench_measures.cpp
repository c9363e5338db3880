// Timing harness for the quality-measure kernels: evaluates each measure
// with the parallel implementation and the straight-line serial reference
// on planted-partition fixtures, reports both timings, and cross-checks
// that the values agree. Exits nonzero on any disagreement, so it doubles
// as a stress check when run standalone.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#if defined(_OPENMP)
#include <omp.h>
#endif

#include <CLI11.hpp>

#include "clubench/algos.hpp"
#include "clubench/clustering.hpp"
#include "clubench/measures.hpp"
#include "clubench/netdata.hpp"
#include "clubench/util.hpp"

using namespace clubench;

namespace {

double now_s() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

/// Best of `repeat` runs of `fn`, in milliseconds; the result of the last
/// run lands in `value` for the agreement check.
template <class Fn>
double best_ms(int repeat, double& value, Fn&& fn) {
    double best = 1e300;
    for (int r = 0; r < repeat; ++r) {
        const double t0 = now_s();
        value = fn();
        best = std::min(best, (now_s() - t0) * 1e3);
    }
    return best;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"serial vs. parallel timing of the quality measures"};
    std::vector<int> sizes{2000, 20000};
    int repeat = 3, clusters_per_1000 = 10;
    uint64_t seed = 1;
    app.add_option("--nodes", sizes, "fixture sizes to benchmark");
    app.add_option("--repeat", repeat, "runs per cell (best is reported)");
    app.add_option("--seed", seed, "fixture seed");
    CLI11_PARSE(app, argc, argv);

#if defined(_OPENMP)
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (compiled without OpenMP)\n");
#endif
    std::printf("%-8s %-12s %12s %12s %8s\n", "nodes", "measure", "parallel_ms", "serial_ms",
                "speedup");

    int disagreements = 0;
    for (int n : sizes) {
        const int k = std::max(2, n * clusters_per_1000 / 1000);
        auto planted = gen_planted_partition(n, k, 0.1, 2.0 / n, seed);
        const Network& net = planted.net;

        // intrinsic measures run on the baseline's output; the comparison
        // measures need two full covers of the node set, so they compare
        // the planted truth against a coarser planting of the same nodes
        Clustering cl = randcommuns(net, planted.truth, seed);
        DenseClusters dense = bind_clusters(cl, net);
        Clustering other = gen_planted_partition(n, std::max(2, k / 3), 0.1, 2.0 / n, seed + 1).truth;
        BoundPair pair = bind_pair(other, planted.truth);

        struct Cell {
            const char* name;
            std::function<double()> par, ser;
        };
        const std::vector<Cell> cells{
            {"modularity", [&] { return measures::modularity(net, dense); },
             [&] { return measures::serial::modularity(net, dense); }},
            {"conductance", [&] { return measures::conductance(net, dense); },
             [&] { return measures::serial::conductance(net, dense); }},
            {"nmi", [&] { return measures::nmi(pair); },
             [&] { return measures::serial::nmi(pair); }},
            {"omega", [&] { return measures::omega(pair); },
             [&] { return measures::serial::omega(pair); }},
            {"f1a", [&] { return measures::f1_scores(pair).f1a; },
             [&] { return measures::serial::f1_scores(pair).f1a; }},
        };
        for (const auto& cell : cells) {
            double pv = 0, sv = 0;
            const double pm = best_ms(repeat, pv, cell.par);
            const double sm = best_ms(repeat, sv, cell.ser);
            std::printf("%-8d %-12s %12.3f %12.3f %7.2fx\n", n, cell.name, pm, sm,
                        pm > 0 ? sm / pm : 0.0);
            if (std::abs(pv - sv) > 1e-9 * std::max(1.0, std::abs(sv))) {
                std::fprintf(stderr, "disagreement on %s at n=%d: parallel %s vs serial %s\n",
                             cell.name, n, fmt_double(pv).c_str(), fmt_double(sv).c_str());
                ++disagreements;
            }
        }
    }
    return disagreements == 0 ? 0 : 1;
}
