// Controllable child process for scheduler, profiler and pipeline tests.
// Entirely self-contained (no project library): the binary under test must
// observe this one from the outside, exactly like a real external algorithm.
//
// Behaviours, all optional and executed in this order:
//   --presleep-s S    sleep S wall seconds before doing anything else
//   --alloc-mib N     allocate and touch N MiB, held until exit
//   --busy-cpu-s S    spin until S seconds of process CPU time accumulated
//   --sleep-s S       sleep S wall seconds
//   --chunk-net F     read node tokens from an edge-list file and emit a
//                     deterministic multi-level clustering (see below)
//   --hold-s S        sleep S more wall seconds (keeps the allocation hot)
//   --exit-code N     final exit status
//   --ignore-term     ignore SIGTERM, so only SIGKILL stops the process

#include <csignal>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include <CLI11.hpp>

namespace {

// First two whitespace fields of every non-comment line, deduplicated in
// appearance order.
std::vector<std::string> read_tokens(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        std::cerr << "cb_stub: cannot open " << path << "\n";
        std::exit(3);
    }
    std::vector<std::string> tokens;
    std::unordered_set<std::string> seen;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string a, b;
        ls >> a >> b;
        for (const auto& t : {a, b})
            if (!t.empty() && seen.insert(t).second) tokens.push_back(t);
    }
    return tokens;
}

// Fixed "algorithm": sort the node tokens (so the output depends on the
// node set, not the file ordering), rotate by the seed, and write level i
// as max(1, chunks >> i) near-equal contiguous groups, coarsening from
// level_0 upward. Deterministic in (node set, chunks, levels, seed).
void write_chunks(const std::string& net, const std::string& out_dir, int chunks, int levels,
                  unsigned long long seed) {
    auto tokens = read_tokens(net);
    if (tokens.empty()) {
        std::cerr << "cb_stub: no node tokens in " << net << "\n";
        std::exit(3);
    }
    std::sort(tokens.begin(), tokens.end());
    std::rotate(tokens.begin(), tokens.begin() + static_cast<long>(seed % tokens.size()),
                tokens.end());

    std::filesystem::create_directories(out_dir);
    const size_t n = tokens.size();
    for (int lvl = 0; lvl < levels; ++lvl) {
        size_t parts = static_cast<size_t>(std::max(1, chunks >> lvl));
        if (parts > n) parts = n;
        std::ofstream out(out_dir + "/level_" + std::to_string(lvl) + ".cnl");
        const size_t base = n / parts, extra = n % parts;
        size_t pos = 0;
        for (size_t p = 0; p < parts; ++p) {
            const size_t len = base + (p < extra ? 1 : 0);
            for (size_t i = 0; i < len; ++i) out << (i ? " " : "") << tokens[pos++];
            out << "\n";
        }
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"test stub: burns CPU, holds memory, sleeps, or emits clusters"};
    int alloc_mib = 0, exit_code = 0, chunks = 4, levels = 1;
    double presleep_s = 0, busy_s = 0, sleep_s = 0, hold_s = 0;
    unsigned long long seed = 0;
    bool ignore_term = false;
    std::string chunk_net, out_dir;
    app.add_option("--presleep-s", presleep_s, "wall seconds to sleep before the work");
    app.add_option("--alloc-mib", alloc_mib, "MiB to allocate and touch");
    app.add_option("--busy-cpu-s", busy_s, "CPU seconds to burn");
    app.add_option("--sleep-s", sleep_s, "wall seconds to sleep");
    app.add_option("--hold-s", hold_s, "wall seconds to sleep after the work");
    app.add_option("--exit-code", exit_code, "exit status to return");
    app.add_flag("--ignore-term", ignore_term, "ignore SIGTERM");
    app.add_option("--chunk-net", chunk_net, "emit chunked clusters of this network");
    app.add_option("--chunks", chunks, "cluster count at the finest level");
    app.add_option("--out", out_dir, "output directory for level_<i>.cnl");
    app.add_option("--levels", levels, "number of coarsening levels");
    app.add_option("--seed", seed, "rotation seed for --chunk-net");
    CLI11_PARSE(app, argc, argv);

    if (ignore_term) std::signal(SIGTERM, SIG_IGN);

    if (presleep_s > 0)
        std::this_thread::sleep_for(std::chrono::duration<double>(presleep_s));

    char* block = nullptr;
    if (alloc_mib > 0) {
        const size_t bytes = static_cast<size_t>(alloc_mib) << 20;
        block = static_cast<char*>(std::malloc(bytes));
        if (!block) return 3;
        std::memset(block, 0xa5, bytes); // fault every page in
    }

    if (busy_s > 0) {
        const std::clock_t limit =
            std::clock() + static_cast<std::clock_t>(busy_s * CLOCKS_PER_SEC);
        volatile unsigned long sink = 0;
        while (std::clock() < limit)
            for (int i = 0; i < 10000; ++i) sink = sink + static_cast<unsigned long>(i);
    }

    if (sleep_s > 0) std::this_thread::sleep_for(std::chrono::duration<double>(sleep_s));

    if (!chunk_net.empty()) {
        if (out_dir.empty()) {
            std::cerr << "cb_stub: --chunk-net needs --out\n";
            return 3;
        }
        write_chunks(chunk_net, out_dir, chunks, levels, seed);
    }

    if (hold_s > 0) std::this_thread::sleep_for(std::chrono::duration<double>(hold_s));

    std::free(block);
    return exit_code;
}
