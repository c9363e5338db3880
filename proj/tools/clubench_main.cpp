// clubench driver: prepares datasets, runs clustering algorithms as
// isolated child processes, evaluates their output levels, aggregates the
// results and serves a read-only monitor.
//
// Subcommands:
//   gen          planted-partition fixture (network + ground truth)
//   shuffle      deterministic reorderings of one network
//   randcommuns  the built-in baseline, re-invoked by the pool
//   measure      one quality value of one clustering
//   run          the full benchmark pipeline
//   export       rebuild summary.csv from a finished run directory
//   serve        post-mortem web monitor over a finished run
//
// Exit codes: 0 success, 1 partial failures during execution, 2 usage or
// configuration errors (reported before anything runs).

#include <glob.h>

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <thread>

#include <CLI11.hpp>

#include "clubench/algos.hpp"
#include "clubench/clustering.hpp"
#include "clubench/execpool.hpp"
#include "clubench/measures.hpp"
#include "clubench/netdata.hpp"
#include "clubench/results.hpp"
#include "clubench/util.hpp"
#include "clubench/webmon.hpp"

namespace fs = std::filesystem;
using namespace clubench;

namespace {

fs::path self_exe() { return fs::read_symlink("/proc/self/exe"); }

/// "<nettype>[^<instance>]" from a dataset filename stem; instance
/// defaults to 1 when the stem carries no '^' marker.
std::pair<std::string, int> dataset_id(const fs::path& file) {
    const std::string stem = file.stem().string();
    const size_t caret = stem.rfind('^');
    if (caret != std::string::npos) {
        long long inst = 0;
        if (parse_int(std::string_view(stem).substr(caret + 1), inst) && inst >= 0)
            return {stem.substr(0, caret), static_cast<int>(inst)};
    }
    return {stem, 1};
}

/// Ground truth lives next to the network as "<stem>_truth.cnl".
std::optional<fs::path> truth_for(const fs::path& net) {
    fs::path t = net.parent_path() / (net.stem().string() + "_truth.cnl");
    if (fs::exists(t)) return t;
    return std::nullopt;
}

std::vector<fs::path> expand_globs(const std::vector<std::string>& patterns) {
    std::vector<fs::path> files;
    std::set<std::string> seen;
    for (const auto& pat : patterns) {
        glob_t g{};
        const int rc = glob(pat.c_str(), GLOB_ERR, nullptr, &g);
        if (rc == 0) {
            for (size_t i = 0; i < g.gl_pathc; ++i)
                if (seen.insert(g.gl_pathv[i]).second) files.emplace_back(g.gl_pathv[i]);
        } else if (rc == GLOB_NOMATCH && fs::exists(pat)) {
            if (seen.insert(pat).second) files.emplace_back(pat);
        }
        globfree(&g);
    }
    return files;
}

// ---------------------------------------------------------------- gen

int cmd_gen(int nodes, int clusters, double p_in, double p_out, uint64_t seed,
            const std::string& out_dir, const std::string& name) {
    auto planted = gen_planted_partition(nodes, clusters, p_in, p_out, seed);
    fs::create_directories(out_dir);
    const fs::path net_path = fs::path(out_dir) / (name + ".nse");
    const fs::path truth_path = fs::path(out_dir) / (name + "_truth.cnl");
    write_network(planted.net, net_path);
    write_cnl(planted.truth, truth_path);
    std::cout << net_path.string() << "\n" << truth_path.string() << "\n";
    return 0;
}

// ------------------------------------------------------------ shuffle

int cmd_shuffle(const std::string& net_file, int count, uint64_t seed,
                std::string out_dir) {
    const fs::path src(net_file);
    if (out_dir.empty()) out_dir = src.parent_path().string();
    if (out_dir.empty()) out_dir = ".";
    fs::create_directories(out_dir);
    Network net = read_network(src, [](const std::string& w) { std::cerr << w << "\n"; });
    for (int k = 0; k < count; ++k) {
        fs::path out = fs::path(out_dir) /
                       (src.stem().string() + "^" + std::to_string(k) + src.extension().string());
        write_network(shuffle_network(net, k, seed), out);
        std::cout << out.string() << "\n";
    }
    return 0;
}

// -------------------------------------------------------- randcommuns

int cmd_randcommuns(const std::string& net_file, const std::string& truth_file,
                    const std::string& out_dir, uint64_t seed) {
    Network net = read_network(net_file);
    Clustering truth = read_cnl(truth_file);
    Clustering result = randcommuns(net, truth, seed);
    fs::create_directories(out_dir);
    write_cnl(result, fs::path(out_dir) / "level_0.cnl");
    return 0;
}

// ------------------------------------------------------------ measure

int cmd_measure(const std::string& name, const std::string& net_file,
                const std::string& cl_file, const std::string& truth_file,
                const std::string& out_file) {
    const auto* info = measures::find_measure(name);
    if (!info) {
        std::cerr << "unknown measure '" << name << "'\n";
        return 2;
    }
    if (info->needs_network && net_file.empty()) {
        std::cerr << name << " needs --net\n";
        return 2;
    }
    if (info->needs_truth && truth_file.empty()) {
        std::cerr << name << " needs --truth\n";
        return 2;
    }
    Network net;
    if (!net_file.empty()) net = read_network(net_file);
    Clustering cl = read_cnl(cl_file);
    Clustering truth;
    if (!truth_file.empty()) truth = read_cnl(truth_file);

    const double value = measures::evaluate(name, net_file.empty() ? nullptr : &net, cl,
                                            truth_file.empty() ? nullptr : &truth);
    const std::string row = name + "," + fmt_double(value) + "\n";
    if (out_file.empty()) {
        std::cout << row;
    } else {
        fs::create_directories(fs::path(out_file).parent_path());
        std::ofstream out(out_file);
        out << row;
        if (!out) {
            std::cerr << "cannot write " << out_file << "\n";
            return 1;
        }
    }
    return 0;
}

// ---------------------------------------------------------------- run

struct BenchConfig {
    std::vector<std::string> datasets;
    int shuffles = 4; // variants per network, id 0 being the original
    int levels = 10;
    std::vector<std::string> algorithms{"randcommuns"};
    std::vector<std::string> measure_names; // empty: the whole catalog
    double timeout_s = 0;                   // per job; 0 disables
    double mem_limit_fraction = 0.9;
    uint64_t seed = 0;
    std::string outdir;
    int webport = 0; // 0 disables the monitor
    std::string topology_file;
    // name -> (command template, category) from the config file
    std::vector<std::tuple<std::string, std::string, std::string>> extra_algos;
};

/// Line-oriented "key = value" config. Recognized keys mirror the CLI
/// flags; "algo.<name>.cmd" and "algo.<name>.category" register external
/// algorithm adapters. `skip` carries the keys already fixed by explicit
/// flags, which win over the file.
void apply_config_file(const std::string& path, BenchConfig& cfg,
                       const std::set<std::string>& skip) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open config file " + path);
    std::map<std::string, std::string> algo_cmd, algo_cat;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view sv = trim(line);
        if (sv.empty() || sv.front() == '#') continue;
        const size_t eq = sv.find('=');
        if (eq == std::string_view::npos)
            throw ParseError(path, lineno, "expected 'key = value'");
        const std::string key(trim(sv.substr(0, eq)));
        const std::string value(trim(sv.substr(eq + 1)));
        auto as_list = [&value] {
            std::vector<std::string> out;
            for (auto piece : split_char(value, ','))
                for (auto tok : split_ws(piece)) out.emplace_back(tok);
            return out;
        };
        auto as_double = [&](double& out) {
            if (!parse_double(value, out))
                throw ParseError(path, lineno, "bad number '" + value + "'");
        };
        auto as_int = [&](auto& out) {
            long long v = 0;
            if (!parse_int(value, v)) throw ParseError(path, lineno, "bad integer '" + value + "'");
            out = static_cast<std::decay_t<decltype(out)>>(v);
        };
        if (skip.count(key)) continue;
        if (key == "datasets") {
            auto more = as_list();
            cfg.datasets.insert(cfg.datasets.end(), more.begin(), more.end());
        } else if (key == "shuffles") {
            as_int(cfg.shuffles);
        } else if (key == "levels") {
            as_int(cfg.levels);
        } else if (key == "algorithms") {
            cfg.algorithms = as_list();
        } else if (key == "measures") {
            cfg.measure_names = as_list();
        } else if (key == "timeout") {
            as_double(cfg.timeout_s);
        } else if (key == "mem_limit_fraction") {
            as_double(cfg.mem_limit_fraction);
        } else if (key == "seed") {
            as_int(cfg.seed);
        } else if (key == "outdir") {
            cfg.outdir = value;
        } else if (key == "webport") {
            as_int(cfg.webport);
        } else if (key == "topology") {
            cfg.topology_file = value;
        } else if (key.rfind("algo.", 0) == 0) {
            const size_t dot = key.rfind('.');
            const std::string name = key.substr(5, dot - 5);
            const std::string field = key.substr(dot + 1);
            if (name.empty() || (field != "cmd" && field != "category"))
                throw ParseError(path, lineno, "unknown key '" + key + "'");
            (field == "cmd" ? algo_cmd : algo_cat)[name] = value;
        } else {
            throw ParseError(path, lineno, "unknown key '" + key + "'");
        }
    }
    for (const auto& [name, cmd] : algo_cmd) {
        auto cat = algo_cat.count(name) ? algo_cat[name] : "algorithm";
        cfg.extra_algos.emplace_back(name, cmd, cat);
    }
    for (const auto& [name, cat] : algo_cat)
        if (!algo_cmd.count(name))
            throw InvalidArgument("config sets algo." + name + ".category without .cmd");
}

struct DatasetPlan {
    fs::path source;
    std::string nettype;
    int instance = 1;
    std::optional<fs::path> truth;
    std::vector<fs::path> variants; // shuffle 0..count-1, written in phase 1
};

int cmd_run(BenchConfig cfg) {
    // -- validation: everything that can be rejected happens before any
    //    child process starts.
    if (cfg.outdir.empty()) throw InvalidArgument("run needs --outdir");
    if (cfg.shuffles < 1) throw InvalidArgument("--shuffles must be >= 1");
    if (cfg.levels < 1) throw InvalidArgument("--levels must be >= 1");
    if (cfg.timeout_s < 0) throw InvalidArgument("--timeout must be >= 0");

    auto files = expand_globs(cfg.datasets);
    if (files.empty()) throw InvalidArgument("no datasets matched");

    AlgoRegistry registry = default_registry(self_exe());
    for (const auto& [name, cmd, cat] : cfg.extra_algos)
        registry.add(template_adapter(name, cmd, cat));
    for (const auto& a : cfg.algorithms)
        if (!registry.find(a)) {
            std::string known;
            for (const auto& n : registry.names()) known += (known.empty() ? "" : ", ") + n;
            throw InvalidArgument("unknown algorithm '" + a + "' (known: " + known + ")");
        }

    if (cfg.measure_names.empty())
        for (const auto& m : measures::catalog()) cfg.measure_names.push_back(m.name);
    for (const auto& m : cfg.measure_names)
        if (!measures::find_measure(m)) throw InvalidArgument("unknown measure '" + m + "'");

    // children run under the pool with the run directory as cwd, so every
    // path handed to them must be absolute
    std::vector<DatasetPlan> plans;
    for (const auto& f : files) {
        DatasetPlan p;
        p.source = fs::absolute(f);
        std::tie(p.nettype, p.instance) = dataset_id(f);
        p.truth = truth_for(p.source);
        plans.push_back(std::move(p));
    }
    for (const auto& p : plans)
        for (const auto& m : cfg.measure_names)
            if (measures::find_measure(m)->needs_truth && !p.truth)
                std::cerr << "note: " << p.source.string() << " has no ground truth; " << m
                          << " skipped for it\n";

    const fs::path outdir = fs::absolute(cfg.outdir);
    fs::create_directories(outdir / "data");
    fs::create_directories(outdir / "measures");

    // -- phase 1: shuffle every dataset (variant 0 is the original order)
    for (auto& p : plans) {
        Network net = read_network(
            p.source, [&](const std::string& w) { std::cerr << p.source.string() << ": " << w << "\n"; });
        const std::string id = p.nettype + "^" + std::to_string(p.instance);
        const fs::path dir = outdir / "data" / id;
        fs::create_directories(dir);
        for (int k = 0; k < cfg.shuffles; ++k) {
            fs::path out =
                dir / (p.nettype + "^" + std::to_string(k) + p.source.extension().string());
            write_network(shuffle_network(net, k, cfg.seed), out);
            p.variants.push_back(std::move(out));
        }
    }

    // -- pool and monitor
    PoolConfig pcfg;
    pcfg.topology = cfg.topology_file.empty() ? TopologyMap::detect()
                                              : TopologyMap::from_file(cfg.topology_file);
    pcfg.mem_limit_fraction = cfg.mem_limit_fraction;
    pcfg.log_path = outdir / "pool.log";
    pcfg.resources_csv = outdir / "resources.csv";
    fs::remove(pcfg.resources_csv); // fresh profiling log per run
    ExecPool pool(pcfg);

    WebMonitor monitor([&pool] { return pool.snapshot(); });
    if (cfg.webport > 0) {
        const int port = monitor.start(cfg.webport);
        std::cerr << "monitor on http://localhost:" << port << "/jobs\n";
    }

    // -- phases 2-4: algorithm jobs; each success unifies its levels and
    //    queues the evaluation jobs right back into the running pool.
    struct Pending {
        std::string measure;
        ResultKey key;
        fs::path csv;
    };
    std::vector<Pending> pending; // filled on the control thread only
    const std::string self = self_exe().string();
    const std::optional<double> job_timeout =
        cfg.timeout_s > 0 ? std::optional<double>(cfg.timeout_s) : std::nullopt;

    for (const auto& algo_name : cfg.algorithms) {
        const AlgoAdapter* adapter = registry.find(algo_name);
        Task* algo_task = pool.add_task(algo_name);
        for (const auto& p : plans) {
            const std::string id = p.nettype + "^" + std::to_string(p.instance);
            Task* net_task = pool.add_task(id, algo_task);
            for (int k = 0; k < cfg.shuffles; ++k) {
                const std::string jobname = algo_name + ":" + id + ":" + std::to_string(k);
                AlgoContext ctx;
                ctx.net_path = p.variants[static_cast<size_t>(k)];
                ctx.truth_path = p.truth;
                ctx.out_dir = outdir / algo_name / id / std::to_string(k);
                ctx.seed = mix64(cfg.seed ^ fnv1a64(jobname));
                ctx.levels = cfg.levels;
                fs::create_directories(ctx.out_dir);

                JobSpec spec;
                spec.name = jobname;
                spec.argv = adapter->command(ctx); // throws on unusable dataset
                spec.category = adapter->category;
                spec.workdir = outdir;
                spec.timeout_s = job_timeout;
                spec.task = net_task;
                spec.ondone = [&, ctx, algo_name, p, k, net_task](const Job& job) {
                    if (job.state != JobState::Done) return;
                    auto kept = unify_level_files(ctx.out_dir, static_cast<size_t>(cfg.levels));
                    for (size_t li = 0; li < kept.size(); ++li) {
                        for (const auto& mname : cfg.measure_names) {
                            const auto* mi = measures::find_measure(mname);
                            if (mi->needs_truth && !p.truth) continue;
                            const std::string mjob = "m:" + mname + ":" + job.name + ":L" +
                                                     std::to_string(li);
                            Pending rec;
                            rec.measure = mname;
                            rec.key = {algo_name, p.nettype, p.instance, k,
                                       static_cast<int>(li), mname};
                            rec.csv = outdir / "measures" / (mjob + ".csv");
                            std::vector<std::string> argv{self,   "measure",
                                                          mname,  "--cl",
                                                          kept[li].string(), "--out",
                                                          rec.csv.string()};
                            if (mi->needs_network) {
                                argv.push_back("--net");
                                argv.push_back(ctx.net_path.string());
                            }
                            if (mi->needs_truth) {
                                argv.push_back("--truth");
                                argv.push_back(p.truth->string());
                            }
                            JobSpec mspec;
                            mspec.name = mjob;
                            mspec.argv = std::move(argv);
                            mspec.category = "measure";
                            mspec.workdir = outdir;
                            mspec.timeout_s = job_timeout;
                            mspec.task = net_task;
                            pool.submit(std::move(mspec));
                            pending.push_back(std::move(rec));
                        }
                    }
                };
                pool.submit(std::move(spec));
            }
        }
    }

    const RunSummary sum = pool.run();
    if (cfg.webport > 0) monitor.stop();

    // -- phase 5: fold the per-level evaluations into the store
    ResultStore store(outdir / "results");
    int collect_misses = 0;
    for (const auto& rec : pending) {
        std::ifstream in(rec.csv);
        std::string line;
        double value = 0;
        if (!in || !std::getline(in, line) ||
            line.rfind(rec.measure + ",", 0) != 0 ||
            !parse_double(std::string_view(line).substr(rec.measure.size() + 1), value)) {
            std::cerr << "missing evaluation " << rec.csv.string() << "\n";
            ++collect_misses;
            continue;
        }
        store.record(rec.key, value, [](const std::string& w) { std::cerr << w << "\n"; });
    }

    // -- phase 6: summary
    store.export_summary(outdir / "summary.csv", pcfg.resources_csv);

    std::cerr << strfmt("run: %d submitted, %d done, %d failed, %d timedout, %d killed\n",
                        sum.submitted, sum.done, sum.failed, sum.timedout, sum.killed);
    return (sum.ok() && collect_misses == 0) ? 0 : 1;
}

// ------------------------------------------------------------- export

int cmd_export(const std::string& run_dir, std::string out_file) {
    const fs::path dir(run_dir);
    if (!fs::is_directory(dir / "results"))
        throw InvalidArgument("no results tree under " + run_dir);
    if (out_file.empty()) out_file = (dir / "summary.csv").string();
    ResultStore store(dir / "results");
    fs::path resources = dir / "resources.csv";
    store.export_summary(out_file, fs::exists(resources) ? resources : fs::path{});
    std::cout << out_file << "\n";
    return 0;
}

// -------------------------------------------------------------- serve

std::atomic<bool> g_stop{false};
void on_signal(int) { g_stop = true; }

/// Replays a pool journal into the monitoring snapshot a live run would
/// have produced at its end.
StateSnapshot snapshot_from_log(const fs::path& log_file) {
    struct Rebuilt {
        JobView view;
        std::string task;
    };
    std::vector<std::string> order;
    std::map<std::string, Rebuilt> jobs;
    auto kv = [](const std::string& detail, const std::string& key) -> std::optional<std::string> {
        for (auto tok : split_ws(detail)) {
            if (tok.size() > key.size() + 1 && tok.substr(0, key.size()) == key &&
                tok[key.size()] == '=')
                return std::string(tok.substr(key.size() + 1));
        }
        return std::nullopt;
    };

    for (const auto& e : EventLog::parse(log_file)) {
        if (e.job == "-") continue;
        auto it = jobs.find(e.job);
        if (it == jobs.end()) {
            if (e.event != "submitted") continue; // stray line of a foreign journal
            Rebuilt r;
            r.view.name = e.job;
            r.view.state = "pending";
            if (auto t = kv(e.detail, "task"); t && *t != "-") r.task = *t;
            order.push_back(e.job);
            jobs.emplace(e.job, std::move(r));
            continue;
        }
        JobView& v = it->second.view;
        double num = 0;
        if (e.event == "start") {
            v.state = "running";
            ++v.attempts;
            if (auto t = kv(e.detail, "t"); t && parse_double(*t, num)) v.tstart = num;
        } else if (e.event == "exit") {
            if (auto w = kv(e.detail, "wall"); w && parse_double(*w, num)) v.duration = num;
            if (auto r = kv(e.detail, "rss"); r && parse_double(*r, num)) v.rss = num;
        } else if (e.event == "postponed") {
            v.state = "postponed";
        } else if (e.event == "done" || e.event == "failed" || e.event == "timedout" ||
                   e.event == "killed") {
            v.state = e.event;
        }
    }

    StateSnapshot snap;
    snap.timestamp = iso8601_utc(std::chrono::system_clock::now());
    snap.system = read_system_summary();
    for (const auto& name : order) {
        const Rebuilt& r = jobs.at(name);
        JobView v = r.view;
        v.task = r.task;
        snap.jobs.push_back(std::move(v));
    }
    for (const auto& v : snap.jobs) {
        if (v.state == "running" || v.state == "postponed") ++snap.system.workers_running;
        if (v.state == "pending") ++snap.system.jobs_pending;
    }

    // task forest from the task paths; state derived from the leaves
    auto place = [](std::vector<TaskView>& roots, const std::string& path) -> TaskView* {
        std::vector<TaskView>* level = &roots;
        TaskView* node = nullptr;
        for (auto part : split_char(path, '/')) {
            node = nullptr;
            for (auto& t : *level)
                if (t.name == part) node = &t;
            if (!node) {
                level->push_back(TaskView{std::string(part), "pending", {}, {}});
                node = &level->back();
            }
            level = &node->subtasks;
        }
        return node;
    };
    for (const auto& v : snap.jobs) {
        if (v.task.empty()) continue;
        place(snap.tasks, v.task)->jobs.push_back(v);
        if (v.state == "failed" || v.state == "timedout" || v.state == "killed") {
            TaskView* ft = place(snap.failures, v.task);
            ft->state = "failed";
            ft->jobs.push_back(v);
        }
    }
    std::function<std::string(TaskView&)> derive = [&](TaskView& t) -> std::string {
        bool any_running = false, any_failed = false, any_pending = false;
        auto fold = [&](const std::string& s) {
            if (s == "running" || s == "postponed") any_running = true;
            else if (s == "failed" || s == "timedout" || s == "killed") any_failed = true;
            else if (s == "pending") any_pending = true;
        };
        for (auto& sub : t.subtasks) fold(derive(sub));
        for (auto& j : t.jobs) fold(j.state);
        t.state = any_running ? "running"
                  : any_failed ? "failed"
                  : any_pending ? "pending"
                                : "done";
        return t.state;
    };
    for (auto& t : snap.tasks) derive(t);
    return snap;
}

int cmd_serve(const std::string& run_dir, int port) {
    const fs::path log_file = fs::path(run_dir) / "pool.log";
    if (!fs::exists(log_file)) throw InvalidArgument("no pool.log under " + run_dir);
    StateSnapshot snap = snapshot_from_log(log_file);
    WebMonitor monitor([snap] { return snap; });
    const int bound = monitor.start(port);
    std::cout << "serving " << run_dir << " on http://localhost:" << bound << "/jobs\n";
    std::cout.flush();
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    monitor.stop();
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"clustering algorithm benchmark"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen", "generate a planted-partition fixture");
    int g_nodes = 100, g_clusters = 4;
    double g_pin = 0.9, g_pout = 0.05;
    uint64_t g_seed = 0;
    std::string g_out = ".", g_name = "synth";
    gen->add_option("--nodes", g_nodes, "node count");
    gen->add_option("--clusters", g_clusters, "planted cluster count");
    gen->add_option("--pin", g_pin, "intra-cluster edge probability");
    gen->add_option("--pout", g_pout, "inter-cluster edge probability");
    gen->add_option("--seed", g_seed, "generator seed");
    gen->add_option("--out", g_out, "output directory");
    gen->add_option("--name", g_name, "fixture basename");

    auto* shuf = app.add_subcommand("shuffle", "write deterministic reorderings");
    std::string s_net, s_out;
    int s_count = 4;
    uint64_t s_seed = 0;
    shuf->add_option("--net", s_net, "input network")->required();
    shuf->add_option("--count", s_count, "variants to write (0 is the original)");
    shuf->add_option("--seed", s_seed, "shuffle seed");
    shuf->add_option("--out", s_out, "output directory (default: alongside input)");

    auto* rc = app.add_subcommand("randcommuns", "ground-truth-shaped random baseline");
    std::string r_net, r_truth, r_out;
    uint64_t r_seed = 0;
    int r_levels = 1;
    rc->add_option("--net", r_net, "input network")->required();
    rc->add_option("--truth", r_truth, "ground-truth clustering")->required();
    rc->add_option("--out", r_out, "output directory")->required();
    rc->add_option("--seed", r_seed, "seed");
    rc->add_option("--levels", r_levels, "accepted for adapter symmetry; one level comes out");

    auto* meas = app.add_subcommand("measure", "evaluate one clustering");
    std::string m_name, m_net, m_cl, m_truth, m_out;
    meas->add_option("name", m_name, "measure name")->required();
    meas->add_option("--net", m_net, "network (intrinsic measures)");
    meas->add_option("--cl", m_cl, "clustering to evaluate")->required();
    meas->add_option("--truth", m_truth, "reference clustering (extrinsic measures)");
    meas->add_option("--out", m_out, "output CSV (default: stdout)");

    auto* run = app.add_subcommand("run", "full benchmark pipeline");
    BenchConfig cfg;
    std::string config_file;
    run->add_option("--datasets", cfg.datasets, "network files or globs");
    run->add_option("--shuffles", cfg.shuffles, "variants per network, including the original");
    run->add_option("--levels", cfg.levels, "output levels kept per execution");
    run->add_option("--algorithms", cfg.algorithms, "algorithms to run");
    run->add_option("--measures", cfg.measure_names, "measures to apply (default: all)");
    run->add_option("--timeout", cfg.timeout_s, "per-job timeout, seconds (0: none)");
    run->add_option("--mem-limit-fraction", cfg.mem_limit_fraction,
                    "watchdog cap as a fraction of RAM");
    run->add_option("--seed", cfg.seed, "master seed");
    run->add_option("--outdir", cfg.outdir, "run directory");
    run->add_option("--webport", cfg.webport, "monitor port (0: disabled)");
    run->add_option("--topology", cfg.topology_file, "manual topology file");
    run->add_option("--config", config_file, "key = value config file (flags win)");

    auto* exp = app.add_subcommand("export", "rebuild summary.csv from a run directory");
    std::string e_run, e_out;
    exp->add_option("--run", e_run, "run directory")->required();
    exp->add_option("--out", e_out, "summary path (default: <run>/summary.csv)");

    auto* srv = app.add_subcommand("serve", "post-mortem monitor over a run directory");
    std::string v_run;
    int v_port = 8080;
    srv->add_option("--run", v_run, "run directory")->required();
    srv->add_option("--webport", v_port, "port to bind (0: ephemeral)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed()) return cmd_gen(g_nodes, g_clusters, g_pin, g_pout, g_seed, g_out, g_name);
        if (shuf->parsed()) return cmd_shuffle(s_net, s_count, s_seed, s_out);
        if (rc->parsed()) return cmd_randcommuns(r_net, r_truth, r_out, r_seed);
        if (meas->parsed()) return cmd_measure(m_name, m_net, m_cl, m_truth, m_out);
        if (run->parsed()) {
            std::set<std::string> fixed;
            for (const auto& [flag, key] :
                 std::initializer_list<std::pair<const char*, const char*>>{
                     {"--datasets", "datasets"}, {"--shuffles", "shuffles"},
                     {"--levels", "levels"}, {"--algorithms", "algorithms"},
                     {"--measures", "measures"}, {"--timeout", "timeout"},
                     {"--mem-limit-fraction", "mem_limit_fraction"}, {"--seed", "seed"},
                     {"--outdir", "outdir"}, {"--webport", "webport"},
                     {"--topology", "topology"}})
                if (run->count(flag)) fixed.insert(key);
            if (!config_file.empty()) apply_config_file(config_file, cfg, fixed);
            return cmd_run(std::move(cfg));
        }
        if (exp->parsed()) return cmd_export(e_run, e_out);
        if (srv->parsed()) return cmd_serve(v_run, v_port);
    } catch (const ParseError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const InvalidArgument& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
    return 2;
}
