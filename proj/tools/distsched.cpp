// Copyright (C) 2026 The distsched Authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "distsched/distsched.hpp"

namespace ds = distsched;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitHorizon = 3;

struct CommonOptions {
    std::string config;
    std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool config_required) {
    auto* c = cmd->add_option("-c,--config", o.config, "Config file");
    if (config_required) c->required();
    c->check(CLI::ExistingFile);
    cmd->add_option("-s,--set", o.sets, "Override a config key (KEY=VALUE, repeatable)");
}

ds::Config load_config(const CommonOptions& o) {
    ds::Config cfg = o.config.empty() ? ds::Config{} : ds::Config::load(o.config);
    for (const auto& s : o.sets) cfg.apply_override(s);
    return cfg;
}

// Keys that only matter to scenario runs; other subcommands accept and ignore them.
void touch_scenario_keys(const ds::Config& cfg) {
    for (const char* k : {"scenario.name", "scenario.seeds", "output.dir", "output.events", "sweep.axis", "sweep.values",
                          "compare.variants"}) {
        (void)cfg.get_string(k, "");
    }
    for (const auto& k : cfg.keys_with_prefix("compare.variant.")) (void)cfg.get_string(k, "");
}

std::string fmt(double v, int prec = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

void print_table(const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width;
    for (const auto& r : rows) {
        if (width.size() < r.size()) width.resize(r.size(), 0);
        for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
    }
    for (const auto& r : rows) {
        std::string line;
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (i) line += "  ";
            line += r[i];
            if (i + 1 < r.size()) line.append(width[i] - r[i].size(), ' ');
        }
        std::cout << line << '\n';
    }
}

int cmd_gen_trace(const CommonOptions& common, std::optional<std::uint64_t> seed, const std::string& output,
                  const std::string& snapshot) {
    const auto cfg = load_config(common);
    const auto spec = ds::parse_run_spec(cfg);
    touch_scenario_keys(cfg);
    cfg.check_unused();
    if (!spec.workload) throw ds::ConfigError("workload.clusters", "gen-trace needs a generated workload");
    ds::WorkloadConfig w = *spec.workload;
    if (!seed) seed = ds::parse_seeds("scenario.seeds", cfg.get_string("scenario.seeds", "1")).front();
    w.seed = *seed;
    const auto trace = ds::generate_trace(w);
    if (output.empty() || output == "-") {
        ds::write_trace(std::cout, trace);
    } else {
        ds::save_trace(trace, output);
        std::cerr << "wrote " << trace.size() << " requests to " << output << '\n';
    }
    if (!snapshot.empty()) {
        ds::HistoryWindow window(spec.engine.history_capacity, spec.engine.embedding.dim);
        for (auto& r : ds::warm_start_records(spec, *seed)) window.push(std::move(r));
        ds::save_snapshot(window, snapshot);
        std::cerr << "wrote " << window.size() << " history records to " << snapshot << '\n';
    }
    return kExitOk;
}

int report_result(const ds::ScenarioResult& res) {
    std::vector<std::vector<std::string>> rows{
        {"variant", "value", "seeds", "mean_ttlt", "p99_ttlt", "mean_ttft", "throughput", "preempt", "sched_us/iter"}};
    for (const auto& s : res.sets) {
        const auto a = s.pooled();
        rows.push_back({s.variant, s.axis_value.value_or("-"), std::to_string(s.seeds.size()), fmt(a.mean_ttlt),
                        fmt(a.p99_ttlt), fmt(a.mean_ttft), fmt(a.throughput, 3), std::to_string(a.preemptions),
                        fmt(s.mean_decision_seconds() * 1e6, 1)});
    }
    print_table(rows);
    std::cout << "output: " << res.dir.string() << '\n';
    if (!res.complete()) {
        std::cerr << "horizon exceeded: some requests did not finish; tables are flagged incomplete\n";
        return kExitHorizon;
    }
    return kExitOk;
}

struct RunFlags {
    std::size_t jobs = 0;
    std::string output;
    bool events = false;
};

int cmd_run(const CommonOptions& common, const RunFlags& flags, const std::string& axis, const std::string& values,
            bool require_sweep) {
    auto cfg = load_config(common);
    if (!axis.empty()) cfg.set("sweep.axis", axis);
    if (!values.empty()) cfg.set("sweep.values", values);
    if (flags.events) cfg.set("output.events", "true");
    if (require_sweep && cfg.get_string("sweep.axis", "").empty()) {
        throw ds::ConfigError("sweep.axis", "sweep needs an axis (--axis or sweep.axis)");
    }
    ds::RunOptions opts;
    opts.jobs = flags.jobs ? flags.jobs : std::max(1u, std::thread::hardware_concurrency());
    if (!flags.output.empty()) opts.output_dir = flags.output;
    return report_result(ds::run_scenario(cfg, opts));
}

int cmd_overhead(const CommonOptions& common, std::optional<std::int64_t> queue_len, std::optional<std::int64_t> points,
                 std::optional<int> passes) {
    const auto cfg = load_config(common);
    ds::OverheadConfig o;
    o.queue_len = queue_len.value_or(cfg.get_int("overhead.queue_len", o.queue_len));
    o.dist_points = points.value_or(cfg.get_int("overhead.dist_points", o.dist_points));
    o.passes = passes.value_or(static_cast<int>(cfg.get_int("overhead.passes", o.passes)));
    o.seed = cfg.get_uint("overhead.seed", o.seed);
    cfg.check_unused();
    if (o.queue_len < 1) throw ds::ConfigError("overhead.queue_len", "must be >= 1");
    if (o.dist_points < 1) throw ds::ConfigError("overhead.dist_points", "must be >= 1");
    if (o.passes < 1) throw ds::ConfigError("overhead.passes", "must be >= 1");
    const auto s = ds::measure_overhead(o);
    std::cout << "queue_len = " << s.queue_len << '\n'
              << "dist_points = " << s.dist_points << '\n'
              << "passes = " << s.passes << '\n'
              << "mean_pass_ms = " << fmt(s.mean_pass_ms, 3) << '\n'
              << "p99_pass_ms = " << fmt(s.p99_pass_ms, 3) << '\n'
              << "mean_per_request_us = " << fmt(s.mean_per_request_us, 2) << '\n'
              << "mean_support_points = " << fmt(s.mean_support_points, 1) << '\n';
    return kExitOk;
}

int cmd_report(const std::string& path, const std::string& by, bool show_meta) {
    std::ifstream in(path);
    if (!in) throw ds::Error("cannot open " + path);
    std::vector<std::string> meta, lines;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        (line[0] == '#' ? meta : lines).push_back(line);
    }
    if (show_meta) {
        for (const auto& m : meta) std::cout << m << '\n';
    }
    if (lines.empty()) throw ds::FormatError(1, "no table in " + path);

    if (lines.front() != ds::kRowColumns) {
        // Aggregate tables (summary, comparison, sweep) are shown as they are.
        std::vector<std::vector<std::string>> rows;
        for (const auto& l : lines) {
            std::vector<std::string> cells;
            std::stringstream ss(l);
            std::string cell;
            while (std::getline(ss, cell, ',')) {
                if (rows.empty()) {
                    cells.push_back(cell);
                    continue;
                }
                char* end = nullptr;
                const double v = std::strtod(cell.c_str(), &end);
                const bool numeric = !cell.empty() && end == cell.c_str() + cell.size();
                cells.push_back(numeric && v != static_cast<double>(static_cast<long long>(v)) ? fmt(v) : cell);
            }
            rows.push_back(std::move(cells));
        }
        print_table(rows);
        return kExitOk;
    }

    std::istringstream text([&] {
        std::string s;
        for (const auto& l : lines) s += l + '\n';
        return s;
    }());
    const auto rows = ds::read_rows_csv(text);
    std::map<std::string, std::vector<ds::MetricsRow>> groups;
    for (const auto& r : rows) {
        std::string key = "all";
        if (by == "seed") key = std::to_string(r.seed);
        if (by == "cluster") key = r.cluster_id ? std::to_string(*r.cluster_id) : "-";
        groups[key].push_back(r);
    }
    std::vector<std::vector<std::string>> table{{by == "none" ? "scope" : by, "requests", "completed", "mean_ttlt",
                                                 "median_ttlt", "p95_ttlt", "p99_ttlt", "mean_ttft", "p99_ttft",
                                                 "mean_tpot", "throughput", "preempt", "fallback", "tv"}};
    for (const auto& [key, g] : groups) {
        const auto a = ds::aggregate(g);
        table.push_back({key, std::to_string(a.requests), std::to_string(a.completed), fmt(a.mean_ttlt),
                         fmt(a.median_ttlt), fmt(a.p95_ttlt), fmt(a.p99_ttlt), fmt(a.mean_ttft), fmt(a.p99_ttft),
                         fmt(a.mean_tpot, 5), fmt(a.throughput, 3), std::to_string(a.preemptions),
                         fmt(a.fallback_rate, 3), fmt(a.mean_prediction_tv, 3)});
    }
    print_table(table);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"distsched: LLM request scheduling simulator and experiment harness"};
    app.set_version_flag("--version", std::string(ds::kVersion));
    app.require_subcommand(1);

    CommonOptions gen_common, run_common, sweep_common, over_common;
    RunFlags run_flags, sweep_flags;

    auto* gen = app.add_subcommand("gen-trace", "Generate a workload trace as JSON Lines");
    add_common(gen, gen_common, true);
    std::optional<std::uint64_t> gen_seed;
    std::string gen_out = "-", gen_snapshot;
    gen->add_option("--seed", gen_seed, "Workload seed (default: first scenario seed)");
    gen->add_option("-o,--output", gen_out, "Output file, '-' for stdout");
    gen->add_option("--snapshot", gen_snapshot, "Also write the warm-start history window here");

    auto add_run_flags = [](CLI::App* cmd, RunFlags& f) {
        cmd->add_option("-j,--jobs", f.jobs, "Parallel seed runs (default: hardware threads)");
        cmd->add_option("-o,--output", f.output, "Output root (overrides output.dir)");
        cmd->add_flag("--events", f.events, "Write per-seed event logs");
    };
    auto* run = app.add_subcommand("run", "Run a scenario and write its CSV tree");
    add_common(run, run_common, true);
    add_run_flags(run, run_flags);

    auto* sweep = app.add_subcommand("sweep", "Run a scenario once per value of a sweep axis");
    add_common(sweep, sweep_common, true);
    add_run_flags(sweep, sweep_flags);
    std::string axis, values;
    sweep->add_option("--axis", axis, "similarity_threshold, bucket_size, rps or swap_penalty");
    sweep->add_option("--values", values, "Comma-separated axis values");

    auto* over = app.add_subcommand("overhead", "Time full predict and priority passes over a synthetic queue");
    add_common(over, over_common, false);
    std::optional<std::int64_t> queue_len, points;
    std::optional<int> passes;
    over->add_option("--queue-len", queue_len, "Pending requests per pass");
    over->add_option("--dist-points", points, "Upper bound on predicted support points");
    over->add_option("--passes", passes, "Timed passes");

    auto* report = app.add_subcommand("report", "Summarize a CSV written by run or sweep");
    std::string report_path, by = "none";
    bool show_meta = false;
    report->add_option("file", report_path, "CSV file")->required()->check(CLI::ExistingFile);
    report->add_option("--by", by, "Group per-request rows by none, seed or cluster")
        ->check(CLI::IsMember({"none", "seed", "cluster"}));
    report->add_flag("--meta", show_meta, "Print the metadata header");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        (void)app.exit(e);
        return kExitConfig;
    }

    try {
        if (*gen) return cmd_gen_trace(gen_common, gen_seed, gen_out, gen_snapshot);
        if (*run) return cmd_run(run_common, run_flags, "", "", false);
        if (*sweep) return cmd_run(sweep_common, sweep_flags, axis, values, true);
        if (*over) return cmd_overhead(over_common, queue_len, points, passes);
        if (*report) return cmd_report(report_path, by, show_meta);
    } catch (const ds::ConfigError& e) {
        std::cerr << "distsched: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ds::HorizonExceeded& e) {
        std::cerr << "distsched: " << e.what() << '\n';
        return kExitHorizon;
    } catch (const std::exception& e) {
        std::cerr << "distsched: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitFailure;
}
