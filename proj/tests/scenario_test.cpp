// Copyright (C) 2026 The distsched Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "distsched/scenario.hpp"

using namespace distsched;
namespace fs = std::filesystem;

namespace {

const char* kSmall =
    "scenario.name = small\n"
    "scenario.seeds = 1..3\n"
    "scenario.warmup = 200\n"
    "backend.kv_capacity = 4096\n"
    "backend.max_batch = 16\n"
    "policy.kind = gittins\n"
    "predictor.kind = semantic-history\n"
    "predictor.min_matches = 5\n"
    "workload.lambda = 4\n"
    "workload.n_requests = 150\n"
    "workload.o_max = 512\n"
    "workload.clusters = 2\n"
    "workload.cluster.0.template = random(1,120)\n"
    "workload.cluster.0.noise = 10..30\n"
    "workload.cluster.0.law = lognormal(3,0.8)\n"
    "workload.cluster.1.template = random(2,120)\n"
    "workload.cluster.1.noise = 10..30\n"
    "workload.cluster.1.law = bimodal(10,0.5,300)\n";

class ScenarioDir : public ::testing::Test {
protected:
    void SetUp() override {
        root_ = fs::temp_directory_path() / ("distsched-scenario-" + std::string(
                                                 ::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(root_);
    }
    void TearDown() override { fs::remove_all(root_); }

    static Config small(const std::vector<std::string>& overrides = {}) {
        auto c = Config::parse(kSmall);
        for (const auto& o : overrides) c.apply_override(o);
        return c;
    }

    ScenarioResult run(const Config& cfg, const std::string& sub, std::size_t jobs = 1) {
        RunOptions o;
        o.jobs = jobs;
        o.output_dir = root_ / sub;
        return run_scenario(cfg, o);
    }

    static std::map<std::string, std::string> read_tree(const fs::path& dir) {
        std::map<std::string, std::string> files;
        for (const auto& e : fs::recursive_directory_iterator(dir)) {
            if (!e.is_regular_file()) continue;
            std::ifstream in(e.path(), std::ios::binary);
            std::ostringstream ss;
            ss << in.rdbuf();
            files[fs::relative(e.path(), dir).string()] = ss.str();
        }
        return files;
    }

    fs::path root_;
};

std::vector<MetricsRow> read_rows(const fs::path& p) {
    std::ifstream in(p);
    return read_rows_csv(in);
}

}  // namespace

TEST(ScenarioParse, LawsTemplatesSeeds) {
    EXPECT_EQ(to_string(parse_law("f", "lognormal(4.5, 0.8)")), to_string(LengthLaw{LogNormalLaw{4.5, 0.8}}));
    EXPECT_THROW(parse_law("f", "lognormal(4.5)"), ConfigError);
    EXPECT_THROW(parse_law("f", "zipf(2)"), ConfigError);
    EXPECT_THROW(parse_law("f", "bimodal(5,1.5,9)"), ConfigError);
    EXPECT_EQ(parse_template("t", "tokens(5 6 7) + random(3,4)", 100).size(), 7u);
    EXPECT_EQ(parse_template("t", "random(3,4)", 100), parse_template("t", "random(3,4)", 100));
    EXPECT_EQ(parse_seeds("s", "2..4"), (std::vector<std::uint64_t>{2, 3, 4}));
    EXPECT_EQ(parse_seeds("s", "7, 1"), (std::vector<std::uint64_t>{7, 1}));
    EXPECT_THROW(parse_seeds("s", "4..2"), ConfigError);
}

TEST_F(ScenarioDir, ThreeSeedsGiveThreeFilesAndPooled) {
    const auto res = run(small(), "a");
    EXPECT_TRUE(res.complete());
    std::size_t seed_files = 0;
    for (const auto& e : fs::directory_iterator(res.dir)) seed_files += e.path().filename().string().rfind("seed-", 0) == 0;
    EXPECT_EQ(seed_files, 3u);
    EXPECT_TRUE(fs::exists(res.dir / "pooled.csv"));
    EXPECT_TRUE(fs::exists(res.dir / "summary.csv"));
    EXPECT_EQ(res.dir.filename().string(), "small-" + res.plan.config_hash);
}

TEST_F(ScenarioDir, RerunsAndJobCountsAreByteIdentical) {
    const auto a = run(small(), "a", 1);
    const auto b = run(small(), "b", 1);
    const auto c = run(small(), "c", 4);
    const auto ta = read_tree(a.dir);
    EXPECT_EQ(ta, read_tree(b.dir));
    EXPECT_EQ(ta, read_tree(c.dir));
    EXPECT_EQ(ta.size(), 5u);
}

TEST_F(ScenarioDir, OutputDirDoesNotChangeHash) {
    auto c1 = small({"output.dir=x"});
    auto c2 = small({"output.dir=y"});
    EXPECT_EQ(parse_plan(c1).config_hash, parse_plan(c2).config_hash);
    EXPECT_NE(parse_plan(c1).config_hash, parse_plan(small({"workload.lambda=5"})).config_hash);
}

TEST_F(ScenarioDir, PooledEqualsRecomputationFromSeedFiles) {
    const auto res = run(small(), "a");
    std::vector<MetricsRow> concat;
    for (int s = 1; s <= 3; ++s) {
        auto rows = read_rows(res.dir / ("seed-" + std::to_string(s) + ".csv"));
        for (const auto& r : rows) {
            EXPECT_EQ(r.seed, static_cast<std::uint64_t>(s));
            if (r.completed()) EXPECT_LE(r.ttft, r.ttlt);
        }
        concat.insert(concat.end(), rows.begin(), rows.end());
    }
    const auto pooled = read_rows(res.dir / "pooled.csv");
    ASSERT_EQ(pooled.size(), concat.size());
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < pooled.size(); ++i) {
        EXPECT_EQ(pooled[i].id, concat[i].id);
        EXPECT_EQ(pooled[i].ttlt, concat[i].ttlt);
        if (concat[i].completed()) {
            sum += concat[i].ttlt;
            ++n;
        }
    }
    EXPECT_NEAR(aggregate(pooled).mean_ttlt, sum / static_cast<double>(n), 1e-12);
    EXPECT_EQ(aggregate(pooled).items(), res.sets[0].pooled().items());
}

TEST_F(ScenarioDir, CompareWritesOneRowPerVariant) {
    auto cfg = small({"scenario.seeds=1", "compare.variants=fcfs,mean,gittins-norefresh",
                      "compare.variant.fcfs=policy.kind=fcfs", "compare.variant.mean=policy.kind=mean",
                      "compare.variant.gittins-norefresh=policy.kind=gittins-norefresh"});
    const auto res = run(cfg, "a");
    std::ifstream in(res.dir / "comparison.csv");
    std::vector<std::string> labels;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        labels.push_back(line.substr(0, line.find(',')));
    }
    EXPECT_EQ(labels, (std::vector<std::string>{"variant", "fcfs", "mean", "gittins-norefresh"}));
    EXPECT_TRUE(fs::exists(res.dir / "mean" / "seed-1.csv"));
}

TEST_F(ScenarioDir, SweepWritesLongFormat) {
    auto cfg = small({"scenario.seeds=1", "sweep.axis=rps", "sweep.values=2,4"});
    const auto res = run(cfg, "a");
    ASSERT_EQ(res.sets.size(), 2u);
    std::ifstream in(res.dir / "sweep.csv");
    std::string line;
    std::size_t rows = 0;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            EXPECT_EQ(line, "variant,axis_value,metric,value");
            header = true;
            continue;
        }
        ++rows;
    }
    EXPECT_EQ(rows, 2 * Aggregates{}.items().size());
    EXPECT_TRUE(fs::exists(res.dir / "rps-4" / "pooled.csv"));
}

TEST(ScenarioConfig, ErrorsNameTheField) {
    auto field_of = [](const Config& c) {
        try {
            (void)parse_plan(c);
        } catch (const ConfigError& e) {
            return e.field();
        }
        return std::string("<none>");
    };
    auto base = Config::parse(kSmall);
    auto c = base;
    c.apply_override("policy.kidn=fcfs");
    EXPECT_EQ(field_of(c), "policy.kidn");
    c = base;
    c.apply_override("sweep.axis=temperature");
    EXPECT_EQ(field_of(c), "sweep.axis");
    c = base;
    c.apply_override("sweep.axis=bucket_size");
    c.apply_override("sweep.values=100");
    c.apply_override("policy.kind=fcfs");
    EXPECT_EQ(field_of(c), "sweep.axis");
    c = base;
    c.apply_override("sweep.values=1,2");
    EXPECT_EQ(field_of(c), "sweep.values");
    c = base;
    c.apply_override("backend.kv_capacity=-1");
    EXPECT_NE(field_of(c), "<none>");
    c = base;
    c.apply_override("compare.variants=ghost");
    EXPECT_EQ(field_of(c), "compare.variant.ghost");
    c = base;
    c.apply_override("scenario.trace=/no/such/trace.jsonl");
    EXPECT_EQ(field_of(c), "scenario.trace");
}

TEST_F(ScenarioDir, HorizonMarksIncomplete) {
    const auto res = run(small({"scenario.seeds=1", "scenario.horizon=2"}), "a");
    EXPECT_FALSE(res.complete());
    std::ifstream in(res.dir / "seed-1.csv");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    EXPECT_NE(text.find("# seed_complete = false"), std::string::npos);
    const auto rows = read_rows(res.dir / "seed-1.csv");
    EXPECT_EQ(rows.size(), 150u);
    EXPECT_TRUE(std::any_of(rows.begin(), rows.end(), [](const MetricsRow& r) { return !r.completed(); }));
}

TEST(ScenarioTrace, MemoryInversionTrace) {
    auto cfg = Config::load(fs::path(DISTSCHED_CONFIG_DIR) / "scenarios" / "memory-inversion.conf");
    cfg.set("scenario.trace", (fs::path(DISTSCHED_TEST_DATA) / "memory-inversion.jsonl").string());
    RunOptions o;
    o.write = false;
    const auto res = run_scenario(cfg, o);
    const auto rb = res.find("resource-bound").pooled();
    const auto oo = res.find("output-only").pooled();
    EXPECT_EQ(rb.completed, 30);
    EXPECT_LT(rb.mean_ttlt, oo.mean_ttlt);
}

TEST(ScenarioConfigs, ShippedScenariosParse) {
    for (const auto& e : fs::directory_iterator(fs::path(DISTSCHED_CONFIG_DIR) / "scenarios")) {
        auto cfg = Config::load(e.path());
        if (cfg.has("scenario.trace")) {
            cfg.set("scenario.trace", (fs::path(DISTSCHED_CONFIG_DIR).parent_path() / cfg.get_string("scenario.trace", "")).string());
        }
        EXPECT_NO_THROW((void)parse_plan(cfg)) << e.path();
    }
}
