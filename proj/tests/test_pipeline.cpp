#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "creagen/pipeline.hpp"

using namespace creagen;
namespace fs = std::filesystem;

namespace {

fs::path kRoot;

int run_cli(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + (env.empty() ? "" : " ") + std::string(CREAGEN_CLI) + " " + args + " >" +
                            (kRoot / "stdout.txt").string() + " 2>" + (kRoot / "stderr.txt").string();
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), {}};
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

// Each test gets its own directory so ctest can run them in parallel.
class Cli : public ::testing::Test {
   protected:
    void SetUp() override {
        unsetenv("CREAGEN_SEED");
        kRoot = fs::temp_directory_path() / "creagen_pipeline_test" /
                ::testing::UnitTest::GetInstance()->current_test_info()->name();
        fs::remove_all(kRoot);
        fs::create_directories(kRoot);
    }
};

}  // namespace

TEST(Fnv, KnownVectors) {
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
    EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Config, MergeRejectsUnknownKeysWithPath) {
    auto base = default_master_config();
    auto m = merge_config(base, nlohmann::json{{"synth", {{"n_items", 98}}}});
    EXPECT_EQ(m["synth"]["n_items"], 98);
    EXPECT_EQ(m["synth"]["size"], base["synth"]["size"]);
    try {
        merge_config(base, nlohmann::json{{"train", {{"network", {{"widht", 3}}}}}});
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.field(), "train.network.widht");
    }
    EXPECT_THROW(merge_config(base, nlohmann::json{{"synth", 3}}), ConfigError);
}

TEST(Config, ParseOverride) {
    EXPECT_EQ(parse_override("train.network.arch=5"), (nlohmann::json{{"train", {{"network", {{"arch", 5}}}}}}));
    EXPECT_EQ(parse_override("train.creativity=mce"), (nlohmann::json{{"train", {{"creativity", "mce"}}}}));
    EXPECT_EQ(parse_override("a=[1,2]")["a"], (nlohmann::json{1, 2}));
    EXPECT_THROW(parse_override("novalue"), ConfigError);
}

TEST(Config, SeedResolution) {
    auto m = default_master_config();
    unsetenv("CREAGEN_SEED");
    EXPECT_EQ(resolve_seed(m), 0u);
    setenv("CREAGEN_SEED", "42", 1);
    EXPECT_EQ(resolve_seed(m), 42u);
    setenv("CREAGEN_SEED", "x1", 1);
    EXPECT_THROW(resolve_seed(m), ConfigError);
    m["seed"] = -2;
    EXPECT_THROW(resolve_seed(m), ConfigError);
    m["seed"] = 5;
    EXPECT_EQ(resolve_seed(m), 5u);
    unsetenv("CREAGEN_SEED");
    EXPECT_NE(stage_seed(m, "synth"), stage_seed(m, "train"));
    m["synth"]["seed"] = 77;
    EXPECT_EQ(stage_seed(m, "synth"), 77u);
}

TEST_F(Cli, ExitCodes) {
    EXPECT_EQ(run_cli("synth"), 1);  // missing --out
    EXPECT_EQ(run_cli("nosuchcommand -o x"), 1);
    EXPECT_EQ(run_cli("synth -o " + (kRoot / "bad").string() + " --set synth.bogus=1"), 1);
    EXPECT_NE(slurp(kRoot / "stderr.txt").find("synth.bogus"), std::string::npos);
    EXPECT_EQ(run_cli("synth -o " + (kRoot / "bad2").string() + " --n 0"), 1);
    EXPECT_EQ(run_cli("metrics -o " + (kRoot / "m").string() + " --samples " + (kRoot / "missing").string() +
                      " --data " + (kRoot / "missing").string()),
              1);
    EXPECT_EQ(read_json(kRoot / "m" / "manifest.json")["status"], "invalid");
    std::ofstream(kRoot / "broken.json") << "{ not json";
    EXPECT_EQ(run_cli("synth -o " + (kRoot / "bad3").string() + " --config " + (kRoot / "broken.json").string()), 1);
}

TEST_F(Cli, SynthIsByteIdenticalAcrossRunsAndThreads) {
    const std::string common = " --n 49 --size 32 --augment 2 --seed 3";
    ASSERT_EQ(run_cli("synth -o " + (kRoot / "s1").string() + common), 0);
    ASSERT_EQ(run_cli("synth -o " + (kRoot / "s2").string() + common + " --threads 3"), 0);
    for (const auto& e : fs::recursive_directory_iterator(kRoot / "s1")) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), kRoot / "s1");
        if (rel == "manifest.json" || rel == "effective_config.json") continue;
        EXPECT_EQ(slurp(e.path()), slurp(kRoot / "s2" / rel)) << rel;
    }
    auto man = read_json(kRoot / "s1" / "manifest.json");
    EXPECT_EQ(man["status"], "complete");
    EXPECT_EQ(man["command"], "synth");
    EXPECT_EQ(man["config_hash"].get<std::string>().size(), 16u);
}

TEST_F(Cli, OverridePrecedence) {
    nlohmann::json file = {{"synth", {{"n_items", 147}, {"size", 32}, {"augment_factor", 1}}}, {"seed", 1}};
    std::ofstream(kRoot / "cfg.json") << file.dump();
    const auto out = kRoot / "prec";
    ASSERT_EQ(run_cli("synth -o " + out.string() + " --config " + (kRoot / "cfg.json").string() +
                      " --set synth.n_items=98 --set synth.augment_factor=2 --n 49 --seed 9"),
              0);
    auto eff = read_json(out / "effective_config.json");
    EXPECT_EQ(eff["synth"]["n_items"], 49);       // flag beats --set
    EXPECT_EQ(eff["synth"]["augment_factor"], 2);  // --set beats file
    EXPECT_EQ(eff["synth"]["size"], 32);           // file beats defaults
    EXPECT_EQ(eff["seed"], 9);
}

TEST_F(Cli, SeedFromEnvironment) {
    ASSERT_EQ(run_cli("synth -o " + (kRoot / "e1").string() + " --n 49 --size 32 --augment 1", "CREAGEN_SEED=12"), 0);
    ASSERT_EQ(run_cli("synth -o " + (kRoot / "e2").string() + " --n 49 --size 32 --augment 1 --seed 12"), 0);
    ASSERT_EQ(run_cli("synth -o " + (kRoot / "e3").string() + " --n 49 --size 32 --augment 1 --seed 13"), 0);
    EXPECT_EQ(slurp(kRoot / "e1" / "images" / "000005.png"), slurp(kRoot / "e2" / "images" / "000005.png"));
    EXPECT_NE(slurp(kRoot / "e1" / "images" / "000005.png"), slurp(kRoot / "e3" / "images" / "000005.png"));
}

TEST_F(Cli, SmallEndToEndRun) {
    const auto d = kRoot / "e2e";
    const std::string tiny =
        " --seed 4 --set train.network.gen_width=4 --set train.network.disc_width=4"
        " --set train.network.latent_dim=8 --set classifier.width=4 --set classifier.feature_dim=8"
        " --set classifier.epochs=1";
    ASSERT_EQ(run_cli("synth -o " + (d / "data").string() + " --n 98 --size 32 --augment 1" + tiny), 0);
    ASSERT_EQ(run_cli("train -o " + (d / "run").string() + " --data " + (d / "data").string() +
                      " --canvas 32 --iterations 2 --batch-size 4 --checkpoint-interval 1 --creativity mce"
                      " --lambda-ge 1" + tiny),
              0)
        << slurp(kRoot / "stderr.txt");
    ASSERT_EQ(run_cli("sample -o " + (d / "samples").string() + " --run " + (d / "run").string() + " --n 40" + tiny),
              0)
        << slurp(kRoot / "stderr.txt");
    EXPECT_TRUE(fs::exists(d / "samples" / "images" / "000039.png"));
    EXPECT_EQ(load_samples(d / "samples").size(), 40u);
    ASSERT_EQ(run_cli("metrics -o " + (d / "metrics").string() + " --samples " + (d / "samples").string() +
                      " --data " + (d / "data").string() + tiny),
              0)
        << slurp(kRoot / "stderr.txt");
    ASSERT_EQ(run_cli("select-sets -o " + (d / "sets").string() + " --metrics " + (d / "metrics").string() +
                      " --samples " + (d / "samples").string() + " --size 5" + tiny),
              0)
        << slurp(kRoot / "stderr.txt");
    EXPECT_TRUE(fs::exists(d / "sets" / "galleries" / "random.png"));
    ASSERT_EQ(run_cli("analyze -o " + (d / "analysis").string() + " --metrics " + (d / "metrics").string() +
                      " --sets " + (d / "sets").string() + " --name tiny" + tiny),
              0)
        << slurp(kRoot / "stderr.txt");
    EXPECT_TRUE(fs::exists(d / "analysis" / "correlation_tiny.csv"));
    EXPECT_TRUE(fs::exists(d / "analysis" / "wundt.csv"));
    ASSERT_EQ(run_cli("report -o " + (d / "report").string() + " --input " + (d / "metrics").string() + " --input " +
                      (d / "analysis").string()),
              0)
        << slurp(kRoot / "stderr.txt");
    const auto md = slurp(d / "report" / "report.md");
    EXPECT_NE(md.find("metrics"), std::string::npos);
    auto sets = read_json(d / "sets" / "sets.json");
    EXPECT_EQ(sets.size(), 8u);
}

TEST_F(Cli, GradcheckSubcommand) {
    ASSERT_EQ(run_cli("gradcheck -o " + (kRoot / "gc").string() + " --seeds 1 --filter softmax"), 0);
    const auto csv = slurp(kRoot / "gc" / "gradcheck.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "check,group,seed,max_rel_error,tolerance,passed,worst_param,error");
    EXPECT_NE(csv.find("log_softmax"), std::string::npos);
}
