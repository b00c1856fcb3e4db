#include <ahofm/ahofm.hpp>

#include <gtest/gtest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
protected:
    void SetUp() override
    {
        dir_ = fs::temp_directory_path() /
               ("ahofm_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    /// Runs the tool with `args`; returns its exit status.
    int run(const std::string& args) const
    {
        const std::string cmd = "AHOFM_LOG=error '" + std::string(AHOFM_CLI_PATH) + "' " + args + " > '" +
                                path("stdout.txt") + "' 2> '" + path("stderr.txt") + "'";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    static std::string slurp(const std::string& p)
    {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    void simulate(const std::string& out, int n = 300, int seed = 42) const
    {
        ASSERT_EQ(run("simulate --n " + std::to_string(n) + " --p 3 --seed " + std::to_string(seed) + " --out '" +
                      path(out) + "'"),
                  0);
    }

    fs::path dir_;
};

} // namespace

TEST_F(Cli, FactorListBroadcastsPerDegree)
{
    simulate("d.csv");
    ASSERT_EQ(run("fit --data '" + path("d.csv") + "' --target y --degree 3 --factors 5,5 --epochs 2 --out '" +
                  path("m.json") + "'"),
              0);
    const auto doc = nlohmann::json::parse(slurp(path("m.json")));
    EXPECT_EQ(doc["payload"]["config"]["factors"], nlohmann::json({5, 5}));
    EXPECT_EQ(doc["payload"]["factors"].size(), 2u);
}

TEST_F(Cli, UsageErrorsExitOne)
{
    simulate("d.csv");
    EXPECT_EQ(run("fit --data '" + path("d.csv") + "' --out '" + path("m.json") + "'"), 1);
    EXPECT_NE(slurp(path("stderr.txt")).find("--target"), std::string::npos);
    EXPECT_EQ(run("fit --data '" + path("d.csv") + "' --target y --out m.json --no-such-flag"), 1);
    EXPECT_EQ(run(""), 1);
    EXPECT_EQ(run("fit --data '" + path("missing.csv") + "' --target y --out '" + path("m.json") + "'"), 1);
    EXPECT_EQ(run("fit --data '" + path("d.csv") + "' --target y --loss poisson --out '" + path("m.json") + "'"), 1);
    EXPECT_EQ(run("--help"), 0);
}

TEST_F(Cli, NumericFailureExitsTwo)
{
    simulate("d.csv");
    EXPECT_EQ(run("fit --data '" + path("d.csv") + "' --target y --lr 1e300 --epochs 3 --out '" + path("m.json") + "'"),
              2);
    EXPECT_NE(slurp(path("stderr.txt")).find("diverged"), std::string::npos);
}

TEST_F(Cli, ConfigFileWithFlagPrecedence)
{
    simulate("d.csv");
    std::ofstream(path("c.json")) << R"({"degree": 1, "epochs": 4, "df": [4], "seed": 9, "no-early-stopping": true})";
    ASSERT_EQ(run("fit --config '" + path("c.json") + "' --data '" + path("d.csv") + "' --target y --epochs 6 --out '" +
                  path("m.json") + "'"),
              0);
    const auto pl = nlohmann::json::parse(slurp(path("m.json")))["payload"];
    EXPECT_EQ(pl["config"]["degree"], 1);
    EXPECT_EQ(pl["config"]["df"], nlohmann::json({4.0}));
    EXPECT_EQ(pl["training"]["seed"], 9);
    EXPECT_EQ(pl["training"]["epochs_run"], 6);

    std::ofstream(path("bad.json")) << R"({"no-such-flag": 1})";
    EXPECT_EQ(run("fit --config '" + path("bad.json") + "' --data '" + path("d.csv") + "' --target y --out '" +
                  path("m2.json") + "'"),
              1);
}

TEST_F(Cli, FullPipelineEmitsAllArtifacts)
{
    ASSERT_EQ(run("simulate --n 400 --p 3 --seed 42 --out '" + path("d.csv") + "' --truth-out '" + path("truth.csv") +
                  "' --grid 4"),
              0);
    ASSERT_EQ(run("fit --data '" + path("d.csv") + "' --target y --seed 42 --epochs 20 --basis-dim 6 --df 4 --out '" +
                  path("m.json") + "'"),
              0);
    ASSERT_EQ(run("predict --model '" + path("m.json") + "' --data '" + path("d.csv") + "' --out '" + path("p.csv") + "'"),
              0);
    ASSERT_EQ(run("effects --model '" + path("m.json") + "' --features x1,x3 --grid 5 --out '" + path("e.csv") + "'"), 0);
    ASSERT_EQ(run("effects --model '" + path("m.json") + "' --features 1,3 --mode marginal --axis x3 --grid 5 --out '" +
                  path("mg.csv") + "'"),
              0);
    ASSERT_EQ(run("effects --model '" + path("m.json") + "' --mode latents --factor 2 --grid 5 --out '" +
                  path("lat.csv") + "'"),
              0);

    auto lines = [&](const std::string& p) {
        std::ifstream in(p);
        std::string line;
        std::vector<std::string> out;
        while (std::getline(in, line)) out.push_back(line);
        return out;
    };
    EXPECT_EQ(lines(path("d.csv")).size(), 401u);
    EXPECT_EQ(lines(path("d.csv")).front(), "x1,x2,x3,y");
    EXPECT_EQ(lines(path("truth.csv")).size(), 1u + 3u * 16u);
    EXPECT_EQ(lines(path("p.csv")).size(), 401u);
    EXPECT_EQ(lines(path("p.csv")).front(), "eta,response");
    EXPECT_EQ(lines(path("e.csv")).size(), 26u);
    EXPECT_EQ(lines(path("e.csv")).front(), "x1,x3,value");
    EXPECT_EQ(lines(path("mg.csv")).front(), "x3,mean,min,max");
    EXPECT_EQ(lines(path("lat.csv")).size(), 1u + 3u * 5u);
}

TEST_F(Cli, PipelineIsByteIdenticalAcrossRuns)
{
    for (const std::string tag : {"a", "b"}) {
        ASSERT_EQ(run("simulate --n 300 --p 3 --seed 42 --out '" + path(tag + "_d.csv") + "'"), 0);
        ASSERT_EQ(run("fit --data '" + path(tag + "_d.csv") + "' --target y --seed 42 --epochs 15 --out '" +
                      path(tag + "_m.json") + "'"),
                  0);
        ASSERT_EQ(run("predict --model '" + path(tag + "_m.json") + "' --data '" + path(tag + "_d.csv") + "' --out '" +
                      path(tag + "_p.csv") + "'"),
                  0);
    }
    EXPECT_EQ(slurp(path("a_d.csv")), slurp(path("b_d.csv")));
    EXPECT_EQ(slurp(path("a_m.json")), slurp(path("b_m.json")));
    EXPECT_EQ(slurp(path("a_p.csv")), slurp(path("b_p.csv")));
}

TEST_F(Cli, ModelSavedInProcessPredictsIdenticallyInFreshProcess)
{
    ahofm::SimSpec spec;
    spec.n = 250;
    spec.p = 3;
    spec.seed = 5;
    const auto sim = ahofm::simulate(spec);
    ahofm::ModelConfig mc;
    mc.basis_dim = 6;
    mc.df = {4.0};
    ahofm::TrainConfig tc;
    tc.seed = 123;
    tc.max_epochs = 15;
    const ahofm::FittedModel model = ahofm::fit(sim.data, mc, tc);
    ahofm::save(model, path("m.json"));
    {
        std::ofstream out(path("d.csv"));
        ahofm::write_csv(out, sim.data);
    }
    ASSERT_EQ(run("predict --model '" + path("m.json") + "' --data '" + path("d.csv") + "' --out '" + path("p.csv") + "'"),
              0);
    const ahofm::Prediction pr = ahofm::predict(model, sim.data.x);
    std::ostringstream expected;
    expected << "eta,response\n";
    for (Eigen::Index i = 0; i < pr.eta.size(); ++i) {
        expected << ahofm::format_double(pr.eta(i)) << ',' << ahofm::format_double(pr.response(i)) << '\n';
    }
    EXPECT_EQ(slurp(path("p.csv")), expected.str());
}

TEST_F(Cli, BenchmarkStudyAndCompareTables)
{
    ASSERT_EQ(run("benchmark --p-list 2,4 --n-list 200 --repetitions 3 --epochs 1 --basis-dim 6 --df 4 --out '" +
                  path("b.csv") + "'"),
              0);
    const std::string bench = slurp(path("b.csv"));
    EXPECT_EQ(bench.substr(0, bench.find('\n')),
              "p,n,repetitions,median_seconds,min_seconds,max_seconds,memory_count,naive_pairwise_memory_count");
    EXPECT_NE(bench.find("\n2,200,3,"), std::string::npos);

    ASSERT_EQ(run("study --n 200 --p 3 --factor-list 1,2 --replications 2 --epochs 5 --basis-dim 6 --df 4 --out '" +
                  path("s.csv") + "'"),
              0);
    EXPECT_NE(slurp(path("stdout.txt")).find("median_mse[F=2]"), std::string::npos);
    EXPECT_NE(slurp(path("stdout.txt")).find("generation: "), std::string::npos);

    simulate("d.csv");
    ASSERT_EQ(run("compare --data '" + path("d.csv") + "' --target y --splits 2 --epochs 5 --basis-dim 6 --df 4 --out '" +
                  path("c.csv") + "'"),
              0);
    const std::string cmp = slurp(path("c.csv"));
    EXPECT_EQ(cmp.substr(0, cmp.find('\n')), "split,mse_additive,mse_interaction,reduction");
}
