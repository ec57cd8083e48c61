#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "promptcache/dataset.hpp"
#include "promptcache/embedding_io.hpp"
#include "promptcache/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace promptcache;

namespace {

const std::string kCli = PROMPTCACHE_CLI_PATH;

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

class CliTest : public ::testing::Test {
protected:
    // One planted world, split and trained model shared by every test.
    static void SetUpTestSuite() {
        root_ = fs::temp_directory_path() / ("promptcache_cli_" + std::to_string(::getpid()));
        fs::remove_all(root_);
        fs::create_directories(root_);
        ASSERT_EQ(run("plant --d 8 --n-prompts 8000 --seed 3 --out " + q(root_ / "world")), 0);
        ASSERT_EQ(run("split --pairs " + q(root_ / "world/pairs.jsonl") + " --seed 3 --out " +
                      q(root_ / "split")),
                  0);
        ASSERT_EQ(run("train --train " + q(root_ / "split/train.jsonl") + " --val " +
                      q(root_ / "split/val.jsonl") + " --test " + q(root_ / "split/test.jsonl") +
                      " --embeddings " + q(emb()) + " --epochs 2 --out " + q(root_ / "train")),
                  0);
    }
    static void TearDownTestSuite() { fs::remove_all(root_); }

    static std::string q(const fs::path& p) { return "'" + p.string() + "'"; }
    static fs::path emb() { return root_ / "world/embeddings.pcemb"; }
    static fs::path test_pairs() { return root_ / "split/test.jsonl"; }

    static int run(const std::string& args, const fs::path& log = {}) {
        const fs::path sink = log.empty() ? fs::path("/dev/null") : log;
        const int status = std::system((kCli + " " + args + " >" + q(sink) + " 2>&1").c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    static inline fs::path root_;
};

}  // namespace

TEST_F(CliTest, WorkflowArtifacts) {
    for (const char* f : {"config.json", "result.json", "prompts.jsonl", "embeddings.pcemb",
                          "pairs.jsonl", "plant.ckpt"}) {
        EXPECT_TRUE(fs::exists(root_ / "world" / f)) << f;
    }
    EXPECT_EQ(read_pairs(root_ / "split/train.jsonl").size(), 2800u);
    EXPECT_EQ(read_pairs(root_ / "split/val.jsonl").size(), 400u);
    EXPECT_EQ(read_pairs(test_pairs()).size(), 800u);
    const json r = read_json(root_ / "train/result.json");
    EXPECT_EQ(r["train_loss"].size(), 2u);
    EXPECT_TRUE(fs::exists(root_ / "train/model.ckpt"));
    EXPECT_EQ(slurp(root_ / "train/roc.csv").rfind("fpr,tpr\n", 0), 0u);
    const json cfg = read_json(root_ / "train/config.json");
    EXPECT_EQ(cfg["command"], "train");
    EXPECT_EQ(cfg["args"]["c"], 88.0);
    EXPECT_EQ(cfg["args"]["loss"], "bce");
}

TEST_F(CliTest, UnknownLossIsNotImplemented) {
    const fs::path log = root_ / "foo.log";
    EXPECT_EQ(run("train --train " + q(root_ / "split/train.jsonl") + " --embeddings " + q(emb()) +
                      " --loss foo --out " + q(root_ / "foo"),
                  log),
              1);
    EXPECT_NE(slurp(log).find("not implemented"), std::string::npos);
}

TEST_F(CliTest, ExitCodes) {
    EXPECT_EQ(run("--help"), 0);
    EXPECT_EQ(run("train --bogus"), 1);
    EXPECT_EQ(run("eval --pairs " + q(test_pairs()) + " --embeddings " + q(root_ / "missing.pcemb") +
                  " --raw --out " + q(root_ / "missing")),
              2);
    EXPECT_EQ(run("eval --pairs " + q(test_pairs()) + " --embeddings " + q(emb()) + " --out " +
                  q(root_ / "noscorer")),
              1);
    EXPECT_EQ(run("simulate --test-pairs " + q(test_pairs()) + " --embeddings " + q(emb()) +
                  " --raw --tau 1.5 --out " + q(root_ / "badtau")),
              1);
    EXPECT_EQ(run("simulate --test-pairs " + q(test_pairs()) + " --embeddings " + q(emb()) +
                  " --raw --n-pos 100000 --out " + q(root_ / "toomany")),
              2);
}

TEST_F(CliTest, EvalRawAndCheckpoint) {
    ASSERT_EQ(run("eval --pairs " + q(test_pairs()) + " --embeddings " + q(emb()) + " --raw --out " +
                  q(root_ / "eval_raw")),
              0);
    ASSERT_EQ(run("eval --pairs " + q(test_pairs()) + " --embeddings " + q(emb()) +
                  " --checkpoint " + q(root_ / "world/plant.ckpt") + " --out " + q(root_ / "eval_plant")),
              0);
    const double raw = read_json(root_ / "eval_raw/result.json")["auc"];
    const double plant = read_json(root_ / "eval_plant/result.json")["auc"];
    EXPECT_NEAR(raw, 0.5, 0.07);
    EXPECT_GE(plant, 0.99);
    EXPECT_TRUE(fs::exists(root_ / "eval_raw/roc.csv"));
}

TEST_F(CliTest, SimulateAndSweep) {
    const std::string common = "--test-pairs " + q(test_pairs()) + " --embeddings " + q(emb()) +
                               " --checkpoint " + q(root_ / "train/model.ckpt") + " --seed 5";
    ASSERT_EQ(run("simulate " + common + " --out " + q(root_ / "sim1")), 0);
    ASSERT_EQ(run("simulate " + common + " --out " + q(root_ / "sim2")), 0);
    const json r = read_json(root_ / "sim1/result.json");
    EXPECT_EQ(r["nExpectedHit"], 250);
    EXPECT_EQ(r["events"].size(), 1000u);
    EXPECT_EQ(r["nCorrectHit"].get<int>() + r["nFalseHit"].get<int>() + r["nMiss"].get<int>(), 1000);
    EXPECT_EQ(slurp(root_ / "sim1/result.json"), slurp(root_ / "sim2/result.json"));

    ASSERT_EQ(run("sweep " + common + " --out " + q(root_ / "sweep")), 0);
    const std::string csv = slurp(root_ / "sweep/sweep.csv");
    EXPECT_EQ(csv.rfind("tau,efficiency,nCorrectHit,nFalseHit,nMiss\n", 0), 0u);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 8);
    EXPECT_EQ(read_json(root_ / "sweep/result.json")["rows"].size(), 7u);
}

TEST_F(CliTest, MineSmallTable) {
    const fs::path dir = root_ / "mine_in";
    fs::create_directories(dir);
    std::vector<Prompt> prompts;
    EmbeddingStore store;
    Rng rng(4);
    for (int i = 0; i < 10; ++i) {
        const std::string id = "m" + std::to_string(i);
        prompts.push_back({id, "prompt number " + std::to_string(i)});
        std::vector<double> v(4);
        for (auto& x : v) x = rng.normal();
        store.add(id, Embedding(v));
    }
    write_prompts(prompts, dir / "prompts.jsonl");
    write_embeddings(store, dir / "emb.pcemb");
    ASSERT_EQ(run("mine --prompts " + q(dir / "prompts.jsonl") + " --embeddings " +
                  q(dir / "emb.pcemb") + " --k 3 --out " + q(root_ / "mine")),
              0);
    std::ifstream in(root_ / "mine/pairs.jsonl");
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        const json rec = json::parse(line);
        EXPECT_TRUE(rec.contains("sim"));
        EXPECT_FALSE(rec.contains("label"));
        ++n;
    }
    EXPECT_GE(n, 15u);
    EXPECT_LE(n, 30u);
    EXPECT_EQ(read_json(root_ / "mine/result.json")["n_candidates"], n);
}

TEST_F(CliTest, BuildHardFromLabeledPairs) {
    ASSERT_EQ(run("build-hard --pairs " + q(test_pairs()) + " --embeddings " + q(emb()) + " --out " +
                  q(root_ / "hard")),
              0);
    const auto hard = read_pairs(root_ / "hard/pairs.jsonl");
    for (std::size_t i = 0; i < hard.size(); ++i) EXPECT_EQ(hard.pairs()[i].label, double(i % 2));
}

TEST_F(CliTest, SynthIsDeterministic) {
    const std::string args = "synth --d 4 --n-list 20,40 --eval-pairs 200 --epochs 5 --seed 2";
    ASSERT_EQ(run(args + " --out " + q(root_ / "syn1")), 0);
    ASSERT_EQ(run(args + " --out " + q(root_ / "syn2")), 0);
    const std::string csv = slurp(root_ / "syn1/convergence.csv");
    EXPECT_EQ(csv.rfind("N,mean_abs_error,loss_type,seed\n20,", 0), 0u);
    EXPECT_EQ(csv, slurp(root_ / "syn2/convergence.csv"));
}

TEST_F(CliTest, TrainIsDeterministicAndReplayable) {
    ASSERT_EQ(run("replay --config " + q(root_ / "train/config.json") + " --out " +
                  q(root_ / "train_replay")),
              0);
    EXPECT_EQ(slurp(root_ / "train/model.ckpt"), slurp(root_ / "train_replay/model.ckpt"));
    EXPECT_EQ(slurp(root_ / "train/result.json"), slurp(root_ / "train_replay/result.json"));
}

TEST_F(CliTest, SeedFromEnvironment) {
    ::setenv("PROMPTCACHE_SEED", "41", 1);
    const int rc = run("split --pairs " + q(root_ / "world/pairs.jsonl") + " --out " + q(root_ / "envseed"));
    ::unsetenv("PROMPTCACHE_SEED");
    ASSERT_EQ(rc, 0);
    EXPECT_EQ(read_json(root_ / "envseed/config.json")["args"]["seed"], 41);
}
