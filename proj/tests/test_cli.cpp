#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "neatboost/cli.hpp"
#include "neatboost/image.hpp"
#include "neatboost/pipeline.hpp"

using namespace neatboost;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string log;
};

Outcome run(std::vector<std::string> args) {
    testing::internal::CaptureStderr();
    const int code = run_cli(args);
    return {code, testing::internal::GetCapturedStderr()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

class Cli : public testing::Test {
protected:
    void SetUp() override {
        dir = fs::temp_directory_path() /
              ("neatboost_cli_" + std::string(testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
        unsetenv("NEATBOOST_SEED");
    }
    void TearDown() override { fs::remove_all(dir); }

    std::string p(const std::string& name) const { return (dir / name).string(); }

    // synthetic data plus a short evolution into <dir>/run
    std::vector<std::string> small_flags() const {
        return {"--seed", "11", "--out", p("run"), "--population", "4", "--generations", "2", "--folds", "3",
                "--epochs", "10"};
    }
    void evolve_small(double separation = 4.0) {
        ASSERT_EQ(run({"synth", "--seed", "11", "--out", p("data.csv"), "--n-per-class", "30", "--separation",
                       std::to_string(separation)})
                      .code,
                  kExitOk);
        auto args = small_flags();
        args.insert(args.begin(), {"evolve", "--data", p("data.csv")});
        const auto r = run(args);
        ASSERT_EQ(r.code, kExitOk) << r.log;
    }
    Outcome with_small(std::string cmd, std::vector<std::string> extra = {}) {
        auto args = small_flags();
        args.insert(args.begin(), cmd);
        args.insert(args.end(), extra.begin(), extra.end());
        return run(args);
    }

    fs::path dir;
};

ImageGray specimen(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.02);
    ImageGray img(64, 48, 0.06);
    for (std::size_t y = 0; y < 48; ++y)
        for (std::size_t x = 0; x < 64; ++x) {
            const double dx = (static_cast<double>(x) - 32.0) / 24.0, dy = (static_cast<double>(y) - 24.0) / 16.0;
            if (dx * dx + dy * dy <= 1.0)
                img.at(x, y) = 0.65 + 0.12 * std::sin(0.7 * static_cast<double>(x + seed)) + noise(rng);
            img.at(x, y) = std::clamp(img.at(x, y), 0.0, 1.0);
        }
    return img;
}

}  // namespace

TEST_F(Cli, ExtractThreeImages) {
    fs::create_directories(dir / "img");
    for (int i = 0; i < 3; ++i) write_pgm(dir / "img" / ("f" + std::to_string(i) + ".pgm"), specimen(i));
    std::ofstream(dir / "labels.csv") << "file,label\nf0.pgm,normal\nf1.pgm,wb\nf2.pgm,sm\n";
    const auto r = run({"extract", "--images", p("img"), "--labels", p("labels.csv"), "--out", p("feat.csv")});
    ASSERT_EQ(r.code, kExitOk) << r.log;
    const auto ds = read_dataset_csv(dir / "feat.csv");
    EXPECT_EQ(ds.size(), 3u);
    EXPECT_EQ(ds.y, (std::vector<int>{0, 1, 2}));
    const std::string first = slurp(dir / "feat.csv");
    ASSERT_EQ(run({"extract", "--images", p("img"), "--labels", p("labels.csv"), "--out", p("feat.csv"), "--jobs", "3"})
                  .code,
              kExitOk);
    EXPECT_EQ(slurp(dir / "feat.csv"), first);
}

TEST_F(Cli, ExtractSkipsCorruptFile) {
    fs::create_directories(dir / "img");
    write_pgm(dir / "img" / "a.pgm", specimen(1));
    write_pgm(dir / "img" / "b.pgm", specimen(2));
    std::ofstream(dir / "img" / "c.pgm") << "P5\n64 48\n255\nshort";
    const auto r = run({"extract", "--images", p("img"), "--out", p("feat.csv")});
    ASSERT_EQ(r.code, kExitOk) << r.log;
    EXPECT_NE(r.log.find("extract_failed"), std::string::npos);
    EXPECT_NE(r.log.find("c.pgm"), std::string::npos);
    const auto ds = read_dataset_csv(dir / "feat.csv", false);
    EXPECT_EQ(ds.size(), 2u);
    EXPECT_EQ(ds.y[0], kUnlabeled);
}

TEST_F(Cli, ExtractFailures) {
    fs::create_directories(dir / "empty");
    EXPECT_EQ(run({"extract", "--images", p("empty"), "--out", p("f.csv")}).code, kExitData);
    fs::create_directories(dir / "bad");
    std::ofstream(dir / "bad" / "x.png") << "not a png";
    EXPECT_EQ(run({"extract", "--images", p("bad"), "--out", p("f.csv")}).code, kExitData);
}

TEST_F(Cli, UsageErrors) {
    EXPECT_EQ(run({}).code, kExitUsage);
    EXPECT_EQ(run({"bogus"}).code, kExitUsage);
    EXPECT_EQ(run({"synth", "--out", p("d.csv")}).code, kExitUsage);  // no seed anywhere
    EXPECT_EQ(run({"synth", "--seed", "x", "--out", p("d.csv")}).code, kExitUsage);
    EXPECT_EQ(run({"synth", "--seed", "1", "--out", p("d.csv"), "--unknown"}).code, kExitUsage);
    EXPECT_EQ(run({"train", "--seed", "1", "--out", p("run")}).code, kExitData);  // nothing to train from
}

TEST_F(Cli, SeedFromEnvironmentAndConfig) {
    setenv("NEATBOOST_SEED", "5", 1);
    ASSERT_EQ(run({"synth", "--out", p("env.csv"), "--n-per-class", "5"}).code, kExitOk);
    unsetenv("NEATBOOST_SEED");
    ASSERT_EQ(run({"synth", "--seed", "5", "--out", p("flag.csv"), "--n-per-class", "5"}).code, kExitOk);
    EXPECT_EQ(slurp(dir / "env.csv"), slurp(dir / "flag.csv"));

    std::ofstream(dir / "cfg.ini") << "[run]\nseed = 5\n[synth]\nn_per_class = 5\n";
    ASSERT_EQ(run({"synth", "--config", p("cfg.ini"), "--out", p("ini.csv")}).code, kExitOk);
    EXPECT_EQ(slurp(dir / "ini.csv"), slurp(dir / "flag.csv"));

    // flags override the file, which overrides the environment
    setenv("NEATBOOST_SEED", "9", 1);
    ASSERT_EQ(run({"synth", "--config", p("cfg.ini"), "--out", p("mix.csv")}).code, kExitOk);
    EXPECT_EQ(slurp(dir / "mix.csv"), slurp(dir / "flag.csv"));
    ASSERT_EQ(run({"synth", "--config", p("cfg.ini"), "--seed", "6", "--out", p("six.csv")}).code, kExitOk);
    EXPECT_NE(slurp(dir / "six.csv"), slurp(dir / "flag.csv"));
    unsetenv("NEATBOOST_SEED");

    std::ofstream(dir / "bad.ini") << "[run]\nseed = 5\nmystery = 1\n";
    EXPECT_EQ(run({"synth", "--config", p("bad.ini"), "--out", p("x.csv")}).code, kExitData);
}

TEST_F(Cli, ConfigHashIgnoresPathsAndJobs) {
    RunConfig a, b;
    a.seed = b.seed = 3;
    b.out = "/elsewhere";
    b.data = "other.csv";
    b.jobs = 8;
    EXPECT_EQ(a.hash(), b.hash());
    EXPECT_EQ(a.hash().size(), 64u);
    b.folds = 4;
    EXPECT_NE(a.hash(), b.hash());
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_F(Cli, FoldsLargerThanSmallestClassNamesIt) {
    Dataset ds = synthesize_dataset(12, 3.0, 1);
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (ds.y[i] != 2 || i % 4 == 0) keep.push_back(i);
    write_dataset_csv(dir / "d.csv", ds.subset(keep));
    const auto r = run({"evolve", "--seed", "1", "--data", p("d.csv"), "--out", p("run"), "--folds", "5",
                        "--split", "1,0,0"});
    EXPECT_EQ(r.code, kExitData);
    EXPECT_NE(r.log.find("'sm'"), std::string::npos) << r.log;
}

TEST_F(Cli, EvolveIsDeterministicAndSeparableDataScoresHigh) {
    evolve_small(6.0);
    const std::string gbdt = slurp(dir / "run" / "gbdt_history.csv"), mlp = slurp(dir / "run" / "mlp_history.csv");
    const auto best = read_json(dir / "run" / "gbdt_best.json");
    EXPECT_GE(best.at("fitness").get<double>(), 0.95);
    EXPECT_EQ(best.at("learner"), "gbdt");
    EXPECT_EQ(best.at("hyperparameters").size(), 10u);
    EXPECT_EQ(read_json(dir / "run" / "mlp_best.json").at("hyperparameters").size(), 6u);

    fs::rename(dir / "run", dir / "first");
    auto args = small_flags();
    args.insert(args.begin(), {"evolve", "--data", p("data.csv"), "--jobs", "2"});
    ASSERT_EQ(run(args).code, kExitOk);
    EXPECT_EQ(slurp(dir / "run" / "gbdt_history.csv"), gbdt);
    EXPECT_EQ(slurp(dir / "run" / "mlp_history.csv"), mlp);
    EXPECT_EQ(slurp(dir / "run" / "gbdt_best.json"), slurp(dir / "first" / "gbdt_best.json"));
}

TEST_F(Cli, TrainEvaluatePredict) {
    evolve_small();
    const auto t = with_small("train");
    ASSERT_EQ(t.code, kExitOk) << t.log;
    const auto m = read_json(dir / "run" / "manifest.json");
    EXPECT_EQ(m.at("weights_provenance"), "nelder_mead");
    double s = 0;
    for (double w : m.at("weights")) s += w;
    EXPECT_NEAR(s, 1.0, 1e-9);
    double best_single = 0;
    for (const auto& l : m.at("learners")) {
        best_single = std::max(best_single, l.at("oof_metrics").at("weighted_f1").get<double>());
        EXPECT_TRUE(fs::exists(dir / "run" / l.at("file").get<std::string>()));
    }
    EXPECT_GE(m.at("oof_metrics").at("weighted_f1").get<double>(), best_single - 0.01);

    ASSERT_EQ(with_small("evaluate").code, kExitOk);
    const std::string report = slurp(dir / "run" / "report.json");
    ASSERT_EQ(with_small("evaluate").code, kExitOk);
    EXPECT_EQ(slurp(dir / "run" / "report.json"), report);
    const auto rj = nlohmann::json::parse(report);
    const auto& ens = rj.at("ensemble");
    for (std::size_t c = 0; c < 3; ++c) {
        const double diag = ens.at("confusion")[c][c].get<double>();
        double support = 0;
        for (const auto& v : ens.at("confusion")[c]) support += v.get<double>();
        EXPECT_NEAR(ens.at("per_class")[c].at("recall").get<double>(), diag / support, 1e-12);
    }
    EXPECT_FALSE(read_json(dir / "run" / "manifest.json").at("test_metrics").is_null());
    EXPECT_TRUE(fs::exists(dir / "run" / "confusion_counts.csv"));
    EXPECT_TRUE(fs::exists(dir / "run" / "confusion_normalized.csv"));
    EXPECT_NE(slurp(dir / "run" / "report.txt").find("ensemble"), std::string::npos);

    const auto pr = run({"predict", "--seed", "11", "--out", p("run"), "--data", p("run/test.csv")});
    ASSERT_EQ(pr.code, kExitOk) << pr.log;
    const std::string preds = slurp(dir / "run" / "predictions.csv");
    EXPECT_EQ(preds.substr(0, preds.find('\n')), "id,predicted,p_normal,p_wb,p_sm");
    EXPECT_EQ(static_cast<std::size_t>(std::count(preds.begin(), preds.end(), '\n')),
              read_dataset_csv(dir / "run" / "test.csv").size() + 1);
}

TEST_F(Cli, WeightOverrideAndDrift) {
    evolve_small();
    ASSERT_EQ(with_small("train", {"--weights", "1,3"}).code, kExitOk);
    const auto m = read_json(dir / "run" / "manifest.json");
    EXPECT_EQ(m.at("weights_provenance"), "override");
    EXPECT_DOUBLE_EQ(m.at("weights")[0].get<double>(), 0.25);
    EXPECT_DOUBLE_EQ(m.at("weights")[1].get<double>(), 0.75);
    EXPECT_EQ(with_small("train", {"--weights", "1,2,3"}).code, kExitUsage);

    const auto drift = with_small("train", {"--smote-k", "3"});
    EXPECT_EQ(drift.code, kExitData);
    EXPECT_NE(drift.log.find("config drift"), std::string::npos);
    EXPECT_EQ(with_small("evaluate", {"--top-k", "2"}).code, kExitData);
}

TEST_F(Cli, EvaluateRejectsFeatureMismatch) {
    evolve_small();
    ASSERT_EQ(with_small("train").code, kExitOk);
    std::ofstream(dir / "short.csv") << "id,label,f01\na,normal,1\n";
    EXPECT_EQ(with_small("evaluate", {"--test", p("short.csv")}).code, kExitData);
}

TEST_F(Cli, AnalyzeWritesTables) {
    ASSERT_EQ(run({"synth", "--seed", "2", "--out", p("d.csv"), "--n-per-class", "40"}).code, kExitOk);
    const auto r = run({"analyze", "--seed", "2", "--data", p("d.csv"), "--out", p("an")});
    ASSERT_EQ(r.code, kExitOk) << r.log;
    for (const char* f : {"anova.csv", "lda.csv", "lda_axes.csv", "ranking.csv"}) EXPECT_TRUE(fs::exists(dir / "an" / f));
    EXPECT_EQ(slurp(dir / "an" / "anova.csv").substr(0, 20), "feature,F,df1,df2,p\n");
}
