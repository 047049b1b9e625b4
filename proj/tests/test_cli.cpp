#include "neuralign/cli/commands.hpp"
#include "neuralign/cli/config.hpp"
#include "neuralign/dataset.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using neuralign::cli::run;

namespace {

struct Outcome {
    int code;
    std::string out, err;
};

Outcome invoke(std::vector<std::string> args) {
    std::ostringstream o, e;
    const int code = run(args, o, e);
    return {code, o.str(), e.str()};
}

fs::path make_synth(const std::string& name, const json& spec) {
    const auto dir = testutil::scratch_dir(name);
    testutil::spit(dir / "spec.json", spec.dump());
    const auto r = invoke({"synth", "--spec", (dir / "spec.json").string(), "--out", (dir / "data").string()});
    EXPECT_EQ(r.code, 0) << r.err;
    return dir;
}

json read_json(const fs::path& p) { return json::parse(testutil::slurp(p)); }

json payload(const fs::path& report) {
    auto j = read_json(report);
    j.erase("runtime");
    return j;
}

}  // namespace

TEST(Cli, MissingManifestIsUsageError) {
    const auto r = invoke({"encode", "--out", testutil::scratch_dir("cli_missing").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("--manifest"), std::string::npos);
    const auto r2 = invoke({"encode", "--manifest", "/nonexistent/manifest.json"});
    EXPECT_EQ(r2.code, 2);
}

TEST(Cli, UnknownCommandAndBadFlagValues) {
    EXPECT_EQ(invoke({"frobnicate"}).code, 2);
    EXPECT_EQ(invoke({}).code, 2);
    const auto dir = make_synth("cli_badflags", {{"kind", "hierarchical"}, {"n_stimuli", 40}, {"n_layers", 3}});
    const auto m = (dir / "data" / "manifest.json").string();
    EXPECT_EQ(invoke({"encode", "--manifest", m, "--folds", "1"}).code, 2);
    EXPECT_EQ(invoke({"encode", "--manifest", m, "--lambda-mode", "bogus"}).code, 2);
    const auto r = invoke({"encode", "--manifest", m, "--fdr-q", "1.5"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("fdr"), std::string::npos);
}

TEST(Cli, SynthInvalidCountsIsUsageError) {
    const auto dir = testutil::scratch_dir("cli_badspec");
    testutil::spit(dir / "spec.json", R"({"kind":"hierarchical","n_layers":0})");
    const auto r = invoke({"synth", "--spec", (dir / "spec.json").string(), "--out", (dir / "d").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("n_layers"), std::string::npos);
    testutil::spit(dir / "spec2.json", R"({"kind":"hierarchical","n_stimulus":10})");
    const auto r2 = invoke({"synth", "--spec", (dir / "spec2.json").string(), "--out", (dir / "d").string()});
    EXPECT_EQ(r2.code, 2);
    EXPECT_NE(r2.err.find("n_stimulus"), std::string::npos);
}

TEST(Cli, SynthThenValidate) {
    const auto dir = make_synth("cli_validate", {{"kind", "hierarchical"}, {"n_stimuli", 40}, {"n_layers", 3}});
    const auto m = dir / "data" / "manifest.json";
    EXPECT_NO_THROW(neuralign::data::Manifest::load(m).validate());
    const auto out = dir / "v";
    const auto r = invoke({"validate", "--manifest", m.string(), "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rep = read_json(out / "report.json");
    EXPECT_TRUE(rep["results"]["valid"].get<bool>());
    EXPECT_EQ(rep["results"]["n_stimuli"].get<int>(), 40);
}

TEST(Cli, EncodeNoiselessSynth) {
    const auto dir = make_synth("cli_encode", {{"kind", "hierarchical"}, {"noise_sd", 0.0}});
    const auto out = dir / "enc";
    const auto r = invoke({"encode", "--manifest", (dir / "data" / "manifest.json").string(), "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rep = read_json(out / "report.json");
    EXPECT_GE(rep["results"]["encoding"]["mean_r"].get<double>(), 0.99);
    const auto csv = testutil::slurp(out / "per_target_scores.csv");
    EXPECT_EQ(csv.rfind("target,layer,depth,r,masked,significant,p_adjusted\n", 0), 0u);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 50 * 5);
    // Provenance: the resolved grid, seed and thresholds are echoed.
    EXPECT_EQ(rep["config"]["lambda_grid"].size(), 10u);
    EXPECT_EQ(rep["config"]["seed"].get<int>(), 0);
    EXPECT_TRUE(rep["config"].contains("fdr_q"));
    EXPECT_TRUE(rep["config"].contains("normalization"));
    EXPECT_TRUE(rep["runtime"].contains("wall_seconds"));
}

TEST(Cli, ScoresSpatialPlantedHierarchy) {
    const auto dir = make_synth("cli_scores", {{"kind", "hierarchical"}, {"noise_sd", 0.0}});
    const auto out = dir / "sc";
    const auto r = invoke({"scores", "--manifest", (dir / "data" / "manifest.json").string(), "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rep = read_json(out / "report.json");
    EXPECT_NEAR(rep["results"]["spatial"]["r"].get<double>(), 1.0, 1e-9);
    EXPECT_TRUE(fs::exists(out / "spatial_scatter.svg"));
    const auto svg = testutil::slurp(out / "spatial_scatter.svg");
    EXPECT_EQ(svg.find("<svg"), 0u);
    EXPECT_NE(svg.find("viewBox=\"0 0 640 480\""), std::string::npos);

    const auto out_roi = dir / "sc_roi";
    const auto r2 = invoke({"scores", "--manifest", (dir / "data" / "manifest.json").string(), "--out",
                            out_roi.string(), "--level", "roi"});
    ASSERT_EQ(r2.code, 0) << r2.err;
    EXPECT_NEAR(read_json(out_roi / "report.json")["results"]["spatial"]["r"].get<double>(), 1.0, 1e-9);
}

TEST(Cli, ScoresTemporal) {
    const auto dir = make_synth("cli_temporal", {{"kind", "temporal"}, {"noise_sd", 0.0}});
    const auto out = dir / "sc";
    const auto r = invoke({"scores", "--manifest", (dir / "data" / "manifest.json").string(), "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rep = read_json(out / "report.json");
    EXPECT_NEAR(rep["results"]["temporal"]["r"].get<double>(), 1.0, 1e-9);
    EXPECT_TRUE(fs::exists(out / "temporal_scatter.svg"));
    EXPECT_TRUE(fs::exists(out / "temporal_curves.svg"));
}

TEST(Cli, TooFewTargetsIsNumericalError) {
    const auto dir = make_synth("cli_fewtargets",
                                {{"kind", "hierarchical"}, {"n_layers", 2}, {"targets_per_layer", 1}, {"n_stimuli", 60}});
    const auto r = invoke({"scores", "--manifest", (dir / "data" / "manifest.json").string(), "--out",
                           (dir / "sc").string()});
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("undefined"), std::string::npos) << r.err;
}

TEST(Cli, HalftimeSingleCheckpointIsUsageError) {
    const auto dir = make_synth("cli_ht_single", {{"kind", "hierarchical"}, {"n_stimuli", 40}, {"n_layers", 3}});
    const auto r = invoke({"halftime", "--manifest", (dir / "data" / "manifest.json").string(), "--out",
                           (dir / "ht").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("2 checkpoints"), std::string::npos) << r.err;
}

TEST(Cli, HalftimeTrajectoryWithinSpacingAndPropertyCorr) {
    const auto dir = make_synth("cli_traj", {{"kind", "trajectory"}});
    const auto m = (dir / "data" / "manifest.json").string();
    const auto ht = dir / "ht";
    const auto r = invoke({"halftime", "--manifest", m, "--out", ht.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto truth = read_json(dir / "data" / "truth.json")["trajectory"];
    const auto rep = read_json(ht / "report.json");
    const double spacing = 1.0 / 11.0;
    int n = 0;
    for (const auto& roi : rep["results"]["rois"]) {
        const std::string name = roi["roi"];
        if (roi["metric"] != "encoding") continue;
        ASSERT_TRUE(roi["half_time"].is_number()) << name;
        EXPECT_NEAR(roi["half_time"].get<double>(), truth["roi_half_times"][name].get<double>(), spacing) << name;
        ++n;
    }
    EXPECT_EQ(n, 5);
    for (const char* f : {"halftimes.csv", "trajectories.csv", "halftime_rois.svg", "halftime_metrics.svg"})
        EXPECT_TRUE(fs::exists(ht / f)) << f;

    const auto pc = dir / "pc";
    const auto r2 = invoke({"property-corr", "--manifest", m, "--halftimes", (ht / "halftimes.csv").string(),
                            "--out", pc.string()});
    ASSERT_EQ(r2.code, 0) << r2.err;
    const auto props = read_json(pc / "report.json")["results"]["properties"];
    for (const auto& [name, planted] : truth["properties"].items())
        EXPECT_NEAR(props[name]["r"].get<double>(), planted["planted_r"].get<double>(), 0.1) << name;
    EXPECT_TRUE(fs::exists(pc / "property_expansion.svg"));
}

TEST(Cli, PropertyEqualToHalfTimesAndMissingColumn) {
    const auto dir = make_synth("cli_prop", {{"kind", "hierarchical"}, {"n_stimuli", 40}});
    const auto data = dir / "data";
    // A property identical to the supplied half times, and one with no values at all.
    testutil::spit(dir / "ht.csv",
                   "roi,metric,half_time,non_monotone,final_value,note\n"
                   "V1,encoding,0.1,0,1,\nV2,encoding,0.3,0,1,\nV3,encoding,0.2,0,1,\n"
                   "hV4,encoding,0.7,0,1,\nLO,encoding,0.5,0,1,\n");
    testutil::spit(data / "extra.csv", "roi,copy,blank\nV1,0.1,\nV2,0.3,\nV3,0.2,\nhV4,0.7,\nLO,0.5,\n");
    auto manifest = read_json(data / "manifest.json");
    manifest["property_maps"] = {"extra.csv"};
    testutil::spit(data / "manifest.json", manifest.dump(2));

    const auto out = dir / "pc";
    const auto r = invoke({"property-corr", "--manifest", (data / "manifest.json").string(), "--halftimes",
                           (dir / "ht.csv").string(), "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rep = read_json(out / "report.json");
    EXPECT_NEAR(rep["results"]["properties"]["copy"]["r"].get<double>(), 1.0, 1e-12);
    EXPECT_FALSE(rep["results"]["properties"].contains("blank"));
    bool warned = false;
    for (const auto& w : rep["warnings"]) warned |= w.get<std::string>().find("blank") != std::string::npos;
    EXPECT_TRUE(warned);
}

TEST(Cli, ConfigPrecedenceFlagsOverFileOverDefaults) {
    const auto dir = make_synth("cli_prec", {{"kind", "hierarchical"}, {"n_stimuli", 40}, {"n_layers", 3}});
    testutil::spit(dir / "cfg.json", R"({"folds": 4, "seed": 9, "fdr_q": 0.05})");
    const auto out = dir / "o";
    const auto r = invoke({"encode", "--config", (dir / "cfg.json").string(), "--manifest",
                           (dir / "data" / "manifest.json").string(), "--seed", "3", "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto cfg = read_json(out / "report.json")["config"];
    EXPECT_EQ(cfg["seed"].get<int>(), 3);
    EXPECT_EQ(cfg["folds"].get<int>(), 4);
    EXPECT_DOUBLE_EQ(cfg["fdr_q"].get<double>(), 0.05);
    EXPECT_DOUBLE_EQ(cfg["tmax_frac"].get<double>(), 0.95);

    testutil::spit(dir / "bad.json", R"({"foldz": 4})");
    const auto r2 = invoke({"encode", "--config", (dir / "bad.json").string(), "--manifest",
                            (dir / "data" / "manifest.json").string()});
    EXPECT_EQ(r2.code, 2);
    EXPECT_NE(r2.err.find("foldz"), std::string::npos);
}

TEST(Cli, RepeatedAndThreadedRunsAreByteIdentical) {
    const auto dir = make_synth("cli_det", {{"kind", "hierarchical"}, {"noise_sd", 0.5}, {"n_stimuli", 80}});
    const auto m = (dir / "data" / "manifest.json").string();
    std::vector<fs::path> outs;
    for (const char* threads : {"1", "1", "8"}) {
        const auto out = dir / ("o" + std::to_string(outs.size()));
        const auto r = invoke({"scores", "--manifest", m, "--out", out.string(), "--threads", threads,
                               "--lambda-mode", "kfold"});
        ASSERT_EQ(r.code, 0) << r.err;
        outs.push_back(out);
    }
    for (std::size_t i = 1; i < outs.size(); ++i) {
        EXPECT_EQ(payload(outs[0] / "report.json"), payload(outs[i] / "report.json"));
        EXPECT_EQ(testutil::slurp(outs[0] / "spatial_scatter.svg"), testutil::slurp(outs[i] / "spatial_scatter.svg"));
        EXPECT_EQ(testutil::slurp(outs[0] / "per_target_scores.csv"),
                  testutil::slurp(outs[i] / "per_target_scores.csv"));
    }
}

TEST(Cli, ConfigParsers) {
    using namespace neuralign::cli;
    const auto w = parse_windows("0.1:0.2, 0.3:0.5");
    ASSERT_EQ(w.size(), 2u);
    EXPECT_DOUBLE_EQ(w[1].end, 0.5);
    EXPECT_THROW(parse_windows("0.1-0.2"), neuralign::ConfigError);
    EXPECT_THROW(parse_point("1,2"), neuralign::ConfigError);
    EXPECT_DOUBLE_EQ(parse_point("1,2,3")(2), 3.0);
}
