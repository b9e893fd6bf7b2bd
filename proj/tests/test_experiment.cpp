#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "latentfuse/errors.hpp"
#include "latentfuse/experiment.hpp"

using namespace latentfuse;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code = -1;
    std::string output;
};

CliResult run_cli(const std::string& args) {
    const std::string cmd = std::string(LATENTFUSE_CLI) + " " + args + " 2>&1";
    CliResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("latentfuse_exp_" + name);
    fs::remove_all(dir);
    return dir;
}

const std::string kSmall =
    "--dataset_size 120 --epochs 2 --dim 16 --nz 4 --dz 16 --blocks 1 --layers 1 --heads_latent 2 "
    "--batch_size 16 --split_train 0.6 --split_val 0.2 --split_test 0.2";

void write_report(const fs::path& path, double slate) {
    EvalReport r;
    for (auto& ap : r.ap) ap = 0.5;
    r.ap[kSlate] = slate;
    r.map_elements = 0.5;
    r.map_materials = 0.5;
    r.map_materials_star = 0.5;
    std::ofstream(path) << report_json(r);
}

} // namespace

TEST(Cli, RunIsByteIdenticalAcrossInvocations) {
    const auto a = scratch("det_a"), b = scratch("det_b");
    const auto ra = run_cli("run --model perceiver --mask rgbm --seed 1 --out " + a.string() + " " + kSmall);
    ASSERT_EQ(ra.code, 0) << ra.output;
    const auto rb = run_cli("run --model perceiver --mask rgbm --seed 1 --out " + b.string() + " " + kSmall);
    ASSERT_EQ(rb.code, 0) << rb.output;
    for (const char* f : {"report.json", "model.ckpt", "history.json", "report.csv", "config.txt"}) {
        ASSERT_TRUE(fs::exists(a / f)) << f;
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    }
    EXPECT_NE(ra.output.find("\"map_elements\""), std::string::npos);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Cli, StreetModelWithZeroViewSampleIsContractViolation) {
    const auto r = run_cli("run --model street --dataset-with-zero-views " + kSmall);
    EXPECT_EQ(r.code, 2) << r.output;
    EXPECT_NE(r.output.find("N=0"), std::string::npos) << r.output;
}

TEST(Cli, ConfigErrorsExitOne) {
    EXPECT_EQ(run_cli("run --model transformer").code, 1);
    EXPECT_EQ(run_cli("run --no_such_key 3").code, 1);
    EXPECT_EQ(run_cli("run --config /nonexistent.cfg").code, 1);
    EXPECT_EQ(run_cli("run --mask-sat rgbm --mask-street crop --model perceiver").code, 1);
    EXPECT_EQ(run_cli("").code, 1);
}

TEST(Cli, RefusesNonEmptyOutputWithoutOverwrite) {
    const auto dir = scratch("guard");
    fs::create_directories(dir);
    std::ofstream(dir / "keep.txt") << "mine";
    const auto r = run_cli("run --model satellite --out " + dir.string() + " " + kSmall);
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.output.find("--overwrite"), std::string::npos);
    EXPECT_EQ(slurp(dir / "keep.txt"), "mine");
    EXPECT_FALSE(fs::exists(dir / "report.json"));
    EXPECT_EQ(run_cli("run --model satellite --overwrite --out " + dir.string() + " " + kSmall).code, 0);
    EXPECT_TRUE(fs::exists(dir / "report.json"));
    fs::remove_all(dir);
}

TEST(Cli, SweepWritesCellsAndHeatmap) {
    const auto dir = scratch("sweep");
    const auto r = run_cli("run --model perceiver --sweep \"nz=1,4;dz=8,16\" --out " + dir.string() + " " + kSmall);
    ASSERT_EQ(r.code, 0) << r.output;
    for (int i = 0; i < 4; ++i) {
        char name[16];
        std::snprintf(name, sizeof name, "cell_%03d", i);
        EXPECT_TRUE(fs::exists(dir / name / "report.json")) << name;
    }
    const auto heatmap = slurp(dir / "heatmap.csv");
    EXPECT_EQ(heatmap.substr(0, heatmap.find('\n')), "task,blocks,nz,dz=8,dz=16");
    EXPECT_NE(heatmap.find("mean,1,4,"), std::string::npos);
    EXPECT_EQ(heatmap, r.output);
    fs::remove_all(dir);
}

TEST(Cli, SweepIsDeterministicUnderParallelism) {
    const auto a = scratch("sweep_seq"), b = scratch("sweep_par");
    const std::string grid = "run --model perceiver --sweep \"dz=8,16\" " + kSmall;
    ASSERT_EQ(run_cli(grid + " --out " + a.string()).code, 0);
    ASSERT_EQ(run_cli(grid + " --parallel --out " + b.string()).code, 0);
    EXPECT_EQ(slurp(a / "heatmap.csv"), slurp(b / "heatmap.csv"));
    EXPECT_EQ(slurp(a / "cell_001" / "model.ckpt"), slurp(b / "cell_001" / "model.ckpt"));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Cli, CompareSelfIsZero) {
    const auto dir = scratch("cmp_self");
    fs::create_directories(dir);
    write_report(dir / "a.json", 0.4);
    const auto r = run_cli("compare " + (dir / "a.json").string() + " " + (dir / "a.json").string());
    ASSERT_EQ(r.code, 0) << r.output;
    const auto row = r.output.substr(r.output.rfind('\n', r.output.size() - 2) + 1);
    EXPECT_EQ(row.find("+"), std::string::npos) << row;
    EXPECT_NE(row.find(",0.0,0.0,0.0"), std::string::npos) << row;
    fs::remove_all(dir);
}

TEST(Cli, CompareReportsPercentagePoints) {
    const auto dir = scratch("cmp");
    fs::create_directories(dir);
    write_report(dir / "base.json", 0.40);
    write_report(dir / "cand.json", 0.513);
    const auto r = run_cli("compare " + (dir / "base.json").string() + " " + (dir / "cand.json").string());
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_NE(r.output.find(",0.0,+11.3,0.0,"), std::string::npos) << r.output;
    std::ofstream(dir / "bad.json") << "{\"ap\": {\"slate\": 0.5}}";
    EXPECT_EQ(run_cli("compare " + (dir / "base.json").string() + " " + (dir / "bad.json").string()).code, 1);
    fs::remove_all(dir);
}

TEST(Cli, GenerateThenRunFromDirectory) {
    const auto data = scratch("gen"), out = scratch("gen_run");
    ASSERT_EQ(run_cli("generate --seed 4 --dataset_size 60 --out " + data.string()).code, 0);
    EXPECT_TRUE(fs::exists(data / "manifest.json"));
    const auto r = run_cli("run --model concat --dataset_dir " + data.string() + " --out " + out.string() + " " + kSmall);
    EXPECT_EQ(r.code, 0) << r.output;
    fs::remove_all(data);
    fs::remove_all(out);
}

TEST(Config, FileThenOverridesWin) {
    ExperimentConfig c;
    apply_config_text(c, "# comment\nmodel = fvt\nseed = 9   # trailing\nprior.slate = 0.5\nmask = crop\n");
    EXPECT_EQ(c.model.kind, ModelKind::fvt);
    EXPECT_EQ(c.seed, 9u);
    EXPECT_EQ(c.generator.priors[kSlate], 0.5);
    EXPECT_EQ(c.mask_street, MaskingStrategy::crop);
    apply_setting(c, "seed", "11");
    EXPECT_EQ(c.seed, 11u);
    apply_setting(c, "mask-sat", "rgbm");
    EXPECT_EQ(c.mask_sat, MaskingStrategy::rgbm);
}

TEST(Config, BadInputsAreConfigurationErrors) {
    ExperimentConfig c;
    EXPECT_THROW(apply_config_text(c, "model perceiver"), ConfigurationError);
    EXPECT_THROW(apply_setting(c, "seed", "-3"), ConfigurationError);
    EXPECT_THROW(apply_setting(c, "epochs", "ten"), ConfigurationError);
    EXPECT_THROW(apply_setting(c, "prior.marble", "0.1"), ConfigurationError);
    EXPECT_THROW(apply_setting(c, "variant", "fancy"), ConfigurationError);
    EXPECT_THROW(load_config_file(c, "/nonexistent.cfg"), ConfigurationError);
}

TEST(Config, FinalizeDerivesChannels) {
    ExperimentConfig c;
    c.mask_sat = c.mask_street = MaskingStrategy::crop;
    finalize(c);
    EXPECT_EQ(c.model.tokenizer.channels, 3u);
    c.model.kind = ModelKind::satellite;
    c.mask_sat = MaskingStrategy::rgbm;
    finalize(c);
    EXPECT_EQ(c.model.tokenizer.channels, 4u);
    c.model.kind = ModelKind::concat;
    EXPECT_THROW(finalize(c), ConfigurationError);
}

TEST(Config, DescribeRoundTrips) {
    ExperimentConfig c;
    apply_config_text(c, "model = concat\nvariant = context_signal\nnz = 8\nlr_heads = 0.001\n");
    ExperimentConfig d;
    auto text = describe(c);
    // training_seed is derived; the rest parses back to the same description.
    apply_config_text(d, text);
    EXPECT_EQ(describe(d), text);
}

TEST(Sweep, GridParsing) {
    const auto axes = parse_grid("nz=1,8,32;dz=8,32,128");
    ASSERT_EQ(axes.size(), 2u);
    EXPECT_EQ(axes[0].key, "nz");
    EXPECT_EQ(axes[1].values, (std::vector<std::string>{"8", "32", "128"}));
    EXPECT_THROW(parse_grid("seed=1,2"), ConfigurationError);
    EXPECT_THROW(parse_grid("nz"), ConfigurationError);
    EXPECT_THROW(parse_grid("nz=1;nz=2"), ConfigurationError);
    EXPECT_THROW(parse_grid(""), ConfigurationError);
}

TEST(Sweep, HeatmapLayout) {
    std::vector<SweepCell> cells;
    std::size_t i = 0;
    for (const char* nz : {"1", "8"})
        for (const char* dz : {"8", "32"}) {
            SweepCell c;
            c.index = i++;
            c.settings = {{"nz", nz}, {"dz", dz}};
            c.nz = std::stoul(nz);
            c.dz = std::stoul(dz);
            c.blocks = 2;
            c.report.map_elements = 0.1 * double(i);
            c.report.map_materials = 0.2;
            cells.push_back(c);
        }
    const auto h = sweep_heatmap(cells);
    EXPECT_NE(h.find("elements,2,1,0.100000,0.200000\n"), std::string::npos) << h;
    EXPECT_NE(h.find("elements,2,8,0.300000,0.400000\n"), std::string::npos) << h;
    EXPECT_NE(h.find("materials,2,8,0.200000,0.200000\n"), std::string::npos) << h;
}
