#pragma once

// Experiment runner: dataset generation or loading, training, test
// evaluation, artifact emission, the latent-configuration sweep and report
// comparison.
//
// Configuration is a flat key=value set. Files use one `key = value` per
// line with `#` comments; later settings override earlier ones.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "latentfuse/checkpoint.hpp"
#include "latentfuse/dataset_io.hpp"
#include "latentfuse/masking.hpp"
#include "latentfuse/metrics.hpp"
#include "latentfuse/synthetic.hpp"
#include "latentfuse/training.hpp"

namespace latentfuse {

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::optional<std::uint64_t> training_seed;  // defaults to seed

    std::size_t dataset_size = 1000;
    std::string dataset_dir;  // load from here instead of generating
    std::string variant = "standard";
    GeneratorConfig generator;
    SplitFractions split;
    bool dataset_with_zero_views = false;

    ModelSpec model;
    MaskingStrategy mask_sat = MaskingStrategy::rgbm;
    MaskingStrategy mask_street = MaskingStrategy::rgbm;
    TrainConfig train;
    std::size_t eval_batch = 64;

    std::string out;
    bool overwrite = false;
    std::string sweep;
    bool parallel = false;

    std::uint64_t effective_training_seed() const { return training_seed.value_or(seed); }
};

// Throws ConfigurationError for an unknown key or unparsable value.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);
void apply_config_text(ExperimentConfig& config, const std::string& text);
void load_config_file(ExperimentConfig& config, const std::filesystem::path& path);

// Resolved settings as key=value lines, in a fixed order.
std::string describe(const ExperimentConfig& config);

// Fills tokenizer channels from the masking strategies and checks
// consistency. Throws ConfigurationError.
void finalize(ExperimentConfig& config);

struct PreparedData {
    std::vector<PreparedSample> train, val, test;
};

// Generates (or loads) the dataset, splits it and applies masking. A
// street-only model drops samples without street views unless
// dataset_with_zero_views is set, in which case the generated dataset is
// guaranteed to contain one and training hits the N >= 1 contract.
PreparedData prepare_data(const ExperimentConfig& config);
std::vector<BuildingSample> load_or_generate(const ExperimentConfig& config);

struct RunResult {
    EvalReport report;
    FitResult fit;
    std::unique_ptr<Classifier<float>> model;
};

// Trains and evaluates. Writes checkpoint, history.json, report.json,
// report.csv and config.txt when config.out is set. Training divergence is
// reported through result.fit.diverged after artifacts are written.
RunResult run_experiment(const ExperimentConfig& config, const PreparedData* data = nullptr);

// Refuses a non-empty existing directory unless overwrite is set.
void prepare_output_dir(const std::filesystem::path& dir, bool overwrite);

struct GridAxis {
    std::string key;
    std::vector<std::string> values;
};

// "nz=1,8,32;dz=8,32,128;blocks=2"
std::vector<GridAxis> parse_grid(const std::string& spec);

struct SweepCell {
    std::size_t index = 0;
    std::vector<std::pair<std::string, std::string>> settings;
    // Resolved latent shape of the cell's model.
    std::size_t nz = 0, dz = 0, blocks = 0;
    EvalReport report;
    bool diverged = false;
};

// Cartesian product of the axes (first axis outermost). Every cell trains
// on the dataset of config.seed with training seed config.seed ^ index.
// With `threads` > 1 cells run concurrently on separate models.
std::vector<SweepCell> run_sweep(const ExperimentConfig& config, std::size_t threads = 1);

// Fig.-8 style table: rows (task, blocks, nz), columns dz.
std::string sweep_heatmap(const std::vector<SweepCell>& cells);

// First report is the baseline. Throws ValidationError on taxonomy mismatch.
std::string compare_reports(const std::vector<std::filesystem::path>& paths);

} // namespace latentfuse
