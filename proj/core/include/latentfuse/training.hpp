#pragma once

// Joint multi-task training: 0.5/0.5 BCE loss, AdamW with two learning-rate
// groups, per-iteration warmup + cosine schedule, early stopping on the mean
// validation mAP and batches bucketed by street-view count.

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "latentfuse/metrics.hpp"
#include "latentfuse/model.hpp"

namespace latentfuse {

template <typename T>
Tensor<T> joint_loss(const Tensor<T>& elements_loss, const Tensor<T>& materials_loss);

double joint_loss(double elements_loss, double materials_loss);

struct Schedule {
    std::size_t warmup = 5;
    std::size_t t_max = 50;
    double base_backbone = 5e-5;
    double base_heads = 5e-4;

    double base(ParamGroup group) const { return group == ParamGroup::backbone ? base_backbone : base_heads; }
};

// step < warmup: base * (step + 1) / warmup; afterwards
// base * 0.5 * (1 + cos(pi * min(t, T_max) / T_max)), t = step - warmup.
double lr_at(std::size_t step, const Schedule& schedule, ParamGroup group);

struct LearningRates {
    double backbone = 0.0;
    double heads = 0.0;

    double of(ParamGroup group) const { return group == ParamGroup::backbone ? backbone : heads; }
};

LearningRates rates_at(std::size_t step, const Schedule& schedule);

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.05;
};

// Decoupled weight decay (p -= lr * wd * p) followed by the bias-corrected
// Adam update. Moments are kept in double. Parameters without a gradient
// slot are treated as having zero gradient.
template <typename T>
class AdamW {
public:
    AdamW(ParameterList<T>& params, const AdamWConfig& config = {});

    // Throws DivergenceError, leaving every parameter untouched, if any
    // gradient is NaN or infinite.
    void step(const LearningRates& rates);

    std::size_t steps() const { return steps_; }
    const AdamWConfig& config() const { return config_; }
    std::span<const double> first_moment(std::size_t param) const { return m_.at(param); }
    std::span<const double> second_moment(std::size_t param) const { return v_.at(param); }

private:
    ParameterList<T>* params_;
    AdamWConfig config_;
    std::vector<std::vector<double>> m_, v_;
    std::size_t steps_ = 0;
};

class EarlyStopping {
public:
    explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

    // Improvement means metric >= best + min_delta. A non-improving epoch
    // stops training once `patience` non-improving epochs have already
    // been counted, otherwise it is counted.
    struct Decision {
        bool improved = false;
        bool stop = false;
    };
    Decision observe(double metric);

    static constexpr double kMinDelta = 1e-6;

    std::size_t patience() const { return patience_; }
    std::size_t epochs_since_improvement() const { return counter_; }
    double best() const { return best_; }

private:
    std::size_t patience_;
    std::size_t counter_ = 0;
    double best_ = -std::numeric_limits<double>::infinity();
};

// Groups sample indices by street-view count, shuffles within each group,
// cuts batch_size chunks and shuffles the batch order.
std::vector<std::vector<std::size_t>> bucket_batches(std::span<const std::size_t> street_views,
                                                     std::size_t batch_size, std::uint64_t seed);

std::vector<std::vector<std::size_t>> bucket_batches(std::span<const PreparedSample> samples,
                                                     std::size_t batch_size, std::uint64_t seed);

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 16;
    std::size_t patience = 8;
    Schedule schedule;
    AdamWConfig optimizer;
    Augmentation augmentation;
    std::uint64_t seed = 0;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    std::optional<double> val_map_elements;
    std::optional<double> val_map_materials;
    double lr_backbone = 0.0;
    double lr_heads = 0.0;
};

struct FitResult {
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    double best_metric = -std::numeric_limits<double>::infinity();
    std::vector<float> best_parameters;
    bool stopped_early = false;
    bool diverged = false;
    std::string divergence;
};

// Trains model in place and leaves it holding the parameters of the best
// validation epoch (the initial parameters if divergence hits first).
FitResult fit(Classifier<float>& model, std::span<const PreparedSample> train, std::span<const PreparedSample> val,
              const TrainConfig& config);

std::string history_json(std::span<const EpochRecord> history);

} // namespace latentfuse
