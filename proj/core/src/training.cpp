#include "latentfuse/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include <nlohmann/json.hpp>

namespace latentfuse {

template <typename T>
Tensor<T> joint_loss(const Tensor<T>& elements_loss, const Tensor<T>& materials_loss) {
    return add(scale(elements_loss, T(0.5)), scale(materials_loss, T(0.5)));
}

template Tensor<float> joint_loss<float>(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> joint_loss<double>(const Tensor<double>&, const Tensor<double>&);

double joint_loss(double elements_loss, double materials_loss) {
    return 0.5 * elements_loss + 0.5 * materials_loss;
}

double lr_at(std::size_t step, const Schedule& schedule, ParamGroup group) {
    if (schedule.t_max == 0) throw ConfigurationError("schedule: T_max must be > 0");
    const double base = schedule.base(group);
    if (step < schedule.warmup) return base * double(step + 1) / double(schedule.warmup);
    const std::size_t t = std::min(step - schedule.warmup, schedule.t_max);
    const double lr = base * 0.5 * (1.0 + std::cos(std::numbers::pi * double(t) / double(schedule.t_max)));
    return std::max(lr, 0.0);
}

LearningRates rates_at(std::size_t step, const Schedule& schedule) {
    return {lr_at(step, schedule, ParamGroup::backbone), lr_at(step, schedule, ParamGroup::heads)};
}

template <typename T>
AdamW<T>::AdamW(ParameterList<T>& params, const AdamWConfig& config) : params_(&params), config_(config) {
    for (const auto& p : params.items()) {
        m_.emplace_back(p.tensor.size(), 0.0);
        v_.emplace_back(p.tensor.size(), 0.0);
    }
}

template <typename T>
void AdamW<T>::step(const LearningRates& rates) {
    auto items = params_->items();
    if (items.size() != m_.size()) throw ContractError("adamw: parameter list changed after construction");
    for (const auto& p : items) {
        if (!p.tensor.has_grad()) continue;
        for (T g : p.tensor.grad()) {
            if (!std::isfinite(g)) {
                throw DivergenceError("adamw: non-finite gradient in '" + p.name + "' at optimizer step " +
                                      std::to_string(steps_ + 1));
            }
        }
    }
    ++steps_;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, double(steps_));
    const double c2 = 1.0 - std::pow(b2, double(steps_));
    for (std::size_t i = 0; i < items.size(); ++i) {
        auto& p = items[i];
        const double lr = rates.of(p.group);
        auto data = p.tensor.mutable_data();
        const auto grad = p.tensor.grad();
        const bool has_grad = p.tensor.has_grad();
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t k = 0; k < data.size(); ++k) {
            const double g = has_grad ? double(grad[k]) : 0.0;
            double x = double(data[k]);
            x -= lr * config_.weight_decay * x;
            m[k] = b1 * m[k] + (1.0 - b1) * g;
            v[k] = b2 * v[k] + (1.0 - b2) * g * g;
            const double m_hat = m[k] / c1;
            const double v_hat = v[k] / c2;
            x -= lr * m_hat / (std::sqrt(v_hat) + config_.eps);
            data[k] = T(x);
        }
    }
}

template class AdamW<float>;
template class AdamW<double>;

EarlyStopping::Decision EarlyStopping::observe(double metric) {
    Decision d;
    if (metric - best_ >= kMinDelta) {
        best_ = metric;
        counter_ = 0;
        d.improved = true;
        return d;
    }
    if (counter_ >= patience_) {
        d.stop = true;
    } else {
        ++counter_;
    }
    return d;
}

std::vector<std::vector<std::size_t>> bucket_batches(std::span<const std::size_t> street_views,
                                                     std::size_t batch_size, std::uint64_t seed) {
    if (batch_size == 0) throw ConfigurationError("bucket_batches: batch size must be >= 1");
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < street_views.size(); ++i) groups[street_views[i]].push_back(i);

    SplitMix64 rng(seed);
    std::vector<std::vector<std::size_t>> batches;
    for (auto& [n, members] : groups) {
        rng.shuffle(std::span<std::size_t>(members));
        for (std::size_t start = 0; start < members.size(); start += batch_size) {
            const std::size_t stop = std::min(members.size(), start + batch_size);
            batches.emplace_back(members.begin() + start, members.begin() + stop);
        }
    }
    rng.shuffle(std::span<std::vector<std::size_t>>(batches));
    return batches;
}

std::vector<std::vector<std::size_t>> bucket_batches(std::span<const PreparedSample> samples,
                                                     std::size_t batch_size, std::uint64_t seed) {
    std::vector<std::size_t> counts(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) counts[i] = samples[i].street_views();
    return bucket_batches(counts, batch_size, seed);
}

FitResult fit(Classifier<float>& model, std::span<const PreparedSample> train, std::span<const PreparedSample> val,
              const TrainConfig& config) {
    if (train.empty()) throw ContractError("fit: empty training set");
    if (val.empty()) throw ContractError("fit: empty validation set");
    if (config.epochs == 0) throw ConfigurationError("fit: epochs must be >= 1");

    auto& params = model.parameters();
    AdamW<float> optimizer(params, config.optimizer);
    EarlyStopping stopper(config.patience);
    SplitMix64 order_rng(config.seed);
    SplitMix64 augment_rng(config.seed ^ 0xa0761d6478bd642fULL);

    FitResult result;
    result.best_parameters = params.flatten();
    std::size_t step = 0;
    std::vector<const PreparedSample*> chunk;

    try {
        for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
            const auto batches = bucket_batches(train, config.batch_size, order_rng.next());
            double loss_total = 0.0;
            std::size_t seen = 0;
            LearningRates rates;
            for (const auto& indices : batches) {
                chunk.clear();
                for (std::size_t i : indices) chunk.push_back(&train[i]);
                const Batch<float> batch =
                    make_batch<float>(chunk, model.tokenizer_config(), config.augmentation, &augment_rng);
                rates = rates_at(step, config.schedule);
                params.zero_grad();
                Tape<float> tape;
                const HeadLogits<float> logits = model.forward(batch);
                const Tensor<float> loss = joint_loss(bce_with_logits(logits.elements, batch.targets_elements),
                                                      bce_with_logits(logits.materials, batch.targets_materials));
                tape.backward(loss);
                optimizer.step(rates);
                loss_total += double(loss.item()) * double(batch.size);
                seen += batch.size;
                ++step;
            }
            params.zero_grad();

            const EvalReport report = evaluate(model, val);
            EpochRecord record;
            record.epoch = epoch;
            record.train_loss = loss_total / double(seen);
            record.val_map_elements = report.map_elements;
            record.val_map_materials = report.map_materials;
            record.lr_backbone = rates.backbone;
            record.lr_heads = rates.heads;
            result.history.push_back(record);

            const auto decision = stopper.observe(report.mean_map());
            if (decision.improved) {
                result.best_epoch = epoch;
                result.best_metric = stopper.best();
                result.best_parameters = params.flatten();
            }
            if (decision.stop) {
                result.stopped_early = true;
                break;
            }
        }
    } catch (const NonFiniteError& e) {
        result.diverged = true;
        result.divergence = e.what();
    } catch (const DivergenceError& e) {
        result.diverged = true;
        result.divergence = e.what();
    }
    params.zero_grad();
    params.assign(result.best_parameters);
    return result;
}

std::string history_json(std::span<const EpochRecord> history) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const auto& r : history) {
        nlohmann::ordered_json j;
        j["epoch"] = r.epoch;
        j["train_loss"] = r.train_loss;
        j["val_map_elements"] = opt(r.val_map_elements);
        j["val_map_materials"] = opt(r.val_map_materials);
        j["lr_backbone"] = r.lr_backbone;
        j["lr_heads"] = r.lr_heads;
        out.push_back(j);
    }
    return out.dump(2) + "\n";
}

} // namespace latentfuse
