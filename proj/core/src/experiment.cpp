#include "latentfuse/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <charconv>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace latentfuse {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, sep)) out.push_back(trim(item));
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    std::uint64_t v = 0;
    const auto* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, v);
    if (ec != std::errc() || ptr != end || value.empty()) {
        throw ConfigurationError("setting '" + key + "': '" + value + "' is not a non-negative integer");
    }
    return v;
}

std::size_t parse_size(const std::string& key, const std::string& value) {
    return static_cast<std::size_t>(parse_u64(key, value));
}

double parse_double(const std::string& key, const std::string& value) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (value.empty() || end != value.c_str() + value.size() || errno == ERANGE || !std::isfinite(v)) {
        throw ConfigurationError("setting '" + key + "': '" + value + "' is not a finite number");
    }
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
    if (value == "0" || value == "false" || value == "no" || value == "off") return false;
    throw ConfigurationError("setting '" + key + "': '" + value + "' is not a boolean");
}

std::size_t parse_class(const std::string& key, const std::string& name) {
    const auto idx = class_index(name);
    if (!idx) throw ConfigurationError("setting '" + key + "': unknown class '" + name + "'");
    return *idx;
}

void set_visibility_list(ExperimentConfig& c, const std::string& key, const std::string& value, Visibility vis) {
    for (auto& v : c.generator.visibility)
        if (v == vis) v = Visibility::both;
    if (value.empty() || value == "none") return;
    for (const auto& name : split(value, ',')) c.generator.visibility[parse_class(key, name)] = vis;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string visibility_list(const ExperimentConfig& c, Visibility vis) {
    std::string out;
    for (std::size_t k = 0; k < kClassCount; ++k) {
        if (c.generator.visibility[k] != vis) continue;
        if (!out.empty()) out += ',';
        out += kClassNames[k];
    }
    return out.empty() ? "none" : out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"seed", [](auto& c, auto& k, auto& v) { c.seed = parse_u64(k, v); }},
        {"training_seed", [](auto& c, auto& k, auto& v) { c.training_seed = parse_u64(k, v); }},
        {"dataset_size", [](auto& c, auto& k, auto& v) { c.dataset_size = parse_size(k, v); }},
        {"dataset_dir", [](auto& c, auto&, auto& v) { c.dataset_dir = v; }},
        {"variant",
         [](auto& c, auto& k, auto& v) {
             GeneratorConfig base;
             if (v == "standard") {
                 base = GeneratorConfig{};
             } else if (v == "context_signal") {
                 base = GeneratorConfig::context_signal();
             } else {
                 throw ConfigurationError("setting '" + k + "': unknown variant '" + v + "'");
             }
             c.variant = v;
             c.generator.visibility = base.visibility;
         }},
        {"street_only", [](auto& c, auto& k, auto& v) { set_visibility_list(c, k, v, Visibility::street_only); }},
        {"satellite_only", [](auto& c, auto& k, auto& v) { set_visibility_list(c, k, v, Visibility::satellite_only); }},
        {"context_only", [](auto& c, auto& k, auto& v) { set_visibility_list(c, k, v, Visibility::context_only); }},
        {"visibility_threshold",
         [](auto& c, auto& k, auto& v) { c.generator.visibility_threshold = parse_double(k, v); }},
        {"occlusion", [](auto& c, auto& k, auto& v) { c.generator.occlusion_probability = parse_double(k, v); }},
        {"texture_amplitude", [](auto& c, auto& k, auto& v) { c.generator.texture_amplitude = parse_double(k, v); }},
        {"glyph_amplitude", [](auto& c, auto& k, auto& v) { c.generator.glyph_amplitude = parse_double(k, v); }},
        {"noise", [](auto& c, auto& k, auto& v) { c.generator.noise = parse_double(k, v); }},
        {"split_train", [](auto& c, auto& k, auto& v) { c.split.train = parse_double(k, v); }},
        {"split_val", [](auto& c, auto& k, auto& v) { c.split.val = parse_double(k, v); }},
        {"split_test", [](auto& c, auto& k, auto& v) { c.split.test = parse_double(k, v); }},
        {"dataset_with_zero_views", [](auto& c, auto& k, auto& v) { c.dataset_with_zero_views = parse_bool(k, v); }},
        {"model", [](auto& c, auto&, auto& v) { c.model.kind = parse_model_kind(v); }},
        {"mask",
         [](auto& c, auto&, auto& v) {
             c.mask_sat = parse_masking(v);
             c.mask_street = c.mask_sat;
         }},
        {"mask_sat", [](auto& c, auto&, auto& v) { c.mask_sat = parse_masking(v); }},
        {"mask_street", [](auto& c, auto&, auto& v) { c.mask_street = parse_masking(v); }},
        {"pooling", [](auto& c, auto&, auto& v) { c.model.pooling = parse_pooling_mode(v); }},
        {"image_size",
         [](auto& c, auto& k, auto& v) {
             c.model.tokenizer.image_size = parse_size(k, v);
             c.generator.image_size = c.model.tokenizer.image_size;
         }},
        {"patch_size", [](auto& c, auto& k, auto& v) { c.model.tokenizer.patch_size = parse_size(k, v); }},
        {"dim", [](auto& c, auto& k, auto& v) { c.model.tokenizer.dim = parse_size(k, v); }},
        {"nz", [](auto& c, auto& k, auto& v) { c.model.perceiver.num_latents = parse_size(k, v); }},
        {"dz", [](auto& c, auto& k, auto& v) { c.model.perceiver.latent_dim = parse_size(k, v); }},
        {"blocks", [](auto& c, auto& k, auto& v) { c.model.perceiver.blocks = parse_size(k, v); }},
        {"layers", [](auto& c, auto& k, auto& v) { c.model.perceiver.layers = parse_size(k, v); }},
        {"heads_latent", [](auto& c, auto& k, auto& v) { c.model.perceiver.heads_latent = parse_size(k, v); }},
        {"mlp_ratio",
         [](auto& c, auto& k, auto& v) {
             c.model.perceiver.mlp_ratio = parse_size(k, v);
             c.model.fvt.mlp_ratio = c.model.perceiver.mlp_ratio;
         }},
        {"out_dim", [](auto& c, auto& k, auto& v) { c.model.perceiver.out_dim = parse_size(k, v); }},
        {"fvt_layers", [](auto& c, auto& k, auto& v) { c.model.fvt.layers = parse_size(k, v); }},
        {"fvt_heads", [](auto& c, auto& k, auto& v) { c.model.fvt.heads = parse_size(k, v); }},
        {"epochs", [](auto& c, auto& k, auto& v) { c.train.epochs = parse_size(k, v); }},
        {"batch_size", [](auto& c, auto& k, auto& v) { c.train.batch_size = parse_size(k, v); }},
        {"patience", [](auto& c, auto& k, auto& v) { c.train.patience = parse_size(k, v); }},
        {"warmup", [](auto& c, auto& k, auto& v) { c.train.schedule.warmup = parse_size(k, v); }},
        {"t_max", [](auto& c, auto& k, auto& v) { c.train.schedule.t_max = parse_size(k, v); }},
        {"lr_backbone", [](auto& c, auto& k, auto& v) { c.train.schedule.base_backbone = parse_double(k, v); }},
        {"lr_heads", [](auto& c, auto& k, auto& v) { c.train.schedule.base_heads = parse_double(k, v); }},
        {"weight_decay", [](auto& c, auto& k, auto& v) { c.train.optimizer.weight_decay = parse_double(k, v); }},
        {"augment", [](auto& c, auto& k, auto& v) { c.train.augmentation.enabled = parse_bool(k, v); }},
        {"eval_batch", [](auto& c, auto& k, auto& v) { c.eval_batch = parse_size(k, v); }},
        {"out", [](auto& c, auto&, auto& v) { c.out = v; }},
        {"overwrite", [](auto& c, auto& k, auto& v) { c.overwrite = parse_bool(k, v); }},
        {"sweep", [](auto& c, auto&, auto& v) { c.sweep = v; }},
        {"parallel", [](auto& c, auto& k, auto& v) { c.parallel = parse_bool(k, v); }},
    };
    return table;
}

// Keys a sweep may vary without changing the prepared data.
const std::set<std::string>& sweepable_keys() {
    static const std::set<std::string> keys = {
        "nz",      "dz",         "blocks",     "layers",    "heads_latent", "mlp_ratio", "out_dim",
        "fvt_layers", "fvt_heads", "dim",      "epochs",    "batch_size",   "patience",  "warmup",
        "t_max",   "lr_backbone", "lr_heads",  "weight_decay", "pooling",   "model",     "augment"};
    return keys;
}

} // namespace

void apply_setting(ExperimentConfig& config, const std::string& raw_key, const std::string& raw_value) {
    std::string key = trim(raw_key);
    std::replace(key.begin(), key.end(), '-', '_');
    const std::string value = trim(raw_value);
    if (key.rfind("prior.", 0) == 0) {
        const std::size_t k = parse_class(key, key.substr(6));
        config.generator.priors[k] = parse_double(key, value);
        return;
    }
    if (key == "priors") {
        for (std::size_t k = 0; k < kClassCount; ++k) config.generator.priors[k] = parse_double(key, value);
        return;
    }
    const auto& table = setters();
    auto it = table.find(key);
    if (it == table.end()) throw ConfigurationError("unknown setting '" + key + "'");
    it->second(config, key, value);
}

void apply_config_text(ExperimentConfig& config, const std::string& text) {
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigurationError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        apply_setting(config, line.substr(0, eq), line.substr(eq + 1));
    }
}

void load_config_file(ExperimentConfig& config, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigurationError("cannot read config file '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    apply_config_text(config, ss.str());
}

std::string describe(const ExperimentConfig& c) {
    std::ostringstream os;
    auto kv = [&](const std::string& k, const std::string& v) { os << k << " = " << v << '\n'; };
    kv("seed", std::to_string(c.seed));
    kv("training_seed", std::to_string(c.effective_training_seed()));
    kv("dataset_size", std::to_string(c.dataset_size));
    if (!c.dataset_dir.empty()) kv("dataset_dir", c.dataset_dir);
    kv("variant", c.variant);
    kv("street_only", visibility_list(c, Visibility::street_only));
    kv("satellite_only", visibility_list(c, Visibility::satellite_only));
    kv("context_only", visibility_list(c, Visibility::context_only));
    for (std::size_t k = 0; k < kClassCount; ++k)
        kv("prior." + std::string(kClassNames[k]), format_double(c.generator.priors[k]));
    kv("visibility_threshold", format_double(c.generator.visibility_threshold));
    kv("occlusion", format_double(c.generator.occlusion_probability));
    kv("texture_amplitude", format_double(c.generator.texture_amplitude));
    kv("glyph_amplitude", format_double(c.generator.glyph_amplitude));
    kv("noise", format_double(c.generator.noise));
    kv("split_train", format_double(c.split.train));
    kv("split_val", format_double(c.split.val));
    kv("split_test", format_double(c.split.test));
    kv("dataset_with_zero_views", c.dataset_with_zero_views ? "true" : "false");
    kv("model", to_string(c.model.kind));
    kv("mask_sat", to_string(c.mask_sat));
    kv("mask_street", to_string(c.mask_street));
    kv("pooling", to_string(c.model.pooling));
    kv("image_size", std::to_string(c.model.tokenizer.image_size));
    kv("patch_size", std::to_string(c.model.tokenizer.patch_size));
    kv("dim", std::to_string(c.model.tokenizer.dim));
    kv("nz", std::to_string(c.model.perceiver.num_latents));
    kv("dz", std::to_string(c.model.perceiver.latent_dim));
    kv("blocks", std::to_string(c.model.perceiver.blocks));
    kv("layers", std::to_string(c.model.perceiver.layers));
    kv("heads_latent", std::to_string(c.model.perceiver.heads_latent));
    kv("mlp_ratio", std::to_string(c.model.perceiver.mlp_ratio));
    kv("out_dim", std::to_string(c.model.perceiver.output_dim()));
    kv("fvt_layers", std::to_string(c.model.fvt.layers));
    kv("fvt_heads", std::to_string(c.model.fvt.heads));
    kv("epochs", std::to_string(c.train.epochs));
    kv("batch_size", std::to_string(c.train.batch_size));
    kv("patience", std::to_string(c.train.patience));
    kv("warmup", std::to_string(c.train.schedule.warmup));
    kv("t_max", std::to_string(c.train.schedule.t_max));
    kv("lr_backbone", format_double(c.train.schedule.base_backbone));
    kv("lr_heads", format_double(c.train.schedule.base_heads));
    kv("weight_decay", format_double(c.train.optimizer.weight_decay));
    kv("augment", c.train.augmentation.enabled ? "true" : "false");
    return os.str();
}

void finalize(ExperimentConfig& c) {
    c.generator.image_size = c.model.tokenizer.image_size;
    const std::size_t sat = masked_channels(c.mask_sat);
    const std::size_t street = masked_channels(c.mask_street);
    switch (c.model.kind) {
        case ModelKind::satellite: c.model.tokenizer.channels = sat; break;
        case ModelKind::street: c.model.tokenizer.channels = street; break;
        default:
            if (sat != street) {
                throw ConfigurationError("fusion models share one tokenizer: satellite masking '" +
                                         to_string(c.mask_sat) + "' gives " + std::to_string(sat) +
                                         " channels but street masking '" + to_string(c.mask_street) + "' gives " +
                                         std::to_string(street));
            }
            c.model.tokenizer.channels = sat;
    }
    c.model.tokenizer.validate();
    c.model.perceiver.input_dim = c.model.tokenizer.dim;
    if (c.model.kind == ModelKind::perceiver) c.model.perceiver.validate();
    if (c.model.kind == ModelKind::fvt) c.model.fvt.validate(c.model.tokenizer.dim);
    c.generator.validate();
    if (c.dataset_size == 0 && c.dataset_dir.empty()) throw ConfigurationError("dataset_size must be >= 1");
    if (c.train.batch_size == 0) throw ConfigurationError("batch_size must be >= 1");
    if (c.train.epochs == 0) throw ConfigurationError("epochs must be >= 1");
    if (c.train.schedule.t_max == 0) throw ConfigurationError("t_max must be >= 1");
    if (c.eval_batch == 0) throw ConfigurationError("eval_batch must be >= 1");
    const double sum = c.split.train + c.split.val + c.split.test;
    if (!(std::abs(sum - 1.0) <= 1e-9)) throw ConfigurationError("split fractions must sum to 1");
}

std::vector<BuildingSample> load_or_generate(const ExperimentConfig& config) {
    if (!config.dataset_dir.empty()) return read_dataset(config.dataset_dir);
    return generate_dataset(config.generator, config.dataset_size, config.seed, config.dataset_with_zero_views);
}

PreparedData prepare_data(const ExperimentConfig& config) {
    const auto samples = load_or_generate(config);
    const auto split = split_dataset(samples, config.split, config.seed ^ 0x5b1e7ULL);
    PreparedData data;
    data.train = prepare_samples(split.train, config.mask_sat, config.mask_street);
    data.val = prepare_samples(split.val, config.mask_sat, config.mask_street);
    data.test = prepare_samples(split.test, config.mask_sat, config.mask_street);
    if (config.model.kind == ModelKind::street && !config.dataset_with_zero_views) {
        auto drop = [](std::vector<PreparedSample>& v) {
            std::erase_if(v, [](const PreparedSample& s) { return s.street_views() == 0; });
        };
        drop(data.train);
        drop(data.val);
        drop(data.test);
    }
    return data;
}

void prepare_output_dir(const std::filesystem::path& dir, bool overwrite) {
    namespace fs = std::filesystem;
    if (fs::exists(dir)) {
        if (!fs::is_directory(dir)) throw ConfigurationError("output path '" + dir.string() + "' is not a directory");
        if (!fs::is_empty(dir) && !overwrite) {
            throw ConfigurationError("output directory '" + dir.string() +
                                     "' is not empty; pass --overwrite to replace its contents");
        }
    }
    fs::create_directories(dir);
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ValidationError("cannot write '" + path.string() + "'");
    os << text;
}

std::string run_label(const ExperimentConfig& c) {
    std::string label = to_string(c.model.kind);
    if (c.model.kind != ModelKind::street) label += "/sat-" + to_string(c.mask_sat);
    if (c.model.kind != ModelKind::satellite) label += "/street-" + to_string(c.mask_street);
    return label;
}

void check_street_contract(const PreparedData& data) {
    for (const auto* split : {&data.train, &data.val, &data.test}) {
        for (const auto& s : *split) {
            if (s.street_views() == 0) {
                throw ContractError("street model requires N >= 1 street-level images, but sample '" + s.id +
                                    "' has N=0");
            }
        }
    }
}

} // namespace

RunResult run_experiment(const ExperimentConfig& input, const PreparedData* data) {
    ExperimentConfig config = input;
    finalize(config);
    if (!config.out.empty()) prepare_output_dir(config.out, config.overwrite);

    PreparedData local;
    if (data == nullptr) {
        local = prepare_data(config);
        data = &local;
    }
    if (config.model.kind == ModelKind::street) check_street_contract(*data);
    if (data->train.empty() || data->val.empty() || data->test.empty()) {
        throw ConfigurationError("dataset too small: train/val/test sizes " + std::to_string(data->train.size()) +
                                 "/" + std::to_string(data->val.size()) + "/" + std::to_string(data->test.size()));
    }

    const std::uint64_t seed = config.effective_training_seed();
    RunResult result;
    result.model = make_classifier<float>(config.model, seed);
    TrainConfig train = config.train;
    train.seed = seed;
    result.fit = fit(*result.model, data->train, data->val, train);
    result.report = evaluate(*result.model, data->test, config.eval_batch);

    if (!config.out.empty()) {
        const std::filesystem::path out = config.out;
        save_checkpoint(out / "model.ckpt", *result.model);
        write_text(out / "history.json", history_json(result.fit.history));
        write_text(out / "report.json", report_json(result.report));
        const std::pair<std::string, EvalReport> row{run_label(config), result.report};
        write_text(out / "report.csv", report_csv(std::span(&row, 1)));
        write_text(out / "config.txt", describe(config));
    }
    return result;
}

std::vector<GridAxis> parse_grid(const std::string& spec) {
    std::vector<GridAxis> axes;
    for (const auto& part : split(spec, ';')) {
        if (part.empty()) continue;
        const auto eq = part.find('=');
        if (eq == std::string::npos) throw ConfigurationError("sweep: axis '" + part + "' needs key=v1,v2,...");
        GridAxis axis;
        axis.key = trim(part.substr(0, eq));
        std::replace(axis.key.begin(), axis.key.end(), '-', '_');
        if (!sweepable_keys().contains(axis.key)) {
            throw ConfigurationError("sweep: '" + axis.key + "' cannot be swept (data-affecting or unknown key)");
        }
        for (const auto& v : split(part.substr(eq + 1), ','))
            if (!v.empty()) axis.values.push_back(v);
        if (axis.values.empty()) throw ConfigurationError("sweep: axis '" + axis.key + "' has no values");
        for (const auto& other : axes)
            if (other.key == axis.key) throw ConfigurationError("sweep: axis '" + axis.key + "' given twice");
        axes.push_back(std::move(axis));
    }
    if (axes.empty()) throw ConfigurationError("sweep: empty grid");
    return axes;
}

std::vector<SweepCell> run_sweep(const ExperimentConfig& input, std::size_t threads) {
    ExperimentConfig base = input;
    base.sweep.clear();
    const auto axes = parse_grid(input.sweep);

    std::vector<SweepCell> cells(1);
    for (const auto& axis : axes) {
        std::vector<SweepCell> next;
        for (const auto& cell : cells) {
            for (const auto& v : axis.values) {
                SweepCell c = cell;
                c.settings.emplace_back(axis.key, v);
                next.push_back(std::move(c));
            }
        }
        cells = std::move(next);
    }
    std::vector<ExperimentConfig> configs;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        cells[i].index = i;
        ExperimentConfig c = base;
        for (const auto& [k, v] : cells[i].settings) apply_setting(c, k, v);
        c.training_seed = base.seed ^ std::uint64_t(i);
        finalize(c);
        cells[i].nz = c.model.perceiver.num_latents;
        cells[i].dz = c.model.perceiver.latent_dim;
        cells[i].blocks = c.model.perceiver.blocks;
        configs.push_back(std::move(c));
    }

    finalize(base);
    if (!base.out.empty()) prepare_output_dir(base.out, base.overwrite);
    const PreparedData data = prepare_data(base);

    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (!base.out.empty()) {
            char name[32];
            std::snprintf(name, sizeof name, "cell_%03zu", i);
            configs[i].out = (std::filesystem::path(base.out) / name).string();
            configs[i].overwrite = true;
        } else {
            configs[i].out.clear();
        }
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            try {
                auto r = run_experiment(configs[i], &data);
                cells[i].report = r.report;
                cells[i].diverged = r.fit.diverged;
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(cells.size());
            }
        }
    };
    const std::size_t n_threads = std::max<std::size_t>(1, std::min(threads, cells.size()));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    if (!base.out.empty()) {
        const std::filesystem::path out = base.out;
        write_text(out / "heatmap.csv", sweep_heatmap(cells));
        std::vector<std::pair<std::string, EvalReport>> rows;
        for (const auto& cell : cells) {
            std::string name;
            char idx[32];
            std::snprintf(idx, sizeof idx, "cell_%03zu", cell.index);
            name = idx;
            for (const auto& [k, v] : cell.settings) name += " " + k + "=" + v;
            rows.emplace_back(name, cell.report);
        }
        write_text(out / "sweep.csv", report_csv(rows));
        write_text(out / "config.txt", describe(base) + "sweep = " + input.sweep + "\n");
    }
    return cells;
}

std::string sweep_heatmap(const std::vector<SweepCell>& cells) {
    auto value_of = [](const SweepCell& cell, const std::string& key) -> std::size_t {
        if (key == "nz") return cell.nz;
        if (key == "dz") return cell.dz;
        return cell.blocks;
    };
    std::set<std::size_t> nzs, dzs, blocks;
    for (const auto& c : cells) {
        nzs.insert(value_of(c, "nz"));
        dzs.insert(value_of(c, "dz"));
        blocks.insert(value_of(c, "blocks"));
    }
    // Cells differing only in other axes are averaged.
    std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::array<std::pair<double, std::size_t>, 3>> acc;
    for (const auto& c : cells) {
        auto& a = acc[{value_of(c, "blocks"), value_of(c, "nz"), value_of(c, "dz")}];
        const double vals[3] = {c.report.map_elements.value_or(0.0), c.report.map_materials.value_or(0.0),
                                c.report.mean_map()};
        for (int t = 0; t < 3; ++t) {
            a[t].first += vals[t];
            a[t].second += 1;
        }
    }
    std::ostringstream os;
    os << "task,blocks,nz";
    for (auto dz : dzs) os << ",dz=" << dz;
    os << '\n';
    const char* tasks[3] = {"elements", "materials", "mean"};
    for (int t = 0; t < 3; ++t) {
        for (auto b : blocks) {
            for (auto nz : nzs) {
                os << tasks[t] << ',' << b << ',' << nz;
                for (auto dz : dzs) {
                    auto it = acc.find({b, nz, dz});
                    os << ',';
                    if (it != acc.end() && it->second[t].second > 0) {
                        char buf[32];
                        std::snprintf(buf, sizeof buf, "%.6f", it->second[t].first / double(it->second[t].second));
                        os << buf;
                    }
                }
                os << '\n';
            }
        }
    }
    return os.str();
}

std::string compare_reports(const std::vector<std::filesystem::path>& paths) {
    if (paths.size() < 2) throw ConfigurationError("compare: need a baseline and at least one candidate report");
    std::vector<std::pair<std::string, EvalReport>> reports;
    for (const auto& p : paths) reports.emplace_back(p.string(), read_report(p.string()));
    std::vector<DeltaRow> deltas;
    for (std::size_t i = 1; i < reports.size(); ++i)
        deltas.push_back(delta(reports[i].first, reports[0].second, reports[i].second));
    return report_csv(reports) + "\ndelta vs " + reports[0].first + " (percentage points)\n" + delta_table(deltas);
}

} // namespace latentfuse
