#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "latentfuse/errors.hpp"
#include "latentfuse/experiment.hpp"

namespace lf = latentfuse;

namespace {

enum Exit { kOk = 0, kConfig = 1, kContract = 2, kDivergence = 3 };

struct Flags {
    std::optional<std::string> config, model, mask, mask_sat, mask_street, seed, out, sweep, epochs;
    bool overwrite = false;
    bool parallel = false;
    bool zero_views = false;
};

void add_common(CLI::App& cmd, Flags& f) {
    cmd.add_option("--config", f.config, "key = value config file");
    cmd.add_option("--model", f.model, "satellite | street | concat | fvt | perceiver");
    cmd.add_option("--mask", f.mask, "masking for both modalities: full | crop | inv_crop | rgbm");
    cmd.add_option("--mask-sat", f.mask_sat, "satellite masking");
    cmd.add_option("--mask-street", f.mask_street, "street masking");
    cmd.add_option("--seed", f.seed, "dataset and training seed");
    cmd.add_option("--out", f.out, "output directory");
    cmd.add_option("--epochs", f.epochs, "maximum epochs");
    cmd.add_flag("--overwrite", f.overwrite, "allow writing into a non-empty output directory");
    cmd.add_flag("--dataset-with-zero-views", f.zero_views, "force a sample without street views");
    cmd.allow_extras();
}

// Remaining arguments are generic `--key value` or `--key=value` overrides;
// a key with no value is a boolean switch.
std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& args) {
    std::vector<std::pair<std::string, std::string>> out;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const std::string& a = args[i];
        if (a.rfind("--", 0) != 0 || a.size() == 2) {
            throw lf::ConfigurationError("unexpected argument '" + a + "'");
        }
        std::string key = a.substr(2);
        const auto eq = key.find('=');
        if (eq != std::string::npos) {
            out.emplace_back(key.substr(0, eq), key.substr(eq + 1));
        } else if (i + 1 < args.size() && args[i + 1].rfind("--", 0) != 0) {
            out.emplace_back(key, args[++i]);
        } else {
            out.emplace_back(key, "true");
        }
    }
    return out;
}

lf::ExperimentConfig build_config(const Flags& f, const std::vector<std::string>& extras) {
    lf::ExperimentConfig cfg;
    if (f.config) lf::load_config_file(cfg, *f.config);
    auto set = [&](const char* key, const std::optional<std::string>& v) {
        if (v) lf::apply_setting(cfg, key, *v);
    };
    set("model", f.model);
    set("mask", f.mask);
    set("mask_sat", f.mask_sat);
    set("mask_street", f.mask_street);
    set("seed", f.seed);
    set("out", f.out);
    set("epochs", f.epochs);
    if (f.overwrite) cfg.overwrite = true;
    if (f.zero_views) cfg.dataset_with_zero_views = true;
    for (const auto& [k, v] : parse_overrides(extras)) lf::apply_setting(cfg, k, v);
    return cfg;
}

std::size_t thread_budget(bool parallel) {
    std::size_t n = parallel ? std::max(1u, std::thread::hardware_concurrency()) : 1;
    if (const char* env = std::getenv("LATENTFUSE_THREADS")) {
        char* end = nullptr;
        const unsigned long cap = std::strtoul(env, &end, 10);
        if (end == env || *end != '\0' || cap == 0) {
            throw lf::ConfigurationError("LATENTFUSE_THREADS must be a positive integer");
        }
        n = std::min<std::size_t>(n, cap);
    }
    return n;
}

int cmd_run(const Flags& f, const std::vector<std::string>& extras) {
    lf::ExperimentConfig cfg = build_config(f, extras);
    if (f.sweep) cfg.sweep = *f.sweep;
    if (f.parallel) cfg.parallel = true;
    if (!cfg.sweep.empty()) {
        const auto cells = lf::run_sweep(cfg, thread_budget(cfg.parallel));
        std::cout << lf::sweep_heatmap(cells);
        bool diverged = false;
        for (const auto& c : cells) {
            if (c.diverged) {
                std::cerr << "cell " << c.index << " diverged\n";
                diverged = true;
            }
        }
        return diverged ? kDivergence : kOk;
    }
    const auto result = lf::run_experiment(cfg);
    std::cout << lf::report_json(result.report);
    if (result.fit.diverged) {
        std::cerr << "latentfuse: training diverged: " << result.fit.divergence << '\n';
        return kDivergence;
    }
    return kOk;
}

int cmd_generate(const Flags& f, const std::vector<std::string>& extras) {
    lf::ExperimentConfig cfg = build_config(f, extras);
    if (cfg.out.empty()) throw lf::ConfigurationError("generate: --out is required");
    lf::finalize(cfg);
    lf::prepare_output_dir(cfg.out, cfg.overwrite);
    const auto samples = lf::generate_dataset(cfg.generator, cfg.dataset_size, cfg.seed, cfg.dataset_with_zero_views);
    lf::write_dataset(cfg.out, samples);
    std::cout << "wrote " << samples.size() << " samples to " << cfg.out << '\n';
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"latentfuse: multi-view building attribute experiments"};
    app.require_subcommand(1);

    Flags run_flags;
    auto* run = app.add_subcommand("run", "train and evaluate one model, or a sweep");
    add_common(*run, run_flags);
    run->add_option("--sweep", run_flags.sweep, "grid, e.g. \"nz=1,8,32;dz=8,32,128\"");
    run->add_flag("--parallel", run_flags.parallel, "run sweep cells concurrently");

    Flags gen_flags;
    auto* gen = app.add_subcommand("generate", "write a synthetic dataset to --out");
    add_common(*gen, gen_flags);

    std::vector<std::string> reports;
    auto* cmp = app.add_subcommand("compare", "AP deltas of candidate reports against the first report");
    cmp->add_option("reports", reports, "report.json files, baseline first")->required()->expected(2, -1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kConfig;
    }

    try {
        if (*run) return cmd_run(run_flags, run->remaining());
        if (*gen) return cmd_generate(gen_flags, gen->remaining());
        std::vector<std::filesystem::path> paths(reports.begin(), reports.end());
        std::cout << lf::compare_reports(paths);
        return kOk;
    } catch (const lf::ContractError& e) {
        std::cerr << "latentfuse: contract violation: " << e.what() << '\n';
        return kContract;
    } catch (const lf::DimensionError& e) {
        std::cerr << "latentfuse: contract violation: " << e.what() << '\n';
        return kContract;
    } catch (const lf::DivergenceError& e) {
        std::cerr << "latentfuse: divergence: " << e.what() << '\n';
        return kDivergence;
    } catch (const lf::NonFiniteError& e) {
        std::cerr << "latentfuse: divergence: " << e.what() << '\n';
        return kDivergence;
    } catch (const lf::Error& e) {
        std::cerr << "latentfuse: error: " << e.what() << '\n';
        return kConfig;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "latentfuse: error: " << e.what() << '\n';
        return kConfig;
    }
}
