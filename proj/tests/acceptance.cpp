// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
// failure.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "latentfuse/baselines.hpp"
#include "latentfuse/experiment.hpp"
#include "latentfuse/masking.hpp"
#include "latentfuse/metrics.hpp"
#include "latentfuse/perceiver.hpp"
#include "latentfuse/synthetic.hpp"
#include "latentfuse/training.hpp"
#include "support/ap_oracle.hpp"
#include "support/fixtures.hpp"
#include "support/grad_cases.hpp"
#include "support/projection_oracle.hpp"

using namespace latentfuse;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

// Records the first few failures; the rest only flip the verdict.
class Check {
public:
    void fail(const std::string& what) {
        if (failures_++ < 5) notes_ << "  ! " << what << '\n';
    }
    void expect(bool ok, const std::string& what) {
        if (!ok) fail(what);
    }
    Outcome done(std::string summary) const {
        std::cout << notes_.str();
        if (failures_ > 5) std::cout << "  ! ... " << failures_ - 5 << " more\n";
        return {failures_ == 0, std::move(summary)};
    }

private:
    std::size_t failures_ = 0;
    std::ostringstream notes_;
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

// --- 1. gradients -----------------------------------------------------------

Outcome gradients() {
    Check check;
    const std::size_t seeds = 100;
    double worst = 0.0;
    std::size_t probes = 0;
    auto run = [&](const std::vector<lftest::GradCase>& cases) {
        for (const auto& c : cases)
            for (std::uint64_t s = 0; s < seeds; ++s) {
                const auto r = c.run(s);
                probes += r.checked;
                worst = std::max(worst, r.max_rel_error);
                check.expect(r.max_rel_error < 1e-5, c.name + " seed " + std::to_string(s) + ": " + r.worst);
            }
    };
    run(lftest::op_cases());
    run(lftest::model_cases(lftest::Probe{6, 0}));
    return check.done(std::to_string(lftest::op_cases().size()) + " ops + 4 model graphs x 100 seeds, " +
                      std::to_string(probes) + " derivatives, max rel err " + fmt("%.2e", worst));
}

// --- 2. variable N ----------------------------------------------------------

Outcome variable_n() {
    Check check;
    const TokenizerConfig tok{32, 8, 4, 64};
    PerceiverClassifier<double> perceiver(1, tok, PerceiverConfig{});
    ConcatModel<double> concat(2, tok, PoolingMode::max);
    FvtModel<double> fvt(3, tok, FVTConfig{});
    SplitMix64 rng(7);
    const Shape el{1, 6}, mat{1, 7};
    const Shape latents{1, perceiver.fusion().config().num_latents, perceiver.fusion().config().latent_dim};
    for (std::size_t n = 0; n <= kMaxStreetViews; ++n) {
        const auto batch = lftest::batch_of<double>(lftest::random_sample(rng, n, 4, 32), tok);
        const auto n_str = "N=" + std::to_string(n);
        const auto p = perceiver.forward_with_trace(batch);
        check.expect(p.logits.elements.shape() == el && p.logits.materials.shape() == mat, "perceiver shape " + n_str);
        check.expect(p.encoded_latents.shape() == latents && p.refined_latents.shape() == latents,
                     "perceiver latent size " + n_str);
        const auto c = concat.forward(batch);
        check.expect(c.elements.shape() == el && c.materials.shape() == mat, "concat shape " + n_str);
        const auto f = fvt.forward(batch);
        check.expect(f.elements.shape() == el && f.materials.shape() == mat, "fvt shape " + n_str);
    }
    return check.done("N = 0..8 for perceiver, concat, fvt; latent array " + std::to_string(latents[1]) + "x" +
                      std::to_string(latents[2]) + " for every N");
}

// --- 3. permutations --------------------------------------------------------

bool logits_near(const HeadLogits<double>& a, const HeadLogits<double>& b, double tol) {
    for (std::size_t i = 0; i < a.elements.size(); ++i)
        if (std::abs(a.elements.data()[i] - b.elements.data()[i]) > tol) return false;
    for (std::size_t i = 0; i < a.materials.size(); ++i)
        if (std::abs(a.materials.data()[i] - b.materials.data()[i]) > tol) return false;
    return true;
}

Outcome permutations() {
    Check check;
    SplitMix64 rng(3);
    std::size_t pool_perms = 0;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Tensor<double>> v;
        for (int i = 0; i < 5; ++i) v.push_back(lftest::random_tensor<double>(rng, {16}));
        const auto max0 = pool_views<double>(v, PoolingMode::max);
        const auto mean0 = pool_views<double>(v, PoolingMode::mean);
        std::vector<int> idx = {0, 1, 2, 3, 4};
        do {
            std::vector<Tensor<double>> p;
            for (int i : idx) p.push_back(v[i]);
            const auto mx = pool_views<double>(p, PoolingMode::max);
            const auto mn = pool_views<double>(p, PoolingMode::mean);
            check.expect(std::equal(mx.data().begin(), mx.data().end(), max0.data().begin()), "max pooling");
            check.expect(std::equal(mn.data().begin(), mn.data().end(), mean0.data().begin()), "mean pooling");
            ++pool_perms;
        } while (std::next_permutation(idx.begin(), idx.end()));
    }

    const TokenizerConfig tok{32, 8, 4, 16};
    const double tol = 1e-12;
    std::size_t fvt_perms = 0, perceiver_perms = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        FvtModel<double> fvt(seed, tok, FVTConfig{2, 8, 4});
        PerceiverClassifier<double> perceiver(seed, tok, lftest::toy_perceiver());
        const auto sample = lftest::random_sample(rng, 4, 4, 32);
        const auto fvt_base = fvt.forward(lftest::batch_of<double>(sample, tok));
        const auto perceiver_base = perceiver.forward(lftest::batch_of<double>(sample, tok));
        std::vector<std::size_t> order = {1, 2, 3, 4};
        do {
            PreparedSample permuted = sample;
            for (std::size_t k = 0; k < 4; ++k) permuted.views[k + 1] = sample.views[order[k]];
            const auto pb = lftest::batch_of<double>(permuted, tok);
            check.expect(logits_near(fvt.forward(pb), fvt_base, tol), "fvt street order seed " + std::to_string(seed));
            ++fvt_perms;

            // Each moved image keeps its original view embedding.
            TokenSequence<double> seq;
            const std::size_t p = tok.patches_per_view();
            seq.tokens = reshape(perceiver.tokenizer().project(pb.all_patches()), {1, 5 * p, tok.dim});
            seq.meta = token_layout(4, tok.image_size / tok.patch_size);
            for (auto& m : seq.meta)
                if (m.view_index > 0) m.view_index = order[m.view_index - 1];
            const auto out = perceiver.fusion().forward(augment_tokens(seq, perceiver.embeddings()));
            check.expect(logits_near(out.logits, perceiver_base, tol), "perceiver consistent permutation seed " +
                                                                          std::to_string(seed));
            ++perceiver_perms;
        } while (std::next_permutation(order.begin(), order.end()));
    }
    return check.done(std::to_string(pool_perms) + " pooling permutations exact; " + std::to_string(fvt_perms) +
                      " fvt and " + std::to_string(perceiver_perms) + " perceiver permutations within 1e-12");
}

// --- 4. AP oracle -----------------------------------------------------------

Outcome ap_oracle() {
    Check check;
    SplitMix64 rng(4);
    std::size_t cases = 0;
    double worst = 0.0;
    for (std::size_t n = 1; n <= 8; ++n)
        for (std::uint32_t bits = 0; bits < (1u << n); ++bits) {
            std::vector<std::uint8_t> labels(n);
            for (std::size_t i = 0; i < n; ++i) labels[i] = (bits >> i) & 1;
            for (int draw = 0; draw < 50; ++draw) {
                const auto scores = lftest::random_scores(rng, n);
                const auto got = average_precision(scores, labels);
                const auto want = lftest::brute_force_ap(scores, labels);
                ++cases;
                if (got.has_value() != want.has_value()) {
                    check.fail("definedness differs at n=" + std::to_string(n));
                    continue;
                }
                if (!got) continue;
                worst = std::max(worst, std::abs(*got - *want));
                check.expect(std::abs(*got - *want) <= 1e-15, "n=" + std::to_string(n) + " bits=" + std::to_string(bits));
            }
        }
    return check.done(std::to_string(cases) + " score vectors, max |AP - exact| " + fmt("%.1e", worst));
}

// --- 5. masking -------------------------------------------------------------

Outcome masking() {
    Check check;
    SplitMix64 rng(5);
    for (int i = 0; i < 1000; ++i) {
        const std::size_t side = 4 + rng.below(29);
        const auto img = lftest::random_image(rng, 3, side);
        const auto mask = lftest::random_mask(rng, side, rng.uniform());
        const auto full = apply_masking(img, mask, MaskingStrategy::full);
        const auto crop = apply_masking(img, mask, MaskingStrategy::crop);
        const auto inv = apply_masking(img, mask, MaskingStrategy::inv_crop);
        const auto rgbm = apply_masking(img, mask, MaskingStrategy::rgbm);
        check.expect(full == img, "full is identity");
        bool sum_ok = true, rgbm_ok = rgbm.channels == 4;
        for (std::size_t p = 0; p < img.pixels.size(); ++p) sum_ok &= crop.pixels[p] + inv.pixels[p] == full.pixels[p];
        for (std::size_t y = 0; y < side && rgbm_ok; ++y)
            for (std::size_t x = 0; x < side; ++x) {
                for (std::size_t c = 0; c < 3; ++c) rgbm_ok &= rgbm.at(c, y, x) == img.at(c, y, x);
                rgbm_ok &= rgbm.at(3, y, x) == float(mask.at(y, x));
            }
        check.expect(sum_ok, "crop + inv_crop != full, pair " + std::to_string(i));
        check.expect(rgbm_ok, "rgbm channels, pair " + std::to_string(i));
    }
    return check.done("1000 image/mask pairs: crop + inv_crop = full, rgbm = image + mask channel, exact");
}

// --- 6. projection ----------------------------------------------------------

Outcome projection() {
    Check check;
    SplitMix64 rng(6);
    std::size_t masks = 0, partial = 0, agree = 0, pixels = 0;
    double worst = 1.0;
    for (int scene = 0; scene < 200; ++scene) {
        auto spec = lftest::random_oracle_scene(rng);
        for (std::size_t cam = 0; cam < spec.cameras.size(); ++cam) {
            const auto mask = project_footprint_mask(spec, cam, 48);
            const double a = lftest::oracle_agreement(spec, cam, mask);
            ++masks;
            partial += mask.coverage() > 0.0 && mask.coverage() < 1.0;
            agree += std::size_t(std::llround(a * double(mask.values.size())));
            pixels += mask.values.size();
            worst = std::min(worst, a);
            check.expect(a >= 0.995, "scene " + std::to_string(scene) + " camera " + std::to_string(cam) + ": " +
                                         fmt("%.4f", a));
        }

        // Looking straight away from the building: the prism is behind the camera.
        Vec2 centroid;
        double radius = 0.0;
        for (const auto& p : spec.footprint) {
            centroid.x += p.x / double(spec.footprint.size());
            centroid.y += p.y / double(spec.footprint.size());
        }
        for (const auto& p : spec.footprint) radius = std::max(radius, std::hypot(p.x - centroid.x, p.y - centroid.y));
        const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double dist = radius + rng.uniform(0.5, 10.0);
        CameraPose away;
        away.position = {centroid.x + dist * std::cos(theta), centroid.y + dist * std::sin(theta), rng.uniform(0.5, 8.0)};
        away.yaw = theta;
        away.focal = rng.uniform(14.0, 40.0);
        spec.cameras = {away};
        check.expect(project_footprint_mask(spec, 0, 48).coverage() == 0.0, "behind-camera mask not empty, scene " +
                                                                                 std::to_string(scene));
    }
    check.expect(partial * 3 > masks, "too few partially covered masks");
    return check.done(std::to_string(masks) + " masks at 48 px (" + std::to_string(partial) + " partial), pooled " +
                      fmt("%.5f", double(agree) / double(pixels)) + ", worst " + fmt("%.4f", worst) +
                      "; 200 behind-camera masks empty");
}

// --- 7. visibility ----------------------------------------------------------

Outcome visibility() {
    Check check;
    std::vector<std::pair<Image, BinaryMask>> ladder;
    for (std::size_t count = 0; count <= 100; ++count) {
        BinaryMask m(10, 10);
        std::fill_n(m.values.begin(), count, 1);
        check.expect(passes_visibility(m, 0.20) == (count >= 20), "rung " + std::to_string(count));
        ladder.emplace_back(Image(3, 10, 10, float(count)), m);
    }
    const auto kept = visibility_filter(ladder, 0.20);
    check.expect(kept.size() == 81, "kept " + std::to_string(kept.size()) + " of 101");
    for (std::size_t i = 0; i < kept.size(); ++i)
        check.expect(kept[i].first.pixels[0] == float(20 + i), "order at " + std::to_string(i));
    return check.done("coverage ladder 0..100%: kept exactly the 81 rungs >= 20%, order preserved");
}

// --- 8. schedule and optimizer ----------------------------------------------

Outcome schedule_and_optimizer() {
    Check check;
    const Schedule s{5, 50, 5e-5, 5e-4};
    double worst_lr = 0.0;
    for (std::size_t step = 0; step < 200; ++step)
        for (auto g : {ParamGroup::backbone, ParamGroup::heads}) {
            const double base = g == ParamGroup::backbone ? 5e-5 : 5e-4;
            const double want =
                step < 5 ? base * double(step + 1) / 5.0
                         : base * 0.5 * (1.0 + std::cos(std::numbers::pi * double(std::min<std::size_t>(step - 5, 50)) / 50.0));
            const double err = std::abs(lr_at(step, s, g) - want);
            worst_lr = std::max(worst_lr, err);
            check.expect(err <= 1e-12, "lr at step " + std::to_string(step));
        }

    SplitMix64 rng(8);
    double worst_adam = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> x(8);
        for (auto& v : x) v = rng.uniform(-1, 1);
        ParameterList<double> params;
        params.add("w", Tensor<double>({x.size()}, x, true), ParamGroup::heads);
        AdamW<double> opt(params, AdamWConfig{0.9, 0.999, 1e-8, 0.0});
        std::vector<double> m(x.size(), 0.0), v(x.size(), 0.0);
        for (int t = 1; t <= 10; ++t) {
            std::vector<double> g(x.size());
            for (auto& gi : g) gi = rng.uniform(-3, 3);
            const double lr = lr_at(std::size_t(t - 1), s, ParamGroup::heads);
            params.zero_grad();
            {
                Tape<double> tape;
                const auto w = reshape(params.items()[0].tensor, Shape{1, x.size()});
                tape.backward(sum(matmul(w, Tensor<double>({x.size(), 1}, g))));
            }
            opt.step(rates_at(std::size_t(t - 1), s));
            for (std::size_t i = 0; i < x.size(); ++i) {
                m[i] = 0.9 * m[i] + 0.1 * g[i];
                v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
                const double mh = m[i] / (1 - std::pow(0.9, t)), vh = v[i] / (1 - std::pow(0.999, t));
                x[i] -= lr * mh / (std::sqrt(vh) + 1e-8);
            }
            const auto w = params.flatten();
            for (std::size_t i = 0; i < x.size(); ++i) {
                worst_adam = std::max(worst_adam, std::abs(w[i] - x[i]));
                check.expect(std::abs(w[i] - x[i]) <= 1e-12, "adam trial " + std::to_string(trial) + " step " +
                                                                  std::to_string(t));
            }
        }
    }
    return check.done("lr_at over 200 steps max err " + fmt("%.1e", worst_lr) + "; AdamW(wd=0) vs Adam, 20 x 10 steps, max err " +
                      fmt("%.1e", worst_adam));
}

// --- 9. bucketing -----------------------------------------------------------

Outcome bucketing() {
    Check check;
    SplitMix64 rng(9);
    const TokenizerConfig tok{8, 4, 1, 4};
    // Exact in float and inside the [0, 1] pixel range; never zero.
    auto marker = [](std::size_t i) { return float(i + 1) / 16384.0f; };
    std::vector<PreparedSample> samples(10000);
    std::vector<std::size_t> counts(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        counts[i] = rng.below(kMaxStreetViews + 1);
        for (std::size_t v = 0; v <= counts[i]; ++v) samples[i].views.emplace_back(1, 8, 8, marker(i));
    }
    const auto batches = bucket_batches(counts, 16, 9);
    std::vector<std::size_t> seen;
    for (const auto& b : batches) {
        check.expect(!b.empty() && b.size() <= 16, "batch size " + std::to_string(b.size()));
        const std::size_t n = counts[b.front()];
        bool same = true;
        for (auto i : b) same &= counts[i] == n;
        check.expect(same, "mixed N in a batch");
        std::vector<const PreparedSample*> ptrs;
        for (auto i : b) ptrs.push_back(&samples[i]);
        const auto batch = make_batch<float>(ptrs, tok);
        // Every slot holds a real view carrying its sample's marker.
        const std::size_t per_sample = (n + 1) * tok.patches_per_view() * tok.patch_dim();
        bool no_padding = batch.street_views == n && batch.patches.size() == b.size() * per_sample;
        for (std::size_t j = 0; j < b.size() && no_padding; ++j)
            for (std::size_t k = 0; k < per_sample; ++k) no_padding &= batch.patches[j * per_sample + k] == marker(b[j]);
        check.expect(no_padding, "padded batch at N=" + std::to_string(n));
        seen.insert(seen.end(), b.begin(), b.end());
    }
    std::sort(seen.begin(), seen.end());
    bool conserved = seen.size() == samples.size();
    for (std::size_t i = 0; i < seen.size() && conserved; ++i) conserved &= seen[i] == i;
    check.expect(conserved, "index multiset not conserved");
    return check.done("10000 samples in " + std::to_string(batches.size()) +
                      " batches: N-homogeneous, every sample exactly once, no padding");
}

// --- 10-12. directional experiments ------------------------------------------

ExperimentConfig experiment(std::uint64_t seed, const std::vector<std::pair<std::string, std::string>>& settings) {
    ExperimentConfig c;
    const std::vector<std::pair<std::string, std::string>> common = {
        {"lr_backbone", "1e-3"}, {"lr_heads", "1e-3"}, {"t_max", "100000"}};
    for (const auto& [k, v] : common) apply_setting(c, k, v);
    for (const auto& [k, v] : settings) apply_setting(c, k, v);
    c.seed = seed;
    finalize(c);
    return c;
}

std::vector<PreparedSample> with_street_views(const std::vector<PreparedSample>& samples) {
    std::vector<PreparedSample> out;
    for (const auto& s : samples)
        if (s.views.size() > 1) out.push_back(s);
    return out;
}

Outcome fusion_gain() {
    Check check;
    std::size_t fusion_wins = 0, satellite_wins = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        std::array<EvalReport, 3> r;
        const std::array<std::pair<const char*, const char*>, 3> models = {
            {{"satellite", "30"}, {"street", "15"}, {"perceiver", "6"}}};
        std::vector<PreparedSample> test;
        for (std::size_t m = 0; m < 3; ++m) {
            const auto config = experiment(seed, {{"dataset_size", "2350"}, {"model", models[m].first},
                                                  {"epochs", models[m].second}});
            const auto data = prepare_data(config);
            const auto run = run_experiment(config, &data);
            if (m == 0) test = with_street_views(data.test);
            r[m] = evaluate(*run.model, std::span<const PreparedSample>(test));
        }
        auto gain = [&](std::size_t a, std::size_t b, std::size_t c) { return r[a].ap[c].value_or(0) - r[b].ap[c].value_or(0); };
        const double dormer = gain(2, 0, kDormer), slate = gain(2, 0, kSlate);
        const double skylight = gain(0, 1, kSkylight), ext = gain(0, 1, kExternalInstallations);
        const bool fusion = dormer >= 0.10 && slate >= 0.10;
        const bool satellite = skylight >= 0.10 && ext >= 0.10;
        fusion_wins += fusion;
        satellite_wins += satellite;
        std::printf("  seed %2llu  perceiver-satellite: dormer %+.3f slate %+.3f  satellite-street: skylight %+.3f "
                    "external %+.3f\n",
                    (unsigned long long)seed, dormer, slate, skylight, ext);
        std::fflush(stdout);
    }
    check.expect(fusion_wins >= 8, "perceiver gain on street-only classes in " + std::to_string(fusion_wins) + "/10");
    check.expect(satellite_wins >= 8, "satellite gain on satellite-only classes in " + std::to_string(satellite_wins) + "/10");
    return check.done("fusion >= +0.10 on dormer and slate in " + std::to_string(fusion_wins) +
                      "/10 seeds; satellite >= +0.10 on skylight and external in " + std::to_string(satellite_wins) + "/10");
}

Outcome rgbm_direction() {
    Check check;
    std::size_t wins = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        std::array<double, 2> macro{};
        const std::array<const char*, 2> masks = {"rgbm", "crop"};
        for (std::size_t m = 0; m < 2; ++m) {
            const auto config = experiment(seed, {{"dataset_size", "1200"}, {"model", "satellite"}, {"epochs", "30"},
                                                  {"variant", "context_signal"}, {"mask", masks[m]}});
            macro[m] = run_experiment(config).report.mean_map();
        }
        wins += macro[0] >= macro[1];
        std::printf("  seed %2llu  rgbm %.3f  crop %.3f\n", (unsigned long long)seed, macro[0], macro[1]);
        std::fflush(stdout);
    }
    check.expect(wins >= 8, "rgbm >= crop in " + std::to_string(wins) + "/10");
    return check.done("RGB-M macro mAP >= crop in " + std::to_string(wins) + "/10 seeds on the context-signal variant");
}

Outcome latent_sweep() {
    Check check;
    std::size_t wins = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto config = experiment(seed, {{"dataset_size", "1000"}, {"model", "perceiver"}, {"epochs", "3"}});
        config.sweep = "nz=1,8,32;dz=8,32,128";
        const auto cells = run_sweep(config);
        std::array<std::array<double, 3>, 3> grid{};  // [nz][dz]
        for (const auto& cell : cells) grid[cell.index / 3][cell.index % 3] = cell.report.mean_map();
        double grand = 0.0;
        for (const auto& row : grid)
            for (double v : row) grand += v / 9.0;
        double ss_nz = 0.0, ss_dz = 0.0;
        for (std::size_t i = 0; i < 3; ++i) {
            double row = 0.0, col = 0.0;
            for (std::size_t j = 0; j < 3; ++j) {
                row += grid[i][j] / 3.0;
                col += grid[j][i] / 3.0;
            }
            ss_nz += 3.0 * (row - grand) * (row - grand);
            ss_dz += 3.0 * (col - grand) * (col - grand);
        }
        wins += ss_dz > ss_nz;
        std::printf("  seed %2llu  SS(D_z) %.5f  SS(N_z) %.5f\n", (unsigned long long)seed, ss_dz, ss_nz);
        std::fflush(stdout);
    }
    check.expect(wins >= 7, "D_z axis dominates in " + std::to_string(wins) + "/10");
    return check.done("D_z sum of squares exceeds N_z in " + std::to_string(wins) + "/10 seeds");
}

// --- 13. determinism --------------------------------------------------------

int run_cli(const std::string& args) {
    const std::string cmd = std::string(LATENTFUSE_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism() {
    Check check;
    const auto root = fs::temp_directory_path() / "latentfuse_acceptance";
    fs::remove_all(root);
    const std::vector<std::pair<std::string, std::string>> runs = {
        {"perceiver", "--model perceiver --seed 11 --dataset_size 300 --epochs 3"},
        {"fvt", "--model fvt --seed 12 --dataset_size 300 --epochs 3"},
        {"street", "--model street --seed 13 --dataset_size 300 --epochs 3 --pooling attention"},
        {"sweep", "--model perceiver --seed 14 --dataset_size 200 --epochs 2 --sweep \"nz=2,4;dz=8,16\" --parallel"},
    };
    std::size_t files = 0;
    for (const auto& [name, args] : runs) {
        const auto a = root / (name + "_a"), b = root / (name + "_b");
        check.expect(run_cli("run " + args + " --out " + a.string()) == 0, name + " run a failed");
        check.expect(run_cli("run " + args + " --out " + b.string()) == 0, name + " run b failed");
        std::set<fs::path> rel;
        for (const auto& dir : {a, b})
            if (fs::exists(dir))
                for (const auto& e : fs::recursive_directory_iterator(dir))
                    if (e.is_regular_file()) rel.insert(fs::relative(e.path(), dir));
        check.expect(rel.count("report.json") || rel.count("cell_000/report.json"), name + ": no report.json");
        for (const auto& r : rel) {
            ++files;
            check.expect(fs::exists(a / r) && fs::exists(b / r) && slurp(a / r) == slurp(b / r),
                         name + ": " + r.string() + " differs");
        }
    }
    fs::remove_all(root);
    return check.done("4 CLI configurations run twice: " + std::to_string(files) + " artifacts byte-identical");
}

} // namespace

// Optional arguments select criteria by number; default is all of them.
int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    struct Criterion {
        int id;
        const char* name;
        double cpu_budget;  // seconds
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "gradient suite", 120, gradients},
        {2, "variable-N contract", 10, variable_n},
        {3, "permutation properties", 30, permutations},
        {4, "AP oracle", 30, ap_oracle},
        {5, "masking algebra", 10, masking},
        {6, "projection oracle", 60, projection},
        {7, "visibility filter", 1, visibility},
        {8, "schedule and optimizer", 5, schedule_and_optimizer},
        {9, "bucketing", 5, bucketing},
        {10, "cross-modal fusion gain", 900, fusion_gain},
        {11, "RGB-M direction", 900, rgbm_direction},
        {12, "latent sweep shape", 2700, latent_sweep},
        {13, "determinism", 0, determinism},
    };
    int failed = 0, ran = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && !only.count(c.id)) continue;
        ++ran;
        std::printf("criterion %d: %s\n", c.id, c.name);
        std::fflush(stdout);
        const std::clock_t cpu0 = std::clock();
        const auto wall0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double cpu = double(std::clock() - cpu0) / CLOCKS_PER_SEC;
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
        std::string timing = fmt("%.1fs cpu", cpu) + fmt(", %.1fs wall", wall);
        if (c.cpu_budget > 0) {
            timing += fmt(", budget %.0fs", c.cpu_budget);
            if (cpu > c.cpu_budget) {
                o.pass = false;
                timing += " EXCEEDED";
            }
        }
        std::printf("%s criterion %d: %s: %s [%s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                    timing.c_str());
        std::fflush(stdout);
        failed += !o.pass;
    }
    std::printf("%d of %d criteria passed\n", ran - failed, ran);
    return failed == 0 ? 0 : 1;
}
