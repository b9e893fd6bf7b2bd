#include "latentfuse/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <unordered_map>

#include "latentfuse/errors.hpp"
#include "latentfuse/rng.hpp"

namespace latentfuse {

namespace {

constexpr std::size_t kCell = 8;
constexpr double kCameraHeight = 1.6;

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Andrew's monotone chain, counter-clockwise, collinear points dropped.
std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
    std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    pts.erase(std::unique(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) { return a.x == b.x && a.y == b.y; }),
              pts.end());
    if (pts.size() < 3) return pts;
    std::vector<Vec2> hull(2 * pts.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
        while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

// Inclusive point-in-convex-polygon for a counter-clockwise polygon.
bool inside_convex(std::span<const Vec2> poly, const Vec2& p) {
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (cross(poly[i], poly[(i + 1) % n], p) < 0) return false;
    }
    return true;
}

double polygon_area(std::span<const Vec2> poly) {
    double a = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const auto& p = poly[i];
        const auto& q = poly[(i + 1) % poly.size()];
        a += p.x * q.y - q.x * p.y;
    }
    return 0.5 * a;
}

BinaryMask rasterize(std::span<const Vec2> hull, std::size_t size) {
    BinaryMask mask(size, size);
    if (hull.size() < 3) return mask;
    for (std::size_t i = 0; i < size; ++i) {
        for (std::size_t j = 0; j < size; ++j) {
            mask.at(i, j) = inside_convex(hull, Vec2{double(j) + 0.5, double(i) + 0.5}) ? 1 : 0;
        }
    }
    return mask;
}

// Coverage of each patch cell, cells in row-major order.
std::vector<double> cell_coverage(const BinaryMask& mask) {
    const std::size_t side = mask.height / kCell;
    std::vector<double> cov(side * side, 0.0);
    for (std::size_t y = 0; y < mask.height; ++y)
        for (std::size_t x = 0; x < mask.width; ++x) cov[(y / kCell) * side + x / kCell] += mask.at(y, x);
    for (auto& c : cov) c /= double(kCell * kCell);
    return cov;
}

// Cell indices by coverage, descending (ascending when `lowest`), ties by index.
std::vector<std::size_t> ranked_cells(const BinaryMask& mask, bool lowest) {
    const auto cov = cell_coverage(mask);
    std::vector<std::size_t> order(cov.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return lowest ? cov[a] < cov[b] : cov[a] > cov[b]; });
    return order;
}

void add_texture(Image& img, const BinaryMask& mask, std::size_t cls, float amplitude) {
    const auto& pat = class_pattern(cls);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < img.height; ++y)
            for (std::size_t x = 0; x < img.width; ++x)
                if (mask.at(y, x)) img.at(c, y, x) += amplitude * pat[(c * kCell + y % kCell) * kCell + x % kCell];
}

// Paints the class pattern into one patch cell, on pixels whose mask value
// equals `where`.
void add_glyph(Image& img, const BinaryMask& mask, std::size_t cell, std::uint8_t where, std::size_t cls,
               float amplitude) {
    const auto& pat = class_pattern(cls);
    const std::size_t side = img.width / kCell;
    const std::size_t y0 = (cell / side) * kCell, x0 = (cell % side) * kCell;
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t dy = 0; dy < kCell; ++dy)
            for (std::size_t dx = 0; dx < kCell; ++dx)
                if (mask.at(y0 + dy, x0 + dx) == where)
                    img.at(c, y0 + dy, x0 + dx) += amplitude * pat[(c * kCell + dy) * kCell + dx];
}

void finish(Image& img, SplitMix64& rng, double noise) {
    for (auto& v : img.pixels) {
        v += float(rng.uniform(-noise, noise));
        v = std::clamp(v, 0.0f, 1.0f);
    }
}

struct Palette {
    float r, g, b;
};

Palette random_palette(SplitMix64& rng, double lo, double hi, double tint) {
    const double base = rng.uniform(lo, hi);
    return Palette{float(base + rng.uniform(-tint, tint)), float(base + rng.uniform(-tint, tint)),
                   float(base + rng.uniform(-tint, tint))};
}

void fill(Image& img, std::size_t y, std::size_t x, const Palette& p) {
    img.at(0, y, x) = p.r;
    img.at(1, y, x) = p.g;
    img.at(2, y, x) = p.b;
}

bool in_satellite(Visibility v) { return v == Visibility::both || v == Visibility::satellite_only; }
bool in_street(Visibility v) { return v == Visibility::both || v == Visibility::street_only; }

Image render_satellite(const SceneSpec& spec, const BinaryMask& mask, const GeneratorConfig& config,
                       SplitMix64 rng) {
    const std::size_t s = config.image_size;
    Image img(3, s, s);
    const Palette ground = random_palette(rng, 0.25, 0.45, 0.06);
    const Palette roof = random_palette(rng, 0.4, 0.6, 0.05);
    for (std::size_t y = 0; y < s; ++y)
        for (std::size_t x = 0; x < s; ++x) fill(img, y, x, mask.at(y, x) ? roof : ground);

    const auto amp_t = float(config.texture_amplitude), amp_g = float(config.glyph_amplitude);
    for (std::size_t k = kElementClasses; k < kClassCount; ++k)
        if (spec.attributes[k] && in_satellite(config.visibility[k])) add_texture(img, mask, k, amp_t);

    const auto roof_cells = ranked_cells(mask, false);
    const auto context_cells = ranked_cells(mask, true);
    std::size_t placed = 0, placed_context = 0;
    for (std::size_t k = 0; k < kClassCount; ++k) {
        if (!spec.attributes[k]) continue;
        const Visibility v = config.visibility[k];
        if (k < kElementClasses && in_satellite(v)) {
            add_glyph(img, mask, roof_cells[placed++ % 2], 1, k, amp_g);
        } else if (v == Visibility::context_only) {
            add_glyph(img, mask, context_cells[placed_context++ % 4], 0, k, amp_g);
        }
    }
    finish(img, rng, config.noise);
    return img;
}

Image render_street(const SceneSpec& spec, const BinaryMask& mask, const CameraPose& camera,
                    const GeneratorConfig& config, const Palette& facade, SplitMix64 rng) {
    const std::size_t s = config.image_size;
    Image img(3, s, s);
    const Palette sky = {float(rng.uniform(0.55, 0.7)), float(rng.uniform(0.65, 0.8)), float(rng.uniform(0.8, 0.95))};
    const Palette ground = random_palette(rng, 0.25, 0.4, 0.04);
    const double horizon = camera.cy * double(s) / double(camera.image_size);
    for (std::size_t y = 0; y < s; ++y)
        for (std::size_t x = 0; x < s; ++x)
            fill(img, y, x, mask.at(y, x) ? facade : (double(y) + 0.5 < horizon ? sky : ground));

    const auto amp_t = float(config.texture_amplitude), amp_g = float(config.glyph_amplitude);
    for (std::size_t k = kElementClasses; k < kClassCount; ++k)
        if (spec.attributes[k] && in_street(config.visibility[k])) add_texture(img, mask, k, amp_t);
    const auto cells = ranked_cells(mask, false);
    std::size_t placed = 0;
    for (std::size_t k = 0; k < kElementClasses; ++k)
        if (spec.attributes[k] && in_street(config.visibility[k])) add_glyph(img, mask, cells[placed++ % 2], 1, k, amp_g);

    if (rng.bernoulli(config.occlusion_probability)) {
        const std::size_t w = 6 + rng.below(9), h = 6 + rng.below(9);
        const std::size_t x0 = rng.below(s - w + 1), y0 = rng.below(s - h + 1);
        const Palette occluder = random_palette(rng, 0.1, 0.9, 0.1);
        for (std::size_t y = y0; y < y0 + h; ++y)
            for (std::size_t x = x0; x < x0 + w; ++x) fill(img, y, x, occluder);
    }
    finish(img, rng, config.noise);
    return img;
}

std::vector<Vec2> random_footprint(SplitMix64& rng) {
    const std::size_t k = 4 + rng.below(4);
    const double a = rng.uniform(5.0, 12.0), b = rng.uniform(5.0, 12.0);
    const double phi = rng.uniform(0.0, std::numbers::pi);
    const Vec2 center{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
    const double step = 2.0 * std::numbers::pi / double(k);
    const double start = rng.uniform(0.0, step);
    std::vector<Vec2> poly;
    for (std::size_t i = 0; i < k; ++i) {
        const double t = start + double(i) * step + rng.uniform(-0.3, 0.3) * step;
        const double ex = a * std::cos(t), ey = b * std::sin(t);
        poly.push_back({center.x + ex * std::cos(phi) - ey * std::sin(phi),
                        center.y + ex * std::sin(phi) + ey * std::cos(phi)});
    }
    return poly;
}

std::size_t draw_view_count(SplitMix64& rng, const GeneratorConfig& config) {
    double u = rng.uniform();
    for (std::size_t n = 0; n < kViewCountBins; ++n) {
        if (u < config.view_count_pmf[n]) return n;
        u -= config.view_count_pmf[n];
    }
    return kViewCountBins - 1;
}

std::pair<SceneSpec, BuildingSample> generate(std::uint64_t seed, const GeneratorConfig& config,
                                              std::optional<std::size_t> forced_views) {
    config.validate();
    SplitMix64 root(seed);
    SplitMix64 shape_rng = root.fork();
    SplitMix64 label_rng = root.fork();
    SplitMix64 camera_rng = root.fork();
    SplitMix64 satellite_rng = root.fork();
    SplitMix64 street_rng = root.fork();

    SceneSpec spec;
    spec.footprint = random_footprint(shape_rng);
    spec.height = shape_rng.uniform(4.0, 12.0);
    for (std::size_t k = 0; k < kClassCount; ++k) spec.attributes[k] = label_rng.bernoulli(config.priors[k]) ? 1 : 0;

    BuildingSample sample;
    std::copy_n(spec.attributes.begin(), kElementClasses, sample.elements.begin());
    std::copy_n(spec.attributes.begin() + kElementClasses, kMaterialClasses, sample.materials.begin());
    sample.satellite_mask = satellite_mask(spec.footprint, config.ground_extent, config.image_size);
    sample.satellite = render_satellite(spec, sample.satellite_mask, config, satellite_rng);

    const std::size_t target = forced_views ? *forced_views : draw_view_count(camera_rng, config);
    Vec2 centroid;
    for (const auto& p : spec.footprint) {
        centroid.x += p.x / double(spec.footprint.size());
        centroid.y += p.y / double(spec.footprint.size());
    }
    double reach = 0.0;
    for (const auto& p : spec.footprint) reach = std::max(reach, std::hypot(p.x - centroid.x, p.y - centroid.y));

    std::vector<CameraPose> kept;
    std::vector<BinaryMask> masks;
    const std::size_t attempts = 3 * target + 2;
    for (std::size_t a = 0; a < attempts && kept.size() < target; ++a) {
        const double theta = camera_rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double dist = reach + camera_rng.uniform(3.0, 13.0);
        CameraPose cam;
        cam.position = {centroid.x + dist * std::cos(theta), centroid.y + dist * std::sin(theta), kCameraHeight};
        cam.yaw = std::atan2(centroid.y - cam.position.y, centroid.x - cam.position.x) + camera_rng.uniform(-0.35, 0.35);
        cam.focal = config.focal;
        cam.image_size = config.image_size;
        cam.cx = cam.cy = double(config.image_size) / 2.0;
        BinaryMask m = project_prism_mask(spec.footprint, spec.height, cam, config.image_size);
        if (passes_visibility(m, config.visibility_threshold)) {
            kept.push_back(cam);
            masks.push_back(std::move(m));
        }
    }

    const Palette facade = random_palette(street_rng, 0.35, 0.6, 0.06);
    for (std::size_t i = 0; i < kept.size(); ++i) {
        StreetView view;
        view.camera = kept[i];
        view.mask = std::move(masks[i]);
        view.image = render_street(spec, view.mask, kept[i], config, facade, street_rng.fork());
        sample.street.push_back(std::move(view));
    }
    spec.cameras = std::move(kept);
    return {std::move(spec), std::move(sample)};
}

} // namespace

std::array<double, kClassCount> default_priors() {
    std::array<double, kClassCount> p;
    p.fill(0.3);
    p[kThatch] = 0.1;
    p[kGlass] = 0.12;
    return p;
}

std::array<Visibility, kClassCount> default_visibility() {
    std::array<Visibility, kClassCount> v;
    v.fill(Visibility::both);
    v[kDormer] = Visibility::street_only;
    v[kSlate] = Visibility::street_only;
    v[kSkylight] = Visibility::satellite_only;
    v[kExternalInstallations] = Visibility::satellite_only;
    return v;
}

void GeneratorConfig::validate() const {
    for (std::size_t k = 0; k < kClassCount; ++k) {
        if (!(priors[k] >= 0.0 && priors[k] <= 1.0)) {
            throw ValidationError("generator: prior for " + std::string(kClassNames[k]) + " outside [0, 1]");
        }
    }
    double total = 0.0;
    for (double p : view_count_pmf) {
        if (!(p >= 0.0)) throw ValidationError("generator: negative street-view probability");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ValidationError("generator: street-view distribution must sum to 1");
    if (!(visibility_threshold >= 0.0 && visibility_threshold <= 1.0)) {
        throw ValidationError("generator: visibility threshold outside [0, 1]");
    }
    if (image_size == 0 || image_size % kCell != 0 || image_size / kCell < 2) {
        throw ValidationError("generator: image size must be a multiple of 8, at least 16");
    }
    if (!(focal > 0.0) || !(ground_extent > 0.0)) throw ValidationError("generator: focal and extent must be > 0");
    if (!(occlusion_probability >= 0.0 && occlusion_probability <= 1.0)) {
        throw ValidationError("generator: occlusion probability outside [0, 1]");
    }
}

GeneratorConfig GeneratorConfig::context_signal() {
    GeneratorConfig c;
    c.visibility[kRoofWindow] = Visibility::context_only;
    c.visibility[kChimney] = Visibility::context_only;
    c.visibility[kAluminium] = Visibility::context_only;
    return c;
}

const std::array<float, 192>& class_pattern(std::size_t class_id) {
    static const auto patterns = [] {
        std::array<std::array<float, 192>, kClassCount> out{};
        for (std::size_t k = 0; k < kClassCount; ++k) {
            SplitMix64 rng(0x7a77e54ULL + 7919ULL * k);
            for (std::size_t c = 0; c < 3; ++c) {
                // Exactly 32 of the 64 entries positive: zero mean per channel.
                std::array<float, 64> v;
                for (std::size_t i = 0; i < 64; ++i) v[i] = i < 32 ? 1.0f : -1.0f;
                rng.shuffle(std::span<float>(v));
                std::copy(v.begin(), v.end(), out[k].begin() + c * 64);
            }
        }
        return out;
    }();
    return patterns.at(class_id);
}

std::pair<SceneSpec, BuildingSample> generate_scene(std::uint64_t seed, const GeneratorConfig& config) {
    return generate(seed, config, std::nullopt);
}

std::pair<SceneSpec, BuildingSample> generate_scene(std::uint64_t seed, const std::array<double, kClassCount>& priors) {
    GeneratorConfig config;
    config.priors = priors;
    return generate(seed, config, std::nullopt);
}

Vec3 to_camera(const CameraPose& camera, const Vec3& world) {
    const double dx = world.x - camera.position.x;
    const double dy = world.y - camera.position.y;
    const double dz = world.z - camera.position.z;
    const double c = std::cos(camera.yaw), s = std::sin(camera.yaw);
    return Vec3{dx * s - dy * c, -dz, dx * c + dy * s};
}

BinaryMask project_prism_mask(std::span<const Vec2> footprint, double height, const CameraPose& camera,
                              std::size_t out_size) {
    if (!(camera.focal > 0.0)) throw ContractError("project_footprint_mask: focal length must be > 0");
    if (out_size == 0) throw ContractError("project_footprint_mask: output size must be > 0");
    const double scale = double(out_size) / double(camera.image_size);
    const double f = camera.focal * scale, cx = camera.cx * scale, cy = camera.cy * scale;

    const std::size_t k = footprint.size();
    std::vector<Vec3> v;
    v.reserve(2 * k);
    for (const auto& p : footprint) v.push_back(to_camera(camera, {p.x, p.y, 0.0}));
    for (const auto& p : footprint) v.push_back(to_camera(camera, {p.x, p.y, height}));

    std::vector<Vec3> kept;
    for (const auto& c : v)
        if (c.z >= kNearPlane) kept.push_back(c);
    auto clip_edge = [&](const Vec3& a, const Vec3& b) {
        if ((a.z - kNearPlane) * (b.z - kNearPlane) < 0.0) {
            const double t = (kNearPlane - a.z) / (b.z - a.z);
            kept.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), kNearPlane});
        }
    };
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = (i + 1) % k;
        clip_edge(v[i], v[j]);
        clip_edge(v[k + i], v[k + j]);
        clip_edge(v[i], v[k + i]);
    }

    std::vector<Vec2> projected;
    projected.reserve(kept.size());
    for (const auto& c : kept) projected.push_back({f * c.x / c.z + cx, f * c.y / c.z + cy});
    return rasterize(convex_hull(std::move(projected)), out_size);
}

BinaryMask project_footprint_mask(const SceneSpec& spec, std::size_t camera_index, std::size_t out_size) {
    if (camera_index >= spec.cameras.size()) {
        throw ContractError("project_footprint_mask: camera " + std::to_string(camera_index) + " of " +
                            std::to_string(spec.cameras.size()));
    }
    return project_prism_mask(spec.footprint, spec.height, spec.cameras[camera_index], out_size);
}

BinaryMask satellite_mask(std::span<const Vec2> footprint, double extent, std::size_t size) {
    std::vector<Vec2> poly(footprint.begin(), footprint.end());
    if (polygon_area(poly) < 0) std::reverse(poly.begin(), poly.end());
    BinaryMask mask(size, size);
    const double px = extent / double(size);
    for (std::size_t i = 0; i < size; ++i) {
        for (std::size_t j = 0; j < size; ++j) {
            const Vec2 p{-extent / 2 + (double(j) + 0.5) * px, extent / 2 - (double(i) + 0.5) * px};
            mask.at(i, j) = inside_convex(poly, p) ? 1 : 0;
        }
    }
    return mask;
}

bool passes_visibility(const BinaryMask& mask, double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw ValidationError("visibility threshold outside [0, 1]");
    return mask.coverage() >= threshold;
}

std::vector<std::pair<Image, BinaryMask>> visibility_filter(std::vector<std::pair<Image, BinaryMask>> pairs,
                                                            double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw ValidationError("visibility threshold outside [0, 1]");
    std::vector<std::pair<Image, BinaryMask>> out;
    for (auto& p : pairs)
        if (passes_visibility(p.second, threshold)) out.push_back(std::move(p));
    return out;
}

std::vector<BuildingSample> generate_dataset(const GeneratorConfig& config, std::size_t count, std::uint64_t seed,
                                             bool zero_view_first) {
    config.validate();
    SplitMix64 seeds(seed);
    std::vector<BuildingSample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint64_t s = seeds.next();
        auto forced = (zero_view_first && i == 0) ? std::optional<std::size_t>(0) : std::nullopt;
        auto [spec, sample] = generate(s, config, forced);
        sample.segment_id = "b" + std::to_string(seed) + "-" + std::to_string(i);
        out.push_back(std::move(sample));
    }
    return out;
}

SplitIndices split_indices(std::span<const std::string> segment_ids, const SplitFractions& fractions,
                           std::uint64_t seed) {
    const double sum = fractions.train + fractions.val + fractions.test;
    if (fractions.train < 0 || fractions.val < 0 || fractions.test < 0 || !(std::abs(sum - 1.0) <= 1e-9)) {
        throw ValidationError("split fractions must be non-negative and sum to 1 (got " + std::to_string(sum) + ")");
    }
    std::unordered_map<std::string, std::size_t> segment_of;
    std::vector<std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < segment_ids.size(); ++i) {
        auto [it, inserted] = segment_of.try_emplace(segment_ids[i], members.size());
        if (inserted) members.emplace_back();
        members[it->second].push_back(i);
    }
    const std::size_t n = members.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    SplitMix64 rng(seed);
    rng.shuffle(std::span<std::size_t>(order));

    const std::size_t n_train = std::min(n, std::size_t(std::llround(fractions.train * double(n))));
    const std::size_t n_val = std::min(n - n_train, std::size_t(std::llround(fractions.val * double(n))));
    SplitIndices out;
    for (std::size_t r = 0; r < n; ++r) {
        auto& dst = r < n_train ? out.train : (r < n_train + n_val ? out.val : out.test);
        for (std::size_t i : members[order[r]]) dst.push_back(i);
    }
    return out;
}

DatasetSplit split_dataset(std::span<const BuildingSample> samples, const SplitFractions& fractions,
                           std::uint64_t seed) {
    std::vector<std::string> ids;
    ids.reserve(samples.size());
    for (const auto& s : samples) ids.push_back(s.segment_id);
    const auto idx = split_indices(ids, fractions, seed);
    DatasetSplit out;
    for (std::size_t i : idx.train) out.train.push_back(samples[i]);
    for (std::size_t i : idx.val) out.val.push_back(samples[i]);
    for (std::size_t i : idx.test) out.test.push_back(samples[i]);
    return out;
}

} // namespace latentfuse
