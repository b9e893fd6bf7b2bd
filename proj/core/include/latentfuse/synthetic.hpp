#pragma once

// Procedural building scenes: a convex footprint extruded to a prism, one
// top-down satellite render and up to eight pinhole street renders whose
// footprint masks pass the visibility filter.
//
// Attributes are painted as fixed 8x8 patterns aligned to the patch grid:
// materials as a texture over the roof (satellite) or facade (street),
// elements as a glyph in a high-coverage patch cell. Each class has a
// visibility rule deciding which renders carry it. A street-only class never
// touches the satellite render, so the satellite image is independent of it.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "latentfuse/image.hpp"
#include "latentfuse/taxonomy.hpp"

namespace latentfuse {

struct Vec2 {
    double x = 0.0, y = 0.0;
};

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;
};

// Pinhole camera looking horizontally along yaw (radians from +x toward +y).
// Camera axes: forward (cos, sin, 0), right (sin, -cos, 0), down (0, 0, -1).
// Intrinsics refer to an image_size x image_size sensor.
struct CameraPose {
    Vec3 position;
    double yaw = 0.0;
    double focal = 28.0;
    double cx = 16.0;
    double cy = 16.0;
    std::size_t image_size = 32;
};

struct SceneSpec {
    std::vector<Vec2> footprint;  // convex, counter-clockwise, meters
    double height = 0.0;
    std::array<std::uint8_t, kClassCount> attributes{};
    std::vector<CameraPose> cameras;  // the kept street cameras
};

struct StreetView {
    Image image;
    BinaryMask mask;
    CameraPose camera;
};

struct BuildingSample {
    std::string segment_id;
    Image satellite;
    BinaryMask satellite_mask;
    std::vector<StreetView> street;
    std::array<std::uint8_t, kElementClasses> elements{};
    std::array<std::uint8_t, kMaterialClasses> materials{};

    std::size_t street_views() const { return street.size(); }
};

// Street-view counts 0..8.
inline constexpr std::size_t kViewCountBins = 9;

enum class Visibility { both, street_only, satellite_only, context_only };

// context_only: painted in the satellite render outside the footprint, and
// nowhere else.

std::array<double, kClassCount> default_priors();
std::array<Visibility, kClassCount> default_visibility();  // dormer, slate street-only; skylight,
                                                           // external installations satellite-only

struct GeneratorConfig {
    std::array<double, kClassCount> priors = default_priors();
    std::array<Visibility, kClassCount> visibility = default_visibility();
    std::size_t image_size = 32;
    double ground_extent = 42.0;  // meters spanned by the satellite image
    double focal = 28.0;          // street focal length, px at image_size
    double visibility_threshold = 0.20;
    // P(N = n) for n = 0..8 (mean 4.5).
    std::array<double, kViewCountBins> view_count_pmf = {0.12, 0.06, 0.08, 0.10, 0.10,
                                                                   0.10, 0.12, 0.20, 0.12};
    double occlusion_probability = 0.3;
    double texture_amplitude = 0.2;
    double glyph_amplitude = 0.45;
    double noise = 0.05;

    // Throws ValidationError for priors outside [0, 1], a bad pmf or
    // threshold, or an image size that is not a multiple of 8.
    void validate() const;

    // The default rules plus three classes moved to context_only.
    static GeneratorConfig context_signal();
};

// Fixed per-class 8x8x3 pattern, entries +-1 with zero mean per channel,
// laid out (channel, row, column).
const std::array<float, 192>& class_pattern(std::size_t class_id);

// Deterministic in (seed, config). The returned spec lists only the cameras
// that were kept.
std::pair<SceneSpec, BuildingSample> generate_scene(std::uint64_t seed, const GeneratorConfig& config = {});
std::pair<SceneSpec, BuildingSample> generate_scene(std::uint64_t seed, const std::array<double, kClassCount>& priors);

// Camera-space point: x right, y down, z forward.
Vec3 to_camera(const CameraPose& camera, const Vec3& world);

inline constexpr double kNearPlane = 0.05;

// Prism projected through camera (intrinsics rescaled to out_size), clipped
// at the near plane, rasterized by pixel centers. Behind the camera -> all
// zero. Throws ContractError for a bad camera index or focal <= 0.
BinaryMask project_footprint_mask(const SceneSpec& spec, std::size_t camera_index, std::size_t out_size);
BinaryMask project_prism_mask(std::span<const Vec2> footprint, double height, const CameraPose& camera,
                              std::size_t out_size);

// Top-down footprint mask: pixel centers inside the polygon. The image spans
// [-extent/2, extent/2] in x and y, north (+y) up.
BinaryMask satellite_mask(std::span<const Vec2> footprint, double extent, std::size_t size);

// Keeps pairs whose mask-positive fraction is >= threshold, in order.
// Throws ValidationError for a threshold outside [0, 1].
bool passes_visibility(const BinaryMask& mask, double threshold);
std::vector<std::pair<Image, BinaryMask>> visibility_filter(std::vector<std::pair<Image, BinaryMask>> pairs,
                                                            double threshold = 0.20);

// `count` samples; sample i is generated from the i-th draw of a splitmix64
// stream seeded with `seed` and named "b<seed>-<i>". With zero_view_first
// the first sample is forced to have no street views.
std::vector<BuildingSample> generate_dataset(const GeneratorConfig& config, std::size_t count, std::uint64_t seed,
                                             bool zero_view_first = false);

struct SplitFractions {
    double train = 0.85;
    double val = 0.075;
    double test = 0.075;
};

struct SplitIndices {
    std::vector<std::size_t> train, val, test;
};

// Shuffled partition of whole segments. Segment counts are
// round(train * S), round(val * S) and the remainder. Throws ValidationError
// if the fractions are negative or do not sum to 1 within 1e-9.
SplitIndices split_indices(std::span<const std::string> segment_ids, const SplitFractions& fractions,
                           std::uint64_t seed);

struct DatasetSplit {
    std::vector<BuildingSample> train, val, test;
};

DatasetSplit split_dataset(std::span<const BuildingSample> samples, const SplitFractions& fractions,
                           std::uint64_t seed);

} // namespace latentfuse
