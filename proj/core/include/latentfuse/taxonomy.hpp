#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace latentfuse {

// Two multi-label tasks: 6 roof elements followed by 7 roof materials.
inline constexpr std::size_t kElementClasses = 6;
inline constexpr std::size_t kMaterialClasses = 7;
inline constexpr std::size_t kClassCount = kElementClasses + kMaterialClasses;

enum ClassId : std::size_t {
    kSolarPanels = 0,
    kDormer,
    kSkylight,
    kRoofWindow,
    kChimney,
    kExternalInstallations,
    kBitumen,
    kSlate,
    kTiles,
    kAluminium,
    kThatch,
    kCorrugatedSheets,
    kGlass,
};

inline constexpr std::array<std::string_view, kClassCount> kClassNames = {
    "solar_panels", "dormer", "skylight",  "roof_window", "chimney",           "external_installations",
    "bitumen",      "slate",  "tiles",     "aluminium",   "thatch", "corrugated_sheets", "glass",
};

// Material subset used for mAP*: everything except thatch and glass.
inline constexpr std::array<std::size_t, 5> kReliableMaterials = {kBitumen, kSlate, kTiles, kAluminium,
                                                                  kCorrugatedSheets};

inline std::optional<std::size_t> class_index(std::string_view name) {
    for (std::size_t i = 0; i < kClassCount; ++i)
        if (kClassNames[i] == name) return i;
    return std::nullopt;
}

} // namespace latentfuse
