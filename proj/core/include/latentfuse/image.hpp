#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace latentfuse {

// Planar (channel, row, column) float image, values in [0, 1].
struct Image {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<float> pixels;

    Image() = default;
    Image(std::size_t c, std::size_t h, std::size_t w, float fill = 0.0f)
        : channels(c), height(h), width(w), pixels(c * h * w, fill) {}

    float& at(std::size_t c, std::size_t y, std::size_t x) { return pixels[(c * height + y) * width + x]; }
    float at(std::size_t c, std::size_t y, std::size_t x) const { return pixels[(c * height + y) * width + x]; }

    bool operator==(const Image&) const = default;
};

struct BinaryMask {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> values;  // row-major, 0 or 1

    BinaryMask() = default;
    BinaryMask(std::size_t h, std::size_t w) : height(h), width(w), values(h * w, 0) {}

    std::uint8_t& at(std::size_t y, std::size_t x) { return values[y * width + x]; }
    std::uint8_t at(std::size_t y, std::size_t x) const { return values[y * width + x]; }

    // Fraction of positive pixels.
    double coverage() const {
        if (values.empty()) return 0.0;
        std::size_t n = 0;
        for (auto v : values) n += v != 0;
        return static_cast<double>(n) / static_cast<double>(values.size());
    }

    bool operator==(const BinaryMask&) const = default;
};

} // namespace latentfuse
