#pragma once

// Float images (planar CHW, values nominally in [0,1]) and binary masks,
// with 8-bit PNG input/output. Masks round-trip as 0/255 grayscale.

#include <cstdint>
#include <string>
#include <vector>

#include "polarseg/check.hpp"

namespace polarseg {

struct Image {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> pix;  // channel-major planes

    Image() = default;
    Image(int c, int h, int w, float fill = 0.0f)
        : channels(c), height(h), width(w),
          pix(static_cast<std::size_t>(c) * h * w, fill) {}

    std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
    float* plane(int c) { return pix.data() + c * plane_size(); }
    const float* plane(int c) const { return pix.data() + c * plane_size(); }
    float& at(int c, int y, int x) { return pix[c * plane_size() + static_cast<std::size_t>(y) * width + x]; }
    float at(int c, int y, int x) const { return pix[c * plane_size() + static_cast<std::size_t>(y) * width + x]; }
};

struct Mask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> pix;  // 0 or 1

    Mask() = default;
    Mask(int h, int w, std::uint8_t fill = 0)
        : height(h), width(w), pix(static_cast<std::size_t>(h) * w, fill) {}

    std::uint8_t& at(int y, int x) { return pix[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int y, int x) const { return pix[static_cast<std::size_t>(y) * width + x]; }
    std::size_t count() const;
    bool empty_mask() const { return count() == 0; }
};

Image read_png(const std::string& path);
void write_png(const std::string& path, const Image& img);

Mask read_mask_png(const std::string& path);
void write_mask_png(const std::string& path, const Mask& mask);

// Single image channel as a standalone 1-channel image.
Image take_channel(const Image& img, int c);

Image box_blur(const Image& img, int radius);
Image gaussian_blur(const Image& img, double sigma);

}  // namespace polarseg
