#include "polarseg/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>

namespace polarseg {

std::size_t Mask::count() const {
    std::size_t n = 0;
    for (std::uint8_t v : pix) n += (v != 0);
    return n;
}

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw std::runtime_error(path + ": " + what);
}

std::vector<std::uint8_t> decode_png(const std::string& path, int& w, int& h, int& ch) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) fail(path, "cannot open for reading");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) fail(path, "png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        fail(path, "png_create_info_struct failed");
    }
    std::vector<std::uint8_t> out;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(path, "not a valid PNG file");
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    // Normalize everything to 8-bit gray or RGB.
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);

    w = static_cast<int>(png_get_image_width(png, info));
    h = static_cast<int>(png_get_image_height(png, info));
    ch = png_get_channels(png, info);
    if (ch != 1 && ch != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(path, "unsupported channel count " + std::to_string(ch));
    }
    out.resize(static_cast<std::size_t>(w) * h * ch);
    rows.resize(h);
    for (int y = 0; y < h; ++y)
        rows[y] = out.data() + static_cast<std::size_t>(y) * w * ch;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

void encode_png(const std::string& path, const std::uint8_t* interleaved, int w, int h, int ch) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) fail(path, "cannot open for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) fail(path, "png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        fail(path, "png_create_info_struct failed");
    }
    std::vector<png_bytep> rows(h);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail(path, "PNG write failed");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, w, h, 8, ch == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < h; ++y)
        rows[y] = const_cast<png_bytep>(interleaved + static_cast<std::size_t>(y) * w * ch);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

std::uint8_t to_byte(float v) {
    const float c = std::clamp(v, 0.0f, 1.0f);
    return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

}  // namespace

Image read_png(const std::string& path) {
    int w = 0, h = 0, ch = 0;
    const auto bytes = decode_png(path, w, h, ch);
    Image img(ch, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c)
                img.at(c, y, x) =
                    bytes[(static_cast<std::size_t>(y) * w + x) * ch + c] / 255.0f;
    return img;
}

void write_png(const std::string& path, const Image& img) {
    require(img.channels == 1 || img.channels == 3,
            "write_png: only 1- or 3-channel images, got " + std::to_string(img.channels));
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(img.width) * img.height *
                                    img.channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                bytes[(static_cast<std::size_t>(y) * img.width + x) * img.channels + c] =
                    to_byte(img.at(c, y, x));
    encode_png(path, bytes.data(), img.width, img.height, img.channels);
}

Mask read_mask_png(const std::string& path) {
    int w = 0, h = 0, ch = 0;
    const auto bytes = decode_png(path, w, h, ch);
    Mask m(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            m.at(y, x) = bytes[(static_cast<std::size_t>(y) * w + x) * ch] > 127 ? 1 : 0;
    return m;
}

void write_mask_png(const std::string& path, const Mask& mask) {
    std::vector<std::uint8_t> bytes(mask.pix.size());
    for (std::size_t i = 0; i < mask.pix.size(); ++i) bytes[i] = mask.pix[i] ? 255 : 0;
    encode_png(path, bytes.data(), mask.width, mask.height, 1);
}

Image take_channel(const Image& img, int c) {
    require(c >= 0 && c < img.channels, "take_channel: channel out of range");
    Image out(1, img.height, img.width);
    std::copy(img.plane(c), img.plane(c) + img.plane_size(), out.plane(0));
    return out;
}

Image box_blur(const Image& img, int radius) {
    if (radius <= 0) return img;
    Image tmp(img.channels, img.height, img.width);
    Image out(img.channels, img.height, img.width);
    const float inv = 1.0f / (2 * radius + 1);
    for (int c = 0; c < img.channels; ++c) {
        // horizontal, clamped at the borders
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                float acc = 0.0f;
                for (int d = -radius; d <= radius; ++d)
                    acc += img.at(c, y, std::clamp(x + d, 0, img.width - 1));
                tmp.at(c, y, x) = acc * inv;
            }
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                float acc = 0.0f;
                for (int d = -radius; d <= radius; ++d)
                    acc += tmp.at(c, std::clamp(y + d, 0, img.height - 1), x);
                out.at(c, y, x) = acc * inv;
            }
    }
    return out;
}

Image gaussian_blur(const Image& img, double sigma) {
    if (sigma <= 0.0) return img;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<float> kernel(2 * radius + 1);
    float sum = 0.0f;
    for (int d = -radius; d <= radius; ++d) {
        kernel[d + radius] = static_cast<float>(std::exp(-0.5 * d * d / (sigma * sigma)));
        sum += kernel[d + radius];
    }
    for (float& k : kernel) k /= sum;

    Image tmp(img.channels, img.height, img.width);
    Image out(img.channels, img.height, img.width);
    for (int c = 0; c < img.channels; ++c) {
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                float acc = 0.0f;
                for (int d = -radius; d <= radius; ++d)
                    acc += kernel[d + radius] * img.at(c, y, std::clamp(x + d, 0, img.width - 1));
                tmp.at(c, y, x) = acc;
            }
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                float acc = 0.0f;
                for (int d = -radius; d <= radius; ++d)
                    acc += kernel[d + radius] * tmp.at(c, std::clamp(y + d, 0, img.height - 1), x);
                out.at(c, y, x) = acc;
            }
    }
    return out;
}

}  // namespace polarseg
