#include "ffnerv/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include <png.h>

namespace ffnerv {

namespace fs = std::filesystem;

Tensor read_png(const std::string& path)
{
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str())) {
        throw ImageError("cannot read PNG '" + path + "': " + image.message);
    }
    image.format = PNG_FORMAT_RGB;
    std::vector<png_byte> pixels(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
        png_image_free(&image);
        throw ImageError("cannot decode PNG '" + path + "': " + image.message);
    }
    const auto h = static_cast<std::int64_t>(image.height);
    const auto w = static_cast<std::int64_t>(image.width);
    std::vector<float> v(static_cast<std::size_t>(3 * h * w));
    for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < w; ++x) {
            for (std::int64_t c = 0; c < 3; ++c) {
                v[static_cast<std::size_t>((c * h + y) * w + x)] =
                    static_cast<float>(pixels[static_cast<std::size_t>((y * w + x) * 3 + c)]) / 255.0F;
            }
        }
    }
    return Tensor({3, h, w}, std::move(v));
}

void write_png(const std::string& path, const Tensor& frame)
{
    if (frame.rank() != 3 || frame.dim(0) != 3) {
        throw ShapeError("write_png: expected a 3 x H x W frame, got " + shape_string(frame.shape()));
    }
    const auto h = frame.dim(1);
    const auto w = frame.dim(2);
    auto src = frame.data();
    std::vector<png_byte> pixels(static_cast<std::size_t>(3 * h * w));
    for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < w; ++x) {
            for (std::int64_t c = 0; c < 3; ++c) {
                const float v = std::clamp(src[static_cast<std::size_t>((c * h + y) * w + x)], 0.0F, 1.0F);
                pixels[static_cast<std::size_t>((y * w + x) * 3 + c)] =
                    static_cast<png_byte>(std::lround(v * 255.0F));
            }
        }
    }
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(w);
    image.height = static_cast<png_uint_32>(h);
    image.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&image, path.c_str(), 0, pixels.data(), 0, nullptr)) {
        throw ImageError("cannot write PNG '" + path + "': " + image.message);
    }
}

std::vector<std::string> list_frames(const std::string& dir)
{
    if (!fs::is_directory(dir)) {
        throw ImageError("'" + dir + "' is not a directory");
    }
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".png") {
            files.push_back(entry.path().string());
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

std::vector<Tensor> read_frames(const std::string& dir)
{
    const auto files = list_frames(dir);
    if (files.empty()) {
        throw ImageError("no .png frames in '" + dir + "'");
    }
    std::vector<Tensor> frames;
    for (const auto& f : files) {
        frames.push_back(read_png(f));
        if (frames.back().shape() != frames.front().shape()) {
            throw ImageError("frame '" + f + "' is " + shape_string(frames.back().shape()) +
                             ", expected " + shape_string(frames.front().shape()));
        }
    }
    return frames;
}

std::string frame_file_name(std::int64_t t)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%05lld.png", static_cast<long long>(t));
    return buf;
}

}  // namespace ffnerv
