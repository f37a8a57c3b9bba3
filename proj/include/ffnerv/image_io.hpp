#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "ffnerv/tensor.hpp"

namespace ffnerv {

class ImageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// 8-bit RGB(A) or gray PNG -> 3 x H x W in [0, 1].
Tensor read_png(const std::string& path);
// Writes round(clamp(v, 0, 1) * 255) as 8-bit RGB.
void write_png(const std::string& path, const Tensor& frame);

// *.png files of `dir` in lexicographic order; frame t is the t-th file.
std::vector<std::string> list_frames(const std::string& dir);
// All frames of `dir`; throws on an empty directory or mixed sizes.
std::vector<Tensor> read_frames(const std::string& dir);

// Name of frame t in decoded output, e.g. frame_00003.png.
std::string frame_file_name(std::int64_t t);

}  // namespace ffnerv
