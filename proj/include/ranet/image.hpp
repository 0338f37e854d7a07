#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ranet/tensor.hpp"

namespace ranet {

// Decoded 8-bit RGB image, row-major, 3 bytes per pixel.
struct ImageU8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;
};

// PNG or JPEG, dispatched on magic bytes. Grayscale and paletted inputs come
// back as RGB. Throws with the offending path on anything undecodable.
ImageU8 decode_image(const std::string& path);

void encode_png_gray(const std::string& path, int width, int height, const std::vector<std::uint8_t>& pixels);

// [3,H,W] float tensor scaled from [0,255] to [0,1].
Tensor image_to_tensor(const ImageU8& img);

// Half-pixel bilinear resampling of a [3,H,W] tensor.
Tensor resize_image(const Tensor& chw, int out_h, int out_w);

// Rotation about the image center (positive = counterclockwise), bilinear
// resampling, zero fill outside the source. 0 degrees is a bit-exact
// identity.
Tensor rotate_image(const Tensor& chw, float degrees);

}  // namespace ranet
