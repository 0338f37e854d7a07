#include "ranet/image.hpp"

#include <jpeglib.h>
#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>

#include "ranet/kernels.hpp"

namespace ranet {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

ImageU8 decode_png(std::FILE* f, const std::string& path) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("png decoder setup failed for " + path);
  }
  std::vector<png_bytep> rows;
  ImageU8 img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("undecodable png file: " + path);
  }
  png_init_io(png, f);
  png_read_info(png, info);

  png_set_expand(png);        // palette/low-bit-depth to full bytes
  png_set_strip_16(png);      // 16-bit channels down to 8
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  if (png_get_channels(png, info) != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("unexpected png channel layout in " + path);
  }
  img.rgb.resize(static_cast<std::size_t>(img.width) * img.height * 3);
  rows.resize(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y)
    rows[static_cast<std::size_t>(y)] = img.rgb.data() + static_cast<std::size_t>(y) * img.width * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

struct JpegErrorMgr {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* mgr = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  std::longjmp(mgr->jump, 1);
}

ImageU8 decode_jpeg(std::FILE* f, const std::string& path) {
  jpeg_decompress_struct cinfo;
  JpegErrorMgr err;
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw std::runtime_error("undecodable jpeg file: " + path);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, f);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);

  ImageU8 img;
  img.width = static_cast<int>(cinfo.output_width);
  img.height = static_cast<int>(cinfo.output_height);
  img.rgb.resize(static_cast<std::size_t>(img.width) * img.height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = img.rgb.data() + static_cast<std::size_t>(cinfo.output_scanline) * img.width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return img;
}

}  // namespace

ImageU8 decode_image(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw std::runtime_error("cannot open image file: " + path);
  unsigned char magic[4] = {0, 0, 0, 0};
  const std::size_t got = std::fread(magic, 1, 4, f.get());
  std::rewind(f.get());
  if (got >= 4 && magic[0] == 0x89 && magic[1] == 'P' && magic[2] == 'N' && magic[3] == 'G')
    return decode_png(f.get(), path);
  if (got >= 2 && magic[0] == 0xFF && magic[1] == 0xD8) return decode_jpeg(f.get(), path);
  throw std::runtime_error("unsupported image format (expected PNG or JPEG): " + path);
}

void encode_png_gray(const std::string& path, int width, int height, const std::vector<std::uint8_t>& pixels) {
  if (pixels.size() != static_cast<std::size_t>(width) * height)
    throw std::invalid_argument("png payload size does not match " + std::to_string(width) + "x" +
                                std::to_string(height));
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("png encoder setup failed for " + path);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("png write failed: " + path);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y)
    png_write_row(png, const_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(y) * width));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Tensor image_to_tensor(const ImageU8& img) {
  Tensor t({3, img.height, img.width});
  const std::size_t plane = static_cast<std::size_t>(img.height) * img.width;
  for (std::size_t i = 0; i < plane; ++i)
    for (int c = 0; c < 3; ++c)
      t.data[static_cast<std::size_t>(c) * plane + i] = static_cast<float>(img.rgb[i * 3 + static_cast<std::size_t>(c)]) / 255.0f;
  return t;
}

Tensor resize_image(const Tensor& chw, int out_h, int out_w) {
  if (chw.ndim() != 3) throw std::invalid_argument("resize_image expects [C,H,W], got " + shape_str(chw.shape));
  Tensor batched({1, chw.dim(0), chw.dim(1), chw.dim(2)}, chw.data);
  Tensor out = kernels::resize_bilinear_forward(batched, out_h, out_w);
  return Tensor({chw.dim(0), out_h, out_w}, std::move(out.data));
}

Tensor rotate_image(const Tensor& chw, float degrees) {
  if (chw.ndim() != 3) throw std::invalid_argument("rotate_image expects [C,H,W], got " + shape_str(chw.shape));
  if (std::fabs(degrees) > 180.0f)
    throw std::invalid_argument("rotation angle must be within [-180, 180], got " + std::to_string(degrees));
  const int C = chw.dim(0), H = chw.dim(1), W = chw.dim(2);
  const float rad = degrees * 3.14159265358979323846f / 180.0f;
  const float cs = std::cos(rad), sn = std::sin(rad);
  const float cx = static_cast<float>(W - 1) / 2.0f;
  const float cy = static_cast<float>(H - 1) / 2.0f;

  Tensor out({C, H, W});
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const float dx = static_cast<float>(x) - cx;
      const float dy = static_cast<float>(y) - cy;
      const float sx = cs * dx + sn * dy + cx;
      const float sy = -sn * dx + cs * dy + cy;
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const float fx = sx - static_cast<float>(x0);
      const float fy = sy - static_cast<float>(y0);
      for (int c = 0; c < C; ++c) {
        const float* plane = chw.ptr() + static_cast<std::size_t>(c) * H * W;
        auto tap = [&](int yy, int xx) -> float {
          return (yy < 0 || yy >= H || xx < 0 || xx >= W) ? 0.0f : plane[yy * W + xx];
        };
        const float top = tap(y0, x0) * (1.0f - fx) + tap(y0, x0 + 1) * fx;
        const float bot = tap(y0 + 1, x0) * (1.0f - fx) + tap(y0 + 1, x0 + 1) * fx;
        out.data[(static_cast<std::size_t>(c) * H + y) * W + x] = top * (1.0f - fy) + bot * fy;
      }
    }
  }
  return out;
}

}  // namespace ranet
