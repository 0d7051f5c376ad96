#pragma once
// PNG/JPEG decoding and PNG encoding via libpng / libjpeg. Decoded images
// are converted to grayscale with BT.601 luma and normalized to [0,1].

#include <algorithm>
#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "s2s/errors.hpp"
#include "s2s/st_data.hpp"
#include "s2s/tensor.hpp"

namespace s2s {

namespace image_detail {

inline float luma601(float r, float g, float b) {
  return 0.299f * r + 0.587f * g + 0.114f * b;
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline Tensor<float> decode_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path);
  png_byte header[8];
  if (std::fread(header, 1, 8, fp.get()) != 8 ||
      png_sig_cmp(header, 0, 8) != 0)
    throw IoError("not a PNG file: " + path);

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng init failed");
  }
  std::vector<png_bytep> rows;
  std::vector<png_byte> buf;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng decode failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  png_set_expand(png);          // palettes / low bit depth -> 8 bit
  png_set_strip_16(png);        // 16 bit -> 8 bit
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);     // unify to RGB
  png_read_update_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const png_size_t stride = png_get_rowbytes(png, info);
  buf.resize(stride * h);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = buf.data() + y * stride;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  Tensor<float> out({static_cast<int>(h), static_cast<int>(w)});
  for (png_uint_32 y = 0; y < h; ++y)
    for (png_uint_32 x = 0; x < w; ++x) {
      const png_byte* px = buf.data() + y * stride + 3 * x;
      out(static_cast<int>(y), static_cast<int>(x)) =
          luma601(px[0], px[1], px[2]) / 255.0f;
    }
  return out;
}

struct JpegErrorMgr {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
  auto* mgr = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  std::longjmp(mgr->jump, 1);
}

inline Tensor<float> decode_jpeg(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path);
  jpeg_decompress_struct cinfo;
  JpegErrorMgr err;
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw IoError("libjpeg decode failed: " + path);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, fp.get());
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  const int w = static_cast<int>(cinfo.output_width);
  const int h = static_cast<int>(cinfo.output_height);
  std::vector<JSAMPLE> row(static_cast<std::size_t>(w) * 3);
  Tensor<float> out({h, w});
  JSAMPROW rp = row.data();
  for (int y = 0; y < h; ++y) {
    jpeg_read_scanlines(&cinfo, &rp, 1);
    for (int x = 0; x < w; ++x)
      out(y, x) = luma601(row[3 * x], row[3 * x + 1], row[3 * x + 2]) / 255.0f;
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return out;
}

}  // namespace image_detail

// Decode a PNG or JPEG file to a grayscale [0,1] image.
inline Tensor<float> load_image(const std::string& path) {
  const auto ext = std::filesystem::path(path).extension().string();
  auto lower = ext;
  for (auto& c : lower) c = static_cast<char>(std::tolower(c));
  if (lower == ".png") return image_detail::decode_png(path);
  if (lower == ".jpg" || lower == ".jpeg")
    return image_detail::decode_jpeg(path);
  throw IoError("unsupported image extension: " + path);
}

// Write an 8-bit grayscale PNG from values in [0,1] (clamped).
inline void write_png_gray(const std::string& path, const Tensor<float>& img) {
  if (img.rank() != 2) throw ShapeError("write_png_gray expects a 2D image");
  image_detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot create " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng encode failed: " + path);
  }
  const int h = img.dim(0), w = img.dim(1);
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(static_cast<std::size_t>(w));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float v = img(y, x);
      v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
      row[x] = static_cast<png_byte>(v * 255.0f + 0.5f);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// 8-bit RGB PNG from three [0,255] channel planes (test fixtures, previews).
inline void write_png_rgb8(const std::string& path,
                           const Tensor<std::uint8_t>& r,
                           const Tensor<std::uint8_t>& g,
                           const Tensor<std::uint8_t>& b) {
  if (!(r.shape == g.shape) || !(r.shape == b.shape) || r.rank() != 2)
    throw ShapeError("write_png_rgb8 expects three equal 2D planes");
  image_detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot create " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng encode failed: " + path);
  }
  const int h = r.dim(0), w = r.dim(1);
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(static_cast<std::size_t>(w) * 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      row[3 * x] = r(y, x);
      row[3 * x + 1] = g(y, x);
      row[3 * x + 2] = b(y, x);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Min-max scaled preview of an arbitrary field.
inline void write_png_preview(const std::string& path,
                              const Tensor<float>& field) {
  float lo = field.data.empty() ? 0.0f : field.data[0];
  float hi = lo;
  for (float v : field.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  Tensor<float> scaled = field;
  const float range = hi - lo;
  for (auto& v : scaled.data) v = range > 0.0f ? (v - lo) / range : 0.0f;
  write_png_gray(path, scaled);
}

// Ingest every decodable PNG/JPEG under `dir` (sorted order). Images smaller
// than min_side x min_side are skipped and counted.
inline ImageCorpus load_image_corpus(const std::string& dir,
                                     int min_side = 64) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir))
    throw IoError("corpus directory does not exist: " + dir);
  std::vector<std::string> paths;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto ext = e.path().extension().string();
    for (auto& c : ext) c = static_cast<char>(std::tolower(c));
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg")
      paths.push_back(e.path().string());
  }
  std::sort(paths.begin(), paths.end());

  ImageCorpus corpus;
  for (const auto& p : paths) {
    Tensor<float> img;
    try {
      img = load_image(p);
    } catch (const IoError&) {
      ++corpus.skipped_undecodable;
      continue;
    }
    if (img.dim(0) < min_side || img.dim(1) < min_side) {
      ++corpus.skipped_small;
      continue;
    }
    corpus.images.push_back(std::move(img));
    corpus.sources.push_back(p);
  }
  if (corpus.images.empty())
    throw EmptyCorpus("no usable images in " + dir);
  return corpus;
}

}  // namespace s2s
