#pragma once

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "dcin/error.hpp"
#include "dcin/image.hpp"

namespace dcin {

namespace detail {

struct FileHandle {
  std::FILE* fp = nullptr;
  explicit FileHandle(const std::filesystem::path& path, const char* mode) {
    fp = std::fopen(path.string().c_str(), mode);
  }
  ~FileHandle() {
    if (fp) std::fclose(fp);
  }
  FileHandle(const FileHandle&) = delete;
  FileHandle& operator=(const FileHandle&) = delete;
};

struct JpegErrorMgr {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

inline void jpeg_quiet_output(j_common_ptr) {}

// Keep libpng from chattering on stderr; failures surface as IoError.
inline void png_quiet_error(png_structp png, png_const_charp) { png_longjmp(png, 1); }
inline void png_quiet_warning(png_structp, png_const_charp) {}

inline std::uint32_t read_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void write_u32le(std::uint32_t v, unsigned char* p) {
  p[0] = static_cast<unsigned char>(v & 0xff);
  p[1] = static_cast<unsigned char>((v >> 8) & 0xff);
  p[2] = static_cast<unsigned char>((v >> 16) & 0xff);
  p[3] = static_cast<unsigned char>((v >> 24) & 0xff);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// PNG
// ---------------------------------------------------------------------------

/// Reads a PNG as 8-bit interleaved RGB. Palette, gray, 16-bit and alpha
/// inputs are converted; alpha is stripped.
inline RgbImage read_png_rgb(const std::filesystem::path& path) {
  detail::FileHandle file(path, "rb");
  if (!file.fp) throw IoError("cannot open " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::png_quiet_error, detail::png_quiet_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png init failed for " + path.string());
  }

  RgbImage image;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("malformed PNG: " + path.string());
  }

  png_init_io(png, file.fp);
  png_read_info(png, info);

  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  int color_type = png_get_color_type(png, info);
  int bit_depth = png_get_bit_depth(png, info);

  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  image.width = static_cast<int>(w);
  image.height = static_cast<int>(h);
  image.data.assign(static_cast<std::size_t>(w) * h * 3, 0);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y)
    rows[y] = image.data.data() + static_cast<std::size_t>(y) * w * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

/// Reads a single-channel 8-bit gray PNG as a label mask.
inline LabelMask read_png_mask(const std::filesystem::path& path) {
  detail::FileHandle file(path, "rb");
  if (!file.fp) throw IoError("cannot open " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::png_quiet_error, detail::png_quiet_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png init failed for " + path.string());
  }

  LabelMask mask;
  std::vector<png_bytep> rows;
  int color_type = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("malformed PNG: " + path.string());
  }

  png_init_io(png, file.fp);
  png_read_info(png, info);
  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  color_type = png_get_color_type(png, info);
  int bit_depth = png_get_bit_depth(png, info);

  if (color_type != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("label mask must be a single-channel gray PNG: " + path.string());
  }
  if (bit_depth == 16) png_set_strip_16(png);
  if (bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  mask.width = static_cast<int>(w);
  mask.height = static_cast<int>(h);
  mask.data.assign(static_cast<std::size_t>(w) * h, 0);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y)
    rows[y] = mask.data.data() + static_cast<std::size_t>(y) * w;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return mask;
}

namespace detail {

inline void write_png(const std::filesystem::path& path, int width, int height,
                      int color_type, int channels, const std::uint8_t* data) {
  std::filesystem::path parent = path.parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);

  FileHandle file(path, "wb");
  if (!file.fp) throw IoError("cannot open for writing: " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_quiet_error, png_quiet_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png init failed for " + path.string());
  }

  std::vector<png_bytep> rows(height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png write failed: " + path.string());
  }

  png_init_io(png, file.fp);
  png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  // Fixed settings keep output bytes reproducible across runs.
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y)
    rows[y] = const_cast<png_bytep>(data + static_cast<std::size_t>(y) * width * channels);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace detail

inline void write_png_rgb(const std::filesystem::path& path, const RgbImage& image) {
  check_valid(image);
  detail::write_png(path, image.width, image.height, PNG_COLOR_TYPE_RGB, 3,
                    image.data.data());
}

inline void write_png_mask(const std::filesystem::path& path, const LabelMask& mask) {
  check_valid(mask);
  detail::write_png(path, mask.width, mask.height, PNG_COLOR_TYPE_GRAY, 1,
                    mask.data.data());
}

// ---------------------------------------------------------------------------
// JPEG (read only; lossy writes would corrupt color-transfer output)
// ---------------------------------------------------------------------------

inline RgbImage read_jpeg_rgb(const std::filesystem::path& path) {
  detail::FileHandle file(path, "rb");
  if (!file.fp) throw IoError("cannot open " + path.string());

  jpeg_decompress_struct cinfo;
  detail::JpegErrorMgr err;
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = detail::jpeg_error_exit;
  err.pub.output_message = detail::jpeg_quiet_output;

  RgbImage image;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw IoError("malformed JPEG: " + path.string() + " (" + err.message + ")");
  }

  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, file.fp);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);

  image.width = static_cast<int>(cinfo.output_width);
  image.height = static_cast<int>(cinfo.output_height);
  image.data.assign(static_cast<std::size_t>(image.width) * image.height * 3, 0);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = image.data.data() +
                   static_cast<std::size_t>(cinfo.output_scanline) * image.width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return image;
}

// ---------------------------------------------------------------------------
// Generic image loading
// ---------------------------------------------------------------------------

inline bool is_supported_image(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

inline RgbImage read_image(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".png") return read_png_rgb(path);
  if (ext == ".jpg" || ext == ".jpeg") return read_jpeg_rgb(path);
  throw IoError("unsupported image format: " + path.string());
}

/// Lists the decodable images under root, as sorted ids (relative paths
/// with forward slashes).
inline std::vector<std::string> list_corpus_ids(const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root))
    throw IoError("not a directory: " + root.string());
  std::vector<std::string> ids;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    if (!is_supported_image(entry.path())) continue;
    ids.push_back(std::filesystem::relative(entry.path(), root).generic_string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

// ---------------------------------------------------------------------------
// DCIN-mask binary format: "DCM1", u32le width/height/classes, then
// width*height*classes float32le, row major, class fastest.
// ---------------------------------------------------------------------------

inline void write_prob_mask(const std::filesystem::path& path, const ProbMask& mask) {
  check_valid(mask);
  if (!is_normalized(mask))
    throw UsageError("prob mask violates simplex invariant: " + path.string());
  std::filesystem::path parent = path.parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());

  unsigned char header[16];
  std::memcpy(header, "DCM1", 4);
  detail::write_u32le(static_cast<std::uint32_t>(mask.width), header + 4);
  detail::write_u32le(static_cast<std::uint32_t>(mask.height), header + 8);
  detail::write_u32le(static_cast<std::uint32_t>(mask.classes), header + 12);
  out.write(reinterpret_cast<const char*>(header), sizeof(header));

  std::vector<unsigned char> buf(mask.data.size() * 4);
  for (std::size_t i = 0; i < mask.data.size(); ++i) {
    float f = static_cast<float>(mask.data[i]);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    detail::write_u32le(bits, buf.data() + i * 4);
  }
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

/// Reads a DCIN-mask file. Errors name the file and the byte offset of the
/// first malformed field. Stored float32 values convert to double exactly;
/// the simplex check allows 1e-5 slack for float32 quantization.
inline ProbMask read_prob_mask(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());

  auto fail = [&](std::size_t offset, const std::string& what) -> void {
    throw IoError(path.string() + ": " + what + " at byte " + std::to_string(offset));
  };

  unsigned char header[16];
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (in.gcount() != sizeof(header))
    fail(static_cast<std::size_t>(in.gcount()), "truncated header");
  if (std::memcmp(header, "DCM1", 4) != 0) fail(0, "bad magic (expected DCM1)");

  std::uint32_t w = detail::read_u32le(header + 4);
  std::uint32_t h = detail::read_u32le(header + 8);
  std::uint32_t c = detail::read_u32le(header + 12);
  if (w < 1 || h < 1) fail(4, "width and height must be >= 1");
  if (c < 2) fail(12, "class count must be >= 2");
  if (static_cast<std::uint64_t>(w) * h * c > (1ull << 31))
    fail(4, "mask dimensions unreasonably large");

  ProbMask mask(static_cast<int>(w), static_cast<int>(h), static_cast<int>(c));
  std::vector<unsigned char> buf(mask.data.size() * 4);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size()))
    fail(16 + static_cast<std::size_t>(in.gcount()), "truncated payload");
  char extra;
  if (in.read(&extra, 1); in.gcount() != 0)
    fail(16 + buf.size(), "trailing bytes after payload");

  for (std::size_t i = 0; i < mask.data.size(); ++i) {
    std::uint32_t bits = detail::read_u32le(buf.data() + i * 4);
    float f;
    std::memcpy(&f, &bits, 4);
    if (!std::isfinite(f) || f < 0.0f || f > 1.0f)
      fail(16 + i * 4, "probability outside [0,1]");
    mask.data[i] = static_cast<double>(f);
  }
  if (!is_normalized(mask, 1e-5))
    fail(16, "per-pixel probabilities do not sum to 1");
  return mask;
}

// ---------------------------------------------------------------------------
// Resizing
// ---------------------------------------------------------------------------

/// Bilinear resize with half-pixel center alignment.
inline RgbImage resize_bilinear(const RgbImage& image, int out_w, int out_h) {
  check_valid(image);
  if (out_w < 1 || out_h < 1) throw UsageError("resize target must be >= 1x1");
  RgbImage out(out_w, out_h);
  const double sx = static_cast<double>(image.width) / out_w;
  const double sy = static_cast<double>(image.height) / out_h;
  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    int y0 = static_cast<int>(std::floor(fy));
    double wy = fy - y0;
    int y1 = std::min(y0 + 1, image.height - 1);
    y0 = std::clamp(y0, 0, image.height - 1);
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      int x0 = static_cast<int>(std::floor(fx));
      double wx = fx - x0;
      int x1 = std::min(x0 + 1, image.width - 1);
      x0 = std::clamp(x0, 0, image.width - 1);
      for (int ch = 0; ch < 3; ++ch) {
        double top = image.at(x0, y0, ch) * (1.0 - wx) + image.at(x1, y0, ch) * wx;
        double bot = image.at(x0, y1, ch) * (1.0 - wx) + image.at(x1, y1, ch) * wx;
        double v = top * (1.0 - wy) + bot * wy;
        out.at(x, y, ch) = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
      }
    }
  }
  return out;
}

/// Nearest-neighbor resize; never invents label values.
inline LabelMask resize_nearest(const LabelMask& mask, int out_w, int out_h) {
  check_valid(mask);
  if (out_w < 1 || out_h < 1) throw UsageError("resize target must be >= 1x1");
  LabelMask out(out_w, out_h);
  const double sx = static_cast<double>(mask.width) / out_w;
  const double sy = static_cast<double>(mask.height) / out_h;
  for (int y = 0; y < out_h; ++y) {
    int src_y = std::min(static_cast<int>(std::floor((y + 0.5) * sy)), mask.height - 1);
    for (int x = 0; x < out_w; ++x) {
      int src_x = std::min(static_cast<int>(std::floor((x + 0.5) * sx)), mask.width - 1);
      out.at(x, y) = mask.at(src_x, src_y);
    }
  }
  return out;
}

}  // namespace dcin
