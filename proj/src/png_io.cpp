#include "bokeh/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace bokeh {

namespace {

struct MemoryReader {
  std::span<const std::uint8_t> bytes;
  std::size_t offset = 0;
};

void read_from_memory(png_structp png, png_bytep out, png_size_t length) {
  auto* reader = static_cast<MemoryReader*>(png_get_io_ptr(png));
  if (reader->offset + length > reader->bytes.size()) png_error(png, "truncated PNG");
  std::memcpy(out, reader->bytes.data() + reader->offset, length);
  reader->offset += length;
}

void write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void flush_noop(png_structp) {}

void error_to_jmp(png_structp png, png_const_charp message) {
  auto* buffer = static_cast<std::string*>(png_get_error_ptr(png));
  if (buffer) *buffer = message;
  png_longjmp(png, 1);
}

void warning_ignore(png_structp, png_const_charp) {}

/// Raw decoded pixel payload, prior to conversion to floats.
struct RawPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint8_t> rows;  // tightly packed, big-endian for 16-bit
};

RawPng decode_raw(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0)
    throw IoError("not a PNG file");

  std::string error;
  RawPng raw;
  std::vector<png_bytep> row_ptrs;
  MemoryReader reader{bytes, 0};

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, error_to_jmp, warning_ignore);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("PNG decode error: " + error);
  }
  png_set_read_fn(png, &reader, read_from_memory);
  png_read_info(png, info);

  const int color_type = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) {
    png_set_palette_to_rgb(png);
  } else if (depth != 8 && depth != 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("unsupported PNG bit depth " + std::to_string(depth));
  }
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  raw.width = static_cast<int>(png_get_image_width(png, info));
  raw.height = static_cast<int>(png_get_image_height(png, info));
  raw.channels = png_get_channels(png, info);
  raw.bit_depth = png_get_bit_depth(png, info);
  if (raw.width <= 0 || raw.height <= 0) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("zero-dimension PNG");
  }
  const std::size_t stride = png_get_rowbytes(png, info);
  raw.rows.resize(stride * raw.height);
  row_ptrs.resize(raw.height);
  for (int y = 0; y < raw.height; ++y) row_ptrs[y] = raw.rows.data() + stride * y;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return raw;
}

std::vector<std::uint8_t> encode_raw(int width, int height, int channels, int bit_depth,
                                     std::span<const std::uint8_t> rows) {
  std::string error;
  std::vector<std::uint8_t> out;
  std::vector<png_bytep> row_ptrs(height);
  const std::size_t stride =
      static_cast<std::size_t>(width) * channels * (bit_depth / 8);

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, error_to_jmp, warning_ignore);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG encode error: " + error);
  }
  png_set_write_fn(png, &out, write_to_vector, flush_noop);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, width, height, bit_depth,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y)
    row_ptrs[y] = const_cast<png_bytep>(rows.data() + stride * y);
  png_write_image(png, row_ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

std::vector<float> raw_to_unit(const RawPng& raw) {
  const std::size_t n = static_cast<std::size_t>(raw.width) * raw.height * raw.channels;
  std::vector<float> out(n);
  if (raw.bit_depth == 8) {
    for (std::size_t i = 0; i < n; ++i) out[i] = raw.rows[i] / 255.0f;
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const unsigned code = (unsigned{raw.rows[2 * i]} << 8) | raw.rows[2 * i + 1];
      out[i] = static_cast<float>(code) / 65535.0f;
    }
  }
  return out;
}

std::uint8_t quantize8(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

bool has_extension(const std::filesystem::path& path, const char* ext) {
  std::string e = path.extension().string();
  for (char& c : e) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return e == ext;
}

DisparityMap decode_pfm(std::span<const std::uint8_t> bytes) {
  std::string text(reinterpret_cast<const char*>(bytes.data()),
                   std::min<std::size_t>(bytes.size(), 256));
  std::istringstream header(text);
  std::string magic;
  int width = 0;
  int height = 0;
  double scale = 0;
  header >> magic >> width >> height >> scale;
  if (!header) throw IoError("malformed PFM header");
  if (magic == "PF") throw IoError("disparity PFM must be single channel");
  if (magic != "Pf") throw IoError("not a PFM file");
  if (width <= 0 || height <= 0) throw IoError("zero-dimension PFM");
  // exactly one whitespace byte separates the header from the payload
  const std::size_t payload = static_cast<std::size_t>(header.tellg()) + 1;
  const std::size_t n = static_cast<std::size_t>(width) * height;
  if (bytes.size() < payload + n * 4) throw IoError("truncated PFM payload");
  const bool little = scale < 0;
  std::vector<float> raw(n);
  for (int row = 0; row < height; ++row) {
    const int y = height - 1 - row;  // PFM rows run bottom-up
    for (int x = 0; x < width; ++x) {
      const std::uint8_t* p = bytes.data() + payload + (static_cast<std::size_t>(row) * width + x) * 4;
      std::uint32_t bits = little ? (std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 |
                                     std::uint32_t{p[2]} << 16 | std::uint32_t{p[3]} << 24)
                                  : (std::uint32_t{p[3]} | std::uint32_t{p[2]} << 8 |
                                     std::uint32_t{p[1]} << 16 | std::uint32_t{p[0]} << 24);
      float v;
      std::memcpy(&v, &bits, 4);
      if (!std::isfinite(v)) throw IoError("PFM contains non-finite values");
      raw[static_cast<std::size_t>(y) * width + x] = v;
    }
  }
  return normalize_disparity(width, height, raw);
}

}  // namespace

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

ImagePlane decode_png(std::span<const std::uint8_t> bytes) {
  const RawPng raw = decode_raw(bytes);
  if (raw.channels != 1 && raw.channels != 3)
    throw IoError("unsupported PNG channel layout");
  return ImagePlane(raw.width, raw.height, raw.channels, raw_to_unit(raw),
                    ColorEncoding::Gamma22);
}

ImagePlane load_image(const std::filesystem::path& path) {
  return decode_png(read_file(path));
}

std::vector<std::uint8_t> encode_png(const ImagePlane& img) {
  if (img.empty()) throw std::invalid_argument("cannot encode an empty image");
  const ImagePlane encoded = img.encoding() == ColorEncoding::Linear ? to_gamma(img) : img;
  std::vector<std::uint8_t> rows(encoded.data().size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = quantize8(encoded.data()[i]);
  return encode_raw(img.width(), img.height(), img.channels(), 8, rows);
}

void save_image(const ImagePlane& img, const std::filesystem::path& path) {
  write_file(path, encode_png(img));
}

DisparityMap decode_disparity_png(std::span<const std::uint8_t> bytes) {
  const RawPng raw = decode_raw(bytes);
  if (raw.channels != 1) throw IoError("disparity PNG must be single channel");
  return normalize_disparity(raw.width, raw.height, raw_to_unit(raw));
}

DisparityMap load_disparity(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (has_extension(path, ".pfm")) return decode_pfm(bytes);
  return decode_disparity_png(bytes);
}

std::vector<std::uint8_t> encode_disparity_png(const DisparityMap& disp) {
  if (disp.empty()) throw std::invalid_argument("cannot encode an empty disparity map");
  std::vector<std::uint8_t> rows(disp.data().size() * 2);
  for (std::size_t i = 0; i < disp.data().size(); ++i) {
    const auto code = static_cast<std::uint16_t>(std::lround(disp.data()[i] * 65535.0));
    rows[2 * i] = static_cast<std::uint8_t>(code >> 8);
    rows[2 * i + 1] = static_cast<std::uint8_t>(code & 0xff);
  }
  return encode_raw(disp.width(), disp.height(), 1, 16, rows);
}

void save_disparity(const DisparityMap& disp, const std::filesystem::path& path) {
  write_file(path, encode_disparity_png(disp));
}

void save_pfm(std::span<const float> values, int width, int height,
              const std::filesystem::path& path) {
  if (values.size() != static_cast<std::size_t>(width) * height)
    throw std::invalid_argument("PFM value count does not match dimensions");
  std::string header = "Pf\n" + std::to_string(width) + " " + std::to_string(height) + "\n-1.0\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  for (int row = 0; row < height; ++row) {
    const int y = height - 1 - row;
    for (int x = 0; x < width; ++x) {
      std::uint32_t bits;
      std::memcpy(&bits, &values[static_cast<std::size_t>(y) * width + x], 4);
      for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
    }
  }
  write_file(path, bytes);
}

DisparityMap quantize_disparity(const DisparityMap& disp) {
  std::vector<float> unit(disp.data().size());
  for (std::size_t i = 0; i < unit.size(); ++i) {
    const auto code = static_cast<std::uint16_t>(std::lround(disp.data()[i] * 65535.0));
    unit[i] = static_cast<float>(code) / 65535.0f;
  }
  return normalize_disparity(disp.width(), disp.height(), unit);
}

}  // namespace bokeh
