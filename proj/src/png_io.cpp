#include "layersep/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

namespace layersep {
namespace {

struct ReadCursor {
  const std::string* bytes;
  std::size_t offset;
};

void read_callback(png_structp png, png_bytep out, png_size_t length) {
  auto* cursor = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cursor->offset + length > cursor->bytes->size()) png_error(png, "truncated PNG stream");
  std::memcpy(out, cursor->bytes->data() + cursor->offset, length);
  cursor->offset += length;
}

void write_callback(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), length);
}

void flush_callback(png_structp) {}

// libpng reports errors by longjmp; the message is parked in the error pointer.
[[noreturn]] void error_callback(png_structp png, png_const_charp message) {
  auto* sink = static_cast<std::string*>(png_get_error_ptr(png));
  if (sink) *sink = message;
  png_longjmp(png, 1);
}

void warning_callback(png_structp, png_const_charp) {}

// RAII owner for the libpng read/write structs.
class PngHandle {
 public:
  explicit PngHandle(bool reading) : reading_(reading) {
    png_ = reading ? png_create_read_struct(PNG_LIBPNG_VER_STRING, &message_, error_callback,
                                            warning_callback)
                   : png_create_write_struct(PNG_LIBPNG_VER_STRING, &message_, error_callback,
                                             warning_callback);
    if (!png_) throw RuntimeFailure("PNG: cannot allocate codec");
    info_ = png_create_info_struct(png_);
    if (!info_) {
      release();
      throw RuntimeFailure("PNG: cannot allocate info");
    }
  }
  ~PngHandle() { release(); }
  PngHandle(const PngHandle&) = delete;
  PngHandle& operator=(const PngHandle&) = delete;

  png_structp png() const { return png_; }
  png_infop info() const { return info_; }

  // Runs libpng calls with a jump target installed. The body must not own
  // objects with non-trivial destructors, since longjmp skips its frame.
  template <typename Body>
  void guarded(Body&& body) {
    if (setjmp(png_jmpbuf(png_))) throw ValidationError("PNG: " + message_);
    body();
  }

 private:
  void release() {
    if (reading_) {
      png_destroy_read_struct(&png_, info_ ? &info_ : nullptr, nullptr);
    } else {
      png_destroy_write_struct(&png_, info_ ? &info_ : nullptr);
    }
  }

  bool reading_;
  std::string message_;
  png_structp png_ = nullptr;
  png_infop info_ = nullptr;
};

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

Image decode_png(const std::string& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8)) {
    throw ValidationError("PNG: bad signature");
  }
  PngHandle handle(true);
  ReadCursor cursor{&bytes, 0};
  png_uint_32 width = 0, height = 0;
  int depth = 0;
  handle.guarded([&] {
    png_set_read_fn(handle.png(), &cursor, read_callback);
    png_read_info(handle.png(), handle.info());
    width = png_get_image_width(handle.png(), handle.info());
    height = png_get_image_height(handle.png(), handle.info());
    const int color = png_get_color_type(handle.png(), handle.info());
    depth = png_get_bit_depth(handle.png(), handle.info());
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(handle.png());
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) {
      png_set_expand_gray_1_2_4_to_8(handle.png());
      depth = 8;
    }
    if (color & PNG_COLOR_MASK_COLOR) png_set_rgb_to_gray_fixed(handle.png(), 1, -1, -1);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(handle.png());
    if (depth == 16) png_set_swap(handle.png());
    png_read_update_info(handle.png(), handle.info());
  });

  const std::size_t rowbytes = png_get_rowbytes(handle.png(), handle.info());
  std::vector<png_byte> buffer(rowbytes * height);
  std::vector<png_bytep> rows(height);
  for (png_uint_32 r = 0; r < height; ++r) rows[r] = buffer.data() + r * rowbytes;
  handle.guarded([&] { png_read_image(handle.png(), rows.data()); });

  Image image(height, width);
  const double max_code = depth == 16 ? 65535.0 : 255.0;
  for (png_uint_32 r = 0; r < height; ++r) {
    for (png_uint_32 c = 0; c < width; ++c) {
      double code;
      if (depth == 16) {
        std::uint16_t v;
        std::memcpy(&v, rows[r] + 2 * c, 2);
        code = v;
      } else {
        code = rows[r][c];
      }
      image(r, c) = code / max_code;
    }
  }
  return image;
}

Image read_png(const std::filesystem::path& path) { return decode_png(slurp(path)); }

std::string encode_png(const Image& image, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw ValidationError("PNG: bit depth must be 8 or 16");
  if (image.size() == 0) throw ValidationError("PNG: empty image");
  std::string out;
  PngHandle handle(false);
  const double max_code = bit_depth == 16 ? 65535.0 : 255.0;
  const std::size_t bpp = bit_depth / 8;
  std::vector<png_byte> buffer(image.size() * bpp);
  std::vector<png_bytep> rows(image.rows());
  for (Eigen::Index r = 0; r < image.rows(); ++r) {
    rows[r] = buffer.data() + r * image.cols() * bpp;
    for (Eigen::Index c = 0; c < image.cols(); ++c) {
      const double v = std::clamp(image(r, c), 0.0, 1.0);
      const auto code = static_cast<std::uint16_t>(std::lround(v * max_code));
      if (bit_depth == 16) {
        std::memcpy(rows[r] + 2 * c, &code, 2);
      } else {
        rows[r][c] = static_cast<png_byte>(code);
      }
    }
  }

  handle.guarded([&] {
    png_set_write_fn(handle.png(), &out, write_callback, flush_callback);
    png_set_IHDR(handle.png(), handle.info(), static_cast<png_uint_32>(image.cols()),
                 static_cast<png_uint_32>(image.rows()), bit_depth, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(handle.png(), handle.info());
    if (bit_depth == 16) png_set_swap(handle.png());
    png_write_image(handle.png(), rows.data());
    png_write_end(handle.png(), nullptr);
  });
  return out;
}

void write_png(const std::filesystem::path& path, const Image& image, int bit_depth) {
  const std::string bytes = encode_png(image, bit_depth);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Mask read_mask_png(const std::filesystem::path& path) { return read_png(path) >= 0.5; }

void write_mask_png(const std::filesystem::path& path, const Mask& mask) {
  write_png(path, to_image(mask), 8);
}

}  // namespace layersep
