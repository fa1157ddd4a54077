#include "mestereo/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "mestereo/error.hpp"

namespace mestereo {
namespace {

using Bytes = std::vector<std::uint8_t>;

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed on '" + path.string() + "'");
  return bytes;
}

void write_file(const std::filesystem::path& path, const Bytes& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed on '" + path.string() + "'");
}

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

// Token reader for the ASCII headers of PFM and PNM files.
class HeaderCursor {
 public:
  HeaderCursor(const Bytes& bytes, std::string_view format) : bytes_(bytes), format_(format) {}

  std::size_t pos() const noexcept { return pos_; }

  void skip_space(bool allow_comments) {
    while (pos_ < bytes_.size()) {
      const auto c = bytes_[pos_];
      if (allow_comments && c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(c)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::string token(bool allow_comments) {
    skip_space(allow_comments);
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_])) ++pos_;
    if (start == pos_) throw FormatError(std::string(format_) + ": truncated header", start);
    return std::string(bytes_.begin() + static_cast<std::ptrdiff_t>(start),
                       bytes_.begin() + static_cast<std::ptrdiff_t>(pos_));
  }

  long integer(bool allow_comments, long lo, long hi, const char* what) {
    const std::size_t at = pos_;
    const std::string t = token(allow_comments);
    std::size_t used = 0;
    long v = 0;
    try {
      v = std::stol(t, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != t.size() || v < lo || v > hi) {
      throw FormatError(std::string(format_) + ": bad " + what + " '" + t + "'", at);
    }
    return v;
  }

  double real(const char* what) {
    const std::size_t at = pos_;
    const std::string t = token(false);
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(t, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != t.size() || !std::isfinite(v)) {
      throw FormatError(std::string(format_) + ": bad " + what + " '" + t + "'", at);
    }
    return v;
  }

  // Exactly one whitespace byte separates the header from the payload.
  void end_header() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw FormatError(std::string(format_) + ": missing header terminator", pos_);
    }
    ++pos_;
  }

 private:
  const Bytes& bytes_;
  std::string_view format_;
  std::size_t pos_ = 0;
};

constexpr long kMaxExtent = 1L << 20;

struct PfmData {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<float> samples;  // top row first
};

PfmData parse_pfm(const Bytes& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != 'f' && bytes[1] != 'F')) {
    throw FormatError("PFM: missing 'Pf'/'PF' magic", 0);
  }
  PfmData out;
  out.channels = bytes[1] == 'F' ? 3 : 1;
  HeaderCursor cur(bytes, "PFM");
  cur.token(false);
  out.width = static_cast<int>(cur.integer(false, 1, kMaxExtent, "width"));
  out.height = static_cast<int>(cur.integer(false, 1, kMaxExtent, "height"));
  const std::size_t scale_at = cur.pos();
  const double scale = cur.real("scale");
  if (scale == 0.0) throw FormatError("PFM: scale must be nonzero", scale_at);
  cur.end_header();

  const bool little = scale < 0.0;
  const std::size_t row_samples =
      static_cast<std::size_t>(out.width) * static_cast<std::size_t>(out.channels);
  const std::size_t count = row_samples * static_cast<std::size_t>(out.height);
  const std::size_t payload = cur.pos();
  if (bytes.size() - payload < count * 4) {
    throw FormatError("PFM: truncated payload, expected " + std::to_string(count * 4) +
                          " bytes, found " + std::to_string(bytes.size() - payload),
                      bytes.size());
  }
  out.samples.resize(count);
  for (int r = 0; r < out.height; ++r) {
    // Rows are stored bottom to top.
    const std::size_t dst_row = static_cast<std::size_t>(out.height - 1 - r) * row_samples;
    for (std::size_t i = 0; i < row_samples; ++i) {
      const std::uint8_t* b = &bytes[payload + (static_cast<std::size_t>(r) * row_samples + i) * 4];
      const std::uint32_t word =
          little ? (std::uint32_t{b[0]} | std::uint32_t{b[1]} << 8 | std::uint32_t{b[2]} << 16 |
                    std::uint32_t{b[3]} << 24)
                 : (std::uint32_t{b[3]} | std::uint32_t{b[2]} << 8 | std::uint32_t{b[1]} << 16 |
                    std::uint32_t{b[0]} << 24);
      out.samples[dst_row + i] = std::bit_cast<float>(word);
    }
  }
  return out;
}

Bytes encode_pfm(int height, int width, int channels, std::span<const float> samples) {
  const std::string header = std::string(channels == 3 ? "PF" : "Pf") + "\n" +
                             std::to_string(width) + " " + std::to_string(height) + "\n-1.0\n";
  Bytes out(header.begin(), header.end());
  const std::size_t row_samples =
      static_cast<std::size_t>(width) * static_cast<std::size_t>(channels);
  out.reserve(out.size() + samples.size() * 4);
  for (int r = height - 1; r >= 0; --r) {
    for (std::size_t i = 0; i < row_samples; ++i) {
      const auto word = std::bit_cast<std::uint32_t>(samples[static_cast<std::size_t>(r) * row_samples + i]);
      for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(word >> (8 * k)));
    }
  }
  return out;
}

ImageF parse_pnm(const Bytes& bytes) {
  const int channels = bytes[1] == '6' ? 3 : 1;
  HeaderCursor cur(bytes, "PNM");
  cur.token(true);
  const long width = cur.integer(true, 1, kMaxExtent, "width");
  const long height = cur.integer(true, 1, kMaxExtent, "height");
  const long maxval = cur.integer(true, 1, 65535, "maxval");
  cur.end_header();
  const std::size_t bytes_per_sample = maxval > 255 ? 2 : 1;
  const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
                            static_cast<std::size_t>(channels);
  const std::size_t payload = cur.pos();
  if (bytes.size() - payload < count * bytes_per_sample) {
    throw FormatError("PNM: truncated payload", bytes.size());
  }
  std::vector<float> samples(count);
  const float inv = 1.0f / static_cast<float>(maxval);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint8_t* b = &bytes[payload + i * bytes_per_sample];
    const unsigned code = bytes_per_sample == 2 ? (unsigned{b[0]} << 8 | b[1]) : b[0];
    samples[i] = std::min(1.0f, static_cast<float>(code) * inv);
  }
  return ImageF(static_cast<int>(height), static_cast<int>(width), channels, std::move(samples));
}

unsigned quantize(float v, unsigned maxcode) {
  const float c = std::clamp(v, 0.0f, 1.0f) * static_cast<float>(maxcode);
  return static_cast<unsigned>(std::lround(c));
}

Bytes encode_pnm(const ImageF& img, int bit_depth) {
  const unsigned maxcode = bit_depth == 16 ? 65535u : 255u;
  const std::string header = std::string(img.channels() == 3 ? "P6" : "P5") + "\n" +
                             std::to_string(img.width()) + " " + std::to_string(img.height()) +
                             "\n" + std::to_string(maxcode) + "\n";
  Bytes out(header.begin(), header.end());
  for (float v : img.data()) {
    const unsigned code = quantize(v, maxcode);
    if (bit_depth == 16) out.push_back(static_cast<std::uint8_t>(code >> 8));
    out.push_back(static_cast<std::uint8_t>(code & 0xFF));
  }
  return out;
}

// libpng reports errors through longjmp; these hooks keep the message and
// read position so the caller can raise a FormatError after unwinding.
struct PngReadState {
  const Bytes* bytes = nullptr;
  std::size_t pos = 0;
  char message[256] = {};
};

void png_error_hook(png_structp png, png_const_charp msg) {
  auto* state = static_cast<PngReadState*>(png_get_error_ptr(png));
  std::snprintf(state->message, sizeof(state->message), "%s", msg);
  png_longjmp(png, 1);
}

void png_warning_hook(png_structp, png_const_charp) {}

void png_read_hook(png_structp png, png_bytep out, png_size_t length) {
  auto* state = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (state->bytes->size() - state->pos < length) {
    png_error(png, "truncated PNG stream");
  }
  std::memcpy(out, state->bytes->data() + state->pos, length);
  state->pos += length;
}

ImageF parse_png(const Bytes& bytes) {
  PngReadState state;
  state.bytes = &bytes;
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, &state, png_error_hook, png_warning_hook);
  if (png == nullptr) throw Error("libpng: cannot allocate read struct");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error("libpng: cannot allocate info struct");
  }

  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0, height = 0;
  int depth = 0, color = 0, channels = 0;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(std::string("PNG: ") + state.message, state.pos);
  }
  png_set_read_fn(png, &state, png_read_hook);
  png_read_info(png, info);
  png_get_IHDR(png, info, &width, &height, &depth, &color, nullptr, nullptr, nullptr);
  if (width > static_cast<png_uint_32>(kMaxExtent) || height > static_cast<png_uint_32>(kMaxExtent)) {
    png_error(png, "image extent too large");
  }
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  depth = png_get_bit_depth(png, info);
  channels = png_get_channels(png, info);
  if (depth != 8 && depth != 16) png_error(png, "unsupported bit depth");
  if (channels != 1 && channels != 3) png_error(png, "unsupported channel layout");

  const std::size_t rowbytes = png_get_rowbytes(png, info);
  pixels.resize(rowbytes * height);
  rows.resize(height);
  for (png_uint_32 r = 0; r < height; ++r) rows[r] = pixels.data() + r * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t count = static_cast<std::size_t>(width) * height * static_cast<std::size_t>(channels);
  std::vector<float> samples(count);
  if (depth == 16) {
    for (std::size_t i = 0; i < count; ++i) {
      samples[i] = static_cast<float>(unsigned{pixels[2 * i]} << 8 | pixels[2 * i + 1]) / 65535.0f;
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) samples[i] = static_cast<float>(pixels[i]) / 255.0f;
  }
  return ImageF(static_cast<int>(height), static_cast<int>(width), channels, std::move(samples));
}

struct PngWriteState {
  Bytes* out = nullptr;
  char message[256] = {};
};

void png_write_hook(png_structp png, png_bytep data, png_size_t length) {
  auto* state = static_cast<PngWriteState*>(png_get_io_ptr(png));
  state->out->insert(state->out->end(), data, data + length);
}

void png_flush_hook(png_structp) {}

void png_write_error_hook(png_structp png, png_const_charp msg) {
  auto* state = static_cast<PngWriteState*>(png_get_error_ptr(png));
  std::snprintf(state->message, sizeof(state->message), "%s", msg);
  png_longjmp(png, 1);
}

Bytes encode_png(const ImageF& img, int bit_depth) {
  const unsigned maxcode = bit_depth == 16 ? 65535u : 255u;
  const std::size_t bps = bit_depth == 16 ? 2 : 1;
  const std::size_t rowbytes = static_cast<std::size_t>(img.width()) *
                               static_cast<std::size_t>(img.channels()) * bps;
  std::vector<std::uint8_t> pixels(rowbytes * static_cast<std::size_t>(img.height()));
  {
    std::size_t i = 0;
    for (float v : img.data()) {
      const unsigned code = quantize(v, maxcode);
      if (bps == 2) pixels[i++] = static_cast<std::uint8_t>(code >> 8);
      pixels[i++] = static_cast<std::uint8_t>(code & 0xFF);
    }
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height()));
  for (std::size_t r = 0; r < rows.size(); ++r) rows[r] = pixels.data() + r * rowbytes;

  Bytes out;
  PngWriteState state;
  state.out = &out;
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, &state, png_write_error_hook, png_warning_hook);
  if (png == nullptr) throw Error("libpng: cannot allocate write struct");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("libpng: cannot allocate info struct");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(std::string("PNG encode failed: ") + state.message);
  }
  png_set_write_fn(png, &state, png_write_hook, png_flush_hook);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()),
               static_cast<png_uint_32>(img.height()), bit_depth,
               img.channels() == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

const std::uint8_t kPngMagic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};

}  // namespace

ImageF read_image(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  if (bytes.empty()) throw FormatError("empty file '" + path.string() + "'", 0);
  if (bytes.size() >= 8 && std::equal(kPngMagic, kPngMagic + 8, bytes.begin())) {
    return parse_png(bytes);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P') {
    if (bytes[1] == '5' || bytes[1] == '6') return parse_pnm(bytes);
    if (bytes[1] == 'f' || bytes[1] == 'F') {
      PfmData pfm = parse_pfm(bytes);
      return ImageF(pfm.height, pfm.width, pfm.channels, std::move(pfm.samples));
    }
  }
  throw FormatError("unrecognized image format in '" + path.string() + "'", 0);
}

void write_image(const std::filesystem::path& path, const ImageF& img, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) {
    throw InvalidParameter("bit depth must be 8 or 16, got " + std::to_string(bit_depth));
  }
  const std::string ext = lower_extension(path);
  if (ext == ".pfm") {
    write_file(path, encode_pfm(img.height(), img.width(), img.channels(), img.data()));
  } else if (ext == ".png") {
    write_file(path, encode_png(img, bit_depth));
  } else if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") {
    write_file(path, encode_pnm(img, bit_depth));
  } else {
    throw InvalidInput("cannot infer image format from extension of '" + path.string() + "'");
  }
}

DisparityMap read_pfm(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  if (bytes.empty()) throw FormatError("empty file '" + path.string() + "'", 0);
  PfmData pfm = parse_pfm(bytes);
  if (pfm.channels != 1) {
    throw FormatError("PFM: disparity file '" + path.string() + "' must be single-channel (Pf)", 0);
  }
  return DisparityMap(pfm.height, pfm.width, std::move(pfm.samples));
}

void write_pfm(const std::filesystem::path& path, const DisparityMap& disp) {
  write_file(path, encode_pfm(disp.height(), disp.width(), 1, disp.raw()));
}

void write_preview_png(const std::filesystem::path& path, const DisparityMap& disp) {
  float lo = INFINITY, hi = -INFINITY;
  const auto raw = disp.raw();
  const auto mask = disp.valid_mask();
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!mask[i]) continue;
    lo = std::min(lo, raw[i]);
    hi = std::max(hi, raw[i]);
  }
  ImageF preview(disp.height(), disp.width(), 1);
  auto dst = preview.data();
  const float range = hi > lo ? hi - lo : 1.0f;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    dst[i] = mask[i] ? std::clamp((raw[i] - lo) / range, 0.0f, 1.0f) : 0.0f;
  }
  write_file(path, encode_png(preview, 8));
}

}  // namespace mestereo
