#include "aquaseg/image.hpp"

#include <jpeglib.h>

#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace aquaseg {
namespace {

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open image " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

RgbImage read_ppm(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  std::size_t pos = 0;
  auto next_token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string tok;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) tok.push_back(static_cast<char>(bytes[pos++]));
    return tok;
  };
  if (next_token() != "P6") throw ValidationError(path.string() + ": not a binary PPM (P6)");
  int width = 0, height = 0, maxval = 0;
  try {
    width = std::stoi(next_token());
    height = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw ValidationError(path.string() + ": malformed PPM header");
  }
  if (width < 1 || height < 1 || maxval != 255) throw ValidationError(path.string() + ": unsupported PPM geometry or depth");
  ++pos;  // single whitespace after maxval
  const std::size_t need = static_cast<std::size_t>(width) * height * 3;
  if (bytes.size() < pos + need) throw ValidationError(path.string() + ": truncated PPM payload");

  RgbImage img(height, width);
  const unsigned char* p = bytes.data() + pos;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < 3; ++c) img.channels[c](y, x) = *p++;
  return img;
}

std::uint32_t le32(const std::vector<unsigned char>& b, std::size_t off) {
  return b[off] | (b[off + 1] << 8) | (b[off + 2] << 16) | (static_cast<std::uint32_t>(b[off + 3]) << 24);
}

RgbImage read_bmp(const std::filesystem::path& path) {
  const auto b = slurp(path);
  if (b.size() < 54 || b[0] != 'B' || b[1] != 'M') throw ValidationError(path.string() + ": not a BMP file");
  const std::uint32_t data_offset = le32(b, 10);
  const auto width = static_cast<std::int32_t>(le32(b, 18));
  const auto raw_height = static_cast<std::int32_t>(le32(b, 22));
  const int bpp = b[28] | (b[29] << 8);
  const std::uint32_t compression = le32(b, 30);
  if ((bpp != 24 && bpp != 32) || (compression != 0 && compression != 3))
    throw ValidationError(path.string() + ": only uncompressed 24/32-bit BMP is supported");
  const bool bottom_up = raw_height > 0;
  const int height = bottom_up ? raw_height : -raw_height;
  if (width < 1 || height < 1) throw ValidationError(path.string() + ": bad BMP dimensions");
  const int bytes_pp = bpp / 8;
  const std::size_t stride = (static_cast<std::size_t>(width) * bytes_pp + 3) & ~std::size_t{3};
  if (b.size() < data_offset + stride * height) throw ValidationError(path.string() + ": truncated BMP payload");

  RgbImage img(height, width);
  for (int row = 0; row < height; ++row) {
    const int y = bottom_up ? height - 1 - row : row;
    const unsigned char* p = b.data() + data_offset + stride * row;
    for (int x = 0; x < width; ++x, p += bytes_pp) {
      img.channels[0](y, x) = p[2];
      img.channels[1](y, x) = p[1];
      img.channels[2](y, x) = p[0];
    }
  }
  return img;
}

void write_ppm(const std::filesystem::path& path, const RgbImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<char> row(static_cast<std::size_t>(img.width()) * 3);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < 3; ++c) row[3 * x + c] = static_cast<char>(img.channels[c](y, x));
    out.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
}

void put16(std::vector<unsigned char>& v, std::uint16_t x) {
  v.push_back(x & 0xff);
  v.push_back(x >> 8);
}
void put32(std::vector<unsigned char>& v, std::uint32_t x) {
  for (int i = 0; i < 4; ++i) v.push_back((x >> (8 * i)) & 0xff);
}

void write_bmp(const std::filesystem::path& path, const RgbImage& img) {
  const std::size_t stride = (static_cast<std::size_t>(img.width()) * 3 + 3) & ~std::size_t{3};
  const auto payload = static_cast<std::uint32_t>(stride * img.height());
  std::vector<unsigned char> v;
  v.reserve(54 + payload);
  v.push_back('B');
  v.push_back('M');
  put32(v, 54 + payload);
  put32(v, 0);
  put32(v, 54);
  put32(v, 40);
  put32(v, static_cast<std::uint32_t>(img.width()));
  put32(v, static_cast<std::uint32_t>(img.height()));
  put16(v, 1);
  put16(v, 24);
  put32(v, 0);
  put32(v, payload);
  put32(v, 2835);
  put32(v, 2835);
  put32(v, 0);
  put32(v, 0);
  for (int row = 0; row < img.height(); ++row) {
    const int y = img.height() - 1 - row;
    std::size_t written = 0;
    for (int x = 0; x < img.width(); ++x, written += 3) {
      v.push_back(img.channels[2](y, x));
      v.push_back(img.channels[1](y, x));
      v.push_back(img.channels[0](y, x));
    }
    for (; written < stride; ++written) v.push_back(0);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size()));
}

}  // namespace

namespace {

struct JpegError {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegError*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

RgbImage read_jpeg(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  std::vector<unsigned char> pixels;
  int width = 0, height = 0;
  jpeg_decompress_struct cinfo{};
  JpegError err{};
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw ValidationError(path.string() + ": JPEG decode failed: " + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  width = static_cast<int>(cinfo.output_width);
  height = static_cast<int>(cinfo.output_height);
  pixels.resize(static_cast<std::size_t>(width) * height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);

  RgbImage img(height, width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < 3; ++c) img.channels[c](y, x) = pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  return img;
}

}  // namespace

bool is_supported_image(const std::filesystem::path& path) {
  const auto ext = lower_extension(path);
  return ext == ".ppm" || ext == ".pnm" || ext == ".bmp" || ext == ".jpg" || ext == ".jpeg";
}

RgbImage read_image(const std::filesystem::path& path) {
  const auto ext = lower_extension(path);
  if (ext == ".ppm" || ext == ".pnm") return read_ppm(path);
  if (ext == ".bmp") return read_bmp(path);
  if (ext == ".jpg" || ext == ".jpeg") return read_jpeg(path);
  throw ValidationError(path.string() + ": unsupported raster format (use .ppm, .bmp or .jpg)");
}

void write_image(const std::filesystem::path& path, const RgbImage& image) {
  const auto ext = lower_extension(path);
  if (ext == ".ppm" || ext == ".pnm") return write_ppm(path, image);
  if (ext == ".bmp") return write_bmp(path, image);
  throw ValidationError(path.string() + ": unsupported raster format (use .ppm or .bmp)");
}

RgbImage resize_image(const RgbImage& image, int out_h, int out_w) {
  if (image.height() == out_h && image.width() == out_w) return image;
  RgbImage out;
  for (int c = 0; c < 3; ++c) {
    const GridF resized = resize_bilinear(image.channels[c].cast<float>(), out_h, out_w);
    out.channels[c] = resized.round().cwiseMax(0.0f).cwiseMin(255.0f).cast<std::uint8_t>();
  }
  return out;
}

}  // namespace aquaseg
