#pragma once

#include <zlib.h>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "abm/colormap.hpp"
#include "abm/tensor.hpp"

namespace abm {

// Minimal PNG codec for 8-bit RGB images, deflate via zlib. Writing always
// emits filter 0 scanlines at a fixed compression level, so the bytes are a
// pure function of the pixels; reading handles all five scanline filters.

namespace detail {

inline void png_put_u32be(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>(v & 0xff));
}

inline std::uint32_t png_get_u32be(const unsigned char* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

inline void png_chunk(std::string& out, const char type[4], const std::string& payload) {
  png_put_u32be(out, static_cast<std::uint32_t>(payload.size()));
  const std::size_t crc_start = out.size();
  out.append(type, 4);
  out.append(payload);
  const auto crc = crc32(0, reinterpret_cast<const Bytef*>(out.data() + crc_start),
                         static_cast<uInt>(out.size() - crc_start));
  png_put_u32be(out, static_cast<std::uint32_t>(crc));
}

}  // namespace detail

inline std::string encode_png(const RgbImage& img) {
  if (img.channels != 3) throw std::invalid_argument("encode_png: expected 3 channels");
  const int h = img.height, w = img.width;
  std::string raw;
  raw.reserve(static_cast<std::size_t>(h) * (1 + static_cast<std::size_t>(w) * 3));
  for (int y = 0; y < h; ++y) {
    raw.push_back('\0');  // filter type 0 (None)
    raw.append(reinterpret_cast<const char*>(img.row(y, 0)), static_cast<std::size_t>(w) * 3);
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::string compressed(bound, '\0');
  if (compress2(reinterpret_cast<Bytef*>(compressed.data()), &bound,
                reinterpret_cast<const Bytef*>(raw.data()), static_cast<uLong>(raw.size()),
                6) != Z_OK)
    throw std::runtime_error("encode_png: deflate failed");
  compressed.resize(bound);

  std::string ihdr;
  detail::png_put_u32be(ihdr, static_cast<std::uint32_t>(w));
  detail::png_put_u32be(ihdr, static_cast<std::uint32_t>(h));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // color type: truecolor RGB
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter method
  ihdr.push_back(0);   // no interlace

  std::string out("\x89PNG\r\n\x1a\n", 8);
  detail::png_chunk(out, "IHDR", ihdr);
  detail::png_chunk(out, "IDAT", compressed);
  detail::png_chunk(out, "IEND", "");
  return out;
}

inline RgbImage decode_png(const std::string& bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 8 || std::memcmp(p, "\x89PNG\r\n\x1a\n", 8) != 0)
    throw std::runtime_error("decode_png: not a PNG file");

  std::size_t pos = 8;
  int w = 0, h = 0;
  std::string idat;
  bool saw_ihdr = false;
  while (pos + 12 <= bytes.size()) {
    const std::uint32_t len = detail::png_get_u32be(p + pos);
    if (pos + 12 + len > bytes.size()) throw std::runtime_error("decode_png: truncated chunk");
    const char* type = bytes.data() + pos + 4;
    const unsigned char* payload = p + pos + 8;
    if (std::memcmp(type, "IHDR", 4) == 0) {
      w = static_cast<int>(detail::png_get_u32be(payload));
      h = static_cast<int>(detail::png_get_u32be(payload + 4));
      if (payload[8] != 8 || payload[9] != 2 || payload[12] != 0)
        throw std::runtime_error("decode_png: only 8-bit non-interlaced RGB is supported");
      saw_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.append(reinterpret_cast<const char*>(payload), len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + len;
  }
  if (!saw_ihdr || w <= 0 || h <= 0) throw std::runtime_error("decode_png: missing IHDR");

  const std::size_t stride = static_cast<std::size_t>(w) * 3;
  std::vector<unsigned char> raw(static_cast<std::size_t>(h) * (stride + 1));
  uLongf raw_len = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &raw_len, reinterpret_cast<const Bytef*>(idat.data()),
                 static_cast<uLong>(idat.size())) != Z_OK ||
      raw_len != raw.size())
    throw std::runtime_error("decode_png: inflate failed");

  RgbImage img(h, w, 3);
  std::vector<unsigned char> prev(stride, 0);
  auto paeth = [](int a, int b, int c) {
    const int pp = a + b - c, pa = std::abs(pp - a), pb = std::abs(pp - b), pc = std::abs(pp - c);
    if (pa <= pb && pa <= pc) return a;
    return pb <= pc ? b : c;
  };
  for (int y = 0; y < h; ++y) {
    const unsigned char filter = raw[static_cast<std::size_t>(y) * (stride + 1)];
    unsigned char* line = raw.data() + static_cast<std::size_t>(y) * (stride + 1) + 1;
    for (std::size_t i = 0; i < stride; ++i) {
      const int left = i >= 3 ? line[i - 3] : 0;
      const int up = prev[i];
      const int upleft = i >= 3 ? prev[i - 3] : 0;
      int v = line[i];
      switch (filter) {
        case 0: break;
        case 1: v += left; break;
        case 2: v += up; break;
        case 3: v += (left + up) / 2; break;
        case 4: v += paeth(left, up, upleft); break;
        default: throw std::runtime_error("decode_png: bad filter type");
      }
      line[i] = static_cast<unsigned char>(v & 0xff);
    }
    std::memcpy(img.row(y, 0), line, stride);
    std::memcpy(prev.data(), line, stride);
  }
  return img;
}

inline std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for reading: " + path);
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return bytes;
}

// Write via a temporary then rename, so failures never leave partial files.
inline void write_file_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open for writing: " + tmp);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw std::runtime_error("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("rename failed: " + path);
}

inline void write_png_file(const std::string& path, const RgbImage& img) {
  write_file_atomic(path, encode_png(img));
}

inline RgbImage read_png_file(const std::string& path) { return decode_png(read_file(path)); }

// Byte image -> float tensor in [0,1] (divide by 255).
template <typename T = float>
Tensor3<T> normalize_image(const RgbImage& img) {
  Tensor3<T> out(img.height, img.width, img.channels);
  for (std::size_t i = 0; i < img.values.size(); ++i)
    out.values[i] = static_cast<T>(img.values[i]) / T(255);
  return out;
}

// Float tensor in [0,1] -> byte image (multiply by 255, round half away from zero).
template <typename T>
RgbImage denormalize_image(const Tensor3<T>& t) {
  RgbImage out(t.height, t.width, t.channels);
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    const double v = std::clamp(static_cast<double>(t.values[i]), 0.0, 1.0);
    out.values[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return out;
}

}  // namespace abm
