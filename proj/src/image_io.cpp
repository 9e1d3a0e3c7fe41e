#include "noisetrans/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace noisetrans {

namespace {

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& why) {
  throw std::runtime_error("image '" + path.string() + "': " + why);
}

// Reads one whitespace-delimited token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (!std::isspace(ch)) break;
  }
  if (ch == EOF) return tok;
  tok.push_back(static_cast<char>(ch));
  while ((ch = in.peek()) != EOF && !std::isspace(ch)) {
    tok.push_back(static_cast<char>(in.get()));
  }
  return tok;
}

long parse_long(const std::filesystem::path& path, const std::string& tok, const char* what) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    fail(path, std::string("malformed ") + what + " field '" + tok + "'");
  }
}

}  // namespace

Tensor load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open");
  const std::string magic = next_token(in);
  std::int64_t channels;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    fail(path, "unsupported format '" + magic + "' (expected binary P5 or P6)");
  }
  const long w = parse_long(path, next_token(in), "width");
  const long h = parse_long(path, next_token(in), "height");
  const long maxval = parse_long(path, next_token(in), "maxval");
  if (w <= 0 || h <= 0) fail(path, "non-positive dimensions");
  if (maxval != 255) {
    fail(path, "unsupported bit depth (maxval " + std::to_string(maxval) + ", expected 255)");
  }
  in.get();  // single whitespace byte before the raster

  const std::size_t count = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) *
                            static_cast<std::size_t>(channels);
  std::vector<unsigned char> raw(count);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count));
  if (static_cast<std::size_t>(in.gcount()) != count) fail(path, "truncated raster data");

  // Interleaved bytes -> [C,H,W] planes in [0,1].
  Tensor img({channels, h, w});
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  for (std::int64_t p = 0; p < plane; ++p) {
    for (std::int64_t c = 0; c < channels; ++c) {
      img[c * plane + p] = static_cast<double>(raw[static_cast<std::size_t>(p * channels + c)]) / 255.0;
    }
  }
  return img;
}

void save_image(const std::filesystem::path& path, const Tensor& image) {
  if (image.rank() != 3 || (image.dim(0) != 1 && image.dim(0) != 3)) {
    throw std::invalid_argument("save_image: expected a [1,H,W] or [3,H,W] tensor, got " +
                                shape_to_string(image.shape()));
  }
  const std::int64_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path, "cannot open for writing");
  out << (c == 1 ? "P5" : "P6") << '\n' << w << ' ' << h << '\n' << 255 << '\n';
  const std::int64_t plane = h * w;
  std::vector<unsigned char> raw(static_cast<std::size_t>(plane * c));
  for (std::int64_t p = 0; p < plane; ++p) {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      double v = std::round(image[ch * plane + p] * 255.0);
      v = std::min(255.0, std::max(0.0, v));
      raw[static_cast<std::size_t>(p * c + ch)] = static_cast<unsigned char>(v);
    }
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) fail(path, "write failed");
}

}  // namespace noisetrans
