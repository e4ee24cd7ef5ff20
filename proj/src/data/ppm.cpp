#include <cctype>
#include <fstream>
#include <iterator>

#include "flowforge/data.hpp"

namespace flowforge {

FormatError::FormatError(const std::string& file, std::uint64_t offset, const std::string& why)
    : std::runtime_error(file + ": at byte " + std::to_string(offset) + ": " + why), offset_(offset) {}

namespace {

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct HeaderReader {
  const std::vector<unsigned char>& bytes;
  const std::string& file;
  std::size_t pos = 0;

  void skip_space_and_comments() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        return;
      }
    }
  }

  std::size_t number(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos;
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > 1u << 24) throw FormatError(file, start, std::string(what) + " is implausibly large");
      ++pos;
    }
    if (pos == start) throw FormatError(file, start, std::string("expected ") + what);
    return v;
  }
};

}  // namespace

ImageTensor load_ppm(const std::filesystem::path& path) {
  const std::string file = path.string();
  const std::vector<unsigned char> bytes = read_all(path);
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw FormatError(file, 0, "not a binary PGM (P5) or PPM (P6) file");
  }
  const std::size_t channels = bytes[1] == '6' ? 3 : 1;
  HeaderReader r{bytes, file, 2};
  const std::size_t width = r.number("width");
  const std::size_t height = r.number("height");
  const std::size_t maxval_pos = r.pos;
  const std::size_t maxval = r.number("maxval");
  if (width == 0 || height == 0) throw FormatError(file, maxval_pos, "image has zero extent");
  if (maxval != 255) {
    throw FormatError(file, maxval_pos, "maxval " + std::to_string(maxval) + " is unsupported (only 255)");
  }
  if (r.pos >= bytes.size() || !std::isspace(bytes[r.pos])) {
    throw FormatError(file, r.pos, "expected a single whitespace byte after maxval");
  }
  ++r.pos;
  const std::size_t payload = width * height * channels;
  if (bytes.size() - r.pos < payload) {
    throw FormatError(file, bytes.size(),
                      "truncated payload: expected " + std::to_string(payload) + " bytes, found " +
                          std::to_string(bytes.size() - r.pos));
  }
  ImageTensor out({1, channels, height, width});
  // Interleaved RGB on disk, planar in memory.
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x)
      for (std::size_t c = 0; c < channels; ++c) out.at(0, c, y, x) = bytes[r.pos + (y * width + x) * channels + c];
  return out;
}

void save_ppm(const ImageTensor& image, const std::filesystem::path& path) {
  const Shape4& s = image.shape;
  if (s.n < 1 || (s.c != 1 && s.c != 3) || s.h == 0 || s.w == 0) {
    throw std::invalid_argument("save_ppm: need one or three channels, got shape " + to_string(s));
  }
  std::string out = (s.c == 3 ? "P6\n" : "P5\n") + std::to_string(s.w) + " " + std::to_string(s.h) + "\n255\n";
  const std::size_t header = out.size();
  out.resize(header + s.example());
  for (std::size_t y = 0; y < s.h; ++y)
    for (std::size_t x = 0; x < s.w; ++x)
      for (std::size_t c = 0; c < s.c; ++c)
        out[header + (y * s.w + x) * s.c + c] = static_cast<char>(image.at(0, c, y, x));
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace flowforge
