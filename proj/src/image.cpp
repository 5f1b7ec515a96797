#include "sea/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

namespace sea {

namespace {

std::string next_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

// Row (or column) resampling matrix: out = R * in, each output cell the
// area-weighted mean of the source cells it overlaps.
Eigen::MatrixXd area_weights(int out, int in) {
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(out, in);
  const double scale = double(in) / double(out);
  for (int o = 0; o < out; ++o) {
    const double lo = o * scale, hi = (o + 1) * scale;
    for (int i = static_cast<int>(std::floor(lo)); i < std::min(in, static_cast<int>(std::ceil(hi)));
         ++i) {
      const double overlap = std::min(hi, double(i + 1)) - std::max(lo, double(i));
      if (overlap > 0) r(o, i) = overlap / scale;
    }
  }
  return r;
}

}  // namespace

Image read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError("cannot open frame file " + path.string());
  if (next_token(in) != "P5") throw ImageError(path.string() + ": not a binary PGM (P5)");
  Image img;
  try {
    img.width = std::stoi(next_token(in));
    img.height = std::stoi(next_token(in));
    const int maxval = std::stoi(next_token(in));
    if (maxval != 255) throw ImageError(path.string() + ": only 8-bit PGM is supported");
  } catch (const std::logic_error&) {
    throw ImageError(path.string() + ": malformed PGM header");
  }
  if (img.width <= 0 || img.height <= 0) throw ImageError(path.string() + ": zero-sized image");
  img.channels = 1;
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
    throw ImageError(path.string() + ": truncated PGM data");
  return img;
}

void write_pgm(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1) throw ImageError("write_pgm: image must be grayscale");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageError("cannot write " + path.string());
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
}

Image read_png(const std::filesystem::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str()))
    throw ImageError(path.string() + ": " + png.message);
  const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  Image img;
  img.width = static_cast<int>(png.width);
  img.height = static_cast<int>(png.height);
  img.channels = color ? 3 : 1;
  img.pixels.resize(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, img.pixels.data(), 0, nullptr)) {
    png_image_free(&png);
    throw ImageError(path.string() + ": " + png.message);
  }
  return img;
}

Image read_image(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".png" || ext == ".PNG") return read_png(path);
  return read_pgm(path);
}

Frame preprocess_frame(const Image& raw, int size) {
  if (raw.width <= 0 || raw.height <= 0 || raw.pixels.empty())
    throw ImageError("preprocess_frame: zero-sized image");
  if (raw.channels != 1 && raw.channels != 3)
    throw ImageError("preprocess_frame: expected 1 or 3 channels");
  Eigen::MatrixXd gray(raw.height, raw.width);
  for (int r = 0; r < raw.height; ++r)
    for (int c = 0; c < raw.width; ++c) {
      if (raw.channels == 1) {
        gray(r, c) = raw.at(r, c) / 255.0;
      } else {
        gray(r, c) =
            (0.299 * raw.at(r, c, 0) + 0.587 * raw.at(r, c, 1) + 0.114 * raw.at(r, c, 2)) / 255.0;
      }
    }
  const Eigen::MatrixXd rows = area_weights(size, raw.height);
  const Eigen::MatrixXd cols = area_weights(size, raw.width);
  Eigen::MatrixXd out = rows * gray * cols.transpose();
  return out.array().min(1.0).max(0.0).cast<float>();
}

Image frame_to_image(const Frame& frame) {
  Image img;
  img.width = static_cast<int>(frame.cols());
  img.height = static_cast<int>(frame.rows());
  img.channels = 1;
  img.pixels.resize(static_cast<std::size_t>(frame.size()));
  for (Eigen::Index i = 0; i < frame.size(); ++i) {
    const float v = std::clamp(frame.data()[i], 0.0f, 1.0f);
    img.pixels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  return img;
}

}  // namespace sea
