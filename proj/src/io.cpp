#include "atos/io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>

namespace atos {

namespace le {

void write_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> b{};
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
  out.write(b.data(), b.size());
}

void write_f64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xFFu);
  out.write(b.data(), b.size());
}

std::uint32_t read_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), b.size())) {
    throw FormatError("unexpected end of file reading u32");
  }
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double read_f64(std::istream& in) {
  std::array<unsigned char, 8> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), b.size())) {
    throw FormatError("unexpected end of file reading f64");
  }
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace le

namespace {

constexpr char kAtnMagic[4] = {'A', 'T', 'N', '1'};

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  return out;
}

}  // namespace

void write_atn(std::ostream& out, const Tensor& t) {
  out.write(kAtnMagic, 4);
  le::write_u32(out, static_cast<std::uint32_t>(t.shape().channels));
  le::write_u32(out, static_cast<std::uint32_t>(t.shape().width));
  le::write_u32(out, static_cast<std::uint32_t>(t.shape().height));
  for (double v : t.values()) le::write_f64(out, v);
}

Tensor read_atn(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4)) throw FormatError("truncated ATN1 header");
  if (std::memcmp(magic, kAtnMagic, 4) != 0) throw FormatError("bad ATN1 magic");
  Shape shape;
  shape.channels = le::read_u32(in);
  shape.width = le::read_u32(in);
  shape.height = le::read_u32(in);
  if (shape.size() == 0) throw FormatError("ATN1 tensor has an empty dimension");
  std::vector<double> data(shape.size());
  for (double& v : data) v = le::read_f64(in);
  return Tensor(shape, std::move(data));
}

void save_atn(const std::filesystem::path& path, const Tensor& t) {
  auto out = open_out(path);
  write_atn(out, t);
  if (!out) throw FormatError("write failed: " + path.string());
}

Tensor load_atn(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return read_atn(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::filesystem::path default_labels_path(const std::filesystem::path& images_path) {
  return std::filesystem::path(images_path.string() + ".labels");
}

void save_dataset(const std::filesystem::path& images_path,
                  const std::filesystem::path& labels_path, const Dataset& data) {
  if (data.images.size() != data.labels.size()) {
    throw std::invalid_argument("dataset has " + std::to_string(data.images.size()) +
                                " images but " + std::to_string(data.labels.size()) + " labels");
  }
  auto out = open_out(images_path);
  for (const auto& img : data.images) write_atn(out, img);
  auto lab = open_out(labels_path);
  for (auto l : data.labels) le::write_u32(lab, l);
  if (!out || !lab) throw FormatError("write failed: " + images_path.string());
}

Dataset load_dataset(const std::filesystem::path& images_path,
                     const std::filesystem::path& labels_path) {
  Dataset data;
  auto in = open_in(images_path);
  while (in.peek() != std::char_traits<char>::eof()) {
    try {
      data.images.push_back(read_atn(in));
    } catch (const FormatError& e) {
      throw FormatError(images_path.string() + ": record " + std::to_string(data.images.size()) +
                        ": " + e.what());
    }
    if (data.images.back().shape() != data.images.front().shape()) {
      throw FormatError(images_path.string() + ": mixed image shapes");
    }
  }
  auto lab = open_in(labels_path);
  for (std::size_t i = 0; i < data.images.size(); ++i) data.labels.push_back(le::read_u32(lab));
  if (lab.peek() != std::char_traits<char>::eof()) {
    throw FormatError(labels_path.string() + ": more labels than images");
  }
  return data;
}

void save_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height,
              const std::vector<std::uint8_t>& pixels) {
  if (pixels.size() != width * height) throw std::invalid_argument("pgm size mismatch");
  auto out = open_out(path);
  out << "P5\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
  if (!out) throw FormatError("write failed: " + path.string());
}

namespace {

std::size_t read_pnm_int(std::istream& in) {
  // Skips whitespace and '#' comments between header tokens.
  for (;;) {
    int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  std::size_t v = 0;
  if (!(in >> v)) throw FormatError("malformed PNM header");
  return v;
}

}  // namespace

Tensor load_pnm(const std::filesystem::path& path) {
  auto in = open_in(path);
  char magic[2];
  if (!in.read(magic, 2) || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6')) {
    throw FormatError(path.string() + ": not a binary PGM/PPM");
  }
  const std::size_t channels = magic[1] == '5' ? 1 : 3;
  const std::size_t width = read_pnm_int(in);
  const std::size_t height = read_pnm_int(in);
  const std::size_t maxval = read_pnm_int(in);
  if (width == 0 || height == 0 || maxval == 0 || maxval > 255) {
    throw FormatError(path.string() + ": unsupported PNM dimensions or maxval");
  }
  in.get();  // single whitespace before raster
  std::vector<unsigned char> raster(width * height * channels);
  if (!in.read(reinterpret_cast<char*>(raster.data()),
               static_cast<std::streamsize>(raster.size()))) {
    throw FormatError(path.string() + ": truncated raster");
  }
  Tensor t(Shape{channels, width, height});
  for (std::size_t row = 0; row < height; ++row) {
    for (std::size_t col = 0; col < width; ++col) {
      for (std::size_t ch = 0; ch < channels; ++ch) {
        const auto v = raster[(row * width + col) * channels + ch];
        t.at(ch, row, col) = static_cast<double>(v) / static_cast<double>(maxval);
      }
    }
  }
  return t;
}

Tensor load_image(const std::filesystem::path& path) {
  auto in = open_in(path);
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() == 4 && std::memcmp(magic, kAtnMagic, 4) == 0) return load_atn(path);
  return load_pnm(path);
}

}  // namespace atos
