#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "atos/tensor.hpp"

namespace atos {

/// Raised for unreadable, truncated or malformed files.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace le {

void write_u32(std::ostream& out, std::uint32_t v);
void write_f64(std::ostream& out, double v);
std::uint32_t read_u32(std::istream& in);
double read_f64(std::istream& in);

}  // namespace le

// ATN1 tensor files: "ATN1", then c, w, h as u32 LE, then c*w*h f64 LE.
void write_atn(std::ostream& out, const Tensor& t);
Tensor read_atn(std::istream& in);
void save_atn(const std::filesystem::path& path, const Tensor& t);
Tensor load_atn(const std::filesystem::path& path);

/// A stack of same-shaped images with class labels.
///
/// On disk the images are back-to-back ATN1 records in one file and the
/// labels are a sidecar of u32 LE values, one per record.
struct Dataset {
  std::vector<Tensor> images;
  std::vector<std::uint32_t> labels;

  std::size_t size() const { return images.size(); }
  bool empty() const { return images.empty(); }
};

void save_dataset(const std::filesystem::path& images_path,
                  const std::filesystem::path& labels_path, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& images_path,
                     const std::filesystem::path& labels_path);

/// Default label sidecar for an image file: "<images>.labels".
std::filesystem::path default_labels_path(const std::filesystem::path& images_path);

/// Binary PGM (P5), 8-bit, width x height, row-major.
void save_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height,
              const std::vector<std::uint8_t>& pixels);

/// Reads a binary PGM (P5) or PPM (P6) with maxval <= 255 into a tensor of
/// 1 or 3 channels scaled to [0, 1].
Tensor load_pnm(const std::filesystem::path& path);

/// Loads an ATN1 tensor or a P5/P6 image, chosen by the file's magic bytes.
Tensor load_image(const std::filesystem::path& path);

}  // namespace atos
