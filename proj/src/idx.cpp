#include "sfda/idx.hpp"

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace sfda {

namespace {

std::uint32_t read_u32_be(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("truncated IDX header in " + path);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

std::vector<unsigned char> read_bytes(std::istream& in, size_t count,
                                      const std::string& path) {
  std::vector<unsigned char> buf(count);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count));
  if (in.gcount() != static_cast<std::streamsize>(count))
    throw std::runtime_error("truncated IDX payload in " + path);
  return buf;
}

}  // namespace

Dataset read_idx(const std::string& images_path, const std::string& labels_path,
                 std::pair<int, int> class_pair) {
  if (class_pair.first == class_pair.second)
    throw std::invalid_argument("read_idx: the two classes must differ");
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw std::runtime_error("cannot open: " + images_path);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw std::runtime_error("cannot open: " + labels_path);

  const std::uint32_t img_magic = read_u32_be(img, images_path);
  if (img_magic != 0x00000803u)
    throw std::runtime_error("bad image magic in " + images_path +
                             " (expected 0x00000803)");
  const std::uint32_t img_count = read_u32_be(img, images_path);
  const std::uint32_t rows = read_u32_be(img, images_path);
  const std::uint32_t cols = read_u32_be(img, images_path);

  const std::uint32_t lab_magic = read_u32_be(lab, labels_path);
  if (lab_magic != 0x00000801u)
    throw std::runtime_error("bad label magic in " + labels_path +
                             " (expected 0x00000801)");
  const std::uint32_t lab_count = read_u32_be(lab, labels_path);

  if (img_count != lab_count)
    throw std::runtime_error("image/label count mismatch: " +
                             std::to_string(img_count) + " images vs " +
                             std::to_string(lab_count) + " labels");
  const size_t pixels = static_cast<size_t>(rows) * cols;
  if (pixels == 0) throw std::runtime_error("zero-sized images in " + images_path);

  const std::vector<unsigned char> labels = read_bytes(lab, lab_count, labels_path);

  Dataset out;
  for (std::uint32_t i = 0; i < img_count; ++i) {
    const std::vector<unsigned char> raw = read_bytes(img, pixels, images_path);
    const int label = labels[i];
    if (label != class_pair.first && label != class_pair.second) continue;
    std::vector<double> x(pixels);
    for (size_t j = 0; j < pixels; ++j) x[j] = raw[j] / 255.0;
    out.features.push_back(std::move(x));
    out.labels.push_back(label == class_pair.second ? 1.0 : 0.0);
  }
  if (out.features.empty())
    throw std::runtime_error("no samples with labels " +
                             std::to_string(class_pair.first) + " or " +
                             std::to_string(class_pair.second) + " in " + labels_path);
  out.validate();
  return out;
}

}
