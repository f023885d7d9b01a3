#include "bcnn/dataset.hpp"

#include <fstream>

#include "bcnn/error.hpp"

namespace bcnn {

Dataset Dataset::head(std::size_t count) const {
  if (count >= size()) return *this;
  if (count == 0) throw std::invalid_argument("dataset subset must be non-empty");
  Dataset out;
  out.images = images.slice_rows(0, count);
  out.fine_labels.assign(fine_labels.begin(), fine_labels.begin() + static_cast<std::ptrdiff_t>(count));
  if (coarse_labels) {
    out.coarse_labels = Labels(coarse_labels->begin(), coarse_labels->begin() + static_cast<std::ptrdiff_t>(count));
  }
  out.split = split;
  return out;
}

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset, const char* what) {
  if (offset + 4 > bytes.size()) throw FormatError(offset, std::string("truncated ") + what);
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

float scale_pixel(std::uint8_t v) { return static_cast<float>(static_cast<double>(v) / 255.0); }

}  // namespace

Dataset decode_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels, std::string split) {
  constexpr std::uint32_t kImageMagic = 2051, kLabelMagic = 2049;
  if (const auto magic = read_be32(images, 0, "IDX image header"); magic != kImageMagic) {
    throw FormatError(0, "IDX image magic " + std::to_string(magic) + " != 2051");
  }
  const std::size_t count = read_be32(images, 4, "IDX image header");
  const std::size_t rows = read_be32(images, 8, "IDX image header");
  const std::size_t cols = read_be32(images, 12, "IDX image header");
  if (count == 0 || rows == 0 || cols == 0) throw FormatError(4, "IDX image header has a zero dimension");
  const std::size_t expected = 16 + count * rows * cols;
  if (images.size() != expected) {
    throw FormatError(std::min(images.size(), expected), "IDX image payload is " + std::to_string(images.size()) +
                                                             " bytes, header implies " + std::to_string(expected));
  }
  if (const auto magic = read_be32(labels, 0, "IDX label header"); magic != kLabelMagic) {
    throw FormatError(0, "IDX label magic " + std::to_string(magic) + " != 2049");
  }
  const std::size_t label_count = read_be32(labels, 4, "IDX label header");
  if (label_count != count) {
    throw FormatError(4, "IDX label count " + std::to_string(label_count) + " != image count " + std::to_string(count));
  }
  if (labels.size() != 8 + count) {
    throw FormatError(std::min(labels.size(), 8 + count), "IDX label payload is " + std::to_string(labels.size()) +
                                                              " bytes, header implies " + std::to_string(8 + count));
  }

  Dataset out;
  out.split = std::move(split);
  out.images = Tensor({count, rows, cols, 1});
  for (std::size_t i = 0; i < count * rows * cols; ++i) out.images[i] = scale_pixel(images[16 + i]);
  out.fine_labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.fine_labels[i] = labels[8 + i];
    if (out.fine_labels[i] > 9) throw FormatError(8 + i, "MNIST label " + std::to_string(labels[8 + i]) + " > 9");
  }
  return out;
}

Dataset decode_cifar(std::span<const std::uint8_t> bytes, CifarLayout layout, std::string split) {
  constexpr std::size_t kPlane = 32 * 32;
  const std::size_t label_bytes = layout == CifarLayout::Cifar10 ? 1 : 2;
  const std::size_t record = label_bytes + 3 * kPlane;
  if (bytes.empty() || bytes.size() % record != 0) {
    throw FormatError(bytes.size() - bytes.size() % record,
                      "CIFAR file size " + std::to_string(bytes.size()) + " is not a positive multiple of " +
                          std::to_string(record) + "-byte records");
  }
  const std::size_t count = bytes.size() / record;
  const std::size_t fine_classes = layout == CifarLayout::Cifar10 ? 10 : 100;

  Dataset out;
  out.split = std::move(split);
  out.images = Tensor({count, 32, 32, 3});
  out.fine_labels.resize(count);
  if (layout == CifarLayout::Cifar100) out.coarse_labels = Labels(count);
  for (std::size_t n = 0; n < count; ++n) {
    const std::size_t base = n * record;
    if (layout == CifarLayout::Cifar100) {
      if (bytes[base] >= 20) throw FormatError(base, "CIFAR-100 coarse label " + std::to_string(bytes[base]) + " >= 20");
      (*out.coarse_labels)[n] = bytes[base];
    }
    const std::uint8_t fine = bytes[base + label_bytes - 1];
    if (fine >= fine_classes) {
      throw FormatError(base + label_bytes - 1, "CIFAR label " + std::to_string(fine) + " out of range");
    }
    out.fine_labels[n] = fine;
    const std::uint8_t* planes = bytes.data() + base + label_bytes;
    float* image = out.images.raw() + n * 3 * kPlane;
    for (std::size_t p = 0; p < kPlane; ++p) {
      for (std::size_t c = 0; c < 3; ++c) image[p * 3 + c] = scale_pixel(planes[c * kPlane + p]);
    }
  }
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  const auto size = static_cast<std::size_t>(in.tellg());
  std::vector<std::uint8_t> bytes(size);
  in.seekg(0);
  if (!in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size))) {
    throw DataError("failed reading '" + path.string() + "'");
  }
  return bytes;
}

namespace {

std::filesystem::path locate(const std::filesystem::path& dir, std::initializer_list<const char*> subdirs,
                             const char* probe) {
  if (std::filesystem::exists(dir / probe)) return dir;
  for (const char* sub : subdirs) {
    if (std::filesystem::exists(dir / sub / probe)) return dir / sub;
  }
  throw DataError("dataset file '" + std::string(probe) + "' not found under '" + dir.string() + "'");
}

Dataset concat(std::vector<Dataset> parts, std::string split) {
  std::size_t total = 0;
  for (const auto& p : parts) total += p.size();
  Shape shape = parts.front().images.shape();
  shape[0] = total;
  std::vector<float> pixels;
  pixels.reserve(shape_size(shape));
  Dataset out;
  out.split = std::move(split);
  for (auto& p : parts) {
    pixels.insert(pixels.end(), p.images.data().begin(), p.images.data().end());
    out.fine_labels.insert(out.fine_labels.end(), p.fine_labels.begin(), p.fine_labels.end());
    p.images = Tensor();
  }
  out.images = Tensor(std::move(shape), std::move(pixels));
  return out;
}

Dataset load_idx_pair(const std::filesystem::path& dir, const char* images, const char* labels, std::string split) {
  const auto image_bytes = read_file_bytes(dir / images);
  const auto label_bytes = read_file_bytes(dir / labels);
  try {
    return decode_idx(image_bytes, label_bytes, std::move(split));
  } catch (const FormatError& e) {
    throw FormatError(e.offset(), (dir / images).string() + ": " + e.what());
  }
}

Dataset load_cifar_file(const std::filesystem::path& path, CifarLayout layout, std::string split) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_cifar(bytes, layout, std::move(split));
  } catch (const FormatError& e) {
    throw FormatError(e.offset(), path.string() + ": " + e.what());
  }
}

}  // namespace

DatasetSplits load_mnist(const std::filesystem::path& dir) {
  const auto root = locate(dir, {"mnist", "MNIST"}, "train-images-idx3-ubyte");
  return {load_idx_pair(root, "train-images-idx3-ubyte", "train-labels-idx1-ubyte", "train"),
          load_idx_pair(root, "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte", "test")};
}

DatasetSplits load_cifar10(const std::filesystem::path& dir) {
  const auto root = locate(dir, {"cifar10", "cifar-10-batches-bin"}, "data_batch_1.bin");
  std::vector<Dataset> parts;
  for (int i = 1; i <= 5; ++i) {
    parts.push_back(load_cifar_file(root / ("data_batch_" + std::to_string(i) + ".bin"), CifarLayout::Cifar10, "train"));
  }
  return {concat(std::move(parts), "train"), load_cifar_file(root / "test_batch.bin", CifarLayout::Cifar10, "test")};
}

DatasetSplits load_cifar100(const std::filesystem::path& dir) {
  const auto root = locate(dir, {"cifar100", "cifar-100-binary"}, "train.bin");
  return {load_cifar_file(root / "train.bin", CifarLayout::Cifar100, "train"),
          load_cifar_file(root / "test.bin", CifarLayout::Cifar100, "test")};
}

}  // namespace bcnn
