#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bcnn/label_tree.hpp"
#include "bcnn/tensor.hpp"

namespace bcnn {

/// Missing or unreadable dataset files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Decoded images (N x H x W x C, values in [0, 1]) with fine labels and,
/// when the source ships them, coarse labels.
struct Dataset {
  Tensor images;
  Labels fine_labels;
  std::optional<Labels> coarse_labels;
  std::string split;

  std::size_t size() const noexcept { return fine_labels.size(); }
  /// The first `count` samples (all of them when count >= size()).
  Dataset head(std::size_t count) const;
};

struct DatasetSplits {
  Dataset train;
  Dataset test;
};

/// IDX pair: images (magic 2051, big-endian dims) and labels (magic 2049).
Dataset decode_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels, std::string split);

enum class CifarLayout {
  Cifar10,   // 3073-byte records: label, 1024 R, 1024 G, 1024 B
  Cifar100,  // 3074-byte records: coarse label, fine label, pixels
};

/// Decodes one binary batch file; channel-planar pixels become HWC.
Dataset decode_cifar(std::span<const std::uint8_t> bytes, CifarLayout layout, std::string split);

/// Reads train/t10k IDX files from `dir` (or `dir`/mnist).
DatasetSplits load_mnist(const std::filesystem::path& dir);
/// Reads data_batch_{1..5}.bin and test_batch.bin from `dir` (or
/// `dir`/cifar10, `dir`/cifar-10-batches-bin).
DatasetSplits load_cifar10(const std::filesystem::path& dir);
/// Reads train.bin and test.bin from `dir` (or `dir`/cifar100,
/// `dir`/cifar-100-binary).
DatasetSplits load_cifar100(const std::filesystem::path& dir);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace bcnn
