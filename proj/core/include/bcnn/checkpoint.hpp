#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bcnn/model.hpp"

namespace bcnn {

/// Layout (all integers little-endian):
///   "BCNN" | u32 version | u32 entry count |
///   per entry: u16 name length | name | u8 dtype (0 float, 1 double) |
///              u8 rank | rank x u32 dims | raw values
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class DType : std::uint8_t { Float32 = 0, Float64 = 1 };

struct CheckpointEntry {
  std::string name;
  DType dtype = DType::Float32;
  Shape shape;
  std::vector<std::uint8_t> bytes;  // little-endian values
};

struct Checkpoint {
  std::vector<CheckpointEntry> entries;
};

/// A checkpoint that decodes fine but does not fit the target model.
class CheckpointMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parameters plus batchnorm running statistics, under their model names.
template <typename T>
Checkpoint snapshot(BCnnModel<T>& model);

/// Copies every entry into the model. All names, dtypes and shapes are
/// validated before anything is written, so a failure leaves the model
/// untouched.
template <typename T>
void restore(const Checkpoint& checkpoint, BCnnModel<T>& model);

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint);
/// Throws FormatError (with byte offset) on bad magic, version, or length.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

/// Atomic: writes a sibling temporary file, then renames it over `path`.
template <typename T>
void save_checkpoint(BCnnModel<T>& model, const std::filesystem::path& path);
template <typename T>
void load_checkpoint(const std::filesystem::path& path, BCnnModel<T>& model);

/// Replaces `path` with `contents` via write-temp-then-rename.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> contents);

}  // namespace bcnn
