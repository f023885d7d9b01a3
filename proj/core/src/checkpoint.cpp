#include "bcnn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

#include "bcnn/dataset.hpp"
#include "bcnn/error.hpp"

namespace bcnn {

namespace {

constexpr char kMagic[4] = {'B', 'C', 'N', 'N'};

template <typename T>
constexpr DType dtype_of() {
  return std::is_same_v<T, float> ? DType::Float32 : DType::Float64;
}

std::size_t dtype_size(DType d) { return d == DType::Float32 ? 4 : 8; }

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

template <typename T>
std::vector<std::uint8_t> to_le_bytes(const BasicTensor<T>& t) {
  using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  std::vector<std::uint8_t> out;
  out.reserve(t.size() * sizeof(T));
  for (const T v : t.data()) put_le(out, std::bit_cast<Bits>(v));
  return out;
}

template <typename T>
void from_le_bytes(std::span<const std::uint8_t> bytes, BasicTensor<T>& t) {
  using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  for (std::size_t i = 0; i < t.size(); ++i) {
    Bits b = 0;
    for (std::size_t j = 0; j < sizeof(T); ++j) b |= static_cast<Bits>(bytes[i * sizeof(T) + j]) << (8 * j);
    t[i] = std::bit_cast<T>(b);
  }
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename U>
  U get(const char* what) {
    need(sizeof(U), what);
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(U{bytes_[pos_ + i]} << (8 * i));
    pos_ += sizeof(U);
    return value;
  }

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) throw FormatError(pos_, std::string("checkpoint truncated in ") + what);
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

template <typename T>
std::vector<std::pair<std::string, BasicTensor<T>*>> named_tensors(BCnnModel<T>& model) {
  std::vector<std::pair<std::string, BasicTensor<T>*>> out;
  for (auto& p : model.parameters()) out.emplace_back(p.name, p.value);
  for (auto& b : model.buffers()) out.emplace_back(b.name, b.value);
  return out;
}

}  // namespace

template <typename T>
Checkpoint snapshot(BCnnModel<T>& model) {
  Checkpoint ckpt;
  std::set<std::string> seen;
  for (auto& [name, tensor] : named_tensors(model)) {
    if (!seen.insert(name).second) throw std::logic_error("duplicate tensor name '" + name + "'");
    ckpt.entries.push_back({name, dtype_of<T>(), tensor->shape(), to_le_bytes(*tensor)});
  }
  return ckpt;
}

template <typename T>
void restore(const Checkpoint& checkpoint, BCnnModel<T>& model) {
  std::map<std::string, const CheckpointEntry*> by_name;
  for (const auto& e : checkpoint.entries) {
    if (!by_name.emplace(e.name, &e).second) throw CheckpointMismatch("checkpoint repeats tensor '" + e.name + "'");
  }
  const auto targets = named_tensors(model);
  if (targets.size() != by_name.size()) {
    throw CheckpointMismatch("checkpoint has " + std::to_string(by_name.size()) + " tensors, model expects " +
                             std::to_string(targets.size()));
  }
  for (const auto& [name, tensor] : targets) {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw CheckpointMismatch("checkpoint lacks tensor '" + name + "'");
    const CheckpointEntry& e = *it->second;
    if (e.dtype != dtype_of<T>()) throw CheckpointMismatch("tensor '" + name + "' has a different dtype");
    if (e.shape != tensor->shape()) {
      throw CheckpointMismatch("tensor '" + name + "' is " + shape_to_string(e.shape) + " in the checkpoint, " +
                               shape_to_string(tensor->shape()) + " in the model");
    }
  }
  for (const auto& [name, tensor] : targets) from_le_bytes(by_name.at(name)->bytes, *tensor);
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_le(out, kCheckpointVersion);
  put_le(out, static_cast<std::uint32_t>(checkpoint.entries.size()));
  for (const auto& e : checkpoint.entries) {
    if (e.name.size() > 0xFFFF) throw std::invalid_argument("tensor name too long: " + e.name);
    if (e.shape.size() > 0xFF) throw std::invalid_argument("tensor rank too large: " + e.name);
    if (e.bytes.size() != shape_size(e.shape) * dtype_size(e.dtype)) {
      throw std::invalid_argument("tensor '" + e.name + "' byte count disagrees with its shape");
    }
    put_le(out, static_cast<std::uint16_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    out.push_back(static_cast<std::uint8_t>(e.dtype));
    out.push_back(static_cast<std::uint8_t>(e.shape.size()));
    for (const auto d : e.shape) put_le(out, static_cast<std::uint32_t>(d));
    out.insert(out.end(), e.bytes.begin(), e.bytes.end());
  }
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  const auto magic = in.take(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw FormatError(0, "not a checkpoint (bad magic)");
  const auto version_at = in.pos();
  if (const auto version = in.get<std::uint32_t>("version"); version != kCheckpointVersion) {
    throw FormatError(version_at, "unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = in.get<std::uint32_t>("entry count");
  Checkpoint ckpt;
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    const auto name_len = in.get<std::uint16_t>("name length");
    const auto name = in.take(name_len, "name");
    e.name.assign(name.begin(), name.end());
    const auto dtype_at = in.pos();
    const auto dtype = in.get<std::uint8_t>("dtype");
    if (dtype > 1) throw FormatError(dtype_at, "unknown dtype " + std::to_string(dtype));
    e.dtype = static_cast<DType>(dtype);
    const auto rank = in.get<std::uint8_t>("rank");
    std::size_t count_values = 1;
    for (std::uint8_t r = 0; r < rank; ++r) {
      const auto dim_at = in.pos();
      const auto d = in.get<std::uint32_t>("dims");
      if (d == 0) throw FormatError(dim_at, "zero dimension in '" + e.name + "'");
      e.shape.push_back(d);
      count_values *= d;
    }
    const auto data = in.take(count_values * dtype_size(e.dtype), "values");
    e.bytes.assign(data.begin(), data.end());
    ckpt.entries.push_back(std::move(e));
  }
  if (!in.done()) throw FormatError(in.pos(), "trailing bytes after the last checkpoint entry");
  return ckpt;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out.write(reinterpret_cast<const char*>(contents.data()), static_cast<std::streamsize>(contents.size()));
    if (!out.flush()) throw std::runtime_error("failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

template <typename T>
void save_checkpoint(BCnnModel<T>& model, const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(snapshot(model)));
}

template <typename T>
void load_checkpoint(const std::filesystem::path& path, BCnnModel<T>& model) {
  const auto bytes = read_file_bytes(path);
  Checkpoint ckpt;
  try {
    ckpt = decode_checkpoint(bytes);
  } catch (const FormatError& e) {
    throw FormatError(e.offset(), path.string() + ": " + e.what());
  }
  restore(ckpt, model);
}

template Checkpoint snapshot(BCnnModel<float>&);
template Checkpoint snapshot(BCnnModel<double>&);
template void restore(const Checkpoint&, BCnnModel<float>&);
template void restore(const Checkpoint&, BCnnModel<double>&);
template void save_checkpoint(BCnnModel<float>&, const std::filesystem::path&);
template void save_checkpoint(BCnnModel<double>&, const std::filesystem::path&);
template void load_checkpoint(const std::filesystem::path&, BCnnModel<float>&);
template void load_checkpoint(const std::filesystem::path&, BCnnModel<double>&);

}  // namespace bcnn
