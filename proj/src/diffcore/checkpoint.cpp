#include "imface/diffcore/checkpoint.hpp"

#include "imface/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace imface::diff {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

namespace {

class Writer {
 public:
  template <class T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes.insert(bytes.end(), p, p + sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes.insert(bytes.end(), p, p + n);
  }
  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}
  template <class T>
  T get() {
    T v;
    take(&v, sizeof(T));
    return v;
  }
  void take(void* out, std::size_t n) {
    if (n > bytes_.size() - pos_) throw Error(ErrorKind::io, "checkpoint truncated");
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_tensors(const NamedTensors& tensors) {
  Writer w;
  w.put_bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint64_t>(tensors.size());
  for (const auto& [name, t] : tensors) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.put_bytes(name.data(), name.size());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) w.put<std::uint64_t>(d);
    w.put_bytes(t.data(), t.size() * sizeof(double));
  }
  return std::move(w.bytes);
}

NamedTensors decode_tensors(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  char magic[sizeof(kCheckpointMagic)];
  r.take(magic, sizeof(magic));
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw Error(ErrorKind::io, "not a checkpoint file (bad magic)");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::io, "checkpoint version " + std::to_string(version) + " unsupported (expected " +
                                   std::to_string(kCheckpointVersion) + ")");
  }
  const auto count = r.get<std::uint64_t>();
  NamedTensors out;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint32_t>();
    std::string name(name_len, '\0');
    r.take(name.data(), name_len);
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) throw Error(ErrorKind::io, "checkpoint tensor '" + name + "' has implausible rank");
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(r.get<std::uint64_t>());
      n *= d;
    }
    if (n > bytes.size()) throw Error(ErrorKind::io, "checkpoint truncated");
    std::vector<double> values(n);
    r.take(values.data(), n * sizeof(double));
    out.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  if (!r.done()) throw Error(ErrorKind::io, "trailing bytes after checkpoint payload");
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::io, "short write to " + path.string());
}

void write_tensors(const std::filesystem::path& path, const NamedTensors& tensors) {
  write_file_bytes(path, encode_tensors(tensors));
}

NamedTensors read_tensors(const std::filesystem::path& path) { return decode_tensors(read_file_bytes(path)); }

const Tensor& find_tensor(const NamedTensors& tensors, const std::string& name) {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw Error(ErrorKind::data, "checkpoint has no tensor named '" + name + "'");
}

}  // namespace imface::diff
