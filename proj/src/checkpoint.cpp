#include "fogbench/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "fogbench/image.hpp"

namespace fogbench {

namespace {

constexpr char kMagic[4] = {'F', 'G', 'B', '1'};
constexpr std::uint16_t kVersion = 1;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename U>
  void le(U value) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
  void str16(const std::string& s, const char* what) {
    if (s.size() > std::numeric_limits<std::uint16_t>::max()) throw CheckpointError(std::string(what) + " too long");
    le<std::uint16_t>(static_cast<std::uint16_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}
  void need(std::size_t n, const char* what) {
    if (in_.size() - pos_ < n) throw CheckpointError(std::string("truncated checkpoint while reading ") + what);
  }
  template <typename U>
  U le(const char* what) {
    need(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(in_[pos_ + i]) << (8 * i));
    pos_ += sizeof(U);
    return v;
  }
  std::string str16(const char* what) {
    const auto n = le<std::uint16_t>(what);
    need(n, what);
    std::string s(in_.begin() + static_cast<std::ptrdiff_t>(pos_), in_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ModelCheckpoint& checkpoint) {
  Writer w;
  w.bytes(kMagic, 4);
  w.le<std::uint16_t>(kVersion);
  w.str16(checkpoint.tag, "tag");
  w.le<std::uint32_t>(static_cast<std::uint32_t>(checkpoint.tensors.size()));
  for (const auto& [name, t] : checkpoint.tensors) {
    w.str16(name, "tensor name");
    if (t.rank() > 255) throw CheckpointError("tensor rank above 255: " + name);
    w.le<std::uint8_t>(static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape()) w.le<std::uint32_t>(static_cast<std::uint32_t>(d));
    for (float v : t.data()) w.le<std::uint32_t>(std::bit_cast<std::uint32_t>(v));
  }
  return w.take();
}

ModelCheckpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  r.need(4, "magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw CheckpointError("bad magic bytes (expected FGB1)");
  for (int i = 0; i < 4; ++i) r.le<std::uint8_t>("magic");
  const auto version = r.le<std::uint16_t>("version");
  if (version != kVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  ModelCheckpoint ckpt;
  ckpt.tag = r.str16("tag");
  const auto count = r.le<std::uint32_t>("tensor count");
  for (std::uint32_t k = 0; k < count; ++k) {
    std::string name = r.str16("tensor name");
    const auto rank = r.le<std::uint8_t>("rank");
    if (rank == 0) throw CheckpointError("tensor " + name + " has rank 0");
    Shape shape;
    std::size_t n = 1;
    for (int d = 0; d < rank; ++d) {
      const auto dim = r.le<std::uint32_t>("dimensions");
      if (dim == 0) throw CheckpointError("tensor " + name + " has a zero dimension");
      shape.push_back(dim);
      n *= dim;
    }
    r.need(n * 4, "tensor values");
    std::vector<float> values(n);
    for (auto& v : values) v = std::bit_cast<float>(r.le<std::uint32_t>("tensor values"));
    ckpt.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  if (!r.done()) throw CheckpointError("trailing bytes after last tensor");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const ModelCheckpoint& checkpoint) {
  const auto bytes = encode_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path, "cannot open checkpoint for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(path, "checkpoint write failed");
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open checkpoint");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

std::string tag_architecture(const std::string& tag) {
  std::istringstream is(tag);
  std::string arch;
  is >> arch;
  return arch;
}

int tag_int(const std::string& tag, const std::string& key) {
  std::istringstream is(tag);
  std::string tok;
  while (is >> tok) {
    if (tok.rfind(key + "=", 0) == 0) {
      try {
        return std::stoi(tok.substr(key.size() + 1));
      } catch (const std::exception&) {
        break;
      }
    }
  }
  throw CheckpointError("tag '" + tag + "' lacks integer field " + key);
}

}  // namespace fogbench
