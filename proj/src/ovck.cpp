#include "ovclip/ovck.hpp"

#include <bit>
#include <cstring>

#include "ovclip/io_util.hpp"

static_assert(std::endian::native == std::endian::little,
              "OVCK1 serialization assumes a little-endian host");

namespace ovclip {

namespace {

constexpr char kMagic[6] = {'O', 'V', 'C', 'K', '1', '\0'};
constexpr std::uint16_t kVersion = 1;
constexpr std::uint8_t kDtypeF32 = 0;

void put_bytes(std::string& out, const void* p, std::size_t n) {
  out.append(static_cast<const char*>(p), n);
}

template <typename T>
void put_scalar(std::string& out, T v) {
  put_bytes(out, &v, sizeof(T));
}

void put_str16(std::string& out, const std::string& s, const char* what) {
  if (s.size() > 0xFFFF)
    throw InvalidArgument(std::string("ovck: ") + what + " longer than 65535 bytes");
  put_scalar<std::uint16_t>(out, static_cast<std::uint16_t>(s.size()));
  put_bytes(out, s.data(), s.size());
}

void put_str32(std::string& out, const std::string& s) {
  put_scalar<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  put_bytes(out, s.data(), s.size());
}

// Bounds-checked cursor over the raw file image; running out of bytes at any
// point means the file was cut short.
struct Cursor {
  const unsigned char* p;
  std::size_t n;
  std::size_t off = 0;
  std::string origin;

  void need(std::size_t k, const char* what) const {
    if (off + k > n)
      throw TruncatedError("ovck: " + origin + " truncated in " + what);
  }

  template <typename T>
  T take(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, p + off, sizeof(T));
    off += sizeof(T);
    return v;
  }

  std::string take_str(std::size_t len, const char* what) {
    need(len, what);
    std::string s(reinterpret_cast<const char*>(p + off), len);
    off += len;
    return s;
  }
};

}  // namespace

std::string encode_checkpoint(const Checkpoint& c) {
  for (std::size_t i = 1; i < c.params.size(); ++i)
    if (!(c.params[i - 1].first < c.params[i].first))
      throw InvalidArgument("ovck: parameter names must be sorted and unique");
  std::string out;
  put_bytes(out, kMagic, sizeof(kMagic));
  put_scalar<std::uint16_t>(out, kVersion);
  put_scalar<std::uint32_t>(out, static_cast<std::uint32_t>(c.meta.size()));
  for (const auto& [k, v] : c.meta) {
    put_str16(out, k, "meta key");
    put_str32(out, v);
  }
  put_scalar<std::uint32_t>(out, static_cast<std::uint32_t>(c.params.size()));
  for (const auto& [name, t] : c.params) {
    put_str16(out, name, "tensor name");
    if (t.rank() > 255) throw InvalidArgument("ovck: rank exceeds 255");
    put_scalar<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
    for (int d : t.shape) put_scalar<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    put_scalar<std::uint8_t>(out, kDtypeF32);
    put_bytes(out, t.data.data(), sizeof(float) * static_cast<std::size_t>(t.numel()));
  }
  std::uint32_t crc = crc32(out.data(), out.size());
  put_scalar<std::uint32_t>(out, crc);
  return out;
}

Checkpoint decode_checkpoint(const void* data, std::size_t n,
                             const std::string& origin) {
  Cursor cur{static_cast<const unsigned char*>(data), n, 0, origin};
  cur.need(sizeof(kMagic), "magic");
  if (std::memcmp(cur.p, kMagic, sizeof(kMagic)) != 0)
    throw BadMagicError("ovck: " + origin + " is not an OVCK1 file");
  if (n < sizeof(kMagic) + sizeof(std::uint32_t))
    throw TruncatedError("ovck: " + origin + " truncated before checksum");
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, cur.p + n - sizeof(std::uint32_t), sizeof(std::uint32_t));
  std::uint32_t actual_crc = crc32(cur.p, n - sizeof(std::uint32_t));
  if (stored_crc != actual_crc)
    throw ChecksumError("ovck: " + origin + " checksum mismatch");
  cur.n = n - sizeof(std::uint32_t);  // payload region excludes the CRC
  cur.off = sizeof(kMagic);

  std::uint16_t version = cur.take<std::uint16_t>("version");
  if (version != kVersion)
    throw FormatError("ovck: " + origin + " has unsupported version " +
                      std::to_string(version));
  Checkpoint c;
  std::uint32_t nmeta = cur.take<std::uint32_t>("meta count");
  for (std::uint32_t i = 0; i < nmeta; ++i) {
    std::uint16_t klen = cur.take<std::uint16_t>("meta key length");
    std::string k = cur.take_str(klen, "meta key");
    std::uint32_t vlen = cur.take<std::uint32_t>("meta value length");
    c.meta[k] = cur.take_str(vlen, "meta value");
  }
  std::uint32_t ntensors = cur.take<std::uint32_t>("tensor count");
  c.params.reserve(ntensors);
  std::string prev;
  for (std::uint32_t i = 0; i < ntensors; ++i) {
    std::uint16_t nlen = cur.take<std::uint16_t>("tensor name length");
    std::string name = cur.take_str(nlen, "tensor name");
    if (i > 0 && !(prev < name))
      throw FormatError("ovck: " + origin + " tensor names not sorted/unique at " +
                        name);
    prev = name;
    std::uint8_t rank = cur.take<std::uint8_t>("tensor rank");
    if (rank == 0) throw FormatError("ovck: " + origin + " tensor " + name +
                                     " has rank 0");
    std::vector<int> shape(rank);
    long long numel = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      std::uint32_t dim = cur.take<std::uint32_t>("tensor dim");
      if (dim == 0 || dim > 0x7FFFFFFFu)
        throw FormatError("ovck: " + origin + " tensor " + name + " has bad dim");
      shape[d] = static_cast<int>(dim);
      numel *= dim;
      if (numel > (1LL << 31))
        throw FormatError("ovck: " + origin + " tensor " + name + " too large");
    }
    std::uint8_t dtype = cur.take<std::uint8_t>("tensor dtype");
    if (dtype != kDtypeF32)
      throw FormatError("ovck: " + origin + " tensor " + name +
                        " has unsupported dtype " + std::to_string(dtype));
    std::size_t payload = sizeof(float) * static_cast<std::size_t>(numel);
    cur.need(payload, "tensor payload");
    Tensor<float> t = Tensor<float>::zeros(shape);
    std::memcpy(t.data.data(), cur.p + cur.off, payload);
    cur.off += payload;
    if (!all_finite(t))
      throw FormatError("ovck: " + origin + " tensor " + name +
                        " contains non-finite values");
    c.params.emplace_back(std::move(name), std::move(t));
  }
  if (cur.off != cur.n)
    throw FormatError("ovck: " + origin + " has trailing bytes");
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::string& path) {
  std::string img = encode_checkpoint(c);
  write_file_atomic(path, img);
}

Checkpoint load_checkpoint(const std::string& path) {
  auto bytes = read_file_bytes(path);
  return decode_checkpoint(bytes.data(), bytes.size(), path);
}

}  // namespace ovclip
