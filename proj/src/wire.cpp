#include "ffl/wire.hpp"

#include <cstring>

namespace ffl {
namespace {

constexpr char kMagic[4] = {'F', 'F', 'L', '1'};
constexpr std::uint8_t kVersion = 1;

class Writer {
public:
  std::vector<std::uint8_t> buf;

  void u8(std::uint8_t v) { buf.push_back(v); }
  void u16(std::uint16_t v) {
    buf.push_back(std::uint8_t(v));
    buf.push_back(std::uint8_t(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(std::uint8_t(v >> (8 * i)));
  }
  void f64(double v) {
    static_assert(sizeof(double) == 8);
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) buf.push_back(std::uint8_t(bits >> (8 * i)));
  }
  void str16(const std::string& s) {
    if (s.size() > 0xffff) throw WireError(WireErrorKind::Malformed, "string too long");
    u16(std::uint16_t(s.size()));
    buf.insert(buf.end(), s.begin(), s.end());
  }
  void params(const Parameters& p) {
    if (p.size() > 0xffffffffULL) throw WireError(WireErrorKind::Malformed, "too many tensors");
    u32(std::uint32_t(p.size()));
    for (const auto& [name, t] : p) {
      str16(name);
      if (t.ndim() > 0xff) throw WireError(WireErrorKind::Malformed, "tensor rank too large");
      u8(std::uint8_t(t.ndim()));
      for (Index d : t.shape()) u32(std::uint32_t(d));
      for (Index i = 0; i < t.size(); ++i) f64(t[i]);
    }
  }
};

class Reader {
public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint16_t u16() {
    const std::uint8_t* p = take(2);
    return std::uint16_t(p[0]) | std::uint16_t(p[1]) << 8;
  }
  std::uint32_t u32() {
    const std::uint8_t* p = take(4);
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
           std::uint32_t(p[3]) << 24;
  }
  double f64() {
    const std::uint8_t* p = take(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= std::uint64_t(p[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str16() {
    const std::uint16_t len = u16();
    const std::uint8_t* p = take(len);
    return std::string(reinterpret_cast<const char*>(p), len);
  }
  Parameters params() {
    Parameters out;
    const std::uint32_t count = u32();
    for (std::uint32_t i = 0; i < count; ++i) {
      std::string name = str16();
      const std::uint8_t ndim = u8();
      if (ndim == 0) throw WireError(WireErrorKind::Malformed, "zero-rank tensor");
      std::vector<Index> shape;
      for (std::uint8_t d = 0; d < ndim; ++d) {
        const std::uint32_t dim = u32();
        if (dim == 0) throw WireError(WireErrorKind::Malformed, "zero tensor dim");
        shape.push_back(Index(dim));
      }
      Tensor t(shape);
      for (Index k = 0; k < t.size(); ++k) t[k] = f64();
      if (!out.emplace(std::move(name), std::move(t)).second)
        throw WireError(WireErrorKind::Malformed, "duplicate tensor name");
    }
    return out;
  }
  bool done() const { return pos_ == size_; }

private:
  const std::uint8_t* take(std::size_t n) {
    if (pos_ + n > size_) throw WireError(WireErrorKind::Truncated, "truncated payload");
    const std::uint8_t* p = data_ + pos_;
    pos_ += n;
    return p;
  }
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

std::uint8_t tagOf(const RoundMessage& m) { return std::uint8_t(m.index() + 1); }

}  // namespace

std::vector<std::uint8_t> encodeMessage(const RoundMessage& m) {
  Writer payload;
  std::visit(
      [&payload](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, msg::Register>) {
          payload.str16(v.site_id);
          payload.u32(v.n_train);
        } else if constexpr (std::is_same_v<T, msg::GlobalBackbone>) {
          payload.u32(v.round);
          payload.params(v.params);
        } else if constexpr (std::is_same_v<T, msg::LocalBackbone>) {
          payload.u32(v.round);
          payload.str16(v.site_id);
          payload.params(v.params);
          payload.u32(v.n_train);
        }
        // EnterFineTune and Shutdown carry no payload
      },
      m);

  Writer frame;
  frame.buf.insert(frame.buf.end(), kMagic, kMagic + 4);
  frame.u8(kVersion);
  frame.u8(tagOf(m));
  if (payload.buf.size() > 0xffffffffULL)
    throw WireError(WireErrorKind::Malformed, "payload too large");
  frame.u32(std::uint32_t(payload.buf.size()));
  frame.buf.insert(frame.buf.end(), payload.buf.begin(), payload.buf.end());
  return frame.buf;
}

std::size_t frameLength(const std::uint8_t* header, std::size_t available) {
  if (available < kFrameHeaderSize) throw WireError(WireErrorKind::Truncated, "incomplete header");
  if (std::memcmp(header, kMagic, 4) != 0)
    throw WireError(WireErrorKind::BadMagic, "bad frame magic");
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= std::uint32_t(header[6 + i]) << (8 * i);
  return kFrameHeaderSize + len;
}

RoundMessage decodeMessage(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kFrameHeaderSize)
    throw WireError(WireErrorKind::Truncated, "incomplete header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw WireError(WireErrorKind::BadMagic, "bad frame magic");
  if (bytes[4] != kVersion) throw WireError(WireErrorKind::BadVersion, "unsupported version");
  const std::uint8_t tag = bytes[5];
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= std::uint32_t(bytes[6 + i]) << (8 * i);
  if (bytes.size() < kFrameHeaderSize + len)
    throw WireError(WireErrorKind::Truncated, "truncated payload");
  if (bytes.size() > kFrameHeaderSize + len)
    throw WireError(WireErrorKind::Malformed, "trailing bytes after payload");

  Reader r(bytes.data() + kFrameHeaderSize, len);
  RoundMessage out;
  switch (tag) {
    case 1: {
      msg::Register v;
      v.site_id = r.str16();
      v.n_train = r.u32();
      out = std::move(v);
      break;
    }
    case 2: {
      msg::GlobalBackbone v;
      v.round = r.u32();
      v.params = r.params();
      out = std::move(v);
      break;
    }
    case 3: {
      msg::LocalBackbone v;
      v.round = r.u32();
      v.site_id = r.str16();
      v.params = r.params();
      v.n_train = r.u32();
      out = std::move(v);
      break;
    }
    case 4:
      out = msg::EnterFineTune{};
      break;
    case 5:
      out = msg::Shutdown{};
      break;
    default:
      throw WireError(WireErrorKind::UnknownTag, "unknown message tag " + std::to_string(tag));
  }
  if (!r.done()) throw WireError(WireErrorKind::Malformed, "payload has trailing bytes");
  return out;
}

}  // namespace ffl
