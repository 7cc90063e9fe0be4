#include "canoncorr/dataio.hpp"

#include "canoncorr/error.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace canoncorr {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorKind::Io, "read failed: " + path.string());
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) {
      throw Error(ErrorKind::Io, "cannot create " + path.parent_path().string() +
                                     ": " + ec.message());
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

namespace {

// Little-endian byte writer / bounds-checked reader.
struct Writer {
  std::string out;

  template <class U>
  void uint(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
  }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }
  void str(const std::string& s) {
    uint(static_cast<std::uint32_t>(s.size()));
    out += s;
  }
  void raw(const char* s, std::size_t n) { out.append(s, n); }
};

struct Reader {
  const std::string& in;
  std::string source;
  std::size_t pos = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorKind::Load,
                source + ": " + what + " at byte " + std::to_string(pos));
  }
  void need(std::size_t n) {
    if (in.size() - pos < n) fail("truncated data");
  }
  template <class U>
  U uint() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    }
    pos += sizeof(U);
    return v;
  }
  double f64() {
    const double v = std::bit_cast<double>(uint<std::uint64_t>());
    if (!std::isfinite(v)) fail("non-finite value");
    return v;
  }
  double f32() {
    const float v = std::bit_cast<float>(uint<std::uint32_t>());
    if (!std::isfinite(v)) fail("non-finite value");
    return v;
  }
  std::string str() {
    const auto n = uint<std::uint32_t>();
    need(n);
    std::string s = in.substr(pos, n);
    pos += n;
    return s;
  }
  void magic(const char* m) {
    need(4);
    if (in.compare(pos, 4, m) != 0) fail(std::string("bad magic (expected ") + m + ")");
    pos += 4;
  }
  void done() const {
    if (pos != in.size()) fail("trailing bytes");
  }
};

void check_finite(const ad::Tensor& t, const char* what) {
  for (double v : t.data) {
    if (!std::isfinite(v)) {
      throw Error(ErrorKind::InvalidInput, std::string(what) + " contains non-finite values");
    }
  }
}

}  // namespace

std::string encode_tensor(const ad::Tensor& t, DType dtype) {
  check_finite(t, "tensor");
  if (t.data.size() != ad::numel(t.shape)) {
    throw Error(ErrorKind::InvalidInput, "tensor data does not match its shape");
  }
  Writer w;
  w.raw("FTEN", 4);
  w.uint(kTensorVersion);
  w.uint(static_cast<std::uint8_t>(dtype));
  w.uint(static_cast<std::uint32_t>(t.shape.size()));
  for (auto d : t.shape) w.uint(static_cast<std::uint32_t>(d));
  for (double v : t.data) {
    if (dtype == DType::F32) {
      w.f32(static_cast<float>(v));
    } else {
      w.f64(v);
    }
  }
  return std::move(w.out);
}

ad::Tensor decode_tensor(const std::string& bytes, const std::string& source) {
  Reader r{bytes, source};
  r.magic("FTEN");
  const auto version = r.uint<std::uint16_t>();
  if (version != kTensorVersion) r.fail("unsupported version " + std::to_string(version));
  const auto tag = r.uint<std::uint8_t>();
  if (tag != 1 && tag != 2) r.fail("unknown dtype tag " + std::to_string(tag));
  const auto rank = r.uint<std::uint32_t>();
  r.need(std::size_t{rank} * 4);
  ad::Shape shape;
  std::size_t n = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const auto d = r.uint<std::uint32_t>();
    shape.push_back(d);
    if (d != 0 && n > (std::size_t{1} << 40) / d) r.fail("tensor too large");
    n *= d;
  }
  const std::size_t width = tag == 1 ? 4 : 8;
  if ((bytes.size() - r.pos) / width < n) r.fail("truncated payload");
  ad::Tensor t;
  t.shape = std::move(shape);
  t.data.resize(n);
  for (auto& v : t.data) v = tag == 1 ? r.f32() : r.f64();
  r.done();
  return t;
}

void save_tensor(const std::filesystem::path& path, const ad::Tensor& t, DType dtype) {
  write_file(path, encode_tensor(t, dtype));
}

ad::Tensor load_tensor(const std::filesystem::path& path) {
  return decode_tensor(read_file(path), path.string());
}

ad::Tensor grid_to_tensor(const FeatureGrid& grid) {
  ad::Tensor t;
  t.shape = {grid.rows, grid.cols, grid.dim};
  t.data = grid.data;
  return t;
}

FeatureGrid tensor_to_grid(const ad::Tensor& t, int image_width, int image_height) {
  if (t.shape.size() != 3) {
    throw Error(ErrorKind::Load, "feature tensor must have rank 3, got " +
                                     ad::shape_str(t.shape));
  }
  FeatureGrid g(t.shape[0], t.shape[1], t.shape[2], image_width, image_height);
  g.data = t.data;
  return g;
}

ad::Tensor depth_to_tensor(const DepthMap& depth) {
  ad::Tensor t;
  t.shape = {static_cast<std::size_t>(depth.height), static_cast<std::size_t>(depth.width)};
  t.data = depth.data;
  return t;
}

DepthMap tensor_to_depth(const ad::Tensor& t) {
  if (t.shape.size() != 2) {
    throw Error(ErrorKind::Load, "depth tensor must have rank 2, got " +
                                     ad::shape_str(t.shape));
  }
  DepthMap d(static_cast<int>(t.shape[1]), static_cast<int>(t.shape[0]));
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    // Negative depth is as invalid as zero.
    d.data[i] = t.data[i] > 0.0 ? t.data[i] : 0.0;
  }
  return d;
}

Mask decode_mask(const std::string& bytes, const std::string& source) {
  std::size_t pos = 0;
  auto fail = [&](const std::string& what) -> Error {
    return Error(ErrorKind::Load,
                 source + ": " + what + " at byte " + std::to_string(pos));
  };
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&]() -> long {
    skip_space();
    const std::size_t start = pos;
    long v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > 1'000'000) throw fail("header value too large");
      ++pos;
    }
    if (pos == start) throw fail("malformed PGM header");
    return v;
  };
  if (bytes.compare(0, 2, "P5") != 0) throw fail("not a binary PGM (missing P5)");
  pos = 2;
  const long w = number(), h = number(), maxval = number();
  if (w <= 0 || h <= 0) throw fail("image size must be positive");
  if (maxval != 255) throw fail("maxval must be 255, got " + std::to_string(maxval));
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw fail("malformed PGM header");
  }
  ++pos;
  const auto n = static_cast<std::size_t>(w * h);
  if (bytes.size() - pos != n) {
    throw fail("payload has " + std::to_string(bytes.size() - pos) +
               " bytes, expected " + std::to_string(n));
  }
  Mask m(static_cast<int>(w), static_cast<int>(h));
  for (std::size_t i = 0; i < n; ++i) {
    m.data[i] = static_cast<unsigned char>(bytes[pos + i]) > 127 ? 1 : 0;
  }
  return m;
}

std::string encode_mask(const Mask& mask) {
  std::string out = "P5\n" + std::to_string(mask.width) + " " +
                    std::to_string(mask.height) + "\n255\n";
  for (auto v : mask.data) out.push_back(static_cast<char>(v ? 255 : 0));
  return out;
}

Mask load_mask(const std::filesystem::path& path) {
  return decode_mask(read_file(path), path.string());
}

void save_mask(const std::filesystem::path& path, const Mask& mask) {
  write_file(path, encode_mask(mask));
}

// Checkpoint layout after the magic and u16 version:
//   str category, u32 K, u32 M, f64 P[K·3], f64 Z[K·M], f64 log_tau,
//   u32 layers, per layer {u32 in, u32 out, f64 W[in·out], f64 b[out]},
//   u32 n_config, per entry {str key, str value},
//   u32 n_log, per entry {i64 step, f64 l_P, l_Z, l_geom, total, lr},
//   str metadata.
// Strings are u32 length + bytes.

std::string encode_checkpoint(const Checkpoint& c) {
  const auto& p = c.prototype;
  const std::size_t k = p.num_keypoints(), m = p.descriptor_dim();
  if (p.P.shape != ad::Shape{k, 3} || p.Z.shape != ad::Shape{k, m} ||
      p.log_tau.data.size() != 1) {
    throw Error(ErrorKind::InvalidInput, "prototype tensors have inconsistent shapes");
  }
  check_finite(p.P, "P");
  check_finite(p.Z, "Z");
  check_finite(p.log_tau, "log_tau");
  Writer w;
  w.raw("C3DP", 4);
  w.uint(kCheckpointVersion);
  w.str(p.category);
  w.uint(static_cast<std::uint32_t>(k));
  w.uint(static_cast<std::uint32_t>(m));
  for (double v : p.P.data) w.f64(v);
  for (double v : p.Z.data) w.f64(v);
  w.f64(p.log_tau.data[0]);
  w.uint(static_cast<std::uint32_t>(c.head.layers.size()));
  for (const auto& l : c.head.layers) {
    check_finite(l.weight, "head weight");
    check_finite(l.bias, "head bias");
    w.uint(static_cast<std::uint32_t>(l.weight.rows()));
    w.uint(static_cast<std::uint32_t>(l.weight.cols()));
    for (double v : l.weight.data) w.f64(v);
    for (double v : l.bias.data) w.f64(v);
  }
  w.uint(static_cast<std::uint32_t>(c.config.size()));
  for (const auto& [key, value] : c.config) {
    w.str(key);
    w.str(value);
  }
  w.uint(static_cast<std::uint32_t>(c.log_tail.size()));
  for (const auto& s : c.log_tail) {
    w.uint(static_cast<std::uint64_t>(s.step));
    w.f64(s.l_P);
    w.f64(s.l_Z);
    w.f64(s.l_geom);
    w.f64(s.total);
    w.f64(s.lr);
  }
  w.str(c.metadata);
  return std::move(w.out);
}

Checkpoint decode_checkpoint(const std::string& bytes, const std::string& source) {
  Reader r{bytes, source};
  r.magic("C3DP");
  const auto version = r.uint<std::uint16_t>();
  if (version != kCheckpointVersion) r.fail("unsupported version " + std::to_string(version));
  Checkpoint c;
  auto& p = c.prototype;
  p.category = r.str();
  const std::size_t k = r.uint<std::uint32_t>(), m = r.uint<std::uint32_t>();
  if (k == 0 || m == 0) r.fail("empty prototype");
  r.need((k * 3 + k * m + 1) * 8);
  p.P = ad::Tensor::zeros({k, 3}, true);
  for (auto& v : p.P.data) v = r.f64();
  p.Z = ad::Tensor::zeros({k, m}, true);
  for (auto& v : p.Z.data) v = r.f64();
  p.log_tau = ad::Tensor::scalar(r.f64(), true);

  const auto layers = r.uint<std::uint32_t>();
  if (layers < 1 || layers > 2) r.fail("head must have 1 or 2 layers");
  std::size_t prev = 0;
  for (std::uint32_t l = 0; l < layers; ++l) {
    const std::size_t in = r.uint<std::uint32_t>(), out = r.uint<std::uint32_t>();
    if (in == 0 || out == 0 || (l > 0 && in != prev)) r.fail("inconsistent head dimensions");
    r.need((in * out + out) * 8);
    ProjectionHead::Layer layer{ad::Tensor::zeros({in, out}, true),
                                ad::Tensor::zeros({1, out}, true)};
    for (auto& v : layer.weight.data) v = r.f64();
    for (auto& v : layer.bias.data) v = r.f64();
    c.head.layers.push_back(std::move(layer));
    prev = out;
  }
  if (prev != m) r.fail("head output dimension does not match descriptors");

  const auto n_cfg = r.uint<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_cfg; ++i) {
    std::string key = r.str();
    c.config[key] = r.str();
  }
  const auto n_log = r.uint<std::uint32_t>();
  r.need(std::size_t{n_log} * 48);
  for (std::uint32_t i = 0; i < n_log; ++i) {
    StepLog s;
    s.step = static_cast<std::int64_t>(r.uint<std::uint64_t>());
    s.l_P = r.f64();
    s.l_Z = r.f64();
    s.l_geom = r.f64();
    s.total = r.f64();
    s.lr = r.f64();
    c.log_tail.push_back(s);
  }
  c.metadata = r.str();
  r.done();
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path), path.string());
}

}  // namespace canoncorr
