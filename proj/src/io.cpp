// Copyright 2026 The fgstyle Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fgstyle/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

namespace fgstyle {

const char *to_string(FormatCode code) {
  switch (code) {
    case FormatCode::kBadMagic: return "bad magic";
    case FormatCode::kBadVersion: return "unsupported version";
    case FormatCode::kTruncated: return "truncated";
    case FormatCode::kDimensionMismatch: return "dimension mismatch";
    case FormatCode::kMissingSection: return "missing section";
    case FormatCode::kDuplicateSection: return "duplicate section";
    case FormatCode::kNonFinite: return "non-finite value";
    case FormatCode::kBadHeader: return "bad header";
    case FormatCode::kInvalidValue: return "invalid value";
  }
  return "format error";
}

namespace {

constexpr std::uint32_t kVersion = 1;
// Per-dimension ceiling; keeps every size product well inside 64 bits.
constexpr std::uint64_t kMaxDim = 1u << 16;

[[noreturn]] void fail(FormatCode code, const std::string &what) {
  throw FormatError(code, what);
}

std::string tag_name(std::uint32_t tag) {
  switch (tag) {
    case kTagGeometry: return "geometry (tag 1)";
    case kTagFeatureFactors: return "feature factors (tag 2)";
    case kTagDensityFactors: return "density factors (tag 3)";
    case kTagBasis: return "basis (tag 4)";
    case kTagNormalization: return "normalization (tag 5)";
    case kTagAttention: return "attention (tag 6)";
    case kTagStyleConv: return "style conv (tag 7)";
    case kTagDecoder: return "decoder (tag 8)";
    case kTagReserved: return "reserved (tag 9)";
  }
  return "tag " + std::to_string(tag);
}

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(std::uint8_t(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(std::uint8_t(v >> (8 * i)));
  }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  void magic(const char *m) { bytes_.insert(bytes_.end(), m, m + 4); }

  // Row-major, whatever the Eigen storage order.
  template <typename Derived>
  void matrix(const Eigen::MatrixBase<Derived> &m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) f32(m(i, j));
  }

  void section(std::uint32_t tag, const Writer &payload) {
    u32(tag);
    u64(payload.bytes_.size());
    bytes_.insert(bytes_.end(), payload.bytes_.begin(), payload.bytes_.end());
  }

  std::vector<std::uint8_t> &bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  Reader(const std::uint8_t *data, std::size_t size, std::string context)
      : data_(data), size_(size), context_(std::move(context)) {}

  std::size_t remaining() const { return size_ - pos_; }

  void need(std::size_t n) const {
    if (n > remaining()) fail(FormatCode::kTruncated, context_);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f32() {
    const float f = std::bit_cast<float>(u32());
    if (!std::isfinite(f)) fail(FormatCode::kNonFinite, context_);
    return f;
  }
  bool magic(const char *m) {
    need(4);
    const bool ok = std::equal(m, m + 4, data_ + pos_);
    pos_ += 4;
    return ok;
  }
  Eigen::MatrixXd matrix(Eigen::Index rows, Eigen::Index cols) {
    need(std::size_t(rows) * std::size_t(cols) * 4);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = f32();
    return m;
  }
  Reader sub(std::size_t n, std::string context) {
    need(n);
    Reader r(data_ + pos_, n, std::move(context));
    pos_ += n;
    return r;
  }
  void expect_end() const {
    if (remaining() != 0)
      fail(FormatCode::kDimensionMismatch, context_ + ": trailing bytes");
  }

 private:
  const std::uint8_t *data_;
  std::size_t size_;
  std::size_t pos_ = 0;
  std::string context_;
};

std::uint32_t checked_u32(std::size_t v) {
  require(v < kMaxDim, "dimension too large to serialize");
  return static_cast<std::uint32_t>(v);
}

std::uint32_t read_dim(Reader &r, const std::string &what, std::uint32_t lo = 1) {
  const std::uint32_t v = r.u32();
  if (v < lo || v >= kMaxDim)
    fail(FormatCode::kDimensionMismatch, what + " = " + std::to_string(v));
  return v;
}

std::uint64_t factor_floats(const GridGeometry &g, std::uint64_t rank) {
  std::uint64_t total = 0;
  for (int a = 0; a < 3; ++a) {
    const auto [b, c] = kPlaneAxes[a];
    total += rank * (std::uint64_t(g.resolution[a]) +
                     std::uint64_t(g.resolution[b]) * g.resolution[c]);
  }
  return total;
}

void write_factors(Writer &w, const VMFactors &f) {
  for (int a = 0; a < 3; ++a) {
    w.matrix(f.lines[a]);
    w.matrix(f.planes[a]);
  }
}

void read_factors(Reader &r, VMFactors &f) {
  for (int a = 0; a < 3; ++a) {
    const auto [b, c] = kPlaneAxes[a];
    const GridGeometry &g = f.geometry;
    f.lines[a] = r.matrix(f.rank, g.resolution[a]);
    f.planes[a] = r.matrix(f.rank, Eigen::Index(g.resolution[b]) * g.resolution[c]);
  }
}

// Converts invariant violations from validate() into format errors.
template <typename Fn>
void as_format(const std::string &context, Fn &&fn) {
  try {
    fn();
  } catch (const FormatError &) {
    throw;
  } catch (const Error &e) {
    fail(FormatCode::kInvalidValue, context + ": " + e.what());
  }
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint &ck) {
  const RadianceField &field = ck.field;
  field.validate();
  const GridGeometry &g = field.geometry();
  const int channels = field.channels();

  Writer out;
  out.magic("SRFG");
  out.u32(kVersion);

  {
    Writer s;
    for (int a = 0; a < 3; ++a) s.u32(checked_u32(g.resolution[a]));
    for (int a = 0; a < 3; ++a) s.f32(g.bbox_min[a]);
    for (int a = 0; a < 3; ++a) s.f32(g.bbox_max[a]);
    out.section(kTagGeometry, s);
  }
  {
    Writer s;
    s.u32(checked_u32(field.feature.factors.rank));
    s.u32(checked_u32(channels));
    write_factors(s, field.feature.factors);
    out.section(kTagFeatureFactors, s);
  }
  {
    Writer s;
    s.u32(checked_u32(field.density.factors.rank));
    write_factors(s, field.density.factors);
    out.section(kTagDensityFactors, s);
  }
  {
    Writer s;
    s.u32(checked_u32(field.feature.basis.rows()));
    s.u32(checked_u32(field.feature.basis.cols()));
    s.matrix(field.feature.basis);
    out.section(kTagBasis, s);
  }
  if (ck.normalization) {
    const VolumeAdaptiveIN &n = *ck.normalization;
    n.validate();
    require(n.channels() == channels, "normalization channels do not match the field");
    Writer s;
    s.matrix(n.running_mean.transpose());
    s.matrix(n.running_var.transpose());
    s.f32(n.momentum);
    s.f32(n.epsilon);
    out.section(kTagNormalization, s);
  }
  if (ck.attention) {
    const AttentionParams &p = *ck.attention;
    p.validate();
    require(p.channels() == channels, "attention input channels do not match the field");
    Writer s;
    s.u32(checked_u32(p.reduced_channels()));
    s.u32(checked_u32(p.channels()));
    s.matrix(p.query);
    s.matrix(p.key);
    s.matrix(p.value);
    out.section(kTagAttention, s);
  }
  if (ck.conv) {
    const DstParams &c = *ck.conv;
    require(c.conv.rows() >= 1 && c.conv.cols() >= 1, "style conv is empty");
    require(!ck.attention || c.reduced_channels() == ck.attention->reduced_channels(),
            "style conv input does not match attention output");
    Writer s;
    s.u32(checked_u32(c.conv.rows()));
    s.u32(checked_u32(c.conv.cols()));
    s.matrix(c.conv);
    out.section(kTagStyleConv, s);
  }
  if (ck.decoder) {
    const DecoderParams &d = *ck.decoder;
    d.validate();
    Writer s;
    s.u32(checked_u32(d.channels()));
    s.matrix(d.weight);
    s.matrix(d.bias.transpose());
    s.matrix(d.background.transpose());
    out.section(kTagDecoder, s);
  }
  return std::move(out.bytes());
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t> &bytes) {
  Reader file(bytes.data(), bytes.size(), "file header");
  if (bytes.size() < 4) fail(FormatCode::kTruncated, "file header");
  if (!file.magic("SRFG")) fail(FormatCode::kBadMagic, "expected SRFG");
  const std::uint32_t version = file.u32();
  if (version != kVersion)
    fail(FormatCode::kBadVersion, "version " + std::to_string(version));

  Checkpoint ck;
  std::map<std::uint32_t, Reader> sections;
  while (file.remaining() > 0) {
    Reader header = file.sub(std::min<std::size_t>(12, file.remaining()),
                             "section header");
    const std::uint32_t tag = header.u32();
    const std::uint64_t length = header.u64();
    const std::string name = tag_name(tag);
    if (length > file.remaining())
      fail(FormatCode::kTruncated, name + " declares " + std::to_string(length) +
                                       " bytes, " + std::to_string(file.remaining()) +
                                       " remain");
    Reader payload = file.sub(static_cast<std::size_t>(length), name);
    if (tag < kTagGeometry || tag >= kTagReserved) {
      ck.warnings.push_back("skipped " + name + ", " + std::to_string(length) + " bytes");
      continue;
    }
    if (!sections.emplace(tag, payload).second)
      fail(FormatCode::kDuplicateSection, name);
  }

  for (std::uint32_t tag : {kTagGeometry, kTagFeatureFactors, kTagDensityFactors,
                            kTagBasis})
    if (!sections.count(tag)) fail(FormatCode::kMissingSection, tag_name(tag));

  GridGeometry g;
  {
    Reader &r = sections.at(kTagGeometry);
    for (int a = 0; a < 3; ++a) g.resolution[a] = int(read_dim(r, "resolution", 2));
    for (int a = 0; a < 3; ++a) g.bbox_min[a] = r.f32();
    for (int a = 0; a < 3; ++a) g.bbox_max[a] = r.f32();
    r.expect_end();
    as_format(tag_name(kTagGeometry), [&] { g.validate(); });
  }

  RadianceField &field = ck.field;
  int channels = 0;
  {
    Reader &r = sections.at(kTagFeatureFactors);
    const std::uint32_t rank = read_dim(r, "feature rank");
    channels = int(read_dim(r, "channels"));
    if (r.remaining() != factor_floats(g, rank) * 4)
      fail(FormatCode::kDimensionMismatch, tag_name(kTagFeatureFactors));
    field.feature.factors.geometry = g;
    field.feature.factors.rank = int(rank);
    read_factors(r, field.feature.factors);
  }
  {
    Reader &r = sections.at(kTagDensityFactors);
    const std::uint32_t rank = read_dim(r, "density rank");
    if (r.remaining() != factor_floats(g, rank) * 4)
      fail(FormatCode::kDimensionMismatch, tag_name(kTagDensityFactors));
    field.density.factors.geometry = g;
    field.density.factors.rank = int(rank);
    read_factors(r, field.density.factors);
  }
  {
    Reader &r = sections.at(kTagBasis);
    const std::uint32_t rows = read_dim(r, "basis rows");
    const std::uint32_t cols = read_dim(r, "basis cols");
    if (int(rows) != channels || int(cols) != field.feature.factors.components() ||
        r.remaining() != std::uint64_t(rows) * cols * 4)
      fail(FormatCode::kDimensionMismatch, tag_name(kTagBasis));
    field.feature.basis = r.matrix(rows, cols);
  }
  as_format("field", [&] { field.validate(); });

  if (auto it = sections.find(kTagNormalization); it != sections.end()) {
    Reader &r = it->second;
    if (r.remaining() != std::uint64_t(channels) * 8 + 8)
      fail(FormatCode::kDimensionMismatch, tag_name(kTagNormalization));
    VolumeAdaptiveIN n;
    n.running_mean = r.matrix(1, channels).transpose();
    n.running_var = r.matrix(1, channels).transpose();
    n.momentum = r.f32();
    n.epsilon = r.f32();
    n.mode = NormMode::kEval;
    as_format(tag_name(kTagNormalization), [&] { n.validate(); });
    ck.normalization = std::move(n);
  }
  if (auto it = sections.find(kTagAttention); it != sections.end()) {
    Reader &r = it->second;
    const std::uint32_t reduced = read_dim(r, "attention output channels");
    const std::uint32_t in = read_dim(r, "attention input channels");
    if (int(in) != channels || int(reduced) > channels ||
        r.remaining() != std::uint64_t(reduced) * in * 12)
      fail(FormatCode::kDimensionMismatch, tag_name(kTagAttention));
    AttentionParams p;
    p.query = r.matrix(reduced, in);
    p.key = r.matrix(reduced, in);
    p.value = r.matrix(reduced, in);
    ck.attention = std::move(p);
  }
  if (auto it = sections.find(kTagStyleConv); it != sections.end()) {
    Reader &r = it->second;
    const std::uint32_t rows = read_dim(r, "conv rows");
    const std::uint32_t cols = read_dim(r, "conv cols");
    if (r.remaining() != std::uint64_t(rows) * cols * 4 ||
        (ck.attention && int(cols) != ck.attention->reduced_channels()))
      fail(FormatCode::kDimensionMismatch, tag_name(kTagStyleConv));
    ck.conv = DstParams{r.matrix(rows, cols)};
  }
  if (auto it = sections.find(kTagDecoder); it != sections.end()) {
    Reader &r = it->second;
    const std::uint32_t c = read_dim(r, "decoder channels");
    if (r.remaining() != (std::uint64_t(c) * 3 + 6) * 4)
      fail(FormatCode::kDimensionMismatch, tag_name(kTagDecoder));
    DecoderParams d;
    d.weight = r.matrix(3, c);
    d.bias = r.matrix(3, 1);
    d.background = r.matrix(3, 1);
    as_format(tag_name(kTagDecoder), [&] { d.validate(); });
    ck.decoder = std::move(d);
  }
  return ck;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_error(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw_error(ErrorKind::kIo, "read failed: " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path &path,
                const std::vector<std::uint8_t> &bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_error(ErrorKind::kIo, "cannot create " + path.string());
  out.write(reinterpret_cast<const char *>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw_error(ErrorKind::kIo, "write failed: " + path.string());
}

void save_checkpoint(const std::filesystem::path &path, const Checkpoint &checkpoint) {
  write_file(path, encode_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path &path) {
  return decode_checkpoint(read_file(path));
}

// ---------------------------------------------------------------------------
// Tensors.

std::vector<std::uint8_t> encode_tensor(const Tensor &t) {
  std::uint64_t count = 1;
  for (std::uint32_t d : t.dims) count *= d;
  require(!t.dims.empty() && count == t.data.size(),
          "tensor data size does not match its dimensions");
  Writer w;
  w.magic("SRFT");
  w.u32(kVersion);
  w.u32(checked_u32(t.dims.size()));
  for (std::uint32_t d : t.dims) w.u32(d);
  for (float v : t.data) w.u32(std::bit_cast<std::uint32_t>(v));
  return std::move(w.bytes());
}

Tensor decode_tensor(const std::vector<std::uint8_t> &bytes) {
  Reader r(bytes.data(), bytes.size(), "tensor");
  if (bytes.size() < 4) fail(FormatCode::kTruncated, "tensor header");
  if (!r.magic("SRFT")) fail(FormatCode::kBadMagic, "expected SRFT");
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    fail(FormatCode::kBadVersion, "version " + std::to_string(version));
  const std::uint32_t ndim = r.u32();
  if (ndim < 1 || ndim > 8) fail(FormatCode::kBadHeader, "ndim " + std::to_string(ndim));
  Tensor t;
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    t.dims.push_back(r.u32());
    count *= t.dims.back();
    if (count > r.remaining()) fail(FormatCode::kTruncated, "tensor data");
  }
  if (r.remaining() != count * 4)
    fail(count * 4 > r.remaining() ? FormatCode::kTruncated
                                   : FormatCode::kDimensionMismatch,
         "tensor payload is " + std::to_string(r.remaining()) + " bytes");
  t.data.resize(count);
  for (float &v : t.data) v = static_cast<float>(r.f32());
  return t;
}

void save_tensor(const std::filesystem::path &path, const Tensor &tensor) {
  write_file(path, encode_tensor(tensor));
}

Tensor load_tensor(const std::filesystem::path &path) {
  return decode_tensor(read_file(path));
}

Tensor to_tensor(const StyleFeatures &f) {
  require(f.data.rows() == Eigen::Index(f.width) * f.height,
          "style features do not match their dimensions");
  Tensor t{{checked_u32(f.height), checked_u32(f.width), checked_u32(f.channels())}, {}};
  t.data.reserve(f.data.size());
  for (Eigen::Index p = 0; p < f.data.rows(); ++p)
    for (Eigen::Index c = 0; c < f.data.cols(); ++c)
      t.data.push_back(static_cast<float>(f.data(p, c)));
  return t;
}

StyleFeatures style_from_tensor(const Tensor &t) {
  if (t.dims.size() != 3)
    fail(FormatCode::kDimensionMismatch, "style tensor must be H x W x C");
  if (t.data.size() != std::size_t(t.dims[0]) * t.dims[1] * t.dims[2])
    fail(FormatCode::kDimensionMismatch, "style tensor data does not match its dims");
  StyleFeatures f;
  f.height = int(t.dims[0]);
  f.width = int(t.dims[1]);
  const Eigen::Index channels = t.dims[2];
  f.data.resize(Eigen::Index(f.width) * f.height, channels);
  for (Eigen::Index p = 0; p < f.data.rows(); ++p)
    for (Eigen::Index c = 0; c < channels; ++c)
      f.data(p, c) = t.data[std::size_t(p * channels + c)];
  return f;
}

Tensor to_tensor(const FeatureMap &map) {
  const int c = map.channels();
  Tensor t{{checked_u32(map.height), checked_u32(map.width), checked_u32(c + 1)}, {}};
  t.data.reserve(std::size_t(map.pixel_count()) * (c + 1));
  for (Eigen::Index p = 0; p < map.pixel_count(); ++p) {
    for (int k = 0; k < c; ++k) t.data.push_back(static_cast<float>(map.data(p, k)));
    t.data.push_back(static_cast<float>(map.ray_weight[p]));
  }
  return t;
}

// ---------------------------------------------------------------------------
// PPM.

std::vector<std::uint8_t> encode_ppm(const RgbImage &image) {
  require(image.width >= 1 && image.height >= 1 &&
              image.pixels.rows() == Eigen::Index(image.width) * image.height,
          "image buffer does not match its dimensions");
  const std::string header = "P6\n" + std::to_string(image.width) + " " +
                             std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + std::size_t(image.pixels.size()));
  for (Eigen::Index p = 0; p < image.pixels.rows(); ++p)
    for (int k = 0; k < 3; ++k) {
      const double x = image.pixels(p, k);
      const double v = std::isnan(x) ? 0.0 : std::clamp(x, 0.0, 1.0);
      out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
    }
  return out;
}

RgbImage decode_ppm(const std::vector<std::uint8_t> &bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&](const char *what) {
    skip_space();
    std::uint64_t v = 0;
    std::size_t digits = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos]) && digits < 9) {
      v = v * 10 + (bytes[pos++] - '0');
      ++digits;
    }
    if (digits == 0) fail(FormatCode::kBadHeader, std::string("ppm ") + what);
    return v;
  };

  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6')
    fail(FormatCode::kBadMagic, "expected P6");
  pos = 2;
  const std::uint64_t w = number("width"), h = number("height"),
                      maxval = number("maxval");
  if (w == 0 || h == 0) fail(FormatCode::kBadHeader, "ppm size is zero");
  if (maxval != 255) fail(FormatCode::kBadHeader, "ppm maxval must be 255");
  if (pos >= bytes.size() || !std::isspace(bytes[pos]))
    fail(FormatCode::kBadHeader, "ppm header not terminated");
  ++pos;
  if (bytes.size() - pos < w * h * 3) fail(FormatCode::kTruncated, "ppm pixel data");

  RgbImage image{int(w), int(h)};
  for (Eigen::Index p = 0; p < image.pixels.rows(); ++p)
    for (int k = 0; k < 3; ++k) image.pixels(p, k) = bytes[pos++] / 255.0;
  return image;
}

void write_ppm(const std::filesystem::path &path, const RgbImage &image) {
  write_file(path, encode_ppm(image));
}

RgbImage read_ppm(const std::filesystem::path &path) {
  return decode_ppm(read_file(path));
}

// ---------------------------------------------------------------------------
// Configuration.

std::vector<Camera> CameraRig::build() const {
  return orbit_cameras(count, radius, elevation_deg, target, width, height, fov_deg);
}

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string &path, const std::string &what) {
  throw_error(ErrorKind::kFormat, "config " + (path.empty() ? "<root>" : path) +
                                      ": " + what);
}

// Object view that remembers which keys were read, so leftovers can be
// reported as unknown.
class Node {
 public:
  Node(const json &value, std::string path) : value_(value), path_(std::move(path)) {
    if (!value_.is_object()) config_error(path_, "expected an object");
  }
  Node(const Node &) = delete;
  Node &operator=(const Node &) = delete;

  ~Node() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto &[key, unused] : value_.items())
      if (!seen_.count(key)) config_error(child(key), "unknown key");
  }

  std::string child(const std::string &key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json *find(const std::string &key) {
    seen_.insert(key);
    auto it = value_.find(key);
    return it == value_.end() ? nullptr : &*it;
  }

  Node object(const std::string &key) {
    static const json kEmpty = json::object();
    const json *v = find(key);
    return Node(v ? *v : kEmpty, child(key));
  }

  double number(const std::string &key, double fallback) {
    const json *v = find(key);
    if (!v) return fallback;
    if (!v->is_number()) config_error(child(key), "expected a number");
    const double x = v->get<double>();
    if (!std::isfinite(x)) config_error(child(key), "must be finite");
    return x;
  }

  std::int64_t integer(const std::string &key, std::int64_t fallback,
                       std::int64_t lo = std::numeric_limits<std::int64_t>::min()) {
    const json *v = find(key);
    if (!v) return fallback;
    if (!v->is_number_integer()) config_error(child(key), "expected an integer");
    const std::int64_t x = v->get<std::int64_t>();
    if (x < lo) config_error(child(key), "must be >= " + std::to_string(lo));
    return x;
  }

  std::uint64_t seed(const std::string &key, std::uint64_t fallback) {
    const json *v = find(key);
    if (!v) return fallback;
    if (v->is_number_unsigned()) return v->get<std::uint64_t>();
    config_error(child(key), "expected a non-negative integer");
  }

  bool boolean(const std::string &key, bool fallback) {
    const json *v = find(key);
    if (!v) return fallback;
    if (!v->is_boolean()) config_error(child(key), "expected true or false");
    return v->get<bool>();
  }

  Eigen::VectorXd vector(const std::string &key, const Eigen::VectorXd &fallback,
                         Eigen::Index size) {
    const json *v = find(key);
    if (!v) return fallback;
    if (!v->is_array() || (size >= 0 && Eigen::Index(v->size()) != size))
      config_error(child(key), size >= 0 ? "expected an array of " +
                                               std::to_string(size) + " numbers"
                                         : "expected an array of numbers");
    Eigen::VectorXd out(Eigen::Index(v->size()));
    for (std::size_t i = 0; i < v->size(); ++i) {
      const json &e = (*v)[i];
      if (!e.is_number() || !std::isfinite(e.get<double>()))
        config_error(child(key) + "[" + std::to_string(i) + "]",
                     "expected a finite number");
      out[Eigen::Index(i)] = e.get<double>();
    }
    return out;
  }

  const std::string &path() const { return path_; }

 private:
  const json &value_;
  std::string path_;
  std::set<std::string> seen_;
};

void check(bool ok, const std::string &path, const std::string &what) {
  if (!ok) config_error(path, what);
}

Eigen::Matrix3d rotation_from_degrees(const Eigen::Vector3d &deg) {
  const Eigen::Vector3d r = deg * (std::numbers::pi / 180.0);
  return (Eigen::AngleAxisd(r.z(), Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(r.y(), Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(r.x(), Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

Primitive parse_primitive(const json &value, const std::string &path, int channels) {
  Node n(value, path);
  Primitive p;
  const json *shape = n.find("shape");
  check(shape && shape->is_string(), n.child("shape"),
        "expected \"sphere\", \"box\" or \"torus\"");
  const std::string s = shape->get<std::string>();
  if (s == "sphere") p.shape = Shape::kSphere;
  else if (s == "box") p.shape = Shape::kBox;
  else if (s == "torus") p.shape = Shape::kTorus;
  else config_error(n.child("shape"), "unknown shape \"" + s + "\"");

  p.center = n.vector("center", p.center, 3);
  p.rotation = rotation_from_degrees(n.vector("rotation_deg", Eigen::Vector3d::Zero(), 3));
  p.radius = n.number("radius", p.radius);
  check(p.radius > 0.0, n.child("radius"), "must be positive");
  p.minor_radius = n.number("minor_radius", p.minor_radius);
  check(p.minor_radius > 0.0, n.child("minor_radius"), "must be positive");
  p.half_extents = n.vector("half_extents", p.half_extents, 3);
  check((p.half_extents.array() > 0.0).all(), n.child("half_extents"),
        "must be positive");
  p.amplitude = n.number("amplitude", p.amplitude);
  check(p.amplitude >= 0.0, n.child("amplitude"), "must be >= 0");
  p.offset = n.vector("offset", Eigen::VectorXd(), channels);
  return p;
}

void set_override(json &root, const std::string &assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    config_error("", "override \"" + assignment + "\" is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json *node = &root;
  std::stringstream parts(key);
  std::string part;
  std::vector<std::string> segments;
  while (std::getline(parts, part, '.')) segments.push_back(part);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const std::string &seg = segments[i];
    if (seg.empty()) config_error(key, "empty path segment in override");
    json *next = nullptr;
    if (node->is_array()) {
      std::size_t index = 0;
      const bool numeric = std::all_of(seg.begin(), seg.end(), ::isdigit);
      if (numeric) index = std::stoul(seg);
      if (!numeric || index >= node->size())
        config_error(key, "override index \"" + seg + "\" out of range");
      next = &(*node)[index];
    } else {
      if (node->is_null()) *node = json::object();
      if (!node->is_object()) config_error(key, "override descends into a non-object");
      next = &(*node)[seg];
    }
    node = next;
  }
  *node = std::move(value);
}

}  // namespace

PipelineConfig parse_config(const std::string &text,
                            const std::vector<std::string> &overrides,
                            const std::filesystem::path &base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error &e) {
    const std::size_t byte = std::min<std::size_t>(e.byte, text.size());
    std::size_t line = 1, column = 1;
    for (std::size_t i = 0; i + 1 < byte; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw_error(ErrorKind::kFormat, "config syntax error at line " +
                                        std::to_string(line) + ", column " +
                                        std::to_string(column) + ": " + e.what());
  }
  if (!root.is_object()) config_error("", "expected an object");
  for (const std::string &o : overrides) set_override(root, o);

  PipelineConfig cfg;
  Node top(root, "");

  if (!top.find("scene")) config_error("scene", "required key is missing");
  {
    Node scene = top.object("scene");
    cfg.scene.channels = int(scene.integer("channels", cfg.scene.channels, 3));
    cfg.scene.softness = scene.number("softness", cfg.scene.softness);
    check(cfg.scene.softness > 0.0, scene.child("softness"), "must be positive");
    const json *prims = scene.find("primitives");
    if (prims) {
      check(prims->is_array(), scene.child("primitives"), "expected an array");
      for (std::size_t i = 0; i < prims->size(); ++i)
        cfg.scene.primitives.push_back(parse_primitive(
            (*prims)[i], scene.child("primitives") + "[" + std::to_string(i) + "]",
            cfg.scene.channels));
    }
  }
  cfg.layout.channels = cfg.scene.channels;

  {
    Node grid = top.object("grid");
    const Eigen::VectorXd res =
        grid.vector("resolution", Eigen::Vector3d::Constant(32.0), 3);
    for (int a = 0; a < 3; ++a) {
      check(res[a] >= 2 && res[a] < double(kMaxDim) && res[a] == std::floor(res[a]),
            grid.child("resolution"), "entries must be integers in [2, 65535]");
      cfg.layout.geometry.resolution[a] = int(res[a]);
    }
    cfg.layout.geometry.bbox_min =
        grid.vector("bbox_min", Eigen::Vector3d::Constant(-1.5), 3);
    cfg.layout.geometry.bbox_max =
        grid.vector("bbox_max", Eigen::Vector3d::Constant(1.5), 3);
    check((cfg.layout.geometry.bbox_min.array() < cfg.layout.geometry.bbox_max.array())
              .all(),
          grid.child("bbox_min"), "must be below bbox_max on every axis");
    cfg.layout.rank = int(grid.integer("rank", cfg.layout.rank, 1));
  }

  {
    Node cams = top.object("cameras");
    CameraRig &rig = cfg.cameras;
    rig.count = int(cams.integer("count", rig.count, 1));
    rig.radius = cams.number("radius", rig.radius);
    check(rig.radius > 0.0, cams.child("radius"), "must be positive");
    rig.elevation_deg = cams.number("elevation_deg", rig.elevation_deg);
    check(std::abs(rig.elevation_deg) < 90.0, cams.child("elevation_deg"),
          "must be inside (-90, 90)");
    rig.target = cams.vector("target", rig.target, 3);
    rig.width = int(cams.integer("width", rig.width, 1));
    rig.height = int(cams.integer("height", rig.height, 1));
    rig.fov_deg = cams.number("fov_deg", rig.fov_deg);
    check(rig.fov_deg > 0.0 && rig.fov_deg < 180.0, cams.child("fov_deg"),
          "must be inside (0, 180)");
  }

  {
    Node s = top.object("sampling");
    SamplingSpec &spec = cfg.sampling;
    spec.samples = int(s.integer("samples", spec.samples, 1));
    spec.near = s.number("near", spec.near);
    spec.far = s.number("far", spec.far);
    check(spec.near >= 0.0, s.child("near"), "must be >= 0");
    check(spec.near < spec.far, s.child("near"), "must be < sampling.far");
    spec.stratified = s.boolean("stratified", spec.stratified);
    spec.seed = s.seed("seed", spec.seed);
  }
  cfg.reference_samples = int(top.integer("reference_samples", cfg.reference_samples,
                                          kMinReferenceSamples));

  {
    Node t = top.object("training");
    Stage1Config &c = cfg.training;
    c.learning_rate = t.number("learning_rate", c.learning_rate);
    check(c.learning_rate > 0.0, t.child("learning_rate"), "must be positive");
    c.iterations = int(t.integer("iterations", c.iterations, 0));
    c.rays_per_batch = int(t.integer("rays_per_batch", c.rays_per_batch, 1));
    c.seed = t.seed("seed", c.seed);
    c.rgb_loss_weight = t.number("rgb_loss_weight", c.rgb_loss_weight);
    check(c.rgb_loss_weight >= 0.0, t.child("rgb_loss_weight"), "must be >= 0");
    c.density_lr_scale = t.number("density_lr_scale", c.density_lr_scale);
    check(c.density_lr_scale > 0.0, t.child("density_lr_scale"), "must be positive");
    c.init_scale = t.number("init_scale", c.init_scale);
    check(c.init_scale > 0.0, t.child("init_scale"), "must be positive");
  }

  {
    Node s = top.object("sict");
    SictConfig &c = cfg.sict;
    c.reduced_channels =
        int(s.integer("reduced_channels", std::min(c.reduced_channels, cfg.scene.channels), 1));
    check(c.reduced_channels <= cfg.scene.channels &&
              c.reduced_channels <= kStyleBankSize,
          s.child("reduced_channels"),
          "must not exceed scene.channels or " + std::to_string(kStyleBankSize));
    c.momentum = s.number("momentum", c.momentum);
    check(c.momentum > 0.0 && c.momentum < 1.0, s.child("momentum"),
          "must be inside (0, 1)");
    c.epsilon = s.number("epsilon", c.epsilon);
    check(c.epsilon >= 0.0, s.child("epsilon"), "must be >= 0");
    c.calibration.points =
        std::size_t(s.integer("calibration_points", std::int64_t(c.calibration.points), 1));
    c.calibration.batch_size =
        std::size_t(s.integer("batch_size", std::int64_t(c.calibration.batch_size), 1));
    c.calibration.seed = s.seed("seed", c.calibration.seed);
  }

  if (const json *styles = top.find("styles")) {
    check(styles->is_array(), "styles", "expected an array of strings");
    for (std::size_t i = 0; i < styles->size(); ++i) {
      const json &e = (*styles)[i];
      check(e.is_string(), "styles[" + std::to_string(i) + "]", "expected a string");
      std::string s = e.get<std::string>();
      if (s != "identity" && !base_dir.empty() && std::filesystem::path(s).is_relative())
        s = (base_dir / s).lexically_normal().string();
      cfg.styles.push_back(s);
    }
  }

  cfg.background = top.vector("background", cfg.background, 3);
  check((cfg.background.array() >= 0.0).all() && (cfg.background.array() <= 1.0).all(),
        "background", "entries must be in [0, 1]");
  return cfg;
}

PipelineConfig read_config(const std::filesystem::path &path,
                           const std::vector<std::string> &overrides) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  return parse_config(std::string(bytes.begin(), bytes.end()), overrides,
                      path.parent_path());
}

}  // namespace fgstyle
