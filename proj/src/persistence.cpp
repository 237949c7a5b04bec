#include "pnp/persistence.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "pnp/errors.hpp"

namespace pnp::io {

using Kind = FormatError::Kind;

namespace {

// Sanity bound on H*W so a corrupt header cannot request absurd allocations.
constexpr std::uint64_t kMaxPixels = std::uint64_t{1} << 28;

class Writer {
 public:
  void raw(const char* s, std::size_t n) { out_.insert(out_.end(), s, s + n); }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class Reader {
 public:
  Reader(const Bytes& bytes, std::string format) : bytes_(bytes), format_(std::move(format)) {}

  void need(std::size_t n, const std::string& where) const {
    if (bytes_.size() - pos_ < n) throw FormatError(Kind::Truncated, format_ + ": truncated " + where);
  }
  void magic(const char* expected) {
    const std::size_t n = std::strlen(expected);
    const std::size_t have = std::min(n, bytes_.size());
    if (std::memcmp(bytes_.data(), expected, have) != 0) throw FormatError(Kind::BadMagic, format_ + ": bad magic");
    if (have < n) throw FormatError(Kind::Truncated, format_ + ": truncated magic");
    pos_ = n;
  }
  std::uint8_t u8(const std::string& where) {
    need(1, where);
    return bytes_[pos_++];
  }
  std::uint16_t u16(const std::string& where) {
    need(2, where);
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(const std::string& where) {
    need(4, where);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f32(const std::string& where) { return static_cast<double>(std::bit_cast<float>(u32(where))); }
  std::string str(std::size_t n, const std::string& where) {
    need(n, where);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void finish() const {
    if (pos_ != bytes_.size())
      throw FormatError(Kind::TrailingBytes,
                        format_ + ": " + std::to_string(bytes_.size() - pos_) + " trailing bytes");
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const Bytes& bytes_;
  std::string format_;
  std::size_t pos_ = 0;
};

std::pair<std::size_t, std::size_t> read_dims(Reader& r, const std::string& format) {
  const std::uint32_t h = r.u32("header"), w = r.u32("header");
  if (h == 0 || w == 0) throw FormatError(Kind::Malformed, format + ": zero dimension");
  if (static_cast<std::uint64_t>(h) * w > kMaxPixels)
    throw FormatError(Kind::Malformed, format + ": dimension overflow " + std::to_string(h) + "x" + std::to_string(w));
  return {h, w};
}

std::uint32_t to_u32(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) throw FormatError(Kind::Malformed, std::string(what) + " too large");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failure on '" + path.string() + "'");
  return bytes;
}

void write_file(const std::filesystem::path& path, const Bytes& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

// ---------------------------------------------------------------- weights

Bytes encode_weights(const mssn::MssnWeights& weights, const mssn::MssnConfig& raw) {
  const mssn::MssnConfig cfg = raw.resolved();
  const auto census = mssn::weight_census(cfg);
  Writer w;
  w.raw("MSSN", 4);
  w.u32(kWeightsVersion);
  for (std::size_t v : {cfg.features, cfg.blocks, cfg.heads, cfg.patch, cfg.dk_pixel, cfg.dk_channel, cfg.dv_pixel,
                        cfg.dv_channel})
    w.u32(to_u32(v, "config field"));
  w.u8(cfg.tie_blocks ? 1 : 0);
  w.u8(static_cast<std::uint8_t>(cfg.variant));
  w.u32(to_u32(census.size(), "tensor count"));
  for (const auto& spec : census) {
    const auto& t = weights.at(spec.name);
    if (t.dims() != spec.dims)
      throw ShapeError("encode_weights: tensor '" + spec.name + "' is " + nn::shape_string(t.dims()) + ", expected " +
                       nn::shape_string(spec.dims));
    if (spec.name.size() > 0xFFFF) throw FormatError(Kind::Malformed, "tensor name too long");
    w.u16(static_cast<std::uint16_t>(spec.name.size()));
    w.raw(spec.name.data(), spec.name.size());
    w.u8(static_cast<std::uint8_t>(spec.dims.size()));
    for (auto d : spec.dims) w.u32(to_u32(d, "tensor dim"));
    for (double v : t.data()) w.f32(v);
  }
  return w.take();
}

LoadedWeights decode_weights(const Bytes& bytes) {
  Reader r(bytes, "weights");
  r.magic("MSSN");
  const std::uint32_t version = r.u32("header");
  if (version != kWeightsVersion)
    throw FormatError(Kind::VersionMismatch, "weights: version " + std::to_string(version) + ", expected " +
                                                 std::to_string(kWeightsVersion));
  mssn::MssnConfig cfg;
  std::size_t* fields[] = {&cfg.features, &cfg.blocks, &cfg.heads, &cfg.patch,
                           &cfg.dk_pixel, &cfg.dk_channel, &cfg.dv_pixel, &cfg.dv_channel};
  for (auto* f : fields) *f = r.u32("config block");
  const std::uint8_t tie = r.u8("config block");
  const std::uint8_t mode = r.u8("config block");
  if (tie > 1 || mode > 1) throw FormatError(Kind::Malformed, "weights: invalid flag byte in config block");
  cfg.tie_blocks = tie == 1;
  cfg.variant = static_cast<mssn::Variant>(mode);

  std::vector<mssn::TensorSpec> census;
  try {
    census = mssn::weight_census(cfg);
  } catch (const Error& e) {
    throw FormatError(Kind::Malformed, std::string("weights: invalid config block: ") + e.what());
  }
  if (cfg.resolved() != cfg) throw FormatError(Kind::Malformed, "weights: config block is not fully resolved");

  const std::uint32_t count = r.u32("header");
  if (count != census.size())
    throw FormatError(Kind::CensusMismatch, "weights: file declares " + std::to_string(count) +
                                                " tensors, config requires " + std::to_string(census.size()));
  mssn::MssnWeights weights(cfg);
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string at = "in header of tensor #" + std::to_string(i);
    const std::uint16_t len = r.u16(at);
    const std::string name = r.str(len, at);
    const std::string inside = "inside tensor '" + name + "'";
    const std::uint8_t rank = r.u8(inside);
    nn::Shape dims(rank);
    for (auto& d : dims) d = r.u32(inside);
    auto spec = std::find_if(census.begin(), census.end(), [&](const auto& s) { return s.name == name; });
    if (spec == census.end() || spec->dims != dims || !seen.insert(name).second)
      throw FormatError(Kind::CensusMismatch,
                        "weights: tensor '" + name + "' " + nn::shape_string(dims) + " is not in the config census");
    r.need(nn::shape_size(dims) * 4, inside);
    auto data = weights.at(name).data();
    for (auto& v : data) v = r.f32(inside);
  }
  r.finish();
  return {std::move(weights), cfg};
}

void save_weights(const mssn::MssnWeights& weights, const mssn::MssnConfig& cfg, const std::filesystem::path& path) {
  write_file(path, encode_weights(weights, cfg));
}

LoadedWeights load_weights(const std::filesystem::path& path) { return decode_weights(read_file(path)); }

// ---------------------------------------------------------------- images

Bytes encode_imgf(const Image& img) {
  Writer w;
  w.raw("IMGF", 4);
  w.u32(to_u32(img.rows, "rows"));
  w.u32(to_u32(img.cols, "cols"));
  for (double v : img.pixels) w.f32(v);
  return w.take();
}

Image decode_imgf(const Bytes& bytes) {
  Reader r(bytes, "IMGF");
  r.magic("IMGF");
  const auto [h, w] = read_dims(r, "IMGF");
  r.need(h * w * 4, "pixel data");
  Image img(h, w);
  for (auto& v : img.pixels) v = r.f32("pixel data");
  r.finish();
  return img;
}

Bytes encode_pgm(const Image& img) {
  std::string header = "P5\n" + std::to_string(img.cols) + " " + std::to_string(img.rows) + "\n255\n";
  Bytes out(header.begin(), header.end());
  for (double v : img.pixels) {
    const double c = std::clamp(v, 0.0, 1.0);
    out.push_back(static_cast<std::uint8_t>(std::floor(c * 255.0 + 0.5)));
  }
  return out;
}

namespace {

struct PgmRaster {
  std::size_t rows, cols;
  unsigned maxval;
  std::vector<std::uint8_t> samples;
};

PgmRaster parse_pgm(const Bytes& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw FormatError(Kind::BadMagic, "PGM: bad magic");
  std::size_t pos = 2;
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
  auto number = [&](const char* what) -> std::uint64_t {
    skip_space();
    if (pos >= bytes.size()) throw FormatError(Kind::Truncated, std::string("PGM: truncated header at ") + what);
    if (!std::isdigit(bytes[pos])) throw FormatError(Kind::Malformed, std::string("PGM: malformed ") + what);
    std::uint64_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > kMaxPixels) throw FormatError(Kind::Malformed, std::string("PGM: dimension overflow in ") + what);
    }
    return v;
  };
  const std::uint64_t w = number("width"), h = number("height"), maxval = number("maxval");
  if (w == 0 || h == 0) throw FormatError(Kind::Malformed, "PGM: zero dimension");
  if (w * h > kMaxPixels) throw FormatError(Kind::Malformed, "PGM: dimension overflow");
  if (maxval == 0 || maxval > 255) throw FormatError(Kind::Malformed, "PGM: only 8-bit maxval is supported");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError(Kind::Malformed, "PGM: missing separator");
  ++pos;
  const std::size_t n = static_cast<std::size_t>(w * h);
  if (bytes.size() - pos < n) throw FormatError(Kind::Truncated, "PGM: truncated pixel data");
  if (bytes.size() - pos > n) throw FormatError(Kind::TrailingBytes, "PGM: trailing bytes");
  return {static_cast<std::size_t>(h), static_cast<std::size_t>(w), static_cast<unsigned>(maxval),
          std::vector<std::uint8_t>(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end())};
}

}  // namespace

Image decode_pgm(const Bytes& bytes) {
  const PgmRaster raster = parse_pgm(bytes);
  Image img(raster.rows, raster.cols);
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (raster.samples[i] > raster.maxval) throw FormatError(Kind::Malformed, "PGM: sample exceeds maxval");
    img.pixels[i] = static_cast<double>(raster.samples[i]) / static_cast<double>(raster.maxval);
  }
  return img;
}

void write_image(const std::filesystem::path& path, const Image& img) {
  write_file(path, path.extension() == ".pgm" ? encode_pgm(img) : encode_imgf(img));
}

Image read_image(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return decode_pgm(bytes);
  return decode_imgf(bytes);
}

void write_mask(const std::filesystem::path& path, const SamplingMask& mask) {
  Image img(mask.rows, mask.cols);
  for (std::size_t i = 0; i < img.size(); ++i) img.pixels[i] = mask.bits[i] ? 1.0 : 0.0;
  write_file(path, encode_pgm(img));
}

SamplingMask read_mask(const std::filesystem::path& path) {
  const PgmRaster raster = parse_pgm(read_file(path));
  SamplingMask mask;
  mask.rows = raster.rows;
  mask.cols = raster.cols;
  mask.bits.resize(raster.samples.size());
  for (std::size_t i = 0; i < raster.samples.size(); ++i) {
    const auto s = raster.samples[i];
    if (s != 0 && s != raster.maxval)
      throw FormatError(Kind::Malformed, "mask PGM: sample " + std::to_string(s) + " is neither 0 nor maxval");
    mask.bits[i] = s ? 1 : 0;
  }
  return mask;
}

// ---------------------------------------------------------------- k-space

Bytes encode_kspace(const KSpaceMeasurement& y) {
  if (y.mask.rows != y.values.rows || y.mask.cols != y.values.cols)
    throw ShapeError("encode_kspace: mask and values dims differ");
  Writer w;
  w.raw("KSPC", 4);
  w.u32(to_u32(y.values.rows, "rows"));
  w.u32(to_u32(y.values.cols, "cols"));
  for (const auto& v : y.values.values) {
    w.f32(v.real());
    w.f32(v.imag());
  }
  for (auto b : y.mask.bits) w.u8(b ? 1 : 0);
  return w.take();
}

KSpaceMeasurement decode_kspace(const Bytes& bytes) {
  Reader r(bytes, "KSPC");
  r.magic("KSPC");
  const auto [h, w] = read_dims(r, "KSPC");
  r.need(h * w * 9, "payload");
  KSpaceMeasurement y;
  y.values = ComplexField(h, w);
  for (auto& v : y.values.values) {
    const double re = r.f32("values");
    const double im = r.f32("values");
    v = {re, im};
  }
  y.mask.rows = h;
  y.mask.cols = w;
  y.mask.bits.resize(h * w);
  for (std::size_t i = 0; i < h * w; ++i) {
    const std::uint8_t b = r.u8("mask");
    if (b > 1) throw FormatError(Kind::Malformed, "KSPC: mask byte " + std::to_string(b) + " is not 0 or 1");
    y.mask.bits[i] = b;
  }
  r.finish();
  for (std::size_t i = 0; i < h * w; ++i)
    if (!y.mask.bits[i] && y.values.values[i] != std::complex<double>{})
      throw FormatError(Kind::Malformed, "KSPC: nonzero value at an unsampled location");
  return y;
}

void write_kspace(const std::filesystem::path& path, const KSpaceMeasurement& y) { write_file(path, encode_kspace(y)); }

KSpaceMeasurement read_kspace(const std::filesystem::path& path) { return decode_kspace(read_file(path)); }

// ---------------------------------------------------------------- configs

double parse_real(const std::string& text) {
  auto parse_one = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      throw UsageError("not a number: '" + text + "'");
    }
    if (used != s.size()) throw UsageError("not a number: '" + text + "'");
    return v;
  };
  const auto slash = text.find('/');
  if (slash == std::string::npos) return parse_one(text);
  const double den = parse_one(text.substr(slash + 1));
  if (den == 0.0) throw UsageError("zero denominator in '" + text + "'");
  return parse_one(text.substr(0, slash)) / den;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::istream& in, const std::string& source) {
  KeyValueConfig cfg;
  cfg.source_ = source;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw UsageError(source + ":" + std::to_string(lineno) + ": empty key");
    if (!cfg.values_.emplace(key, value).second)
      throw UsageError(source + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  return parse(in, path.string());
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return parse_real(it->second);
  } catch (const UsageError& e) {
    throw UsageError(source_ + ": key '" + key + "': " + e.what());
  }
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& s = it->second;
  if (s.empty() || !std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); }))
    throw UsageError(source_ + ": key '" + key + "' expects a nonnegative integer, got '" + s + "'");
  try {
    return std::stoull(s);
  } catch (const std::exception&) {
    throw UsageError(source_ + ": key '" + key + "' is out of range");
  }
}

std::size_t KeyValueConfig::get_size(const std::string& key, std::size_t fallback) const {
  return static_cast<std::size_t>(get_u64(key, fallback));
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw UsageError(source_ + ": key '" + key + "' expects true/false, got '" + it->second + "'");
}

std::vector<std::string> KeyValueConfig::get_list(const std::string& key,
                                                  const std::vector<std::string>& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<std::string> out;
  std::stringstream ss(it->second);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void KeyValueConfig::require_known(const std::set<std::string>& known) const {
  for (const auto& [k, v] : values_)
    if (!known.count(k)) throw UsageError(source_ + ": unknown key '" + k + "'");
}

}  // namespace pnp::io
