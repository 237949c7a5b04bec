#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstring>
#include <filesystem>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "pnp/errors.hpp"
#include "pnp/persistence.hpp"

using namespace pnp;
using namespace pnp::io;
namespace fs = std::filesystem;

namespace {

// Round every value to binary32 so a save/load cycle is expected to be exact.
Image float_image(std::size_t h, std::size_t w, std::mt19937_64& rng) {
  Image img = oracle::random_image(h, w, rng, -2, 2);
  for (auto& v : img.pixels) v = static_cast<float>(v);
  return img;
}

mssn::MssnConfig small_net() {
  mssn::MssnConfig c;
  c.features = 4;
  c.blocks = 2;
  c.heads = 2;
  c.patch = 6;
  return c;
}

mssn::MssnWeights float_weights(const mssn::MssnConfig& cfg, std::mt19937_64& rng) {
  mssn::MssnWeights w(cfg);
  std::uniform_real_distribution<double> u(-1, 1);
  for (const auto& spec : mssn::weight_census(cfg))
    for (auto& v : w.at(spec.name).data()) v = static_cast<float>(u(rng));
  return w;
}

FormatError::Kind format_kind(const std::function<void()>& f) {
  try {
    f();
  } catch (const FormatError& e) {
    return e.kind();
  }
  FAIL("expected a FormatError");
  return FormatError::Kind::Malformed;
}

std::string format_message(const std::function<void()>& f) {
  try {
    f();
  } catch (const FormatError& e) {
    return e.what();
  }
  return {};
}

void put_u32(Bytes& b, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

}  // namespace

TEST_CASE("weights round trip") {
  std::mt19937_64 rng(1);
  for (auto variant : {mssn::Variant::Mssn, mssn::Variant::Ssn}) {
    mssn::MssnConfig cfg = small_net();
    cfg.variant = variant;
    cfg.tie_blocks = variant == mssn::Variant::Mssn;
    const mssn::MssnWeights w = float_weights(cfg, rng);
    const Bytes bytes = encode_weights(w, cfg);
    const LoadedWeights back = decode_weights(bytes);
    CHECK(back.config == cfg.resolved());
    CHECK(back.weights.tensor_count() == w.tensor_count());
    for (const auto& [name, t] : w.all()) {
      const auto& u = back.weights.at(name);
      REQUIRE(u.dims() == t.dims());
      CHECK(std::memcmp(u.data().data(), t.data().data(), t.size() * sizeof(double)) == 0);
    }
    CHECK(encode_weights(back.weights, back.config) == bytes);
  }

  // Arbitrary doubles: stored at binary32, so load(save(w)) is the float rounding of w.
  const mssn::MssnConfig cfg = small_net();
  mssn::MssnWeights w(cfg);
  std::uniform_real_distribution<double> u(-1, 1);
  for (const auto& spec : mssn::weight_census(cfg))
    for (auto& v : w.at(spec.name).data()) v = u(rng);
  const LoadedWeights back = decode_weights(encode_weights(w, cfg));
  for (const auto& [name, t] : w.all())
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(back.weights.at(name)[i] == static_cast<double>(static_cast<float>(t[i])));

  const fs::path path = fs::temp_directory_path() / "pnp_test_weights.mssn";
  save_weights(w, cfg, path);
  CHECK(read_file(path) == encode_weights(w, cfg));
  fs::remove(path);
  CHECK_THROWS_AS(load_weights("/nonexistent/pnp.mssn"), IoError);
}

TEST_CASE("weights rejections") {
  std::mt19937_64 rng(2);
  const mssn::MssnConfig cfg = small_net();
  const Bytes good = encode_weights(float_weights(cfg, rng), cfg);

  Bytes bad = good;
  bad[0] = 'X';
  CHECK(format_kind([&] { decode_weights(bad); }) == FormatError::Kind::BadMagic);

  bad = good;
  put_u32(bad, 4, 2);
  CHECK(format_kind([&] { decode_weights(bad); }) == FormatError::Kind::VersionMismatch);

  // Build a file for a different config and splice in this config's header.
  mssn::MssnConfig other = cfg;
  other.features = 5;
  other.heads = 1;
  const Bytes alien = encode_weights(float_weights(other, rng), other);
  bad = alien;
  std::copy(good.begin() + 8, good.begin() + 8 + 34, bad.begin() + 8);
  CHECK(format_kind([&] { decode_weights(bad); }) == FormatError::Kind::CensusMismatch);

  bad = good;
  put_u32(bad, 42, 3);
  CHECK(format_kind([&] { decode_weights(bad); }) == FormatError::Kind::CensusMismatch);

  // Cut in the middle of the last tensor's values.
  bad.assign(good.begin(), good.end() - 2);
  CHECK(format_kind([&] { decode_weights(bad); }) == FormatError::Kind::Truncated);
  const std::string last = mssn::weight_census(cfg).back().name;
  CHECK(format_message([&] { decode_weights(bad); }).find(last) != std::string::npos);

  bad = good;
  bad.push_back(0);
  CHECK(format_kind([&] { decode_weights(bad); }) == FormatError::Kind::TrailingBytes);

  bad.assign(good.begin(), good.begin() + 3);
  CHECK(format_kind([&] { decode_weights(bad); }) == FormatError::Kind::Truncated);
}

TEST_CASE("imgf round trip and rejections") {
  std::mt19937_64 rng(3);
  const Image img = float_image(7, 11, rng);
  const Bytes bytes = encode_imgf(img);
  CHECK(bytes.size() == 12 + 4 * 77);
  CHECK(decode_imgf(bytes) == img);

  const fs::path path = fs::temp_directory_path() / "pnp_test.imgf";
  write_image(path, img);
  CHECK(read_image(path) == img);
  fs::remove(path);

  Bytes bad = bytes;
  bad[1] = 'X';
  CHECK(format_kind([&] { decode_imgf(bad); }) == FormatError::Kind::BadMagic);
  bad.assign(bytes.begin(), bytes.end() - 1);
  CHECK(format_kind([&] { decode_imgf(bad); }) == FormatError::Kind::Truncated);
  bad = bytes;
  bad.push_back(1);
  CHECK(format_kind([&] { decode_imgf(bad); }) == FormatError::Kind::TrailingBytes);
  bad = bytes;
  put_u32(bad, 4, 0xFFFFFFFFu);
  put_u32(bad, 8, 0xFFFFFFFFu);
  CHECK(format_kind([&] { decode_imgf(bad); }) == FormatError::Kind::Malformed);
  bad = bytes;
  put_u32(bad, 4, 0);
  CHECK(format_kind([&] { decode_imgf(bad); }) == FormatError::Kind::Malformed);
}

TEST_CASE("pgm quantization") {
  Image img(2, 3);
  img.pixels = {0.5, 0.0, 1.0, -0.3, 1.7, 0.2};
  const Bytes bytes = encode_pgm(img);
  const Image back = decode_pgm(bytes);
  CHECK(back.at(0, 0) == 128.0 / 255.0);
  CHECK(back.at(0, 1) == 0.0);
  CHECK(back.at(0, 2) == 1.0);
  CHECK(back.at(1, 0) == 0.0);
  CHECK(back.at(1, 1) == 1.0);
  CHECK(back.at(1, 2) == 51.0 / 255.0);

  std::mt19937_64 rng(4);
  const Image r = oracle::random_image(9, 5, rng);
  CHECK(oracle::max_abs_diff(decode_pgm(encode_pgm(r)).pixels, r.pixels) <= 0.5 / 255.0 + 1e-15);
  // Already-quantized images are fixed points.
  CHECK(encode_pgm(decode_pgm(encode_pgm(r))) == encode_pgm(r));

  const fs::path path = fs::temp_directory_path() / "pnp_test.pgm";
  write_image(path, r);
  CHECK(read_file(path) == encode_pgm(r));
  CHECK(read_image(path) == decode_pgm(encode_pgm(r)));
  fs::remove(path);

  const std::string comment = "P5\n# made by hand\n3 1\n255\n";
  Bytes with_comment(comment.begin(), comment.end());
  for (std::uint8_t v : {0, 51, 255}) with_comment.push_back(v);
  CHECK(decode_pgm(with_comment).at(0, 1) == 51.0 / 255.0);

  CHECK(format_kind([&] { decode_pgm({'P', '2', '\n'}); }) == FormatError::Kind::BadMagic);
  Bytes bad(bytes.begin(), bytes.end() - 1);
  CHECK(format_kind([&] { decode_pgm(bad); }) == FormatError::Kind::Truncated);
  const std::string wide = "P5\n1 1\n65535\n";
  CHECK(format_kind([&] { decode_pgm(Bytes(wide.begin(), wide.end())); }) == FormatError::Kind::Malformed);
}

TEST_CASE("mask files") {
  const SamplingMask m = radial_mask(16, 12, 5);
  const fs::path path = fs::temp_directory_path() / "pnp_test_mask.pgm";
  write_mask(path, m);
  const SamplingMask back = read_mask(path);
  CHECK(back.bits == m.bits);
  CHECK(back.rows == 16);
  CHECK(back.cols == 12);
  Bytes raw = read_file(path);
  raw.back() = 7;
  write_file(path, raw);
  CHECK(format_kind([&] { read_mask(path); }) == FormatError::Kind::Malformed);
  fs::remove(path);
}

TEST_CASE("kspace round trip and rejections") {
  std::mt19937_64 rng(5);
  const Image x = float_image(8, 10, rng);
  KSpaceMeasurement y = measure(x, radial_mask(8, 10, 3), 0.05, 9);
  for (auto& v : y.values.values) v = {static_cast<float>(v.real()), static_cast<float>(v.imag())};
  const Bytes bytes = encode_kspace(y);
  CHECK(bytes.size() == 12 + 80 * 8 + 80);
  const KSpaceMeasurement back = decode_kspace(bytes);
  CHECK(back.values == y.values);
  CHECK(back.mask.bits == y.mask.bits);

  const fs::path path = fs::temp_directory_path() / "pnp_test.kspc";
  write_kspace(path, y);
  CHECK(read_kspace(path).values == y.values);
  fs::remove(path);

  Bytes bad = bytes;
  bad.back() = 2;
  CHECK(format_kind([&] { decode_kspace(bad); }) == FormatError::Kind::Malformed);
  bad = bytes;
  bad[0] = 'k';
  CHECK(format_kind([&] { decode_kspace(bad); }) == FormatError::Kind::BadMagic);
  bad.assign(bytes.begin(), bytes.end() - 5);
  CHECK(format_kind([&] { decode_kspace(bad); }) == FormatError::Kind::Truncated);
  bad = bytes;
  bad.push_back(0);
  CHECK(format_kind([&] { decode_kspace(bad); }) == FormatError::Kind::TrailingBytes);
}

TEST_CASE("key-value configs") {
  std::istringstream in(
      "# desk run\n"
      "patch = 16   # comment\n"
      "sigma = 5/255\n"
      "lr0 = 1e-3\n"
      "name = phantom run\n"
      "tie = true\n"
      "lines = 36, 48\n");
  const KeyValueConfig c = KeyValueConfig::parse(in);
  CHECK(c.get_size("patch", 0) == 16);
  CHECK(c.get_double("sigma", 0) == 5.0 / 255.0);
  CHECK(c.get_double("lr0", 0) == 1e-3);
  CHECK(c.get_string("name", "") == "phantom run");
  CHECK(c.get_bool("tie", false));
  CHECK(c.get_list("lines", {}) == std::vector<std::string>{"36", "48"});
  CHECK(c.get_size("missing", 7) == 7);
  CHECK_NOTHROW(c.require_known({"patch", "sigma", "lr0", "name", "tie", "lines"}));
  CHECK_THROWS_AS(c.require_known({"patch"}), UsageError);
  CHECK_THROWS_AS(c.get_size("sigma", 0), UsageError);
  CHECK_THROWS_AS(c.get_bool("name", false), UsageError);

  std::istringstream dup("a = 1\na = 2\n");
  CHECK_THROWS_AS(KeyValueConfig::parse(dup), UsageError);
  std::istringstream junk("just words\n");
  CHECK_THROWS_AS(KeyValueConfig::parse(junk), UsageError);
  CHECK_THROWS_AS(KeyValueConfig::load("/nonexistent/pnp.cfg"), IoError);
  CHECK(parse_real("-2.5") == -2.5);
  CHECK_THROWS_AS(parse_real("1/0"), UsageError);
  CHECK_THROWS_AS(parse_real("3x"), UsageError);
}
