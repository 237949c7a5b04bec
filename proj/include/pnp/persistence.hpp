#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pnp/imaging.hpp"
#include "pnp/mssn.hpp"

namespace pnp::io {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint32_t kWeightsVersion = 1;

// ---- weights ("MSSN") ----
struct LoadedWeights {
  mssn::MssnWeights weights;
  mssn::MssnConfig config;
};

/// Values are stored as IEEE-754 binary32; the config is stored resolved.
Bytes encode_weights(const mssn::MssnWeights& weights, const mssn::MssnConfig& cfg);
LoadedWeights decode_weights(const Bytes& bytes);
void save_weights(const mssn::MssnWeights& weights, const mssn::MssnConfig& cfg, const std::filesystem::path& path);
LoadedWeights load_weights(const std::filesystem::path& path);

// ---- images ("IMGF" and binary PGM) ----
Bytes encode_imgf(const Image& img);
Image decode_imgf(const Bytes& bytes);
/// 8-bit P5, values clamped to [0,1] and scaled round-half-up.
Bytes encode_pgm(const Image& img);
Image decode_pgm(const Bytes& bytes);

/// Chooses PGM for a ".pgm" extension, IMGF otherwise.
void write_image(const std::filesystem::path& path, const Image& img);
/// Detects the format from the leading magic bytes.
Image read_image(const std::filesystem::path& path);

// ---- masks (PGM with 0/255 only) ----
void write_mask(const std::filesystem::path& path, const SamplingMask& mask);
SamplingMask read_mask(const std::filesystem::path& path);

// ---- k-space ("KSPC") ----
Bytes encode_kspace(const KSpaceMeasurement& y);
KSpaceMeasurement decode_kspace(const Bytes& bytes);
void write_kspace(const std::filesystem::path& path, const KSpaceMeasurement& y);
KSpaceMeasurement read_kspace(const std::filesystem::path& path);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const Bytes& bytes);

// ---- flat "key = value" run configs, '#' starts a comment ----
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in, const std::string& source = "<stream>");
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string get_string(const std::string& key, const std::string& fallback) const;
  /// Accepts plain reals and simple fractions such as "5/255".
  double get_double(const std::string& key, double fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::string> get_list(const std::string& key, const std::vector<std::string>& fallback) const;

  /// Throws UsageError on any key not in `known`.
  void require_known(const std::set<std::string>& known) const;

 private:
  std::map<std::string, std::string> values_;
  std::string source_;
};

double parse_real(const std::string& text);

}  // namespace pnp::io
