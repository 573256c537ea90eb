#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tlforecast/network.hpp"

namespace tlf {
namespace detail {

inline constexpr char kWeightsMagic[8] = {'T', 'L', 'P', 'M', 'W', 'G', 'T', '\0'};
inline constexpr std::uint32_t kWeightsVersion = 1;

inline std::uint64_t fnv1a(const unsigned char* data, std::size_t n,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline void put_u32(std::string& out, std::uint32_t x) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t x) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t x = 0;
  for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return x;
}

inline std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t x = 0;
  for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return x;
}

inline nlohmann::json weights_header(const ModelWeights& w) {
  nlohmann::json j;
  j["arch"] = {
      {"input_size", w.arch.input_size},
      {"context_size", w.arch.context_size},
      {"hidden_size", w.arch.hidden_size},
      {"num_layers", w.arch.num_layers},
      {"head", w.arch.head == HeadKind::kDeterministic ? "det" : "mdn"},
      {"head_hidden", w.arch.head_hidden},
      {"mixture_components", w.arch.mixture_components},
      {"n_tau", w.arch.n_tau},
      {"mode", ablation_mode_name(w.arch.mode)},
  };
  j["scaler"] = {{"mean", w.scaler.mean}, {"stddev", w.scaler.stddev}};
  nlohmann::json secs = nlohmann::json::array();
  for (const auto& s : w.sections) {
    secs.push_back({{"name", s.name}, {"offset", s.offset}, {"rows", s.rows},
                    {"cols", s.cols}});
  }
  j["sections"] = secs;
  j["param_count"] = w.params.size();
  return j;
}

}  // namespace detail

/// Serializes a model to a self-describing container: magic + version, a JSON
/// descriptor (architecture, ablation mode, scaler, named sections), raw
/// little-endian parameter bytes and a trailing checksum.
inline std::string encode_weights(const ModelWeights& w) {
  std::string out(detail::kWeightsMagic, sizeof(detail::kWeightsMagic));
  detail::put_u32(out, detail::kWeightsVersion);
  const std::string header = detail::weights_header(w).dump();
  detail::put_u64(out, header.size());
  out += header;
  detail::put_u64(out, w.params.size());
  for (double x : w.params) {
    detail::put_u64(out, std::bit_cast<std::uint64_t>(x));
  }
  detail::put_u64(out, detail::fnv1a(
                           reinterpret_cast<const unsigned char*>(out.data()),
                           out.size()));
  return out;
}

inline ModelWeights decode_weights(const std::string& blob) {
  const auto* p = reinterpret_cast<const unsigned char*>(blob.data());
  const std::size_t n = blob.size();
  if (n < sizeof(detail::kWeightsMagic) + 12 + 8 ||
      std::memcmp(p, detail::kWeightsMagic, sizeof(detail::kWeightsMagic)) != 0) {
    throw ConfigError("weight file: bad magic or truncated file");
  }
  std::size_t at = sizeof(detail::kWeightsMagic);
  const std::uint32_t version = detail::get_u32(p + at);
  at += 4;
  if (version != detail::kWeightsVersion) {
    throw ConfigError("weight file: unsupported format version " +
                      std::to_string(version));
  }
  if (detail::fnv1a(p, n - 8) != detail::get_u64(p + n - 8)) {
    throw ConfigError("weight file: checksum mismatch (corrupt file)");
  }
  const std::uint64_t header_len = detail::get_u64(p + at);
  at += 8;
  if (at + header_len + 8 > n) throw ConfigError("weight file: truncated header");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(blob.substr(at, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("weight file: bad header: ") + e.what());
  }
  at += header_len;

  PolicyArchitecture arch;
  const auto& ja = j.at("arch");
  arch.input_size = ja.at("input_size").get<int>();
  arch.context_size = ja.at("context_size").get<int>();
  arch.hidden_size = ja.at("hidden_size").get<int>();
  arch.num_layers = ja.at("num_layers").get<int>();
  arch.head = ja.at("head").get<std::string>() == "det" ? HeadKind::kDeterministic
                                                        : HeadKind::kMixture;
  arch.head_hidden = ja.at("head_hidden").get<std::vector<int>>();
  arch.mixture_components = ja.at("mixture_components").get<int>();
  arch.n_tau = ja.at("n_tau").get<int>();
  arch.mode = ablation_mode_from_name(ja.at("mode").get<std::string>());

  ModelWeights w = ModelWeights::build(arch);
  w.scaler.mean = j.at("scaler").at("mean").get<std::vector<double>>();
  w.scaler.stddev = j.at("scaler").at("stddev").get<std::vector<double>>();

  const std::uint64_t count = detail::get_u64(p + at);
  at += 8;
  if (count != w.params.size()) {
    throw ConfigError("weight file: parameter count does not match architecture");
  }
  if (at + count * 8 + 8 != n) throw ConfigError("weight file: truncated payload");
  for (std::uint64_t i = 0; i < count; ++i) {
    w.params[i] = std::bit_cast<double>(detail::get_u64(p + at));
    at += 8;
  }
  if (!w.finite()) throw ConfigError("weight file: non-finite parameters");
  return w;
}

inline void save_weights(const ModelWeights& w, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open weight file for writing: " + path);
  const std::string blob = encode_weights(w);
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw ConfigError("failed writing weight file: " + path);
}

inline ModelWeights load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open weight file: " + path);
  std::string blob((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return decode_weights(blob);
}

}  // namespace tlf
