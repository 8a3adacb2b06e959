#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "occdist/network.hpp"

namespace occdist {

// Checkpoint file layout:
//   bytes 0..7   magic "ODCKPT01"
//   bytes 8..11  little-endian u32 manifest length L
//   bytes 12..   UTF-8 JSON manifest (L bytes)
//   then         raw little-endian float32 arrays, one per parameter,
//                in manifest order
inline constexpr char kCheckpointMagic[8] = {'O', 'D', 'C', 'K', 'P', 'T', '0', '1'};

struct Checkpoint {
  NetworkSpec spec;
  ParameterSet params;
  double momentum = 0.9;
  double learning_rate = 0.0;
  int patience_counter = 0;
  double best_validation_error = std::numeric_limits<double>::infinity();
};

namespace detail {

inline void put_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32_le(std::string& out, float v) {
  const std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline float get_f32_le(const unsigned char* p) {
  return std::bit_cast<float>(get_u32_le(p));
}

}  // namespace detail

inline void save_checkpoint(const ParameterSet& params, const NetworkSpec& spec,
                            const OptimizerState& state, const std::string& path) {
  nlohmann::json names = nlohmann::json::array();
  for (const auto& p : params.params) {
    names.push_back({{"name", p.name}, {"shape", p.tensor.shape()}});
  }
  const nlohmann::json manifest{
      {"spec", spec.to_json()},
      {"fingerprint", params.architecture_fingerprint},
      {"role", role_name(params.role)},
      {"params", names},
      {"optimizer",
       {{"momentum", state.momentum},
        {"learning_rate", state.learning_rate},
        {"patience_counter", state.patience_counter},
        {"best_validation_error",
         std::isfinite(state.best_validation_error) ? nlohmann::json(state.best_validation_error)
                                                    : nlohmann::json(nullptr)}}}};
  const std::string manifest_str = manifest.dump();

  std::string blob;
  blob.reserve(12 + manifest_str.size());
  blob.append(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put_u32_le(blob, static_cast<std::uint32_t>(manifest_str.size()));
  blob.append(manifest_str);
  for (const auto& p : params.params) {
    for (const float v : p.tensor.data()) detail::put_f32_le(blob, v);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("checkpoint: cannot open \"" + path + "\" for writing");
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw FormatError("checkpoint: write failed for \"" + path + "\"");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("checkpoint: cannot open \"" + path + "\"");
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
  if (blob.size() < 12 || std::memcmp(blob.data(), kCheckpointMagic, 8) != 0) {
    throw FormatError("checkpoint: bad magic in \"" + path + "\"");
  }
  const std::uint32_t manifest_len = detail::get_u32_le(bytes + 8);
  if (blob.size() < 12 + static_cast<std::size_t>(manifest_len)) {
    throw FormatError("checkpoint: truncated manifest in \"" + path + "\"");
  }
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(blob.substr(12, manifest_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint: unreadable manifest in \"" + path + "\": " + e.what());
  }

  Checkpoint ckpt;
  try {
    ckpt.spec = NetworkSpec::from_json(manifest.at("spec"));
    ckpt.params.role =
        manifest.at("role").get<std::string>() == "teacher" ? Role::Teacher : Role::Student;
    ckpt.params.architecture_fingerprint = manifest.at("fingerprint").get<std::string>();
    const auto& opt = manifest.at("optimizer");
    ckpt.momentum = opt.at("momentum").get<double>();
    ckpt.learning_rate = opt.at("learning_rate").get<double>();
    ckpt.patience_counter = opt.at("patience_counter").get<int>();
    if (!opt.at("best_validation_error").is_null()) {
      ckpt.best_validation_error = opt.at("best_validation_error").get<double>();
    }

    std::size_t offset = 12 + manifest_len;
    for (const auto& pj : manifest.at("params")) {
      const std::string name = pj.at("name").get<std::string>();
      const auto shape = pj.at("shape").get<std::vector<std::size_t>>();
      const std::size_t count = Tensor::count(shape);
      if (blob.size() < offset + count * 4) {
        throw FormatError("checkpoint: truncated parameter data in \"" + path + "\"");
      }
      std::vector<float> data(count);
      for (std::size_t i = 0; i < count; ++i) {
        data[i] = detail::get_f32_le(bytes + offset + i * 4);
      }
      offset += count * 4;
      ckpt.params.params.push_back(
          {name, Tensor::from_data(shape, std::move(data), /*requires_grad=*/true)});
    }
    if (offset != blob.size()) {
      throw FormatError("checkpoint: trailing bytes in \"" + path + "\"");
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint: malformed manifest in \"" + path + "\": " + e.what());
  }

  if (ckpt.params.architecture_fingerprint != ckpt.spec.fingerprint()) {
    throw FormatError("checkpoint: manifest fingerprint does not match its own spec in \"" +
                      path + "\"");
  }
  return ckpt;
}

// Loads parameters that must be architecture-compatible with `expected`.
inline ParameterSet load_checkpoint_params(const std::string& path,
                                           const NetworkSpec& expected) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.params.architecture_fingerprint != expected.fingerprint()) {
    throw IncompatibilityError("checkpoint: fingerprint " +
                               ckpt.params.architecture_fingerprint + " from \"" + path +
                               "\" does not match expected architecture " +
                               expected.fingerprint());
  }
  return std::move(ckpt.params);
}

}  // namespace occdist
