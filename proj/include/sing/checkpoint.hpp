#pragma once

// Binary checkpoint: "SINGCKPT", u32 version, the config and a free-form
// state record as length-prefixed JSON, then named float32 tensors with
// their shapes. All integers and floats little-endian.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "sing/config.hpp"
#include "sing/grad.hpp"

namespace sing::ckpt {

inline constexpr std::uint32_t kVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor<float> value;
};

struct Checkpoint {
  SingConfig config;
  nlohmann::json state = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const;
  void put(std::string name, Tensor<float> value);
};

std::vector<std::uint8_t> serialize(const Checkpoint& c);
/// Throws parse-error on malformed input.
Checkpoint deserialize(const std::vector<std::uint8_t>& bytes);

/// Written to a temporary file and renamed, so an existing checkpoint is
/// replaced only by a complete one.
void save(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load(const std::filesystem::path& path);

/// Stores each parameter under prefix + name.
void store_parameters(Checkpoint& c, std::span<grad::Parameter<float>* const> params, const std::string& prefix = "");
/// Copies stored values into `params`; missing names or shape mismatches
/// throw invalid-input.
void load_parameters(const Checkpoint& c, std::span<grad::Parameter<float>* const> params,
                     const std::string& prefix = "");

}  // namespace sing::ckpt
