#pragma once

#include <string>
#include <vector>

#include "fedclaims/nn.hpp"

namespace fedclaims {

// Model file: magic "FCML", format version u8, layer count u32, layer widths
// u32 each, one activation byte per hidden layer, seed u64, param count u32,
// then the flatten vector as IEEE-754 doubles. Everything little-endian.

struct ModelFile {
  NetworkConfig config;
  std::vector<double> values;  // flatten order
};

void save_model(const NetworkParams& params, const NetworkConfig& config,
                const std::string& path);

ModelFile load_model(const std::string& path);

NetworkParams to_params(const ModelFile& model);

}  // namespace fedclaims
