#include "fedclaims/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "fedclaims/error.hpp"

namespace fedclaims {

namespace {

constexpr std::uint8_t kModelMagic[4] = {'F', 'C', 'M', 'L'};
constexpr std::uint8_t kModelFormatVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

struct ByteReader {
  const std::vector<std::uint8_t>& bytes;
  std::size_t pos = 0;

  void need(std::size_t count, const std::string& path) const {
    if (bytes.size() - pos < count) {
      fail(ErrorKind::Ingest, "model file '" + path + "' is truncated");
    }
  }

  std::uint8_t u8(const std::string& path) {
    need(1, path);
    return bytes[pos++];
  }

  std::uint32_t u32(const std::string& path) {
    need(4, path);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }

  std::uint64_t u64(const std::string& path) {
    need(8, path);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
};

}  // namespace

void save_model(const NetworkParams& params, const NetworkConfig& config,
                const std::string& path) {
  config.validate();
  const auto values = flatten(params);
  if (values.size() != config.param_count()) {
    fail(ErrorKind::Shape, "save_model: params do not match config");
  }

  std::vector<std::uint8_t> out;
  out.insert(out.end(), std::begin(kModelMagic), std::end(kModelMagic));
  out.push_back(kModelFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(config.layer_sizes.size()));
  for (std::size_t w : config.layer_sizes) put_u32(out, static_cast<std::uint32_t>(w));
  for (Activation act : config.hidden_activations) {
    out.push_back(static_cast<std::uint8_t>(act));
  }
  put_u64(out, config.seed);
  put_u32(out, static_cast<std::uint32_t>(values.size()));
  for (double v : values) put_u64(out, std::bit_cast<std::uint64_t>(v));

  std::ofstream file(path, std::ios::binary);
  if (!file) fail(ErrorKind::Ingest, "save_model: cannot write '" + path + "'");
  file.write(reinterpret_cast<const char*>(out.data()),
             static_cast<std::streamsize>(out.size()));
  if (!file) fail(ErrorKind::Ingest, "save_model: write failed for '" + path + "'");
}

ModelFile load_model(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) fail(ErrorKind::Ingest, "load_model: cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(file)),
                                  std::istreambuf_iterator<char>());

  ByteReader reader{bytes};
  reader.need(5, path);
  if (std::memcmp(bytes.data(), kModelMagic, 4) != 0) {
    fail(ErrorKind::Ingest, "model file '" + path + "' has bad magic");
  }
  reader.pos = 4;
  const std::uint8_t version = reader.u8(path);
  if (version != kModelFormatVersion) {
    fail(ErrorKind::Ingest, "model file '" + path + "' has unknown format version " +
                                std::to_string(static_cast<int>(version)));
  }

  ModelFile model;
  const std::uint32_t layer_count = reader.u32(path);
  if (layer_count < 2 || layer_count > 1024) {
    fail(ErrorKind::Ingest, "model file '" + path + "' has invalid layer count");
  }
  model.config.layer_sizes.resize(layer_count);
  for (auto& w : model.config.layer_sizes) w = reader.u32(path);
  model.config.hidden_activations.resize(layer_count - 2);
  for (auto& act : model.config.hidden_activations) {
    const std::uint8_t raw = reader.u8(path);
    if (raw > 1) fail(ErrorKind::Ingest, "model file '" + path + "': bad activation");
    act = static_cast<Activation>(raw);
  }
  model.config.seed = reader.u64(path);
  const std::uint32_t param_count = reader.u32(path);
  model.config.validate();
  if (param_count != model.config.param_count()) {
    fail(ErrorKind::Ingest, "model file '" + path + "': parameter count mismatch");
  }
  model.values.resize(param_count);
  for (auto& v : model.values) v = std::bit_cast<double>(reader.u64(path));
  if (reader.pos != bytes.size()) {
    fail(ErrorKind::Ingest, "model file '" + path + "' has trailing bytes");
  }
  return model;
}

NetworkParams to_params(const ModelFile& model) {
  return unflatten(model.values, model.config);
}

}  // namespace fedclaims
