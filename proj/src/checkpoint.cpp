#include <bit>
#include <cstring>
#include <map>

#include "covnet/io.hpp"
#include "covnet/training.hpp"

namespace covnet {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint payload assumes a little-endian host");

std::string serialize_checkpoint(const CovNet<float>& model, const TrainingState& state) {
  CovNet<float> copy = model;
  std::string payload;
  json index = json::array();
  copy.visit([&](const std::string& name, Param<float>& p) {
    const std::size_t bytes = static_cast<std::size_t>(p.value.size()) * sizeof(float);
    index.push_back({{"name", name},
                     {"shape", {p.value.rows(), p.value.cols()}},
                     {"offset", payload.size()},
                     {"dtype", "f32"}});
    payload.append(reinterpret_cast<const char*>(p.value.data()), bytes);
  });
  const json manifest = {{"schema_version", kCheckpointSchemaVersion},
                         {"model_config", model.config().to_json()},
                         {"dtype", "f32"},
                         {"tensors", index},
                         {"training_state", {{"epoch", state.epoch}, {"step", state.step}, {"rng_state", state.rng_state}}},
                         {"payload_bytes", payload.size()},
                         {"payload_fnv1a64", fnv1a64(payload.data(), payload.size())}};
  const std::string text = manifest.dump();
  const std::uint64_t n = text.size();
  std::string out(sizeof(n), '\0');
  std::memcpy(out.data(), &n, sizeof(n));
  out += text;
  out += payload;
  return out;
}

LoadedModel deserialize_checkpoint(const std::string& bytes) {
  std::uint64_t n = 0;
  if (bytes.size() < sizeof(n)) throw DataError("checkpoint truncated at offset " + std::to_string(bytes.size()) + ": no header");
  std::memcpy(&n, bytes.data(), sizeof(n));
  if (n > bytes.size() - sizeof(n))
    throw DataError("checkpoint truncated at offset " + std::to_string(bytes.size()) + ": manifest needs " +
                    std::to_string(n) + " bytes");
  json manifest;
  try {
    manifest = json::parse(bytes.substr(sizeof(n), n));
  } catch (const json::exception& e) {
    throw DataError("checkpoint manifest at offset 8 is corrupt: " + std::string(e.what()));
  }
  try {
    const int version = manifest.at("schema_version").get<int>();
    if (version != kCheckpointSchemaVersion)
      throw DataError("checkpoint schema_version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kCheckpointSchemaVersion) + ")");
    if (manifest.at("dtype") != "f32") throw DataError("checkpoint dtype must be f32");

    const std::size_t base = sizeof(n) + n;
    const std::size_t payload_bytes = manifest.at("payload_bytes").get<std::size_t>();
    if (bytes.size() - base != payload_bytes)
      throw DataError("checkpoint payload truncated at offset " + std::to_string(bytes.size()) + ": expected " +
                      std::to_string(base + payload_bytes) + " bytes");
    const char* payload = bytes.data() + base;
    if (fnv1a64(payload, payload_bytes) != manifest.at("payload_fnv1a64").get<std::uint64_t>())
      throw DataError("checkpoint payload checksum mismatch (payload starts at offset " + std::to_string(base) + ")");

    std::map<std::string, json> tensors;
    for (const auto& t : manifest.at("tensors")) tensors[t.at("name").get<std::string>()] = t;

    LoadedModel out{CovNet<float>(ModelConfig::from_json(manifest.at("model_config")), 0), {}};
    std::size_t used = 0;
    out.model.visit([&](const std::string& name, Param<float>& p) {
      auto it = tensors.find(name);
      if (it == tensors.end()) throw DataError("checkpoint is missing tensor '" + name + "'");
      const auto shape = it->second.at("shape").get<std::vector<Index>>();
      if (shape.size() != 2 || shape[0] != p.value.rows() || shape[1] != p.value.cols())
        throw DataError("checkpoint tensor '" + name + "' has the wrong shape");
      const std::size_t offset = it->second.at("offset").get<std::size_t>();
      const std::size_t len = static_cast<std::size_t>(p.value.size()) * sizeof(float);
      if (offset + len > payload_bytes)
        throw DataError("checkpoint tensor '" + name + "' overruns the payload at offset " +
                        std::to_string(base + offset));
      std::memcpy(p.value.data(), payload + offset, len);
      used += len;
    });
    if (used != payload_bytes)
      throw DataError("checkpoint payload has unexpected extra tensors");
    const auto& st = manifest.at("training_state");
    out.state = {st.at("epoch").get<int>(), st.at("step").get<long>(), st.at("rng_state").get<std::string>()};
    return out;
  } catch (const json::exception& e) {
    throw DataError("checkpoint manifest is malformed: " + std::string(e.what()));
  }
}

void save_checkpoint(const CovNet<float>& model, const TrainingState& state, const std::string& path) {
  write_file_atomic(path, serialize_checkpoint(model, state));
}

LoadedModel load_checkpoint(const std::string& path) { return deserialize_checkpoint(read_file(path)); }

}  // namespace covnet
