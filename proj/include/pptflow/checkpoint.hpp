#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "pptflow/error.hpp"
#include "pptflow/flow_features.hpp"
#include "pptflow/io.hpp"
#include "pptflow/model.hpp"

namespace pptflow {

inline nlohmann::json config_to_json(const PPTNetConfig& c) {
  return {
      {"input_features", c.input_features},
      {"d_model", c.d_model},
      {"d_ff", c.d_ff},
      {"heads", c.heads},
      {"top_k", c.top_k},
      {"periodic_blocks", c.periodic_blocks},
      {"decoder_layers", c.decoder_layers},
      {"lookback", c.lookback},
      {"horizon", c.horizon},
      {"kernel_sizes", c.kernel_sizes},
      {"aggregation_hidden", c.aggregation_hidden},
      {"dropout", c.dropout},
      {"use_periodic_blocks", c.use_periodic_blocks},
      {"use_decoder", c.use_decoder},
  };
}

inline PPTNetConfig config_from_json(const nlohmann::json& j) {
  PPTNetConfig c;
  try {
    c.input_features = j.at("input_features").get<std::size_t>();
    c.d_model = j.at("d_model").get<std::size_t>();
    c.d_ff = j.at("d_ff").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.top_k = j.at("top_k").get<std::size_t>();
    c.periodic_blocks = j.at("periodic_blocks").get<std::size_t>();
    c.decoder_layers = j.at("decoder_layers").get<std::size_t>();
    c.lookback = j.at("lookback").get<std::size_t>();
    c.horizon = j.at("horizon").get<std::size_t>();
    c.kernel_sizes = j.at("kernel_sizes").get<std::vector<std::size_t>>();
    c.aggregation_hidden = j.at("aggregation_hidden").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
    c.use_periodic_blocks = j.at("use_periodic_blocks").get<bool>();
    c.use_decoder = j.at("use_decoder").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kArtifact, std::string("checkpoint config is malformed: ") + e.what());
  }
  return c;
}

/// Everything needed to reproduce forecasts in physical units.
struct Checkpoint {
  PPTNetConfig config;
  PPTNetParams params;
  NormStats norm;
  std::vector<std::string> features;
  nlohmann::json meta = nlohmann::json::object();
};

inline constexpr std::string_view kCheckpointMagic = "PPTNET1\n";

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_u64(const std::string& in, std::size_t pos) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + static_cast<std::size_t>(i)])) << (8 * i);
  return v;
}

}  // namespace detail

/// Layout: magic "PPTNET1\n", u64 LE header length, JSON header, then every parameter as LE float64
/// in manifest order.
inline std::string serialize_checkpoint(const Checkpoint& ck) {
  nlohmann::json manifest = nlohmann::json::array();
  std::size_t offset = 0;
  for (const Param* p : ck.params.all()) {
    manifest.push_back({{"name", p->name}, {"shape", p->value.shape()}, {"offset", offset}});
    offset += p->value.size() * sizeof(double);
  }
  const nlohmann::json header{
      {"format", "PPTNET1"},
      {"config", config_to_json(ck.config)},
      {"parameters", manifest},
      {"normalization", {{"mean", ck.norm.mean}, {"std", ck.norm.std}}},
      {"features", ck.features},
      {"meta", ck.meta},
  };
  const std::string text = header.dump();
  std::string out(kCheckpointMagic);
  detail::put_u64(out, text.size());
  out += text;
  out.reserve(out.size() + offset);
  for (const Param* p : ck.params.all())
    for (double v : p->value.data()) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

inline Checkpoint deserialize_checkpoint(const std::string& bytes, const std::string& source) {
  auto bad = [&](const std::string& why) { fail(ErrorKind::kArtifact, source + ": " + why); };
  if (bytes.size() < kCheckpointMagic.size() + 8 || bytes.compare(0, kCheckpointMagic.size(), kCheckpointMagic) != 0) {
    bad("not a PPTNET1 checkpoint");
  }
  const std::uint64_t header_len = detail::get_u64(bytes, kCheckpointMagic.size());
  const std::size_t blob = kCheckpointMagic.size() + 8 + header_len;
  if (header_len > bytes.size() || blob > bytes.size()) bad("truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(kCheckpointMagic.size() + 8, header_len));
  } catch (const nlohmann::json::exception&) {
    bad("header is not valid JSON");
  }
  Checkpoint ck;
  ck.config = config_from_json(header.value("config", nlohmann::json::object()));
  try {
    ck.config.validate();
  } catch (const Error& e) {
    bad(e.what());
  }
  ck.params = init_params(ck.config, 0);
  try {
    const auto& manifest = header.at("parameters");
    auto params = ck.params.all();
    if (manifest.size() != params.size()) bad("parameter count does not match the stored config");
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& entry = manifest[i];
      if (entry.at("name").get<std::string>() != params[i]->name || entry.at("shape").get<Shape>() != params[i]->value.shape()) {
        bad("parameter '" + entry.at("name").get<std::string>() + "' does not match the stored config");
      }
      const std::size_t off = entry.at("offset").get<std::size_t>();
      const std::size_t n = params[i]->value.size();
      if (blob + off + n * sizeof(double) > bytes.size()) bad("truncated parameter data");
      for (std::size_t k = 0; k < n; ++k) params[i]->value[k] = std::bit_cast<double>(detail::get_u64(bytes, blob + off + k * sizeof(double)));
      if (!params[i]->value.all_finite()) bad("parameter '" + params[i]->name + "' holds non-finite values");
    }
    const auto& norm = header.value("normalization", nlohmann::json::object());
    ck.norm.mean = norm.value("mean", std::vector<double>{});
    ck.norm.std = norm.value("std", std::vector<double>{});
    if (ck.norm.mean.size() != ck.config.input_features || ck.norm.std.size() != ck.config.input_features) {
      bad("normalization statistics do not match the feature count");
    }
    ck.features = header.value("features", std::vector<std::string>{});
    ck.meta = header.value("meta", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    bad(std::string("malformed header: ") + e.what());
  }
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  write_file_atomic(path, serialize_checkpoint(ck));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file(path), path.string());
}

}  // namespace pptflow
