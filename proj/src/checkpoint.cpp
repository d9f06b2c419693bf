#include "rsarank/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <vector>

#include "rsarank/error.hpp"

namespace rsarank {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
void put(std::ostream& out, T value) {
  auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(bytes.data(), bytes.size());
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T get(std::istream& in) {
  std::array<char, sizeof(T)> bytes;
  if (!in.read(bytes.data(), bytes.size())) throw CheckpointError("checkpoint is truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

std::string get_string(std::istream& in) {
  const auto size = get<std::uint32_t>(in);
  if (size > (1u << 20)) throw CheckpointError("checkpoint string length is implausible");
  std::string s(size, '\0');
  if (size > 0 && !in.read(s.data(), size)) throw CheckpointError("checkpoint is truncated");
  return s;
}

Metadata config_metadata(const ModelConfig& config) {
  return {
      {"input_dim", std::to_string(config.input_dim)},
      {"hidden_dim", std::to_string(config.hidden_dim)},
      {"variant", std::string(variant_name(config.variant))},
      {"encoders", format_encoder_set(config.encoders)},
      {"seed", std::to_string(config.seed)},
  };
}

const std::string& require(const Metadata& meta, const std::string& key) {
  auto it = meta.find(key);
  if (it == meta.end()) throw CheckpointError("checkpoint metadata lacks '" + key + "'");
  return it->second;
}

ModelConfig config_from_metadata(const Metadata& meta) {
  ModelConfig config;
  try {
    config.input_dim = std::stoull(require(meta, "input_dim"));
    config.hidden_dim = std::stoull(require(meta, "hidden_dim"));
    config.variant = parse_variant(require(meta, "variant"));
    config.encoders = parse_encoder_set(require(meta, "encoders"));
    config.seed = std::stoull(require(meta, "seed"));
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("bad checkpoint metadata: ") + e.what());
  }
  return config;
}

}  // namespace

void write_checkpoint(std::ostream& out, const RsaModel& model, const Metadata& extra) {
  Metadata meta = config_metadata(model.config);
  for (const auto& [k, v] : extra) meta.emplace(k, v);

  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    put_string(out, k);
    put_string(out, v);
  }
  std::uint32_t count = 0;
  model.for_each_parameter([&](const std::string&, const Matrix&) { ++count; });
  put<std::uint32_t>(out, count);
  model.for_each_parameter([&](const std::string& name, const Matrix& m) {
    put_string(out, name);
    put<std::uint32_t>(out, 2);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) put<double>(out, m.data()[i]);
  });
  if (!out) throw CheckpointError("failed writing checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[sizeof(kCheckpointMagic)];
  if (!in.read(magic, sizeof(magic))) throw CheckpointError("checkpoint is truncated");
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw CheckpointError("not a checkpoint (bad magic)");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) +
                          " (expected " + std::to_string(kCheckpointVersion) + ")");
  }

  Checkpoint ckpt;
  const auto n_meta = get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string key = get_string(in);
    ckpt.metadata[key] = get_string(in);
  }
  ModelConfig config = config_from_metadata(ckpt.metadata);
  try {
    config.validate();
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("bad checkpoint config: ") + e.what());
  }
  // Structure from the config; every value is overwritten below.
  RsaModel model = init_params(config, config.seed);

  std::uint32_t expected = 0;
  model.for_each_parameter([&](const std::string&, const Matrix&) { ++expected; });
  const auto n_params = get<std::uint32_t>(in);
  if (n_params != expected) {
    throw CheckpointError("checkpoint has " + std::to_string(n_params) + " parameters, config implies " +
                          std::to_string(expected));
  }
  model.for_each_parameter([&](const std::string& name, Matrix& m) {
    const std::string stored = get_string(in);
    if (stored != name) throw CheckpointError("expected parameter '" + name + "', found '" + stored + "'");
    const auto ndim = get<std::uint32_t>(in);
    if (ndim != 2) throw CheckpointError(name + ": expected 2 dimensions, found " + std::to_string(ndim));
    const auto rows = get<std::uint64_t>(in);
    const auto cols = get<std::uint64_t>(in);
    if (rows != static_cast<std::uint64_t>(m.rows()) || cols != static_cast<std::uint64_t>(m.cols())) {
      throw CheckpointError(name + ": shape [" + std::to_string(rows) + "x" + std::to_string(cols) +
                            "] does not match config " + shape_string(m));
    }
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = get<double>(in);
  });
  if (in.peek() != std::char_traits<char>::eof()) {
    throw CheckpointError("trailing bytes after checkpoint payload");
  }
  ckpt.model = std::move(model);
  return ckpt;
}

void save_checkpoint(const RsaModel& model, const std::filesystem::path& path, const Metadata& extra) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write " + path.string());
  write_checkpoint(out, model, extra);
}

Checkpoint load_checkpoint_with_metadata(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  return read_checkpoint(in);
}

RsaModel load_checkpoint(const std::filesystem::path& path) {
  return load_checkpoint_with_metadata(path).model;
}

}  // namespace rsarank
