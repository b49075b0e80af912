#include "bokeh/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <stdexcept>

#include "bokeh/image.hpp"
#include "bokeh/png_io.hpp"

namespace bokeh {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'B', 'K', 'F', 'C', 'K', 'P', 'T', '\0'};
constexpr std::size_t kHeaderSize = 20;

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

template <typename T>
T get(const std::vector<std::uint8_t>& in, std::size_t offset) {
  if (offset + sizeof(T) > in.size()) throw IoError("checkpoint truncated");
  T value;
  std::memcpy(&value, in.data() + offset, sizeof(T));
  return value;
}

}  // namespace

nlohmann::json config_to_json(const NetConfig& c) {
  return {{"latent_height", c.latent_height},
          {"latent_width", c.latent_width},
          {"latent_channels", c.latent_channels},
          {"patch_size", c.patch_size},
          {"embed_dim", c.embed_dim},
          {"mlp_hidden", c.mlp_hidden},
          {"token_hidden", c.token_hidden},
          {"n_blocks", c.n_blocks},
          {"time_dim", c.time_dim},
          {"control_dim", c.control_dim},
          {"control_mode", c.control_mode == ControlMode::CrossAttention ? "xattn" : "concat"},
          {"attention_after_block", c.attention_after_block}};
}

NetConfig config_from_json(const nlohmann::json& j) {
  NetConfig c;
  c.latent_height = j.at("latent_height").get<int>();
  c.latent_width = j.at("latent_width").get<int>();
  c.latent_channels = j.at("latent_channels").get<int>();
  c.patch_size = j.at("patch_size").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.mlp_hidden = j.at("mlp_hidden").get<int>();
  c.token_hidden = j.at("token_hidden").get<int>();
  c.n_blocks = j.at("n_blocks").get<int>();
  c.time_dim = j.at("time_dim").get<int>();
  c.control_dim = j.at("control_dim").get<int>();
  const std::string mode = j.at("control_mode").get<std::string>();
  if (mode == "xattn")
    c.control_mode = ControlMode::CrossAttention;
  else if (mode == "concat")
    c.control_mode = ControlMode::Concatenation;
  else
    throw IoError("unknown control_mode '" + mode + "' in checkpoint");
  c.attention_after_block = j.at("attention_after_block").get<int>();
  return c;
}

std::vector<std::uint8_t> encode_checkpoint(const VectorFieldNet& net, const nlohmann::json& meta) {
  nlohmann::json manifest;
  manifest["config"] = config_to_json(net.config());
  manifest["meta"] = meta;
  manifest["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& t : net.params().tensors()) {
    const std::uint64_t nbytes = static_cast<std::uint64_t>(t.value.size()) * sizeof(double);
    manifest["tensors"].push_back({{"name", t.name},
                                   {"shape", {t.value.rows(), t.value.cols()}},
                                   {"dtype", "f64"},
                                   {"offset", offset},
                                   {"nbytes", nbytes}});
    offset += nbytes;
  }
  const std::string text = manifest.dump();
  std::vector<std::uint8_t> out(kMagic, kMagic + 8);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& t : net.params().tensors()) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(t.value.data());
    out.insert(out.end(), p, p + t.value.size() * sizeof(double));
  }
  return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kHeaderSize || std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw IoError("not a checkpoint file");
  const auto version = get<std::uint32_t>(bytes, 8);
  if (version != kCheckpointVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  const auto manifest_len = get<std::uint64_t>(bytes, 12);
  if (kHeaderSize + manifest_len > bytes.size()) throw IoError("checkpoint manifest truncated");
  const auto manifest = nlohmann::json::parse(
      bytes.begin() + kHeaderSize,
      bytes.begin() + static_cast<std::ptrdiff_t>(kHeaderSize + manifest_len));
  const std::size_t payload = kHeaderSize + manifest_len;

  Checkpoint ck;
  ck.config = config_from_json(manifest.at("config"));
  ck.meta = manifest.value("meta", nlohmann::json::object());
  for (const auto& entry : manifest.at("tensors")) {
    if (entry.at("dtype").get<std::string>() != "f64")
      throw IoError("unsupported tensor dtype in checkpoint");
    const int rows = entry.at("shape").at(0).get<int>();
    const int cols = entry.at("shape").at(1).get<int>();
    const auto offset = entry.at("offset").get<std::uint64_t>();
    const auto nbytes = entry.at("nbytes").get<std::uint64_t>();
    if (nbytes != static_cast<std::uint64_t>(rows) * cols * sizeof(double))
      throw IoError("tensor byte count does not match its shape");
    if (payload + offset + nbytes > bytes.size()) throw IoError("checkpoint payload truncated");
    const std::size_t idx = ck.params.add(entry.at("name").get<std::string>(), rows, cols);
    std::memcpy(ck.params[idx].data(), bytes.data() + payload + offset, nbytes);
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const VectorFieldNet& net,
                     const nlohmann::json& meta) {
  write_file(path, encode_checkpoint(net, meta));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

}  // namespace bokeh
