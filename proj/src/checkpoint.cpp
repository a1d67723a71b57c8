#include "aloe/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace aloe {

namespace {

constexpr char kMagic[8] = {'A', 'L', 'O', 'E', 'C', 'K', 'P', '1'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

}  // namespace

const Mlp& Checkpoint::net(const std::string& name) const {
  for (const auto& [n, mlp] : nets) {
    if (n == name) return mlp;
  }
  throw std::out_of_range("checkpoint has no network named '" + name + "'");
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  nlohmann::json header;
  header["meta"] = checkpoint.meta;
  header["tensors"] = nlohmann::json::array();
  for (const auto& [name, mlp] : checkpoint.nets) {
    header["tensors"].push_back({{"name", name},
                                 {"widths", mlp.widths()},
                                 {"activation", to_string(mlp.activation())},
                                 {"count", mlp.num_params()}});
  }
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, mlp] : checkpoint.nets) {
    out.write(reinterpret_cast<const char*>(mlp.params().data()),
              static_cast<std::streamsize>(mlp.num_params() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("short write to checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error(path.string() + " is not a checkpoint file");
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("truncated checkpoint header in " + path.string());
  const auto header = nlohmann::json::parse(text);
  Checkpoint ck;
  ck.meta = header.at("meta");
  for (const auto& t : header.at("tensors")) {
    const auto count = t.at("count").get<std::size_t>();
    Vector params(static_cast<Eigen::Index>(count));
    in.read(reinterpret_cast<char*>(params.data()), static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw std::runtime_error("truncated parameters in " + path.string());
    ck.nets.emplace_back(t.at("name").get<std::string>(),
                         Mlp(t.at("widths").get<std::vector<int>>(),
                             activation_from_string(t.at("activation").get<std::string>()),
                             std::move(params)));
  }
  return ck;
}

}  // namespace aloe
