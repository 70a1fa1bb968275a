#include "har/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace har {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian");

namespace {
constexpr char kMagic[8] = {'H', 'A', 'R', 'C', 'K', 'P', 'T', '1'};
}

void save_checkpoint(
    const std::string& path,
    const std::vector<std::pair<std::string, const nn::Tensor*>>& tensors,
    const nlohmann::json& meta) {
  nlohmann::json manifest;
  manifest["version"] = 1;
  manifest["meta"] = meta;
  nlohmann::json list = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& [name, t] : tensors) {
    list.push_back({{"name", name},
                    {"shape", t->shape},
                    {"offset", offset},
                    {"count", t->v.size()}});
    offset += t->v.size() * sizeof(nn::Real);
  }
  manifest["tensors"] = list;
  const std::string mtext = manifest.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof kMagic);
  const std::uint64_t msize = mtext.size();
  out.write(reinterpret_cast<const char*>(&msize), sizeof msize);
  out.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
  for (const auto& [name, t] : tensors) {
    out.write(reinterpret_cast<const char*>(t->v.data()),
              static_cast<std::streamsize>(t->v.size() * sizeof(nn::Real)));
  }
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  std::uint64_t msize = 0;
  in.read(reinterpret_cast<char*>(&msize), sizeof msize);
  std::string mtext(msize, '\0');
  in.read(mtext.data(), static_cast<std::streamsize>(msize));
  if (!in) throw std::runtime_error("truncated checkpoint manifest: " + path);
  const nlohmann::json manifest = nlohmann::json::parse(mtext);
  if (manifest.at("version").get<int>() != 1)
    throw std::runtime_error("unsupported checkpoint version in " + path);

  Checkpoint ck;
  ck.meta = manifest.value("meta", nlohmann::json{});
  for (const auto& entry : manifest.at("tensors")) {
    nn::Tensor t(entry.at("shape").get<std::vector<std::size_t>>());
    const std::size_t count = entry.at("count").get<std::size_t>();
    if (count != t.v.size())
      throw std::runtime_error("checkpoint shape/count mismatch in " + path);
    in.read(reinterpret_cast<char*>(t.v.data()),
            static_cast<std::streamsize>(count * sizeof(nn::Real)));
    if (!in) throw std::runtime_error("truncated checkpoint blob: " + path);
    ck.tensors.emplace(entry.at("name").get<std::string>(), std::move(t));
  }
  return ck;
}

const nn::Tensor& Checkpoint::require(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end())
    throw std::runtime_error("checkpoint is missing tensor: " + name);
  return it->second;
}

}  // namespace har
