#include "fpmd/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian float32");

namespace fpmd {

namespace fs = std::filesystem;

const MlpParams& Checkpoint::net(const std::string& name) const {
  for (const auto& n : nets)
    if (n.name == name) return n.params;
  throw std::runtime_error("checkpoint: no network named '" + name + "'");
}

bool Checkpoint::has_net(const std::string& name) const {
  for (const auto& n : nets)
    if (n.name == name) return true;
  return false;
}

namespace {

void append_blob(std::ofstream& bin, const float* data, std::size_t count) {
  bin.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 4));
}

std::vector<float> read_blob(std::ifstream& bin, std::size_t offset, std::size_t count) {
  bin.seekg(static_cast<std::streamoff>(offset));
  std::vector<float> out(count);
  bin.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(count * 4));
  if (!bin) throw std::runtime_error("checkpoint: truncated params.bin");
  return out;
}

}  // namespace

void save_checkpoint(const std::string& dir, const std::vector<NamedParams>& nets,
                     const std::map<std::string, std::string>& meta) {
  fs::create_directories(dir);
  std::ofstream manifest(fs::path(dir) / "manifest.txt");
  std::ofstream bin(fs::path(dir) / "params.bin", std::ios::binary);
  if (!manifest || !bin) throw std::runtime_error("checkpoint: cannot write to " + dir);

  manifest << kCheckpointMagic << "\n";
  for (const auto& [k, v] : meta) manifest << "meta " << k << " " << v << "\n";

  std::size_t offset = 0;
  for (const auto& n : nets) {
    validate(n.params);
    manifest << "net " << n.name << " layers=" << n.params.layers.size()
             << " input=" << n.params.input_dim() << " output=" << n.params.output_dim() << "\n";
    for (std::size_t i = 0; i < n.params.layers.size(); ++i) {
      const auto& l = n.params.layers[i];
      const std::size_t w_count = static_cast<std::size_t>(l.weight.size());
      const std::size_t b_count = static_cast<std::size_t>(l.bias.size());
      manifest << "layer " << n.name << " " << i << " in=" << l.weight.cols()
               << " out=" << l.weight.rows() << " act=" << to_string(l.act)
               << " w_offset=" << offset << " b_offset=" << offset + w_count * 4 << "\n";
      // column-major storage, row-major shape in the manifest; we write
      // Eigen's native layout and read it back identically.
      append_blob(bin, l.weight.data(), w_count);
      append_blob(bin, l.bias.data(), b_count);
      offset += (w_count + b_count) * 4;
    }
  }
}

Checkpoint load_checkpoint(const std::string& dir) {
  std::ifstream manifest(fs::path(dir) / "manifest.txt");
  if (!manifest) throw std::runtime_error("checkpoint: missing manifest.txt in " + dir);
  std::ifstream bin(fs::path(dir) / "params.bin", std::ios::binary);
  if (!bin) throw std::runtime_error("checkpoint: missing params.bin in " + dir);

  std::string line;
  if (!std::getline(manifest, line) || line != kCheckpointMagic)
    throw std::runtime_error("checkpoint: bad magic, expected " + std::string(kCheckpointMagic));

  Checkpoint ckpt;
  auto want = [](std::istringstream& in, const std::string& key) {
    std::string tok;
    in >> tok;
    auto eq = tok.find('=');
    if (eq == std::string::npos || tok.substr(0, eq) != key)
      throw std::runtime_error("checkpoint: malformed manifest field, expected " + key);
    return tok.substr(eq + 1);
  };

  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::istringstream in(line);
    std::string kind;
    in >> kind;
    if (kind == "meta") {
      std::string k, v;
      in >> k;
      std::getline(in, v);
      if (!v.empty() && v.front() == ' ') v.erase(0, 1);
      ckpt.meta[k] = v;
    } else if (kind == "net") {
      NamedParams n;
      in >> n.name;
      ckpt.nets.push_back(std::move(n));
    } else if (kind == "layer") {
      std::string net_name;
      std::size_t idx;
      in >> net_name >> idx;
      const auto cols = std::stoll(want(in, "in"));
      const auto rows = std::stoll(want(in, "out"));
      const auto act = activation_from_string(want(in, "act"));
      const auto w_off = std::stoull(want(in, "w_offset"));
      const auto b_off = std::stoull(want(in, "b_offset"));
      if (ckpt.nets.empty() || ckpt.nets.back().name != net_name)
        throw std::runtime_error("checkpoint: layer line outside its net block");
      if (idx != ckpt.nets.back().params.layers.size())
        throw std::runtime_error("checkpoint: layer index out of order");

      LayerT<float> l;
      l.act = act;
      l.weight.resize(rows, cols);
      l.bias.resize(rows);
      auto w = read_blob(bin, w_off, static_cast<std::size_t>(rows * cols));
      std::memcpy(l.weight.data(), w.data(), w.size() * 4);
      auto b = read_blob(bin, b_off, static_cast<std::size_t>(rows));
      std::memcpy(l.bias.data(), b.data(), b.size() * 4);
      ckpt.nets.back().params.layers.push_back(std::move(l));
    } else {
      throw std::runtime_error("checkpoint: unknown manifest line kind '" + kind + "'");
    }
  }
  for (const auto& n : ckpt.nets) validate(n.params);
  return ckpt;
}

}  // namespace fpmd
