#pragma once

#include <map>
#include <string>
#include <vector>

#include "fpmd/net.hpp"

namespace fpmd {

inline constexpr const char* kCheckpointMagic = "FPMD-CKPT-1";

struct NamedParams {
  std::string name;
  MlpParams params;
};

/// On-disk layout under `dir`:
///   manifest.txt  plain text: magic line, meta lines, per-layer shape /
///                 activation / byte-offset lines
///   params.bin    little-endian float32 blobs, concatenated in manifest order
struct Checkpoint {
  std::vector<NamedParams> nets;
  std::map<std::string, std::string> meta;

  const MlpParams& net(const std::string& name) const;
  bool has_net(const std::string& name) const;
};

void save_checkpoint(const std::string& dir, const std::vector<NamedParams>& nets,
                     const std::map<std::string, std::string>& meta);

Checkpoint load_checkpoint(const std::string& dir);

}  // namespace fpmd
