#pragma once

#include <map>
#include <string>

#include "snet/optim.hpp"
#include "snet/text.hpp"

namespace snet {

// Versioned binary container: magic, format version, model kind, flat
// key=value metadata, vocabulary, then named tensors as (name, rank, dims,
// little-endian float32 data). Serialization is canonical (tensors in map
// order), so save -> load -> save is byte-identical.
struct Checkpoint {
  std::string kind;  // "extraction" | "synthesis"
  std::map<std::string, std::string> meta;
  Vocabulary vocab;
  std::map<std::string, std::pair<Shape, std::vector<float>>> tensors;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Copies checkpoint tensors into live parameters, validating every name
// and shape against the model schema.
void apply_tensors(const Checkpoint& ckpt, ParamMap& params);
Checkpoint snapshot(const std::string& kind,
                    const std::map<std::string, std::string>& meta,
                    const Vocabulary& vocab, const ParamMap& params);

}  // namespace snet
