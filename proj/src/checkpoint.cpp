#include "snet/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "snet/errors.hpp"

namespace snet {

namespace {

constexpr char kMagic[8] = {'S', 'N', 'E', 'T', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw CheckpointError("truncated checkpoint file");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const uint32_t n = read_u32(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw CheckpointError("truncated checkpoint file");
  return s;
}

void write_floats(std::ostream& out, const std::vector<float>& v) {
  static_assert(sizeof(float) == 4);
  for (float x : v) {
    uint32_t bits;
    std::memcpy(&bits, &x, 4);
    write_u32(out, bits);
  }
}

std::vector<float> read_floats(std::istream& in, size_t n) {
  std::vector<float> v(n);
  for (size_t i = 0; i < n; ++i) {
    uint32_t bits = read_u32(in);
    std::memcpy(&v[i], &bits, 4);
  }
  return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open checkpoint for writing: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, kVersion);
  write_string(out, ckpt.kind);
  write_u32(out, static_cast<uint32_t>(ckpt.meta.size()));
  for (const auto& [k, v] : ckpt.meta) {
    write_string(out, k);
    write_string(out, v);
  }
  write_u32(out, static_cast<uint32_t>(ckpt.vocab.tokens().size()));
  for (const auto& t : ckpt.vocab.tokens()) write_string(out, t);
  write_u32(out, static_cast<uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, sv] : ckpt.tensors) {
    write_string(out, name);
    write_u32(out, static_cast<uint32_t>(sv.first.size()));
    for (int d : sv.first) write_u32(out, static_cast<uint32_t>(d));
    write_floats(out, sv.second);
  }
  if (!out) throw CheckpointError("write failure for checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw CheckpointError("bad checkpoint magic in " + path);
  const uint32_t version = read_u32(in);
  if (version != kVersion)
    throw CheckpointError("unsupported checkpoint version " +
                          std::to_string(version));
  Checkpoint ckpt;
  ckpt.kind = read_string(in);
  const uint32_t n_meta = read_u32(in);
  for (uint32_t i = 0; i < n_meta; ++i) {
    std::string k = read_string(in);
    ckpt.meta[k] = read_string(in);
  }
  const uint32_t n_vocab = read_u32(in);
  std::vector<std::string> tokens;
  tokens.reserve(n_vocab);
  for (uint32_t i = 0; i < n_vocab; ++i) tokens.push_back(read_string(in));
  ckpt.vocab = Vocabulary::from_tokens(std::move(tokens));
  const uint32_t n_tensors = read_u32(in);
  for (uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = read_string(in);
    const uint32_t rank = read_u32(in);
    Shape shape(rank);
    size_t numel = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      shape[d] = static_cast<int>(read_u32(in));
      numel *= static_cast<size_t>(shape[d]);
    }
    ckpt.tensors[name] = {shape, read_floats(in, numel)};
  }
  return ckpt;
}

void apply_tensors(const Checkpoint& ckpt, ParamMap& params) {
  for (const auto& [name, p] : params) {
    auto it = ckpt.tensors.find(name);
    if (it == ckpt.tensors.end())
      throw CheckpointError("checkpoint is missing tensor '" + name + "'");
    if (it->second.first != p.shape())
      throw CheckpointError("checkpoint tensor '" + name + "' has shape " +
                            shape_str(it->second.first) + ", model expects " +
                            shape_str(p.shape()));
  }
  for (auto& [name, p] : params)
    p.mutable_data() = ckpt.tensors.at(name).second;
  if (ckpt.tensors.size() != params.size())
    throw CheckpointError("checkpoint carries " +
                          std::to_string(ckpt.tensors.size()) +
                          " tensors, model expects " +
                          std::to_string(params.size()));
}

Checkpoint snapshot(const std::string& kind,
                    const std::map<std::string, std::string>& meta,
                    const Vocabulary& vocab, const ParamMap& params) {
  Checkpoint ckpt;
  ckpt.kind = kind;
  ckpt.meta = meta;
  ckpt.vocab = vocab;
  for (const auto& [name, p] : params)
    ckpt.tensors[name] = {p.shape(), p.data()};
  return ckpt;
}

}  // namespace snet
