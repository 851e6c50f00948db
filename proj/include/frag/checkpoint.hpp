#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "frag/errors.hpp"
#include "frag/lm.hpp"
#include "frag/nn.hpp"

namespace frag {

// Weight container: magic "FRWT", u32 version, a string-keyed meta section,
// then name-indexed tensors as row-major little-endian float32.
//
//   u32 meta_count { u16 klen, key, u32 vlen, value }*
//   u32 tensor_count { u16 nlen, name, u32 rows, u32 cols, f32 data[] }*
class Checkpoint {
 public:
  static constexpr uint32_t kVersion = 1;

  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, nn::Matrix>> tensors;

  void add_tensor(const std::string& name, const nn::Matrix& m) { tensors.emplace_back(name, m); }

  const nn::Matrix* find(const std::string& name) const {
    for (const auto& [n, m] : tensors)
      if (n == name) return &m;
    return nullptr;
  }

  void save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IOError("cannot write " + path);
    os.write("FRWT", 4);
    write_u32(os, kVersion);
    write_u32(os, static_cast<uint32_t>(meta.size()));
    for (const auto& [k, v] : meta) {
      write_u16(os, static_cast<uint16_t>(k.size()));
      os.write(k.data(), k.size());
      write_u32(os, static_cast<uint32_t>(v.size()));
      os.write(v.data(), v.size());
    }
    write_u32(os, static_cast<uint32_t>(tensors.size()));
    for (const auto& [name, m] : tensors) {
      write_u16(os, static_cast<uint16_t>(name.size()));
      os.write(name.data(), name.size());
      write_u32(os, static_cast<uint32_t>(m.rows()));
      write_u32(os, static_cast<uint32_t>(m.cols()));
      for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) {
          float f = static_cast<float>(m(r, c));
          os.write(reinterpret_cast<const char*>(&f), sizeof(float));
        }
    }
    if (!os) throw IOError("write failed for " + path);
  }

  static Checkpoint load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IOError("cannot read " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "FRWT", 4) != 0)
      throw SchemaError(path + " is not a weight container");
    uint32_t version = read_u32(is);
    if (version != kVersion)
      throw SchemaError("weight container version " + std::to_string(version) +
                        ", expected " + std::to_string(kVersion));
    Checkpoint ck;
    uint32_t metas = read_u32(is);
    for (uint32_t i = 0; i < metas; ++i) {
      std::string k = read_str(is, read_u16(is));
      std::string v = read_str(is, read_u32(is));
      ck.meta[k] = v;
    }
    uint32_t count = read_u32(is);
    for (uint32_t i = 0; i < count; ++i) {
      std::string name = read_str(is, read_u16(is));
      uint32_t rows = read_u32(is);
      uint32_t cols = read_u32(is);
      nn::Matrix m(rows, cols);
      for (uint32_t r = 0; r < rows; ++r)
        for (uint32_t c = 0; c < cols; ++c) {
          float f;
          is.read(reinterpret_cast<char*>(&f), sizeof(float));
          m(r, c) = f;
        }
      ck.tensors.emplace_back(std::move(name), std::move(m));
    }
    if (!is) throw SchemaError("truncated weight container " + path);
    return ck;
  }

 private:
  static void write_u16(std::ostream& os, uint16_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  static void write_u32(std::ostream& os, uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  static uint16_t read_u16(std::istream& is) {
    uint16_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
  }
  static uint32_t read_u32(std::istream& is) {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
  }
  static std::string read_str(std::istream& is, size_t n) {
    std::string s(n, '\0');
    is.read(s.data(), n);
    return s;
  }
};

inline std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += '\n';
    out += tokens[i];
  }
  return out;
}

inline std::vector<std::string> split_tokens(const std::string& joined) {
  std::vector<std::string> out;
  size_t start = 0;
  while (start <= joined.size()) {
    size_t nl = joined.find('\n', start);
    out.push_back(nl == std::string::npos ? joined.substr(start)
                                          : joined.substr(start, nl - start));
    if (nl == std::string::npos) break;
    start = nl + 1;
  }
  return out;
}

inline void save_backbone(const std::string& path, BackboneLM& lm) {
  Checkpoint ck;
  ck.meta["kind"] = "backbone";
  ck.meta["d_model"] = std::to_string(lm.cfg.d_model);
  ck.meta["n_layers"] = std::to_string(lm.cfg.n_layers);
  ck.meta["n_heads"] = std::to_string(lm.cfg.n_heads);
  ck.meta["context"] = std::to_string(lm.cfg.context);
  ck.meta["tokens"] = join_tokens(lm.vocab.tokens);
  for (const nn::NamedParam& p : lm.params()) ck.add_tensor(p.name, p.param->w);
  ck.save(path);
}

inline BackboneLM load_backbone(const std::string& path) {
  Checkpoint ck = Checkpoint::load(path);
  if (ck.meta["kind"] != "backbone") throw SchemaError(path + " is not a backbone checkpoint");
  LMConfig cfg;
  cfg.d_model = std::stoi(ck.meta.at("d_model"));
  cfg.n_layers = std::stoi(ck.meta.at("n_layers"));
  cfg.n_heads = std::stoi(ck.meta.at("n_heads"));
  cfg.context = std::stoi(ck.meta.at("context"));
  TokenVocab vocab;
  vocab.tokens = split_tokens(ck.meta.at("tokens"));
  for (int i = 0; i < vocab.size(); ++i) vocab.index[vocab.tokens[i]] = i;
  BackboneLM lm;
  lm.init(cfg, std::move(vocab), /*seed=*/0);
  for (const nn::NamedParam& p : lm.params()) {
    const nn::Matrix* m = ck.find(p.name);
    if (!m) throw SchemaError("missing tensor " + p.name + " in " + path);
    if (m->rows() != p.param->w.rows() || m->cols() != p.param->w.cols())
      throw SchemaError("tensor " + p.name + " has wrong shape in " + path);
    p.param->w = *m;
  }
  return lm;
}

inline void save_injection(const std::string& path, InjectionModule& inj, int d_model) {
  Checkpoint ck;
  ck.meta["kind"] = "injection";
  ck.meta["d_model"] = std::to_string(d_model);
  ck.meta["d_key"] = std::to_string(inj.d_key);
  ck.meta["layer"] = std::to_string(inj.layer);
  for (const nn::NamedParam& p : inj.params()) ck.add_tensor(p.name, p.param->w);
  ck.save(path);
}

inline InjectionModule load_injection(const std::string& path, int expect_d_model) {
  Checkpoint ck = Checkpoint::load(path);
  if (ck.meta["kind"] != "injection") throw SchemaError(path + " is not an injection checkpoint");
  int d_model = std::stoi(ck.meta.at("d_model"));
  if (d_model != expect_d_model)
    throw SchemaError("injection d_model " + std::to_string(d_model) + " does not match backbone " +
                      std::to_string(expect_d_model));
  InjectionModule inj;
  std::mt19937_64 rng(0);
  inj.init(d_model, std::stoi(ck.meta.at("d_key")), std::stoi(ck.meta.at("layer")), rng);
  for (const nn::NamedParam& p : inj.params()) {
    const nn::Matrix* m = ck.find(p.name);
    if (!m) throw SchemaError("missing tensor " + p.name + " in " + path);
    if (m->rows() != p.param->w.rows() || m->cols() != p.param->w.cols())
      throw SchemaError("tensor " + p.name + " has wrong shape in " + path);
    p.param->w = *m;
  }
  return inj;
}

}  // namespace frag
