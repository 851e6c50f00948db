#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "frag/errors.hpp"
#include "frag/mol_graph.hpp"
#include "frag/smiles.hpp"

namespace frag {

struct CorpusEntry {
  std::string smiles;
  double y = 0.0;
  int line = 0;
};

// One record per line: SMILES <TAB> property in [0,1]; '#' lines ignored.
inline std::vector<CorpusEntry> load_corpus_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IOError("cannot read corpus " + path);
  std::vector<CorpusEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected SMILES<TAB>property");
    CorpusEntry e;
    e.smiles = line.substr(0, tab);
    try {
      e.y = std::stod(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": bad property value");
    }
    if (e.y < 0.0 || e.y > 1.0)
      throw ParseError(path + ":" + std::to_string(lineno) + ": property outside [0,1]");
    e.line = lineno;
    out.push_back(std::move(e));
  }
  return out;
}

inline std::vector<std::pair<MolGraph, double>> parse_corpus(
    const std::vector<CorpusEntry>& entries, const std::string& path_for_errors = "corpus") {
  std::vector<std::pair<MolGraph, double>> out;
  out.reserve(entries.size());
  for (const CorpusEntry& e : entries) {
    try {
      out.emplace_back(parse_smiles(e.smiles), e.y);
    } catch (const Error& err) {
      throw ParseError(path_for_errors + ":" + std::to_string(e.line) + ": " + err.what());
    }
  }
  return out;
}

// FNV-1a over the raw bytes; any one-line change moves the hash.
inline uint64_t file_content_hash(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IOError("cannot read " + path);
  uint64_t h = 1469598103934665603ULL;
  char buf[4096];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
    for (std::streamsize i = 0; i < is.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
    if (!is) break;
  }
  return h;
}

}  // namespace frag
