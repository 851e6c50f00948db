#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "frag/errors.hpp"

namespace frag {

// Token inventory over SAFE strings: bracket atoms and %NN closures are
// single tokens, Cl/Br are two-character tokens, everything else is one
// character. Index 0/1/2 are pad/bos/eos.
struct TokenVocab {
  std::vector<std::string> tokens;
  std::unordered_map<std::string, int> index;

  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;

  int size() const { return static_cast<int>(tokens.size()); }

  static std::vector<std::string> scan(const std::string& text) {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < text.size()) {
      char c = text[i];
      if (c == '[') {
        size_t end = text.find(']', i);
        if (end == std::string::npos) throw TokenizeError("unterminated bracket in '" + text + "'");
        out.push_back(text.substr(i, end - i + 1));
        i = end + 1;
      } else if (c == '%') {
        if (i + 2 >= text.size()) throw TokenizeError("'%' needs two digits");
        out.push_back(text.substr(i, 3));
        i += 3;
      } else if ((c == 'C' && i + 1 < text.size() && text[i + 1] == 'l') ||
                 (c == 'B' && i + 1 < text.size() && text[i + 1] == 'r')) {
        out.push_back(text.substr(i, 2));
        i += 2;
      } else {
        out.push_back(std::string(1, c));
        ++i;
      }
    }
    return out;
  }

  // Baseline grammar tokens plus everything seen in the corpus, in a
  // deterministic order.
  static TokenVocab build(const std::vector<std::string>& corpus) {
    std::set<std::string> seen;
    static const char* kBase[] = {".", "-", "=",  "#",  ":",  "(",  ")",  "1",  "2",  "3",
                                  "4", "5", "6",  "7",  "8",  "9",  "B",  "C",  "N",  "O",
                                  "F", "P", "S",  "I",  "Cl", "Br", "b",  "c",  "n",  "o",
                                  "p", "s", "[*]"};
    for (const char* t : kBase) seen.insert(t);
    for (int l = 10; l <= 19; ++l) seen.insert("%" + std::to_string(l));
    for (const std::string& s : corpus)
      for (const std::string& t : scan(s)) seen.insert(t);
    TokenVocab v;
    v.tokens = {"<pad>", "<bos>", "<eos>"};
    v.tokens.insert(v.tokens.end(), seen.begin(), seen.end());
    for (int i = 0; i < v.size(); ++i) v.index[v.tokens[i]] = i;
    return v;
  }

  std::vector<int> encode(const std::string& text, bool bos = false, bool eos = false) const {
    std::vector<int> out;
    if (bos) out.push_back(kBos);
    for (const std::string& t : scan(text)) {
      auto it = index.find(t);
      if (it == index.end()) throw TokenizeError("unknown token '" + t + "'");
      out.push_back(it->second);
    }
    if (eos) out.push_back(kEos);
    return out;
  }

  std::string decode(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) {
      if (id == kPad || id == kBos || id == kEos) continue;
      if (id < 0 || id >= size()) throw TokenizeError("token id out of range");
      out += tokens[id];
    }
    return out;
  }
};

}  // namespace frag
