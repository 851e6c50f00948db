#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "frag/canonical.hpp"
#include "frag/mol_graph.hpp"

namespace frag {

// --------------------------------------------------------------------------
// Parsing.
//
// Supported subset: neutral-plus-charged organic atoms (B C N O F P S Cl Br I,
// aromatic b c n o p s), bracket atoms [<sym>H<n><charge>], bonds - = # :,
// branches, ring closures 1-9 and %NN, and [*] dummies in fragment contexts.
// No stereochemistry, isotopes, or atom classes.
// --------------------------------------------------------------------------

struct SmilesOptions {
  bool allow_dummies = false;        // accept [*] atoms
  bool allow_open_closures = false;  // leave unmatched ring closures to the caller
};

struct ParsedSmiles {
  MolGraph graph;
  // Unmatched ring-closure labels (label, atom index), in order of appearance.
  std::vector<std::pair<int, int>> open_closures;
};

namespace detail {

struct RingOpen {
  int atom;
  std::optional<BondOrder> order;
};

inline BondOrder default_order(const Atom& a, const Atom& b) {
  return a.aromatic && b.aromatic ? BondOrder::Aromatic : BondOrder::Single;
}

inline bool is_upper_element_start(char c) {
  return c == 'B' || c == 'C' || c == 'N' || c == 'O' || c == 'F' || c == 'P' ||
         c == 'S' || c == 'I';
}

inline Atom parse_bracket_body(const std::string& body) {
  if (body.empty()) throw ParseError("empty bracket atom");
  Atom a;
  size_t p = 0;
  if (body[p] == '*') {
    a.element = "*";
    ++p;
  } else if (std::isupper(static_cast<unsigned char>(body[p]))) {
    if (body.compare(p, 2, "Cl") == 0 || body.compare(p, 2, "Br") == 0) {
      a.element = body.substr(p, 2);
      p += 2;
    } else {
      a.element = body.substr(p, 1);
      ++p;
    }
  } else if (std::islower(static_cast<unsigned char>(body[p]))) {
    a.element = std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(body[p]))));
    a.aromatic = true;
    ++p;
  } else {
    throw ParseError("bad bracket atom '" + body + "'");
  }
  if (!element_supported(a.element)) throw ParseError("unsupported element " + a.element);
  if (a.aromatic && !element_aromatic_capable(a.element))
    throw ParseError("element " + a.element + " cannot be aromatic");
  if (p < body.size() && body[p] == 'H') {
    ++p;
    if (p < body.size() && std::isdigit(static_cast<unsigned char>(body[p]))) {
      a.hydrogens = body[p] - '0';
      ++p;
    } else {
      a.hydrogens = 1;
    }
  }
  if (p < body.size() && (body[p] == '+' || body[p] == '-')) {
    const char sign_char = body[p];
    const int sign = sign_char == '+' ? 1 : -1;
    ++p;
    int mag = 1;
    if (p < body.size() && std::isdigit(static_cast<unsigned char>(body[p]))) {
      mag = body[p] - '0';
      ++p;
    } else {
      while (p < body.size() && body[p] == sign_char) {
        ++mag;
        ++p;
      }
    }
    a.charge = sign * mag;
  }
  if (p != body.size()) throw ParseError("unsupported bracket content '" + body + "'");
  if (a.element == "*" && (a.charge != 0 || a.hydrogens != 0 || a.aromatic))
    throw ParseError("decorated dummy atom");
  return a;
}

}  // namespace detail

inline ParsedSmiles parse_smiles_ext(const std::string& text, SmilesOptions opts = {}) {
  using detail::RingOpen;
  if (text.empty()) throw ParseError("empty SMILES");
  MolGraph g;
  std::vector<bool> bare;  // hydrogens to be inferred
  std::optional<int> prev;
  std::optional<BondOrder> pending;
  std::vector<std::optional<int>> branch_stack;
  std::map<int, RingOpen> ring_open;
  std::vector<std::pair<int, int>> open_order;

  auto add_atom = [&](Atom a, bool is_bare) {
    g.atoms.push_back(std::move(a));
    bare.push_back(is_bare);
    int idx = g.atom_count() - 1;
    if (prev) {
      BondOrder o = pending ? *pending : detail::default_order(g.atoms[*prev], g.atoms[idx]);
      g.bonds.push_back({*prev, idx, o});
    }
    pending.reset();
    prev = idx;
  };

  auto ring_closure = [&](int label) {
    if (!prev) throw ParseError("ring closure before any atom");
    auto it = ring_open.find(label);
    if (it == ring_open.end()) {
      ring_open[label] = {*prev, pending};
      open_order.emplace_back(label, *prev);
      pending.reset();
      return;
    }
    RingOpen open = it->second;
    ring_open.erase(it);
    open_order.erase(std::remove_if(open_order.begin(), open_order.end(),
                                    [&](auto& pr) { return pr.first == label; }),
                     open_order.end());
    if (open.atom == *prev) throw ParseError("ring closure to self");
    if (open.order && pending && *open.order != *pending)
      throw ParseError("conflicting ring closure bond orders");
    std::optional<BondOrder> o = pending ? pending : open.order;
    BondOrder order = o ? *o : detail::default_order(g.atoms[open.atom], g.atoms[*prev]);
    if (g.find_bond(open.atom, *prev)) throw ParseError("duplicate ring closure bond");
    g.bonds.push_back({open.atom, *prev, order});
    pending.reset();
  };

  size_t i = 0;
  const size_t n = text.size();
  while (i < n) {
    char c = text[i];
    if (c == '(') {
      if (!prev) throw ParseError("branch before any atom");
      if (pending) throw ParseError("bond symbol before '('");
      branch_stack.push_back(prev);
      ++i;
    } else if (c == ')') {
      if (branch_stack.empty()) throw ParseError("unmatched ')'");
      if (pending) throw ParseError("bond symbol before ')'");
      prev = branch_stack.back();
      branch_stack.pop_back();
      ++i;
    } else if (c == '-') {
      pending = BondOrder::Single;
      ++i;
    } else if (c == '=') {
      pending = BondOrder::Double;
      ++i;
    } else if (c == '#') {
      pending = BondOrder::Triple;
      ++i;
    } else if (c == ':') {
      pending = BondOrder::Aromatic;
      ++i;
    } else if (c >= '1' && c <= '9') {
      ring_closure(c - '0');
      ++i;
    } else if (c == '%') {
      if (i + 2 >= n || !std::isdigit(static_cast<unsigned char>(text[i + 1])) ||
          !std::isdigit(static_cast<unsigned char>(text[i + 2])))
        throw ParseError("'%' needs two digits");
      ring_closure((text[i + 1] - '0') * 10 + (text[i + 2] - '0'));
      i += 3;
    } else if (c == '[') {
      size_t end = text.find(']', i);
      if (end == std::string::npos) throw ParseError("unterminated bracket atom");
      add_atom(detail::parse_bracket_body(text.substr(i + 1, end - i - 1)), /*is_bare=*/false);
      i = end + 1;
    } else if (detail::is_upper_element_start(c)) {
      std::string sym(1, c);
      if ((c == 'C' && i + 1 < n && text[i + 1] == 'l') ||
          (c == 'B' && i + 1 < n && text[i + 1] == 'r')) {
        sym += text[i + 1];
        ++i;
      }
      Atom a;
      a.element = sym;
      add_atom(std::move(a), /*is_bare=*/true);
      ++i;
    } else if (c == 'b' || c == 'c' || c == 'n' || c == 'o' || c == 'p' || c == 's') {
      Atom a;
      a.element = std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
      a.aromatic = true;
      add_atom(std::move(a), /*is_bare=*/true);
      ++i;
    } else {
      throw ParseError(std::string("unexpected character '") + c + "' at position " +
                       std::to_string(i));
    }
  }
  if (!branch_stack.empty()) throw ParseError("unmatched '('");
  if (pending) throw ParseError("dangling bond symbol");
  if (!ring_open.empty() && !opts.allow_open_closures)
    throw ParseError("unmatched ring closure " + std::to_string(ring_open.begin()->first));

  // Open closures reserve one valence unit each (the cross-fragment bond to
  // come). Materialize them as dummies for hydrogen inference and validation.
  MolGraph reserved = g;
  for (const auto& [label, atom] : open_order) {
    const RingOpen& ro = ring_open.at(label);
    Atom dummy;
    dummy.element = "*";
    reserved.atoms.push_back(dummy);
    reserved.bonds.push_back(
        {atom, reserved.atom_count() - 1, ro.order ? *ro.order : BondOrder::Single});
  }
  for (int k = 0; k < g.atom_count(); ++k)
    if (bare[k] && g.atoms[k].element != "*")
      g.atoms[k].hydrogens = implicit_hydrogens(reserved, k);
  for (int k = 0; k < g.atom_count(); ++k) reserved.atoms[k].hydrogens = g.atoms[k].hydrogens;

  bool has_reserved = !open_order.empty();
  validate_graph(reserved, {.allow_dummies = opts.allow_dummies || has_reserved,
                            .require_connected = true});

  ParsedSmiles out;
  out.graph = std::move(g);
  out.open_closures = std::move(open_order);
  return out;
}

inline MolGraph parse_smiles(const std::string& text) {
  return parse_smiles_ext(text).graph;
}

// --------------------------------------------------------------------------
// Writing. Output atom order follows the canonical ranking, so isomorphic
// graphs serialize to byte-identical strings.
// --------------------------------------------------------------------------

struct WriteOptions {
  // Extra ring-closure labels to print at given atoms (cross-fragment bonds
  // in dot-joined strings). Labels 10..19 are reserved for this use.
  std::vector<std::pair<int, int>> extra_closures;  // (atom index, label)
};

namespace detail {

// `reserved` is the graph plus one dummy per extra closure: hydrogen
// inference must see those future bonds exactly as the parser will.
inline std::string atom_token(const MolGraph& g, const MolGraph& reserved, int idx) {
  const Atom& a = g.atoms[idx];
  if (a.element == "*") return "[*]";
  std::string sym = a.element;
  if (a.aromatic)
    for (char& ch : sym) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  bool bare_ok = a.charge == 0;
  if (bare_ok) {
    // Bare atoms re-derive hydrogens on parse; only drop brackets when that
    // reproduces the stored count.
    int implied = -1;
    try {
      implied = implicit_hydrogens(reserved, idx);
    } catch (const Error&) {
      implied = -1;
    }
    bare_ok = implied == a.hydrogens;
  }
  if (bare_ok) return sym;
  std::string out = "[" + sym;
  if (a.hydrogens == 1)
    out += "H";
  else if (a.hydrogens > 1)
    out += "H" + std::to_string(a.hydrogens);
  if (a.charge == 1)
    out += "+";
  else if (a.charge == -1)
    out += "-";
  return out + "]";
}

inline std::string bond_token(const MolGraph& g, const Bond& b) {
  switch (b.order) {
    case BondOrder::Single:
      return g.atoms[b.a].aromatic && g.atoms[b.b].aromatic ? "-" : "";
    case BondOrder::Double: return "=";
    case BondOrder::Triple: return "#";
    case BondOrder::Aromatic:
      return g.atoms[b.a].aromatic && g.atoms[b.b].aromatic ? "" : ":";
  }
  return "";
}

inline std::string closure_token(int label) {
  return label <= 9 ? std::to_string(label) : "%" + std::to_string(label);
}

}  // namespace detail

inline std::string write_smiles(const MolGraph& g, const WriteOptions& opts = {}) {
  if (g.atoms.empty()) return "";
  const int n = g.atom_count();
  MolGraph reserved = g;
  for (const auto& [atom, label] : opts.extra_closures) {
    Atom dummy;
    dummy.element = "*";
    reserved.atoms.push_back(dummy);
    reserved.bonds.push_back({atom, reserved.atom_count() - 1, BondOrder::Single});
  }
  std::vector<int> ranks = canonical_ranks(g);
  std::vector<std::vector<int>> adj = g.adjacency();
  for (int v = 0; v < n; ++v)
    std::sort(adj[v].begin(), adj[v].end(),
              [&](int x, int y) { return ranks[g.other_end(x, v)] < ranks[g.other_end(y, v)]; });

  int root = 0;
  for (int v = 0; v < n; ++v)
    if (ranks[v] < ranks[root]) root = v;

  // Pass 1: canonical DFS; classify tree vs ring bonds, record visit order.
  std::vector<int> visit_pos(n, -1);
  std::vector<int> tree_parent_bond(n, -1);
  std::vector<bool> bond_is_tree(g.bonds.size(), false);
  std::vector<bool> bond_seen(g.bonds.size(), false);
  std::vector<std::pair<int, size_t>> stack{{root, 0}};
  int pos = 0;
  visit_pos[root] = pos++;
  while (!stack.empty()) {
    auto& [v, ei] = stack.back();
    if (ei >= adj[v].size()) {
      stack.pop_back();
      continue;
    }
    int bi = adj[v][ei++];
    if (bond_seen[bi]) continue;
    bond_seen[bi] = true;
    int w = g.other_end(bi, v);
    if (visit_pos[w] == -1) {
      bond_is_tree[bi] = true;
      tree_parent_bond[w] = bi;
      visit_pos[w] = pos++;
      stack.push_back({w, 0});
    }
  }

  // Closure labels: intra-molecule rings use 1..9 then %20+, leaving %10..%19
  // for the caller's cross-fragment bonds.
  std::vector<std::vector<std::pair<int, int>>> closures(n);  // atom -> (label, bond)
  std::vector<int> ring_bonds;
  for (size_t bi = 0; bi < g.bonds.size(); ++bi)
    if (!bond_is_tree[bi]) ring_bonds.push_back(static_cast<int>(bi));
  std::sort(ring_bonds.begin(), ring_bonds.end(), [&](int x, int y) {
    auto key = [&](int b) {
      int u = visit_pos[g.bonds[b].a], v = visit_pos[g.bonds[b].b];
      return std::make_pair(std::min(u, v), std::max(u, v));
    };
    return key(x) < key(y);
  });
  int next_label = 1;
  for (int bi : ring_bonds) {
    int label = next_label++;
    if (next_label == 10) next_label = 20;
    closures[g.bonds[bi].a].emplace_back(label, bi);
    closures[g.bonds[bi].b].emplace_back(label, bi);
  }
  for (const auto& [atom, label] : opts.extra_closures) closures[atom].emplace_back(label, -1);

  auto emit_atom = [&](std::string& out, int v) {
    out += detail::atom_token(g, reserved, v);
    auto cl = closures[v];
    std::sort(cl.begin(), cl.end());
    for (const auto& [label, bi] : cl) {
      if (bi >= 0) {
        int ua = g.bonds[bi].a, ub = g.bonds[bi].b;
        int first = visit_pos[ua] < visit_pos[ub] ? ua : ub;
        if (v == first) out += detail::bond_token(g, g.bonds[bi]);
      }
      out += detail::closure_token(label);
    }
  };

  // Pass 2: emit; every tree child except the last is parenthesized.
  std::string out;
  struct EmitFrame {
    int v;
    std::vector<int> children;
    size_t next = 0;
  };
  auto make_frame = [&](int v) {
    EmitFrame f;
    f.v = v;
    for (int bi : adj[v])
      if (bond_is_tree[bi] && tree_parent_bond[g.other_end(bi, v)] == bi)
        f.children.push_back(bi);
    return f;
  };
  emit_atom(out, root);
  std::vector<EmitFrame> estack;
  estack.push_back(make_frame(root));
  while (!estack.empty()) {
    EmitFrame& f = estack.back();
    if (f.next >= f.children.size()) {
      estack.pop_back();
      if (!estack.empty()) {
        EmitFrame& parent = estack.back();
        if (parent.next < parent.children.size()) out += ")";
      }
      continue;
    }
    int bi = f.children[f.next++];
    int w = g.other_end(bi, f.v);
    if (f.next < f.children.size()) out += "(";
    out += detail::bond_token(g, g.bonds[bi]);
    emit_atom(out, w);
    estack.push_back(make_frame(w));
  }
  return out;
}

}  // namespace frag
