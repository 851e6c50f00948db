#pragma once

#include <array>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "frag/canonical.hpp"
#include "frag/fingerprint.hpp"
#include "frag/mol_graph.hpp"
#include "frag/smiles.hpp"

namespace frag {

enum class FragmentKind : uint8_t { Arm, Linker };

inline const char* kind_name(FragmentKind k) {
  return k == FragmentKind::Arm ? "arm" : "linker";
}

// A molecular piece with 1 (arm) or 2 (linker) open attachment points. The
// graph itself carries no dummy atoms; attachments list the atoms owed one
// more single bond.
struct Fragment {
  MolGraph graph;
  std::vector<int> attachments;  // size 1 or 2; the same atom may appear twice

  FragmentKind kind() const {
    return attachments.size() == 1 ? FragmentKind::Arm : FragmentKind::Linker;
  }
  int atom_count() const { return graph.atom_count(); }
};

// Graph with one dummy atom appended per attachment; the storage and
// fingerprint form of a fragment.
inline MolGraph fragment_with_dummies(const Fragment& f) {
  MolGraph g = f.graph;
  for (int att : f.attachments) {
    Atom dummy;
    dummy.element = "*";
    g.atoms.push_back(dummy);
    g.bonds.push_back({att, g.atom_count() - 1, BondOrder::Single});
  }
  return g;
}

inline void validate_fragment(const Fragment& f) {
  if (f.attachments.size() < 1 || f.attachments.size() > 2)
    throw AttachmentMismatch("fragment must have 1 or 2 attachment points");
  for (int a : f.attachments)
    if (a < 0 || a >= f.graph.atom_count())
      throw AttachmentMismatch("attachment atom out of range");
  validate_graph(fragment_with_dummies(f), {.allow_dummies = true});
}

inline std::string fragment_key(const Fragment& f) {
  return canonical_key(fragment_with_dummies(f));
}

inline Fingerprint fragment_fingerprint(const Fragment& f) {
  return morgan_fingerprint(fragment_with_dummies(f));
}

// Storage form: open attachments rendered as [*].
inline std::string fragment_to_smiles(const Fragment& f) {
  return write_smiles(fragment_with_dummies(f));
}

inline Fragment fragment_from_graph_with_dummies(const MolGraph& with_dummies) {
  Fragment f;
  std::vector<int> remap(with_dummies.atom_count(), -1);
  for (int i = 0; i < with_dummies.atom_count(); ++i) {
    if (with_dummies.atoms[i].element == "*") continue;
    remap[i] = f.graph.atom_count();
    f.graph.atoms.push_back(with_dummies.atoms[i]);
  }
  for (const Bond& b : with_dummies.bonds) {
    bool da = with_dummies.atoms[b.a].element == "*";
    bool db = with_dummies.atoms[b.b].element == "*";
    if (da && db) throw ParseError("dummy-dummy bond");
    if (da || db) continue;
    f.graph.bonds.push_back({remap[b.a], remap[b.b], b.order});
  }
  for (int i = 0; i < with_dummies.atom_count(); ++i) {
    if (with_dummies.atoms[i].element != "*") continue;
    for (const Bond& b : with_dummies.bonds) {
      if (b.a == i)
        f.attachments.push_back(remap[b.b]);
      else if (b.b == i)
        f.attachments.push_back(remap[b.a]);
    }
  }
  validate_fragment(f);
  return f;
}

inline Fragment fragment_from_smiles(const std::string& text) {
  ParsedSmiles p = parse_smiles_ext(text, {.allow_dummies = true});
  return fragment_from_graph_with_dummies(p.graph);
}

// --------------------------------------------------------------------------
// Arm-linker-arm slicing.
// --------------------------------------------------------------------------

// Bonds that may be cut: single order, outside every ring. Exposed so the cut
// rule can be swapped out.
using CutPredicate = bool (*)(const MolGraph&, int bond_idx, const std::vector<bool>& ring);

inline bool default_cut_predicate(const MolGraph& g, int bond_idx, const std::vector<bool>& ring) {
  return g.bonds[bond_idx].order == BondOrder::Single && !ring[bond_idx];
}

inline std::vector<int> cuttable_bonds(const MolGraph& g, CutPredicate pred = default_cut_predicate) {
  std::vector<bool> ring = g.ring_bond_flags();
  std::vector<int> out;
  for (int i = 0; i < g.bond_count(); ++i)
    if (pred(g, i, ring)) out.push_back(i);
  return out;
}

namespace detail {

// Connected components after deleting the given bonds; returns component id per atom.
inline std::vector<int> components_without(const MolGraph& g, int skip_a, int skip_b, int& count) {
  std::vector<std::vector<int>> adj = g.adjacency();
  std::vector<int> comp(g.atom_count(), -1);
  count = 0;
  for (int s = 0; s < g.atom_count(); ++s) {
    if (comp[s] != -1) continue;
    comp[s] = count;
    std::vector<int> stack{s};
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int bi : adj[v]) {
        if (bi == skip_a || bi == skip_b) continue;
        int w = g.other_end(bi, v);
        if (comp[w] == -1) {
          comp[w] = count;
          stack.push_back(w);
        }
      }
    }
    ++count;
  }
  return comp;
}

struct ExtractedPiece {
  MolGraph graph;
  std::vector<int> remap;  // original atom -> local index (or -1)
};

inline ExtractedPiece extract_component(const MolGraph& g, const std::vector<int>& comp, int id) {
  ExtractedPiece piece;
  piece.remap.assign(g.atom_count(), -1);
  for (int i = 0; i < g.atom_count(); ++i) {
    if (comp[i] != id) continue;
    piece.remap[i] = piece.graph.atom_count();
    piece.graph.atoms.push_back(g.atoms[i]);
  }
  for (const Bond& b : g.bonds)
    if (comp[b.a] == id && comp[b.b] == id)
      piece.graph.bonds.push_back({piece.remap[b.a], piece.remap[b.b], b.order});
  return piece;
}

}  // namespace detail

struct ArmLinkerArm {
  Fragment arm1;
  Fragment linker;
  Fragment arm2;
};

// Cuts two distinct acyclic single bonds chosen uniformly at random among all
// valid pairs, yielding (arm, linker, arm) with attachments at the cut sites.
// Empty when fewer than two cuttable bonds exist.
inline std::optional<ArmLinkerArm> slice_arm_linker_arm(const MolGraph& m, std::mt19937_64& rng,
                                                        CutPredicate pred = default_cut_predicate) {
  std::vector<int> cuts = cuttable_bonds(m, pred);
  if (cuts.size() < 2) return std::nullopt;
  const size_t pair_count = cuts.size() * (cuts.size() - 1) / 2;
  size_t pick = std::uniform_int_distribution<size_t>(0, pair_count - 1)(rng);
  size_t i = 0, j = 1;
  for (size_t seen = 0, a = 0; a + 1 < cuts.size(); ++a) {
    size_t row = cuts.size() - 1 - a;
    if (pick < seen + row) {
      i = a;
      j = a + 1 + (pick - seen);
      break;
    }
    seen += row;
  }
  int b1 = cuts[i], b2 = cuts[j];

  int comp_count = 0;
  std::vector<int> comp = detail::components_without(m, b1, b2, comp_count);
  // Two distinct bridges always yield three components, exactly one of which
  // touches both cuts.
  if (comp_count != 3) return std::nullopt;

  auto ends = [&](int bond) { return std::array<int, 2>{m.bonds[bond].a, m.bonds[bond].b}; };
  int middle = -1;
  for (int c = 0; c < 3; ++c) {
    bool touches1 = comp[ends(b1)[0]] == c || comp[ends(b1)[1]] == c;
    bool touches2 = comp[ends(b2)[0]] == c || comp[ends(b2)[1]] == c;
    if (touches1 && touches2) middle = c;
  }
  if (middle < 0) return std::nullopt;

  auto arm_of = [&](int bond) {
    int outer = comp[ends(bond)[0]] == middle ? ends(bond)[1] : ends(bond)[0];
    detail::ExtractedPiece piece = detail::extract_component(m, comp, comp[outer]);
    Fragment f;
    f.graph = std::move(piece.graph);
    f.attachments = {piece.remap[outer]};
    return f;
  };
  auto linker_of = [&]() {
    detail::ExtractedPiece piece = detail::extract_component(m, comp, middle);
    Fragment f;
    f.graph = std::move(piece.graph);
    int in1 = comp[ends(b1)[0]] == middle ? ends(b1)[0] : ends(b1)[1];
    int in2 = comp[ends(b2)[0]] == middle ? ends(b2)[0] : ends(b2)[1];
    f.attachments = {piece.remap[in1], piece.remap[in2]};
    return f;
  };

  ArmLinkerArm out{arm_of(b1), linker_of(), arm_of(b2)};
  validate_fragment(out.arm1);
  validate_fragment(out.linker);
  validate_fragment(out.arm2);
  return out;
}

// --------------------------------------------------------------------------
// Reattachment.
// --------------------------------------------------------------------------

namespace detail {

// Disjoint union; returns per-fragment atom offset.
inline std::vector<int> graph_union(MolGraph& out, const std::vector<const MolGraph*>& parts) {
  std::vector<int> offsets;
  for (const MolGraph* p : parts) {
    offsets.push_back(out.atom_count());
    for (const Atom& a : p->atoms) out.atoms.push_back(a);
    for (const Bond& b : p->bonds)
      out.bonds.push_back({b.a + offsets.back(), b.b + offsets.back(), b.order});
  }
  return offsets;
}

}  // namespace detail

// Joins fragments whose attachment slots pair off exactly: two arms, or
// arm + linker + arm (in any input order).
inline MolGraph reattach(const std::vector<Fragment>& fragments) {
  std::vector<const Fragment*> arms, linkers;
  for (const Fragment& f : fragments)
    (f.kind() == FragmentKind::Arm ? arms : linkers).push_back(&f);
  MolGraph g;
  if (arms.size() == 2 && linkers.empty()) {
    std::vector<int> off = detail::graph_union(g, {&arms[0]->graph, &arms[1]->graph});
    g.bonds.push_back({arms[0]->attachments[0] + off[0], arms[1]->attachments[0] + off[1],
                       BondOrder::Single});
  } else if (arms.size() == 2 && linkers.size() == 1) {
    std::vector<int> off =
        detail::graph_union(g, {&arms[0]->graph, &linkers[0]->graph, &arms[1]->graph});
    g.bonds.push_back({arms[0]->attachments[0] + off[0], linkers[0]->attachments[0] + off[1],
                       BondOrder::Single});
    g.bonds.push_back({linkers[0]->attachments[1] + off[1], arms[1]->attachments[0] + off[2],
                       BondOrder::Single});
  } else {
    throw AttachmentMismatch("expected arm+arm or arm+linker+arm, got " +
                             std::to_string(arms.size()) + " arms / " +
                             std::to_string(linkers.size()) + " linkers");
  }
  validate_graph(g);
  return g;
}

inline MolGraph reattach(const ArmLinkerArm& s) {
  return reattach(std::vector<Fragment>{s.arm1, s.linker, s.arm2});
}

// Joins an arm to a randomly chosen linker slot; the remaining slot stays
// open, so the result is a larger arm (motif-extension input).
inline Fragment combine_arm_linker(const Fragment& arm, const Fragment& linker,
                                   std::mt19937_64& rng) {
  if (arm.kind() != FragmentKind::Arm || linker.kind() != FragmentKind::Linker)
    throw AttachmentMismatch("combine_arm_linker needs an arm and a linker");
  int slot = std::uniform_int_distribution<int>(0, 1)(rng);
  Fragment out;
  std::vector<int> off = detail::graph_union(out.graph, {&arm.graph, &linker.graph});
  out.graph.bonds.push_back({arm.attachments[0] + off[0], linker.attachments[slot] + off[1],
                             BondOrder::Single});
  out.attachments = {linker.attachments[1 - slot] + off[1]};
  validate_fragment(out);
  return out;
}

// --------------------------------------------------------------------------
// SAFE strings: dot-joined per-fragment blocks; cross-fragment bonds are
// shared ring-closure labels starting at %10.
// --------------------------------------------------------------------------

inline constexpr int kFirstCrossLabel = 10;

// Full-molecule form: all slots paired (arm-linker-arm or arm-arm), blocks
// emitted in the given order.
inline std::string to_safe(const std::vector<Fragment>& fragments, const std::vector<int>& order) {
  if (order.size() != fragments.size()) throw AttachmentMismatch("order size mismatch");
  if (fragments.size() == 1) return fragment_to_smiles(fragments[0]);  // storage form
  std::vector<const Fragment*> arms, linkers;
  for (const Fragment& f : fragments)
    (f.kind() == FragmentKind::Arm ? arms : linkers).push_back(&f);
  // label assignment per fragment: (atom, label)
  std::vector<std::vector<std::pair<int, int>>> closures(fragments.size());
  auto slot_of = [&](const Fragment* f) -> size_t {
    for (size_t i = 0; i < fragments.size(); ++i)
      if (&fragments[i] == f) return i;
    throw AttachmentMismatch("fragment not found");
  };
  if (arms.size() == 2 && linkers.empty()) {
    closures[slot_of(arms[0])].push_back({arms[0]->attachments[0], kFirstCrossLabel});
    closures[slot_of(arms[1])].push_back({arms[1]->attachments[0], kFirstCrossLabel});
  } else if (arms.size() == 2 && linkers.size() == 1) {
    closures[slot_of(arms[0])].push_back({arms[0]->attachments[0], kFirstCrossLabel});
    closures[slot_of(linkers[0])].push_back({linkers[0]->attachments[0], kFirstCrossLabel});
    closures[slot_of(linkers[0])].push_back({linkers[0]->attachments[1], kFirstCrossLabel + 1});
    closures[slot_of(arms[1])].push_back({arms[1]->attachments[0], kFirstCrossLabel + 1});
  } else {
    throw AttachmentMismatch("to_safe expects arm+arm or arm+linker+arm");
  }
  std::string out;
  for (size_t k = 0; k < order.size(); ++k) {
    if (k) out += ".";
    int idx = order[k];
    out += write_smiles(fragments[idx].graph, {.extra_closures = closures[idx]});
  }
  return out;
}

// Open form used as a generation prompt: every attachment gets a fresh label
// and the string ends with '.' so the model completes the last block(s).
inline std::string safe_prefix(const std::vector<Fragment>& fragments) {
  std::string out;
  int next_label = kFirstCrossLabel;
  for (const Fragment& f : fragments) {
    std::vector<std::pair<int, int>> closures;
    for (int att : f.attachments) closures.emplace_back(att, next_label++);
    out += write_smiles(f.graph, {.extra_closures = closures});
    out += ".";
  }
  return out;
}

struct SafeBlock {
  Fragment fragment;        // 0..2 attachments at this stage
  std::vector<int> labels;  // per attachment: cross-fragment label, or -1 for [*]
};

namespace detail {

// Splits into blocks without imposing fragment semantics; a block may expose
// zero attachments (a complete molecule).
inline std::vector<SafeBlock> parse_safe_blocks(const std::string& text) {
  std::vector<SafeBlock> out;
  size_t start = 0;
  while (start <= text.size()) {
    size_t dot = text.find('.', start);
    std::string block =
        dot == std::string::npos ? text.substr(start) : text.substr(start, dot - start);
    if (block.empty()) throw ParseError("empty SAFE block");
    ParsedSmiles p =
        parse_smiles_ext(block, {.allow_dummies = true, .allow_open_closures = true});
    for (const auto& [label, atom] : p.open_closures)
      if (label < kFirstCrossLabel)
        throw ParseError("ring closure " + std::to_string(label) + " unmatched inside block");
    // Attachments may come from [*] dummies (label -1) and from open closure
    // labels; only their union must number 1 or 2, so strip dummies by hand.
    SafeBlock sb;
    std::vector<int> remap(p.graph.atom_count(), -1);
    for (int i = 0; i < p.graph.atom_count(); ++i) {
      if (p.graph.atoms[i].element == "*") continue;
      remap[i] = sb.fragment.graph.atom_count();
      sb.fragment.graph.atoms.push_back(p.graph.atoms[i]);
    }
    for (const Bond& b : p.graph.bonds) {
      bool da = p.graph.atoms[b.a].element == "*";
      bool db = p.graph.atoms[b.b].element == "*";
      if (da && db) throw ParseError("dummy-dummy bond");
      if (da || db) continue;
      sb.fragment.graph.bonds.push_back({remap[b.a], remap[b.b], b.order});
    }
    for (int i = 0; i < p.graph.atom_count(); ++i) {
      if (p.graph.atoms[i].element != "*") continue;
      for (const Bond& b : p.graph.bonds) {
        if (b.a != i && b.b != i) continue;
        sb.fragment.attachments.push_back(remap[b.a == i ? b.b : b.a]);
        sb.labels.push_back(-1);
      }
    }
    for (const auto& [label, atom] : p.open_closures) {
      sb.fragment.attachments.push_back(remap[atom]);
      sb.labels.push_back(label);
    }
    if (sb.fragment.attachments.size() > 2)
      throw AttachmentMismatch("block exposes more than 2 attachments");
    if (!sb.fragment.attachments.empty()) validate_fragment(sb.fragment);
    out.push_back(std::move(sb));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (out.empty()) throw ParseError("no SAFE blocks");
  return out;
}

}  // namespace detail

// Splits a SAFE string into per-fragment blocks. Attachments arise from
// unmatched closure labels >= 10 and from [*] dummies; every block must be a
// proper fragment (1 or 2 attachments).
inline std::vector<SafeBlock> from_safe(const std::string& text) {
  std::vector<SafeBlock> out = detail::parse_safe_blocks(text);
  for (const SafeBlock& sb : out)
    if (sb.fragment.attachments.empty())
      throw AttachmentMismatch("block has no attachments");
  return out;
}

struct ReassembledMolecule {
  MolGraph mol;
  std::vector<std::pair<int, int>> block_atom_ranges;      // (offset, count) per block
  std::vector<std::array<int, 3>> cross_bonds;             // (label, atom, atom)
};

// Joins all blocks of a SAFE string by pairing equal closure labels; block
// order never affects the resulting molecule. Single-block strings with no
// open labels are plain molecules.
inline ReassembledMolecule reassemble_safe(const std::string& text) {
  std::vector<SafeBlock> blocks = detail::parse_safe_blocks(text);
  ReassembledMolecule out;
  std::vector<std::pair<int, int>> pending;  // label -> global atom
  for (const SafeBlock& sb : blocks) {
    int offset = out.mol.atom_count();
    out.block_atom_ranges.emplace_back(offset, sb.fragment.graph.atom_count());
    for (const Atom& a : sb.fragment.graph.atoms) out.mol.atoms.push_back(a);
    for (const Bond& b : sb.fragment.graph.bonds)
      out.mol.bonds.push_back({b.a + offset, b.b + offset, b.order});
    for (size_t i = 0; i < sb.fragment.attachments.size(); ++i) {
      if (sb.labels[i] < 0) throw AttachmentMismatch("unfilled [*] attachment");
      pending.emplace_back(sb.labels[i], sb.fragment.attachments[i] + offset);
    }
  }
  std::sort(pending.begin(), pending.end());
  for (size_t i = 0; i < pending.size();) {
    if (i + 1 >= pending.size() || pending[i].first != pending[i + 1].first)
      throw AttachmentMismatch("closure label " + std::to_string(pending[i].first) +
                               " appears once");
    if (i + 2 < pending.size() && pending[i + 2].first == pending[i].first)
      throw AttachmentMismatch("closure label " + std::to_string(pending[i].first) +
                               " appears more than twice");
    out.mol.bonds.push_back({pending[i].second, pending[i + 1].second, BondOrder::Single});
    out.cross_bonds.push_back({pending[i].first, pending[i].second, pending[i + 1].second});
    i += 2;
  }
  validate_graph(out.mol);
  return out;
}

}  // namespace frag
