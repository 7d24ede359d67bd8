#pragma once

#include <array>
#include <string>
#include <string_view>

#include "md2/persona.hpp"

namespace md2 {

/// Multilabel over {R, TC, MK}; every subset, including the empty one, is valid.
struct LabelSet {
  bool runner = false;
  bool treasureCollector = false;
  bool monsterKiller = false;

  static LabelSet of(PersonaKind k) {
    LabelSet l;
    l.set(k, true);
    return l;
  }

  static LabelSet from_mask(unsigned mask) { return {(mask & 1u) != 0, (mask & 2u) != 0, (mask & 4u) != 0}; }
  unsigned mask() const { return (runner ? 1u : 0u) | (treasureCollector ? 2u : 0u) | (monsterKiller ? 4u : 0u); }

  bool has(PersonaKind k) const {
    switch (k) {
      case PersonaKind::Runner: return runner;
      case PersonaKind::TreasureCollector: return treasureCollector;
      case PersonaKind::MonsterKiller: return monsterKiller;
    }
    return false;
  }

  void set(PersonaKind k, bool v) {
    switch (k) {
      case PersonaKind::Runner: runner = v; break;
      case PersonaKind::TreasureCollector: treasureCollector = v; break;
      case PersonaKind::MonsterKiller: monsterKiller = v; break;
    }
  }

  bool operator[](std::size_t i) const { return has(kPersonas[i]); }
  bool empty() const { return mask() == 0; }

  friend bool operator==(const LabelSet&, const LabelSet&) = default;
};

/// Row names of the combination table, in display order.
inline constexpr std::array<std::string_view, 8> kCombinationNames = {
    "No Label", "Pure R", "Pure TC", "Pure MK", "R&TC", "R&MK", "TC&MK", "R&TC&MK"};

/// Index of the label set in kCombinationNames.
inline std::size_t combination_row(const LabelSet& l) {
  switch (l.mask()) {
    case 0: return 0;
    case 1: return 1;
    case 2: return 2;
    case 4: return 3;
    case 3: return 4;
    case 5: return 5;
    case 6: return 6;
    case 7: return 7;
  }
  return 0;
}

inline std::string to_string(const LabelSet& l) { return std::string(kCombinationNames[combination_row(l)]); }

}  // namespace md2
