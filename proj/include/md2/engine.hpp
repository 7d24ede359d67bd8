#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "md2/level.hpp"
#include "md2/state.hpp"
#include "md2/types.hpp"

namespace md2 {

// The enumeration order is the feature-vector layout; never reorder.
enum class Mechanic : std::uint8_t {
  EnemyKill,
  GoblinHit,
  MinitaurHit,
  GoblinWizardHit,
  BlobHit,
  OgreHit,
  OgreTreasure,
  BlobPotion,
  BlobCombine,
  JavelinThrow,
  CollectTreasure,
  ConsumePotion,
  TriggerTrap,
  UsePortal,
  EndTurn,
  Die,
  ReachStairs,
};

inline constexpr std::size_t kMechanicCount = 17;

inline constexpr std::array<std::string_view, kMechanicCount> kMechanicNames = {
    "enemy_kill",     "goblin_hit",      "minitaur_hit",     "goblin_wizard_hit", "blob_hit",  "ogre_hit",
    "ogre_treasure",  "blob_potion",     "blob_combine",     "javelin_throw",     "collect_treasure",
    "consume_potion", "trigger_trap",    "use_portal",       "end_turn",          "die",       "reach_stairs"};

constexpr std::string_view to_string(Mechanic m) { return kMechanicNames[static_cast<std::size_t>(m)]; }

inline std::optional<Mechanic> parse_mechanic(std::string_view name) {
  for (std::size_t i = 0; i < kMechanicCount; ++i)
    if (kMechanicNames[i] == name) return static_cast<Mechanic>(i);
  return std::nullopt;
}

struct MechanicEvent {
  Mechanic kind = Mechanic::EndTurn;
  int turn = 0;
  Coord subject;

  friend bool operator==(const MechanicEvent&, const MechanicEvent&) = default;
};

struct Action {
  enum class Type : std::uint8_t { Move, Throw };
  Type type = Type::Move;
  Direction dir = Direction::North;
  Coord target;

  static Action move(Direction d) { return Action{Type::Move, d, {}}; }
  static Action throw_at(Coord t) { return Action{Type::Throw, Direction::North, t}; }

  bool is_move() const { return type == Type::Move; }

  // Moves compare by direction, throws by target.
  friend bool operator==(const Action& a, const Action& b) {
    if (a.type != b.type) return false;
    return a.is_move() ? a.dir == b.dir : a.target == b.target;
  }
};

/// "N", "S", "E", "W" or "T:x,y".
inline std::string to_string(const Action& a) {
  if (a.is_move()) return std::string(1, direction_letter(a.dir));
  return "T:" + std::to_string(a.target.x) + "," + std::to_string(a.target.y);
}

inline Action parse_action(std::string_view text) {
  if (text.size() == 1) {
    switch (text[0]) {
      case 'N': return Action::move(Direction::North);
      case 'S': return Action::move(Direction::South);
      case 'E': return Action::move(Direction::East);
      case 'W': return Action::move(Direction::West);
      default: break;
    }
  }
  if (text.size() > 2 && text.substr(0, 2) == "T:") {
    const auto body = std::string(text.substr(2));
    const auto comma = body.find(',');
    if (comma != std::string::npos) {
      try {
        std::size_t used = 0;
        const int x = std::stoi(body.substr(0, comma), &used);
        if (used == comma) {
          const auto rest = body.substr(comma + 1);
          const int y = std::stoi(rest, &used);
          if (used == rest.size()) return Action::throw_at({x, y});
        }
      } catch (const std::exception&) {
      }
    }
  }
  throw Error(ErrorCode::MalformedRecord, "cannot parse action '" + std::string(text) + "'");
}

struct StepResult {
  GameState state;
  std::vector<MechanicEvent> events;
};

inline bool line_of_sight(const GameState& state, Coord from, Coord to) {
  const Level& lv = state.map();
  if (!lv.in_bounds(from) || !lv.in_bounds(to))
    throw Error(ErrorCode::OutOfBounds, "line_of_sight endpoint out of bounds");
  return lv.sight(from, to);
}

inline Outcome is_terminal(const GameState& s) {
  if (s.heroHp <= 0) return Outcome::Dead;
  if (s.heroPos == s.map().exit) return Outcome::Won;
  return Outcome::Ongoing;
}

/// Moves in N,S,E,W order, then javelin throws by target in row-major order.
inline std::vector<Action> legal_actions(const GameState& s) {
  if (s.outcome != Outcome::Ongoing) throw Error(ErrorCode::TerminalState, "no actions in a finished game");
  const Level& lv = s.map();
  std::vector<Action> out;
  out.reserve(8);
  for (Direction d : kDirections)
    if (!lv.is_wall(s.heroPos + offset(d))) out.push_back(Action::move(d));
  if (s.javelin.held) {
    // monsters are sorted row-major and never share a tile
    for (const auto& m : s.monsters) {
      if (!m.alive || m.pos == s.heroPos) continue;
      if (lv.sight(s.heroPos, m.pos)) out.push_back(Action::throw_at(m.pos));
    }
  }
  return out;
}

namespace detail {

inline Mechanic hit_mechanic(MonsterKind kind) {
  switch (kind) {
    case MonsterKind::Goblin: return Mechanic::GoblinHit;
    case MonsterKind::GoblinWizard: return Mechanic::GoblinWizardHit;
    case MonsterKind::Blob: return Mechanic::BlobHit;
    case MonsterKind::Ogre: return Mechanic::OgreHit;
    case MonsterKind::Minitaur: return Mechanic::MinitaurHit;
  }
  return Mechanic::GoblinHit;
}

class Resolver {
 public:
  Resolver(GameState& s, std::vector<MechanicEvent>& ev) : s_(s), lv_(s.map()), ev_(ev), turn_(s.turn) {}

  void hero_action(const Action& a) {
    if (a.is_move()) {
      hero_move(s_.heroPos + offset(a.dir));
    } else {
      const int idx = s_.monster_at(a.target);
      emit(Mechanic::JavelinThrow, a.target);
      s_.javelin = Javelin{false, a.target};
      if (idx >= 0) hero_hits(idx);
    }
  }

  void monster_phase() {
    // living monsters are already in row-major order of their positions
    const std::size_t n = s_.monsters.size();
    for (std::size_t i = 0; i < n; ++i) {
      if (s_.heroHp <= 0) break;
      if (!s_.monsters[i].alive) continue;
      switch (s_.monsters[i].kind) {
        case MonsterKind::Goblin: goblin(i); break;
        case MonsterKind::GoblinWizard: wizard(i); break;
        case MonsterKind::Blob: blob(i); break;
        case MonsterKind::Ogre: ogre(i); break;
        case MonsterKind::Minitaur: minitaur(i); break;
      }
    }
  }

  void emit(Mechanic kind, Coord subject) { ev_.push_back(MechanicEvent{kind, turn_, subject}); }

 private:
  void damage_hero(int amount) { s_.heroHp = std::max(0, s_.heroHp - amount); }

  // Applies damage from any source. Returns true if the monster died.
  bool damage_monster(MonsterState& m, int amount) {
    if (amount <= 0) return false;
    if (m.kind == MonsterKind::Minitaur) {
      m.stunTurns = kStunTurns;
      return false;
    }
    m.hp -= amount;
    if (m.hp <= 0) {
      m.hp = 0;
      m.alive = false;
      return true;
    }
    return false;
  }

  void hero_hits(int idx) {
    auto& m = s_.monsters[idx];
    const Coord at = m.pos;
    emit(hit_mechanic(m.kind), at);
    if (damage_monster(m, 1)) emit(Mechanic::EnemyKill, at);
  }

  void hero_move(Coord dest) {
    const int idx = s_.monster_at(dest);
    if (idx >= 0 && !(s_.monsters[idx].kind == MonsterKind::Minitaur && s_.monsters[idx].stunned())) {
      // melee: simultaneous exchange, the hero advances only over a corpse
      const int retaliation = contact_damage(s_.monsters[idx]);
      hero_hits(idx);
      damage_hero(retaliation);
      if (!s_.monsters[idx].alive && s_.heroHp > 0) hero_enter(dest);
      return;
    }
    hero_enter(dest);
  }

  void pick_up_javelin() {
    if (!s_.javelin.held && s_.javelin.pos == s_.heroPos) s_.javelin.held = true;
  }

  void hero_enter(Coord dest) {
    s_.heroPos = dest;
    pick_up_javelin();
    const int ti = lv_.index(dest);
    switch (s_.items[ti]) {
      case ItemKind::Treasure:
        s_.items[ti] = ItemKind::None;
        ++s_.treasureScore;
        emit(Mechanic::CollectTreasure, dest);
        break;
      case ItemKind::Potion:
        s_.items[ti] = ItemKind::None;
        s_.heroHp = std::min(kMaxHeroHp, s_.heroHp + 1);
        emit(Mechanic::ConsumePotion, dest);
        break;
      case ItemKind::Trap:
        damage_hero(1);
        emit(Mechanic::TriggerTrap, dest);
        break;
      case ItemKind::Portal: {
        const auto twin = lv_.portal_twin(dest);
        if (!twin) break;
        const int blocker = s_.monster_at(*twin);
        if (blocker >= 0 && !(s_.monsters[blocker].kind == MonsterKind::Minitaur && s_.monsters[blocker].stunned()))
          break;
        emit(Mechanic::UsePortal, dest);
        s_.heroPos = *twin;
        pick_up_javelin();
        break;
      }
      case ItemKind::None: break;
    }
  }

  bool occupied_by_other(Coord c, std::size_t self) const {
    for (std::size_t j = 0; j < s_.monsters.size(); ++j)
      if (j != self && s_.monsters[j].alive && s_.monsters[j].pos == c) return true;
    return false;
  }

  // Greedy step that strictly shortens the path distance to `target`;
  // ties go to the row-major first tile.
  template <typename Allowed>
  std::optional<Coord> step_toward(Coord from, Coord target, Allowed&& allowed) const {
    const int here = lv_.distance(from, target);
    std::optional<Coord> best;
    int bestDist = here;
    for (Direction d : kDirections) {
      const Coord c = from + offset(d);
      if (lv_.is_wall(c)) continue;
      const int dist = lv_.distance(c, target);
      if (dist >= here || !allowed(c)) continue;
      if (!best || dist < bestDist || (dist == bestDist && c < *best)) {
        best = c;
        bestDist = dist;
      }
    }
    return best;
  }

  void monster_enters_trap(std::size_t i) {
    auto& m = s_.monsters[i];
    if (s_.items[lv_.index(m.pos)] != ItemKind::Trap) return;
    emit(Mechanic::TriggerTrap, m.pos);
    damage_monster(m, 1);
  }

  void chase_hero(std::size_t i) {
    const Coord from = s_.monsters[i].pos;
    const auto step = step_toward(from, s_.heroPos, [&](Coord c) { return c == s_.heroPos || !occupied_by_other(c, i); });
    if (!step) return;
    if (*step == s_.heroPos) {
      damage_hero(contact_damage(s_.monsters[i]));
      return;
    }
    s_.monsters[i].pos = *step;
    monster_enters_trap(i);
  }

  void goblin(std::size_t i) {
    if (!lv_.sight(s_.monsters[i].pos, s_.heroPos)) return;
    chase_hero(i);
  }

  void wizard(std::size_t i) {
    const Coord p = s_.monsters[i].pos;
    if (!lv_.sight(p, s_.heroPos)) return;
    const int dx = p.x - s_.heroPos.x;
    const int dy = p.y - s_.heroPos.y;
    if (dx * dx + dy * dy <= 25) {
      damage_hero(1);
      return;
    }
    chase_hero(i);
  }

  // Nearest visible item of `kind` or the hero, by path distance; items win ties.
  std::optional<Coord> pick_target(Coord from, ItemKind kind) const {
    std::optional<Coord> best;
    int bestDist = lv_.unreachable();
    bool bestIsItem = false;
    for (int t = 0; t < lv_.tile_count(); ++t) {
      if (s_.items[t] != kind) continue;
      const Coord c = lv_.coord(t);
      if (!lv_.sight(from, c)) continue;
      const int d = lv_.distance(from, c);
      if (d >= lv_.unreachable()) continue;
      if (!best || d < bestDist) {
        best = c;
        bestDist = d;
        bestIsItem = true;
      }
    }
    if (lv_.sight(from, s_.heroPos)) {
      const int d = lv_.distance(from, s_.heroPos);
      if (d < lv_.unreachable() && (!best || d < bestDist || (d == bestDist && !bestIsItem))) best = s_.heroPos;
    }
    return best;
  }

  void blob(std::size_t i) {
    const Coord from = s_.monsters[i].pos;
    const auto target = pick_target(from, ItemKind::Potion);
    if (!target) return;
    const auto step = step_toward(from, *target, [&](Coord c) {
      if (c == s_.heroPos) return true;
      const int other = s_.monster_at(c);
      return other < 0 || s_.monsters[other].kind == MonsterKind::Blob;
    });
    if (!step) return;
    if (*step == s_.heroPos) {
      damage_hero(contact_damage(s_.monsters[i]));
      return;
    }
    const int other = s_.monster_at(*step);
    if (other >= 0) {
      auto& into = s_.monsters[other];
      into.blobLevel = std::min(kMaxBlobLevel, std::max(into.blobLevel, s_.monsters[i].blobLevel) + 1);
      into.hp = into.blobLevel;
      s_.monsters[i].alive = false;
      s_.monsters[i].hp = 0;
      emit(Mechanic::BlobCombine, *step);
      return;
    }
    auto& m = s_.monsters[i];
    m.pos = *step;
    const int ti = lv_.index(m.pos);
    if (s_.items[ti] == ItemKind::Potion) {
      s_.items[ti] = ItemKind::None;
      m.blobLevel = std::min(kMaxBlobLevel, m.blobLevel + 1);
      m.hp = m.blobLevel;
      emit(Mechanic::BlobPotion, m.pos);
    }
    monster_enters_trap(i);
  }

  void ogre(std::size_t i) {
    const Coord from = s_.monsters[i].pos;
    const auto target = pick_target(from, ItemKind::Treasure);
    if (!target) return;
    const auto step = step_toward(from, *target, [](Coord) { return true; });
    if (!step) return;
    if (*step == s_.heroPos) {
      damage_hero(contact_damage(s_.monsters[i]));
      return;
    }
    if (const int other = s_.monster_at(*step); other >= 0) {
      // ogres bash whatever stands in their way
      damage_monster(s_.monsters[other], 2);
      return;
    }
    auto& m = s_.monsters[i];
    m.pos = *step;
    const int ti = lv_.index(m.pos);
    if (s_.items[ti] == ItemKind::Treasure) {
      s_.items[ti] = ItemKind::None;
      ++s_.treasuresEatenByOgres;
      emit(Mechanic::OgreTreasure, m.pos);
    }
    monster_enters_trap(i);
  }

  void minitaur(std::size_t i) {
    auto& m = s_.monsters[i];
    if (m.stunTurns > 0) {
      --m.stunTurns;
      return;
    }
    if (m.pos == s_.heroPos) {
      damage_hero(contact_damage(m));
      return;
    }
    chase_hero(i);
  }

  GameState& s_;
  const Level& lv_;
  std::vector<MechanicEvent>& ev_;
  int turn_;
};

}  // namespace detail

/// Applies an action already known to be legal. Used by the planner, which
/// only ever generates legal actions.
inline StepResult apply_unchecked(const GameState& in, const Action& action) {
  StepResult out{in, {}};
  GameState& s = out.state;
  out.events.reserve(6);
  detail::Resolver r(s, out.events);
  r.hero_action(action);
  if (s.heroHp > 0 && s.heroPos != s.map().exit) r.monster_phase();
  r.emit(Mechanic::EndTurn, s.heroPos);
  s.turn += 1;
  s.outcome = is_terminal(s);
  if (s.outcome == Outcome::Dead) r.emit(Mechanic::Die, s.heroPos);
  else if (s.outcome == Outcome::Won) r.emit(Mechanic::ReachStairs, s.heroPos);
  std::erase_if(s.monsters, [](const MonsterState& m) { return !m.alive; });
  sort_monsters(s.monsters);
  return out;
}

inline bool is_legal(const GameState& s, const Action& a) {
  for (const auto& legal : legal_actions(s))
    if (legal == a) return true;
  return false;
}

/// Pure transition: hero action, then the monster phase, then end-of-turn bookkeeping.
inline StepResult apply_action(const GameState& s, const Action& a) {
  if (s.outcome != Outcome::Ongoing) throw Error(ErrorCode::TerminalState, "game already finished");
  if (!is_legal(s, a)) throw Error(ErrorCode::IllegalAction, "action " + to_string(a) + " is not legal");
  return apply_unchecked(s, a);
}

}  // namespace md2
