#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "md2/level.hpp"
#include "md2/types.hpp"

namespace md2 {

inline constexpr int kMaxHeroHp = 10;
inline constexpr int kImmortalHp = -1;
inline constexpr int kStunTurns = 5;
inline constexpr int kMaxBlobLevel = 3;

struct MonsterState {
  MonsterKind kind = MonsterKind::Goblin;
  Coord pos;
  int hp = 1;          // kImmortalHp for the minitaur
  int blobLevel = 1;   // blobs only
  int stunTurns = 0;   // minitaur only
  bool alive = true;

  bool stunned() const { return stunTurns > 0; }

  friend bool operator==(const MonsterState&, const MonsterState&) = default;
};

inline MonsterState spawn_monster(MonsterKind kind, Coord pos) {
  MonsterState m;
  m.kind = kind;
  m.pos = pos;
  switch (kind) {
    case MonsterKind::Goblin:
    case MonsterKind::GoblinWizard: m.hp = 1; break;
    case MonsterKind::Blob: m.hp = 1; break;
    case MonsterKind::Ogre: m.hp = 2; break;
    case MonsterKind::Minitaur: m.hp = kImmortalHp; break;
  }
  return m;
}

/// Damage dealt to the hero on contact.
inline int contact_damage(const MonsterState& m) {
  switch (m.kind) {
    case MonsterKind::Goblin: return 1;
    case MonsterKind::GoblinWizard: return 0;
    case MonsterKind::Blob: return m.blobLevel;
    case MonsterKind::Ogre: return 2;
    case MonsterKind::Minitaur: return m.stunned() ? 0 : 1;
  }
  return 0;
}

enum class Outcome : std::uint8_t { Ongoing, Won, Dead };

constexpr std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Ongoing: return "ongoing";
    case Outcome::Won: return "won";
    case Outcome::Dead: return "dead";
  }
  return "?";
}

struct Javelin {
  bool held = true;
  Coord pos;  // meaningful only when !held

  friend bool operator==(const Javelin&, const Javelin&) = default;
};

/// Complete world snapshot. Living monsters are kept sorted row-major by
/// position between turns; dead ones are dropped.
struct GameState {
  LevelPtr level;
  Coord heroPos;
  int heroHp = kMaxHeroHp;
  int treasureScore = 0;
  Javelin javelin;
  std::vector<MonsterState> monsters;
  std::vector<ItemKind> items;  // one entry per tile
  int turn = 0;
  Outcome outcome = Outcome::Ongoing;
  int treasuresEatenByOgres = 0;

  const Level& map() const { return *level; }
  ItemKind item_at(Coord c) const { return level->in_bounds(c) ? items[level->index(c)] : ItemKind::None; }

  /// Index of the living monster on `c`, or -1.
  int monster_at(Coord c) const {
    for (std::size_t i = 0; i < monsters.size(); ++i)
      if (monsters[i].alive && monsters[i].pos == c) return static_cast<int>(i);
    return -1;
  }

  int count_items(ItemKind kind) const {
    return static_cast<int>(std::count(items.begin(), items.end(), kind));
  }

  int killable_monsters() const {
    int n = 0;
    for (const auto& m : monsters)
      if (m.alive && m.kind != MonsterKind::Minitaur) ++n;
    return n;
  }

  friend bool operator==(const GameState& a, const GameState& b) {
    const bool sameLevel = a.level == b.level || (a.level && b.level && a.level->name == b.level->name &&
                                                  a.level->to_text() == b.level->to_text());
    return sameLevel && a.heroPos == b.heroPos && a.heroHp == b.heroHp &&
           a.treasureScore == b.treasureScore && a.javelin == b.javelin && a.monsters == b.monsters &&
           a.items == b.items && a.turn == b.turn && a.outcome == b.outcome &&
           a.treasuresEatenByOgres == b.treasuresEatenByOgres;
  }
};

inline void sort_monsters(std::vector<MonsterState>& monsters) {
  std::stable_sort(monsters.begin(), monsters.end(),
                   [](const MonsterState& a, const MonsterState& b) { return a.pos < b.pos; });
}

inline GameState initial_state(const LevelPtr& level) {
  GameState s;
  s.level = level;
  s.heroPos = level->heroStart;
  s.items.assign(level->tile_count(), ItemKind::None);
  for (const auto& it : level->items) s.items[level->index(it.pos)] = it.kind;
  for (const auto& m : level->monsters) s.monsters.push_back(spawn_monster(m.kind, m.pos));
  sort_monsters(s.monsters);
  return s;
}

namespace detail {

inline void hash_state_body(Fnv1a& h, const GameState& s) {
  h.str(s.level ? s.level->name : std::string());
  h.i32(s.heroPos.x);
  h.i32(s.heroPos.y);
  h.i32(s.heroHp);
  h.i32(s.treasureScore);
  h.i32(s.javelin.held ? 1 : 0);
  h.i32(s.javelin.held ? -1 : s.javelin.pos.x);
  h.i32(s.javelin.held ? -1 : s.javelin.pos.y);
  h.i32(static_cast<std::int32_t>(s.outcome));
  h.i32(s.treasuresEatenByOgres);
  h.i32(static_cast<std::int32_t>(s.monsters.size()));
  for (const auto& m : s.monsters) {
    h.i32(static_cast<std::int32_t>(m.kind));
    h.i32(m.pos.x);
    h.i32(m.pos.y);
    h.i32(m.hp);
    h.i32(m.blobLevel);
    h.i32(m.stunTurns);
    h.i32(m.alive ? 1 : 0);
  }
  h.bytes(s.items.data(), s.items.size());
}

}  // namespace detail

/// Stable 64-bit digest of the canonical state serialization, turn included.
inline std::uint64_t state_hash(const GameState& s) {
  Fnv1a h;
  detail::hash_state_body(h, s);
  h.i32(s.turn);
  return h.value();
}

/// Digest that ignores the turn counter; two states with equal keys behave identically.
inline std::uint64_t position_key(const GameState& s) {
  Fnv1a h;
  detail::hash_state_body(h, s);
  return h.value();
}

inline std::string hash_hex(std::uint64_t v) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = kHex[v & 0xf];
    v >>= 4;
  }
  return out;
}

inline std::uint64_t parse_hash_hex(const std::string& text) {
  if (text.size() != 16) throw Error(ErrorCode::MalformedRecord, "state hash must be 16 hex digits");
  std::uint64_t v = 0;
  for (char c : text) {
    v <<= 4;
    if (c >= '0' && c <= '9') v |= static_cast<std::uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint64_t>(c - 'a' + 10);
    else throw Error(ErrorCode::MalformedRecord, "bad hex digit in state hash");
  }
  return v;
}

}  // namespace md2
