#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "md2/types.hpp"

namespace md2 {

enum class TileKind : std::uint8_t { Wall, Floor };

enum class ItemKind : std::uint8_t { None, Treasure, Potion, Trap, Portal };

enum class MonsterKind : std::uint8_t { Goblin, GoblinWizard, Blob, Ogre, Minitaur };

constexpr std::string_view to_string(MonsterKind kind) {
  switch (kind) {
    case MonsterKind::Goblin: return "goblin";
    case MonsterKind::GoblinWizard: return "goblin_wizard";
    case MonsterKind::Blob: return "blob";
    case MonsterKind::Ogre: return "ogre";
    case MonsterKind::Minitaur: return "minitaur";
  }
  return "?";
}

constexpr char monster_glyph(MonsterKind kind) {
  switch (kind) {
    case MonsterKind::Goblin: return 'g';
    case MonsterKind::GoblinWizard: return 'w';
    case MonsterKind::Blob: return 'b';
    case MonsterKind::Ogre: return 'o';
    case MonsterKind::Minitaur: return 'm';
  }
  return '?';
}

struct ItemPlacement {
  ItemKind kind = ItemKind::None;
  Coord pos;
  int pairId = -1;  // portals only
};

struct MonsterPlacement {
  MonsterKind kind = MonsterKind::Goblin;
  Coord pos;
};

/// Visits every tile whose closed unit square touches the segment joining the
/// centres of `from` and `to`. When the segment passes exactly through a tile
/// corner both side tiles are visited. Visiting stops early if `visit` returns false.
template <typename Visitor>
bool walk_supercover(Coord from, Coord to, Visitor&& visit) {
  const int dx = to.x - from.x;
  const int dy = to.y - from.y;
  const int nx = std::abs(dx);
  const int ny = std::abs(dy);
  const int sx = dx > 0 ? 1 : -1;
  const int sy = dy > 0 ? 1 : -1;
  Coord p = from;
  if (!visit(p)) return false;
  int ix = 0;
  int iy = 0;
  while (ix < nx || iy < ny) {
    const long long decision = static_cast<long long>(1 + 2 * ix) * ny - static_cast<long long>(1 + 2 * iy) * nx;
    if (decision == 0) {
      if (!visit(Coord{p.x + sx, p.y})) return false;
      if (!visit(Coord{p.x, p.y + sy})) return false;
      p.x += sx;
      p.y += sy;
      ++ix;
      ++iy;
    } else if (decision < 0) {
      p.x += sx;
      ++ix;
    } else {
      p.y += sy;
      ++iy;
    }
    if (!visit(p)) return false;
  }
  return true;
}

/// Immutable dungeon layout. Walls never change during play, so shortest-path
/// distances and line of sight between every pair of tiles are tabulated once
/// at load time.
class Level {
 public:
  std::string name;
  int width = 0;
  int height = 0;
  std::vector<TileKind> tiles;
  Coord heroStart;
  Coord exit;
  std::vector<ItemPlacement> items;
  std::vector<MonsterPlacement> monsters;

  int tile_count() const { return width * height; }
  bool in_bounds(Coord c) const { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; }
  int index(Coord c) const { return c.y * width + c.x; }
  Coord coord(int idx) const { return {idx % width, idx / width}; }
  bool is_wall(Coord c) const { return !in_bounds(c) || tiles[index(c)] == TileKind::Wall; }

  /// Sentinel distance for unreachable pairs.
  int unreachable() const { return tile_count() + 1; }

  /// 4-connected shortest-path length over non-wall tiles.
  int distance(Coord a, Coord b) const {
    if (!in_bounds(a) || !in_bounds(b)) return unreachable();
    return distances_[static_cast<std::size_t>(index(a)) * tile_count() + index(b)];
  }

  bool sight(Coord a, Coord b) const {
    if (!in_bounds(a) || !in_bounds(b)) return false;
    return sight_[static_cast<std::size_t>(index(a)) * tile_count() + index(b)] != 0;
  }

  std::optional<Coord> portal_twin(Coord c) const {
    if (!in_bounds(c)) return std::nullopt;
    const int twin = portalTwin_[index(c)];
    if (twin < 0) return std::nullopt;
    return coord(twin);
  }

  /// Recomputes the distance, sight and portal tables. Called by the loader.
  void build_tables() {
    const int n = tile_count();
    distances_.assign(static_cast<std::size_t>(n) * n, static_cast<std::int32_t>(unreachable()));
    std::vector<int> queue(n);
    for (int src = 0; src < n; ++src) {
      if (tiles[src] == TileKind::Wall) continue;
      auto* row = &distances_[static_cast<std::size_t>(src) * n];
      int head = 0;
      int tail = 0;
      row[src] = 0;
      queue[tail++] = src;
      while (head < tail) {
        const int cur = queue[head++];
        const Coord c = coord(cur);
        for (Direction d : kDirections) {
          const Coord nb = c + offset(d);
          if (is_wall(nb)) continue;
          const int ni = index(nb);
          if (row[ni] != unreachable()) continue;
          row[ni] = row[cur] + 1;
          queue[tail++] = ni;
        }
      }
    }

    sight_.assign(static_cast<std::size_t>(n) * n, 0);
    for (int a = 0; a < n; ++a) {
      for (int b = a; b < n; ++b) {
        const bool clear = walk_supercover(coord(a), coord(b), [&](Coord c) { return !is_wall(c); });
        sight_[static_cast<std::size_t>(a) * n + b] = clear;
        sight_[static_cast<std::size_t>(b) * n + a] = clear;
      }
    }

    portalTwin_.assign(n, -1);
    for (const auto& a : items) {
      if (a.kind != ItemKind::Portal) continue;
      for (const auto& b : items) {
        if (b.kind == ItemKind::Portal && b.pairId == a.pairId && b.pos != a.pos) portalTwin_[index(a.pos)] = index(b.pos);
      }
    }
  }

  /// Renders the layout back to the ASCII map format.
  std::string to_text() const {
    std::vector<std::string> rows(height, std::string(width, '.'));
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        if (tiles[index({x, y})] == TileKind::Wall) rows[y][x] = '#';
    rows[heroStart.y][heroStart.x] = '@';
    rows[exit.y][exit.x] = 'S';
    for (const auto& it : items) {
      char g = '.';
      switch (it.kind) {
        case ItemKind::Treasure: g = '$'; break;
        case ItemKind::Potion: g = '+'; break;
        case ItemKind::Trap: g = '^'; break;
        case ItemKind::Portal: g = static_cast<char>('0' + it.pairId); break;
        case ItemKind::None: break;
      }
      rows[it.pos.y][it.pos.x] = g;
    }
    for (const auto& m : monsters) rows[m.pos.y][m.pos.x] = monster_glyph(m.kind);
    std::string out;
    for (const auto& r : rows) {
      out += r;
      out += '\n';
    }
    return out;
  }

 private:
  std::vector<std::int32_t> distances_;
  std::vector<std::uint8_t> sight_;
  std::vector<int> portalTwin_;
};

using LevelPtr = std::shared_ptr<const Level>;

/// Parses the ASCII map format. Trailing blank lines and carriage returns are ignored.
inline LevelPtr load_map(std::string_view text, std::string name = "map") {
  std::vector<std::string> rows;
  {
    std::string line;
    std::istringstream in{std::string(text)};
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      rows.push_back(line);
    }
    while (!rows.empty() && rows.back().empty()) rows.pop_back();
  }
  if (rows.empty() || rows.front().empty()) throw Error(ErrorCode::EmptyMap, "map '" + name + "' has no tiles");
  const std::size_t width = rows.front().size();
  for (std::size_t y = 0; y < rows.size(); ++y) {
    if (rows[y].size() != width)
      throw Error(ErrorCode::NonRectangular, "row " + std::to_string(y) + " has " + std::to_string(rows[y].size()) +
                                                 " tiles, expected " + std::to_string(width));
  }

  auto level = std::make_shared<Level>();
  level->name = std::move(name);
  level->width = static_cast<int>(width);
  level->height = static_cast<int>(rows.size());
  level->tiles.assign(width * rows.size(), TileKind::Floor);
  bool haveHero = false;
  bool haveExit = false;
  int portalCount[10] = {};

  for (int y = 0; y < level->height; ++y) {
    for (int x = 0; x < level->width; ++x) {
      const char g = rows[y][x];
      const Coord c{x, y};
      switch (g) {
        case '#': level->tiles[level->index(c)] = TileKind::Wall; break;
        case '.': break;
        case '@':
          if (haveHero) throw Error(ErrorCode::DuplicateHero, "second hero start at (" + std::to_string(x) + "," + std::to_string(y) + ")");
          haveHero = true;
          level->heroStart = c;
          break;
        case 'S':
          if (haveExit) throw Error(ErrorCode::DuplicateExit, "second exit at (" + std::to_string(x) + "," + std::to_string(y) + ")");
          haveExit = true;
          level->exit = c;
          break;
        case '$': level->items.push_back({ItemKind::Treasure, c}); break;
        case '+': level->items.push_back({ItemKind::Potion, c}); break;
        case '^': level->items.push_back({ItemKind::Trap, c}); break;
        case 'g': level->monsters.push_back({MonsterKind::Goblin, c}); break;
        case 'w': level->monsters.push_back({MonsterKind::GoblinWizard, c}); break;
        case 'b': level->monsters.push_back({MonsterKind::Blob, c}); break;
        case 'o': level->monsters.push_back({MonsterKind::Ogre, c}); break;
        case 'm': level->monsters.push_back({MonsterKind::Minitaur, c}); break;
        default:
          if (g >= '0' && g <= '9') {
            level->items.push_back({ItemKind::Portal, c, g - '0'});
            ++portalCount[g - '0'];
            break;
          }
          throw Error(ErrorCode::UnknownGlyph, std::string("glyph '") + g + "' at (" + std::to_string(x) + "," +
                                                   std::to_string(y) + ")");
      }
    }
  }
  if (!haveHero) throw Error(ErrorCode::MissingHero, "map '" + level->name + "' has no '@'");
  if (!haveExit) throw Error(ErrorCode::MissingExit, "map '" + level->name + "' has no 'S'");
  for (int d = 0; d < 10; ++d) {
    if (portalCount[d] != 0 && portalCount[d] != 2)
      throw Error(ErrorCode::UnpairedPortal, "portal digit " + std::to_string(d) + " appears " +
                                                 std::to_string(portalCount[d]) + " time(s)");
  }
  level->build_tables();
  return level;
}

inline LevelPtr load_map_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open map file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  std::string name = path;
  if (auto slash = name.find_last_of('/'); slash != std::string::npos) name = name.substr(slash + 1);
  if (auto dot = name.find_last_of('.'); dot != std::string::npos) name = name.substr(0, dot);
  return load_map(buf.str(), name);
}

}  // namespace md2
