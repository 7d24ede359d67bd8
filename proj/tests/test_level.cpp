#include <gtest/gtest.h>

#include <algorithm>
#include <queue>

#include "support.hpp"

using namespace md2;
using namespace md2::testing;

namespace {

// Closed-square test in doubled coordinates: tile (i, j) covers
// [2i, 2i+2] x [2j, 2j+2], tile centres sit at odd coordinates.
bool segment_touches_tile(Coord a, Coord b, int i, int j) {
  const long long ax = 2 * a.x + 1, ay = 2 * a.y + 1, bx = 2 * b.x + 1, by = 2 * b.y + 1;
  const long long x0 = 2 * i, x1 = 2 * i + 2, y0 = 2 * j, y1 = 2 * j + 2;
  if (std::max(ax, bx) < x0 || std::min(ax, bx) > x1) return false;
  if (std::max(ay, by) < y0 || std::min(ay, by) > y1) return false;
  auto side = [&](long long px, long long py) {
    const long long c = (bx - ax) * (py - ay) - (by - ay) * (px - ax);
    return (c > 0) - (c < 0);
  };
  const int s[4] = {side(x0, y0), side(x1, y0), side(x0, y1), side(x1, y1)};
  const bool allPos = std::all_of(s, s + 4, [](int v) { return v > 0; });
  const bool allNeg = std::all_of(s, s + 4, [](int v) { return v < 0; });
  return !(allPos || allNeg);
}

bool brute_sight(const Level& lv, Coord a, Coord b) {
  for (int j = 0; j < lv.height; ++j)
    for (int i = 0; i < lv.width; ++i)
      if (segment_touches_tile(a, b, i, j) && lv.is_wall({i, j})) return false;
  return true;
}

int brute_bfs(const Level& lv, Coord from, Coord to) {
  if (lv.is_wall(from) || lv.is_wall(to)) return lv.unreachable();
  std::vector<int> dist(lv.tile_count(), -1);
  std::queue<Coord> q;
  dist[lv.index(from)] = 0;
  q.push(from);
  while (!q.empty()) {
    const Coord c = q.front();
    q.pop();
    if (c == to) return dist[lv.index(c)];
    for (Direction d : kDirections) {
      const Coord n = c + offset(d);
      if (lv.is_wall(n) || dist[lv.index(n)] >= 0) continue;
      dist[lv.index(n)] = dist[lv.index(c)] + 1;
      q.push(n);
    }
  }
  return lv.unreachable();
}

std::string random_grid(SplitMix64& rng, int w, int h, double wallRate) {
  std::string text;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) text += rng.uniform() < wallRate ? '#' : '.';
    text += '\n';
  }
  text[0] = '@';
  text[text.size() - 2] = 'S';
  return text;
}

}  // namespace

TEST(LoadMap, MissingExitIsReported) {
  try {
    load_map("###\n#@#\n###\n");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingExit);
  }
}

TEST(LoadMap, MinimalOneRowMap) {
  const auto lv = load_map("@.S");
  EXPECT_EQ(lv->width, 3);
  EXPECT_EQ(lv->height, 1);
  EXPECT_EQ(lv->heroStart, (Coord{0, 0}));
  EXPECT_EQ(lv->exit, (Coord{2, 0}));
  EXPECT_TRUE(lv->items.empty());
  EXPECT_TRUE(lv->monsters.empty());
}

TEST(LoadMap, DigitsFormPortalPair) {
  const auto lv = load_map("@1..1S");
  ASSERT_EQ(lv->items.size(), 2u);
  for (const auto& it : lv->items) {
    EXPECT_EQ(it.kind, ItemKind::Portal);
    EXPECT_EQ(it.pairId, 1);
  }
  EXPECT_EQ(lv->portal_twin({1, 0}), (Coord{4, 0}));
  EXPECT_EQ(lv->portal_twin({4, 0}), (Coord{1, 0}));
  EXPECT_FALSE(lv->portal_twin({2, 0}).has_value());
}

TEST(LoadMap, ErrorCodes) {
  auto code_of = [](const char* text) {
    try {
      load_map(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  EXPECT_EQ(code_of("@.X.S"), ErrorCode::UnknownGlyph);
  EXPECT_EQ(code_of("@1..S"), ErrorCode::UnpairedPortal);
  EXPECT_EQ(code_of("@111S"), ErrorCode::UnpairedPortal);
  EXPECT_EQ(code_of("..S"), ErrorCode::MissingHero);
  EXPECT_EQ(code_of("@.S\n@.."), ErrorCode::DuplicateHero);
  EXPECT_EQ(code_of("@SS"), ErrorCode::DuplicateExit);
  EXPECT_EQ(code_of("@.S\n.."), ErrorCode::NonRectangular);
  EXPECT_EQ(code_of(""), ErrorCode::EmptyMap);
}

TEST(LoadMap, AllGlyphsAndCarriageReturns) {
  const auto lv = load_map("#@$+^gwbomS\r\n#.........#\r\n\n");
  EXPECT_EQ(lv->height, 2);
  EXPECT_EQ(lv->items.size(), 3u);
  ASSERT_EQ(lv->monsters.size(), 5u);
  EXPECT_EQ(lv->monsters[0].kind, MonsterKind::Goblin);
  EXPECT_EQ(lv->monsters[1].kind, MonsterKind::GoblinWizard);
  EXPECT_EQ(lv->monsters[2].kind, MonsterKind::Blob);
  EXPECT_EQ(lv->monsters[3].kind, MonsterKind::Ogre);
  EXPECT_EQ(lv->monsters[4].kind, MonsterKind::Minitaur);
}

TEST(LoadMap, TextRoundTrip) {
  for (const auto& lv : reference_maps()) {
    const auto again = load_map(lv->to_text(), lv->name);
    EXPECT_EQ(again->to_text(), lv->to_text());
  }
}

TEST(LoadMap, FileNameBecomesMapName) {
  const auto lv = load_map_file(map_path("arena"));
  EXPECT_EQ(lv->name, "arena");
  EXPECT_THROW(load_map_file(map_path("no_such_map")), Error);
}

TEST(ReferenceMaps, StructuralConstraints) {
  for (const auto& lv : reference_maps()) {
    SCOPED_TRACE(lv->name);
    int treasures = 0;
    for (const auto& it : lv->items) treasures += it.kind == ItemKind::Treasure ? 1 : 0;
    EXPECT_GE(lv->monsters.size(), 5u);
    EXPECT_LE(lv->monsters.size(), 6u);
    EXPECT_GE(treasures, 6);
    EXPECT_LE(treasures, 9);
    EXPECT_LT(lv->distance(lv->heroStart, lv->exit), lv->unreachable());
  }
}

TEST(LineOfSight, StraightCorridorIsClear) {
  const auto s = state_of("@....S");
  EXPECT_TRUE(line_of_sight(s, {0, 0}, {5, 0}));
}

TEST(LineOfSight, WallOnMidpointBlocks) {
  const auto s = state_of("@.#.S");
  EXPECT_FALSE(line_of_sight(s, {0, 0}, {4, 0}));
  EXPECT_TRUE(line_of_sight(s, {0, 0}, {1, 0}));
}

TEST(LineOfSight, OutOfBoundsThrows) {
  const auto s = state_of("@.S");
  EXPECT_THROW(line_of_sight(s, {0, 0}, {3, 0}), Error);
}

TEST(LineOfSight, DiagonalAcrossCornerMatchesOracle) {
  // exact diagonal through the shared corner of two walls
  const auto s = state_of(
      "@....\n"
      ".#...\n"
      "..#..\n"
      "...#.\n"
      "....S\n");
  const Level& lv = s.map();
  EXPECT_EQ(line_of_sight(s, {0, 2}, {2, 0}), brute_sight(lv, {0, 2}, {2, 0}));
  EXPECT_EQ(line_of_sight(s, {0, 1}, {1, 0}), brute_sight(lv, {0, 1}, {1, 0}));
  for (int a = 0; a < lv.tile_count(); ++a)
    for (int b = 0; b < lv.tile_count(); ++b)
      EXPECT_EQ(lv.sight(lv.coord(a), lv.coord(b)), brute_sight(lv, lv.coord(a), lv.coord(b)));
}

TEST(LineOfSight, CornerTouchCountsBothSides) {
  // segment (0,0)->(2,2) passes the corners shared with (1,0) and (0,1)
  const auto blocked = state_of(
      "@#.\n"
      "...\n"
      "..S\n");
  EXPECT_FALSE(line_of_sight(blocked, {0, 0}, {2, 2}));
  const auto clear = state_of(
      "@..\n"
      "...\n"
      "..S\n");
  EXPECT_TRUE(line_of_sight(clear, {0, 0}, {2, 2}));
}

TEST(LineOfSight, RandomGridsMatchOracleAndAreSymmetric) {
  SplitMix64 rng(11);
  for (int round = 0; round < 30; ++round) {
    const auto lv = load_map(random_grid(rng, 5 + round % 4, 5 + round % 3, 0.25));
    for (int a = 0; a < lv->tile_count(); ++a) {
      for (int b = 0; b < lv->tile_count(); ++b) {
        const Coord ca = lv->coord(a), cb = lv->coord(b);
        ASSERT_EQ(lv->sight(ca, cb), brute_sight(*lv, ca, cb)) << lv->to_text() << ca.x << ',' << ca.y << " -> " << cb.x
                                                              << ',' << cb.y;
        ASSERT_EQ(lv->sight(ca, cb), lv->sight(cb, ca));
      }
    }
  }
}

TEST(LineOfSight, ReferenceMapsMatchOracleOnSampledPairs) {
  SplitMix64 rng(5);
  for (const auto& lv : reference_maps()) {
    for (int k = 0; k < 2000; ++k) {
      const Coord a = lv->coord(static_cast<int>(rng.below(lv->tile_count())));
      const Coord b = lv->coord(static_cast<int>(rng.below(lv->tile_count())));
      ASSERT_EQ(lv->sight(a, b), brute_sight(*lv, a, b)) << lv->name;
    }
  }
}

TEST(Distances, MatchBreadthFirstOracle) {
  SplitMix64 rng(3);
  for (int round = 0; round < 20; ++round) {
    const auto lv = load_map(random_grid(rng, 6, 5, 0.3));
    for (int a = 0; a < lv->tile_count(); ++a)
      for (int b = 0; b < lv->tile_count(); ++b)
        ASSERT_EQ(lv->distance(lv->coord(a), lv->coord(b)), brute_bfs(*lv, lv->coord(a), lv->coord(b)));
  }
  for (const auto& lv : reference_maps())
    for (int b = 0; b < lv->tile_count(); ++b)
      ASSERT_EQ(lv->distance(lv->heroStart, lv->coord(b)), brute_bfs(*lv, lv->heroStart, lv->coord(b)));
}

TEST(Distances, UnreachableUsesSentinel) {
  const auto lv = load_map("@#S");
  EXPECT_EQ(lv->distance({0, 0}, {2, 0}), lv->unreachable());
  EXPECT_EQ(lv->unreachable(), 4);
}
