#include "oracles.hpp"
#include "vnav/planner.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace vnav;

namespace {

GridMap map_from_rows(const std::vector<std::string>& rows, double cell = 0.001) {
  const int nrows = static_cast<int>(rows.size());
  const int ncols = static_cast<int>(rows.front().size());
  GridMap::Cells cells(nrows, ncols);
  for (int r = 0; r < nrows; ++r)
    for (int c = 0; c < ncols; ++c) cells(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] == '1';
  return GridMap(GeoTransform::from_corner(0.0, 0.0, ncols, nrows, cell), cells);
}

GridMap water(int ncols, int nrows) { return map_from_rows(std::vector<std::string>(nrows, std::string(ncols, '0'))); }

/// Random maze on a (2n+1)-cell grid by randomized depth-first carving.
GridMap maze(int n, std::uint64_t seed) {
  const int size = 2 * n + 1;
  std::vector<std::string> rows(size, std::string(size, '1'));
  Rng rng(seed);
  std::vector<std::pair<int, int>> stack{{0, 0}};
  std::vector<char> seen(static_cast<std::size_t>(n * n), 0);
  seen[0] = 1;
  rows[1][1] = '0';
  while (!stack.empty()) {
    const auto [r, c] = stack.back();
    std::vector<std::pair<int, int>> options;
    for (auto [dr, dc] : {std::pair{-1, 0}, {1, 0}, {0, -1}, {0, 1}}) {
      const int nr = r + dr, nc = c + dc;
      if (nr >= 0 && nc >= 0 && nr < n && nc < n && !seen[static_cast<std::size_t>(nr * n + nc)]) options.push_back({nr, nc});
    }
    if (options.empty()) {
      stack.pop_back();
      continue;
    }
    const auto [nr, nc] = options[rng.below(options.size())];
    seen[static_cast<std::size_t>(nr * n + nc)] = 1;
    rows[static_cast<std::size_t>(2 * nr + 1)][static_cast<std::size_t>(2 * nc + 1)] = '0';
    rows[static_cast<std::size_t>(r + nr + 1)][static_cast<std::size_t>(c + nc + 1)] = '0';
    stack.push_back({nr, nc});
  }
  return map_from_rows(rows);
}

double path_length(const std::vector<Point>& pts) {
  double total = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) total += (pts[i] - pts[i - 1]).norm();
  return total;
}

void check_against_dijkstra(const PlanningGraph& g, const NextHopMatrix& m) {
  for (int s = 0; s < g.node_count(); ++s) {
    const auto ref = oracle::dijkstra(g, s);
    for (int t = 0; t < g.node_count(); ++t) {
      if (std::isinf(ref[static_cast<std::size_t>(t)])) {
        CHECK_FALSE(m.reachable(s, t));
        continue;
      }
      REQUIRE(m.reachable(s, t));
      CHECK(m.dist(s, t) == doctest::Approx(ref[static_cast<std::size_t>(t)]).epsilon(1e-9));
    }
  }
}

}  // namespace

TEST_SUITE("planner") {
  TEST_CASE("all-water 8x8 at f=1") {
    const auto g = build_planning_graph(water(8, 8), 1);
    CHECK(g.node_count() == 64);
    for (int r = 1; r < 7; ++r)
      for (int c = 1; c < 7; ++c) CHECK(g.adjacency[static_cast<std::size_t>(g.node_at(r, c))].size() == 8);
    CHECK(g.adjacency[static_cast<std::size_t>(g.node_at(0, 0))].size() == 3);
  }

  TEST_CASE("node count bound and majority rule") {
    const auto g = build_planning_graph(water(200, 150), 4);
    CHECK(g.node_count() <= 50 * 38);
    CHECK(g.coarse_cols == 50);
    CHECK(g.coarse_rows == 38);

    const GridMap m = generate_map(7, {});
    const auto gm = build_planning_graph(m, 4);
    for (int i = 0; i < gm.node_count(); ++i) {
      const CellIndex b = gm.blocks[static_cast<std::size_t>(i)];
      int wet = 0;
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) wet += m.is_water(b.row * 4 + r, b.col * 4 + c);
      CHECK(wet > 8);
      for (const auto& e : gm.adjacency[static_cast<std::size_t>(i)]) {
        const CellIndex o = gm.blocks[static_cast<std::size_t>(e.to)];
        CHECK(std::max(std::abs(o.row - b.row), std::abs(o.col - b.col)) == 1);
      }
    }
  }

  TEST_CASE("all-land map is rejected") {
    CHECK_THROWS_AS(build_planning_graph(map_from_rows({"111", "111"}), 1), PlanError);
  }

  TEST_CASE("three-node path") {
    const auto g = build_planning_graph(map_from_rows({"000"}, 1.0), 1);
    const auto m = floyd_all_pairs(g);
    CHECK(m.dist(0, 2) == 2.0);
    CHECK(m.next(0, 2) == 1);
    CHECK(m.node_path(0, 2) == std::vector<int>{0, 1, 2});
  }

  TEST_CASE("disconnected pair is unreachable") {
    const auto g = build_planning_graph(map_from_rows({"00100", "00100", "00100"}), 1);
    const auto m = floyd_all_pairs(g);
    const int a = g.node_at(0, 0), b = g.node_at(0, 4);
    CHECK_FALSE(m.reachable(a, b));
    CHECK(m.next(a, b) == NextHopMatrix::kUnreachable);
    CHECK(m.node_path(a, b).empty());
    CHECK_THROWS_AS(shortest_path(g, m, g.centers[static_cast<std::size_t>(a)], g.centers[static_cast<std::size_t>(b)]),
                    PlanError);
  }

  TEST_CASE("floyd equals dijkstra on random mazes and generated maps") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto g = build_planning_graph(maze(15, seed), 1);
      const auto m = floyd_all_pairs(g);
      check_against_dijkstra(g, m);
    }
    MapGenParams p;
    p.ncols = 60;
    p.nrows = 48;
    const auto g = build_planning_graph(generate_map(11, p), 2);
    check_against_dijkstra(g, floyd_all_pairs(g));
  }

  TEST_CASE("matrix invariants") {
    const GridMap map = generate_map(7, {});
    const auto g = build_planning_graph(map, 4);
    const auto m = floyd_all_pairs(g);
    Rng rng(2);
    const int n = g.node_count();
    for (int i = 0; i < n; ++i) CHECK(m.dist(i, i) == 0.0);
    for (int k = 0; k < 2000; ++k) {
      const int i = static_cast<int>(rng.below(n)), j = static_cast<int>(rng.below(n)), l = static_cast<int>(rng.below(n));
      CHECK(m.dist(i, j) == doctest::Approx(m.dist(j, i)).epsilon(1e-12));
      CHECK(m.dist(i, l) <= m.dist(i, j) + m.dist(j, l) + 1e-12);
      const auto path = m.node_path(i, j);
      REQUIRE(!path.empty());
      double len = 0.0;
      for (std::size_t s = 1; s < path.size(); ++s)
        len += (g.centers[static_cast<std::size_t>(path[s])] - g.centers[static_cast<std::size_t>(path[s - 1])]).norm();
      CHECK(len == doctest::Approx(m.dist(i, j)).epsilon(1e-9));
    }
  }

  TEST_CASE("shortest path shapes") {
    const auto open = water(40, 8);
    const auto g = build_planning_graph(open, 4);
    const auto m = floyd_all_pairs(g);
    const Point a = open.cell_center({1, 1});
    SUBCASE("same node") {
      const Point b = open.cell_center({2, 2});
      CHECK(shortest_path(g, m, a, b) == std::vector<Point>{a, b});
    }
    SUBCASE("straight corridor is collinear") {
      const Point b = open.cell_center({1, 38});
      const auto path = shortest_path(g, m, a, b);
      CHECK(path.front() == a);
      CHECK(path.back() == b);
      for (std::size_t i = 1; i + 1 < path.size(); ++i) CHECK(path[i].y() == doctest::Approx(path[1].y()));
    }
  }

  TEST_CASE("L-shaped channel turns at the corner") {
    std::vector<std::string> rows(24, std::string(24, '1'));
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 24; ++c) rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = '0';
    for (int r = 0; r < 24; ++r)
      for (int c = 20; c < 24; ++c) rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = '0';
    const GridMap map = map_from_rows(rows);
    const auto g = build_planning_graph(map, 4);
    const auto m = floyd_all_pairs(g);
    const Point a = map.cell_center({1, 1}), b = map.cell_center({22, 22});
    const auto path = shortest_path(g, m, a, b);
    const int src = g.node_of(a), dst = g.node_of(b);
    const double coarse = 4 * 0.001;
    const auto hops = oracle::bfs_hops(g, src);
    CHECK(static_cast<int>(m.node_path(src, dst).size()) - 1 == hops[static_cast<std::size_t>(dst)]);
    const double inner = path_length(std::vector<Point>(path.begin() + 1, path.end() - 1));
    CHECK(std::abs(inner - m.dist(src, dst)) <= coarse + 1e-12);
    bool along_top = false, down_side = false;
    for (const auto& p : path) {
      const int node = g.node_of(p);
      along_top = along_top || g.blocks[static_cast<std::size_t>(node)].row == 0;
      down_side = down_side || g.blocks[static_cast<std::size_t>(node)].col == 5;
    }
    CHECK(along_top);
    CHECK(down_side);
    for (const auto& p : path) CHECK(map.is_water(p));
  }

  TEST_CASE("rdp basics") {
    const std::vector<Point> line{{0, 0}, {1, 1}, {2, 2}};
    CHECK(rdp_simplify(line, 0.001) == std::vector<Point>{{0, 0}, {2, 2}});
    const std::vector<Point> bent{{0, 0}, {1, 0.1}, {2, -0.05}, {3, 0}};
    CHECK(rdp_simplify(bent, 0.0) == bent);
    CHECK(rdp_simplify(std::vector<Point>{{0, 0}, {1, 0}}, 0.5).size() == 2);
    const std::vector<Point> loop{{0, 0}, {1, 0}, {0, 0}};
    CHECK(rdp_simplify(loop, 0.5) == loop);
  }

  TEST_CASE("rdp on a noisy arc matches the reference") {
    Rng rng(8);
    std::vector<Point> arc;
    for (int i = 0; i < 100; ++i) {
      const double t = i / 99.0 * 3.0;
      arc.emplace_back(0.05 * std::cos(t) + rng.uniform(-5e-4, 5e-4), 0.05 * std::sin(t) + rng.uniform(-5e-4, 5e-4));
    }
    const auto out = rdp_simplify(arc, 0.001);
    CHECK(out == oracle::rdp(arc, 0.001));
    for (const auto& p : arc) CHECK(oracle::polyline_distance(p, out) <= 0.001 + 1e-15);

    std::vector<Eigen::Vector2f> arc_f;
    for (const auto& p : arc) arc_f.push_back(p.cast<float>());
    CHECK(rdp_simplify<float>(std::span<const Eigen::Vector2f>(arc_f), 0.001f).size() >= 2);
  }

  TEST_CASE("make_plan") {
    const GridMap open = water(60, 40);
    const auto g = build_planning_graph(open, 4);
    const auto m = floyd_all_pairs(g);
    SUBCASE("open water collapses to the destination") {
      Rng rng(3);
      for (int k = 0; k < 50; ++k) {
        const Point a = open.cell_center({static_cast<int>(rng.below(40)), static_cast<int>(rng.below(60))});
        const Point b = open.cell_center({static_cast<int>(rng.below(40)), static_cast<int>(rng.below(60))});
        const PlanSpec plan = make_plan(open, g, m, a, b);
        CHECK(plan.waypoints == std::vector<Point>{b});
      }
    }
    SUBCASE("origin equals destination") {
      const Point a = open.cell_center({5, 5});
      CHECK(make_plan(open, g, m, a, a).waypoints == std::vector<Point>{a});
    }
    SUBCASE("endpoint on land") {
      CHECK_THROWS_AS(make_plan(open, g, m, Point(-1, -1), open.cell_center({5, 5})), std::invalid_argument);
    }
  }

  TEST_CASE("channel with two bends gives three waypoints") {
    // Z-shaped channel: east along the top, south down the right side, west along the bottom.
    std::vector<std::string> rows(48, std::string(48, '1'));
    auto carve = [&](int r0, int r1, int c0, int c1) {
      for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c) rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = '0';
    };
    carve(4, 11, 4, 43);
    carve(4, 43, 36, 43);
    carve(36, 43, 4, 43);
    const GridMap map = map_from_rows(rows);
    const auto g = build_planning_graph(map, 4);
    const auto m = floyd_all_pairs(g);
    const Point a = map.cell_center({8, 6}), b = map.cell_center({40, 6});
    const PlanSpec plan = make_plan(map, g, m, a, b);
    REQUIRE(plan.waypoints.size() == 3);
    CHECK(plan.waypoints.back() == b);
    // Bends sit in the two right-hand corners of the channel.
    CHECK(plan.waypoints[0].x() > map.cell_center({0, 30}).x());
    CHECK(plan.waypoints[0].y() > map.cell_center({16, 0}).y());
    CHECK(plan.waypoints[1].x() > map.cell_center({0, 30}).x());
    CHECK(plan.waypoints[1].y() < map.cell_center({32, 0}).y());
    Point prev = a;
    for (const auto& w : plan.waypoints) {
      CHECK(line_of_sight(map, prev, w));
      prev = w;
    }
  }

  TEST_CASE("make_plan is deterministic") {
    const GridMap map = generate_map(7, {});
    const auto g = build_planning_graph(map, 4);
    const auto m = floyd_all_pairs(g);
    const Point a = g.centers.front(), b = g.centers.back();
    if (m.reachable(0, g.node_count() - 1)) {
      const auto p1 = make_plan(map, g, m, a, b), p2 = make_plan(map, g, m, a, b);
      CHECK(p1.waypoints == p2.waypoints);
    }
  }

  TEST_CASE("plan cache round trip and validation") {
    const GridMap map = generate_map(7, {});
    const auto g = build_planning_graph(map, 4);
    const auto m = floyd_all_pairs(g);
    const auto dir = std::filesystem::temp_directory_path() / "vnav_plan_cache_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / plan_cache_filename(map.content_hash(), 4);
    save_plan_cache(path, m, map.content_hash());

    const PlanCache back = load_plan_cache(path);
    CHECK(back.matrix == m);
    CHECK(back.map_hash == map.content_hash());
    CHECK(load_plan_cache(path, map.content_hash()) == m);
    CHECK_THROWS_AS(load_plan_cache(path, map.content_hash() ^ 1U), PlanCacheError);

    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    in.close();
    CHECK(bytes.substr(0, 4) == "VNPC");
    const std::size_t n = static_cast<std::size_t>(m.node_count());
    CHECK(bytes.size() == 4 + 1 + 4 + n * n * 8 + n * n * 4 + 8);
    {
      std::ofstream out(path, std::ios::binary);
      out << bytes.substr(0, bytes.size() - 3);
    }
    CHECK_THROWS_AS(load_plan_cache(path), PlanCacheError);
    std::filesystem::remove_all(dir);
  }
}
