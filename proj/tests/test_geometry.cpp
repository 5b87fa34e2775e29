#include <doctest.h>

#include <cmath>
#include <vector>

#include "nnadapt/geometry.hpp"
#include "nnadapt/numeric.hpp"
#include "nnadapt/rng.hpp"

using namespace nnadapt;

namespace {

RealMatrix rows2(std::initializer_list<std::pair<double, double>> pts) {
  RealMatrix m(static_cast<int>(pts.size()), 2);
  int i = 0;
  for (auto [x, y] : pts) {
    m(i, 0) = x;
    m(i, 1) = y;
    ++i;
  }
  return m;
}

RealMatrix random_rows(int n, int d, SeededRng& rng) {
  RealMatrix m(n, d);
  for (double& v : m.data) v = rng.normal(0.0, 1.0);
  return m;
}

ConfidentSet explicit_set(std::vector<char> member) {
  ConfidentSet cs;
  cs.member = std::move(member);
  return cs;
}

}  // namespace

TEST_CASE("nearest_neighbor: picks the closest admissible row by cosine distance") {
  RealMatrix pool = rows2({{1.0, 0.0}, {0.0, 1.0}, {1.0, 0.1}});
  std::vector<double> query{1.0, 0.0};
  std::vector<char> excl{1, 0, 0};
  CHECK(nearest_neighbor(query, pool, excl) == 2);
  excl = {0, 0, 0};
  CHECK(nearest_neighbor(query, pool, excl) == 0);  // exact match wins
}

TEST_CASE("nearest_neighbor: ties break toward the lowest index") {
  RealMatrix pool = rows2({{1.0, 0.0}, {0.0, 1.0}, {1.0, 0.0}});
  std::vector<double> query{2.0, 0.0};  // parallel to rows 0 and 2
  std::vector<char> excl{0, 0, 0};
  CHECK(nearest_neighbor(query, pool, excl) == 0);
  excl = {1, 0, 0};
  CHECK(nearest_neighbor(query, pool, excl) == 2);
}

TEST_CASE("nearest_neighbor: zero pool rows are skipped and counted") {
  RealMatrix pool = rows2({{0.0, 0.0}, {0.0, 1.0}, {1.0, 0.0}});
  std::vector<double> query{1.0, 0.0};
  std::vector<char> excl{0, 0, 0};
  int skipped = 0;
  CHECK(nearest_neighbor(query, pool, excl, &skipped) == 2);
  CHECK(skipped == 1);
}

TEST_CASE("nearest_neighbor: degenerate inputs are rejected") {
  RealMatrix pool = rows2({{1.0, 0.0}, {0.0, 1.0}});
  std::vector<double> zero{0.0, 0.0};
  std::vector<char> none{0, 0};
  CHECK_THROWS_AS(nearest_neighbor(zero, pool, none), NumericError);
  std::vector<double> query{1.0, 0.0};
  std::vector<char> all{1, 1};
  CHECK_THROWS_AS(nearest_neighbor(query, pool, all), NumericError);
  std::vector<char> wrong{1};
  CHECK_THROWS_AS(nearest_neighbor(query, pool, wrong), NumericError);
  RealMatrix zeros(3, 2);
  std::vector<char> free3{0, 0, 0};
  CHECK_THROWS_AS(nearest_neighbor(query, zeros, free3), NumericError);  // every row skipped
}

TEST_CASE("static_nnh: two samples pair with each other") {
  RealMatrix h = rows2({{1.0, 0.0}, {0.9, 0.1}});
  auto nbrs = static_nnh(h);
  REQUIRE(nbrs.size() == 2);
  CHECK(nbrs[0].anchor == 0);
  CHECK(nbrs[0].neighbor == 1);
  CHECK(nbrs[1].anchor == 1);
  CHECK(nbrs[1].neighbor == 0);
  CHECK(nbrs[0].mode == NeighborMode::Nnh);
}

TEST_CASE("static_nnh: matches an exhaustive cosine search") {
  SeededRng rng(101);
  RealMatrix h = random_rows(200, 6, rng);
  h.set_row(17, h.row(4));  // duplicates must still resolve deterministically
  auto nbrs = static_nnh(h);
  REQUIRE(static_cast<int>(nbrs.size()) == 200);
  for (int i = 0; i < 200; ++i) {
    int best = -1;
    double best_dist = 0.0;
    for (int j = 0; j < 200; ++j) {
      if (j == i) continue;
      const double dist = cosine_distance(h.row(i), h.row(j));
      if (best < 0 || dist < best_dist) {
        best = j;
        best_dist = dist;
      }
    }
    CHECK(nbrs[static_cast<size_t>(i)].anchor == i);
    CHECK(nbrs[static_cast<size_t>(i)].neighbor == best);
  }
}

TEST_CASE("static_nnh: rejects single-row pools") {
  RealMatrix h(1, 3, 1.0);
  CHECK_THROWS_AS(static_nnh(h), NumericError);
}

TEST_CASE("dynamical_nnh: agrees with the static pairing at the cached point") {
  SeededRng rng(102);
  RealMatrix h = random_rows(40, 5, rng);
  auto fixed = static_nnh(h);
  for (int i = 0; i < 40; ++i) {
    Neighborhood nb = dynamical_nnh(h.row(i), i, h);
    CHECK(nb.anchor == i);
    CHECK(nb.neighbor == fixed[static_cast<size_t>(i)].neighbor);
  }
}

TEST_CASE("dynamical_nnh: a moved query changes the neighbor") {
  RealMatrix h = rows2({{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}});
  CHECK(dynamical_nnh(h.row(0), 0, h).neighbor == 1);
  std::vector<double> moved{-1.0, 0.1};
  CHECK(dynamical_nnh(moved, 0, h).neighbor == 2);
}

TEST_CASE("dynamical_nnh: the anchor row is excluded even on exact match") {
  RealMatrix h = rows2({{1.0, 0.0}, {0.0, 1.0}});
  std::vector<double> query{1.0, 0.0};
  CHECK(dynamical_nnh(query, 0, h).neighbor == 1);
  RealMatrix dup = rows2({{1.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}});
  CHECK(dynamical_nnh(query, 0, dup).neighbor == 1);  // identical twin beats the right angle
  CHECK_THROWS_AS(dynamical_nnh(query, 5, h), NumericError);
}

namespace {

// Rows with strictly decreasing confidence: row i predicts class 0 with
// probability top[i]; remaining mass spread evenly.
RealMatrix confidence_ladder(const std::vector<double>& top, int K) {
  RealMatrix m(static_cast<int>(top.size()), K);
  for (size_t i = 0; i < top.size(); ++i) {
    m(static_cast<int>(i), 0) = top[i];
    for (int k = 1; k < K; ++k) m(static_cast<int>(i), k) = (1.0 - top[i]) / (K - 1);
  }
  return m;
}

}  // namespace

TEST_CASE("confident_split: strict medians on four distinct rows") {
  RealMatrix pbar = confidence_ladder({0.9, 0.8, 0.7, 0.6}, 2);
  RealMatrix qbar = confidence_ladder({0.95, 0.85, 0.75, 0.65}, 2);
  ConfidentSet cs = confident_split(pbar, qbar);
  const double e0 = shannon_entropy(pbar.row(0)), e1 = shannon_entropy(pbar.row(1));
  const double e2 = shannon_entropy(pbar.row(2)), e3 = shannon_entropy(pbar.row(3));
  CHECK(cs.gamma_e == doctest::Approx((e1 + e2) * 0.5).epsilon(1e-12));
  CHECK(cs.gamma_d == doctest::Approx(((1 - 0.85) + (1 - 0.75)) * 0.5).epsilon(1e-12));
  CHECK(e0 < e1);
  CHECK(e2 < e3);
  CHECK(cs.member == std::vector<char>{1, 1, 0, 0});
  CHECK(cs.count() == 2);
}

TEST_CASE("confident_split: intersection can be smaller than either gate") {
  // entropy ranks rows 0,1,2 lowest; distance ranks rows 1,2,4 lowest
  RealMatrix pbar = confidence_ladder({0.95, 0.9, 0.85, 0.7, 0.65, 0.6}, 3);
  RealMatrix qbar = confidence_ladder({0.70, 0.9, 0.85, 0.65, 0.80, 0.6}, 3);
  ConfidentSet both = confident_split(pbar, qbar, ConfidentRule::Intersection);
  CHECK(both.member == std::vector<char>{0, 1, 1, 0, 0, 0});
  ConfidentSet ent_only = confident_split(pbar, qbar, ConfidentRule::EntropyOnly);
  CHECK(ent_only.member == std::vector<char>{1, 1, 1, 0, 0, 0});
  ConfidentSet dist_only = confident_split(pbar, qbar, ConfidentRule::DistanceOnly);
  CHECK(dist_only.member == std::vector<char>{0, 1, 1, 0, 1, 0});
}

TEST_CASE("confident_split: identical rows leave nothing strictly below the median") {
  RealMatrix pbar = confidence_ladder({0.8, 0.8, 0.8, 0.8}, 2);
  RealMatrix qbar = confidence_ladder({0.7, 0.7, 0.7, 0.7}, 2);
  CHECK_THROWS_AS(confident_split(pbar, qbar), NoConfidentSamplesError);
}

TEST_CASE("confident_split: membership never exceeds half the samples") {
  SeededRng rng(103);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 11 + trial * 7;
    RealMatrix logits = random_rows(n, 4, rng);
    RealMatrix pbar = softmax_rows(logits);
    RealMatrix qlog = random_rows(n, 4, rng);
    RealMatrix qbar = softmax_rows(qlog);
    try {
      ConfidentSet cs = confident_split(pbar, qbar);
      CHECK(cs.count() <= n / 2);
      CHECK(cs.count() >= 1);
      ConfidentSet e = confident_split(pbar, qbar, ConfidentRule::EntropyOnly);
      CHECK(e.count() <= n / 2);
    } catch (const NoConfidentSamplesError&) {
      // legal outcome; nothing below both medians
    }
  }
}

TEST_CASE("confident_split: literal minimum distance flag flips the ranking") {
  RealMatrix pbar = confidence_ladder({0.8, 0.7}, 3);
  RealMatrix qbar(2, 3);
  // row 0: highest max (closest by 1-max) but also a middling minimum
  qbar(0, 0) = 0.90; qbar(0, 1) = 0.05; qbar(0, 2) = 0.05;
  // row 1: lower max yet the smallest entry overall
  qbar(1, 0) = 0.80; qbar(1, 1) = 0.19; qbar(1, 2) = 0.01;
  ConfidentSet by_max = confident_split(pbar, qbar, ConfidentRule::DistanceOnly, false);
  CHECK(by_max.member == std::vector<char>{1, 0});
  ConfidentSet by_min = confident_split(pbar, qbar, ConfidentRule::DistanceOnly, true);
  CHECK(by_min.member == std::vector<char>{0, 1});
}

TEST_CASE("chain_search: immediate hit when the first neighbor is confident") {
  RealMatrix h = rows2({{1.0, 0.0}, {0.9, 0.1}, {0.0, 1.0}});
  CHECK(chain_search(0, h, explicit_set({0, 1, 0})) == 1);
}

TEST_CASE("chain_search: walks the line until it reaches the confident tail") {
  RealMatrix h = rows2({{0.0, 1.0}, {1.0, 1.0}, {2.0, 1.0}, {3.0, 1.0}});
  CHECK(chain_search(0, h, explicit_set({0, 0, 0, 1})) == 3);
  // intermediate stops of the walk are skipped once visited
  CHECK(chain_search(0, h, explicit_set({0, 0, 1, 0})) == 2);
}

TEST_CASE("chain_search: a confident start still hops to a different member") {
  RealMatrix h = rows2({{0.0, 1.0}, {1.0, 1.0}, {2.0, 1.0}});
  const int got = chain_search(0, h, explicit_set({1, 0, 1}));
  CHECK(got == 2);
  CHECK(got != 0);
}

TEST_CASE("chain_search: scale of the rows does not matter") {
  SeededRng rng(104);
  RealMatrix h = random_rows(30, 4, rng);
  std::vector<char> member(30, 0);
  member[3] = member[11] = member[22] = 1;
  ConfidentSet cs = explicit_set(member);
  RealMatrix scaled = h;
  for (int i = 0; i < scaled.rows; ++i) {
    const double s = 0.5 + 3.0 * (i % 5);
    for (int j = 0; j < scaled.cols; ++j) scaled(i, j) *= s;
  }
  for (int start = 0; start < 30; ++start)
    CHECK(chain_search(start, h, cs) == chain_search(start, scaled, cs));
}

TEST_CASE("chain_search: always terminates on a member distinct from the start") {
  SeededRng rng(105);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 20 + trial * 35;
    RealMatrix h = random_rows(n, 5, rng);
    std::vector<char> member(static_cast<size_t>(n), 0);
    const int members = 1 + static_cast<int>(rng.uniform_index(static_cast<uint64_t>(n / 4 + 1)));
    for (int m = 0; m < members; ++m) member[rng.uniform_index(static_cast<uint64_t>(n))] = 1;
    ConfidentSet cs = explicit_set(member);
    for (int start = 0; start < n; ++start) {
      const int got = chain_search(start, h, cs);
      CHECK(cs.member[static_cast<size_t>(got)] == 1);
      CHECK(got != start);
    }
  }
}

TEST_CASE("chain_search: empty confident set is rejected") {
  RealMatrix h = rows2({{1.0, 0.0}, {0.0, 1.0}});
  CHECK_THROWS_AS(chain_search(0, h, explicit_set({0, 0})), NoConfidentSamplesError);
  CHECK_THROWS_AS(chain_search(5, h, explicit_set({0, 1})), NumericError);
}

TEST_CASE("chain_search_from: live queries steer the first hop") {
  RealMatrix h = rows2({{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.1}});
  std::vector<double> near_last{-1.0, 0.2};
  CHECK(chain_search_from(near_last, 0, h, explicit_set({0, 0, 1})) == 2);
  // same confident set, query near row 1: walk goes 1 -> 2
  std::vector<double> near_mid{0.1, 1.0};
  CHECK(chain_search_from(near_mid, 0, h, explicit_set({0, 0, 1})) == 2);
}

TEST_CASE("nearest_confident: direct jump to the closest member") {
  RealMatrix h = rows2({{1.0, 0.0}, {0.9, 0.2}, {0.0, 1.0}, {0.1, 1.0}});
  CHECK(nearest_confident(h.row(0), 0, h, explicit_set({1, 0, 1, 1})) == 3);
  CHECK(nearest_confident(h.row(0), 0, h, explicit_set({1, 1, 1, 1})) == 1);
  CHECK_THROWS_AS(nearest_confident(h.row(0), 0, h, explicit_set({1, 0, 0, 0})),
                  NoConfidentSamplesError);
}
