#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "hcg/loading.hpp"
#include "hcg/oracle.hpp"
#include "test_support.hpp"

using namespace hcg;
using hcg::testing::load_fixture;

namespace {

// Complete DAG on n nodes (i -> j for i < j), OD 0 -> n-1.
Network complete_dag(std::size_t n) {
  NetworkHierarchy h;
  h.gammas = {1.0};
  LevelGraph l;
  for (std::size_t v = 0; v < n; ++v) l.nodes.push_back("v" + std::to_string(v));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      l.edges.push_back(Edge{"e" + std::to_string(i) + std::to_string(j), l.nodes[i], l.nodes[j],
                             PlainEdge{AffineCost{1, 1}}});
  l.od_pairs = {ODPair{l.nodes.front(), l.nodes.back(), 1.0}};
  h.levels = {l};
  return Network(h);
}

// Paths i -> n-1 in the complete DAG, by recursion on the first hop.
double count_paths(std::size_t i, std::size_t n) {
  if (i == n - 1) return 1.0;
  double c = 0.0;
  for (std::size_t j = i + 1; j < n; ++j) c += count_paths(j, n);
  return c;
}

}  // namespace

TEST(Enumerate, Examples) {
  EXPECT_EQ(oracle::enumerate_paths(load_fixture("two_edge.json"), 0, 0).size(), 2u);

  NetworkHierarchy h;
  h.gammas = {1.0};
  LevelGraph l;
  l.nodes = {"o", "a", "b", "d"};
  l.edges = {Edge{"1", "o", "a", PlainEdge{ConstantCost{1}}}, Edge{"2", "a", "d", PlainEdge{ConstantCost{1}}},
             Edge{"3", "o", "b", PlainEdge{ConstantCost{1}}}, Edge{"4", "b", "d", PlainEdge{ConstantCost{1}}}};
  l.od_pairs = {ODPair{"o", "d", 1.0}};
  h.levels = {l};
  const auto diamond = oracle::enumerate_paths(Network(h), 0, 0);
  ASSERT_EQ(diamond.size(), 2u);
  EXPECT_EQ(diamond[0], (oracle::Path{0, 1}));
  EXPECT_EQ(diamond[1], (oracle::Path{2, 3}));

  for (std::size_t n = 3; n <= 7; ++n) {
    const auto paths = oracle::enumerate_paths(complete_dag(n), 0, 0);
    EXPECT_EQ(static_cast<double>(paths.size()), count_paths(0, n));
    EXPECT_EQ(paths.size(), std::size_t{1} << (n - 2));
  }
}

TEST(Enumerate, Budget) {
  try {
    oracle::enumerate_paths(complete_dag(8), 0, 0, 10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::budget_exceeded);
  }
}

TEST(Expand, TwoLevel) {
  const Network net = load_fixture("two_level.json");
  // A->D: a1 a3 (4 lower paths), a1 a5 a4, a2 a4, a6 (2 lower paths)
  EXPECT_EQ(oracle::expanded_path_count(net, 0, 0), 8.0);
  const auto paths = oracle::expand_paths(net, 0, 0);
  ASSERT_EQ(paths.size(), 8u);
  for (const auto& p : paths) {
    EXPECT_EQ(p.cost_terms.size(), p.total_plain_edges);
    for (const auto& [id, level] : p.cost_terms) EXPECT_NE(net.find_plain(level, id), npos);
  }
}

TEST(PathCost, Examples) {
  NetworkHierarchy h;
  h.gammas = {1.0, 1.0};
  LevelGraph top;
  top.nodes = {"a", "b", "c", "d", "e"};
  top.edges = {Edge{"1", "a", "b", PlainEdge{AffineCost{1, 1}}}, Edge{"2", "b", "c", PlainEdge{AffineCost{1, 1}}},
               Edge{"3", "c", "d", PlainEdge{AffineCost{1, 1}}}, Edge{"4", "d", "e", PortalEdge{{1, 0}}}};
  top.od_pairs = {ODPair{"a", "e", 1.0}};
  LevelGraph low;
  low.nodes = {"x", "y"};
  low.edges = {Edge{"5", "x", "y", PlainEdge{AffineCost{1, 1}}}};
  low.od_pairs = {ODPair{"x", "y", std::nullopt}};
  h.levels = {top, low};
  const Network net(h);
  const std::vector<double> t = {1.0, 2.0, 3.0, 4.0};
  EXPECT_DOUBLE_EQ(oracle::path_cost(net, t, {0, 1, 2}, 0), 6.0);
  EXPECT_DOUBLE_EQ(oracle::path_cost(net, t, {0, 1, 2, 3}, 0), 10.0);
}

TEST(PathCost, MatchesHierarchicalWeights) {
  for (const auto& name : hcg::testing::fixture_names()) {
    const Network net = load_fixture(name);
    const auto t = hcg::testing::random_times(net, 17);
    const auto w = hierarchical_weights(net, t);
    const oracle::PathCosts pc(net, t);
    for (std::size_t k = 0; k < net.level_count(); ++k) {
      const auto& L = net.level(k);
      for (std::size_t e = 0; e < L.edge_from.size(); ++e) {
        if (L.portal_target[e] == npos) continue;
        EXPECT_NEAR(w[k][e], pc.od_length(k + 1, L.portal_target[e]), 1e-12 * (1 + std::abs(w[k][e]))) << name;
      }
    }
  }
}

TEST(Logit, Examples) {
  const std::vector<double> eq = {1.3, 1.3};
  const auto x = oracle::logit_shares(eq, 0.4, 2.0);
  EXPECT_DOUBLE_EQ(x[0], 1.0);
  EXPECT_DOUBLE_EQ(x[1], 1.0);
  const std::vector<double> c = {0.0, std::log(2.0)};
  const auto y = oracle::logit_shares(c, 1.0, 1.0);
  EXPECT_NEAR(y[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(y[1], 1.0 / 3.0, 1e-15);
  const std::vector<double> three = {0.3, 1.7, 0.9};
  const auto z = oracle::logit_shares(three, 0.7, 2.5);
  EXPECT_NEAR(z[0], 1.6028639933686896372, 1e-14);
  EXPECT_NEAR(z[1], 0.21692405253231969961, 1e-14);
  EXPECT_NEAR(z[2], 0.68021195409899066316, 1e-14);
}

TEST(Logit, ShiftInvariance) {
  const std::vector<double> c = {0.3, 1.7, 0.9, 2.2};
  auto shifted = c;
  for (double& v : shifted) v += 123.456;
  const auto a = oracle::logit_shares(c, 0.6, 3.0);
  const auto b = oracle::logit_shares(shifted, 0.6, 3.0);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LE(std::abs(a[i] - b[i]), 1e-12);
}

TEST(Logit, Concentrates) {
  const std::vector<double> c = {1.0, 1.1, 1.5};
  EXPECT_GE(oracle::logit_shares(c, 1e-3, 1.0)[0], 1.0 - 1e-3);
}

TEST(Gumbel, SmallSample) {
  const std::vector<double> one = {3.0};
  EXPECT_EQ(oracle::gumbel_monte_carlo(one, 1.0, 100, 1).shares, std::vector<double>{1.0});
  const std::vector<double> c = {0.0, std::log(2.0)};
  const auto a = oracle::gumbel_monte_carlo(c, 1.0, 20000, 5);
  const auto b = oracle::gumbel_monte_carlo(c, 1.0, 20000, 5);
  EXPECT_EQ(a.shares, b.shares);
  EXPECT_EQ(a.mean_max, b.mean_max);
  EXPECT_NEAR(a.shares[0], 2.0 / 3.0, 4.0 * std::sqrt(2.0 / 9.0 / 20000.0));
  EXPECT_THROW(oracle::gumbel_monte_carlo(c, 1.0, 0, 5), Error);
}

TEST(Gumbel, MeanZero) {
  double sum = 0.0;
  const std::size_t n = 200000;
  for (std::size_t i = 0; i < n; ++i) sum += oracle::gumbel(1.5, 3, i);
  // sd of a Gumbel with scale 1.5 is 1.5 pi / sqrt(6)
  EXPECT_NEAR(sum / n, 0.0, 4.0 * 1.5 * M_PI / std::sqrt(6.0) / std::sqrt(double(n)));
}

TEST(FixedPoint, Examples) {
  const auto sym = oracle::fixed_point_small(load_fixture("symmetric_two_edge.json"), 1e-13);
  EXPECT_NEAR(sym.flows[0][0], 2.0, 1e-12);
  EXPECT_NEAR(sym.flows[0][1], 2.0, 1e-12);
  const auto two = oracle::fixed_point_small(load_fixture("two_edge.json"), 1e-13);
  EXPECT_NEAR(two.flows[0][0], 0.66258419282880032455, 1e-12);
  EXPECT_NEAR(two.times[1], 2.3374158071711996755, 1e-12);
}

TEST(FixedPoint, TooManyPaths) {
  try {
    oracle::fixed_point_small(complete_dag(10), 1e-8);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::budget_exceeded);
  }
}
