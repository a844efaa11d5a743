#include <random>

#include <gtest/gtest.h>

#include "support/test_support.hpp"

using namespace cfrec;
using cfrec::testing::brute_force_knn;
using cfrec::testing::index_from_coords;
using cfrec::testing::random_rows;

namespace {

TEST(Distance, IdenticalVectorsAreZero) {
  const std::vector<double> u = {0.3, 0.7, 1.0, 0.0};
  const std::vector<double> w = {2.0, 0.5, 1.0, 3.0};
  EXPECT_EQ(weighted_l1_distance(u, u, w), 0.0);
}

TEST(Distance, HammingCaseOnBinaryVectors) {
  const std::vector<double> u = {1, 0, 1};
  const std::vector<double> v = {0, 1, 1};
  const std::vector<double> w = {1, 1, 1};
  EXPECT_EQ(weighted_l1_distance(u, v, w), 2.0);
}

TEST(Distance, WeightedExample) {
  const std::vector<double> u = {0.8, 1, 0};
  const std::vector<double> v = {0.2, 0, 0};
  const std::vector<double> w = {2, 1, 1};
  EXPECT_NEAR(weighted_l1_distance(u, v, w), 2.2, 1e-12);
}

TEST(Distance, LengthMismatchRejected) {
  EXPECT_THROW(weighted_l1_distance(std::vector<double>{1, 2},
                                    std::vector<double>{1},
                                    std::vector<double>{1, 1}),
               ValidationError);
  EXPECT_THROW(weighted_l1_distance(std::vector<double>{1, 2},
                                    std::vector<double>{1, 2},
                                    std::vector<double>{1}),
               ValidationError);
}

TEST(Distance, SymmetricNonNegativeOnRandomPairs) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> weight(0.0, 5.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t m = 1 + rng() % 64;
    std::vector<double> u(m), v(m), w(m);
    for (std::size_t i = 0; i < m; ++i) {
      u[i] = unit(rng);
      v[i] = unit(rng);
      w[i] = weight(rng);
    }
    const double duv = weighted_l1_distance(u, v, w);
    const double dvu = weighted_l1_distance(v, u, w);
    EXPECT_GE(duv, 0.0);
    EXPECT_EQ(duv, dvu);  // same summation order: exactly equal
  }
}

TEST(Distance, BinaryUniformIsIntegerHamming) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t m = 1 + rng() % 48;
    std::vector<double> u(m), v(m), w(m, 1.0);
    int expected = 0;
    for (std::size_t i = 0; i < m; ++i) {
      u[i] = double(rng() % 2);
      v[i] = double(rng() % 2);
      expected += u[i] != v[i];
    }
    EXPECT_EQ(weighted_l1_distance(u, v, w), double(expected));
  }
}

TEST(Distance, ZeroWeightCoordinateIsIgnored) {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 4 + rng() % 16;
    std::vector<double> u(m), v(m), w(m);
    for (std::size_t i = 0; i < m; ++i) {
      u[i] = unit(rng);
      v[i] = unit(rng);
      w[i] = unit(rng);
    }
    const std::size_t dead = rng() % m;
    w[dead] = 0.0;
    const double before = weighted_l1_distance(u, v, w);
    u[dead] = unit(rng);  // perturb the dead coordinate
    EXPECT_EQ(weighted_l1_distance(u, v, w), before);
  }
}

TEST(Similarity, BoundedAndMonotone) {
  EXPECT_EQ(similarity_from_distance(0.0), 1.0);
  EXPECT_GT(similarity_from_distance(1.0), similarity_from_distance(2.0));
  EXPECT_GT(similarity_from_distance(100.0), 0.0);
}

TEST(KNearest, ReturnsAllWhenKExceedsPopulation) {
  std::mt19937_64 rng(5);
  auto rows = random_rows(4, 12, rng);
  const ProfileIndex index = index_from_coords(rows);
  SearchParams params{.k = 5, .weights = std::vector<double>(12, 1.0)};
  const auto neighbors = k_nearest(index, rows[0].first, params);
  EXPECT_EQ(neighbors.size(), 3u);
}

TEST(KNearest, MatchesBruteForceOnBinaryVectors) {
  // Four binary users; oracle enumerates every pair distance and sorts.
  std::vector<std::pair<std::string, std::vector<double>>> rows = {
      {"u1", {1, 0, 1, 0, 1, 0, 1, 0}},
      {"u2", {1, 1, 1, 0, 0, 0, 1, 0}},
      {"u3", {0, 0, 0, 0, 0, 0, 0, 1}},
      {"u4", {1, 0, 1, 0, 1, 0, 1, 1}},
  };
  const ProfileIndex index = index_from_coords(rows);
  SearchParams params{.k = 2, .weights = std::vector<double>(8, 1.0)};
  const auto got = k_nearest(index, "u1", params);
  const auto expected = brute_force_knn(index, "u1", 2, params.weights);
  EXPECT_EQ(got, expected);
  ASSERT_EQ(got.size(), 2u);
  EXPECT_EQ(got[0].user_id, "u4");  // distance 1
  EXPECT_EQ(got[0].distance, 1.0);
}

TEST(KNearest, TieBreaksByUserIdAscending) {
  std::vector<std::pair<std::string, std::vector<double>>> rows = {
      {"mid", {0, 0, 0, 0, 0, 0, 0, 0}},
      {"zz", {1, 0, 0, 0, 0, 0, 0, 0}},
      {"aa", {0, 1, 0, 0, 0, 0, 0, 0}},
      {"mm", {0, 0, 1, 0, 0, 0, 0, 0}},
  };
  const ProfileIndex index = index_from_coords(rows);
  SearchParams params{.k = 2, .weights = std::vector<double>(8, 1.0)};
  const auto got = k_nearest(index, "mid", params);
  ASSERT_EQ(got.size(), 2u);
  EXPECT_EQ(got[0].user_id, "aa");
  EXPECT_EQ(got[1].user_id, "mm");
}

TEST(KNearest, UnknownTargetAndBadParamsRejected) {
  auto index = index_from_coords({{"u1", std::vector<double>(8, 0.0)},
                                  {"u2", std::vector<double>(8, 1.0)}});
  SearchParams params{.k = 1, .weights = std::vector<double>(8, 1.0)};
  EXPECT_THROW(k_nearest(index, "ghost", params), ValidationError);
  params.k = 0;
  EXPECT_THROW(k_nearest(index, "u1", params), ValidationError);
  params.k = 1;
  params.weights.pop_back();
  EXPECT_THROW(k_nearest(index, "u1", params), ValidationError);
}

TEST(KNearest, SingletonIndexYieldsEmptyList) {
  auto index = index_from_coords({{"only", std::vector<double>(8, 0.0)}});
  SearchParams params{.k = 3, .weights = std::vector<double>(8, 1.0)};
  EXPECT_TRUE(k_nearest(index, "only", params).empty());
}

TEST(KNearest, RankingInvariantUnderPositiveWeightScaling) {
  std::mt19937_64 rng(31);
  auto rows = random_rows(60, 16, rng);
  const ProfileIndex index = index_from_coords(rows);
  std::uniform_real_distribution<double> weight(0.1, 4.0);
  std::vector<double> w(16);
  for (double& x : w) x = weight(rng);

  SearchParams params{.k = 10, .weights = w};
  const auto baseline = k_nearest(index, rows[0].first, params);
  for (const double c : {2.0, 0.5, 8.0}) {
    SearchParams scaled = params;
    for (double& x : scaled.weights) x *= c;
    const auto got = k_nearest(index, rows[0].first, scaled);
    ASSERT_EQ(got.size(), baseline.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].user_id, baseline[i].user_id);
      EXPECT_NEAR(got[i].distance, c * baseline[i].distance,
                  1e-12 * (1.0 + got[i].distance));
    }
  }
}

TEST(KNearest, DeterministicAcrossRepeatedQueries) {
  std::mt19937_64 rng(37);
  auto rows = random_rows(100, 24, rng);
  const ProfileIndex index = index_from_coords(rows);
  SearchParams params{.k = 7, .weights = std::vector<double>(24, 1.0)};
  const auto first = k_nearest(index, rows[3].first, params);
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(k_nearest(index, rows[3].first, params), first);
  }
}

TEST(Partitioned, SinglePartitionIsSerialByConstruction) {
  std::mt19937_64 rng(41);
  auto rows = random_rows(50, 16, rng);
  const ProfileIndex index = index_from_coords(rows);
  SearchParams params{.k = 5, .weights = std::vector<double>(16, 1.0),
                      .partitions = 1};
  EXPECT_EQ(k_nearest_partitioned(index, rows[0].first, params),
            k_nearest(index, rows[0].first, params));
}

TEST(Partitioned, MatchesSerialOnSyntheticUsers) {
  const SynthParams synth{.n_users = 200,
                          .n_decks = 30,
                          .n_clusters = 4,
                          .events_per_user_mean = 15.0,
                          .rng_seed = 43};
  const RecordStore store = store_from_synthetic(generate_synthetic(synth));
  const FeatureSchema schema = schema_from_store(store);
  const ProfileIndex index = ProfileIndex::build(store, schema);
  const auto weights = expand_weights(uniform_weights(), schema);

  SearchParams params{.k = 10, .weights = weights, .partitions = 1};
  const auto serial = k_nearest(index, index.vectors()[7].user_id, params);
  for (const std::size_t p : {2u, 4u, 8u}) {
    params.partitions = p;
    const auto partitioned =
        k_nearest_partitioned(index, index.vectors()[7].user_id, params);
    EXPECT_EQ(partitioned, serial) << "P=" << p;
  }
}

TEST(Partitioned, MorePartitionsThanUsers) {
  auto rows = random_rows(5, 8, *[] {
    static std::mt19937_64 rng(47);
    return &rng;
  }());
  const ProfileIndex index = index_from_coords(rows);
  SearchParams params{.k = 3, .weights = std::vector<double>(8, 1.0),
                      .partitions = 64};
  EXPECT_EQ(k_nearest_partitioned(index, rows[1].first, params),
            k_nearest(index, rows[1].first, params));
}

}  // namespace
