#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include "mi_embed/dataset.hpp"
#include "mi_embed/errors.hpp"

using namespace mi_embed;

namespace {

Dataset tiny(std::size_t users, std::size_t per_user) {
  SyntheticParams p;
  p.n_users = users;
  p.samples_per_user = per_user;
  p.dim = 2;
  p.seed = 3;
  return generate_synthetic(p);
}

std::multiset<std::string> sample_ids(const UserSamples& part) {
  std::multiset<std::string> out;
  for (const auto& [user, samples] : part)
    for (const auto& s : samples) out.insert(s.sample_id);
  return out;
}

std::set<std::string> users(const UserSamples& part) {
  std::set<std::string> out;
  for (const auto& [user, samples] : part) out.insert(user);
  return out;
}

bool disjoint(const std::set<std::string>& a, const std::set<std::string>& b) {
  return std::none_of(a.begin(), a.end(), [&](const auto& x) { return b.count(x) > 0; });
}

int parse_error_row(const std::string& text) {
  std::istringstream in(text);
  try {
    parse_csv(in);
  } catch (const ParseError& e) {
    return static_cast<int>(e.row());
  }
  return -1;
}

}  // namespace

TEST(Partition, FourUsersTwoSamples) {
  const auto split = partition(tiny(4, 2), 1, 1, 0.5, 7);
  ASSERT_EQ(split.training_members.size(), 1u);
  ASSERT_EQ(split.nontraining_members.size(), 1u);
  EXPECT_EQ(users(split.training_members), users(split.nontraining_members));
  EXPECT_EQ(split.training_members.begin()->second.size(), 1u);
  EXPECT_EQ(split.nontraining_members.begin()->second.size(), 1u);
  EXPECT_EQ(split.nonmembers.size(), 1u);
  EXPECT_EQ(split.shadow_pool.size(), 2u);
  EXPECT_NO_THROW(validate_split(split));
}

TEST(Partition, DeterministicPerSeed) {
  const auto data = tiny(30, 6);
  EXPECT_EQ(partition(data, 10, 10, 0.5, 1), partition(data, 10, 10, 0.5, 1));
  EXPECT_NE(partition(data, 10, 10, 0.5, 1), partition(data, 10, 10, 0.5, 2));
}

TEST(Partition, FullScaleSizingLeavesEmptyPool) {
  const auto split = partition(tiny(300, 4), 150, 150, 0.5, 1);
  EXPECT_EQ(split.training_members.size(), 150u);
  EXPECT_EQ(split.nonmembers.size(), 150u);
  EXPECT_TRUE(split.shadow_pool.empty());
}

TEST(Partition, CeilingOfWithinUserSplit) {
  const auto split = partition(tiny(6, 5), 2, 2, 0.5, 4);
  for (const auto& [user, samples] : split.training_members) {
    EXPECT_EQ(samples.size(), 3u);
    EXPECT_EQ(split.nontraining_members.at(user).size(), 2u);
  }
}

TEST(Partition, InvariantsAndConservationOverRandomSeeds) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    SyntheticParams p;
    p.n_users = 20 + seed % 7;
    p.samples_per_user = 2;
    p.samples_per_user_max = 9;
    p.dim = 3;
    p.seed = seed;
    const auto data = generate_synthetic(p);
    const double frac = 0.1 + 0.8 * static_cast<double>(seed % 9) / 8.0;
    const auto split = partition(data, 5 + seed % 4, 6, frac, seed);
    EXPECT_NO_THROW(validate_split(split));
    EXPECT_EQ(users(split.training_members), users(split.nontraining_members));
    EXPECT_TRUE(disjoint(users(split.training_members), users(split.nonmembers)));
    EXPECT_TRUE(disjoint(users(split.training_members), users(split.shadow_pool)));
    EXPECT_TRUE(disjoint(users(split.nonmembers), users(split.shadow_pool)));

    std::multiset<std::string> all;
    for (const auto* part : {&split.training_members, &split.nontraining_members, &split.nonmembers,
                             &split.shadow_pool}) {
      const auto ids = sample_ids(*part);
      all.insert(ids.begin(), ids.end());
    }
    std::multiset<std::string> input;
    for (const auto& c : data)
      for (const auto& s : c.samples) input.insert(s.sample_id);
    EXPECT_EQ(all, input);
  }
}

TEST(Partition, SizingErrors) {
  EXPECT_THROW(partition(tiny(4, 2), 3, 2, 0.5, 1), SizingError);
  EXPECT_THROW(partition(tiny(4, 1), 1, 1, 0.5, 1), SizingError);
  EXPECT_THROW(partition(tiny(4, 2), 1, 1, 1.0, 1), InvalidArgument);
  EXPECT_THROW(partition(tiny(4, 2), 1, 1, 0.0, 1), InvalidArgument);
}

TEST(ValidateSplit, DetectsOverlap) {
  auto split = partition(tiny(6, 4), 2, 2, 0.5, 1);
  auto broken = split;
  broken.nonmembers.insert(*split.training_members.begin());
  EXPECT_THROW(validate_split(broken), InvalidArgument);
  broken = split;
  broken.nontraining_members.erase(broken.nontraining_members.begin());
  EXPECT_THROW(validate_split(broken), InvalidArgument);
}

TEST(Synthetic, ZeroSpreadCollapsesEachUser) {
  SyntheticParams p;
  p.n_users = 5;
  p.samples_per_user = 4;
  p.cluster_spread = 0.0;
  for (const auto& c : generate_synthetic(p))
    for (const auto& s : c.samples) EXPECT_EQ(s.features, c.samples.front().features);
}

TEST(Synthetic, WithinUserStdMatchesSpread) {
  SyntheticParams p;
  p.n_users = 3;
  p.samples_per_user = 400;
  p.dim = 10;
  p.cluster_spread = 1.7;
  for (const auto& c : generate_synthetic(p)) {
    double ss = 0.0;
    std::size_t n = 0;
    for (std::size_t d = 0; d < p.dim; ++d) {
      double mean = 0.0;
      for (const auto& s : c.samples) mean += s.features[d];
      mean /= c.samples.size();
      for (const auto& s : c.samples) ss += (s.features[d] - mean) * (s.features[d] - mean);
      n += c.samples.size();
    }
    EXPECT_NEAR(std::sqrt(ss / n), p.cluster_spread, 0.1 * p.cluster_spread);
  }
}

TEST(Synthetic, SeedContract) {
  SyntheticParams p;
  p.n_users = 4;
  p.samples_per_user = 3;
  EXPECT_EQ(generate_synthetic(p), generate_synthetic(p));
  auto q = p;
  q.seed = p.seed + 1;
  const auto a = generate_synthetic(p);
  const auto b = generate_synthetic(q);
  EXPECT_NE(a.front().samples.front().features, b.front().samples.front().features);
  EXPECT_EQ(a.size(), b.size());
  EXPECT_EQ(a.front().samples.size(), b.front().samples.size());
}

TEST(Synthetic, VariableCountsWithinRange) {
  SyntheticParams p;
  p.n_users = 50;
  p.samples_per_user = 3;
  p.samples_per_user_max = 8;
  std::set<std::size_t> seen;
  for (const auto& c : generate_synthetic(p)) {
    EXPECT_GE(c.samples.size(), 3u);
    EXPECT_LE(c.samples.size(), 8u);
    seen.insert(c.samples.size());
  }
  EXPECT_GT(seen.size(), 1u);
}

TEST(Synthetic, RejectsInvalidParams) {
  SyntheticParams p;
  p.dim = 1;
  EXPECT_THROW(generate_synthetic(p), InvalidArgument);
  p = {};
  p.n_users = 0;
  EXPECT_THROW(generate_synthetic(p), InvalidArgument);
}

TEST(Csv, EmptyBodyGivesEmptyDataset) {
  std::istringstream in("user_id,sample_id,f0,f1\n");
  EXPECT_TRUE(parse_csv(in).empty());
}

TEST(Csv, HandwrittenTwoUserFile) {
  std::istringstream in(
      "user_id,sample_id,f0,f1\n"
      "alice,a1,1.5,-2\n"
      "bob,b1,0,3.25\n"
      "alice,a2,4,5\n");
  const auto data = parse_csv(in);
  ASSERT_EQ(data.size(), 2u);
  EXPECT_EQ(data[0].user_id, "alice");
  ASSERT_EQ(data[0].samples.size(), 2u);
  EXPECT_EQ(data[0].samples[0].features, (Vector{1.5, -2.0}));
  EXPECT_EQ(data[0].samples[1].sample_id, "a2");
  EXPECT_EQ(data[1].samples[0].features, (Vector{0.0, 3.25}));
}

TEST(Csv, RoundTripOfThousandSamples) {
  SyntheticParams p;
  p.n_users = 50;
  p.samples_per_user = 20;
  const auto data = generate_synthetic(p);
  const auto path = std::filesystem::temp_directory_path() / "mi_embed_test_roundtrip.csv";
  save_csv(data, path);
  const auto back = load_csv(path);
  std::filesystem::remove(path);
  ASSERT_EQ(back.size(), data.size());
  double max_diff = 0.0;
  for (std::size_t u = 0; u < data.size(); ++u)
    for (std::size_t i = 0; i < data[u].samples.size(); ++i)
      for (std::size_t d = 0; d < p.dim; ++d)
        max_diff = std::max(max_diff, std::abs(back[u].samples[i].features[d] - data[u].samples[i].features[d]));
  EXPECT_LT(max_diff, 1e-12);
  EXPECT_EQ(back, data);
}

TEST(Csv, ParseErrorsCarryRowNumbers) {
  EXPECT_EQ(parse_error_row("user,sample_id,f0\n"), 1);
  EXPECT_EQ(parse_error_row("user_id,sample_id,f1\n"), 1);
  EXPECT_EQ(parse_error_row("user_id,sample_id,f0\na,a1,1\na,a2,1,2\n"), 3);
  EXPECT_EQ(parse_error_row("user_id,sample_id,f0\na,a1,x\n"), 2);
  EXPECT_EQ(parse_error_row("user_id,sample_id,f0\na,a1,nan\n"), 2);
  EXPECT_EQ(parse_error_row("user_id,sample_id,f0\na,a1,1\nb,a1,2\n"), 3);
}

TEST(Manifest, ReplaysSplit) {
  const auto data = tiny(12, 5);
  const auto split = partition(data, 4, 4, 0.5, 9);
  EXPECT_EQ(apply_manifest(data, split_manifest(split)), split);
}
