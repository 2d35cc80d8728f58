#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "mi_embed/nn.hpp"

namespace mi_embed {

struct Sample {
  std::string user_id;
  std::string sample_id;
  Vector features;

  bool operator==(const Sample&) const = default;
};

struct UserCluster {
  std::string user_id;
  std::vector<Sample> samples;

  bool operator==(const UserCluster&) const = default;
};

using Dataset = std::vector<UserCluster>;

/// Samples keyed by user id. Ordered so that iteration is deterministic.
using UserSamples = std::map<std::string, std::vector<Sample>>;

/**
 * Three-way user-level membership partition plus the leftover shadow pool.
 *
 * training_members and nontraining_members hold disjoint samples of the
 * same users. nonmembers and shadow_pool hold users that appear nowhere else.
 */
struct MembershipSplit {
  UserSamples training_members;
  UserSamples nontraining_members;
  UserSamples nonmembers;
  UserSamples shadow_pool;

  bool operator==(const MembershipSplit&) const = default;
};

/// Throws InvalidArgument naming the first violated invariant.
void validate_split(const MembershipSplit& split);

MembershipSplit partition(const Dataset& dataset, std::size_t n_members, std::size_t n_nonmembers,
                          double within_user_split, std::uint64_t seed);

struct SyntheticParams {
  std::size_t n_users = 200;
  std::size_t samples_per_user = 30;
  // When greater than samples_per_user, each user draws its count uniformly from
  // [samples_per_user, samples_per_user_max].
  std::size_t samples_per_user_max = 0;
  std::size_t dim = 20;
  double cluster_spread = 1.0;
  double user_separation = 10.0;
  std::uint64_t seed = 0;
};

/**
 * Isotropic Gaussian user clusters.
 *
 * Centers are drawn from N(0, s^2 I) with s = user_separation / sqrt(2 dim),
 * so the expected squared distance between two centers is user_separation^2.
 * Samples are center + N(0, cluster_spread^2 I).
 */
Dataset generate_synthetic(const SyntheticParams& params);

Dataset load_csv(const std::filesystem::path& path);
Dataset parse_csv(std::istream& in);
void save_csv(const Dataset& data, const std::filesystem::path& path);
void write_csv(const Dataset& data, std::ostream& out);

Dataset to_dataset(const UserSamples& samples);
std::size_t sample_count(const UserSamples& samples);

// Split manifests list user and sample ids per part so a split can be replayed
// against the dataset it was drawn from.
nlohmann::json split_manifest(const MembershipSplit& split);
MembershipSplit apply_manifest(const Dataset& dataset, const nlohmann::json& manifest);

}  // namespace mi_embed
