#include "mi_embed/shadow.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "mi_embed/errors.hpp"
#include "mi_embed/parallel.hpp"
#include "mi_embed/rng.hpp"

namespace mi_embed {

void ShadowConfig::validate() const {
  if (n_shadows < 1 || member_users < 1 || nonmember_users < 1)
    throw InvalidArgument("shadow counts must be at least 1");
  if (k < 2) throw InvalidArgument("feature sample count k must be at least 2");
  if (!(training_proportion >= 0.0 && training_proportion <= 1.0))
    throw InvalidArgument("training proportion must be in [0, 1]");
}

std::size_t AttackDataset::count(MembershipLabel label) const {
  return static_cast<std::size_t>(
      std::count_if(rows.begin(), rows.end(), [&](const AttackRow& r) { return r.label == label; }));
}

std::uint64_t shadow_seed(std::uint64_t master_seed, std::size_t index) { return master_seed + index; }

std::string shadow_encoder_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "shadow_%03zu", index);
  return buf;
}

std::vector<MembershipSplit> build_shadow_splits(const Dataset& shadow_pool, const ShadowConfig& config) {
  config.validate();
  if (shadow_pool.size() < config.member_users + config.nonmember_users)
    throw SizingError("shadow pool has " + std::to_string(shadow_pool.size()) + " users, each shadow needs " +
                      std::to_string(config.member_users + config.nonmember_users));
  std::vector<MembershipSplit> splits;
  splits.reserve(config.n_shadows);
  for (std::size_t i = 0; i < config.n_shadows; ++i)
    splits.push_back(partition(shadow_pool, config.member_users, config.nonmember_users, config.within_user_split,
                               derive_seed(shadow_seed(config.master_seed, i), streams::kSplit)));
  return splits;
}

UserSamples mix_training_access(const MembershipSplit& split, double proportion, std::size_t k, std::uint64_t seed) {
  if (!(proportion >= 0.0 && proportion <= 1.0)) throw InvalidArgument("proportion must be in [0, 1]");
  const auto n_train = static_cast<std::size_t>(std::floor(proportion * static_cast<double>(k) + 1e-9));
  const std::size_t n_held = k - n_train;
  UserSamples pools;
  for (const auto& [user, held] : split.nontraining_members) {
    const auto it = split.training_members.find(user);
    const std::vector<Sample> empty;
    const auto& train = it == split.training_members.end() ? empty : it->second;
    if (train.size() < n_train || held.size() < n_held)
      throw SizingError("user " + user + " needs " + std::to_string(n_train) + " training and " +
                        std::to_string(n_held) + " non-training samples, has " + std::to_string(train.size()) +
                        " and " + std::to_string(held.size()));
    const std::uint64_t user_seed = derive_seed(seed, stable_hash(user));
    auto pool = subsample(train, n_train, derive_seed(user_seed, 1));
    auto rest = subsample(held, n_held, derive_seed(user_seed, 2));
    pool.insert(pool.end(), std::make_move_iterator(rest.begin()), std::make_move_iterator(rest.end()));
    pools.emplace(user, std::move(pool));
  }
  return pools;
}

std::vector<AttackRow> attack_rows(const Encoder& encoder, const MembershipSplit& split, std::size_t k,
                                   double proportion, std::uint64_t seed, std::size_t shadow_index,
                                   const std::string& encoder_id) {
  std::vector<AttackRow> rows;
  for (const auto& [user, pool] : mix_training_access(split, proportion, k, derive_seed(seed, 1)))
    rows.push_back({extract_features(encoder, user, pool, k, 0, encoder_id), MembershipLabel::member, shadow_index});
  for (const auto& [user, samples] : split.nonmembers)
    rows.push_back({extract_features(encoder, user, samples, k, derive_seed(seed, stable_hash(user)), encoder_id),
                    MembershipLabel::nonmember, shadow_index});
  std::sort(rows.begin(), rows.end(),
            [](const AttackRow& a, const AttackRow& b) { return a.features.user_id < b.features.user_id; });
  return rows;
}

std::vector<Encoder> train_shadows(const std::vector<MembershipSplit>& splits, const ShadowConfig& config) {
  config.validate();
  std::vector<Encoder> encoders(splits.size());
  parallel_for(splits.size(), config.workers ? config.workers : default_workers(), [&](std::size_t i) {
    TrainingConfig tc = config.encoder;
    tc.seed = derive_seed(shadow_seed(config.master_seed, i), streams::kShadow);
    try {
      encoders[i] = train_encoder(splits[i].training_members, tc);
    } catch (const TrainingDiverged& e) {
      throw TrainingDiverged("shadow " + std::to_string(i) + ": " + e.what(), e.epoch(), static_cast<long>(i));
    }
  });
  return encoders;
}

AttackDataset build_attack_dataset(const std::vector<MembershipSplit>& splits, const std::vector<Encoder>& encoders,
                                   const ShadowConfig& config, double proportion) {
  if (splits.size() != encoders.size()) throw InvalidArgument("one encoder per shadow split required");
  std::vector<std::vector<AttackRow>> per_shadow(splits.size());
  parallel_for(splits.size(), config.workers ? config.workers : default_workers(), [&](std::size_t i) {
    per_shadow[i] = attack_rows(encoders[i], splits[i], config.k, proportion,
                                derive_seed(shadow_seed(config.master_seed, i), streams::kFeatures), i,
                                shadow_encoder_id(i));
  });
  AttackDataset data;
  for (auto& rows : per_shadow) data.rows.insert(data.rows.end(), rows.begin(), rows.end());
  return data;
}

ShadowRun run_shadows(const std::vector<MembershipSplit>& splits, const ShadowConfig& config) {
  ShadowRun run;
  run.encoders = train_shadows(splits, config);
  run.dataset = build_attack_dataset(splits, run.encoders, config, config.training_proportion);
  return run;
}

void write_attack_dataset(const AttackDataset& data, std::ostream& out) {
  std::vector<FeatureRow> rows;
  rows.reserve(data.rows.size());
  for (const auto& r : data.rows) rows.push_back({r.features, r.label});
  std::ostringstream body;
  write_feature_cache(rows, body);
  std::istringstream lines(body.str());
  std::string line;
  std::getline(lines, line);
  out << line << ",shadow_index\n";
  for (const auto& r : data.rows) {
    std::getline(lines, line);
    out << line << ',' << r.shadow_index << '\n';
  }
}

AttackDataset read_attack_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "user_id,encoder_id,k_used,c_u,p_u,label,shadow_index")
    throw ParseError("attack dataset header missing", 1);
  std::ostringstream cache;
  cache << "user_id,encoder_id,k_used,c_u,p_u,label\n";
  std::vector<std::size_t> shadow_index;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto pos = line.rfind(',');
    if (pos == std::string::npos) throw ParseError("missing shadow_index", row);
    const auto idx = line.substr(pos + 1);
    if (idx.empty() || idx.find_first_not_of("0123456789") != std::string::npos)
      throw ParseError("bad shadow_index '" + idx + "'", row);
    shadow_index.push_back(std::stoul(idx));
    cache << line.substr(0, pos) << '\n';
  }
  std::istringstream cache_in(cache.str());
  const auto rows = read_feature_cache(cache_in);
  AttackDataset data;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].label == MembershipLabel::unknown) throw ParseError("attack rows must be labeled", i + 2);
    data.rows.push_back({rows[i].features, rows[i].label, shadow_index[i]});
  }
  return data;
}

}  // namespace mi_embed
