#include "mi_embed/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "mi_embed/errors.hpp"
#include "mi_embed/rng.hpp"

namespace mi_embed {

namespace {

std::set<std::string> user_set(const UserSamples& part) {
  std::set<std::string> users;
  for (const auto& [user, _] : part) users.insert(user);
  return users;
}

bool intersects(const std::set<std::string>& a, const std::set<std::string>& b) {
  return std::any_of(a.begin(), a.end(), [&](const std::string& x) { return b.count(x) > 0; });
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

std::string format_double(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, end);
}

}  // namespace

void validate_split(const MembershipSplit& split) {
  const auto check_users = [](const UserSamples& part, const char* name) {
    for (const auto& [user, samples] : part) {
      if (samples.empty()) throw InvalidArgument(std::string(name) + " has an empty entry for user " + user);
      for (const auto& s : samples)
        if (s.user_id != user) throw InvalidArgument(std::string(name) + " files sample " + s.sample_id + " under the wrong user");
    }
  };
  check_users(split.training_members, "training_members");
  check_users(split.nontraining_members, "nontraining_members");
  check_users(split.nonmembers, "nonmembers");
  check_users(split.shadow_pool, "shadow_pool");

  const auto members = user_set(split.training_members);
  if (members != user_set(split.nontraining_members))
    throw InvalidArgument("training and non-training members must cover the same users");
  const auto nonmembers = user_set(split.nonmembers);
  const auto shadow = user_set(split.shadow_pool);
  if (intersects(members, nonmembers)) throw InvalidArgument("non-member users overlap member users");
  if (intersects(shadow, members) || intersects(shadow, nonmembers))
    throw InvalidArgument("shadow pool users overlap the victim split");

  std::set<std::string> sample_ids;
  for (const auto* part : {&split.training_members, &split.nontraining_members, &split.nonmembers, &split.shadow_pool})
    for (const auto& [_, samples] : *part)
      for (const auto& s : samples)
        if (!sample_ids.insert(s.sample_id).second)
          throw InvalidArgument("sample " + s.sample_id + " appears in more than one place");
}

MembershipSplit partition(const Dataset& dataset, std::size_t n_members, std::size_t n_nonmembers,
                          double within_user_split, std::uint64_t seed) {
  if (!(within_user_split > 0.0 && within_user_split < 1.0))
    throw InvalidArgument("within_user_split must lie strictly between 0 and 1");
  if (dataset.size() < n_members + n_nonmembers)
    throw SizingError("partition needs " + std::to_string(n_members + n_nonmembers) + " users, dataset has " +
                      std::to_string(dataset.size()));

  Rng rng(seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::size_t> member_idx;
  std::vector<bool> taken(dataset.size(), false);
  for (std::size_t i : order) {
    if (member_idx.size() == n_members) break;
    if (dataset[i].samples.size() >= 2) {
      member_idx.push_back(i);
      taken[i] = true;
    }
  }
  if (member_idx.size() < n_members)
    throw SizingError("only " + std::to_string(member_idx.size()) + " users have the 2+ samples needed for " +
                      std::to_string(n_members) + " members");

  MembershipSplit split;
  std::size_t nonmember_count = 0;
  for (std::size_t i : order) {
    if (taken[i]) continue;
    const auto& user = dataset[i];
    if (nonmember_count < n_nonmembers) {
      split.nonmembers[user.user_id] = user.samples;
      ++nonmember_count;
    } else if (!user.samples.empty()) {
      split.shadow_pool[user.user_id] = user.samples;
    }
  }

  for (std::size_t i : member_idx) {
    const auto& user = dataset[i];
    const std::size_t m = user.samples.size();
    auto n_train = static_cast<std::size_t>(std::ceil(within_user_split * static_cast<double>(m) - 1e-9));
    n_train = std::clamp<std::size_t>(n_train, 1, m - 1);
    std::vector<std::size_t> idx(m);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<bool> to_train(m, false);
    for (std::size_t j = 0; j < n_train; ++j) to_train[idx[j]] = true;
    auto& train = split.training_members[user.user_id];
    auto& held = split.nontraining_members[user.user_id];
    for (std::size_t j = 0; j < m; ++j) (to_train[j] ? train : held).push_back(user.samples[j]);
  }
  return split;
}

Dataset generate_synthetic(const SyntheticParams& p) {
  if (p.n_users == 0 || p.samples_per_user == 0) throw InvalidArgument("synthetic counts must be at least 1");
  if (p.dim < 2) throw InvalidArgument("synthetic dim must be at least 2");
  if (!(p.cluster_spread >= 0.0) || !(p.user_separation > 0.0))
    throw InvalidArgument("cluster_spread must be >= 0 and user_separation > 0");
  Rng rng(p.seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  const double center_scale = p.user_separation / std::sqrt(2.0 * static_cast<double>(p.dim));
  const std::size_t max_count = std::max(p.samples_per_user, p.samples_per_user_max);
  std::uniform_int_distribution<std::size_t> count_dist(p.samples_per_user, max_count);

  Dataset data;
  data.reserve(p.n_users);
  for (std::size_t u = 0; u < p.n_users; ++u) {
    char uid[32];
    std::snprintf(uid, sizeof(uid), "u%05zu", u);
    UserCluster cluster{uid, {}};
    Vector center(p.dim);
    for (auto& c : center) c = center_scale * unit(rng);
    const std::size_t count = max_count > p.samples_per_user ? count_dist(rng) : p.samples_per_user;
    for (std::size_t s = 0; s < count; ++s) {
      Sample sample{uid, std::string(uid) + "_s" + std::to_string(s), Vector(p.dim)};
      for (std::size_t d = 0; d < p.dim; ++d) sample.features[d] = center[d] + p.cluster_spread * unit(rng);
      cluster.samples.push_back(std::move(sample));
    }
    data.push_back(std::move(cluster));
  }
  return data;
}

Dataset parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing header", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_fields(line);
  if (header.size() < 3 || header[0] != "user_id" || header[1] != "sample_id")
    throw ParseError("header must start with user_id,sample_id,f0", 1);
  const std::size_t dim = header.size() - 2;
  for (std::size_t d = 0; d < dim; ++d)
    if (header[d + 2] != "f" + std::to_string(d)) throw ParseError("expected feature column f" + std::to_string(d), 1);

  Dataset data;
  std::unordered_map<std::string, std::size_t> user_index;
  std::set<std::string> seen_samples;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != dim + 2)
      throw ParseError("expected " + std::to_string(dim + 2) + " fields, found " + std::to_string(fields.size()), row);
    if (fields[0].empty() || fields[1].empty()) throw ParseError("empty user_id or sample_id", row);
    Sample sample{std::string(fields[0]), std::string(fields[1]), Vector(dim)};
    for (std::size_t d = 0; d < dim; ++d) {
      const auto f = fields[d + 2];
      double value = 0.0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), value);
      if (ec != std::errc() || ptr != f.data() + f.size() || f.empty())
        throw ParseError("non-numeric feature '" + std::string(f) + "'", row);
      if (!std::isfinite(value)) throw ParseError("non-finite feature", row);
      sample.features[d] = value;
    }
    if (!seen_samples.insert(sample.sample_id).second) throw ParseError("duplicate sample_id " + sample.sample_id, row);
    auto [it, inserted] = user_index.try_emplace(sample.user_id, data.size());
    if (inserted) data.push_back(UserCluster{sample.user_id, {}});
    data[it->second].samples.push_back(std::move(sample));
  }
  return data;
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return parse_csv(in);
}

void write_csv(const Dataset& data, std::ostream& out) {
  std::size_t dim = 0;
  for (const auto& c : data)
    for (const auto& s : c.samples) {
      if (dim == 0) dim = s.features.size();
      if (s.features.size() != dim) throw DimensionError("ragged feature vectors in dataset");
    }
  if (dim == 0) dim = 1;
  out << "user_id,sample_id";
  for (std::size_t d = 0; d < dim; ++d) out << ",f" << d;
  out << '\n';
  for (const auto& c : data)
    for (const auto& s : c.samples) {
      out << s.user_id << ',' << s.sample_id;
      for (double x : s.features) out << ',' << format_double(x);
      out << '\n';
    }
}

void save_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_csv(data, out);
}

Dataset to_dataset(const UserSamples& samples) {
  Dataset data;
  for (const auto& [user, s] : samples) data.push_back(UserCluster{user, s});
  return data;
}

std::size_t sample_count(const UserSamples& samples) {
  std::size_t n = 0;
  for (const auto& [_, s] : samples) n += s.size();
  return n;
}

nlohmann::json split_manifest(const MembershipSplit& split) {
  const auto part = [](const UserSamples& p) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [user, samples] : p) {
      auto& ids = j[user] = nlohmann::json::array();
      for (const auto& s : samples) ids.push_back(s.sample_id);
    }
    return j;
  };
  return {{"format_version", 1},
          {"training_members", part(split.training_members)},
          {"nontraining_members", part(split.nontraining_members)},
          {"nonmembers", part(split.nonmembers)},
          {"shadow_pool", part(split.shadow_pool)}};
}

MembershipSplit apply_manifest(const Dataset& dataset, const nlohmann::json& manifest) {
  std::unordered_map<std::string, const Sample*> by_id;
  for (const auto& c : dataset)
    for (const auto& s : c.samples) by_id.emplace(s.sample_id, &s);

  const auto part = [&](const char* key) {
    UserSamples out;
    if (!manifest.contains(key)) throw InvalidArgument(std::string("split manifest lacks ") + key);
    for (const auto& [user, ids] : manifest.at(key).items()) {
      auto& samples = out[user];
      for (const auto& id : ids) {
        const auto it = by_id.find(id.get<std::string>());
        if (it == by_id.end()) throw InvalidArgument("manifest sample " + id.get<std::string>() + " not in dataset");
        samples.push_back(*it->second);
      }
    }
    return out;
  };
  MembershipSplit split{part("training_members"), part("nontraining_members"), part("nonmembers"),
                        part("shadow_pool")};
  validate_split(split);
  return split;
}

}  // namespace mi_embed
