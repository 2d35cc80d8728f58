#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mi_embed/baseline.hpp"
#include "mi_embed/errors.hpp"
#include "mi_embed/experiment.hpp"

namespace mi_embed {

namespace pt = boost::property_tree;

namespace {

std::string fmt(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, end);
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>)
      out += fmt(xs[i]);
    else
      out += std::to_string(xs[i]);
  }
  return out;
}

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"experiment", {"kind", "repeats", "seed", "k", "workers"}},
      {"data",
       {"csv", "n_users", "samples_per_user", "samples_per_user_max", "dim", "cluster_spread", "user_separation"}},
      {"split", {"n_members", "n_nonmembers", "within_user_split"}},
      {"victim",
       {"epochs", "lr", "momentum", "identities_per_batch", "samples_per_identity", "hidden", "embedding_dim",
        "augmentation", "aug_noise_sigma", "aug_dropout_rate", "aug_scale_min", "aug_scale_max", "aug_views"}},
      {"shadow", {"n_shadows", "member_users", "nonmember_users"}},
      {"attack", {"epochs", "lr", "momentum", "batch_size", "hidden", "features"}},
      {"baseline", {"enabled", "noise_sigma", "dropout_rate", "scale_min", "scale_max", "n_views"}},
      {"sweep", {"proportions"}},
      {"groups", {"count"}},
  };
  return keys;
}

class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {}

  std::optional<std::string> raw(const std::string& section, const std::string& key) const {
    const auto sec = tree_.get_child_optional(section);
    if (!sec) return std::nullopt;
    const auto v = sec->get_optional<std::string>(key);
    if (!v) return std::nullopt;
    return *v;
  }

  void real(const std::string& s, const std::string& k, double& out) const {
    if (auto v = raw(s, k)) out = parse_real(*v, s + "." + k);
  }

  template <typename T>
  void count(const std::string& s, const std::string& k, T& out) const {
    if (auto v = raw(s, k)) {
      T value{};
      auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), value);
      if (ec != std::errc() || ptr != v->data() + v->size() || v->empty())
        throw InvalidArgument("config " + s + "." + k + " expects a non-negative integer, got '" + *v + "'");
      out = value;
    }
  }

  void flag(const std::string& s, const std::string& k, bool& out) const {
    if (auto v = raw(s, k)) {
      if (*v == "true" || *v == "1" || *v == "yes") out = true;
      else if (*v == "false" || *v == "0" || *v == "no") out = false;
      else throw InvalidArgument("config " + s + "." + k + " expects true/false");
    }
  }

  void text(const std::string& s, const std::string& k, std::string& out) const {
    if (auto v = raw(s, k)) out = *v;
  }

  template <typename T>
  void list(const std::string& s, const std::string& k, std::vector<T>& out) const {
    auto v = raw(s, k);
    if (!v) return;
    out.clear();
    std::stringstream ss(*v);
    for (std::string item; std::getline(ss, item, ',');) {
      item.erase(0, item.find_first_not_of(" \t"));
      item.erase(item.find_last_not_of(" \t") + 1);
      if (item.empty()) continue;
      if constexpr (std::is_floating_point_v<T>) {
        out.push_back(parse_real(item, s + "." + k));
      } else {
        T value{};
        auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
        if (ec != std::errc() || ptr != item.data() + item.size())
          throw InvalidArgument("config " + s + "." + k + " has a bad list entry '" + item + "'");
        out.push_back(value);
      }
    }
  }

 private:
  static double parse_real(const std::string& v, const std::string& where) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), value);
    if (ec != std::errc() || ptr != v.data() + v.size() || v.empty())
      throw InvalidArgument("config " + where + " expects a number, got '" + v + "'");
    return value;
  }

  const pt::ptree& tree_;
};

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::main:
      return "main";
    case ExperimentKind::training_access_sweep:
      return "training_access_sweep";
    case ExperimentKind::ablation:
      return "ablation";
    default:
      return "group_recall";
  }
}

ExperimentKind experiment_kind_from_string(const std::string& s) {
  if (s == "main") return ExperimentKind::main;
  if (s == "training_access_sweep") return ExperimentKind::training_access_sweep;
  if (s == "ablation") return ExperimentKind::ablation;
  if (s == "group_recall") return ExperimentKind::group_recall;
  throw InvalidArgument("unknown experiment kind '" + s + "'");
}

ExperimentConfig default_experiment_config() {
  ExperimentConfig c;
  c.unknown_augmentations = default_unknown_augmentations();
  return c;
}

void ExperimentConfig::validate() const {
  if (repeats < 1) throw InvalidArgument("repeats must be at least 1");
  if (k < 2) throw InvalidArgument("k must be at least 2");
  if (n_members < 1 || n_nonmembers < 1) throw InvalidArgument("victim split needs members and non-members");
  if (!(within_user_split > 0.0 && within_user_split < 1.0))
    throw InvalidArgument("within_user_split must lie strictly between 0 and 1");
  if (n_shadows < 1 || shadow_member_users < 1 || shadow_nonmember_users < 1)
    throw InvalidArgument("shadow counts must be at least 1");
  if (groups < 1) throw InvalidArgument("group count must be at least 1");
  for (double p : proportions)
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("sweep proportions must lie in [0, 1]");
  if (victim.augmentation) victim.augmentation->validate();
  if (baseline) unknown_augmentations.validate();
  if (!csv_path.empty() && !std::filesystem::exists(csv_path))
    throw InvalidArgument("data csv " + csv_path + " does not exist");
}

ExperimentConfig parse_config(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw InvalidArgument(std::string("cannot parse config: ") + e.what());
  }
  const auto& known = known_keys();
  for (const auto& [section, body] : tree) {
    const auto it = known.find(section);
    if (it == known.end()) throw InvalidArgument("unknown config section [" + section + "]");
    for (const auto& [key, _] : body)
      if (!it->second.count(key)) throw InvalidArgument("unknown config key " + section + "." + key);
  }

  ExperimentConfig c = default_experiment_config();
  Reader r(tree);
  std::string kind = to_string(c.kind);
  r.text("experiment", "kind", kind);
  c.kind = experiment_kind_from_string(kind);
  r.count("experiment", "repeats", c.repeats);
  r.count("experiment", "seed", c.seed);
  r.count("experiment", "k", c.k);
  r.count("experiment", "workers", c.workers);

  r.text("data", "csv", c.csv_path);
  r.count("data", "n_users", c.synthetic.n_users);
  r.count("data", "samples_per_user", c.synthetic.samples_per_user);
  r.count("data", "samples_per_user_max", c.synthetic.samples_per_user_max);
  r.count("data", "dim", c.synthetic.dim);
  r.real("data", "cluster_spread", c.synthetic.cluster_spread);
  r.real("data", "user_separation", c.synthetic.user_separation);

  r.count("split", "n_members", c.n_members);
  r.count("split", "n_nonmembers", c.n_nonmembers);
  r.real("split", "within_user_split", c.within_user_split);

  r.count("victim", "epochs", c.victim.epochs);
  r.real("victim", "lr", c.victim.lr);
  r.real("victim", "momentum", c.victim.momentum);
  r.count("victim", "identities_per_batch", c.victim.identities_per_batch);
  r.count("victim", "samples_per_identity", c.victim.samples_per_identity);
  r.list("victim", "hidden", c.victim.hidden);
  r.count("victim", "embedding_dim", c.victim.embedding_dim);
  bool augmentation = false;
  r.flag("victim", "augmentation", augmentation);
  if (augmentation) {
    AugmentationSpec a;
    r.real("victim", "aug_noise_sigma", a.noise_sigma);
    r.real("victim", "aug_dropout_rate", a.dropout_rate);
    r.real("victim", "aug_scale_min", a.scale_min);
    r.real("victim", "aug_scale_max", a.scale_max);
    r.count("victim", "aug_views", a.n_views);
    c.victim.augmentation = a;
  }

  r.count("shadow", "n_shadows", c.n_shadows);
  r.count("shadow", "member_users", c.shadow_member_users);
  r.count("shadow", "nonmember_users", c.shadow_nonmember_users);

  r.count("attack", "epochs", c.attack.epochs);
  r.real("attack", "lr", c.attack.lr);
  r.real("attack", "momentum", c.attack.momentum);
  r.count("attack", "batch_size", c.attack.batch_size);
  r.list("attack", "hidden", c.attack.hidden);
  std::string features = to_string(c.feature_mode);
  r.text("attack", "features", features);
  c.feature_mode = feature_mode_from_string(features);

  r.flag("baseline", "enabled", c.baseline);
  r.real("baseline", "noise_sigma", c.unknown_augmentations.noise_sigma);
  r.real("baseline", "dropout_rate", c.unknown_augmentations.dropout_rate);
  r.real("baseline", "scale_min", c.unknown_augmentations.scale_min);
  r.real("baseline", "scale_max", c.unknown_augmentations.scale_max);
  r.count("baseline", "n_views", c.unknown_augmentations.n_views);

  r.list("sweep", "proportions", c.proportions);
  r.count("groups", "count", c.groups);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string render_config(const ExperimentConfig& c) {
  pt::ptree tree;
  tree.put("experiment.kind", to_string(c.kind));
  tree.put("experiment.repeats", c.repeats);
  tree.put("experiment.seed", c.seed);
  tree.put("experiment.k", c.k);
  tree.put("experiment.workers", c.workers);

  if (!c.csv_path.empty()) tree.put("data.csv", c.csv_path);
  tree.put("data.n_users", c.synthetic.n_users);
  tree.put("data.samples_per_user", c.synthetic.samples_per_user);
  tree.put("data.samples_per_user_max", c.synthetic.samples_per_user_max);
  tree.put("data.dim", c.synthetic.dim);
  tree.put("data.cluster_spread", fmt(c.synthetic.cluster_spread));
  tree.put("data.user_separation", fmt(c.synthetic.user_separation));

  tree.put("split.n_members", c.n_members);
  tree.put("split.n_nonmembers", c.n_nonmembers);
  tree.put("split.within_user_split", fmt(c.within_user_split));

  tree.put("victim.epochs", c.victim.epochs);
  tree.put("victim.lr", fmt(c.victim.lr));
  tree.put("victim.momentum", fmt(c.victim.momentum));
  tree.put("victim.identities_per_batch", c.victim.identities_per_batch);
  tree.put("victim.samples_per_identity", c.victim.samples_per_identity);
  tree.put("victim.hidden", join(c.victim.hidden));
  tree.put("victim.embedding_dim", c.victim.embedding_dim);
  tree.put("victim.augmentation", c.victim.augmentation ? "true" : "false");
  if (c.victim.augmentation) {
    const auto& a = *c.victim.augmentation;
    tree.put("victim.aug_noise_sigma", fmt(a.noise_sigma));
    tree.put("victim.aug_dropout_rate", fmt(a.dropout_rate));
    tree.put("victim.aug_scale_min", fmt(a.scale_min));
    tree.put("victim.aug_scale_max", fmt(a.scale_max));
    tree.put("victim.aug_views", a.n_views);
  }

  tree.put("shadow.n_shadows", c.n_shadows);
  tree.put("shadow.member_users", c.shadow_member_users);
  tree.put("shadow.nonmember_users", c.shadow_nonmember_users);

  tree.put("attack.epochs", c.attack.epochs);
  tree.put("attack.lr", fmt(c.attack.lr));
  tree.put("attack.momentum", fmt(c.attack.momentum));
  tree.put("attack.batch_size", c.attack.batch_size);
  tree.put("attack.hidden", join(c.attack.hidden));
  tree.put("attack.features", to_string(c.feature_mode));

  tree.put("baseline.enabled", c.baseline ? "true" : "false");
  tree.put("baseline.noise_sigma", fmt(c.unknown_augmentations.noise_sigma));
  tree.put("baseline.dropout_rate", fmt(c.unknown_augmentations.dropout_rate));
  tree.put("baseline.scale_min", fmt(c.unknown_augmentations.scale_min));
  tree.put("baseline.scale_max", fmt(c.unknown_augmentations.scale_max));
  tree.put("baseline.n_views", c.unknown_augmentations.n_views);

  tree.put("sweep.proportions", join(c.proportions));
  tree.put("groups.count", c.groups);

  std::ostringstream out;
  pt::write_ini(out, tree);
  return out.str();
}

}  // namespace mi_embed
