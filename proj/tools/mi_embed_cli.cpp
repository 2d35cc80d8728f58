// mi-embed: command-line front end for the user-level membership inference toolkit.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "mi_embed/attack.hpp"
#include "mi_embed/baseline.hpp"
#include "mi_embed/dataset.hpp"
#include "mi_embed/embedding.hpp"
#include "mi_embed/errors.hpp"
#include "mi_embed/experiment.hpp"
#include "mi_embed/features.hpp"
#include "mi_embed/metrics.hpp"
#include "mi_embed/rng.hpp"
#include "mi_embed/shadow.hpp"

namespace fs = std::filesystem;
using namespace mi_embed;

namespace {

ExperimentConfig config_or_default(const std::string& path) {
  return path.empty() ? default_experiment_config() : load_config(path);
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return nlohmann::json::parse(in);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
}

nlohmann::json metrics_json(const BinaryMetrics& m) {
  const auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"accuracy", m.accuracy},
          {"precision", opt(m.precision)},
          {"recall", opt(m.recall)},
          {"true_positive", m.true_positive},
          {"false_positive", m.false_positive},
          {"true_negative", m.true_negative},
          {"false_negative", m.false_negative}};
}

// Ground truth for probe users from a split manifest: non-training members are
// members, non-members are non-members; anything else is left out of the metrics.
std::optional<MembershipLabel> truth_for(const nlohmann::json& manifest, const std::string& user) {
  if (manifest.at("nontraining_members").contains(user) || manifest.at("training_members").contains(user))
    return MembershipLabel::member;
  if (manifest.at("nonmembers").contains(user)) return MembershipLabel::nonmember;
  return std::nullopt;
}

struct ShadowDir {
  std::vector<MembershipSplit> splits;
  std::vector<Encoder> encoders;
};

ShadowDir load_shadow_dir(const fs::path& dir) {
  const Dataset pool = load_csv(dir / "pool.csv");
  ShadowDir out;
  for (std::size_t i = 0;; ++i) {
    const auto ckpt = dir / (shadow_encoder_id(i) + ".json");
    if (!fs::exists(ckpt)) break;
    out.encoders.push_back(load_encoder(ckpt));
    out.splits.push_back(apply_manifest(pool, read_json(dir / (shadow_encoder_id(i) + ".split.json"))));
  }
  if (out.encoders.empty()) throw Error("no shadow checkpoints in " + dir.string());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"User-level membership inference against metric-embedding models"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate synthetic user clusters as CSV");
  std::string gen_config, gen_out;
  std::uint64_t gen_seed = 0;
  std::optional<std::size_t> gen_users, gen_samples, gen_samples_max, gen_dim;
  std::optional<double> gen_spread, gen_separation;
  gen->add_option("--config", gen_config, "Experiment config; its [data] section supplies defaults");
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--out", gen_out, "Output CSV")->required();
  gen->add_option("--n-users", gen_users);
  gen->add_option("--samples-per-user", gen_samples);
  gen->add_option("--samples-per-user-max", gen_samples_max);
  gen->add_option("--dim", gen_dim);
  gen->add_option("--cluster-spread", gen_spread);
  gen->add_option("--user-separation", gen_separation);

  // train-victim
  auto* victim = app.add_subcommand("train-victim", "Partition a dataset and train the victim encoder");
  std::string victim_data, victim_config, victim_out, victim_split_out, victim_pool_out, victim_probe_out;
  std::uint64_t victim_seed = 0;
  victim->add_option("--data", victim_data, "Dataset CSV")->required();
  victim->add_option("--config", victim_config, "Experiment config ([split] and [victim] sections)");
  victim->add_option("--seed", victim_seed);
  victim->add_option("--out", victim_out, "Encoder checkpoint")->required();
  victim->add_option("--split-out", victim_split_out, "Split manifest (default: <out>.split.json)");
  victim->add_option("--pool-out", victim_pool_out, "Write the leftover shadow pool as CSV");
  victim->add_option("--probe-out", victim_probe_out, "Write non-training members and non-members as CSV");

  // train-shadows
  auto* shadows = app.add_subcommand("train-shadows", "Train shadow encoders and build the attack dataset");
  std::string shadow_pool, shadow_config_path, shadow_dir;
  std::uint64_t shadow_seed_value = 0;
  double shadow_proportion = 0.0;
  shadows->add_option("--pool", shadow_pool, "Shadow pool CSV")->required();
  shadows->add_option("--config", shadow_config_path, "Experiment config ([shadow], [victim], [split])");
  shadows->add_option("--seed", shadow_seed_value, "Master seed");
  shadows->add_option("--proportion", shadow_proportion, "Share of member feature samples taken from training members")
      ->check(CLI::Range(0.0, 1.0));
  shadows->add_option("--out-dir", shadow_dir, "Output directory")->required();

  // train-attack
  auto* attack = app.add_subcommand("train-attack", "Train the membership classifier");
  std::string attack_data, attack_features = "both", attack_out, attack_config;
  std::uint64_t attack_seed = 0;
  attack->add_option("--attack-dataset", attack_data)->required();
  attack->add_option("--features", attack_features)->check(CLI::IsMember({"c", "p", "both"}));
  attack->add_option("--out", attack_out)->required();
  attack->add_option("--config", attack_config, "Experiment config ([attack] section)");
  attack->add_option("--seed", attack_seed);

  // infer
  auto* infer = app.add_subcommand("infer", "Issue user-level verdicts against a victim encoder");
  std::string infer_model, infer_victim, infer_data, infer_report, infer_truth;
  std::size_t infer_k = 15;
  std::uint64_t infer_seed = 0;
  infer->add_option("--attack-model", infer_model)->required();
  infer->add_option("--victim", infer_victim)->required();
  infer->add_option("--data", infer_data)->required();
  infer->add_option("--k", infer_k)->required();
  infer->add_option("--report", infer_report)->required();
  infer->add_option("--seed", infer_seed);
  infer->add_option("--truth", infer_truth, "Split manifest for scoring the verdicts");

  // baseline-encodermi
  auto* base = app.add_subcommand("baseline-encodermi", "Augmentation-similarity baseline with majority voting");
  std::string base_victim, base_data, base_mode, base_shadow_dir, base_report, base_config, base_truth;
  std::uint64_t base_seed = 0;
  base->add_option("--victim", base_victim)->required();
  base->add_option("--data", base_data)->required();
  base->add_option("--mode", base_mode)->required()->check(CLI::IsMember({"full", "unknown"}));
  base->add_option("--shadow-dir", base_shadow_dir)->required();
  base->add_option("--report", base_report)->required();
  base->add_option("--config", base_config, "Experiment config ([baseline] section)");
  base->add_option("--seed", base_seed);
  base->add_option("--truth", base_truth, "Split manifest for scoring the verdicts");

  // experiment
  auto* exp = app.add_subcommand("experiment", "Run an experiment grid end to end");
  std::string exp_config, exp_out, exp_table;
  std::optional<std::uint64_t> exp_seed;
  std::optional<std::size_t> exp_repeats;
  exp->add_option("--config", exp_config)->required();
  exp->add_option("--out", exp_out, "Structured (JSON) report")->required();
  exp->add_option("--table", exp_table, "Also write a human-readable table");
  exp->add_option("--seed", exp_seed, "Override [experiment] seed");
  exp->add_option("--repeats", exp_repeats, "Override [experiment] repeats");

  // report
  auto* rep = app.add_subcommand("report", "Render a structured report");
  std::string rep_in, rep_format = "table", rep_out;
  rep->add_option("--in", rep_in)->required();
  rep->add_option("--format", rep_format)->check(CLI::IsMember({"table", "json"}));
  rep->add_option("--out", rep_out, "Output path (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      SyntheticParams p = config_or_default(gen_config).synthetic;
      p.seed = gen_seed;
      if (gen_users) p.n_users = *gen_users;
      if (gen_samples) p.samples_per_user = *gen_samples;
      if (gen_samples_max) p.samples_per_user_max = *gen_samples_max;
      if (gen_dim) p.dim = *gen_dim;
      if (gen_spread) p.cluster_spread = *gen_spread;
      if (gen_separation) p.user_separation = *gen_separation;
      save_csv(generate_synthetic(p), gen_out);
    } else if (*victim) {
      const auto cfg = config_or_default(victim_config);
      const Dataset data = load_csv(victim_data);
      const auto split = partition(data, cfg.n_members, cfg.n_nonmembers, cfg.within_user_split,
                                   derive_seed(victim_seed, streams::kSplit));
      TrainingConfig tc = cfg.victim;
      tc.seed = derive_seed(victim_seed, streams::kVictim);
      const Encoder enc = train_encoder(split.training_members, tc);
      save_encoder(enc, victim_out);
      write_text(victim_split_out.empty() ? victim_out + ".split.json" : victim_split_out,
                 split_manifest(split).dump(2) + "\n");
      if (!victim_pool_out.empty()) save_csv(to_dataset(split.shadow_pool), victim_pool_out);
      if (!victim_probe_out.empty()) {
        Dataset probe = to_dataset(split.nontraining_members);
        const Dataset nm = to_dataset(split.nonmembers);
        probe.insert(probe.end(), nm.begin(), nm.end());
        save_csv(probe, victim_probe_out);
      }
      std::cout << "victim trained on " << split.training_members.size() << " users, final loss " << enc.final_loss
                << '\n';
    } else if (*shadows) {
      const auto cfg = config_or_default(shadow_config_path);
      ShadowConfig sc = shadow_config(cfg, shadow_seed_value);
      sc.training_proportion = shadow_proportion;
      const Dataset pool = load_csv(shadow_pool);
      const auto splits = build_shadow_splits(pool, sc);
      const auto run = run_shadows(splits, sc);
      fs::create_directories(shadow_dir);
      save_csv(pool, fs::path(shadow_dir) / "pool.csv");
      for (std::size_t i = 0; i < splits.size(); ++i) {
        save_encoder(run.encoders[i], fs::path(shadow_dir) / (shadow_encoder_id(i) + ".json"));
        write_text(fs::path(shadow_dir) / (shadow_encoder_id(i) + ".split.json"),
                   split_manifest(splits[i]).dump(2) + "\n");
      }
      std::ofstream out(fs::path(shadow_dir) / "attack_dataset.csv");
      write_attack_dataset(run.dataset, out);
      std::cout << "trained " << splits.size() << " shadows, " << run.dataset.rows.size() << " attack rows\n";
    } else if (*attack) {
      const auto cfg = config_or_default(attack_config);
      std::ifstream in(attack_data);
      if (!in) throw Error("cannot open " + attack_data);
      const auto data = read_attack_dataset(in);
      const auto model = train_attack(data, feature_mode_from_string(attack_features), cfg.attack,
                                      derive_seed(attack_seed, streams::kAttack));
      save_attack_model(model, attack_out);
    } else if (*infer) {
      const auto model = load_attack_model(infer_model);
      const auto enc = load_encoder(infer_victim);
      const Dataset data = load_csv(infer_data);
      std::optional<nlohmann::json> truth;
      if (!infer_truth.empty()) truth = read_json(infer_truth);
      nlohmann::json report;
      auto& users = report["users"] = nlohmann::json::array();
      std::vector<MembershipLabel> verdicts, labels;
      for (const auto& cluster : data) {
        const auto r = infer_user(model, enc, cluster, infer_k, derive_seed(infer_seed, stable_hash(cluster.user_id)));
        users.push_back({{"user_id", cluster.user_id},
                         {"verdict", to_string(r.verdict)},
                         {"score", r.score},
                         {"c_u", r.features.c_u},
                         {"p_u", r.features.p_u},
                         {"k_used", r.features.k_used}});
        if (truth)
          if (auto label = truth_for(*truth, cluster.user_id)) {
            verdicts.push_back(r.verdict);
            labels.push_back(*label);
          }
      }
      if (!verdicts.empty()) report["metrics"] = metrics_json(evaluate(verdicts, labels));
      write_text(infer_report, report.dump(2) + "\n");
    } else if (*base) {
      const auto cfg = config_or_default(base_config);
      const auto enc = load_encoder(base_victim);
      const Dataset data = load_csv(base_data);
      const auto shadow = load_shadow_dir(base_shadow_dir);
      const auto mode = knowledge_mode_from_string(base_mode);
      const auto spec = attacker_augmentations(enc, mode, cfg.unknown_augmentations);
      const std::uint64_t seed = derive_seed(base_seed, streams::kBaseline);
      const double threshold =
          fit_vote_threshold(score_shadow_users(shadow.splits, shadow.encoders, spec, derive_seed(seed, 0)));
      std::optional<nlohmann::json> truth;
      if (!base_truth.empty()) truth = read_json(base_truth);
      nlohmann::json report;
      report["mode"] = to_string(mode);
      report["threshold"] = threshold;
      auto& users = report["users"] = nlohmann::json::array();
      std::vector<MembershipLabel> verdicts, labels;
      for (const auto& cluster : data) {
        const auto verdict = user_verdict(enc, cluster.samples, spec, threshold, derive_seed(seed, 1));
        users.push_back({{"user_id", cluster.user_id}, {"verdict", to_string(verdict)}});
        if (truth)
          if (auto label = truth_for(*truth, cluster.user_id)) {
            verdicts.push_back(verdict);
            labels.push_back(*label);
          }
      }
      if (!verdicts.empty()) report["metrics"] = metrics_json(evaluate(verdicts, labels));
      write_text(base_report, report.dump(2) + "\n");
    } else if (*exp) {
      auto cfg = load_config(exp_config);
      if (exp_seed) cfg.seed = *exp_seed;
      if (exp_repeats) cfg.repeats = *exp_repeats;
      const auto report = run_experiment(cfg);
      write_text(exp_out, report_render(report, ReportFormat::json));
      const auto table = report_render(report, ReportFormat::table);
      if (!exp_table.empty()) write_text(exp_table, table);
      std::cout << table;
      if (!report.complete()) {
        std::cerr << "one or more repeats aborted\n";
        return 2;
      }
    } else if (*rep) {
      const auto report = report_from_json(read_json(rep_in));
      const auto text = report_render(report, report_format_from_string(rep_format));
      if (rep_out.empty())
        std::cout << text;
      else
        write_text(rep_out, text);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
