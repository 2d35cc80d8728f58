#include "mi_embed/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "mi_embed/baseline.hpp"
#include "mi_embed/errors.hpp"
#include "mi_embed/rng.hpp"

namespace mi_embed {

namespace {

struct RepeatContext {
  std::uint64_t seed = 0;
  MembershipSplit victim_split;
  Encoder victim;
  ShadowConfig shadow;
  std::vector<MembershipSplit> shadow_splits;
  std::vector<Encoder> shadow_encoders;
};

using CellResults = std::map<std::string, RepeatResult>;

RepeatContext prepare_repeat(const ExperimentConfig& c, const Dataset* csv_data, std::uint64_t seed) {
  RepeatContext ctx;
  ctx.seed = seed;
  Dataset generated;
  if (!csv_data) {
    SyntheticParams params = c.synthetic;
    params.seed = derive_seed(seed, streams::kData);
    generated = generate_synthetic(params);
  }
  const Dataset& data = csv_data ? *csv_data : generated;
  ctx.victim_split = partition(data, c.n_members, c.n_nonmembers, c.within_user_split, derive_seed(seed, streams::kSplit));

  TrainingConfig victim_cfg = c.victim;
  victim_cfg.seed = derive_seed(seed, streams::kVictim);
  ctx.victim = train_encoder(ctx.victim_split.training_members, victim_cfg);

  ctx.shadow = shadow_config(c, derive_seed(seed, streams::kShadow));
  ctx.shadow_splits = build_shadow_splits(to_dataset(ctx.victim_split.shadow_pool), ctx.shadow);
  ctx.shadow_encoders = train_shadows(ctx.shadow_splits, ctx.shadow);
  return ctx;
}

RepeatResult to_result(std::size_t repeat, const BinaryMetrics& m, std::string detail = {}) {
  return RepeatResult{repeat, m.accuracy, m.precision, m.recall, std::move(detail)};
}

struct VictimRows {
  std::vector<AttackRow> rows;
  std::vector<MembershipLabel> truth;
};

VictimRows victim_rows(const RepeatContext& ctx, std::size_t k, double proportion) {
  VictimRows v;
  v.rows = attack_rows(ctx.victim, ctx.victim_split, k, proportion, derive_seed(ctx.seed, streams::kFeatures), 0,
                       "victim");
  for (const auto& r : v.rows) v.truth.push_back(r.label);
  return v;
}

BinaryMetrics evaluate_attack(const AttackModel& model, const VictimRows& v) {
  std::vector<MembershipLabel> verdicts;
  for (const auto& r : v.rows) verdicts.push_back(infer_features(model, r.features).verdict);
  return evaluate(verdicts, v.truth);
}

AttackModel train_on_shadows(const ExperimentConfig& c, const RepeatContext& ctx, double proportion,
                             FeatureMode mode) {
  const auto data = build_attack_dataset(ctx.shadow_splits, ctx.shadow_encoders, ctx.shadow, proportion);
  return train_attack(data, mode, c.attack, derive_seed(ctx.seed, streams::kAttack));
}

BinaryMetrics evaluate_baseline(const ExperimentConfig& c, const RepeatContext& ctx, KnowledgeMode mode) {
  const auto spec = attacker_augmentations(ctx.victim, mode, c.unknown_augmentations);
  const std::uint64_t seed = derive_seed(ctx.seed, streams::kBaseline);
  const auto shadow_users = score_shadow_users(ctx.shadow_splits, ctx.shadow_encoders, spec, derive_seed(seed, 0));
  const double threshold = fit_vote_threshold(shadow_users);
  std::vector<MembershipLabel> verdicts;
  std::vector<MembershipLabel> truth;
  for (const auto& [user, samples] : ctx.victim_split.nontraining_members) {
    verdicts.push_back(user_verdict(ctx.victim, samples, spec, threshold, derive_seed(seed, 1)));
    truth.push_back(MembershipLabel::member);
  }
  for (const auto& [user, samples] : ctx.victim_split.nonmembers) {
    verdicts.push_back(user_verdict(ctx.victim, samples, spec, threshold, derive_seed(seed, 1)));
    truth.push_back(MembershipLabel::nonmember);
  }
  return evaluate(verdicts, truth);
}

std::vector<std::string> cell_names(const ExperimentConfig& c) {
  switch (c.kind) {
    case ExperimentKind::main:
      if (c.baseline) return {kCellAttack, kCellEncoderMiUnknown, kCellEncoderMiFull};
      return {kCellAttack};
    case ExperimentKind::training_access_sweep: {
      std::vector<std::string> names;
      for (double p : c.proportions) names.push_back(proportion_cell(p));
      return names;
    }
    case ExperimentKind::ablation:
      return {to_string(FeatureMode::c_only), to_string(FeatureMode::p_only), to_string(FeatureMode::both)};
    default: {
      std::vector<std::string> names;
      for (std::size_t g = 0; g < c.groups; ++g) names.push_back(group_cell(g));
      return names;
    }
  }
}

CellResults run_repeat(const ExperimentConfig& c, const Dataset* csv_data, std::size_t repeat, std::uint64_t seed) {
  const RepeatContext ctx = prepare_repeat(c, csv_data, seed);
  CellResults cells;
  switch (c.kind) {
    case ExperimentKind::main: {
      const auto model = train_on_shadows(c, ctx, 0.0, c.feature_mode);
      cells[kCellAttack] = to_result(repeat, evaluate_attack(model, victim_rows(ctx, c.k, 0.0)));
      if (c.baseline) {
        cells[kCellEncoderMiUnknown] =
            to_result(repeat, evaluate_baseline(c, ctx, KnowledgeMode::unknown_augmentations));
        cells[kCellEncoderMiFull] = to_result(repeat, evaluate_baseline(c, ctx, KnowledgeMode::full_knowledge));
      }
      break;
    }
    case ExperimentKind::training_access_sweep:
      for (double p : c.proportions) {
        const auto model = train_on_shadows(c, ctx, p, c.feature_mode);
        cells[proportion_cell(p)] = to_result(repeat, evaluate_attack(model, victim_rows(ctx, c.k, p)));
      }
      break;
    case ExperimentKind::ablation: {
      const auto rows = victim_rows(ctx, c.k, 0.0);
      const auto data = build_attack_dataset(ctx.shadow_splits, ctx.shadow_encoders, ctx.shadow, 0.0);
      for (auto mode : {FeatureMode::c_only, FeatureMode::p_only, FeatureMode::both}) {
        const auto model = train_attack(data, mode, c.attack, derive_seed(ctx.seed, streams::kAttack));
        cells[to_string(mode)] = to_result(repeat, evaluate_attack(model, rows));
      }
      break;
    }
    case ExperimentKind::group_recall: {
      const auto model = train_on_shadows(c, ctx, 0.0, c.feature_mode);
      const auto rows = victim_rows(ctx, c.k, 0.0);
      struct MemberVerdict {
        std::size_t training_count;
        std::string user;
        MembershipLabel verdict;
      };
      std::vector<MemberVerdict> members;
      for (const auto& r : rows.rows) {
        if (r.label != MembershipLabel::member) continue;
        members.push_back({ctx.victim_split.training_members.at(r.features.user_id).size(), r.features.user_id,
                           infer_features(model, r.features).verdict});
      }
      // Group 1 holds the users with the most training samples.
      std::sort(members.begin(), members.end(), [](const MemberVerdict& a, const MemberVerdict& b) {
        return a.training_count != b.training_count ? a.training_count > b.training_count : a.user < b.user;
      });
      const std::size_t n = members.size();
      for (std::size_t g = 0; g < c.groups; ++g) {
        const std::size_t lo = g * n / c.groups;
        const std::size_t hi = (g + 1) * n / c.groups;
        RepeatResult result{repeat, std::nullopt, std::nullopt, std::nullopt, "empty"};
        if (hi > lo) {
          std::size_t hits = 0;
          for (std::size_t i = lo; i < hi; ++i) hits += members[i].verdict == MembershipLabel::member;
          result.recall = 100.0 * static_cast<double>(hits) / static_cast<double>(hi - lo);
          result.detail = std::to_string(members[hi - 1].training_count) + " <= n <= " +
                          std::to_string(members[lo].training_count);
        }
        cells[group_cell(g)] = result;
      }
      break;
    }
  }
  return cells;
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::optional<double> optional_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

nlohmann::json aggregate_json(const Aggregate& a) {
  return {{"mean", optional_json(a.mean)}, {"std", a.stddev}, {"n", a.n}};
}

Aggregate aggregate_from_json(const nlohmann::json& j) {
  return Aggregate{optional_from_json(j.at("mean")), j.at("std").get<double>(), j.at("n").get<std::size_t>()};
}

std::string render_metric(const Aggregate& a) {
  if (!a.mean) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f ± %.2f", *a.mean, a.stddev);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  // Column widths count code points so that the plus-minus sign lines up.
  std::size_t visible = 0;
  for (unsigned char ch : s) visible += (ch & 0xC0) != 0x80;
  return visible >= width ? s + " " : s + std::string(width - visible, ' ');
}

}  // namespace

std::string proportion_cell(double proportion) {
  char buf[32];
  const double pct = proportion * 100.0;
  if (std::abs(pct - std::round(pct)) < 1e-9)
    std::snprintf(buf, sizeof(buf), "training_access_%.0f%%", pct);
  else
    std::snprintf(buf, sizeof(buf), "training_access_%.2f%%", pct);
  return buf;
}

std::string group_cell(std::size_t group) { return "group_" + std::to_string(group + 1); }

ShadowConfig shadow_config(const ExperimentConfig& c, std::uint64_t master_seed) {
  ShadowConfig s;
  s.n_shadows = c.n_shadows;
  s.member_users = c.shadow_member_users;
  s.nonmember_users = c.shadow_nonmember_users;
  s.within_user_split = c.within_user_split;
  s.encoder = c.victim;
  s.k = c.k;
  s.master_seed = master_seed;
  s.workers = c.workers;
  return s;
}

std::uint64_t repeat_seed(std::uint64_t base, std::size_t repeat) { return derive_seed(base, 1000 + repeat); }

bool MetricsReport::complete() const {
  return std::all_of(repeats.begin(), repeats.end(), [](const RepeatStatus& r) { return r.ok; }) &&
         std::all_of(cells.begin(), cells.end(), [](const ReportCell& c) { return c.complete; });
}

const ReportCell* MetricsReport::cell(const std::string& name) const {
  for (const auto& c : cells)
    if (c.name == name) return &c;
  return nullptr;
}

MetricsReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  MetricsReport report;
  report.experiment = to_string(config.kind);
  report.config = render_config(config);

  std::optional<Dataset> csv_data;
  if (!config.csv_path.empty()) csv_data = load_csv(config.csv_path);

  const auto names = cell_names(config);
  std::map<std::string, std::vector<RepeatResult>> collected;
  for (std::size_t r = 0; r < config.repeats; ++r) {
    const std::uint64_t seed = repeat_seed(config.seed, r);
    report.seeds.push_back(seed);
    RepeatStatus status{r, seed, true, {}};
    try {
      for (auto& [name, result] : run_repeat(config, csv_data ? &*csv_data : nullptr, r, seed))
        collected[name].push_back(std::move(result));
    } catch (const std::exception& e) {
      status.ok = false;
      status.error = e.what();
    }
    report.repeats.push_back(std::move(status));
  }

  for (const auto& name : names) {
    ReportCell cell;
    cell.name = name;
    cell.per_repeat = collected[name];
    std::vector<std::optional<double>> acc, prec, rec;
    for (const auto& r : cell.per_repeat) {
      acc.push_back(r.accuracy);
      prec.push_back(r.precision);
      rec.push_back(r.recall);
    }
    cell.accuracy = aggregate(acc);
    cell.precision = aggregate(prec);
    cell.recall = aggregate(rec);
    cell.complete = cell.per_repeat.size() == config.repeats;
    report.cells.push_back(std::move(cell));
  }
  return report;
}

ReportFormat report_format_from_string(const std::string& s) {
  if (s == "json") return ReportFormat::json;
  if (s == "table") return ReportFormat::table;
  throw InvalidArgument("unknown report format '" + s + "'");
}

std::string report_render(const MetricsReport& report, ReportFormat format) {
  if (format == ReportFormat::json) {
    nlohmann::json doc;
    doc["format_version"] = 1;
    doc["experiment"] = report.experiment;
    doc["config"] = report.config;
    doc["seeds"] = report.seeds;
    doc["complete"] = report.complete();
    auto& repeats = doc["repeats"] = nlohmann::json::array();
    for (const auto& r : report.repeats)
      repeats.push_back({{"repeat", r.repeat}, {"seed", r.seed}, {"ok", r.ok}, {"error", r.error}});
    auto& cells = doc["cells"] = nlohmann::json::array();
    for (const auto& c : report.cells) {
      nlohmann::json cell{{"name", c.name},
                          {"complete", c.complete},
                          {"accuracy", aggregate_json(c.accuracy)},
                          {"precision", aggregate_json(c.precision)},
                          {"recall", aggregate_json(c.recall)}};
      auto& per = cell["per_repeat"] = nlohmann::json::array();
      for (const auto& r : c.per_repeat)
        per.push_back({{"repeat", r.repeat},
                       {"accuracy", optional_json(r.accuracy)},
                       {"precision", optional_json(r.precision)},
                       {"recall", optional_json(r.recall)},
                       {"detail", r.detail}});
      cells.push_back(std::move(cell));
    }
    return doc.dump(2) + "\n";
  }

  std::ostringstream out;
  out << "experiment: " << (report.experiment.empty() ? "(none)" : report.experiment) << '\n';
  out << "repeats: " << report.repeats.size() << '\n';
  out << pad("cell", 34) << pad("accuracy", 18) << pad("precision", 18) << pad("recall", 18) << "detail\n";
  for (const auto& c : report.cells) {
    std::string detail;
    for (const auto& r : c.per_repeat)
      if (!r.detail.empty()) {
        detail = r.detail;
        break;
      }
    out << pad(c.name + (c.complete ? "" : " *"), 34) << pad(render_metric(c.accuracy), 18)
        << pad(render_metric(c.precision), 18) << pad(render_metric(c.recall), 18) << detail << '\n';
  }
  for (const auto& r : report.repeats)
    if (!r.ok) out << "repeat " << r.repeat << " aborted: " << r.error << '\n';
  return out.str();
}

MetricsReport report_from_json(const nlohmann::json& doc) {
  try {
    MetricsReport report;
    report.experiment = doc.at("experiment").get<std::string>();
    report.config = doc.at("config").get<std::string>();
    report.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
    for (const auto& r : doc.at("repeats"))
      report.repeats.push_back(RepeatStatus{r.at("repeat").get<std::size_t>(), r.at("seed").get<std::uint64_t>(),
                                            r.at("ok").get<bool>(), r.at("error").get<std::string>()});
    for (const auto& c : doc.at("cells")) {
      ReportCell cell;
      cell.name = c.at("name").get<std::string>();
      cell.complete = c.at("complete").get<bool>();
      cell.accuracy = aggregate_from_json(c.at("accuracy"));
      cell.precision = aggregate_from_json(c.at("precision"));
      cell.recall = aggregate_from_json(c.at("recall"));
      for (const auto& r : c.at("per_repeat"))
        cell.per_repeat.push_back(RepeatResult{r.at("repeat").get<std::size_t>(), optional_from_json(r.at("accuracy")),
                                               optional_from_json(r.at("precision")),
                                               optional_from_json(r.at("recall")), r.at("detail").get<std::string>()});
      report.cells.push_back(std::move(cell));
    }
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed report: ") + e.what());
  }
}

}  // namespace mi_embed
