#include "sea/cli.hpp"

#include "sea/config.hpp"
#include "sea/eval.hpp"
#include "sea/minicatch.hpp"
#include "sea/report.hpp"
#include "sea/training.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace sea {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Bad input detected before any work starts; maps to kExitUsage.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr GatePolicy kComparePolicies[] = {GatePolicy::learned, GatePolicy::always_off,
                                           GatePolicy::always_on, GatePolicy::random};

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::vector<std::string> overrides;

  void attach(CLI::App* app, bool out_required) {
    app->add_option("--config", config, "Config file (JSON object or key=value lines)")
        ->check(CLI::ExistingFile);
    auto* o = app->add_option("--out", out, "Output directory");
    if (out_required) o->required();
    app->add_option("--seed", seed, "Overrides the config seed");
    app->add_option("--threads", threads, "Evaluation worker threads (1 = fully deterministic)")
        ->check(CLI::PositiveNumber);
    app->add_option("overrides", overrides, "key=value config overrides");
  }

  Config resolve() const {
    std::vector<std::string> all = overrides;
    if (seed) all.push_back("seed=" + std::to_string(*seed));
    if (threads) all.push_back("threads=" + std::to_string(*threads));
    std::optional<fs::path> file;
    if (!config.empty()) file = config;
    return resolve_config(file, all);
  }
};

std::string policy_file_stem(GatePolicy p) { return "action_" + std::string(gate_policy_name(p)); }

void write_epochs_csv(const fs::path& path, const std::vector<EpochLog>& history) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,train_loss,val_loss,train_accuracy,val_accuracy,gaze_usage\n";
  for (const auto& e : history)
    out << e.epoch << ',' << json(e.train_loss).dump() << ',' << json(e.val_loss).dump() << ','
        << json(e.train_accuracy).dump() << ',' << json(e.val_accuracy).dump() << ','
        << json(e.gaze_usage).dump() << '\n';
}

struct Split {
  std::vector<Trial> train;
  std::vector<Trial> val;
};

Split load_split(const Config& cfg, std::ostream& log) {
  const fs::path root = cfg.data_dir;
  if (!fs::is_directory(root))
    throw UsageError("dataset directory not found: " + root.string() +
                     " (set data_dir=..., SEA_DATA_DIR, or run generate-data)");
  auto trials = load_dataset(root);
  const auto need = static_cast<std::size_t>(cfg.train_trials + cfg.val_trials);
  if (trials.size() < need)
    throw UsageError("dataset " + root.string() + " has " + std::to_string(trials.size()) +
                     " trials but train_trials + val_trials = " + std::to_string(need));
  const auto s = split_trials(trials.size(), std::size_t(cfg.train_trials),
                              std::size_t(cfg.val_trials), cfg.seed);
  Split out;
  for (auto i : s.train) out.train.push_back(trials[i]);
  for (auto i : s.val) out.val.push_back(trials[i]);
  log << "[sea] loaded " << trials.size() << " trials from " << root.string() << " ("
      << out.train.size() << " train, " << out.val.size() << " val)\n";
  return out;
}

Checkpoint require_checkpoint(const fs::path& path, const char* flag) {
  if (!fs::is_regular_file(path))
    throw UsageError(std::string(flag) + ": checkpoint not found: " + path.string());
  return load_checkpoint(path);
}

EpochCallback epoch_logger(std::ostream& log, const std::string& tag) {
  return [&log, tag](const EpochLog& e) {
    log << "[sea] " << tag << " epoch " << e.epoch << " train_loss " << e.train_loss << " val_loss "
        << e.val_loss;
    if (e.val_accuracy > 0.0)
      log << " val_acc " << e.val_accuracy << " gaze_usage " << e.gaze_usage;
    log << '\n';
  };
}

int cmd_generate(const Common& c, std::ostream& log) {
  Config cfg = c.resolve();
  const fs::path out = c.out.empty() ? fs::path(cfg.data_dir) : fs::path(c.out);
  cfg.data_dir = out.string();
  const auto trials = minicatch::generate_dataset(cfg.dataset(), out);
  write_resolved_config(cfg, out);
  log << "[sea] wrote " << trials.size() << " trials to " << out.string() << '\n';
  return kExitOk;
}

int cmd_train_gaze(const Common& c, std::ostream& log) {
  const Config cfg = c.resolve();
  const fs::path out = c.out;
  const Split data = load_split(cfg, log);
  write_resolved_config(cfg, out);
  try {
    const auto r = train_gaze(data.train, data.val, cfg, epoch_logger(log, "gaze"));
    save_checkpoint(r.checkpoint, out / "gaze.seackpt");
    write_epochs_csv(out / "epochs.csv", r.history);
    log << "[sea] gaze val KL " << r.initial_val_loss << " -> "
        << r.checkpoint.metrics["best_val_loss"].get<double>() << " (best epoch " << r.best_epoch
        << "), wrote " << (out / "gaze.seackpt").string() << '\n';
  } catch (const TrainingDiverged& e) {
    save_checkpoint(e.last_good, out / "gaze.last_good.seackpt");
    throw;
  }
  return kExitOk;
}

int cmd_train_action(const Common& c, const std::string& gaze_path, const std::string& policy,
                     std::ostream& log) {
  Config cfg = c.resolve();
  std::vector<GatePolicy> policies;
  if (policy == "all")
    policies.assign(std::begin(kComparePolicies), std::end(kComparePolicies));
  else if (!policy.empty())
    policies.push_back(parse_gate_policy(policy));
  else
    policies.push_back(cfg.gate_policy);
  const Checkpoint gaze = require_checkpoint(gaze_path, "--gaze-checkpoint");
  const fs::path out = c.out;
  const Split data = load_split(cfg, log);
  if (policies.size() == 1) cfg.gate_policy = policies[0];
  write_resolved_config(cfg, out);
  for (GatePolicy p : policies) {
    Config pc = cfg;
    pc.gate_policy = p;
    const std::string stem = policy_file_stem(p);
    try {
      const auto r = train_action(data.train, data.val, gaze, pc, epoch_logger(log, stem));
      save_checkpoint(r.checkpoint, out / (stem + ".seackpt"));
      write_epochs_csv(out / ("epochs_" + std::string(gate_policy_name(p)) + ".csv"), r.history);
      log << "[sea] wrote " << (out / (stem + ".seackpt")).string() << " (best epoch " << r.best_epoch
          << ")\n";
    } catch (const TrainingDiverged& e) {
      save_checkpoint(e.last_good, out / (stem + ".last_good.seackpt"));
      throw;
    }
  }
  return kExitOk;
}

SeaModel<Real> load_model(const Checkpoint& ck, const fs::path& path) {
  if (ck.kind != "sea")
    throw UsageError(path.string() + " is a '" + ck.kind + "' checkpoint; expected an action checkpoint");
  return model_from_checkpoint(ck, minicatch::kActionCount);
}

void log_condition(std::ostream& log, const Condition& c) {
  const auto& s = c.evaluation.summary;
  log << "[sea] " << c.name << ": mean " << s.mean << " std " << s.std << " (n=" << s.n
      << (s.std_undefined ? ", std undefined" : "") << ") gaze_usage " << c.evaluation.gaze_usage
      << '\n';
}

int cmd_evaluate(const Common& c, const std::string& ckpt_path, const std::string& policy,
                 std::optional<int> rollouts, std::ostream& log) {
  Config cfg = c.resolve();
  if (rollouts) cfg.rollouts = *rollouts;
  const Checkpoint ck = require_checkpoint(ckpt_path, "--checkpoint");
  if (!policy.empty()) {
    cfg.gate_policy = parse_gate_policy(policy);
  } else if (ck.config.contains("gate_policy")) {
    cfg.gate_policy = parse_gate_policy(ck.config["gate_policy"].get<std::string>());
  }
  cfg.validate();
  auto model = load_model(ck, ckpt_path);
  const fs::path out = c.out.empty() ? fs::path("eval_out") : fs::path(c.out);
  write_resolved_config(cfg, out);
  Report r;
  r.config_hash = config_hash(cfg);
  r.conditions.push_back({std::string(gate_policy_name(cfg.gate_policy)),
                          evaluate(model, cfg.env(), cfg.gate_policy, cfg.rollouts, cfg.eval_seed,
                                   cfg.random_gate_p, cfg.keep_fraction, cfg.threads)});
  log_condition(log, r.conditions.back());
  emit_report(r, out);
  return kExitOk;
}

MetricsReport held_out_metrics(SeaModel<Real>& model, const Config& cfg, const Split& data) {
  const auto features = compute_gaze_features(model.gaze, data.val, cfg.keep_fraction);
  const auto p = predict_actions(model, features, GatePolicy::learned, cfg.eval_seed, cfg.random_gate_p);
  auto m = classification_metrics(p.predicted, features.labels, cfg.action_count, minicatch::noop);
  m.gaze_usage = gaze_usage(p.gates);
  return m;
}

int cmd_compare(const Common& c, const std::string& ckpt_dir, std::optional<int> rollouts,
                std::ostream& log) {
  Config cfg = c.resolve();
  if (rollouts) cfg.rollouts = *rollouts;
  cfg.validate();
  if (!fs::is_directory(ckpt_dir))
    throw UsageError("--checkpoint: directory not found: " + ckpt_dir);
  std::vector<std::pair<GatePolicy, Checkpoint>> inputs;
  for (GatePolicy p : kComparePolicies) {
    const fs::path path = fs::path(ckpt_dir) / (policy_file_stem(p) + ".seackpt");
    inputs.emplace_back(p, require_checkpoint(path, "--checkpoint"));
  }
  const fs::path out = c.out;
  write_resolved_config(cfg, out);
  Report r;
  r.config_hash = config_hash(cfg);
  for (auto& [p, ck] : inputs) {
    auto model = load_model(ck, fs::path(ckpt_dir) / (policy_file_stem(p) + ".seackpt"));
    r.conditions.push_back({std::string(gate_policy_name(p)),
                            evaluate(model, cfg.env(), p, cfg.rollouts, cfg.eval_seed,
                                     cfg.random_gate_p, cfg.keep_fraction, cfg.threads)});
    log_condition(log, r.conditions.back());
    if (p == GatePolicy::learned) {
      if (fs::is_directory(cfg.data_dir)) {
        r.classification = held_out_metrics(model, cfg, load_split(cfg, log));
        log << "[sea] held-out accuracy " << r.classification->accuracy << " F1 all "
            << r.classification->f1_all << " F1 action/no-action " << r.classification->f1_binary
            << '\n';
      } else {
        log << "[sea] no dataset at " << cfg.data_dir << "; skipping classification metrics\n";
      }
    }
  }
  r.comparisons = compare_against_first(r.conditions);
  for (const auto& cmp : r.comparisons)
    log << "[sea] " << cmp.a << " vs " << cmp.b << ": t " << cmp.welch.t << " df " << cmp.welch.df
        << " p " << cmp.welch.p << '\n';
  emit_report(r, out);
  return kExitOk;
}

int cmd_report(const Common& c, const std::string& in, std::ostream& log) {
  fs::path path = in;
  if (fs::is_directory(path)) path /= "raw_results.json";
  if (!fs::is_regular_file(path)) throw UsageError("--in: raw results not found: " + path.string());
  std::ifstream f(path, std::ios::binary);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  const Report r = report_from_raw_results(j);
  const Config cfg = c.resolve();
  write_resolved_config(cfg, c.out);
  emit_report(r, c.out);
  log << "[sea] re-rendered " << r.conditions.size() << " conditions into " << c.out << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& log) {
  CLI::App app{"Selective eye-gaze augmentation: data generation, training and evaluation", "sea"};
  app.require_subcommand(1);

  Common gen_c, gaze_c, act_c, eval_c, cmp_c, rep_c;
  auto* gen = app.add_subcommand("generate-data", "Generate a MiniCatch demonstration dataset");
  gen_c.attach(gen, false);

  auto* gaze = app.add_subcommand("train-gaze", "Train the gaze prediction network");
  gaze_c.attach(gaze, true);

  std::string gaze_ckpt, act_policy;
  auto* act = app.add_subcommand("train-action", "Train the gate and action networks");
  act_c.attach(act, true);
  act->add_option("--gaze-checkpoint", gaze_ckpt, "Trained gaze checkpoint")->required();
  act->add_option("--gate-policy", act_policy, "learned, on, off, random or all")
      ->check(CLI::IsMember({"learned", "on", "off", "random", "all"}));

  std::string eval_ckpt, eval_policy;
  std::optional<int> eval_rollouts;
  auto* ev = app.add_subcommand("evaluate", "Roll out one action checkpoint");
  eval_c.attach(ev, false);
  ev->add_option("--checkpoint", eval_ckpt, "Action checkpoint file")->required();
  ev->add_option("--gate-policy", eval_policy, "learned, on, off or random")
      ->check(CLI::IsMember({"learned", "on", "off", "random"}));
  ev->add_option("--rollouts", eval_rollouts, "Number of rollouts")->check(CLI::PositiveNumber);

  std::string cmp_dir;
  std::optional<int> cmp_rollouts;
  auto* cmp = app.add_subcommand("compare", "Evaluate all gate policies on shared seeds and report");
  cmp_c.attach(cmp, true);
  cmp->add_option("--checkpoint", cmp_dir,
                  "Directory holding action_{learned,off,on,random}.seackpt")
      ->required();
  cmp->add_option("--rollouts", cmp_rollouts, "Number of rollouts")->check(CLI::PositiveNumber);

  std::string rep_in;
  auto* rep = app.add_subcommand("report", "Re-render report files from raw_results.json");
  rep_c.attach(rep, true);
  rep->add_option("--in", rep_in, "raw_results.json or the directory holding it")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream out, err;
    const int code = app.exit(e, out, err);
    log << out.str() << err.str();
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_generate(gen_c, log);
    if (gaze->parsed()) return cmd_train_gaze(gaze_c, log);
    if (act->parsed()) return cmd_train_action(act_c, gaze_ckpt, act_policy, log);
    if (ev->parsed()) return cmd_evaluate(eval_c, eval_ckpt, eval_policy, eval_rollouts, log);
    if (cmp->parsed()) return cmd_compare(cmp_c, cmp_dir, cmp_rollouts, log);
    if (rep->parsed()) return cmd_report(rep_c, rep_in, log);
  } catch (const UsageError& e) {
    log << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace sea
