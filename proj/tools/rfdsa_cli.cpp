#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "rfdsa/experiments.hpp"

using namespace rfdsa;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CommonOpts {
  std::optional<uint64_t> seed;
  std::string out_dir = ".";
  bool check = false;
};

// derive a recipe seed from the CLI root seed, keeping the documented
// defaults when no root seed was given
uint64_t sub_seed(const CommonOpts& o, const char* purpose, uint64_t fallback) {
  return o.seed ? substream(*o.seed, purpose) : fallback;
}

struct Check {
  std::string name;
  double value;
  double threshold;
  bool greater_equal;
  bool pass() const { return greater_equal ? value >= threshold : value <= threshold; }
};

json checks_json(const std::vector<Check>& checks) {
  json arr = json::array();
  for (const auto& c : checks)
    arr.push_back({{"name", c.name},
                   {"value", c.value},
                   {"threshold", c.threshold},
                   {"relation", c.greater_equal ? ">=" : "<="},
                   {"pass", c.pass()}});
  return arr;
}

int finish(const CommonOpts& o, const std::string& name, json config,
           std::vector<std::string> outputs, const std::vector<Check>& checks) {
  bool all_pass = true;
  for (const auto& c : checks) all_pass = all_pass && c.pass();
  json manifest = {{"experiment", name},
                   {"seed", o.seed ? json(*o.seed) : json(nullptr)},
                   {"config", std::move(config)},
                   {"outputs", outputs},
                   {"checks", checks_json(checks)},
                   {"pass", all_pass}};
  std::ofstream mf(fs::path(o.out_dir) / "manifest.json");
  mf << manifest.dump(2) << '\n';
  for (const auto& c : checks)
    std::cout << (c.pass() ? "PASS " : "FAIL ") << c.name << ": " << c.value
              << (c.greater_equal ? " >= " : " <= ") << c.threshold << '\n';
  if (o.check && !all_pass) return 1;
  return 0;
}

std::ofstream open_out(const CommonOpts& o, const std::string& file) {
  fs::create_directories(o.out_dir);
  std::ofstream f(fs::path(o.out_dir) / file);
  if (!f) throw std::runtime_error("cannot write " + (fs::path(o.out_dir) / file).string());
  return f;
}

int cmd_train_base(const CommonOpts& o) {
  xp::BaselineConfig cfg;
  cfg.data_seed = sub_seed(o, "baseline.data", cfg.data_seed);
  cfg.model_seed = sub_seed(o, "baseline.model", cfg.model_seed);
  cfg.train_seed = sub_seed(o, "baseline.train", cfg.train_seed);
  cfg.eval_seed = sub_seed(o, "baseline.eval", cfg.eval_seed);
  auto r = xp::run_baseline(cfg);

  nn::save_checkpoint(r.model, (fs::path(o.out_dir) / "model.ckpt").string());
  {
    auto f = open_out(o, "snr_accuracy.csv");
    f << "snr_db,accuracy\n";
    for (const auto& row : r.by_snr) f << row.snr_db << ',' << row.accuracy << '\n';
  }
  std::vector<std::string> outputs = {"model.ckpt", "snr_accuracy.csv"};
  for (const auto& cm : r.confusions) {
    std::string name = "confusion_" + std::to_string(static_cast<int>(cm.snr_db)) + "db.csv";
    auto f = open_out(o, name);
    f << "true_class,idle,in-network,jammer,out-network\n";
    for (int i = 0; i < 4; ++i) {
      f << xp::class_labels()[i];
      for (int j = 0; j < 4; ++j) f << ',' << cm.counts[i][j];
      f << '\n';
    }
    outputs.push_back(name);
  }

  double acc18 = 0.0;
  for (const auto& row : r.by_snr)
    if (row.snr_db == 18.0) acc18 = row.accuracy;
  std::vector<Check> checks = {
      {"snr_rows", static_cast<double>(r.by_snr.size()), 10.0, true},
      {"accuracy_18db", acc18, 0.85, true},
  };
  json config = {{"snr_grid", cfg.snr_grid_db}, {"per_mod", cfg.per_mod},
                 {"learning_rate", cfg.learning_rate}, {"max_epochs", cfg.max_epochs}};
  return finish(o, "train-base", config, outputs, checks);
}

int cmd_ewc_demo(const CommonOpts& o) {
  xp::EwcConfig cfg;
  cfg.record_series = true;
  if (o.seed) {
    cfg.train_a_seed = substream(*o.seed, "ewc.train_a");
    cfg.test_a_seed = substream(*o.seed, "ewc.test_a");
    cfg.train_b_seed = substream(*o.seed, "ewc.train_b");
    cfg.test_b_seed = substream(*o.seed, "ewc.test_b");
    cfg.model_seed = substream(*o.seed, "ewc.model");
    cfg.task_a_train_seed = substream(*o.seed, "ewc.fit_a");
    cfg.task_b_train_seed = substream(*o.seed, "ewc.fit_b");
  }
  auto r = xp::run_ewc_demo(cfg);
  {
    auto f = open_out(o, "series.csv");
    f << "strategy,epoch,task_a_accuracy,task_b_accuracy\n";
    for (size_t e = 0; e < r.sgd_series.task_a.size(); ++e)
      f << "sgd," << e << ',' << r.sgd_series.task_a[e] << ',' << r.sgd_series.task_b[e] << '\n';
    for (size_t e = 0; e < r.ewc_series.task_a.size(); ++e)
      f << "ewc," << e << ',' << r.ewc_series.task_a[e] << ',' << r.ewc_series.task_b[e] << '\n';
  }
  std::vector<Check> checks = {
      {"sgd_task_a_drop", r.initial_task_a - r.sgd_task_a, 0.25, true},
      {"ewc_task_a_drop", r.initial_task_a - r.ewc_task_a, 0.10, false},
      {"ewc_task_b", r.ewc_task_b, 0.80, true},
  };
  json config = {{"per_task_train", cfg.per_task_train}, {"lambda", cfg.lambda},
                 {"initial_task_a", r.initial_task_a},
                 {"sgd", {{"task_a", r.sgd_task_a}, {"task_b", r.sgd_task_b}}},
                 {"ewc", {{"task_a", r.ewc_task_a}, {"task_b", r.ewc_task_b}}}};
  return finish(o, "ewc-demo", config, {"series.csv"}, checks);
}

int cmd_replay_eval(const CommonOpts& o) {
  xp::ReplayConfig cfg;
  cfg.eval_copies_per_rotation = 100;
  cfg.base_seed = sub_seed(o, "replay.base", cfg.base_seed);
  cfg.model_seed = sub_seed(o, "replay.model", cfg.model_seed);
  cfg.train_seed = sub_seed(o, "replay.train", cfg.train_seed);
  auto r = xp::run_replay(cfg);
  {
    auto f = open_out(o, "history.csv");
    f << "epoch,train_loss,train_acc,val_loss,val_acc\n";
    for (size_t e = 0; e < r.history.epochs.size(); ++e) {
      const auto& s = r.history.epochs[e];
      f << e << ',' << s.train_loss << ',' << s.train_acc << ',' << s.val_loss << ','
        << s.val_acc << '\n';
    }
  }
  {
    auto f = open_out(o, "confusion.csv");
    f << "true_k";
    for (int j = 0; j < 17; ++j) f << ",pred_" << j;
    f << '\n';
    for (int i = 0; i < 17; ++i) {
      f << i;
      for (int j = 0; j < 17; ++j) f << ',' << r.confusion[i][j];
      f << '\n';
    }
  }
  std::vector<Check> checks = {
      {"dataset_size", static_cast<double>(r.dataset_size), 17000.0, true},
      {"rotation_accuracy", r.accuracy, 0.90, true},
  };
  json config = {{"copies_per_rotation", cfg.copies_per_rotation}, {"snr_db", cfg.snr_db}};
  return finish(o, "replay-eval", config, {"history.csv", "confusion.csv"}, checks);
}

int cmd_outlier_eval(const CommonOpts& o) {
  xp::OutlierConfig cfg;
  if (o.seed) {
    cfg.feature_data_seed = substream(*o.seed, "outlier.feature_data");
    cfg.feature_model_seed = substream(*o.seed, "outlier.feature_model");
    cfg.feature_train_seed = substream(*o.seed, "outlier.feature_train");
    cfg.train_inlier_seed = substream(*o.seed, "outlier.train_in");
    cfg.test_inlier_seed = substream(*o.seed, "outlier.test_in");
    cfg.test_outlier_seed = substream(*o.seed, "outlier.test_out");
    cfg.projection_seed = substream(*o.seed, "outlier.projection");
    cfg.mcd_seed = substream(*o.seed, "outlier.mcd");
    cfg.kmeans_seed = substream(*o.seed, "outlier.kmeans");
  }
  auto r = xp::run_outlier(cfg);
  {
    auto f = open_out(o, "sweep.csv");
    outlier::dump_sweep_csv(r.sweep, f);
  }
  {
    auto f = open_out(o, "kmeans.csv");
    f << "inlier_accuracy,outlier_accuracy,overall_accuracy\n";
    f << r.km_inlier_acc << ',' << r.km_outlier_acc << ',' << r.km_overall_acc << '\n';
  }
  std::vector<Check> checks = {
      {"mcd_min_accuracy_at_c_star", r.mcd_min_acc, 0.75, true},
      {"kmeans_inlier_accuracy", r.km_inlier_acc, 0.95, true},
      {"kmeans_overall_accuracy", r.km_overall_acc, 0.85, true},
  };
  json config = {{"feature_model_val_acc", r.feature_model_val_acc},
                 {"selected_contamination", r.mcd_selected_c},
                 {"conv_width", cfg.conv_width}, {"conv_blocks", cfg.conv_blocks}};
  return finish(o, "outlier-eval", config, {"sweep.csv", "kmeans.csv"}, checks);
}

int cmd_superimposed_eval(const CommonOpts& o) {
  xp::SeparationTrainConfig cfg;
  xp::MixtureEvalConfig ec;
  if (o.seed) {
    cfg.data_seed = substream(*o.seed, "sep.data");
    cfg.model_seed = substream(*o.seed, "sep.model");
    cfg.train_seed = substream(*o.seed, "sep.train");
    cfg.mixture_seed = substream(*o.seed, "sep.mixture");
    ec.mix_seed = substream(*o.seed, "sep.eval_mix");
    ec.ica_seed = substream(*o.seed, "sep.eval_ica");
  }
  auto sm = xp::train_separation_model(cfg);
  nn::Workspace ws(sm.model);

  struct Pair {
    ModulationKind a, b;
    double snr_db;
  };
  const Pair pairs[] = {{ModulationKind::QPSK, ModulationKind::QAM16, 10.0},
                        {ModulationKind::PAM4, ModulationKind::GFSK, 18.0}};
  auto trials_csv = open_out(o, "trials.csv");
  trials_csv << "trial_id,true_pair,predicted_pair,correct\n";
  auto pairs_csv = open_out(o, "pairs.csv");
  pairs_csv << "pair,snr_db,accuracy\n";
  std::vector<Check> checks;
  for (const auto& p : pairs) {
    SignalClass ca = class_of(p.a), cb = class_of(p.b);
    std::string pname = to_string(p.a) + "+" + to_string(p.b);
    int ok = 0;
    for (int t = 0; t < ec.trials; ++t) {
      Rng rng(substream(ec.mix_seed, "mix", t));
      auto fa = sig::synth_frame(p.a, p.snr_db, rng);
      auto fb = sig::synth_frame(p.b, p.snr_db, rng);
      auto [o1, o2] = sig::superimpose(fa, fb, xp::trial_mixing(rng));
      auto res =
          ica::separate_and_classify(o1, o2, sm.model, ws, substream(ec.ica_seed, "ica", t));
      bool hit = (res.classes.first == ca && res.classes.second == cb) ||
                 (res.classes.first == cb && res.classes.second == ca);
      if (hit) ++ok;
      trials_csv << t << ',' << to_string(ca) << '|' << to_string(cb) << ','
                 << to_string(res.classes.first) << '|' << to_string(res.classes.second) << ','
                 << (hit ? 1 : 0) << '\n';
    }
    double acc = static_cast<double>(ok) / ec.trials;
    pairs_csv << pname << ',' << p.snr_db << ',' << acc << '\n';
    checks.push_back({"pair_accuracy_" + pname, acc,
                      p.a == ModulationKind::PAM4 ? 0.75 : 0.50, true});
  }
  double corr = xp::mean_recovery_correlation(ModulationKind::QPSK, ModulationKind::WBFM, 18.0, ec);
  checks.push_back({"recovery_correlation", corr, 0.95, true});
  json config = {{"mixture_pairs", cfg.mixture_pairs}, {"trials", ec.trials},
                 {"model_val_acc", sm.history.epochs[sm.history.best_epoch].val_acc}};
  return finish(o, "superimposed-eval", config, {"trials.csv", "pairs.csv"}, checks);
}

struct SimulateOpts {
  std::string classifier = "ideal";
  std::string config_file;
  std::string model_file;
  std::optional<bool> jamming, traffic_fusion, outliers, superposition;
  std::optional<double> fusion_weight;
};

int cmd_simulate(const CommonOpts& o, const SimulateOpts& so) {
  dsa::Scenario sc;
  if (!so.config_file.empty()) {
    std::ifstream f(so.config_file);
    if (!f) throw std::runtime_error("cannot open config: " + so.config_file);
    sc = dsa::parse_scenario(f);
  }
  if (so.jamming) sc.options.jamming = *so.jamming;
  if (so.traffic_fusion) sc.options.traffic_fusion = *so.traffic_fusion;
  if (so.outliers) sc.options.outliers = *so.outliers;
  if (so.superposition) sc.options.superposition = *so.superposition;
  if (so.fusion_weight) sc.options.fusion_weight = *so.fusion_weight;

  dsa::Classifier cl;
  cl.kind = dsa::classifier_from_string(so.classifier);
  std::optional<nn::Model> model;
  if (cl.kind == dsa::ClassifierKind::Model) {
    if (so.model_file.empty())
      throw std::runtime_error("--classifier model requires --model <checkpoint>");
    model = nn::load_checkpoint(so.model_file);
    cl.model = &*model;
  }

  uint64_t root = o.seed.value_or(101);
  uint64_t topo_seed = o.seed ? substream(root, "topology") : 101;
  uint64_t run_seed = o.seed ? substream(root, "run") : 202;
  auto topo = dsa::generate_topology(sc.topology, topo_seed);
  auto m = dsa::run_simulation(topo, sc.superframe, cl, sc.sinr, sc.options, run_seed);

  {
    auto f = open_out(o, "topology.csv");
    dsa::dump_topology_csv(topo, f);
  }
  {
    auto f = open_out(o, "metrics.csv");
    dsa::dump_metrics_csv_header(f);
    dsa::dump_metrics_csv_row(f, "default", to_string(cl.kind), sc.options, run_seed, m);
  }
  std::vector<Check> checks;
  if (cl.kind == dsa::ClassifierKind::Ideal)
    checks.push_back({"outnet_success_pct", m.outnet_success_pct(), 100.0, true});
  json config = {{"classifier", so.classifier},
                 {"jamming", sc.options.jamming},
                 {"traffic_fusion", sc.options.traffic_fusion},
                 {"fusion_weight", sc.options.fusion_weight},
                 {"outliers", sc.options.outliers},
                 {"superposition", sc.options.superposition},
                 {"topology_seed", topo_seed},
                 {"run_seed", run_seed},
                 {"throughput_packets", m.throughput_packets},
                 {"outnet_success_pct", m.outnet_success_pct()}};
  return finish(o, "simulate", config, {"topology.csv", "metrics.csv"}, checks);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RF classification and dynamic spectrum access experiment runner"};
  app.require_subcommand(1);

  CommonOpts common;
  uint64_t seed_value = 0;
  for (auto* sub : {app.add_subcommand("train-base", "baseline 4-class classifier study"),
                    app.add_subcommand("ewc-demo", "continual learning: SGD vs EWC"),
                    app.add_subcommand("replay-eval", "17-way rotation replay detector"),
                    app.add_subcommand("outlier-eval", "MCD and k-means outlier pipelines"),
                    app.add_subcommand("superimposed-eval", "ICA separation and classification"),
                    app.add_subcommand("simulate", "distributed DSA network simulation")}) {
    sub->add_option("--seed", seed_value, "root seed for all sub-streams")
        ->each([&](const std::string&) { common.seed = seed_value; });
    sub->add_option("--out", common.out_dir, "output directory");
    sub->add_flag("--check", common.check, "exit nonzero unless all thresholds pass");
  }

  SimulateOpts sim;
  auto* simulate = app.get_subcommand("simulate");
  simulate->add_option("--config", sim.config_file, "scenario key=value config file");
  simulate->add_option("--classifier", sim.classifier,
                       "ideal, random, table-all, table-per-snr, or model");
  simulate->add_option("--model", sim.model_file, "model checkpoint for --classifier model");
  auto bool_opt = [&](const char* name, std::optional<bool>& target, const char* desc) {
    simulate->add_option_function<std::string>(
        name,
        [&target, name](const std::string& v) {
          if (v == "on") target = true;
          else if (v == "off") target = false;
          else throw CLI::ValidationError(std::string(name) + " expects on or off");
        },
        desc);
  };
  bool_opt("--jamming", sim.jamming, "jammers active");
  bool_opt("--traffic-fusion", sim.traffic_fusion, "fuse traffic profile with scores");
  bool_opt("--outliers", sim.outliers, "route unknown jammers through the outlier path");
  bool_opt("--superposition", sim.superposition, "superimposed sensing ground truth");
  simulate->add_option("--fusion-weight", sim.fusion_weight, "traffic fusion weight");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("train-base")) return cmd_train_base(common);
    if (app.got_subcommand("ewc-demo")) return cmd_ewc_demo(common);
    if (app.got_subcommand("replay-eval")) return cmd_replay_eval(common);
    if (app.got_subcommand("outlier-eval")) return cmd_outlier_eval(common);
    if (app.got_subcommand("superimposed-eval")) return cmd_superimposed_eval(common);
    if (app.got_subcommand("simulate")) return cmd_simulate(common, sim);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
