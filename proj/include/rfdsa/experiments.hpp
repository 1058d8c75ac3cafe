#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <utility>
#include <vector>

#include "rfdsa/dsa.hpp"
#include "rfdsa/iq.hpp"
#include "rfdsa/nnet.hpp"
#include "rfdsa/outlier.hpp"
#include "rfdsa/rng.hpp"
#include "rfdsa/separation.hpp"
#include "rfdsa/sigsynth.hpp"
#include "rfdsa/traffic.hpp"

// Named experiment recipes shared by the CLI runner and the acceptance
// suite. Every recipe is deterministic per its config seeds.
namespace rfdsa::xp {

struct LabeledSet {
  std::vector<std::vector<double>> xs;
  std::vector<int> ys;
};

// per_mod frames of each modulation at one SNR, labels base..base+mods-1
inline LabeledSet modulation_set(const std::vector<ModulationKind>& mods, int base_label,
                                 int per_mod, double snr_db, uint64_t seed) {
  LabeledSet s;
  for (size_t m = 0; m < mods.size(); ++m)
    for (int i = 0; i < per_mod; ++i) {
      Rng rng(substream(seed, "frame", m * 100000 + i));
      s.xs.push_back(nn::input_from_frame(sig::synth_frame(mods[m], snr_db, rng)));
      s.ys.push_back(base_label + static_cast<int>(m));
    }
  return s;
}

inline void append_idle(LabeledSet& s, int label, int count, double snr_db, uint64_t seed) {
  for (int i = 0; i < count; ++i) {
    Rng rng(substream(seed, "idle", i));
    s.xs.push_back(nn::input_from_frame(sig::synth_idle(snr_db, rng)));
    s.ys.push_back(label);
  }
}

inline LabeledSet dataset_set(const sig::DatasetSpec& spec) {
  LabeledSet s;
  for (const auto& lf : sig::make_dataset(spec)) {
    s.xs.push_back(nn::input_from_frame(lf.frame));
    s.ys.push_back(static_cast<int>(lf.cls));
  }
  return s;
}

// stack of pad/conv/selu/pool blocks followed by the standard dense head
inline std::vector<nn::LayerSpec> deep_arch(int classes, int width, int blocks) {
  std::vector<nn::LayerSpec> s;
  for (int b = 0; b < blocks; ++b) {
    s.push_back(nn::LayerSpec::zero_pad(1));
    s.push_back(nn::LayerSpec::conv(width, 3));
    s.push_back(nn::LayerSpec::selu());
    s.push_back(nn::LayerSpec::max_pool(2, 2));
  }
  s.push_back(nn::LayerSpec::dense(64));
  s.push_back(nn::LayerSpec::selu());
  s.push_back(nn::LayerSpec::dropout(0.5));
  s.push_back(nn::LayerSpec::dense(32));
  s.push_back(nn::LayerSpec::selu());
  s.push_back(nn::LayerSpec::dropout(0.5));
  s.push_back(nn::LayerSpec::dense(classes));
  return s;
}

inline const std::vector<std::string>& class_labels() {
  static const std::vector<std::string> labels = {"idle", "in-network", "jammer",
                                                  "out-network"};
  return labels;
}

// ---------------------------------------------------------------------------
// Baseline study: 4-class classifier over an SNR grid with per-SNR accuracy
// and confusion matrices on fresh evaluation frames.

struct BaselineConfig {
  std::vector<double> snr_grid_db = {0, 2, 4, 6, 8, 10, 12, 14, 16, 18};
  int per_mod = 50;       // training frames per (modulation, SNR) cell
  int eval_per_mod = 25;  // fresh evaluation frames per (modulation, SNR)
  std::vector<double> confusion_snrs_db = {0, 10, 18};
  double learning_rate = 1e-3;
  int max_epochs = 100;
  uint64_t data_seed = 21;
  uint64_t model_seed = 22;
  uint64_t train_seed = 23;
  uint64_t eval_seed = 20;
};

struct SnrAccuracy {
  double snr_db;
  double accuracy;
};

struct ConfusionMatrix {
  double snr_db;
  std::array<std::array<int, 4>, 4> counts{};  // [true][predicted]
};

struct BaselineResult {
  nn::Model model;
  nn::History history;
  std::vector<SnrAccuracy> by_snr;
  std::vector<ConfusionMatrix> confusions;
};

inline BaselineResult run_baseline(const BaselineConfig& c) {
  if (c.snr_grid_db.empty()) throw std::invalid_argument("baseline: empty SNR grid");
  sig::DatasetSpec dspec;
  dspec.snr_grid_db = c.snr_grid_db;
  dspec.per_mod_count = c.per_mod;
  dspec.modulations.assign(kAllModulations.begin(), kAllModulations.end());
  dspec.include_idle = true;
  dspec.seed = c.data_seed;
  auto train_set = dataset_set(dspec);

  nn::Model model(nn::default_arch(4), nn::Shape{2, kFrameLen}, class_labels(), c.model_seed);
  nn::TrainConfig cfg;
  cfg.learning_rate = c.learning_rate;
  cfg.max_epochs = c.max_epochs;
  cfg.seed = c.train_seed;
  auto history = nn::train(model, train_set.xs, train_set.ys, cfg);

  BaselineResult out{std::move(model), std::move(history), {}, {}};
  nn::Workspace ws(out.model);
  for (size_t si = 0; si < c.snr_grid_db.size(); ++si) {
    double snr = c.snr_grid_db[si];
    sig::DatasetSpec espec = dspec;
    espec.snr_grid_db = {snr};
    espec.per_mod_count = c.eval_per_mod;
    espec.seed = substream(c.eval_seed, "baseline.eval", si);
    auto eval = sig::make_dataset(espec);
    ConfusionMatrix cm;
    cm.snr_db = snr;
    int correct = 0;
    for (const auto& lf : eval) {
      auto pred = nn::classify(out.model, lf.frame, ws).first;
      cm.counts[static_cast<int>(lf.cls)][static_cast<int>(pred)]++;
      if (pred == lf.cls) ++correct;
    }
    out.by_snr.push_back({snr, static_cast<double>(correct) / eval.size()});
    for (double want : c.confusion_snrs_db)
      if (want == snr) out.confusions.push_back(cm);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Quick four-class benchmark: one modulation per non-idle class plus a
// second out-network kind, 500 frames per class at 18 dB, held-out split.

struct FourClassConfig {
  int per_class = 500;
  double snr_db = 18.0;
  double learning_rate = 1e-3;
  int max_epochs = 100;
  uint64_t data_seed = 41;
  uint64_t model_seed = 42;
  uint64_t train_seed = 43;
};

struct FourClassResult {
  nn::History history;
  double test_accuracy;  // held-out 20% split at the best epoch
};

inline FourClassResult run_four_class(const FourClassConfig& c) {
  LabeledSet s;
  append_idle(s, static_cast<int>(SignalClass::Idle), c.per_class, c.snr_db,
              substream(c.data_seed, "fourclass.idle"));
  auto add = [&](ModulationKind kind, int count, const char* tag) {
    auto part = modulation_set({kind}, static_cast<int>(class_of(kind)), count, c.snr_db,
                               substream(c.data_seed, tag));
    s.xs.insert(s.xs.end(), part.xs.begin(), part.xs.end());
    s.ys.insert(s.ys.end(), part.ys.begin(), part.ys.end());
  };
  add(ModulationKind::QPSK, c.per_class, "fourclass.in");
  add(ModulationKind::QAM16, c.per_class, "fourclass.jam");
  add(ModulationKind::GFSK, c.per_class / 2, "fourclass.out1");
  add(ModulationKind::AMSSB, c.per_class - c.per_class / 2, "fourclass.out2");

  nn::Model model(nn::default_arch(4), nn::Shape{2, kFrameLen}, class_labels(), c.model_seed);
  nn::TrainConfig cfg;
  cfg.learning_rate = c.learning_rate;
  cfg.max_epochs = c.max_epochs;
  cfg.seed = c.train_seed;
  auto history = nn::train(model, s.xs, s.ys, cfg);
  double acc = history.epochs[history.best_epoch].val_acc;
  return {std::move(history), acc};
}

// ---------------------------------------------------------------------------
// Continual-learning study: Task A (five modulations) then Task B (three new
// modulations), plain SGD versus EWC, with task-conditioned evaluation
// (argmax restricted to each task's own label range).

inline const std::vector<ModulationKind>& task_a_mods() {
  static const std::vector<ModulationKind> mods = {ModulationKind::QPSK, ModulationKind::PSK8,
                                                   ModulationKind::CPFSK, ModulationKind::AMSSB,
                                                   ModulationKind::GFSK};
  return mods;
}

inline const std::vector<ModulationKind>& task_b_mods() {
  static const std::vector<ModulationKind> mods = {ModulationKind::QAM16, ModulationKind::PAM4,
                                                   ModulationKind::WBFM};
  return mods;
}

inline double masked_accuracy(const nn::Model& model, const LabeledSet& s, int lo, int hi) {
  nn::Workspace ws(model);
  int ok = 0;
  for (size_t i = 0; i < s.xs.size(); ++i) {
    const auto& logits = nn::forward_sample(model, s.xs[i], ws);
    int arg = lo;
    for (int j = lo + 1; j < hi; ++j)
      if (logits[j] > logits[arg]) arg = j;
    if (arg == s.ys[i]) ++ok;
  }
  return static_cast<double>(ok) / s.xs.size();
}

struct EwcConfig {
  int per_task_train = 500;
  int per_task_test = 125;
  double snr_db = 18.0;
  double task_a_lr = 1e-3;
  int task_a_epochs = 100;
  double sgd_lr = 1e-3;
  int sgd_epochs = 60;
  double ewc_lr = 3e-4;
  int ewc_epochs = 30;
  double lambda = 1e4;
  uint64_t train_a_seed = 1, test_a_seed = 2, train_b_seed = 3, test_b_seed = 4;
  uint64_t model_seed = 5, task_a_train_seed = 6, task_b_train_seed = 7;
  bool record_series = false;
};

struct EwcSeries {
  std::vector<double> task_a, task_b;  // per retraining epoch
};

struct EwcResult {
  double initial_task_a;
  double sgd_task_a, sgd_task_b;
  double ewc_task_a, ewc_task_b;
  EwcSeries sgd_series, ewc_series;
};

inline EwcResult run_ewc_demo(const EwcConfig& c) {
  auto train_a = modulation_set(task_a_mods(), 0, c.per_task_train, c.snr_db, c.train_a_seed);
  auto test_a = modulation_set(task_a_mods(), 0, c.per_task_test, c.snr_db, c.test_a_seed);
  auto train_b = modulation_set(task_b_mods(), 5, c.per_task_train, c.snr_db, c.train_b_seed);
  auto test_b = modulation_set(task_b_mods(), 5, c.per_task_test, c.snr_db, c.test_b_seed);

  std::vector<std::string> labels;
  for (auto m : task_a_mods()) labels.push_back(to_string(m));
  for (auto m : task_b_mods()) labels.push_back(to_string(m));
  nn::Model base(nn::default_arch(8), nn::Shape{2, kFrameLen}, labels, c.model_seed);
  nn::TrainConfig cfg_a;
  cfg_a.learning_rate = c.task_a_lr;
  cfg_a.max_epochs = c.task_a_epochs;
  cfg_a.seed = c.task_a_train_seed;
  nn::train(base, train_a.xs, train_a.ys, cfg_a);

  EwcResult out;
  out.initial_task_a = masked_accuracy(base, test_a, 0, 5);
  auto fisher = nn::fisher_diagonal(base, train_a.xs, train_a.ys);
  fisher.lambda = c.lambda;

  auto observer = [&](EwcSeries& series) -> nn::EpochObserver {
    if (!c.record_series) return {};
    return [&](int, const nn::Model& m) {
      series.task_a.push_back(masked_accuracy(m, test_a, 0, 5));
      series.task_b.push_back(masked_accuracy(m, test_b, 5, 8));
    };
  };

  nn::Model sgd = base;
  nn::TrainConfig cfg_sgd;
  cfg_sgd.learning_rate = c.sgd_lr;
  cfg_sgd.max_epochs = c.sgd_epochs;
  cfg_sgd.seed = c.task_b_train_seed;
  cfg_sgd.use_sgd = true;
  nn::train(sgd, train_b.xs, train_b.ys, cfg_sgd, nullptr, observer(out.sgd_series));
  out.sgd_task_a = masked_accuracy(sgd, test_a, 0, 5);
  out.sgd_task_b = masked_accuracy(sgd, test_b, 5, 8);

  nn::Model ewc = base;
  nn::TrainConfig cfg_ewc;
  cfg_ewc.learning_rate = c.ewc_lr;
  cfg_ewc.max_epochs = c.ewc_epochs;
  cfg_ewc.seed = c.task_b_train_seed;
  nn::train(ewc, train_b.xs, train_b.ys, cfg_ewc, &fisher, observer(out.ewc_series));
  out.ewc_task_a = masked_accuracy(ewc, test_a, 0, 5);
  out.ewc_task_b = masked_accuracy(ewc, test_b, 5, 8);
  return out;
}

// ---------------------------------------------------------------------------
// Outlier study: deep feature extractor trained on all modulations, then the
// MCD contamination sweep (on random-projected features) and the k-means
// split (on standardized features).

inline const std::vector<ModulationKind>& inlier_mods() {
  static const std::vector<ModulationKind> mods = {ModulationKind::QPSK, ModulationKind::PSK8,
                                                   ModulationKind::CPFSK, ModulationKind::AMSSB,
                                                   ModulationKind::AMDSB, ModulationKind::GFSK};
  return mods;
}

inline const std::vector<ModulationKind>& outlier_mods() {
  static const std::vector<ModulationKind> mods = {ModulationKind::QAM16, ModulationKind::QAM64,
                                                   ModulationKind::PAM4, ModulationKind::WBFM};
  return mods;
}

struct OutlierConfig {
  double snr_db = 18.0;
  int feature_per_mod = 250;  // feature-model training frames per modulation
  int conv_width = 64;
  int conv_blocks = 5;
  double learning_rate = 1e-3;
  int max_epochs = 100;
  int train_inlier_per_mod = 150;
  int test_inlier_per_mod = 100;
  int test_outlier_per_mod = 150;
  int projection_dim = 16;
  int kmeans_restarts = 10;
  uint64_t feature_data_seed = 31, feature_model_seed = 32, feature_train_seed = 33;
  uint64_t train_inlier_seed = 24, test_inlier_seed = 25, test_outlier_seed = 26;
  uint64_t projection_seed = 27, mcd_seed = 28, kmeans_seed = 29;
};

struct OutlierResult {
  double feature_model_val_acc;
  outlier::SweepResult sweep;
  double mcd_selected_c;
  double mcd_inlier_acc, mcd_outlier_acc, mcd_min_acc;
  double km_inlier_acc, km_outlier_acc, km_overall_acc;
};

inline Eigen::MatrixXd feature_matrix(const nn::Model& model,
                                      const std::vector<ModulationKind>& mods, int per_mod,
                                      double snr_db, uint64_t seed) {
  nn::Workspace ws(model);
  const int fdim = nn::feature_dim(model);
  Eigen::MatrixXd F(static_cast<int>(mods.size()) * per_mod, fdim);
  int r = 0;
  for (size_t m = 0; m < mods.size(); ++m)
    for (int i = 0; i < per_mod; ++i) {
      Rng rng(substream(seed, "frame", m * 100000 + i));
      auto f = nn::extract_features(model, sig::synth_frame(mods[m], snr_db, rng), ws);
      for (int j = 0; j < fdim; ++j) F(r, j) = f[j];
      ++r;
    }
  return F;
}

inline OutlierResult run_outlier(const OutlierConfig& c) {
  sig::DatasetSpec dspec;
  dspec.snr_grid_db = {c.snr_db};
  dspec.per_mod_count = c.feature_per_mod;
  dspec.modulations.assign(kAllModulations.begin(), kAllModulations.end());
  dspec.include_idle = true;
  dspec.seed = c.feature_data_seed;
  auto train_set = dataset_set(dspec);

  nn::Model model(deep_arch(4, c.conv_width, c.conv_blocks), nn::Shape{2, kFrameLen},
                  class_labels(), c.feature_model_seed);
  nn::TrainConfig cfg;
  cfg.learning_rate = c.learning_rate;
  cfg.max_epochs = c.max_epochs;
  cfg.seed = c.feature_train_seed;
  auto hist = nn::train(model, train_set.xs, train_set.ys, cfg);

  auto F_train = feature_matrix(model, inlier_mods(), c.train_inlier_per_mod, c.snr_db,
                                c.train_inlier_seed);
  auto F_test_in = feature_matrix(model, inlier_mods(), c.test_inlier_per_mod, c.snr_db,
                                  c.test_inlier_seed);
  auto F_test_out = feature_matrix(model, outlier_mods(), c.test_outlier_per_mod, c.snr_db,
                                   c.test_outlier_seed);

  OutlierResult out;
  out.feature_model_val_acc = hist.epochs[hist.best_epoch].val_acc;

  // MCD path: random projection keeps the covariance well conditioned
  auto P_train = outlier::random_projection(F_train, c.projection_dim, c.projection_seed);
  auto P_test_in = outlier::random_projection(F_test_in, c.projection_dim, c.projection_seed);
  auto P_test_out = outlier::random_projection(F_test_out, c.projection_dim, c.projection_seed);
  auto mcd = outlier::mcd_fit(P_train, 0.0, c.mcd_seed);
  std::vector<double> grid;
  for (int g = 1; g <= 25; ++g) grid.push_back(0.02 * g);
  out.sweep = outlier::sweep_contamination(mcd, P_train, P_test_in, P_test_out, grid);
  out.mcd_selected_c = out.sweep.selected;
  for (const auto& row : out.sweep.rows)
    if (row.contamination == out.sweep.selected) {
      out.mcd_inlier_acc = row.inlier_accuracy;
      out.mcd_outlier_acc = row.outlier_accuracy;
    }
  out.mcd_min_acc = std::min(out.mcd_inlier_acc, out.mcd_outlier_acc);

  // k-means path: z-score standardization by the training inliers
  Eigen::RowVectorXd mu = F_train.colwise().mean();
  Eigen::RowVectorXd sd =
      ((F_train.rowwise() - mu).array().square().colwise().mean()).sqrt();
  for (int j = 0; j < sd.size(); ++j)
    if (sd[j] < 1e-9) sd[j] = 1.0;
  auto standardize = [&](Eigen::MatrixXd M) {
    M.rowwise() -= mu;
    for (int j = 0; j < M.cols(); ++j) M.col(j) /= sd[j];
    return M;
  };
  auto Z_train = standardize(F_train);
  auto Z_test_in = standardize(F_test_in);
  auto Z_test_out = standardize(F_test_out);
  Eigen::MatrixXd Z_test(Z_test_in.rows() + Z_test_out.rows(), Z_test_in.cols());
  Z_test.topRows(Z_test_in.rows()) = Z_test_in;
  Z_test.bottomRows(Z_test_out.rows()) = Z_test_out;
  auto km = outlier::kmeans_fit_restarts(Z_test, 2, c.kmeans_seed, c.kmeans_restarts);
  km = outlier::kmeans_label_outlier_cluster(km, Z_train);
  int in_ok = 0, out_ok = 0;
  for (int i = 0; i < Z_test_in.rows(); ++i)
    if (outlier::kmeans_predict(km, Z_test_in.row(i).transpose()) == outlier::Verdict::Inlier)
      ++in_ok;
  for (int i = 0; i < Z_test_out.rows(); ++i)
    if (outlier::kmeans_predict(km, Z_test_out.row(i).transpose()) == outlier::Verdict::Outlier)
      ++out_ok;
  out.km_inlier_acc = static_cast<double>(in_ok) / Z_test_in.rows();
  out.km_outlier_acc = static_cast<double>(out_ok) / Z_test_out.rows();
  out.km_overall_acc = static_cast<double>(in_ok + out_ok) / Z_test.rows();
  return out;
}

// ---------------------------------------------------------------------------
// Replay study: one recorded clean QAM64 waveform, fresh-noise copies at each
// of the 17 rotation angles kpi/16, 17-class head.

struct ReplayConfig {
  int copies_per_rotation = 1000;
  int eval_copies_per_rotation = 0;  // fresh confusion-matrix copies, 0 skips
  double snr_db = 18.0;
  double learning_rate = 1e-3;
  int max_epochs = 200;
  uint64_t base_seed = 61;
  uint64_t model_seed = 62;
  uint64_t train_seed = 63;
};

struct ReplayResult {
  nn::History history;
  double accuracy;  // held-out split at the best epoch
  int dataset_size;
  std::vector<std::array<int, 17>> confusion;  // [true][predicted], optional
};

inline ReplayResult run_replay(const ReplayConfig& c) {
  Rng brng(substream(c.base_seed, "replay.base", 0));
  auto base = sig::synth_frame(ModulationKind::QAM64, 1e9, brng);  // effectively clean
  LabeledSet s;
  for (int k = 0; k <= 16; ++k)
    for (int i = 0; i < c.copies_per_rotation; ++i) {
      Rng nrng(substream(c.base_seed, "replay.noise", k * 100000 + i));
      auto noisy = sig::apply_awgn(base, c.snr_db, nrng);
      s.xs.push_back(nn::input_from_frame(rotate_frame(noisy, k * M_PI / 16.0)));
      s.ys.push_back(k);
    }
  std::vector<std::string> labels;
  for (int k = 0; k <= 16; ++k) labels.push_back("rot" + std::to_string(k));
  nn::Model model(nn::default_arch(17), nn::Shape{2, kFrameLen}, labels, c.model_seed);
  nn::TrainConfig cfg;
  cfg.learning_rate = c.learning_rate;
  cfg.max_epochs = c.max_epochs;
  cfg.seed = c.train_seed;
  auto history = nn::train(model, s.xs, s.ys, cfg);

  ReplayResult out;
  out.accuracy = history.epochs[history.best_epoch].val_acc;
  out.dataset_size = static_cast<int>(s.xs.size());
  out.history = std::move(history);
  if (c.eval_copies_per_rotation > 0) {
    out.confusion.assign(17, {});
    nn::Workspace ws(model);
    for (int k = 0; k <= 16; ++k)
      for (int i = 0; i < c.eval_copies_per_rotation; ++i) {
        Rng nrng(substream(c.base_seed, "replay.noise",
                           k * 100000 + c.copies_per_rotation + i));
        auto noisy = sig::apply_awgn(base, c.snr_db, nrng);
        const auto& logits =
            nn::forward_sample(model, nn::input_from_frame(rotate_frame(noisy, k * M_PI / 16.0)), ws);
        int arg = 0;
        for (int j = 1; j < 17; ++j)
          if (logits[j] > logits[arg]) arg = j;
        out.confusion[k][arg]++;
      }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Superposition study: the separation-stage classifier is trained on clean
// multi-SNR frames plus recovered sources from randomly mixed pairs, so it
// tolerates the crosstalk residue that survives blind separation.

struct SeparationTrainConfig {
  std::vector<double> snr_grid_db = {2, 6, 10, 14, 18};
  int per_mod = 100;
  int mixture_pairs = 2000;
  double learning_rate = 1e-3;
  int max_epochs = 100;
  uint64_t data_seed = 71;
  uint64_t model_seed = 72;
  uint64_t train_seed = 73;
  uint64_t mixture_seed = 76;
};

struct SeparationModel {
  nn::Model model;
  nn::History history;
};

inline const std::vector<ModulationKind>& mixture_pool() {
  static const std::vector<ModulationKind> mods = {
      ModulationKind::QPSK, ModulationKind::QAM16, ModulationKind::PAM4, ModulationKind::GFSK,
      ModulationKind::PSK8, ModulationKind::CPFSK, ModulationKind::WBFM, ModulationKind::AMSSB};
  return mods;
}

inline SeparationModel train_separation_model(const SeparationTrainConfig& c) {
  sig::DatasetSpec dspec;
  dspec.snr_grid_db = c.snr_grid_db;
  dspec.per_mod_count = c.per_mod;
  dspec.modulations.assign(kAllModulations.begin(), kAllModulations.end());
  dspec.include_idle = true;
  dspec.seed = c.data_seed;
  auto s = dataset_set(dspec);

  const auto& pool = mixture_pool();
  Rng mrng(substream(c.mixture_seed, "train.mix"));
  for (int t = 0; t < c.mixture_pairs; ++t) {
    int ma = static_cast<int>(mrng.below(pool.size()));
    int mb = static_cast<int>(mrng.below(pool.size()));
    while (mb == ma) mb = static_cast<int>(mrng.below(pool.size()));
    double snr = c.snr_grid_db[mrng.below(c.snr_grid_db.size())];
    auto fa = sig::synth_frame(pool[ma], snr, mrng);
    auto fb = sig::synth_frame(pool[mb], snr, mrng);
    double th = mrng.uniform(0.25, 1.3);
    std::array<std::array<double, 2>, 2> mix = {
        {{std::cos(th), -std::sin(th)}, {std::sin(th), std::cos(th)}}};
    auto [o1, o2] = sig::superimpose(fa, fb, mix);
    ica::WhitenResult w;
    try {
      w = ica::whiten(ica::stack_observations(o1, o2));
    } catch (const std::invalid_argument&) {
      continue;
    }
    auto res = ica::fastica(w.whitened, 1e-6, 500, substream(c.mixture_seed, "train.ica", t));
    IQFrame s1 = ica::frame_from_stacked_row(res.sources, 0);
    IQFrame s2 = ica::frame_from_stacked_row(res.sources, 1);
    // assign recovered rows to true sources by absolute correlation
    auto S = ica::stack_observations(fa, fb);
    auto corr = [&](int r, int t2) {
      Eigen::VectorXd a = res.sources.row(r).transpose();
      Eigen::VectorXd b = S.row(t2).transpose();
      a.array() -= a.mean();
      b.array() -= b.mean();
      double d = a.norm() * b.norm();
      return d > 0 ? std::abs(a.dot(b)) / d : 0.0;
    };
    bool direct = std::min(corr(0, 0), corr(1, 1)) >= std::min(corr(0, 1), corr(1, 0));
    int la = static_cast<int>(class_of(pool[ma]));
    int lb = static_cast<int>(class_of(pool[mb]));
    s.xs.push_back(nn::input_from_frame(s1));
    s.ys.push_back(direct ? la : lb);
    s.xs.push_back(nn::input_from_frame(s2));
    s.ys.push_back(direct ? lb : la);
  }

  nn::Model model(nn::default_arch(4), nn::Shape{2, kFrameLen}, class_labels(), c.model_seed);
  nn::TrainConfig cfg;
  cfg.learning_rate = c.learning_rate;
  cfg.max_epochs = c.max_epochs;
  cfg.seed = c.train_seed;
  auto history = nn::train(model, s.xs, s.ys, cfg);
  return {std::move(model), std::move(history)};
}

struct MixtureEvalConfig {
  int trials = 500;
  uint64_t mix_seed = 74;
  uint64_t ica_seed = 75;
};

// rotation mixing with a random angle in (0.25, 1.3) per trial
inline std::array<std::array<double, 2>, 2> trial_mixing(Rng& rng) {
  double th = rng.uniform(0.25, 1.3);
  return {{{std::cos(th), -std::sin(th)}, {std::sin(th), std::cos(th)}}};
}

inline double pair_accuracy(const nn::Model& model, ModulationKind a, ModulationKind b,
                            double snr_db, const MixtureEvalConfig& c) {
  nn::Workspace ws(model);
  SignalClass ca = class_of(a), cb = class_of(b);
  int ok = 0;
  for (int t = 0; t < c.trials; ++t) {
    Rng rng(substream(c.mix_seed, "mix", t));
    auto fa = sig::synth_frame(a, snr_db, rng);
    auto fb = sig::synth_frame(b, snr_db, rng);
    auto [o1, o2] = sig::superimpose(fa, fb, trial_mixing(rng));
    auto res = ica::separate_and_classify(o1, o2, model, ws, substream(c.ica_seed, "ica", t));
    bool hit = (res.classes.first == ca && res.classes.second == cb) ||
               (res.classes.first == cb && res.classes.second == ca);
    if (hit) ++ok;
  }
  return static_cast<double>(ok) / c.trials;
}

inline double mean_recovery_correlation(ModulationKind a, ModulationKind b, double snr_db,
                                        const MixtureEvalConfig& c) {
  double sum = 0.0;
  for (int t = 0; t < c.trials; ++t) {
    Rng rng(substream(c.mix_seed, "mix", t));
    auto fa = sig::synth_frame(a, snr_db, rng);
    auto fb = sig::synth_frame(b, snr_db, rng);
    auto [o1, o2] = sig::superimpose(fa, fb, trial_mixing(rng));
    auto w = ica::whiten(ica::stack_observations(o1, o2));
    auto res = ica::fastica(w.whitened, 1e-6, 500, substream(c.ica_seed, "ica", t));
    sum += ica::match_correlation(res.sources, ica::stack_observations(fa, fb));
  }
  return sum / c.trials;
}

// ---------------------------------------------------------------------------
// Simulation defaults matching the network study.

inline dsa::Scenario default_scenario() { return dsa::Scenario{}; }

}  // namespace rfdsa::xp
