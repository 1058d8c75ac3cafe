#include <gtest/gtest.h>

#include "rfdsa/separation.hpp"
#include "rfdsa/sigsynth.hpp"

using namespace rfdsa;
using namespace rfdsa::ica;

namespace {

Eigen::MatrixXd random_rows(int rows, int cols, uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd X(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) X(i, j) = rng.normal();
  return X;
}

// PAM4 frame and uniform noise as two independent non-Gaussian-ish sources,
// stacked real.
Eigen::MatrixXd pam4_uniform_sources(uint64_t seed) {
  Rng rng(seed);
  auto f = sig::synth_frame(ModulationKind::PAM4, 30.0, rng);
  Eigen::MatrixXd S(2, 2 * kFrameLen);
  for (int n = 0; n < kFrameLen; ++n) {
    S(0, n) = f.samples[n].real();
    S(0, kFrameLen + n) = f.samples[n].imag();
  }
  for (int n = 0; n < 2 * kFrameLen; ++n) S(1, n) = rng.uniform(-1.0, 1.0);
  return S;
}

}  // namespace

TEST(Whiten, OutputCovarianceIsIdentity) {
  auto X = random_rows(2, 500, 1);
  X.row(1) = 0.7 * X.row(0) + 0.5 * X.row(1);  // correlate
  auto w = whiten(X);
  Eigen::MatrixXd cov = w.whitened * w.whitened.transpose() / X.cols();
  EXPECT_NEAR(cov(0, 0), 1.0, 1e-8);
  EXPECT_NEAR(cov(1, 1), 1.0, 1e-8);
  EXPECT_NEAR(cov(0, 1), 0.0, 1e-8);
}

TEST(Whiten, AlreadyWhiteGivesNearRotation) {
  auto X = random_rows(2, 5000, 2);
  auto w = whiten(X);
  Eigen::MatrixXd wwt = w.transform * w.transform.transpose();
  EXPECT_NEAR(wwt(0, 0), 1.0, 0.1);
  EXPECT_NEAR(wwt(1, 1), 1.0, 0.1);
  EXPECT_NEAR(wwt(0, 1), 0.0, 0.1);
}

TEST(Whiten, IdempotentUpToOrthogonal) {
  auto X = random_rows(2, 1000, 3);
  X.row(1) = 0.9 * X.row(0) + 0.2 * X.row(1);
  auto w1 = whiten(X);
  auto w2 = whiten(w1.whitened);
  Eigen::MatrixXd wwt = w2.transform * w2.transform.transpose();
  EXPECT_NEAR((wwt - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff(), 0.0, 1e-6);
}

TEST(Whiten, DuplicatedRowsThrow) {
  auto X = random_rows(2, 200, 4);
  X.row(1) = X.row(0);
  EXPECT_THROW(whiten(X), std::invalid_argument);
  Eigen::MatrixXd tiny(2, 10);
  EXPECT_THROW(whiten(tiny), std::invalid_argument);
}

TEST(FastIca, IdentityMixingGivesPermutation) {
  auto S = pam4_uniform_sources(5);
  auto w = whiten(S);  // sources independent, so whitening is ~diagonal scale
  auto r = fastica(w.whitened, 1e-6, 500, 6);
  EXPECT_TRUE(r.converged);
  // W * whitened should match the original sources up to permutation/sign
  EXPECT_GE(match_correlation(r.sources, S), 0.95);
}

TEST(FastIca, KnownMixingRecovery) {
  int ok = 0;
  const int trials = 30;
  for (int t = 0; t < trials; ++t) {
    auto S = pam4_uniform_sources(100 + t);
    Eigen::Matrix2d A;
    double th = 0.3 + 0.1 * t;
    A << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    Eigen::MatrixXd X = A * S;
    auto w = whiten(X);
    auto r = fastica(w.whitened, 1e-6, 500, 200 + t);
    if (match_correlation(r.sources, S) >= 0.95) ++ok;
  }
  EXPECT_GE(ok, trials - 2);
}

TEST(FastIca, GaussianPairDoesNotBlowUp) {
  // two Gaussians are not identifiable; result may be any rotation and the
  // convergence flag may be false, but the output must stay finite
  auto X = random_rows(2, 400, 7);
  auto w = whiten(X);
  auto r = fastica(w.whitened, 1e-6, 100, 8);
  EXPECT_TRUE(r.sources.allFinite());
  EXPECT_TRUE(r.unmixing.allFinite());
}

TEST(FastIca, DeterministicPerSeed) {
  auto S = pam4_uniform_sources(9);
  auto w = whiten(S);
  auto r1 = fastica(w.whitened, 1e-6, 500, 10);
  auto r2 = fastica(w.whitened, 1e-6, 500, 10);
  EXPECT_EQ((r1.unmixing - r2.unmixing).cwiseAbs().maxCoeff(), 0.0);
}

TEST(StackRoundTrip, FrameSurvives) {
  Rng rng(11);
  auto a = sig::synth_frame(ModulationKind::QPSK, 10.0, rng);
  auto b = sig::synth_frame(ModulationKind::WBFM, 10.0, rng);
  auto X = stack_observations(a, b);
  auto f = frame_from_stacked_row(X, 0);
  // unit-power renormalized copy of a
  double g = 1.0 / std::sqrt(a.power());
  for (int n = 0; n < kFrameLen; ++n) {
    EXPECT_NEAR(f.samples[n].real(), g * a.samples[n].real(), 1e-12);
    EXPECT_NEAR(f.samples[n].imag(), g * a.samples[n].imag(), 1e-12);
  }
}

TEST(SeparateAndClassify, IdleComponentStaysIdle) {
  // small quickly-trained 4-class model: idle vs strong signal is mostly a
  // power cue, learnable in a few epochs
  sig::DatasetSpec spec;
  spec.snr_grid_db = {18.0};
  spec.per_mod_count = 250;
  spec.modulations = {ModulationKind::QPSK, ModulationKind::QAM16, ModulationKind::GFSK};
  spec.include_idle = true;
  spec.seed = 12;
  auto ds = sig::make_dataset(spec);
  std::vector<std::vector<double>> xs;
  std::vector<int> ys;
  for (const auto& lf : ds) {
    xs.push_back(nn::input_from_frame(lf.frame));
    ys.push_back(static_cast<int>(lf.cls));
    if (lf.cls == SignalClass::Idle) {
      // separation renormalizes every recovered source to unit power, so
      // noise must stay recognizable as idle at unit scale too
      IQFrame scaled = lf.frame;
      double g = 1.0 / std::sqrt(scaled.power());
      for (auto& s : scaled.samples) s *= g;
      xs.push_back(nn::input_from_frame(scaled));
      ys.push_back(static_cast<int>(lf.cls));
    }
  }
  nn::Model model(nn::default_arch(4), nn::Shape{2, kFrameLen},
                  {"idle", "in-network", "jammer", "out-network"}, 13);
  nn::TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.max_epochs = 60;
  cfg.seed = 14;
  auto hist = nn::train(model, xs, ys, cfg);
  ASSERT_GE(hist.epochs[hist.best_epoch].val_acc, 0.8);

  nn::Workspace ws(model);
  int idle_found = 0;
  const int trials = 20;
  for (int t = 0; t < trials; ++t) {
    Rng rng(300 + t);
    auto sig_frame = sig::synth_frame(ModulationKind::QPSK, 18.0, rng);
    auto idle_frame = sig::synth_idle(18.0, rng);
    auto [o1, o2] = sig::superimpose(sig_frame, idle_frame, {{{1.0, 0.0}, {0.0, 1.0}}});
    auto res = separate_and_classify(o1, o2, model, ws, 400 + t);
    if (res.classes.first == SignalClass::Idle || res.classes.second == SignalClass::Idle)
      ++idle_found;
  }
  EXPECT_GE(idle_found, trials * 3 / 4);
}
