#include <gtest/gtest.h>

#include <cmath>

#include "rfdsa/nnet.hpp"
#include "rfdsa/sigsynth.hpp"

using namespace rfdsa;
using namespace rfdsa::nn;

namespace {

Model small_conv_model(uint64_t seed, int classes = 3) {
  std::vector<LayerSpec> specs = {
      LayerSpec::zero_pad(1), LayerSpec::conv(3, 3),    LayerSpec::selu(),
      LayerSpec::max_pool(2, 2), LayerSpec::dense(5),   LayerSpec::selu(),
      LayerSpec::dropout(0.5),   LayerSpec::dense(classes),
  };
  std::vector<std::string> labels;
  for (int i = 0; i < classes; ++i) labels.push_back("c" + std::to_string(i));
  return Model(specs, Shape{2, 8}, labels, seed);
}

std::vector<std::vector<double>> random_inputs(int n, int dim, uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> xs(n, std::vector<double>(dim));
  for (auto& x : xs)
    for (auto& v : x) v = rng.normal();
  return xs;
}

// Overlapping two-class toy in 2-D, solvable by logistic regression.
void toy_2class(int n, uint64_t seed, double sep, std::vector<std::vector<double>>& xs,
                std::vector<int>& ys) {
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    int y = i % 2;
    double cx = y ? sep : -sep;
    xs.push_back({cx + 0.3 * rng.normal(), 0.3 * rng.normal()});
    ys.push_back(y);
  }
}

}  // namespace

TEST(Forward, ZeroParamsGiveUniformSoftmax) {
  auto m = small_conv_model(1, 4);
  std::fill(m.params().begin(), m.params().end(), 0.0);
  Workspace ws(m);
  auto xs = random_inputs(3, 16, 2);
  for (const auto& x : xs) {
    auto p = softmax(forward_sample(m, x, ws));
    for (double v : p) EXPECT_NEAR(v, 0.25, 1e-12);
  }
}

TEST(Forward, EvalModeDeterministic) {
  auto m = small_conv_model(3);
  Workspace ws(m);
  auto x = random_inputs(1, 16, 4)[0];
  auto l1 = forward_sample(m, x, ws);
  auto copy = l1;
  auto l2 = forward_sample(m, x, ws);
  for (size_t i = 0; i < copy.size(); ++i) EXPECT_EQ(copy[i], l2[i]);
}

TEST(Forward, SingleDenseHandComputed) {
  // 2 -> 2 dense, weights [[1,2],[3,-1]], bias [0.5, -0.5], x = (2, -1)
  Model m({LayerSpec::dense(2)}, Shape{1, 2}, {"a", "b"}, 0);
  m.params() = {1, 2, 3, -1, 0.5, -0.5};
  Workspace ws(m);
  auto logits = forward_sample(m, {2, -1}, ws);
  EXPECT_NEAR(logits[0], 1 * 2 + 2 * -1 + 0.5, 1e-15);
  EXPECT_NEAR(logits[1], 3 * 2 + -1 * -1 - 0.5, 1e-15);
}

TEST(Forward, ShapeMismatchThrows) {
  auto m = small_conv_model(5);
  Workspace ws(m);
  std::vector<double> bad(7, 0.0);
  EXPECT_THROW(forward_sample(m, bad, ws), std::invalid_argument);
}

TEST(CrossEntropy, ClosedForms) {
  EXPECT_NEAR(cross_entropy({{1.0, 0.0, 0.0, 0.0}}, {0}), 0.0, 1e-9);
  EXPECT_NEAR(cross_entropy({{0.25, 0.25, 0.25, 0.25}}, {2}), std::log(4.0), 1e-12);
  EXPECT_NEAR(cross_entropy({{0.5, 0.5}}, {0}), std::log(2.0), 1e-12);
  // clamp guard: zero probability must not produce inf/nan
  double l = cross_entropy({{0.0, 1.0}}, {0});
  EXPECT_TRUE(std::isfinite(l));
}

TEST(Gradient, MatchesFiniteDifferences) {
  auto m = small_conv_model(7);
  Workspace ws(m);
  auto xs = random_inputs(4, 16, 8);
  std::vector<int> ys = {0, 1, 2, 0};
  std::vector<double> grad;
  batch_gradient(m, xs, ys, ws, grad, true, 99);
  const double h = 1e-5;
  int ok = 0, total = 0;
  for (size_t i = 0; i < m.num_params(); ++i) {
    double orig = m.params()[i];
    m.params()[i] = orig + h;
    double lp = batch_loss(m, xs, ys, ws, true, 99);
    m.params()[i] = orig - h;
    double lm = batch_loss(m, xs, ys, ws, true, 99);
    m.params()[i] = orig;
    double fd = (lp - lm) / (2 * h);
    double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-8});
    if (std::abs(fd - grad[i]) / denom < 1e-4) ++ok;
    ++total;
  }
  EXPECT_GE(static_cast<double>(ok) / total, 0.99);
}

TEST(Gradient, DuplicatedSampleEqualsSingle) {
  auto m = small_conv_model(9);
  Workspace ws(m);
  auto x = random_inputs(1, 16, 10)[0];
  std::vector<double> g1, g2;
  batch_gradient(m, {x}, {1}, ws, g1, false);
  batch_gradient(m, {x, x}, {1, 1}, ws, g2, false);
  for (size_t i = 0; i < g1.size(); ++i) EXPECT_NEAR(g1[i], g2[i], 1e-12);
}

TEST(Gradient, SmallAtConvergedMinimum) {
  Model m({LayerSpec::dense(2)}, Shape{1, 2}, {"a", "b"}, 11);
  std::vector<std::vector<double>> xs;
  std::vector<int> ys;
  toy_2class(20, 12, 2.0, xs, ys);
  Workspace ws(m);
  AdamState st;
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  std::vector<double> grad;
  for (int it = 0; it < 3000; ++it) {
    batch_gradient(m, xs, ys, ws, grad);
    adam_step(m.params(), grad, st, cfg);
  }
  batch_gradient(m, xs, ys, ws, grad);
  double norm = 0.0;
  for (double g : grad) norm += g * g;
  EXPECT_LT(std::sqrt(norm), 1e-3);
}

TEST(Adam, ZeroGradientNoChange) {
  std::vector<double> params = {1.0, -2.0, 3.0};
  std::vector<double> grad = {0.0, 0.0, 0.0};
  AdamState st;
  TrainConfig cfg;
  adam_step(params, grad, st, cfg);
  EXPECT_EQ(params[0], 1.0);
  EXPECT_EQ(params[1], -2.0);
  EXPECT_EQ(params[2], 3.0);
}

TEST(Adam, FirstStepMagnitudeIsLearningRate) {
  // bias-corrected Adam at t=1: update = lr * g/|g| (up to eps)
  std::vector<double> params = {0.0, 0.0};
  std::vector<double> grad = {0.3, -7.0};
  AdamState st;
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  adam_step(params, grad, st, cfg);
  EXPECT_NEAR(std::abs(params[0]), 1e-3, 1e-6);
  EXPECT_NEAR(std::abs(params[1]), 1e-3, 1e-6);
  EXPECT_LT(params[0], 0.0);
  EXPECT_GT(params[1], 0.0);
}

TEST(Adam, Reproducible) {
  std::vector<double> p1 = {1.0, 2.0}, p2 = {1.0, 2.0};
  AdamState s1, s2;
  TrainConfig cfg;
  for (int i = 0; i < 5; ++i) {
    std::vector<double> g = {0.1 * i, -0.2};
    adam_step(p1, g, s1, cfg);
    adam_step(p2, g, s2, cfg);
  }
  EXPECT_EQ(p1[0], p2[0]);
  EXPECT_EQ(p1[1], p2[1]);
}

TEST(Train, SeparableToyReachesHighAccuracy) {
  Model m({LayerSpec::dense(2)}, Shape{1, 2}, {"a", "b"}, 21);
  std::vector<std::vector<double>> xs;
  std::vector<int> ys;
  toy_2class(400, 22, 1.5, xs, ys);
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.max_epochs = 50;
  cfg.seed = 23;
  auto hist = train(m, xs, ys, cfg);
  EXPECT_GE(hist.epochs.back().val_acc, 0.99);
}

TEST(Train, PatienceOneStopsAfterTwoEpochs) {
  Model m({LayerSpec::dense(2)}, Shape{1, 2}, {"a", "b"}, 31);
  std::vector<std::vector<double>> xs;
  std::vector<int> ys;
  toy_2class(100, 32, 1.5, xs, ys);
  TrainConfig cfg;
  cfg.learning_rate = 50.0;  // diverges immediately
  cfg.max_epochs = 100;
  cfg.patience = 1;
  cfg.seed = 33;
  auto hist = train(m, xs, ys, cfg);
  ASSERT_EQ(hist.epochs.size(), 2u);
  EXPECT_EQ(hist.best_epoch, 0);
  // restored snapshot reproduces the epoch-0 validation loss
  Workspace ws(m);
  std::vector<std::vector<double>> xval;
  std::vector<int> yval;
  // just check the restored model's loss is the recorded best, not the last
  EXPECT_EQ(hist.best_val_loss, hist.epochs[0].val_loss);
}

TEST(Train, ErrorsOnBadInput) {
  Model m({LayerSpec::dense(2)}, Shape{1, 2}, {"a", "b"}, 41);
  TrainConfig cfg;
  std::vector<std::vector<double>> xs;
  std::vector<int> ys;
  EXPECT_THROW(train(m, xs, ys, cfg), std::invalid_argument);
  xs = {{1, 2}, {3, 4}};
  ys = {0, 0};
  EXPECT_THROW(train(m, xs, ys, cfg), std::invalid_argument);
}

TEST(Fisher, DeadParameterHasZeroImportance) {
  Model m({LayerSpec::dense(2), LayerSpec::selu(), LayerSpec::dense(2)}, Shape{1, 2},
          {"a", "b"}, 51);
  // cut hidden unit 1 off from the output: final dense weights W[u][1] = 0
  size_t off = m.layer_offset(2);
  m.params()[off + 1] = 0.0;  // W[0][1]
  m.params()[off + 3] = 0.0;  // W[1][1]
  auto xs = random_inputs(10, 2, 52);
  std::vector<int> ys(10, 0);
  auto fd = fisher_diagonal(m, xs, ys);
  // incoming weights of hidden unit 1 live at offsets 2,3 (row 1) and bias 5
  EXPECT_EQ(fd.f[2], 0.0);
  EXPECT_EQ(fd.f[3], 0.0);
  EXPECT_EQ(fd.f[5], 0.0);
}

TEST(Fisher, DeterministicAndMeanLinear) {
  auto m = small_conv_model(61);
  auto xs = random_inputs(8, 16, 62);
  std::vector<int> ys = {0, 1, 2, 0, 1, 2, 0, 1};
  auto f1 = fisher_diagonal(m, xs, ys);
  auto f2 = fisher_diagonal(m, xs, ys);
  for (size_t i = 0; i < f1.f.size(); ++i) EXPECT_EQ(f1.f[i], f2.f[i]);

  std::vector<std::vector<double>> xa(xs.begin(), xs.begin() + 4), xb(xs.begin() + 4, xs.end());
  std::vector<int> ya(ys.begin(), ys.begin() + 4), yb(ys.begin() + 4, ys.end());
  auto fa = fisher_diagonal(m, xa, ya);
  auto fb = fisher_diagonal(m, xb, yb);
  for (size_t i = 0; i < f1.f.size(); ++i)
    EXPECT_NEAR(f1.f[i], 0.5 * (fa.f[i] + fb.f[i]), 1e-12);
}

TEST(Ewc, LambdaZeroEqualsCrossEntropy) {
  auto m = small_conv_model(71);
  Workspace ws(m);
  auto xs = random_inputs(5, 16, 72);
  std::vector<int> ys = {0, 1, 2, 1, 0};
  FisherDiag fd = fisher_diagonal(m, xs, ys);
  fd.lambda = 0.0;
  // perturb away from the anchor
  for (auto& p : m.params()) p += 0.01;
  double with = batch_loss(m, xs, ys, ws, false, 0, &fd);
  double without = batch_loss(m, xs, ys, ws, false, 0, nullptr);
  EXPECT_EQ(with, without);
}

TEST(Ewc, PenaltyZeroAtAnchor) {
  auto m = small_conv_model(81);
  Workspace ws(m);
  auto xs = random_inputs(5, 16, 82);
  std::vector<int> ys = {0, 1, 2, 1, 0};
  auto fd = fisher_diagonal(m, xs, ys);
  fd.lambda = 123.0;
  double with = batch_loss(m, xs, ys, ws, false, 0, &fd);
  double without = batch_loss(m, xs, ys, ws, false, 0, nullptr);
  EXPECT_NEAR(with, without, 1e-15);
}

TEST(Ewc, UnitFisherLambdaTwoIsSquaredDistance) {
  auto m = small_conv_model(91);
  Workspace ws(m);
  auto xs = random_inputs(5, 16, 92);
  std::vector<int> ys = {0, 1, 2, 1, 0};
  FisherDiag fd;
  fd.anchor = m.params();
  fd.f.assign(m.num_params(), 1.0);
  fd.lambda = 2.0;
  Rng rng(93);
  double dist2 = 0.0;
  for (auto& p : m.params()) {
    double d = 0.01 * rng.normal();
    p += d;
    dist2 += d * d;
  }
  double with = batch_loss(m, xs, ys, ws, false, 0, &fd);
  double without = batch_loss(m, xs, ys, ws, false, 0, nullptr);
  EXPECT_NEAR(with - without, dist2, 1e-10);
}

TEST(Features, ShapeAndDeterminism) {
  auto specs = default_arch(4);
  Model m(specs, Shape{2, kFrameLen}, {"idle", "in", "jam", "out"}, 101);
  // conv cascade: 128 -> 64 -> 32 -> 16 with 32 channels
  EXPECT_EQ(feature_dim(m), 32 * 16);
  Workspace ws(m);
  Rng rng(102);
  auto f = sig::synth_frame(ModulationKind::QPSK, 18.0, rng);
  auto v1 = extract_features(m, f, ws);
  auto v2 = extract_features(m, f, ws);
  ASSERT_EQ(v1.size(), static_cast<size_t>(feature_dim(m)));
  for (size_t i = 0; i < v1.size(); ++i) EXPECT_EQ(v1[i], v2[i]);
}

TEST(Classify, TieBreaksToIdle) {
  auto specs = default_arch(4);
  Model m(specs, Shape{2, kFrameLen}, {"idle", "in", "jam", "out"}, 111);
  std::fill(m.params().begin(), m.params().end(), 0.0);
  Workspace ws(m);
  Rng rng(112);
  auto f = sig::synth_frame(ModulationKind::QAM16, 18.0, rng);
  auto [cls, sv] = classify(m, f, ws);
  EXPECT_EQ(cls, SignalClass::Idle);
  double sum = 0.0;
  for (double v : sv.p) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-9);
}

TEST(SoftmaxRows, SumToOneForRandomModels) {
  for (int trial = 0; trial < 5; ++trial) {
    auto m = small_conv_model(200 + trial, 4);
    Workspace ws(m);
    for (const auto& x : random_inputs(10, 16, 300 + trial)) {
      auto p = softmax(forward_sample(m, x, ws));
      double sum = 0.0;
      for (double v : p) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
        sum += v;
      }
      EXPECT_NEAR(sum, 1.0, 1e-9);
    }
  }
}

TEST(Confusion, PerfectClassifierIsIdentity) {
  Model m({LayerSpec::dense(2)}, Shape{1, 2}, {"a", "b"}, 121);
  m.params() = {1, 0, -1, 0, 0, 0};  // logit0 = x0, logit1 = -x0
  std::vector<std::vector<double>> xs = {{2, 0}, {-2, 0}, {3, 1}, {-1, 5}};
  std::vector<int> ys = {0, 1, 0, 1};
  auto cm = confusion_matrix(m, xs, ys);
  EXPECT_EQ(cm.counts[0][0], 2);
  EXPECT_EQ(cm.counts[1][1], 2);
  EXPECT_EQ(cm.counts[0][1], 0);
  EXPECT_EQ(cm.counts[1][0], 0);
  EXPECT_NEAR(cm.normalized[0][0], 1.0, 1e-12);
}

TEST(Confusion, SingleSampleOneCell) {
  Model m({LayerSpec::dense(2)}, Shape{1, 2}, {"a", "b"}, 131);
  auto cm = confusion_matrix(m, {{1.0, 2.0}}, {1});
  long total = 0;
  for (const auto& row : cm.counts)
    for (long c : row) total += c;
  EXPECT_EQ(total, 1);
  EXPECT_THROW(confusion_matrix(m, {}, {}), std::invalid_argument);
}

TEST(Checkpoint, RoundTrip) {
  auto m = small_conv_model(141, 3);
  std::string path = testing::TempDir() + "/model.ckpt";
  save_checkpoint(m, path);
  auto m2 = load_checkpoint(path);
  ASSERT_EQ(m2.num_params(), m.num_params());
  for (size_t i = 0; i < m.num_params(); ++i) EXPECT_EQ(m.params()[i], m2.params()[i]);
  EXPECT_EQ(m2.labels(), m.labels());
  Workspace w1(m), w2(m2);
  auto x = random_inputs(1, 16, 142)[0];
  auto l1 = forward_sample(m, x, w1);
  auto c1 = l1;
  auto l2 = forward_sample(m2, x, w2);
  for (size_t i = 0; i < c1.size(); ++i) EXPECT_EQ(c1[i], l2[i]);
}

TEST(Model, PoolStrideMustDivide) {
  // length 7 cannot be pooled by size 2 stride 2
  EXPECT_THROW(Model({LayerSpec::max_pool(2, 2), LayerSpec::dense(2)}, Shape{1, 7},
                     {"a", "b"}, 0),
               std::invalid_argument);
}
