#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "rfdsa/iq.hpp"
#include "rfdsa/nnet.hpp"
#include "rfdsa/rng.hpp"

namespace rfdsa::ica {

struct WhitenResult {
  Eigen::MatrixXd whitened;   // rows zero-mean, identity covariance
  Eigen::MatrixXd transform;  // whitened = transform * (X - mean)
  Eigen::VectorXd mean;
};

// Zero-mean, unit-covariance rows via the eigendecomposition of the row
// covariance.
inline WhitenResult whiten(const Eigen::MatrixXd& X) {
  if (X.cols() < 64) throw std::invalid_argument("whiten: need at least 64 samples");
  WhitenResult r;
  r.mean = X.rowwise().mean();
  Eigen::MatrixXd centered = X.colwise() - r.mean;
  Eigen::MatrixXd cov = centered * centered.transpose() / X.cols();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const auto& vals = eig.eigenvalues();
  if (vals.minCoeff() <= 1e-10 * std::max(vals.maxCoeff(), 1e-30))
    throw std::invalid_argument("whiten: rank-deficient observations");
  Eigen::VectorXd inv_sqrt = vals.array().sqrt().inverse();
  r.transform = inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();
  r.whitened = r.transform * centered;
  return r;
}

struct SeparationResult {
  Eigen::MatrixXd unmixing;  // W, rows unit-norm
  Eigen::MatrixXd sources;   // W * whitened, unit variance rows
  int iterations = 0;
  bool converged = false;
};

namespace detail {

// W <- (W W^T)^{-1/2} W
inline Eigen::MatrixXd sym_decorrelate(const Eigen::MatrixXd& W) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(W * W.transpose());
  Eigen::VectorXd inv_sqrt = eig.eigenvalues().array().max(1e-30).sqrt().inverse();
  return eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose() * W;
}

}  // namespace detail

// Symmetric fixed-point FastICA with the tanh (log-cosh) contrast on
// pre-whitened data.
inline SeparationResult fastica(const Eigen::MatrixXd& whitened, double tol = 1e-6,
                                int max_iter = 500, uint64_t seed = 0) {
  const int d = static_cast<int>(whitened.rows());
  const int n = static_cast<int>(whitened.cols());
  Rng rng(substream(seed, "fastica"));
  Eigen::MatrixXd W(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) W(i, j) = rng.normal();
  W = detail::sym_decorrelate(W);

  SeparationResult res;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::MatrixXd proj = W * whitened;                       // d x n
    Eigen::MatrixXd g = proj.array().tanh();                   // contrast
    Eigen::VectorXd gprime_mean = (1.0 - g.array().square()).rowwise().mean();
    Eigen::MatrixXd W_new =
        (g * whitened.transpose()) / n - gprime_mean.asDiagonal() * W;
    W_new = detail::sym_decorrelate(W_new);
    double min_diag = (W_new * W.transpose()).diagonal().cwiseAbs().minCoeff();
    W = W_new;
    res.iterations = it + 1;
    if (min_diag > 1.0 - tol) {
      res.converged = true;
      break;
    }
  }
  res.unmixing = W;
  res.sources = W * whitened;
  return res;
}

// Two complex observations stacked as real rows [I(0..127) Q(0..127)].
inline Eigen::MatrixXd stack_observations(const IQFrame& o1, const IQFrame& o2) {
  Eigen::MatrixXd X(2, 2 * kFrameLen);
  for (int n = 0; n < kFrameLen; ++n) {
    X(0, n) = o1.samples[n].real();
    X(0, kFrameLen + n) = o1.samples[n].imag();
    X(1, n) = o2.samples[n].real();
    X(1, kFrameLen + n) = o2.samples[n].imag();
  }
  return X;
}

inline IQFrame frame_from_stacked_row(const Eigen::MatrixXd& sources, int row) {
  IQFrame f;
  f.samples.resize(kFrameLen);
  for (int n = 0; n < kFrameLen; ++n) {
    f.samples[n] = cplx(sources(row, n), sources(row, kFrameLen + n));
  }
  double p = f.power();
  if (p > 0) {
    double g = 1.0 / std::sqrt(p);
    for (auto& s : f.samples) s *= g;
  }
  return f;
}

struct PairClassification {
  std::pair<SignalClass, SignalClass> classes;  // order-agnostic
  SeparationResult separation;
};

// whiten -> fastica -> renormalize each recovered source to unit power ->
// classify each. Scale information is lost to the permutation and scaling
// ambiguity of blind separation, so the classifier must distinguish classes
// from waveform structure alone.
inline PairClassification separate_and_classify(const IQFrame& o1, const IQFrame& o2,
                                                const nn::Model& model, nn::Workspace& ws,
                                                uint64_t seed = 0) {
  auto w = whiten(stack_observations(o1, o2));
  PairClassification out;
  out.separation = fastica(w.whitened, 1e-6, 500, seed);
  IQFrame s1 = frame_from_stacked_row(out.separation.sources, 0);
  IQFrame s2 = frame_from_stacked_row(out.separation.sources, 1);
  out.classes = {nn::classify(model, s1, ws).first, nn::classify(model, s2, ws).first};
  return out;
}

// Best-matching absolute correlation between recovered and true sources,
// invariant to sign and order. Rows are compared pairwise.
inline double match_correlation(const Eigen::MatrixXd& recovered, const Eigen::MatrixXd& truth) {
  auto corr = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    Eigen::VectorXd ac = a.array() - a.mean();
    Eigen::VectorXd bc = b.array() - b.mean();
    double d = ac.norm() * bc.norm();
    return d > 0 ? std::abs(ac.dot(bc)) / d : 0.0;
  };
  double direct = std::min(corr(recovered.row(0), truth.row(0)),
                           corr(recovered.row(1), truth.row(1)));
  double swapped = std::min(corr(recovered.row(0), truth.row(1)),
                            corr(recovered.row(1), truth.row(0)));
  return std::max(direct, swapped);
}

}  // namespace rfdsa::ica
