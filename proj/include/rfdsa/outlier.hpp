#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "rfdsa/rng.hpp"

namespace rfdsa::outlier {

namespace detail {

// Regularized lower incomplete gamma P(a, x), series + continued fraction.
inline double gamma_p(double a, double x) {
  if (x < 0 || a <= 0) throw std::invalid_argument("gamma_p domain");
  if (x == 0) return 0.0;
  const double lg = std::lgamma(a);
  if (x < a + 1.0) {
    double sum = 1.0 / a, term = sum, ap = a;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      term *= x / ap;
      sum += term;
      if (std::abs(term) < std::abs(sum) * 1e-14) break;
    }
    return sum * std::exp(-x + a * std::log(x) - lg);
  }
  // Lentz continued fraction for Q(a,x)
  double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
  for (int i = 1; i < 500; ++i) {
    double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::abs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-14) break;
  }
  return 1.0 - std::exp(-x + a * std::log(x) - lg) * h;
}

inline double chi2_cdf(double x, double k) { return gamma_p(k / 2.0, x / 2.0); }

inline double chi2_quantile(double q, double k) {
  double lo = 0.0, hi = std::max(4.0 * k, 10.0);
  while (chi2_cdf(hi, k) < q) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    (chi2_cdf(mid, k) < q ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Gaussian consistency factor for the h-subset covariance estimate.
inline double mcd_consistency(int n, int p, int h) {
  double alpha = static_cast<double>(h) / n;
  double q = chi2_quantile(alpha, p);
  double denom = chi2_cdf(q, p + 2.0);
  return alpha / std::max(denom, 1e-12);
}

struct Estimate {
  Eigen::VectorXd mu;
  Eigen::MatrixXd cov;
  double logdet = std::numeric_limits<double>::infinity();
};

inline Eigen::VectorXd sq_distances(const Eigen::MatrixXd& X, const Estimate& e) {
  Eigen::LLT<Eigen::MatrixXd> llt(e.cov);
  Eigen::MatrixXd centered = X.rowwise() - e.mu.transpose();
  Eigen::MatrixXd solved = llt.solve(centered.transpose());
  return (centered.array() * solved.transpose().array()).rowwise().sum();
}

inline Estimate fit_subset(const Eigen::MatrixXd& X, const std::vector<int>& idx) {
  Estimate e;
  int p = static_cast<int>(X.cols());
  e.mu = Eigen::VectorXd::Zero(p);
  for (int i : idx) e.mu += X.row(i).transpose();
  e.mu /= idx.size();
  e.cov = Eigen::MatrixXd::Zero(p, p);
  for (int i : idx) {
    Eigen::VectorXd d = X.row(i).transpose() - e.mu;
    e.cov += d * d.transpose();
  }
  e.cov /= std::max<size_t>(idx.size() - 1, 1);
  // ridge if near singular
  double tr = e.cov.trace();
  Eigen::LLT<Eigen::MatrixXd> llt(e.cov);
  if (llt.info() != Eigen::Success ||
      llt.matrixL().toDenseMatrix().diagonal().minCoeff() < 1e-10 * std::sqrt(tr / p + 1e-30)) {
    e.cov += (1e-6 * tr / p + 1e-12) * Eigen::MatrixXd::Identity(p, p);
    llt.compute(e.cov);
    if (llt.info() != Eigen::Success) {
      e.logdet = std::numeric_limits<double>::infinity();
      return e;
    }
  }
  e.logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return e;
}

// One concentration step: refit on the h smallest-distance points.
inline Estimate c_step(const Eigen::MatrixXd& X, const Estimate& e, int h) {
  Eigen::VectorXd d = sq_distances(X, e);
  std::vector<int> order(X.rows());
  std::iota(order.begin(), order.end(), 0);
  std::nth_element(order.begin(), order.begin() + h, order.end(),
                   [&](int a, int b) { return d[a] < d[b]; });
  order.resize(h);
  return fit_subset(X, order);
}

}  // namespace detail

struct MCDModel {
  Eigen::VectorXd mu;
  Eigen::MatrixXd cov;  // consistency-corrected
  Eigen::LLT<Eigen::MatrixXd> chol;
  double support_fraction = 0.0;
  double threshold = -1.0;  // set by calibrate
  double contamination = 0.0;
};

enum class Verdict { Inlier, Outlier };

// FAST-MCD: random elemental starts refined by concentration steps; the
// minimum-determinant h-subset estimate wins. support_fraction <= 0 picks
// the default h = ceil((n+p+1)/2).
inline MCDModel mcd_fit(const Eigen::MatrixXd& X, double support_fraction = 0.0,
                        uint64_t seed = 0) {
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  if (n <= 2 * p) throw std::invalid_argument("mcd_fit: too few samples (need n > 2p)");
  int h = support_fraction > 0.0
              ? std::clamp(static_cast<int>(std::lround(support_fraction * n)), p + 1, n)
              : (n + p + 1 + 1) / 2;

  const int kStarts = 50;
  const int kShortSteps = 3;
  const int kKeep = 5;
  Rng rng(substream(seed, "mcd"));

  std::vector<detail::Estimate> pool;
  for (int s = 0; s < kStarts; ++s) {
    // elemental subset of p+1 distinct points
    std::vector<int> idx;
    while (static_cast<int>(idx.size()) < p + 1) {
      int cand = static_cast<int>(rng.below(n));
      if (std::find(idx.begin(), idx.end(), cand) == idx.end()) idx.push_back(cand);
    }
    auto e = detail::fit_subset(X, idx);
    if (!std::isfinite(e.logdet)) continue;
    for (int c = 0; c < kShortSteps; ++c) e = detail::c_step(X, e, h);
    pool.push_back(std::move(e));
  }
  if (pool.empty()) throw std::runtime_error("mcd_fit: degenerate features");
  std::sort(pool.begin(), pool.end(),
            [](const auto& a, const auto& b) { return a.logdet < b.logdet; });
  pool.resize(std::min<size_t>(kKeep, pool.size()));

  detail::Estimate best;
  for (auto& e : pool) {
    double prev = e.logdet;
    for (int it = 0; it < 100; ++it) {
      auto next = detail::c_step(X, e, h);
      if (next.logdet >= prev - 1e-10) {
        e = next;
        break;
      }
      prev = next.logdet;
      e = next;
    }
    if (e.logdet < best.logdet) best = e;
  }
  if (!std::isfinite(best.logdet)) throw std::runtime_error("mcd_fit: degenerate features");

  MCDModel m;
  m.mu = best.mu;
  m.cov = best.cov * detail::mcd_consistency(n, p, h);

  // Reweighting: the raw minimum-determinant scatter is consistent but very
  // inefficient, so refit a classical estimate on the points inside the
  // 97.5% chi-square cutoff and correct that for the truncation.
  {
    detail::Estimate raw;
    raw.mu = m.mu;
    raw.cov = m.cov;
    Eigen::VectorXd d2 = detail::sq_distances(X, raw);
    const double cutoff = detail::chi2_quantile(0.975, p);
    std::vector<int> keep;
    for (int i = 0; i < n; ++i)
      if (d2[i] <= cutoff) keep.push_back(i);
    if (static_cast<int>(keep.size()) > 2 * p) {
      auto rw = detail::fit_subset(X, keep);
      if (std::isfinite(rw.logdet)) {
        double corr = 0.975 / std::max(detail::chi2_cdf(cutoff, p + 2.0), 1e-12);
        m.mu = rw.mu;
        m.cov = rw.cov * corr;
      }
    }
  }
  m.chol.compute(m.cov);
  if (m.chol.info() != Eigen::Success) {
    m.cov += (1e-6 * m.cov.trace() / p) * Eigen::MatrixXd::Identity(p, p);
    m.chol.compute(m.cov);
    if (m.chol.info() != Eigen::Success)
      throw std::runtime_error("mcd_fit: degenerate features");
  }
  m.support_fraction = static_cast<double>(h) / n;
  return m;
}

inline double mahalanobis(const MCDModel& m, const Eigen::VectorXd& x) {
  if (x.size() != m.mu.size()) throw std::invalid_argument("mahalanobis: dimension mismatch");
  Eigen::VectorXd d = x - m.mu;
  return std::sqrt(std::max(0.0, d.dot(m.chol.solve(d))));
}

// Threshold at the (1 - contamination) empirical quantile of the training
// distances; points strictly above it are declared outliers.
inline MCDModel mcd_calibrate(MCDModel m, const Eigen::MatrixXd& train_inliers,
                              double contamination) {
  if (contamination <= 0.0 || contamination > 0.5)
    throw std::invalid_argument("contamination must be in (0, 0.5]");
  const int n = static_cast<int>(train_inliers.rows());
  if (n == 0) throw std::invalid_argument("mcd_calibrate: empty training set");
  std::vector<double> d(n);
  for (int i = 0; i < n; ++i) d[i] = mahalanobis(m, train_inliers.row(i).transpose());
  std::sort(d.begin(), d.end());
  int idx = std::min(n - 1, static_cast<int>(std::ceil((1.0 - contamination) * n)) - 1);
  idx = std::max(idx, 0);
  m.threshold = d[idx];
  m.contamination = contamination;
  return m;
}

// Boundary points (distance == threshold) are inliers.
inline Verdict mcd_predict(const MCDModel& m, const Eigen::VectorXd& x) {
  if (m.threshold < 0.0) throw std::logic_error("mcd_predict: model not calibrated");
  return mahalanobis(m, x) > m.threshold ? Verdict::Outlier : Verdict::Inlier;
}

struct SweepRow {
  double contamination;
  double inlier_accuracy;
  double outlier_accuracy;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  double selected = 0.0;  // c* maximizing min(inlier, outlier) accuracy
};

inline SweepResult sweep_contamination(const MCDModel& fitted, const Eigen::MatrixXd& train_inliers,
                                       const Eigen::MatrixXd& test_inliers,
                                       const Eigen::MatrixXd& test_outliers,
                                       const std::vector<double>& grid) {
  if (train_inliers.rows() == 0 || test_inliers.rows() == 0 || test_outliers.rows() == 0)
    throw std::invalid_argument("sweep_contamination: empty feature set");
  SweepResult out;
  double best = -1.0;
  for (double c : grid) {
    auto m = mcd_calibrate(fitted, train_inliers, c);
    int in_ok = 0, out_ok = 0;
    for (int i = 0; i < test_inliers.rows(); ++i)
      if (mcd_predict(m, test_inliers.row(i).transpose()) == Verdict::Inlier) ++in_ok;
    for (int i = 0; i < test_outliers.rows(); ++i)
      if (mcd_predict(m, test_outliers.row(i).transpose()) == Verdict::Outlier) ++out_ok;
    SweepRow row{c, static_cast<double>(in_ok) / test_inliers.rows(),
                 static_cast<double>(out_ok) / test_outliers.rows()};
    out.rows.push_back(row);
    double score = std::min(row.inlier_accuracy, row.outlier_accuracy);
    if (score > best) {  // ties keep the smaller (earlier) contamination
      best = score;
      out.selected = c;
    }
  }
  return out;
}

inline void dump_sweep_csv(const SweepResult& r, std::ostream& os) {
  os << "contamination,inlier_acc,outlier_acc,is_selected\n";
  for (const auto& row : r.rows) {
    os << row.contamination << ',' << row.inlier_accuracy << ',' << row.outlier_accuracy << ','
       << (row.contamination == r.selected ? 1 : 0) << '\n';
  }
}

// Seeded Gaussian random projection for covariance-friendly feature
// dimensionality (used when p > n/5).
inline Eigen::MatrixXd random_projection(const Eigen::MatrixXd& X, int target_dim, uint64_t seed) {
  Rng rng(substream(seed, "randproj"));
  Eigen::MatrixXd P(X.cols(), target_dim);
  double s = 1.0 / std::sqrt(static_cast<double>(target_dim));
  for (int i = 0; i < P.rows(); ++i)
    for (int j = 0; j < P.cols(); ++j) P(i, j) = s * rng.normal();
  return X * P;
}

// ---- k-means ----

struct KMeansModel {
  Eigen::MatrixXd centroids;  // k x p
  double inertia = 0.0;
  int outlier_cluster = -1;
};

inline int nearest_centroid(const KMeansModel& m, const Eigen::VectorXd& x) {
  int best = 0;
  double bd = (m.centroids.row(0).transpose() - x).squaredNorm();
  for (int c = 1; c < m.centroids.rows(); ++c) {
    double d = (m.centroids.row(c).transpose() - x).squaredNorm();
    if (d < bd) {
      bd = d;
      best = c;
    }
  }
  return best;
}

// Lloyd iterations from k-means++ seeding.
inline KMeansModel kmeans_fit(const Eigen::MatrixXd& X, int k = 2, uint64_t seed = 0,
                              int max_iter = 300, double tol = 1e-6) {
  const int n = static_cast<int>(X.rows());
  if (n < k) throw std::invalid_argument("kmeans_fit: fewer samples than clusters");
  Rng rng(substream(seed, "kmeans"));

  KMeansModel m;
  m.centroids.resize(k, X.cols());
  // k-means++ seeding
  m.centroids.row(0) = X.row(rng.below(n));
  Eigen::VectorXd mind =
      (X.rowwise() - m.centroids.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    double total = mind.sum();
    int pick = 0;
    if (total > 0) {
      double r = rng.uniform() * total, acc = 0.0;
      for (int i = 0; i < n; ++i) {
        acc += mind[i];
        if (acc >= r) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<int>(rng.below(n));
    }
    m.centroids.row(c) = X.row(pick);
    mind = mind.cwiseMin((X.rowwise() - m.centroids.row(c)).rowwise().squaredNorm());
  }

  std::vector<int> assign(n, -1);
  for (int it = 0; it < max_iter; ++it) {
    for (int i = 0; i < n; ++i) assign[i] = nearest_centroid(m, X.row(i).transpose());
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(k, X.cols());
    std::vector<int> count(k, 0);
    for (int i = 0; i < n; ++i) {
      next.row(assign[i]) += X.row(i);
      count[assign[i]]++;
    }
    for (int c = 0; c < k; ++c) {
      if (count[c] > 0) {
        next.row(c) /= count[c];
      } else {
        // empty cluster: grab the farthest point from its centroid
        int far = 0;
        double fd = -1.0;
        for (int i = 0; i < n; ++i) {
          double d = (X.row(i) - m.centroids.row(assign[i])).squaredNorm();
          if (d > fd) {
            fd = d;
            far = i;
          }
        }
        next.row(c) = X.row(far);
      }
    }
    double shift = (next - m.centroids).rowwise().norm().maxCoeff();
    m.centroids = next;
    if (shift < tol) break;
  }
  for (int i = 0; i < n; ++i) assign[i] = nearest_centroid(m, X.row(i).transpose());
  m.inertia = 0.0;
  for (int i = 0; i < n; ++i)
    m.inertia += (X.row(i) - m.centroids.row(assign[i])).squaredNorm();
  return m;
}

inline KMeansModel kmeans_fit_restarts(const Eigen::MatrixXd& X, int k, uint64_t seed,
                                       int n_restarts, int max_iter = 300, double tol = 1e-6) {
  KMeansModel best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < n_restarts; ++r) {
    auto m = kmeans_fit(X, k, splitmix64(seed ^ (r + 1)), max_iter, tol);
    if (m.inertia < best.inertia) best = m;
  }
  return best;
}

// Mark the cluster holding the minority of labeled inliers as the outlier
// cluster; ties go to the cluster farther from the inlier centroid.
inline KMeansModel kmeans_label_outlier_cluster(KMeansModel m,
                                                const Eigen::MatrixXd& labeled_inliers) {
  if (m.centroids.rows() != 2) throw std::invalid_argument("outlier labeling expects k=2");
  int count0 = 0, count1 = 0;
  for (int i = 0; i < labeled_inliers.rows(); ++i) {
    (nearest_centroid(m, labeled_inliers.row(i).transpose()) == 0 ? count0 : count1)++;
  }
  if (count0 != count1) {
    m.outlier_cluster = count0 < count1 ? 0 : 1;
  } else {
    Eigen::VectorXd inlier_centroid = labeled_inliers.colwise().mean().transpose();
    double d0 = (m.centroids.row(0).transpose() - inlier_centroid).squaredNorm();
    double d1 = (m.centroids.row(1).transpose() - inlier_centroid).squaredNorm();
    m.outlier_cluster = d0 > d1 ? 0 : 1;
  }
  return m;
}

inline Verdict kmeans_predict(const KMeansModel& m, const Eigen::VectorXd& x) {
  if (m.outlier_cluster < 0) throw std::logic_error("kmeans_predict: outlier cluster not set");
  return nearest_centroid(m, x) == m.outlier_cluster ? Verdict::Outlier : Verdict::Inlier;
}

}  // namespace rfdsa::outlier
