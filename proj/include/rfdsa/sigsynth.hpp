#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <vector>

#include "rfdsa/iq.hpp"
#include "rfdsa/rng.hpp"

namespace rfdsa::sig {

inline constexpr int kSamplesPerSymbol = 8;
inline constexpr double kPulseRolloff = 0.35;
inline constexpr int kPulseSpanSymbols = 4;  // one-sided, in symbols

// Raised-cosine pulse, unit symbol period T = kSamplesPerSymbol.
// Nyquist: zero at nonzero symbol multiples, so symbol-center samples of a
// shaped frame equal the symbols up to a common gain.
inline double raised_cosine(double t) {
  double x = t / kSamplesPerSymbol;
  double b = kPulseRolloff;
  double denom = 1.0 - 4.0 * b * b * x * x;
  if (std::abs(denom) < 1e-9) {
    // limit at |x| = 1/(2b)
    return (M_PI / 4.0) * (std::abs(x) > 1e-12 ? std::sin(M_PI * x) / (M_PI * x) : 1.0);
  }
  double sinc = std::abs(x) > 1e-12 ? std::sin(M_PI * x) / (M_PI * x) : 1.0;
  return sinc * std::cos(M_PI * b * x) / denom;
}

inline const std::vector<cplx>& constellation(ModulationKind kind) {
  static const std::vector<cplx> qpsk = [] {
    std::vector<cplx> c;
    for (int k = 0; k < 4; ++k) c.push_back(std::polar(1.0, M_PI / 4 + k * M_PI / 2));
    return c;
  }();
  static const std::vector<cplx> psk8 = [] {
    std::vector<cplx> c;
    for (int k = 0; k < 8; ++k) c.push_back(std::polar(1.0, k * M_PI / 4));
    return c;
  }();
  static const std::vector<cplx> qam16 = [] {
    std::vector<cplx> c;
    for (int i = -3; i <= 3; i += 2)
      for (int q = -3; q <= 3; q += 2) c.push_back(cplx(i, q) / std::sqrt(10.0));
    return c;
  }();
  static const std::vector<cplx> qam64 = [] {
    std::vector<cplx> c;
    for (int i = -7; i <= 7; i += 2)
      for (int q = -7; q <= 7; q += 2) c.push_back(cplx(i, q) / std::sqrt(42.0));
    return c;
  }();
  static const std::vector<cplx> pam4 = [] {
    std::vector<cplx> c;
    for (int i = -3; i <= 3; i += 2) c.push_back(cplx(i, 0.0) / std::sqrt(5.0));
    return c;
  }();
  switch (kind) {
    case ModulationKind::QPSK: return qpsk;
    case ModulationKind::PSK8: return psk8;
    case ModulationKind::QAM16: return qam16;
    case ModulationKind::QAM64: return qam64;
    case ModulationKind::PAM4: return pam4;
    default: throw std::invalid_argument("not a linear modulation");
  }
}

namespace detail {

// Seeded multi-tone message with closed-form Hilbert pair: three dominant
// low-frequency tones plus a weak random tone bath standing in for
// band-limited noise.
struct Message {
  std::vector<double> m;
  std::vector<double> m_hilbert;
};

inline Message make_message(Rng& rng, int n) {
  struct Tone {
    double amp, freq, phase;
  };
  std::vector<Tone> tones;
  for (int i = 0; i < 3; ++i) {
    tones.push_back({rng.uniform(0.5, 1.0), rng.uniform(0.01, 0.08), rng.uniform(0.0, 2 * M_PI)});
  }
  for (int i = 0; i < 12; ++i) {
    tones.push_back({rng.uniform(0.02, 0.12), rng.uniform(0.005, 0.15), rng.uniform(0.0, 2 * M_PI)});
  }
  Message msg;
  msg.m.resize(n);
  msg.m_hilbert.resize(n);
  for (int t = 0; t < n; ++t) {
    double v = 0.0, vh = 0.0;
    for (const auto& tone : tones) {
      double arg = 2 * M_PI * tone.freq * t + tone.phase;
      v += tone.amp * std::cos(arg);
      vh += tone.amp * std::sin(arg);
    }
    msg.m[t] = v;
    msg.m_hilbert[t] = vh;
  }
  // unit RMS
  double p = 0.0;
  for (double v : msg.m) p += v * v;
  double g = 1.0 / std::sqrt(std::max(p / n, 1e-30));
  for (int t = 0; t < n; ++t) {
    msg.m[t] *= g;
    msg.m_hilbert[t] *= g;
  }
  return msg;
}

inline std::vector<cplx> shape_linear(ModulationKind kind, Rng& rng) {
  const auto& points = constellation(kind);
  int first_sym = -kPulseSpanSymbols;
  int last_sym = kFrameLen / kSamplesPerSymbol + kPulseSpanSymbols;
  std::vector<cplx> syms;
  for (int k = first_sym; k < last_sym; ++k) {
    syms.push_back(points[rng.below(points.size())]);
  }
  std::vector<cplx> out(kFrameLen, cplx(0.0, 0.0));
  for (int n = 0; n < kFrameLen; ++n) {
    for (int k = first_sym; k < last_sym; ++k) {
      double t = n - k * kSamplesPerSymbol;
      if (std::abs(t) <= kPulseSpanSymbols * kSamplesPerSymbol) {
        out[n] += syms[k - first_sym] * raised_cosine(t);
      }
    }
  }
  return out;
}

inline std::vector<cplx> synth_cpfsk(Rng& rng) {
  const double h = 0.5;  // modulation index
  double phase = rng.uniform(0.0, 2 * M_PI);
  std::vector<cplx> out(kFrameLen);
  int sym = 0;
  double a = 0.0;
  for (int n = 0; n < kFrameLen; ++n) {
    if (n % kSamplesPerSymbol == 0) {
      a = rng.below(2) ? 1.0 : -1.0;
      ++sym;
    }
    out[n] = std::polar(1.0, phase);
    phase += M_PI * h * a / kSamplesPerSymbol;
  }
  (void)sym;
  return out;
}

inline std::vector<cplx> synth_gfsk(Rng& rng) {
  const double h = 0.5;
  const double bt = 0.35;
  // Gaussian frequency-pulse taps
  const double bw = bt / kSamplesPerSymbol;
  const double sigma = std::sqrt(std::log(2.0)) / (2 * M_PI * bw);
  const int span = static_cast<int>(std::ceil(4 * sigma));
  std::vector<double> taps(2 * span + 1);
  double sum = 0.0;
  for (int i = -span; i <= span; ++i) {
    taps[i + span] = std::exp(-0.5 * (i / sigma) * (i / sigma));
    sum += taps[i + span];
  }
  for (auto& t : taps) t /= sum;

  // NRZ sequence long enough to cover the filter span
  int nsym = kFrameLen / kSamplesPerSymbol + 2 * (span / kSamplesPerSymbol + 2);
  int offset = (span / kSamplesPerSymbol + 2) * kSamplesPerSymbol;
  std::vector<double> nrz(kFrameLen + 2 * offset);
  for (int k = 0; k < nsym; ++k) {
    double a = rng.below(2) ? 1.0 : -1.0;
    for (int i = 0; i < kSamplesPerSymbol; ++i) {
      size_t idx = static_cast<size_t>(k) * kSamplesPerSymbol + i;
      if (idx < nrz.size()) nrz[idx] = a;
    }
  }
  std::vector<cplx> out(kFrameLen);
  double phase = rng.uniform(0.0, 2 * M_PI);
  for (int n = 0; n < kFrameLen; ++n) {
    double f = 0.0;
    for (int i = -span; i <= span; ++i) {
      int idx = n + offset + i;
      if (idx >= 0 && idx < static_cast<int>(nrz.size())) f += taps[i + span] * nrz[idx];
    }
    out[n] = std::polar(1.0, phase);
    phase += M_PI * h * f / kSamplesPerSymbol;
  }
  return out;
}

inline std::vector<cplx> synth_wbfm(Rng& rng) {
  const double fdev = 0.1;  // peak deviation, cycles/sample
  auto msg = make_message(rng, kFrameLen);
  std::vector<cplx> out(kFrameLen);
  double phase = rng.uniform(0.0, 2 * M_PI);
  for (int n = 0; n < kFrameLen; ++n) {
    out[n] = std::polar(1.0, phase);
    phase += 2 * M_PI * fdev * msg.m[n];
  }
  return out;
}

inline std::vector<cplx> synth_amdsb(Rng& rng) {
  const double mu = 0.5;
  const double fc = 0.05;
  auto msg = make_message(rng, kFrameLen);
  std::vector<cplx> out(kFrameLen);
  double phase0 = rng.uniform(0.0, 2 * M_PI);
  for (int n = 0; n < kFrameLen; ++n) {
    out[n] = (1.0 + mu * msg.m[n]) * std::polar(1.0, 2 * M_PI * fc * n + phase0);
  }
  return out;
}

inline std::vector<cplx> synth_amssb(Rng& rng) {
  const double fc = 0.05;
  auto msg = make_message(rng, kFrameLen);
  std::vector<cplx> out(kFrameLen);
  double phase0 = rng.uniform(0.0, 2 * M_PI);
  for (int n = 0; n < kFrameLen; ++n) {
    cplx analytic(msg.m[n], msg.m_hilbert[n]);  // upper sideband
    out[n] = analytic * std::polar(1.0, 2 * M_PI * fc * n + phase0);
  }
  return out;
}

inline void normalize_power(std::vector<cplx>& s) {
  double p = 0.0;
  for (const auto& v : s) p += std::norm(v);
  p /= s.size();
  double g = 1.0 / std::sqrt(p);
  for (auto& v : s) v *= g;
}

}  // namespace detail

// Complex AWGN realizing the target SNR against the frame's measured
// signal power. snr_db = +inf leaves the frame untouched.
inline IQFrame apply_awgn(const IQFrame& frame, double snr_db, Rng& rng) {
  IQFrame out = frame;
  out.snr_db = snr_db;
  if (std::isinf(snr_db) && snr_db > 0) return out;
  double noise_var = frame.power() / std::pow(10.0, snr_db / 10.0);
  double s = std::sqrt(noise_var / 2.0);
  for (auto& v : out.samples) {
    v += cplx(s * rng.normal(), s * rng.normal());
  }
  return out;
}

// Unit-power clean frame of the given modulation plus AWGN at snr_db.
inline IQFrame synth_frame(ModulationKind kind, double snr_db, Rng& rng) {
  std::vector<cplx> s;
  switch (kind) {
    case ModulationKind::QPSK:
    case ModulationKind::PSK8:
    case ModulationKind::QAM16:
    case ModulationKind::QAM64:
    case ModulationKind::PAM4:
      s = detail::shape_linear(kind, rng);
      break;
    case ModulationKind::CPFSK: s = detail::synth_cpfsk(rng); break;
    case ModulationKind::GFSK: s = detail::synth_gfsk(rng); break;
    case ModulationKind::WBFM: s = detail::synth_wbfm(rng); break;
    case ModulationKind::AMDSB: s = detail::synth_amdsb(rng); break;
    case ModulationKind::AMSSB: s = detail::synth_amssb(rng); break;
  }
  detail::normalize_power(s);
  IQFrame clean{std::move(s), std::numeric_limits<double>::infinity(), kind};
  return apply_awgn(clean, snr_db, rng);
}

// Idle frame: pure noise at the floor a unit-power signal at snr_db would see.
inline IQFrame synth_idle(double snr_db, Rng& rng) {
  double noise_var = std::pow(10.0, -snr_db / 10.0);
  double s = std::sqrt(noise_var / 2.0);
  IQFrame out;
  out.samples.resize(kFrameLen);
  out.snr_db = snr_db;
  out.modkind = std::nullopt;
  for (auto& v : out.samples) v = cplx(s * rng.normal(), s * rng.normal());
  return out;
}

// Two linear mixtures of two frames: obs[i] = M[i][0]*a + M[i][1]*b.
inline std::pair<IQFrame, IQFrame> superimpose(const IQFrame& a, const IQFrame& b,
                                               const std::array<std::array<double, 2>, 2>& mixing) {
  double det = mixing[0][0] * mixing[1][1] - mixing[0][1] * mixing[1][0];
  if (std::abs(det) <= 1e-6) throw std::invalid_argument("singular mixing matrix");
  IQFrame o1 = a, o2 = a;
  o1.modkind = std::nullopt;
  o2.modkind = std::nullopt;
  for (int n = 0; n < kFrameLen; ++n) {
    o1.samples[n] = mixing[0][0] * a.samples[n] + mixing[0][1] * b.samples[n];
    o2.samples[n] = mixing[1][0] * a.samples[n] + mixing[1][1] * b.samples[n];
  }
  return {o1, o2};
}

struct DatasetSpec {
  std::vector<double> snr_grid_db;
  int per_mod_count = 0;
  std::vector<ModulationKind> modulations;
  bool include_idle = false;
  uint64_t seed = 0;
};

struct LabeledFrame {
  IQFrame frame;
  SignalClass cls;
};

using Dataset = std::vector<LabeledFrame>;

// per_mod_count frames for every (modulation, SNR) pair, deterministic
// given spec.seed. Idle rows, when requested, count as one extra kind.
inline Dataset make_dataset(const DatasetSpec& spec) {
  if (spec.snr_grid_db.empty()) throw std::invalid_argument("empty SNR grid");
  if (spec.per_mod_count <= 0) throw std::invalid_argument("per_mod_count must be positive");
  Dataset out;
  uint64_t row = 0;
  auto synth_row = [&](std::optional<ModulationKind> kind, double snr) {
    for (int i = 0; i < spec.per_mod_count; ++i) {
      Rng rng(substream(spec.seed, "sigsynth.frame", row * 1000003ULL + i));
      IQFrame f = kind ? synth_frame(*kind, snr, rng) : synth_idle(snr, rng);
      out.push_back({std::move(f), class_of(kind)});
    }
    ++row;
  };
  for (auto kind : spec.modulations) {
    for (double snr : spec.snr_grid_db) synth_row(kind, snr);
  }
  if (spec.include_idle) {
    for (double snr : spec.snr_grid_db) synth_row(std::nullopt, snr);
  }
  return out;
}

// CSV dump: frame_id, modkind, snr_db, 128 I values, 128 Q values, class.
inline void dump_dataset_csv(const Dataset& ds, std::ostream& os) {
  os << "frame_id,modkind,snr_db";
  for (int i = 0; i < kFrameLen; ++i) os << ",i" << i;
  for (int i = 0; i < kFrameLen; ++i) os << ",q" << i;
  os << ",class\n";
  uint64_t id = 0;
  for (const auto& lf : ds) {
    os << id++ << ',' << (lf.frame.modkind ? to_string(*lf.frame.modkind) : "idle") << ','
       << lf.frame.snr_db;
    for (const auto& s : lf.frame.samples) os << ',' << s.real();
    for (const auto& s : lf.frame.samples) os << ',' << s.imag();
    os << ',' << to_string(lf.cls) << '\n';
  }
}

}  // namespace rfdsa::sig
