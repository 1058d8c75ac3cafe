#pragma once

#include <array>
#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rfdsa {

inline constexpr int kFrameLen = 128;

using cplx = std::complex<double>;

enum class ModulationKind {
  QPSK,
  PSK8,
  CPFSK,
  QAM16,
  QAM64,
  PAM4,
  WBFM,
  AMSSB,
  AMDSB,
  GFSK,
};

inline constexpr std::array<ModulationKind, 10> kAllModulations = {
    ModulationKind::QPSK,  ModulationKind::PSK8,  ModulationKind::CPFSK,
    ModulationKind::QAM16, ModulationKind::QAM64, ModulationKind::PAM4,
    ModulationKind::WBFM,  ModulationKind::AMSSB, ModulationKind::AMDSB,
    ModulationKind::GFSK,
};

inline std::string to_string(ModulationKind k) {
  switch (k) {
    case ModulationKind::QPSK: return "QPSK";
    case ModulationKind::PSK8: return "8PSK";
    case ModulationKind::CPFSK: return "CPFSK";
    case ModulationKind::QAM16: return "QAM16";
    case ModulationKind::QAM64: return "QAM64";
    case ModulationKind::PAM4: return "PAM4";
    case ModulationKind::WBFM: return "WBFM";
    case ModulationKind::AMSSB: return "AM-SSB";
    case ModulationKind::AMDSB: return "AM-DSB";
    case ModulationKind::GFSK: return "GFSK";
  }
  throw std::invalid_argument("bad ModulationKind");
}

inline ModulationKind modulation_from_string(const std::string& s) {
  for (auto k : kAllModulations) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown modulation: " + s);
}

// Tie-break order for classification is the enum order below.
enum class SignalClass { Idle = 0, InNetwork = 1, Jammer = 2, OutNetwork = 3 };

inline std::string to_string(SignalClass c) {
  switch (c) {
    case SignalClass::Idle: return "idle";
    case SignalClass::InNetwork: return "in-network";
    case SignalClass::Jammer: return "jammer";
    case SignalClass::OutNetwork: return "out-network";
  }
  throw std::invalid_argument("bad SignalClass");
}

// Category map over the ten modulations plus idle (nullopt).
inline SignalClass class_of(std::optional<ModulationKind> kind) {
  if (!kind) return SignalClass::Idle;
  switch (*kind) {
    case ModulationKind::QPSK:
    case ModulationKind::PSK8:
    case ModulationKind::CPFSK:
      return SignalClass::InNetwork;
    case ModulationKind::QAM16:
    case ModulationKind::QAM64:
    case ModulationKind::PAM4:
    case ModulationKind::WBFM:
      return SignalClass::Jammer;
    case ModulationKind::AMSSB:
    case ModulationKind::AMDSB:
    case ModulationKind::GFSK:
      return SignalClass::OutNetwork;
  }
  throw std::invalid_argument("bad ModulationKind");
}

// One 128-sample complex baseband frame.
struct IQFrame {
  std::vector<cplx> samples;                // length kFrameLen
  double snr_db = 0.0;
  std::optional<ModulationKind> modkind;    // nullopt = idle

  double power() const {
    double p = 0.0;
    for (const auto& s : samples) p += std::norm(s);
    return p / static_cast<double>(samples.size());
  }
};

inline IQFrame rotate_frame(const IQFrame& f, double theta) {
  IQFrame out = f;
  cplx r = std::polar(1.0, theta);
  for (auto& s : out.samples) s *= r;
  return out;
}

}  // namespace rfdsa
