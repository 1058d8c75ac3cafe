#pragma once

#include <stdexcept>

#include "rfdsa/iq.hpp"

namespace rfdsa::traffic {

// Two-state Markov profile of out-network activity with Laplace-start
// transition counts.
struct MarkovProfile {
  long n00 = 1, n01 = 1, n10 = 1, n11 = 1;
  int last_state = -1;  // -1 = unset

  void update(int prev, int curr) {
    if ((prev != 0 && prev != 1) || (curr != 0 && curr != 1))
      throw std::invalid_argument("states must be 0 or 1");
    if (prev == 0) {
      (curr == 0 ? n00 : n01)++;
    } else {
      (curr == 0 ? n10 : n11)++;
    }
    last_state = curr;
  }

  // Observe the next state, updating counts from the remembered one.
  void observe(int state) {
    if (last_state >= 0) update(last_state, state);
    last_state = state;
  }

  double transition_prob(int i, int j) const {
    if ((i != 0 && i != 1) || (j != 0 && j != 1))
      throw std::invalid_argument("states must be 0 or 1");
    if (i == 0) return static_cast<double>(j == 0 ? n00 : n01) / (n00 + n01);
    return static_cast<double>(j == 0 ? n10 : n11) / (n10 + n11);
  }
};

struct Prediction {
  int state;
  double confidence;
};

// s_T = argmax_j p_{s_prev,j}; a 0.5 tie predicts persistence.
inline Prediction predict(const MarkovProfile& p, int s_prev) {
  double p_stay = p.transition_prob(s_prev, s_prev);
  double p_move = p.transition_prob(s_prev, 1 - s_prev);
  if (p_stay >= p_move) return {s_prev, p_stay};
  return {1 - s_prev, p_move};
}

struct FusionInput {
  int s_traffic;        // s_T
  double c_traffic;     // c_T in [0.5, 1]
  int s_deep;           // s_D
  double c_deep;        // c_D in [0.5, 1]
  double weight;        // w in [0, 1]
};

struct FusionResult {
  int state;
  double confidence;  // combined confidence of the chosen state
};

// Combine the traffic-profile prediction with the deep classifier's
// decision. When they disagree, the combined confidence of state 0 is
// compared against 0.5, with the boundary resolving to state 0.
inline FusionResult fuse(const FusionInput& in) {
  if (in.c_traffic < 0.5 || in.c_traffic > 1.0 || in.c_deep < 0.5 || in.c_deep > 1.0)
    throw std::invalid_argument("confidences must be in [0.5, 1]");
  if (in.weight < 0.0 || in.weight > 1.0)
    throw std::invalid_argument("weight must be in [0, 1]");
  if (in.s_traffic == in.s_deep) {
    double c = in.weight * in.c_traffic + (1.0 - in.weight) * in.c_deep;
    return {in.s_traffic, c};
  }
  double q;  // combined confidence that the state is 0
  if (in.s_traffic == 0) {
    q = in.weight * in.c_traffic + (1.0 - in.weight) * (1.0 - in.c_deep);
  } else {
    q = in.weight * (1.0 - in.c_traffic) + (1.0 - in.weight) * in.c_deep;
  }
  if (q < 0.5) return {1, 1.0 - q};
  return {0, q};
}

// Out-network maps to state 1; idle, in-network and jammer to state 0.
inline int state_of(SignalClass c) { return c == SignalClass::OutNetwork ? 1 : 0; }

}  // namespace rfdsa::traffic
