#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfdsa/iq.hpp"
#include "rfdsa/nnet.hpp"
#include "rfdsa/rng.hpp"
#include "rfdsa/sigsynth.hpp"
#include "rfdsa/traffic.hpp"

namespace rfdsa::dsa {

// ---- topology ----

struct Node {
  double x = 0.0, y = 0.0;
};

inline double dist(const Node& a, const Node& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

struct TopologyConfig {
  int in_count = 100;
  int out_count = 2;
  int jam_count = 2;
  double region = 50.0;  // square side, meters
  double range = 10.0;   // transmission/interference range, meters
};

// Every in-network node is a potential transmitter with one designated
// receiver (another in-network node within range).
struct Topology {
  TopologyConfig config;
  std::vector<Node> in_nodes;
  std::vector<Node> out_nodes;
  std::vector<Node> jam_nodes;
  std::vector<int> link_rx;  // link i: tx = in_nodes[i], rx = in_nodes[link_rx[i]]
};

inline Topology generate_topology(const TopologyConfig& cfg, uint64_t seed) {
  if (cfg.in_count < 2 || cfg.region <= 0 || cfg.range <= 0)
    throw std::invalid_argument("generate_topology: invalid config");
  Rng rng(substream(seed, "topology"));
  Topology t;
  t.config = cfg;
  auto place = [&] { return Node{rng.uniform(0.0, cfg.region), rng.uniform(0.0, cfg.region)}; };
  for (int i = 0; i < cfg.in_count; ++i) t.in_nodes.push_back(place());
  for (int i = 0; i < cfg.out_count; ++i) t.out_nodes.push_back(place());
  for (int i = 0; i < cfg.jam_count; ++i) t.jam_nodes.push_back(place());
  t.link_rx.resize(cfg.in_count);
  for (int i = 0; i < cfg.in_count; ++i) {
    int attempts = 0;
    for (;;) {
      if (++attempts > 10000)
        throw std::runtime_error("generate_topology: infeasible placement, no receiver in range");
      int j = static_cast<int>(rng.below(cfg.in_count));
      if (j == i) continue;
      if (dist(t.in_nodes[i], t.in_nodes[j]) <= cfg.range) {
        t.link_rx[i] = j;
        break;
      }
    }
  }
  return t;
}

inline void dump_topology_csv(const Topology& t, std::ostream& os) {
  os << "node,role,x,y\n";
  for (size_t i = 0; i < t.in_nodes.size(); ++i)
    os << i << ",in," << t.in_nodes[i].x << ',' << t.in_nodes[i].y << '\n';
  for (size_t i = 0; i < t.out_nodes.size(); ++i)
    os << i << ",out," << t.out_nodes[i].x << ',' << t.out_nodes[i].y << '\n';
  for (size_t i = 0; i < t.jam_nodes.size(); ++i)
    os << i << ",jam," << t.jam_nodes[i].x << ',' << t.jam_nodes[i].y << '\n';
}

// ---- interference graph and coloring ----

// Links conflict when activating both simultaneously puts some endpoint of
// one within range of the other's receiver.
inline bool links_conflict(const Topology& t, int a, int b) {
  const double R = t.config.range;
  const Node& a_tx = t.in_nodes[a];
  const Node& a_rx = t.in_nodes[t.link_rx[a]];
  const Node& b_tx = t.in_nodes[b];
  const Node& b_rx = t.in_nodes[t.link_rx[b]];
  return dist(a_tx, b_rx) <= R || dist(a_rx, b_rx) <= R || dist(b_tx, a_rx) <= R ||
         dist(b_rx, a_rx) <= R;
}

// Adjacency lists over the given link subset (indices into `links`).
inline std::vector<std::vector<int>> build_interference_graph(const Topology& t,
                                                              const std::vector<int>& links) {
  const int n = static_cast<int>(links.size());
  std::vector<std::vector<int>> adj(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (links_conflict(t, links[i], links[j])) {
        adj[i].push_back(j);
        adj[j].push_back(i);
      }
  return adj;
}

inline int max_degree(const std::vector<std::vector<int>>& adj) {
  int d = 0;
  for (const auto& a : adj) d = std::max(d, static_cast<int>(a.size()));
  return d;
}

// Greedy coloring in descending-degree order; uses at most max_degree + 1
// colors.
inline std::vector<int> greedy_coloring(const std::vector<std::vector<int>>& adj) {
  const int n = static_cast<int>(adj.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return adj[a].size() > adj[b].size(); });
  std::vector<int> color(n, -1);
  for (int v : order) {
    std::vector<bool> used(n, false);
    for (int u : adj[v])
      if (color[u] >= 0) used[color[u]] = true;
    int c = 0;
    while (used[c]) ++c;
    color[v] = c;
  }
  return color;
}

// ---- channel model ----

struct SinrConfig {
  double power = 1.0;        // transmit power
  double alpha = 2.0;        // path-loss exponent
  double min_distance = 1.0; // distance clamp, meters
  double noise = 1e-3;       // noise power (10 dB SNR at 10 m with defaults)
  double beta_db = 3.0;      // SINR threshold
  double beta_jam_db = 0.0;  // threshold after adapting modulation to jamming
};

inline double received_power(const SinrConfig& s, double d) {
  return s.power * std::pow(std::max(d, s.min_distance), -s.alpha);
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

// ---- sensing and classification ----

struct Emitter {
  Node pos;
  SignalClass cls = SignalClass::Idle;
  double snr_hint_db = 18.0;  // synthesis SNR for model-based sensing
};

struct SenseTruth {
  SignalClass cls = SignalClass::Idle;
  SignalClass second_cls = SignalClass::Idle;
  double snr_db = -10.0;
  bool superposed = false;  // second emitter within 3 dB of the strongest
};

// Dominant class at a node = class of the strongest received emitter within
// range; Idle if none. Sensing SNR = strongest over noise plus the rest.
// An out-network emitter anywhere in range takes precedence over a stronger
// foreground signal: its presence is what the protocol must react to, and a
// perfect classifier resolves superimposed components.
inline SenseTruth sense_truth(const Node& at, const std::vector<Emitter>& emitters,
                              const SinrConfig& sinr, double range) {
  SenseTruth t;
  double strongest = 0.0, second = 0.0, total = 0.0;
  bool outnet_in_range = false;
  for (const auto& e : emitters) {
    double d = dist(at, e.pos);
    if (d > range) continue;
    double p = received_power(sinr, d);
    total += p;
    if (e.cls == SignalClass::OutNetwork) outnet_in_range = true;
    if (p > strongest) {
      second = strongest;
      t.second_cls = t.cls;
      strongest = p;
      t.cls = e.cls;
    } else if (p > second) {
      second = p;
      t.second_cls = e.cls;
    }
  }
  if (strongest <= 0.0) return t;
  t.snr_db = 10.0 * std::log10(strongest / (sinr.noise + (total - strongest)));
  t.superposed = second > 0.0 && strongest / second < db_to_linear(3.0);
  if (outnet_in_range && t.cls != SignalClass::OutNetwork) {
    t.second_cls = t.cls;
    t.cls = SignalClass::OutNetwork;
  }
  return t;
}

struct ChannelStatus {
  SignalClass cls = SignalClass::Idle;
  double score = 1.0;  // confidence in [0, 1]
};

enum class ClassifierKind { Ideal, Random, TableAll, TablePerSnr, Model };

inline const char* to_string(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::Ideal: return "ideal";
    case ClassifierKind::Random: return "random";
    case ClassifierKind::TableAll: return "table-all";
    case ClassifierKind::TablePerSnr: return "table-per-snr";
    case ClassifierKind::Model: return "model";
  }
  return "?";
}

inline ClassifierKind classifier_from_string(const std::string& s) {
  if (s == "ideal") return ClassifierKind::Ideal;
  if (s == "random") return ClassifierKind::Random;
  if (s == "table-all") return ClassifierKind::TableAll;
  if (s == "table-per-snr") return ClassifierKind::TablePerSnr;
  if (s == "model") return ClassifierKind::Model;
  throw std::invalid_argument("unknown classifier kind: " + s);
}

// Reference per-SNR accuracies of the trained modulation classifier.
inline constexpr std::array<std::pair<double, double>, 10> kSnrAccuracy = {{
    {0.0, 0.906},
    {2.0, 0.930},
    {4.0, 0.928},
    {6.0, 0.933},
    {8.0, 0.934},
    {10.0, 0.942},
    {12.0, 0.950},
    {14.0, 0.951},
    {16.0, 0.933},
    {18.0, 0.934},
}};

inline constexpr double kAccuracyAllSnr = 0.934;

// Nearest row of the per-SNR table (grid 0..18 dB in 2 dB steps).
inline double table_accuracy(double snr_db) {
  double best = kSnrAccuracy[0].second, bd = 1e300;
  for (const auto& [snr, acc] : kSnrAccuracy) {
    double d = std::abs(snr - snr_db);
    if (d < bd) {
      bd = d;
      best = acc;
    }
  }
  return best;
}

struct Classifier {
  ClassifierKind kind = ClassifierKind::Ideal;
  const nn::Model* model = nullptr;        // required for Model
  double jammer_acc_outliers = 0.88;       // unknown-jammer accuracy via the outlier path
  double superposed_acc = 0.837;           // accuracy on superimposed frames
};

namespace detail {

inline ModulationKind pick_modulation(SignalClass c, Rng& rng) {
  static const std::vector<ModulationKind> in = {ModulationKind::QPSK, ModulationKind::PSK8,
                                                 ModulationKind::CPFSK};
  static const std::vector<ModulationKind> jam = {ModulationKind::QAM16, ModulationKind::QAM64,
                                                  ModulationKind::PAM4, ModulationKind::WBFM};
  static const std::vector<ModulationKind> out = {ModulationKind::AMSSB, ModulationKind::AMDSB,
                                                  ModulationKind::GFSK};
  const std::vector<ModulationKind>* pool = nullptr;
  switch (c) {
    case SignalClass::InNetwork: pool = &in; break;
    case SignalClass::Jammer: pool = &jam; break;
    case SignalClass::OutNetwork: pool = &out; break;
    default: throw std::logic_error("pick_modulation: Idle has no modulation");
  }
  return (*pool)[rng.below(pool->size())];
}

inline SignalClass random_wrong(SignalClass truth, Rng& rng) {
  int t = static_cast<int>(truth);
  int r = static_cast<int>(rng.below(3));
  if (r >= t) ++r;
  return static_cast<SignalClass>(r);
}

}  // namespace detail

// Maps the ground truth at a node to the classifier's reported status.
// Table-driven kinds flip to a wrong class with the tabulated error rate;
// the model kind synthesizes a frame at the sensed SNR and runs the net.
inline ChannelStatus classify_channel(const Classifier& cl, const SenseTruth& truth, Rng& rng,
                                      bool outliers = false, bool superposition = false,
                                      nn::Workspace* ws = nullptr) {
  switch (cl.kind) {
    case ClassifierKind::Ideal:
      return {truth.cls, 1.0};
    case ClassifierKind::Random:
      return {static_cast<SignalClass>(rng.below(4)), 0.25};
    case ClassifierKind::TableAll:
    case ClassifierKind::TablePerSnr: {
      double acc = cl.kind == ClassifierKind::TableAll ? kAccuracyAllSnr
                                                       : table_accuracy(truth.snr_db);
      if (outliers && truth.cls == SignalClass::Jammer) acc = cl.jammer_acc_outliers;
      if (superposition && truth.superposed) acc = cl.superposed_acc;
      if (rng.uniform() < acc) return {truth.cls, acc};
      return {detail::random_wrong(truth.cls, rng), acc};
    }
    case ClassifierKind::Model: {
      if (cl.model == nullptr || ws == nullptr)
        throw std::invalid_argument("classify_channel: model classifier needs a model");
      double snr = std::clamp(truth.snr_db, -10.0, 20.0);
      IQFrame frame;
      if (truth.cls == SignalClass::Idle) {
        frame = sig::synth_idle(snr, rng);
      } else {
        frame = sig::synth_frame(detail::pick_modulation(truth.cls, rng), snr, rng);
        if (superposition && truth.superposed && truth.second_cls != SignalClass::Idle) {
          auto other = sig::synth_frame(detail::pick_modulation(truth.second_cls, rng), snr, rng);
          auto [mixed, unused] = sig::superimpose(frame, other, {{{1.0, 0.8}, {0.8, 1.0}}});
          (void)unused;
          frame = mixed;
        }
      }
      auto [cls, scores] = nn::classify(*cl.model, frame, *ws);
      return {cls, scores.p[static_cast<int>(cls)]};
    }
  }
  return {SignalClass::Idle, 1.0};
}

inline ChannelStatus sense_channel(const Node& at, const std::vector<Emitter>& emitters,
                                   const Classifier& cl, const SinrConfig& sinr, double range,
                                   Rng& rng, bool outliers = false, bool superposition = false,
                                   nn::Workspace* ws = nullptr) {
  return classify_channel(cl, sense_truth(at, emitters, sinr, range), rng, outliers,
                          superposition, ws);
}

// ---- distributed scheduling (request / response / resolve) ----

struct Request {
  int sender = -1;
  int type = 0;  // Idle=0 < InNetwork=1 < Jammer=2
  std::vector<double> priorities;
};

// No request when the channel is classified out-network; otherwise the
// priorities are the score times per-slot uniform(0,1] draws.
inline std::optional<Request> make_request(const ChannelStatus& status, int node, int frame,
                                           int T, uint64_t seed) {
  if (status.cls == SignalClass::OutNetwork) return std::nullopt;
  Request r;
  r.sender = node;
  r.type = static_cast<int>(status.cls == SignalClass::Jammer ? SignalClass::Jammer : status.cls);
  Rng rng(substream(seed, "priority",
                    static_cast<uint64_t>(node) * 1000003u + static_cast<uint64_t>(frame)));
  r.priorities.resize(T);
  for (int t = 0; t < T; ++t) r.priorities[t] = status.score * rng.uniform_open0();
  return r;
}

struct Response {
  int transmitter = -1;
  std::vector<char> approved;  // length T
};

// The receiver approves its own transmitter per slot: a strictly smaller
// type code beats everything, equal types compare per-slot priorities
// (priority ties go to the smaller node id), a larger type loses outright.
inline Response make_response(const Request& own, const std::vector<Request>& heard, int T) {
  Response r;
  r.transmitter = own.sender;
  r.approved.assign(T, 1);
  for (const auto& h : heard) {
    if (h.sender == own.sender) continue;
    if (h.type > own.type) continue;
    if (h.type < own.type) {
      r.approved.assign(T, 0);
      return r;
    }
    for (int t = 0; t < T; ++t) {
      bool win = own.priorities[t] > h.priorities[t] ||
                 (own.priorities[t] == h.priorities[t] && own.sender < h.sender);
      if (!win) r.approved[t] = 0;
    }
  }
  return r;
}

// Transmit in slot t iff the own response approves t and no heard response
// names a different transmitter for t.
inline bool resolve_transmission(int self, const Response& own, const std::vector<Response>& heard,
                                 int t) {
  if (t < 0 || t >= static_cast<int>(own.approved.size()))
    throw std::invalid_argument("resolve_transmission: slot out of range");
  if (!own.approved[t]) return false;
  for (const auto& h : heard)
    if (h.transmitter != self && t < static_cast<int>(h.approved.size()) && h.approved[t])
      return false;
  return true;
}

// ---- slot evaluation ----

struct SlotTransmission {
  int link = -1;
  bool adapted = false;  // modulation adapted to a sensed jammer
};

struct SlotOutcome {
  double packets = 0.0;
  int outnet_attempts = 0;
  int outnet_successes = 0;
};

// Interference is cut off at the range R: emitters farther than R from a
// receiver contribute nothing. Out-network reception is evaluated at a
// virtual receiver co-located with the out-network user at the reference
// link distance R, with in-network transmitters as the interferers; any
// in-range one pushes the SINR below threshold, so the metric is exactly
// the protection guarantee.
inline SlotOutcome evaluate_slot(const Topology& topo, const SinrConfig& sinr,
                                 const std::vector<SlotTransmission>& txs,
                                 const std::vector<int>& active_jammers,
                                 const std::vector<int>& active_outnet,
                                 bool rate_discount = false) {
  const double R = topo.config.range;
  SlotOutcome out;
  for (const auto& tx : txs) {
    const Node& tn = topo.in_nodes[tx.link];
    const Node& rn = topo.in_nodes[topo.link_rx[tx.link]];
    double signal = received_power(sinr, dist(tn, rn));
    double interference = 0.0;
    for (const auto& other : txs) {
      if (other.link == tx.link) continue;
      double d = dist(topo.in_nodes[other.link], rn);
      if (d <= R) interference += received_power(sinr, d);
    }
    for (int j : active_jammers) {
      double d = dist(topo.jam_nodes[j], rn);
      if (d <= R) interference += received_power(sinr, d);
    }
    for (int o : active_outnet) {
      double d = dist(topo.out_nodes[o], rn);
      if (d <= R) interference += received_power(sinr, d);
    }
    double threshold = db_to_linear(tx.adapted ? sinr.beta_jam_db : sinr.beta_db);
    if (signal / (sinr.noise + interference) >= threshold)
      out.packets += (rate_discount && tx.adapted) ? 0.5 : 1.0;
  }
  for (int o : active_outnet) {
    ++out.outnet_attempts;
    double signal = received_power(sinr, R);
    double interference = 0.0;
    for (const auto& tx : txs) {
      double d = dist(topo.in_nodes[tx.link], topo.out_nodes[o]);
      if (d <= R) interference += received_power(sinr, d);
    }
    if (signal / (sinr.noise + interference) >= db_to_linear(sinr.beta_db)) ++out.outnet_successes;
  }
  return out;
}

// ---- simulation ----

struct SuperframeConfig {
  int slots = 10;        // T data slots per superframe
  int superframes = 1000;
  int active_links = 10;
};

struct SimOptions {
  bool jamming = true;
  bool traffic_fusion = false;
  double fusion_weight = 0.2;
  bool outliers = false;
  bool superposition = false;
  bool markov_activity = false;  // two-state chain for jammer/out-network activity
  double markov_stay = 0.8;      // p00 = p11 when markov_activity
  double activity_prob = 0.5;    // i.i.d. active probability otherwise
  bool rate_discount = false;    // jammer-adapted slots credit 0.5 packet
  bool full_hearing = false;     // every node hears every control message
};

struct Metrics {
  double throughput_packets = 0.0;
  long outnet_attempts = 0;
  long outnet_successes = 0;
  int slots_used = 0;  // T for distributed, 100 for benchmark 1, colors for benchmark 2
  std::vector<double> per_superframe_packets;

  double outnet_success_pct() const {
    if (outnet_attempts == 0) return 100.0;
    return 100.0 * static_cast<double>(outnet_successes) / outnet_attempts;
  }

  // throughput normalized by the slots each scheme actually spends
  double packets_per_slot() const {
    auto frames = static_cast<double>(per_superframe_packets.size());
    return frames > 0 && slots_used > 0 ? throughput_packets / (slots_used * frames) : 0.0;
  }
};

namespace detail {

// Per-superframe jammer and out-network activity, deterministic per seed
// and independent of the classifier under test.
struct ActivityModel {
  std::vector<Rng> jam_rng, out_rng;
  std::vector<int> jam_state, out_state;
  const SimOptions* opt;

  ActivityModel(const Topology& t, const SimOptions& o, uint64_t seed) : opt(&o) {
    for (size_t i = 0; i < t.jam_nodes.size(); ++i) {
      jam_rng.emplace_back(substream(seed, "activity.jam", i));
      jam_state.push_back(0);
    }
    for (size_t i = 0; i < t.out_nodes.size(); ++i) {
      out_rng.emplace_back(substream(seed, "activity.out", i));
      out_state.push_back(0);
    }
  }

  static int step(Rng& rng, int state, const SimOptions& o) {
    if (o.markov_activity) {
      return rng.uniform() < o.markov_stay ? state : 1 - state;
    }
    return rng.uniform() < o.activity_prob ? 1 : 0;
  }

  // Advances one superframe; returns the active jammer and out-network
  // indices. Jamming off freezes all jammers idle but still consumes the
  // same draws, keeping the rest of the run comparable.
  std::pair<std::vector<int>, std::vector<int>> advance() {
    std::vector<int> jams, outs;
    for (size_t i = 0; i < jam_rng.size(); ++i) {
      jam_state[i] = step(jam_rng[i], jam_state[i], *opt);
      if (opt->jamming && jam_state[i]) jams.push_back(static_cast<int>(i));
    }
    for (size_t i = 0; i < out_rng.size(); ++i) {
      out_state[i] = step(out_rng[i], out_state[i], *opt);
      if (out_state[i]) outs.push_back(static_cast<int>(i));
    }
    return {jams, outs};
  }
};

inline std::vector<int> sample_active_links(const Topology& t, int count, uint64_t seed,
                                            int frame) {
  const int n = static_cast<int>(t.in_nodes.size());
  count = std::min(count, n);
  Rng rng(substream(seed, "active", frame));
  std::vector<int> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  for (int i = 0; i < count; ++i) {
    int j = i + static_cast<int>(rng.below(n - i));
    std::swap(ids[i], ids[j]);
  }
  ids.resize(count);
  return ids;
}

inline std::vector<Emitter> sensing_emitters(const Topology& t, const std::vector<int>& jams,
                                             const std::vector<int>& outs,
                                             const std::vector<int>& prev_transmitters) {
  std::vector<Emitter> e;
  for (int j : jams) e.push_back({t.jam_nodes[j], SignalClass::Jammer});
  for (int o : outs) e.push_back({t.out_nodes[o], SignalClass::OutNetwork});
  for (int p : prev_transmitters) e.push_back({t.in_nodes[p], SignalClass::InNetwork});
  return e;
}

}  // namespace detail

// One run of the distributed protocol: per superframe the active links
// sense, request, respond, resolve, and transmit; jammer-classified
// channels are used with adapted modulation; out-network-classified
// channels are left alone at both the transmitter and receiver ends.
inline Metrics run_simulation(const Topology& topo, const SuperframeConfig& sfc,
                              const Classifier& cl, const SinrConfig& sinr,
                              const SimOptions& opt, uint64_t seed) {
  if (sfc.slots < 1 || sfc.superframes < 0 || sfc.active_links < 0)
    throw std::invalid_argument("run_simulation: invalid superframe config");
  const int T = sfc.slots;
  const double R = topo.config.range;
  Metrics m;
  m.slots_used = T;
  detail::ActivityModel activity(topo, opt, seed);
  std::vector<int> prev_transmitters;
  std::vector<traffic::MarkovProfile> profiles(topo.in_nodes.size());
  std::unique_ptr<nn::Workspace> ws;
  if (cl.kind == ClassifierKind::Model && cl.model != nullptr)
    ws = std::make_unique<nn::Workspace>(*cl.model);

  for (int f = 0; f < sfc.superframes; ++f) {
    auto [jams, outs] = activity.advance();
    auto links = detail::sample_active_links(topo, sfc.active_links, seed, f);
    auto emitters = detail::sensing_emitters(topo, jams, outs, prev_transmitters);

    auto fused_status = [&](int node) {
      Rng rng(substream(seed, "sense",
                        static_cast<uint64_t>(node) * 1000003u + static_cast<uint64_t>(f)));
      ChannelStatus st = sense_channel(topo.in_nodes[node], emitters, cl, sinr, R, rng,
                                       opt.outliers, opt.superposition, ws.get());
      if (opt.traffic_fusion) {
        auto& prof = profiles[node];
        int s_deep = traffic::state_of(st.cls);
        double c_deep = std::clamp(st.score, 0.5, 1.0);
        if (prof.last_state >= 0) {
          auto pred = traffic::predict(prof, prof.last_state);
          auto fused = traffic::fuse({pred.state, std::clamp(pred.confidence, 0.5, 1.0), s_deep,
                                      c_deep, opt.fusion_weight});
          if (fused.state == 1 && st.cls != SignalClass::OutNetwork)
            st = {SignalClass::OutNetwork, fused.confidence};
          else if (fused.state == 0 && st.cls == SignalClass::OutNetwork)
            st = {SignalClass::Idle, fused.confidence};
        }
        prof.observe(s_deep);
      }
      return st;
    };

    // request phase (transmitter gate), with the receiver gate folded in
    struct LinkState {
      int link;
      std::optional<Request> request;
      bool rx_gated = false;
      bool adapted = false;
    };
    std::vector<LinkState> states;
    for (int link : links) {
      LinkState ls;
      ls.link = link;
      ChannelStatus tx_st = fused_status(link);
      ChannelStatus rx_st = fused_status(topo.link_rx[link]);
      ls.request = make_request(tx_st, link, f, T, seed);
      ls.rx_gated = rx_st.cls == SignalClass::OutNetwork;
      ls.adapted = tx_st.cls == SignalClass::Jammer;
      states.push_back(std::move(ls));
    }

    // response phase: each non-gated receiver hears in-range requests
    std::vector<std::optional<Response>> responses(states.size());
    for (size_t i = 0; i < states.size(); ++i) {
      if (!states[i].request || states[i].rx_gated) continue;
      const Node& rx = topo.in_nodes[topo.link_rx[states[i].link]];
      std::vector<Request> heard;
      for (size_t j = 0; j < states.size(); ++j) {
        if (j == i || !states[j].request) continue;
        if (opt.full_hearing || dist(topo.in_nodes[states[j].link], rx) <= R)
          heard.push_back(*states[j].request);
      }
      responses[i] = make_response(*states[i].request, heard, T);
    }

    // resolve and transmit
    double frame_packets = 0.0;
    std::vector<int> transmitters_this_frame;
    for (int t = 0; t < T; ++t) {
      std::vector<SlotTransmission> txs;
      for (size_t i = 0; i < states.size(); ++i) {
        if (!responses[i]) continue;
        const Node& tx = topo.in_nodes[states[i].link];
        std::vector<Response> heard;
        for (size_t j = 0; j < states.size(); ++j) {
          if (j == i || !responses[j]) continue;
          const Node& other_rx = topo.in_nodes[topo.link_rx[states[j].link]];
          if (opt.full_hearing || dist(other_rx, tx) <= R) heard.push_back(*responses[j]);
        }
        if (resolve_transmission(states[i].link, *responses[i], heard, t))
          txs.push_back({states[i].link, states[i].adapted});
      }
      for (const auto& tx : txs)
        if (std::find(transmitters_this_frame.begin(), transmitters_this_frame.end(), tx.link) ==
            transmitters_this_frame.end())
          transmitters_this_frame.push_back(tx.link);
      auto outcome = evaluate_slot(topo, sinr, txs, jams, outs, opt.rate_discount);
      frame_packets += outcome.packets;
      m.outnet_attempts += outcome.outnet_attempts;
      m.outnet_successes += outcome.outnet_successes;
    }
    m.throughput_packets += frame_packets;
    m.per_superframe_packets.push_back(frame_packets);
    prev_transmitters = std::move(transmitters_this_frame);
  }
  return m;
}

// Centralized TDMA baseline 1: one slot per in-network user; active links
// transmit in their own slot regardless of channel state.
inline Metrics benchmark_scheme_1(const Topology& topo, const SuperframeConfig& sfc,
                                  const SinrConfig& sinr, const SimOptions& opt, uint64_t seed) {
  Metrics m;
  m.slots_used = static_cast<int>(topo.in_nodes.size());
  detail::ActivityModel activity(topo, opt, seed);
  for (int f = 0; f < sfc.superframes; ++f) {
    auto [jams, outs] = activity.advance();
    auto links = detail::sample_active_links(topo, sfc.active_links, seed, f);
    double frame_packets = 0.0;
    for (int slot = 0; slot < m.slots_used; ++slot) {
      std::vector<SlotTransmission> txs;
      if (std::find(links.begin(), links.end(), slot) != links.end()) txs.push_back({slot, false});
      auto outcome = evaluate_slot(topo, sinr, txs, jams, outs, false);
      frame_packets += outcome.packets;
      m.outnet_attempts += outcome.outnet_attempts;
      m.outnet_successes += outcome.outnet_successes;
    }
    m.throughput_packets += frame_packets;
    m.per_superframe_packets.push_back(frame_packets);
  }
  return m;
}

// Centralized TDMA baseline 2: greedy coloring of the active links'
// interference graph; each link transmits once per superframe in its
// color's slot, using at most D+1 slots.
inline Metrics benchmark_scheme_2(const Topology& topo, const SuperframeConfig& sfc,
                                  const SinrConfig& sinr, const SimOptions& opt, uint64_t seed) {
  Metrics m;
  detail::ActivityModel activity(topo, opt, seed);
  for (int f = 0; f < sfc.superframes; ++f) {
    auto [jams, outs] = activity.advance();
    auto links = detail::sample_active_links(topo, sfc.active_links, seed, f);
    auto adj = build_interference_graph(topo, links);
    auto colors = greedy_coloring(adj);
    int used = colors.empty() ? 0 : 1 + *std::max_element(colors.begin(), colors.end());
    m.slots_used = std::max(m.slots_used, used);
    double frame_packets = 0.0;
    for (int slot = 0; slot < used; ++slot) {
      std::vector<SlotTransmission> txs;
      for (size_t i = 0; i < links.size(); ++i)
        if (colors[i] == slot) txs.push_back({links[i], false});
      auto outcome = evaluate_slot(topo, sinr, txs, jams, outs, false);
      frame_packets += outcome.packets;
      m.outnet_attempts += outcome.outnet_attempts;
      m.outnet_successes += outcome.outnet_successes;
    }
    m.throughput_packets += frame_packets;
    m.per_superframe_packets.push_back(frame_packets);
  }
  return m;
}

// ---- artifacts ----

inline void dump_metrics_csv_header(std::ostream& os) {
  os << "scenario,classifier,jamming,traffic_fusion,outliers,superposition,seed,"
        "throughput_packets,outnet_success_pct\n";
}

inline void dump_metrics_csv_row(std::ostream& os, const std::string& scenario,
                                 const std::string& classifier, const SimOptions& opt,
                                 uint64_t seed, const Metrics& m) {
  os << scenario << ',' << classifier << ',' << (opt.jamming ? 1 : 0) << ','
     << (opt.traffic_fusion ? 1 : 0) << ',' << (opt.outliers ? 1 : 0) << ','
     << (opt.superposition ? 1 : 0) << ',' << seed << ',' << m.throughput_packets << ','
     << m.outnet_success_pct() << '\n';
}

struct Scenario {
  TopologyConfig topology;
  SuperframeConfig superframe;
  SinrConfig sinr;
  SimOptions options;
};

// Flat key=value scenario config; unknown keys are rejected.
inline Scenario parse_scenario(std::istream& is) {
  Scenario s;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("scenario line " + std::to_string(lineno) + ": expected key=value");
    auto trim = [](std::string v) {
      auto b = v.find_first_not_of(" \t\r");
      auto e = v.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    auto as_d = [&] { return std::stod(val); };
    auto as_i = [&] { return std::stoi(val); };
    auto as_b = [&] {
      if (val == "on" || val == "true" || val == "1") return true;
      if (val == "off" || val == "false" || val == "0") return false;
      throw std::invalid_argument("scenario line " + std::to_string(lineno) + ": expected on/off");
    };
    if (key == "in_count") s.topology.in_count = as_i();
    else if (key == "out_count") s.topology.out_count = as_i();
    else if (key == "jam_count") s.topology.jam_count = as_i();
    else if (key == "region") s.topology.region = as_d();
    else if (key == "range") s.topology.range = as_d();
    else if (key == "slots") s.superframe.slots = as_i();
    else if (key == "superframes") s.superframe.superframes = as_i();
    else if (key == "active_links") s.superframe.active_links = as_i();
    else if (key == "power") s.sinr.power = as_d();
    else if (key == "alpha") s.sinr.alpha = as_d();
    else if (key == "min_distance") s.sinr.min_distance = as_d();
    else if (key == "noise") s.sinr.noise = as_d();
    else if (key == "beta_db") s.sinr.beta_db = as_d();
    else if (key == "beta_jam_db") s.sinr.beta_jam_db = as_d();
    else if (key == "jamming") s.options.jamming = as_b();
    else if (key == "traffic_fusion") s.options.traffic_fusion = as_b();
    else if (key == "fusion_weight") s.options.fusion_weight = as_d();
    else if (key == "outliers") s.options.outliers = as_b();
    else if (key == "superposition") s.options.superposition = as_b();
    else if (key == "markov_activity") s.options.markov_activity = as_b();
    else if (key == "markov_stay") s.options.markov_stay = as_d();
    else if (key == "activity_prob") s.options.activity_prob = as_d();
    else if (key == "rate_discount") s.options.rate_discount = as_b();
    else if (key == "full_hearing") s.options.full_hearing = as_b();
    else throw std::invalid_argument("scenario line " + std::to_string(lineno) + ": unknown key " + key);
  }
  return s;
}

}  // namespace rfdsa::dsa
