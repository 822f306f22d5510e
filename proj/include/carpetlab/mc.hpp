#pragma once

// Markov chains for mu_Q = Z^-1 prod_p Q_p(U_p) dU on a plaquette complex, with
// per-plaquette weights, batch-means Wilson-loop estimators and the Ginibre
// monotonicity scan.

#include "carpetlab/actions.hpp"
#include "carpetlab/lattice.hpp"

#include <exception>
#include <iomanip>
#include <ostream>
#include <thread>

namespace carpet {

enum class Sampler { Auto, Metropolis, HeatBath };

inline std::string_view sampler_name(Sampler s) {
  switch (s) {
    case Sampler::Auto: return "auto";
    case Sampler::Metropolis: return "metropolis";
    case Sampler::HeatBath: return "heatbath";
  }
  return "?";
}

inline Sampler parse_sampler(std::string_view s) {
  if (s == "auto") return Sampler::Auto;
  if (s == "metropolis") return Sampler::Metropolis;
  if (s == "heatbath" || s == "heat-bath") return Sampler::HeatBath;
  throw std::invalid_argument("unknown sampler '" + std::string(s) + "'");
}

/// Rng for chain `chain` of a run seeded with `seed`.
inline Rng chain_rng(std::uint64_t seed, int chain = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chain)};
  return Rng(seq);
}

namespace detail {

/// Inverse-CDF sampler for a U(1) density tabulated at cell midpoints.
class AngleTable {
 public:
  static constexpr int kCells = 4096;

  AngleTable() = default;
  explicit AngleTable(const FastEvaluator<U1>& q) : cdf_(kCells + 1, 0.0) {
    const double h = 2.0 * pi / kCells;
    double peak = 0.0;
    for (int k = 0; k < kCells; ++k) {
      const double v = q.at_angle(-pi + (k + 0.5) * h);
      if (!(v >= 0.0)) throw std::domain_error("plaquette weight is negative");
      cdf_[k + 1] = cdf_[k] + v;
      peak = std::max(peak, v);
    }
    total_ = cdf_[kCells];
    if (!(total_ > 0.0)) throw std::domain_error("plaquette weight vanishes identically");
    for (double& c : cdf_) c /= total_;
    // sup over the linear interpolant is attained on the grid
    max_ = 0.0;
    for (int m = 0; m <= FastEvaluator<U1>::kGrid; ++m)
      max_ = std::max(max_, q.at_angle(-pi + 2.0 * pi * m / FastEvaluator<U1>::kGrid));
    max_ = std::max(max_, peak) * (1.0 + 1e-12);
  }

  double sample(Rng& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double x = u(rng);
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), x);
    int k = static_cast<int>(it - cdf_.begin()) - 1;
    k = std::clamp(k, 0, kCells - 1);
    const double w = cdf_[k + 1] - cdf_[k];
    const double t = w > 0.0 ? (x - cdf_[k]) / w : 0.5;
    return -pi + (k + t) * (2.0 * pi / kCells);
  }

  double max() const { return max_; }

 private:
  std::vector<double> cdf_;
  double total_ = 0.0, max_ = 0.0;
};

}  // namespace detail

template <class G>
class ChainState {
 public:
  using Element = typename G::Element;

  /// weights[k] is used on every plaquette p with assignment[p] == k.
  ChainState(const PlaquetteComplex& cx, std::vector<ClassFunction<G>> weights, std::vector<int> assignment,
             std::uint64_t seed, int chain = 0)
      : cx_(&cx), config_(cx.num_edges()), assign_(std::move(assignment)), rng_(chain_rng(seed, chain)), seed_(seed) {
    if (static_cast<int>(assign_.size()) != cx.num_plaquettes())
      throw std::invalid_argument("one weight index per plaquette");
    for (int k : assign_)
      if (k < 0 || k >= static_cast<int>(weights.size())) throw std::invalid_argument("weight index out of range");
    for (const auto& w : weights) eval_.emplace_back(w);
    if (cx.inc_offset.empty()) throw std::invalid_argument("complex has no incidence table");
  }

  ChainState(const PlaquetteComplex& cx, const ClassFunction<G>& q, std::uint64_t seed, int chain = 0)
      : ChainState(cx, {q}, std::vector<int>(cx.num_plaquettes(), 0), seed, chain) {}

  const PlaquetteComplex& complex() const { return *cx_; }
  const Configuration<G>& config() const { return config_; }
  Configuration<G>& config() { return config_; }
  Rng& rng() { return rng_; }
  std::uint64_t seed() const { return seed_; }
  long sweeps() const { return sweeps_; }
  double width() const { return width_; }
  bool frozen() const { return frozen_; }
  void set_width(double w) {
    if (!(w > 0.0 && w <= pi)) throw std::invalid_argument("proposal width must lie in (0, pi]");
    width_ = w;
  }
  void freeze() { frozen_ = true; }
  double acceptance() const { return proposed_ ? static_cast<double>(accepted_) / proposed_ : 1.0; }
  const FastEvaluator<G>& weight(int p) const { return eval_[assign_[p]]; }
  int weight_index(int p) const { return assign_[p]; }
  int num_weights() const { return static_cast<int>(eval_.size()); }

  /// Holonomy of p with edge `pos` of its word replaced by `cand`.
  Element holonomy_with(int p, int pos, const Element& cand) const {
    const auto& w = cx_->plaquettes[p];
    Element g = G::identity();
    for (int k = 0; k < 4; ++k) {
      const Element u = k == pos ? cand : config_[w[k].edge];
      g = g * (w[k].sign > 0 ? u : u.inverse());
    }
    return g;
  }

  void count(bool acc) {
    ++proposed_;
    accepted_ += acc;
  }
  void end_sweep() {
    ++sweeps_;
    if (!frozen_) {
      // nudge the width toward acceptance 0.5
      const double a = proposed_ ? static_cast<double>(accepted_) / proposed_ : 0.5;
      width_ = std::clamp(width_ * std::exp(a - 0.5), 1e-4, pi);
      accepted_ = proposed_ = 0;
    }
  }

  const detail::AngleTable& angle_table(int k) requires(G::id == GroupId::U1) {
    if (tables_.empty()) tables_.resize(eval_.size());
    if (!tables_[k]) tables_[k] = std::make_shared<detail::AngleTable>(eval_[k]);
    return *tables_[k];
  }

 private:
  const PlaquetteComplex* cx_;
  Configuration<G> config_;
  std::vector<FastEvaluator<G>> eval_;
  std::vector<int> assign_;
  Rng rng_;
  std::uint64_t seed_;
  long sweeps_ = 0;
  double width_ = 0.5;
  bool frozen_ = false;
  long accepted_ = 0, proposed_ = 0;
  std::vector<std::shared_ptr<detail::AngleTable>> tables_;
};

/// prod over plaquettes containing e of Q_p(U_p) with U_e = cand.
template <class G>
double local_weight(const ChainState<G>& s, int e, const typename G::Element& cand) {
  double w = 1.0;
  for (const auto& inc : s.complex().incident(e))
    w *= s.weight(inc.plaquette).at(s.holonomy_with(inc.plaquette, inc.position, cand));
  return w;
}

/// One Metropolis update of edge e: U -> U exp(w xi), xi uniform in the unit ball.
template <class G>
bool metropolis_update(ChainState<G>& s, int e) {
  const auto& cur = s.config()[e];
  const typename G::Algebra x = uniform_unit_ball<G::dim>(s.rng()) * s.width();
  const auto cand = cur * G::exp(x);
  const double w0 = local_weight(s, e, cur);
  const double w1 = local_weight(s, e, cand);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const bool acc = w1 >= w0 || u(s.rng()) * w0 < w1;
  if (acc) s.config()[e] = cand;
  s.count(acc);
  return acc;
}

template <class G>
void metropolis_sweep(ChainState<G>& s) {
  for (int e = 0; e < s.complex().num_edges(); ++e) metropolis_update(s, e);
  s.end_sweep();
}

namespace detail {

/// Angle alpha_p with U_p = U_e^{sign} composed with the rest: theta_p = sign theta + alpha.
inline double complement_angle(const ChainState<U1>& s, int p, int pos) {
  const auto& w = s.complex().plaquettes[p];
  double a = 0.0;
  for (int k = 0; k < 4; ++k)
    if (k != pos) a += w[k].sign * s.config()[w[k].edge].angle();
  return a;
}

}  // namespace detail

/// Exact conditional of edge e given the rest, normalized, on `M` cell midpoints.
inline std::vector<double> conditional_density_u1(const ChainState<U1>& s, int e, int M = 4096) {
  std::vector<double> out(M, 1.0);
  for (const auto& inc : s.complex().incident(e)) {
    const int sg = s.complex().plaquettes[inc.plaquette][inc.position].sign;
    const double a = detail::complement_angle(s, inc.plaquette, inc.position);
    for (int k = 0; k < M; ++k) out[k] *= s.weight(inc.plaquette).at_angle(sg * (-pi + (k + 0.5) * 2 * pi / M) + a);
  }
  const double z = pairwise_sum(out) * (2.0 * pi / M);
  for (double& v : out) v /= z;
  return out;
}

/// Resamples every edge from its conditional.  The first incident plaquette is
/// sampled exactly by inverse CDF; further plaquettes enter by rejection.
inline void heatbath_sweep_u1(ChainState<U1>& s) {
  std::uniform_real_distribution<double> u(0.0, 1.0), ang(-pi, pi);
  const auto& cx = s.complex();
  for (int e = 0; e < cx.num_edges(); ++e) {
    const auto inc = cx.incident(e);
    if (inc.empty()) {
      s.config()[e] = U1::Element(ang(s.rng()));
      continue;
    }
    const int p0 = inc[0].plaquette;
    const int sg0 = cx.plaquettes[p0][inc[0].position].sign;
    const double a0 = detail::complement_angle(s, p0, inc[0].position);
    const auto& table = s.angle_table(s.weight_index(p0));
    double bound = 1.0;
    std::vector<std::array<double, 2>> rest;
    for (std::size_t k = 1; k < inc.size(); ++k) {
      const int p = inc[k].plaquette;
      rest.push_back({static_cast<double>(cx.plaquettes[p][inc[k].position].sign),
                      detail::complement_angle(s, p, inc[k].position)});
      bound *= s.angle_table(s.weight_index(p)).max();
    }
    for (long tries = 0;; ++tries) {
      if (tries > 10'000'000) throw std::runtime_error("heat-bath rejection does not terminate");
      const double phi = table.sample(s.rng());
      const double theta = sg0 * (phi - a0);
      double w = 1.0;
      for (std::size_t k = 0; k < rest.size(); ++k)
        w *= s.weight(inc[k + 1].plaquette).at_angle(rest[k][0] * theta + rest[k][1]);
      if (rest.empty() || u(s.rng()) * bound < w) {
        s.config()[e] = U1::Element(theta);
        break;
      }
    }
  }
  s.end_sweep();
}

template <class G>
void sweep(ChainState<G>& s, Sampler kind) {
  if constexpr (G::id == GroupId::U1) {
    if (kind != Sampler::Metropolis) {
      heatbath_sweep_u1(s);
      return;
    }
  } else if (kind == Sampler::HeatBath) {
    throw std::invalid_argument("heat-bath sampling is available for U(1) only");
  }
  metropolis_sweep(s);
}

// ---------------------------------------------------------------------------
// Estimators

template <class G>
struct Observables {
  std::vector<std::string> names;
  std::function<void(const Configuration<G>&, std::span<double>)> eval;
};

/// Wilson loops on the chain's own complex.
template <class G>
Observables<G> loop_observables(const PlaquetteComplex& cx, std::vector<std::string> names,
                                std::vector<std::vector<SignedEdge>> loops) {
  for (const auto& l : loops) require_closed_walk(cx, l);
  return {std::move(names), [&cx, loops](const Configuration<G>& c, std::span<double> out) {
            for (std::size_t k = 0; k < loops.size(); ++k) out[k] = wilson_loop(c, cx, loops[k]);
          }};
}

/// Base-lattice Wilson loops of the carpet configuration pushed through pi_N.
template <class G>
Observables<G> projected_loop_observables(const CarpetGraph& cg, std::vector<std::string> names,
                                          std::vector<std::vector<SignedEdge>> loops) {
  for (const auto& l : loops) require_closed_walk(cg.base().complex(), l);
  return {std::move(names), [&cg, loops](const Configuration<G>& c, std::span<double> out) {
            const auto base = project_pi(c, cg);
            for (std::size_t k = 0; k < loops.size(); ++k) out[k] = wilson_loop(base, cg.base().complex(), loops[k]);
          }};
}

struct EstimatorReport {
  std::string observable;
  double estimate = 0.0;
  double stderr_ = std::numeric_limits<double>::quiet_NaN();  // NaN when batches < 8
  int batches = 0;
  double tau_int = std::numeric_limits<double>::quiet_NaN();
  long sweeps = 0;
  std::uint64_t seed = 0;
  std::vector<double> batch_means;
};

struct EstimateOptions {
  long sweeps = 100000;
  long burn_in = 1000;
  int batches = 32;
  Sampler sampler = Sampler::Auto;
};

/// Batch-means summary of a series already split into equal batches.
inline EstimatorReport summarize_batches(std::string name, std::vector<double> means, double sample_var, long n,
                                         std::uint64_t seed) {
  EstimatorReport r;
  r.observable = std::move(name);
  r.batches = static_cast<int>(means.size());
  r.sweeps = n;
  r.seed = seed;
  const double B = static_cast<double>(means.size());
  r.estimate = pairwise_sum(means) / B;
  if (means.size() >= 8) {
    double v = 0.0;
    for (double m : means) v += (m - r.estimate) * (m - r.estimate);
    v /= (B - 1.0);
    r.stderr_ = std::sqrt(v / B);
    const double b = static_cast<double>(n) / B;
    r.tau_int = sample_var > 0.0 ? 0.5 * b * v / sample_var : 0.5;
  }
  r.batch_means = std::move(means);
  return r;
}

/// Burn-in (with width adaptation), then `sweeps` measured sweeps split into
/// `batches` batches.
template <class G>
std::vector<EstimatorReport> estimate(ChainState<G>& s, const Observables<G>& obs, const EstimateOptions& opt) {
  if (opt.batches < 1 || opt.sweeps < opt.batches) throw std::invalid_argument("need sweeps >= batches >= 1");
  if (opt.burn_in < 0) throw std::invalid_argument("burn_in must be >= 0");
  for (long k = 0; k < opt.burn_in; ++k) sweep(s, opt.sampler);
  s.freeze();
  const std::size_t K = obs.names.size();
  const long b = opt.sweeps / opt.batches;
  const long n = b * opt.batches;
  std::vector<std::vector<double>> means(K, std::vector<double>(opt.batches, 0.0));
  std::vector<double> sum(K, 0.0), sum2(K, 0.0), v(K), acc(K, 0.0);
  for (long t = 0; t < n; ++t) {
    sweep(s, opt.sampler);
    obs.eval(s.config(), v);
    for (std::size_t k = 0; k < K; ++k) {
      acc[k] += v[k];
      sum[k] += v[k];
      sum2[k] += v[k] * v[k];
    }
    if ((t + 1) % b == 0) {
      for (std::size_t k = 0; k < K; ++k) {
        means[k][t / b] = acc[k] / b;
        acc[k] = 0.0;
      }
    }
  }
  std::vector<EstimatorReport> out;
  for (std::size_t k = 0; k < K; ++k) {
    const double mean = sum[k] / n;
    const double var = std::max(0.0, sum2[k] / n - mean * mean);
    out.push_back(summarize_batches(obs.names[k], std::move(means[k]), var, n, s.seed()));
  }
  return out;
}

/// Pools independent chains: batch means are concatenated in chain order.
inline std::vector<EstimatorReport> pool_chains(const std::vector<std::vector<EstimatorReport>>& chains) {
  if (chains.empty()) return {};
  if (chains.size() == 1) return chains[0];
  std::vector<EstimatorReport> out;
  for (std::size_t k = 0; k < chains[0].size(); ++k) {
    std::vector<double> means;
    double tau = 0.0;
    long n = 0;
    for (const auto& c : chains) {
      means.insert(means.end(), c[k].batch_means.begin(), c[k].batch_means.end());
      tau += std::isfinite(c[k].tau_int) ? c[k].tau_int : 0.0;
      n += c[k].sweeps;
    }
    auto r = summarize_batches(chains[0][k].observable, std::move(means), 0.0, n, chains[0][k].seed);
    r.tau_int = tau / static_cast<double>(chains.size());
    out.push_back(std::move(r));
  }
  return out;
}

/// k independent chains with ids base..base+k-1, one thread each, sweeps
/// split evenly, pooled in chain order.  k = 1 is a plain single chain.
template <class G>
std::vector<EstimatorReport> run_chains(const PlaquetteComplex& cx, const std::vector<ClassFunction<G>>& weights,
                                        const std::vector<int>& assignment, const Observables<G>& obs,
                                        EstimateOptions opt, std::uint64_t seed, int base = 0, int k = 1) {
  if (k < 1) throw std::invalid_argument("chain count must be >= 1");
  opt.sweeps /= k;
  std::vector<std::vector<EstimatorReport>> out(k);
  std::vector<std::exception_ptr> err(k);
  auto work = [&](int c) {
    try {
      ChainState<G> s(cx, weights, assignment, seed, base + c);
      out[c] = estimate(s, obs, opt);
    } catch (...) {
      err[c] = std::current_exception();
    }
  };
  if (k == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int c = 0; c < k; ++c) pool.emplace_back(work, c);
    for (auto& t : pool) t.join();
  }
  for (auto& e : err)
    if (e) std::rethrow_exception(e);
  return pool_chains(out);
}

inline void write_reports_csv(std::ostream& os, const std::vector<EstimatorReport>& reports, bool header = true) {
  if (header) os << "observable,estimate,stderr,batches,tau_int,seed\n";
  os << std::setprecision(10);
  for (const auto& r : reports)
    os << r.observable << ',' << r.estimate << ',' << r.stderr_ << ',' << r.batches << ',' << r.tau_int << ','
       << r.seed << '\n';
}

// ---------------------------------------------------------------------------
// Ginibre monotonicity

/// Plaquette with lower corner at the origin in directions (0, 1).
inline int central_plaquette(const BoxLattice& b) {
  return b.plaquette(b.vertex(std::vector<int>(b.dim(), 0)), 0, 1);
}

enum class Monotonicity { Monotone, Inconclusive, Violated };

inline std::string_view monotonicity_name(Monotonicity m) {
  switch (m) {
    case Monotonicity::Monotone: return "monotone";
    case Monotonicity::Inconclusive: return "inconclusive";
    case Monotonicity::Violated: return "violated";
  }
  return "?";
}

struct GinibreReport {
  std::vector<double> couplings;
  std::vector<EstimatorReport> estimates;
  Monotonicity verdict = Monotonicity::Monotone;
  bool passed() const { return verdict != Monotonicity::Violated; }
};

/// Judges a sequence of estimates against nondecreasing order with
/// `nsigma` combined-error bands.
inline Monotonicity judge_monotone(const std::vector<EstimatorReport>& est, double nsigma = 3.0) {
  auto v = Monotonicity::Monotone;
  for (std::size_t i = 1; i < est.size(); ++i) {
    const double band = nsigma * std::hypot(est[i].stderr_, est[i - 1].stderr_);
    const double diff = est[i].estimate - est[i - 1].estimate;
    if (!std::isfinite(band)) return Monotonicity::Inconclusive;
    if (diff < -band) return Monotonicity::Violated;
    if (diff <= band) v = Monotonicity::Inconclusive;
  }
  return v;
}

/// U(1) Villain on `base`, coupling `fixed` everywhere except plaquette
/// `distinguished`, whose coupling runs over `grid`; observable `loop`.
inline GinibreReport ginibre_experiment(const BoxLattice& base, int distinguished, const std::vector<SignedEdge>& loop,
                                        const std::vector<double>& grid, double fixed, const EstimateOptions& opt,
                                        std::uint64_t seed, int chains = 1) {
  const auto& cx = base.complex();
  if (distinguished < 0 || distinguished >= cx.num_plaquettes()) throw std::invalid_argument("bad plaquette id");
  GinibreReport rep;
  rep.couplings = grid;
  const auto table = irrep_table<U1>();
  const auto other = villain_density<U1>(fixed, table);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::vector<int> assign(cx.num_plaquettes(), 0);
    assign[distinguished] = 1;
    const auto obs = loop_observables<U1>(cx, {"loop"}, {loop});
    auto r = run_chains<U1>(cx, {other, villain_density<U1>(grid[g], table)}, assign, obs, opt, seed,
                            static_cast<int>(g) * chains, chains)[0];
    std::ostringstream name;
    name << "beta_c=" << grid[g];
    r.observable = name.str();
    rep.estimates.push_back(std::move(r));
  }
  rep.verdict = judge_monotone(rep.estimates);
  return rep;
}

}  // namespace carpet
