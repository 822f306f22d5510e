#pragma once

// Named experiments driven by flat key=value manifests, with CSV artifacts
// and pass/fail summaries.

#include "carpetlab/mc.hpp"
#include "carpetlab/planar.hpp"
#include "carpetlab/rw_analysis.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <optional>

namespace carpet {

class ManifestError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Catalog

struct KeySpec {
  std::string key;
  std::string fallback;  // empty: required
  std::string help;
};

struct ExperimentInfo {
  std::string name;
  std::string summary;
  std::vector<KeySpec> keys;
};

inline const std::vector<ExperimentInfo>& experiment_catalog() {
  static const std::vector<KeySpec> common = {
      {"seed", "", "RNG seed (unsigned 64-bit), mandatory"},
      {"out", "out", "output directory"},
      {"experiment", "-", "experiment name (optional on the command line)"},
  };
  auto with_common = [](std::vector<KeySpec> k) {
    k.insert(k.end(), common.begin(), common.end());
    return k;
  };
  static const std::vector<ExperimentInfo> cat = {
      {"villain-limit",
       "sup distance between p_N^{*N^2} and V_beta across N",
       with_common({{"group", "U1", "U1 | SU2 | SU3"},
                    {"action", "wilson", "wilson | manton | villain"},
                    {"beta", "1", "coupling of the limit V_beta"},
                    {"N", "2,4,8,16", "refinement levels, increasing"},
                    {"grid", "0", "class grid for the sup norm (0: group default)"},
                    {"tol", "0.05", "bound on the distance at the largest N"},
                    {"fixed_point_tol", "1e-10", "bound on every distance for the villain family"}})},
      {"carpet-equivalence",
       "Wilson loops on the carpet graph pushed through pi_N versus the base lattice with p_N^{*N^2}",
       with_common({{"group", "U1", "U1 | SU2"},
                    {"action", "wilson", "wilson | manton | villain"},
                    {"beta", "1", "coupling"},
                    {"d", "2", "lattice dimension"},
                    {"L", "1", "box half-side"},
                    {"N", "2", "carpet refinement"},
                    {"sweeps", "1000000", "measured sweeps per lattice"},
                    {"burn_in", "1000", "burn-in sweeps"},
                    {"batches", "32", "batch-means batches per chain"},
                    {"sampler", "auto", "auto | metropolis | heatbath"},
                    {"chains", "1", "independent chains per estimate"},
                    {"nsigma", "3", "agreement band in combined standard errors"},
                    {"sigma_max", "0", "largest allowed standard error (0: 0.005 for U1, 0.01 otherwise)"}})},
      {"planar-oracle",
       "partition function by face merging versus brute-force quadrature",
       with_common({{"group", "U1", "U1 | SU2"},
                    {"graph", "fig2.txt", "planar graph files, comma separated"},
                    {"action", "wilson,villain", "face weights, comma separated"},
                    {"beta", "1", "coupling of every face without a weight line"},
                    {"points", "32", "U(1) brute-force points per edge"},
                    {"tol", "1e-6", "relative tolerance against brute force"},
                    {"order_tol", "1e-12", "relative tolerance between merge orders"}})},
      {"ginibre",
       "central Wilson loop against the central-plaquette coupling, U(1) Villain",
       with_common({{"group", "U1", "U1 only"},
                    {"d", "2", "lattice dimension"},
                    {"L", "2", "box half-side"},
                    {"beta", "1", "coupling of all other plaquettes"},
                    {"grid", "0.5,1,2,4", "central-plaquette couplings, increasing"},
                    {"sweeps", "200000", "measured sweeps per coupling"},
                    {"burn_in", "1000", "burn-in sweeps"},
                    {"batches", "32", "batch-means batches per chain"},
                    {"chains", "1", "independent chains per coupling"},
                    {"nsigma", "3", "band for the monotonicity verdict"},
                    {"require_monotone", "false", "treat an inconclusive verdict as failure"}})},
      {"moments",
       "N B_N and N A_N of the step law against 0 and beta^-1 I",
       with_common({{"group", "U1", "U1 | SU2"},
                    {"action", "wilson,manton", "actions, comma separated"},
                    {"beta", "1", "coupling"},
                    {"N", "10,30,100", "step counts; checks apply at the largest"},
                    {"samples", "1000000", "SU(2) samples per N"},
                    {"replicas", "10", "independent replicas for error bars"},
                    {"nsigma", "3", "band for N B_N = 0"},
                    {"frob_tol", "0.05", "bound on |N A_N - I/beta|_F / |I/beta|_F"}})},
      {"gradient-bounds",
       "weak-Harnack inequalities and gradient scaling of convolution powers",
       with_common({{"group", "U1", "U1 | SU2"},
                    {"action", "wilson", "wilson | manton | villain"},
                    {"beta", "1", "coupling"},
                    {"N", "2,4,8", "family members for the weak-Harnack check (eps = 1/N)"},
                    {"pairs", "2:4,4:8,8:16", "n:m pairs for the weak-Harnack check"},
                    {"scaling_N", "2,4,8,16", "family members for the scaling fit"},
                    {"m", "2,3,4,5,6,7,8,9,10", "exponents m of p^(2^m)"},
                    {"grid", "0", "class grid (0: group default)"},
                    {"spread", "4", "allowed ratio between per-N constants"},
                    {"harnack_tol", "0", "allowed negative margin"}})},
      {"assumption-check",
       "quadratic bounds on the family actions and positive definiteness of -log density on U(1)",
       with_common({{"group", "U1", "U1 | SU2 | SU3"},
                    {"action", "wilson", "wilson | manton | villain"},
                    {"beta", "1", "coupling"},
                    {"N", "1,2,4,8", "family members"},
                    {"r", "1", "upper bound holds on B_{r/N}"},
                    {"theta_low", "auto", "lower constant (auto: 2 beta/pi^2, manton beta/2)"},
                    {"theta_high", "auto", "upper constant (auto: beta/2)"},
                    {"tol", "1e-6", "allowed negative margin"},
                    {"pd_beta", "1", "coupling for the positive-definiteness table"},
                    {"pd_tol", "1e-8", "coefficients below -pd_tol count as negative"}})},
  };
  return cat;
}

inline const ExperimentInfo& experiment_info(std::string_view name) {
  for (const auto& e : experiment_catalog())
    if (e.name == name) return e;
  throw ManifestError("unknown experiment '" + std::string(name) + "'");
}

inline std::string describe_experiment(const ExperimentInfo& e) {
  std::ostringstream os;
  os << e.name << ": " << e.summary << "\n\n";
  std::size_t w = 0;
  for (const auto& k : e.keys) w = std::max(w, k.key.size());
  for (const auto& k : e.keys)
    os << "  " << std::left << std::setw(static_cast<int>(w) + 2) << k.key << std::setw(22)
       << (k.fallback.empty() ? "(required)" : k.fallback) << k.help << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Manifest

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

class Manifest {
 public:
  /// key=value lines; '#' starts a comment; blank lines ignored.
  static Manifest parse(std::istream& is, std::filesystem::path base_dir = {}) {
    Manifest m;
    m.base_dir_ = std::move(base_dir);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      m.text_ += line + '\n';
      m.add_line(line, lineno);
    }
    return m;
  }

  static Manifest parse_string(const std::string& s, std::filesystem::path base_dir = {}) {
    std::istringstream is(s);
    return parse(is, std::move(base_dir));
  }

  static Manifest load(const std::filesystem::path& file) {
    std::ifstream is(file);
    if (!is) throw ManifestError("cannot open manifest " + file.string());
    return parse(is, file.parent_path());
  }

  /// Appends a key=value line, as if it ended the file.
  void append(const std::string& key, const std::string& value) {
    const std::string line = key + "=" + value;
    text_ += line + '\n';
    add_line(line, ++lines_);
  }

  const std::string& text() const { return text_; }
  std::uint64_t hash() const { return fnv1a(text_); }
  std::string hash_hex() const {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << hash();
    return os.str();
  }
  const std::filesystem::path& base_dir() const { return base_dir_; }
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::string& value(const std::string& key) const { return values_.at(key); }
  int line(const std::string& key) const {
    auto it = line_of_.find(key);
    return it == line_of_.end() ? 0 : it->second;
  }
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  void add_line(std::string line, int lineno) {
    lines_ = lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = detail::trim(line);
    if (line.empty()) return;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ManifestError("line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ManifestError("line " + std::to_string(lineno) + ": empty key");
    if (values_.count(key))
      throw ManifestError("line " + std::to_string(lineno) + ": duplicate key '" + key + "' (first on line " +
                          std::to_string(line_of_[key]) + ")");
    values_[key] = val;
    line_of_[key] = lineno;
  }

  std::string text_;
  std::map<std::string, std::string> values_;
  std::map<std::string, int> line_of_;
  std::filesystem::path base_dir_;
  int lines_ = 0;
};

/// Manifest values checked against an experiment schema, with typed access.
class Params {
 public:
  Params(const Manifest& m, const ExperimentInfo& info) : m_(&m), info_(&info) {
    for (const auto& [k, v] : m.values()) {
      bool known = false;
      for (const auto& s : info.keys) known = known || s.key == k;
      if (!known) fail(k, "unknown key for experiment " + info.name);
    }
    for (const auto& s : info.keys)
      if (s.fallback.empty() && !m.has(s.key)) throw ManifestError("missing required key '" + s.key + "'");
    if (m.has("experiment") && m.value("experiment") != info.name)
      fail("experiment", "manifest names '" + m.value("experiment") + "', not " + info.name);
  }

  const std::string& text(const std::string& key) const {
    if (m_->has(key)) return m_->value(key);
    for (const auto& s : info_->keys)
      if (s.key == key) return s.fallback;
    throw std::logic_error("schema has no key " + key);
  }

  double real(const std::string& key) const { return to_real(key, text(key)); }

  long integer(const std::string& key) const { return to_int(key, text(key)); }

  bool flag(const std::string& key) const {
    const auto& v = text(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail(key, "expected true or false, got '" + v + "'");
  }

  std::uint64_t seed() const {
    const auto& v = text("seed");
    try {
      std::size_t pos = 0;
      if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
      const auto s = std::stoull(v, &pos, 0);
      if (pos != v.size()) throw std::invalid_argument("trailing");
      return s;
    } catch (const std::exception&) {
      fail("seed", "expected an unsigned integer, got '" + v + "'");
    }
  }

  std::vector<std::string> list(const std::string& key) const {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(text(key));
    while (std::getline(is, item, ',')) {
      item = detail::trim(item);
      if (item.empty()) fail(key, "empty list item");
      out.push_back(item);
    }
    if (out.empty()) fail(key, "list is empty");
    return out;
  }

  std::vector<int> ints(const std::string& key) const {
    std::vector<int> out;
    for (const auto& s : list(key)) out.push_back(static_cast<int>(to_int(key, s)));
    return out;
  }

  std::vector<double> reals(const std::string& key) const {
    std::vector<double> out;
    for (const auto& s : list(key)) out.push_back(to_real(key, s));
    return out;
  }

  long positive(const std::string& key) const {
    const long v = integer(key);
    if (v < 1) fail(key, "must be >= 1");
    return v;
  }

  double positive_real(const std::string& key) const {
    const double v = real(key);
    if (!(v > 0.0) || !std::isfinite(v)) fail(key, "must be positive and finite");
    return v;
  }

  std::vector<int> positive_ints(const std::string& key, bool increasing = false) const {
    auto v = ints(key);
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] < 1) fail(key, "entries must be >= 1");
      if (increasing && i > 0 && v[i] <= v[i - 1]) fail(key, "entries must be strictly increasing");
    }
    return v;
  }

  GroupId group(std::initializer_list<GroupId> allowed) const {
    GroupId g;
    try {
      g = parse_group(text("group"));
    } catch (const std::invalid_argument& e) {
      fail("group", e.what());
    }
    for (auto a : allowed)
      if (a == g) return g;
    fail("group", std::string(group_name(g)) + " is not supported by " + info_->name);
  }

  ActionKind action(const std::string& key = "action") const {
    try {
      return parse_action(text(key));
    } catch (const std::invalid_argument& e) {
      fail(key, e.what());
    }
  }

  std::vector<ActionKind> actions(const std::string& key = "action") const {
    std::vector<ActionKind> out;
    for (const auto& s : list(key)) {
      try {
        out.push_back(parse_action(s));
      } catch (const std::invalid_argument& e) {
        fail(key, e.what());
      }
    }
    return out;
  }

  /// Existing file, tried as given, then under the manifest directory and
  /// the extra search directories (and their graphs/ subdirectories).
  std::filesystem::path file(const std::string& key, const std::string& name,
                             const std::vector<std::filesystem::path>& search) const {
    namespace fs = std::filesystem;
    std::vector<fs::path> tries{fs::path(name)};
    std::vector<fs::path> dirs;
    if (!m_->base_dir().empty()) dirs.push_back(m_->base_dir());
    dirs.insert(dirs.end(), search.begin(), search.end());
    for (const auto& d : dirs) {
      tries.push_back(d / name);
      tries.push_back(d / "graphs" / name);
    }
    for (const auto& t : tries)
      if (fs::is_regular_file(t)) return t;
    fail(key, "file not found: " + name);
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    const int l = m_->line(key);
    throw ManifestError((l ? "line " + std::to_string(l) + ": " : std::string()) + "key '" + key + "': " + msg);
  }

 private:
  double to_real(const std::string& key, const std::string& v) const {
    try {
      std::size_t pos = 0;
      const double d = std::stod(v, &pos);
      if (pos != v.size() || !std::isfinite(d)) throw std::invalid_argument("bad");
      return d;
    } catch (const std::exception&) {
      fail(key, "expected a number, got '" + v + "'");
    }
  }

  long to_int(const std::string& key, const std::string& v) const {
    try {
      std::size_t pos = 0;
      const double d = std::stod(v, &pos);  // accepts 1e6
      if (pos != v.size() || d != std::floor(d) || std::abs(d) > 9e15) throw std::invalid_argument("bad");
      return static_cast<long>(d);
    } catch (const std::exception&) {
      fail(key, "expected an integer, got '" + v + "'");
    }
  }

  const Manifest* m_;
  const ExperimentInfo* info_;
};

// ---------------------------------------------------------------------------
// Results

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  template <class... T>
  void add(const T&... cells) {
    std::vector<std::string> r;
    (r.push_back(cell(cells)), ...);
    if (r.size() != columns.size()) throw std::logic_error("table " + name + ": row width mismatch");
    rows.push_back(std::move(r));
  }

  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  static std::string cell(std::string_view s) { return std::string(s); }
  static std::string cell(bool b) { return b ? "true" : "false"; }
  template <class T>
    requires std::is_arithmetic_v<T>
  static std::string cell(T v) {
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
  }
};

enum class Verdict { Pass, Fail, Inconclusive };

inline std::string_view verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "PASS";
    case Verdict::Fail: return "FAIL";
    case Verdict::Inconclusive: return "INCONCLUSIVE";
  }
  return "?";
}

struct Check {
  std::string name;
  Verdict verdict = Verdict::Pass;
  std::string detail;
};

struct RunResult {
  std::string experiment;
  std::vector<Table> tables;
  std::vector<Check> checks;

  void check(std::string name, bool ok, std::string detail) {
    checks.push_back({std::move(name), ok ? Verdict::Pass : Verdict::Fail, std::move(detail)});
  }

  bool passed() const {
    for (const auto& c : checks)
      if (c.verdict == Verdict::Fail) return false;
    return true;
  }

  int exit_code() const { return passed() ? 0 : 1; }

  const Table& table(std::string_view name) const {
    for (const auto& t : tables)
      if (t.name == name) return t;
    throw std::out_of_range("no table " + std::string(name));
  }
};

struct RunOptions {
  int chains = 0;  // > 0 overrides the manifest
  std::vector<std::filesystem::path> search;
};

namespace detail {

inline std::string fmt(double v, int prec = 6) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

/// f(0..n-1) on up to hardware_concurrency threads; results in index order.
template <class F>
auto parallel_map(int n, F f) -> std::vector<decltype(f(0))> {
  using R = decltype(f(0));
  std::vector<std::future<R>> fut;
  std::vector<R> out;
  const int width = std::max(1u, std::thread::hardware_concurrency());
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(fut.size()) - static_cast<int>(out.size()) >= width) out.push_back(fut[out.size()].get());
    fut.push_back(std::async(std::launch::async, f, i));
  }
  while (out.size() < fut.size()) out.push_back(fut[out.size()].get());
  return out;
}

template <class G>
int effective_grid(long g) {
  return g > 0 ? static_cast<int>(g) : default_grid_resolution<G>();
}

inline Sampler sampler_param(const Params& p) {
  try {
    return parse_sampler(p.text("sampler"));
  } catch (const std::invalid_argument& e) {
    p.fail("sampler", e.what());
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Experiments

template <class G>
RunResult run_villain_limit(const Params& p) {
  RunResult r;
  const auto kind = p.action();
  const double beta = p.positive_real("beta");
  const auto Ns = p.positive_ints("N", true);
  const int grid = detail::effective_grid<G>(p.integer("grid"));
  const auto table = irrep_table<G>();
  const auto v = villain_density<G>(beta, table);
  Table t{"distance", {"group", "action", "beta", "N", "sup_distance"}, {}};
  const auto dist = detail::parallel_map(static_cast<int>(Ns.size()), [&](int i) {
    const int N = Ns[i];
    return sup_distance(convolve_power(family_member<G>(kind, beta, N, table), N * N), v, grid);
  });
  for (std::size_t i = 0; i < Ns.size(); ++i) t.add(group_name(G::id), action_name(kind), beta, Ns[i], dist[i]);
  r.tables.push_back(std::move(t));
  if (kind == ActionKind::Villain) {
    const double tol = p.real("fixed_point_tol");
    const double worst = *std::max_element(dist.begin(), dist.end());
    r.check("fixed_point", worst < tol, "max distance " + detail::fmt(worst) + " < " + detail::fmt(tol));
  } else {
    bool dec = true;
    for (std::size_t i = 1; i < dist.size(); ++i) dec = dec && dist[i] < dist[i - 1];
    r.check("decreasing", dec, "strictly decreasing over N");
    const double tol = p.real("tol");
    r.check("final_distance", dist.back() < tol,
            "N=" + std::to_string(Ns.back()) + ": " + detail::fmt(dist.back()) + " < " + detail::fmt(tol));
  }
  return r;
}

template <class G>
RunResult run_carpet_equivalence(const Params& p, const RunOptions& o) {
  RunResult r;
  const auto kind = p.action();
  const double beta = p.positive_real("beta");
  const int d = static_cast<int>(p.integer("d"));
  const int L = static_cast<int>(p.positive("L"));
  const int N = static_cast<int>(p.positive("N"));
  if (d < 2) p.fail("d", "must be >= 2");
  const EstimateOptions opt{p.positive("sweeps"), p.integer("burn_in"), static_cast<int>(p.positive("batches")),
                            detail::sampler_param(p)};
  if (opt.burn_in < 0) p.fail("burn_in", "must be >= 0");
  if (opt.sampler == Sampler::HeatBath && G::id != GroupId::U1) p.fail("sampler", "heat-bath needs U1");
  const int chains = o.chains > 0 ? o.chains : static_cast<int>(p.positive("chains"));
  const double nsig = p.positive_real("nsigma");
  double smax = p.real("sigma_max");
  if (smax <= 0.0) smax = G::id == GroupId::U1 ? 0.005 : 0.01;
  const auto seed = p.seed();

  const BoxLattice base(d, L);
  const CarpetGraph cg(base, N);
  const auto pN = family_member<G>(kind, beta, N);
  const auto q = convolve_power(pN, N * N);
  const auto& bcx = base.complex();
  std::vector<std::string> names;
  std::vector<std::vector<SignedEdge>> loops;
  for (int k = 0; k < bcx.num_plaquettes(); ++k) {
    names.push_back("plaquette_" + std::to_string(k));
    loops.push_back(plaquette_loop(bcx, k));
  }
  const auto fine_obs = projected_loop_observables<G>(cg, names, loops);
  const auto coarse_obs = loop_observables<G>(bcx, names, loops);
  std::vector<EstimatorReport> fine, coarse;
  {
    // carpet chains use ids 0..chains-1, base chains chains..2 chains-1
    auto f = std::async(std::launch::async, [&] {
      return run_chains<G>(cg.complex(), {pN}, std::vector<int>(cg.complex().num_plaquettes(), 0), fine_obs, opt,
                           seed, 0, chains);
    });
    coarse = run_chains<G>(bcx, {q}, std::vector<int>(bcx.num_plaquettes(), 0), coarse_obs, opt, seed, chains, chains);
    fine = f.get();
  }
  // free boundary in d = 2: plaquettes are independent with law q
  const double exact = d == 2 ? q.coeff(IrrepLabel<G>{1}) / G::n : std::numeric_limits<double>::quiet_NaN();
  Table t{"loops",
          {"loop", "carpet_estimate", "carpet_stderr", "base_estimate", "base_stderr", "difference", "combined_sigma",
           "factorized", "carpet_tau", "base_tau"},
          {}};
  bool agree = true, sharp = true, fact = true;
  double worst_z = 0.0, worst_s = 0.0;
  for (std::size_t k = 0; k < names.size(); ++k) {
    const double diff = fine[k].estimate - coarse[k].estimate;
    const double comb = std::hypot(fine[k].stderr_, coarse[k].stderr_);
    t.add(names[k], fine[k].estimate, fine[k].stderr_, coarse[k].estimate, coarse[k].stderr_, diff, comb, exact,
          fine[k].tau_int, coarse[k].tau_int);
    agree = agree && std::abs(diff) <= nsig * comb;
    worst_z = std::max(worst_z, std::abs(diff) / comb);
    const double s = std::max(fine[k].stderr_, coarse[k].stderr_);
    sharp = sharp && s <= smax;
    worst_s = std::max(worst_s, s);
    if (d == 2) fact = fact && std::abs(coarse[k].estimate - exact) <= nsig * coarse[k].stderr_;
  }
  r.tables.push_back(std::move(t));
  r.check("carpet_matches_base", agree, "max |z| " + detail::fmt(worst_z, 4) + " <= " + detail::fmt(nsig));
  r.check("stderr_bound", sharp, "max stderr " + detail::fmt(worst_s, 4) + " <= " + detail::fmt(smax));
  if (d == 2) r.check("base_factorized", fact, "base estimates within band of " + detail::fmt(exact, 10));
  return r;
}

template <class G>
RunResult run_planar_oracle(const Params& p, const RunOptions& o) {
  RunResult r;
  const auto kinds = p.actions();
  const double beta = p.positive_real("beta");
  const double tol = p.positive_real("tol"), otol = p.positive_real("order_tol");
  const int points = static_cast<int>(p.positive("points"));
  Table t{"partition",
          {"graph", "action", "z_reduce", "z_brute", "relative_difference", "z_highest_first", "order_difference"},
          {}};
  double worst = 0.0, worst_order = 0.0;
  for (const auto& name : p.list("graph")) {
    const auto path = p.file("graph", name, o.search);
    std::ifstream is(path);
    PlanarGaugeGraph<G> g = [&] {
      try {
        return PlanarGaugeGraph<G>::parse(is);
      } catch (const GraphFormatError& e) {
        throw ManifestError(path.string() + ": " + e.what());
      }
    }();
    for (auto kind : kinds) {
      const auto w = g.weights(WeightSpec{kind, beta});
      const double z = evaluate_Z(g, w, MergeOrder::LowestEdge);
      const double zh = evaluate_Z(g, w, MergeOrder::HighestEdge);
      const double zb = brute_force_Z(g, w, {.u1_points = points});
      const double rel = std::abs(z - zb) / std::abs(zb);
      const double ord = std::abs(z - zh) / std::abs(z);
      worst = std::max(worst, rel);
      worst_order = std::max(worst_order, ord);
      t.add(name, action_name(kind), z, zb, rel, zh, ord);
    }
  }
  r.tables.push_back(std::move(t));
  r.check("brute_force", worst <= tol, "max relative difference " + detail::fmt(worst, 3) + " <= " + detail::fmt(tol));
  r.check("merge_order", worst_order <= otol,
          "max relative difference " + detail::fmt(worst_order, 3) + " <= " + detail::fmt(otol));
  return r;
}

inline RunResult run_ginibre(const Params& p, const RunOptions& o) {
  RunResult r;
  p.group({GroupId::U1});
  const int d = static_cast<int>(p.integer("d"));
  if (d < 2) p.fail("d", "must be >= 2");
  const BoxLattice base(d, static_cast<int>(p.positive("L")));
  const auto grid = p.reals("grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0)) p.fail("grid", "couplings must be positive");
    if (i > 0 && grid[i] <= grid[i - 1]) p.fail("grid", "couplings must be strictly increasing");
  }
  const EstimateOptions opt{p.positive("sweeps"), p.integer("burn_in"), static_cast<int>(p.positive("batches")),
                            Sampler::Auto};
  const int chains = o.chains > 0 ? o.chains : static_cast<int>(p.positive("chains"));
  const int c = central_plaquette(base);
  const auto loop = plaquette_loop(base.complex(), c);
  const auto rep =
      ginibre_experiment(base, c, loop, grid, p.positive_real("beta"), opt, p.seed(), chains);
  const auto verdict = judge_monotone(rep.estimates, p.positive_real("nsigma"));
  Table t{"scan", {"coupling", "estimate", "stderr", "batches", "tau_int"}, {}};
  for (std::size_t i = 0; i < grid.size(); ++i)
    t.add(grid[i], rep.estimates[i].estimate, rep.estimates[i].stderr_, rep.estimates[i].batches,
          rep.estimates[i].tau_int);
  r.tables.push_back(std::move(t));
  Check ch{"monotone", Verdict::Pass, std::string("verdict ") + std::string(monotonicity_name(verdict))};
  if (verdict == Monotonicity::Violated) ch.verdict = Verdict::Fail;
  if (verdict == Monotonicity::Inconclusive) ch.verdict = p.flag("require_monotone") ? Verdict::Fail : Verdict::Inconclusive;
  r.checks.push_back(ch);
  return r;
}

template <class G>
RunResult run_moments(const Params& p) {
  RunResult r;
  const auto kinds = p.actions();
  const double beta = p.positive_real("beta");
  const auto Ns = p.positive_ints("N", true);
  const long samples = p.positive("samples");
  const int replicas = static_cast<int>(p.positive("replicas"));
  if (replicas < 2) p.fail("replicas", "must be >= 2");
  const double nsig = p.positive_real("nsigma"), ftol = p.positive_real("frob_tol");
  const auto seed = p.seed();
  constexpr int D = G::dim;
  Table sum{"summary",
            {"action", "N", "samples", "max_drift_z", "trace_NA_over_D", "rel_frobenius", "asymmetry", "tail_mass"},
            {}};
  Table mat{"matrix", {"action", "N", "a", "b", "NA", "NA_err"}, {}};
  Table drift{"drift", {"action", "N", "a", "NB", "NB_err"}, {}};
  const int jobs = static_cast<int>(kinds.size() * Ns.size());
  const auto reps = detail::parallel_map(jobs, [&](int j) {
    Rng rng = chain_rng(seed, j);
    return moment_check<G>(kinds[j / Ns.size()], beta, Ns[j % Ns.size()], samples, rng, replicas);
  });
  for (int j = 0; j < jobs; ++j) {
    const auto& m = reps[j];
    const auto kind = kinds[j / Ns.size()];
    double z = 0.0, tr = 0.0;
    for (int a = 0; a < D; ++a) {
      z = std::max(z, m.samples ? std::abs(m.NB[a]) / m.NB_err[a] : 0.0);
      tr += m.NA[a * D + a];
      drift.add(action_name(kind), m.N, a, m.NB[a], m.NB_err[a]);
      for (int b = 0; b < D; ++b) mat.add(action_name(kind), m.N, a, b, m.NA[a * D + b], m.NA_err[a * D + b]);
    }
    sum.add(action_name(kind), m.N, m.samples, z, tr / D, m.rel_frobenius, m.asymmetry, m.tail_mass);
    if (m.N == Ns.back()) {
      const std::string tag = std::string(action_name(kind)) + "_N" + std::to_string(m.N);
      r.check(tag + "_drift", m.drift_consistent_with_zero(nsig),
              m.samples ? "max |N B|/err " + detail::fmt(z, 4) + " <= " + detail::fmt(nsig) : "quadrature, |N B| <= 1e-12");
      r.check(tag + "_covariance", m.rel_frobenius < ftol,
              "relative Frobenius " + detail::fmt(m.rel_frobenius, 4) + " < " + detail::fmt(ftol));
    }
  }
  r.tables.push_back(std::move(sum));
  r.tables.push_back(std::move(drift));
  r.tables.push_back(std::move(mat));
  return r;
}

template <class G>
RunResult run_gradient_bounds(const Params& p) {
  RunResult r;
  const auto kind = p.action();
  const double beta = p.positive_real("beta");
  const auto Ns = p.positive_ints("N");
  const auto sNs = p.positive_ints("scaling_N", true);
  const auto ms = p.positive_ints("m", true);
  const int grid = detail::effective_grid<G>(p.integer("grid"));
  const double spread = p.positive_real("spread"), htol = p.real("harnack_tol");
  std::vector<std::pair<int, int>> pairs;
  for (const auto& s : p.list("pairs")) {
    const auto c = s.find(':');
    int n = 0, m = 0;
    try {
      if (c == std::string::npos) throw std::invalid_argument("colon");
      n = std::stoi(s.substr(0, c));
      m = std::stoi(s.substr(c + 1));
    } catch (const std::exception&) {
      p.fail("pairs", "expected n:m, got '" + s + "'");
    }
    if (n < 1 || m < 1) p.fail("pairs", "n and m must be >= 1");
    pairs.emplace_back(n, m);
  }
  const std::string gname(group_name(G::id)), aname(action_name(kind));
  Table t{"checks", {"check", "group", "action", "beta", "N", "m", "lhs", "rhs", "margin", "status"}, {}};
  auto status = [](double margin, double tol) { return margin >= -tol ? "pass" : "fail"; };

  const int jobs = static_cast<int>(Ns.size() * pairs.size());
  struct Outcome {
    std::optional<HarnackReport> rep;
    std::string na;
  };
  const auto harnack = detail::parallel_map(jobs, [&](int j) {
    const int N = Ns[j / pairs.size()];
    const auto [n, m] = pairs[j % pairs.size()];
    Outcome out;
    try {
      out.rep = weak_harnack_check(family_member<G>(kind, beta, N), 1.0 / N, n, m, grid);
    } catch (const NotApplicable& e) {
      out.na = e.what();
    }
    return out;
  });
  bool hok = true;
  double hworst = std::numeric_limits<double>::infinity();
  for (int j = 0; j < jobs; ++j) {
    const int N = Ns[j / pairs.size()];
    const auto [n, m] = pairs[j % pairs.size()];
    const std::string tag = " n=" + std::to_string(n);
    if (!harnack[j].rep) {
      t.add("weak_harnack_grad" + tag, gname, aname, beta, N, m, 0.0, 0.0, 0.0, "n/a");
      hok = false;
      continue;
    }
    const auto& h = *harnack[j].rep;
    const double m1 = h.grad_rhs - h.grad_lhs;
    t.add("weak_harnack_grad" + tag, gname, aname, beta, N, m, h.grad_lhs, h.grad_rhs, m1, status(m1, htol));
    t.add("weak_harnack_rho" + tag, gname, aname, beta, N, m, h.rho_lhs, h.rho_rhs, h.rho_margin,
          status(h.rho_margin, htol));
    hok = hok && h.passed(htol);
    hworst = std::min({hworst, m1, h.rho_margin});
  }
  r.check("weak_harnack", hok, "min margin " + detail::fmt(hworst, 4));

  const auto sc = gradient_scaling_check<G>(kind, beta, sNs, ms, grid);
  for (const auto& pt : sc.points) {
    const double rhs = sc.constant * pt.bound;
    t.add("gradient_scaling", gname, aname, beta, pt.N, pt.m, pt.grad, rhs, rhs - pt.grad,
          status(rhs - pt.grad, 1e-12 * rhs));
  }
  for (std::size_t i = 0; i < sNs.size(); ++i) {
    const int N = sNs[i];
    t.add("scaling_constant", gname, aname, beta, N, 0, sc.constant_by_N[i], sc.constant, sc.constant - sc.constant_by_N[i], "info");
    t.add("p2_at_1_eps_D", gname, aname, beta, N, 0, sc.p2_at_1_scaled[i], 0.0, 0.0, "info");
    t.add("p2_inf_eps_D", gname, aname, beta, N, 0, sc.p2_inf_scaled[i], 0.0, 0.0, "info");
    t.add("carpet_grad_eps", gname, aname, beta, N, 0, sc.grad_eps_carpet[i], 0.0, 0.0, "info");
    const double off = std::abs(sc.crossover[i] - sc.predicted_crossover[i]);
    t.add("crossover", gname, aname, beta, N, 0, sc.crossover[i], sc.predicted_crossover[i], 1.0 - off,
          off <= 1.0 ? "pass" : "fail");
  }
  r.tables.push_back(std::move(t));
  r.check("gradient_scaling", sc.passed(spread),
          "constant " + detail::fmt(sc.constant, 4) + "; per-N constants, hypothesis ratios within factor " +
              detail::fmt(spread) + "; crossover within 1");
  return r;
}

template <class G>
RunResult run_assumption_check(const Params& p) {
  RunResult r;
  const auto kind = p.action();
  const double beta = p.positive_real("beta");
  const auto Ns = p.positive_ints("N");
  const double rad = p.positive_real("r");
  if (!(rad < pi)) p.fail("r", "must lie in (0, pi)");
  const double low = p.text("theta_low") == "auto"
                         ? (kind == ActionKind::Manton ? beta / 2.0 : 2.0 * beta / (pi * pi))
                         : p.real("theta_low");
  const double high = p.text("theta_high") == "auto" ? beta / 2.0 : p.real("theta_high");
  const double tol = p.real("tol");
  std::function<ClassFunction<G>(int)> fam = [&](int N) { return family_member<G>(kind, beta, N); };
  const auto rep = check_assumption_b<G>(fam, Ns, rad, low, high, default_assumption_grid<G>(), tol);
  Table t{"bounds",
          {"group", "action", "beta", "N", "theta_low", "theta_high", "lower_margin", "upper_margin", "unresolved"},
          {}};
  for (const auto& row : rep.rows)
    t.add(group_name(G::id), action_name(kind), beta, row.N, low, high, row.lower_margin, row.upper_margin,
          row.unresolved);
  r.tables.push_back(std::move(t));
  r.check("quadratic_bounds", rep.ok(), "theta_low " + detail::fmt(low) + ", theta_high " + detail::fmt(high));

  // -log density on U(1), independent of the group above
  const double pb = p.positive_real("pd_beta"), ptol = p.positive_real("pd_tol");
  Table pd{"positive_definite", {"action", "beta", "min_coeff", "argmin", "positive_definite"}, {}};
  std::map<ActionKind, PositiveDefiniteReport> res;
  for (auto k : {ActionKind::Wilson, ActionKind::Manton, ActionKind::Villain}) {
    res[k] = check_positive_definite(action_density<U1>(k, pb), 64, 4096, ptol);
    pd.add(action_name(k), pb, res[k].min_coeff, res[k].argmin, res[k].positive_definite);
  }
  r.tables.push_back(std::move(pd));
  r.check("villain_not_positive_definite", !res[ActionKind::Villain].positive_definite,
          "min coefficient " + detail::fmt(res[ActionKind::Villain].min_coeff, 4) + " < -" + detail::fmt(ptol));
  r.check("wilson_positive_definite", res[ActionKind::Wilson].positive_definite,
          "min coefficient " + detail::fmt(res[ActionKind::Wilson].min_coeff, 4) + " >= -" + detail::fmt(ptol));
  return r;
}

/// Validates the manifest against `name`'s schema and runs it.
inline RunResult run_experiment(const std::string& name, const Manifest& m, const RunOptions& o = {}) {
  const auto& info = experiment_info(name);
  const Params p(m, info);
  p.seed();
  if (o.chains < 0) throw ManifestError("chains must be >= 1");
  RunResult r;
  const auto any = {GroupId::U1, GroupId::SU2, GroupId::SU3};
  const auto rank1 = {GroupId::U1, GroupId::SU2};
  if (name == "villain-limit") {
    r = with_group(p.group(any), [&]<class G>() { return run_villain_limit<G>(p); });
  } else if (name == "carpet-equivalence") {
    r = with_group(p.group(rank1), [&]<class G>() {
      if constexpr (G::rank == 1) return run_carpet_equivalence<G>(p, o);
      else return RunResult{};
    });
  } else if (name == "planar-oracle") {
    r = with_group(p.group(rank1), [&]<class G>() {
      if constexpr (G::rank == 1) return run_planar_oracle<G>(p, o);
      else return RunResult{};
    });
  } else if (name == "ginibre") {
    r = run_ginibre(p, o);
  } else if (name == "moments") {
    r = with_group(p.group(rank1), [&]<class G>() {
      if constexpr (G::rank == 1) return run_moments<G>(p);
      else return RunResult{};
    });
  } else if (name == "gradient-bounds") {
    r = with_group(p.group(rank1), [&]<class G>() {
      if constexpr (G::rank == 1) return run_gradient_bounds<G>(p);
      else return RunResult{};
    });
  } else if (name == "assumption-check") {
    r = with_group(p.group(any), [&]<class G>() { return run_assumption_check<G>(p); });
  }
  r.experiment = name;
  return r;
}

/// Experiment named by the manifest's `experiment` key.
inline RunResult run_experiment(const Manifest& m, const RunOptions& o = {}) {
  if (!m.has("experiment")) throw ManifestError("manifest has no 'experiment' key");
  return run_experiment(m.value("experiment"), m, o);
}

// ---------------------------------------------------------------------------
// Artifacts

inline std::string utc_timestamp() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// '#' header (manifest echo, hash, timestamp), then the CSV body; every
/// body row ends with the manifest hash.
inline void write_table(std::ostream& os, const Table& t, const Manifest& m, const std::string& experiment,
                        const std::string& timestamp) {
  os << "# experiment: " << experiment << '\n' << "# table: " << t.name << '\n';
  os << "# generated: " << timestamp << '\n' << "# manifest_hash: " << m.hash_hex() << '\n';
  std::istringstream is(m.text());
  std::string line;
  while (std::getline(is, line)) os << "# manifest: " << line << '\n';
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << t.columns[i] << ',';
  os << "manifest_hash\n";
  auto quote = [](const std::string& c) {
    if (c.find_first_of(",\"\n") == std::string::npos) return c;
    std::string q = "\"";
    for (char ch : c) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
  };
  for (const auto& row : t.rows) {
    for (const auto& c : row) os << quote(c) << ',';
    os << m.hash_hex() << '\n';
  }
}

inline Table summary_table(const RunResult& r) {
  Table t{"summary", {"check", "status", "detail"}, {}};
  for (const auto& c : r.checks) t.add(c.name, verdict_name(c.verdict), c.detail);
  return t;
}

/// Writes <dir>/<experiment>_<table>.csv for every table plus the summary.
inline std::vector<std::filesystem::path> write_artifacts(const RunResult& r, const Manifest& m,
                                                          const std::filesystem::path& dir,
                                                          const std::string& timestamp = utc_timestamp()) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> out;
  std::vector<Table> all = r.tables;
  all.push_back(summary_table(r));
  for (const auto& t : all) {
    const auto path = dir / (r.experiment + "_" + t.name + ".csv");
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    write_table(os, t, m, r.experiment, timestamp);
    out.push_back(path);
  }
  return out;
}

/// Lines not starting with '#'.
inline std::string csv_body(std::istream& is) {
  std::string line, out;
  while (std::getline(is, line))
    if (line.empty() || line[0] != '#') out += line + '\n';
  return out;
}

}  // namespace carpet
