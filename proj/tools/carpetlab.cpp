// carpetlab: run named experiments, inspect planar graphs, tabulate densities.
//
//   carpetlab list
//   carpetlab describe ginibre
//   carpetlab run villain-limit group=U1 action=wilson beta=1 N=2,4,8,16 seed=1
//   carpetlab run --manifest manifests/ginibre.txt --chains 4
//   carpetlab graph manifests/graphs/fig2.txt
//   carpetlab density --group SU2 --action villain --beta 2
//
// Exit codes: 0 pass, 1 acceptance failure or runtime error, 2 usage or
// manifest error.

#include "carpetlab/experiments.hpp"

#include <CLI11.hpp>

#include <iostream>

#ifndef CARPETLAB_DATA_DIR
#define CARPETLAB_DATA_DIR ""
#endif

using namespace carpet;

namespace {

int cmd_run(const std::string& name, const std::vector<std::string>& pairs, const std::string& manifest_file,
            const std::string& out, int chains, bool quiet) {
  Manifest m = manifest_file.empty() ? Manifest() : Manifest::load(manifest_file);
  for (const auto& kv : pairs) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw ManifestError("expected key=value, got '" + kv + "'");
    m.append(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!name.empty() && !m.has("experiment")) m.append("experiment", name);
  if (chains > 0) {
    if (m.has("chains")) throw ManifestError("chains given both in the manifest and on the command line");
    m.append("chains", std::to_string(chains));
  }
  if (!m.has("experiment")) throw ManifestError("no experiment named (positional name or experiment=...)");
  const std::string exp = name.empty() ? m.value("experiment") : name;

  RunOptions opt;
  opt.search.emplace_back(".");
  if (std::string(CARPETLAB_DATA_DIR).size()) opt.search.emplace_back(CARPETLAB_DATA_DIR);
  const auto t0 = std::chrono::steady_clock::now();
  RunResult r;
  try {
    r = run_experiment(exp, m, opt);
  } catch (const std::invalid_argument&) {
    throw;
  } catch (const std::exception& e) {
    std::cerr << "error: " << exp << ": " << e.what() << '\n';
    return 1;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const std::filesystem::path dir = !out.empty() ? out : (m.has("out") ? m.value("out") : "out");
  const auto files = write_artifacts(r, m, dir);
  if (!quiet) {
    for (const auto& c : r.checks) std::cout << std::left << std::setw(13) << verdict_name(c.verdict) << c.name << "  " << c.detail << '\n';
    std::cout << exp << ": " << (r.passed() ? "PASS" : "FAIL") << " in " << std::setprecision(3) << secs << " s, "
              << files.size() << " files in " << dir.string() << " (manifest " << m.hash_hex() << ")\n";
  }
  return r.exit_code();
}

int cmd_graph(const std::string& file, const std::string& group) {
  return with_group(parse_group(group), [&]<class G>() {
    if constexpr (G::id == GroupId::SU3) {
      throw std::invalid_argument("graph inspection supports U1 and SU2");
      return 2;
    } else {
      std::ifstream is(file);
      if (!is) throw std::invalid_argument("cannot open " + file);
      const auto g = PlanarGaugeGraph<G>::parse(is);
      std::cout << "vertices " << g.num_vertices() << "\nedges " << g.num_edges() << "\nfaces " << g.num_faces()
                << "\nboundary edges";
      for (int e : g.boundary_edges()) std::cout << ' ' << e;
      std::cout << "\ninternal edges";
      for (int e : g.internal_edges()) std::cout << ' ' << e;
      std::cout << '\n';
      return 0;
    }
  });
}

int cmd_density(const std::string& group, const std::string& action, double beta, int cutoff) {
  const auto kind = parse_action(action);
  with_group(parse_group(group), [&]<class G>() {
    const auto t = cutoff > 0 ? irrep_table<G>(cutoff) : irrep_table<G>();
    write_csv(std::cout, action_density<G>(kind, beta, t));
  });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"carpetlab: lattice gauge refinement experiments"};
  app.require_subcommand(1);

  auto* list = app.add_subcommand("list", "list experiment names");
  auto* describe = app.add_subcommand("describe", "print an experiment's manifest keys");
  std::string describe_name;
  describe->add_option("name", describe_name, "experiment name")->required();

  auto* run = app.add_subcommand("run", "run an experiment");
  std::string run_name, manifest_file, out;
  std::vector<std::string> pairs;
  int chains = 0;
  bool quiet = false;
  run->add_option("--manifest,-m", manifest_file, "manifest file")->check(CLI::ExistingFile);
  run->add_option("--out,-o", out, "output directory (overrides out=)");
  run->add_option("--chains", chains, "independent chains per estimate")->check(CLI::PositiveNumber);
  run->add_flag("--quiet,-q", quiet, "no summary on stdout");
  run->add_option("args", pairs, "[name] key=value ...");

  auto* graph = app.add_subcommand("graph", "validate a planar graph file and print its counts");
  std::string graph_file, graph_group = "U1";
  graph->add_option("file", graph_file, "graph file")->required();
  graph->add_option("--group", graph_group, "U1 | SU2");

  auto* density = app.add_subcommand("density", "character coefficients of an action density as CSV");
  std::string dgroup = "U1", daction = "wilson";
  double dbeta = 1.0;
  int dcutoff = 0;
  density->add_option("--group", dgroup, "U1 | SU2 | SU3");
  density->add_option("--action", daction, "wilson | manton | villain");
  density->add_option("--beta", dbeta, "coupling")->required();
  density->add_option("--cutoff", dcutoff, "irrep cutoff (0: default)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*list) {
      for (const auto& e : experiment_catalog()) std::cout << e.name << '\n';
      return 0;
    }
    if (*describe) {
      std::cout << describe_experiment(experiment_info(describe_name));
      return 0;
    }
    if (*run) {
      if (!pairs.empty() && pairs[0].find('=') == std::string::npos) {
        run_name = pairs[0];
        pairs.erase(pairs.begin());
        experiment_info(run_name);
      }
      return cmd_run(run_name, pairs, manifest_file, out, chains, quiet);
    }
    if (*graph) return cmd_graph(graph_file, graph_group);
    if (*density) return cmd_density(dgroup, daction, dbeta, dcutoff);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
