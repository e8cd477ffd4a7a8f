#pragma once

// Command-line driver. Every subcommand reads a graph description file and
// writes tab-separated tables to standard output or --out.
//
//   spectrum  <graph> --kmax <r>
//   modes     <graph> --n <N> [--samples <s>]
//   interlace <graph> --vertex <id> --alphas <a0,a1,...> [--n <N>]
//   generic   <graph> --trials <t> --eps <e> --n <N> --seed <s>
//   manifold  <graph> --res <r> [--mesh <path>] [--field <path>]
//   trace     <graph> --leaf <id> --start <n> --turns <even> [--steps <s>]
//
// Exit codes: 0 success, 1 invalid input or usage, 2 failed numerical check.

#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "qgraph/eigenmode.hpp"
#include "qgraph/error.hpp"
#include "qgraph/genericity.hpp"
#include "qgraph/graph_io.hpp"
#include "qgraph/manifold.hpp"
#include "qgraph/spectral.hpp"

namespace qgraph::cli {

enum ExitCode : int { Success = 0, InvalidInput = 1, NumericalFailure = 2 };

inline constexpr std::uint64_t default_seed = 20240917;

struct RunConfig {
  std::string subcommand;
  std::string graph_path;
  std::string out_path;
  double k_max = 10.0;
  std::size_t n = 12;
  std::size_t samples = 9;
  std::string vertex;
  std::string alphas;
  std::size_t trials = 100;
  double epsilon = 0.01;
  std::uint64_t seed = default_seed;
  std::size_t resolution = 128;
  std::string mesh_path;
  std::string field_path;
  std::string leaf;
  std::size_t start = 3;
  int turns = 2;
  std::size_t steps = 200;
  unsigned threads = 1;
};

inline constexpr const char* grammar =
    "usage:\n"
    "  qgraph spectrum  <graph> --kmax <r>\n"
    "  qgraph modes     <graph> --n <N> [--samples <s>]\n"
    "  qgraph interlace <graph> --vertex <id> --alphas <a0,a1,...> [--n <N>]\n"
    "  qgraph generic   <graph> --trials <t> --eps <e> --n <N> --seed <s>\n"
    "  qgraph manifold  <graph> --res <r> [--mesh <path>] [--field <path>]\n"
    "  qgraph trace     <graph> --leaf <id> --start <n> --turns <even> [--steps <s>]\n"
    "common options: --out <path> --threads <t>\n";

inline std::string num(double x) {
  if (x == 0.0) return "0";
  return fmt::format("{:.12g}", x);
}

// "0,inf,-1.5" -> {0, +inf, -1.5}.
inline std::vector<double> parse_alpha_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (item == "inf" || item == "+inf" || item == "dirichlet") {
      out.push_back(std::numeric_limits<double>::infinity());
      continue;
    }
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || !std::isfinite(value))
      throw Error(Errc::ParseError, "bad alpha '" + item + "'");
    out.push_back(value);
  }
  if (out.size() < 2) throw Error(Errc::InvalidArgument, "--alphas needs at least two values");
  return out;
}

inline std::string support_name(SupportKind kind) {
  switch (kind) {
    case SupportKind::NonvanishingOnVertices: return "nonvanishing";
    case SupportKind::VanishesAtVertices: return "vanishes_at_vertex";
    case SupportKind::LoopSupported: return "loop";
  }
  return "unknown";
}

inline int run_spectrum(const RunConfig& cfg, const MetricGraph& g, std::ostream& out) {
  const auto records = scan_spectrum(g, cfg.k_max);
  out << "index\tk\tlambda\tmultiplicity\n";
  for (const auto& r : records)
    out << r.first_index << '\t' << num(r.signed_k()) << '\t' << num(r.lambda) << '\t'
        << r.multiplicity << '\n';
  return Success;
}

inline int run_modes(const RunConfig& cfg, const MetricGraph& g, std::ostream& out) {
  out << "index\tlambda\tsupport\tedge\tx\tf\n";
  const std::size_t samples = std::max<std::size_t>(cfg.samples, 2);
  for (const auto& rec : first_eigenvalues(g, cfg.n)) {
    for (const EigenFunction& f : eigenfunctions_at(g, rec)) {
      if (f.index() >= cfg.n) continue;
      const std::string support = support_name(f.support().kind);
      for (std::size_t e = 0; e < g.edge_count(); ++e) {
        const double length = g.edge(e).length;
        for (std::size_t i = 0; i < samples; ++i) {
          const double x = length * static_cast<double>(i) / static_cast<double>(samples - 1);
          out << f.index() << '\t' << num(f.lambda()) << '\t' << support << '\t' << g.edge(e).id
              << '\t' << num(x) << '\t' << num(f.value_on(e, x)) << '\n';
        }
      }
    }
  }
  return Success;
}

inline int run_interlace(const RunConfig& cfg, const MetricGraph& g, std::ostream& out,
                         std::ostream& err) {
  if (cfg.vertex.empty()) throw Error(Errc::InvalidArgument, "--vertex is required");
  const std::vector<double> alphas = parse_alpha_list(cfg.alphas);
  std::vector<std::pair<double, double>> pairs;
  for (std::size_t i = 0; i + 1 < alphas.size(); ++i) pairs.emplace_back(alphas[i], alphas[i + 1]);
  const auto results = verify_interlacing(g, cfg.vertex, pairs, cfg.n);

  out << "alpha\talpha_prime\tindex\tlambda\tlambda_prime\tmargin\n";
  bool violated = false;
  for (const auto& r : results) {
    const auto& A = r.spectrum;
    const auto& B = r.spectrum_prime;
    for (std::size_t i = 0; i < A.size(); ++i) {
      const double inf = std::numeric_limits<double>::infinity();
      double lower = 0.0, upper = 0.0;
      if (!r.reversed) {
        lower = i == 0 ? -inf : B[i - 1];
        upper = i < B.size() ? B[i] : inf;
      } else {
        lower = i < B.size() ? B[i] : -inf;
        upper = i + 1 < B.size() ? B[i + 1] : inf;
      }
      const double margin = std::min(A[i] - lower, upper - A[i]);
      violated = violated || margin < -1e-9;
      out << num(r.alpha) << '\t' << num(r.alpha_prime) << '\t' << i << '\t' << num(A[i]) << '\t'
          << (i < B.size() ? num(B[i]) : std::string("nan")) << '\t' << num(margin) << '\n';
    }
    if (!r.strict_failures.empty())
      err << "strict interlacing failed at " << r.strict_failures.size() << " indices for ("
          << num(r.alpha) << ", " << num(r.alpha_prime) << ")\n";
  }
  if (violated) {
    err << "error: interlacing violated\n";
    return NumericalFailure;
  }
  return Success;
}

inline int run_generic(const RunConfig& cfg, const MetricGraph& g, std::ostream& out,
                       std::ostream& err) {
  const TrialSummary s =
      randomized_genericity_trial(g, cfg.trials, cfg.epsilon, cfg.n, cfg.seed, cfg.threads);
  out << "trials\tpassed\tfraction\tseed\teps\tn\n";
  out << s.trials << '\t' << s.passed << '\t'
      << (s.fraction ? num(*s.fraction) : std::string("nan")) << '\t' << cfg.seed << '\t'
      << num(cfg.epsilon) << '\t' << cfg.n << '\n';
  for (std::size_t i = 0; i < s.failed_seeds.size(); ++i)
    err << "seed " << s.failed_seeds[i] << ": " << s.failure_reasons[i] << '\n';
  return Success;
}

inline int run_manifold(const RunConfig& cfg, const MetricGraph& g, std::ostream& out) {
  TorusField field = sample_field(g, cfg.resolution, cfg.threads);
  classify_points(field, g);
  const ComponentResult cc = connected_components(field);
  const SignAgreement signs = gradient_sign_labels(field);
  std::size_t singular = 0;
  for (const ZeroCell& z : field.zero_cells()) singular += z.singular ? 1 : 0;

  out << "components: " << cc.count << '\n';
  out << "resolution: " << cfg.resolution << '\n';
  out << "zero_cells: " << field.zero_cells().size() << '\n';
  out << "singular_cells: " << singular << '\n';
  out << "singular_confirmed: " << field.singular_confirmed << '/' << field.singular_checked << '\n';
  out << "sign_agreement: " << num(signs.fraction()) << '\n';
  out << "component\tcells\tsign\n";
  for (std::size_t c = 0; c < cc.count; ++c)
    out << c + 1 << '\t' << cc.cells_per_component[c] << '\t' << signs.component_sign[c] << '\n';

  if (!cfg.field_path.empty()) {
    std::ofstream f(cfg.field_path);
    if (!f) throw Error(Errc::IoError, "cannot write '" + cfg.field_path + "'");
    write_field(f, field);
  }
  if (!cfg.mesh_path.empty()) export_mesh(field, cfg.mesh_path);
  return Success;
}

inline int run_trace(const RunConfig& cfg, const MetricGraph& g, std::ostream& out) {
  if (cfg.leaf.empty()) throw Error(Errc::InvalidArgument, "--leaf is required");
  const ThetaPath path = trace_theta_path(g, cfg.leaf, cfg.start, cfg.turns, cfg.steps);
  out << "start_index: " << path.start_index << '\n';
  out << "end_index: " << path.end_index << '\n';
  out << "max_residual: " << num(path.max_residual()) << '\n';
  out << "theta\tlambda\textended_length";
  for (std::size_t e = 0; e < g.edge_count(); ++e) out << "\tkappa" << e + 1;
  out << "\tresidual\n";
  for (const ThetaSample& s : path.samples) {
    out << num(s.theta) << '\t' << num(s.lambda) << '\t' << num(s.extended_length);
    for (double x : s.torus_point) out << '\t' << num(x);
    out << '\t' << num(s.phi_residual) << '\n';
  }
  return Success;
}

inline int dispatch(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const MetricGraph g = read_graph_file(cfg.graph_path);
  if (cfg.subcommand == "spectrum") return run_spectrum(cfg, g, out);
  if (cfg.subcommand == "modes") return run_modes(cfg, g, out);
  if (cfg.subcommand == "interlace") return run_interlace(cfg, g, out, err);
  if (cfg.subcommand == "generic") return run_generic(cfg, g, out, err);
  if (cfg.subcommand == "manifold") return run_manifold(cfg, g, out);
  if (cfg.subcommand == "trace") return run_trace(cfg, g, out);
  throw Error(Errc::InvalidArgument, "unknown subcommand '" + cfg.subcommand + "'");
}

// args excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"Spectra of quantum graphs with delta-type vertex conditions", "qgraph"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  auto common = [&](CLI::App* sub) {
    sub->add_option("graph", cfg.graph_path, "Graph description file")->required();
    sub->add_option("--out", cfg.out_path, "Write the table here instead of stdout");
    sub->add_option("--threads", cfg.threads, "Worker threads")->check(CLI::PositiveNumber);
  };

  auto* spectrum = app.add_subcommand("spectrum", "Eigenvalues with k <= kmax");
  common(spectrum);
  spectrum->add_option("--kmax", cfg.k_max, "Upper bound on sqrt(lambda)")->capture_default_str();

  auto* modes = app.add_subcommand("modes", "First N eigenfunctions sampled along each edge");
  common(modes);
  modes->add_option("--n", cfg.n, "Number of eigenfunctions")->capture_default_str();
  modes->add_option("--samples", cfg.samples, "Samples per edge")->capture_default_str();

  auto* interlace = app.add_subcommand("interlace", "Interlacing under a change of one coefficient");
  common(interlace);
  interlace->add_option("--vertex", cfg.vertex, "Vertex whose coefficient varies")->required();
  interlace->add_option("--alphas", cfg.alphas, "Comma-separated coefficients; inf is Dirichlet")
      ->required();
  interlace->add_option("--n", cfg.n, "Eigenvalues compared per pair")->default_val(20);

  auto* generic = app.add_subcommand("generic", "Randomized genericity trials");
  common(generic);
  generic->add_option("--trials", cfg.trials, "Number of perturbations")->capture_default_str();
  generic->add_option("--eps", cfg.epsilon, "Maximal length perturbation")->capture_default_str();
  generic->add_option("--n", cfg.n, "Eigenvalues examined per trial")->capture_default_str();
  generic->add_option("--seed", cfg.seed, "Seed of the first trial")->capture_default_str();

  auto* manifold = app.add_subcommand("manifold", "Components of the secular manifold");
  common(manifold);
  manifold->add_option("--res", cfg.resolution, "Grid points per torus axis")->capture_default_str();
  manifold->add_option("--mesh", cfg.mesh_path, "Write a triangle mesh (three edges only)");
  manifold->add_option("--field", cfg.field_path, "Write the sampled torus function");

  auto* trace = app.add_subcommand("trace", "Follow an eigenvalue as the leaf condition turns");
  common(trace);
  trace->add_option("--leaf", cfg.leaf, "Degree-one vertex")->required();
  trace->add_option("--start", cfg.start, "0-based index of the starting eigenvalue")
      ->capture_default_str();
  trace->add_option("--turns", cfg.turns, "Even number of full turns")->capture_default_str();
  trace->add_option("--steps", cfg.steps, "Samples per turn")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return Success;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return Success;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << grammar;
    return InvalidInput;
  }
  for (auto* sub : app.get_subcommands()) cfg.subcommand = sub->get_name();

  try {
    if (cfg.out_path.empty()) return dispatch(cfg, out, err);
    std::ofstream file(cfg.out_path);
    if (!file) throw Error(Errc::IoError, "cannot write '" + cfg.out_path + "'");
    const int code = dispatch(cfg, file, err);
    if (!file) throw Error(Errc::IoError, "write to '" + cfg.out_path + "' failed");
    return code;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return is_numerical_failure(e.code()) ? NumericalFailure : InvalidInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return InvalidInput;
  }
}

}  // namespace qgraph::cli
