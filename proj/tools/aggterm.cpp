#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "aggterm/architectures.hpp"
#include "aggterm/config_io.hpp"
#include "aggterm/error.hpp"
#include "aggterm/eval.hpp"
#include "aggterm/harness.hpp"
#include "aggterm/limits.hpp"
#include "aggterm/parser.hpp"

using namespace aggterm;

namespace {

constexpr int kConfigExit = 2;
constexpr int kRuntimeExit = 3;

struct SubjectArgs {
  std::string term_file;
  std::string arch_file;
};

struct LoadedSubject {
  Subject subject;
  FeatureDistSpec features;
  std::optional<ArchConfig> arch;
};

struct ModelDoc {
  GraphModelSpec spec;
  std::optional<FeatureDistSpec> features;
};

ModelDoc load_model(const std::string& path) {
  const Json doc = read_json_file(path);
  return {model_from_json(doc), model_features(doc)};
}

LoadedSubject load_subject(const SubjectArgs& args, const std::optional<FeatureDistSpec>& features) {
  if (args.term_file.empty() == args.arch_file.empty())
    throw ConfigError("give exactly one of --term and --arch");
  if (!args.arch_file.empty()) {
    const ArchConfig arch = arch_from_json(read_json_file(args.arch_file));
    FeatureDistSpec dist = features.value_or(FeatureDistSpec::uniform01(arch.input_dim));
    if (dist.dim != arch.input_dim)
      throw ConfigError("feature dimension " + std::to_string(dist.dim) + " does not match the architecture's input_dim " +
                        std::to_string(arch.input_dim));
    const CompiledModel model = compile(arch, init_weights(arch));
    return {Subject::from_model(model, to_json(arch).dump()), dist, arch};
  }
  const FeatureDistSpec dist = features.value_or(FeatureDistSpec::uniform01(1));
  auto registry = FunctionRegistry::with_builtins();
  TermPtr term = parse_term(read_text_file(args.term_file), registry);
  return {Subject::from_term(term, registry, dist.dim), dist, std::nullopt};
}

std::vector<int> parse_sizes(const std::string& text) {
  std::vector<int> sizes;
  std::stringstream in(text);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    try {
      std::size_t used = 0;
      sizes.push_back(std::stoi(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw ConfigError("--sizes expects comma-separated integers, got '" + cell + "'");
    }
  }
  return sizes;
}

template <class Writer>
void emit(const std::string& path, Writer&& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write(out);
  if (!out) throw Error("failed writing '" + path + "'");
}

void write_provenance(const std::string& out_path, const SweepReport& report) {
  Json j{{"config_hash", report.provenance.config_hash},
         {"seed", report.provenance.seed},
         {"version", report.provenance.version}};
  std::cerr << "provenance: " << j.dump() << '\n';
  if (!out_path.empty() && out_path != "-") emit(out_path + ".provenance.json", [&](std::ostream& o) { o << j.dump(2) << '\n'; });
}

void write_controller(const std::string& path, const ControllerValue& v, std::optional<double> truncated) {
  emit(path, [&](std::ostream& o) {
    o << "dim,estimate,stderr,mc_samples,truncated_mass\n";
    for (Eigen::Index i = 0; i < v.estimate.size(); ++i) {
      o << i << ',' << format_real(v.estimate[i]) << ',' << format_real(v.stderr_[i]) << ',' << v.mc_samples << ',';
      if (truncated) o << format_real(*truncated);
      o << '\n';
    }
  });
}

struct LimitArgs {
  std::string mode = "dense";
  std::int64_t mc = 10000;
  std::int64_t nested_mc = 32;
  double eps = 0.05;
  int census_n = 5000;
  int census_graphs = 10;
};

std::pair<ControllerValue, std::optional<double>> compute_limit(const LoadedSubject& s, const GraphModelSpec& model,
                                                                const LimitArgs& args, std::uint64_t seed) {
  if (args.mode == "dense") {
    DenseControllerOptions o;
    o.mc_samples = args.mc;
    o.nested_mc = args.nested_mc;
    o.seed = seed;
    o.dim = s.subject.dim;
    auto v = dense_controller(s.subject.term, s.subject.registry, DenseModel::from_spec(model), s.features, o);
    v.estimate = v.estimate.head(s.subject.outputs).eval();
    v.stderr_ = v.stderr_.head(s.subject.outputs).eval();
    return {v, std::nullopt};
  }
  if (args.mode == "sparse") {
    SparseLimitOptions o;
    o.mc_samples = args.mc;
    o.nested_mc = args.nested_mc;
    o.eps = args.eps;
    o.seed = seed;
    o.dim = s.subject.dim;
    o.census.n = args.census_n;
    o.census.graphs = args.census_graphs;
    o.census.seed = seed;
    auto r = sparse_limit(s.subject.term, s.subject.registry, model, s.features, o);
    r.value.estimate = r.value.estimate.head(s.subject.outputs).eval();
    r.value.stderr_ = r.value.stderr_.head(s.subject.outputs).eval();
    return {r.value, r.truncated_mass};
  }
  throw ConfigError("--mode must be dense or sparse");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Aggregate-term workbench: random graphs, term evaluation, limits and convergence sweeps"};
  app.require_subcommand(1);

  std::string model_file, out, graph_file, plot, summary, sizes_text = "100,300,1000,3000";
  SubjectArgs subject;
  std::uint64_t seed = 0;
  int n = 100, samples = 30, workers = 0;
  bool nodewise = false;
  LimitArgs limit;
  std::string sweep_limit = "none";

  auto* gen = app.add_subcommand("gen", "Sample a graph and write it in the text graph format");
  gen->add_option("--model", model_file, "Model JSON file")->required();
  gen->add_option("--n", n, "Number of nodes")->check(CLI::PositiveNumber);
  gen->add_option("--seed", seed, "Random seed");
  gen->add_option("--out", out, "Output graph file (default stdout)");

  auto* eval = app.add_subcommand("eval", "Evaluate a term or architecture on a graph");
  eval->add_option("--term", subject.term_file, "Term file");
  eval->add_option("--arch", subject.arch_file, "Architecture JSON file");
  eval->add_option("--graph", graph_file, "Graph file");
  eval->add_option("--model", model_file, "Model JSON file (used when no --graph is given)");
  eval->add_option("--n", n, "Number of nodes for a sampled graph")->check(CLI::PositiveNumber);
  eval->add_option("--seed", seed, "Random seed");
  eval->add_flag("--nodewise", nodewise, "Evaluate a one-variable term at every node");
  eval->add_option("--out", out, "Output CSV (default stdout)");

  auto* lim = app.add_subcommand("limit", "Predict the limit value of a closed term");
  lim->add_option("--term", subject.term_file, "Term file");
  lim->add_option("--arch", subject.arch_file, "Architecture JSON file");
  lim->add_option("--model", model_file, "Model JSON file")->required();
  lim->add_option("--mode", limit.mode, "dense or sparse")->check(CLI::IsMember({"dense", "sparse"}));
  lim->add_option("--mc", limit.mc, "Monte-Carlo samples");
  lim->add_option("--nested-mc", limit.nested_mc, "Samples for context-dependent inner aggregates");
  lim->add_option("--eps", limit.eps, "Neighborhood mass that may be left out (sparse)");
  lim->add_option("--census-n", limit.census_n, "Graph size for the neighborhood census (sparse)");
  lim->add_option("--census-graphs", limit.census_graphs, "Graphs in the neighborhood census (sparse)");
  lim->add_option("--seed", seed, "Random seed");
  lim->add_option("--out", out, "Output CSV (default stdout)");

  int radius = 1, roots = 1, graphs = 10, tuples = 0, cap = kDefaultCodeSizeCap;
  auto* cen = app.add_subcommand("census", "Tabulate rooted neighborhood types of a sparse model");
  cen->add_option("--model", model_file, "Model JSON file")->required();
  cen->add_option("--n", n, "Graph size")->check(CLI::PositiveNumber);
  cen->add_option("--radius", radius, "Neighborhood radius");
  cen->add_option("--roots", roots, "Roots per tuple");
  cen->add_option("--graphs", graphs, "Number of sampled graphs");
  cen->add_option("--tuples", tuples, "Root tuples per graph (0: every node, single roots only)");
  cen->add_option("--cap", cap, "Largest neighborhood to canonicalize");
  cen->add_option("--seed", seed, "Random seed");
  cen->add_option("--workers", workers, "Worker threads (0: all cores)");
  cen->add_option("--out", out, "Output CSV (default stdout)");

  auto add_sweep_options = [&](CLI::App* cmd) {
    cmd->add_option("--term", subject.term_file, "Term file");
    cmd->add_option("--sizes", sizes_text, "Comma-separated ascending graph sizes");
    cmd->add_option("--samples", samples, "Samples per size")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", seed, "Master seed");
    cmd->add_option("--workers", workers, "Worker threads (0: all cores)");
    cmd->add_option("--out", out, "Per-sample CSV (default stdout)");
    cmd->add_option("--summary", summary, "Per-size summary CSV");
    cmd->add_option("--plot", plot, "SVG plot of means with one-std bands");
  };
  auto* sweep = app.add_subcommand("sweep", "Evaluate a subject on graphs of increasing size");
  sweep->add_option("--model", model_file, "Model JSON file")->required();
  sweep->add_option("--arch", subject.arch_file, "Architecture JSON file");
  sweep->add_option("--limit", sweep_limit, "Reference limit: none, dense or sparse")
      ->check(CLI::IsMember({"none", "dense", "sparse"}));
  sweep->add_option("--mc", limit.mc, "Monte-Carlo samples for the reference limit");
  add_sweep_options(sweep);

  auto* diverge = app.add_subcommand("diverge", "Isolated-node share under an alternating edge probability");
  diverge->add_option("--model", model_file, "Model JSON file (default: p = 1/2 on even n, 1/n on odd n)");
  add_sweep_options(diverge);

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e);
      return code == 0 ? 0 : kConfigExit;
    }

    if (*gen) {
      const ModelDoc m = load_model(model_file);
      FeaturedGraph g = sample_graph(m.spec, n, seed);
      if (m.features) g = attach_features(g, *m.features, seed);
      emit(out, [&](std::ostream& o) { write_graph(o, g); });
    } else if (*eval) {
      std::optional<ModelDoc> m;
      if (!model_file.empty()) m = load_model(model_file);
      const LoadedSubject s = load_subject(subject, m ? m->features : std::nullopt);
      FeaturedGraph g;
      if (!graph_file.empty()) {
        std::ifstream in(graph_file);
        if (!in) throw ConfigError("cannot read '" + graph_file + "'");
        g = read_graph(in);
      } else if (m) {
        g = attach_features(sample_graph(m->spec, n, seed), s.features, seed);
      } else {
        throw ConfigError("give --graph or --model");
      }
      g = pad_features(g, s.subject.dim);
      EvalOptions options;
      options.dim = s.subject.dim;
      const Evaluator ev(s.subject.term, s.subject.registry, options);
      if (nodewise) {
        const FeatureMatrix values = ev.nodewise(g);
        emit(out, [&](std::ostream& o) {
          o << "node";
          for (int i = 0; i < s.subject.outputs; ++i) o << ",out_" << i;
          o << '\n';
          for (Eigen::Index v = 0; v < values.rows(); ++v) {
            o << v;
            for (int i = 0; i < s.subject.outputs; ++i) o << ',' << format_real(values(v, i));
            o << '\n';
          }
        });
      } else {
        const Vector value = ev.closed(g).head(s.subject.outputs);
        emit(out, [&](std::ostream& o) {
          o << "dim,value\n";
          for (Eigen::Index i = 0; i < value.size(); ++i) o << i << ',' << format_real(value[i]) << '\n';
        });
      }
    } else if (*lim) {
      const ModelDoc m = load_model(model_file);
      const LoadedSubject s = load_subject(subject, m.features);
      auto [value, truncated] = compute_limit(s, m.spec, limit, seed);
      write_controller(out, value, truncated);
    } else if (*cen) {
      const ModelDoc m = load_model(model_file);
      CensusConfig c;
      c.n = n;
      c.radius = radius;
      c.roots = roots;
      c.graphs = graphs;
      c.tuples_per_graph = tuples;
      c.size_cap = cap;
      c.seed = seed;
      c.workers = workers;
      const CensusTable table = neighborhood_census(m.spec, c);
      emit(out, [&](std::ostream& o) {
        o << "code,nodes,edges,root_degree,count,proportion\n";
        for (const auto& e : table.entries) {
          const RootedGraph rg = decode_code(e.code);
          o << e.code.hex() << ',' << rg.size() << ',' << rg.num_edges() << ',' << rg.root_degree() << ','
            << e.count << ',' << format_real(e.proportion) << '\n';
        }
      });
      std::cerr << "samples=" << table.samples << " overflow=" << table.overflow
                << " truncated_mass=" << format_real(table.truncated_mass) << '\n';
    } else if (*sweep || *diverge) {
      ModelDoc m;
      if (!model_file.empty()) {
        m = load_model(model_file);
      } else {
        m.spec.model = ErModel{Schedule::alternating(Schedule::dense(0.5), Schedule::sparse(1.0))};
      }
      SweepConfig config;
      LoadedSubject s;
      if (*diverge && subject.term_file.empty()) {
        const FeatureDistSpec dist = m.features.value_or(FeatureDistSpec::uniform01(1));
        s = {Subject::from_term(isolated_fraction_term(), FunctionRegistry::with_builtins(), dist.dim), dist,
             std::nullopt};
      } else {
        s = load_subject(subject, m.features);
      }
      config.subject = s.subject;
      config.model = m.spec;
      config.features = s.features;
      config.sizes = parse_sizes(sizes_text);
      config.samples = samples;
      config.seed = seed;
      config.workers = workers;
      if (*sweep && sweep_limit != "none") {
        limit.mode = sweep_limit;
        config.limit = compute_limit(s, m.spec, limit, seed).first.estimate;
      }
      const SweepReport report = *diverge ? diverge_demo(config) : run_sweep(config);
      emit(out, [&](std::ostream& o) { write_report_csv(o, report); });
      if (!summary.empty()) write_summary_csv(summary, report);
      if (!plot.empty()) write_plot_svg(plot, report);
      write_provenance(out, report);
      if (report.parity)
        std::cerr << "even_mean=" << format_real(report.parity->even_mean)
                  << " odd_mean=" << format_real(report.parity->odd_mean)
                  << " gap=" << format_real(report.parity->gap) << '\n';
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeExit;
  }
}
