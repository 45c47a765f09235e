// Acceptance suite: one PASS/FAIL line per criterion; nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>

#include "aggterm/architectures.hpp"
#include "aggterm/eval.hpp"
#include "aggterm/graph_type.hpp"
#include "aggterm/harness.hpp"
#include "aggterm/limits.hpp"
#include "aggterm/parser.hpp"
#include "aggterm/walks.hpp"
#include "support.hpp"

using namespace aggterm;
using testing_support::random_graph;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

const FunctionRegistry& builtins() {
  static const FunctionRegistry r = FunctionRegistry::with_builtins();
  return r;
}

std::string fmt(const char* format, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, x);
  return buf;
}

Outcome oracle_equivalence() {
  Outcome o;
  Stream rng(2024);
  const std::pair<ArchKind, const char*> kinds[] = {{ArchKind::MeanGNN, "MeanGNN"},
                                                    {ArchKind::GCN, "GCN"},
                                                    {ArchKind::GAT, "GAT"},
                                                    {ArchKind::GPS, "GPS"},
                                                    {ArchKind::GPS_RW, "GPS_RW"}};
  for (auto [kind, name] : kinds) {
    double worst = 0;
    for (int trial = 0; trial < 100; ++trial) {
      ArchConfig c;
      c.kind = kind;
      c.layers = 1 + static_cast<int>(rng.below(3));
      c.hidden = 4 + static_cast<int>(rng.below(13));
      c.classes = 2 + static_cast<int>(rng.below(4));
      c.input_dim = 1 + static_cast<int>(rng.below(4));
      if (kind == ArchKind::GPS_RW) c.rw_length = 1 + static_cast<int>(rng.below(4));
      c.activation = rng.bernoulli(0.5) ? Activation::Relu : Activation::Sigmoid;
      c.seed = rng.next_u64();
      const int n = 1 + static_cast<int>(rng.below(50));
      const int isolated = 1 + static_cast<int>(rng.below(std::min(n, 5)));
      auto g = random_graph(n, rng.uniform() * 0.3, c.input_dim, rng, isolated);
      auto w = init_weights(c);
      const Vector ref = reference_forward(c, w, g);
      const Vector got = run_compiled(compile(c, w), g);
      worst = std::max(worst, (ref - got).cwiseAbs().maxCoeff());
    }
    if (!(worst < 1e-9)) o.pass = false;
    o.detail += std::string(name) + " " + fmt("%.1e", worst) + "; ";
  }
  return o;
}

Outcome dense_analytic() {
  Outcome o;
  DenseControllerOptions opt;
  opt.mc_samples = 100000;
  opt.seed = 7;
  const auto u = FeatureDistSpec::uniform01(1);
  const std::pair<const char*, double> cases[] = {
      {"wmean[x](H(x), one)", 0.5},
      {"wmean[x](relu(add(scale2(H(x)), -1)), one)", 0.25},
      {"wmean[x](H(x), exp, H(x))", 1 / (std::exp(1.0) - 1)}};
  for (auto [text, expect] : cases) {
    auto v = dense_controller(parse_term(text, builtins(), {true}), builtins(), DenseModel::er(0.1), u, opt);
    const double err = std::abs(v.estimate[0] - expect);
    if (!(err <= std::max(0.005, 4 * v.stderr_[0]))) o.pass = false;
    o.detail += fmt("%.5f", v.estimate[0]) + " vs " + fmt("%.5f", expect) + "; ";
  }
  return o;
}

Outcome convergence_sweep() {
  Outcome o;
  for (std::uint64_t seed : {1, 2, 3}) {
    ArchConfig a;
    a.kind = ArchKind::MeanGNN;
    a.layers = 3;
    a.hidden = 16;
    a.classes = 5;
    a.input_dim = 1;
    a.seed = seed;
    auto model = compile(a, init_weights(a));
    DenseControllerOptions dopt;
    dopt.mc_samples = 10000;
    dopt.seed = seed;
    dopt.dim = model.dim;
    auto limit = dense_controller(model.term, model.registry, DenseModel::er(0.1),
                                  FeatureDistSpec::uniform01(1), dopt);
    SweepConfig c;
    c.subject = Subject::from_model(model);
    c.model = {ErModel{Schedule::dense(0.1)}};
    c.features = FeatureDistSpec::uniform01(1);
    c.sizes = {100, 300, 1000, 3000};
    c.samples = 30;
    c.seed = 100 + seed;
    c.limit = limit.estimate.head(a.classes);
    auto r = run_sweep(c);
    const double std_small = r.summary.front().std.mean();
    const double std_large = r.summary.back().std.mean();
    const double dist = (r.summary.back().mean - *c.limit).norm();
    const bool ok = std_large <= 0.25 * std_small && dist < 0.05;
    if (!ok) o.pass = false;
    o.detail += "seed " + std::to_string(seed) + ": std ratio " + fmt("%.3f", std_large / std_small) +
                ", dist " + fmt("%.2e", dist) + "; ";
  }
  return o;
}

Outcome divergence() {
  Outcome o;
  SweepConfig c;
  c.subject = Subject::from_term(isolated_fraction_term(), builtins(), 1);
  c.model = {ErModel{Schedule::alternating(Schedule::dense(0.5), Schedule::sparse(1))}};
  c.features = FeatureDistSpec::uniform01(1);
  c.sizes = {1000, 1001, 2000, 2001};
  c.samples = 10;
  c.seed = 4;
  auto r = diverge_demo(c);
  for (const auto& s : r.summary) {
    const double m = s.mean[0];
    const bool ok = s.size % 2 == 0 ? m < 0.01 : (m >= 0.33 && m <= 0.41);
    if (!ok) o.pass = false;
    o.detail += "n=" + std::to_string(s.size) + " " + fmt("%.4f", m) + "; ";
  }
  if (!(r.parity->gap > 0.30)) o.pass = false;
  o.detail += "gap " + fmt("%.4f", r.parity->gap);
  return o;
}

Outcome sparse_limits() {
  Outcome o;
  const double target = std::exp(-1.0);
  const GraphModelSpec model{ErModel{Schedule::sparse(1)}};
  double empirical = 0;
  for (int s = 0; s < 20; ++s) {
    auto g = gen_er(5000, Schedule::sparse(1), 1000 + s);
    int isolated = 0;
    for (int v = 0; v < g.num_nodes(); ++v) isolated += g.degree(v) == 0;
    empirical += isolated / 5000.0 / 20;
  }
  if (!(std::abs(empirical - target) < 0.02)) o.pass = false;
  o.detail += "empirical " + fmt("%.4f", empirical);

  SparseLimitOptions opt;
  opt.census.n = 5000;
  opt.census.graphs = 20;
  opt.census.seed = 5;
  auto r = sparse_limit(isolated_fraction_term(), builtins(), model, FeatureDistSpec::uniform01(1), opt);
  if (!(std::abs(r.value.estimate[0] - target) < 0.03)) o.pass = false;
  o.detail += "; sparse_limit " + fmt("%.4f", r.value.estimate[0]);

  CensusConfig cfg;
  cfg.n = 5000;
  cfg.graphs = 20;
  cfg.seed = 6;
  auto census = neighborhood_census(model, cfg);
  std::vector<double> profile(6, 0.0);
  for (const auto& e : census.entries) {
    const int d = decode_code(e.code).root_degree(0);
    if (d <= 5) profile[d] += e.proportion;
  }
  double worst = 0;
  for (int j = 0; j <= 5; ++j) {
    const double pmf = std::exp(-1.0 - std::lgamma(j + 1.0));
    worst = std::max(worst, std::abs(profile[j] - pmf));
  }
  if (!(worst < 0.02)) o.pass = false;
  o.detail += "; census max |dev| " + fmt("%.4f", worst);
  return o;
}

Outcome rw_zero() {
  Outcome o;
  auto mean_norm = [](int n, std::uint64_t seed) {
    auto g = gen_er(n, Schedule::dense(0.1), seed);
    Stream pick(seed + 1);
    double total = 0;
    for (int i = 0; i < 200; ++i) total += rw_encoding(g, static_cast<int>(pick.below(n)), 3).norm();
    return total / 200;
  };
  const double small = mean_norm(200, 11);
  const double large = mean_norm(2000, 12);
  o.pass = large < 0.05 && large < small;
  o.detail = "n=200 " + fmt("%.4f", small) + ", n=2000 " + fmt("%.4f", large);
  return o;
}

Outcome weight_sums() {
  Outcome o;
  double worst_exact = 0, worst_tenth = 0;
  for (int k = 0; k <= 6; ++k)
    for (const auto& t : all_types(k))
      for (double p : {0.0, 0.1, 0.5, 1.0}) {
        double total = 0;
        for (const auto& t2 : enumerate_extensions(t)) total += alpha_weight(t, t2, p);
        double& worst = p == 0.1 ? worst_tenth : worst_exact;
        worst = std::max(worst, std::abs(total - 1));
      }
  // 0.1 has no exact binary representation, so its sums can only be exact up to rounding.
  if (!(worst_exact == 0 && worst_tenth <= 8 * std::numeric_limits<double>::epsilon())) o.pass = false;
  o.detail = "max |sum - 1| " + fmt("%.1e", worst_exact) + " (p in {0, 0.5, 1}), " + fmt("%.1e", worst_tenth) +
             " (p = 0.1)";

  CensusConfig cfg;
  cfg.n = 3000;
  cfg.seed = 1;
  auto a = neighborhood_census({BaModel{5}}, cfg);
  cfg.seed = 2;
  auto b = neighborhood_census({BaModel{5}}, cfg);
  if (!(a.total() <= 1 + 1e-9 && b.total() <= 1 + 1e-9)) o.pass = false;
  double drift = 0;
  int compared = 0;
  for (const auto* t : {&a, &b})
    for (const auto& e : t->entries) {
      if (e.proportion <= 0.01) continue;
      drift = std::max(drift, std::abs(a.proportion(e.code) - b.proportion(e.code)));
      ++compared;
    }
  if (!(drift < 0.02)) o.pass = false;
  o.detail += "; BA census sums " + fmt("%.4f", a.total()) + "/" + fmt("%.4f", b.total()) +
              ", max drift " + fmt("%.4f", drift) + " over " + std::to_string(compared) + " types";
  return o;
}

Outcome language_properties() {
  Outcome o;
  testing_support::TermGen gen(99);
  int round_trip_failures = 0;
  for (int i = 0; i < 1000; ++i) {
    auto t = gen.any(1 + static_cast<int>(gen.rng().below(5)), {"x"});
    if (!(*parse_term(print_term(*t), builtins()) == *t)) ++round_trip_failures;
  }
  if (round_trip_failures) o.pass = false;
  o.detail = "round trip failures " + std::to_string(round_trip_failures);

  testing_support::ValueGen values(100);
  Stream rng(101);
  int hull_failures = 0;
  double worst_shift = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(30));
    auto g = random_graph(n, rng.uniform() * 0.5, 2, rng, static_cast<int>(rng.below(3)));
    auto value = values.node_term("y", static_cast<int>(rng.below(4)));
    auto weight = values.node_term("y", static_cast<int>(rng.below(4)));
    FeatureMatrix vals = eval_nodewise(*value, g, builtins());
    const bool local = trial % 2 == 0;
    const auto map = values.weight_map();
    if (local) {
      FeatureMatrix agg = eval_nodewise(*local_wmean("y", "x", value, map, weight), g, builtins());
      for (int v = 0; v < n; ++v)
        for (int j = 0; j < 2; ++j) {
          if (g.degree(v) == 0) {
            hull_failures += agg(v, j) != 0;
            continue;
          }
          double lo = INFINITY, hi = -INFINITY;
          for (int u : g.neighbors(v)) {
            lo = std::min(lo, vals(u, j));
            hi = std::max(hi, vals(u, j));
          }
          const double slack = 1e-12 * std::max(1.0, std::abs(lo) + std::abs(hi));
          hull_failures += agg(v, j) < lo - slack || agg(v, j) > hi + slack;
        }
    } else {
      Vector agg = eval_closed_batch(*global_wmean("y", value, map, weight), g, builtins());
      for (int j = 0; j < 2; ++j) {
        const double slack = 1e-12 * std::max(1.0, vals.col(j).cwiseAbs().maxCoeff());
        hull_failures += agg[j] < vals.col(j).minCoeff() - slack || agg[j] > vals.col(j).maxCoeff() + slack;
      }
    }
    auto shifted = apply("add", {weight, constant(100 * (2 * rng.uniform() - 1))});
    if (local) {
      FeatureMatrix a = eval_nodewise(*local_wmean("y", "x", value, "exp", weight), g, builtins());
      FeatureMatrix b = eval_nodewise(*local_wmean("y", "x", value, "exp", shifted), g, builtins());
      worst_shift = std::max(worst_shift, (a - b).cwiseAbs().maxCoeff() / std::max(1.0, a.cwiseAbs().maxCoeff()));
    } else {
      Vector a = eval_closed_batch(*global_wmean("y", value, "exp", weight), g, builtins());
      Vector b = eval_closed_batch(*global_wmean("y", value, "exp", shifted), g, builtins());
      worst_shift = std::max(worst_shift, (a - b).cwiseAbs().maxCoeff() / std::max(1.0, a.cwiseAbs().maxCoeff()));
    }
  }
  if (hull_failures || !(worst_shift <= 1e-12)) o.pass = false;
  o.detail += "; hull violations " + std::to_string(hull_failures) + "; max exp-shift change " +
              fmt("%.1e", worst_shift);

  std::map<int, std::string> csvs;
  for (int workers : {1, 4, 8}) {
    ArchConfig a;
    a.layers = 2;
    a.hidden = 8;
    a.input_dim = 1;
    a.seed = 3;
    SweepConfig c;
    c.subject = Subject::from_model(compile(a, init_weights(a)));
    c.model = {ErModel{Schedule::dense(0.1)}};
    c.features = FeatureDistSpec::uniform01(1);
    c.sizes = {50, 150};
    c.samples = 8;
    c.seed = 42;
    c.workers = workers;
    std::ostringstream out;
    write_report_csv(out, run_sweep(c));
    csvs[workers] = out.str();
  }
  const bool identical = csvs[1] == csvs[4] && csvs[1] == csvs[8];
  if (!identical) o.pass = false;
  o.detail += identical ? "; sweep CSV identical at 1/4/8 workers" : "; sweep CSV differs across workers";
  return o;
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"oracle equivalence", oracle_equivalence},
      {"dense controller analytic suite", dense_analytic},
      {"convergence sweep", convergence_sweep},
      {"divergence demo", divergence},
      {"sparse limits", sparse_limits},
      {"rw zero", rw_zero},
      {"weight-sum identities", weight_sums},
      {"language and infrastructure properties", language_properties}};
  int failures = 0;
  int index = 0;
  for (const auto& [name, run] : criteria) {
    ++index;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %d %s (%.1fs): %s\n", o.pass ? "PASS" : "FAIL", index, name, secs, o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
