#include "aggterm/harness.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <unordered_map>

#include "aggterm/error.hpp"
#include "aggterm/eval.hpp"
#include "aggterm/parser.hpp"
#include "aggterm/rng.hpp"
#include "parallel.hpp"

namespace aggterm {

Subject Subject::from_term(TermPtr term, FunctionRegistry registry, int dim, std::string description) {
  if (description.empty()) description = print_term(*term);
  return {std::move(term), std::move(registry), dim, dim, std::move(description)};
}

Subject Subject::from_model(const CompiledModel& model, std::string description) {
  return {model.term, model.registry, model.dim, model.outputs, std::move(description)};
}

void SweepConfig::validate() const {
  if (!subject.term) throw ConfigError("sweep has no subject");
  if (!subject.term->closed()) throw ConfigError("sweep subject must be a closed term");
  if (subject.dim < 1 || subject.outputs < 1 || subject.outputs > subject.dim)
    throw ConfigError("invalid subject dimensions");
  model.validate();
  features.validate();
  if (features.dim > subject.dim) throw ConfigError("feature dimension exceeds the program dimension");
  if (sizes.empty()) throw ConfigError("sweep needs at least one size");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] < 1) throw ConfigError("sizes must be positive");
    if (i > 0 && sizes[i] <= sizes[i - 1]) throw ConfigError("sizes must be strictly ascending");
  }
  if (samples < 1) throw ConfigError("samples must be at least 1");
  if (limit && limit->size() != subject.outputs)
    throw ConfigError("limit reference has the wrong dimension");
}

std::uint64_t term_fingerprint(const Term& root) {
  std::unordered_map<const Term*, std::uint64_t> memo;
  auto mix = [](std::uint64_t h, std::uint64_t x) { return splitmix64(h ^ (x + 0x9E3779B97F4A7C15ULL)); };
  auto mix_str = [&](std::uint64_t h, const std::string& s) { return mix(h, fnv1a(s)); };
  std::function<std::uint64_t(const Term&)> go = [&](const Term& t) -> std::uint64_t {
    if (auto it = memo.find(&t); it != memo.end()) return it->second;
    std::uint64_t h = mix(0, t.node().index());
    if (const auto* c = t.as<term::Const>()) {
      h = mix(h, c->scalar);
      for (double v : c->value) h = mix_str(h, format_number(v));
    } else if (const auto* f = t.as<term::Feature>()) {
      h = mix_str(h, f->var);
    } else if (const auto* r = t.as<term::Rw>()) {
      h = mix(mix_str(h, r->var), static_cast<std::uint64_t>(r->kmax));
    } else if (const auto* a = t.as<term::Apply>()) {
      h = mix_str(h, a->fn);
    } else if (const auto* w = t.as<term::LocalWMean>()) {
      h = mix_str(mix_str(mix_str(h, w->bound), w->anchor), w->weight_map);
    } else if (const auto* w = t.as<term::GlobalWMean>()) {
      h = mix_str(mix_str(h, w->bound), w->weight_map);
    } else if (const auto* g = t.as<term::GcnAgg>()) {
      h = mix_str(mix_str(h, g->bound), g->anchor);
    }
    for (const auto& c : t.children()) h = mix(h, go(*c));
    memo.emplace(&t, h);
    return h;
  };
  return go(root);
}

namespace {

std::string describe(const Schedule& s) {
  return std::visit(
      [](const auto& r) -> std::string {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, schedule::Dense>) return "dense:" + format_real(r.p);
        if constexpr (std::is_same_v<T, schedule::Root>) return "root:" + format_real(r.K) + ":" + format_real(r.beta);
        if constexpr (std::is_same_v<T, schedule::Log>) return "log:" + format_real(r.K);
        if constexpr (std::is_same_v<T, schedule::Sparse>) return "sparse:" + format_real(r.K);
        if constexpr (std::is_same_v<T, schedule::Alternating>)
          return "alt(" + describe(*r.even) + "," + describe(*r.odd) + ")";
      },
      s.rule);
}

std::string describe(const GraphModelSpec& m) {
  std::ostringstream out;
  if (const auto* er = std::get_if<ErModel>(&m.model)) out << "er:" << describe(er->schedule);
  if (const auto* sbm = std::get_if<SbmModel>(&m.model)) {
    out << "sbm:";
    for (double q : sbm->fractions) out << format_real(q) << ',';
    for (Eigen::Index i = 0; i < sbm->P.size(); ++i) out << format_real(sbm->P(i)) << ';';
  }
  if (const auto* ba = std::get_if<BaModel>(&m.model)) out << "ba:" << ba->m;
  return out.str();
}

std::uint64_t config_hash(const SweepConfig& c) {
  std::ostringstream out;
  out << term_fingerprint(*c.subject.term) << '|' << c.subject.description << '|' << c.subject.dim << '|'
      << c.subject.outputs << '|' << describe(c.model) << '|' << static_cast<int>(c.features.kind) << ','
      << format_real(c.features.a) << ',' << format_real(c.features.b) << ',' << format_real(c.features.q)
      << ',' << format_real(c.features.c) << ',' << c.features.dim << '|';
  for (int n : c.sizes) out << n << ',';
  out << '|' << c.samples << '|' << c.seed;
  if (c.limit)
    for (double v : *c.limit) out << '|' << format_real(v);
  return fnv1a(out.str());
}

}  // namespace

std::vector<SizeSummary> summarize(const std::vector<SweepRow>& rows, const std::optional<Vector>& limit) {
  std::vector<SizeSummary> out;
  std::size_t i = 0;
  while (i < rows.size()) {
    std::size_t j = i;
    while (j < rows.size() && rows[j].size == rows[i].size) ++j;
    const auto count = static_cast<double>(j - i);
    SizeSummary s;
    s.size = rows[i].size;
    s.mean = Vector::Zero(rows[i].output.size());
    for (std::size_t k = i; k < j; ++k) s.mean += rows[k].output;
    s.mean /= count;
    Vector var = Vector::Zero(s.mean.size());
    for (std::size_t k = i; k < j; ++k) var += (rows[k].output - s.mean).cwiseAbs2();
    s.std = (var / count).cwiseSqrt();
    if (limit) {
      double d = 0;
      for (std::size_t k = i; k < j; ++k) d += (rows[k].output - *limit).norm();
      s.dist_to_limit = d / count;
    }
    out.push_back(std::move(s));
    i = j;
  }
  return out;
}

ParityGap parity_gap(const std::vector<SweepRow>& rows) {
  double even = 0, odd = 0;
  int ne = 0, no = 0;
  for (const auto& r : rows) {
    if (r.size % 2 == 0) {
      even += r.output[0];
      ++ne;
    } else {
      odd += r.output[0];
      ++no;
    }
  }
  if (ne == 0 || no == 0) throw ConfigError("parity gap needs both even and odd sizes");
  ParityGap g{even / ne, odd / no, 0};
  g.gap = std::abs(g.odd_mean - g.even_mean);
  return g;
}

SweepReport run_sweep(const SweepConfig& config) {
  config.validate();
  EvalOptions options;
  options.dim = config.subject.dim;
  const Evaluator evaluator(config.subject.term, config.subject.registry, options);

  struct Item {
    int size, sample;
  };
  std::vector<Item> items;
  for (int n : config.sizes)
    for (int s = 0; s < config.samples; ++s) items.push_back({n, s});
  std::vector<SweepRow> rows(items.size());
  detail::parallel_for(items.size(), config.workers, [&](std::size_t i) {
    const auto [n, s] = items[i];
    const auto un = static_cast<std::uint64_t>(n), us = static_cast<std::uint64_t>(s);
    try {
      const std::uint64_t graph_seed = Stream::derive(config.seed, "graph", un, us).next_u64();
      const std::uint64_t feature_seed = Stream::derive(config.seed, "features", un, us).next_u64();
      const FeaturedGraph g =
          attach_features(sample_graph(config.model, n, graph_seed), config.features, feature_seed,
                          config.subject.dim);
      rows[i] = {n, s, evaluator.closed(g).head(config.subject.outputs)};
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(e.what()) + " (size " + std::to_string(n) + ", sample " +
                        std::to_string(s) + ")");
    } catch (const std::exception& e) {
      throw EvalError(std::string(e.what()) + " (size " + std::to_string(n) + ", sample " +
                      std::to_string(s) + ")");
    }
  });

  SweepReport report;
  report.dim = config.subject.outputs;
  report.rows = std::move(rows);
  report.limit = config.limit;
  report.summary = summarize(report.rows, config.limit);
  report.provenance = {config_hash(config), config.seed, kVersion};
  return report;
}

SweepReport diverge_demo(const SweepConfig& config) {
  const auto* er = std::get_if<ErModel>(&config.model.model);
  if (!er || !std::holds_alternative<schedule::Alternating>(er->schedule.rule))
    throw ConfigError("the divergence demo needs an Erdos-Renyi model with an alternating schedule");
  SweepReport report = run_sweep(config);
  report.parity = parity_gap(report.rows);
  return report;
}

TermPtr isolated_fraction_term() {
  return global_mean("x", apply("sub", {constant(1.0), local_mean("y", "x", constant(1.0))}));
}

}  // namespace aggterm
