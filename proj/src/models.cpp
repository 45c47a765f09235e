#include "aggterm/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_set>

#include "aggterm/error.hpp"

namespace aggterm {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

double clamp01(double p) {
  if (std::isnan(p)) return 0.0;
  return std::clamp(p, 0.0, 1.0);
}

// Visits every index in [0, count) that survives an independent Bernoulli(p)
// trial, in increasing order. Uses geometric skips below p = 0.01.
template <typename Fn>
void bernoulli_indices(std::uint64_t count, double p, Stream& stream, Fn&& visit) {
  if (count == 0 || p <= 0.0) return;
  if (p >= 1.0) {
    for (std::uint64_t i = 0; i < count; ++i) visit(i);
    return;
  }
  if (p >= 0.01) {
    for (std::uint64_t i = 0; i < count; ++i)
      if (stream.uniform() < p) visit(i);
    return;
  }
  const double log_q = std::log1p(-p);
  double pos = -1.0;
  while (true) {
    pos += 1.0 + std::floor(std::log(stream.uniform_pos()) / log_q);
    if (pos >= static_cast<double>(count)) break;
    visit(static_cast<std::uint64_t>(pos));
  }
}

// Pairs (i, j), i < j, of a contiguous block [base, base + size) in
// lexicographic order, driven by the linear pair index.
void sample_within_block(int base, int size, double p, Stream& stream, std::vector<Edge>& out) {
  const auto s = static_cast<std::uint64_t>(size);
  const std::uint64_t count = s * (s - (s > 0 ? 1 : 0)) / 2;
  // Row i holds pairs (i, i+1..size-1); row_start(i) = i*size - i*(i+1)/2.
  std::uint64_t row = 0;
  std::uint64_t row_start = 0;
  std::uint64_t row_len = s > 0 ? s - 1 : 0;
  bernoulli_indices(count, p, stream, [&](std::uint64_t idx) {
    while (idx >= row_start + row_len) {
      row_start += row_len;
      ++row;
      --row_len;
    }
    const auto j = row + 1 + (idx - row_start);
    out.emplace_back(base + static_cast<int>(row), base + static_cast<int>(j));
  });
}

void sample_across_blocks(int base_a, int size_a, int base_b, int size_b, double p, Stream& stream,
                          std::vector<Edge>& out) {
  const auto cols = static_cast<std::uint64_t>(size_b);
  const std::uint64_t count = static_cast<std::uint64_t>(size_a) * cols;
  bernoulli_indices(count, p, stream, [&](std::uint64_t idx) {
    out.emplace_back(base_a + static_cast<int>(idx / cols), base_b + static_cast<int>(idx % cols));
  });
}

}  // namespace

double eval_schedule(const Schedule& s, int n) {
  const double dn = static_cast<double>(n);
  return std::visit(
      overloaded{
          [](const schedule::Dense& d) { return clamp01(d.p); },
          [&](const schedule::Root& r) { return clamp01(r.K * std::pow(dn, -r.beta)); },
          [&](const schedule::Log& l) { return clamp01(l.K * std::log(dn) / dn); },
          [&](const schedule::Sparse& sp) { return clamp01(sp.K / dn); },
          [&](const schedule::Alternating& a) {
            return eval_schedule(n % 2 == 0 ? *a.even : *a.odd, n);
          },
      },
      s.rule);
}

std::optional<double> schedule_limit(const Schedule& s) {
  return std::visit(overloaded{
                        [](const schedule::Dense& d) -> std::optional<double> { return clamp01(d.p); },
                        [](const schedule::Root&) -> std::optional<double> { return 0.0; },
                        [](const schedule::Log&) -> std::optional<double> { return 0.0; },
                        [](const schedule::Sparse&) -> std::optional<double> { return std::nullopt; },
                        [](const schedule::Alternating&) -> std::optional<double> {
                          return std::nullopt;
                        },
                    },
                    s.rule);
}

void GraphModelSpec::validate() const {
  std::visit(overloaded{
                 [](const ErModel& er) {
                   std::visit(overloaded{
                                  [](const schedule::Dense& d) {
                                    if (!(d.p >= 0.0 && d.p <= 1.0))
                                      throw ConfigError("dense schedule needs p in [0, 1]");
                                  },
                                  [](const schedule::Root& r) {
                                    if (!(r.K > 0.0) || !(r.beta > 0.0 && r.beta < 1.0))
                                      throw ConfigError("root schedule needs K > 0, beta in (0, 1)");
                                  },
                                  [](const schedule::Log& l) {
                                    if (!(l.K > 0.0)) throw ConfigError("log schedule needs K > 0");
                                  },
                                  [](const schedule::Sparse& sp) {
                                    if (!(sp.K > 0.0)) throw ConfigError("sparse schedule needs K > 0");
                                  },
                                  [](const schedule::Alternating& a) {
                                    if (!a.even || !a.odd)
                                      throw ConfigError("alternating schedule needs both branches");
                                    GraphModelSpec{ErModel{*a.even}}.validate();
                                    GraphModelSpec{ErModel{*a.odd}}.validate();
                                  },
                              },
                              er.schedule.rule);
                 },
                 [](const SbmModel& sbm) {
                   const auto m = static_cast<Eigen::Index>(sbm.fractions.size());
                   if (m == 0) throw ConfigError("SBM needs at least one community");
                   if (sbm.P.rows() != m || sbm.P.cols() != m)
                     throw ConfigError("SBM edge matrix must be M x M");
                   double total = 0.0;
                   for (double f : sbm.fractions) {
                     if (!(f >= 0.0)) throw ConfigError("SBM fractions must be nonnegative");
                     total += f;
                   }
                   if (std::abs(total - 1.0) > 1e-12) throw ConfigError("SBM fractions must sum to 1");
                   for (Eigen::Index i = 0; i < m; ++i)
                     for (Eigen::Index j = 0; j < m; ++j) {
                       if (!(sbm.P(i, j) >= 0.0 && sbm.P(i, j) <= 1.0))
                         throw ConfigError("SBM edge probabilities must lie in [0, 1]");
                       if (sbm.P(i, j) != sbm.P(j, i))
                         throw ConfigError("SBM edge matrix must be symmetric");
                     }
                 },
                 [](const BaModel& ba) {
                   if (ba.m < 1) throw ConfigError("BA needs m >= 1");
                 },
             },
             model);
}

bool GraphModelSpec::is_sparse_class() const {
  if (std::holds_alternative<BaModel>(model)) return true;
  if (const auto* er = std::get_if<ErModel>(&model))
    return std::holds_alternative<schedule::Sparse>(er->schedule.rule);
  return false;
}

FeaturedGraph gen_er(int n, const Schedule& schedule, std::uint64_t seed) {
  if (n < 1) throw ConfigError("graph size must be positive");
  Stream stream = Stream::derive(seed, "er", static_cast<std::uint64_t>(n));
  std::vector<Edge> edges;
  sample_within_block(0, n, eval_schedule(schedule, n), stream, edges);
  return FeaturedGraph(n, edges);
}

std::vector<int> community_sizes(int n, std::span<const double> fractions) {
  std::vector<int> sizes(fractions.size());
  int assigned = 0;
  for (std::size_t i = 0; i + 1 < fractions.size(); ++i) {
    sizes[i] = static_cast<int>(std::floor(fractions[i] * n));
    assigned += sizes[i];
  }
  if (!sizes.empty()) sizes.back() = n - assigned;
  return sizes;
}

FeaturedGraph gen_sbm(int n, std::span<const double> fractions, const Matrix& P,
                      std::uint64_t seed) {
  if (n < 1) throw ConfigError("graph size must be positive");
  GraphModelSpec{SbmModel{{fractions.begin(), fractions.end()}, P}}.validate();
  const auto sizes = community_sizes(n, fractions);
  const int m = static_cast<int>(sizes.size());
  std::vector<int> base(m, 0);
  for (int i = 1; i < m; ++i) base[i] = base[i - 1] + sizes[i - 1];
  std::vector<int> labels(n);
  for (int i = 0; i < m; ++i)
    std::fill(labels.begin() + base[i], labels.begin() + base[i] + sizes[i], i + 1);

  std::vector<Edge> edges;
  for (int i = 0; i < m; ++i) {
    for (int j = i; j < m; ++j) {
      Stream stream = Stream::derive(seed, "sbm", static_cast<std::uint64_t>(n),
                                     static_cast<std::uint64_t>(i) * 65536 + j);
      if (i == j)
        sample_within_block(base[i], sizes[i], P(i, i), stream, edges);
      else
        sample_across_blocks(base[i], sizes[i], base[j], sizes[j], P(i, j), stream, edges);
    }
  }
  return FeaturedGraph(n, edges, {}, std::move(labels));
}

FeaturedGraph gen_ba(int n, int m, std::uint64_t seed) {
  if (m < 1) throw ConfigError("BA needs m >= 1");
  if (n < m) throw ConfigError("BA needs n >= m");
  Stream stream = Stream::derive(seed, "ba", static_cast<std::uint64_t>(n),
                                 static_cast<std::uint64_t>(m));
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(m) * (m - 1) / 2 + static_cast<std::size_t>(n - m) * m);
  // Every edge contributes both endpoints, so a uniform pick from this list is
  // a degree-proportional pick of a node.
  std::vector<int> endpoints;
  endpoints.reserve(2 * edges.capacity());
  for (int u = 0; u < m; ++u)
    for (int v = u + 1; v < m; ++v) {
      edges.emplace_back(u, v);
      endpoints.push_back(u);
      endpoints.push_back(v);
    }
  std::vector<int> targets;
  targets.reserve(m);
  for (int v = m; v < n; ++v) {
    targets.clear();
    while (static_cast<int>(targets.size()) < m) {
      int t;
      if (endpoints.empty())
        t = static_cast<int>(stream.below(static_cast<std::uint64_t>(v)));
      else
        t = endpoints[stream.below(endpoints.size())];
      if (std::find(targets.begin(), targets.end(), t) == targets.end()) targets.push_back(t);
    }
    for (int t : targets) {
      edges.emplace_back(t, v);
      endpoints.push_back(t);
      endpoints.push_back(v);
    }
  }
  return FeaturedGraph(n, edges);
}

FeaturedGraph sample_graph(const GraphModelSpec& spec, int n, std::uint64_t seed) {
  return std::visit(overloaded{
                        [&](const ErModel& er) { return gen_er(n, er.schedule, seed); },
                        [&](const SbmModel& sbm) { return gen_sbm(n, sbm.fractions, sbm.P, seed); },
                        [&](const BaModel& ba) { return gen_ba(n, ba.m, seed); },
                    },
                    spec.model);
}

void FeatureDistSpec::validate() const {
  if (dim < 1) throw ConfigError("feature dimension must be positive");
  switch (kind) {
    case Kind::UniformRange:
      if (!(a < b) || !std::isfinite(a) || !std::isfinite(b))
        throw ConfigError("uniform feature range needs finite a < b");
      break;
    case Kind::Bernoulli:
      if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("Bernoulli feature needs q in [0, 1]");
      break;
    case Kind::Constant:
      if (!std::isfinite(c)) throw ConfigError("constant feature must be finite");
      break;
    case Kind::Uniform01:
      break;
  }
}

double FeatureDistSpec::mean() const {
  switch (kind) {
    case Kind::Uniform01: return 0.5;
    case Kind::UniformRange: return 0.5 * (a + b);
    case Kind::Bernoulli: return q;
    case Kind::Constant: return c;
  }
  return 0.0;
}

Vector sample_feature(const FeatureDistSpec& dist, Stream& stream, int padded_dim) {
  Vector out = Vector::Zero(std::max(dist.dim, padded_dim));
  for (int j = 0; j < dist.dim; ++j) {
    switch (dist.kind) {
      case FeatureDistSpec::Kind::Uniform01: out[j] = stream.uniform(); break;
      case FeatureDistSpec::Kind::UniformRange:
        out[j] = dist.a + (dist.b - dist.a) * stream.uniform();
        break;
      case FeatureDistSpec::Kind::Bernoulli: out[j] = stream.uniform() < dist.q ? 1.0 : 0.0; break;
      case FeatureDistSpec::Kind::Constant: out[j] = dist.c; break;
    }
  }
  return out;
}

FeaturedGraph attach_features(const FeaturedGraph& g, const FeatureDistSpec& dist,
                              std::uint64_t seed, int padded_dim) {
  dist.validate();
  const int width = std::max(dist.dim, padded_dim);
  FeatureMatrix f(g.num_nodes(), width);
  Stream stream = Stream::derive(seed, "features", static_cast<std::uint64_t>(g.num_nodes()));
  for (int v = 0; v < g.num_nodes(); ++v) f.row(v) = sample_feature(dist, stream, width).transpose();
  return g.with_features(std::move(f));
}

}  // namespace aggterm
