#include "aggterm/limits.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

#include "aggterm/error.hpp"
#include "aggterm/rng.hpp"
#include "parallel.hpp"

namespace aggterm {

namespace {

using Counts = std::unordered_map<RootedNeighborhoodCode, std::int64_t, RootedNeighborhoodCodeHash>;

struct Tally {
  Counts counts;
  std::int64_t samples = 0;
  std::int64_t overflow = 0;
};

Tally tally_graph(const FeaturedGraph& g, int radius, int roots, int tuples, std::uint64_t seed,
                  int size_cap) {
  if (roots < 1) throw ConfigError("census needs at least one root");
  if (roots > g.num_nodes()) throw ConfigError("more roots than nodes");
  Tally out;
  auto record = [&](std::span<const int> tuple) {
    ++out.samples;
    try {
      RootedGraph rg = rooted_neighborhood(g, tuple, radius, size_cap);
      ++out.counts[canonical_code(rg, radius, size_cap)];
    } catch (const NeighborhoodTooLarge&) {
      ++out.overflow;
    }
  };
  if (roots == 1 && tuples == 0) {
    for (int v = 0; v < g.num_nodes(); ++v) record(std::span<const int>(&v, 1));
    return out;
  }
  if (tuples <= 0) throw ConfigError("multi-root census needs a positive tuple count");
  Stream rng = Stream::derive(seed, "census-tuples");
  std::vector<int> tuple(roots);
  for (int s = 0; s < tuples; ++s) {
    for (int i = 0; i < roots; ++i) {
      int v;
      do {
        v = static_cast<int>(rng.below(static_cast<std::uint64_t>(g.num_nodes())));
      } while (std::find(tuple.begin(), tuple.begin() + i, v) != tuple.begin() + i);
      tuple[i] = v;
    }
    record(tuple);
  }
  return out;
}

CensusTable finish(Tally total, int radius, int roots) {
  CensusTable table;
  table.radius = radius;
  table.roots = roots;
  table.samples = total.samples;
  table.overflow = total.overflow;
  for (auto& [code, count] : total.counts) table.entries.push_back({code, count, 0.0});
  std::sort(table.entries.begin(), table.entries.end(), [](const auto& a, const auto& b) {
    return a.count != b.count ? a.count > b.count : a.code < b.code;
  });
  const double n = static_cast<double>(std::max<std::int64_t>(total.samples, 1));
  for (auto& e : table.entries) e.proportion = static_cast<double>(e.count) / n;
  table.truncated_mass = static_cast<double>(total.overflow) / n;
  return table;
}

}  // namespace

double CensusTable::proportion(const RootedNeighborhoodCode& code) const {
  for (const auto& e : entries)
    if (e.code == code) return e.proportion;
  return 0.0;
}

double CensusTable::total() const {
  double s = 0;
  for (const auto& e : entries) s += e.proportion;
  return s;
}

CensusTable graph_census(const FeaturedGraph& g, int radius, int roots, int tuples,
                         std::uint64_t seed, int size_cap) {
  if (radius < 0) throw ConfigError("census radius must be nonnegative");
  return finish(tally_graph(g, radius, roots, tuples, seed, size_cap), radius, roots);
}

CensusTable neighborhood_census(const GraphModelSpec& model, const CensusConfig& config) {
  model.validate();
  if (!model.is_sparse_class())
    throw ConfigError(
        "neighborhood census needs a sparse-class model (Erdos-Renyi with a K/n schedule, or "
        "preferential attachment); degrees grow without bound otherwise, so use the dense "
        "controller instead");
  if (config.n < 1 || config.graphs < 1 || config.radius < 0)
    throw ConfigError("census needs n >= 1, graphs >= 1 and radius >= 0");
  std::vector<Tally> parts(config.graphs);
  detail::parallel_for(parts.size(), config.workers, [&](std::size_t i) {
    Stream s = Stream::derive(config.seed, "census-graph", static_cast<std::uint64_t>(config.n), i);
    const FeaturedGraph g = sample_graph(model, config.n, s.next_u64());
    parts[i] = tally_graph(g, config.radius, config.roots, config.tuples_per_graph, s.next_u64(),
                           config.size_cap);
  });
  Tally total;
  for (auto& p : parts) {
    for (auto& [code, count] : p.counts) total.counts[code] += count;
    total.samples += p.samples;
    total.overflow += p.overflow;
  }
  return finish(std::move(total), config.radius, config.roots);
}

}  // namespace aggterm
