#include "aggterm/walks.hpp"

#include <unordered_map>
#include <vector>

#include "aggterm/error.hpp"
#include "aggterm/rng.hpp"

namespace aggterm {

namespace {

constexpr std::size_t kExactNodeLimit = 10000;

std::size_t ball_size(const FeaturedGraph& g, int v, int radius, std::size_t stop_above) {
  std::unordered_map<int, int> dist{{v, 0}};
  std::vector<int> frontier{v};
  for (int r = 0; r < radius && !frontier.empty(); ++r) {
    std::vector<int> next;
    for (int u : frontier)
      for (int w : g.neighbors(u))
        if (dist.emplace(w, r + 1).second) {
          next.push_back(w);
          if (dist.size() > stop_above) return dist.size();
        }
    frontier.swap(next);
  }
  return dist.size();
}

Vector exact_local(const FeaturedGraph& g, int v, int kmax) {
  Vector out = Vector::Zero(kmax);
  const int n = g.num_nodes();
  // Dense buffers with touched lists; the support stays inside the kmax-ball.
  std::vector<double> mass(n, 0.0), next(n, 0.0);
  std::vector<int> support{v}, next_support;
  std::vector<char> marked(n, 0);
  mass[v] = 1.0;
  for (int step = 1; step <= kmax; ++step) {
    next_support.clear();
    for (int u : support) {
      const double share = mass[u] / g.degree(u);
      for (int w : g.neighbors(u)) {
        if (!marked[w]) {
          marked[w] = 1;
          next_support.push_back(w);
        }
        next[w] += share;
      }
      mass[u] = 0.0;
    }
    for (int w : next_support) marked[w] = 0;
    std::swap(mass, next);
    std::swap(support, next_support);
    out[step - 1] = mass[v];
  }
  return out;
}

Vector monte_carlo(const FeaturedGraph& g, int v, int kmax, const rw_method::MonteCarlo& mc) {
  if (mc.walks < 1) throw ConfigError("random-walk estimate needs at least one walk");
  Vector hits = Vector::Zero(kmax);
  Stream stream = Stream::derive(mc.seed, "rw", static_cast<std::uint64_t>(v),
                                 static_cast<std::uint64_t>(kmax));
  for (std::int64_t w = 0; w < mc.walks; ++w) {
    int at = v;
    for (int step = 1; step <= kmax; ++step) {
      auto nb = g.neighbors(at);
      at = nb[stream.below(nb.size())];
      if (at == v) hits[step - 1] += 1.0;
    }
  }
  return hits / static_cast<double>(mc.walks);
}

}  // namespace

Vector rw_encoding(const FeaturedGraph& g, int v, int kmax, const RwMethod& method) {
  if (v < 0 || v >= g.num_nodes()) throw EvalError("rw_encoding: node out of range");
  if (kmax < 1) throw ConfigError("rw_encoding: kmax must be positive");
  if (g.degree(v) == 0) return Vector::Zero(kmax);
  if (std::holds_alternative<rw_method::ExactLocal>(method)) return exact_local(g, v, kmax);
  if (const auto* mc = std::get_if<rw_method::MonteCarlo>(&method)) return monte_carlo(g, v, kmax, *mc);
  if (ball_size(g, v, kmax, kExactNodeLimit) <= kExactNodeLimit) return exact_local(g, v, kmax);
  return monte_carlo(g, v, kmax, rw_method::MonteCarlo{100000, 0});
}

}  // namespace aggterm
