#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "aggterm/graph.hpp"
#include "aggterm/rng.hpp"
#include "aggterm/term.hpp"

namespace testing_support {

using namespace aggterm;

/// Erdos-Renyi graph on n nodes with edge probability p; the last `isolated`
/// nodes get no edges. Features uniform on [0, 1).
inline FeaturedGraph random_graph(int n, double p, int dim, Stream& rng, int isolated = 0) {
  std::vector<Edge> edges;
  const int connected = n - std::min(isolated, n);
  for (int u = 0; u < connected; ++u)
    for (int v = u + 1; v < connected; ++v)
      if (rng.bernoulli(p)) edges.emplace_back(u, v);
  FeatureMatrix h(n, dim);
  for (int v = 0; v < n; ++v)
    for (int j = 0; j < dim; ++j) h(v, j) = rng.uniform();
  return FeaturedGraph(n, edges, h);
}

inline std::vector<int> random_permutation(int n, Stream& rng) {
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  return perm;
}

/// Random well-scoped term over builtin functions. `free` lists the variables
/// usable as free; binders draw fresh names.
class TermGen {
 public:
  explicit TermGen(std::uint64_t seed) : rng_(seed) {}

  TermPtr any(int depth, std::vector<std::string> scope) {
    const int choice = static_cast<int>(rng_.below(depth <= 0 ? 3 : 9));
    switch (choice) {
      case 0:
        return rng_.bernoulli(0.7) ? constant(number()) : constant(vec());
      case 1:
        if (!scope.empty()) return feature(pick(scope));
        return constant(number());
      case 2:
        if (!scope.empty()) return rw(pick(scope), 1 + static_cast<int>(rng_.below(4)));
        return apply(rng_.bernoulli(0.5) ? "one" : "two");
      case 3: {
        static const char* unary[] = {"relu", "sigmoid", "exp", "softplus", "neg", "scale2",
                                      "scale0.5", "leaky_relu0.2", "softmax", "softmax2"};
        return apply(unary[rng_.below(10)], {any(depth - 1, scope)});
      }
      case 4: {
        static const char* binary[] = {"add", "sub", "hadamard", "dot_scaled", "dot", "concat_pad1"};
        return apply(binary[rng_.below(6)], {any(depth - 1, scope), any(depth - 1, scope)});
      }
      case 5:
        return apply("add", {any(depth - 1, scope), any(depth - 1, scope), any(depth - 1, scope)});
      case 6:
      case 7: {
        const std::string y = fresh();
        auto inner = scope;
        inner.push_back(y);
        auto value = any(depth - 1, inner);
        const std::string map = weight_map();
        TermPtr arg = rng_.bernoulli(0.5) ? nullptr : any(depth - 1, inner);
        if (choice == 6 && !scope.empty())
          return local_wmean(y, pick(scope), value, map, arg);
        return global_wmean(y, value, map, arg);
      }
      default: {
        if (scope.empty()) return global_mean(fresh(), constant(number()));
        const std::string y = fresh();
        auto inner = scope;
        inner.push_back(y);
        return gcn(y, pick(scope), any(depth - 1, inner));
      }
    }
  }

  double number() {
    switch (rng_.below(4)) {
      case 0:
        return static_cast<double>(static_cast<int>(rng_.below(7)) - 3);
      case 1:
        return std::ldexp(rng_.uniform(), static_cast<int>(rng_.below(40)) - 20);
      case 2:
        return -rng_.uniform() * 1e6;
      default:
        return rng_.uniform();
    }
  }

  Stream& rng() { return rng_; }

 private:
  Vector vec() {
    Vector v(1 + rng_.below(3));
    for (auto& x : v) x = number();
    return v;
  }
  std::string pick(const std::vector<std::string>& xs) { return xs[rng_.below(xs.size())]; }
  std::string fresh() { return "v" + std::to_string(next_++); }
  std::string weight_map() {
    static const char* maps[] = {"one", "exp", "softplus", "two"};
    return maps[rng_.below(4)];
  }

  Stream rng_;
  int next_ = 0;
};

/// Random bounded node-level term with free variable `var`: features, rw,
/// sigmoid/relu/affine maps and nested local means. Values stay O(1).
class ValueGen {
 public:
  explicit ValueGen(std::uint64_t seed) : rng_(seed) {}

  TermPtr node_term(const std::string& var, int depth) {
    const int choice = static_cast<int>(rng_.below(depth <= 0 ? 3 : 7));
    switch (choice) {
      case 0:
        return feature(var);
      case 1:
        return constant(2 * rng_.uniform() - 1);
      case 2:
        return rw(var, 1 + static_cast<int>(rng_.below(3)));
      case 3: {
        static const char* unary[] = {"relu", "sigmoid", "scale0.5", "scale-1.5", "leaky_relu0.2"};
        const char* f = unary[rng_.below(5)];
        if (std::string(f) == "scale-1.5") return apply("neg", {apply("scale1.5", {node_term(var, depth - 1)})});
        return apply(f, {node_term(var, depth - 1)});
      }
      case 4:
        return apply(rng_.bernoulli(0.5) ? "add" : "sub", {node_term(var, depth - 1), node_term(var, depth - 1)});
      case 5: {
        const std::string y = fresh();
        return local_wmean(y, var, node_term(y, depth - 1), weight_map(), node_term(y, depth - 1));
      }
      default: {
        const std::string y = fresh();
        return local_mean(y, var, node_term(y, depth - 1));
      }
    }
  }

  std::string weight_map() {
    static const char* maps[] = {"one", "exp", "softplus"};
    return maps[rng_.below(3)];
  }

  Stream& rng() { return rng_; }

 private:
  std::string fresh() { return "z" + std::to_string(next_++); }

  Stream rng_;
  int next_ = 0;
};

}  // namespace testing_support
