#pragma once

#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "aggterm/graph.hpp"

namespace aggterm {

/// A function symbol usable in terms. Arguments and result are vectors of the
/// program dimension `dim`.
struct FunctionDef {
  using Fn = std::function<Vector(std::span<const Vector> args, int dim)>;

  std::string name;
  int min_arity = 1;
  int max_arity = 1;  // -1: variadic
  Fn fn;
  bool positive = false;  // strictly positive output on every finite input

  bool accepts(int arity) const {
    return arity >= min_arity && (max_arity < 0 || arity <= max_arity);
  }
};

using FunctionPtr = std::shared_ptr<const FunctionDef>;

/// Name -> function table. Builtins:
///   one, zero, two (constant vectors), exp, softplus, relu, sigmoid, neg,
///   softmax, add (variadic), sub, hadamard, dot, dot_scaled, concat_pad,
///   leaky_relu (slope 0.01)
/// and numeric-suffix families: scale<c> (e.g. scale2), leaky_relu<a>,
/// softmax<k> (softmax over the first k coordinates, zeros after),
/// concat_pad<m> (first m coordinates of the first argument followed by the
/// second, zero-padded or truncated).
class FunctionRegistry {
 public:
  FunctionRegistry() = default;
  static FunctionRegistry with_builtins();

  /// Adds or replaces. Functions flagged positive are spot-checked on random
  /// inputs; a non-positive output throws ConfigError.
  void add(FunctionDef def);

  /// Affine map W [x_1; ...; x_k] + b with W of shape d x (k d).
  void add_linear(const std::string& name, Matrix W, Vector b, int arity = 1);

  /// Registered name or family instance; nullptr if unknown.
  FunctionPtr find(const std::string& name) const;
  /// As find, but throws ConfigError for unknown names.
  FunctionPtr get(const std::string& name) const;
  bool contains(const std::string& name) const { return find(name) != nullptr; }

  std::vector<std::string> names() const;

 private:
  std::map<std::string, FunctionPtr> table_;
};

/// Every Apply and weight map in `t` resolves with a matching arity; weight
/// maps are positive.
class Term;
void check_functions(const Term& t, const FunctionRegistry& registry);

}  // namespace aggterm
