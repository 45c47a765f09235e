#include "aggterm/registry.hpp"

#include <charconv>
#include <cmath>
#include <unordered_set>

#include "aggterm/error.hpp"
#include "aggterm/rng.hpp"
#include "aggterm/term.hpp"

namespace aggterm {

namespace {

FunctionDef unary(std::string name, double (*f)(double), bool positive = false) {
  return {std::move(name), 1, 1,
          [f](std::span<const Vector> a, int) -> Vector { return a[0].unaryExpr(f); }, positive};
}

FunctionDef constant_fn(std::string name, double c, bool positive) {
  return {std::move(name), 0, 1,
          [c](std::span<const Vector>, int dim) -> Vector { return Vector::Constant(dim, c); },
          positive};
}

double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}
double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
double relu(double x) { return x > 0 ? x : 0.0; }
double negate(double x) { return -x; }
double exp_fn(double x) { return std::exp(x); }

Vector softmax_head(const Vector& x, int k) {
  Vector out = Vector::Zero(x.size());
  k = std::min<int>(k, static_cast<int>(x.size()));
  if (k <= 0) return out;
  const double m = x.head(k).maxCoeff();
  double total = 0;
  for (int i = 0; i < k; ++i) total += out[i] = std::exp(x[i] - m);
  out.head(k) /= total;
  return out;
}

FunctionDef softmax_def(std::string name, int k) {
  return {std::move(name), 1, 1,
          [k](std::span<const Vector> a, int) -> Vector {
            return softmax_head(a[0], k < 0 ? static_cast<int>(a[0].size()) : k);
          },
          false};
}

FunctionDef leaky_def(std::string name, double slope) {
  return {std::move(name), 1, 1,
          [slope](std::span<const Vector> a, int) -> Vector {
            return a[0].unaryExpr([slope](double x) { return x > 0 ? x : slope * x; });
          },
          false};
}

FunctionDef scale_def(std::string name, double c) {
  return {std::move(name), 1, 1,
          [c](std::span<const Vector> a, int) -> Vector { return c * a[0]; }, false};
}

FunctionDef concat_def(std::string name, int m) {
  return {std::move(name), 2, 2,
          [m](std::span<const Vector> a, int dim) -> Vector {
            const int head = std::min<int>(m < 0 ? static_cast<int>(a[0].size()) : m, dim);
            Vector out = Vector::Zero(dim);
            out.head(std::min<int>(head, static_cast<int>(a[0].size()))) =
                a[0].head(std::min<int>(head, static_cast<int>(a[0].size())));
            const int tail = std::min<int>(dim - head, static_cast<int>(a[1].size()));
            if (tail > 0) out.segment(head, tail) = a[1].head(tail);
            return out;
          },
          false};
}

std::optional<double> numeric_suffix(const std::string& name, const std::string& prefix) {
  if (name.size() <= prefix.size() || name.compare(0, prefix.size(), prefix) != 0) return {};
  const char* first = name.data() + prefix.size();
  const char* last = name.data() + name.size();
  double v = 0;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) return {};
  return v;
}

void spot_check_positive(const FunctionDef& def) {
  Stream rng(fnv1a(def.name));
  const int dim = 4;
  for (int trial = 0; trial < 64; ++trial) {
    const int arity = def.min_arity;
    std::vector<Vector> args(arity, Vector(dim));
    const double span = trial < 32 ? 5.0 : 50.0;
    for (auto& a : args)
      for (int i = 0; i < dim; ++i) a[i] = span * (2 * rng.uniform() - 1);
    const Vector out = def.fn(args, dim);
    if (out.size() != dim || !(out.array() > 0).all() || !out.allFinite())
      throw ConfigError("function '" + def.name + "' is flagged positive but returned a non-positive value");
  }
}

}  // namespace

FunctionRegistry FunctionRegistry::with_builtins() {
  FunctionRegistry r;
  r.add(constant_fn("one", 1.0, true));
  r.add(constant_fn("zero", 0.0, false));
  r.add(constant_fn("two", 2.0, true));
  r.add(unary("exp", exp_fn, true));
  r.add(unary("softplus", softplus, true));
  r.add(unary("relu", relu));
  r.add(unary("sigmoid", sigmoid));
  r.add(unary("neg", negate));
  r.add(softmax_def("softmax", -1));
  r.add(leaky_def("leaky_relu", 0.01));
  r.add(concat_def("concat_pad", -1));
  r.add({"add", 2, -1,
         [](std::span<const Vector> a, int) -> Vector {
           Vector out = a[0];
           for (std::size_t i = 1; i < a.size(); ++i) out += a[i];
           return out;
         },
         false});
  r.add({"sub", 2, 2, [](std::span<const Vector> a, int) -> Vector { return a[0] - a[1]; }, false});
  r.add({"hadamard", 2, 2,
         [](std::span<const Vector> a, int) -> Vector { return a[0].cwiseProduct(a[1]); }, false});
  r.add({"dot", 2, 2,
         [](std::span<const Vector> a, int dim) -> Vector {
           return Vector::Constant(dim, a[0].dot(a[1]));
         },
         false});
  r.add({"dot_scaled", 2, 2,
         [](std::span<const Vector> a, int dim) -> Vector {
           return Vector::Constant(dim, a[0].dot(a[1]) / std::sqrt(static_cast<double>(dim)));
         },
         false});
  return r;
}

void FunctionRegistry::add(FunctionDef def) {
  if (def.name.empty() || !def.fn) throw ConfigError("function needs a name and an evaluator");
  if (def.positive) spot_check_positive(def);
  auto name = def.name;
  table_[name] = std::make_shared<const FunctionDef>(std::move(def));
}

void FunctionRegistry::add_linear(const std::string& name, Matrix W, Vector b, int arity) {
  if (arity < 1) throw ConfigError("linear map '" + name + "' needs at least one argument");
  if (W.rows() != b.size() || W.cols() != arity * W.rows())
    throw ConfigError("linear map '" + name + "' has inconsistent shape");
  if (!W.allFinite() || !b.allFinite()) throw ConfigError("linear map '" + name + "' is not finite");
  add({name, arity, arity,
       [W = std::move(W), b = std::move(b), arity](std::span<const Vector> a, int dim) -> Vector {
         if (W.rows() != dim) throw EvalError("linear map dimension does not match program");
         Vector out = b;
         for (int i = 0; i < arity; ++i) out.noalias() += W.middleCols(i * dim, dim) * a[i];
         return out;
       },
       false});
}

FunctionPtr FunctionRegistry::find(const std::string& name) const {
  if (auto it = table_.find(name); it != table_.end()) return it->second;
  if (auto c = numeric_suffix(name, "scale")) return std::make_shared<const FunctionDef>(scale_def(name, *c));
  if (auto a = numeric_suffix(name, "leaky_relu"))
    return std::make_shared<const FunctionDef>(leaky_def(name, *a));
  if (auto k = numeric_suffix(name, "softmax"); k && *k >= 1 && *k == std::floor(*k))
    return std::make_shared<const FunctionDef>(softmax_def(name, static_cast<int>(*k)));
  if (auto m = numeric_suffix(name, "concat_pad"); m && *m >= 0 && *m == std::floor(*m))
    return std::make_shared<const FunctionDef>(concat_def(name, static_cast<int>(*m)));
  return nullptr;
}

FunctionPtr FunctionRegistry::get(const std::string& name) const {
  auto f = find(name);
  if (!f) throw ConfigError("unknown function '" + name + "'");
  return f;
}

std::vector<std::string> FunctionRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, def] : table_) out.push_back(name);
  return out;
}

void check_functions(const Term& t, const FunctionRegistry& registry) {
  auto check_weight = [&](const std::string& name) {
    auto f = registry.get(name);
    if (!f->positive) throw ConfigError("weight map '" + name + "' is not a positive function");
    if (!f->accepts(1)) throw ConfigError("weight map '" + name + "' must accept one argument");
  };
  std::unordered_set<const Term*> seen;
  std::vector<const Term*> stack{&t};
  while (!stack.empty()) {
    const Term* cur = stack.back();
    stack.pop_back();
    if (!seen.insert(cur).second) continue;
    if (const auto* a = cur->as<term::Apply>()) {
      auto f = registry.get(a->fn);
      if (!f->accepts(static_cast<int>(a->args.size())))
        throw ConfigError("function '" + a->fn + "' does not take " +
                          std::to_string(a->args.size()) + " argument(s)");
    }
    if (const auto* w = cur->as<term::LocalWMean>()) check_weight(w->weight_map);
    if (const auto* w = cur->as<term::GlobalWMean>()) check_weight(w->weight_map);
    for (const auto& c : cur->children()) stack.push_back(c.get());
  }
}

}  // namespace aggterm
