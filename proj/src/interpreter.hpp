#pragma once

// Shared recursive interpreter for terms over a concrete graph.

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "aggterm/error.hpp"
#include "aggterm/eval.hpp"
#include "aggterm/parser.hpp"

namespace aggterm::detail {

struct Slot {
  FeatureMatrix rows;
  std::vector<char> done;
  Vector value;
  bool value_done = false;
};

using Memo = std::unordered_map<const Term*, Slot>;

struct Binding {
  const std::string* var;
  int node;
};

inline std::string label(const Term& t) {
  if (t.as<term::Apply>()) return t.as<term::Apply>()->fn + "(...)";
  if (const auto* w = t.as<term::LocalWMean>()) return "wmean[" + w->bound + " in N(" + w->anchor + ")]";
  if (const auto* w = t.as<term::GlobalWMean>()) return "wmean[" + w->bound + "]";
  if (const auto* g = t.as<term::GcnAgg>()) return "gcn[" + g->bound + " in N(" + g->anchor + ")]";
  return print_term(t);
}

class Interpreter {
 public:
  /// Replaces the default treatment of GlobalWMean nodes when set.
  using GlobalHook = std::function<Vector(const Term&, Interpreter&)>;

  Interpreter(const FeaturedGraph& g, int dim, const RwMethod& rw,
              const FunctionRegistry* registry,
              const std::unordered_map<std::string, FunctionPtr>* functions, Memo* memo,
              const GlobalHook* global_hook = nullptr)
      : g_(g),
        dim_(dim),
        rw_(rw),
        registry_(registry),
        functions_(functions),
        memo_(memo),
        global_hook_(global_hook) {}

  std::vector<Binding> env;

  const FeaturedGraph& graph() const { return g_; }
  int dim() const { return dim_; }
  const RwMethod& rw_method() const { return rw_; }
  const FunctionRegistry* registry() const { return registry_; }
  const std::unordered_map<std::string, FunctionPtr>* functions() const { return functions_; }

  Vector eval(const Term& t) {
    try {
      const auto& fv = t.free_vars();
      if (memo_ && fv.size() <= 1) {
        Slot& s = (*memo_)[&t];
        if (fv.empty()) {
          if (!s.value_done) {
            s.value = compute(t);
            s.value_done = true;
          }
          return s.value;
        }
        const int v = lookup(fv[0]);
        if (s.done.empty()) {
          s.rows.resize(g_.num_nodes(), dim_);
          s.done.assign(g_.num_nodes(), 0);
        }
        if (!s.done[v]) {
          s.rows.row(v) = compute(t).transpose();
          s.done[v] = 1;
        }
        return s.rows.row(v).transpose();
      }
      return compute(t);
    } catch (const EvalError& e) {
      throw EvalError(std::string(e.what()) + " <- " + label(t));
    }
  }

  int lookup(const std::string& var) const {
    for (auto it = env.rbegin(); it != env.rend(); ++it)
      if (*it->var == var) return it->node;
    throw EvalError("no node assigned to variable '" + var + "'");
  }

  const FunctionDef& fn(const std::string& name) {
    if (functions_) {
      auto it = functions_->find(name);
      if (it != functions_->end()) return *it->second;
    }
    auto& slot = local_[name];
    if (!slot) {
      slot = registry_->find(name);
      if (!slot) throw EvalError("unknown function '" + name + "'");
    }
    return *slot;
  }

  Vector checked(Vector v, const Term& t) const {
    if (v.size() != dim_)
      throw EvalError("dimension mismatch: got " + std::to_string(v.size()) + ", expected " +
                      std::to_string(dim_) + " at " + label(t));
    if (!v.allFinite()) throw EvalError("non-finite value at " + label(t));
    return v;
  }

 private:
  Vector compute(const Term& t) {
    if (const auto* c = t.as<term::Const>()) {
      if (c->scalar) return Vector::Constant(dim_, c->value[0]);
      return checked(c->value, t);
    }
    if (const auto* f = t.as<term::Feature>()) {
      if (g_.dim() != dim_)
        throw EvalError("graph features have dimension " + std::to_string(g_.dim()) +
                        ", program dimension is " + std::to_string(dim_));
      return g_.feature(lookup(f->var));
    }
    if (const auto* r = t.as<term::Rw>()) {
      const Vector enc = rw_encoding(g_, lookup(r->var), r->kmax, rw_);
      Vector out = Vector::Zero(dim_);
      const int k = std::min<int>(dim_, static_cast<int>(enc.size()));
      out.head(k) = enc.head(k);
      return out;
    }
    if (const auto* a = t.as<term::Apply>()) {
      std::vector<Vector> args;
      args.reserve(a->args.size());
      for (const auto& arg : a->args) args.push_back(eval(*arg));
      return checked(fn(a->fn).fn(args, dim_), t);
    }
    if (const auto* w = t.as<term::LocalWMean>()) {
      const int u = lookup(w->anchor);
      return weighted(t, w->bound, *w->value, *w->weight_arg, w->weight_map, g_.neighbors(u));
    }
    if (const auto* w = t.as<term::GlobalWMean>()) {
      if (global_hook_ && *global_hook_) return checked((*global_hook_)(t, *this), t);
      if (all_nodes_.size() != static_cast<std::size_t>(g_.num_nodes())) {
        all_nodes_.resize(g_.num_nodes());
        for (int v = 0; v < g_.num_nodes(); ++v) all_nodes_[v] = v;
      }
      return weighted(t, w->bound, *w->value, *w->weight_arg, w->weight_map, all_nodes_);
    }
    const auto& gc = std::get<term::GcnAgg>(t.node());
    const int u = lookup(gc.anchor);
    Vector out = Vector::Zero(dim_);
    const double du = g_.degree(u);
    for (int y : g_.neighbors(u)) {
      env.push_back({&gc.bound, y});
      const Vector val = eval(*gc.value);
      env.pop_back();
      out += val / std::sqrt(du * g_.degree(y));
    }
    return checked(std::move(out), t);
  }

 public:
  /// Weighted mean of `value` over the nodes `over` bound to `bound`.
  Vector weighted(const Term& t, const std::string& bound, const Term& value,
                  const Term& weight_arg, const std::string& weight_map,
                  std::span<const int> over) {
    if (over.empty()) return Vector::Zero(dim_);
    const auto m = static_cast<Eigen::Index>(over.size());
    Matrix eta(dim_, m), vals(dim_, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      env.push_back({&bound, over[i]});
      eta.col(i) = eval(weight_arg);
      vals.col(i) = eval(value);
      env.pop_back();
    }
    Matrix weights(dim_, m);
    if (weight_map == "exp") {
      const Vector top = eta.rowwise().maxCoeff();
      weights = (eta.colwise() - top).array().exp();
    } else {
      const FunctionDef& h = fn(weight_map);
      for (Eigen::Index i = 0; i < m; ++i) {
        const Vector arg = eta.col(i);
        weights.col(i) = h.fn(std::span<const Vector>(&arg, 1), dim_);
      }
    }
    const Vector den = weights.rowwise().sum();
    if (!((den.array() > 0).all() && den.allFinite()))
      throw EvalError("weight map '" + weight_map + "' produced a non-positive total at " + label(t));
    const Vector num = vals.cwiseProduct(weights).rowwise().sum();
    return checked(num.cwiseQuotient(den), t);
  }

 private:
  const FeaturedGraph& g_;
  int dim_;
  const RwMethod& rw_;
  const FunctionRegistry* registry_;
  const std::unordered_map<std::string, FunctionPtr>* functions_;
  Memo* memo_;
  const GlobalHook* global_hook_;
  std::unordered_map<std::string, FunctionPtr> local_;
  std::vector<int> all_nodes_;
};

}  // namespace aggterm::detail
