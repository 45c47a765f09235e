#include "aggterm/limits.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "aggterm/error.hpp"
#include "aggterm/rng.hpp"
#include "interpreter.hpp"

namespace aggterm {

int evaluation_radius(const Term& t) {
  if (t.as<term::Const>() || t.as<term::Feature>()) return 0;
  if (const auto* r = t.as<term::Rw>()) return r->kmax;
  if (const auto* a = t.as<term::Apply>()) {
    int r = 0;
    for (const auto& arg : a->args) r = std::max(r, evaluation_radius(*arg));
    return r;
  }
  if (const auto* w = t.as<term::LocalWMean>())
    return std::max(evaluation_radius(*w->value), evaluation_radius(*w->weight_arg)) + 1;
  if (const auto* g = t.as<term::GcnAgg>()) return std::max(evaluation_radius(*g->value) + 1, 2);
  const auto& w = std::get<term::GlobalWMean>(t.node());
  if (t.closed()) return 0;
  return std::max(evaluation_radius(*w.value), evaluation_radius(*w.weight_arg));
}

namespace {

struct Estimate {
  Vector value;
  Vector se;
};

struct TypeSample {
  FeaturedGraph graph;  // decoded census type, root at node 0, no features
  double weight;
};

FeaturedGraph to_graph(const RootedGraph& rg) {
  std::vector<Edge> edges;
  for (int u = 0; u < rg.size(); ++u)
    for (int v : rg.adjacency[u])
      if (u < v) edges.emplace_back(u, v);
  return FeaturedGraph(rg.size(), edges);
}

FeaturedGraph disjoint_union(const FeaturedGraph& a, const FeaturedGraph& b) {
  std::vector<Edge> edges = a.edges();
  for (auto [u, v] : b.edges()) edges.emplace_back(u + a.num_nodes(), v + a.num_nodes());
  FeatureMatrix f(a.num_nodes() + b.num_nodes(), a.dim());
  f.topRows(a.num_nodes()) = a.features();
  f.bottomRows(b.num_nodes()) = b.features();
  return FeaturedGraph(a.num_nodes() + b.num_nodes(), edges, std::move(f));
}

class SparseEvaluator {
 public:
  SparseEvaluator(const FunctionRegistry& registry, std::vector<TypeSample> types,
                  FeatureDistSpec dist, const SparseLimitOptions& options, int dim)
      : types_(std::move(types)), dist_(dist), options_(options), dim_(dim) {
    registry_ = &registry;
    hook_ = [this](const Term& t, detail::Interpreter& in) { return global(t, in); };
    cumulative_.reserve(types_.size());
    double acc = 0;
    for (const auto& ts : types_) cumulative_.push_back(acc += ts.weight);
  }

  void index(const Term& root) {
    std::vector<const Term*> stack{&root};
    while (!stack.empty()) {
      const Term* t = stack.back();
      stack.pop_back();
      if (ids_.count(t)) continue;
      ids_.emplace(t, static_cast<int>(ids_.size()));
      if (const auto* a = t->as<term::Apply>()) functions_.emplace(a->fn, registry_->get(a->fn));
      if (const auto* w = t->as<term::LocalWMean>()) functions_.emplace(w->weight_map, registry_->get(w->weight_map));
      if (const auto* w = t->as<term::GlobalWMean>()) functions_.emplace(w->weight_map, registry_->get(w->weight_map));
      for (const auto& c : t->children()) stack.push_back(c.get());
    }
  }

  Estimate top(const Term& t) {
    if (const auto* a = t.as<term::Apply>()) {
      std::vector<Estimate> args;
      for (const auto& arg : a->args) args.push_back(top(*arg));
      return propagate(*functions_.at(a->fn), args);
    }
    if (t.as<term::GlobalWMean>()) return closed_global(t);
    if (const auto* c = t.as<term::Const>())
      return {c->scalar ? Vector(Vector::Constant(dim_, c->value[0])) : c->value, Vector::Zero(dim_)};
    throw EvalError("sparse limit needs a closed term");
  }

  std::int64_t draws_used() const { return draws_; }

 private:
  Estimate propagate(const FunctionDef& f, const std::vector<Estimate>& args) const {
    std::vector<Vector> x;
    for (const auto& a : args) x.push_back(a.value);
    Estimate out{f.fn(x, dim_), Vector::Zero(dim_)};
    Vector var = Vector::Zero(dim_);
    for (std::size_t j = 0; j < x.size(); ++j)
      for (int k = 0; k < dim_; ++k) {
        const double s = args[j].se[k];
        if (s <= 0) continue;
        const double h = 1e-6 * std::max(1.0, std::abs(x[j][k]));
        auto up = x, down = x;
        up[j][k] += h;
        down[j][k] -= h;
        var += ((f.fn(up, dim_) - f.fn(down, dim_)) / (2 * h) * s).cwiseAbs2();
      }
    out.se = var.cwiseSqrt();
    return out;
  }

  FeaturedGraph featured(const FeaturedGraph& g, std::uint64_t key) const {
    return attach_features(g, dist_, key, dim_);
  }

  /// Value and weight argument of a global aggregate's body at the root of g.
  std::pair<Vector, Vector> body_at(const term::GlobalWMean& w, const FeaturedGraph& g, int root,
                                    const std::vector<detail::Binding>& context) {
    detail::Memo memo;
    detail::Interpreter in(g, dim_, rw_method::ExactLocal{}, registry_, &functions_, &memo, &hook_);
    in.env = context;
    in.env.push_back({&w.bound, root});
    Vector eta = in.eval(*w.weight_arg);
    Vector val = in.eval(*w.value);
    return {std::move(val), std::move(eta)};
  }

  Matrix weights(const Matrix& etas, const std::string& weight_map) const {
    if (weight_map == "exp") {
      const Vector top = etas.rowwise().maxCoeff();
      return (etas.colwise() - top).array().exp();
    }
    const FunctionDef& h = *functions_.at(weight_map);
    Matrix w(etas.rows(), etas.cols());
    for (Eigen::Index s = 0; s < etas.cols(); ++s) {
      const Vector arg = etas.col(s);
      w.col(s) = h.fn(std::span<const Vector>(&arg, 1), dim_);
    }
    return w;
  }

  Estimate closed_global(const Term& t) {
    if (auto it = constants_.find(&t); it != constants_.end()) return it->second;
    const auto& w = std::get<term::GlobalWMean>(t.node());
    const int id = ids_.at(&t);
    const auto m = static_cast<double>(options_.mc_samples);

    std::vector<Matrix> vals(types_.size()), etas(types_.size());
    for (std::size_t j = 0; j < types_.size(); ++j) {
      const auto count = std::max<std::int64_t>(2, std::llround(types_[j].weight * m));
      vals[j].resize(dim_, count);
      etas[j].resize(dim_, count);
      const Stream key = Stream::derive(options_.seed, "sparse", static_cast<std::uint64_t>(id), j);
      for (std::int64_t s = 0; s < count; ++s) {
        const FeaturedGraph g = featured(types_[j].graph, key.split(static_cast<std::uint64_t>(s)).key());
        auto [val, eta] = body_at(w, g, 0, {});
        vals[j].col(s) = val;
        etas[j].col(s) = eta;
        ++draws_;
      }
    }
    // Shared shift keeps exp weights comparable across strata.
    Vector shift = Vector::Zero(dim_);
    if (w.weight_map == "exp") {
      shift = Vector::Constant(dim_, -std::numeric_limits<double>::infinity());
      for (const auto& e : etas) shift = shift.cwiseMax(e.rowwise().maxCoeff());
    }
    std::vector<Matrix> ws(types_.size());
    Vector num = Vector::Zero(dim_), den = Vector::Zero(dim_);
    for (std::size_t j = 0; j < types_.size(); ++j) {
      ws[j] = w.weight_map == "exp" ? Matrix((etas[j].colwise() - shift).array().exp())
                                    : weights(etas[j], w.weight_map);
      num += types_[j].weight * vals[j].cwiseProduct(ws[j]).rowwise().mean();
      den += types_[j].weight * ws[j].rowwise().mean();
    }
    if (!((den.array() > 0).all() && den.allFinite()))
      throw EvalError("weight map '" + w.weight_map + "' produced a non-positive total");
    Estimate est;
    est.value = num.cwiseQuotient(den);
    Vector var = Vector::Zero(dim_);
    for (std::size_t j = 0; j < types_.size(); ++j) {
      const auto cnt = static_cast<double>(vals[j].cols());
      const Matrix resid = vals[j].cwiseProduct(ws[j]) - est.value.asDiagonal() * ws[j];
      const Vector mean = resid.rowwise().mean();
      const Vector sample_var = (resid.colwise() - mean).cwiseAbs2().rowwise().sum() / (cnt - 1);
      var += types_[j].weight * types_[j].weight * sample_var / cnt;
    }
    est.se = var.cwiseSqrt().cwiseQuotient(den);
    constants_.emplace(&t, est);
    return est;
  }

  /// Global aggregate inside a context: far-away nodes are drawn from the
  /// census and placed in a disjoint copy next to the current graph.
  Vector global(const Term& t, detail::Interpreter& in) {
    if (t.closed()) return closed_global(t).value;
    const auto& w = std::get<term::GlobalWMean>(t.node());
    const int id = ids_.at(&t);
    const auto count = options_.nested_mc;
    Matrix vals(dim_, count), etas(dim_, count);
    for (std::int64_t s = 0; s < count; ++s) {
      Stream rng = Stream::derive(options_.seed, "sparse-nested", static_cast<std::uint64_t>(id),
                                  static_cast<std::uint64_t>(s));
      const double u = rng.uniform() * cumulative_.back();
      const auto j = static_cast<std::size_t>(
          std::upper_bound(cumulative_.begin(), cumulative_.end(), u) - cumulative_.begin());
      const auto& type = types_[std::min(j, types_.size() - 1)];
      const FeaturedGraph far = featured(type.graph, rng.next_u64());
      const FeaturedGraph joint = disjoint_union(in.graph(), far);
      auto [val, eta] = body_at(w, joint, in.graph().num_nodes(), in.env);
      vals.col(s) = val;
      etas.col(s) = eta;
    }
    const Matrix ws = weights(etas, w.weight_map);
    return vals.cwiseProduct(ws).rowwise().sum().cwiseQuotient(ws.rowwise().sum());
  }

  const FunctionRegistry* registry_;
  std::vector<TypeSample> types_;
  std::vector<double> cumulative_;
  FeatureDistSpec dist_;
  const SparseLimitOptions& options_;
  int dim_;
  detail::Interpreter::GlobalHook hook_;
  std::unordered_map<std::string, FunctionPtr> functions_;
  std::unordered_map<const Term*, int> ids_;
  std::unordered_map<const Term*, Estimate> constants_;
  std::int64_t draws_ = 0;
};

int max_global_radius(const Term& t) {
  int r = 0;
  if (const auto* w = t.as<term::GlobalWMean>())
    r = std::max(evaluation_radius(*w->value), evaluation_radius(*w->weight_arg));
  for (const auto& c : t.children()) r = std::max(r, max_global_radius(*c));
  return r;
}

}  // namespace

SparseLimitResult sparse_limit(TermPtr term, const FunctionRegistry& registry,
                               const GraphModelSpec& model, const FeatureDistSpec& features,
                               const SparseLimitOptions& options) {
  if (!term->closed()) throw ConfigError("sparse limit needs a closed term");
  if (options.mc_samples < 2 || options.nested_mc < 2)
    throw ConfigError("Monte-Carlo sample counts must be at least 2");
  if (!(options.eps >= 0 && options.eps < 1)) throw ConfigError("mass tolerance must lie in [0, 1)");
  features.validate();
  check_functions(*term, registry);
  const int dim = options.dim > 0 ? options.dim : features.dim;

  CensusConfig cc = options.census;
  cc.radius = max_global_radius(*term);
  cc.roots = 1;
  cc.tuples_per_graph = 0;
  const CensusTable census = neighborhood_census(model, cc);
  if (census.truncated_mass > options.eps)
    throw Error("census leaves " + std::to_string(census.truncated_mass) +
                " of the mass in neighborhoods over the size cap (tolerance " +
                std::to_string(options.eps) + "); raise the cap or lower the reach");

  std::vector<TypeSample> types;
  double kept = 0;
  for (const auto& e : census.entries) {
    if (kept >= 1.0 - options.eps) break;
    types.push_back({to_graph(decode_code(e.code)), e.proportion});
    kept += e.proportion;
  }
  if (types.empty()) throw Error("census produced no neighborhood types");
  for (auto& t : types) t.weight /= kept;

  const std::size_t used = types.size();
  SparseEvaluator ev(registry, std::move(types), features, options, dim);
  ev.index(*term);
  Estimate e = ev.top(*term);
  SparseLimitResult out;
  out.value = {e.value, e.se, ev.draws_used()};
  out.truncated_mass = 1.0 - kept;
  out.radius = cc.radius;
  out.types_used = used;
  return out;
}

}  // namespace aggterm
