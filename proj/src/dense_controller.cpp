#include "aggterm/limits.hpp"

#include <cmath>
#include <unordered_map>

#include "aggterm/error.hpp"
#include "aggterm/rng.hpp"

namespace aggterm {

DenseModel DenseModel::er(double p, bool vanishing) {
  if (!(p >= 0 && p <= 1)) throw ConfigError("edge probability must lie in [0, 1]");
  DenseModel m;
  m.P(0, 0) = p;
  m.vanishing = vanishing;
  return m;
}

DenseModel DenseModel::sbm(std::vector<double> q, Matrix P) {
  GraphModelSpec{SbmModel{q, P}}.validate();
  DenseModel m;
  m.q = std::move(q);
  m.P = std::move(P);
  return m;
}

DenseModel DenseModel::from_spec(const GraphModelSpec& spec) {
  spec.validate();
  if (const auto* sbm = std::get_if<SbmModel>(&spec.model)) return DenseModel::sbm(sbm->fractions, sbm->P);
  if (std::holds_alternative<BaModel>(spec.model))
    throw ConfigError("preferential attachment graphs are sparse; use the sparse limit");
  const auto& schedule = std::get<ErModel>(spec.model).schedule;
  if (std::holds_alternative<schedule::Sparse>(schedule.rule))
    throw ConfigError("the K/n schedule is sparse; use the sparse limit");
  if (std::holds_alternative<schedule::Alternating>(schedule.rule))
    throw ConfigError("alternating schedules have no limit");
  const double p = *schedule_limit(schedule);
  return DenseModel::er(p, !std::holds_alternative<schedule::Dense>(schedule.rule));
}

namespace {

struct Bound {
  const std::string* var;
  const Vector* feature;
  int community;
};

struct Estimate {
  Vector value;
  Vector se;
};

}  // namespace

struct DenseController::State {
  FunctionRegistry registry;
  std::unordered_map<std::string, FunctionPtr> functions;
  DenseModel model;
  FeatureDistSpec dist;
  DenseControllerOptions options;
  int dim = 0;
  std::unordered_map<const Term*, int> ids;
  std::unordered_map<const Term*, std::vector<Vector>> draws;

  struct Call {
    std::vector<Bound> env;
    std::map<std::pair<const Term*, int>, Estimate> memo;
  };

  const FunctionDef& fn(const std::string& name) const { return *functions.at(name); }

  static bool constant_body(const Term& value, const Term& weight, const std::string& bound) {
    for (const Term* t : {&value, &weight})
      for (const auto& v : t->free_vars())
        if (v != bound) return false;
    return true;
  }

  const Bound& lookup(const Call& call, const std::string& var) const {
    for (auto it = call.env.rbegin(); it != call.env.rend(); ++it)
      if (*it->var == var) return *it;
    throw EvalError("no value bound to variable '" + var + "'");
  }

  Vector eval(const Term& t, Call& call) const {
    if (const auto* c = t.as<term::Const>()) {
      if (c->scalar) return Vector::Constant(dim, c->value[0]);
      if (c->value.size() != dim) throw EvalError("constant has the wrong dimension");
      return c->value;
    }
    if (const auto* f = t.as<term::Feature>()) return *lookup(call, f->var).feature;
    if (t.as<term::Rw>()) return Vector::Zero(dim);
    if (const auto* a = t.as<term::Apply>()) {
      std::vector<Vector> args;
      for (const auto& arg : a->args) args.push_back(eval(*arg, call));
      Vector out = fn(a->fn).fn(args, dim);
      if (out.size() != dim || !out.allFinite()) throw EvalError("function '" + a->fn + "' misbehaved");
      return out;
    }
    return aggregate(t, call).value;
  }

  Estimate top(const Term& t, Call& call) const {
    if (const auto* a = t.as<term::Apply>()) {
      std::vector<Estimate> args;
      for (const auto& arg : a->args) args.push_back(top(*arg, call));
      return propagate(fn(a->fn), args);
    }
    if (t.as<term::LocalWMean>() || t.as<term::GlobalWMean>()) return aggregate(t, call);
    Vector v = eval(t, call);
    return {v, Vector::Zero(dim)};
  }

  Estimate propagate(const FunctionDef& f, const std::vector<Estimate>& args) const {
    std::vector<Vector> x;
    for (const auto& a : args) x.push_back(a.value);
    Estimate out{f.fn(x, dim), Vector::Zero(dim)};
    Vector var = Vector::Zero(dim);
    for (std::size_t j = 0; j < x.size(); ++j)
      for (int k = 0; k < dim; ++k) {
        const double s = args[j].se[k];
        if (s <= 0) continue;
        const double h = 1e-6 * std::max(1.0, std::abs(x[j][k]));
        auto up = x, down = x;
        up[j][k] += h;
        down[j][k] -= h;
        const Vector grad = (f.fn(up, dim) - f.fn(down, dim)) / (2 * h);
        var += (grad * s).cwiseAbs2();
      }
    out.se = var.cwiseSqrt();
    return out;
  }

  Estimate aggregate(const Term& t, Call& call) const {
    const std::string* bound;
    const Term *value, *weight;
    const std::string* weight_map;
    std::optional<int> anchor_comm;
    if (const auto* w = t.as<term::LocalWMean>()) {
      bound = &w->bound;
      value = w->value.get();
      weight = w->weight_arg.get();
      weight_map = &w->weight_map;
      anchor_comm = lookup(call, w->anchor).community;
    } else if (const auto* w = t.as<term::GlobalWMean>()) {
      bound = &w->bound;
      value = w->value.get();
      weight = w->weight_arg.get();
      weight_map = &w->weight_map;
    } else {
      throw ConfigError("the GCN aggregator has no dense-model limit construction");
    }

    const bool constant = constant_body(*value, *weight, *bound);
    const auto key = std::make_pair(&t, anchor_comm.value_or(-1));
    if (constant)
      if (auto it = call.memo.find(key); it != call.memo.end()) return it->second;

    // Community mixture of the fresh node.
    const int M = model.communities();
    std::vector<double> mix(M);
    if (!anchor_comm || model.vanishing) {
      mix = model.q;
    } else {
      double r = 0;
      for (int c = 0; c < M; ++c) r += mix[c] = model.q[c] * model.P(*anchor_comm, c);
      if (r <= 0) {
        Estimate zero{Vector::Zero(dim), Vector::Zero(dim)};
        if (constant) call.memo.emplace(key, zero);
        return zero;
      }
      for (double& m : mix) m /= r;
    }

    const auto& samples = draws.at(&t);
    const auto S = static_cast<Eigen::Index>(samples.size());
    const bool use_exp = *weight_map == "exp";
    const FunctionDef& h = fn(*weight_map);
    // Per sample and community: value and weight argument.
    std::vector<Matrix> vals(M), etas(M);
    for (int c = 0; c < M; ++c) {
      if (mix[c] == 0) continue;
      vals[c].resize(dim, S);
      etas[c].resize(dim, S);
      for (Eigen::Index s = 0; s < S; ++s) {
        call.env.push_back({bound, &samples[s], c});
        etas[c].col(s) = eval(*weight, call);
        vals[c].col(s) = eval(*value, call);
        call.env.pop_back();
      }
    }
    Vector shift = Vector::Zero(dim);
    if (use_exp) {
      shift = Vector::Constant(dim, -std::numeric_limits<double>::infinity());
      for (int c = 0; c < M; ++c)
        if (mix[c] != 0) shift = shift.cwiseMax(etas[c].rowwise().maxCoeff());
    }
    Matrix num = Matrix::Zero(dim, S), den = Matrix::Zero(dim, S);
    for (int c = 0; c < M; ++c) {
      if (mix[c] == 0) continue;
      Matrix w(dim, S);
      if (use_exp) {
        w = (etas[c].colwise() - shift).array().exp();
      } else {
        for (Eigen::Index s = 0; s < S; ++s) {
          const Vector arg = etas[c].col(s);
          w.col(s) = h.fn(std::span<const Vector>(&arg, 1), dim);
        }
      }
      num += mix[c] * vals[c].cwiseProduct(w);
      den += mix[c] * w;
    }
    const Vector nbar = num.rowwise().mean(), dbar = den.rowwise().mean();
    if (!((dbar.array() > 0).all() && dbar.allFinite()))
      throw EvalError("weight map '" + *weight_map + "' produced a non-positive total");
    Estimate est;
    est.value = nbar.cwiseQuotient(dbar);
    const Matrix resid = num - est.value.asDiagonal() * den;
    const double denom = S > 1 ? static_cast<double>(S) * (S - 1) : 1.0;
    est.se = (resid.cwiseAbs2().rowwise().sum() / denom).cwiseSqrt().cwiseQuotient(dbar);
    if (constant) call.memo.emplace(key, est);
    return est;
  }
};

DenseController::DenseController(TermPtr term, const FunctionRegistry& registry, DenseModel model,
                                 FeatureDistSpec features, DenseControllerOptions options)
    : term_(std::move(term)), state_(std::make_shared<State>()) {
  if (options.mc_samples < 2 || options.nested_mc < 2)
    throw ConfigError("Monte-Carlo sample counts must be at least 2");
  features.validate();
  check_functions(*term_, registry);
  dim_ = options.dim > 0 ? options.dim : features.dim;
  if (dim_ < features.dim) throw ConfigError("program dimension is smaller than the feature dimension");
  auto& st = *state_;
  st.model = std::move(model);
  st.dist = features;
  st.options = options;
  st.dim = dim_;

  // Number aggregators in a fixed DFS order; top-level and constant ones get
  // the full sample budget.
  struct Item {
    const Term* t;
    bool nested;
  };
  std::vector<Item> stack{{term_.get(), false}};
  int next_id = 0;
  while (!stack.empty()) {
    auto [t, nested] = stack.back();
    stack.pop_back();
    if (st.ids.count(t)) continue;
    st.ids[t] = next_id++;
    if (const auto* a = t->as<term::Apply>()) st.functions.emplace(a->fn, registry.get(a->fn));
    if (t->as<term::GcnAgg>()) throw ConfigError("the GCN aggregator has no dense-model limit construction");
    const Term *value = nullptr, *weight = nullptr;
    const std::string* bound = nullptr;
    if (const auto* w = t->as<term::LocalWMean>()) {
      value = w->value.get(), weight = w->weight_arg.get(), bound = &w->bound;
      st.functions.emplace(w->weight_map, registry.get(w->weight_map));
    }
    if (const auto* w = t->as<term::GlobalWMean>()) {
      value = w->value.get(), weight = w->weight_arg.get(), bound = &w->bound;
      st.functions.emplace(w->weight_map, registry.get(w->weight_map));
    }
    if (value) {
      const bool full = !nested || State::constant_body(*value, *weight, *bound);
      const std::int64_t count = full ? options.mc_samples : options.nested_mc;
      std::vector<Vector> draws;
      draws.reserve(count);
      const int id = st.ids[t];
      for (std::int64_t s = 0; s < count; ++s) {
        Stream rng = Stream::derive(options.seed, "dense", static_cast<std::uint64_t>(id),
                                    static_cast<std::uint64_t>(s));
        draws.push_back(sample_feature(st.dist, rng, dim_));
      }
      st.draws.emplace(t, std::move(draws));
    }
    for (const auto& c : t->children()) stack.push_back({c.get(), nested || value != nullptr});
  }
}

ControllerValue DenseController::closed() const {
  if (!term_->closed()) throw ConfigError("term has free variables; it is not closed");
  return at({}, GraphType{}, {});
}

ControllerValue DenseController::at(const std::map<std::string, Vector>& features,
                                    const GraphType& type,
                                    const std::map<std::string, int>& communities) const {
  const auto& fv = term_->free_vars();
  if (type.k != static_cast<int>(fv.size()))
    throw ConfigError("graph type size does not match the free variables");
  State::Call call;
  for (const auto& v : fv) {
    auto it = features.find(v);
    if (it == features.end()) throw ConfigError("no feature vector for variable '" + v + "'");
    if (it->second.size() != dim_) throw ConfigError("feature vector for '" + v + "' has the wrong dimension");
    int c = 0;
    if (auto ct = communities.find(v); ct != communities.end()) c = ct->second;
    if (c < 0 || c >= state_->model.communities()) throw ConfigError("community out of range");
    call.env.push_back({&it->first, &it->second, c});
  }
  Estimate e = state_->top(*term_, call);
  return {e.value, e.se, state_->options.mc_samples};
}

ControllerValue dense_controller(TermPtr term, const FunctionRegistry& registry,
                                 const DenseModel& model, const FeatureDistSpec& features,
                                 const DenseControllerOptions& options) {
  return DenseController(std::move(term), registry, model, features, options).closed();
}

}  // namespace aggterm
