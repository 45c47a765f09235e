#include "aggterm/eval.hpp"

#include <cmath>
#include <memory>

#include "aggterm/error.hpp"
#include "aggterm/parser.hpp"
#include "interpreter.hpp"

namespace aggterm {

namespace {

using detail::Interpreter;
using detail::Memo;

int program_dim(const FeaturedGraph& g, const EvalOptions& options) {
  if (options.dim > 0) return options.dim;
  return g.dim() > 0 ? g.dim() : 1;
}

void bind_all(Interpreter& in, const Assignment& assignment, const FeaturedGraph& g) {
  for (const auto& [var, node] : assignment) {
    if (node < 0 || node >= g.num_nodes())
      throw EvalError("variable '" + var + "' assigned to a node outside the graph");
    in.env.push_back({&var, node});
  }
}

}  // namespace

Vector eval_term(const Term& t, const FeaturedGraph& g, const Assignment& assignment,
                 const FunctionRegistry& registry, const EvalOptions& options) {
  Interpreter in(g, program_dim(g, options), options.rw, &registry, nullptr, nullptr);
  bind_all(in, assignment, g);
  return in.eval(t);
}

Evaluator::Evaluator(TermPtr term, const FunctionRegistry& registry, EvalOptions options)
    : term_(std::move(term)), options_(std::move(options)) {
  check_functions(*term_, registry);
  std::vector<const Term*> stack{term_.get()};
  std::unordered_map<const Term*, bool> seen;
  while (!stack.empty()) {
    const Term* cur = stack.back();
    stack.pop_back();
    if (seen[cur]) continue;
    seen[cur] = true;
    if (const auto* a = cur->as<term::Apply>()) functions_.emplace(a->fn, registry.get(a->fn));
    if (const auto* w = cur->as<term::LocalWMean>())
      functions_.emplace(w->weight_map, registry.get(w->weight_map));
    if (const auto* w = cur->as<term::GlobalWMean>())
      functions_.emplace(w->weight_map, registry.get(w->weight_map));
    for (const auto& c : cur->children()) stack.push_back(c.get());
  }
}

Vector Evaluator::at(const FeaturedGraph& g, const Assignment& assignment) const {
  Memo memo;
  Interpreter in(g, program_dim(g, options_), options_.rw, nullptr, &functions_, &memo);
  bind_all(in, assignment, g);
  return in.eval(*term_);
}

Vector Evaluator::closed(const FeaturedGraph& g) const {
  if (!term_->closed()) throw EvalError("term has free variables; it is not closed");
  return at(g, {});
}

FeatureMatrix Evaluator::nodewise(const FeaturedGraph& g) const {
  const auto& fv = term_->free_vars();
  if (fv.size() > 1) throw EvalError("nodewise evaluation needs at most one free variable");
  const int dim = program_dim(g, options_);
  Memo memo;
  Interpreter in(g, dim, options_.rw, nullptr, &functions_, &memo);
  FeatureMatrix out(g.num_nodes(), dim);
  const std::string var = fv.empty() ? std::string() : fv[0];
  for (int v = 0; v < g.num_nodes(); ++v) {
    in.env.clear();
    if (!fv.empty()) in.env.push_back({&var, v});
    out.row(v) = in.eval(*term_).transpose();
  }
  return out;
}

Vector eval_closed_batch(const Term& t, const FeaturedGraph& g, const FunctionRegistry& registry,
                         const EvalOptions& options) {
  return Evaluator(std::shared_ptr<const Term>(std::shared_ptr<const Term>(), &t), registry, options)
      .closed(g);
}

FeatureMatrix eval_nodewise(const Term& t, const FeaturedGraph& g,
                            const FunctionRegistry& registry, const EvalOptions& options) {
  return Evaluator(std::shared_ptr<const Term>(std::shared_ptr<const Term>(), &t), registry, options)
      .nodewise(g);
}

}  // namespace aggterm
