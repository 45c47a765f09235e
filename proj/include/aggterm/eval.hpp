#pragma once

#include <map>
#include <string>
#include <unordered_map>

#include "aggterm/graph.hpp"
#include "aggterm/registry.hpp"
#include "aggterm/term.hpp"
#include "aggterm/walks.hpp"

namespace aggterm {

using Assignment = std::map<std::string, int>;

struct EvalOptions {
  /// Program dimension; 0 means the graph's feature dimension (or 1 if the
  /// graph carries no features).
  int dim = 0;
  RwMethod rw = rw_method::Auto{};
};

/// Direct recursive interpretation at one variable assignment.
Vector eval_term(const Term& t, const FeaturedGraph& g, const Assignment& assignment,
                 const FunctionRegistry& registry, const EvalOptions& options = {});

/// Batch evaluator for one term. Sub-terms with at most one free variable are
/// computed once per node and reused; results are bit-identical to eval_term.
/// Immutable after construction and safe to share between threads.
class Evaluator {
 public:
  Evaluator(TermPtr term, const FunctionRegistry& registry, EvalOptions options = {});

  const TermPtr& term() const { return term_; }

  Vector at(const FeaturedGraph& g, const Assignment& assignment) const;
  /// Closed terms only.
  Vector closed(const FeaturedGraph& g) const;
  /// Terms with at most one free variable; row v is the value at v.
  FeatureMatrix nodewise(const FeaturedGraph& g) const;

 private:
  TermPtr term_;
  EvalOptions options_;
  std::unordered_map<std::string, FunctionPtr> functions_;
};

Vector eval_closed_batch(const Term& t, const FeaturedGraph& g, const FunctionRegistry& registry,
                         const EvalOptions& options = {});
FeatureMatrix eval_nodewise(const Term& t, const FeaturedGraph& g,
                            const FunctionRegistry& registry, const EvalOptions& options = {});

}  // namespace aggterm
