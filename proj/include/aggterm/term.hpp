#pragma once

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "aggterm/graph.hpp"

namespace aggterm {

class Term;
using TermPtr = std::shared_ptr<const Term>;

namespace term {
/// A constant; `scalar` literals broadcast to the program dimension.
struct Const {
  Vector value;
  bool scalar = false;
};
/// H(var)
struct Feature {
  std::string var;
};
/// Random-walk return probabilities for walk lengths 1..kmax.
struct Rw {
  std::string var;
  int kmax;
};
struct Apply {
  std::string fn;
  std::vector<TermPtr> args;
};
/// Weighted mean of `value` over y in N(anchor), weights weight_map(weight_arg).
struct LocalWMean {
  std::string bound;
  std::string anchor;
  TermPtr value;
  TermPtr weight_arg;
  std::string weight_map;
};
/// Weighted mean over every node of the graph.
struct GlobalWMean {
  std::string bound;
  TermPtr value;
  TermPtr weight_arg;
  std::string weight_map;
};
/// sum over y in N(anchor) of value / sqrt(deg(anchor) deg(y)).
struct GcnAgg {
  std::string bound;
  std::string anchor;
  TermPtr value;
};
}  // namespace term

class Term {
 public:
  using Node = std::variant<term::Const, term::Feature, term::Rw, term::Apply, term::LocalWMean,
                            term::GlobalWMean, term::GcnAgg>;

  explicit Term(Node node);

  const Node& node() const { return node_; }
  template <class T>
  const T* as() const {
    return std::get_if<T>(&node_);
  }

  /// Free variables, sorted.
  const std::vector<std::string>& free_vars() const { return free_; }
  bool closed() const { return free_.empty(); }

  /// Direct sub-terms in a fixed order.
  std::vector<TermPtr> children() const;

 private:
  Node node_;
  std::vector<std::string> free_;
};

bool operator==(const Term& a, const Term& b);

TermPtr constant(double c);
TermPtr constant(Vector v);
TermPtr feature(std::string var);
TermPtr rw(std::string var, int kmax);
TermPtr apply(std::string fn, std::vector<TermPtr> args = {});
/// `weight_arg` defaults to `value`.
TermPtr local_wmean(std::string bound, std::string anchor, TermPtr value, std::string weight_map,
                    TermPtr weight_arg = nullptr);
TermPtr global_wmean(std::string bound, TermPtr value, std::string weight_map,
                     TermPtr weight_arg = nullptr);
TermPtr local_mean(std::string bound, std::string anchor, TermPtr value);
TermPtr global_mean(std::string bound, TermPtr value);
TermPtr gcn(std::string bound, std::string anchor, TermPtr value);

const std::vector<std::string>& free_vars(const Term& t);

/// Nesting depth of local aggregators; rw(x, k) counts as k.
int reach(const Term& t);

/// Throws ConfigError when a binder reuses a variable bound by an enclosing
/// binder, its own anchor, or a variable free in `t`.
void check_scoping(const Term& t);

/// Number of distinct nodes in the term DAG.
std::size_t term_size(const Term& t);

}  // namespace aggterm
