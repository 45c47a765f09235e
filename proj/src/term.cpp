#include "aggterm/term.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

#include "aggterm/error.hpp"

namespace aggterm {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::vector<std::string> compute_free(const Term::Node& node) {
  std::set<std::string> out;
  auto add = [&](const TermPtr& t) { out.insert(t->free_vars().begin(), t->free_vars().end()); };
  std::visit(overloaded{
                 [](const term::Const&) {},
                 [&](const term::Feature& f) { out.insert(f.var); },
                 [&](const term::Rw& r) { out.insert(r.var); },
                 [&](const term::Apply& a) {
                   for (const auto& arg : a.args) add(arg);
                 },
                 [&](const term::LocalWMean& w) {
                   add(w.value);
                   add(w.weight_arg);
                   out.erase(w.bound);
                   out.insert(w.anchor);
                 },
                 [&](const term::GlobalWMean& w) {
                   add(w.value);
                   add(w.weight_arg);
                   out.erase(w.bound);
                 },
                 [&](const term::GcnAgg& g) {
                   add(g.value);
                   out.erase(g.bound);
                   out.insert(g.anchor);
                 },
             },
             node);
  return {out.begin(), out.end()};
}

void require(const TermPtr& t, const char* what) {
  if (!t) throw ConfigError(std::string("missing sub-term: ") + what);
}

}  // namespace

Term::Term(Node node) : node_(std::move(node)) {
  std::visit(overloaded{
                 [](const term::Const& c) {
                   if (c.value.size() == 0) throw ConfigError("empty constant");
                   if (!c.value.allFinite()) throw ConfigError("non-finite constant");
                 },
                 [](const term::Feature&) {},
                 [](const term::Rw& r) {
                   if (r.kmax < 1) throw ConfigError("rw walk length must be positive");
                 },
                 [](const term::Apply& a) {
                   for (const auto& arg : a.args) require(arg, "function argument");
                 },
                 [](const term::LocalWMean& w) {
                   require(w.value, "aggregated value");
                   require(w.weight_arg, "weight argument");
                   if (w.bound == w.anchor) throw ConfigError("aggregator binds its own anchor");
                 },
                 [](const term::GlobalWMean& w) {
                   require(w.value, "aggregated value");
                   require(w.weight_arg, "weight argument");
                 },
                 [](const term::GcnAgg& g) {
                   require(g.value, "aggregated value");
                   if (g.bound == g.anchor) throw ConfigError("aggregator binds its own anchor");
                 },
             },
             node_);
  free_ = compute_free(node_);
}

std::vector<TermPtr> Term::children() const {
  return std::visit(overloaded{
                        [](const term::Apply& a) { return a.args; },
                        [](const term::LocalWMean& w) {
                          return std::vector<TermPtr>{w.value, w.weight_arg};
                        },
                        [](const term::GlobalWMean& w) {
                          return std::vector<TermPtr>{w.value, w.weight_arg};
                        },
                        [](const term::GcnAgg& g) { return std::vector<TermPtr>{g.value}; },
                        [](const auto&) { return std::vector<TermPtr>{}; },
                    },
                    node_);
}

bool operator==(const Term& a, const Term& b) {
  if (&a == &b) return true;
  if (a.node().index() != b.node().index()) return false;
  auto same = [](const TermPtr& x, const TermPtr& y) { return *x == *y; };
  return std::visit(
      overloaded{
          [&](const term::Const& x) {
            const auto& y = std::get<term::Const>(b.node());
            return x.scalar == y.scalar && x.value.size() == y.value.size() &&
                   x.value == y.value;
          },
          [&](const term::Feature& x) { return x.var == std::get<term::Feature>(b.node()).var; },
          [&](const term::Rw& x) {
            const auto& y = std::get<term::Rw>(b.node());
            return x.var == y.var && x.kmax == y.kmax;
          },
          [&](const term::Apply& x) {
            const auto& y = std::get<term::Apply>(b.node());
            return x.fn == y.fn && std::equal(x.args.begin(), x.args.end(), y.args.begin(),
                                              y.args.end(), same);
          },
          [&](const term::LocalWMean& x) {
            const auto& y = std::get<term::LocalWMean>(b.node());
            return x.bound == y.bound && x.anchor == y.anchor && x.weight_map == y.weight_map &&
                   same(x.value, y.value) && same(x.weight_arg, y.weight_arg);
          },
          [&](const term::GlobalWMean& x) {
            const auto& y = std::get<term::GlobalWMean>(b.node());
            return x.bound == y.bound && x.weight_map == y.weight_map && same(x.value, y.value) &&
                   same(x.weight_arg, y.weight_arg);
          },
          [&](const term::GcnAgg& x) {
            const auto& y = std::get<term::GcnAgg>(b.node());
            return x.bound == y.bound && x.anchor == y.anchor && same(x.value, y.value);
          },
      },
      a.node());
}

TermPtr constant(double c) { return std::make_shared<const Term>(term::Const{Vector::Constant(1, c), true}); }
TermPtr constant(Vector v) { return std::make_shared<const Term>(term::Const{std::move(v), false}); }
TermPtr feature(std::string var) { return std::make_shared<const Term>(term::Feature{std::move(var)}); }
TermPtr rw(std::string var, int kmax) {
  return std::make_shared<const Term>(term::Rw{std::move(var), kmax});
}
TermPtr apply(std::string fn, std::vector<TermPtr> args) {
  return std::make_shared<const Term>(term::Apply{std::move(fn), std::move(args)});
}
TermPtr local_wmean(std::string bound, std::string anchor, TermPtr value, std::string weight_map,
                    TermPtr weight_arg) {
  if (!weight_arg) weight_arg = value;
  return std::make_shared<const Term>(term::LocalWMean{std::move(bound), std::move(anchor),
                                                       std::move(value), std::move(weight_arg),
                                                       std::move(weight_map)});
}
TermPtr global_wmean(std::string bound, TermPtr value, std::string weight_map, TermPtr weight_arg) {
  if (!weight_arg) weight_arg = value;
  return std::make_shared<const Term>(term::GlobalWMean{std::move(bound), std::move(value),
                                                        std::move(weight_arg),
                                                        std::move(weight_map)});
}
TermPtr local_mean(std::string bound, std::string anchor, TermPtr value) {
  return local_wmean(std::move(bound), std::move(anchor), std::move(value), "one");
}
TermPtr global_mean(std::string bound, TermPtr value) {
  return global_wmean(std::move(bound), std::move(value), "one");
}
TermPtr gcn(std::string bound, std::string anchor, TermPtr value) {
  return std::make_shared<const Term>(
      term::GcnAgg{std::move(bound), std::move(anchor), std::move(value)});
}

const std::vector<std::string>& free_vars(const Term& t) { return t.free_vars(); }

int reach(const Term& t) {
  return std::visit(overloaded{
                        [](const term::Const&) { return 0; },
                        [](const term::Feature&) { return 0; },
                        [](const term::Rw& r) { return r.kmax; },
                        [](const term::Apply& a) {
                          int r = 0;
                          for (const auto& arg : a.args) r = std::max(r, reach(*arg));
                          return r;
                        },
                        [](const term::LocalWMean& w) {
                          return std::max(reach(*w.value), reach(*w.weight_arg)) + 1;
                        },
                        [](const term::GlobalWMean&) { return 0; },
                        [](const term::GcnAgg& g) { return reach(*g.value) + 1; },
                    },
                    t.node());
}

namespace {

void check_scope(const Term& t, std::vector<std::string>& bound,
                 const std::vector<std::string>& outer_free) {
  auto bind = [&](const std::string& var, const std::string* anchor) {
    if (anchor && *anchor == var) throw ConfigError("variable '" + var + "' binds its own anchor");
    if (std::find(bound.begin(), bound.end(), var) != bound.end())
      throw ConfigError("variable '" + var + "' is already bound by an enclosing aggregator");
    if (std::binary_search(outer_free.begin(), outer_free.end(), var))
      throw ConfigError("bound variable '" + var + "' is also used free");
    bound.push_back(var);
  };
  std::visit(overloaded{
                 [&](const term::LocalWMean& w) { bind(w.bound, &w.anchor); },
                 [&](const term::GlobalWMean& w) { bind(w.bound, nullptr); },
                 [&](const term::GcnAgg& g) { bind(g.bound, &g.anchor); },
                 [](const auto&) {},
             },
             t.node());
  const bool binder = std::holds_alternative<term::LocalWMean>(t.node()) ||
                      std::holds_alternative<term::GlobalWMean>(t.node()) ||
                      std::holds_alternative<term::GcnAgg>(t.node());
  for (const auto& c : t.children()) check_scope(*c, bound, outer_free);
  if (binder) bound.pop_back();
}

}  // namespace

void check_scoping(const Term& t) {
  std::vector<std::string> bound;
  check_scope(t, bound, t.free_vars());
}

std::size_t term_size(const Term& t) {
  std::unordered_set<const Term*> seen;
  std::vector<const Term*> stack{&t};
  while (!stack.empty()) {
    const Term* cur = stack.back();
    stack.pop_back();
    if (!seen.insert(cur).second) continue;
    for (const auto& c : cur->children()) stack.push_back(c.get());
  }
  return seen.size();
}

}  // namespace aggterm
