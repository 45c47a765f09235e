#include "aggterm/parser.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include "aggterm/error.hpp"

namespace aggterm {

namespace {

struct Pos {
  int line = 1;
  int col = 1;
};

enum class Tok { Ident, Number, Punct, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  double number = 0;
  Pos pos;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    skip();
    Token t;
    t.pos = pos_;
    if (i_ >= src_.size()) return t;
    const char c = src_[i_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i_;
      while (j < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[j])) ||
                                 src_[j] == '_' || src_[j] == '.'))
        ++j;
      t.kind = Tok::Ident;
      t.text = std::string(src_.substr(i_, j - i_));
      advance(j - i_);
      return t;
    }
    const bool signed_number =
        (c == '-' || c == '+') && i_ + 1 < src_.size() &&
        (std::isdigit(static_cast<unsigned char>(src_[i_ + 1])) || src_[i_ + 1] == '.');
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' || signed_number) {
      const char* first = src_.data() + i_ + (c == '+' ? 1 : 0);
      const char* last = src_.data() + src_.size();
      double v = 0;
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || !std::isfinite(v)) throw ParseError("malformed number", pos_.line, pos_.col);
      t.kind = Tok::Number;
      t.number = v;
      t.text = std::string(src_.substr(i_, ptr - (src_.data() + i_)));
      advance(ptr - (src_.data() + i_));
      return t;
    }
    if (std::string_view("()[],").find(c) != std::string_view::npos) {
      t.kind = Tok::Punct;
      t.text = std::string(1, c);
      advance(1);
      return t;
    }
    throw ParseError(std::string("unexpected character '") + c + "'", pos_.line, pos_.col);
  }

 private:
  void skip() {
    while (i_ < src_.size()) {
      const char c = src_[i_];
      if (c == '#') {
        while (i_ < src_.size() && src_[i_] != '\n') advance(1);
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance(1);
      } else {
        break;
      }
    }
  }

  void advance(std::size_t k) {
    for (std::size_t s = 0; s < k; ++s, ++i_) {
      if (src_[i_] == '\n') {
        ++pos_.line;
        pos_.col = 1;
      } else {
        ++pos_.col;
      }
    }
  }

  std::string_view src_;
  std::size_t i_ = 0;
  Pos pos_;
};

class Parser {
 public:
  Parser(std::string_view text, const FunctionRegistry& registry, ParseOptions options)
      : lex_(text), registry_(registry), options_(options) {
    tok_ = lex_.next();
  }

  TermPtr parse() {
    TermPtr t = term();
    if (tok_.kind != Tok::End) fail("unexpected trailing input '" + tok_.text + "'");
    for (const auto& [var, pos] : binders_)
      if (free_uses_.count(var))
        throw ParseError("bound variable '" + var + "' is also used free", pos.line, pos.col);
    return t;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { fail_at(msg, tok_.pos); }
  [[noreturn]] static void fail_at(const std::string& msg, Pos p) {
    throw ParseError(msg, p.line, p.col);
  }

  void bump() { tok_ = lex_.next(); }

  bool is_punct(char c) const { return tok_.kind == Tok::Punct && tok_.text[0] == c; }

  void expect(char c) {
    if (!is_punct(c)) fail(std::string("expected '") + c + "'" + found());
    bump();
  }

  std::string found() const {
    return tok_.kind == Tok::End ? " at end of input" : " but found '" + tok_.text + "'";
  }

  std::string ident(const char* what) {
    if (tok_.kind != Tok::Ident) fail(std::string("expected ") + what + found());
    std::string s = tok_.text;
    bump();
    return s;
  }

  void keyword(const char* kw) {
    if (tok_.kind != Tok::Ident || tok_.text != kw) fail(std::string("expected '") + kw + "'" + found());
    bump();
  }

  std::string use_var() {
    const Pos p = tok_.pos;
    std::string v = ident("a variable");
    if (std::find(bound_.begin(), bound_.end(), v) == bound_.end()) {
      if (options_.closed) fail_at("variable '" + v + "' is not bound by any aggregator", p);
      free_uses_.emplace(v, p);
    }
    return v;
  }

  double number() {
    if (tok_.kind != Tok::Number) fail("expected a number" + found());
    double v = tok_.number;
    bump();
    return v;
  }

  TermPtr term() {
    if (tok_.kind == Tok::Number) return constant(number());
    if (is_punct('[')) {
      bump();
      std::vector<double> xs{number()};
      while (is_punct(',')) {
        bump();
        xs.push_back(number());
      }
      expect(']');
      return constant(Eigen::Map<Vector>(xs.data(), static_cast<Eigen::Index>(xs.size())));
    }
    if (tok_.kind != Tok::Ident) fail("expected a term" + found());
    const Pos start = tok_.pos;
    const std::string name = tok_.text;
    bump();
    if (name == "H") {
      expect('(');
      auto v = use_var();
      expect(')');
      return feature(v);
    }
    if (name == "rw") {
      expect('(');
      auto v = use_var();
      expect(',');
      const Pos kp = tok_.pos;
      const double k = number();
      if (k < 1 || k != std::floor(k) || k > 1e6) fail_at("rw walk length must be a positive integer", kp);
      expect(')');
      return rw(v, static_cast<int>(k));
    }
    if ((name == "wmean" || name == "mean" || name == "gcn") && is_punct('['))
      return aggregator(name, start);
    return application(name, start);
  }

  TermPtr application(const std::string& name, Pos start) {
    auto f = registry_.find(name);
    if (!f) fail_at("unknown function '" + name + "'", start);
    std::vector<TermPtr> args;
    if (is_punct('(')) {
      bump();
      if (!is_punct(')')) {
        args.push_back(term());
        while (is_punct(',')) {
          bump();
          args.push_back(term());
        }
      }
      expect(')');
    }
    if (!f->accepts(static_cast<int>(args.size())))
      fail_at("function '" + name + "' does not take " + std::to_string(args.size()) +
                  " argument(s)",
              start);
    return apply(name, std::move(args));
  }

  TermPtr aggregator(const std::string& kind, Pos start) {
    expect('[');
    const Pos bp = tok_.pos;
    const std::string bound = ident("a bound variable");
    std::optional<std::string> anchor;
    if (tok_.kind == Tok::Ident && tok_.text == "in") {
      bump();
      keyword("N");
      expect('(');
      const Pos ap = tok_.pos;
      anchor = use_var();
      if (*anchor == bound) fail_at("aggregator binds its own anchor", ap);
      expect(')');
    }
    expect(']');
    if (kind == "gcn" && !anchor) fail_at("gcn aggregates over a neighborhood: gcn[y in N(x)]", start);
    if (std::find(bound_.begin(), bound_.end(), bound) != bound_.end())
      fail_at("variable '" + bound + "' is already bound by an enclosing aggregator", bp);
    binders_.emplace_back(bound, bp);

    bound_.push_back(bound);
    expect('(');
    TermPtr value = term();
    std::string weight_map = "one";
    TermPtr weight_arg;
    if (kind == "wmean") {
      expect(',');
      const Pos wp = tok_.pos;
      weight_map = ident("a weight function");
      auto f = registry_.find(weight_map);
      if (!f) fail_at("unknown function '" + weight_map + "'", wp);
      if (!f->positive) fail_at("weight function '" + weight_map + "' is not positive", wp);
      if (!f->accepts(1)) fail_at("weight function '" + weight_map + "' must take one argument", wp);
      if (is_punct(',')) {
        bump();
        weight_arg = term();
      }
    }
    expect(')');
    bound_.pop_back();

    if (kind == "gcn") return gcn(bound, *anchor, value);
    if (anchor) return local_wmean(bound, *anchor, value, weight_map, weight_arg);
    return global_wmean(bound, value, weight_map, weight_arg);
  }

  Lexer lex_;
  const FunctionRegistry& registry_;
  ParseOptions options_;
  Token tok_;
  std::vector<std::string> bound_;
  std::multimap<std::string, Pos> free_uses_;
  std::vector<std::pair<std::string, Pos>> binders_;
};

void print(std::ostream& out, const Term& t);

void print_binder(std::ostream& out, const char* kind, const std::string& bound,
                  const std::string* anchor) {
  out << kind << '[' << bound;
  if (anchor) out << " in N(" << *anchor << ')';
  out << "](";
}

void print_weighted(std::ostream& out, const std::string& bound, const std::string* anchor,
                    const TermPtr& value, const TermPtr& weight_arg,
                    const std::string& weight_map) {
  const bool default_arg = *weight_arg == *value;
  if (weight_map == "one" && default_arg) {
    print_binder(out, "mean", bound, anchor);
    print(out, *value);
  } else {
    print_binder(out, "wmean", bound, anchor);
    print(out, *value);
    out << ", " << weight_map;
    if (!default_arg) {
      out << ", ";
      print(out, *weight_arg);
    }
  }
  out << ')';
}

void print(std::ostream& out, const Term& t) {
  if (const auto* c = t.as<term::Const>()) {
    if (c->scalar) {
      out << format_number(c->value[0]);
    } else {
      out << '[';
      for (Eigen::Index i = 0; i < c->value.size(); ++i)
        out << (i ? ", " : "") << format_number(c->value[i]);
      out << ']';
    }
  } else if (const auto* f = t.as<term::Feature>()) {
    out << "H(" << f->var << ')';
  } else if (const auto* r = t.as<term::Rw>()) {
    out << "rw(" << r->var << ", " << r->kmax << ')';
  } else if (const auto* a = t.as<term::Apply>()) {
    out << a->fn;
    if (!a->args.empty()) {
      out << '(';
      for (std::size_t i = 0; i < a->args.size(); ++i) {
        if (i) out << ", ";
        print(out, *a->args[i]);
      }
      out << ')';
    }
  } else if (const auto* w = t.as<term::LocalWMean>()) {
    print_weighted(out, w->bound, &w->anchor, w->value, w->weight_arg, w->weight_map);
  } else if (const auto* w = t.as<term::GlobalWMean>()) {
    print_weighted(out, w->bound, nullptr, w->value, w->weight_arg, w->weight_map);
  } else if (const auto* g = t.as<term::GcnAgg>()) {
    print_binder(out, "gcn", g->bound, &g->anchor);
    print(out, *g->value);
    out << ')';
  }
}

}  // namespace

TermPtr parse_term(std::string_view text, const FunctionRegistry& registry, ParseOptions options) {
  return Parser(text, registry, options).parse();
}

std::string print_term(const Term& t) {
  std::ostringstream out;
  print(out, t);
  return out.str();
}

std::string format_number(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

}  // namespace aggterm
