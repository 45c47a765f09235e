#include "aggterm/architectures.hpp"

#include <cmath>
#include <map>
#include <tuple>

#include "aggterm/error.hpp"
#include "aggterm/eval.hpp"
#include "aggterm/rng.hpp"
#include "aggterm/walks.hpp"

namespace aggterm {

namespace {

bool uses_attention(ArchKind k) { return k == ArchKind::GPS || k == ArchKind::GPS_RW; }

/// Number of blocks the update map reads: [self;] aggregate [; global].
int update_arity(const ArchConfig& c) {
  const int base = c.kind == ArchKind::GCN ? 1 : 2;
  return base + (c.global_readout ? 1 : 0);
}

int layer_in(const ArchConfig& c, int layer) { return layer == 0 ? c.input_width() : c.hidden; }

Matrix uniform_matrix(std::uint64_t seed, int layer, int slot, int rows, int cols, int fan_in) {
  Stream s = Stream::derive(seed, "weights", static_cast<std::uint64_t>(layer),
                            static_cast<std::uint64_t>(slot));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = bound * (2.0 * s.uniform() - 1.0);
  return m;
}

Vector uniform_vector(std::uint64_t seed, int layer, int slot, int size, int fan_in) {
  return uniform_matrix(seed, layer, slot, size, 1, fan_in).col(0);
}

/// Embeds an r x (k in) block matrix into dim x (k dim), zero elsewhere.
Matrix pad_blocks(const Matrix& W, int k, int in, int dim) {
  Matrix out = Matrix::Zero(dim, static_cast<Eigen::Index>(k) * dim);
  for (int i = 0; i < k; ++i)
    out.block(0, static_cast<Eigen::Index>(i) * dim, W.rows(), in) =
        W.middleCols(static_cast<Eigen::Index>(i) * in, in);
  return out;
}

Vector pad_vector(const Vector& v, int dim) {
  Vector out = Vector::Zero(dim);
  out.head(v.size()) = v;
  return out;
}

double activate(Activation a, double x) {
  switch (a) {
    case Activation::Relu:
      return x > 0 ? x : 0.0;
    case Activation::Sigmoid:
      return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    case Activation::Identity:
      return x;
  }
  return x;
}

class Compiler {
 public:
  Compiler(const ArchConfig& c, const WeightSet& w)
      : c_(c), w_(w), dim_(c.program_dim()), registry_(FunctionRegistry::with_builtins()) {
    for (int l = 0; l < c.layers; ++l) register_layer(l);
    registry_.add_linear("out", pad_blocks(w.W_out, 1, c.hidden, dim_), pad_vector(w.b_out, dim_));
  }

  CompiledModel build() {
    TermPtr pooled = global_mean(var(0), embedding(c_.layers, 0, 1));
    TermPtr out = apply("out", {pooled});
    if (c_.output == OutputMap::Softmax) out = apply("softmax" + std::to_string(c_.classes), {out});
    return {out, std::move(registry_), dim_, c_.classes, c_.input_dim};
  }

 private:
  static std::string var(int depth) { return "v" + std::to_string(depth); }
  static std::string name(const char* base, int layer) { return base + std::to_string(layer); }

  void register_layer(int l) {
    const auto& lw = w_.layers[l];
    const int in = layer_in(c_, l);
    const int k = update_arity(c_);
    registry_.add_linear(name("lin", l), pad_blocks(lw.W, k, in, dim_), pad_vector(lw.b, dim_), k);
    if (c_.kind == ArchKind::GAT) {
      registry_.add_linear(name("att", l), pad_blocks(lw.W_att, 1, in, dim_), Vector::Zero(dim_));
      // Every output coordinate carries the same score a . [W h_x ; W h_y].
      Matrix S = Matrix::Zero(dim_, 2 * dim_);
      for (int r = 0; r < dim_; ++r) {
        S.block(r, 0, 1, c_.hidden) = lw.a.head(c_.hidden).transpose();
        S.block(r, dim_, 1, c_.hidden) = lw.a.tail(c_.hidden).transpose();
      }
      registry_.add_linear(name("score", l), std::move(S), Vector::Zero(dim_), 2);
    }
    if (uses_attention(c_.kind)) {
      registry_.add_linear(name("q", l), pad_blocks(lw.Q, 1, in, dim_), Vector::Zero(dim_));
      registry_.add_linear(name("k", l), pad_blocks(lw.K, 1, in, dim_), Vector::Zero(dim_));
      registry_.add_linear(name("v", l), pad_blocks(lw.V, 1, in, dim_), Vector::Zero(dim_));
    }
  }

  TermPtr activated(TermPtr z) const {
    switch (c_.activation) {
      case Activation::Relu:
        return apply("relu", {std::move(z)});
      case Activation::Sigmoid:
        return apply("sigmoid", {std::move(z)});
      case Activation::Identity:
        break;
    }
    return z;
  }

  // Embedding at variable v<at> whose binders are numbered from `next` on.
  TermPtr embedding(int layer, int at, int next) {
    auto key = std::make_tuple(layer, at, next);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    TermPtr t = layer == 0 ? input(at) : update(layer - 1, at, next);
    cache_.emplace(key, t);
    return t;
  }

  TermPtr input(int depth) {
    TermPtr h = feature(var(depth));
    if (c_.kind == ArchKind::GPS_RW)
      h = apply("concat_pad" + std::to_string(c_.input_dim), {h, rw(var(depth), c_.rw_length)});
    return h;
  }

  TermPtr update(int l, int at, int next) {
    const std::string x = var(at), y = var(next);
    TermPtr self = embedding(l, at, next + 1);
    TermPtr nb = embedding(l, next, next + 1);
    std::vector<TermPtr> args;
    switch (c_.kind) {
      case ArchKind::GCN:
        args = {gcn(y, x, nb)};
        break;
      case ArchKind::GAT: {
        TermPtr score = apply("leaky_relu0.2", {apply(name("score", l), {apply(name("att", l), {self}),
                                                                          apply(name("att", l), {nb})})});
        args = {self, local_wmean(y, x, nb, "exp", score)};
        break;
      }
      default:
        args = {self, local_mean(y, x, nb)};
    }
    if (c_.global_readout) args.push_back(global_mean(y, nb));
    TermPtr h = activated(apply(name("lin", l), std::move(args)));
    if (uses_attention(c_.kind)) {
      TermPtr score = apply("dot_scaled", {apply(name("q", l), {self}), apply(name("k", l), {nb})});
      h = apply("add", {global_wmean(y, apply(name("v", l), {nb}), "exp", score), h});
    }
    for (const auto& [from, to] : c_.skip)
      if (to == l + 1) h = apply("add", {h, embedding(from, at, next + 1)});
    return h;
  }

  const ArchConfig& c_;
  const WeightSet& w_;
  int dim_;
  FunctionRegistry registry_;
  std::map<std::tuple<int, int, int>, TermPtr> cache_;
};

Matrix row_softmax_weights(const Vector& scores) {
  const double m = scores.maxCoeff();
  Vector e = (scores.array() - m).exp();
  return e / e.sum();
}

}  // namespace

void ArchConfig::validate() const {
  if (layers < 1) throw ConfigError("architecture needs at least one layer");
  if (hidden < 1 || classes < 1 || input_dim < 1) throw ConfigError("architecture dimensions must be positive");
  if (kind == ArchKind::GPS_RW && rw_length < 1) throw ConfigError("GPS_RW needs rw_length >= 1");
  for (const auto& [from, to] : skip) {
    if (from < 0 || to <= from || to > layers)
      throw ConfigError("skip connection (" + std::to_string(from) + ", " + std::to_string(to) +
                        ") must satisfy 0 <= from < to <= layers");
    if (from == 0 && input_width() != hidden)
      throw ConfigError("a skip connection from the input needs input width equal to hidden");
  }
}

int ArchConfig::input_width() const {
  return input_dim + (kind == ArchKind::GPS_RW ? rw_length : 0);
}

int ArchConfig::program_dim() const { return std::max({input_width(), hidden, classes}); }

std::string to_string(ArchKind kind) {
  switch (kind) {
    case ArchKind::MeanGNN:
      return "MeanGNN";
    case ArchKind::GCN:
      return "GCN";
    case ArchKind::GAT:
      return "GAT";
    case ArchKind::GPS:
      return "GPS";
    case ArchKind::GPS_RW:
      return "GPS_RW";
  }
  return "?";
}

ArchKind arch_kind_from_string(const std::string& s) {
  for (auto k : {ArchKind::MeanGNN, ArchKind::GCN, ArchKind::GAT, ArchKind::GPS, ArchKind::GPS_RW})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown architecture kind '" + s + "' (MeanGNN, GCN, GAT, GPS, GPS_RW)");
}

bool operator==(const WeightSet& a, const WeightSet& b) {
  if (a.layers.size() != b.layers.size()) return false;
  auto same = [](const auto& x, const auto& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
  };
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    const auto &x = a.layers[i], &y = b.layers[i];
    if (!same(x.W, y.W) || !same(x.b, y.b) || !same(x.W_att, y.W_att) || !same(x.a, y.a) ||
        !same(x.Q, y.Q) || !same(x.K, y.K) || !same(x.V, y.V))
      return false;
  }
  return same(a.W_out, b.W_out) && same(a.b_out, b.b_out);
}

WeightSet init_weights(const ArchConfig& c, std::uint64_t seed) {
  c.validate();
  WeightSet w;
  const int k = update_arity(c);
  for (int l = 0; l < c.layers; ++l) {
    const int in = layer_in(c, l);
    LayerWeights lw;
    lw.W = uniform_matrix(seed, l, 0, c.hidden, k * in, k * in);
    lw.b = uniform_vector(seed, l, 1, c.hidden, k * in);
    if (c.kind == ArchKind::GAT) {
      lw.W_att = uniform_matrix(seed, l, 2, c.hidden, in, in);
      lw.a = uniform_vector(seed, l, 3, 2 * c.hidden, 2 * c.hidden);
    }
    if (uses_attention(c.kind)) {
      lw.Q = uniform_matrix(seed, l, 4, c.hidden, in, in);
      lw.K = uniform_matrix(seed, l, 5, c.hidden, in, in);
      lw.V = uniform_matrix(seed, l, 6, c.hidden, in, in);
    }
    w.layers.push_back(std::move(lw));
  }
  w.W_out = uniform_matrix(seed, c.layers, 0, c.classes, c.hidden, c.hidden);
  w.b_out = uniform_vector(seed, c.layers, 1, c.classes, c.hidden);
  return w;
}

CompiledModel compile(const ArchConfig& config, const WeightSet& weights) {
  config.validate();
  if (static_cast<int>(weights.layers.size()) != config.layers)
    throw ConfigError("weight set has the wrong number of layers");
  const int k = update_arity(config);
  for (int l = 0; l < config.layers; ++l) {
    const auto& lw = weights.layers[l];
    const int in = layer_in(config, l);
    bool ok = lw.W.rows() == config.hidden && lw.W.cols() == k * in && lw.b.size() == config.hidden;
    if (config.kind == ArchKind::GAT)
      ok = ok && lw.W_att.rows() == config.hidden && lw.W_att.cols() == in &&
           lw.a.size() == 2 * config.hidden;
    if (uses_attention(config.kind))
      for (const Matrix* m : {&lw.Q, &lw.K, &lw.V}) ok = ok && m->rows() == config.hidden && m->cols() == in;
    if (!ok) throw ConfigError("weight shapes do not match layer " + std::to_string(l));
  }
  if (weights.W_out.rows() != config.classes || weights.W_out.cols() != config.hidden ||
      weights.b_out.size() != config.classes)
    throw ConfigError("output head shape does not match the configuration");
  return Compiler(config, weights).build();
}

Vector reference_forward(const ArchConfig& c, const WeightSet& w, const FeaturedGraph& g) {
  c.validate();
  const int n = g.num_nodes();
  if (g.dim() < c.input_dim) throw ConfigError("graph has fewer feature columns than input_dim");
  Matrix h(n, c.input_width());
  h.leftCols(c.input_dim) = g.features().leftCols(c.input_dim);
  if (c.kind == ArchKind::GPS_RW)
    for (int v = 0; v < n; ++v) h.row(v).tail(c.rw_length) = rw_encoding(g, v, c.rw_length).transpose();

  std::vector<Matrix> history{h};
  const double dim = c.program_dim();
  for (int l = 0; l < c.layers; ++l) {
    const auto& lw = w.layers[l];
    const int in = static_cast<int>(h.cols());
    const Vector global = n > 0 ? Vector(h.colwise().mean().transpose()) : Vector(Vector::Zero(in));
    Matrix att_proj, q, k, v;
    if (c.kind == ArchKind::GAT) att_proj = h * lw.W_att.transpose();
    if (uses_attention(c.kind)) {
      q = h * lw.Q.transpose();
      k = h * lw.K.transpose();
      v = h * lw.V.transpose();
    }
    Matrix next(n, c.hidden);
    for (int u = 0; u < n; ++u) {
      const auto nbrs = g.neighbors(u);
      Vector agg = Vector::Zero(in);
      if (!nbrs.empty()) {
        switch (c.kind) {
          case ArchKind::GCN:
            for (int y : nbrs) agg += h.row(y).transpose() / std::sqrt(double(nbrs.size()) * g.degree(y));
            break;
          case ArchKind::GAT: {
            Vector scores(nbrs.size());
            const int hd = c.hidden;
            for (std::size_t i = 0; i < nbrs.size(); ++i) {
              const double s = lw.a.head(hd).dot(att_proj.row(u)) + lw.a.tail(hd).dot(att_proj.row(nbrs[i]));
              scores[i] = s > 0 ? s : 0.2 * s;
            }
            const Vector alpha = row_softmax_weights(scores);
            for (std::size_t i = 0; i < nbrs.size(); ++i) agg += alpha[i] * h.row(nbrs[i]).transpose();
            break;
          }
          default:
            for (int y : nbrs) agg += h.row(y).transpose();
            agg /= static_cast<double>(nbrs.size());
        }
      }
      Vector input;
      if (c.kind == ArchKind::GCN) {
        input = agg;
      } else {
        input.resize(2 * in);
        input << h.row(u).transpose(), agg;
      }
      if (c.global_readout) {
        Vector tmp(input.size() + in);
        tmp << input, global;
        input = tmp;
      }
      Vector z = lw.W * input + lw.b;
      Vector out = z.unaryExpr([&](double x) { return activate(c.activation, x); });
      if (uses_attention(c.kind)) {
        Vector scores(n);
        for (int y = 0; y < n; ++y) scores[y] = q.row(u).dot(k.row(y)) / std::sqrt(dim);
        const Vector alpha = row_softmax_weights(scores);
        out += v.transpose() * alpha;
      }
      next.row(u) = out.transpose();
    }
    for (const auto& [from, to] : c.skip)
      if (to == l + 1) next += history[from];
    h = next;
    history.push_back(h);
  }
  const Vector pooled = n > 0 ? Vector(h.colwise().mean().transpose()) : Vector(Vector::Zero(c.hidden));
  const Vector logits = w.W_out * pooled + w.b_out;
  if (c.output == OutputMap::Identity) return logits;
  return row_softmax_weights(logits);
}

Vector run_compiled(const CompiledModel& model, const FeaturedGraph& g) {
  FeaturedGraph padded = pad_features(pad_features(g, model.input_dim), model.dim);
  EvalOptions options;
  options.dim = model.dim;
  return Evaluator(model.term, model.registry, options).closed(padded).head(model.outputs);
}

}  // namespace aggterm
