#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "aggterm/architectures.hpp"
#include "aggterm/error.hpp"
#include "aggterm/eval.hpp"
#include "aggterm/parser.hpp"
#include "support.hpp"

using namespace aggterm;
using testing_support::random_graph;

namespace {

ArchConfig small(ArchKind kind) {
  ArchConfig c;
  c.kind = kind;
  c.layers = 2;
  c.hidden = 6;
  c.classes = 4;
  c.input_dim = 3;
  if (kind == ArchKind::GPS_RW) c.rw_length = 3;
  return c;
}

const ArchKind kAllKinds[] = {ArchKind::MeanGNN, ArchKind::GCN, ArchKind::GAT, ArchKind::GPS,
                              ArchKind::GPS_RW};

double max_abs(const Vector& a, const Vector& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("init_weights is deterministic and bounded") {
  for (ArchKind kind : kAllKinds) {
    auto c = small(kind);
    CHECK(init_weights(c, 5) == init_weights(c, 5));
    CHECK_FALSE(init_weights(c, 5) == init_weights(c, 6));
  }
  ArchConfig c;
  c.kind = ArchKind::GCN;
  c.layers = 1;
  c.input_dim = 100;
  c.hidden = 100;
  c.classes = 100;
  auto w = init_weights(c, 1);
  CHECK(w.layers[0].W.cols() == 100);
  CHECK(w.layers[0].W.cwiseAbs().maxCoeff() <= 0.1);
  CHECK(w.layers[0].b.cwiseAbs().maxCoeff() <= 0.1);
  CHECK(w.W_out.cwiseAbs().maxCoeff() <= 0.1);
  // Uniform on [-0.1, 0.1]: 10^4 entries have mean near 0 and use the whole range.
  CHECK(std::abs(w.layers[0].W.mean()) < 4 * 0.1 / std::sqrt(3.0 * 1e4));
  CHECK(w.layers[0].W.cwiseAbs().maxCoeff() > 0.099);
}

TEST_CASE("config validation") {
  ArchConfig c;
  c.layers = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small(ArchKind::GPS_RW);
  c.rw_length = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small(ArchKind::MeanGNN);
  c.skip = {{0, 2}};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.skip = {{1, 2}};
  CHECK_NOTHROW(c.validate());
  c.skip = {{2, 1}};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(arch_kind_from_string("GPS_RW") == ArchKind::GPS_RW);
  CHECK(to_string(ArchKind::GAT) == "GAT");
  CHECK_THROWS_AS(arch_kind_from_string("RNN"), ConfigError);
}

TEST_CASE("compiled terms are closed and well formed") {
  for (ArchKind kind : kAllKinds) {
    auto c = small(kind);
    auto m = compile(c, init_weights(c, 3));
    CHECK(m.term->closed());
    CHECK_NOTHROW(check_functions(*m.term, m.registry));
    CHECK(m.dim == c.program_dim());
    CHECK(m.outputs == c.classes);
    // Printing and re-parsing against the model registry reproduces the term.
    CHECK(*parse_term(print_term(*m.term), m.registry, {true}) == *m.term);
  }
}

TEST_CASE("compiled models match the reference forward pass") {
  Stream rng(7);
  for (ArchKind kind : kAllKinds) {
    for (int trial = 0; trial < 12; ++trial) {
      auto c = small(kind);
      c.layers = 1 + static_cast<int>(rng.below(3));
      c.activation = trial % 3 == 0 ? Activation::Sigmoid : Activation::Relu;
      c.global_readout = trial % 4 == 1;
      if (trial % 5 == 2 && c.layers >= 2) c.skip = {{1, c.layers}};
      if (trial % 6 == 3) c.output = OutputMap::Identity;
      const int n = 1 + static_cast<int>(rng.below(40));
      auto g = random_graph(n, rng.uniform() * 0.4, c.input_dim, rng, static_cast<int>(rng.below(4)));
      auto w = init_weights(c, rng.next_u64());
      Vector expect = reference_forward(c, w, g);
      Vector got = run_compiled(compile(c, w), g);
      REQUIRE(got.size() == c.classes);
      CHECK_MESSAGE(max_abs(got, expect) < 1e-9, to_string(kind), " trial ", trial);
    }
  }
}

TEST_CASE("skip from the input layer") {
  ArchConfig c = small(ArchKind::MeanGNN);
  c.input_dim = c.hidden;
  c.layers = 3;
  c.skip = {{0, 2}, {1, 3}};
  Stream rng(8);
  auto g = random_graph(15, 0.3, c.input_dim, rng, 2);
  auto w = init_weights(c, 2);
  CHECK(max_abs(run_compiled(compile(c, w), g), reference_forward(c, w, g)) < 1e-9);
}

TEST_CASE("one identity layer averages constants") {
  ArchConfig c;
  c.kind = ArchKind::MeanGNN;
  c.layers = 1;
  c.hidden = 1;
  c.classes = 1;
  c.input_dim = 1;
  c.activation = Activation::Identity;
  c.output = OutputMap::Identity;
  WeightSet w = init_weights(c, 1);
  w.layers[0].W = Matrix(1, 2);
  w.layers[0].W << 0.5, 0.5;
  w.layers[0].b = Vector::Zero(1);
  w.W_out = Matrix::Identity(1, 1);
  w.b_out = Vector::Zero(1);
  Stream rng(9);
  for (double value : {0.3, -1.25, 4.0}) {
    auto g = random_graph(12, 1.0, 1, rng);
    g = g.with_features(FeatureMatrix::Constant(12, 1, value));
    CHECK(run_compiled(compile(c, w), g)[0] == doctest::Approx(value).epsilon(1e-15));
  }
}

TEST_CASE("GAT with zero score is MeanGNN") {
  Stream rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    auto gat = small(ArchKind::GAT);
    auto mean = small(ArchKind::MeanGNN);
    gat.layers = mean.layers = 1 + trial % 3;
    auto wg = init_weights(gat, 100 + trial);
    auto wm = init_weights(mean, 200 + trial);
    for (int l = 0; l < gat.layers; ++l) {
      wg.layers[l].a.setZero();
      wm.layers[l].W = wg.layers[l].W;
      wm.layers[l].b = wg.layers[l].b;
    }
    wm.W_out = wg.W_out;
    wm.b_out = wg.b_out;
    auto g = random_graph(20, 0.25, gat.input_dim, rng, 2);
    CHECK(max_abs(run_compiled(compile(gat, wg), g), run_compiled(compile(mean, wm), g)) < 1e-12);
  }
}

TEST_CASE("softmax outputs are distributions") {
  Stream rng(11);
  for (ArchKind kind : kAllKinds) {
    auto c = small(kind);
    auto w = init_weights(c, 4);
    auto m = compile(c, w);
    for (int trial = 0; trial < 5; ++trial) {
      auto g = random_graph(25, 0.2, c.input_dim, rng, 1);
      Vector out = run_compiled(m, g);
      CHECK((out.array() >= 0).all());
      CHECK(std::abs(out.sum() - 1) < 1e-12);
    }
  }
}

TEST_CASE("outputs ignore node order") {
  Stream rng(12);
  for (ArchKind kind : kAllKinds) {
    auto c = small(kind);
    auto m = compile(c, init_weights(c, 5));
    auto g = random_graph(30, 0.15, c.input_dim, rng, 3);
    auto perm = testing_support::random_permutation(30, rng);
    CHECK(max_abs(run_compiled(m, g), run_compiled(m, g.permuted(perm))) < 1e-9);
  }
}

TEST_CASE("empty neighborhoods aggregate to zero in both implementations") {
  auto c = small(ArchKind::MeanGNN);
  c.layers = 1;
  c.output = OutputMap::Identity;
  c.activation = Activation::Identity;
  auto w = init_weights(c, 6);
  Stream rng(13);
  auto g = random_graph(6, 0.0, c.input_dim, rng);
  // Edgeless: the aggregate block contributes nothing.
  Matrix self_only = w.layers[0].W.leftCols(c.input_dim);
  Vector pooled = self_only * g.features().colwise().mean().transpose() + w.layers[0].b;
  Vector expect = w.W_out * pooled + w.b_out;
  CHECK(max_abs(reference_forward(c, w, g), expect) < 1e-12);
  CHECK(max_abs(run_compiled(compile(c, w), g), expect) < 1e-12);
}

TEST_CASE("GPS_RW equals GPS when return probabilities vanish") {
  // On edgeless graphs every rw encoding is zero, so the rw input columns
  // never contribute.
  Stream rng(14);
  for (int trial = 0; trial < 5; ++trial) {
    auto gps = small(ArchKind::GPS);
    gps.hidden = 8;
    auto gps_rw = gps;
    gps_rw.kind = ArchKind::GPS_RW;
    gps_rw.rw_length = 3;
    REQUIRE(gps.program_dim() == gps_rw.program_dim());
    auto w = init_weights(gps, 300 + trial);
    auto wr = init_weights(gps_rw, 400 + trial);
    for (int l = 0; l < gps.layers; ++l) {
      if (l == 0) {
        const int in = gps.input_dim;
        const int in_rw = gps_rw.input_width();
        for (int block = 0; block < 2; ++block)
          wr.layers[0].W.middleCols(block * in_rw, in) = w.layers[0].W.middleCols(block * in, in);
        wr.layers[0].Q.leftCols(in) = w.layers[0].Q;
        wr.layers[0].K.leftCols(in) = w.layers[0].K;
        wr.layers[0].V.leftCols(in) = w.layers[0].V;
      } else {
        wr.layers[l] = w.layers[l];
      }
      wr.layers[l].b = w.layers[l].b;
    }
    wr.W_out = w.W_out;
    wr.b_out = w.b_out;
    auto g = random_graph(15, 0.0, gps.input_dim, rng);
    CHECK(run_compiled(compile(gps, w), g) == run_compiled(compile(gps_rw, wr), g));
    CHECK(max_abs(reference_forward(gps_rw, wr, g), reference_forward(gps, w, g)) < 1e-12);
  }
}

TEST_CASE("compile rejects mismatched weights") {
  auto c = small(ArchKind::GAT);
  auto w = init_weights(c, 1);
  w.layers[0].a = Vector::Zero(3);
  CHECK_THROWS_AS(compile(c, w), ConfigError);
  auto other = small(ArchKind::MeanGNN);
  other.layers = 3;
  CHECK_THROWS_AS(compile(other, init_weights(small(ArchKind::MeanGNN), 1)), ConfigError);
}
