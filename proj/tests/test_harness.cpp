#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <regex>
#include <sstream>

#include "aggterm/config_io.hpp"
#include "aggterm/error.hpp"
#include "aggterm/eval.hpp"
#include "aggterm/harness.hpp"
#include "aggterm/parser.hpp"

using namespace aggterm;

namespace {

SweepConfig term_sweep(const std::string& text, GraphModelSpec model, std::vector<int> sizes, int samples) {
  auto registry = FunctionRegistry::with_builtins();
  SweepConfig c;
  c.subject = Subject::from_term(parse_term(text, registry, {true}), registry, 1);
  c.model = std::move(model);
  c.features = FeatureDistSpec::uniform01(1);
  c.sizes = std::move(sizes);
  c.samples = samples;
  c.seed = 5;
  return c;
}

SweepConfig model_sweep(int workers) {
  ArchConfig a;
  a.layers = 2;
  a.hidden = 8;
  a.classes = 5;
  a.input_dim = 1;
  a.seed = 3;
  auto m = compile(a, init_weights(a));
  SweepConfig c;
  c.subject = Subject::from_model(m, "meangnn");
  c.model = {ErModel{Schedule::dense(0.1)}};
  c.features = FeatureDistSpec::uniform01(1);
  c.sizes = {20, 60};
  c.samples = 3;
  c.seed = 11;
  c.workers = workers;
  return c;
}

std::string csv(const SweepReport& r) {
  std::ostringstream out;
  write_report_csv(out, r);
  return out.str();
}

// Independent per-size mean and population std.
void check_summary(const SweepReport& r) {
  for (const auto& s : r.summary) {
    std::vector<const SweepRow*> rows;
    for (const auto& row : r.rows)
      if (row.size == s.size) rows.push_back(&row);
    REQUIRE(!rows.empty());
    for (int j = 0; j < r.dim; ++j) {
      double mean = 0;
      for (auto* row : rows) mean += row->output[j];
      mean /= static_cast<double>(rows.size());
      double var = 0;
      for (auto* row : rows) var += (row->output[j] - mean) * (row->output[j] - mean);
      var /= static_cast<double>(rows.size());
      CHECK(std::abs(s.mean[j] - mean) <= 1e-12);
      CHECK(std::abs(s.std[j] - std::sqrt(var)) <= 1e-12);
      CHECK(s.std[j] >= 0);
    }
    if (r.limit) {
      double dist = 0;
      for (auto* row : rows) dist += (row->output - *r.limit).norm();
      dist /= static_cast<double>(rows.size());
      REQUIRE(s.dist_to_limit.has_value());
      CHECK(std::abs(*s.dist_to_limit - dist) <= 1e-12);
    }
  }
}

}  // namespace

TEST_CASE("constant subject") {
  auto c = term_sweep("0.3", {ErModel{Schedule::dense(0.2)}}, {10, 100}, 3);
  auto r = run_sweep(c);
  CHECK(r.rows.size() == 6);
  for (const auto& row : r.rows) CHECK(row.output[0] == 0.3);
  for (const auto& s : r.summary) CHECK(s.std[0] == 0.0);
}

TEST_CASE("feature mean concentrates") {
  auto c = term_sweep("mean[x](H(x))", {ErModel{Schedule::dense(0.1)}}, {5000}, 3);
  auto r = run_sweep(c);
  CHECK(std::abs(r.summary[0].mean[0] - 0.5) < 0.01);
}

TEST_CASE("rows are ordered and counted") {
  auto c = term_sweep("mean[x](mean[y in N(x)](H(y)))", {BaModel{2}}, {10, 20, 40}, 4);
  auto r = run_sweep(c);
  REQUIRE(r.rows.size() == 12);
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    CHECK(r.rows[i].size == c.sizes[i / 4]);
    CHECK(r.rows[i].sample == static_cast<int>(i % 4));
  }
  CHECK(r.summary.size() == 3);
  check_summary(r);
}

TEST_CASE("adding sizes leaves existing rows unchanged") {
  auto a = run_sweep(term_sweep("mean[x](mean[y in N(x)](H(y)))", {ErModel{Schedule::sparse(2)}}, {50, 200}, 3));
  auto b = run_sweep(term_sweep("mean[x](mean[y in N(x)](H(y)))", {ErModel{Schedule::sparse(2)}}, {20, 50, 100, 200}, 3));
  for (const auto& row : a.rows)
    for (const auto& other : b.rows)
      if (row.size == other.size && row.sample == other.sample) CHECK(row.output == other.output);
}

TEST_CASE("softmax subjects give distributions and summaries recompute") {
  auto c = model_sweep(1);
  Vector limit = Vector::Constant(5, 0.2);
  c.limit = limit;
  auto r = run_sweep(c);
  CHECK(r.dim == 5);
  for (const auto& row : r.rows) {
    CHECK(std::abs(row.output.sum() - 1) < 1e-9);
    CHECK((row.output.array() >= 0).all());
  }
  check_summary(r);
}

TEST_CASE("worker count does not change the CSV") {
  const std::string one = csv(run_sweep(model_sweep(1)));
  CHECK(csv(run_sweep(model_sweep(4))) == one);
  CHECK(csv(run_sweep(model_sweep(8))) == one);
}

TEST_CASE("report CSV") {
  auto r = run_sweep(model_sweep(2));
  const std::string text = csv(r);
  CHECK(text == csv(r));
  std::istringstream lines(text);
  std::string header;
  std::getline(lines, header);
  CHECK(header == "size,sample,out_0,out_1,out_2,out_3,out_4");
  int data = 0;
  for (std::string line; std::getline(lines, line);) ++data;
  CHECK(data == 6);

  std::istringstream in(text);
  auto back = read_report_csv(in);
  REQUIRE(back.rows.size() == r.rows.size());
  for (std::size_t i = 0; i < r.rows.size(); ++i) CHECK(back.rows[i].output == r.rows[i].output);
  REQUIRE(back.summary.size() == r.summary.size());
  for (std::size_t i = 0; i < r.summary.size(); ++i) {
    CHECK(back.summary[i].mean == r.summary[i].mean);
    CHECK(back.summary[i].std == r.summary[i].std);
  }

  std::ostringstream summary;
  write_summary_csv(summary, r);
  CHECK(summary.str().rfind("size,dim,mean,std,dist_to_limit\n", 0) == 0);
  std::istringstream bad("size,sample,out_0\n10,0\n");
  CHECK_THROWS_AS(read_report_csv(bad), ConfigError);
}

TEST_CASE("SVG plot") {
  auto r = run_sweep(model_sweep(1));
  std::ostringstream out;
  write_plot_svg(out, r);
  const std::string svg = out.str();
  auto count = [&](const std::string& pattern) {
    std::regex re(pattern);
    return std::distance(std::sregex_iterator(svg.begin(), svg.end(), re), std::sregex_iterator());
  };
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(count("<polyline[^>]*class=\"mean\"") == 5);
  CHECK(count("<polygon[^>]*class=\"band\"") == 5);
}

TEST_CASE("divergence demo") {
  const auto alt = Schedule::alternating(Schedule::dense(0.5), Schedule::sparse(1));
  auto c = term_sweep("0", {ErModel{alt}}, {300, 301, 600, 601}, 3);
  c.subject.term = isolated_fraction_term();
  auto r = diverge_demo(c);
  REQUIRE(r.parity.has_value());
  for (const auto& s : r.summary) {
    if (s.size % 2 == 0)
      CHECK(s.mean[0] < 0.01);
    else
      CHECK(std::abs(s.mean[0] - std::exp(-1.0)) < 0.08);
  }
  CHECK(r.parity->gap > 0.25);

  auto swapped = c;
  swapped.model = {ErModel{Schedule::alternating(Schedule::sparse(1), Schedule::dense(0.5))}};
  auto rs = diverge_demo(swapped);
  CHECK(rs.parity->even_mean > rs.parity->odd_mean + 0.25);
  CHECK(r.parity->odd_mean > r.parity->even_mean + 0.25);

  auto plain = c;
  plain.model = {ErModel{Schedule::dense(0.5)}};
  CHECK_THROWS_AS(diverge_demo(plain), ConfigError);
}

TEST_CASE("isolated fraction term") {
  auto registry = FunctionRegistry::with_builtins();
  auto t = isolated_fraction_term();
  CHECK(*t == *parse_term("wmean[x](sub(1, wmean[y in N(x)](1, one)), one)", registry));
  const std::vector<Edge> e{{0, 1}};
  FeaturedGraph g(4, e, FeatureMatrix::Zero(4, 1));
  CHECK(eval_closed_batch(*t, g, registry)[0] == 0.5);
}

TEST_CASE("config validation") {
  auto c = term_sweep("0.3", {ErModel{Schedule::dense(0.2)}}, {10, 10}, 3);
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.sizes = {10, 5};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.sizes = {10};
  c.samples = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.samples = 1;
  c.limit = Vector::Zero(3);
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("provenance") {
  auto a = run_sweep(model_sweep(1));
  auto b = run_sweep(model_sweep(2));
  CHECK(a.provenance.config_hash == b.provenance.config_hash);
  CHECK(a.provenance.seed == 11);
  CHECK(a.provenance.version == std::string(kVersion));
  auto c = model_sweep(1);
  c.seed = 12;
  CHECK(run_sweep(c).provenance.config_hash != a.provenance.config_hash);
  auto d = model_sweep(1);
  d.sizes = {20, 61};
  CHECK(run_sweep(d).provenance.config_hash != a.provenance.config_hash);
}

TEST_CASE("format_real uses 17 significant digits") {
  CHECK(format_real(0.1) == "0.10000000000000001");
  CHECK(format_real(1) == "1");
  CHECK(std::stod(format_real(1.0 / 3)) == 1.0 / 3);
}

TEST_CASE("json configuration") {
  auto m = model_from_json(Json::parse(R"({"model": "sbm", "fractions": [0.5, 0.5], "P": [[0.5, 0.1], [0.1, 0.5]]})"));
  CHECK(std::holds_alternative<SbmModel>(m.model));
  auto back = model_from_json(to_json(m));
  CHECK(std::get<SbmModel>(back.model).P == std::get<SbmModel>(m.model).P);
  auto s = schedule_from_json(Json::parse(R"({"kind": "alternating", "even": {"kind": "dense", "p": 0.5}, "odd": {"kind": "sparse", "K": 1}})"));
  CHECK(eval_schedule(s, 9) == doctest::Approx(1.0 / 9));
  CHECK_THROWS_AS(model_from_json(Json::parse(R"({"model": "er", "schedule": {"kind": "dense", "p": 0.1}, "bogus": 1})")),
                  ConfigError);
  CHECK_THROWS_AS(schedule_from_json(Json::parse(R"({"kind": "dense"})")), ConfigError);
  auto a = arch_from_json(Json::parse(R"({"kind": "GPS_RW", "hidden": 8, "input_dim": 1})"));
  CHECK(a.kind == ArchKind::GPS_RW);
  CHECK(a.rw_length == 3);
  CHECK(arch_from_json(to_json(a)).hidden == 8);
  CHECK_THROWS_AS(arch_from_json(Json::parse(R"({"kind": "GAT", "layers": "three"})")), ConfigError);
  auto f = features_from_json(Json::parse(R"({"dist": "bernoulli", "q": 0.2, "dim": 2})"));
  CHECK(f.kind == FeatureDistSpec::Kind::Bernoulli);
  CHECK(f.dim == 2);
}
