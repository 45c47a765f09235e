#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "aggterm/graph.hpp"
#include "aggterm/rng.hpp"

namespace aggterm {

struct Schedule;

namespace schedule {
/// p(n) = p
struct Dense {
  double p;
};
/// p(n) = K n^-beta
struct Root {
  double K;
  double beta;
};
/// p(n) = K log(n) / n
struct Log {
  double K;
};
/// p(n) = K / n
struct Sparse {
  double K;
};
/// Switches sub-schedule by the parity of n.
struct Alternating {
  std::shared_ptr<const Schedule> even;
  std::shared_ptr<const Schedule> odd;
};
}  // namespace schedule

/// Edge-probability schedule p(n) of an Erdos-Renyi model.
struct Schedule {
  std::variant<schedule::Dense, schedule::Root, schedule::Log, schedule::Sparse,
               schedule::Alternating>
      rule;

  static Schedule dense(double p) { return {schedule::Dense{p}}; }
  static Schedule root(double K, double beta) { return {schedule::Root{K, beta}}; }
  static Schedule log(double K) { return {schedule::Log{K}}; }
  static Schedule sparse(double K) { return {schedule::Sparse{K}}; }
  static Schedule alternating(Schedule even, Schedule odd) {
    return {schedule::Alternating{std::make_shared<const Schedule>(std::move(even)),
                                  std::make_shared<const Schedule>(std::move(odd))}};
  }
};

/// Edge probability for graphs on n nodes, clamped into [0, 1].
double eval_schedule(const Schedule& s, int n);

/// Analytic limit of p(n) for the non-sparse classes (Dense -> p, Root/Log -> 0).
/// Empty for Sparse and Alternating schedules.
std::optional<double> schedule_limit(const Schedule& s);

struct ErModel {
  Schedule schedule;
};

struct SbmModel {
  std::vector<double> fractions;
  Matrix P;
};

struct BaModel {
  int m;
};

struct GraphModelSpec {
  std::variant<ErModel, SbmModel, BaModel> model;

  void validate() const;
  /// Sparse ER or BA: bounded expected degree, local-neighborhood limits apply.
  bool is_sparse_class() const;
};

FeaturedGraph gen_er(int n, const Schedule& schedule, std::uint64_t seed);
FeaturedGraph gen_sbm(int n, std::span<const double> fractions, const Matrix& P,
                      std::uint64_t seed);
FeaturedGraph gen_ba(int n, int m, std::uint64_t seed);
FeaturedGraph sample_graph(const GraphModelSpec& spec, int n, std::uint64_t seed);

/// Community sizes: floor(fraction_i * n), remainder to the last community.
std::vector<int> community_sizes(int n, std::span<const double> fractions);

struct FeatureDistSpec {
  enum class Kind { Uniform01, UniformRange, Bernoulli, Constant };
  Kind kind = Kind::Uniform01;
  double a = 0.0;  // UniformRange lower
  double b = 1.0;  // UniformRange upper
  double q = 0.5;  // Bernoulli success probability
  double c = 0.0;  // Constant value
  int dim = 1;

  static FeatureDistSpec uniform01(int dim) { return {Kind::Uniform01, 0, 1, 0.5, 0, dim}; }
  static FeatureDistSpec uniform(double a, double b, int dim) {
    return {Kind::UniformRange, a, b, 0.5, 0, dim};
  }
  static FeatureDistSpec bernoulli(double q, int dim) { return {Kind::Bernoulli, 0, 1, q, 0, dim}; }
  static FeatureDistSpec constant(double c, int dim) { return {Kind::Constant, 0, 1, 0.5, c, dim}; }

  void validate() const;
  double mean() const;
};

/// One feature vector: `dist.dim` i.i.d. coordinates, zero-padded to `padded_dim`
/// (when padded_dim > dist.dim).
Vector sample_feature(const FeatureDistSpec& dist, Stream& stream, int padded_dim = 0);

/// Fresh i.i.d. features for every node; the structure is untouched.
FeaturedGraph attach_features(const FeaturedGraph& g, const FeatureDistSpec& dist,
                              std::uint64_t seed, int padded_dim = 0);

}  // namespace aggterm
