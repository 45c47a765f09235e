#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aggterm/graph_type.hpp"
#include "aggterm/models.hpp"
#include "aggterm/neighborhood.hpp"
#include "aggterm/registry.hpp"
#include "aggterm/term.hpp"

namespace aggterm {

/// Monte-Carlo estimate of a limit value.
struct ControllerValue {
  Vector estimate;
  Vector stderr_;
  std::int64_t mc_samples = 0;
};

/// Limit object of a non-sparse model: community fractions q and limiting
/// edge probabilities P (one community for Erdos-Renyi).
struct DenseModel {
  std::vector<double> q{1.0};
  Matrix P = Matrix::Constant(1, 1, 0.0);
  /// Edge probabilities tend to zero while degrees still diverge (root and
  /// logarithmic growth); neighbors are then spread across communities by q.
  bool vanishing = false;

  static DenseModel er(double p, bool vanishing = false);
  static DenseModel sbm(std::vector<double> q, Matrix P);
  /// Dense -> p, Root/Log -> 0 (vanishing); SBM -> (q, P). Throws ConfigError
  /// for sparse, alternating and preferential-attachment models.
  static DenseModel from_spec(const GraphModelSpec& spec);

  int communities() const { return static_cast<int>(q.size()); }
};

struct DenseControllerOptions {
  std::int64_t mc_samples = 10000;
  /// Draws for aggregators whose value depends on the surrounding tuple.
  std::int64_t nested_mc = 64;
  std::uint64_t seed = 0;
  /// Program dimension; 0 uses the feature dimension.
  int dim = 0;
};

/// Limit of a term on non-sparse graphs as a function of the features (and
/// communities) of its free variables. Expectations over fresh nodes are
/// replaced by Monte-Carlo means with the same draws in numerator and
/// denominator. Rejects GcnAgg.
class DenseController {
 public:
  DenseController(TermPtr term, const FunctionRegistry& registry, DenseModel model,
                  FeatureDistSpec features, DenseControllerOptions options = {});

  ControllerValue closed() const;

  /// `features` and `communities` (0-based) keyed by free variable. For these
  /// models the value does not depend on the edges among the free variables,
  /// so `type` is only checked for size.
  ControllerValue at(const std::map<std::string, Vector>& features, const GraphType& type,
                     const std::map<std::string, int>& communities = {}) const;

  int dim() const { return dim_; }

 private:
  struct State;
  TermPtr term_;
  std::shared_ptr<State> state_;
  int dim_;
};

ControllerValue dense_controller(TermPtr term, const FunctionRegistry& registry,
                                 const DenseModel& model, const FeatureDistSpec& features,
                                 const DenseControllerOptions& options = {});

struct CensusConfig {
  int n = 5000;
  int radius = 1;
  int roots = 1;
  int graphs = 10;
  /// Root tuples per graph; 0 means every node (single roots only).
  int tuples_per_graph = 0;
  int size_cap = kDefaultCodeSizeCap;
  std::uint64_t seed = 0;
  int workers = 0;  // 0: hardware concurrency
};

struct CensusEntry {
  RootedNeighborhoodCode code;
  std::int64_t count = 0;
  double proportion = 0;
};

struct CensusTable {
  int radius = 0;
  int roots = 1;
  std::vector<CensusEntry> entries;  // by descending count, then code
  std::int64_t samples = 0;
  std::int64_t overflow = 0;  // neighborhoods over the size cap
  double truncated_mass = 0;  // share of samples not represented by entries

  double proportion(const RootedNeighborhoodCode& code) const;
  double total() const;
};

/// Tabulates rooted neighborhood types of sampled graphs from a sparse-class
/// model (ER with Sparse schedule, or BA).
CensusTable neighborhood_census(const GraphModelSpec& model, const CensusConfig& config);

/// Census of a single graph over every node (roots = 1) or `tuples` random
/// root tuples.
CensusTable graph_census(const FeaturedGraph& g, int radius, int roots, int tuples,
                         std::uint64_t seed, int size_cap = kDefaultCodeSizeCap);

/// Radius of the ball around a node that determines the term's value there,
/// with closed global aggregators treated as constants.
int evaluation_radius(const Term& t);

struct SparseLimitOptions {
  CensusConfig census;
  std::int64_t mc_samples = 2000;
  std::int64_t nested_mc = 32;
  double eps = 0.05;
  std::uint64_t seed = 0;
  int dim = 0;
};

struct SparseLimitResult {
  ControllerValue value;
  double truncated_mass = 0;
  int radius = 0;
  std::size_t types_used = 0;
};

/// Limit of a closed term on sparse-class graphs: global aggregates become
/// census-weighted expectations over rooted neighborhood types.
SparseLimitResult sparse_limit(TermPtr term, const FunctionRegistry& registry,
                               const GraphModelSpec& model, const FeatureDistSpec& features,
                               const SparseLimitOptions& options = {});

}  // namespace aggterm
