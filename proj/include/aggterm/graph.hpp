#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace aggterm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
/// n x d node features; rows are nodes.
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Edge = std::pair<int, int>;

/// Simple undirected graph with per-node features and optional community
/// labels (1..M). Immutable once built; adjacency is stored as sorted CSR rows.
class FeaturedGraph {
 public:
  FeaturedGraph() = default;

  /// Builds from an edge list. Throws GraphError on self-loops, duplicates or
  /// out-of-range endpoints. `features` may be empty (d = 0).
  FeaturedGraph(int n, std::span<const Edge> edges, FeatureMatrix features = {},
                std::optional<std::vector<int>> community = std::nullopt);

  int num_nodes() const { return n_; }
  int dim() const { return static_cast<int>(features_.cols()); }
  std::size_t num_edges() const { return targets_.size() / 2; }

  std::span<const int> neighbors(int v) const {
    return {targets_.data() + offsets_[v], targets_.data() + offsets_[v + 1]};
  }
  int degree(int v) const { return static_cast<int>(offsets_[v + 1] - offsets_[v]); }
  bool has_edge(int u, int v) const;

  const FeatureMatrix& features() const { return features_; }
  auto feature(int v) const { return features_.row(v).transpose(); }
  const std::optional<std::vector<int>>& community() const { return community_; }

  std::vector<Edge> edges() const;

  FeaturedGraph with_features(FeatureMatrix features) const;
  FeaturedGraph with_community(std::vector<int> community) const;
  /// Relabels node v to perm[v].
  FeaturedGraph permuted(std::span<const int> perm) const;

  /// Re-checks every structural and feature invariant; throws GraphError.
  void validate() const;

  friend bool operator==(const FeaturedGraph& a, const FeaturedGraph& b);

 private:
  int n_ = 0;
  std::vector<std::int64_t> offsets_{0};
  std::vector<int> targets_;
  FeatureMatrix features_;
  std::optional<std::vector<int>> community_;
};

/// Copies the first `dim` feature columns, zero-padding when the graph has fewer.
FeaturedGraph pad_features(const FeaturedGraph& g, int dim);

/// Text format `aggterm-graph v1`; features use 17 significant digits.
void write_graph(std::ostream& out, const FeaturedGraph& g);
FeaturedGraph read_graph(std::istream& in);

}  // namespace aggterm
