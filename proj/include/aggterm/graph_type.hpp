#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "aggterm/graph.hpp"

namespace aggterm {

/// Edge / non-edge decision for every pair of k variables. Pair (i, j), i < j,
/// lives at bit j(j-1)/2 + i, so extending by a variable appends bits.
struct GraphType {
  static constexpr int kMaxVars = 11;

  int k = 0;
  std::uint64_t bits = 0;

  static int pair_index(int i, int j) {
    if (i > j) std::swap(i, j);
    return j * (j - 1) / 2 + i;
  }
  static int num_pairs(int k) { return k * (k - 1) / 2; }

  bool edge(int i, int j) const { return (bits >> pair_index(i, j)) & 1U; }
  GraphType with_edge(int i, int j, bool present = true) const;
  int num_edges() const;
  /// The first m variables.
  GraphType restrict_to(int m) const;

  friend bool operator==(const GraphType&, const GraphType&) = default;
};

/// Every type on k variables (2^C(k,2) of them).
std::vector<GraphType> all_types(int k);

/// Types on k+1 variables that restrict to t. With an anchor i, only those
/// containing the edge between variable i and the new variable k.
std::vector<GraphType> enumerate_extensions(const GraphType& t, std::optional<int> anchor = {});

/// Edges from the new variable (index t.k) to the base variables in t2.
int new_edges(const GraphType& t, const GraphType& t2);

/// p^r (1-p)^(k-r) with r the number of new edges.
double alpha_weight(const GraphType& t, const GraphType& t2, double p);
/// p^r (1-p)^(k-1-r) with r the number of new edges besides the one to the anchor.
double alpha_weight_local(const GraphType& t, const GraphType& t2, int anchor, double p);
/// Block-model weight: q[c_v] * prod_i P[c_i][c_v]^e_i (1 - P[c_i][c_v])^(1-e_i), where
/// `communities` holds the 0-based community of each base variable followed by
/// that of the new one. With an anchor, normalized by sum_c q[c] P[c_anchor][c].
double alpha_weight_sbm(const GraphType& t, const GraphType& t2, std::span<const int> communities,
                        std::span<const double> q, const Matrix& P,
                        std::optional<int> anchor = {});

}  // namespace aggterm
