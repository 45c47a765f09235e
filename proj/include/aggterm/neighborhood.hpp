#pragma once

#include <compare>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "aggterm/graph.hpp"

namespace aggterm {

/// Finite graph with k distinguished roots; the roots are nodes 0..k-1, in order.
struct RootedGraph {
  int num_roots = 0;
  std::vector<std::vector<int>> adjacency;  // sorted neighbor lists
  std::vector<int> origin;                  // node index in the source graph, if any

  int size() const { return static_cast<int>(adjacency.size()); }
  std::size_t num_edges() const;
  int root_degree(int i = 0) const { return static_cast<int>(adjacency[i].size()); }
};

/// Subgraph induced by all nodes within `radius` of some root. Throws
/// NeighborhoodTooLarge as soon as the ball grows past `size_cap`.
RootedGraph rooted_neighborhood(const FeaturedGraph& g, std::span<const int> roots, int radius,
                                int size_cap = std::numeric_limits<int>::max());

/// Exact isomorphism-class identifier of a rooted graph (roots matched in order).
struct RootedNeighborhoodCode {
  std::string bytes;
  int roots = 0;
  int radius = 0;

  std::string hex() const;

  // Identity is the canonical form; radius is bookkeeping.
  bool operator==(const RootedNeighborhoodCode& o) const { return bytes == o.bytes; }
  std::strong_ordering operator<=>(const RootedNeighborhoodCode& o) const {
    return bytes <=> o.bytes;
  }
};

struct RootedNeighborhoodCodeHash {
  std::size_t operator()(const RootedNeighborhoodCode& c) const {
    return std::hash<std::string>{}(c.bytes);
  }
};

constexpr int kDefaultCodeSizeCap = 64;

/// Canonical form by color refinement seeded with the root positions and
/// backtracking over the remaining symmetry.
RootedNeighborhoodCode canonical_code(const RootedGraph& g, int radius = 0,
                                      int size_cap = kDefaultCodeSizeCap);

/// The canonical representative a code was built from.
RootedGraph decode_code(const RootedNeighborhoodCode& code);

}  // namespace aggterm
