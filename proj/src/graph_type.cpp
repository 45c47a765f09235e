#include "aggterm/graph_type.hpp"

#include <bit>
#include <cmath>

#include "aggterm/error.hpp"

namespace aggterm {

namespace {

void check_extension(const GraphType& t, const GraphType& t2) {
  if (t2.k != t.k + 1 || t2.restrict_to(t.k) != t)
    throw ConfigError("type is not an extension of the base type");
}

void check_k(int k) {
  if (k < 0 || k > GraphType::kMaxVars)
    throw ConfigError("graph types support at most " + std::to_string(GraphType::kMaxVars) + " variables");
}

}  // namespace

GraphType GraphType::with_edge(int i, int j, bool present) const {
  if (i == j || i < 0 || j < 0 || i >= k || j >= k) throw ConfigError("invalid variable pair");
  GraphType out = *this;
  const std::uint64_t bit = std::uint64_t{1} << pair_index(i, j);
  out.bits = present ? (bits | bit) : (bits & ~bit);
  return out;
}

int GraphType::num_edges() const { return std::popcount(bits); }

GraphType GraphType::restrict_to(int m) const {
  const int p = num_pairs(m);
  return {m, p >= 64 ? bits : bits & ((std::uint64_t{1} << p) - 1)};
}

std::vector<GraphType> all_types(int k) {
  check_k(k);
  const int p = GraphType::num_pairs(k);
  std::vector<GraphType> out;
  out.reserve(std::size_t{1} << p);
  for (std::uint64_t b = 0; b < (std::uint64_t{1} << p); ++b) out.push_back({k, b});
  return out;
}

std::vector<GraphType> enumerate_extensions(const GraphType& t, std::optional<int> anchor) {
  check_k(t.k + 1);
  if (anchor && (*anchor < 0 || *anchor >= t.k)) throw ConfigError("anchor outside the base type");
  const int offset = GraphType::num_pairs(t.k);
  std::vector<GraphType> out;
  for (std::uint64_t pattern = 0; pattern < (std::uint64_t{1} << t.k); ++pattern) {
    if (anchor && !((pattern >> *anchor) & 1U)) continue;
    out.push_back({t.k + 1, t.bits | (pattern << offset)});
  }
  return out;
}

int new_edges(const GraphType& t, const GraphType& t2) {
  check_extension(t, t2);
  return std::popcount(t2.bits >> GraphType::num_pairs(t.k));
}

double alpha_weight(const GraphType& t, const GraphType& t2, double p) {
  const int r = new_edges(t, t2);
  return std::pow(p, r) * std::pow(1.0 - p, t.k - r);
}

double alpha_weight_local(const GraphType& t, const GraphType& t2, int anchor, double p) {
  if (anchor < 0 || anchor >= t.k) throw ConfigError("anchor outside the base type");
  if (!t2.edge(anchor, t.k)) throw ConfigError("extension lacks the anchor edge");
  const int r = new_edges(t, t2) - 1;
  return std::pow(p, r) * std::pow(1.0 - p, t.k - 1 - r);
}

double alpha_weight_sbm(const GraphType& t, const GraphType& t2, std::span<const int> communities,
                        std::span<const double> q, const Matrix& P, std::optional<int> anchor) {
  check_extension(t, t2);
  if (static_cast<int>(communities.size()) != t.k + 1)
    throw ConfigError("need one community per base variable plus the new one");
  const int cv = communities[t.k];
  double w = q[cv];
  for (int i = 0; i < t.k; ++i) {
    const double pij = P(communities[i], cv);
    w *= t2.edge(i, t.k) ? pij : 1.0 - pij;
  }
  if (anchor) {
    if (*anchor < 0 || *anchor >= t.k) throw ConfigError("anchor outside the base type");
    if (!t2.edge(*anchor, t.k)) throw ConfigError("extension lacks the anchor edge");
    double r = 0;
    for (std::size_t c = 0; c < q.size(); ++c) r += q[c] * P(communities[*anchor], static_cast<Eigen::Index>(c));
    if (r <= 0) return 0.0;
    w /= r;
  }
  return w;
}

}  // namespace aggterm
