#pragma once

#include <cstdint>
#include <variant>

#include "aggterm/graph.hpp"

namespace aggterm {

namespace rw_method {
/// Exact dynamic program over the kmax-hop neighborhood.
struct ExactLocal {};
/// Estimate from `walks` independent simple random walks.
struct MonteCarlo {
  std::int64_t walks = 100000;
  std::uint64_t seed = 0;
};
/// ExactLocal when the kmax-hop neighborhood has at most 10^4 nodes,
/// otherwise MonteCarlo with 10^5 walks.
struct Auto {};
}  // namespace rw_method

using RwMethod = std::variant<rw_method::Auto, rw_method::ExactLocal, rw_method::MonteCarlo>;

/// Entry i-1 is the probability that a simple (non-lazy) random walk of length
/// i started at v is back at v. Isolated nodes give the zero vector.
Vector rw_encoding(const FeaturedGraph& g, int v, int kmax, const RwMethod& method = rw_method::Auto{});

}  // namespace aggterm
