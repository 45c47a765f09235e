#include "aggterm/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "aggterm/error.hpp"

namespace aggterm {

FeaturedGraph::FeaturedGraph(int n, std::span<const Edge> edges, FeatureMatrix features,
                             std::optional<std::vector<int>> community)
    : n_(n), features_(std::move(features)), community_(std::move(community)) {
  if (n < 0) throw GraphError("negative node count");
  std::vector<std::int64_t> deg(static_cast<std::size_t>(n) + 1, 0);
  for (auto [u, v] : edges) {
    if (u < 0 || v < 0 || u >= n || v >= n)
      throw GraphError("edge (" + std::to_string(u) + ", " + std::to_string(v) + ") out of range");
    if (u == v) throw GraphError("self-loop at node " + std::to_string(u));
    ++deg[u + 1];
    ++deg[v + 1];
  }
  offsets_.assign(deg.begin(), deg.end());
  for (int v = 0; v < n; ++v) offsets_[v + 1] += offsets_[v];
  targets_.resize(static_cast<std::size_t>(offsets_[n]));
  std::vector<std::int64_t> fill(offsets_.begin(), offsets_.end() - 1);
  for (auto [u, v] : edges) {
    targets_[fill[u]++] = v;
    targets_[fill[v]++] = u;
  }
  for (int v = 0; v < n; ++v) {
    auto first = targets_.begin() + offsets_[v];
    auto last = targets_.begin() + offsets_[v + 1];
    std::sort(first, last);
    if (std::adjacent_find(first, last) != last)
      throw GraphError("duplicate edge at node " + std::to_string(v));
  }
  if (features_.size() == 0) features_.resize(n, 0);
  if (features_.rows() != n) throw GraphError("feature matrix must have one row per node");
  if (!features_.allFinite()) throw GraphError("non-finite feature entry");
  if (community_ && static_cast<int>(community_->size()) != n)
    throw GraphError("community labels must cover every node");
}

bool FeaturedGraph::has_edge(int u, int v) const {
  auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

std::vector<Edge> FeaturedGraph::edges() const {
  std::vector<Edge> out;
  out.reserve(num_edges());
  for (int u = 0; u < n_; ++u)
    for (int v : neighbors(u))
      if (u < v) out.emplace_back(u, v);
  return out;
}

FeaturedGraph FeaturedGraph::with_features(FeatureMatrix features) const {
  if (features.rows() != n_) throw GraphError("feature matrix must have one row per node");
  if (!features.allFinite()) throw GraphError("non-finite feature entry");
  FeaturedGraph g = *this;
  g.features_ = std::move(features);
  return g;
}

FeaturedGraph FeaturedGraph::with_community(std::vector<int> community) const {
  if (static_cast<int>(community.size()) != n_)
    throw GraphError("community labels must cover every node");
  FeaturedGraph g = *this;
  g.community_ = std::move(community);
  return g;
}

FeaturedGraph FeaturedGraph::permuted(std::span<const int> perm) const {
  std::vector<Edge> e;
  e.reserve(num_edges());
  for (auto [u, v] : edges()) e.emplace_back(perm[u], perm[v]);
  FeatureMatrix f(n_, features_.cols());
  for (int v = 0; v < n_; ++v) f.row(perm[v]) = features_.row(v);
  std::optional<std::vector<int>> c;
  if (community_) {
    c.emplace(n_);
    for (int v = 0; v < n_; ++v) (*c)[perm[v]] = (*community_)[v];
  }
  return FeaturedGraph(n_, e, std::move(f), std::move(c));
}

void FeaturedGraph::validate() const {
  for (int u = 0; u < n_; ++u) {
    auto nb = neighbors(u);
    for (std::size_t i = 0; i < nb.size(); ++i) {
      int v = nb[i];
      if (v < 0 || v >= n_) throw GraphError("neighbor index out of range");
      if (v == u) throw GraphError("self-loop");
      if (i > 0 && nb[i - 1] >= v) throw GraphError("adjacency not sorted or has duplicates");
      if (!has_edge(v, u)) throw GraphError("adjacency not symmetric");
    }
  }
  if (features_.rows() != n_) throw GraphError("feature row count mismatch");
  if (!features_.allFinite()) throw GraphError("non-finite feature entry");
  if (community_) {
    if (static_cast<int>(community_->size()) != n_) throw GraphError("community size mismatch");
    for (int c : *community_)
      if (c < 1) throw GraphError("community labels start at 1");
  }
}

bool operator==(const FeaturedGraph& a, const FeaturedGraph& b) {
  return a.n_ == b.n_ && a.offsets_ == b.offsets_ && a.targets_ == b.targets_ &&
         a.features_.rows() == b.features_.rows() && a.features_.cols() == b.features_.cols() &&
         a.features_ == b.features_ && a.community_ == b.community_;
}

FeaturedGraph pad_features(const FeaturedGraph& g, int dim) {
  FeatureMatrix f = FeatureMatrix::Zero(g.num_nodes(), dim);
  const int keep = std::min(dim, g.dim());
  if (keep > 0) f.leftCols(keep) = g.features().leftCols(keep);
  return g.with_features(std::move(f));
}

namespace {

std::string format17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

template <typename T>
T parse_field(const std::string& token, const std::string& key) {
  auto pos = token.find('=');
  if (pos == std::string::npos || token.substr(0, pos) != key)
    throw ConfigError("graph header: expected '" + key + "=<value>', got '" + token + "'");
  T value{};
  const char* first = token.data() + pos + 1;
  const char* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw ConfigError("graph header: bad value in '" + token + "'");
  return value;
}

}  // namespace

void write_graph(std::ostream& out, const FeaturedGraph& g) {
  const auto& comm = g.community();
  int m = 0;
  if (comm) m = comm->empty() ? 0 : *std::max_element(comm->begin(), comm->end());
  out << "aggterm-graph v1 n=" << g.num_nodes() << " d=" << g.dim() << " communities=" << m
      << '\n';
  for (auto [u, v] : g.edges()) out << u << ' ' << v << '\n';
  for (int v = 0; v < g.num_nodes(); ++v) {
    out << "F " << v;
    for (int j = 0; j < g.dim(); ++j) out << ' ' << format17(g.features()(v, j));
    out << '\n';
  }
  if (comm)
    for (int v = 0; v < g.num_nodes(); ++v) out << "C " << v << ' ' << (*comm)[v] << '\n';
}

FeaturedGraph read_graph(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("graph file is empty");
  std::istringstream header(line);
  std::string magic, version, nf, df, cf;
  header >> magic >> version >> nf >> df >> cf;
  if (magic != "aggterm-graph" || version != "v1")
    throw ConfigError("not an aggterm-graph v1 file");
  const int n = parse_field<int>(nf, "n");
  const int d = parse_field<int>(df, "d");
  const int m = parse_field<int>(cf, "communities");
  std::vector<Edge> edges;
  FeatureMatrix features = FeatureMatrix::Zero(n, d);
  std::optional<std::vector<int>> community;
  if (m > 0) community.emplace(n, 0);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    auto fail = [&](const std::string& why) {
      throw ConfigError("graph file line " + std::to_string(lineno) + ": " + why);
    };
    if (line[0] == 'F') {
      char tag;
      int v;
      ls >> tag >> v;
      if (!ls || v < 0 || v >= n) fail("bad feature line");
      for (int j = 0; j < d; ++j) {
        std::string tok;
        ls >> tok;
        double x;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
        if (ec != std::errc() || ptr != tok.data() + tok.size()) fail("bad feature value");
        features(v, j) = x;
      }
    } else if (line[0] == 'C') {
      char tag;
      int v, c;
      ls >> tag >> v >> c;
      if (!ls || !community || v < 0 || v >= n || c < 1 || c > m) fail("bad community line");
      (*community)[v] = c;
    } else {
      int u, v;
      ls >> u >> v;
      if (!ls || u >= v) fail("edge lines must be '<u> <v>' with u < v");
      edges.emplace_back(u, v);
    }
  }
  if (community)
    for (int c : *community)
      if (c == 0) throw ConfigError("graph file: community labels missing for some nodes");
  try {
    return FeaturedGraph(n, edges, std::move(features), std::move(community));
  } catch (const GraphError& e) {
    throw ConfigError(std::string("graph file: ") + e.what());
  }
}

}  // namespace aggterm
