#include "aggterm/neighborhood.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

#include "aggterm/error.hpp"

namespace aggterm {

std::size_t RootedGraph::num_edges() const {
  std::size_t twice = 0;
  for (const auto& nb : adjacency) twice += nb.size();
  return twice / 2;
}

RootedGraph rooted_neighborhood(const FeaturedGraph& g, std::span<const int> roots, int radius,
                                int size_cap) {
  RootedGraph out;
  out.num_roots = static_cast<int>(roots.size());
  std::unordered_map<int, int> local;
  std::vector<int> frontier;
  for (int r : roots) {
    if (r < 0 || r >= g.num_nodes()) throw GraphError("root out of range");
    if (!local.emplace(r, static_cast<int>(out.origin.size())).second)
      throw GraphError("roots must be distinct");
    out.origin.push_back(r);
    frontier.push_back(r);
  }
  auto grown = [&] { return static_cast<int>(out.origin.size()); };
  if (grown() > size_cap) throw NeighborhoodTooLarge(grown(), size_cap);
  for (int depth = 0; depth < radius && !frontier.empty(); ++depth) {
    std::vector<int> next;
    for (int u : frontier)
      for (int w : g.neighbors(u))
        if (local.emplace(w, static_cast<int>(out.origin.size())).second) {
          out.origin.push_back(w);
          next.push_back(w);
          if (grown() > size_cap) throw NeighborhoodTooLarge(grown(), size_cap);
        }
    frontier.swap(next);
  }
  out.adjacency.resize(out.origin.size());
  for (std::size_t i = 0; i < out.origin.size(); ++i) {
    for (int w : g.neighbors(out.origin[i])) {
      auto it = local.find(w);
      if (it != local.end()) out.adjacency[i].push_back(it->second);
    }
    std::sort(out.adjacency[i].begin(), out.adjacency[i].end());
  }
  return out;
}

std::string RootedNeighborhoodCode::hex() const {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (unsigned char c : bytes) {
    s.push_back(digits[c >> 4]);
    s.push_back(digits[c & 15]);
  }
  return s;
}

namespace {

using Coloring = std::vector<int>;

/// Individualization-refinement search for the canonical labeling.
class Canonizer {
 public:
  explicit Canonizer(const RootedGraph& g) : g_(g), n_(g.size()) {
    adj_bits_.assign(static_cast<std::size_t>(n_) * n_, 0);
    for (int u = 0; u < n_; ++u)
      for (int v : g.adjacency[u]) adj_bits_[static_cast<std::size_t>(u) * n_ + v] = 1;
  }

  /// Returns (certificate, labeling) where labeling[v] is v's canonical position.
  std::pair<std::string, std::vector<int>> run() {
    Coloring initial(n_);
    const int k = g_.num_roots;
    // Roots get their position; other nodes their distance past the roots.
    std::vector<int> dist(n_, -1);
    std::vector<int> queue;
    for (int r = 0; r < k; ++r) {
      dist[r] = 0;
      queue.push_back(r);
    }
    for (std::size_t h = 0; h < queue.size(); ++h)
      for (int w : g_.adjacency[queue[h]])
        if (dist[w] < 0) {
          dist[w] = dist[queue[h]] + 1;
          queue.push_back(w);
        }
    for (int v = 0; v < n_; ++v) initial[v] = v < k ? v : k + (dist[v] < 0 ? n_ : dist[v]);
    path_.clear();
    search(refine(std::move(initial)), 0);
    return {best_cert_, best_labeling_};
  }

 private:
  Coloring refine(Coloring colors) const {
    int count = num_colors(colors);
    std::vector<std::pair<std::vector<int>, int>> sig(n_);
    while (true) {
      for (int v = 0; v < n_; ++v) {
        auto& s = sig[v].first;
        s.clear();
        s.push_back(colors[v]);
        for (int w : g_.adjacency[v]) s.push_back(colors[w]);
        std::sort(s.begin() + 1, s.end());
        sig[v].second = v;
      }
      std::vector<int> order(n_);
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(),
                [&](int a, int b) { return sig[a].first < sig[b].first; });
      Coloring next(n_);
      int c = 0;
      for (int i = 0; i < n_; ++i) {
        if (i > 0 && sig[order[i]].first != sig[order[i - 1]].first) ++c;
        next[order[i]] = c;
      }
      const int next_count = c + 1;
      colors.swap(next);
      if (next_count == count) break;
      count = next_count;
    }
    return colors;
  }

  static int num_colors(const Coloring& colors) {
    std::vector<int> sorted(colors);
    std::sort(sorted.begin(), sorted.end());
    return static_cast<int>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
  }

  std::string certificate(const Coloring& labeling) const {
    std::vector<int> at(n_);
    for (int v = 0; v < n_; ++v) at[labeling[v]] = v;
    std::string bits;
    bits.reserve(static_cast<std::size_t>(n_) * (n_ - 1) / 2);
    for (int j = 1; j < n_; ++j)
      for (int i = 0; i < j; ++i)
        bits.push_back(static_cast<char>(adj_bits_[static_cast<std::size_t>(at[i]) * n_ + at[j]]));
    return bits;
  }

  // Automorphism mapping the leaf `from` onto leaf `to` (same certificate).
  std::vector<int> automorphism(const Coloring& from, const Coloring& to) const {
    std::vector<int> at_to(n_);
    for (int v = 0; v < n_; ++v) at_to[to[v]] = v;
    std::vector<int> gamma(n_);
    for (int v = 0; v < n_; ++v) gamma[v] = at_to[from[v]];
    return gamma;
  }

  // Orbits of the group generated by the stored automorphisms that fix the
  // current path pointwise.
  std::vector<int> orbits(int level) const {
    std::vector<int> parent(n_);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (const auto& gamma : generators_) {
      bool fixes = true;
      for (int i = 0; i < level && fixes; ++i) fixes = gamma[path_[i]] == path_[i];
      if (!fixes) continue;
      for (int v = 0; v < n_; ++v) {
        int a = find(v), b = find(gamma[v]);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
    }
    for (int v = 0; v < n_; ++v) parent[v] = find(v);
    return parent;
  }

  static std::size_t common_prefix(const std::vector<int>& a, const std::vector<int>& b) {
    std::size_t i = 0;
    while (i < a.size() && i < b.size() && a[i] == b[i]) ++i;
    return i;
  }

  // Returns the level to resume at; callers above that level unwind.
  int search(const Coloring& colors, int level) {
    std::vector<int> target_cell;
    {
      std::vector<int> cell_size(n_, 0);
      for (int c : colors) ++cell_size[c];
      int target = -1;
      for (int c = 0; c < n_; ++c)
        if (cell_size[c] > 1) {
          target = c;
          break;
        }
      if (target < 0) return leaf(colors, level);
      for (int v = 0; v < n_; ++v)
        if (colors[v] == target) target_cell.push_back(v);
    }

    std::vector<int> tried;
    for (int v : target_cell) {
      const auto orbit = orbits(level);
      bool redundant = false;
      for (int t : tried) redundant = redundant || orbit[t] == orbit[v];
      if (redundant) continue;
      tried.push_back(v);

      Coloring child(n_);
      for (int u = 0; u < n_; ++u) child[u] = 2 * colors[u] + (u == v ? 0 : 1);
      path_.resize(level);
      path_.push_back(v);
      const int resume = search(refine(std::move(child)), level + 1);
      if (resume < level) return resume;
    }
    return level - 1;
  }

  int leaf(const Coloring& labeling, int level) {
    std::string cert = certificate(labeling);
    const std::vector<int> path(path_.begin(), path_.begin() + level);
    if (first_labeling_.empty()) {
      first_cert_ = best_cert_ = cert;
      first_labeling_ = best_labeling_ = labeling;
      first_path_ = best_path_ = path;
      return level - 1;
    }
    if (cert == first_cert_) {
      generators_.push_back(automorphism(labeling, first_labeling_));
      return static_cast<int>(common_prefix(path, first_path_));
    }
    if (cert == best_cert_) {
      generators_.push_back(automorphism(labeling, best_labeling_));
      return static_cast<int>(common_prefix(path, best_path_));
    }
    if (cert > best_cert_) {
      best_cert_ = std::move(cert);
      best_labeling_ = labeling;
      best_path_ = path;
    }
    return level - 1;
  }

  const RootedGraph& g_;
  int n_;
  std::vector<char> adj_bits_;
  std::vector<int> path_;
  std::vector<std::vector<int>> generators_;
  std::string first_cert_, best_cert_;
  Coloring first_labeling_, best_labeling_;
  std::vector<int> first_path_, best_path_;
};

void put_u16(std::string& s, int x) {
  s.push_back(static_cast<char>((x >> 8) & 0xFF));
  s.push_back(static_cast<char>(x & 0xFF));
}

int get_u16(const std::string& s, std::size_t at) {
  return (static_cast<unsigned char>(s[at]) << 8) | static_cast<unsigned char>(s[at + 1]);
}

}  // namespace

RootedNeighborhoodCode canonical_code(const RootedGraph& g, int radius, int size_cap) {
  if (g.size() > size_cap) throw NeighborhoodTooLarge(g.size(), size_cap);
  if (g.num_roots < 0 || g.num_roots > g.size()) throw GraphError("bad root count");
  RootedNeighborhoodCode code;
  code.roots = g.num_roots;
  code.radius = radius;
  put_u16(code.bytes, g.size());
  put_u16(code.bytes, g.num_roots);
  if (g.size() == 0) return code;
  auto [cert, labeling] = Canonizer(g).run();
  // Pack the upper-triangle adjacency bits, 8 per byte.
  unsigned char acc = 0;
  int filled = 0;
  for (char bit : cert) {
    acc = static_cast<unsigned char>((acc << 1) | (bit ? 1 : 0));
    if (++filled == 8) {
      code.bytes.push_back(static_cast<char>(acc));
      acc = 0;
      filled = 0;
    }
  }
  if (filled > 0) code.bytes.push_back(static_cast<char>(acc << (8 - filled)));
  return code;
}

RootedGraph decode_code(const RootedNeighborhoodCode& code) {
  if (code.bytes.size() < 4) throw GraphError("malformed neighborhood code");
  const int n = get_u16(code.bytes, 0);
  RootedGraph g;
  g.num_roots = get_u16(code.bytes, 2);
  g.adjacency.resize(n);
  g.origin.resize(n);
  std::iota(g.origin.begin(), g.origin.end(), 0);
  std::size_t bit = 0;
  for (int j = 1; j < n; ++j)
    for (int i = 0; i < j; ++i, ++bit) {
      const std::size_t byte = 4 + bit / 8;
      if (byte >= code.bytes.size()) throw GraphError("malformed neighborhood code");
      const bool set = (static_cast<unsigned char>(code.bytes[byte]) >> (7 - bit % 8)) & 1;
      if (set) {
        g.adjacency[i].push_back(j);
        g.adjacency[j].push_back(i);
      }
    }
  for (auto& nb : g.adjacency) std::sort(nb.begin(), nb.end());
  return g;
}

}  // namespace aggterm
