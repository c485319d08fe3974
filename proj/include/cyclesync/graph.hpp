#pragma once

// View graph with canonical (i < j) edges and the precomputed 3-cycle index.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <iosfwd>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cyclesync/error.hpp"

namespace cyclesync {

struct Edge {
  int i = 0;
  int j = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// For edge e = (i, j) the entries of a TriangleIndex list every k with ik
/// and jk in the graph, ascending in k, together with the ordinals of those
/// two edges.
class TriangleIndex {
 public:
  struct Entry {
    int k;
    int edge_ik;
    int edge_jk;
  };

  TriangleIndex() = default;
  explicit TriangleIndex(std::size_t num_edges) : offsets_(num_edges + 1, 0) {}

  std::size_t num_edges() const {
    return offsets_.empty() ? 0 : offsets_.size() - 1;
  }
  std::span<const Entry> operator[](std::size_t e) const {
    return {entries_.data() + offsets_[e], offsets_[e + 1] - offsets_[e]};
  }
  std::size_t size(std::size_t e) const { return offsets_[e + 1] - offsets_[e]; }
  std::size_t total() const { return entries_.size(); }

  // Entries must be pushed edge by edge, in edge order.
  void push(std::size_t e, Entry entry) {
    entries_.push_back(entry);
    offsets_[e + 1] = entries_.size();
  }
  void close_edge(std::size_t e) { offsets_[e + 1] = entries_.size(); }

 private:
  std::vector<std::size_t> offsets_;
  std::vector<Entry> entries_;
};

class ViewGraph {
 public:
  ViewGraph() = default;

  int num_nodes() const { return n_; }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(int e) const { return edges_[e]; }
  std::span<const int> neighbors(int i) const { return adjacency_[i]; }
  const TriangleIndex& triangles() const { return triangles_; }

  /// Ordinal of the undirected pair {a, b}, or -1 if absent.
  int edge_id(int a, int b) const {
    if (a > b) std::swap(a, b);
    auto it = edge_index_.find(key(a, b));
    return it == edge_index_.end() ? -1 : it->second;
  }
  bool has_edge(int a, int b) const { return edge_id(a, b) >= 0; }

  bool connected() const {
    if (n_ == 0) return false;
    std::vector<char> seen(n_, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v : adjacency_[u]) {
        if (!seen[v]) {
          seen[v] = 1;
          ++count;
          stack.push_back(v);
        }
      }
    }
    return count == n_;
  }

  friend bool operator==(const ViewGraph& a, const ViewGraph& b) {
    return a.n_ == b.n_ && a.edges_ == b.edges_;
  }

 private:
  friend ViewGraph build_view_graph(int n, std::span<const Edge> pairs);

  static std::uint64_t key(int a, int b) {
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
  }

  int n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> adjacency_;
  std::unordered_map<std::uint64_t, int> edge_index_;
  TriangleIndex triangles_;
};

/// Exact N_ij for every edge by merge-intersecting the sorted adjacency lists.
inline TriangleIndex common_neighbors(const ViewGraph& graph) {
  TriangleIndex index(graph.edges().size());
  for (int e = 0; e < graph.num_edges(); ++e) {
    const auto [i, j] = graph.edge(e);
    const auto a = graph.neighbors(i);
    const auto b = graph.neighbors(j);
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
      if (*ia < *ib) {
        ++ia;
      } else if (*ib < *ia) {
        ++ib;
      } else {
        const int k = *ia;
        index.push(e, {k, graph.edge_id(i, k), graph.edge_id(j, k)});
        ++ia;
        ++ib;
      }
    }
    index.close_edge(e);
  }
  return index;
}

/// Canonicalizes pairs to i < j and sorts the edge list lexicographically, so
/// any permutation of the same input yields the same graph.
inline ViewGraph build_view_graph(int n, std::span<const Edge> pairs) {
  CYCLESYNC_CHECK(n >= 1, "view graph needs at least one node");
  ViewGraph g;
  g.n_ = n;
  g.edges_.reserve(pairs.size());
  auto pair_str = [](const Edge& p) {
    return "(" + std::to_string(p.i) + ", " + std::to_string(p.j) + ")";
  };
  for (const Edge& p : pairs) {
    if (p.i < 0 || p.i >= n || p.j < 0 || p.j >= n) {
      throw Error("out-of-range node in edge " + pair_str(p));
    }
    if (p.i == p.j) throw Error("self-loop in edge " + pair_str(p));
    g.edges_.push_back({std::min(p.i, p.j), std::max(p.i, p.j)});
  }
  std::sort(g.edges_.begin(), g.edges_.end(), [](const Edge& a, const Edge& b) {
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  });
  for (std::size_t e = 1; e < g.edges_.size(); ++e) {
    if (g.edges_[e] == g.edges_[e - 1]) {
      throw Error("duplicate edge " + pair_str(g.edges_[e]));
    }
  }
  g.adjacency_.assign(n, {});
  g.edge_index_.reserve(g.edges_.size() * 2);
  for (int e = 0; e < g.num_edges(); ++e) {
    const auto [i, j] = g.edges_[e];
    g.adjacency_[i].push_back(j);
    g.adjacency_[j].push_back(i);
    g.edge_index_.emplace(ViewGraph::key(i, j), e);
  }
  for (auto& adj : g.adjacency_) std::sort(adj.begin(), adj.end());
  g.triangles_ = common_neighbors(g);
  return g;
}

inline ViewGraph build_view_graph(int n, std::initializer_list<Edge> pairs) {
  return build_view_graph(n, std::span<const Edge>(pairs.begin(), pairs.size()));
}

namespace detail {

// Reads the next non-blank line; returns false at EOF.
inline bool next_line(std::istream& in, std::string& line, int& line_no) {
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
  }
  return false;
}

[[noreturn]] inline void parse_error(const std::string& what, int line_no) {
  throw Error("line " + std::to_string(line_no) + ": " + what);
}

// Parses exactly `count` whitespace-separated values from `line`.
template <typename... T>
void parse_fields(const std::string& line, int line_no, T&... out) {
  std::istringstream ss(line);
  if (!((ss >> out) && ...)) parse_error("malformed line '" + line + "'", line_no);
  std::string extra;
  if (ss >> extra) parse_error("trailing tokens in '" + line + "'", line_no);
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out.precision(17);
  return out;
}

}  // namespace detail

/// Graph text format: "n m" then m lines "i j".
inline ViewGraph read_graph(std::istream& in) {
  std::string line;
  int line_no = 0;
  if (!detail::next_line(in, line, line_no)) detail::parse_error("missing header", 1);
  long n = 0, m = 0;
  detail::parse_fields(line, line_no, n, m);
  if (n < 1 || m < 0) detail::parse_error("invalid header '" + line + "'", line_no);
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(m));
  for (long e = 0; e < m; ++e) {
    if (!detail::next_line(in, line, line_no)) {
      detail::parse_error("expected " + std::to_string(m) + " edges, got " +
                              std::to_string(e),
                          line_no + 1);
    }
    int i = 0, j = 0;
    detail::parse_fields(line, line_no, i, j);
    edges.push_back({i, j});
  }
  if (detail::next_line(in, line, line_no)) detail::parse_error("unexpected extra line", line_no);
  return build_view_graph(static_cast<int>(n), edges);
}

inline ViewGraph read_graph(const std::string& path) {
  auto in = detail::open_input(path);
  return read_graph(in);
}

inline void write_graph(std::ostream& out, const ViewGraph& g) {
  out << g.num_nodes() << ' ' << g.num_edges() << '\n';
  for (const auto& [i, j] : g.edges()) out << i << ' ' << j << '\n';
}

inline void write_graph(const std::string& path, const ViewGraph& g) {
  auto out = detail::open_output(path);
  write_graph(out, g);
}

}  // namespace cyclesync
