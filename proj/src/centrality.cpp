#include "rugscan/centrality.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace rugscan {

namespace {

constexpr int kUnreached = -1;

std::vector<int> bfs_dist(const std::vector<std::set<int>>& adj, size_t n, int src) {
  std::vector<int> dist(n, kUnreached);
  std::deque<int> q{src};
  dist[src] = 0;
  while (!q.empty()) {
    int u = q.front();
    q.pop_front();
    for (int v : adj[u])
      if (dist[v] == kUnreached) {
        dist[v] = dist[u] + 1;
        q.push_back(v);
      }
  }
  return dist;
}

// Brandes' accumulation for unweighted directed betweenness.
std::vector<double> betweenness_directed(const SimpleDigraph& g) {
  size_t n = g.n;
  std::vector<double> bc(n, 0.0);
  if (n < 3) return bc;

  for (size_t s = 0; s < n; ++s) {
    std::vector<std::vector<int>> pred(n);
    std::vector<double> sigma(n, 0.0);
    std::vector<int> dist(n, kUnreached);
    std::vector<int> order;
    sigma[s] = 1.0;
    dist[s] = 0;
    std::deque<int> q{static_cast<int>(s)};
    while (!q.empty()) {
      int u = q.front();
      q.pop_front();
      order.push_back(u);
      for (int v : g.out[u]) {
        if (dist[v] == kUnreached) {
          dist[v] = dist[u] + 1;
          q.push_back(v);
        }
        if (dist[v] == dist[u] + 1) {
          sigma[v] += sigma[u];
          pred[v].push_back(u);
        }
      }
    }
    std::vector<double> delta(n, 0.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      int w = *it;
      for (int u : pred[w]) delta[u] += sigma[u] / sigma[w] * (1.0 + delta[w]);
      if (static_cast<size_t>(w) != s) bc[w] += delta[w];
    }
  }
  // Freeman scaling: a middle node of a directed 3-path scores exactly 1.
  double norm = static_cast<double>(n - 1) * static_cast<double>(n - 2) / 2.0;
  for (auto& x : bc) x /= norm;
  return bc;
}

std::vector<double> closeness_inward(const SimpleDigraph& g) {
  size_t n = g.n;
  std::vector<double> cc(n, 0.0);
  if (n < 2) return cc;
  for (size_t u = 0; u < n; ++u) {
    // Distances TO u are BFS distances from u over reversed edges.
    std::vector<int> dist = bfs_dist(g.in, n, static_cast<int>(u));
    long long total = 0;
    long long reach = 0;
    for (size_t v = 0; v < n; ++v)
      if (v != u && dist[v] != kUnreached) {
        total += dist[v];
        ++reach;
      }
    if (reach == 0 || total == 0) continue;
    double r = static_cast<double>(reach);
    cc[u] = (r / static_cast<double>(n - 1)) * (r / static_cast<double>(total));
  }
  return cc;
}

// Undirected projection adjacency as a dense matrix (graphs here are small:
// a token window caps nodes at ~1000).
std::vector<std::vector<double>> undirected_matrix(const SimpleDigraph& g) {
  std::vector<std::vector<double>> a(g.n, std::vector<double>(g.n, 0.0));
  for (size_t u = 0; u < g.n; ++u)
    for (int v : g.out[u]) {
      a[u][v] = 1.0;
      a[v][u] = 1.0;
    }
  return a;
}

std::vector<double> eigenvector_undirected(const SimpleDigraph& g,
                                           const CentralityParams& p,
                                           bool& converged) {
  size_t n = g.n;
  converged = true;
  std::vector<double> x(n, 0.0);
  if (n == 0) return x;
  auto a = undirected_matrix(g);

  // Shift by +I: same eigenvectors, strictly dominant top eigenvalue, so
  // bipartite structures cannot oscillate.
  std::vector<double> cur(n, 1.0 / static_cast<double>(n));
  std::vector<double> nxt(n, 0.0);
  for (int it = 0; it < p.eigen_max_iter; ++it) {
    for (size_t i = 0; i < n; ++i) {
      double acc = cur[i];  // the +I term
      for (size_t j = 0; j < n; ++j) acc += a[i][j] * cur[j];
      nxt[i] = acc;
    }
    double norm = 0.0;
    for (double v : nxt) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) break;  // empty graph: uniform vector is already fixed
    for (auto& v : nxt) v /= norm;
    double diff = 0.0;
    for (size_t i = 0; i < n; ++i) diff += std::fabs(nxt[i] - cur[i]);
    cur.swap(nxt);
    if (diff < static_cast<double>(n) * p.eigen_tol) return cur;
  }
  // No edges at all converges in one step above; anything else that ran out
  // of budget reports failure and zeros per the declared error path.
  bool has_edges = false;
  for (size_t u = 0; u < n && !has_edges; ++u) has_edges = !g.out[u].empty();
  if (!has_edges) return cur;
  converged = false;
  return x;
}

std::vector<double> katz_inward(const SimpleDigraph& g, const CentralityParams& p) {
  size_t n = g.n;
  std::vector<double> x(n, 0.0);
  if (n == 0) return x;
  std::vector<double> nxt(n, 0.0);
  for (int it = 0; it < p.katz_max_iter; ++it) {
    for (size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int j : g.in[i]) acc += x[j];
      nxt[i] = p.katz_alpha * acc + p.katz_beta;
    }
    double diff = 0.0;
    for (size_t i = 0; i < n; ++i) diff += std::fabs(nxt[i] - x[i]);
    x.swap(nxt);
    if (diff < static_cast<double>(n) * p.katz_tol) break;
  }
  double norm = 0.0;
  for (double v : x) norm += v * v;
  norm = std::sqrt(norm);
  if (norm > 0)
    for (auto& v : x) v /= norm;
  return x;
}

std::vector<double> clustering_undirected(const SimpleDigraph& g) {
  size_t n = g.n;
  std::vector<double> cl(n, 0.0);
  std::vector<std::set<int>> nb(n);
  for (size_t u = 0; u < n; ++u)
    for (int v : g.out[u]) {
      if (static_cast<size_t>(v) == u) continue;  // loops out of clustering
      nb[u].insert(v);
      nb[v].insert(static_cast<int>(u));
    }
  for (size_t u = 0; u < n; ++u) {
    size_t k = nb[u].size();
    if (k < 2) continue;
    size_t tri = 0;
    for (int a : nb[u])
      for (int b : nb[u])
        if (a < b && nb[a].count(b)) ++tri;
    cl[u] = 2.0 * static_cast<double>(tri) / (static_cast<double>(k) * static_cast<double>(k - 1));
  }
  return cl;
}

}  // namespace

CentralityResult structural_centralities(const SimpleDigraph& g,
                                         const CentralityParams& params) {
  CentralityResult r;
  size_t n = g.n;
  r.degree.assign(n, 0.0);
  r.indegree.assign(n, 0.0);
  r.outdegree.assign(n, 0.0);
  if (n > 1) {
    double denom = static_cast<double>(n - 1);
    for (size_t u = 0; u < n; ++u) {
      r.indegree[u] = static_cast<double>(g.in[u].size()) / denom;
      r.outdegree[u] = static_cast<double>(g.out[u].size()) / denom;
      r.degree[u] = r.indegree[u] + r.outdegree[u];
    }
  }
  r.betweenness = betweenness_directed(g);
  r.closeness = closeness_inward(g);
  r.eigenvector = eigenvector_undirected(g, params, r.eigen_converged);
  r.katz = katz_inward(g, params);
  r.clustering = clustering_undirected(g);
  return r;
}

}  // namespace rugscan
