#pragma once

#include <cstddef>
#include <set>
#include <vector>

namespace rugscan {

// Collapsed simple directed graph: parallel edges merged, self-loops kept.
struct SimpleDigraph {
  size_t n = 0;
  std::vector<std::set<int>> out;
  std::vector<std::set<int>> in;

  explicit SimpleDigraph(size_t nodes = 0) { resize(nodes); }
  void resize(size_t nodes) {
    n = nodes;
    out.assign(n, {});
    in.assign(n, {});
  }
  void add_edge(int u, int v) {
    out[u].insert(v);
    in[v].insert(u);
  }
  bool has_edge(int u, int v) const { return out[u].count(v) != 0; }
};

struct CentralityParams {
  double katz_alpha = 0.005;
  double katz_beta = 1.0;
  double katz_tol = 1e-9;
  int katz_max_iter = 1000;
  double eigen_tol = 1e-15;
  int eigen_max_iter = 20000;
};

struct CentralityResult {
  std::vector<double> degree;
  std::vector<double> indegree;
  std::vector<double> outdegree;
  std::vector<double> betweenness;  // directed, endpoint-normalized
  std::vector<double> closeness;    // inward distance, component-corrected
  std::vector<double> eigenvector;  // undirected projection, L2-normalized
  std::vector<double> katz;         // inward walks, L2-normalized
  std::vector<double> clustering;   // undirected projection, loops excluded
  bool eigen_converged = true;
};

// All eight structural measures in one pass. Degree-style measures divide by
// n-1 (zero for n <= 1); eigenvector uses shifted power iteration so bipartite
// components still settle; a non-convergent eigenvector yields zeros plus the
// diagnostic flag instead of an error.
CentralityResult structural_centralities(const SimpleDigraph& g,
                                         const CentralityParams& params = {});

}  // namespace rugscan
