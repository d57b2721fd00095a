#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rugscan/centrality.hpp"
#include "rugscan/events.hpp"

namespace rugscan {

struct TfbgEdge {
  int src = 0;  // node index
  int dst = 0;
  int64_t t = 0;
  int32_t log_index = 0;
  std::string tx_hash;
  bigint value;
  uint64_t gas_limit = 0;
};

struct TokenFlowBehaviorGraph {
  std::vector<std::string> addresses;  // node id -> address, first-appearance order
  std::map<std::string, int> node_of;
  std::vector<TfbgEdge> edges;  // window order: (timestamp, tx_hash, log_index)
  std::vector<std::array<double, 14>> node_features;
  std::vector<std::array<double, 14>> edge_features;
  SimpleDigraph collapsed;  // parallel edges merged; reused by the GNN layer
  bool eigen_converged = true;

  size_t node_count() const { return addresses.size(); }
  size_t edge_count() const { return edges.size(); }
};

struct TfbgParams {
  int64_t short_window = 3600;  // seconds; the "short time period" span
  CentralityParams centrality;
};

// Sliding-window burst statistics: windows of `window` seconds anchored at
// each event time, inclusive on both ends; returns the largest amount sum and
// the largest event count over all placements. `events` must be
// time-ascending (t, amount) pairs.
struct ShortTermMaxima {
  bigint max_amount = 0;
  int64_t max_count = 0;
};
ShortTermMaxima short_term_maxima(const std::vector<std::pair<int64_t, bigint>>& events,
                                  int64_t window);

// Builds nodes/edges from the transfer events and fills both feature
// matrices. Approvals contribute only to the IfApprove edge column. Throws
// Input when the window has no transfers.
TokenFlowBehaviorGraph build_tfbg(const EventWindow& window, const TokenDescriptor& token,
                                  const TfbgParams& params = {});

// Feature column names, index-aligned with the matrices (audit manifest).
const std::vector<std::string>& node_feature_names();
const std::vector<std::string>& edge_feature_names();

}  // namespace rugscan
