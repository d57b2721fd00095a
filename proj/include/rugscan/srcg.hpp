#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "rugscan/rules.hpp"
#include "rugscan/scg.hpp"

namespace rugscan {

enum class NodeType : uint8_t { Critical = 0, Invocation, Normal };
enum class EdgeType : uint8_t { Critical = 0, Dependent, Normal };

const char* node_type_name(NodeType t);
const char* edge_type_name(EdgeType t);

struct SrcgNode {
  int32_t block = 0;
  NodeType type = NodeType::Normal;
  std::vector<uint8_t> opcodes;  // operands stripped; raw opcode bytes
};

struct SrcgEdge {
  int32_t src = 0;
  int32_t dst = 0;
  EdgeType type = EdgeType::Normal;
};

struct SemanticRiskCodeGraph {
  std::vector<SrcgNode> nodes;  // ascending block id
  std::vector<SrcgEdge> edges;  // ascending (src, dst)
  std::map<int32_t, size_t> row_of;

  size_t node_count() const { return nodes.size(); }
};

// Types every block and edge of the SCG from the findings: critical beats
// invocation beats normal on nodes; critical beats dependent beats normal on
// edges. Throws on findings that reference blocks outside the graph.
SemanticRiskCodeGraph build_srcg(const CodeGraph& scg, const std::vector<RiskFinding>& findings);

}  // namespace rugscan
