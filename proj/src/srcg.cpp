#include "rugscan/srcg.hpp"

namespace rugscan {

const char* node_type_name(NodeType t) {
  switch (t) {
    case NodeType::Critical: return "critical";
    case NodeType::Invocation: return "invocation";
    case NodeType::Normal: return "normal";
  }
  return "?";
}

const char* edge_type_name(EdgeType t) {
  switch (t) {
    case EdgeType::Critical: return "critical";
    case EdgeType::Dependent: return "dependent";
    case EdgeType::Normal: return "normal";
  }
  return "?";
}

SemanticRiskCodeGraph build_srcg(const CodeGraph& scg, const std::vector<RiskFinding>& findings) {
  std::set<int32_t> critical_blocks;
  std::set<std::pair<int32_t, int32_t>> critical_flows;
  for (const RiskFinding& f : findings) {
    for (int32_t b : f.cb) {
      if (!scg.has_block(b))
        throw internal_error("finding references unknown block " + std::to_string(b));
      critical_blocks.insert(b);
    }
    for (const auto& e : f.cf) {
      if (!scg.has_block(e.first) || !scg.has_block(e.second))
        throw internal_error("finding references unknown edge");
      critical_flows.insert(e);
    }
  }

  SemanticRiskCodeGraph out;
  for (const auto& [id, bb] : scg.blocks) {
    SrcgNode n;
    n.block = id;
    if (critical_blocks.count(id))
      n.type = NodeType::Critical;
    else if (bb.has_internal_call)
      n.type = NodeType::Invocation;
    else
      n.type = NodeType::Normal;
    n.opcodes.reserve(bb.instructions.size());
    for (const Instruction& ins : bb.instructions) n.opcodes.push_back(ins.opcode);
    out.row_of[id] = out.nodes.size();
    out.nodes.push_back(std::move(n));
  }

  std::set<std::pair<int32_t, int32_t>> pairs = scg.cf_edges;
  pairs.insert(scg.dd_edges.begin(), scg.dd_edges.end());
  for (const auto& p : pairs) {
    SrcgEdge e;
    e.src = p.first;
    e.dst = p.second;
    if (critical_flows.count(p))
      e.type = EdgeType::Critical;
    else if (scg.dd_edges.count(p))
      e.type = EdgeType::Dependent;
    else
      e.type = EdgeType::Normal;
    out.edges.push_back(e);
  }
  return out;
}

}  // namespace rugscan
