#pragma once

#include <string>
#include <vector>

#include "rugscan/facts.hpp"

namespace rugscan {

enum class Risk : int { AR = 0, TR, ADDR, MTR, MTA, MEC, HM, HBM };
enum class RiskCategory : int { SaleRestrict = 0, VariableManipulation, BalanceTamper };

const char* risk_name(Risk r);
const char* category_name(RiskCategory c);
RiskCategory category_of(Risk r);

// Parses a risk name back to the enum; returns false if unknown.
bool risk_from_name(const std::string& name, Risk& out);

struct RiskFinding {
  Risk risk;
  RiskCategory category;
  std::set<int32_t> cb;                         // critical blocks
  std::set<std::pair<int32_t, int32_t>> cf;     // critical flows
  std::string witness;
};

// Evaluates the full rule catalog. At most one finding per risk; multiple
// witnessing matches merge their blocks/flows. Output sorted by risk enum.
std::vector<RiskFinding> match_rules(const Facts& facts, const CodeGraph& g);

// Convenience: lift + facts + rules in one call.
std::vector<RiskFinding> scan_code_risks(const Bytes& runtime_code);

}  // namespace rugscan
