#pragma once

#include <string>

#include "conelq/portfolio.hpp"
#include "conelq/riccati.hpp"
#include "conelq/simulate.hpp"

namespace conelq {

/// Problem and market spec files are JSON documents; matrices are row-major
/// flat arrays and regime labels are 1-based. See the README for the schema.
ProblemSpec parse_problem(const std::string& text);
ProblemSpec load_problem(const std::string& path);
std::string problem_to_json(const ProblemSpec& spec);

MarketSpec parse_market(const std::string& text);
MarketSpec load_market(const std::string& path);
std::string market_to_json(const MarketSpec& market);

/// Sidecar metadata for an exported solution CSV.
std::string solution_metadata_json(const RiccatiSolution& sol, const SolverConfig& config);

std::string cost_estimate_json(const CostEstimate& est);

}  // namespace conelq
