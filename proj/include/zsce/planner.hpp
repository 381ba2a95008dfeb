#pragma once

#include <span>
#include <vector>

#include "zsce/cardest.hpp"
#include "zsce/plan.hpp"

namespace zsce {

/// Physical plan for a query: per-table scan choice (IndexScan when an
/// equality conjunct hits an indexed column with estimated selectivity below
/// 0.05, SeqScan otherwise), greedy join order starting from the smallest
/// estimated filtered table, hash-join build side on the smaller estimated
/// input. Deterministic; all ties break lexicographically. The returned plan
/// carries estimated cardinalities, cached predicate selectivities, per-op
/// analytic cost and column statistics snapshots.
PhysicalPlan plan_query(const QuerySpec& q, const Catalog& catalog,
                        const std::vector<IndexDef>& indexes);

/// plan_query with indexes := existing + hypothetical. Plans whose index
/// scans use a hypothetical index are flagged so the executor refuses them
/// until the index is materialized.
PhysicalPlan hypothetical_plan(const QuerySpec& q, const Catalog& catalog,
                               const std::vector<IndexDef>& existing,
                               const std::vector<IndexDef>& hypothetical);

/// Plan with a caller-chosen join order (must stay FK-adjacent). Used by the
/// planner itself after the greedy pass and by plan-invariance tests.
PhysicalPlan plan_with_order(const QuerySpec& q, const Catalog& catalog,
                             const std::vector<IndexDef>& indexes,
                             std::span<const std::string> join_order);

/// Optimizer cost in abstract units: SeqScan pages + 0.01*rows, IndexScan
/// log2(rows) + 1.01*matches, HashJoin 1.5*build + probe + 0.1*out, Aggregate
/// 0.05*in; fills per-op analytic_cost and returns the sum. Requires
/// estimated cardinalities.
double analytic_cost(PhysicalPlan& plan, const Catalog& catalog);

/// Greedy join order on its own (exposed for tests that hand-trace the rule).
std::vector<std::string> greedy_join_order(const QuerySpec& q, const Catalog& catalog);

} // namespace zsce
