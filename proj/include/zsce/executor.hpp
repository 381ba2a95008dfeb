#pragma once

#include <optional>
#include <vector>

#include "zsce/plan.hpp"
#include "zsce/relcore.hpp"
#include "zsce/workload.hpp"

namespace zsce {

/// Work-unit weights for the deterministic ground-truth cost. Elementary
/// operations are counted as integers during execution and weighted once at
/// the end, per operator:
///   SeqScan    = page_touch*pages + tuple_scan*rows + predicate_leaf_eval*leaf_evals
///   IndexScan  = log2(table_rows) per probe + index_match_fetch*fetches
///                + predicate_leaf_eval*residual leaf_evals
///   HashJoin   = hash_insert*inserts + hash_probe*probes
///                + hash_entry*chain entries examined (matches and collisions)
///   Aggregate  = aggregate_update per applied update (per row per aggregate)
/// Predicate leaves are evaluated with short-circuiting, so leaf_evals —
/// and hence the cost — depends on the data, not only on the plan.
struct CostWeights {
    double tuple_scan = 1.0;
    double predicate_leaf_eval = 0.2;
    double hash_insert = 2.0;
    double hash_probe = 1.0;
    double hash_entry = 1.0;
    double index_match_fetch = 1.2;
    double aggregate_update = 0.5;
    double page_touch = 2.0;
};

Json cost_weights_to_json(const CostWeights& w);
CostWeights cost_weights_from_json(const Json& j);

struct AggValue {
    bool is_null = true;
    double value = 0;

    bool operator==(const AggValue& o) const {
        return is_null == o.is_null && (is_null || value == o.value);
    }
};

struct ExecResult {
    std::vector<AggValue> values;
    double cost_units = 0;
    std::optional<double> wall_time_ms;
    PhysicalPlan annotated; // input plan with actual_card and exec_cost filled
};

/// Executes a physical plan over in-memory data. Inner joins, short-circuit
/// predicate filtering with nulls failing every comparison, aggregates
/// ignoring nulls (COUNT(*) counts rows). Aggregate folding happens in
/// canonical row order (lexicographic over the sorted table list) so results
/// are bit-identical across plans and match the brute-force oracle.
/// Hypothetical plans are refused unless their indexes were materialized.
ExecResult execute(const PhysicalPlan& plan, const Database& db, const CostWeights& weights,
                   bool record_wall_time = false);

struct OracleResult {
    std::vector<AggValue> values;
    // true output cardinality for each subset of joined tables, keyed by the
    // sorted table list; single tables are the filtered scan counts
    std::map<std::vector<std::string>, uint64_t> subset_cardinalities;
};

/// Ground truth by definition: enumerate the (per-table filtered) cross
/// product, apply join edges, aggregate. Independent of the executor's
/// operator code. Guards against products of table sizes above 10^7.
OracleResult brute_force_oracle(const QuerySpec& q, const Database& db,
                                uint64_t max_product = 10'000'000);

} // namespace zsce
