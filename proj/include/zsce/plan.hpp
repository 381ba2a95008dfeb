#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "zsce/json_util.hpp"
#include "zsce/relcore.hpp"
#include "zsce/workload.hpp"

namespace zsce {

enum class OpKind { SeqScan, IndexScan, HashJoin, Aggregate };
const char* to_string(OpKind k);

/// Per-column statistics snapshot embedded in plans so serialized samples are
/// self-contained (training does not need the source database).
struct ColumnStatsSnapshot {
    DataType datatype = DataType::Int;
    uint64_t ndv = 0;
    double null_frac = 0;
    double width_bytes = 8;
};

struct PlanNode {
    OpKind kind = OpKind::SeqScan;
    std::vector<PlanNode> children; // HashJoin: [build, probe]

    // scans
    std::string table;
    uint64_t table_rows = 0;
    uint64_t table_pages = 0;
    std::optional<PredNode> filter; // SeqScan predicate / IndexScan residual
    std::optional<PredLeaf> probe;  // IndexScan equality probe
    double probe_selectivity = -1;
    IndexDef index;
    bool index_hypothetical = false;

    // join
    JoinEdge join;
    uint64_t join_parent_rows = 0; // unfiltered row count of the PK-side table

    // aggregate (root)
    std::vector<AggSpec> aggregates;

    // annotations
    double estimated_card = -1;
    double actual_card = -1;
    double analytic_cost = -1; // per-op share of the optimizer cost
    double exec_cost = -1;     // per-op share of executed work units

    /// Tables contributed by this subtree, in composite-row slot order.
    std::vector<std::string> output_tables() const;
    template <typename Fn>
    void visit(Fn&& fn) const { // children before parents
        for (const PlanNode& c : children) c.visit(fn);
        fn(*this);
    }
    template <typename Fn>
    void visit_mut(Fn&& fn) {
        for (PlanNode& c : children) c.visit_mut(fn);
        fn(*this);
    }
};

struct PhysicalPlan {
    std::string database;
    uint64_t query_id = 0;
    PlanNode root;
    bool hypothetical = false; // references at least one not-yet-built index
    std::map<std::pair<std::string, std::string>, ColumnStatsSnapshot> column_stats;
};

/// plan_v1 serialization, annotations included.
Json plan_to_json(const PhysicalPlan& plan);
PhysicalPlan plan_from_json(const Json& j);

/// Structural equality ignoring the hypothetical flags and annotations.
bool same_structure(const PlanNode& a, const PlanNode& b);

} // namespace zsce
