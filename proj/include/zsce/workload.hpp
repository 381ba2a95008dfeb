#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "zsce/json_util.hpp"
#include "zsce/relcore.hpp"

namespace zsce {

enum class CmpOp { Eq, Lt, Le, Gt, Ge, In };
enum class Connective { And, Or };

const char* to_string(CmpOp op);
const char* to_string(Connective c);

struct Literal {
    DataType type = DataType::Int;
    int64_t i = 0;
    double f = 0;
    std::string s;     // categorical value (dictionary entry, not a code)
    int64_t code = -1; // dictionary code of s; -1 when unresolved

    double numeric() const { return type == DataType::Int ? static_cast<double>(i) : f; }
};

struct PredLeaf {
    std::string table;
    std::string column;
    CmpOp op = CmpOp::Eq;
    std::vector<Literal> literals; // one entry except for In (2..5)
};

/// AND/OR tree over comparison leaves; depth <= 3, 1..5 leaves.
struct PredNode {
    enum class Kind { And, Or, Leaf };
    Kind kind = Kind::Leaf;
    std::vector<PredNode> children;
    PredLeaf leaf;

    // selectivity estimate cached by the planner so downstream consumers of
    // serialized plans need no catalog access
    double est_selectivity = -1.0;

    size_t leaf_count() const;
    size_t depth() const;
    template <typename Fn>
    void visit_leaves(Fn&& fn) const {
        if (kind == Kind::Leaf) {
            fn(leaf);
            return;
        }
        for (const PredNode& c : children) c.visit_leaves(fn);
    }
};

enum class AggFunc { CountStar, Sum, Avg, Min, Max };
const char* to_string(AggFunc f);

struct AggSpec {
    AggFunc fn = AggFunc::CountStar;
    std::string table;  // empty for COUNT(*)
    std::string column; // numeric column for the other functions
};

struct JoinEdge {
    std::string child_table; // FK side
    std::string child_column;
    std::string parent_table; // PK side
    std::string parent_column;
};

struct QuerySpec {
    uint64_t id = 0;
    std::vector<std::string> tables; // sorted, connected in the FK graph
    std::vector<JoinEdge> joins;     // tables.size()-1 edges forming a tree
    std::map<std::string, PredNode> filters;
    std::vector<AggSpec> aggregates; // 1..3 entries
};

struct WorkloadConfig {
    uint64_t query_count = 5000;
    int max_join_size = 5;
    IntRange predicate_count{0, 5}; // total leaves per query
    IntRange aggregate_count{1, 3};
    uint64_t seed = 0;

    void validate() const;
};

/// Random analytical queries over the database, deterministic in (db, cfg).
/// Requires statistics (literals are sampled from column domains).
std::vector<QuerySpec> generate_workload(const Database& db, const Catalog& catalog,
                                         const WorkloadConfig& cfg);

/// k distinct single-column indexes drawn uniformly from the pool of FK and
/// filter-eligible (data) columns.
std::vector<IndexDef> generate_index_set(const Database& db, size_t k, uint64_t seed);

Json query_to_json(const QuerySpec& q);
QuerySpec query_from_json(const Json& j);
std::string query_to_sql(const QuerySpec& q); // human inspection only

/// Line-delimited persistence: a workload_v1 header line, then one QuerySpec
/// per line. A .sql rendering is written alongside `path`.
void save_workload(const std::vector<QuerySpec>& queries, const std::string& db_name,
                   const std::string& path);
std::vector<QuerySpec> load_workload(const std::string& path);

Json pred_to_json(const PredNode& p);
PredNode pred_from_json(const Json& j);

} // namespace zsce
