#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "zsce/json_util.hpp"
#include "zsce/plan.hpp"

namespace zsce {

enum class NodeType { PlanOp = 0, Table = 1, Column = 2, Predicate = 3, Aggregation = 4 };
constexpr size_t kNodeTypeCount = 5;
const char* to_string(NodeType t);

/// graph_v1 feature layout (dimensions fixed per node type):
///   PlanOp      [6]: operator one-hot(4) + log1p(input card) + log1p(output card)
///   Table       [2]: log1p(rows) + log1p(pages)
///   Column      [6]: datatype one-hot(3) + log1p(ndv) + null_frac + width/64
///   Predicate  [10]: {and,or,=,<,<=,>,>=,in} one-hot + log(subtree selectivity)
///                    + literal_count/5 (IN only)
///   Aggregation [5]: function one-hot
/// The one-hot ablation replaces Table/Column features with registry one-hot
/// identities (held sparse) and tags its own schema string.
constexpr const char* kGraphSchemaV1 = "graph_v1";
std::array<int, kNodeTypeCount> feature_dims(const std::string& schema);

struct GraphNode {
    uint32_t id = 0;
    NodeType type = NodeType::PlanOp;
    std::vector<double> features; // dense; empty when the sparse form is used
    int32_t sparse_dim = -1;      // >=0: features are one-hot(sparse_hot) of this size
    int32_t sparse_hot = -1;      // -1 with sparse_dim >= 0: all-zero identity
};

/// Heterogeneous DAG over typed nodes; edges point child -> parent, all paths
/// lead to the root plan operator. Node ids are assigned children-first, so
/// ascending id order is a topological order.
struct QueryGraph {
    std::string schema = kGraphSchemaV1;
    std::vector<GraphNode> nodes;
    std::vector<std::pair<uint32_t, uint32_t>> edges; // (child, parent)
    uint32_t root = 0;
};

enum class CardMode { Exact, Estimated };
const char* to_string(CardMode m);
CardMode card_mode_from_string(std::string_view s);

/// Encodes an annotated plan into the transferable query graph. Mode selects
/// which cardinality annotations feed the plan-operator features; everything
/// else is identical between modes. Features never contain names or ids.
QueryGraph encode(const PhysicalPlan& plan, CardMode mode);

/// Non-transferable baseline: table/column identities as global one-hot
/// positions learned from the training databases; unseen identities map to
/// the all-zero vector.
struct OneHotRegistry {
    std::map<std::string, int> tables;  // "db.table" -> position
    std::map<std::string, int> columns; // "db.table.column" -> position

    void add_database(const Database& db);
    std::string schema() const;
    Json to_json() const;
    static OneHotRegistry from_json(const Json& j);
};

QueryGraph encode_onehot_ablation(const PhysicalPlan& plan, const OneHotRegistry& registry,
                                  CardMode mode);

/// Structural checks: DAG, ids topological, all nodes reach the root, feature
/// dimensions match the schema. Throws on violation.
void validate_graph(const QueryGraph& g);

Json graph_to_json(const QueryGraph& g);
QueryGraph graph_from_json(const Json& j);

bool graphs_identical(const QueryGraph& a, const QueryGraph& b); // bit-exact

} // namespace zsce
