#include "zsce/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace zsce {

const char* to_string(NodeType t) {
    switch (t) {
        case NodeType::PlanOp: return "plan_op";
        case NodeType::Table: return "table";
        case NodeType::Column: return "column";
        case NodeType::Predicate: return "predicate";
        case NodeType::Aggregation: return "aggregation";
    }
    return "?";
}

static NodeType nodetype_from_string(std::string_view s) {
    if (s == "plan_op") return NodeType::PlanOp;
    if (s == "table") return NodeType::Table;
    if (s == "column") return NodeType::Column;
    if (s == "predicate") return NodeType::Predicate;
    if (s == "aggregation") return NodeType::Aggregation;
    throw IoError("unknown node type '" + std::string(s) + "'");
}

const char* to_string(CardMode m) { return m == CardMode::Exact ? "exact" : "estimated"; }

CardMode card_mode_from_string(std::string_view s) {
    if (s == "exact") return CardMode::Exact;
    if (s == "estimated") return CardMode::Estimated;
    throw ConfigError("unknown cardinality mode '" + std::string(s) + "'");
}

std::array<int, kNodeTypeCount> feature_dims(const std::string& schema) {
    if (schema == kGraphSchemaV1) return {6, 2, 6, 10, 5};
    // one-hot ablation: "graph_onehot_v1:t<NT>:c<NC>"
    if (schema.rfind("graph_onehot_v1:t", 0) == 0) {
        size_t c = schema.find(":c");
        if (c != std::string::npos) {
            int nt = std::stoi(schema.substr(17, c - 17));
            int nc = std::stoi(schema.substr(c + 2));
            return {6, nt, nc, 10, 5};
        }
    }
    throw ConfigError("unknown graph schema '" + schema + "'");
}

namespace {

constexpr double kMinSelectivity = 1e-9;

struct Builder {
    QueryGraph g;
    std::map<std::pair<std::string, std::string>, uint32_t> column_nodes;
    const PhysicalPlan& plan;
    CardMode mode;
    const OneHotRegistry* registry = nullptr; // ablation only

    uint32_t add_node(NodeType type, std::vector<double> feats) {
        GraphNode n;
        n.id = static_cast<uint32_t>(g.nodes.size());
        n.type = type;
        n.features = std::move(feats);
        g.nodes.push_back(std::move(n));
        return g.nodes.back().id;
    }

    uint32_t add_sparse_node(NodeType type, int dim, int hot) {
        GraphNode n;
        n.id = static_cast<uint32_t>(g.nodes.size());
        n.type = type;
        n.sparse_dim = dim;
        n.sparse_hot = hot;
        g.nodes.push_back(std::move(n));
        return g.nodes.back().id;
    }

    void add_edge(uint32_t child, uint32_t parent) { g.edges.emplace_back(child, parent); }

    double card_of(const PlanNode& n) const {
        double c = mode == CardMode::Exact ? n.actual_card : n.estimated_card;
        if (c < 0)
            throw std::runtime_error(std::string("encode: plan lacks ") +
                                     (mode == CardMode::Exact ? "actual" : "estimated") +
                                     " cardinalities");
        return c;
    }

    uint32_t table_node(const PlanNode& scan) {
        if (registry) {
            auto it = registry->tables.find(plan.database + "." + scan.table);
            return add_sparse_node(NodeType::Table, static_cast<int>(registry->tables.size()),
                                   it == registry->tables.end() ? -1 : it->second);
        }
        return add_node(NodeType::Table,
                        {std::log1p(static_cast<double>(scan.table_rows)),
                         std::log1p(static_cast<double>(scan.table_pages))});
    }

    uint32_t column_node(const std::string& table, const std::string& column) {
        auto key = std::make_pair(table, column);
        auto it = column_nodes.find(key);
        if (it != column_nodes.end()) return it->second;
        uint32_t id;
        if (registry) {
            auto rit = registry->columns.find(plan.database + "." + table + "." + column);
            id = add_sparse_node(NodeType::Column, static_cast<int>(registry->columns.size()),
                                 rit == registry->columns.end() ? -1 : rit->second);
        } else {
            auto sit = plan.column_stats.find(key);
            if (sit == plan.column_stats.end())
                throw std::runtime_error("encode: missing column statistics for " + table + "." + column);
            const ColumnStatsSnapshot& s = sit->second;
            std::vector<double> f(6, 0.0);
            f[static_cast<size_t>(s.datatype)] = 1.0;
            f[3] = std::log1p(static_cast<double>(s.ndv));
            f[4] = s.null_frac;
            f[5] = s.width_bytes / 64.0;
            id = add_node(NodeType::Column, std::move(f));
        }
        column_nodes.emplace(key, id);
        return id;
    }

    // feature slots: {and, or, =, <, <=, >, >=, in} + log sel + |literals|/5
    uint32_t predicate_node(const PredNode& p) {
        std::vector<uint32_t> child_ids;
        if (p.kind != PredNode::Kind::Leaf)
            for (const PredNode& c : p.children) child_ids.push_back(predicate_node(c));

        std::vector<double> f(10, 0.0);
        size_t slot;
        double literal_frac = 0;
        if (p.kind == PredNode::Kind::And) {
            slot = 0;
        } else if (p.kind == PredNode::Kind::Or) {
            slot = 1;
        } else {
            switch (p.leaf.op) {
                case CmpOp::Eq: slot = 2; break;
                case CmpOp::Lt: slot = 3; break;
                case CmpOp::Le: slot = 4; break;
                case CmpOp::Gt: slot = 5; break;
                case CmpOp::Ge: slot = 6; break;
                default: slot = 7; break; // In
            }
            if (p.leaf.op == CmpOp::In)
                literal_frac = static_cast<double>(p.leaf.literals.size()) / 5.0;
        }
        f[slot] = 1.0;
        if (p.est_selectivity < 0)
            throw std::runtime_error("encode: predicate lacks a selectivity estimate");
        f[8] = std::log(std::max(kMinSelectivity, p.est_selectivity));
        f[9] = literal_frac;

        if (p.kind == PredNode::Kind::Leaf) {
            uint32_t col = column_node(p.leaf.table, p.leaf.column);
            uint32_t id = add_node(NodeType::Predicate, std::move(f));
            add_edge(col, id);
            return id;
        }
        uint32_t id = add_node(NodeType::Predicate, std::move(f));
        for (uint32_t c : child_ids) add_edge(c, id);
        return id;
    }

    uint32_t plan_op_node(const PlanNode& n, const std::vector<uint32_t>& child_ops) {
        std::vector<uint32_t> attach;

        if (n.kind == OpKind::SeqScan || n.kind == OpKind::IndexScan) {
            attach.push_back(table_node(n));
            if (n.probe) {
                PredNode probe_wrapper;
                probe_wrapper.kind = PredNode::Kind::Leaf;
                probe_wrapper.leaf = *n.probe;
                probe_wrapper.est_selectivity = std::max(0.0, n.probe_selectivity);
                attach.push_back(predicate_node(probe_wrapper));
            }
            if (n.filter) attach.push_back(predicate_node(*n.filter));
        }
        if (n.kind == OpKind::Aggregate) {
            for (const AggSpec& a : n.aggregates) {
                std::vector<double> f(5, 0.0);
                f[static_cast<size_t>(a.fn)] = 1.0;
                std::vector<uint32_t> cols;
                if (a.fn != AggFunc::CountStar) cols.push_back(column_node(a.table, a.column));
                uint32_t agg = add_node(NodeType::Aggregation, std::move(f));
                for (uint32_t c : cols) add_edge(c, agg);
                attach.push_back(agg);
            }
        }

        double in_card;
        if (child_ops.empty()) {
            in_card = static_cast<double>(n.table_rows);
        } else {
            in_card = 0;
            for (const PlanNode& c : n.children) in_card += card_of(c);
        }
        std::vector<double> f(6, 0.0);
        f[static_cast<size_t>(n.kind)] = 1.0;
        f[4] = std::log1p(in_card);
        f[5] = std::log1p(card_of(n));
        uint32_t id = add_node(NodeType::PlanOp, std::move(f));
        for (uint32_t c : child_ops) add_edge(c, id);
        for (uint32_t a : attach) add_edge(a, id);
        return id;
    }

    uint32_t walk(const PlanNode& n) {
        std::vector<uint32_t> child_ops;
        for (const PlanNode& c : n.children) child_ops.push_back(walk(c));
        return plan_op_node(n, child_ops);
    }
};

} // namespace

QueryGraph encode(const PhysicalPlan& plan, CardMode mode) {
    Builder b{.g = {}, .column_nodes = {}, .plan = plan, .mode = mode};
    b.g.schema = kGraphSchemaV1;
    b.g.root = b.walk(plan.root);
    return std::move(b.g);
}

void OneHotRegistry::add_database(const Database& db) {
    for (const Table& t : db.tables) {
        std::string tkey = db.name + "." + t.name;
        if (!tables.count(tkey)) tables.emplace(tkey, static_cast<int>(tables.size()));
        for (const Column& c : t.columns) {
            std::string ckey = tkey + "." + c.name;
            if (!columns.count(ckey)) columns.emplace(ckey, static_cast<int>(columns.size()));
        }
    }
}

std::string OneHotRegistry::schema() const {
    return "graph_onehot_v1:t" + std::to_string(tables.size()) + ":c" + std::to_string(columns.size());
}

Json OneHotRegistry::to_json() const {
    Json j;
    j["tables"] = tables;
    j["columns"] = columns;
    return j;
}

OneHotRegistry OneHotRegistry::from_json(const Json& j) {
    OneHotRegistry r;
    for (auto it = j["tables"].begin(); it != j["tables"].end(); ++it) r.tables[it.key()] = it.value();
    for (auto it = j["columns"].begin(); it != j["columns"].end(); ++it) r.columns[it.key()] = it.value();
    return r;
}

QueryGraph encode_onehot_ablation(const PhysicalPlan& plan, const OneHotRegistry& registry,
                                  CardMode mode) {
    Builder b{.g = {}, .column_nodes = {}, .plan = plan, .mode = mode, .registry = &registry};
    b.g.schema = registry.schema();
    b.g.root = b.walk(plan.root);
    return std::move(b.g);
}

void validate_graph(const QueryGraph& g) {
    auto dims = feature_dims(g.schema);
    if (g.nodes.empty()) throw std::runtime_error("graph: no nodes");
    if (g.root != g.nodes.back().id) throw std::runtime_error("graph: root must be the last node");
    for (size_t i = 0; i < g.nodes.size(); ++i) {
        const GraphNode& n = g.nodes[i];
        if (n.id != i) throw std::runtime_error("graph: node ids must be dense and ascending");
        int dim = dims[static_cast<size_t>(n.type)];
        if (n.sparse_dim >= 0) {
            if (n.sparse_dim != dim || n.sparse_hot >= n.sparse_dim)
                throw std::runtime_error("graph: sparse feature dimension mismatch");
        } else if (static_cast<int>(n.features.size()) != dim) {
            throw std::runtime_error("graph: feature dimension mismatch");
        }
        for (double f : n.features)
            if (!std::isfinite(f)) throw std::runtime_error("graph: non-finite feature");
    }
    // edges child -> parent with child < parent make ascending ids a
    // topological order and rule out cycles
    std::vector<char> reaches_root(g.nodes.size(), 0);
    reaches_root[g.root] = 1;
    for (const auto& [child, parent] : g.edges) {
        if (child >= g.nodes.size() || parent >= g.nodes.size())
            throw std::runtime_error("graph: edge endpoint out of range");
        if (child >= parent) throw std::runtime_error("graph: edge does not point toward the root");
    }
    // reverse sweep: a node reaches the root if any of its parents does
    for (auto it = g.edges.rbegin(); it != g.edges.rend(); ++it)
        if (reaches_root[it->second]) reaches_root[it->first] = 1;
    // one reverse pass suffices because edges were appended parents-last;
    // verify anyway by checking every node
    for (size_t i = 0; i < g.nodes.size(); ++i)
        if (!reaches_root[i]) throw std::runtime_error("graph: node cannot reach the root");
}

Json graph_to_json(const QueryGraph& g) {
    Json j;
    j["format"] = "graph_v1";
    j["schema"] = g.schema;
    j["root"] = g.root;
    Json nodes = Json::array();
    for (const GraphNode& n : g.nodes) {
        Json jn;
        jn["id"] = n.id;
        jn["type"] = to_string(n.type);
        if (n.sparse_dim >= 0) {
            jn["sparse_dim"] = n.sparse_dim;
            jn["sparse_hot"] = n.sparse_hot;
        } else {
            jn["features"] = n.features;
        }
        nodes.push_back(jn);
    }
    j["nodes"] = nodes;
    Json edges = Json::array();
    for (const auto& [c, p] : g.edges) edges.push_back({c, p});
    j["edges"] = edges;
    return j;
}

QueryGraph graph_from_json(const Json& j) {
    if (!j.contains("format") || j["format"] != "graph_v1") throw IoError("not a graph_v1 document");
    QueryGraph g;
    g.schema = j["schema"].get<std::string>();
    g.root = j["root"].get<uint32_t>();
    for (const Json& jn : j["nodes"]) {
        GraphNode n;
        n.id = jn["id"].get<uint32_t>();
        n.type = nodetype_from_string(jn["type"].get<std::string>());
        if (jn.contains("sparse_dim")) {
            n.sparse_dim = jn["sparse_dim"].get<int32_t>();
            n.sparse_hot = jn["sparse_hot"].get<int32_t>();
        } else {
            n.features = jn["features"].get<std::vector<double>>();
        }
        g.nodes.push_back(std::move(n));
    }
    for (const Json& je : j["edges"]) g.edges.emplace_back(je[0].get<uint32_t>(), je[1].get<uint32_t>());
    return g;
}

bool graphs_identical(const QueryGraph& a, const QueryGraph& b) {
    if (a.schema != b.schema || a.root != b.root || a.nodes.size() != b.nodes.size() ||
        a.edges != b.edges)
        return false;
    for (size_t i = 0; i < a.nodes.size(); ++i) {
        const GraphNode &x = a.nodes[i], &y = b.nodes[i];
        if (x.id != y.id || x.type != y.type || x.sparse_dim != y.sparse_dim ||
            x.sparse_hot != y.sparse_hot || x.features.size() != y.features.size())
            return false;
        if (std::memcmp(x.features.data(), y.features.data(), x.features.size() * sizeof(double)) != 0)
            return false;
    }
    return true;
}

} // namespace zsce
