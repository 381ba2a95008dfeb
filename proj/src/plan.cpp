#include "zsce/plan.hpp"

namespace zsce {

const char* to_string(OpKind k) {
    switch (k) {
        case OpKind::SeqScan: return "seq_scan";
        case OpKind::IndexScan: return "index_scan";
        case OpKind::HashJoin: return "hash_join";
        case OpKind::Aggregate: return "aggregate";
    }
    return "?";
}

static OpKind opkind_from_string(std::string_view s) {
    if (s == "seq_scan") return OpKind::SeqScan;
    if (s == "index_scan") return OpKind::IndexScan;
    if (s == "hash_join") return OpKind::HashJoin;
    if (s == "aggregate") return OpKind::Aggregate;
    throw IoError("unknown operator kind '" + std::string(s) + "'");
}

std::vector<std::string> PlanNode::output_tables() const {
    if (children.empty()) return {table};
    std::vector<std::string> out;
    for (const PlanNode& c : children) {
        auto t = c.output_tables();
        out.insert(out.end(), t.begin(), t.end());
    }
    return out;
}

namespace {

Json leaf_to_json(const PredLeaf& leaf) {
    PredNode wrapper;
    wrapper.kind = PredNode::Kind::Leaf;
    wrapper.leaf = leaf;
    return pred_to_json(wrapper);
}

PredLeaf leaf_from_json(const Json& j) { return pred_from_json(j).leaf; }

Json node_to_json(const PlanNode& n) {
    Json j;
    j["op"] = to_string(n.kind);
    switch (n.kind) {
        case OpKind::SeqScan:
        case OpKind::IndexScan:
            j["table"] = n.table;
            j["table_rows"] = n.table_rows;
            j["table_pages"] = n.table_pages;
            if (n.filter) j["filter"] = pred_to_json(*n.filter);
            if (n.kind == OpKind::IndexScan) {
                j["probe"] = leaf_to_json(*n.probe);
                j["probe_selectivity"] = n.probe_selectivity;
                j["index"] = {{"table", n.index.table}, {"column", n.index.column}};
                if (n.index_hypothetical) j["index_hypothetical"] = true;
            }
            break;
        case OpKind::HashJoin:
            j["join"] = {{"child_table", n.join.child_table},
                         {"child_column", n.join.child_column},
                         {"parent_table", n.join.parent_table},
                         {"parent_column", n.join.parent_column}};
            j["join_parent_rows"] = n.join_parent_rows;
            break;
        case OpKind::Aggregate: {
            Json aggs = Json::array();
            for (const AggSpec& a : n.aggregates) {
                Json ja;
                ja["fn"] = to_string(a.fn);
                if (a.fn != AggFunc::CountStar) {
                    ja["table"] = a.table;
                    ja["column"] = a.column;
                }
                aggs.push_back(ja);
            }
            j["aggregates"] = aggs;
            break;
        }
    }
    if (n.estimated_card >= 0) j["estimated_card"] = n.estimated_card;
    if (n.actual_card >= 0) j["actual_card"] = n.actual_card;
    if (n.analytic_cost >= 0) j["analytic_cost"] = n.analytic_cost;
    if (n.exec_cost >= 0) j["exec_cost"] = n.exec_cost;
    if (!n.children.empty()) {
        Json ch = Json::array();
        for (const PlanNode& c : n.children) ch.push_back(node_to_json(c));
        j["children"] = ch;
    }
    return j;
}

PlanNode node_from_json(const Json& j) {
    PlanNode n;
    n.kind = opkind_from_string(j["op"].get<std::string>());
    switch (n.kind) {
        case OpKind::SeqScan:
        case OpKind::IndexScan:
            n.table = j["table"].get<std::string>();
            n.table_rows = j["table_rows"].get<uint64_t>();
            n.table_pages = j["table_pages"].get<uint64_t>();
            if (j.contains("filter")) n.filter = pred_from_json(j["filter"]);
            if (n.kind == OpKind::IndexScan) {
                n.probe = leaf_from_json(j["probe"]);
                n.probe_selectivity = j["probe_selectivity"].get<double>();
                n.index.table = j["index"]["table"].get<std::string>();
                n.index.column = j["index"]["column"].get<std::string>();
                n.index_hypothetical = j.value("index_hypothetical", false);
            }
            break;
        case OpKind::HashJoin:
            n.join = {j["join"]["child_table"].get<std::string>(),
                      j["join"]["child_column"].get<std::string>(),
                      j["join"]["parent_table"].get<std::string>(),
                      j["join"]["parent_column"].get<std::string>()};
            n.join_parent_rows = j["join_parent_rows"].get<uint64_t>();
            break;
        case OpKind::Aggregate:
            for (const Json& ja : j["aggregates"]) {
                AggSpec a;
                a.fn = ja["fn"] == "count" ? AggFunc::CountStar
                       : ja["fn"] == "sum" ? AggFunc::Sum
                       : ja["fn"] == "avg" ? AggFunc::Avg
                       : ja["fn"] == "min" ? AggFunc::Min
                                           : AggFunc::Max;
                a.table = ja.value("table", std::string());
                a.column = ja.value("column", std::string());
                n.aggregates.push_back(std::move(a));
            }
            break;
    }
    n.estimated_card = j.value("estimated_card", -1.0);
    n.actual_card = j.value("actual_card", -1.0);
    n.analytic_cost = j.value("analytic_cost", -1.0);
    n.exec_cost = j.value("exec_cost", -1.0);
    if (j.contains("children"))
        for (const Json& c : j["children"]) n.children.push_back(node_from_json(c));
    return n;
}

} // namespace

Json plan_to_json(const PhysicalPlan& plan) {
    Json j;
    j["format"] = "plan_v1";
    j["database"] = plan.database;
    j["query_id"] = plan.query_id;
    if (plan.hypothetical) j["hypothetical"] = true;
    j["root"] = node_to_json(plan.root);
    Json stats = Json::array();
    for (const auto& [key, s] : plan.column_stats)
        stats.push_back({{"table", key.first},
                         {"column", key.second},
                         {"datatype", to_string(s.datatype)},
                         {"ndv", s.ndv},
                         {"null_frac", s.null_frac},
                         {"width_bytes", s.width_bytes}});
    j["column_stats"] = stats;
    return j;
}

PhysicalPlan plan_from_json(const Json& j) {
    if (!j.contains("format") || j["format"] != "plan_v1") throw IoError("not a plan_v1 document");
    PhysicalPlan p;
    p.database = j["database"].get<std::string>();
    p.query_id = j["query_id"].get<uint64_t>();
    p.hypothetical = j.value("hypothetical", false);
    p.root = node_from_json(j["root"]);
    for (const Json& s : j["column_stats"]) {
        ColumnStatsSnapshot snap;
        snap.datatype = datatype_from_string(s["datatype"].get<std::string>());
        snap.ndv = s["ndv"].get<uint64_t>();
        snap.null_frac = s["null_frac"].get<double>();
        snap.width_bytes = s["width_bytes"].get<double>();
        p.column_stats[{s["table"].get<std::string>(), s["column"].get<std::string>()}] = snap;
    }
    return p;
}

bool same_structure(const PlanNode& a, const PlanNode& b) {
    if (a.kind != b.kind || a.table != b.table || a.children.size() != b.children.size()) return false;
    if (a.kind == OpKind::IndexScan &&
        (a.index.table != b.index.table || a.index.column != b.index.column))
        return false;
    if (a.kind == OpKind::HashJoin &&
        (a.join.child_table != b.join.child_table || a.join.child_column != b.join.child_column ||
         a.join.parent_table != b.join.parent_table || a.join.parent_column != b.join.parent_column))
        return false;
    for (size_t i = 0; i < a.children.size(); ++i)
        if (!same_structure(a.children[i], b.children[i])) return false;
    return true;
}

} // namespace zsce
