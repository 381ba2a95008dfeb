#include "zsce/planner.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace zsce {

namespace {

constexpr double kIndexScanSelectivityThreshold = 0.05;

struct ScanChoice {
    const PredLeaf* probe = nullptr; // equality conjunct served by an index
    double probe_sel = 1.0;
    IndexDef index;
    bool hypothetical = false;
};

/// Equality leaves usable as an index probe: every ancestor must be AND, so
/// probing the index cannot lose rows that an OR branch would admit.
void collect_conjunct_eq_leaves(const PredNode& node, bool conjunctive,
                                std::vector<const PredLeaf*>& out) {
    if (node.kind == PredNode::Kind::Leaf) {
        if (conjunctive && node.leaf.op == CmpOp::Eq) out.push_back(&node.leaf);
        return;
    }
    bool child_conjunctive = conjunctive && node.kind == PredNode::Kind::And;
    for (const PredNode& c : node.children) collect_conjunct_eq_leaves(c, child_conjunctive, out);
}

/// Tree with one conjunct leaf removed; nullopt when nothing remains.
std::optional<PredNode> remove_conjunct(const PredNode& node, const PredLeaf* target) {
    if (node.kind == PredNode::Kind::Leaf) {
        if (&node.leaf == target) return std::nullopt;
        return node;
    }
    PredNode out;
    out.kind = node.kind;
    for (const PredNode& c : node.children) {
        auto kept = remove_conjunct(c, target);
        if (kept) out.children.push_back(std::move(*kept));
    }
    if (out.children.empty()) return std::nullopt;
    if (out.children.size() == 1) return std::move(out.children.front());
    return out;
}

struct IndexSetView {
    std::set<std::pair<std::string, std::string>> existing;
    std::set<std::pair<std::string, std::string>> hypothetical;

    bool has(const std::string& t, const std::string& c) const {
        return existing.count({t, c}) || hypothetical.count({t, c});
    }
    bool is_hypothetical(const std::string& t, const std::string& c) const {
        return !existing.count({t, c}) && hypothetical.count({t, c});
    }
};

PlanNode make_scan(const QuerySpec& q, const std::string& table, const Catalog& catalog,
                   const IndexSetView& indexes) {
    const TableStats& ts = catalog.table(table);
    PlanNode scan;
    scan.table = table;
    scan.table_rows = ts.row_count;
    scan.table_pages = ts.page_count;

    auto fit = q.filters.find(table);
    const PredNode* filter = fit == q.filters.end() ? nullptr : &fit->second;

    ScanChoice choice;
    if (filter) {
        std::vector<const PredLeaf*> candidates;
        collect_conjunct_eq_leaves(*filter, true, candidates);
        int best_ordinal = 0;
        for (const PredLeaf* leaf : candidates) {
            if (!indexes.has(leaf->table, leaf->column)) continue;
            const ColumnStats& cs = catalog.column(leaf->table, leaf->column);
            double sel = leaf_selectivity(*leaf, cs);
            if (sel >= kIndexScanSelectivityThreshold) continue;
            // ties break on the schema position, which renaming cannot move
            bool better = !choice.probe || sel < choice.probe_sel ||
                          (sel == choice.probe_sel && cs.ordinal < best_ordinal);
            if (better) {
                best_ordinal = cs.ordinal;
                choice.probe = leaf;
                choice.probe_sel = sel;
                choice.index = {leaf->table, leaf->column, false};
                choice.hypothetical = indexes.is_hypothetical(leaf->table, leaf->column);
            }
        }
    }

    if (choice.probe) {
        scan.kind = OpKind::IndexScan;
        scan.probe = *choice.probe;
        scan.probe_selectivity = choice.probe_sel;
        scan.index = choice.index;
        scan.index_hypothetical = choice.hypothetical;
        scan.filter = remove_conjunct(*filter, choice.probe);
    } else {
        scan.kind = OpKind::SeqScan;
        if (filter) scan.filter = *filter;
    }
    return scan;
}

double filtered_estimate(const QuerySpec& q, const std::string& table, const Catalog& catalog) {
    double rows = static_cast<double>(catalog.table(table).row_count);
    auto it = q.filters.find(table);
    if (it != q.filters.end()) rows *= estimate_selectivity(it->second, catalog);
    return rows;
}

const JoinEdge* edge_between(const QuerySpec& q, const std::set<std::string>& joined,
                             const std::string& candidate) {
    for (const JoinEdge& e : q.joins) {
        if (e.child_table == candidate && joined.count(e.parent_table)) return &e;
        if (e.parent_table == candidate && joined.count(e.child_table)) return &e;
    }
    return nullptr;
}

} // namespace

std::vector<std::string> greedy_join_order(const QuerySpec& q, const Catalog& catalog) {
    std::vector<std::string> order;
    std::set<std::string> joined;

    std::string start;
    double best = -1;
    int start_ordinal = 0;
    for (const std::string& t : q.tables) {
        double est = filtered_estimate(q, t, catalog);
        int ord = catalog.table(t).ordinal;
        if (best < 0 || est < best || (est == best && ord < start_ordinal)) {
            best = est;
            start = t;
            start_ordinal = ord;
        }
    }
    order.push_back(start);
    joined.insert(start);
    double card = best;

    while (order.size() < q.tables.size()) {
        std::string pick;
        const JoinEdge* pick_edge = nullptr;
        double pick_card = -1;
        int pick_ordinal = 0;
        for (const std::string& t : q.tables) {
            if (joined.count(t)) continue;
            const JoinEdge* e = edge_between(q, joined, t);
            if (!e) continue;
            double parent_rows =
                static_cast<double>(std::max<uint64_t>(1, catalog.table(e->parent_table).row_count));
            double next_card = card * filtered_estimate(q, t, catalog) / parent_rows;
            int ord = catalog.table(t).ordinal;
            if (pick_card < 0 || next_card < pick_card ||
                (next_card == pick_card && ord < pick_ordinal)) {
                pick = t;
                pick_edge = e;
                pick_card = next_card;
                pick_ordinal = ord;
            }
        }
        if (!pick_edge) throw std::runtime_error("join graph is not connected for query " +
                                                 std::to_string(q.id));
        order.push_back(pick);
        joined.insert(pick);
        card = pick_card;
    }
    return order;
}

PhysicalPlan plan_with_order(const QuerySpec& q, const Catalog& catalog,
                             const std::vector<IndexDef>& indexes,
                             std::span<const std::string> join_order) {
    if (join_order.size() != q.tables.size())
        throw std::runtime_error("join order must cover every table exactly once");

    IndexSetView view;
    for (const IndexDef& d : indexes) view.existing.insert({d.table, d.column});

    PhysicalPlan plan;
    plan.query_id = q.id;

    std::set<std::string> joined;
    PlanNode current = make_scan(q, join_order[0], catalog, view);
    joined.insert(join_order[0]);
    for (size_t i = 1; i < join_order.size(); ++i) {
        const std::string& t = join_order[i];
        const JoinEdge* e = edge_between(q, joined, t);
        if (!e) throw std::runtime_error("join order breaks FK adjacency at table " + t);
        PlanNode scan = make_scan(q, t, catalog, view);

        PlanNode join;
        join.kind = OpKind::HashJoin;
        join.join = *e;
        join.join_parent_rows = catalog.table(e->parent_table).row_count;
        join.children.push_back(std::move(current));
        join.children.push_back(std::move(scan));
        current = std::move(join);
        joined.insert(t);
    }

    PlanNode root;
    root.kind = OpKind::Aggregate;
    root.aggregates = q.aggregates;
    root.children.push_back(std::move(current));
    plan.root = std::move(root);

    // annotations: selectivity cache, estimates, build-side ordering,
    // analytic cost, column snapshots
    plan.root.visit_mut([&](PlanNode& n) {
        if (n.filter) annotate_selectivities(*n.filter, catalog);
    });
    estimate_plan_cardinalities(plan, catalog);
    plan.root.visit_mut([&](PlanNode& n) {
        if (n.kind != OpKind::HashJoin) return;
        // build side is the child with the smaller estimated cardinality;
        // ties keep the left (accumulated) operand
        if (n.children[1].estimated_card < n.children[0].estimated_card)
            std::swap(n.children[0], n.children[1]);
    });
    analytic_cost(plan, catalog);

    auto snapshot = [&](const std::string& t, const std::string& c) {
        const ColumnStats& cs = catalog.column(t, c);
        plan.column_stats[{t, c}] = {cs.datatype, cs.ndv, cs.null_frac, cs.width_bytes};
    };
    plan.root.visit([&](const PlanNode& n) {
        if (n.filter)
            n.filter->visit_leaves([&](const PredLeaf& l) { snapshot(l.table, l.column); });
        if (n.probe) snapshot(n.probe->table, n.probe->column);
        for (const AggSpec& a : n.aggregates)
            if (a.fn != AggFunc::CountStar) snapshot(a.table, a.column);
    });
    return plan;
}

PhysicalPlan plan_query(const QuerySpec& q, const Catalog& catalog,
                        const std::vector<IndexDef>& indexes) {
    std::vector<std::string> order = greedy_join_order(q, catalog);
    return plan_with_order(q, catalog, indexes, order);
}

PhysicalPlan hypothetical_plan(const QuerySpec& q, const Catalog& catalog,
                               const std::vector<IndexDef>& existing,
                               const std::vector<IndexDef>& hypothetical) {
    for (const IndexDef& d : hypothetical)
        catalog.column(d.table, d.column); // throws on unknown table/column

    // plan with the union, then mark which index scans rely on an index that
    // does not exist yet
    std::vector<IndexDef> all = existing;
    all.insert(all.end(), hypothetical.begin(), hypothetical.end());
    std::vector<std::string> order = greedy_join_order(q, catalog);
    PhysicalPlan plan = plan_with_order(q, catalog, all, order);

    std::set<std::pair<std::string, std::string>> exists;
    for (const IndexDef& d : existing) exists.insert({d.table, d.column});
    plan.root.visit_mut([&](PlanNode& n) {
        if (n.kind == OpKind::IndexScan && !exists.count({n.index.table, n.index.column})) {
            n.index_hypothetical = true;
            plan.hypothetical = true;
        }
    });
    return plan;
}

double analytic_cost(PhysicalPlan& plan, const Catalog& catalog) {
    (void)catalog;
    double total = 0;
    plan.root.visit_mut([&](PlanNode& n) {
        if (n.estimated_card < 0)
            throw std::runtime_error("analytic_cost: estimated cardinalities missing");
        double cost = 0;
        switch (n.kind) {
            case OpKind::SeqScan:
                cost = static_cast<double>(n.table_pages) + 0.01 * static_cast<double>(n.table_rows);
                break;
            case OpKind::IndexScan: {
                double matches = static_cast<double>(n.table_rows) * std::max(0.0, n.probe_selectivity);
                cost = std::log2(std::max<double>(1.0, static_cast<double>(n.table_rows))) +
                       1.01 * matches;
                break;
            }
            case OpKind::HashJoin:
                cost = 1.5 * n.children[0].estimated_card + n.children[1].estimated_card +
                       0.1 * n.estimated_card;
                break;
            case OpKind::Aggregate:
                cost = 0.05 * n.children[0].estimated_card;
                break;
        }
        n.analytic_cost = cost;
        total += cost;
    });
    return total;
}

} // namespace zsce
