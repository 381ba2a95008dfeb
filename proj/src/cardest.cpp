#include "zsce/cardest.hpp"

#include <algorithm>
#include <cmath>

namespace zsce {

namespace {

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

/// Fraction of non-null values strictly below v (linear interpolation within
/// the containing bucket).
double coverage_below(const Histogram& h, double v) {
    uint64_t n = h.total_count();
    if (n == 0) return 0;
    if (v <= h.bounds.front()) return 0;
    if (v > h.bounds.back()) return 1;
    if (h.bounds.size() == 2 && h.bounds[0] == h.bounds[1]) return 0; // constant, v == bound
    int b = h.locate(v);
    if (b < 0) return v > h.bounds.back() ? 1.0 : 0.0;
    double below = 0;
    for (int i = 0; i < b; ++i) below += static_cast<double>(h.counts[i]);
    double lo = h.bounds[b], hi = h.bounds[b + 1];
    double interp = hi > lo ? (v - lo) / (hi - lo) : 0.0;
    return (below + static_cast<double>(h.counts[b]) * interp) / static_cast<double>(n);
}

double equality_fraction(const Histogram& h, double v) {
    uint64_t n = h.total_count();
    if (n == 0) return 0;
    int b = h.locate(v);
    if (b < 0) return 0;
    double frac = static_cast<double>(h.counts[b]) / static_cast<double>(n);
    return frac / static_cast<double>(std::max<uint64_t>(1, h.ndvs[b]));
}

double literal_value(const Literal& lit) {
    if (lit.type != DataType::Categorical) return lit.numeric();
    // categorical histograms are over dictionary codes; an unresolved word
    // (code -1) matches nothing
    return static_cast<double>(lit.code);
}

} // namespace

double leaf_selectivity(const PredLeaf& leaf, const ColumnStats& stats) {
    const Histogram& h = stats.histogram;
    double nonnull = 1.0 - stats.null_frac;
    double sel = 0;
    switch (leaf.op) {
        case CmpOp::Eq:
            sel = equality_fraction(h, literal_value(leaf.literals.front()));
            break;
        case CmpOp::In: {
            for (const Literal& lit : leaf.literals) sel += equality_fraction(h, literal_value(lit));
            sel = clamp01(sel);
            break;
        }
        case CmpOp::Lt:
            sel = coverage_below(h, leaf.literals.front().numeric());
            break;
        case CmpOp::Le: {
            double v = leaf.literals.front().numeric();
            sel = coverage_below(h, v) + equality_fraction(h, v);
            break;
        }
        case CmpOp::Gt: {
            double v = leaf.literals.front().numeric();
            sel = 1.0 - coverage_below(h, v) - equality_fraction(h, v);
            break;
        }
        case CmpOp::Ge:
            sel = 1.0 - coverage_below(h, leaf.literals.front().numeric());
            break;
    }
    return clamp01(sel * nonnull);
}

namespace {

template <bool Annotate>
double estimate_node(std::conditional_t<Annotate, PredNode, const PredNode>& pred,
                     const Catalog& catalog) {
    double sel;
    if (pred.kind == PredNode::Kind::Leaf) {
        sel = leaf_selectivity(pred.leaf, catalog.column(pred.leaf.table, pred.leaf.column));
    } else if (pred.kind == PredNode::Kind::And) {
        sel = 1.0;
        for (auto& c : pred.children) sel *= estimate_node<Annotate>(c, catalog);
    } else {
        double none = 1.0; // P(no child matches) under independence
        for (auto& c : pred.children) none *= 1.0 - estimate_node<Annotate>(c, catalog);
        sel = 1.0 - none;
    }
    sel = clamp01(sel);
    if constexpr (Annotate) pred.est_selectivity = sel;
    return sel;
}

} // namespace

double estimate_selectivity(const PredNode& pred, const Catalog& catalog) {
    return estimate_node<false>(pred, catalog);
}

double annotate_selectivities(PredNode& pred, const Catalog& catalog) {
    return estimate_node<true>(pred, catalog);
}

void estimate_plan_cardinalities(PhysicalPlan& plan, const Catalog& catalog) {
    plan.root.visit_mut([&](PlanNode& n) {
        switch (n.kind) {
            case OpKind::SeqScan: {
                double sel = n.filter ? estimate_selectivity(*n.filter, catalog) : 1.0;
                n.estimated_card = static_cast<double>(n.table_rows) * sel;
                break;
            }
            case OpKind::IndexScan: {
                double residual = n.filter ? estimate_selectivity(*n.filter, catalog) : 1.0;
                n.estimated_card =
                    static_cast<double>(n.table_rows) * std::max(0.0, n.probe_selectivity) * residual;
                break;
            }
            case OpKind::HashJoin:
                n.estimated_card = n.children[0].estimated_card * n.children[1].estimated_card /
                                   static_cast<double>(std::max<uint64_t>(1, n.join_parent_rows));
                break;
            case OpKind::Aggregate:
                n.estimated_card = 1.0;
                break;
        }
    });
}

void exact_cardinalities(PhysicalPlan& plan) {
    plan.root.visit_mut([&](PlanNode& n) {
        if (n.actual_card < 0)
            throw std::runtime_error("exact_cardinalities: plan has not been executed");
        n.estimated_card = n.actual_card;
    });
}

} // namespace zsce
