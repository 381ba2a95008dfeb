#pragma once

#include "zsce/plan.hpp"
#include "zsce/relcore.hpp"
#include "zsce/workload.hpp"

namespace zsce {

/// Histogram-based selectivity of a predicate tree, in [0, 1]. Leaves use the
/// equi-depth histogram (equality: bucket_frac / bucket_ndv, ranges:
/// interpolated coverage) scaled by (1 - null_frac) since nulls fail every
/// comparison. AND combines by product, OR by inclusion-exclusion, both under
/// independence.
double estimate_selectivity(const PredNode& pred, const Catalog& catalog);

/// Same, but also caches per-subtree estimates in PredNode::est_selectivity.
double annotate_selectivities(PredNode& pred, const Catalog& catalog);

double leaf_selectivity(const PredLeaf& leaf, const ColumnStats& stats);

/// Fills estimated_card bottom-up: scans as rows x selectivity, FK=PK joins
/// under the containment assumption (|A join B| = est(A) * est(B) / rows of
/// the PK-side table), aggregates as 1.
void estimate_plan_cardinalities(PhysicalPlan& plan, const Catalog& catalog);

/// Copies actual cardinalities into the estimate slots (upper-baseline mode).
/// Requires the plan to have been executed.
void exact_cardinalities(PhysicalPlan& plan);

} // namespace zsce
