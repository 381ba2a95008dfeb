#pragma once

#include <string>

#include "zsce/executor.hpp"
#include "zsce/relcore.hpp"
#include "zsce/workload.hpp"

namespace zsce::testing {

/// Small databases the brute-force oracle can chew through.
inline GenConfig tiny_gen_config() {
    GenConfig cfg;
    cfg.table_count = {2, 4};
    cfg.rows_per_table = {20, 50};
    cfg.columns_per_table = {1, 3};
    cfg.ndv_ratio = {0.1, 1.0};
    cfg.null_frac = {0.0, 0.2};
    cfg.fk_fanout = {1, 2};
    return cfg;
}

/// Mid-sized config for statistics and estimator checks.
inline GenConfig small_gen_config() {
    GenConfig cfg;
    cfg.table_count = {2, 4};
    cfg.rows_per_table = {500, 3000};
    cfg.columns_per_table = {2, 4};
    cfg.ndv_ratio = {0.01, 0.9};
    cfg.null_frac = {0.0, 0.2};
    cfg.fk_fanout = {1, 2};
    return cfg;
}

/// One-table database with a single int column holding the given values
/// (value < 0 means null). Useful for exact statistics assertions.
inline Database int_column_db(const std::vector<int64_t>& values, bool nulls_negative = false) {
    Database db;
    db.name = "manual";
    Table t;
    t.name = "t0";
    t.row_count = values.size();
    Column id;
    id.name = "id";
    id.primary_key = true;
    id.type = DataType::Int;
    id.nulls.assign(values.size(), 0);
    for (size_t i = 0; i < values.size(); ++i) id.ints.push_back(static_cast<int64_t>(i));
    Column c;
    c.name = "c0";
    c.type = DataType::Int;
    for (int64_t v : values) {
        bool is_null = nulls_negative && v < 0;
        c.nulls.push_back(is_null ? 1 : 0);
        c.ints.push_back(is_null ? 0 : v);
    }
    t.columns.push_back(std::move(id));
    t.columns.push_back(std::move(c));
    db.tables.push_back(std::move(t));
    return db;
}

inline bool values_equal(const std::vector<AggValue>& a, const std::vector<AggValue>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (!(a[i] == b[i])) return false;
    return true;
}

} // namespace zsce::testing
