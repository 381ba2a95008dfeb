#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zsce/util.hpp"

namespace zsce {

enum class DataType { Int, Float, Categorical };

const char* to_string(DataType t);
DataType datatype_from_string(std::string_view s);

constexpr uint64_t kPageSizeBytes = 8192;
constexpr uint64_t kMaxRowsPerDatabase = 1'000'000;

// Null sentinels used in the on-disk column files; in memory nulls are kept
// in a separate mask so values stay clean for scans.
constexpr int64_t kNullInt = INT64_MIN;
constexpr uint32_t kNullCode = UINT32_MAX;

struct Column {
    std::string name;
    DataType type = DataType::Int;
    bool primary_key = false;
    std::string fk_parent; // parent table name when this is a foreign key

    std::vector<int64_t> ints;        // DataType::Int (also PK/FK columns)
    std::vector<double> floats;       // DataType::Float
    std::vector<uint32_t> codes;      // DataType::Categorical, dictionary codes
    std::vector<std::string> dictionary;
    std::vector<uint8_t> nulls;       // 1 = null, sized row_count

    bool is_foreign_key() const { return !fk_parent.empty(); }
    size_t row_count() const { return nulls.size(); }
    /// Numeric value as double for comparisons; only valid for non-null rows
    /// of Int/Float columns. Generated int domains stay well below 2^53 so
    /// the conversion is exact.
    double numeric(size_t row) const {
        return type == DataType::Int ? static_cast<double>(ints[row]) : floats[row];
    }
};

struct Table {
    std::string name;
    uint64_t row_count = 0;
    std::vector<Column> columns;

    const Column& column(std::string_view name) const;
    const Column* find_column(std::string_view name) const;
    int column_index(std::string_view name) const;
};

struct ForeignKey {
    std::string child_table;  // table holding the referencing column
    std::string child_column;
    std::string parent_table; // table holding the referenced key
    std::string parent_column;
};

struct IndexDef {
    std::string table;
    std::string column;
    bool unique = false;

    bool operator==(const IndexDef& o) const {
        return table == o.table && column == o.column;
    }
    bool operator<(const IndexDef& o) const {
        return table != o.table ? table < o.table : column < o.column;
    }
};

/// Sorted lookup structure over one column: probe a value, get the matching
/// row positions. Null rows are never indexed.
struct Index {
    IndexDef def;
    std::vector<double> keys;        // sorted distinct non-null values
    std::vector<uint32_t> offsets;   // keys.size()+1 offsets into positions
    std::vector<uint32_t> positions; // row ids, ascending within each key

    std::span<const uint32_t> lookup(double key) const;
};

struct Database {
    std::string name;
    uint64_t seed = 0;
    std::vector<Table> tables;
    std::vector<ForeignKey> foreign_keys;
    std::map<std::pair<std::string, std::string>, Index> indexes;

    const Table& table(std::string_view name) const;
    const Table* find_table(std::string_view name) const;
    const Index* find_index(std::string_view table, std::string_view column) const;
    uint64_t total_rows() const;
};

struct Histogram {
    // Equi-depth. bounds has bucket_count()+1 strictly increasing entries
    // covering [min, max]; bucket i is [bounds[i], bounds[i+1]), the last one
    // closed. A constant column degenerates to one closed bucket.
    std::vector<double> bounds;
    std::vector<uint64_t> counts; // non-null rows per bucket
    std::vector<uint64_t> ndvs;   // distinct values per bucket

    size_t bucket_count() const { return counts.size(); }
    uint64_t total_count() const;
    /// Bucket holding v, or -1 if v falls outside [min, max].
    int locate(double v) const;
};

struct ColumnStats {
    DataType datatype = DataType::Int;
    uint64_t ndv = 0;          // distinct non-null values
    double null_frac = 0.0;
    std::optional<double> min; // numeric types only
    std::optional<double> max;
    double width_bytes = 8.0;  // average value width
    Histogram histogram;       // over values (numeric) or codes (categorical)
    int ordinal = 0;           // column position; rename-invariant tie break
};

struct TableStats {
    uint64_t row_count = 0;
    uint64_t page_count = 1;
    int ordinal = 0; // schema position; rename-invariant tie break
};

struct Catalog {
    std::map<std::string, TableStats> tables;
    std::map<std::pair<std::string, std::string>, ColumnStats> columns;

    const TableStats& table(std::string_view name) const;
    const ColumnStats& column(std::string_view table, std::string_view column) const;
};

struct Range {
    double lo = 0, hi = 0;
    bool contains(double v) const { return v >= lo && v <= hi; }
};

struct IntRange {
    int64_t lo = 0, hi = 0;
};

struct GenConfig {
    IntRange table_count{3, 6};
    IntRange rows_per_table{2000, 40000}; // drawn log-uniformly
    IntRange columns_per_table{2, 5};     // data columns besides key columns
    // weights over {Int, Float, Categorical}
    std::vector<double> datatype_weights{0.4, 0.3, 0.3};
    // weights over {uniform, zipf, normal}
    std::vector<double> distribution_weights{0.5, 0.3, 0.2};
    Range zipf_s{0.5, 2.0};
    Range ndv_ratio{0.01, 1.0};
    Range null_frac{0.0, 0.2};
    IntRange fk_fanout{1, 3}; // dimension children per table in the schema tree

    void validate() const; // throws ConfigError
};

/// Deterministic synthetic database from (config, seed). The foreign-key
/// graph is a snowflake tree rooted at the fact table t0; every FK value
/// resolves to an existing parent row. Statistics are not computed here.
Database generate_database(const GenConfig& config, uint64_t seed, const std::string& name = "");

/// Catalog statistics for every table and column: exact ndv/null_frac/bounds
/// plus an equi-depth histogram over the non-null values.
Catalog compute_statistics(const Database& db, size_t buckets = 32);

/// Builds (or rebuilds, idempotently) a sorted lookup index.
void build_index(Database& db, const IndexDef& def);

} // namespace zsce
