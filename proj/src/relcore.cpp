#include "zsce/relcore.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "zsce/rng.hpp"

namespace zsce {

const char* to_string(DataType t) {
    switch (t) {
        case DataType::Int: return "int";
        case DataType::Float: return "float";
        case DataType::Categorical: return "categorical";
    }
    return "?";
}

DataType datatype_from_string(std::string_view s) {
    if (s == "int") return DataType::Int;
    if (s == "float") return DataType::Float;
    if (s == "categorical") return DataType::Categorical;
    throw IoError("unknown datatype '" + std::string(s) + "'");
}

const Column& Table::column(std::string_view name) const {
    const Column* c = find_column(name);
    if (!c) throw std::runtime_error("unknown column " + this->name + "." + std::string(name));
    return *c;
}

const Column* Table::find_column(std::string_view name) const {
    for (const Column& c : columns)
        if (c.name == name) return &c;
    return nullptr;
}

int Table::column_index(std::string_view name) const {
    for (size_t i = 0; i < columns.size(); ++i)
        if (columns[i].name == name) return static_cast<int>(i);
    return -1;
}

const Table& Database::table(std::string_view name) const {
    const Table* t = find_table(name);
    if (!t) throw std::runtime_error("unknown table " + std::string(name));
    return *t;
}

const Table* Database::find_table(std::string_view name) const {
    for (const Table& t : tables)
        if (t.name == name) return &t;
    return nullptr;
}

const Index* Database::find_index(std::string_view table, std::string_view column) const {
    auto it = indexes.find({std::string(table), std::string(column)});
    return it == indexes.end() ? nullptr : &it->second;
}

uint64_t Database::total_rows() const {
    uint64_t n = 0;
    for (const Table& t : tables) n += t.row_count;
    return n;
}

std::span<const uint32_t> Index::lookup(double key) const {
    auto it = std::lower_bound(keys.begin(), keys.end(), key);
    if (it == keys.end() || *it != key) return {};
    size_t k = static_cast<size_t>(it - keys.begin());
    return {positions.data() + offsets[k], positions.data() + offsets[k + 1]};
}

uint64_t Histogram::total_count() const {
    uint64_t n = 0;
    for (uint64_t c : counts) n += c;
    return n;
}

int Histogram::locate(double v) const {
    if (counts.empty() || v < bounds.front() || v > bounds.back()) return -1;
    if (bounds.size() == 2 && bounds[0] == bounds[1]) return 0; // constant column
    // buckets are [bounds[i], bounds[i+1]) with the last one closed
    auto it = std::upper_bound(bounds.begin(), bounds.end(), v);
    size_t i = static_cast<size_t>(it - bounds.begin());
    if (i >= bounds.size()) return static_cast<int>(bucket_count()) - 1;
    return static_cast<int>(i) - 1;
}

const TableStats& Catalog::table(std::string_view name) const {
    auto it = tables.find(std::string(name));
    if (it == tables.end()) throw std::runtime_error("no statistics for table " + std::string(name));
    return it->second;
}

const ColumnStats& Catalog::column(std::string_view table, std::string_view column) const {
    auto it = columns.find({std::string(table), std::string(column)});
    if (it == columns.end())
        throw std::runtime_error("no statistics for column " + std::string(table) + "." + std::string(column));
    return it->second;
}

void GenConfig::validate() const {
    auto check_int = [](const IntRange& r, const char* what, int64_t floor) {
        if (r.lo > r.hi || r.lo < floor)
            throw ConfigError(std::string(what) + " range infeasible");
    };
    auto check_real = [](const Range& r, const char* what, double lo, double hi) {
        if (r.lo > r.hi || r.lo < lo || r.hi > hi)
            throw ConfigError(std::string(what) + " range infeasible");
    };
    check_int(table_count, "table_count", 1);
    check_int(rows_per_table, "rows_per_table", 1);
    check_int(columns_per_table, "columns_per_table", 0);
    check_int(fk_fanout, "fk_fanout", 1);
    check_real(zipf_s, "zipf_s", 0.5, 2.0);
    check_real(ndv_ratio, "ndv_ratio", 0.0, 1.0);
    if (ndv_ratio.hi <= 0.0) throw ConfigError("ndv_ratio range infeasible");
    check_real(null_frac, "null_frac", 0.0, 1.0);
    auto check_weights = [](const std::vector<double>& w, size_t n, const char* what) {
        if (w.size() != n) throw ConfigError(std::string(what) + " needs exactly " + std::to_string(n) + " weights");
        double sum = 0;
        for (double x : w) {
            if (x < 0) throw ConfigError(std::string(what) + " has a negative weight");
            sum += x;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw ConfigError(std::string(what) + " weights must sum to 1");
    };
    check_weights(datatype_weights, 3, "datatype_weights");
    check_weights(distribution_weights, 3, "distribution_weights");
}

namespace {

enum class ValueDist { Uniform, Zipf, Normal };

// Row values are drawn as ranks into a sorted pool of distinct values, so the
// distribution choice only decides which ranks are frequent.
struct RankSampler {
    ValueDist dist;
    size_t ndv;
    double normal_mean = 0, normal_sd = 1;
    std::optional<ZipfSampler> zipf;

    size_t sample(Rng& rng) const {
        switch (dist) {
            case ValueDist::Uniform: return static_cast<size_t>(rng.below(ndv));
            case ValueDist::Zipf: return zipf->sample(rng);
            case ValueDist::Normal: {
                double x = std::round(rng.normal(normal_mean, normal_sd));
                if (x < 0) x = 0;
                if (x > static_cast<double>(ndv - 1)) x = static_cast<double>(ndv - 1);
                return static_cast<size_t>(x);
            }
        }
        return 0;
    }
};

RankSampler make_sampler(const GenConfig& cfg, size_t ndv, Rng& rng) {
    RankSampler s;
    s.ndv = ndv;
    size_t pick = rng.choice(cfg.distribution_weights);
    s.dist = pick == 0 ? ValueDist::Uniform : pick == 1 ? ValueDist::Zipf : ValueDist::Normal;
    if (s.dist == ValueDist::Zipf)
        s.zipf.emplace(ndv, rng.uniform(cfg.zipf_s.lo, cfg.zipf_s.hi));
    if (s.dist == ValueDist::Normal) {
        s.normal_mean = static_cast<double>(ndv - 1) / 2.0;
        s.normal_sd = std::max(1.0, static_cast<double>(ndv) / 6.0);
    }
    return s;
}

void fill_data_column(Column& col, uint64_t rows, const GenConfig& cfg, Rng& rng) {
    double ratio = rng.uniform(std::max(1e-12, cfg.ndv_ratio.lo), cfg.ndv_ratio.hi);
    size_t ndv = std::max<size_t>(1, static_cast<size_t>(std::llround(ratio * static_cast<double>(rows))));
    double null_frac = rng.uniform(cfg.null_frac.lo, cfg.null_frac.hi);
    RankSampler sampler = make_sampler(cfg, ndv, rng);

    col.nulls.assign(rows, 0);
    switch (col.type) {
        case DataType::Int: {
            int64_t start = rng.uniform_int(-1'000'000, 1'000'000);
            int64_t stride = rng.uniform_int(1, 1000);
            col.ints.resize(rows);
            for (uint64_t r = 0; r < rows; ++r) {
                if (rng.real() < null_frac) {
                    col.nulls[r] = 1;
                    col.ints[r] = 0;
                } else {
                    col.ints[r] = start + static_cast<int64_t>(sampler.sample(rng)) * stride;
                }
            }
            break;
        }
        case DataType::Float: {
            double lo = rng.uniform(-1000.0, 1000.0);
            double width = rng.uniform(1.0, 1000.0);
            col.floats.resize(rows);
            for (uint64_t r = 0; r < rows; ++r) {
                if (rng.real() < null_frac) {
                    col.nulls[r] = 1;
                    col.floats[r] = 0;
                } else {
                    double rank = static_cast<double>(sampler.sample(rng));
                    col.floats[r] = lo + width * (rank + 0.5) / static_cast<double>(ndv);
                }
            }
            break;
        }
        case DataType::Categorical: {
            ndv = std::min<size_t>(ndv, kNullCode - 1);
            col.dictionary.resize(ndv);
            for (size_t i = 0; i < ndv; ++i) col.dictionary[i] = "w" + std::to_string(i);
            col.codes.resize(rows);
            for (uint64_t r = 0; r < rows; ++r) {
                if (rng.real() < null_frac) {
                    col.nulls[r] = 1;
                    col.codes[r] = 0;
                } else {
                    col.codes[r] = static_cast<uint32_t>(sampler.sample(rng));
                }
            }
            break;
        }
    }
}

} // namespace

Database generate_database(const GenConfig& config, uint64_t seed, const std::string& name) {
    config.validate();
    Database db;
    db.name = name.empty() ? "db_" + std::to_string(seed) : name;
    db.seed = seed;

    Rng schema_rng(derive_seed(seed, fnv1a("schema")));
    size_t table_count =
        static_cast<size_t>(schema_rng.uniform_int(config.table_count.lo, config.table_count.hi));

    // Snowflake tree: t0 is the fact table; each table gets up to fk_fanout
    // dimension children until all tables are placed.
    std::vector<uint64_t> rows(table_count);
    uint64_t total = 0;
    for (size_t i = 0; i < table_count; ++i) {
        double r = schema_rng.log_uniform(static_cast<double>(config.rows_per_table.lo),
                                          static_cast<double>(config.rows_per_table.hi));
        rows[i] = std::clamp<uint64_t>(static_cast<uint64_t>(std::llround(r)),
                                       static_cast<uint64_t>(config.rows_per_table.lo),
                                       static_cast<uint64_t>(config.rows_per_table.hi));
        total += rows[i];
    }
    if (total > kMaxRowsPerDatabase) { // desk-scale cap; keeps executors fast
        double scale = static_cast<double>(kMaxRowsPerDatabase) / static_cast<double>(total);
        for (auto& r : rows) r = std::max<uint64_t>(1, static_cast<uint64_t>(static_cast<double>(r) * scale));
    }

    std::vector<std::vector<size_t>> children(table_count);
    {
        size_t next = 1;
        for (size_t t = 0; t < table_count && next < table_count; ++t) {
            auto fanout =
                static_cast<size_t>(schema_rng.uniform_int(config.fk_fanout.lo, config.fk_fanout.hi));
            for (size_t f = 0; f < fanout && next < table_count; ++f) children[t].push_back(next++);
        }
    }

    db.tables.resize(table_count);
    for (size_t t = 0; t < table_count; ++t) {
        Table& table = db.tables[t];
        table.name = "t" + std::to_string(t);
        table.row_count = rows[t];

        Column pk;
        pk.name = "id";
        pk.type = DataType::Int;
        pk.primary_key = true;
        pk.ints.resize(rows[t]);
        for (uint64_t r = 0; r < rows[t]; ++r) pk.ints[r] = static_cast<int64_t>(r);
        pk.nulls.assign(rows[t], 0);
        table.columns.push_back(std::move(pk));
    }

    for (size_t t = 0; t < table_count; ++t) {
        for (size_t child : children[t]) {
            // referencing column lives in the tree parent and points at the
            // dimension table's key
            Column fk;
            fk.name = "fk_t" + std::to_string(child);
            fk.type = DataType::Int;
            fk.fk_parent = db.tables[child].name;
            Rng rng(derive_seed(seed, fnv1a("fk"), t, child));
            RankSampler sampler = make_sampler(config, static_cast<size_t>(rows[child]), rng);
            fk.ints.resize(rows[t]);
            for (uint64_t r = 0; r < rows[t]; ++r)
                fk.ints[r] = static_cast<int64_t>(sampler.sample(rng));
            fk.nulls.assign(rows[t], 0); // FK columns are never null
            db.tables[t].columns.push_back(std::move(fk));
            db.foreign_keys.push_back({db.tables[t].name, fk.name, db.tables[child].name, "id"});
        }
    }

    for (size_t t = 0; t < table_count; ++t) {
        Rng col_count_rng(derive_seed(seed, fnv1a("ncols"), t));
        auto ncols = static_cast<size_t>(
            col_count_rng.uniform_int(config.columns_per_table.lo, config.columns_per_table.hi));
        for (size_t c = 0; c < ncols; ++c) {
            Column col;
            col.name = "c" + std::to_string(c);
            Rng rng(derive_seed(seed, fnv1a("col"), t, c));
            col.type = static_cast<DataType>(rng.choice(config.datatype_weights));
            fill_data_column(col, rows[t], config, rng);
            db.tables[t].columns.push_back(std::move(col));
        }
    }
    return db;
}

namespace {

Histogram build_histogram(std::vector<double> values, size_t buckets) {
    Histogram h;
    if (values.empty()) { // degenerate one-bucket histogram
        h.bounds = {0.0, 0.0};
        h.counts = {0};
        h.ndvs = {0};
        return h;
    }
    std::sort(values.begin(), values.end());
    size_t n = values.size();

    h.bounds.push_back(values.front());
    for (size_t j = 1; j < buckets; ++j) {
        double b = values[j * n / buckets];
        if (b > h.bounds.back()) h.bounds.push_back(b);
    }
    if (values.back() > h.bounds.back()) h.bounds.push_back(values.back());

    if (h.bounds.size() == 1) { // constant column: one closed bucket
        h.bounds.push_back(h.bounds.front());
        h.counts = {n};
        h.ndvs = {1};
        return h;
    }

    size_t nbuckets = h.bounds.size() - 1;
    h.counts.assign(nbuckets, 0);
    h.ndvs.assign(nbuckets, 0);
    size_t b = 0;
    double prev = values.front();
    for (size_t i = 0; i < n; ++i) {
        while (b + 1 < nbuckets && values[i] >= h.bounds[b + 1]) ++b;
        h.counts[b]++;
        if (i == 0 || values[i] != prev) h.ndvs[b]++;
        prev = values[i];
    }
    return h;
}

ColumnStats column_statistics(const Column& col, uint64_t rows, size_t buckets) {
    ColumnStats s;
    s.datatype = col.type;
    uint64_t nulls = 0;
    std::vector<double> values;
    values.reserve(rows);
    double width_sum = 0;
    for (uint64_t r = 0; r < rows; ++r) {
        if (col.nulls[r]) {
            ++nulls;
            continue;
        }
        switch (col.type) {
            case DataType::Int:
                values.push_back(static_cast<double>(col.ints[r]));
                width_sum += 8;
                break;
            case DataType::Float:
                values.push_back(col.floats[r]);
                width_sum += 8;
                break;
            case DataType::Categorical:
                values.push_back(static_cast<double>(col.codes[r]));
                width_sum += static_cast<double>(col.dictionary[col.codes[r]].size());
                break;
        }
    }
    s.null_frac = rows == 0 ? 0.0 : static_cast<double>(nulls) / static_cast<double>(rows);
    s.width_bytes = values.empty() ? 8.0 : width_sum / static_cast<double>(values.size());
    {
        std::vector<double> sorted(values);
        std::sort(sorted.begin(), sorted.end());
        sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
        s.ndv = sorted.size();
        if (!sorted.empty() && col.type != DataType::Categorical) {
            s.min = sorted.front();
            s.max = sorted.back();
        }
    }
    s.histogram = build_histogram(std::move(values), buckets);
    return s;
}

} // namespace

Catalog compute_statistics(const Database& db, size_t buckets) {
    if (buckets == 0) throw ConfigError("histogram bucket count must be positive");
    Catalog cat;
    for (size_t ti = 0; ti < db.tables.size(); ++ti) {
        const Table& t = db.tables[ti];
        TableStats ts;
        ts.row_count = t.row_count;
        ts.ordinal = static_cast<int>(ti);
        double row_width = 0;
        for (size_t ci = 0; ci < t.columns.size(); ++ci) {
            const Column& c = t.columns[ci];
            ColumnStats cs = column_statistics(c, t.row_count, buckets);
            cs.ordinal = static_cast<int>(ci);
            row_width += cs.width_bytes;
            cat.columns[{t.name, c.name}] = std::move(cs);
        }
        double bytes = static_cast<double>(t.row_count) * row_width;
        ts.page_count = std::max<uint64_t>(
            1, static_cast<uint64_t>(std::ceil(bytes / static_cast<double>(kPageSizeBytes))));
        cat.tables[t.name] = ts;
    }
    return cat;
}

void build_index(Database& db, const IndexDef& def) {
    const Table& table = db.table(def.table);
    const Column& col = table.column(def.column);

    std::vector<std::pair<double, uint32_t>> entries;
    entries.reserve(table.row_count);
    for (uint64_t r = 0; r < table.row_count; ++r) {
        if (col.nulls[r]) continue;
        double v = col.type == DataType::Categorical ? static_cast<double>(col.codes[r]) : col.numeric(r);
        entries.emplace_back(v, static_cast<uint32_t>(r));
    }
    std::sort(entries.begin(), entries.end());

    Index idx;
    idx.def = def;
    idx.def.unique = true;
    idx.positions.reserve(entries.size());
    for (size_t i = 0; i < entries.size(); ++i) {
        if (i == 0 || entries[i].first != entries[i - 1].first) {
            idx.keys.push_back(entries[i].first);
            idx.offsets.push_back(static_cast<uint32_t>(i));
        } else {
            idx.def.unique = false;
        }
        idx.positions.push_back(entries[i].second);
    }
    idx.offsets.push_back(static_cast<uint32_t>(entries.size()));
    db.indexes[{def.table, def.column}] = std::move(idx);
}

} // namespace zsce
