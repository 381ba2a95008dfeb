#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "test_helpers.hpp"
#include "zsce/storage.hpp"

using namespace zsce;
using namespace zsce::testing;

TEST_CASE("generation is deterministic in (config, seed)") {
    GenConfig cfg = small_gen_config();
    Database a = generate_database(cfg, 42);
    Database b = generate_database(cfg, 42);
    CHECK(database_digest(a) == database_digest(b));
    Database c = generate_database(cfg, 43);
    CHECK(database_digest(a) != database_digest(c));
}

TEST_CASE("a forced rows range pins every table size") {
    GenConfig cfg = small_gen_config();
    cfg.rows_per_table = {1000, 1000};
    Database db = generate_database(cfg, 7);
    for (const Table& t : db.tables) CHECK(t.row_count == 1000);
}

TEST_CASE("infeasible config ranges are rejected") {
    GenConfig cfg = small_gen_config();
    cfg.ndv_ratio = {0.5, 1.5};
    CHECK_THROWS_AS(generate_database(cfg, 1), ConfigError);
    cfg = small_gen_config();
    cfg.table_count = {5, 3};
    CHECK_THROWS_AS(generate_database(cfg, 1), ConfigError);
    cfg = small_gen_config();
    cfg.datatype_weights = {0.5, 0.2, 0.2};
    CHECK_THROWS_AS(generate_database(cfg, 1), ConfigError);
}

TEST_CASE("zipf skew shows up in value frequencies") {
    // one table, one categorical zipf(1) column with ndv 100 over 10^4 rows;
    // the most frequent value should take about 1/H(100) of the rows
    GenConfig cfg;
    cfg.table_count = {1, 1};
    cfg.rows_per_table = {10000, 10000};
    cfg.columns_per_table = {1, 1};
    cfg.datatype_weights = {0.0, 0.0, 1.0};
    cfg.distribution_weights = {0.0, 1.0, 0.0};
    cfg.zipf_s = {1.0, 1.0};
    cfg.ndv_ratio = {0.01, 0.01};
    cfg.null_frac = {0.0, 0.0};
    Database db = generate_database(cfg, 99);
    const Column& col = db.tables[0].column("c0");
    REQUIRE(col.dictionary.size() == 100);

    std::map<uint32_t, uint64_t> freq;
    for (uint32_t code : col.codes) freq[code]++;
    uint64_t top = 0;
    for (const auto& [code, n] : freq) top = std::max(top, n);

    double harmonic = 0;
    for (int r = 1; r <= 100; ++r) harmonic += 1.0 / r;
    double expected = 10000.0 / harmonic; // about 1928
    CHECK(std::abs(static_cast<double>(top) - expected) < 200.0);
}

TEST_CASE("foreign keys resolve to existing parent rows") {
    Database db = generate_database(small_gen_config(), 11);
    REQUIRE(!db.foreign_keys.empty());
    for (const ForeignKey& fk : db.foreign_keys) {
        const Table& child = db.table(fk.child_table);
        const Table& parent = db.table(fk.parent_table);
        const Column& col = child.column(fk.child_column);
        for (size_t r = 0; r < child.row_count; ++r) {
            REQUIRE(col.nulls[r] == 0);
            REQUIRE(col.ints[r] >= 0);
            REQUIRE(col.ints[r] < static_cast<int64_t>(parent.row_count));
        }
    }
}

TEST_CASE("catalog statistics match a brute-force recount") {
    Database db = generate_database(small_gen_config(), 13);
    Catalog cat = compute_statistics(db);
    for (const Table& t : db.tables) {
        CHECK(cat.table(t.name).row_count == t.row_count);
        CHECK(cat.table(t.name).page_count >= 1);
        for (const Column& c : t.columns) {
            const ColumnStats& s = cat.column(t.name, c.name);
            std::set<double> distinct;
            uint64_t nulls = 0;
            double mn = 0, mx = 0;
            bool first = true;
            for (size_t r = 0; r < t.row_count; ++r) {
                if (c.nulls[r]) {
                    ++nulls;
                    continue;
                }
                double v = c.type == DataType::Categorical ? static_cast<double>(c.codes[r])
                                                           : c.numeric(r);
                distinct.insert(v);
                mn = first ? v : std::min(mn, v);
                mx = first ? v : std::max(mx, v);
                first = false;
            }
            CHECK(s.ndv == distinct.size());
            CHECK(s.null_frac ==
                  doctest::Approx(static_cast<double>(nulls) / static_cast<double>(t.row_count)));
            if (c.type != DataType::Categorical && !distinct.empty()) {
                CHECK(*s.min == mn);
                CHECK(*s.max == mx);
            }
        }
    }
}

TEST_CASE("exact statistics for a known column") {
    std::vector<int64_t> values;
    for (int64_t v = 1; v <= 100; ++v) values.push_back(v);
    Database db = int_column_db(values);
    Catalog cat = compute_statistics(db);
    const ColumnStats& s = cat.column("t0", "c0");
    CHECK(s.ndv == 100);
    CHECK(s.null_frac == 0.0);
    CHECK(*s.min == 1.0);
    CHECK(*s.max == 100.0);
}

TEST_CASE("page count follows the row width formula") {
    // 10 columns of 8 bytes each = 80-byte rows; 1000 rows over 8192-byte
    // pages needs ceil(80000/8192) = 10 pages
    Database db;
    db.name = "pages";
    Table t;
    t.name = "t0";
    t.row_count = 1000;
    for (int i = 0; i < 10; ++i) {
        Column c;
        c.name = "c" + std::to_string(i);
        c.type = DataType::Int;
        c.ints.assign(1000, 1);
        c.nulls.assign(1000, 0);
        t.columns.push_back(std::move(c));
    }
    db.tables.push_back(std::move(t));
    Catalog cat = compute_statistics(db);
    CHECK(cat.table("t0").page_count == 10);
}

TEST_CASE("equi-depth histogram buckets are balanced up to duplicate runs") {
    GenConfig cfg;
    cfg.table_count = {1, 1};
    cfg.rows_per_table = {1000, 1000};
    cfg.columns_per_table = {1, 1};
    cfg.datatype_weights = {1.0, 0.0, 0.0};
    cfg.distribution_weights = {0.0, 1.0, 0.0}; // zipf: heavy ties
    cfg.zipf_s = {1.2, 1.2};
    cfg.ndv_ratio = {0.05, 0.05};
    cfg.null_frac = {0.0, 0.0};
    Database db = generate_database(cfg, 5);
    Catalog cat = compute_statistics(db);
    const Column& col = db.tables[0].column("c0");
    const Histogram& h = cat.column("t0", "c0").histogram;

    // recount occupancy per bucket straight from the data
    std::vector<uint64_t> recount(h.bucket_count(), 0);
    std::map<int64_t, uint64_t> runs;
    for (size_t r = 0; r < col.ints.size(); ++r) {
        int b = h.locate(static_cast<double>(col.ints[r]));
        REQUIRE(b >= 0);
        recount[static_cast<size_t>(b)]++;
        runs[col.ints[r]]++;
    }
    for (size_t b = 0; b < h.bucket_count(); ++b) CHECK(recount[b] == h.counts[b]);

    uint64_t max_run = 0;
    for (const auto& [v, n] : runs) max_run = std::max(max_run, n);
    double target = 1000.0 / 32.0;
    for (size_t b = 0; b < h.bucket_count(); ++b)
        CHECK(std::abs(static_cast<double>(h.counts[b]) - target) <=
              static_cast<double>(max_run) + 1.0);

    // bucket ndv recount
    std::vector<std::set<int64_t>> nd(h.bucket_count());
    for (int64_t v : col.ints) nd[static_cast<size_t>(h.locate(static_cast<double>(v)))].insert(v);
    for (size_t b = 0; b < h.bucket_count(); ++b) CHECK(nd[b].size() == h.ndvs[b]);
}

TEST_CASE("empty and constant columns degrade gracefully") {
    Database db = int_column_db({});
    Catalog cat = compute_statistics(db);
    CHECK(cat.table("t0").row_count == 0);
    CHECK(cat.table("t0").page_count == 1);
    CHECK(cat.column("t0", "c0").histogram.bucket_count() == 1);

    Database db2 = int_column_db({7, 7, 7, 7});
    Catalog cat2 = compute_statistics(db2);
    const Histogram& h = cat2.column("t0", "c0").histogram;
    CHECK(h.bucket_count() == 1);
    CHECK(h.locate(7.0) == 0);
    CHECK(h.counts[0] == 4);
    CHECK(h.ndvs[0] == 1);
}

TEST_CASE("index lookups match a full-scan filter") {
    Database db = generate_database(small_gen_config(), 17);
    // index every data column of the first table and probe random values
    const Table& t = db.tables[0];
    for (const Column& c : t.columns) {
        build_index(db, {t.name, c.name, false});
        const Index* idx = db.find_index(t.name, c.name);
        REQUIRE(idx != nullptr);
        // duplicate build is idempotent
        build_index(db, {t.name, c.name, false});

        for (size_t probe = 0; probe < 25 && probe < t.row_count; ++probe) {
            size_t r = (probe * 37) % t.row_count;
            if (c.nulls[r]) continue;
            double key = c.type == DataType::Categorical ? static_cast<double>(c.codes[r])
                                                         : c.numeric(r);
            auto positions = db.find_index(t.name, c.name)->lookup(key);
            std::vector<uint32_t> scan;
            for (uint32_t row = 0; row < t.row_count; ++row) {
                if (c.nulls[row]) continue;
                double v = c.type == DataType::Categorical ? static_cast<double>(c.codes[row])
                                                           : c.numeric(row);
                if (v == key) scan.push_back(row);
            }
            CHECK(std::equal(positions.begin(), positions.end(), scan.begin(), scan.end()));
        }
    }
}

TEST_CASE("unique key index returns exactly one position; misses return none") {
    std::vector<int64_t> values;
    for (int64_t v = 0; v < 50; ++v) values.push_back(v * 3);
    Database db = int_column_db(values);
    build_index(db, {"t0", "id", false});
    const Index* idx = db.find_index("t0", "id");
    REQUIRE(idx);
    CHECK(idx->def.unique);
    CHECK(idx->lookup(13.0).size() == 1);
    CHECK(idx->lookup(999.0).empty());
}

TEST_CASE("index on an unknown column is rejected") {
    Database db = int_column_db({1, 2, 3});
    CHECK_THROWS(build_index(db, {"t0", "nope", false}));
    CHECK_THROWS(build_index(db, {"nope", "c0", false}));
}

TEST_CASE("database round-trips through its directory format") {
    Database db = generate_database(small_gen_config(), 23);
    build_index(db, {db.tables[0].name, db.tables[0].columns[0].name, false});
    Catalog cat = compute_statistics(db);

    std::string dir = "test_db_roundtrip";
    save_database(db, dir);
    save_catalog(cat, dir + "/catalog.json");
    Database loaded = load_database(dir);
    CHECK(database_digest(db) == database_digest(loaded));
    CHECK(loaded.indexes.size() == db.indexes.size());

    Catalog cat2 = load_catalog(dir + "/catalog.json");
    for (const auto& [key, s] : cat.columns) {
        const ColumnStats& l = cat2.column(key.first, key.second);
        CHECK(l.ndv == s.ndv);
        CHECK(l.null_frac == doctest::Approx(s.null_frac));
        CHECK(l.histogram.bounds == s.histogram.bounds);
        CHECK(l.histogram.counts == s.histogram.counts);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("nulls round-trip through the sentinel encoding") {
    Database db = int_column_db({1, -5, 3, -7, 5}, true);
    std::string dir = "test_db_nulls";
    save_database(db, dir);
    Database loaded = load_database(dir);
    const Column& c = loaded.tables[0].column("c0");
    CHECK(c.nulls == std::vector<uint8_t>{0, 1, 0, 1, 0});
    CHECK(c.ints[0] == 1);
    CHECK(c.ints[2] == 3);
    std::filesystem::remove_all(dir);
}
