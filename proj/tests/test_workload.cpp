#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "test_helpers.hpp"
#include "zsce/workload.hpp"

using namespace zsce;
using namespace zsce::testing;

namespace {

struct Fixture {
    Database db;
    Catalog cat;
    Fixture() : db(generate_database(small_gen_config(), 31)), cat(compute_statistics(db)) {}
};

} // namespace

TEST_CASE("workload has the requested size and is deterministic") {
    Fixture f;
    WorkloadConfig cfg;
    cfg.query_count = 500;
    cfg.seed = 3;
    auto a = generate_workload(f.db, f.cat, cfg);
    auto b = generate_workload(f.db, f.cat, cfg);
    REQUIRE(a.size() == 500);
    for (size_t i = 0; i < a.size(); ++i)
        CHECK(query_to_json(a[i]).dump() == query_to_json(b[i]).dump());
}

TEST_CASE("single-table database forces join size 1") {
    GenConfig g = small_gen_config();
    g.table_count = {1, 1};
    Database db = generate_database(g, 8);
    Catalog cat = compute_statistics(db);
    WorkloadConfig cfg;
    cfg.query_count = 50;
    cfg.seed = 4;
    for (const QuerySpec& q : generate_workload(db, cat, cfg)) {
        CHECK(q.tables.size() == 1);
        CHECK(q.joins.empty());
    }
}

TEST_CASE("queries satisfy the structural invariants") {
    Fixture f;
    WorkloadConfig cfg;
    cfg.query_count = 1000;
    cfg.seed = 5;
    std::set<size_t> join_sizes;
    for (const QuerySpec& q : generate_workload(f.db, f.cat, cfg)) {
        join_sizes.insert(q.tables.size());
        CHECK(q.joins.size() + 1 == q.tables.size()); // tree join graph
        CHECK(!q.aggregates.empty());
        CHECK(q.aggregates.size() <= 3);

        // connectivity of the join tree
        if (!q.joins.empty()) {
            std::set<std::string> reached{q.joins.front().child_table};
            bool grew = true;
            while (grew) {
                grew = false;
                for (const JoinEdge& e : q.joins) {
                    bool c = reached.count(e.child_table), p = reached.count(e.parent_table);
                    if (c != p) {
                        reached.insert(c ? e.parent_table : e.child_table);
                        grew = true;
                    }
                }
            }
            CHECK(reached.size() == q.tables.size());
        }

        size_t total_leaves = 0;
        for (const auto& [t, tree] : q.filters) {
            CHECK(tree.leaf_count() >= 1);
            CHECK(tree.leaf_count() <= 5);
            CHECK(tree.depth() <= 3);
            total_leaves += tree.leaf_count();
            CHECK(std::find(q.tables.begin(), q.tables.end(), t) != q.tables.end());
        }
        CHECK(total_leaves <= 5);
    }
    // every join size up to the FK-graph limit occurs over a big workload
    size_t max_reachable = std::min<size_t>(5, f.db.tables.size());
    for (size_t s = 1; s <= max_reachable; ++s) CHECK(join_sizes.count(s));
}

TEST_CASE("literals come from the column domains") {
    Fixture f;
    WorkloadConfig cfg;
    cfg.query_count = 300;
    cfg.seed = 6;
    for (const QuerySpec& q : generate_workload(f.db, f.cat, cfg)) {
        for (const auto& [t, tree] : q.filters) {
            tree.visit_leaves([&](const PredLeaf& leaf) {
                const Column& col = f.db.table(leaf.table).column(leaf.column);
                const ColumnStats& s = f.cat.column(leaf.table, leaf.column);
                for (const Literal& lit : leaf.literals) {
                    if (lit.type == DataType::Categorical) {
                        REQUIRE(lit.code >= 0);
                        REQUIRE(lit.code < static_cast<int64_t>(col.dictionary.size()));
                        CHECK(col.dictionary[static_cast<size_t>(lit.code)] == lit.s);
                    } else {
                        CHECK(lit.numeric() >= *s.min);
                        CHECK(lit.numeric() <= *s.max);
                    }
                }
            });
        }
    }
}

TEST_CASE("index set generation: bounds, determinism, exhaustion") {
    Fixture f;
    size_t pool = 0;
    for (const Table& t : f.db.tables)
        for (const Column& c : t.columns)
            if (!c.primary_key) ++pool;

    CHECK(generate_index_set(f.db, 0, 9).empty());
    auto all = generate_index_set(f.db, pool, 9);
    CHECK(all.size() == pool);
    std::set<std::pair<std::string, std::string>> distinct;
    for (const IndexDef& d : all) distinct.insert({d.table, d.column});
    CHECK(distinct.size() == pool);

    auto a = generate_index_set(f.db, 3, 12);
    auto b = generate_index_set(f.db, 3, 12);
    CHECK(a.size() == 3);
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].table == b[i].table);
        CHECK(a[i].column == b[i].column);
    }
    CHECK_THROWS_AS(generate_index_set(f.db, pool + 1, 9), ConfigError);
}

TEST_CASE("workload files round-trip, with a SQL rendering alongside") {
    Fixture f;
    WorkloadConfig cfg;
    cfg.query_count = 20;
    cfg.seed = 14;
    auto queries = generate_workload(f.db, f.cat, cfg);
    save_workload(queries, f.db.name, "test_workload.jsonl");
    auto loaded = load_workload("test_workload.jsonl");
    REQUIRE(loaded.size() == queries.size());
    for (size_t i = 0; i < queries.size(); ++i)
        CHECK(query_to_json(queries[i]).dump() == query_to_json(loaded[i]).dump());
    CHECK(std::filesystem::exists("test_workload.jsonl.sql"));
    std::filesystem::remove("test_workload.jsonl");
    std::filesystem::remove("test_workload.jsonl.sql");
}

TEST_CASE("oversized join requests clamp to the schema") {
    GenConfig g = small_gen_config();
    g.table_count = {2, 2};
    Database db = generate_database(g, 21);
    Catalog cat = compute_statistics(db);
    WorkloadConfig cfg;
    cfg.query_count = 40;
    cfg.max_join_size = 5;
    cfg.seed = 2;
    for (const QuerySpec& q : generate_workload(db, cat, cfg)) CHECK(q.tables.size() <= 2);
}
