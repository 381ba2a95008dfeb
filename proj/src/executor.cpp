#include "zsce/executor.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>

namespace zsce {

Json cost_weights_to_json(const CostWeights& w) {
    return Json{{"tuple_scan", w.tuple_scan},
                {"predicate_leaf_eval", w.predicate_leaf_eval},
                {"hash_insert", w.hash_insert},
                {"hash_probe", w.hash_probe},
                {"hash_entry", w.hash_entry},
                {"index_match_fetch", w.index_match_fetch},
                {"aggregate_update", w.aggregate_update},
                {"page_touch", w.page_touch}};
}

CostWeights cost_weights_from_json(const Json& j) {
    CostWeights w;
    w.tuple_scan = j.value("tuple_scan", w.tuple_scan);
    w.predicate_leaf_eval = j.value("predicate_leaf_eval", w.predicate_leaf_eval);
    w.hash_insert = j.value("hash_insert", w.hash_insert);
    w.hash_probe = j.value("hash_probe", w.hash_probe);
    w.hash_entry = j.value("hash_entry", w.hash_entry);
    w.index_match_fetch = j.value("index_match_fetch", w.index_match_fetch);
    w.aggregate_update = j.value("aggregate_update", w.aggregate_update);
    w.page_touch = j.value("page_touch", w.page_touch);
    return w;
}

namespace {

constexpr uint64_t kHashSeed = 0x5851f42d4c957f2dull;

// ---------------------------------------------------------------------------
// predicate evaluation against a base-table row

struct CompiledLeaf {
    const Column* column = nullptr;
    CmpOp op = CmpOp::Eq;
    std::vector<double> values; // numeric literals or resolved dictionary codes
};

struct CompiledPred {
    PredNode::Kind kind = PredNode::Kind::Leaf;
    std::vector<CompiledPred> children;
    CompiledLeaf leaf;
};

double resolve_literal(const Literal& lit, const Column& col) {
    if (lit.type != DataType::Categorical) return lit.numeric();
    for (size_t i = 0; i < col.dictionary.size(); ++i)
        if (col.dictionary[i] == lit.s) return static_cast<double>(i);
    return -1; // not in the dictionary: matches nothing
}

CompiledPred compile_pred(const PredNode& p, const Table& table) {
    CompiledPred c;
    c.kind = p.kind;
    if (p.kind == PredNode::Kind::Leaf) {
        c.leaf.column = &table.column(p.leaf.column);
        c.leaf.op = p.leaf.op;
        for (const Literal& l : p.leaf.literals)
            c.leaf.values.push_back(resolve_literal(l, *c.leaf.column));
    } else {
        for (const PredNode& ch : p.children) c.children.push_back(compile_pred(ch, table));
    }
    return c;
}

/// Short-circuit evaluation; every leaf actually evaluated is counted.
bool eval_pred(const CompiledPred& p, size_t row, uint64_t& leaf_evals) {
    if (p.kind == PredNode::Kind::And) {
        for (const CompiledPred& c : p.children)
            if (!eval_pred(c, row, leaf_evals)) return false;
        return true;
    }
    if (p.kind == PredNode::Kind::Or) {
        for (const CompiledPred& c : p.children)
            if (eval_pred(c, row, leaf_evals)) return true;
        return false;
    }
    ++leaf_evals;
    const Column& col = *p.leaf.column;
    if (col.nulls[row]) return false; // nulls fail every comparison
    double v = col.type == DataType::Categorical ? static_cast<double>(col.codes[row])
                                                 : col.numeric(row);
    switch (p.leaf.op) {
        case CmpOp::Eq: return v == p.leaf.values[0];
        case CmpOp::Lt: return v < p.leaf.values[0];
        case CmpOp::Le: return v <= p.leaf.values[0];
        case CmpOp::Gt: return v > p.leaf.values[0];
        case CmpOp::Ge: return v >= p.leaf.values[0];
        case CmpOp::In:
            for (double x : p.leaf.values)
                if (v == x) return true;
            return false;
    }
    return false;
}

// ---------------------------------------------------------------------------
// intermediate relations: flat composite rows of base-table row ids

struct Relation {
    std::vector<std::string> tables; // slot order
    uint32_t width = 0;
    std::vector<uint32_t> rows; // row ids, width entries per composite row

    size_t count() const { return width == 0 ? 0 : rows.size() / width; }
    const uint32_t* row(size_t i) const { return rows.data() + i * width; }
};

int slot_of(const Relation& rel, const std::string& table) {
    for (size_t i = 0; i < rel.tables.size(); ++i)
        if (rel.tables[i] == table) return static_cast<int>(i);
    return -1;
}

struct ExecContext {
    const Database& db;
    const CostWeights& weights;
    std::vector<double> op_costs;       // per op in visit order (children first)
    std::vector<AggValue>* values = nullptr; // filled by the root aggregate
};

Relation run_node(const PlanNode& node, ExecContext& ctx, PlanNode& annotated);

Relation run_scan(const PlanNode& node, ExecContext& ctx, PlanNode& annotated) {
    const Table& table = ctx.db.table(node.table);
    Relation out;
    out.tables = {node.table};
    out.width = 1;

    uint64_t leaf_evals = 0;
    double cost = 0;

    if (node.kind == OpKind::SeqScan) {
        std::optional<CompiledPred> pred;
        if (node.filter) pred = compile_pred(*node.filter, table);
        uint64_t tuples = table.row_count;
        for (uint32_t r = 0; r < table.row_count; ++r) {
            if (!pred || eval_pred(*pred, r, leaf_evals)) out.rows.push_back(r);
        }
        cost = ctx.weights.page_touch * static_cast<double>(node.table_pages) +
               ctx.weights.tuple_scan * static_cast<double>(tuples) +
               ctx.weights.predicate_leaf_eval * static_cast<double>(leaf_evals);
    } else { // IndexScan
        const Index* index = ctx.db.find_index(node.index.table, node.index.column);
        if (!index)
            throw std::runtime_error("index on " + node.index.table + "." + node.index.column +
                                     " is not materialized");
        const Column& col = table.column(node.probe->column);
        double key = resolve_literal(node.probe->literals.front(), col);
        auto matches = index->lookup(key);

        std::optional<CompiledPred> residual;
        if (node.filter) residual = compile_pred(*node.filter, table);
        for (uint32_t r : matches) {
            if (!residual || eval_pred(*residual, r, leaf_evals)) out.rows.push_back(r);
        }
        double probe_cost = std::log2(std::max<double>(1.0, static_cast<double>(table.row_count)));
        cost = probe_cost + ctx.weights.index_match_fetch * static_cast<double>(matches.size()) +
               ctx.weights.predicate_leaf_eval * static_cast<double>(leaf_evals);
    }

    annotated.actual_card = static_cast<double>(out.count());
    annotated.exec_cost = cost;
    ctx.op_costs.push_back(cost);
    return out;
}

struct KeyAccessor {
    const Column* column = nullptr;
    int slot = -1;

    bool is_null(const uint32_t* row) const { return column->nulls[row[slot]] != 0; }
    int64_t key(const uint32_t* row) const { return column->ints[row[slot]]; }
};

KeyAccessor key_accessor(const Relation& rel, const Database& db, const JoinEdge& edge) {
    KeyAccessor a;
    int child_slot = slot_of(rel, edge.child_table);
    if (child_slot >= 0) {
        a.slot = child_slot;
        a.column = &db.table(edge.child_table).column(edge.child_column);
    } else {
        a.slot = slot_of(rel, edge.parent_table);
        if (a.slot < 0) throw std::runtime_error("join edge references tables outside its inputs");
        a.column = &db.table(edge.parent_table).column(edge.parent_column);
    }
    return a;
}

Relation run_hash_join(const PlanNode& node, ExecContext& ctx, PlanNode& annotated) {
    Relation build = run_node(node.children[0], ctx, annotated.children[0]);
    Relation probe = run_node(node.children[1], ctx, annotated.children[1]);
    KeyAccessor build_key = key_accessor(build, ctx.db, node.join);
    KeyAccessor probe_key = key_accessor(probe, ctx.db, node.join);

    size_t build_count = build.count();
    uint64_t nbuckets = std::bit_ceil(std::max<uint64_t>(4, build_count));
    int shift = 64 - std::countr_zero(nbuckets);
    std::vector<int32_t> head(nbuckets, -1);
    std::vector<int32_t> next(build_count, -1);
    std::vector<int64_t> keys(build_count);

    auto bucket_of = [&](int64_t key) {
        return ((static_cast<uint64_t>(key) ^ kHashSeed) * 0x9e3779b97f4a7c15ull) >> shift;
    };

    uint64_t inserts = 0, probes = 0, entries = 0;
    for (size_t i = 0; i < build_count; ++i) {
        const uint32_t* row = build.row(i);
        if (build_key.is_null(row)) continue; // null keys never match
        int64_t k = build_key.key(row);
        uint64_t b = bucket_of(k);
        keys[i] = k;
        next[i] = head[b];
        head[b] = static_cast<int32_t>(i);
        ++inserts;
    }

    Relation out;
    out.tables = build.tables;
    out.tables.insert(out.tables.end(), probe.tables.begin(), probe.tables.end());
    out.width = build.width + probe.width;

    size_t probe_count = probe.count();
    for (size_t i = 0; i < probe_count; ++i) {
        const uint32_t* row = probe.row(i);
        if (probe_key.is_null(row)) continue;
        int64_t k = probe_key.key(row);
        ++probes;
        for (int32_t e = head[bucket_of(k)]; e >= 0; e = next[e]) {
            ++entries; // chain traversal: matches and collisions both count
            if (keys[e] != k) continue;
            const uint32_t* brow = build.row(static_cast<size_t>(e));
            out.rows.insert(out.rows.end(), brow, brow + build.width);
            out.rows.insert(out.rows.end(), row, row + probe.width);
        }
    }

    double cost = ctx.weights.hash_insert * static_cast<double>(inserts) +
                  ctx.weights.hash_probe * static_cast<double>(probes) +
                  ctx.weights.hash_entry * static_cast<double>(entries);
    annotated.actual_card = static_cast<double>(out.count());
    annotated.exec_cost = cost;
    ctx.op_costs.push_back(cost);
    return out;
}

struct AggState {
    AggFunc fn = AggFunc::CountStar;
    const Column* column = nullptr;
    int slot = -1;
    bool seen = false;
    double acc = 0;
    uint64_t count = 0;
};

Relation run_aggregate(const PlanNode& node, ExecContext& ctx, PlanNode& annotated) {
    std::vector<AggValue>& values = *ctx.values;
    Relation in = run_node(node.children[0], ctx, annotated.children[0]);

    // canonical fold order: composite rows sorted lexicographically with the
    // table slots in sorted-name order, matching the oracle's enumeration
    std::vector<size_t> slot_perm(in.tables.size());
    {
        std::vector<std::pair<std::string, size_t>> named;
        for (size_t i = 0; i < in.tables.size(); ++i) named.emplace_back(in.tables[i], i);
        std::sort(named.begin(), named.end());
        for (size_t i = 0; i < named.size(); ++i) slot_perm[i] = named[i].second;
    }
    size_t n = in.count();
    std::vector<uint32_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = static_cast<uint32_t>(i);
    std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
        const uint32_t* ra = in.row(a);
        const uint32_t* rb = in.row(b);
        for (size_t s : slot_perm) {
            if (ra[s] != rb[s]) return ra[s] < rb[s];
        }
        return false;
    });

    std::vector<AggState> states;
    for (const AggSpec& spec : node.aggregates) {
        AggState st;
        st.fn = spec.fn;
        if (spec.fn != AggFunc::CountStar) {
            st.slot = slot_of(in, spec.table);
            if (st.slot < 0) throw std::runtime_error("aggregate references unjoined table " + spec.table);
            st.column = &ctx.db.table(spec.table).column(spec.column);
        }
        states.push_back(st);
    }

    uint64_t updates = 0;
    for (size_t i = 0; i < n; ++i) {
        const uint32_t* row = in.row(order[i]);
        for (AggState& st : states) {
            if (st.fn == AggFunc::CountStar) {
                ++st.count;
                ++updates;
                continue;
            }
            uint32_t r = row[st.slot];
            if (st.column->nulls[r]) continue; // aggregates ignore nulls
            double v = st.column->numeric(r);
            ++updates;
            ++st.count;
            switch (st.fn) {
                case AggFunc::Sum:
                case AggFunc::Avg: st.acc += v; break;
                case AggFunc::Min: st.acc = st.seen ? std::min(st.acc, v) : v; break;
                case AggFunc::Max: st.acc = st.seen ? std::max(st.acc, v) : v; break;
                default: break;
            }
            st.seen = true;
        }
    }

    values.clear();
    for (const AggState& st : states) {
        AggValue v;
        switch (st.fn) {
            case AggFunc::CountStar:
                v.is_null = false;
                v.value = static_cast<double>(st.count);
                break;
            case AggFunc::Sum:
            case AggFunc::Min:
            case AggFunc::Max:
                v.is_null = !st.seen;
                v.value = st.seen ? st.acc : 0;
                break;
            case AggFunc::Avg:
                v.is_null = !st.seen;
                v.value = st.seen ? st.acc / static_cast<double>(st.count) : 0;
                break;
        }
        values.push_back(v);
    }

    double cost = ctx.weights.aggregate_update * static_cast<double>(updates);
    annotated.actual_card = 1; // scalar aggregate result
    annotated.exec_cost = cost;
    ctx.op_costs.push_back(cost);

    Relation out;
    out.tables = {};
    out.width = 0;
    return out;
}

Relation run_node(const PlanNode& node, ExecContext& ctx, PlanNode& annotated) {
    switch (node.kind) {
        case OpKind::SeqScan:
        case OpKind::IndexScan: return run_scan(node, ctx, annotated);
        case OpKind::HashJoin: return run_hash_join(node, ctx, annotated);
        case OpKind::Aggregate: return run_aggregate(node, ctx, annotated);
    }
    throw std::logic_error("unreachable operator kind");
}

} // namespace

ExecResult execute(const PhysicalPlan& plan, const Database& db, const CostWeights& weights,
                   bool record_wall_time) {
    // refuse plans with un-materialized indexes; a hypothetical plan becomes
    // runnable once its index exists
    plan.root.visit([&](const PlanNode& n) {
        if (n.kind == OpKind::IndexScan && !db.find_index(n.index.table, n.index.column)) {
            std::string what = n.index_hypothetical ? "hypothetical plan: index " : "index ";
            throw std::runtime_error(what + n.index.table + "." + n.index.column +
                                     " is not materialized");
        }
    });

    auto started = std::chrono::steady_clock::now();
    ExecResult res;
    res.annotated = plan;
    ExecContext ctx{db, weights, {}, nullptr};
    ctx.values = &res.values;
    run_node(plan.root, ctx, res.annotated.root);

    double total = 0;
    for (double c : ctx.op_costs) total += c; // fixed children-first order
    res.cost_units = total;

    if (record_wall_time) {
        auto elapsed = std::chrono::steady_clock::now() - started;
        res.wall_time_ms =
            std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(elapsed).count();
    }
    return res;
}

// ---------------------------------------------------------------------------
// brute-force oracle: semantics by definition, no operator machinery shared
// with execute()

namespace {

bool oracle_eval(const PredNode& p, const Table& table, uint32_t row) {
    if (p.kind == PredNode::Kind::And) {
        bool all = true;
        for (const PredNode& c : p.children) all = oracle_eval(c, table, row) && all;
        return all;
    }
    if (p.kind == PredNode::Kind::Or) {
        bool any = false;
        for (const PredNode& c : p.children) any = oracle_eval(c, table, row) || any;
        return any;
    }
    const Column& col = table.column(p.leaf.column);
    if (col.nulls[row]) return false;
    double v =
        col.type == DataType::Categorical ? static_cast<double>(col.codes[row]) : col.numeric(row);
    auto lit_value = [&](const Literal& l) {
        if (l.type != DataType::Categorical) return l.numeric();
        for (size_t i = 0; i < col.dictionary.size(); ++i)
            if (col.dictionary[i] == l.s) return static_cast<double>(i);
        return -1.0;
    };
    switch (p.leaf.op) {
        case CmpOp::Eq: return v == lit_value(p.leaf.literals[0]);
        case CmpOp::Lt: return v < lit_value(p.leaf.literals[0]);
        case CmpOp::Le: return v <= lit_value(p.leaf.literals[0]);
        case CmpOp::Gt: return v > lit_value(p.leaf.literals[0]);
        case CmpOp::Ge: return v >= lit_value(p.leaf.literals[0]);
        case CmpOp::In:
            for (const Literal& l : p.leaf.literals)
                if (v == lit_value(l)) return true;
            return false;
    }
    return false;
}

} // namespace

OracleResult brute_force_oracle(const QuerySpec& q, const Database& db, uint64_t max_product) {
    std::vector<const Table*> tables;
    uint64_t product = 1;
    for (const std::string& t : q.tables) {
        tables.push_back(&db.table(t));
        uint64_t rc = std::max<uint64_t>(1, tables.back()->row_count);
        if (product > max_product / rc)
            throw std::runtime_error("oracle size guard: table size product exceeds limit");
        product *= rc;
    }

    // per-table qualifying rows (filters are per-table conjuncts of the query)
    std::vector<std::vector<uint32_t>> passing(tables.size());
    for (size_t i = 0; i < tables.size(); ++i) {
        const Table& t = *tables[i];
        auto fit = q.filters.find(t.name);
        for (uint32_t r = 0; r < t.row_count; ++r)
            if (fit == q.filters.end() || oracle_eval(fit->second, t, r)) passing[i].push_back(r);
    }

    // join edges indexed by the deeper of their two tables in q.tables order
    struct EdgeCheck {
        size_t other_idx;
        const Column* my_col;
        const Column* other_col;
    };
    std::vector<std::vector<EdgeCheck>> checks(tables.size());
    auto table_idx = [&](const std::string& name) {
        for (size_t i = 0; i < q.tables.size(); ++i)
            if (q.tables[i] == name) return i;
        throw std::runtime_error("join edge references unknown table " + name);
    };
    for (const JoinEdge& e : q.joins) {
        size_t ci = table_idx(e.child_table);
        size_t pi = table_idx(e.parent_table);
        size_t deep = std::max(ci, pi), shallow = std::min(ci, pi);
        const Column* deep_col = deep == ci ? &tables[ci]->column(e.child_column)
                                            : &tables[pi]->column(e.parent_column);
        const Column* shallow_col = shallow == ci ? &tables[ci]->column(e.child_column)
                                                  : &tables[pi]->column(e.parent_column);
        checks[deep].push_back({shallow, deep_col, shallow_col});
    }

    OracleResult res;

    // subset cardinalities: every prefix-closed connected subset the plan may
    // produce is derivable from the full enumeration of each subset; we
    // enumerate each subset of tables that is connected under the join edges
    std::vector<uint32_t> current(tables.size(), 0);

    // aggregate states
    struct OState {
        AggFunc fn;
        const Column* column = nullptr;
        size_t tidx = 0;
        bool seen = false;
        double acc = 0;
        uint64_t count = 0;
    };
    std::vector<OState> states;
    for (const AggSpec& a : q.aggregates) {
        OState st;
        st.fn = a.fn;
        if (a.fn != AggFunc::CountStar) {
            st.tidx = table_idx(a.table);
            st.column = &tables[st.tidx]->column(a.column);
        }
        states.push_back(st);
    }

    // recursive enumeration in sorted table order = canonical row order
    uint64_t full_matches = 0;
    auto recurse = [&](auto&& self, size_t depth) -> void {
        if (depth == tables.size()) {
            ++full_matches;
            for (OState& st : states) {
                if (st.fn == AggFunc::CountStar) {
                    ++st.count;
                    continue;
                }
                uint32_t r = current[st.tidx];
                if (st.column->nulls[r]) continue;
                double v = st.column->numeric(r);
                ++st.count;
                switch (st.fn) {
                    case AggFunc::Sum:
                    case AggFunc::Avg: st.acc += v; break;
                    case AggFunc::Min: st.acc = st.seen ? std::min(st.acc, v) : v; break;
                    case AggFunc::Max: st.acc = st.seen ? std::max(st.acc, v) : v; break;
                    default: break;
                }
                st.seen = true;
            }
            return;
        }
        for (uint32_t r : passing[depth]) {
            bool ok = true;
            for (const EdgeCheck& c : checks[depth]) {
                if (c.my_col->nulls[r] || c.other_col->nulls[current[c.other_idx]]) {
                    ok = false;
                    break;
                }
                if (c.my_col->ints[r] != c.other_col->ints[current[c.other_idx]]) {
                    ok = false;
                    break;
                }
            }
            if (!ok) continue;
            current[depth] = r;
            self(self, depth + 1);
        }
    };
    recurse(recurse, 0);

    for (const OState& st : states) {
        AggValue v;
        switch (st.fn) {
            case AggFunc::CountStar:
                v.is_null = false;
                v.value = static_cast<double>(st.count);
                break;
            case AggFunc::Sum:
            case AggFunc::Min:
            case AggFunc::Max:
                v.is_null = !st.seen;
                v.value = st.seen ? st.acc : 0;
                break;
            case AggFunc::Avg:
                v.is_null = !st.seen;
                v.value = st.seen ? st.acc / static_cast<double>(st.count) : 0;
                break;
        }
        res.values.push_back(v);
    }

    // cardinalities of every connected subset reachable by the planner:
    // enumerate each subset independently (sizes here are tiny by the guard)
    std::vector<std::vector<std::string>> subsets;
    size_t ntab = q.tables.size();
    for (uint64_t mask = 1; mask < (1ull << ntab); ++mask) {
        std::vector<std::string> subset;
        for (size_t i = 0; i < ntab; ++i)
            if (mask & (1ull << i)) subset.push_back(q.tables[i]);
        // connectivity under join edges
        std::set<std::string> in(subset.begin(), subset.end());
        std::set<std::string> reached{subset.front()};
        bool grew = true;
        while (grew) {
            grew = false;
            for (const JoinEdge& e : q.joins) {
                if (in.count(e.child_table) && in.count(e.parent_table)) {
                    bool c = reached.count(e.child_table), p = reached.count(e.parent_table);
                    if (c != p) {
                        reached.insert(c ? e.parent_table : e.child_table);
                        grew = true;
                    }
                }
            }
        }
        if (reached.size() != subset.size()) continue;
        subsets.push_back(subset);
    }

    for (const auto& subset : subsets) {
        std::set<std::string> in(subset.begin(), subset.end());
        uint64_t count = 0;
        std::vector<size_t> idx;
        for (size_t i = 0; i < ntab; ++i)
            if (in.count(q.tables[i])) idx.push_back(i);
        std::vector<uint32_t> cur(ntab, 0);
        auto rec = [&](auto&& self, size_t d) -> void {
            if (d == idx.size()) {
                ++count;
                return;
            }
            size_t ti = idx[d];
            for (uint32_t r : passing[ti]) {
                bool ok = true;
                for (const EdgeCheck& c : checks[ti]) {
                    if (!in.count(q.tables[c.other_idx])) continue;
                    if (c.my_col->nulls[r] || c.other_col->nulls[cur[c.other_idx]] ||
                        c.my_col->ints[r] != c.other_col->ints[cur[c.other_idx]]) {
                        ok = false;
                        break;
                    }
                }
                if (!ok) continue;
                cur[ti] = r;
                self(self, d + 1);
            }
        };
        rec(rec, 0);
        res.subset_cardinalities[subset] = count;
    }
    return res;
}

} // namespace zsce
