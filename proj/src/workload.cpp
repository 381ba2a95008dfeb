#include "zsce/workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "zsce/rng.hpp"

namespace zsce {

const char* to_string(CmpOp op) {
    switch (op) {
        case CmpOp::Eq: return "=";
        case CmpOp::Lt: return "<";
        case CmpOp::Le: return "<=";
        case CmpOp::Gt: return ">";
        case CmpOp::Ge: return ">=";
        case CmpOp::In: return "in";
    }
    return "?";
}

static CmpOp cmp_from_string(std::string_view s) {
    if (s == "=") return CmpOp::Eq;
    if (s == "<") return CmpOp::Lt;
    if (s == "<=") return CmpOp::Le;
    if (s == ">") return CmpOp::Gt;
    if (s == ">=") return CmpOp::Ge;
    if (s == "in") return CmpOp::In;
    throw IoError("unknown comparison op '" + std::string(s) + "'");
}

const char* to_string(Connective c) { return c == Connective::And ? "and" : "or"; }

const char* to_string(AggFunc f) {
    switch (f) {
        case AggFunc::CountStar: return "count";
        case AggFunc::Sum: return "sum";
        case AggFunc::Avg: return "avg";
        case AggFunc::Min: return "min";
        case AggFunc::Max: return "max";
    }
    return "?";
}

static AggFunc agg_from_string(std::string_view s) {
    if (s == "count") return AggFunc::CountStar;
    if (s == "sum") return AggFunc::Sum;
    if (s == "avg") return AggFunc::Avg;
    if (s == "min") return AggFunc::Min;
    if (s == "max") return AggFunc::Max;
    throw IoError("unknown aggregate '" + std::string(s) + "'");
}

size_t PredNode::leaf_count() const {
    if (kind == Kind::Leaf) return 1;
    size_t n = 0;
    for (const PredNode& c : children) n += c.leaf_count();
    return n;
}

size_t PredNode::depth() const {
    if (kind == Kind::Leaf) return 0;
    size_t d = 0;
    for (const PredNode& c : children) d = std::max(d, c.depth());
    return d + 1;
}

void WorkloadConfig::validate() const {
    if (query_count == 0) throw ConfigError("query_count must be positive");
    if (max_join_size < 1 || max_join_size > 5) throw ConfigError("max_join_size must be in 1..5");
    if (predicate_count.lo > predicate_count.hi || predicate_count.lo < 0 || predicate_count.hi > 5)
        throw ConfigError("predicate_count range must lie in 0..5");
    if (aggregate_count.lo > aggregate_count.hi || aggregate_count.lo < 1 || aggregate_count.hi > 3)
        throw ConfigError("aggregate_count range must lie in 1..3");
}

namespace {

struct SchemaView {
    // adjacency over FK edges, both directions
    std::map<std::string, std::vector<const ForeignKey*>> adjacent;

    explicit SchemaView(const Database& db) {
        for (const Table& t : db.tables) adjacent[t.name];
        for (const ForeignKey& fk : db.foreign_keys) {
            adjacent[fk.child_table].push_back(&fk);
            adjacent[fk.parent_table].push_back(&fk);
        }
    }
};

bool is_data_column(const Column& c) { return !c.primary_key && !c.is_foreign_key(); }

/// Random non-null value of the column, at a row drawn uniformly; falls back
/// to the domain midpoint if it keeps hitting nulls.
std::optional<Literal> sample_value(const Column& col, Rng& rng) {
    size_t rows = col.row_count();
    if (rows == 0) return std::nullopt;
    for (int attempt = 0; attempt < 16; ++attempt) {
        size_t r = static_cast<size_t>(rng.below(rows));
        if (col.nulls[r]) continue;
        Literal lit;
        lit.type = col.type;
        switch (col.type) {
            case DataType::Int: lit.i = col.ints[r]; break;
            case DataType::Float: lit.f = col.floats[r]; break;
            case DataType::Categorical:
                lit.s = col.dictionary[col.codes[r]];
                lit.code = col.codes[r];
                break;
        }
        return lit;
    }
    return std::nullopt;
}

PredLeaf make_leaf(const std::string& table, const Column& col, const ColumnStats& stats, Rng& rng) {
    PredLeaf leaf;
    leaf.table = table;
    leaf.column = col.name;
    if (col.type == DataType::Categorical) {
        leaf.op = rng.real() < 0.5 ? CmpOp::Eq : CmpOp::In;
        size_t k = leaf.op == CmpOp::Eq ? 1 : static_cast<size_t>(rng.uniform_int(2, 5));
        k = std::min(k, col.dictionary.size());
        if (k <= 1) leaf.op = CmpOp::Eq;
        std::vector<size_t> codes;
        for (size_t i = 0; i < k; ++i) {
            size_t code = static_cast<size_t>(rng.below(col.dictionary.size()));
            if (std::find(codes.begin(), codes.end(), code) == codes.end()) codes.push_back(code);
        }
        for (size_t code : codes) {
            Literal lit;
            lit.type = DataType::Categorical;
            lit.s = col.dictionary[code];
            lit.code = static_cast<int64_t>(code);
            leaf.literals.push_back(std::move(lit));
        }
        return leaf;
    }

    constexpr CmpOp numeric_ops[] = {CmpOp::Eq, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge};
    leaf.op = numeric_ops[rng.below(5)];
    // 70% literals from actual data, 30% uniform over [min, max]
    std::optional<Literal> lit;
    if (rng.real() < 0.7) lit = sample_value(col, rng);
    if (!lit) {
        Literal l;
        l.type = col.type;
        double lo = stats.min.value_or(0), hi = stats.max.value_or(0);
        if (col.type == DataType::Int)
            l.i = rng.uniform_int(static_cast<int64_t>(lo), static_cast<int64_t>(hi));
        else
            l.f = rng.uniform(lo, hi);
        lit = l;
    }
    leaf.literals.push_back(*lit);
    return leaf;
}

/// Balanced AND/OR tree over the leaves; depth stays <= 3 for <= 5 leaves.
PredNode build_tree(std::vector<PredNode> leaves, Rng& rng) {
    if (leaves.size() == 1) return std::move(leaves.front());
    size_t half = leaves.size() / 2;
    std::vector<PredNode> left(leaves.begin(), leaves.begin() + static_cast<long>(half));
    std::vector<PredNode> right(leaves.begin() + static_cast<long>(half), leaves.end());
    PredNode node;
    node.kind = rng.real() < 0.7 ? PredNode::Kind::And : PredNode::Kind::Or;
    node.children.push_back(build_tree(std::move(left), rng));
    node.children.push_back(build_tree(std::move(right), rng));
    return node;
}

} // namespace

std::vector<QuerySpec> generate_workload(const Database& db, const Catalog& catalog,
                                         const WorkloadConfig& cfg) {
    cfg.validate();
    SchemaView schema(db);

    int max_join = cfg.max_join_size;
    if (static_cast<size_t>(max_join) > db.tables.size()) {
        max_join = static_cast<int>(db.tables.size());
        ZSCE_INFO("max_join_size clamped to %d (database has %zu tables)", max_join, db.tables.size());
    }

    std::vector<QuerySpec> queries;
    queries.reserve(cfg.query_count);
    for (uint64_t qid = 0; qid < cfg.query_count; ++qid) {
        Rng rng(derive_seed(cfg.seed, fnv1a("query"), qid));
        QuerySpec q;
        q.id = qid;

        // grow a connected tree over the FK graph
        size_t target = static_cast<size_t>(rng.uniform_int(1, max_join));
        std::string start = db.tables[rng.below(db.tables.size())].name;
        q.tables.push_back(start);
        while (q.tables.size() < target) {
            std::vector<const ForeignKey*> frontier;
            for (const std::string& t : q.tables)
                for (const ForeignKey* fk : schema.adjacent.at(t)) {
                    const std::string& other = fk->child_table == t ? fk->parent_table : fk->child_table;
                    if (std::find(q.tables.begin(), q.tables.end(), other) == q.tables.end())
                        frontier.push_back(fk);
                }
            if (frontier.empty()) break; // FK graph smaller than requested
            const ForeignKey* fk = frontier[rng.below(frontier.size())];
            const std::string& added =
                std::find(q.tables.begin(), q.tables.end(), fk->child_table) == q.tables.end()
                    ? fk->child_table
                    : fk->parent_table;
            q.tables.push_back(added);
            q.joins.push_back({fk->child_table, fk->child_column, fk->parent_table, fk->parent_column});
        }
        std::sort(q.tables.begin(), q.tables.end());

        // predicates: draw total leaf count, spread over the joined tables
        auto total_leaves =
            static_cast<size_t>(rng.uniform_int(cfg.predicate_count.lo, cfg.predicate_count.hi));
        std::map<std::string, std::vector<PredNode>> leaves_per_table;
        for (size_t i = 0; i < total_leaves; ++i) {
            const std::string& t = q.tables[rng.below(q.tables.size())];
            const Table& table = db.table(t);
            std::vector<const Column*> eligible;
            for (const Column& c : table.columns)
                if (is_data_column(c)) eligible.push_back(&c);
            if (eligible.empty()) continue;
            const Column& col = *eligible[rng.below(eligible.size())];
            if (leaves_per_table[t].size() >= 5) continue; // per-tree cap
            PredNode leaf;
            leaf.kind = PredNode::Kind::Leaf;
            leaf.leaf = make_leaf(t, col, catalog.column(t, col.name), rng);
            leaves_per_table[t].push_back(std::move(leaf));
        }
        for (auto& [t, leaves] : leaves_per_table)
            if (!leaves.empty()) q.filters[t] = build_tree(std::move(leaves), rng);

        // aggregates over numeric data columns, COUNT(*) as fallback
        auto agg_count =
            static_cast<size_t>(rng.uniform_int(cfg.aggregate_count.lo, cfg.aggregate_count.hi));
        std::vector<std::pair<std::string, const Column*>> numeric;
        for (const std::string& t : q.tables)
            for (const Column& c : db.table(t).columns)
                if (is_data_column(c) && c.type != DataType::Categorical) numeric.emplace_back(t, &c);
        for (size_t i = 0; i < agg_count; ++i) {
            AggSpec agg;
            auto fn = static_cast<AggFunc>(rng.below(5));
            if (fn == AggFunc::CountStar || numeric.empty()) {
                agg.fn = AggFunc::CountStar;
            } else {
                agg.fn = fn;
                auto& [t, col] = numeric[rng.below(numeric.size())];
                agg.table = t;
                agg.column = col->name;
            }
            q.aggregates.push_back(std::move(agg));
        }
        queries.push_back(std::move(q));
    }
    return queries;
}

std::vector<IndexDef> generate_index_set(const Database& db, size_t k, uint64_t seed) {
    std::vector<IndexDef> pool;
    for (const Table& t : db.tables)
        for (const Column& c : t.columns)
            if (is_data_column(c) || c.is_foreign_key()) pool.push_back({t.name, c.name, false});
    if (k > pool.size())
        throw ConfigError("index set size " + std::to_string(k) + " exceeds eligible column pool (" +
                          std::to_string(pool.size()) + ")");
    Rng rng(derive_seed(seed, fnv1a("indexset")));
    rng.shuffle(pool);
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

Json pred_to_json(const PredNode& p) {
    Json j;
    if (p.kind == PredNode::Kind::Leaf) {
        j["op"] = to_string(p.leaf.op);
        j["table"] = p.leaf.table;
        j["column"] = p.leaf.column;
        Json lits = Json::array();
        for (const Literal& l : p.leaf.literals) {
            switch (l.type) {
                case DataType::Int: lits.push_back(l.i); break;
                case DataType::Float: lits.push_back(l.f); break;
                case DataType::Categorical: lits.push_back(Json{{"word", l.s}, {"code", l.code}}); break;
            }
        }
        j["literals"] = lits;
    } else {
        j["connective"] = p.kind == PredNode::Kind::And ? "and" : "or";
        Json ch = Json::array();
        for (const PredNode& c : p.children) ch.push_back(pred_to_json(c));
        j["children"] = ch;
    }
    if (p.est_selectivity >= 0) j["est_selectivity"] = p.est_selectivity;
    return j;
}

PredNode pred_from_json(const Json& j) {
    PredNode p;
    if (j.contains("connective")) {
        p.kind = j["connective"] == "and" ? PredNode::Kind::And : PredNode::Kind::Or;
        for (const Json& c : j["children"]) p.children.push_back(pred_from_json(c));
    } else {
        p.kind = PredNode::Kind::Leaf;
        p.leaf.op = cmp_from_string(j["op"].get<std::string>());
        p.leaf.table = j["table"].get<std::string>();
        p.leaf.column = j["column"].get<std::string>();
        for (const Json& l : j["literals"]) {
            Literal lit;
            if (l.is_object()) {
                lit.type = DataType::Categorical;
                lit.s = l["word"].get<std::string>();
                lit.code = l.value("code", -1);
            } else if (l.is_number_integer()) {
                lit.type = DataType::Int;
                lit.i = l.get<int64_t>();
            } else {
                lit.type = DataType::Float;
                lit.f = l.get<double>();
            }
            p.leaf.literals.push_back(std::move(lit));
        }
    }
    p.est_selectivity = j.value("est_selectivity", -1.0);
    return p;
}

Json query_to_json(const QuerySpec& q) {
    Json j;
    j["id"] = q.id;
    j["tables"] = q.tables;
    Json joins = Json::array();
    for (const JoinEdge& e : q.joins)
        joins.push_back({{"child_table", e.child_table},
                         {"child_column", e.child_column},
                         {"parent_table", e.parent_table},
                         {"parent_column", e.parent_column}});
    j["joins"] = joins;
    Json filters = Json::object();
    for (const auto& [t, p] : q.filters) filters[t] = pred_to_json(p);
    j["filters"] = filters;
    Json aggs = Json::array();
    for (const AggSpec& a : q.aggregates) {
        Json ja;
        ja["fn"] = to_string(a.fn);
        if (a.fn != AggFunc::CountStar) {
            ja["table"] = a.table;
            ja["column"] = a.column;
        }
        aggs.push_back(ja);
    }
    j["aggregates"] = aggs;
    return j;
}

QuerySpec query_from_json(const Json& j) {
    QuerySpec q;
    q.id = j["id"].get<uint64_t>();
    q.tables = j["tables"].get<std::vector<std::string>>();
    for (const Json& e : j["joins"])
        q.joins.push_back({e["child_table"].get<std::string>(), e["child_column"].get<std::string>(),
                           e["parent_table"].get<std::string>(), e["parent_column"].get<std::string>()});
    for (auto it = j["filters"].begin(); it != j["filters"].end(); ++it)
        q.filters[it.key()] = pred_from_json(it.value());
    for (const Json& ja : j["aggregates"]) {
        AggSpec a;
        a.fn = agg_from_string(ja["fn"].get<std::string>());
        a.table = ja.value("table", std::string());
        a.column = ja.value("column", std::string());
        q.aggregates.push_back(std::move(a));
    }
    return q;
}

namespace {

std::string literal_to_sql(const Literal& l) {
    switch (l.type) {
        case DataType::Int: return std::to_string(l.i);
        case DataType::Float: {
            std::ostringstream os;
            os << l.f;
            return os.str();
        }
        case DataType::Categorical: return "'" + l.s + "'";
    }
    return "?";
}

std::string pred_to_sql(const PredNode& p) {
    if (p.kind == PredNode::Kind::Leaf) {
        std::string s = p.leaf.table + "." + p.leaf.column;
        if (p.leaf.op == CmpOp::In) {
            s += " IN (";
            for (size_t i = 0; i < p.leaf.literals.size(); ++i)
                s += (i ? ", " : "") + literal_to_sql(p.leaf.literals[i]);
            s += ")";
        } else {
            s += " ";
            s += to_string(p.leaf.op);
            s += " " + literal_to_sql(p.leaf.literals.front());
        }
        return s;
    }
    std::string joiner = p.kind == PredNode::Kind::And ? " AND " : " OR ";
    std::string s = "(";
    for (size_t i = 0; i < p.children.size(); ++i) s += (i ? joiner : "") + pred_to_sql(p.children[i]);
    return s + ")";
}

} // namespace

std::string query_to_sql(const QuerySpec& q) {
    std::string sql = "SELECT ";
    for (size_t i = 0; i < q.aggregates.size(); ++i) {
        const AggSpec& a = q.aggregates[i];
        if (i) sql += ", ";
        if (a.fn == AggFunc::CountStar)
            sql += "COUNT(*)";
        else {
            std::string fn = to_string(a.fn);
            for (char& ch : fn) ch = static_cast<char>(std::toupper(ch));
            sql += fn + "(" + a.table + "." + a.column + ")";
        }
    }
    sql += " FROM ";
    for (size_t i = 0; i < q.tables.size(); ++i) sql += (i ? ", " : "") + q.tables[i];
    std::vector<std::string> conds;
    for (const JoinEdge& e : q.joins)
        conds.push_back(e.child_table + "." + e.child_column + " = " + e.parent_table + "." +
                        e.parent_column);
    for (const auto& [t, p] : q.filters) conds.push_back(pred_to_sql(p));
    if (!conds.empty()) {
        sql += " WHERE ";
        for (size_t i = 0; i < conds.size(); ++i) sql += (i ? " AND " : "") + conds[i];
    }
    return sql + ";";
}

void save_workload(const std::vector<QuerySpec>& queries, const std::string& db_name,
                   const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    Json header = {{"format", "workload_v1"}, {"database", db_name}, {"count", queries.size()}};
    out << header.dump() << '\n';
    for (const QuerySpec& q : queries) out << query_to_json(q).dump() << '\n';

    std::ofstream sql(path + ".sql");
    for (const QuerySpec& q : queries) sql << query_to_sql(q) << '\n';
}

std::vector<QuerySpec> load_workload(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty workload file " + path);
    Json header = Json::parse(line);
    if (!header.contains("format") || header["format"] != "workload_v1")
        throw IoError(path + " is not a workload_v1 file");
    std::vector<QuerySpec> queries;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        queries.push_back(query_from_json(Json::parse(line)));
    }
    return queries;
}

} // namespace zsce
