#include "zsce/storage.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

namespace zsce {

static_assert(std::endian::native == std::endian::little,
              "column files are little-endian; big-endian hosts need byte swaps");

namespace fs = std::filesystem;

namespace {

std::string column_file(const std::string& table, const std::string& column) {
    return table + "." + column + ".col";
}

template <typename T>
void write_raw(std::ofstream& out, const std::vector<T>& v) {
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
std::vector<T> read_raw(const std::string& path, size_t count) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<T> v(count);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(T)));
    if (static_cast<size_t>(in.gcount()) != count * sizeof(T))
        throw IoError("truncated column file " + path);
    return v;
}

} // namespace

void save_database(const Database& db, const std::string& dir) {
    fs::create_directories(dir);

    Json manifest;
    manifest["format"] = "db_v1";
    manifest["name"] = db.name;
    manifest["seed"] = db.seed;
    Json tables = Json::array();
    for (const Table& t : db.tables) {
        Json jt;
        jt["name"] = t.name;
        jt["rows"] = t.row_count;
        Json cols = Json::array();
        for (const Column& c : t.columns) {
            Json jc;
            jc["name"] = c.name;
            jc["type"] = to_string(c.type);
            if (c.primary_key) jc["primary_key"] = true;
            if (c.is_foreign_key()) jc["fk_parent"] = c.fk_parent;
            cols.push_back(jc);
        }
        jt["columns"] = cols;
        tables.push_back(jt);
    }
    manifest["tables"] = tables;
    Json fks = Json::array();
    for (const ForeignKey& fk : db.foreign_keys)
        fks.push_back({{"child_table", fk.child_table},
                       {"child_column", fk.child_column},
                       {"parent_table", fk.parent_table},
                       {"parent_column", fk.parent_column}});
    manifest["foreign_keys"] = fks;
    Json idxs = Json::array();
    for (const auto& [key, idx] : db.indexes)
        idxs.push_back({{"table", idx.def.table}, {"column", idx.def.column}, {"unique", idx.def.unique}});
    manifest["indexes"] = idxs;
    write_json_file(dir + "/manifest.json", manifest);

    for (const Table& t : db.tables) {
        for (const Column& c : t.columns) {
            std::ofstream out(dir + "/" + column_file(t.name, c.name), std::ios::binary);
            if (!out) throw IoError("cannot write column file for " + t.name + "." + c.name);
            switch (c.type) {
                case DataType::Int: {
                    std::vector<int64_t> v = c.ints;
                    for (size_t r = 0; r < v.size(); ++r)
                        if (c.nulls[r]) v[r] = kNullInt;
                    write_raw(out, v);
                    break;
                }
                case DataType::Float: {
                    std::vector<double> v = c.floats;
                    for (size_t r = 0; r < v.size(); ++r)
                        if (c.nulls[r]) v[r] = std::numeric_limits<double>::quiet_NaN();
                    write_raw(out, v);
                    break;
                }
                case DataType::Categorical: {
                    std::vector<uint32_t> v = c.codes;
                    for (size_t r = 0; r < v.size(); ++r)
                        if (c.nulls[r]) v[r] = kNullCode;
                    write_raw(out, v);
                    std::ofstream dict(dir + "/" + t.name + "." + c.name + ".dict");
                    for (const std::string& s : c.dictionary) dict << s << '\n';
                    break;
                }
            }
        }
    }
}

Database load_database(const std::string& dir) {
    Json manifest = load_json_file(dir + "/manifest.json");
    if (!manifest.contains("format") || manifest["format"] != "db_v1")
        throw IoError(dir + "/manifest.json is not a db_v1 manifest");

    Database db;
    db.name = manifest["name"].get<std::string>();
    db.seed = manifest["seed"].get<uint64_t>();
    for (const Json& jt : manifest["tables"]) {
        Table t;
        t.name = jt["name"].get<std::string>();
        t.row_count = jt["rows"].get<uint64_t>();
        for (const Json& jc : jt["columns"]) {
            Column c;
            c.name = jc["name"].get<std::string>();
            c.type = datatype_from_string(jc["type"].get<std::string>());
            c.primary_key = jc.value("primary_key", false);
            c.fk_parent = jc.value("fk_parent", std::string());
            c.nulls.assign(t.row_count, 0);
            std::string path = dir + "/" + column_file(t.name, c.name);
            switch (c.type) {
                case DataType::Int:
                    c.ints = read_raw<int64_t>(path, t.row_count);
                    for (size_t r = 0; r < c.ints.size(); ++r)
                        if (c.ints[r] == kNullInt) {
                            c.nulls[r] = 1;
                            c.ints[r] = 0;
                        }
                    break;
                case DataType::Float:
                    c.floats = read_raw<double>(path, t.row_count);
                    for (size_t r = 0; r < c.floats.size(); ++r)
                        if (std::isnan(c.floats[r])) {
                            c.nulls[r] = 1;
                            c.floats[r] = 0;
                        }
                    break;
                case DataType::Categorical: {
                    c.codes = read_raw<uint32_t>(path, t.row_count);
                    for (size_t r = 0; r < c.codes.size(); ++r)
                        if (c.codes[r] == kNullCode) {
                            c.nulls[r] = 1;
                            c.codes[r] = 0;
                        }
                    std::ifstream dict(dir + "/" + t.name + "." + c.name + ".dict");
                    if (!dict) throw IoError("missing dictionary for " + t.name + "." + c.name);
                    std::string line;
                    while (std::getline(dict, line)) c.dictionary.push_back(line);
                    break;
                }
            }
            t.columns.push_back(std::move(c));
        }
        db.tables.push_back(std::move(t));
    }
    for (const Json& jf : manifest["foreign_keys"])
        db.foreign_keys.push_back({jf["child_table"].get<std::string>(),
                                   jf["child_column"].get<std::string>(),
                                   jf["parent_table"].get<std::string>(),
                                   jf["parent_column"].get<std::string>()});
    for (const Json& ji : manifest["indexes"])
        build_index(db, {ji["table"].get<std::string>(), ji["column"].get<std::string>(),
                         ji.value("unique", false)});
    return db;
}

Json catalog_to_json(const Catalog& cat) {
    Json j;
    j["format"] = "catalog_v1";
    Json tables = Json::object();
    for (const auto& [name, ts] : cat.tables)
        tables[name] = {{"row_count", ts.row_count}, {"page_count", ts.page_count}, {"ordinal", ts.ordinal}};
    j["tables"] = tables;
    Json columns = Json::array();
    for (const auto& [key, cs] : cat.columns) {
        Json jc;
        jc["table"] = key.first;
        jc["column"] = key.second;
        jc["datatype"] = to_string(cs.datatype);
        jc["ndv"] = cs.ndv;
        jc["null_frac"] = cs.null_frac;
        if (cs.min) jc["min"] = *cs.min;
        if (cs.max) jc["max"] = *cs.max;
        jc["width_bytes"] = cs.width_bytes;
        jc["ordinal"] = cs.ordinal;
        jc["histogram"] = {{"kind", "equi_depth"},
                           {"bounds", cs.histogram.bounds},
                           {"counts", cs.histogram.counts},
                           {"ndvs", cs.histogram.ndvs}};
        columns.push_back(jc);
    }
    j["columns"] = columns;
    return j;
}

Catalog catalog_from_json(const Json& j) {
    if (!j.contains("format") || j["format"] != "catalog_v1") throw IoError("not a catalog_v1 document");
    Catalog cat;
    for (auto it = j["tables"].begin(); it != j["tables"].end(); ++it)
        cat.tables[it.key()] = {it.value()["row_count"].get<uint64_t>(),
                                it.value()["page_count"].get<uint64_t>(),
                                it.value().value("ordinal", 0)};
    for (const Json& jc : j["columns"]) {
        ColumnStats cs;
        cs.datatype = datatype_from_string(jc["datatype"].get<std::string>());
        cs.ndv = jc["ndv"].get<uint64_t>();
        cs.null_frac = jc["null_frac"].get<double>();
        if (jc.contains("min")) cs.min = jc["min"].get<double>();
        if (jc.contains("max")) cs.max = jc["max"].get<double>();
        cs.width_bytes = jc["width_bytes"].get<double>();
        cs.ordinal = jc.value("ordinal", 0);
        cs.histogram.bounds = jc["histogram"]["bounds"].get<std::vector<double>>();
        cs.histogram.counts = jc["histogram"]["counts"].get<std::vector<uint64_t>>();
        cs.histogram.ndvs = jc["histogram"]["ndvs"].get<std::vector<uint64_t>>();
        cat.columns[{jc["table"].get<std::string>(), jc["column"].get<std::string>()}] = std::move(cs);
    }
    return cat;
}

void save_catalog(const Catalog& cat, const std::string& path) {
    write_json_file(path, catalog_to_json(cat));
}

Catalog load_catalog(const std::string& path) { return catalog_from_json(load_json_file(path)); }

uint64_t database_digest(const Database& db) {
    uint64_t h = fnv1a(db.name);
    h = fnv1a(&db.seed, sizeof db.seed, h);
    for (const Table& t : db.tables) {
        h = fnv1a(t.name, h);
        h = fnv1a(&t.row_count, sizeof t.row_count, h);
        for (const Column& c : t.columns) {
            h = fnv1a(c.name, h);
            auto tag = static_cast<uint8_t>(c.type);
            h = fnv1a(&tag, 1, h);
            h = fnv1a(c.ints.data(), c.ints.size() * sizeof(int64_t), h);
            h = fnv1a(c.floats.data(), c.floats.size() * sizeof(double), h);
            h = fnv1a(c.codes.data(), c.codes.size() * sizeof(uint32_t), h);
            for (const std::string& s : c.dictionary) h = fnv1a(s, h);
            h = fnv1a(c.nulls.data(), c.nulls.size(), h);
        }
    }
    for (const ForeignKey& fk : db.foreign_keys) {
        h = fnv1a(fk.child_table, h);
        h = fnv1a(fk.child_column, h);
        h = fnv1a(fk.parent_table, h);
        h = fnv1a(fk.parent_column, h);
    }
    return h;
}

} // namespace zsce
