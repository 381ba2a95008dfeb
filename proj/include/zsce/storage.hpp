#pragma once

#include <string>

#include "zsce/json_util.hpp"
#include "zsce/relcore.hpp"

namespace zsce {

/// One directory per database: manifest.json (schema, FK edges, index defs),
/// one little-endian binary file per column, a dictionary file per
/// categorical column, and catalog.json once statistics exist. Nulls use
/// sentinel values on disk (INT64_MIN / NaN / UINT32_MAX).
void save_database(const Database& db, const std::string& dir);
Database load_database(const std::string& dir);

void save_catalog(const Catalog& cat, const std::string& path);
Catalog load_catalog(const std::string& path);

Json catalog_to_json(const Catalog& cat);
Catalog catalog_from_json(const Json& j);

/// Content digest over schema and column data; used for determinism checks
/// and manifests.
uint64_t database_digest(const Database& db);

} // namespace zsce
