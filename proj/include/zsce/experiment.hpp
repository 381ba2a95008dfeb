#pragma once

#include <optional>
#include <string>
#include <vector>

#include "zsce/encoding.hpp"
#include "zsce/eval.hpp"
#include "zsce/executor.hpp"
#include "zsce/model.hpp"
#include "zsce/planner.hpp"
#include "zsce/storage.hpp"
#include "zsce/workload.hpp"

namespace zsce {

Json gen_config_to_json(const GenConfig& c);
GenConfig gen_config_from_json(const Json& j);

Json workload_config_to_json(const WorkloadConfig& c);
WorkloadConfig workload_config_from_json(const Json& j);

/// One executed query: the sample_v1 record.
struct Sample {
    std::string database;
    uint64_t query_id = 0;
    PhysicalPlan plan; // annotated: estimates, actuals, analytic + exec costs
    double cost_units = 0;
    std::optional<double> wall_time_ms;
};

void save_samples(const std::vector<Sample>& samples, const std::string& path);
std::vector<Sample> load_samples(const std::string& path);

TrainingSample to_training_sample(const Sample& s, CardMode mode);
TrainingSample to_onehot_training_sample(const Sample& s, const OneHotRegistry& registry,
                                         CardMode mode);

struct DatabaseSpec {
    std::string name;
    uint64_t seed = 0;
    GenConfig gen;
};

struct ExperimentSpec {
    uint64_t seed = 1;
    std::vector<DatabaseSpec> databases;
    std::string holdout;
    std::string validation;
    uint64_t queries_per_database = 5000;
    WorkloadConfig workload; // per-database seeds derived from spec seed
    ModelConfig model;
    CostWeights weights;

    bool estimated_mode = true;
    bool onehot_ablation = true;
    std::vector<uint64_t> scaled_cost_ns{100, 500, 1000, 5000};
    uint64_t comparison_eval_count = 1000; // holdout split for baseline curves

    bool stagnation = false;
    int stagnation_epochs = 15;
    uint64_t stagnation_queries = 1500;

    bool fewshot = true;
    uint64_t fewshot_train = 100;
    uint64_t fewshot_eval = 500;

    bool sensitivity = false;
    std::vector<int> sensitivity_hidden_dims{32, 64};
    int sensitivity_epochs = 10;

    bool index_mode = false;
    uint64_t indexes_per_database = 5;
    uint64_t index_eval_pairs = 300;

    int jobs = 0;

    void validate() const;
    Json to_json() const;
    static ExperimentSpec from_json(const Json& j);
};

/// Generate + plan + execute one database's workload. Statistics, index set
/// construction and per-query seeds are all derived deterministically.
struct DbArtifacts {
    Database db;
    Catalog catalog;
    std::vector<IndexDef> index_set;
    std::vector<QuerySpec> queries;
    std::vector<Sample> samples;
};

DbArtifacts run_db_pipeline(const DatabaseSpec& dspec, const ExperimentSpec& spec, bool with_indexes,
                            int jobs);

/// Full leave-one-database-out experiment: pipelines every database, trains
/// the zero-shot model per cardinality mode plus baselines, evaluates on the
/// held-out database, and writes report.json, table1.csv, figure3_curve.csv
/// and stagnation.csv (plus manifest.json) under out_dir. Identical specs
/// produce byte-identical reports.
Json run_experiment(const ExperimentSpec& spec, const std::string& out_dir);

/// What-If variant: non-holdout databases get fixed random index sets before
/// executing their training queries; held-out queries are evaluated on
/// hypothetical-index plans predicted without consulting the materialized
/// index.
Json run_index_experiment(ExperimentSpec spec, const std::string& out_dir);

Metrics metrics_from_samples(const ModelParams& model, const std::vector<TrainingSample>& samples,
                             int jobs);

} // namespace zsce
