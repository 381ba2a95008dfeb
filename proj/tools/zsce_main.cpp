#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "zsce/cardest.hpp"
#include "zsce/encoding.hpp"
#include "zsce/eval.hpp"
#include "zsce/executor.hpp"
#include "zsce/experiment.hpp"
#include "zsce/manifest.hpp"
#include "zsce/model.hpp"
#include "zsce/parallel.hpp"
#include "zsce/planner.hpp"
#include "zsce/storage.hpp"
#include "zsce/workload.hpp"

namespace fs = std::filesystem;
using namespace zsce;

namespace {

struct CommonOpts {
    int jobs = 0;
};

IndexDef parse_index_flag(const std::string& s) {
    size_t dot = s.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == s.size())
        throw ConfigError("--hypothetical-index expects table.column");
    return {s.substr(0, dot), s.substr(dot + 1), false};
}

std::vector<IndexDef> load_index_file(const std::string& path) {
    Json j = load_json_file(path);
    std::vector<IndexDef> defs;
    for (const Json& ji : j.at("indexes"))
        defs.push_back({ji.at("table").get<std::string>(), ji.at("column").get<std::string>(), false});
    return defs;
}

int cmd_gen_data(const std::string& config_path, const std::string& out_dir, uint64_t seed,
                 const std::string& name) {
    Json cfg_json = load_json_file(config_path);
    GenConfig cfg = gen_config_from_json(cfg_json);

    RunManifest manifest("gen-data");
    manifest.add_seed("database", seed);
    manifest.add_config("gen", cfg_json);
    fs::create_directories(out_dir);
    manifest.write(out_dir + "/run_manifest.json");

    Database db = generate_database(cfg, seed, name);
    Catalog cat = compute_statistics(db);
    save_database(db, out_dir);
    save_catalog(cat, out_dir + "/catalog.json");

    manifest.add_artifact(out_dir + "/manifest.json");
    manifest.add_artifact(out_dir + "/catalog.json");
    manifest.add_note("database_digest", hex_digest(database_digest(db)));
    manifest.write(out_dir + "/run_manifest.json");
    std::printf("generated %s: %zu tables, %llu rows\n", db.name.c_str(), db.tables.size(),
                static_cast<unsigned long long>(db.total_rows()));
    return 0;
}

int cmd_gen_workload(const std::string& db_dir, const std::string& config_path,
                     const std::string& out_file) {
    Database db = load_database(db_dir);
    Catalog cat = load_catalog(db_dir + "/catalog.json");
    Json cfg_json = load_json_file(config_path);
    WorkloadConfig cfg = workload_config_from_json(cfg_json);

    RunManifest manifest("gen-workload");
    manifest.add_seed("workload", cfg.seed);
    manifest.add_config("workload", cfg_json);

    std::vector<QuerySpec> queries = generate_workload(db, cat, cfg);
    save_workload(queries, db.name, out_file);

    manifest.add_artifact(out_file);
    manifest.write(out_file + ".manifest.json");
    std::printf("generated %zu queries over %s\n", queries.size(), db.name.c_str());
    return 0;
}

int cmd_run_workload(const std::string& db_dir, const std::string& workload_path,
                     const std::string& out_file, const std::string& index_file, bool wall_clock,
                     int jobs) {
    Database db = load_database(db_dir);
    Catalog cat = load_catalog(db_dir + "/catalog.json");
    std::vector<QuerySpec> queries = load_workload(workload_path);

    std::vector<IndexDef> indexes;
    if (!index_file.empty()) {
        indexes = load_index_file(index_file);
        for (const IndexDef& d : indexes) build_index(db, d);
    }
    for (const auto& [key, idx] : db.indexes) indexes.push_back(idx.def);

    CostWeights weights;
    RunManifest manifest("run-workload");
    manifest.set_cost_weights(cost_weights_to_json(weights));
    manifest.add_note("database", db.name);

    std::vector<Sample> samples(queries.size());
    parallel_for(queries.size(), jobs, [&](size_t i) {
        PhysicalPlan plan = plan_query(queries[i], cat, indexes);
        plan.database = db.name;
        plan.query_id = queries[i].id;
        ExecResult res = execute(plan, db, weights, wall_clock);
        Sample s;
        s.database = db.name;
        s.query_id = queries[i].id;
        s.plan = std::move(res.annotated);
        s.cost_units = res.cost_units;
        s.wall_time_ms = res.wall_time_ms;
        samples[i] = std::move(s);
    });
    save_samples(samples, out_file);
    manifest.add_artifact(out_file);
    manifest.write(out_file + ".manifest.json");
    std::printf("executed %zu queries on %s -> %s\n", samples.size(), db.name.c_str(),
                out_file.c_str());
    return 0;
}

int cmd_train(const std::vector<std::string>& sample_files, const std::string& holdout,
              const std::string& model_config, const std::string& out_path,
              const std::string& card_mode, const std::string& validation, int jobs) {
    ModelConfig cfg;
    if (!model_config.empty()) cfg = ModelConfig::from_json(load_json_file(model_config));
    CardMode mode = card_mode_from_string(card_mode);

    std::vector<TrainingSample> training;
    std::set<std::string> databases;
    for (const std::string& f : sample_files) {
        for (const Sample& s : load_samples(f)) {
            if (s.database == holdout)
                throw std::runtime_error("leak guard: sample file " + f +
                                         " contains held-out database " + holdout);
            databases.insert(s.database);
            training.push_back(to_training_sample(s, mode));
        }
    }
    if (training.empty()) throw std::runtime_error("no training samples loaded");

    // validation database: explicit flag, else the lexicographically last one
    std::string val = validation;
    if (val.empty()) val = *databases.rbegin();
    if (!databases.count(val)) throw ConfigError("validation database " + val + " has no samples");

    TrainHistory hist;
    ModelParams params = train(training, cfg, kGraphSchemaV1, {val}, &hist, holdout, jobs);
    params.card_mode = to_string(mode);
    save_checkpoint(params, out_path);

    RunManifest manifest("train");
    manifest.add_seed("model", cfg.seed);
    manifest.add_config("model", cfg.to_json());
    manifest.add_note("card_mode", to_string(mode));
    manifest.add_note("validation", val);
    manifest.add_artifact(out_path);
    manifest.write(out_path + ".manifest.json");
    std::printf("trained on %zu samples (%zu databases), %d epochs, checkpoint %s\n",
                training.size(), databases.size(), hist.epochs_run, out_path.c_str());
    return 0;
}

int cmd_finetune(const std::string& checkpoint, const std::string& sample_file,
                 const std::string& out_path, int jobs) {
    ModelParams params = load_checkpoint(checkpoint);
    std::vector<TrainingSample> samples;
    for (const Sample& s : load_samples(sample_file))
        samples.push_back(to_training_sample(s, CardMode::Exact));
    ModelParams tuned = finetune(params, samples, params.config, jobs);
    save_checkpoint(tuned, out_path);
    std::printf("fine-tuned on %zu samples -> %s\n", samples.size(), out_path.c_str());
    return 0;
}

int cmd_predict(const std::string& checkpoint, const std::string& db_dir,
                const std::string& query_file, const std::string& hyp_index) {
    ModelParams params = load_checkpoint(checkpoint);
    Database db = load_database(db_dir);
    Catalog cat = load_catalog(db_dir + "/catalog.json");

    Json qj = load_json_file(query_file);
    QuerySpec q = query_from_json(qj);

    std::vector<IndexDef> existing;
    for (const auto& [key, idx] : db.indexes) existing.push_back(idx.def);

    PhysicalPlan plan;
    if (hyp_index.empty()) {
        plan = plan_query(q, cat, existing);
    } else {
        plan = hypothetical_plan(q, cat, existing, {parse_index_flag(hyp_index)});
    }
    plan.database = db.name;
    plan.query_id = q.id;

    // ground truth requires execution; hypothetical plans get their index
    // materialized in memory first (the on-disk database is untouched)
    Database scratch = db;
    if (!hyp_index.empty()) build_index(scratch, parse_index_flag(hyp_index));
    ExecResult res = execute(plan, scratch, CostWeights{});

    CardMode mode = card_mode_from_string(params.card_mode);
    QueryGraph g = encode(res.annotated, mode);
    double pred_log = forward(params, g);
    double predicted_cost = std::exp(pred_log) - 1.0;

    std::printf("predicted_cost_units %.6f\n", std::max(0.0, predicted_cost));
    std::printf("actual_cost_units %.6f\n", res.cost_units);
    std::printf("qerror %.6f\n", qerror(std::exp(pred_log), 1.0 + res.cost_units));
    if (!hyp_index.empty()) std::printf("hypothetical_index %s\n", hyp_index.c_str());
    return 0;
}

int cmd_evaluate(const std::string& checkpoint, const std::string& sample_file,
                 const std::string& out_dir, const std::string& card_mode, int jobs) {
    ModelParams params = load_checkpoint(checkpoint);
    CardMode mode = card_mode_from_string(card_mode.empty() ? params.card_mode : card_mode);
    std::vector<Sample> raw = load_samples(sample_file);
    std::vector<TrainingSample> samples;
    for (const Sample& s : raw)
        samples.push_back(params.registry ? to_onehot_training_sample(s, *params.registry, mode)
                                          : to_training_sample(s, mode));
    Metrics m = metrics_from_samples(params, samples, jobs);

    fs::create_directories(out_dir);
    Json report{{"format", "report_v1"},
                {"samples", samples.size()},
                {"card_mode", to_string(mode)},
                {"metrics", {{"median", m.median}, {"p95", m.p95}, {"max", m.max}, {"count", m.count}}}};
    write_json_file(out_dir + "/report.json", report);
    RunManifest manifest("evaluate");
    manifest.add_artifact(out_dir + "/report.json");
    manifest.write(out_dir + "/manifest.json");
    std::printf("median %.4f p95 %.4f max %.4f over %zu samples\n", m.median, m.p95, m.max, m.count);
    return 0;
}

int cmd_experiment(const std::string& spec_file, const std::string& out_dir, bool index_mode,
                   int jobs) {
    ExperimentSpec spec = ExperimentSpec::from_json(load_json_file(spec_file));
    if (jobs > 0) spec.jobs = jobs;
    if (index_mode) spec.index_mode = true;
    Json report = spec.index_mode ? run_index_experiment(spec, out_dir)
                                  : run_experiment(spec, out_dir);
    std::printf("report written to %s\n", (out_dir + "/report.json").c_str());
    if (report.contains("zero_shot"))
        std::printf("holdout exact median %.4f\n",
                    report["zero_shot"]["exact"]["median"].get<double>());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"zero-shot learned query cost estimation laboratory"};
    app.require_subcommand(1);
    int jobs = 0;
    app.add_option("--jobs", jobs, "worker threads (0 = all cores)");

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic database");
    std::string gen_config, gen_out, gen_name;
    uint64_t gen_seed = 0;
    gen->add_option("--config", gen_config, "genconfig_v1 json")->required();
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--seed", gen_seed, "generation seed")->required();
    gen->add_option("--name", gen_name, "database name (default db_<seed>)");

    // gen-workload
    auto* gw = app.add_subcommand("gen-workload", "generate random queries over a database");
    std::string gw_db, gw_config, gw_out;
    gw->add_option("--db", gw_db, "database directory")->required();
    gw->add_option("--config", gw_config, "workloadconfig_v1 json")->required();
    gw->add_option("--out", gw_out, "output workload file")->required();

    // run-workload
    auto* rw = app.add_subcommand("run-workload", "plan and execute a workload, emit samples");
    std::string rw_db, rw_workload, rw_out, rw_indexes;
    bool rw_wall = false;
    rw->add_option("--db", rw_db, "database directory")->required();
    rw->add_option("--workload", rw_workload, "workload file")->required();
    rw->add_option("--out", rw_out, "output samples file")->required();
    rw->add_option("--indexes", rw_indexes, "json file with indexes to build first");
    rw->add_flag("--wall-clock", rw_wall, "record wall time per query");

    // train
    auto* tr = app.add_subcommand("train", "train the cost model on sample files");
    std::vector<std::string> tr_samples;
    std::string tr_holdout, tr_config, tr_out, tr_mode = "exact", tr_val;
    tr->add_option("--samples", tr_samples, "sample files")->required()->expected(-1);
    tr->add_option("--holdout", tr_holdout, "held-out database name (leak guard)")->required();
    tr->add_option("--model-config", tr_config, "modelconfig_v1 json");
    tr->add_option("--out", tr_out, "checkpoint path")->required();
    tr->add_option("--card-mode", tr_mode, "exact|estimated")
        ->check(CLI::IsMember({"exact", "estimated"}));
    tr->add_option("--validation", tr_val, "validation database (default: last by name)");

    // finetune
    auto* ft = app.add_subcommand("finetune", "continue training on target-database samples");
    std::string ft_ckpt, ft_samples, ft_out;
    ft->add_option("--checkpoint", ft_ckpt, "input checkpoint")->required();
    ft->add_option("--samples", ft_samples, "target-database samples")->required();
    ft->add_option("--out", ft_out, "output checkpoint")->required();

    // predict
    auto* pd = app.add_subcommand("predict", "predict the cost of one query");
    std::string pd_ckpt, pd_db, pd_query, pd_hyp;
    pd->add_option("--checkpoint", pd_ckpt, "model checkpoint")->required();
    pd->add_option("--db", pd_db, "database directory")->required();
    pd->add_option("--query", pd_query, "query json file")->required();
    pd->add_option("--hypothetical-index", pd_hyp, "table.column What-If index");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "q-error metrics of a checkpoint on samples");
    std::string ev_ckpt, ev_samples, ev_out, ev_mode;
    ev->add_option("--checkpoint", ev_ckpt, "model checkpoint")->required();
    ev->add_option("--samples", ev_samples, "sample file")->required();
    ev->add_option("--out", ev_out, "report directory")->required();
    ev->add_option("--card-mode", ev_mode, "override the checkpoint's cardinality mode")
        ->check(CLI::IsMember({"exact", "estimated"}));

    // experiment
    auto* ex = app.add_subcommand("experiment", "full leave-one-database-out experiment");
    std::string ex_spec, ex_out;
    bool ex_index = false;
    ex->add_option("--spec", ex_spec, "experiment_v1 json spec")->required();
    ex->add_option("--out", ex_out, "report directory")->required();
    ex->add_flag("--index-mode", ex_index, "run the What-If index experiment");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2; // usage error
    }

    try {
        if (*gen) return cmd_gen_data(gen_config, gen_out, gen_seed, gen_name);
        if (*gw) return cmd_gen_workload(gw_db, gw_config, gw_out);
        if (*rw) return cmd_run_workload(rw_db, rw_workload, rw_out, rw_indexes, rw_wall, jobs);
        if (*tr) return cmd_train(tr_samples, tr_holdout, tr_config, tr_out, tr_mode, tr_val, jobs);
        if (*ft) return cmd_finetune(ft_ckpt, ft_samples, ft_out, jobs);
        if (*pd) return cmd_predict(pd_ckpt, pd_db, pd_query, pd_hyp);
        if (*ev) return cmd_evaluate(ev_ckpt, ev_samples, ev_out, ev_mode, jobs);
        if (*ex) return cmd_experiment(ex_spec, ex_out, ex_index, jobs);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
