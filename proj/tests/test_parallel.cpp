#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "test_helpers.hpp"
#include "zsce/experiment.hpp"
#include "zsce/parallel.hpp"

using namespace zsce;
using namespace zsce::testing;

namespace fs = std::filesystem;

TEST_CASE("parallel_for covers every index exactly once") {
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), 4, [&](size_t i) { hits[i]++; });
    for (int h : hits) CHECK(h == 1);
    parallel_for(0, 4, [&](size_t) { FAIL("no work expected"); });
}

TEST_CASE("parallel_for propagates the first exception") {
    CHECK_THROWS_WITH_AS(
        parallel_for(64, 4,
                     [ ](size_t i) {
                         if (i == 13) throw std::runtime_error("boom");
                     }),
        "boom", std::runtime_error);
}

TEST_CASE("workload execution is identical on the serial and parallel paths") {
    DatabaseSpec d{"par", 91, tiny_gen_config()};
    ExperimentSpec spec;
    spec.databases.push_back(d);
    spec.databases.push_back({"par2", 92, tiny_gen_config()});
    spec.databases.push_back({"par3", 93, tiny_gen_config()});
    spec.holdout = "par3";
    spec.validation = "par2";
    spec.queries_per_database = 40;

    DbArtifacts serial = run_db_pipeline(d, spec, false, 1);
    DbArtifacts parallel = run_db_pipeline(d, spec, false, 4);
    REQUIRE(serial.samples.size() == parallel.samples.size());
    for (size_t i = 0; i < serial.samples.size(); ++i) {
        CHECK(serial.samples[i].cost_units == parallel.samples[i].cost_units);
        CHECK(plan_to_json(serial.samples[i].plan).dump() ==
              plan_to_json(parallel.samples[i].plan).dump());
    }
}

TEST_CASE("sample files written from parallel runs are byte-identical to serial ones") {
    DatabaseSpec d{"bytes", 94, tiny_gen_config()};
    ExperimentSpec spec;
    spec.databases.push_back(d);
    spec.databases.push_back({"b2", 95, tiny_gen_config()});
    spec.databases.push_back({"b3", 96, tiny_gen_config()});
    spec.holdout = "b3";
    spec.validation = "b2";
    spec.queries_per_database = 30;

    save_samples(run_db_pipeline(d, spec, false, 1).samples, "serial_samples.jsonl");
    save_samples(run_db_pipeline(d, spec, false, 4).samples, "parallel_samples.jsonl");
    std::ifstream a("serial_samples.jsonl", std::ios::binary);
    std::ifstream b("parallel_samples.jsonl", std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
    fs::remove("serial_samples.jsonl");
    fs::remove("parallel_samples.jsonl");
}
