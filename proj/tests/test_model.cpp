#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "test_helpers.hpp"
#include "zsce/model.hpp"
#include "zsce/rng.hpp"

using namespace zsce;
using namespace zsce::testing;

namespace {

GraphNode make_node(uint32_t id, NodeType type, std::vector<double> feats) {
    GraphNode n;
    n.id = id;
    n.type = type;
    n.features = std::move(feats);
    return n;
}

/// Random little graph shaped like a real encoding: scan ops with tables and
/// predicates under an aggregate root.
QueryGraph random_graph(Rng& rng) {
    QueryGraph g;
    auto add = [&](NodeType t, std::vector<double> f) {
        uint32_t id = static_cast<uint32_t>(g.nodes.size());
        g.nodes.push_back(make_node(id, t, std::move(f)));
        return id;
    };
    auto feats = [&](size_t dim) {
        std::vector<double> f(dim);
        for (double& x : f) x = rng.uniform(-1.0, 1.0);
        return f;
    };
    size_t scans = 1 + rng.below(3);
    std::vector<uint32_t> scan_ops;
    for (size_t s = 0; s < scans; ++s) {
        uint32_t table = add(NodeType::Table, feats(2));
        uint32_t col = add(NodeType::Column, feats(6));
        uint32_t pred = add(NodeType::Predicate, feats(10));
        g.edges.emplace_back(col, pred);
        uint32_t op = add(NodeType::PlanOp, feats(6));
        g.edges.emplace_back(table, op);
        g.edges.emplace_back(pred, op);
        scan_ops.push_back(op);
    }
    uint32_t current = scan_ops[0];
    for (size_t s = 1; s < scans; ++s) {
        uint32_t join = add(NodeType::PlanOp, feats(6));
        g.edges.emplace_back(current, join);
        g.edges.emplace_back(scan_ops[s], join);
        current = join;
    }
    uint32_t agg = add(NodeType::Aggregation, feats(5));
    uint32_t root = add(NodeType::PlanOp, feats(6));
    g.edges.emplace_back(current, root);
    g.edges.emplace_back(agg, root);
    g.root = root;
    return g;
}

QueryGraph single_node_graph(std::vector<double> feats) {
    QueryGraph g;
    g.nodes.push_back(make_node(0, NodeType::PlanOp, std::move(feats)));
    g.root = 0;
    return g;
}

} // namespace

TEST_CASE("single-node forward is readout of encoder") {
    ModelConfig cfg;
    cfg.hidden_dim = 8;
    cfg.seed = 1;
    ModelParams p = init_params(cfg, kGraphSchemaV1);
    std::vector<double> feats{0.3, -0.2, 0.5, 1.0, 0.0, 0.7};
    QueryGraph g = single_node_graph(feats);

    // independent evaluation of readout(enc(x)) from the raw tensors
    auto h = static_cast<size_t>(cfg.hidden_dim);
    auto mlp = [&](const std::string& prefix, const std::vector<double>& x, size_t in_dim) {
        const double* w1 = p.data(p.tensor(prefix + "_l1_w"));
        const double* b1 = p.data(p.tensor(prefix + "_l1_b"));
        const double* w2 = p.data(p.tensor(prefix + "_l2_w"));
        const double* b2 = p.data(p.tensor(prefix + "_l2_b"));
        std::vector<double> a(h);
        for (size_t r = 0; r < h; ++r) {
            double z = b1[r];
            for (size_t c = 0; c < in_dim; ++c) z += w1[r * in_dim + c] * x[c];
            a[r] = z > 0 ? z : 0;
        }
        size_t out_dim = p.tensor(prefix + "_l2_w").rows;
        std::vector<double> y(out_dim);
        for (size_t r = 0; r < out_dim; ++r) {
            double z = b2[r];
            for (size_t c = 0; c < h; ++c) z += w2[r * h + c] * a[c];
            y[r] = z;
        }
        return y;
    };
    std::vector<double> enc = mlp("enc0", feats, 6);
    std::vector<double> out = mlp("readout", enc, h);
    CHECK(forward(p, g) == doctest::Approx(out[0]).epsilon(1e-12));
}

TEST_CASE("three-node chain with hand-fixed tiny weights") {
    // H = 2, every weight 0.1, biases 0. Chain: leaf column -> predicate ->
    // plan op (root). Features of ones make the arithmetic checkable by hand.
    ModelConfig cfg;
    cfg.hidden_dim = 2;
    cfg.seed = 1;
    ModelParams p = init_params(cfg, kGraphSchemaV1);
    std::fill(p.flat.begin(), p.flat.end(), 0.1);
    for (const TensorSpec& t : p.tensors) // biases back to zero
        if (t.cols == 1) std::fill(p.data(t), p.data(t) + t.rows, 0.0);

    QueryGraph g;
    g.nodes.push_back(make_node(0, NodeType::Column, std::vector<double>(6, 1.0)));
    g.nodes.push_back(make_node(1, NodeType::Predicate, std::vector<double>(10, 1.0)));
    g.nodes.push_back(make_node(2, NodeType::PlanOp, std::vector<double>(6, 1.0)));
    g.edges = {{0, 1}, {1, 2}};
    g.root = 2;

    // hand evaluation:
    // column (leaf): enc l1: 0.1*6 = 0.6 (x2), relu, l2: 0.1*(0.6+0.6) = 0.12
    //   -> hidden_col = (0.12, 0.12)
    // predicate: enc: l1 0.1*10 = 1.0, l2 0.1*2.0 = 0.2 -> enc = (0.2, 0.2)
    //   combine in = concat((0.2,0.2),(0.12,0.12)): l1 = 0.1*0.64 = 0.064
    //   l2 = 0.1*(0.064+0.064) = 0.0128 -> hidden_pred = (0.0128, 0.0128)
    // plan op: enc: l1 0.1*6=0.6, l2 0.1*1.2=0.12 -> enc = (0.12, 0.12)
    //   combine in = concat((0.12,0.12),(0.0128,0.0128)): l1 = 0.1*0.2656
    //   = 0.02656; l2 = 0.1*0.05312 = 0.005312 -> hidden_root
    // readout: l1 = 0.1*0.010624 = 0.0010624, l2 = 0.1*0.0021248 = 0.00021248
    double expected = 0.00021248;
    CHECK(forward(p, g) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("child order permutations do not change the forward value") {
    Rng rng(2024);
    ModelConfig cfg;
    cfg.hidden_dim = 16;
    cfg.seed = 3;
    ModelParams p = init_params(cfg, kGraphSchemaV1);
    for (int trial = 0; trial < 20; ++trial) {
        QueryGraph g = random_graph(rng);
        double base = forward(p, g);
        QueryGraph shuffled = g;
        rng.shuffle(shuffled.edges); // edge list order must not matter
        CHECK(forward(p, shuffled) == base);
    }
}

TEST_CASE("gradients match central finite differences") {
    Rng rng(77);
    ModelConfig cfg;
    cfg.hidden_dim = 6;
    cfg.seed = 5;
    for (int trial = 0; trial < 10; ++trial) {
        ModelConfig c = cfg;
        c.seed = 100 + static_cast<uint64_t>(trial);
        ModelParams p = init_params(c, kGraphSchemaV1);
        QueryGraph g = random_graph(rng);
        double label = rng.uniform(0.0, 10.0);

        std::vector<TrainingSample> samples(1);
        samples[0].graph = g;
        samples[0].label = label;
        std::vector<uint32_t> idx{0};
        std::vector<double> grad;
        batch_backward(p, samples, idx, grad, 1);

        const double eps = 1e-4;
        size_t bad = 0;
        for (size_t k = 0; k < p.flat.size(); ++k) {
            double saved = p.flat[k];
            p.flat[k] = saved + eps;
            double up = forward(p, g);
            p.flat[k] = saved - eps;
            double dn = forward(p, g);
            p.flat[k] = saved;
            double lup = (up - label) * (up - label);
            double ldn = (dn - label) * (dn - label);
            double fd = (lup - ldn) / (2 * eps);
            double denom = std::max({std::abs(fd), std::abs(grad[k]), 1e-6});
            if (std::abs(fd - grad[k]) / denom > 1e-3) ++bad;
        }
        CHECK(bad == 0);
    }
}

TEST_CASE("zeroed readout makes the prediction the bias; gradients respect that") {
    ModelConfig cfg;
    cfg.hidden_dim = 8;
    cfg.seed = 9;
    ModelParams p = init_params(cfg, kGraphSchemaV1);
    const TensorSpec& w2 = p.tensor("readout_l2_w");
    std::fill(p.data(w2), p.data(w2) + w2.rows * w2.cols, 0.0);
    double label = 4.5;
    p.data(p.tensor("readout_l2_b"))[0] = label;

    Rng rng(5);
    QueryGraph g = random_graph(rng);
    CHECK(forward(p, g) == label);

    std::vector<TrainingSample> samples(1);
    samples[0].graph = g;
    samples[0].label = label;
    std::vector<uint32_t> idx{0};
    std::vector<double> grad;
    batch_backward(p, samples, idx, grad, 1);
    // prediction == label: the loss is at a stationary point
    for (double gk : grad) CHECK(gk == 0.0);
}

TEST_CASE("a batch of identical samples has the single-sample gradient") {
    Rng rng(6);
    ModelConfig cfg;
    cfg.hidden_dim = 8;
    cfg.seed = 10;
    ModelParams p = init_params(cfg, kGraphSchemaV1);
    QueryGraph g = random_graph(rng);

    std::vector<TrainingSample> one(1);
    one[0].graph = g;
    one[0].label = 2.0;
    std::vector<double> g1;
    std::vector<uint32_t> i1{0};
    batch_backward(p, one, i1, g1, 1);

    std::vector<TrainingSample> many(5, one[0]);
    std::vector<uint32_t> i5{0, 1, 2, 3, 4};
    std::vector<double> g5;
    batch_backward(p, many, i5, g5, 1);

    for (size_t k = 0; k < g1.size(); ++k) CHECK(g5[k] == doctest::Approx(g1[k]).epsilon(1e-12));
}

TEST_CASE("training memorizes a single repeated sample") {
    Rng rng(7);
    QueryGraph g = random_graph(rng);
    std::vector<TrainingSample> samples(50);
    for (auto& s : samples) {
        s.graph = g;
        s.label = 5.25;
        s.origin_database = "d0";
    }
    ModelConfig cfg;
    cfg.hidden_dim = 16;
    cfg.epochs = 200;
    cfg.batch_size = 16;
    cfg.seed = 11;
    TrainHistory hist;
    train(samples, cfg, kGraphSchemaV1, {}, &hist);
    REQUIRE(!hist.train_loss.empty());
    CHECK(hist.train_loss.back() < 1e-3);
}

TEST_CASE("zero learning rate leaves parameters untouched") {
    Rng rng(8);
    std::vector<TrainingSample> samples(8);
    for (auto& s : samples) {
        s.graph = random_graph(rng);
        s.label = 1.0;
        s.origin_database = "d0";
    }
    ModelConfig cfg;
    cfg.hidden_dim = 8;
    cfg.epochs = 3;
    cfg.learning_rate = 0.0;
    cfg.seed = 12;
    ModelParams trained = train(samples, cfg, kGraphSchemaV1, {});
    ModelParams fresh = init_params(cfg, kGraphSchemaV1);
    // the readout bias is recentered at the label mean before the first step
    fresh.data(fresh.tensor("readout_l2_b"))[0] = 1.0;
    CHECK(trained.flat == fresh.flat);
}

TEST_CASE("training is deterministic in the seed") {
    Rng rng(9);
    std::vector<TrainingSample> samples(40);
    for (size_t i = 0; i < samples.size(); ++i) {
        samples[i].graph = random_graph(rng);
        samples[i].label = rng.uniform(0.0, 8.0);
        samples[i].origin_database = i % 4 == 0 ? "v" : "d";
    }
    ModelConfig cfg;
    cfg.hidden_dim = 8;
    cfg.epochs = 5;
    cfg.seed = 13;
    ModelParams a = train(samples, cfg, kGraphSchemaV1, {"v"});
    ModelParams b = train(samples, cfg, kGraphSchemaV1, {"v"});
    CHECK(a.flat == b.flat);
}

TEST_CASE("leak guard rejects held-out samples at training time") {
    Rng rng(10);
    std::vector<TrainingSample> samples(4);
    for (auto& s : samples) {
        s.graph = random_graph(rng);
        s.label = 1.0;
        s.origin_database = "held";
    }
    ModelConfig cfg;
    cfg.hidden_dim = 4;
    cfg.epochs = 1;
    CHECK_THROWS_WITH_AS(train(samples, cfg, kGraphSchemaV1, {}, nullptr, "held"),
                         doctest::Contains("leak guard"), std::runtime_error);
}

TEST_CASE("finetune: zero epochs is the identity, originals stay untouched") {
    Rng rng(11);
    std::vector<TrainingSample> samples(10);
    for (auto& s : samples) {
        s.graph = random_graph(rng);
        s.label = 3.0;
        s.origin_database = "t";
    }
    ModelConfig cfg;
    cfg.hidden_dim = 8;
    cfg.epochs = 6;
    cfg.seed = 14;
    ModelParams base = train(samples, cfg, kGraphSchemaV1, {});
    std::vector<double> saved = base.flat;

    ModelConfig zero = cfg;
    zero.epochs = 0;
    ModelParams untouched = finetune(base, samples, zero);
    CHECK(untouched.flat == base.flat);

    ModelConfig few = cfg;
    few.epochs = 50; // clamps to 20
    ModelParams tuned = finetune(base, samples, few);
    CHECK(base.flat == saved); // copy-on-write
    CHECK(tuned.flat != base.flat);
    CHECK_THROWS(finetune(base, {}, cfg));
}

TEST_CASE("checkpoints round-trip bit-exactly and reject mismatches") {
    Rng rng(12);
    ModelConfig cfg;
    cfg.hidden_dim = 12;
    cfg.seed = 15;
    ModelParams p = init_params(cfg, kGraphSchemaV1);
    p.card_mode = "estimated";
    QueryGraph g = random_graph(rng);
    double before = forward(p, g);

    std::string path = "test_ckpt.bin";
    save_checkpoint(p, path);
    ModelParams loaded = load_checkpoint(path);
    CHECK(loaded.flat == p.flat);
    CHECK(loaded.card_mode == "estimated");
    CHECK(forward(loaded, g) == before); // bit-exact

    // corrupt header: flip a byte inside the json region
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(12);
        f.put('#');
    }
    CHECK_THROWS_AS(load_checkpoint(path), IoError);

    // config mismatch is reported explicitly
    ModelConfig other = cfg;
    other.hidden_dim = 6;
    CHECK_THROWS_AS(require_config_compatible(p, other), ConfigError);
    std::filesystem::remove(path);
}

TEST_CASE("batch gradients are identical for serial and parallel evaluation") {
    Rng rng(13);
    ModelConfig cfg;
    cfg.hidden_dim = 16;
    cfg.seed = 16;
    ModelParams p = init_params(cfg, kGraphSchemaV1);
    std::vector<TrainingSample> samples(32);
    std::vector<uint32_t> idx(32);
    for (size_t i = 0; i < samples.size(); ++i) {
        samples[i].graph = random_graph(rng);
        samples[i].label = rng.uniform(0.0, 6.0);
        idx[i] = static_cast<uint32_t>(i);
    }
    std::vector<double> serial, parallel;
    double l1 = batch_backward(p, samples, idx, serial, 1);
    double l2 = batch_backward(p, samples, idx, parallel, 4);
    CHECK(l1 == l2);
    CHECK(serial == parallel);
}
