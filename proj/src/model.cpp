#include "zsce/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "zsce/eval.hpp"
#include "zsce/parallel.hpp"
#include "zsce/rng.hpp"

namespace zsce {

void ModelConfig::validate() const {
    if (hidden_dim < 1) throw ConfigError("hidden_dim must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (!(learning_rate >= 0)) throw ConfigError("learning_rate must be >= 0");
}

Json ModelConfig::to_json() const {
    return Json{{"version", "modelconfig_v1"}, {"hidden_dim", hidden_dim},
                {"learning_rate", learning_rate}, {"batch_size", batch_size},
                {"epochs", epochs},             {"patience", patience},
                {"seed", seed}};
}

ModelConfig ModelConfig::from_json(const Json& j) {
    require_keys(j, {"version", "hidden_dim", "learning_rate", "batch_size", "epochs", "patience",
                     "seed"},
                 "model config");
    require_version(j, "modelconfig_v1", "model config");
    ModelConfig c;
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.patience = j.value("patience", c.patience);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

const TensorSpec& ModelParams::tensor(const std::string& name) const {
    for (const TensorSpec& t : tensors)
        if (t.name == name) return t;
    throw std::runtime_error("unknown tensor " + name);
}

namespace {

// Tensor layout indices, fixed per node type; resolving by name on the hot
// path would be silly.
struct Layout {
    // per type: enc_l1_w, enc_l1_b, enc_l2_w, enc_l2_b, then combine likewise,
    // then readout_l1_w/b, readout_l2_w/b
    static constexpr size_t kPerType = 4;
    size_t enc(size_t type, size_t part) const { return type * kPerType + part; }
    size_t comb(size_t type, size_t part) const {
        return kNodeTypeCount * kPerType + type * kPerType + part;
    }
    size_t readout(size_t part) const { return 2 * kNodeTypeCount * kPerType + part; }
};
constexpr Layout kLayout;

std::vector<TensorSpec> make_layout(int hidden, const std::array<int, kNodeTypeCount>& dims) {
    std::vector<TensorSpec> layout;
    size_t offset = 0;
    auto push = [&](const std::string& name, size_t rows, size_t cols) {
        layout.push_back({name, rows, cols, offset});
        offset += rows * cols;
    };
    auto h = static_cast<size_t>(hidden);
    for (size_t i = 0; i < kNodeTypeCount; ++i) {
        std::string p = "enc" + std::to_string(i);
        push(p + "_l1_w", h, static_cast<size_t>(dims[i]));
        push(p + "_l1_b", h, 1);
        push(p + "_l2_w", h, h);
        push(p + "_l2_b", h, 1);
    }
    for (size_t i = 0; i < kNodeTypeCount; ++i) {
        std::string p = "comb" + std::to_string(i);
        push(p + "_l1_w", h, 2 * h);
        push(p + "_l1_b", h, 1);
        push(p + "_l2_w", h, h);
        push(p + "_l2_b", h, 1);
    }
    push("readout_l1_w", h, h);
    push("readout_l1_b", h, 1);
    push("readout_l2_w", 1, h);
    push("readout_l2_b", 1, 1);
    return layout;
}

void matvec(const double* w, size_t rows, size_t cols, const double* x, const double* b, double* y) {
    for (size_t r = 0; r < rows; ++r) {
        double acc = b[r];
        const double* wr = w + r * cols;
        for (size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
        y[r] = acc;
    }
}

struct NodeTape {
    std::vector<double> x;       // dense input features
    std::vector<double> enc_z1;  // encoder layer-1 pre-activation
    std::vector<double> enc_out;
    std::vector<double> comb_in; // concat(enc_out, child hidden sum)
    std::vector<double> comb_z1;
    std::vector<double> hidden;
    bool internal = false;
};

/// Per-sample evaluation state, reusable across calls to avoid allocation
/// churn in training loops.
struct Workspace {
    std::vector<std::vector<uint32_t>> children;
    std::vector<std::vector<double>> hiddens;
    std::vector<NodeTape> tapes;
    std::vector<std::vector<double>> hidden_grad;
    std::vector<double> z1, a1, z2, a2, comb_in, scratch_feats, rz1, ra1, da, dz;

    void prepare(const QueryGraph& g, size_t h, bool with_tapes) {
        children.assign(g.nodes.size(), {});
        for (const auto& [child, parent] : g.edges) {
            if (child >= parent)
                throw std::runtime_error("graph edges must point from lower to higher ids");
            children[parent].push_back(child);
        }
        for (auto& c : children) std::sort(c.begin(), c.end());
        hiddens.assign(g.nodes.size(), {});
        if (with_tapes) tapes.assign(g.nodes.size(), {});
        z1.resize(h);
        a1.resize(h);
        z2.resize(h);
        a2.resize(h);
        comb_in.resize(2 * h);
        rz1.resize(h);
        ra1.resize(h);
        da.resize(2 * h);
        dz.resize(h);
    }
};

const double* dense_features(const GraphNode& n, size_t dim, std::vector<double>& scratch) {
    if (n.sparse_dim < 0) {
        if (n.features.size() != dim)
            throw std::runtime_error("feature dimension mismatch on node " + std::to_string(n.id));
        return n.features.data();
    }
    if (static_cast<size_t>(n.sparse_dim) != dim)
        throw std::runtime_error("sparse feature dimension mismatch on node " + std::to_string(n.id));
    scratch.assign(dim, 0.0);
    if (n.sparse_hot >= 0) scratch[static_cast<size_t>(n.sparse_hot)] = 1.0;
    return scratch.data();
}

double run_forward(const ModelParams& p, const QueryGraph& g, Workspace& ws, bool with_tapes) {
    if (g.schema != p.schema)
        throw std::runtime_error("graph schema '" + g.schema + "' does not match model schema '" +
                                 p.schema + "'");
    auto h = static_cast<size_t>(p.config.hidden_dim);
    ws.prepare(g, h, with_tapes);

    for (const GraphNode& n : g.nodes) {
        auto ti = static_cast<size_t>(n.type);
        auto dim = static_cast<size_t>(p.feat_dims[ti]);
        const double* x = dense_features(n, dim, ws.scratch_feats);

        const TensorSpec& e1w = p.tensors[kLayout.enc(ti, 0)];
        matvec(p.data(e1w), h, dim, x, p.data(p.tensors[kLayout.enc(ti, 1)]), ws.z1.data());
        for (size_t i = 0; i < h; ++i) ws.a1[i] = ws.z1[i] > 0 ? ws.z1[i] : 0.0;
        std::vector<double> enc(h);
        matvec(p.data(p.tensors[kLayout.enc(ti, 2)]), h, h, ws.a1.data(),
               p.data(p.tensors[kLayout.enc(ti, 3)]), enc.data());

        NodeTape* tape = with_tapes ? &ws.tapes[n.id] : nullptr;
        if (tape) {
            tape->x.assign(x, x + dim);
            tape->enc_z1 = ws.z1;
            tape->enc_out = enc;
            tape->internal = false;
        }

        const auto& kids = ws.children[n.id];
        if (kids.empty()) {
            ws.hiddens[n.id] = std::move(enc);
        } else {
            std::copy(enc.begin(), enc.end(), ws.comb_in.begin());
            double* sum = ws.comb_in.data() + h;
            std::fill(sum, sum + h, 0.0);
            for (uint32_t c : kids) {
                const std::vector<double>& ch = ws.hiddens[c];
                for (size_t i = 0; i < h; ++i) sum[i] += ch[i];
            }
            matvec(p.data(p.tensors[kLayout.comb(ti, 0)]), h, 2 * h, ws.comb_in.data(),
                   p.data(p.tensors[kLayout.comb(ti, 1)]), ws.z2.data());
            for (size_t i = 0; i < h; ++i) ws.a2[i] = ws.z2[i] > 0 ? ws.z2[i] : 0.0;
            ws.hiddens[n.id].resize(h);
            matvec(p.data(p.tensors[kLayout.comb(ti, 2)]), h, h, ws.a2.data(),
                   p.data(p.tensors[kLayout.comb(ti, 3)]), ws.hiddens[n.id].data());
            if (tape) {
                tape->internal = true;
                tape->comb_in.assign(ws.comb_in.begin(), ws.comb_in.end());
                tape->comb_z1 = ws.z2;
            }
        }
        if (tape) tape->hidden = ws.hiddens[n.id];
    }

    const std::vector<double>& root = ws.hiddens[g.root];
    matvec(p.data(p.tensors[kLayout.readout(0)]), h, h, root.data(),
           p.data(p.tensors[kLayout.readout(1)]), ws.rz1.data());
    for (size_t i = 0; i < h; ++i) ws.ra1[i] = ws.rz1[i] > 0 ? ws.rz1[i] : 0.0;
    double out = p.data(p.tensors[kLayout.readout(3)])[0];
    const double* l2w = p.data(p.tensors[kLayout.readout(2)]);
    for (size_t i = 0; i < h; ++i) out += l2w[i] * ws.ra1[i];
    return out;
}

void run_backward(const ModelParams& p, const QueryGraph& g, Workspace& ws, double dLdPred,
                  std::vector<double>& grad) {
    auto h = static_cast<size_t>(p.config.hidden_dim);
    auto W = [&](size_t t) { return p.data(p.tensors[t]); };
    auto G = [&](size_t t) { return grad.data() + p.tensors[t].offset; };

    ws.hidden_grad.assign(g.nodes.size(), std::vector<double>(h, 0.0));

    { // readout
        const std::vector<double>& root_hidden = ws.tapes[g.root].hidden;
        double* g_l2w = G(kLayout.readout(2));
        G(kLayout.readout(3))[0] += dLdPred;
        const double* l2w = W(kLayout.readout(2));
        for (size_t i = 0; i < h; ++i) {
            g_l2w[i] += dLdPred * ws.ra1[i];
            ws.da[i] = dLdPred * l2w[i];
        }
        for (size_t i = 0; i < h; ++i) ws.dz[i] = ws.rz1[i] > 0 ? ws.da[i] : 0.0;
        double* g_l1w = G(kLayout.readout(0));
        double* g_l1b = G(kLayout.readout(1));
        const double* l1w = W(kLayout.readout(0));
        std::vector<double>& root_grad = ws.hidden_grad[g.root];
        for (size_t r = 0; r < h; ++r) {
            g_l1b[r] += ws.dz[r];
            const double* wr = l1w + r * h;
            double* gr = g_l1w + r * h;
            double d = ws.dz[r];
            for (size_t c = 0; c < h; ++c) {
                gr[c] += d * root_hidden[c];
                root_grad[c] += d * wr[c];
            }
        }
    }

    std::vector<double> d_enc_out(h), da2(h), dz2(h), da1(h), dz1(h), d_comb_in(2 * h);
    for (size_t ni = g.nodes.size(); ni-- > 0;) {
        const GraphNode& n = g.nodes[ni];
        const NodeTape& tape = ws.tapes[ni];
        auto ti = static_cast<size_t>(n.type);
        auto dim = static_cast<size_t>(p.feat_dims[ti]);
        const std::vector<double>& dh = ws.hidden_grad[ni];

        if (tape.internal) {
            const double* l2w = W(kLayout.comb(ti, 2));
            double* g_l2w = G(kLayout.comb(ti, 2));
            double* g_l2b = G(kLayout.comb(ti, 3));
            std::fill(da2.begin(), da2.end(), 0.0);
            for (size_t r = 0; r < h; ++r) {
                double d = dh[r];
                g_l2b[r] += d;
                const double* wr = l2w + r * h;
                double* gr = g_l2w + r * h;
                for (size_t c = 0; c < h; ++c) {
                    double a = tape.comb_z1[c] > 0 ? tape.comb_z1[c] : 0.0;
                    gr[c] += d * a;
                    da2[c] += d * wr[c];
                }
            }
            for (size_t i = 0; i < h; ++i) dz2[i] = tape.comb_z1[i] > 0 ? da2[i] : 0.0;
            const double* l1w = W(kLayout.comb(ti, 0));
            double* g_l1w = G(kLayout.comb(ti, 0));
            double* g_l1b = G(kLayout.comb(ti, 1));
            std::fill(d_comb_in.begin(), d_comb_in.end(), 0.0);
            for (size_t r = 0; r < h; ++r) {
                double d = dz2[r];
                g_l1b[r] += d;
                const double* wr = l1w + r * 2 * h;
                double* gr = g_l1w + r * 2 * h;
                for (size_t c = 0; c < 2 * h; ++c) {
                    gr[c] += d * tape.comb_in[c];
                    d_comb_in[c] += d * wr[c];
                }
            }
            std::copy(d_comb_in.begin(), d_comb_in.begin() + static_cast<long>(h), d_enc_out.begin());
            // the summed child states pass the tail gradient to every child
            for (uint32_t c : ws.children[ni]) {
                std::vector<double>& cg = ws.hidden_grad[c];
                for (size_t i = 0; i < h; ++i) cg[i] += d_comb_in[h + i];
            }
        } else {
            std::copy(dh.begin(), dh.end(), d_enc_out.begin());
        }

        const double* l2w = W(kLayout.enc(ti, 2));
        double* g_l2w = G(kLayout.enc(ti, 2));
        double* g_l2b = G(kLayout.enc(ti, 3));
        std::fill(da1.begin(), da1.end(), 0.0);
        for (size_t r = 0; r < h; ++r) {
            double d = d_enc_out[r];
            g_l2b[r] += d;
            const double* wr = l2w + r * h;
            double* gr = g_l2w + r * h;
            for (size_t c = 0; c < h; ++c) {
                double a = tape.enc_z1[c] > 0 ? tape.enc_z1[c] : 0.0;
                gr[c] += d * a;
                da1[c] += d * wr[c];
            }
        }
        for (size_t i = 0; i < h; ++i) dz1[i] = tape.enc_z1[i] > 0 ? da1[i] : 0.0;
        double* g_l1w = G(kLayout.enc(ti, 0));
        double* g_l1b = G(kLayout.enc(ti, 1));
        for (size_t r = 0; r < h; ++r) {
            double d = dz1[r];
            g_l1b[r] += d;
            double* gr = g_l1w + r * dim;
            for (size_t c = 0; c < dim; ++c) gr[c] += d * tape.x[c];
        }
    }
}

} // namespace

ModelParams init_params(const ModelConfig& cfg, const std::string& schema) {
    cfg.validate();
    ModelParams p;
    p.config = cfg;
    p.schema = schema;
    p.feat_dims = feature_dims(schema);
    p.tensors = make_layout(cfg.hidden_dim, p.feat_dims);
    size_t total = 0;
    for (const TensorSpec& t : p.tensors) total += t.rows * t.cols;
    p.flat.assign(total, 0.0);

    Rng rng(derive_seed(cfg.seed, fnv1a("init")));
    for (const TensorSpec& t : p.tensors) {
        if (t.cols == 1) continue; // biases stay zero
        double scale = std::sqrt(6.0 / static_cast<double>(t.rows + t.cols));
        double* w = p.data(t);
        for (size_t i = 0; i < t.rows * t.cols; ++i) w[i] = rng.uniform(-scale, scale);
    }
    return p;
}

double forward(const ModelParams& params, const QueryGraph& graph) {
    Workspace ws;
    return run_forward(params, graph, ws, false);
}

double backward(const ModelParams& params, const QueryGraph& graph, double dLdPred,
                std::vector<double>& grad) {
    if (grad.size() != params.flat.size()) grad.assign(params.flat.size(), 0.0);
    Workspace ws;
    double pred = run_forward(params, graph, ws, true);
    run_backward(params, graph, ws, dLdPred, grad);
    return pred;
}

double batch_backward(const ModelParams& params, const std::vector<TrainingSample>& samples,
                      std::span<const uint32_t> indices, std::vector<double>& grad, int jobs) {
    if (indices.empty()) throw std::runtime_error("batch_backward: empty batch");
    if (grad.size() != params.flat.size()) grad.resize(params.flat.size());
    std::fill(grad.begin(), grad.end(), 0.0);

    size_t count = indices.size();
    static thread_local Workspace tl_ws; // reused across batches per worker
    std::vector<std::vector<double>> sample_grads(count);
    std::vector<double> preds(count);
    parallel_for(count, jobs, [&](size_t i) {
        const TrainingSample& s = samples[indices[i]];
        sample_grads[i].assign(params.flat.size(), 0.0);
        double pred = run_forward(params, s.graph, tl_ws, true);
        if (!std::isfinite(pred))
            throw std::runtime_error("non-finite prediction for sample " +
                                     std::to_string(indices[i]) + " from " + s.origin_database);
        double d = 2.0 * (pred - s.label) / static_cast<double>(count);
        run_backward(params, s.graph, tl_ws, d, sample_grads[i]);
        preds[i] = pred;
    });

    double loss = 0;
    for (size_t i = 0; i < count; ++i) { // fixed reduction order
        const std::vector<double>& sg = sample_grads[i];
        for (size_t k = 0; k < grad.size(); ++k) grad[k] += sg[k];
        double err = preds[i] - samples[indices[i]].label;
        loss += err * err;
    }
    return loss / static_cast<double>(count);
}

namespace {

struct Adam {
    std::vector<double> m, v;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    uint64_t t = 0;

    explicit Adam(size_t n) : m(n, 0.0), v(n, 0.0) {}

    void step(std::vector<double>& params, const std::vector<double>& grad, double lr) {
        ++t;
        double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (size_t i = 0; i < params.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
            params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }
};

double run_epoch(ModelParams& params, const std::vector<TrainingSample>& samples,
                 const std::vector<uint32_t>& order, Adam& adam, double lr, int batch_size,
                 int jobs) {
    size_t n = order.size();
    std::vector<double> grad(params.flat.size());
    double loss_sum = 0;
    for (size_t start = 0; start < n; start += static_cast<size_t>(batch_size)) {
        size_t count = std::min<size_t>(static_cast<size_t>(batch_size), n - start);
        std::span<const uint32_t> batch(order.data() + start, count);
        loss_sum += batch_backward(params, samples, batch, grad, jobs) * static_cast<double>(count);
        adam.step(params.flat, grad, lr);
    }
    return loss_sum / static_cast<double>(n);
}

double validation_median_q(const ModelParams& params, const std::vector<TrainingSample>& val,
                           int jobs) {
    std::vector<double> preds = predict_many(params, val, jobs);
    std::vector<double> qs(val.size());
    for (size_t i = 0; i < val.size(); ++i)
        qs[i] = qerror(std::exp(preds[i]), std::exp(val[i].label));
    return quantile_type7(std::move(qs), 0.5);
}

} // namespace

ModelParams train(const std::vector<TrainingSample>& samples, const ModelConfig& cfg,
                  const std::string& schema, const std::set<std::string>& validation_databases,
                  TrainHistory* history, const std::string& holdout_guard, int jobs) {
    cfg.validate();
    std::vector<uint32_t> train_idx;
    std::vector<TrainingSample> val;
    for (size_t i = 0; i < samples.size(); ++i) {
        const TrainingSample& s = samples[i];
        if (!holdout_guard.empty() && s.origin_database == holdout_guard)
            throw std::runtime_error("leak guard: sample from held-out database '" + holdout_guard +
                                     "' reached training");
        if (validation_databases.count(s.origin_database))
            val.push_back(s);
        else
            train_idx.push_back(static_cast<uint32_t>(i));
    }
    if (train_idx.empty()) throw std::runtime_error("training set is empty");

    ModelParams params = init_params(cfg, schema);

    // start the readout bias at the mean training label; saves warmup epochs
    double label_mean = 0;
    for (uint32_t i : train_idx) label_mean += samples[i].label;
    label_mean /= static_cast<double>(train_idx.size());
    params.data(params.tensor("readout_l2_b"))[0] = label_mean;

    Adam adam(params.flat.size());
    ModelParams best = params;
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = -1;
    int since_best = 0;
    TrainHistory hist;

    Rng shuffle_rng(derive_seed(cfg.seed, fnv1a("shuffle")));
    std::vector<uint32_t> order = train_idx;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss = run_epoch(params, samples, order, adam, cfg.learning_rate, cfg.batch_size, jobs);
        hist.train_loss.push_back(loss);
        hist.epochs_run = epoch + 1;

        if (!val.empty()) {
            double vq = validation_median_q(params, val, jobs);
            hist.val_median_q.push_back(vq);
            ZSCE_DEBUG("epoch %d train_loss %.6f val_median_q %.4f", epoch, loss, vq);
            if (vq < best_val - 1e-12) {
                best_val = vq;
                best = params;
                best_epoch = epoch;
                since_best = 0;
            } else if (++since_best >= cfg.patience) {
                break;
            }
        }
    }
    hist.best_epoch = best_epoch;
    if (history) *history = hist;
    return val.empty() ? params : best;
}

ModelParams finetune(const ModelParams& params, const std::vector<TrainingSample>& samples,
                     const ModelConfig& cfg, int jobs) {
    if (samples.empty()) throw std::runtime_error("finetune: empty sample set");
    ModelParams tuned = params;
    int epochs = std::min(cfg.epochs, 20);
    double lr = cfg.learning_rate / 10.0;
    Adam adam(tuned.flat.size());
    Rng shuffle_rng(derive_seed(cfg.seed, fnv1a("finetune")));
    std::vector<uint32_t> order(samples.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<uint32_t>(i);
    for (int epoch = 0; epoch < epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        run_epoch(tuned, samples, order, adam, lr, cfg.batch_size, jobs);
    }
    return tuned;
}

std::vector<double> predict_many(const ModelParams& params, const std::vector<TrainingSample>& samples,
                                 int jobs) {
    std::vector<double> preds(samples.size());
    static thread_local Workspace tl_ws;
    parallel_for(samples.size(), jobs,
                 [&](size_t i) { preds[i] = run_forward(params, samples[i].graph, tl_ws, false); });
    return preds;
}

void save_checkpoint(const ModelParams& params, const std::string& path) {
    Json header;
    header["format"] = "model_v1";
    header["schema"] = params.schema;
    header["card_mode"] = params.card_mode;
    header["config"] = params.config.to_json();
    header["param_count"] = params.flat.size();
    Json tensors = Json::array();
    for (const TensorSpec& t : params.tensors)
        tensors.push_back({{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}, {"offset", t.offset}});
    header["tensors"] = tensors;
    if (params.registry) header["registry"] = params.registry->to_json();

    std::string htext = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    uint64_t hlen = htext.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof hlen);
    out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    out.write(reinterpret_cast<const char*>(params.flat.data()),
              static_cast<std::streamsize>(params.flat.size() * sizeof(double)));
    if (!out) throw IoError("failed writing checkpoint " + path);
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof hlen);
    if (!in || hlen == 0 || hlen > (1u << 26)) throw IoError("corrupt checkpoint header in " + path);
    std::string htext(hlen, '\0');
    in.read(htext.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw IoError("corrupt checkpoint header in " + path);
    Json header;
    try {
        header = Json::parse(htext);
    } catch (const std::exception&) {
        throw IoError("corrupt checkpoint header in " + path);
    }
    if (!header.contains("format") || header["format"] != "model_v1")
        throw IoError(path + " is not a model_v1 checkpoint");

    ModelParams p;
    p.schema = header["schema"].get<std::string>();
    p.card_mode = header.value("card_mode", "exact");
    p.config = ModelConfig::from_json(header["config"]);
    p.feat_dims = feature_dims(p.schema);
    for (const Json& jt : header["tensors"])
        p.tensors.push_back({jt["name"].get<std::string>(), jt["rows"].get<size_t>(),
                             jt["cols"].get<size_t>(), jt["offset"].get<size_t>()});
    if (header.contains("registry")) p.registry = OneHotRegistry::from_json(header["registry"]);

    std::vector<TensorSpec> expected = make_layout(p.config.hidden_dim, p.feat_dims);
    if (expected.size() != p.tensors.size())
        throw IoError("checkpoint tensor table does not match its config");
    for (size_t i = 0; i < expected.size(); ++i)
        if (expected[i].name != p.tensors[i].name || expected[i].rows != p.tensors[i].rows ||
            expected[i].cols != p.tensors[i].cols || expected[i].offset != p.tensors[i].offset)
            throw IoError("checkpoint tensor table does not match its config");

    size_t count = header["param_count"].get<size_t>();
    p.flat.resize(count);
    in.read(reinterpret_cast<char*>(p.flat.data()), static_cast<std::streamsize>(count * sizeof(double)));
    if (static_cast<size_t>(in.gcount()) != count * sizeof(double))
        throw IoError("truncated checkpoint " + path);
    return p;
}

void require_config_compatible(const ModelParams& params, const ModelConfig& cfg) {
    if (params.config.hidden_dim != cfg.hidden_dim)
        throw ConfigError("checkpoint hidden_dim " + std::to_string(params.config.hidden_dim) +
                          " does not match requested " + std::to_string(cfg.hidden_dim));
}

} // namespace zsce
