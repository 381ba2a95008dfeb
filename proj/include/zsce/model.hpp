#pragma once

#include <array>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "zsce/encoding.hpp"
#include "zsce/json_util.hpp"

namespace zsce {

struct ModelConfig {
    int hidden_dim = 64;
    double learning_rate = 1e-3;
    int batch_size = 64;
    int epochs = 100;
    int patience = 10; // early stop on validation median q-error
    uint64_t seed = 7;

    void validate() const;
    Json to_json() const;
    static ModelConfig from_json(const Json& j);
};

struct TensorSpec {
    std::string name;
    size_t rows = 0, cols = 0; // cols == 1 for biases
    size_t offset = 0;
};

/// Per-node-type encoder MLP (feat_dim -> H -> H), per-node-type combine MLP
/// (2H -> H -> H), shared readout (H -> H -> 1); affine-ReLU-affine each.
/// Parameters live in one flat vector with a fixed tensor layout so the
/// optimizer, gradient checks and checkpoints all agree.
struct ModelParams {
    ModelConfig config;
    std::string schema; // graph feature schema this model consumes
    std::string card_mode = "exact"; // which cardinality annotations it was trained on
    std::array<int, kNodeTypeCount> feat_dims{};
    std::vector<TensorSpec> tensors;
    std::vector<double> flat;
    std::optional<OneHotRegistry> registry; // ablation models carry theirs

    size_t param_count() const { return flat.size(); }
    const TensorSpec& tensor(const std::string& name) const;
    double* data(const TensorSpec& t) { return flat.data() + t.offset; }
    const double* data(const TensorSpec& t) const { return flat.data() + t.offset; }
};

/// Weights uniform in +-sqrt(6/(fan_in+fan_out)), biases zero, seeded.
ModelParams init_params(const ModelConfig& cfg, const std::string& schema);

/// Bottom-up pass: leaves -> encoder; internal nodes -> combine(encoder(x),
/// sum of child hidden states); prediction = readout(root hidden). Children
/// are summed in ascending node id order, so the result is bit-stable under
/// any child list permutation.
double forward(const ModelParams& params, const QueryGraph& graph);

/// Reverse-mode gradient of dLdPred * dPred/dTheta accumulated into grad
/// (same layout as params.flat); returns the prediction.
double backward(const ModelParams& params, const QueryGraph& graph, double dLdPred,
                std::vector<double>& grad);

struct TrainingSample {
    QueryGraph graph;
    double label = 0; // log(1 + cost_units)
    std::string origin_database;
};

struct TrainHistory {
    std::vector<double> train_loss;   // per epoch, MSE over the epoch
    std::vector<double> val_median_q; // per epoch (empty without validation)
    int best_epoch = -1;
    int epochs_run = 0;
};

/// Exact gradient of the mean squared error over one batch, accumulated into
/// grad (zeroed first); returns the batch loss. Per-sample gradients may be
/// computed in parallel but are reduced in batch order, so the result is
/// bit-identical for any worker count.
double batch_backward(const ModelParams& params, const std::vector<TrainingSample>& samples,
                      std::span<const uint32_t> indices, std::vector<double>& grad, int jobs = 1);

/// Mini-batch Adam on MSE over log labels. Validation databases drive early
/// stopping on median q-error; the best-epoch parameters are returned.
/// Deterministic given (samples, cfg): shuffling is seeded and gradient
/// accumulation keeps a fixed batch order regardless of worker count.
/// holdout_guard enforces leak freedom at runtime.
ModelParams train(const std::vector<TrainingSample>& samples, const ModelConfig& cfg,
                  const std::string& schema, const std::set<std::string>& validation_databases,
                  TrainHistory* history = nullptr, const std::string& holdout_guard = "",
                  int jobs = 1);

/// Continues optimization on a small target-database sample set: tenth of the
/// learning rate, at most 20 epochs, original parameters untouched.
ModelParams finetune(const ModelParams& params, const std::vector<TrainingSample>& samples,
                     const ModelConfig& cfg, int jobs = 1);

/// model_v1 checkpoint: json header (config, schema, tensor table, optional
/// one-hot registry) + little-endian doubles; round-trips bit-exactly.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

/// Throws when a checkpoint's shapes do not match an expected config.
void require_config_compatible(const ModelParams& params, const ModelConfig& cfg);

/// Predictions for many graphs; parallel but output order is fixed.
std::vector<double> predict_many(const ModelParams& params, const std::vector<TrainingSample>& samples,
                                 int jobs);

} // namespace zsce
