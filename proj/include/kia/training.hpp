#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kia/autodiff.hpp"
#include "kia/dynamics.hpp"
#include "kia/models.hpp"

namespace kia {

struct LossWeights {
    double recon = 1.0;
    double fwd = 1.0;
    double bwd = 0.5;
    double con = 0.2;  // C-KAE only

    // Throws ConfigError for negative / non-finite weights and for KAE with
    // a positive backward weight.
    void validate(Variant variant) const;
    // Copy with terms the variant does not train zeroed (bwd for KAE, con
    // for anything but C-KAE).
    LossWeights for_variant(Variant variant) const;
};

struct TrainConfig {
    std::size_t k_steps = 16;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    std::size_t max_epochs = 500;
    std::size_t patience = 20;
    std::uint64_t seed = 0;  // shuffling

    void validate() const;
};

struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState zeros_like(std::span<const Tensor* const> params);
};

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state, double lr);

enum class Direction { Forward, Backward, Both };

// Anchor rows t inside a segment such that t +/- l stays inside it for
// l = 1..k in the requested direction(s). Anchors are absolute row indices.
std::vector<std::size_t> build_windows(const Segment& segment, std::size_t k, Direction direction);

// Anchor observations and, for l = 1..k, the targets x_{t+l} (forward) or
// x_{t-l} (backward); each entry is an n x m matrix in model units.
struct WindowBatch {
    Tensor anchors;
    std::vector<Tensor> targets;
};

WindowBatch gather_windows(const Tensor& observations, std::span<const std::size_t> anchors, std::size_t k,
                           int direction);

struct LossComponents {
    double recon = 0.0;
    double fwd = 0.0;
    double bwd = 0.0;
    double con = 0.0;
};

double total_loss(const LossComponents& c, const LossWeights& w);

// Tensor-level losses in model units.
double loss_recon(const KiaModel& model, const Tensor& batch);
double loss_forward(const KiaModel& model, const WindowBatch& windows, std::size_t k);
double loss_backward(const KiaModel& model, const WindowBatch& windows, std::size_t k);

// Tape-level terms used for training and gradient checks.
Var recon_term(const BoundModel& model, Var x);
// (1/(k n)) sum_l sum_t ||decode(K^{+-l} z_t) - target_l||^2 with the latent
// advanced one operator application per l.
Var dynamics_term(const BoundModel& model, Var z, std::span<const Tensor> targets, int direction);

struct Objective {
    Var total;
    Var recon;
    Var fwd;
    std::optional<Var> bwd;
    std::optional<Var> con;
};

// Weighted objective over the given anchors (observations in model units).
Objective build_objective(const BoundModel& model, const Tensor& observations, std::span<const std::size_t> anchors,
                          std::size_t k, const LossWeights& weights);

// Strict improvement of the monitored loss by more than 1e-12 resets the
// counter; `patience` consecutive misses end training.
class EarlyStopping {
public:
    explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

    // Feeds the loss of the next epoch; true when it is a new best.
    bool update(double loss);
    bool should_stop() const noexcept { return stale_ >= patience_; }
    std::size_t best_epoch() const noexcept { return best_epoch_; }
    double best() const noexcept { return best_; }

private:
    std::size_t patience_;
    std::size_t epoch_ = 0;
    std::size_t best_epoch_ = 0;
    std::size_t stale_ = 0;
    double best_ = std::numeric_limits<double>::infinity();
};

struct EpochRecord {
    std::size_t epoch = 0;
    LossComponents train;
    double total_train = 0.0;
    double total_val = 0.0;
};

struct TrainResult {
    KiaModel model;
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    bool early_stopped = false;
};

// Direction of anchor windows the variant trains on.
Direction training_direction(Variant v);

// Mean objective components over all windows of a segment.
LossComponents evaluate_objective(const KiaModel& model, const Tensor& observations, const Segment& segment,
                                  std::size_t k, const LossWeights& weights);

// Adam with per-epoch reshuffling and early stopping on the validation
// total loss; returns the parameters of the best validation epoch. If the
// model carries a normalizer, observations are mapped to model units first.
TrainResult train(KiaModel model, const TrajectoryDataset& dataset, const TrainConfig& config,
                  const LossWeights& weights);

std::string history_csv(const std::vector<EpochRecord>& history);

}  // namespace kia
