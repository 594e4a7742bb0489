#include "kia/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "kia/errors.hpp"

namespace kia {

void LossWeights::validate(Variant variant) const {
    for (double w : {recon, fwd, bwd, con}) {
        if (!std::isfinite(w) || w < 0.0) throw ConfigError("loss weights must be finite and non-negative");
    }
    if (variant == Variant::KAE && bwd > 0.0) {
        throw ConfigError("the KAE variant is forward-only: lambda_bwd must be 0 (got " + std::to_string(bwd) + ")");
    }
}

LossWeights LossWeights::for_variant(Variant variant) const {
    LossWeights w = *this;
    if (variant == Variant::KAE) w.bwd = 0.0;
    if (variant != Variant::CKAE) w.con = 0.0;
    return w;
}

void TrainConfig::validate() const {
    if (k_steps < 1) throw ConfigError("k_steps must be at least 1");
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (patience < 1) throw ConfigError("patience must be at least 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be positive");
}

AdamState AdamState::zeros_like(std::span<const Tensor* const> params) {
    AdamState s;
    for (const Tensor* p : params) {
        s.m.emplace_back(p->shape(), 0.0);
        s.v.emplace_back(p->shape(), 0.0);
    }
    return s;
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state, double lr) {
    if (params.size() != grads.size() || params.size() != state.m.size()) {
        throw ContractError("adam_step: " + std::to_string(params.size()) + " parameters, " +
                            std::to_string(grads.size()) + " gradients, " + std::to_string(state.m.size()) +
                            " moment slots");
    }
    ++state.step;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& theta = *params[p];
        const Tensor& g = grads[p];
        if (g.shape() != theta.shape() || state.m[p].shape() != theta.shape()) {
            throw ContractError("adam_step: shape mismatch for parameter " + std::to_string(p) + ": " +
                                shape_string(theta.shape()) + " vs gradient " + shape_string(g.shape()));
        }
        auto& m = state.m[p].storage();
        auto& v = state.v[p].storage();
        auto& w = theta.storage();
        const auto& gv = g.storage();
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gv[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gv[i] * gv[i];
            const double mh = m[i] / c1;
            const double vh = v[i] / c2;
            w[i] -= lr * mh / (std::sqrt(vh) + state.eps);
        }
    }
}

std::vector<std::size_t> build_windows(const Segment& segment, std::size_t k, Direction direction) {
    if (k < 1) throw ConfigError("window horizon k must be at least 1");
    const std::size_t need = direction == Direction::Both ? 2 * k : k;
    if (segment.length <= need) {
        throw ConfigError("segment of length " + std::to_string(segment.length) + " is too short for k=" +
                          std::to_string(k) + " windows (needs more than " + std::to_string(need) + ")");
    }
    const std::size_t first = segment.begin + (direction == Direction::Forward ? 0 : k);
    const std::size_t last = segment.end() - 1 - (direction == Direction::Backward ? 0 : k);
    std::vector<std::size_t> anchors;
    anchors.reserve(last - first + 1);
    for (std::size_t t = first; t <= last; ++t) anchors.push_back(t);
    return anchors;
}

namespace {

Tensor gather_rows(const Tensor& obs, std::span<const std::size_t> rows, long shift) {
    const std::size_t m = obs.cols();
    Tensor out = Tensor::matrix(rows.size(), m);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const long r = static_cast<long>(rows[i]) + shift;
        if (r < 0 || static_cast<std::size_t>(r) >= obs.rows()) {
            throw ContractError("window index " + std::to_string(r) + " outside [0, " + std::to_string(obs.rows()) + ")");
        }
        auto src = obs.row_span(static_cast<std::size_t>(r));
        std::copy(src.begin(), src.end(), out.row_span(i).begin());
    }
    return out;
}

void require_windows(const WindowBatch& w, std::size_t k) {
    if (w.anchors.empty() || w.anchors.rows() == 0) throw ContractError("empty window batch");
    if (w.targets.size() != k) {
        throw ContractError("window holds " + std::to_string(w.targets.size()) + " targets, expected k=" +
                            std::to_string(k));
    }
    for (const auto& t : w.targets) {
        if (t.shape() != w.anchors.shape()) {
            throw DimensionError("window target shape " + shape_string(t.shape()) + " differs from anchors " +
                                 shape_string(w.anchors.shape()));
        }
    }
}

Var squared_norm_mean(Var pred, Var target) {
    // mse averages over rows*cols; ||.||^2 per row averaged over rows.
    return scale(mse(pred, target), static_cast<double>(pred.value().cols()));
}

Var recon_from_latent(const BoundModel& model, Var x, Var z) { return squared_norm_mean(model.decode(z), x); }

}  // namespace

WindowBatch gather_windows(const Tensor& observations, std::span<const std::size_t> anchors, std::size_t k,
                           int direction) {
    WindowBatch w;
    w.anchors = gather_rows(observations, anchors, 0);
    for (std::size_t l = 1; l <= k; ++l) {
        w.targets.push_back(gather_rows(observations, anchors, direction * static_cast<long>(l)));
    }
    return w;
}

double total_loss(const LossComponents& c, const LossWeights& w) {
    for (double v : {c.recon, c.fwd, c.bwd, c.con}) {
        if (!std::isfinite(v)) throw NumericError("total_loss: non-finite loss component");
    }
    return w.recon * c.recon + w.fwd * c.fwd + w.bwd * c.bwd + w.con * c.con;
}

Var recon_term(const BoundModel& model, Var x) { return recon_from_latent(model, x, model.encode(x)); }

Var dynamics_term(const BoundModel& model, Var z, std::span<const Tensor> targets, int direction) {
    std::vector<Var> latents;
    latents.reserve(targets.size());
    Var current = z;
    for (std::size_t l = 0; l < targets.size(); ++l) {
        current = model.step(current, direction);
        latents.push_back(current);
    }
    Tape& tape = model.tape();
    const Var predicted = model.decode(concat_rows(latents));
    const Var stacked = tape.constant(kernels::concat_rows(targets));
    return squared_norm_mean(predicted, stacked);
}

double loss_recon(const KiaModel& model, const Tensor& batch) {
    if (batch.rank() != 2 || batch.rows() == 0) throw ContractError("loss_recon: empty batch");
    Tape tape;
    BoundModel bound(model, tape, false);
    return recon_term(bound, tape.borrow(batch, false)).value().item();
}

double loss_forward(const KiaModel& model, const WindowBatch& windows, std::size_t k) {
    require_windows(windows, k);
    Tape tape;
    BoundModel bound(model, tape, false);
    const Var z = bound.encode(tape.borrow(windows.anchors, false));
    return dynamics_term(bound, z, windows.targets, +1).value().item();
}

double loss_backward(const KiaModel& model, const WindowBatch& windows, std::size_t k) {
    if (!model.supports_backward()) {
        throw UnsupportedOperation("loss_backward is undefined for the forward-only KAE variant");
    }
    require_windows(windows, k);
    Tape tape;
    BoundModel bound(model, tape, false);
    const Var z = bound.encode(tape.borrow(windows.anchors, false));
    return dynamics_term(bound, z, windows.targets, -1).value().item();
}

Objective build_objective(const BoundModel& model, const Tensor& observations, std::span<const std::size_t> anchors,
                          std::size_t k, const LossWeights& weights) {
    if (anchors.empty()) throw ContractError("build_objective: no anchors");
    Tape& tape = model.tape();
    const Variant variant = model.model().variant();
    const Var x = tape.constant(gather_rows(observations, anchors, 0));
    const Var z = model.encode(x);

    Objective obj;
    obj.recon = recon_from_latent(model, x, z);
    std::vector<Tensor> targets;
    targets.reserve(k);
    for (std::size_t l = 1; l <= k; ++l) targets.push_back(gather_rows(observations, anchors, static_cast<long>(l)));
    obj.fwd = dynamics_term(model, z, targets, +1);
    Var total = add(scale(obj.recon, weights.recon), scale(obj.fwd, weights.fwd));

    if (variant != Variant::KAE && weights.bwd > 0.0) {
        targets.clear();
        for (std::size_t l = 1; l <= k; ++l) targets.push_back(gather_rows(observations, anchors, -static_cast<long>(l)));
        obj.bwd = dynamics_term(model, z, targets, -1);
        total = add(total, scale(*obj.bwd, weights.bwd));
    }
    if (variant == Variant::CKAE && weights.con > 0.0) {
        obj.con = model.consistency();
        total = add(total, scale(*obj.con, weights.con));
    }
    obj.total = total;
    return obj;
}

Direction training_direction(Variant v) { return v == Variant::KAE ? Direction::Forward : Direction::Both; }

namespace {

LossComponents components_of(const Objective& o) {
    LossComponents c;
    c.recon = o.recon.value().item();
    c.fwd = o.fwd.value().item();
    if (o.bwd) c.bwd = o.bwd->value().item();
    if (o.con) c.con = o.con->value().item();
    return c;
}

void check_finite(const LossComponents& c, std::size_t epoch, const char* where) {
    const std::pair<const char*, double> parts[] = {{"L_recon", c.recon}, {"L_fwd", c.fwd}, {"L_bwd", c.bwd}, {"L_con", c.con}};
    for (const auto& [name, v] : parts) {
        if (!std::isfinite(v)) throw DivergenceError(static_cast<int>(epoch), std::string(name) + " (" + where + ")");
    }
}

}  // namespace

LossComponents evaluate_objective(const KiaModel& model, const Tensor& observations, const Segment& segment,
                                  std::size_t k, const LossWeights& weights) {
    const auto anchors = build_windows(segment, k, training_direction(model.variant()));
    constexpr std::size_t kChunk = 512;
    LossComponents sum;
    for (std::size_t start = 0; start < anchors.size(); start += kChunk) {
        const std::size_t len = std::min(kChunk, anchors.size() - start);
        Tape tape;
        BoundModel bound(model, tape, false);
        const auto obj = build_objective(bound, observations, std::span(anchors).subspan(start, len), k, weights);
        const LossComponents c = components_of(obj);
        const double share = static_cast<double>(len);
        sum.recon += share * c.recon;
        sum.fwd += share * c.fwd;
        sum.bwd += share * c.bwd;
        sum.con = c.con;
    }
    const double n = static_cast<double>(anchors.size());
    sum.recon /= n;
    sum.fwd /= n;
    sum.bwd /= n;
    return sum;
}

TrainResult train(KiaModel model, const TrajectoryDataset& dataset, const TrainConfig& config,
                  const LossWeights& weights) {
    config.validate();
    weights.validate(model.variant());
    if (dataset.dim() != model.input_dim()) {
        throw ConfigError("dataset width " + std::to_string(dataset.dim()) + " differs from model input " +
                          std::to_string(model.input_dim()));
    }
    const auto views = dataset.views();
    if (views.val.length == 0) throw ConfigError("training requires a validation split");
    const LossWeights w = weights.for_variant(model.variant());
    const Tensor obs = model.to_model_units(dataset.observations);
    const Direction dir = training_direction(model.variant());
    std::vector<std::size_t> anchors = build_windows(views.train, config.k_steps, dir);
    build_windows(views.val, config.k_steps, dir);

    std::mt19937_64 rng(config.seed);
    auto params = model.parameters();
    AdamState adam = AdamState::zeros_like(params);

    TrainResult result{model, {}, 0, false};
    EarlyStopping stopper(config.patience);
    std::vector<Tensor> grads(params.size());

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        std::shuffle(anchors.begin(), anchors.end(), rng);
        LossComponents acc;
        for (std::size_t start = 0; start < anchors.size(); start += config.batch_size) {
            const std::size_t len = std::min(config.batch_size, anchors.size() - start);
            Tape tape;
            BoundModel bound(model, tape, true);
            const auto obj = build_objective(bound, obs, std::span(anchors).subspan(start, len), config.k_steps, w);
            const LossComponents c = components_of(obj);
            check_finite(c, epoch, "train");
            const Gradients g = tape.backward(obj.total);
            for (std::size_t p = 0; p < params.size(); ++p) grads[p] = g.get(bound.parameters()[p]);
            adam_step(params, grads, adam, config.learning_rate);
            const double share = static_cast<double>(len);
            acc.recon += share * c.recon;
            acc.fwd += share * c.fwd;
            acc.bwd += share * c.bwd;
            acc.con += share * c.con;
        }
        const double n = static_cast<double>(anchors.size());
        acc.recon /= n;
        acc.fwd /= n;
        acc.bwd /= n;
        acc.con /= n;

        const LossComponents val = evaluate_objective(model, obs, views.val, config.k_steps, w);
        check_finite(val, epoch, "validation");
        EpochRecord rec{epoch, acc, total_loss(acc, w), total_loss(val, w)};
        result.history.push_back(rec);

        if (stopper.update(rec.total_val)) {
            result.best_epoch = epoch;
            result.model = model;
        } else if (stopper.should_stop()) {
            result.early_stopped = true;
            break;
        }
    }
    return result;
}

bool EarlyStopping::update(double loss) {
    ++epoch_;
    if (loss < best_ - 1e-12) {
        best_ = loss;
        best_epoch_ = epoch_;
        stale_ = 0;
        return true;
    }
    ++stale_;
    return false;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
    std::string out = "epoch,L_recon,L_fwd,L_bwd,L_total_train,L_total_val\n";
    char buf[256];
    for (const auto& r : history) {
        std::snprintf(buf, sizeof buf, "%zu,%.12g,%.12g,%.12g,%.12g,%.12g\n", r.epoch, r.train.recon, r.train.fwd,
                      r.train.bwd, r.total_train, r.total_val);
        out += buf;
    }
    return out;
}

}  // namespace kia
