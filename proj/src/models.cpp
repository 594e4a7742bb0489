#include "kia/models.hpp"

#include <cmath>
#include <numbers>

#include "kia/errors.hpp"

namespace kia {

std::string to_string(Variant v) {
    switch (v) {
    case Variant::KIA: return "KIA";
    case Variant::KAE: return "KAE";
    case Variant::CKAE: return "CKAE";
    }
    return "?";
}

Variant parse_variant(const std::string& name) {
    if (name == "KIA" || name == "kia") return Variant::KIA;
    if (name == "KAE" || name == "kae") return Variant::KAE;
    if (name == "CKAE" || name == "ckae" || name == "C-KAE") return Variant::CKAE;
    throw ConfigError("unknown model variant '" + name + "' (expected KIA, KAE or CKAE)");
}

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Tensor w = Tensor::matrix(fan_in, fan_out);
    for (auto& v : w.storage()) v = dist(rng);
    return w;
}

DenseStack DenseStack::create(std::span<const std::size_t> dims, std::mt19937_64& rng) {
    if (dims.size() < 2) throw ConfigError("dense stack needs at least input and output sizes");
    DenseStack s;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        if (dims[i] == 0 || dims[i + 1] == 0) throw ConfigError("dense stack sizes must be positive");
        DenseLayer layer;
        layer.weight = glorot_uniform(dims[i], dims[i + 1], rng);
        layer.bias = Tensor::matrix(1, dims[i + 1]);
        layer.activation = i + 2 < dims.size();
        s.layers.push_back(std::move(layer));
    }
    return s;
}

std::size_t DenseStack::input_dim() const { return layers.front().weight.rows(); }
std::size_t DenseStack::output_dim() const { return layers.back().weight.cols(); }

std::string to_string(KoopmanInit init) {
    switch (init) {
        case KoopmanInit::Rotation: return "rotation";
        case KoopmanInit::Identity: return "identity";
        case KoopmanInit::Glorot: return "glorot";
    }
    return "unknown";
}

KoopmanInit parse_koopman_init(std::string_view name) {
    if (name == "rotation") return KoopmanInit::Rotation;
    if (name == "identity") return KoopmanInit::Identity;
    if (name == "glorot") return KoopmanInit::Glorot;
    throw ConfigError("unknown koopman init '" + std::string(name) + "' (expected rotation, identity or glorot)");
}

std::vector<double> rotation_angles(std::size_t latent_dim) {
    std::vector<double> angles(latent_dim / 2);
    for (std::size_t j = 0; j < angles.size(); ++j)
        angles[j] = std::numbers::pi * static_cast<double>(j + 1) / static_cast<double>(latent_dim + 2);
    return angles;
}

CouplingBlock CouplingBlock::create(std::size_t latent_dim, std::size_t depth, bool with_bias, KoopmanInit init,
                                    std::mt19937_64& rng) {
    if (latent_dim == 0 || latent_dim % 2 != 0) {
        throw ConfigError("coupling blocks need an even latent dimension, got " + std::to_string(latent_dim));
    }
    const std::size_t h = latent_dim / 2;
    CouplingBlock b;
    if (init == KoopmanInit::Glorot) {
        b.t1 = glorot_uniform(h, h, rng);
        b.t2 = glorot_uniform(h, h, rng);
    } else {
        b.t1 = Tensor::matrix(h, h);
        b.t2 = Tensor::matrix(h, h);
        if (init == KoopmanInit::Rotation) {
            // v1 = z1 + s z2, v2 = z2 - s v1 has trace 2 - s^2 = 2 cos(phi) per coordinate pair.
            const auto angles = rotation_angles(latent_dim);
            for (std::size_t j = 0; j < h; ++j) {
                const double s = 2.0 * std::sin(angles[j] / static_cast<double>(depth) / 2.0);
                b.t2(j, j) = s;
                b.t1(j, j) = -s;
            }
        }
    }
    if (with_bias) {
        b.b1 = Tensor::matrix(1, h);
        b.b2 = Tensor::matrix(1, h);
    }
    return b;
}

InnKoopman InnKoopman::create(std::size_t latent_dim, std::size_t depth, bool with_bias, KoopmanInit init,
                              std::mt19937_64& rng) {
    if (depth == 0) throw ConfigError("coupling depth must be at least 1");
    InnKoopman k;
    for (std::size_t i = 0; i < depth; ++i) k.blocks.push_back(CouplingBlock::create(latent_dim, depth, with_bias, init, rng));
    return k;
}

LinearKoopman LinearKoopman::create(std::size_t latent_dim, bool paired, KoopmanInit init, std::mt19937_64& rng) {
    LinearKoopman k;
    if (init == KoopmanInit::Glorot) {
        k.forward = glorot_uniform(latent_dim, latent_dim, rng);
        if (paired) k.backward = glorot_uniform(latent_dim, latent_dim, rng);
        return k;
    }
    k.forward = Tensor::identity(latent_dim);
    if (init == KoopmanInit::Rotation) {
        const std::size_t h = latent_dim / 2;
        const auto angles = rotation_angles(latent_dim);
        for (std::size_t j = 0; j < h; ++j) {
            const double c = std::cos(angles[j]), s = std::sin(angles[j]);
            k.forward(j, j) = c;
            k.forward(j, j + h) = s;
            k.forward(j + h, j) = -s;
            k.forward(j + h, j + h) = c;
        }
    }
    if (paired) k.backward = kernels::transpose(k.forward);
    return k;
}

Normalizer Normalizer::fit(const Tensor& observations) {
    const std::size_t n = observations.rows(), m = observations.cols();
    Normalizer norm;
    norm.mean = Tensor::matrix(1, m);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < m; ++c) norm.mean[c] += observations(r, c);
    for (std::size_t c = 0; c < m; ++c) norm.mean[c] /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < m; ++c) {
            const double d = observations(r, c) - norm.mean[c];
            ss += d * d;
        }
    const double sd = std::sqrt(ss / static_cast<double>(n * m));
    norm.scale = sd > 0.0 ? sd : 1.0;
    return norm;
}

Tensor Normalizer::apply(const Tensor& x) const {
    Tensor out = x;
    const std::size_t m = mean.size();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (out[i] - mean[i % m]) / scale;
    return out;
}

Tensor Normalizer::invert(const Tensor& x) const {
    Tensor out = x;
    const std::size_t m = mean.size();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] * scale + mean[i % m];
    return out;
}

void ModelSpec::validate() const {
    if (input_dim == 0 || latent_dim == 0) throw ConfigError("model dimensions must be positive");
    for (auto h : hidden)
        if (h == 0) throw ConfigError("hidden layer sizes must be positive");
    if (variant == Variant::KIA) {
        if (latent_dim % 2 != 0) {
            throw ConfigError("KIA needs an even latent dimension, got " + std::to_string(latent_dim));
        }
        if (coupling_depth == 0) throw ConfigError("coupling depth must be at least 1");
    }
}

KiaModel KiaModel::create(const ModelSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    KiaModel m;
    m.spec_ = spec;

    std::vector<std::size_t> enc{spec.input_dim};
    enc.insert(enc.end(), spec.hidden.begin(), spec.hidden.end());
    enc.push_back(spec.latent_dim);
    m.encoder_ = DenseStack::create(enc, rng);

    if (spec.variant == Variant::KIA) {
        m.koopman_ = InnKoopman::create(spec.latent_dim, spec.coupling_depth, spec.coupling_bias, spec.koopman_init, rng);
    } else {
        m.koopman_ = LinearKoopman::create(spec.latent_dim, spec.variant == Variant::CKAE, spec.koopman_init, rng);
    }

    std::vector<std::size_t> dec{spec.latent_dim};
    dec.insert(dec.end(), spec.hidden.rbegin(), spec.hidden.rend());
    dec.push_back(spec.input_dim);
    m.decoder_ = DenseStack::create(dec, rng);
    return m;
}

Tensor KiaModel::to_model_units(const Tensor& x) const { return normalizer_ ? normalizer_->apply(x) : x; }

Tensor KiaModel::to_observation_units(const Tensor& x) const {
    return normalizer_ ? normalizer_->invert(x) : x;
}

namespace {

template <typename Self, typename Out>
void collect(Self& model, Out& out) {
    for (auto& l : model.encoder().layers) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
    }
    std::visit(
        [&out](auto& k) {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, InnKoopman>) {
                for (auto& b : k.blocks) {
                    out.push_back(&b.t1);
                    out.push_back(&b.t2);
                    if (b.b1) out.push_back(&*b.b1);
                    if (b.b2) out.push_back(&*b.b2);
                }
            } else {
                out.push_back(&k.forward);
                if (k.backward) out.push_back(&*k.backward);
            }
        },
        model.koopman());
    for (auto& l : model.decoder().layers) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
    }
}

}  // namespace

std::vector<Tensor*> KiaModel::parameters() {
    std::vector<Tensor*> out;
    collect(*this, out);
    return out;
}

std::vector<const Tensor*> KiaModel::parameters() const {
    std::vector<const Tensor*> out;
    collect(*this, out);
    return out;
}

std::vector<std::string> KiaModel::parameter_names() const {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < encoder_.layers.size(); ++i) {
        names.push_back("encoder." + std::to_string(i) + ".weight");
        names.push_back("encoder." + std::to_string(i) + ".bias");
    }
    if (const auto* inn = std::get_if<InnKoopman>(&koopman_)) {
        for (std::size_t i = 0; i < inn->blocks.size(); ++i) {
            const std::string p = "koopman.block" + std::to_string(i) + ".";
            names.push_back(p + "t1");
            names.push_back(p + "t2");
            if (inn->blocks[i].b1) names.push_back(p + "b1");
            if (inn->blocks[i].b2) names.push_back(p + "b2");
        }
    } else {
        const auto& lin = std::get<LinearKoopman>(koopman_);
        names.push_back("koopman.forward");
        if (lin.backward) names.push_back("koopman.backward");
    }
    for (std::size_t i = 0; i < decoder_.layers.size(); ++i) {
        names.push_back("decoder." + std::to_string(i) + ".weight");
        names.push_back("decoder." + std::to_string(i) + ".bias");
    }
    return names;
}

namespace {

void require_cols(const Tensor& x, std::size_t expected, const char* what) {
    if (x.rank() != 2 || x.cols() != expected) {
        throw ContractError(std::string(what) + ": expected rows of width " + std::to_string(expected) +
                            ", got shape " + shape_string(x.shape()));
    }
}

}  // namespace

Tensor KiaModel::encode(const Tensor& x) const {
    require_cols(x, input_dim(), "encode");
    Tape tape;
    BoundModel bound(*this, tape, false);
    return bound.encode(tape.borrow(x, false)).value();
}

Tensor KiaModel::decode(const Tensor& z) const {
    require_cols(z, latent_dim(), "decode");
    Tape tape;
    BoundModel bound(*this, tape, false);
    return bound.decode(tape.borrow(z, false)).value();
}

Tensor KiaModel::koopman_power(const Tensor& z, long steps) const {
    require_cols(z, latent_dim(), "koopman_power");
    if (steps == 0) return z;
    Tape tape;
    BoundModel bound(*this, tape, false);
    return bound.power(tape.borrow(z, false), steps).value();
}

namespace {

Var translate(Var u, Var weight, const std::optional<Var>& bias) {
    Var out = matmul(u, weight);
    return bias ? add_row(out, *bias) : out;
}

Tensor run_block(const CouplingBlock& block, const Tensor& z, int direction) {
    require_cols(z, block.dim(), direction > 0 ? "coupling_forward" : "coupling_inverse");
    Tape tape;
    const std::size_t h = block.half();
    const Var zv = tape.borrow(z, false);
    const Var t1 = tape.borrow(block.t1, false);
    const Var t2 = tape.borrow(block.t2, false);
    std::optional<Var> b1, b2;
    if (block.b1) b1 = tape.borrow(*block.b1, false);
    if (block.b2) b2 = tape.borrow(*block.b2, false);
    const Var a = slice_cols(zv, 0, h);
    const Var b = slice_cols(zv, h, 2 * h);
    if (direction > 0) {
        const Var v1 = add(a, translate(b, t2, b2));
        const Var v2 = add(b, translate(v1, t1, b1));
        return concat_cols(v1, v2).value();
    }
    const Var u2 = sub(b, translate(a, t1, b1));
    const Var u1 = sub(a, translate(u2, t2, b2));
    return concat_cols(u1, u2).value();
}

}  // namespace

Tensor coupling_forward(const CouplingBlock& block, const Tensor& z) { return run_block(block, z, +1); }
Tensor coupling_inverse(const CouplingBlock& block, const Tensor& v) { return run_block(block, v, -1); }

BoundModel::BoundModel(const KiaModel& model, Tape& tape, bool requires_grad) : model_(&model), tape_(&tape) {
    const auto ps = model.parameters();
    params_.reserve(ps.size());
    for (const Tensor* p : ps) params_.push_back(tape.borrow(*p, requires_grad));
    koopman_offset_ = 2 * model.encoder().layers.size();
    decoder_offset_ = params_.size() - 2 * model.decoder().layers.size();
}

BoundModel::BoundModel(const KiaModel& model, std::span<const Var> params)
    : model_(&model), tape_(params.empty() ? nullptr : params.front().tape), params_(params.begin(), params.end()) {
    const auto ps = model.parameters();
    if (params_.size() != ps.size() || tape_ == nullptr) {
        throw ContractError("BoundModel: expected " + std::to_string(ps.size()) + " parameter leaves, got " +
                            std::to_string(params_.size()));
    }
    for (std::size_t i = 0; i < ps.size(); ++i) {
        if (params_[i].tape != tape_) throw ContractError("BoundModel: parameter leaves span several tapes");
        if (params_[i].value().shape() != ps[i]->shape()) {
            throw DimensionError("BoundModel: leaf " + std::to_string(i) + " has shape " +
                                 shape_string(params_[i].value().shape()) + ", parameter expects " +
                                 shape_string(ps[i]->shape()));
        }
    }
    koopman_offset_ = 2 * model.encoder().layers.size();
    decoder_offset_ = params_.size() - 2 * model.decoder().layers.size();
}

Var BoundModel::dense(std::size_t first_param, const DenseStack& stack, Var x) const {
    Var h = x;
    for (std::size_t i = 0; i < stack.layers.size(); ++i) {
        h = add_row(matmul(h, params_[first_param + 2 * i]), params_[first_param + 2 * i + 1]);
        if (stack.layers[i].activation) h = tanh(h);
    }
    return h;
}

Var BoundModel::encode(Var x) const { return dense(0, model_->encoder(), x); }

Var BoundModel::decode(Var z) const { return dense(decoder_offset_, model_->decoder(), z); }

Var BoundModel::coupling(std::size_t block, Var z, int direction) const {
    const auto& inn = std::get<InnKoopman>(model_->koopman());
    const bool bias = inn.blocks[block].b1.has_value();
    const std::size_t per_block = bias ? 4 : 2;
    const std::size_t base = koopman_offset_ + block * per_block;
    const Var t1 = params_[base];
    const Var t2 = params_[base + 1];
    std::optional<Var> b1, b2;
    if (bias) {
        b1 = params_[base + 2];
        b2 = params_[base + 3];
    }
    const std::size_t h = inn.blocks[block].half();
    const Var a = slice_cols(z, 0, h);
    const Var b = slice_cols(z, h, 2 * h);
    if (direction > 0) {
        const Var v1 = add(a, translate(b, t2, b2));
        const Var v2 = add(b, translate(v1, t1, b1));
        return concat_cols(v1, v2);
    }
    const Var u2 = sub(b, translate(a, t1, b1));
    const Var u1 = sub(a, translate(u2, t2, b2));
    return concat_cols(u1, u2);
}

Var BoundModel::step(Var z, int direction) const {
    if (const auto* inn = std::get_if<InnKoopman>(&model_->koopman())) {
        const std::size_t n = inn->blocks.size();
        Var out = z;
        if (direction > 0) {
            for (std::size_t b = 0; b < n; ++b) out = coupling(b, out, +1);
        } else {
            for (std::size_t b = n; b-- > 0;) out = coupling(b, out, -1);
        }
        return out;
    }
    if (direction > 0) return matmul(z, params_[koopman_offset_]);
    if (model_->variant() != Variant::CKAE) {
        throw UnsupportedOperation("backward Koopman powers are not available for the " +
                                   to_string(model_->variant()) + " variant");
    }
    return matmul(z, params_[koopman_offset_ + 1]);
}

Var BoundModel::power(Var z, long steps) const {
    const int direction = steps >= 0 ? +1 : -1;
    if (steps < 0 && model_->variant() == Variant::KAE) {
        throw UnsupportedOperation("KAE is forward-only; negative Koopman powers are not supported");
    }
    Var out = z;
    for (long i = 0; i < std::labs(steps); ++i) out = step(out, direction);
    return out;
}

Var BoundModel::consistency() const {
    if (model_->variant() != Variant::CKAE) {
        throw UnsupportedOperation("consistency penalty is defined only for CKAE");
    }
    const Var k = params_[koopman_offset_];
    const Var kb = params_[koopman_offset_ + 1];
    const std::size_t d = model_->latent_dim();
    const Var eye = tape_->constant(Tensor::identity(d));
    const double count = static_cast<double>(d * d);
    // mse averages over d*d entries; rescale to squared Frobenius norms.
    return add(scale(mse(matmul(k, kb), eye), count), scale(mse(matmul(kb, k), eye), count));
}

}  // namespace kia
