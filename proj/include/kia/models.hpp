#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "kia/autodiff.hpp"
#include "kia/tensor.hpp"

namespace kia {

enum class Variant { KIA, KAE, CKAE };

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);

// Glorot-uniform draw in [-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))].
Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

// Initial latent operator. Rotation: planar rotations pairing coordinate j with j + d/2 at angles
// pi*(j+1)/(d+2), realised exactly by diagonal shears for coupling blocks. Identity: K = I.
// Glorot: drawn like the dense layers.
enum class KoopmanInit { Rotation, Identity, Glorot };

// Angles used by KoopmanInit::Rotation for a latent of dimension d.
std::vector<double> rotation_angles(std::size_t latent_dim);

std::string to_string(KoopmanInit init);
KoopmanInit parse_koopman_init(std::string_view name);

struct DenseLayer {
    Tensor weight;  // in x out
    Tensor bias;    // 1 x out
    bool activation = false;
};

// Feed-forward stack; rows of the input are samples.
struct DenseStack {
    std::vector<DenseLayer> layers;

    // dims = {in, h1, ..., out}; tanh after every layer except the last.
    static DenseStack create(std::span<const std::size_t> dims, std::mt19937_64& rng);

    std::size_t input_dim() const;
    std::size_t output_dim() const;
};

// Additive coupling with linear translations t1, t2 acting on half-latents
// (row convention: t(u) = u * W [+ b]).
struct CouplingBlock {
    Tensor t1;
    Tensor t2;
    std::optional<Tensor> b1;
    std::optional<Tensor> b2;

    static CouplingBlock create(std::size_t latent_dim, std::size_t depth, bool with_bias, KoopmanInit init,
                                std::mt19937_64& rng);

    std::size_t half() const { return t1.rows(); }
    std::size_t dim() const { return 2 * half(); }
};

struct InnKoopman {
    std::vector<CouplingBlock> blocks;

    static InnKoopman create(std::size_t latent_dim, std::size_t depth, bool with_bias, KoopmanInit init,
                             std::mt19937_64& rng);
    std::size_t dim() const { return blocks.front().dim(); }
};

struct LinearKoopman {
    Tensor forward;                   // d x d, z_{t+1} = z_t * forward
    std::optional<Tensor> backward;   // C-KAE only

    static LinearKoopman create(std::size_t latent_dim, bool paired, KoopmanInit init, std::mt19937_64& rng);
    std::size_t dim() const { return forward.rows(); }
};

// Affine map between observation units and model units:
// model = (x - mean) / scale.
struct Normalizer {
    Tensor mean;   // 1 x m
    double scale = 1.0;

    static Normalizer fit(const Tensor& observations);
    Tensor apply(const Tensor& x) const;
    Tensor invert(const Tensor& x) const;
};

struct ModelSpec {
    Variant variant = Variant::KIA;
    std::size_t input_dim = 64;
    std::vector<std::size_t> hidden{128, 64};
    std::size_t latent_dim = 8;
    std::size_t coupling_depth = 4;
    bool coupling_bias = false;
    KoopmanInit koopman_init = KoopmanInit::Rotation;
    std::uint64_t seed = 0;

    // Throws ConfigError for odd latent_dim under KIA, zero sizes, depth 0.
    void validate() const;
};

class KiaModel {
public:
    static KiaModel create(const ModelSpec& spec);

    const ModelSpec& spec() const noexcept { return spec_; }
    Variant variant() const noexcept { return spec_.variant; }
    std::size_t input_dim() const noexcept { return spec_.input_dim; }
    std::size_t latent_dim() const noexcept { return spec_.latent_dim; }

    DenseStack& encoder() noexcept { return encoder_; }
    DenseStack& decoder() noexcept { return decoder_; }
    const DenseStack& encoder() const noexcept { return encoder_; }
    const DenseStack& decoder() const noexcept { return decoder_; }
    std::variant<InnKoopman, LinearKoopman>& koopman() noexcept { return koopman_; }
    const std::variant<InnKoopman, LinearKoopman>& koopman() const noexcept { return koopman_; }

    const std::optional<Normalizer>& normalizer() const noexcept { return normalizer_; }
    void set_normalizer(std::optional<Normalizer> n) { normalizer_ = std::move(n); }
    Tensor to_model_units(const Tensor& x) const;
    Tensor to_observation_units(const Tensor& x) const;

    // Parameters in declaration order: encoder, koopman, decoder.
    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;
    std::vector<std::string> parameter_names() const;

    // Row-batched evaluation in model units (rows are samples).
    Tensor encode(const Tensor& x) const;
    Tensor decode(const Tensor& z) const;
    Tensor koopman_power(const Tensor& z, long steps) const;

    bool supports_backward() const noexcept { return spec_.variant != Variant::KAE; }

private:
    ModelSpec spec_;
    DenseStack encoder_;
    std::variant<InnKoopman, LinearKoopman> koopman_;
    DenseStack decoder_;
    std::optional<Normalizer> normalizer_;
};

Tensor coupling_forward(const CouplingBlock& block, const Tensor& z);
Tensor coupling_inverse(const CouplingBlock& block, const Tensor& v);

// A model whose parameters are leaves of a tape; the only place where the
// network arithmetic is written down. Tensor-level methods of KiaModel run
// through a temporary BoundModel so that both paths agree bitwise.
class BoundModel {
public:
    BoundModel(const KiaModel& model, Tape& tape, bool requires_grad);
    // Uses caller-provided leaves (one per parameter, declaration order) in
    // place of the model's own values; the model supplies only structure.
    BoundModel(const KiaModel& model, std::span<const Var> params);

    Var encode(Var x) const;
    Var decode(Var z) const;
    // One application of the Koopman operator; direction +1 forward, -1 backward.
    Var step(Var z, int direction) const;
    Var power(Var z, long steps) const;
    // ||K Kb - I||_F^2 + ||Kb K - I||_F^2 for C-KAE; throws otherwise.
    Var consistency() const;

    std::span<const Var> parameters() const noexcept { return params_; }
    Tape& tape() const noexcept { return *tape_; }
    const KiaModel& model() const noexcept { return *model_; }

private:
    Var dense(std::size_t first_param, const DenseStack& stack, Var x) const;
    Var coupling(std::size_t block, Var z, int direction) const;

    const KiaModel* model_;
    Tape* tape_;
    std::vector<Var> params_;
    std::size_t koopman_offset_ = 0;
    std::size_t decoder_offset_ = 0;
};

}  // namespace kia
