#include "kia/dynamics.hpp"

#include <cmath>
#include <random>

#include "kia/binary_io.hpp"
#include "kia/errors.hpp"

namespace kia {

using nlohmann::json;

void PendulumParams::validate() const {
    if (n_points < 2) throw ConfigError("pendulum n_points must be at least 2");
    if (!(length > 0.0)) throw ConfigError("pendulum length must be positive");
    if (!(g > 0.0)) throw ConfigError("gravity must be positive");
    if (!(t_end > t_start)) throw ConfigError("pendulum time span must be increasing");
    if (substeps == 0) throw ConfigError("pendulum substeps must be positive");
    if (!std::isfinite(theta0) || !std::isfinite(omega0)) throw ConfigError("initial state must be finite");
}

SplitViews TrajectoryDataset::views() const {
    return SplitViews{{0, split.train}, {split.val_begin(), split.val}, {split.test_begin(), split.test}};
}

void TrajectoryDataset::validate() const {
    if (split.total() != n_points()) {
        throw ConfigError("split lengths sum to " + std::to_string(split.total()) + " but dataset has " +
                          std::to_string(n_points()) + " points");
    }
    if (embedding) {
        const Tensor& q = *embedding;
        if (q.rows() != dim()) throw ConfigError("embedding rows disagree with observation width");
        for (std::size_t a = 0; a < q.cols(); ++a)
            for (std::size_t b = 0; b < q.cols(); ++b) {
                double s = 0.0;
                for (std::size_t r = 0; r < q.rows(); ++r) s += q(r, a) * q(r, b);
                if (std::abs(s - (a == b ? 1.0 : 0.0)) > 1e-10) {
                    throw ConfigError("embedding columns are not orthonormal");
                }
            }
    }
    if (clean && clean->shape() != observations.shape()) {
        throw ConfigError("clean copy shape disagrees with observations");
    }
}

double pendulum_energy(double theta, double omega, const PendulumParams& p) {
    return 0.5 * omega * omega + (p.g / p.length) * (1.0 - std::cos(theta));
}

TrajectoryDataset simulate_pendulum(const PendulumParams& params) {
    params.validate();
    const double c = params.g / params.length;
    const double dt = params.dt();
    const double h = dt / static_cast<double>(params.substeps);
    auto accel = [c](double theta) { return -c * std::sin(theta); };

    TrajectoryDataset ds;
    ds.observations = Tensor::matrix(params.n_points, 2);
    ds.dt = dt;
    double theta = params.theta0;
    double omega = params.omega0;
    for (std::size_t i = 0; i < params.n_points; ++i) {
        ds.observations(i, 0) = theta;
        ds.observations(i, 1) = omega;
        for (std::size_t s = 0; s < params.substeps; ++s) {
            const double k1t = omega;
            const double k1w = accel(theta);
            const double k2t = omega + 0.5 * h * k1w;
            const double k2w = accel(theta + 0.5 * h * k1t);
            const double k3t = omega + 0.5 * h * k2w;
            const double k3w = accel(theta + 0.5 * h * k2t);
            const double k4t = omega + h * k3w;
            const double k4w = accel(theta + h * k3t);
            theta += h / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t);
            omega += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
        }
    }
    ds.split = params.n_points == Split::default_pendulum().total() ? Split::default_pendulum()
                                                                   : Split{params.n_points, 0, 0};
    ds.provenance = {{"system", "pendulum"},
                     {"theta0", params.theta0},
                     {"omega0", params.omega0},
                     {"g", params.g},
                     {"length", params.length},
                     {"t_span", {params.t_start, params.t_end}},
                     {"n_points", params.n_points},
                     {"substeps", params.substeps},
                     {"integrator", "rk4"}};
    return ds;
}

Tensor random_orthonormal(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    if (cols > rows) throw ConfigError("cannot build more orthonormal columns than rows");
    for (std::uint64_t attempt = 0;; ++attempt) {
        std::mt19937_64 rng(seed + attempt);
        std::normal_distribution<double> normal(0.0, 1.0);
        Tensor q = Tensor::matrix(rows, cols);
        for (auto& v : q.storage()) v = normal(rng);

        bool degenerate = false;
        for (std::size_t j = 0; j < cols && !degenerate; ++j) {
            // Two Gram-Schmidt passes keep orthogonality at rounding level.
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t p = 0; p < j; ++p) {
                    double dot = 0.0;
                    for (std::size_t r = 0; r < rows; ++r) dot += q(r, p) * q(r, j);
                    for (std::size_t r = 0; r < rows; ++r) q(r, j) -= dot * q(r, p);
                }
            }
            double norm = 0.0;
            for (std::size_t r = 0; r < rows; ++r) norm += q(r, j) * q(r, j);
            norm = std::sqrt(norm);
            if (norm < 1e-8) {
                degenerate = true;
                break;
            }
            for (std::size_t r = 0; r < rows; ++r) q(r, j) /= norm;
        }
        if (!degenerate) return q;
    }
}

TrajectoryDataset orthogonal_embed(const TrajectoryDataset& ds, std::size_t m, std::uint64_t seed) {
    if (ds.dim() != 2) {
        throw ContractError("orthogonal_embed expects 2-d states, got width " + std::to_string(ds.dim()));
    }
    TrajectoryDataset out = ds;
    Tensor q = random_orthonormal(m, 2, seed);
    out.observations = kernels::matmul(ds.observations, kernels::transpose(q));
    out.embedding = std::move(q);
    out.seed = seed;
    out.clean.reset();
    out.provenance["embedding_seed"] = seed;
    out.provenance["embedding_dim"] = m;
    return out;
}

TrajectoryDataset add_gaussian_noise(const TrajectoryDataset& ds, double std, std::uint64_t seed) {
    if (!(std >= 0.0) || !std::isfinite(std)) throw ContractError("noise std must be finite and >= 0");
    TrajectoryDataset out = ds;
    out.noise_std = std;
    out.provenance["noise_seed"] = seed;
    if (std == 0.0) return out;
    out.clean = ds.clean ? *ds.clean : ds.observations;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, std);
    for (auto& v : out.observations.storage()) v += normal(rng);
    return out;
}

SplitViews split_dataset(const TrajectoryDataset& ds, const Split& lengths) {
    if (lengths.total() != ds.n_points()) {
        throw ConfigError("split lengths (" + std::to_string(lengths.train) + ", " + std::to_string(lengths.val) +
                          ", " + std::to_string(lengths.test) + ") do not sum to " + std::to_string(ds.n_points()));
    }
    return SplitViews{{0, lengths.train}, {lengths.val_begin(), lengths.val}, {lengths.test_begin(), lengths.test}};
}

TrajectoryDataset with_split(TrajectoryDataset ds, const Split& lengths) {
    split_dataset(ds, lengths);
    ds.split = lengths;
    return ds;
}

namespace {

Tensor drop_leading_rows(const Tensor& t, std::size_t drop) {
    const std::size_t c = t.cols();
    std::vector<double> data(t.storage().begin() + static_cast<std::ptrdiff_t>(drop * c), t.storage().end());
    return Tensor({t.rows() - drop, c}, std::move(data));
}

}  // namespace

TrajectoryDataset truncate_train(const TrajectoryDataset& ds, std::size_t size) {
    if (size == 0 || size > ds.split.train) {
        throw ConfigError("training size " + std::to_string(size) + " exceeds available training data (" +
                          std::to_string(ds.split.train) + ")");
    }
    const std::size_t drop = ds.split.train - size;
    TrajectoryDataset out = ds;
    if (drop == 0) return out;
    out.observations = drop_leading_rows(ds.observations, drop);
    if (ds.clean) out.clean = drop_leading_rows(*ds.clean, drop);
    out.split.train = size;
    out.provenance["train_truncated_to"] = size;
    return out;
}

std::string serialize_dataset(const TrajectoryDataset& ds) {
    ds.validate();
    json h;
    h["format"] = "kia-dataset";
    h["version"] = kDatasetVersion;
    h["shape"] = {ds.n_points(), ds.dim()};
    h["dt"] = ds.dt;
    h["splits"] = {ds.split.train, ds.split.val, ds.split.test};
    h["seed"] = ds.seed;
    h["noise_std"] = ds.noise_std;
    h["embedding_shape"] = ds.embedding ? json(ds.embedding->shape()) : json(nullptr);
    h["clean_copy"] = ds.clean.has_value();
    h["provenance"] = ds.provenance;

    std::vector<double> blob;
    if (ds.embedding) blob = ds.embedding->storage();
    blob.insert(blob.end(), ds.observations.storage().begin(), ds.observations.storage().end());
    if (ds.clean) blob.insert(blob.end(), ds.clean->storage().begin(), ds.clean->storage().end());
    return io::encode_header_file(h, blob);
}

TrajectoryDataset deserialize_dataset(const std::string& bytes) {
    auto file = io::decode_header_file(bytes);
    const json& h = file.header;
    TrajectoryDataset ds;
    std::size_t rows = 0, cols = 0;
    std::optional<Shape> emb_shape;
    bool has_clean = false;
    try {
        if (h.at("format").get<std::string>() != "kia-dataset") {
            throw LoadError(LoadError::Kind::Header, "not a dataset file");
        }
        const int version = h.at("version").get<int>();
        if (version != kDatasetVersion) {
            throw LoadError(LoadError::Kind::Version, "unsupported dataset version " + std::to_string(version));
        }
        const auto shape = h.at("shape").get<Shape>();
        if (shape.size() != 2 || shape[0] == 0 || shape[1] == 0) {
            throw LoadError(LoadError::Kind::Shape, "dataset shape must be [rows, cols]");
        }
        rows = shape[0];
        cols = shape[1];
        ds.dt = h.at("dt").get<double>();
        const auto splits = h.at("splits").get<std::vector<std::size_t>>();
        if (splits.size() != 3) throw LoadError(LoadError::Kind::Shape, "splits must have three entries");
        ds.split = {splits[0], splits[1], splits[2]};
        ds.seed = h.at("seed").get<std::uint64_t>();
        ds.noise_std = h.at("noise_std").get<double>();
        if (!h.at("embedding_shape").is_null()) emb_shape = h.at("embedding_shape").get<Shape>();
        has_clean = h.value("clean_copy", false);
        ds.provenance = h.value("provenance", json::object());
    } catch (const json::exception& e) {
        throw LoadError(LoadError::Kind::Header, std::string("bad dataset header: ") + e.what());
    }
    if (ds.split.total() != rows) {
        throw LoadError(LoadError::Kind::Shape, "split lengths sum to " + std::to_string(ds.split.total()) +
                                                    " but shape declares " + std::to_string(rows) + " rows");
    }
    std::size_t emb_count = 0;
    if (emb_shape) {
        if (emb_shape->size() != 2 || (*emb_shape)[0] != cols) {
            throw LoadError(LoadError::Kind::Shape, "embedding shape " + shape_string(*emb_shape) +
                                                        " disagrees with observation width " + std::to_string(cols));
        }
        emb_count = (*emb_shape)[0] * (*emb_shape)[1];
    }
    const std::size_t expected = emb_count + rows * cols * (has_clean ? 2 : 1);
    if (file.payload.size() < expected) {
        throw LoadError(LoadError::Kind::Truncated, "payload holds " + std::to_string(file.payload.size()) +
                                                        " values, header promises " + std::to_string(expected));
    }
    if (file.payload.size() > expected) {
        throw LoadError(LoadError::Kind::Shape, "payload holds " + std::to_string(file.payload.size()) +
                                                    " values, header promises " + std::to_string(expected));
    }
    std::size_t offset = 0;
    if (emb_shape) ds.embedding = Tensor(*emb_shape, io::take(file.payload, offset, emb_count));
    ds.observations = Tensor({rows, cols}, io::take(file.payload, offset, rows * cols));
    if (has_clean) ds.clean = Tensor({rows, cols}, io::take(file.payload, offset, rows * cols));
    return ds;
}

void save_dataset(const TrajectoryDataset& ds, const std::filesystem::path& path) {
    io::write_file(path, serialize_dataset(ds));
}

TrajectoryDataset load_dataset(const std::filesystem::path& path) { return deserialize_dataset(io::read_file(path)); }

}  // namespace kia
