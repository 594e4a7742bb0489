#include "kia/checkpoint.hpp"

#include "kia/binary_io.hpp"
#include "kia/errors.hpp"

namespace kia {

using nlohmann::json;

std::string serialize_checkpoint(const KiaModel& model) {
    const ModelSpec& s = model.spec();
    json h;
    h["format"] = "kia-checkpoint";
    h["version"] = kCheckpointVersion;
    h["variant"] = to_string(s.variant);
    h["input_dim"] = s.input_dim;
    h["hidden"] = s.hidden;
    h["latent_dim"] = s.latent_dim;
    h["coupling_depth"] = s.coupling_depth;
    h["coupling_bias"] = s.coupling_bias;
    h["koopman_init"] = to_string(s.koopman_init);
    h["seed"] = s.seed;

    std::vector<double> blob;
    json params = json::array();
    const auto names = model.parameter_names();
    const auto ps = model.parameters();
    for (std::size_t i = 0; i < ps.size(); ++i) {
        params.push_back({{"name", names[i]}, {"shape", ps[i]->shape()}});
        blob.insert(blob.end(), ps[i]->storage().begin(), ps[i]->storage().end());
    }
    h["parameters"] = params;
    if (const auto& n = model.normalizer()) {
        h["normalizer"] = n->mean.size();
        blob.insert(blob.end(), n->mean.storage().begin(), n->mean.storage().end());
        blob.push_back(n->scale);
    } else {
        h["normalizer"] = 0;
    }
    return io::encode_header_file(h, blob);
}

KiaModel deserialize_checkpoint(const std::string& bytes) {
    auto file = io::decode_header_file(bytes);
    const json& h = file.header;
    try {
        if (h.at("format").get<std::string>() != "kia-checkpoint") {
            throw LoadError(LoadError::Kind::Header, "not a checkpoint file");
        }
        if (h.at("version").get<int>() != kCheckpointVersion) {
            throw LoadError(LoadError::Kind::Version,
                            "unsupported checkpoint version " + std::to_string(h.at("version").get<int>()));
        }
        ModelSpec spec;
        spec.variant = parse_variant(h.at("variant").get<std::string>());
        spec.input_dim = h.at("input_dim").get<std::size_t>();
        spec.hidden = h.at("hidden").get<std::vector<std::size_t>>();
        spec.latent_dim = h.at("latent_dim").get<std::size_t>();
        spec.coupling_depth = h.at("coupling_depth").get<std::size_t>();
        spec.coupling_bias = h.at("coupling_bias").get<bool>();
        spec.koopman_init = parse_koopman_init(h.at("koopman_init").get<std::string>());
        spec.seed = h.at("seed").get<std::uint64_t>();

        KiaModel model = KiaModel::create(spec);
        auto ps = model.parameters();
        const auto& declared = h.at("parameters");
        if (declared.size() != ps.size()) {
            throw LoadError(LoadError::Kind::Shape, "checkpoint declares " + std::to_string(declared.size()) +
                                                        " parameters, architecture has " +
                                                        std::to_string(ps.size()));
        }
        std::size_t offset = 0;
        for (std::size_t i = 0; i < ps.size(); ++i) {
            const auto shape = declared[i].at("shape").get<Shape>();
            if (shape != ps[i]->shape()) {
                throw LoadError(LoadError::Kind::Shape, "parameter " + std::to_string(i) + " has shape " +
                                                            shape_string(shape) + ", architecture expects " +
                                                            shape_string(ps[i]->shape()));
            }
            ps[i]->storage() = io::take(file.payload, offset, ps[i]->size());
        }
        const auto norm_size = h.at("normalizer").get<std::size_t>();
        if (norm_size > 0) {
            if (norm_size != spec.input_dim) {
                throw LoadError(LoadError::Kind::Shape, "normalizer width disagrees with input dimension");
            }
            Normalizer n;
            n.mean = Tensor({1, norm_size}, io::take(file.payload, offset, norm_size));
            n.scale = io::take(file.payload, offset, 1)[0];
            model.set_normalizer(std::move(n));
        }
        if (offset != file.payload.size()) {
            throw LoadError(LoadError::Kind::Shape, "checkpoint payload has " +
                                                        std::to_string(file.payload.size() - offset) +
                                                        " trailing values");
        }
        return model;
    } catch (const json::exception& e) {
        throw LoadError(LoadError::Kind::Header, std::string("bad checkpoint header: ") + e.what());
    } catch (const ConfigError& e) {
        throw LoadError(LoadError::Kind::Header, std::string("bad checkpoint architecture: ") + e.what());
    }
}

void save_checkpoint(const KiaModel& model, const std::filesystem::path& path) {
    io::write_file(path, serialize_checkpoint(model));
}

KiaModel load_checkpoint(const std::filesystem::path& path) { return deserialize_checkpoint(io::read_file(path)); }

}  // namespace kia
