#include "kia/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "kia/binary_io.hpp"
#include "kia/errors.hpp"

namespace kia {

using nlohmann::json;

void GridSeries::validate() const {
    if (values.rows() != years.total() * kDaysPerYear) {
        throw ConfigError("grid has " + std::to_string(values.rows()) + " days but the year split covers " +
                          std::to_string(years.total() * kDaysPerYear));
    }
    if (values.cols() != cells()) throw ConfigError("grid width disagrees with H*W");
    if (!values.all_finite()) throw ConfigError("grid contains non-finite temperatures");
    if (climatology && climatology->shape() != Shape{kDaysPerYear, cells()}) {
        throw ConfigError("climatology must be 365 x cells");
    }
}

void SyntheticSstParams::validate() const {
    if (height < 4 || width < 4) throw ConfigError("synthetic grid must be at least 4x4");
    if (years < 3) throw ConfigError("synthetic grid needs at least 3 years");
    if (!(weather_std >= 0.0)) throw ConfigError("weather noise std must be >= 0");
}

namespace {

// Sum of a few low-frequency cosine modes, rescaled to [-1, 1].
std::vector<double> smooth_field(std::size_t h, std::size_t w, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> freq(0.0, 1.2);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::uniform_real_distribution<double> amp(0.5, 1.0);
    constexpr int kModes = 4;
    std::array<double, kModes> fx{}, fy{}, ps{}, as{};
    for (int k = 0; k < kModes; ++k) {
        fx[k] = freq(rng);
        fy[k] = freq(rng);
        ps[k] = phase(rng);
        as[k] = amp(rng);
    }
    std::vector<double> f(h * w, 0.0);
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
            double v = 0.0;
            for (int k = 0; k < kModes; ++k) {
                v += as[k] * std::cos(std::numbers::pi * (fx[k] * static_cast<double>(i) / static_cast<double>(h) +
                                                          fy[k] * static_cast<double>(j) / static_cast<double>(w)) +
                                      ps[k]);
            }
            f[i * w + j] = v;
        }
    const auto [lo, hi] = std::minmax_element(f.begin(), f.end());
    const double mid = 0.5 * (*lo + *hi);
    const double half = 0.5 * (*hi - *lo);
    for (auto& v : f) v = half > 0.0 ? (v - mid) / half : 0.0;
    return f;
}

}  // namespace

GridSeries generate_synthetic_sst(const SyntheticSstParams& p) {
    p.validate();
    std::mt19937_64 rng(p.seed);
    const std::size_t cells = p.height * p.width;
    const auto base = smooth_field(p.height, p.width, rng);
    const auto amp = smooth_field(p.height, p.width, rng);
    const auto phs = smooth_field(p.height, p.width, rng);
    std::normal_distribution<double> weather(0.0, 1.0);

    GridSeries g;
    g.height = p.height;
    g.width = p.width;
    g.region = p.region;
    g.seed = p.seed;
    g.years = {p.years - 2, 1, 1};
    const std::size_t days = p.years * kDaysPerYear;
    g.values = Tensor::matrix(days, cells);
    const double two_pi = 2.0 * std::numbers::pi;
    for (std::size_t t = 0; t < days; ++t) {
        const double day = static_cast<double>(t % kDaysPerYear);
        const double years = static_cast<double>(t) / static_cast<double>(kDaysPerYear);
        double drift = 0.0;
        if (p.trend_per_year != 0.0) drift += p.trend_per_year * years;
        if (p.interannual_amplitude != 0.0) {
            drift += p.interannual_amplitude * std::sin(two_pi * years / p.interannual_period_years);
        }
        for (std::size_t c = 0; c < cells; ++c) {
            const double mean = 27.0 + 2.5 * base[c];
            const double a = 3.0 + 1.5 * amp[c];
            const double phi = 0.5 * phs[c];
            double v = mean + a * std::sin(two_pi * day / static_cast<double>(kDaysPerYear) + phi) + drift;
            if (p.weather_std > 0.0) v += p.weather_std * weather(rng);
            g.values(t, c) = std::clamp(v, -2.0, 40.0);
        }
    }
    g.provenance = {{"system", "synthetic_sst"},
                    {"height", p.height},
                    {"width", p.width},
                    {"years", p.years},
                    {"seed", p.seed},
                    {"weather_std", p.weather_std},
                    {"trend_per_year", p.trend_per_year},
                    {"interannual_amplitude", p.interannual_amplitude},
                    {"interannual_period_years", p.interannual_period_years}};
    return g;
}

Tensor compute_climatology(const GridSeries& grid, std::size_t train_years) {
    if (train_years == 0 || train_years * kDaysPerYear > grid.days()) {
        throw ConfigError("climatology needs 1.." + std::to_string(grid.days() / kDaysPerYear) + " training years");
    }
    const std::size_t cells = grid.cells();
    Tensor clim = Tensor::matrix(kDaysPerYear, cells);
    for (std::size_t y = 0; y < train_years; ++y)
        for (std::size_t d = 0; d < kDaysPerYear; ++d)
            for (std::size_t c = 0; c < cells; ++c) clim(d, c) += grid.values(y * kDaysPerYear + d, c);
    for (auto& v : clim.storage()) v /= static_cast<double>(train_years);
    return clim;
}

GridSeries with_climatology(GridSeries grid) {
    grid.climatology = compute_climatology(grid, grid.years.train);
    return grid;
}

TrajectoryDataset grid_to_dataset(const GridSeries& grid) {
    grid.validate();
    TrajectoryDataset ds;
    ds.observations = grid.values;
    ds.dt = 1.0;
    ds.split = {grid.years.train * kDaysPerYear, grid.years.val * kDaysPerYear, grid.years.test * kDaysPerYear};
    ds.seed = grid.seed;
    ds.provenance = grid.provenance;
    ds.provenance["region"] = grid.region;
    return ds;
}

std::string serialize_grid(const GridSeries& grid) {
    grid.validate();
    json h;
    h["format"] = "kia-grid";
    h["version"] = kGridVersion;
    h["shape"] = {grid.days(), grid.height, grid.width};
    h["region"] = grid.region;
    h["years"] = {grid.years.train, grid.years.val, grid.years.test};
    h["seed"] = grid.seed;
    h["climatology"] = grid.climatology.has_value();
    h["provenance"] = grid.provenance;
    std::vector<double> blob = grid.values.storage();
    if (grid.climatology) blob.insert(blob.end(), grid.climatology->storage().begin(), grid.climatology->storage().end());
    return io::encode_header_file(h, blob);
}

GridSeries deserialize_grid(const std::string& bytes) {
    auto file = io::decode_header_file(bytes);
    const json& h = file.header;
    GridSeries g;
    std::size_t days = 0;
    bool has_clim = false;
    try {
        if (h.at("format").get<std::string>() != "kia-grid") throw LoadError(LoadError::Kind::Header, "not a grid file");
        const int version = h.at("version").get<int>();
        if (version != kGridVersion) {
            throw LoadError(LoadError::Kind::Version, "unsupported grid version " + std::to_string(version));
        }
        const auto shape = h.at("shape").get<Shape>();
        if (shape.size() != 3 || shape[0] == 0 || shape[1] == 0 || shape[2] == 0) {
            throw LoadError(LoadError::Kind::Shape, "grid shape must be [T, H, W]");
        }
        days = shape[0];
        g.height = shape[1];
        g.width = shape[2];
        g.region = h.at("region").get<std::string>();
        const auto years = h.at("years").get<std::vector<std::size_t>>();
        if (years.size() != 3) throw LoadError(LoadError::Kind::Shape, "years must have three entries");
        g.years = {years[0], years[1], years[2]};
        g.seed = h.at("seed").get<std::uint64_t>();
        has_clim = h.value("climatology", false);
        g.provenance = h.value("provenance", json::object());
    } catch (const json::exception& e) {
        throw LoadError(LoadError::Kind::Header, std::string("bad grid header: ") + e.what());
    }
    if (g.years.total() * kDaysPerYear != days) {
        throw LoadError(LoadError::Kind::Shape, "year split disagrees with day count");
    }
    const std::size_t cells = g.height * g.width;
    const std::size_t expected = days * cells + (has_clim ? kDaysPerYear * cells : 0);
    if (file.payload.size() != expected) {
        throw LoadError(file.payload.size() < expected ? LoadError::Kind::Truncated : LoadError::Kind::Shape,
                        "grid payload holds " + std::to_string(file.payload.size()) + " values, header promises " +
                            std::to_string(expected));
    }
    std::size_t offset = 0;
    g.values = Tensor({days, cells}, io::take(file.payload, offset, days * cells));
    if (has_clim) g.climatology = Tensor({kDaysPerYear, cells}, io::take(file.payload, offset, kDaysPerYear * cells));
    return g;
}

void save_grid(const GridSeries& grid, const std::filesystem::path& path) { io::write_file(path, serialize_grid(grid)); }

GridSeries load_grid(const std::filesystem::path& path) { return deserialize_grid(io::read_file(path)); }

std::string peek_format(const std::filesystem::path& path) {
    const std::string bytes = io::read_file(path);
    const auto nl = bytes.find('\n');
    try {
        return json::parse(bytes.substr(0, nl)).at("format").get<std::string>();
    } catch (const json::exception& e) {
        throw LoadError(LoadError::Kind::Header, std::string("unreadable header: ") + e.what());
    }
}

}  // namespace kia
