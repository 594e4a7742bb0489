#include "kia/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "kia/errors.hpp"
#include "kia/experiment.hpp"

namespace kia {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::optional<std::string> slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

double json_number(const json& v) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
    }
    return std::numeric_limits<double>::quiet_NaN();
}

Aggregate read_aggregate(const json& j) { return {json_number(j.at("mean")), json_number(j.at("std"))}; }

std::string num(double v, const char* fmt) {
    if (!std::isfinite(v)) return std::isnan(v) ? "nan" : "inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string file_safe(const std::string& s) {
    std::string out;
    for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') ? c : '_';
    return out;
}

}  // namespace

std::vector<double> mean_curve_from_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);  // header
    std::vector<double> sum;
    std::vector<std::size_t> count;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string init, anchor, step, err;
        if (!std::getline(row, init, ',') || !std::getline(row, anchor, ',') || !std::getline(row, step, ',') ||
            !std::getline(row, err, ',')) {
            throw LoadError(LoadError::Kind::Shape, "malformed report row: " + line);
        }
        const std::size_t s = std::stoul(step);
        if (s == 0) throw LoadError(LoadError::Kind::Shape, "report steps start at 1");
        const double e = std::strtod(err.c_str(), nullptr);
        if (sum.size() < s) {
            sum.resize(s, 0.0);
            count.resize(s, 0);
        }
        if (std::isnan(e)) continue;
        sum[s - 1] += e;
        ++count[s - 1];
    }
    std::vector<double> out(sum.size());
    for (std::size_t i = 0; i < sum.size(); ++i)
        out[i] = count[i] ? sum[i] / static_cast<double>(count[i]) : std::numeric_limits<double>::quiet_NaN();
    return out;
}

std::optional<RunRecord> load_run(const fs::path& dir, std::string* why) {
    auto fail = [&](std::string reason) -> std::optional<RunRecord> {
        if (why) *why = std::move(reason);
        return std::nullopt;
    };
    const auto summary_text = slurp(dir / "summary.json");
    if (!summary_text) return fail("missing summary.json");
    const auto steps = slurp(dir / "report.csv");
    if (!steps) return fail("missing report.csv");
    RunRecord r;
    r.dir = dir;
    try {
        const json s = json::parse(*summary_text);
        r.model = s.at("model").get<std::string>();
        r.metric = s.at("metric").get<std::string>();
        r.all = read_aggregate(s.at("all"));
        r.first100 = read_aggregate(s.at("first100"));
        r.last100 = read_aggregate(s.at("last100"));
        const json& meta = s.value("metadata", json::object());
        if (meta.contains("setting")) {
            const json& st = meta.at("setting");
            r.setting = st.is_string() ? st.get<std::string>() : num(st.get<double>(), "%g");
        }
        r.noise_std = meta.value("noise_std", 0.0);
    } catch (const json::exception& e) {
        return fail(std::string("unreadable summary.json: ") + e.what());
    }
    try {
        r.mean_curve = mean_curve_from_csv(*steps);
    } catch (const std::exception& e) {
        return fail(std::string("unreadable report.csv: ") + e.what());
    }
    if (r.mean_curve.empty()) return fail("report.csv has no steps");
    return r;
}

std::string comparison_csv(std::span<const RunRecord> runs) {
    std::string out = "model,setting,noise_std,metric,all,first100,last100\n";
    auto cell = [](const Aggregate& a) { return num(a.mean, "%.4f") + "±" + num(a.std, "%.4f"); };
    for (const auto& r : runs) {
        out += r.model + "," + r.setting + "," + num(r.noise_std, "%g") + "," + r.metric + "," + cell(r.all) + "," +
               cell(r.first100) + "," + cell(r.last100) + "\n";
    }
    return out;
}

std::string svg_chart(const std::string& title, std::span<const Curve> curves, bool log_scale,
                      const std::string& y_label) {
    constexpr double W = 720, H = 420, left = 70, right = 160, top = 40, bottom = 50;
    const double pw = W - left - right, ph = H - top - bottom;
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

    auto usable = [&](double v) { return std::isfinite(v) && (!log_scale || v > 0.0); };
    auto tr = [&](double v) { return log_scale ? std::log10(v) : v; };

    std::size_t steps = 1;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& c : curves) {
        steps = std::max(steps, c.values.size());
        for (double v : c.values)
            if (usable(v)) {
                lo = std::min(lo, tr(v));
                hi = std::max(hi, tr(v));
            }
    }
    if (!std::isfinite(lo)) {
        lo = 0.0;
        hi = 1.0;
    }
    if (log_scale) {
        lo = std::floor(lo);
        hi = std::ceil(hi);
    } else {
        lo = std::min(lo, 0.0);
    }
    if (hi <= lo) hi = lo + 1.0;

    auto px = [&](std::size_t step) {
        return left + (steps > 1 ? pw * static_cast<double>(step - 1) / static_cast<double>(steps - 1) : 0.0);
    };
    auto py = [&](double v) { return top + ph * (1.0 - (tr(v) - lo) / (hi - lo)); };

    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(2);
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
      << " " << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << left + pw / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape_xml(title)
      << "</text>\n";
    s << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#333\"/>\n";

    // y ticks
    const int yticks = log_scale ? static_cast<int>(hi - lo) : 5;
    for (int i = 0; i <= yticks; ++i) {
        const double t = lo + (hi - lo) * i / yticks;
        const double y = top + ph * (1.0 - (t - lo) / (hi - lo));
        s << "<line x1=\"" << left << "\" y1=\"" << y << "\" x2=\"" << left + pw << "\" y2=\"" << y
          << "\" stroke=\"#ddd\"/>\n";
        const std::string label = log_scale ? "1e" + std::to_string(static_cast<int>(std::lround(t))) : num(t, "%.3g");
        s << "<text x=\"" << left - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << label << "</text>\n";
    }
    // x ticks
    for (int i = 0; i <= 4; ++i) {
        const std::size_t step = 1 + (steps - 1) * static_cast<std::size_t>(i) / 4;
        const double x = px(step);
        s << "<line x1=\"" << x << "\" y1=\"" << top + ph << "\" x2=\"" << x << "\" y2=\"" << top + ph + 5
          << "\" stroke=\"#333\"/>\n";
        s << "<text x=\"" << x << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << step << "</text>\n";
    }
    s << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">step</text>\n";
    s << "<text x=\"16\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << top + ph / 2 << ")\">" << escape_xml(y_label) << "</text>\n";

    for (std::size_t ci = 0; ci < curves.size(); ++ci) {
        const auto& c = curves[ci];
        const char* color = palette[ci % std::size(palette)];
        std::string points;
        auto flush = [&] {
            if (!points.empty())
                s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"" << points
                  << "\"/>\n";
            points.clear();
        };
        for (std::size_t i = 0; i < c.values.size(); ++i) {
            const double v = c.values[i];
            if (!usable(v)) {
                flush();
                continue;
            }
            const double y = std::clamp(py(v), top, top + ph);
            points += num(px(i + 1), "%.2f") + "," + num(y, "%.2f") + " ";
        }
        flush();
        const double ly = top + 16 + 18 * static_cast<double>(ci);
        s << "<line x1=\"" << left + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 36 << "\" y2=\"" << ly
          << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        s << "<text x=\"" << left + pw + 42 << "\" y=\"" << ly + 4 << "\">" << escape_xml(c.label) << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

ReportResult build_report(std::span<const fs::path> dirs, const fs::path& out, bool log_scale) {
    ReportResult result;
    for (const auto& d : dirs) {
        std::string why;
        if (auto r = load_run(d, &why)) {
            result.runs.push_back(std::move(*r));
        } else {
            result.skipped.emplace_back(d, why);
        }
    }
    if (result.runs.empty()) throw ConfigError("no usable runs among " + std::to_string(dirs.size()) + " directories");

    fs::create_directories(out);
    write_text(out / "comparison.csv", comparison_csv(result.runs));

    std::map<std::tuple<std::string, double, std::string>, std::vector<const RunRecord*>> groups;
    std::vector<std::tuple<std::string, double, std::string>> order;
    for (const auto& r : result.runs) {
        auto key = std::make_tuple(r.setting, r.noise_std, r.metric);
        if (!groups.count(key)) order.push_back(key);
        groups[key].push_back(&r);
    }
    for (const auto& key : order) {
        const auto& [setting, noise, metric] = key;
        std::vector<Curve> curves;
        for (const RunRecord* r : groups[key]) curves.push_back({r->model, r->mean_curve});
        const std::string title = "prediction error, " + (setting.empty() ? std::string("run") : setting) +
                                  ", noise " + num(noise, "%g");
        const std::string y_label = metric == "celsius_mae" ? "MAE (C)" : "relative error";
        const fs::path path =
            out / ("errors_" + file_safe(setting.empty() ? "run" : setting) + "_noise" + file_safe(num(noise, "%g")) +
                   (log_scale ? "_log" : "") + ".svg");
        write_text(path, svg_chart(title, curves, log_scale, y_label));
        result.charts.push_back(path);
    }
    return result;
}

}  // namespace kia
