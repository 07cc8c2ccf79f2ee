#pragma once
// Versioned CSV series, JSON reports, SVG line plots and SHA-256 digests.

#include <openssl/evp.h>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "core.hpp"
#include "report.hpp"

namespace kflow::io {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

inline constexpr int kFormatVersion = 1;
inline constexpr const char* kArtifactVersion = "1.0.0";

/// Shortest round-trip decimal form; "nan"/"inf" spelled out.
inline std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

/// JSON number, or null for non-finite values.
inline json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, data.data(), data.size()) != 1 || EVP_DigestFinal_ex(ctx, md, &len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw Error("sha256 failed");
    }
    EVP_MD_CTX_free(ctx);
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return os.str();
}

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw MissingArtifacts("cannot read " + p.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline void write_file(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + p.string());
    out << text;
}

/// CSV with a version line "# kflow-<kind> v1" ahead of the column header.
class CsvTable {
public:
    CsvTable(std::string kind, std::vector<std::string> columns)
        : kind_(std::move(kind)), cols_(std::move(columns)) {}
    void row(const std::vector<double>& vals) {
        if (vals.size() != cols_.size()) throw Error("csv row width mismatch");
        rows_.push_back(vals);
    }
    const std::vector<std::string>& columns() const { return cols_; }
    const std::vector<std::vector<double>>& rows() const { return rows_; }
    std::string str() const {
        std::string out = "# kflow-" + kind_ + " v" + std::to_string(kFormatVersion) + "\n";
        for (std::size_t i = 0; i < cols_.size(); ++i) out += (i ? "," : "") + cols_[i];
        out += "\n";
        for (const auto& r : rows_) {
            for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + num(r[i]);
            out += "\n";
        }
        return out;
    }
    void write(const fs::path& p) const { write_file(p, str()); }

    /// Reads a table written by str(); the kind is taken from the version line.
    static CsvTable parse(const std::string& text) {
        std::istringstream in(text);
        std::string line;
        std::getline(in, line);
        const std::string pre = "# kflow-";
        if (line.rfind(pre, 0) != 0) throw ConfigError("csv without kflow version line");
        const auto sp = line.find(" v", pre.size());
        if (sp == std::string::npos || std::stoi(line.substr(sp + 2)) != kFormatVersion)
            throw ConfigError("unsupported csv version: " + line);
        const std::string kind = line.substr(pre.size(), sp - pre.size());
        std::vector<std::string> cols;
        std::getline(in, line);
        std::istringstream hs(line);
        for (std::string c; std::getline(hs, c, ',');) cols.push_back(c);
        CsvTable t(kind, cols);
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::vector<double> v;
            std::istringstream cs(line);
            std::string c;
            while (std::getline(cs, c, ',')) v.push_back(std::strtod(c.c_str(), nullptr));
            t.row(v);
        }
        return t;
    }
    const std::string& kind() const { return kind_; }

private:
    std::string kind_;
    std::vector<std::string> cols_;
    std::vector<std::vector<double>> rows_;
};

// ---------------------------------------------------------------------------------------
// Reports.

inline const char* kind_name(EstimateReport::Kind k) {
    switch (k) {
        case EstimateReport::Kind::LowerBound: return "lower";
        case EstimateReport::Kind::UpperBound: return "upper";
        case EstimateReport::Kind::Record: return "record";
    }
    return "?";
}

inline json to_json(const EstimateReport& r) {
    json m = json::object();
    for (const auto& [k, v] : r.measured) m[k] = jnum(v);
    return {{"name", r.name},
            {"kind", kind_name(r.kind)},
            {"pass", r.pass()},
            {"worst_violation", jnum(r.worst_violation)},
            {"tolerance", jnum(r.tolerance)},
            {"budget", jnum(r.budget)},
            {"x", jnum(r.x)},
            {"time", jnum(r.time)},
            {"measured", m},
            {"note", r.note}};
}

inline json to_json(const ReportList& rs) {
    json a = json::array();
    for (const auto& r : rs) a.push_back(to_json(r));
    return a;
}

inline EstimateReport report_from_json(const json& j) {
    EstimateReport r;
    auto d = [](const json& v) { return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>(); };
    r.name = j.at("name").get<std::string>();
    const std::string k = j.at("kind").get<std::string>();
    r.kind = k == "lower" ? EstimateReport::Kind::LowerBound
             : k == "upper" ? EstimateReport::Kind::UpperBound
                            : EstimateReport::Kind::Record;
    r.worst_violation = d(j.at("worst_violation"));
    r.tolerance = d(j.at("tolerance"));
    r.budget = j.at("budget").is_null() ? std::numeric_limits<double>::infinity() : j.at("budget").get<double>();
    r.x = d(j.at("x"));
    r.time = d(j.at("time"));
    for (const auto& [key, v] : j.at("measured").items()) r.measured[key] = d(v);
    r.note = j.value("note", "");
    return r;
}

/// Report file: {"format_version": 1, "kind": "reports", "context": {...}, "reports": [...]}.
inline json report_document(const ReportList& rs, json context) {
    return {{"format_version", kFormatVersion}, {"kind", "reports"}, {"context", std::move(context)},
            {"reports", to_json(rs)}};
}

// ---------------------------------------------------------------------------------------
// SVG line plots.

struct Series {
    std::string label;
    std::vector<double> x, y;
};

/// Self-contained SVG with one polyline per series. Log axes drop nonpositive points.
inline std::string svg_plot(const std::string& title, const std::string& xlabel,
                            const std::string& ylabel, const std::vector<Series>& series,
                            bool logx = false, bool logy = false) {
    const double W = 640, H = 420, L = 70, R = 20, T = 40, B = 50;
    auto tx = [&](double v) { return logx ? std::log10(v) : v; };
    auto ty = [&](double v) { return logy ? std::log10(v) : v; };
    auto ok = [&](double x, double y) {
        return std::isfinite(x) && std::isfinite(y) && (!logx || x > 0) && (!logy || y > 0);
    };
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i)
            if (ok(s.x[i], s.y[i])) {
                x0 = std::min(x0, tx(s.x[i]));
                x1 = std::max(x1, tx(s.x[i]));
                y0 = std::min(y0, ty(s.y[i]));
                y1 = std::max(y1, ty(s.y[i]));
            }
    if (!(x0 <= x1)) x0 = 0, x1 = 1;
    if (!(y0 <= y1)) y0 = 0, y1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;
    auto px = [&](double v) { return L + (tx(v) - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double v) { return H - B - (ty(v) - y0) / (y1 - y0) * (H - T - B); };
    static const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    o << "<!-- kflow-plot v" << kFormatVersion << " -->\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
    o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    auto tick = [&](double v, bool lg) { return lg ? "1e" + num(std::round(v * 100) / 100) : num(std::round(v * 1e4) / 1e4); };
    for (int k = 0; k <= 4; ++k) {
        const double fx = x0 + (x1 - x0) * k / 4.0, fy = y0 + (y1 - y0) * k / 4.0;
        const double X = L + (W - L - R) * k / 4.0, Y = H - B - (H - T - B) * k / 4.0;
        o << "<text x=\"" << X << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"11\">"
          << tick(fx, logx) << "</text>\n";
        o << "<text x=\"" << L - 6 << "\" y=\"" << Y + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
          << tick(fy, logy) << "</text>\n";
    }
    o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\" font-size=\"13\">"
      << xlabel << "</text>\n";
    o << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" transform=\"rotate(-90 16 " << (T + H - B) / 2
      << ")\" text-anchor=\"middle\" font-size=\"13\">" << ylabel << "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* c = colours[k % 6];
        o << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i)
            if (ok(s.x[i], s.y[i])) o << num(std::round(px(s.x[i]) * 100) / 100) << "," << num(std::round(py(s.y[i]) * 100) / 100) << " ";
        o << "\"/>\n";
        o << "<text x=\"" << W - R - 4 << "\" y=\"" << T + 14 * (k + 1) << "\" text-anchor=\"end\" font-size=\"11\" fill=\""
          << c << "\">" << s.label << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

/// Plot of every column of a table against its first column.
inline std::string svg_from_table(const CsvTable& t, const std::string& title, bool logx = false,
                                  bool logy = false) {
    std::vector<Series> ss;
    for (std::size_t c = 1; c < t.columns().size(); ++c) {
        Series s{t.columns()[c], {}, {}};
        for (const auto& r : t.rows()) {
            s.x.push_back(r[0]);
            s.y.push_back(r[c]);
        }
        ss.push_back(std::move(s));
    }
    return svg_plot(title, t.columns().empty() ? "" : t.columns()[0], "", ss, logx, logy);
}

}  // namespace kflow::io
