#pragma once

// CSV tables, gnuplot scripts and the provenance record written by the experiments.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dofrac/error.hpp"
#include "dofrac/forward.hpp"

namespace dofrac {

inline constexpr const char* kVersion = "0.1.0";

/// Shortest text that round-trips to the same double (17 significant digits).
inline std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// RFC 4180 field quoting for text cells.
inline std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

/// Row-oriented CSV builder. Rows are terminated with CRLF as RFC 4180 asks.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    CsvTable& row() {
        rows_.emplace_back();
        return *this;
    }
    CsvTable& cell(double v) { return text(format_real(v)); }
    CsvTable& cell(long long v) { return text(std::to_string(v)); }
    CsvTable& cell(int v) { return text(std::to_string(v)); }
    CsvTable& cell(const std::string& s) { return text(csv_quote(s)); }
    CsvTable& cell(const char* s) { return cell(std::string(s)); }

    std::size_t rows() const { return rows_.size(); }

    std::string str() const {
        std::string out = join(header_);
        for (const auto& r : rows_) out += join(r);
        return out;
    }

    /// Writes the table; an empty table is an error.
    void write(const std::filesystem::path& path) const {
        if (rows_.empty()) throw Error("refusing to write " + path.string() + " without data rows");
        for (const auto& r : rows_) {
            if (r.size() != header_.size()) throw Error("ragged row in " + path.string());
        }
        write_text(path, str());
    }

    static void write_text(const std::filesystem::path& path, const std::string& text) {
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("cannot write " + path.string());
        out << text;
        if (!out) throw Error("write failed for " + path.string());
    }

private:
    CsvTable& text(std::string s) {
        if (rows_.empty()) throw Error("CsvTable: cell() before row()");
        rows_.back().push_back(std::move(s));
        return *this;
    }
    static std::string join(const std::vector<std::string>& cells) {
        std::string s;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) s += ',';
            s += cells[i];
        }
        return s + "\r\n";
    }

    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

inline CsvTable trace_table(const ObservationTrace& tr) {
    CsvTable t({"t", "g"});
    for (std::size_t n = 0; n < tr.size(); ++n) t.row().cell(tr.t[n]).cell(tr.g[n]);
    return t;
}

/// Reads a two-column `t,g` file as written by trace_table.
inline ObservationTrace read_trace(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw Error(path.string() + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "t,g") throw Error(path.string() + ": expected header t,g");
    ObservationTrace tr;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw Error(path.string() + ": malformed row '" + line + "'");
        try {
            tr.t.push_back(std::stod(line.substr(0, comma)));
            tr.g.push_back(std::stod(line.substr(comma + 1)));
        } catch (const std::exception&) {
            throw Error(path.string() + ": malformed row '" + line + "'");
        }
    }
    if (tr.t.empty()) throw Error(path.string() + ": no data rows");
    return tr;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline void write_provenance(const std::filesystem::path& dir, const std::string& subcommand, const nlohmann::json& config,
                             std::uint64_t seed) {
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(config.dump())));
    nlohmann::json rec = {
        {"subcommand", subcommand},
        {"config_hash", std::string("fnv1a64:") + hash},
        {"seed", seed},
        {"version", kVersion},
        {"compiler", __VERSION__},
    };
    CsvTable::write_text(dir / "run.json", rec.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// gnuplot scripts

enum class PlotKind { SmallTime, LargeTime, Recovery, ErrorHistory };

struct PlotSeries {
    std::string file;   // CSV path relative to the script
    std::string title;
    std::string using_; // gnuplot `using` clause
};

inline const char* plot_name(PlotKind k) {
    switch (k) {
        case PlotKind::SmallTime: return "smalltime";
        case PlotKind::LargeTime: return "largetime";
        case PlotKind::Recovery: return "recovery";
        case PlotKind::ErrorHistory: return "error-history";
    }
    return "plot";
}

/// Writes `<dir>/<kind>.gp`; every referenced CSV must already exist.
inline std::filesystem::path emit_plot_script(const std::filesystem::path& dir, PlotKind kind,
                                              const std::vector<PlotSeries>& series) {
    if (series.empty()) throw Error("emit_plot_script: no series");
    for (const auto& s : series) {
        if (!std::filesystem::exists(dir / s.file)) throw Error("emit_plot_script: missing input " + (dir / s.file).string());
    }
    std::ostringstream gp;
    gp << "set datafile separator ','\n";
    gp << "set key autotitle columnhead\n";
    gp << "set terminal pngcairo size 900,650\n";
    gp << "set output '" << plot_name(kind) << ".png'\n";
    switch (kind) {
        case PlotKind::SmallTime:
            gp << "set logscale xy\nset format xy '%.0e'\nset xlabel 't'\nset ylabel '|g(t) - g(0)|'\n";
            break;
        case PlotKind::LargeTime:
            gp << "set logscale xy\nset format xy '%.0e'\nset xlabel 't'\nset ylabel '|g(t) - g(inf)|'\n";
            break;
        case PlotKind::Recovery:
            gp << "set xlabel 'alpha'\nset ylabel 'mu(alpha)'\n";
            break;
        case PlotKind::ErrorHistory:
            gp << "set logscale y\nset xlabel 'iteration k'\nset ylabel 'L2(0,1) error'\n";
            break;
    }
    gp << "plot ";
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (i) gp << ", \\\n     ";
        gp << "'" << series[i].file << "' using " << series[i].using_ << " with lines title '" << series[i].title << "'";
    }
    gp << "\n";
    const auto path = dir / (std::string(plot_name(kind)) + ".gp");
    CsvTable::write_text(path, gp.str());
    return path;
}

}  // namespace dofrac
