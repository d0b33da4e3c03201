#pragma once

// Serialization of every report type: CSV for curves and per-sample tables,
// JSON for summaries, plus the per-run manifest. All floating-point output is
// fixed-format %.17g so identical runs produce bit-identical files.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "carlab/carleman.hpp"
#include "carlab/config.hpp"
#include "carlab/harness.hpp"
#include "carlab/reconstruction.hpp"
#include "carlab/weights.hpp"

namespace carlab {

using json = nlohmann::json;

namespace reports {

inline std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : os_(path) {
        if (!os_) throw ConfigError("cannot open '" + path + "' for writing");
    }

    void header(const std::vector<std::string>& cols) {
        for (std::size_t i = 0; i < cols.size(); ++i) os_ << (i ? "," : "") << cols[i];
        os_ << "\n";
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
        os_ << "\n";
    }

private:
    std::ofstream os_;
};

inline void write_json(const json& j, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot open '" + path + "' for writing");
    os << j.dump(2) << "\n";
}

inline json constants_to_json(const CarlemanConstants& c) {
    json j = json::object();
    auto put = [&](const char* name, const std::optional<double>& v) {
        if (v) j[name] = *v;
    };
    put("c0", c.c0);
    put("kappa0", c.kappa0);
    put("kappa1", c.kappa1);
    put("kappa2", c.kappa2);
    put("sigma0", c.sigma0);
    put("sigma1", c.sigma1);
    put("mu", c.mu);
    put("mu0", c.mu0);
    put("mu1", c.mu1);
    put("mu2", c.mu2);
    return j;
}

// One row per s: log10 of each side (raw values overflow double for large s)
// plus the finite ratio.
inline void write_carleman_csv(const CarlemanCheckReport& rep, const std::string& path) {
    CsvWriter csv(path);
    std::vector<std::string> cols = {"s", "lhs_log10"};
    if (!rep.rows.empty()) {
        for (const auto& [name, v] : rep.rows.front().rhs) cols.push_back("rhs_" + name + "_log10");
    }
    cols.push_back("rhs_total_log10");
    cols.push_back("ratio");
    csv.header(cols);
    for (const auto& row : rep.rows) {
        std::vector<std::string> cells = {fmt(row.s), fmt(row.lhs.log10())};
        for (const auto& [name, v] : row.rhs) cells.push_back(fmt(v.log10()));
        cells.push_back(fmt(row.rhs_total().log10()));
        cells.push_back(fmt(row.ratio));
        csv.row(cells);
    }
}

inline json carleman_to_json(const CarlemanCheckReport& rep) {
    json j;
    j["lemma"] = rep.lemma;
    j["lambda"] = rep.lambda;
    j["beta"] = rep.beta;
    j["t0"] = rep.t0;
    if (!rep.field_id.empty()) j["field_id"] = rep.field_id;
    json rows = json::array();
    for (const auto& row : rep.rows) {
        json r;
        r["s"] = row.s;
        r["lhs_log10"] = row.lhs.log10();
        for (const auto& [name, v] : row.rhs) r["rhs_" + name + "_log10"] = v.log10();
        r["ratio"] = row.ratio;
        rows.push_back(r);
    }
    j["rows"] = rows;
    double worst = 0.0;
    for (const auto& row : rep.rows) worst = std::max(worst, row.ratio);
    j["max_ratio"] = worst;
    if (!rep.rows.empty()) j["ratio_at_s_min"] = rep.rows.front().ratio;
    return j;
}

inline void write_absorption_csv(const AbsorptionDiagnostics& diag, const std::string& path) {
    CsvWriter csv(path);
    csv.header({"s", "J_log10", "denominator_log10", "ratio", "decay"});
    for (const auto& row : diag.rows) {
        csv.row({fmt(row.s), fmt(row.J.log10()), fmt(row.denominator.log10()), fmt(row.ratio),
                 fmt(row.decay)});
    }
}

inline json absorption_to_json(const AbsorptionDiagnostics& diag) {
    json j;
    j["scenario"] = diag.scenario;
    if (diag.c0) j["c0"] = *diag.c0;
    if (diag.mu) j["mu"] = *diag.mu;
    json rows = json::array();
    for (const auto& row : diag.rows) {
        json r;
        r["s"] = row.s;
        r["J_log10"] = row.J.log10();
        r["denominator_log10"] = row.denominator.log10();
        r["ratio"] = row.ratio;
        r["decay"] = row.decay;
        rows.push_back(r);
    }
    j["rows"] = rows;
    if (!diag.rows.empty()) {
        j["ratio_first"] = diag.rows.front().ratio;
        j["ratio_last"] = diag.rows.back().ratio;
    }
    return j;
}

inline void write_stability_csv(const StabilityReport& rep, const std::string& path) {
    CsvWriter csv(path);
    csv.header({"grid", "sample", "sample_norm", "data_norm", "ratio", "consistency", "tag"});
    for (const auto& r : rep.rows) {
        csv.row({std::to_string(r.grid), std::to_string(r.index), fmt(r.sample_norm), fmt(r.data_norm),
                 fmt(r.ratio), r.consistency ? "1" : "0", r.tag});
    }
}

inline json stability_to_json(const StabilityReport& rep) {
    json j;
    j["experiment"] = rep.experiment;
    j["exploratory"] = rep.exploratory;
    j["max_ratio"] = rep.max_ratio;
    j["median_ratio"] = rep.median_ratio;
    json by_grid = json::object();
    for (const auto& [grid, v] : rep.max_ratio_by_grid) by_grid[std::to_string(grid)] = v;
    j["max_ratio_by_grid"] = by_grid;
    if (rep.theta_fit) j["theta_fit"] = *rep.theta_fit;
    if (rep.fit_r2) j["fit_r2"] = *rep.fit_r2;
    if (rep.theta_lower) j["theta_lower_derived"] = *rep.theta_lower;
    if (rep.c_emp) j["C_emp"] = *rep.c_emp;
    j["constants"] = constants_to_json(rep.constants);
    if (rep.cauchy_selection) {
        json s;
        s["N"] = rep.cauchy_selection->N;
        s["eps_tilde"] = rep.cauchy_selection->eps_tilde;
        s["delta_tilde"] = rep.cauchy_selection->delta_tilde;
        s["beta_lo"] = rep.cauchy_selection->beta_lo;
        s["beta_hi"] = rep.cauchy_selection->beta_hi;
        s["beta"] = rep.cauchy_selection->beta;
        j["cauchy_selection"] = s;
    }
    for (const auto& [k, v] : rep.extra) j[k] = v;
    int n_rows = 0, n_consistency = 0;
    for (const auto& r : rep.rows) {
        ++n_rows;
        if (r.consistency) ++n_consistency;
    }
    j["rows"] = n_rows;
    j["consistency_rows"] = n_consistency;
    return j;
}

inline void write_noise_csv(const NoiseStudyReport& rep, const std::string& path) {
    CsvWriter csv(path);
    csv.header({"level", "sigma", "alpha", "error", "error_omega0", "iterations"});
    for (const auto& r : rep.rows) {
        csv.row({fmt(r.level), fmt(r.sigma), fmt(r.alpha), fmt(r.error), fmt(r.error_omega0),
                 std::to_string(r.iterations)});
    }
}

inline json noise_to_json(const NoiseStudyReport& rep) {
    json j;
    j["scenario"] = rep.scenario;
    j["slope"] = rep.slope;
    j["r2"] = rep.r2;
    j["slope_ok"] = rep.slope_ok;
    j["slope_lo"] = rep.slope_lo;
    j["slope_hi"] = rep.slope_hi;
    json rows = json::array();
    for (const auto& r : rep.rows) {
        json row;
        row["level"] = r.level;
        row["sigma"] = r.sigma;
        row["alpha"] = r.alpha;
        row["error"] = r.error;
        row["error_omega0"] = r.error_omega0;
        row["iterations"] = r.iterations;
        rows.push_back(row);
    }
    j["rows"] = rows;
    return j;
}

// Reproducibility manifest written next to every run's artifacts.
inline void write_manifest(const ExperimentConfig& cfg, const std::string& subcommand,
                           const std::string& dir) {
    json j;
    j["tool"] = "carlab";
    j["version"] = "0.1.0";
    j["subcommand"] = subcommand;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(cfg.config_hash()));
    j["config_hash"] = std::string(buf);
    j["seed"] = cfg.seed;
    json grids = json::array();
    for (int g : cfg.grids) grids.push_back(g);
    j["grids"] = grids;
    json ov = json::array();
    for (const auto& o : cfg.table.overrides()) ov.push_back(o);
    j["overrides"] = ov;
    write_json(j, dir + "/manifest.json");
}

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
}

// Merges run summaries into one table with a column per named constant.
inline void merge_summaries(const std::vector<std::string>& json_paths, const std::string& out_csv) {
    static const std::vector<std::string> kConstants = {"c0",     "kappa0", "kappa1", "kappa2", "sigma0",
                                                        "sigma1", "mu",     "mu0",    "mu1",    "mu2"};
    CsvWriter csv(out_csv);
    std::vector<std::string> cols = {"file", "experiment", "max_ratio", "median_ratio", "theta_fit",
                                     "fit_r2", "slope", "exploratory"};
    for (const auto& c : kConstants) cols.push_back(c);
    csv.header(cols);
    for (const auto& path : json_paths) {
        std::ifstream is(path);
        if (!is) throw ConfigError("cannot read summary '" + path + "'");
        json j = json::parse(is, nullptr, true);
        auto cell = [&](const char* key) -> std::string {
            if (j.contains(key) && j[key].is_number()) return fmt(j[key].get<double>());
            return "";
        };
        std::vector<std::string> cells;
        cells.push_back(std::filesystem::path(path).filename().string());
        cells.push_back(j.value("experiment", j.value("scenario", std::string(""))));
        cells.push_back(cell("max_ratio"));
        cells.push_back(cell("median_ratio"));
        cells.push_back(cell("theta_fit"));
        cells.push_back(cell("fit_r2"));
        cells.push_back(cell("slope"));
        bool expl = j.contains("exploratory") && j["exploratory"].is_boolean() && j["exploratory"].get<bool>();
        cells.push_back(expl ? "1" : "0");
        json cj = j.value("constants", json::object());
        for (const auto& c : kConstants) {
            if (cj.contains(c)) {
                cells.push_back(fmt(cj[c].get<double>()));
            } else if (j.contains(c) && j[c].is_number()) {
                cells.push_back(fmt(j[c].get<double>()));
            } else {
                cells.push_back("");
            }
        }
        csv.row(cells);
    }
}

}  // namespace reports

}  // namespace carlab
