#pragma once

// Command orchestration: validate -> cones -> numeraire -> change -> deflate
// -> verify, with JSON/CSV reporting. Exit status 0 = all checks pass,
// 2 = a mathematically meaningful negative verdict, 1 = operational error.

#include "nupbr/deflator.hpp"
#include "nupbr/io.hpp"
#include "nupbr/profit_oracle.hpp"

#include <Eigen/Core>

#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace nupbr::cli {

inline constexpr const char* kVersion = "1.0.0";

enum class Mode { PointwiseGrid, Lattice };
enum class Format { Json, Csv, Auto };
enum class Command { Validate, Cones, Numeraire, Deflate, Verify, Report };

struct RunConfig {
    std::string model_path;
    Mode mode = Mode::Lattice;
    double tolerance = 1e-10;
    std::uint64_t seed = 1;
    Format output_format = Format::Auto;
    Command command = Command::Report;
    int verify_strategies = 100;
};

struct RunResult {
    int exit_code = 0;
    std::string output;
    std::string diagnostics;  // human-readable, for stderr
};

inline std::optional<Command> parse_command(const std::string& s) {
    if (s == "validate") return Command::Validate;
    if (s == "cones") return Command::Cones;
    if (s == "numeraire") return Command::Numeraire;
    if (s == "deflate") return Command::Deflate;
    if (s == "verify") return Command::Verify;
    if (s == "report") return Command::Report;
    return std::nullopt;
}

inline const char* to_string(Command c) {
    switch (c) {
    case Command::Validate: return "validate";
    case Command::Cones: return "cones";
    case Command::Numeraire: return "numeraire";
    case Command::Deflate: return "deflate";
    case Command::Verify: return "verify";
    case Command::Report: return "report";
    }
    return "?";
}

namespace detail {

using io::json;

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline json nullable(const std::optional<Vector>& v) {
    return v ? io::to_json(*v) : json(nullptr);
}

struct Loaded {
    std::optional<CharacteristicGrid> grid;
    std::optional<LatticeModel> lattice;
    io::IngestLog log;
    json source;
};

inline Loaded load(const RunConfig& cfg) {
    std::ifstream in(cfg.model_path);
    if (!in) throw Error(ErrorKind::InvalidInput, "cannot read model file '" + cfg.model_path + "'");
    Loaded out;
    try {
        out.source = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::InvalidInput, std::string("model file is not valid JSON: ") + e.what());
    }
    if (cfg.mode == Mode::PointwiseGrid) out.grid = io::grid_from_json(out.source, &out.log);
    else out.lattice = io::lattice_from_json(out.source);
    return out;
}

/// The unit of work: grid slices or internal lattice nodes.
struct Unit {
    std::size_t index;
    LocalCharacteristic lc;
};

inline std::vector<Unit> units(const Loaded& m) {
    std::vector<Unit> out;
    if (m.grid) {
        for (std::size_t i = 0; i < m.grid->slices.size(); ++i) out.push_back({i, m.grid->slices[i]});
    } else {
        for (std::size_t i : m.lattice->internal_nodes()) out.push_back({i, node_characteristic(*m.lattice, i)});
    }
    return out;
}

inline const char* unit_name(const Loaded& m) { return m.grid ? "slice" : "node"; }

struct Section {
    json body;
    std::vector<std::string> findings;
    std::string csv;
};

inline Section validate_section(const Loaded& m) {
    Section s;
    s.body = json::array();
    s.csv = "index,code,magnitude,message\n";
    for (const auto& u : units(m)) {
        const auto rep = validate(u.lc);
        json v = json::array();
        for (const auto& viol : rep.violations) {
            v.push_back(json{{"code", viol.code}, {"message", viol.message}, {"magnitude", viol.magnitude}});
            s.findings.push_back(std::string(unit_name(m)) + " " + std::to_string(u.index) + ": " + viol.message);
            s.csv += std::to_string(u.index) + "," + viol.code + "," + fmt(viol.magnitude) + ",\"" + viol.message + "\"\n";
        }
        s.body.push_back(json{{"index", u.index}, {"violations", std::move(v)}});
    }
    return s;
}

inline Section cones_section(const Loaded& m) {
    Section s;
    s.body = json::array();
    s.csv = "index,immediate_arbitrage,p,lp_value\n";
    for (const auto& u : units(m)) {
        const auto rep = analyze_cones(u.lc);
        json basis = json::array();
        for (const auto& n : rep.null_space_basis) basis.push_back(io::to_json(n));
        json arb = nullptr;
        std::string pstr;
        if (rep.immediate_arbitrage_witness) {
            arb = json{{"p", io::to_json(*rep.immediate_arbitrage_witness)}};
            s.findings.push_back(std::string(unit_name(m)) + " " + std::to_string(u.index) +
                                 ": immediate arbitrage");
            for (Eigen::Index k = 0; k < rep.immediate_arbitrage_witness->size(); ++k)
                pstr += (k ? " " : "") + fmt((*rep.immediate_arbitrage_witness)(k));
        }
        s.body.push_back(json{{"index", u.index},
                              {"N_basis", std::move(basis)},
                              {"immediate_arbitrage", std::move(arb)},
                              {"margins", json{{"lp_value", rep.margins.lp_value},
                                               {"min_exposure", rep.margins.min_exposure},
                                               {"drift_term", rep.margins.drift_term},
                                               {"positive_mass", rep.margins.positive_mass}}}});
        s.csv += std::to_string(u.index) + "," + (rep.immediate_arbitrage_witness ? "true" : "false") +
                 "," + pstr + "," + fmt(rep.margins.lp_value) + "\n";
    }
    return s;
}

inline Section numeraire_section(const Loaded& m, const RunConfig& cfg) {
    Section s;
    json per = json::array();
    s.csv = "index,status,rho,growth,rel_max,psi\n";
    std::vector<PreNumeraire> results;
    for (const auto& u : units(m)) {
        SolverOptions opt;
        opt.seed = cfg.seed + u.index;
        auto r = pre_numeraire(u.lc, opt);
        if (!r.solved())
            s.findings.push_back(std::string(unit_name(m)) + " " + std::to_string(u.index) +
                                 ": no pre-numeraire (" + to_string(r.status) + ")");
        else if (r.rel_max > 1e-8)
            s.findings.push_back(std::string(unit_name(m)) + " " + std::to_string(u.index) +
                                 ": optimality certificate rel_max = " + fmt(r.rel_max));
        std::string rstr;
        for (Eigen::Index k = 0; k < r.rho.size(); ++k) rstr += (k ? " " : "") + fmt(r.rho(k));
        s.csv += std::to_string(u.index) + "," + to_string(r.status) + "," + rstr + "," +
                 fmt(r.growth_value) + "," + fmt(r.rel_max) + "," + fmt(r.psi_value) + "\n";
        per.push_back(json{{"index", u.index},
                           {"status", to_string(r.status)},
                           {"rho", io::to_json(r.rho)},
                           {"growth", r.growth_value},
                           {"rel_max", r.rel_max},
                           {"rel_max_flipped_sign", r.flipped_rel_max},
                           {"psi", r.psi_value},
                           {"gradient_norm", r.gradient_norm},
                           {"iterations", r.iterations},
                           {"witness", nullable(r.arbitrage_witness)}});
        results.push_back(std::move(r));
    }
    s.body = json{{"per_unit", std::move(per)}};
    if (m.grid) {
        const auto integ = check_integrability(*m.grid, results);
        s.body["integrability"] =
            integ.value ? json{{"psi_dG_sum", *integ.value}, {"failing_slice", nullptr}}
                        : json{{"psi_dG_sum", nullptr}, {"failing_slice", *integ.failing_slice}};
    } else {
        std::vector<Vector> rho(m.lattice->size(), Vector::Zero(m.lattice->dim()));
        bool all = true;
        std::size_t k = 0;
        for (std::size_t i : m.lattice->internal_nodes()) {
            all = all && results[k].solved();
            rho[i] = results[k++].rho;
        }
        if (all) {
            const auto V = wealth_path(*m.lattice, rho);
            s.body["V_star"] = V;
            s.body["supermartingale_1_over_V_star"] = [&] {
                ProcessOnLattice inv(V.size());
                for (std::size_t i = 0; i < V.size(); ++i) inv[i] = 1.0 / V[i];
                return verify_supermartingale(*m.lattice, inv).max_violation;
            }();
        }
    }
    return s;
}

inline json slice_json(std::size_t index, const SliceDeflation& s) {
    json j{{"index", index},
           {"within_horizon", s.within_horizon},
           {"in_D", s.in_D},
           {"residual", s.residual}};
    if (!s.in_D) {
        j["off_D_drift"] = s.off_D_drift;
        return j;
    }
    j["beta"] = s.d_and_f->beta;
    j["shift"] = io::to_json(s.d_and_f->shift);
    j["F"] = io::to_json(s.d_and_f->F);
    j["hypothesis"] = json{{"holds", s.hypothesis.holds},
                           {"max_value", s.hypothesis.max_value},
                           {"witness", nullable(s.hypothesis.witness)}};
    if (s.rebalance) {
        json r{{"status", to_string(s.rebalance->status)}, {"optimum", s.rebalance->optimum}};
        if (s.rebalance->result) {
            r["tv"] = s.rebalance->result->tv;
            r["F_check"] = io::to_json(s.rebalance->result->F_check);
            r["density"] = s.rebalance->result->density_p;
            r["floor"] = s.rebalance->result->floor;
        }
        j["rebalance"] = std::move(r);
    }
    json U = json::array();
    for (const auto& e : s.U.entries) U.push_back(json::array({io::to_json(e.point), e.weight}));
    j["U"] = std::move(U);
    j["tv_budget_used"] = s.tv_budget_used;
    j["nu_new"] = io::to_json(s.lc_new.nu);
    return j;
}

inline Section deflate_section(const Loaded& m, const RunConfig& cfg, DeflatorBundle& bundle) {
    Section s;
    SolverOptions opt;
    opt.seed = cfg.seed;
    bundle = m.grid ? deflate_grid(*m.grid, cfg.tolerance) : deflate_lattice(*m.lattice, opt, cfg.tolerance);
    s.findings = bundle.findings;
    json slices = json::array();
    s.csv = "index,in_D,beta,tv,residual\n";
    for (std::size_t i = 0; i < bundle.slices.size(); ++i) {
        if (!bundle.slices[i]) continue;
        const auto& sl = *bundle.slices[i];
        slices.push_back(slice_json(i, sl));
        const double tv = sl.rebalance && sl.rebalance->result ? sl.rebalance->result->tv : 0.0;
        s.csv += std::to_string(i) + "," + (sl.in_D ? "true" : "false") + "," +
                 (sl.in_D ? fmt(sl.d_and_f->beta) : std::string()) + "," + fmt(tv) + "," +
                 fmt(sl.residual) + "\n";
    }
    s.body = json{{"units", std::move(slices)},
                  {"lepingle_sum", bundle.lepingle_sum},
                  {"reference_total", bundle.reference_total},
                  {"lepingle_slack", bundle.lepingle_slack},
                  {"max_compensator", bundle.max_compensator}};
    if (m.lattice && !bundle.xi.empty()) {
        json rho = json::array();
        for (const auto& r : bundle.rho) rho.push_back(io::to_json(r));
        s.body["rho"] = std::move(rho);
        s.body["V_star"] = bundle.V_star;
        s.body["EM"] = bundle.EM;
        s.body["xi"] = bundle.xi;
    }
    s.body["findings"] = bundle.findings;
    return s;
}

inline Section verify_section(const Loaded& m, const RunConfig& cfg, const DeflatorBundle& bundle) {
    Section s;
    s.csv = "node,H-id,violation\n";
    if (m.grid) {
        // Pointwise mode: the verifiable statement is the zero residual drift.
        s.csv = "slice,check,value\n";
        json rows = json::array();
        for (std::size_t i = 0; i < bundle.slices.size(); ++i) {
            const auto& sl = *bundle.slices[i];
            if (!sl.within_horizon) continue;
            const char* check = sl.in_D ? "residual" : "off_D_drift";
            s.csv += std::to_string(i) + "," + check + "," + fmt(sl.residual) + "\n";
            rows.push_back(json{{"slice", i}, {"check", check}, {"value", sl.residual}});
        }
        s.body = json{{"rows", std::move(rows)}};
        return s;
    }
    if (bundle.xi.empty()) {
        s.findings.push_back("no deflator assembled; nothing to verify");
        s.body = json{{"rows", json::array()}};
        return s;
    }
    auto strategies = standard_strategies(*m.lattice);
    std::mt19937_64 rng(cfg.seed);
    for (int k = 0; k < cfg.verify_strategies; ++k)
        strategies.push_back(random_admissible_strategy(*m.lattice, rng));
    const auto ver = verify_deflator(*m.lattice, bundle.xi, strategies);
    json rows = json::array();
    for (const auto& r : ver.rows) {
        s.csv += std::to_string(r.node) + "," + std::to_string(r.strategy) + "," + fmt(r.violation) + "\n";
        rows.push_back(json{{"node", r.node}, {"H_id", r.strategy}, {"violation", r.violation}});
    }
    if (ver.max_violation > cfg.tolerance)
        s.findings.push_back("deflator verification violation " + fmt(ver.max_violation));
    s.body = json{{"rows", std::move(rows)}, {"max_violation", ver.max_violation}};
    return s;
}

inline Section oracle_section(const Loaded& m, const RunConfig& cfg) {
    Section s;
    const auto& L = *m.lattice;
    if (L.depth() > kOracleMaxDepth || L.max_branching() > kOracleMaxBranching) {
        s.body = json{{"skipped", "model exceeds oracle scale (depth <= 4, branching <= 3)"}};
        return s;
    }
    SolverOptions opt;
    opt.seed = cfg.seed;
    const auto v = brute_force_unbounded_profit(L, {1e1, 1e2, 1e3, 1e4, 1e6}, opt);
    json w = nullptr;
    if (v.witness)
        w = json{{"node", v.witness->node}, {"p", io::to_json(v.witness->direction)},
                 {"min_gain", v.witness->min_gain}};
    s.body = json{{"nupbr_holds", v.holds}, {"K_levels", v.K_levels},
                  {"probability", v.probability}, {"witness", std::move(w)}};
    if (!v.holds) s.findings.push_back("NUPBR fails (unbounded profit witness)");
    return s;
}

inline json provenance(const RunConfig& cfg) {
    return json{{"tool", "nupbr"},
                {"version", kVersion},
                {"schema_version", io::kSchemaVersion},
                {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                              "." + std::to_string(EIGEN_MINOR_VERSION)},
                {"command", to_string(cfg.command)},
                {"mode", cfg.mode == Mode::Lattice ? "lattice" : "grid"},
                {"seed", cfg.seed},
                {"tolerance", cfg.tolerance},
                {"numeraire_rel_tolerance", 1e-8},
                {"psd_tolerance", kPsdTolerance},
                {"equality_tolerance", kEqualityTolerance},
                {"objective_sign_tolerance", kObjectiveSignTolerance}};
}

} // namespace detail

inline RunResult run(const RunConfig& cfg) {
    using detail::json;
    RunResult result;
    try {
        require(cfg.tolerance > 0.0, ErrorKind::InvalidInput, "tolerance must be positive");
        const auto loaded = detail::load(cfg);
        const bool csv = cfg.output_format == Format::Csv ||
                         (cfg.output_format == Format::Auto && cfg.command == Command::Verify);
        std::vector<std::string> findings;
        json doc = json::object();
        std::string csv_out;
        auto take = [&](const char* key, detail::Section s) {
            findings.insert(findings.end(), s.findings.begin(), s.findings.end());
            doc[key] = std::move(s.body);
            csv_out += s.csv;
        };
        DeflatorBundle bundle;

        switch (cfg.command) {
        case Command::Validate: {
            auto s = detail::validate_section(loaded);
            if (loaded.lattice) {
                const auto issues = validate_lattice(*loaded.lattice);
                s.findings.insert(s.findings.end(), issues.begin(), issues.end());
            }
            doc["warnings"] = loaded.log.warnings;
            take("validation", std::move(s));
            break;
        }
        case Command::Cones: take("cones", detail::cones_section(loaded)); break;
        case Command::Numeraire: take("numeraire", detail::numeraire_section(loaded, cfg)); break;
        case Command::Deflate: take("deflator", detail::deflate_section(loaded, cfg, bundle)); break;
        case Command::Verify:
            detail::deflate_section(loaded, cfg, bundle);
            take("verification", detail::verify_section(loaded, cfg, bundle));
            break;
        case Command::Report: {
            doc["provenance"] = detail::provenance(cfg);
            doc["model"] = loaded.grid ? io::to_json(*loaded.grid) : io::to_json(*loaded.lattice);
            doc["warnings"] = loaded.log.warnings;
            take("validation", detail::validate_section(loaded));
            take("cones", detail::cones_section(loaded));
            take("numeraire", detail::numeraire_section(loaded, cfg));
            take("deflator", detail::deflate_section(loaded, cfg, bundle));
            take("verification", detail::verify_section(loaded, cfg, bundle));
            if (loaded.lattice) take("nupbr_oracle", detail::oracle_section(loaded, cfg));
            break;
        }
        }
        doc["findings"] = findings;
        doc["status"] = findings.empty() ? "pass" : "findings";
        result.exit_code = findings.empty() ? 0 : 2;
        result.output = csv ? csv_out : io::dump17(doc);
        for (const auto& f : findings) result.diagnostics += "finding: " + f + "\n";
    } catch (const std::exception& e) {
        result.exit_code = 1;
        result.output.clear();
        result.diagnostics = std::string("error: ") + e.what() + "\n";
    }
    return result;
}

} // namespace nupbr::cli
