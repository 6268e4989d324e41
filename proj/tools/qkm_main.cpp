#include "suites.hpp"

#include <qkm/btr.hpp>
#include <qkm/correlators.hpp>
#include <qkm/curve.hpp>
#include <qkm/graphs.hpp>
#include <qkm/identities.hpp>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace {

using qkm::cplx;
using qkm::Rational;
using json = nlohmann::json;

json default_config() {
    return json::parse(R"({
      "model": {"e": ["1/2", "3/4"], "r": ["1", "2"], "N": "3", "lambda": 0.02},
      "family": {"mode": "fixed_curve", "epsilon": [0.45, 0.82], "rho": [1, 3], "N": 1,
                 "lambda_min": 0.0001, "lambda_max": 0.2},
      "orders": {"counts": 5, "omega1_enum": 4, "omega2_enum": 3, "omega3_enum": 2, "expand": 3, "verify": 2},
      "contour": {"radius": 0.02, "nodes": 64},
      "lambda_grid": {"start": 0.005, "stop": 0.2, "count": 40},
      "samples_per_cut": 400,
      "seed": 1,
      "btr_points": 20,
      "quadrangulation_lambda_sign": -1
    })");
}

/// Deep merge of `over` into `base`.
void merge(json& base, const json& over) {
    for (auto it = over.begin(); it != over.end(); ++it) {
        if (it->is_object() && base.contains(it.key()) && base[it.key()].is_object())
            merge(base[it.key()], *it);
        else
            base[it.key()] = *it;
    }
}

std::string sha256_hex(const std::string& text) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), text.data(), text.size()) != 1 || EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
        throw std::runtime_error("sha256 failed");
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    return os.str();
}

Rational as_rational(const json& j) {
    if (j.is_string()) return qkm::parse_rational(j.get<std::string>());
    if (j.is_number_integer()) return Rational(j.get<long>());
    if (j.is_number()) return qkm::parse_rational(j.dump());
    throw std::invalid_argument("expected a rational number");
}

qkm::ModelSpec model_from(const json& cfg) {
    const json& m = cfg.at("model");
    qkm::ModelSpec spec;
    for (const auto& x : m.at("e")) spec.e.push_back(as_rational(x));
    for (const auto& x : m.at("r")) spec.r.push_back(as_rational(x));
    spec.N = as_rational(m.at("N"));
    spec.lambda = m.value("lambda", 0.0);
    spec.validate();
    return spec;
}

qkm::CurveFamilySpec family_from(const json& cfg) {
    const json& f = cfg.at("family");
    double lmin = f.value("lambda_min", 0.0), lmax = f.value("lambda_max", 1.0);
    qkm::CurveFamilySpec fam;
    std::string mode = f.value("mode", "fixed_curve");
    if (mode == "fixed_model") {
        fam = qkm::CurveFamilySpec::fixed_model(model_from(cfg), lmin, lmax);
    } else if (mode == "fixed_curve") {
        fam = qkm::CurveFamilySpec::fixed_curve(f.at("epsilon").get<std::vector<double>>(), f.at("rho").get<std::vector<double>>(),
                                                lmin, lmax, f.value("N", 1.0));
    } else {
        throw std::invalid_argument("family mode must be fixed_curve or fixed_model");
    }
    fam.validate();
    return fam;
}

qkm::ContourSpec contour_from(const json& cfg) {
    qkm::ContourSpec c{0.0, cfg.at("contour").value("radius", 0.02), cfg.at("contour").value("nodes", 64)};
    c.validate();
    return c;
}

std::vector<double> lambda_grid(const json& cfg) {
    const json& g = cfg.at("lambda_grid");
    if (g.is_array()) return g.get<std::vector<double>>();
    double a = g.at("start").get<double>(), b = g.at("stop").get<double>();
    int n = g.at("count").get<int>();
    if (n < 1) throw std::invalid_argument("lambda grid needs at least one point");
    std::vector<double> out;
    for (int i = 0; i < n; ++i) out.push_back(n == 1 ? a : a + (b - a) * i / (n - 1));
    return out;
}

/// Destination stream: stdout, or a file whose relative path is placed under QKM_OUTPUT_DIR when set.
class Output {
public:
    explicit Output(const std::string& path) {
        if (path.empty() || path == "-") return;
        std::string full = path;
        if (const char* dir = std::getenv("QKM_OUTPUT_DIR"); dir && *dir && path.front() != '/') full = std::string(dir) + "/" + path;
        file_.open(full);
        if (!file_) throw std::runtime_error("cannot open output file " + full);
    }
    std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

private:
    std::ofstream file_;
};

struct Context {
    json config;
    std::string hash;
};

void csv_header(std::ostream& os, const std::string& schema, const Context& ctx) {
    os << "# schema=" << schema << " config_sha256=" << ctx.hash << "\n";
}

std::string num(double x) {
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

// ---------------------------------------------------------------- subcommands

int cmd_counts(const Context& ctx, std::ostream& os) {
    const json& o = ctx.config.at("orders");
    int order = o.value("counts", 5);
    auto rows = qkm::count_table(order, o.value("omega1_enum", 4), o.value("omega2_enum", 3), o.value("omega3_enum", 2), true);
    csv_header(os, "qkm.counts/1", ctx);
    os << "order,omega1_count,omega2_count,omega2_tr,omega2_btr,omega3_count,omega1_source,omega2_source,omega3_source\n";
    for (const auto& r : rows) {
        std::string o1 = r.omega1_enum ? r.omega1_enum->get_str() : r.omega1_closed.get_str();
        std::string o2 = r.omega2_enum ? r.omega2_enum->get_str() : r.omega2_closed.get_str();
        std::string o3;
        std::string s3;
        if (r.omega3_enum) {
            o3 = r.omega3_enum->get_str();
            s3 = "enumeration";
        } else if (r.omega3_closed) {
            o3 = std::to_string(std::llround(*r.omega3_closed));
            s3 = "contour";
        }
        os << r.order << "," << o1 << "," << o2 << "," << r.omega2_tr.get_str() << "," << r.omega2_btr.get_str() << "," << o3 << ","
           << (r.omega1_enum ? "enumeration" : "closed_form") << "," << (r.omega2_enum ? "enumeration" : "closed_form") << "," << s3
           << "\n";
    }
    return 0;
}

int cmd_verify(const Context& ctx, const std::string& suite, std::ostream& os) {
    const json& cfg = ctx.config;
    std::mt19937_64 rng(cfg.value("seed", 1));
    json report;
    report["suite"] = suite;
    report["config_sha256"] = ctx.hash;
    qkm::cli::SuiteResult r;
    try {
        if (suite == "propT") {
            r = qkm::cli::suite_propT(model_from(cfg), cfg.at("orders").value("verify", 2));
        } else if (suite == "omega-poly") {
            r = qkm::cli::suite_omega_poly(model_from(cfg), contour_from(cfg));
        } else if (suite == "pert-vs-exact") {
            r = qkm::cli::suite_pert_vs_exact(model_from(cfg), contour_from(cfg));
        } else if (suite == "btr") {
            auto m = model_from(cfg);
            r = qkm::cli::suite_btr(m, m.lambda, rng, cfg.value("btr_points", 20));
        } else if (suite == "critical") {
            r = qkm::cli::suite_critical(qkm::cli::default_critical_triples());
        } else {
            throw std::invalid_argument("unknown suite " + suite);
        }
        report["result"] = r.report;
    } catch (const std::exception& ex) {
        r.pass = false;
        report["error"] = ex.what();
    }
    report["pass"] = r.pass;
    os << report.dump(2) << "\n";
    return r.pass ? 0 : 1;
}

int cmd_sweep(const Context& ctx, const std::string& what, std::ostream& os, const std::string& points_path) {
    auto fam = family_from(ctx.config);
    auto grid = lambda_grid(ctx.config);
    if (what == "beta") {
        csv_header(os, "qkm.sweep.beta/1", ctx);
        int d = fam.mode == qkm::CurveFamilySpec::Mode::FixedModel ? fam.model.d() : static_cast<int>(fam.epsilon.size());
        os << "lambda,ok,vieta_residual";
        for (int i = 0; i < 2 * d; ++i) os << ",beta" << i << "_re,beta" << i << "_im";
        for (int k = 0; k < d; ++k) os << ",eps" << k << "_re,eps" << k << "_im";
        os << "\n";
        for (double lam : grid) {
            try {
                auto c = fam.at(lam);
                os << num(lam) << ",1," << num(c.vieta_residual());
                for (auto b : c.beta()) os << "," << num(b.real()) << "," << num(b.imag());
                for (auto e : c.epsilon()) os << "," << num(e.real()) << "," << num(e.imag());
                os << "\n";
            } catch (const std::exception&) {
                os << num(lam) << ",0,";
                for (int i = 0; i < 4 * d + 2 * d; ++i) os << ",";
                os << "\n";
            }
        }
        return 0;
    }
    if (what == "cuts") {
        int samples = ctx.config.value("samples_per_cut", 400);
        Output pts(points_path);
        bool want_points = !points_path.empty();
        if (want_points) {
            csv_header(pts.stream(), "qkm.sweep.cut_points/1", ctx);
            pts.stream() << "lambda,cut,sample,sheet,re,im,flagged\n";
        }
        csv_header(os, "qkm.sweep.cuts/1", ctx);
        os << "lambda,ok,loops,open_arcs,nesting_pairs,max_depth,flagged,loop_windings\n";
        for (double lam : grid) {
            try {
                auto c = fam.at(lam);
                auto g = qkm::branch_cut_geometry(c, samples);
                std::vector<int> depth(g.loops.size(), 0);
                for (auto [outer, inner] : g.nesting) depth[static_cast<std::size_t>(inner)]++;
                int max_depth = depth.empty() ? 0 : *std::max_element(depth.begin(), depth.end());
                std::string windings;
                for (std::size_t l = 0; l < g.loops.size(); ++l) {
                    if (l) windings += ";";
                    for (std::size_t k = 0; k < g.loops[l].winding.size(); ++k)
                        windings += (k ? " " : "") + std::to_string(g.loops[l].winding[k]);
                }
                os << num(lam) << ",1," << g.loops.size() << "," << g.open_arcs << "," << g.nesting.size() << "," << max_depth << ","
                   << (g.any_flagged ? 1 : 0) << ",\"" << windings << "\"\n";
                if (want_points)
                    for (const auto& t : g.traces)
                        for (std::size_t s = 0; s < t.sheets.size(); ++s)
                            for (std::size_t j = 0; j < t.sheets[s].size(); ++j)
                                pts.stream() << num(lam) << "," << t.cut << "," << j << "," << s << "," << num(t.sheets[s][j].real()) << ","
                                             << num(t.sheets[s][j].imag()) << "," << static_cast<int>(t.flagged[j]) << "\n";
            } catch (const std::exception&) {
                os << num(lam) << ",0,,,,,,\n";
            }
        }
        return 0;
    }
    throw std::invalid_argument("sweep target must be beta or cuts");
}

void emit_series(std::ostream& os, const qkm::Series<Rational>& s) {
    os << "order,numerator,denominator,value\n";
    for (int v = 0; v <= s.order(); ++v)
        os << v << "," << s[v].get_num().get_str() << "," << s[v].get_den().get_str() << "," << num(s[v].get_d()) << "\n";
}

/// Boundary cycles of class indices, e.g. "0 1|0 1".
std::vector<std::vector<int>> parse_cycles(const std::string& text) {
    std::vector<std::vector<int>> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, '|')) {
        std::stringstream ps(part);
        std::vector<int> cyc;
        int x;
        while (ps >> x) cyc.push_back(x);
        if (!cyc.empty()) out.push_back(cyc);
    }
    return out;
}

int cmd_expand(const Context& ctx, const std::string& target, const std::string& classes, std::ostream& os) {
    int order = ctx.config.at("orders").value("expand", 3);
    auto m = model_from(ctx.config);
    auto mu = qkm::LoopMeasure<Rational>::from_model(m);
    auto value = [&](int c) { return m.e.at(static_cast<std::size_t>(c)); };
    qkm::Series<Rational> s(order);
    if (target == "free-energy") {
        s = qkm::free_energy_series<Rational>(0, order, mu);
    } else if (target == "correlator") {
        qkm::ValueCycles<Rational> cyc;
        for (const auto& c : parse_cycles(classes)) {
            std::vector<Rational> vals;
            for (int k : c) vals.push_back(value(k));
            cyc.push_back(vals);
        }
        s = qkm::correlator<Rational>(cyc, order, mu);
    } else if (target == "omega1" || target == "omega2" || target == "omega3") {
        auto cyc = parse_cycles(classes);
        std::vector<int> q = cyc.empty() ? std::vector<int>{} : cyc.front();
        auto t = target == "omega1" ? qkm::OmegaTarget::Omega1 : target == "omega2" ? qkm::OmegaTarget::Omega2 : qkm::OmegaTarget::Omega3;
        std::size_t need = target == "omega1" ? 1 : target == "omega2" ? 2 : 3;
        if (q.size() != need) throw std::invalid_argument("--classes must list " + std::to_string(need) + " class indices");
        s = qkm::graph_form_series(m, t, q, order);
    } else {
        throw std::invalid_argument("unknown expand target " + target);
    }
    csv_header(os, "qkm.expand/1", ctx);
    emit_series(os, s);
    return 0;
}

int cmd_solve(const Context& ctx, std::ostream& os) {
    auto m = model_from(ctx.config);
    auto c = qkm::solve_curve(m);
    csv_header(os, "qkm.solve/1", ctx);
    os << "quantity,index,re,im\n";
    for (int k = 0; k < c.d(); ++k) {
        os << "epsilon," << k << "," << num(c.epsilon()[static_cast<std::size_t>(k)].real()) << ","
           << num(c.epsilon()[static_cast<std::size_t>(k)].imag()) << "\n";
        os << "rho," << k << "," << num(c.rho()[static_cast<std::size_t>(k)].real()) << "," << num(c.rho()[static_cast<std::size_t>(k)].imag())
           << "\n";
    }
    for (std::size_t i = 0; i < c.beta().size(); ++i) os << "beta," << i << "," << num(c.beta()[i].real()) << "," << num(c.beta()[i].imag()) << "\n";
    os << "vieta_residual,0," << num(c.vieta_residual()) << ",0\n";
    return 0;
}

std::vector<cplx> parse_points(const std::string& text) {
    std::vector<cplx> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ';')) {
        double re = 0, im = 0;
        char comma = 0;
        std::stringstream ps(part);
        ps >> re;
        if (ps >> comma && comma == ',') ps >> im;
        out.emplace_back(re, im);
    }
    return out;
}

int cmd_omega(const Context& ctx, const std::string& kind, const std::string& at, std::ostream& os) {
    auto m = model_from(ctx.config);
    auto c = qkm::solve_curve(m);
    auto p = parse_points(at);
    cplx value;
    if (kind == "omega1" && p.size() == 1)
        value = qkm::omega1_exact(c, p[0]);
    else if (kind == "omega2" && p.size() == 2)
        value = qkm::omega2_exact(c, p[0], p[1]);
    else if (kind == "omega3" && p.size() == 3)
        value = qkm::omega3_exact(c, p[0], p[1], p[2]);
    else if (kind == "omega3-btr" && p.size() == 3)
        value = qkm::omega03_btr(c, p[0], p[1], p[2]);
    else
        throw std::invalid_argument("--kind and the number of --at points do not match");
    csv_header(os, "qkm.omega/1", ctx);
    os << "kind,re,im\n" << kind << "," << num(value.real()) << "," << num(value.imag()) << "\n";
    return 0;
}

int cmd_free_energy(const Context& ctx, std::ostream& os) {
    auto m = model_from(ctx.config);
    if (m.d() != 1) throw std::invalid_argument("free-energy needs a d=1 model");
    auto c = qkm::solve_curve(m);
    auto p = qkm::free_energy_planar(c);
    double sign = ctx.config.value("quadrangulation_lambda_sign", -1.0);
    json j;
    j["config_sha256"] = ctx.hash;
    j["lambda"] = p.lambda;
    j["e"] = p.e;
    j["epsilon"] = p.epsilon;
    j["coupling"] = p.coupling;
    j["temperature"] = p.temperature;
    j["residue_term"] = p.residue_term;
    j["mu"] = p.mu;
    j["tmu_sum"] = p.tmu_sum;
    j["compensator"] = p.compensator;
    j["assembled"] = p.assembled;
    j["graph_series"] = p.graph_series;
    j["residue_printed"] = p.residue_printed;
    j["residue_corrected"] = p.residue_corrected;
    j["tmu_printed"] = p.tmu_printed;
    j["quadrangulation_corrected"] = qkm::quadrangulation_gf(sign * p.lambda, true) - qkm::quadrangulation_gf(0.0, true);
    os << j.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quartic Kontsevich model: graph expansion, exact forms, spectral-curve geometry"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path, out_path;
    std::optional<double> lambda;
    std::optional<int> order;
    std::optional<std::uint64_t> seed;
    app.add_option("-c,--config", config_path, "JSON config file");
    app.add_option("-o,--out", out_path, "output file (default stdout)");
    app.add_option("--lambda", lambda, "override model.lambda");
    app.add_option("--order", order, "override the order limit of the subcommand");
    app.add_option("--seed", seed, "override the random seed");

    auto* counts = app.add_subcommand("counts", "diagram count table");
    std::string suite;
    auto* verify = app.add_subcommand("verify", "run a verification suite");
    verify->add_option("suite", suite, "propT | omega-poly | pert-vs-exact | btr | critical")
        ->required()
        ->check(CLI::IsMember({"propT", "omega-poly", "pert-vs-exact", "btr", "critical"}));
    std::string sweep_what, points_path;
    auto* sweep = app.add_subcommand("sweep", "lambda sweeps of ramification points or branch-cut preimages");
    sweep->add_option("what", sweep_what, "beta | cuts")->required()->check(CLI::IsMember({"beta", "cuts"}));
    sweep->add_option("--points", points_path, "also write raw cut preimages to this CSV");
    std::string target, classes;
    auto* expand = app.add_subcommand("expand", "exact series coefficients");
    expand->add_option("target", target, "free-energy | correlator | omega1 | omega2 | omega3")->required();
    expand->add_option("--classes", classes, "boundary cycles of class indices, e.g. \"0 1|0 1\"");
    auto* solve = app.add_subcommand("solve", "solve the spectral curve of the model");
    std::string kind, at;
    auto* omega = app.add_subcommand("omega", "evaluate an exact form at points");
    omega->add_option("--kind", kind, "omega1 | omega2 | omega3 | omega3-btr")->required();
    omega->add_option("--at", at, "points as re,im;re,im;...")->required();
    auto* fe = app.add_subcommand("free-energy", "planar free energy assembly (d=1)");

    CLI11_PARSE(app, argc, argv);

    try {
        Context ctx;
        ctx.config = default_config();
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw std::runtime_error("cannot read config " + config_path);
            merge(ctx.config, json::parse(in));
        }
        if (lambda) ctx.config["model"]["lambda"] = *lambda;
        if (seed) ctx.config["seed"] = *seed;
        if (order) {
            std::string key = counts->parsed() ? "counts" : verify->parsed() ? "verify" : "expand";
            ctx.config["orders"][key] = *order;
        }
        ctx.hash = sha256_hex(ctx.config.dump());
        Output out(out_path);
        std::ostream& os = out.stream();
        if (counts->parsed()) return cmd_counts(ctx, os);
        if (verify->parsed()) return cmd_verify(ctx, suite, os);
        if (sweep->parsed()) return cmd_sweep(ctx, sweep_what, os, points_path);
        if (expand->parsed()) return cmd_expand(ctx, target, classes, os);
        if (solve->parsed()) return cmd_solve(ctx, os);
        if (omega->parsed()) return cmd_omega(ctx, kind, at, os);
        if (fe->parsed()) return cmd_free_energy(ctx, os);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 1;
}
