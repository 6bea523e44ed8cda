#include "kolmo/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "kolmo/fields.hpp"
#include "kolmo/kernel.hpp"
#include "kolmo/modulus.hpp"
#include "kolmo/spec_io.hpp"
#include "kolmo/taylor.hpp"
#include "kolmo/verify.hpp"

namespace kolmo::cli {

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Usage:
        case ErrorKind::Dimension:
        case ErrorKind::Domain:
        case ErrorKind::Support: return kExitUsage;
        case ErrorKind::Accuracy:
        case ErrorKind::Hypoellipticity:
        case ErrorKind::NonConvergence:
        case ErrorKind::Scaling:
        case ErrorKind::Solve: return kExitNumerical;
        case ErrorKind::Structure:
        case ErrorKind::Ellipticity:
        case ErrorKind::Definiteness:
        case ErrorKind::Symmetry:
        case ErrorKind::PlanIntegrity:
        case ErrorKind::Applicability:
        case ErrorKind::Manufacture: return kExitFail;
    }
    return kExitNumerical;
}

namespace {

using nlohmann::json;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json to_json(const Vector& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

json to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) r.push_back(m(i, k));
        rows.push_back(r);
    }
    return rows;
}

json to_json(const Point& z) { return {{"x", to_json(z.x)}, {"t", z.t}}; }

std::string point_text(const Point& z) {
    std::ostringstream s;
    s << "(";
    for (int i = 0; i < z.N(); ++i) s << fmt(z.x[i]) << ", ";
    s << "t = " << fmt(z.t) << ")";
    return s.str();
}

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            size_t used = 0;
            const double v = std::stod(item, &used);
            if (used != item.size() || !std::isfinite(v)) throw std::invalid_argument(item);
            out.push_back(v);
        } catch (const std::exception&) {
            throw Error(ErrorKind::Usage, flag + ": '" + item + "' is not a number");
        }
    }
    if (out.empty()) throw Error(ErrorKind::Usage, flag + ": empty list");
    return out;
}

/// "x_1,...,x_N,t".
Point parse_point(const std::string& text, int n, const std::string& flag) {
    const auto v = parse_list(text, flag);
    if (static_cast<int>(v.size()) != n + 1)
        throw Error(ErrorKind::Usage, flag + ": expected " + std::to_string(n + 1) + " comma-separated values");
    Point z = Point::origin(n);
    for (int i = 0; i < n; ++i) z.x[i] = v[static_cast<size_t>(i)];
    z.t = v.back();
    return z;
}

OperatorSpec resolve_spec(const std::string& s) {
    if (s.empty()) throw Error(ErrorKind::Usage, "--spec is required");
    if (std::filesystem::is_regular_file(s)) return load_spec(s);
    if (is_named_spec(s)) return named_spec(s);
    const std::string stem = std::filesystem::path(s).stem().string();
    if (is_named_spec(stem)) return named_spec(stem);
    throw Error(ErrorKind::Usage, "spec '" + s + "' is neither a file nor a built-in operator");
}

json spec_json(const OperatorSpec& spec) {
    json j = json::parse(spec_to_json(spec));
    j["name"] = spec.name;
    return j;
}

std::string csv_block(const std::vector<EstimateRow>& rows) {
    std::string s = "quantity,scale,lhs,rhs,ratio\n";
    for (const auto& r : rows) s += r.quantity + "," + fmt(r.scale) + "," + fmt(r.lhs) + "," + fmt(r.rhs) + "," + fmt(r.ratio) + "\n";
    return s;
}

json report_json(const EstimateReport& r) {
    json j;
    j["name"] = r.name;
    j["criterion"] = r.criterion;
    j["seed"] = r.seed;
    j["samples"] = r.samples;
    j["constants"] = r.constants;
    j["scales"] = r.scales;
    j["scaling"] = r.scaling;
    j["pass"] = r.pass;
    j["csv"] = csv_block(r.rows);
    return j;
}

void print_report(const EstimateReport& r, std::ostream& out) {
    out << r.name << ": " << (r.pass ? "PASS" : "FAIL") << " (" << r.criterion << ")\n";
    for (const auto& [k, v] : r.constants) out << "  " << k << " = " << fmt(v) << "\n";
    for (const auto& [k, vals] : r.scaling) {
        out << "  " << k << " across scales:";
        for (double v : vals) out << " " << fmt(v);
        out << "\n";
    }
}

/// State shared by every verb.
struct Invocation {
    std::string verb;
    std::string spec_arg;
    std::uint64_t seed = 1;
    std::string out_path;
    json flags = json::object();
    json result = json::object();
    int code = kExitOk;
};

void add_common(CLI::App* sub, Invocation& inv, bool needs_spec = true) {
    if (needs_spec) sub->add_option("--spec", inv.spec_arg, "operator spec file or built-in name")->required();
    sub->add_option("--seed", inv.seed, "random seed");
    sub->add_option("--out", inv.out_path, "write the JSON report here");
}

// Verbs ---------------------------------------------------------------------

void do_check(Invocation& inv, const OperatorSpec& spec, std::ostream& out) {
    const Exponents ex = validate_structure(spec);
    const SpdReport h = hormander_check(spec, 1.0);
    inv.result["alpha"] = ex.alpha;
    inv.result["Q"] = ex.Q;
    inv.result["Q_plus_2"] = ex.Qplus2;
    inv.result["lambda"] = spec.lambda;
    inv.result["Lambda"] = spec.Lambda;
    inv.result["dilation_invariant"] = is_dilation_invariant(spec);
    inv.result["hormander"] = {{"t", 1.0}, {"min_eigenvalue", h.min_eigenvalue}, {"pass", h.is_spd}};
    out << "alpha = (";
    for (size_t i = 0; i < ex.alpha.size(); ++i) out << (i ? ", " : "") << ex.alpha[i];
    out << ")\nQ = " << ex.Q << "\n";
    out << "Hormander: " << (h.is_spd ? "pass" : "fail") << " (min eigenvalue of C(1) = " << fmt(h.min_eigenvalue)
        << ")\n";
    out << "dilation invariant: " << (is_dilation_invariant(spec) ? "yes" : "no") << "\n";
    inv.code = h.is_spd ? kExitOk : kExitFail;
}

struct KernelArgs {
    std::string at;
    std::string pole;
    double mass_t = 0.0;
};

void do_kernel(Invocation& inv, const KernelArgs& a, const OperatorSpec& spec, std::ostream& out) {
    validate_structure(spec);
    const KernelContext ctx(spec);
    const Point z = parse_point(a.at, spec.N, "--at");
    const Point pole = a.pole.empty() ? Point::origin(spec.N) : parse_point(a.pole, spec.N, "--pole");
    inv.flags["at"] = a.at;
    inv.flags["pole"] = a.pole;
    const double g = gamma(ctx, z, pole);
    inv.result["gamma"] = g;
    out << "Gamma" << point_text(z) << " with pole " << point_text(pole) << " = " << fmt(g) << "\n";
    if (z.t > pole.t) {
        inv.result["grad"] = to_json(gamma_grad(ctx, z, pole));
        inv.result["hess_m"] = to_json(gamma_hess_m(ctx, z, pole));
        inv.result["Y"] = gamma_Y(ctx, z, pole);
        const double res = check_kernel_pde(ctx, z, pole);
        inv.result["pde_residual"] = res;
        out << "L Gamma residual = " << fmt(res) << "\n";
    }
    if (a.mass_t > 0.0) {
        inv.flags["mass"] = a.mass_t;
        const MassReport m = kernel_mass(ctx, a.mass_t);
        inv.result["mass"] = {{"t", a.mass_t}, {"mass", m.mass}, {"expected", m.expected},
                              {"refinement_change", m.refinement_change}};
        out << "mass at t = " << fmt(a.mass_t) << ": " << fmt(m.mass) << " (expected " << fmt(m.expected) << ")\n";
    }
}

json plan_json(const PathPlan& plan) {
    json segs = json::array();
    for (const auto& s : plan.segments) {
        json j;
        j["kind"] = s.kind == SegmentKind::X ? "X" : "Y";
        j["s"] = s.s;
        j["level"] = s.level;
        j["v"] = to_json(s.v);
        j["start"] = to_json(s.start);
        j["end"] = to_json(s.end);
        segs.push_back(j);
    }
    return {{"segments", segs},
            {"source", to_json(plan.source)},
            {"target", to_json(plan.target)},
            {"endpoint", to_json(plan.endpoint())},
            {"achieved_error", plan.achieved_error},
            {"kdist_error", plan.kdist_error},
            {"tolerance", plan.tolerance},
            {"iterations", plan.iterations},
            {"iteration_errors", plan.iteration_errors}};
}

struct ConnectArgs {
    std::string from;
    std::string to;
    double tol = 1e-10;
    int max_iterations = kConnectMaxIterations;
};

void do_connect(Invocation& inv, const ConnectArgs& a, const OperatorSpec& spec, std::ostream& out) {
    validate_structure(spec);
    const Point z = parse_point(a.from, spec.N, "--from");
    const Point zeta = parse_point(a.to, spec.N, "--to");
    inv.flags["from"] = a.from;
    inv.flags["to"] = a.to;
    inv.flags["tol"] = a.tol;
    inv.flags["max_iterations"] = a.max_iterations;
    try {
        const PathPlan plan = connect(z, zeta, spec, a.tol, a.max_iterations);
        const PlanReport rep = verify_plan(plan, spec);
        inv.result["plan"] = plan_json(plan);
        inv.result["report"] = {{"reexec_error", rep.reexec_error}, {"endpoint_error", rep.endpoint_error},
                                {"length", rep.length},             {"distance", rep.distance},
                                {"length_ratio", rep.length_ratio}};
        out << "plan with " << plan.segments.size() << " segments, " << plan.iterations << " iteration(s)\n";
        for (const auto& s : plan.segments)
            out << "  " << (s.kind == SegmentKind::X ? "X" : "Y") << " level " << s.level << " s = " << fmt(s.s)
                << "\n";
        out << "endpoint error = " << fmt(plan.achieved_error) << "\n";
    } catch (const PlanError& e) {
        inv.result["plan"] = plan_json(e.best_plan());
        throw;
    }
}

struct TaylorArgs {
    std::string bundle;
    std::string at;
    std::string direction;
    int kmin = 1;
    int kmax = 12;
    std::string form = "group";
    int samples = 2000;
};

void do_taylor(Invocation& inv, const TaylorArgs& a, const OperatorSpec& spec, std::ostream& out) {
    const Exponents ex = validate_structure(spec);
    if (a.kmin < 0 || a.kmax < a.kmin) throw Error(ErrorKind::Usage, "--kmin/--kmax: need 0 <= kmin <= kmax");
    if (a.form != "group" && a.form != "euclidean") throw Error(ErrorKind::Usage, "--form: group or euclidean");
    const auto suite = taylor_suite(spec);
    const std::string name = a.bundle.empty() ? suite.front().name : a.bundle;
    const auto it = std::find_if(suite.begin(), suite.end(), [&](const C2Bundle& b) { return b.name == name; });
    if (it == suite.end()) throw Error(ErrorKind::Usage, "unknown bundle '" + name + "'");
    const Point z = a.at.empty() ? Point::origin(spec.N) : parse_point(a.at, spec.N, "--at");
    Point w = a.direction.empty() ? Point(Vector::Constant(spec.N, 1.0), 1.0)
                                  : parse_point(a.direction, spec.N, "--direction");
    const double nw = knorm(w, ex);
    if (!(nw > 0.0)) throw Error(ErrorKind::Usage, "--direction must be nonzero");
    w = dilate(1.0 / nw, w, ex);
    inv.flags["bundle"] = name;
    inv.flags["at"] = a.at;
    inv.flags["direction"] = a.direction;
    inv.flags["kmin"] = a.kmin;
    inv.flags["kmax"] = a.kmax;
    inv.flags["form"] = a.form;
    inv.flags["samples"] = a.samples;

    std::vector<double> rhos;
    for (int k = a.kmin; k <= a.kmax; ++k) rhos.push_back(std::ldexp(1.0, -k));
    const TaylorForm form = a.form == "group" ? TaylorForm::Group : TaylorForm::Euclidean;
    const auto prof = remainder_profile(
        *it, z, [&](double r) { return compose(z, dilate(r, w, ex), spec); }, rhos, form, spec);
    std::vector<double> s_list;
    for (double r : rhos) s_list.push_back(r * r);
    const auto ymix = ymix_profile(*it, z, s_list, spec);
    json rows = json::array();
    std::string csv = "rho,remainder,ratio,ymix\n";
    out << "bundle " << name << ", " << a.form << " form\n";
    for (size_t i = 0; i < prof.size(); ++i) {
        rows.push_back({{"rho", prof[i].rho}, {"remainder", prof[i].remainder}, {"ratio", prof[i].ratio},
                        {"ymix", ymix[i]}});
        csv += fmt(prof[i].rho) + "," + fmt(prof[i].remainder) + "," + fmt(prof[i].ratio) + "," + fmt(ymix[i]) + "\n";
        out << "  rho = " << fmt(prof[i].rho) << "  remainder/rho^2 = " << fmt(prof[i].ratio) << "\n";
    }
    inv.result["profile"] = rows;
    inv.result["csv"] = csv;
    const double c = taylor_form_constant(*it, spec, z, 0.5, a.samples, inv.seed);
    inv.result["form_constant"] = c;
    out << "Euclidean vs group form constant = " << fmt(c) << "\n";
}

struct ModulusArgs {
    std::string function = "power";
    double alpha = 0.5;
    int pairs = 20000;
    double radius = 1.0;
    std::string d_list;
};

void do_modulus(Invocation& inv, const ModulusArgs& a, std::ostream& out) {
    inv.flags["function"] = a.function;
    inv.flags["alpha"] = a.alpha;
    inv.flags["pairs"] = a.pairs;
    inv.flags["radius"] = a.radius;
    inv.flags["d"] = a.d_list;
    const auto radii = default_radii();
    ModulusTable table;
    const double alpha = a.alpha;
    if (a.function == "power") {
        if (!(alpha > 0.0)) throw Error(ErrorKind::Usage, "--alpha must be positive");
        table = analytic_table([alpha](double r) { return std::pow(r, alpha); }, radii);
    } else if (a.function == "invlog") {
        std::vector<double> small;
        for (double r : radii)
            if (r <= 0.5) small.push_back(r);
        table = analytic_table([](double r) { return 1.0 / std::abs(std::log(r)); }, small);
    } else if (a.function == "zero") {
        table = analytic_table([](double) { return 0.0; }, radii);
    } else {
        const OperatorSpec spec = resolve_spec(inv.spec_arg.empty() ? "laplace2d" : inv.spec_arg);
        const Exponents ex = validate_structure(spec);
        ScalarFn f;
        if (a.function == "counterexample-f") {
            if (spec.N != 2) throw Error(ErrorKind::Usage, "counterexample-f needs a spec with N = 2");
            f = [alpha](const Point& z) { return counterexample_f_extended(alpha, z.x[0], z.x[1]); };
        } else if (a.function == "knorm") {
            f = [ex](const Point& z) { return knorm(z, ex); };
        } else if (a.function == "sqrt-knorm") {
            f = [ex](const Point& z) { return std::sqrt(knorm(z, ex)); };
        } else {
            throw Error(ErrorKind::Usage, "unknown modulus function '" + a.function + "'");
        }
        inv.result["spec"] = spec_json(spec);
        table = empirical_modulus(f, BallDomain{spec, Point::origin(spec.N), a.radius}, a.pairs, radii, inv.seed);
    }
    const DiniReport d = dini_integral(table);
    std::string csv = "r,omega\n";
    for (size_t i = 0; i < table.radii.size(); ++i) csv += fmt(table.radii[i]) + "," + fmt(table.omega[i]) + "\n";
    inv.result["provenance"] = table.provenance == Provenance::Analytic ? "analytic" : "empirical";
    inv.result["csv"] = csv;
    inv.result["dini"] = {{"value", d.value},
                          {"tail_bound", d.tail_bound},
                          {"tail_exponent", d.tail_exponent},
                          {"classification", to_string(d.classification)},
                          {"decade_increments", d.decade_increments}};
    out << "modulus " << a.function << ": Dini integral " << fmt(d.value) << " + tail " << fmt(d.tail_bound) << " ("
        << to_string(d.classification) << ")\n";
    if (!a.d_list.empty()) {
        json sf = json::array();
        for (double dd : parse_list(a.d_list, "--d")) {
            const double v = schauder_functional(table, dd);
            json e = {{"d", dd}, {"functional", v}};
            if (a.function == "power" && alpha <= 1.0) e["holder_closed_form"] = holder_closed_form(1.0, alpha, dd);
            sf.push_back(e);
            out << "  functional(d = " << fmt(dd) << ") = " << fmt(v) << "\n";
        }
        inv.result["schauder_functional"] = sf;
    }
}

struct VerifyArgs {
    std::string criterion;
    std::string family = "gauss";
    std::string coeff = "sin";
    std::string R_list;
    int pairs = 1000;
    int poles = 20;
    int points = 0;
    std::string kind = "const";
    double scale = 1.0;
    bool no_dilation = false;
};

std::vector<double> radii_or(const std::string& text, std::vector<double> fallback) {
    return text.empty() ? fallback : parse_list(text, "--R-list");
}

void do_verify(Invocation& inv, const VerifyArgs& a, const OperatorSpec& spec, std::ostream& out) {
    validate_structure(spec);
    const KernelContext ctx(spec);
    inv.flags["criterion"] = a.criterion;
    EstimateReport rep;
    VerifyOptions vo;
    vo.seed = inv.seed;
    vo.pair_samples = a.pairs;
    vo.poles = a.poles;
    if (a.points > 0) vo.points = a.points;
    if (a.criterion == "apriori" || a.criterion == "mean-value") {
        const auto Rs = radii_or(a.R_list, {1.0, 0.5, 0.25});
        inv.flags["R_list"] = Rs;
        inv.flags["poles"] = a.poles;
        inv.flags["points"] = vo.points;
        rep = a.criterion == "apriori" ? verify_apriori(ctx, Rs, vo) : verify_mean_value(ctx, Rs, vo);
    } else if (a.criterion == "singular") {
        const auto Rs = radii_or(a.R_list, {0.5, 0.25, 0.125});
        SingularOptions so;
        so.seed = inv.seed;
        if (a.points > 0) so.points = a.points;
        inv.flags["R_list"] = Rs;
        inv.flags["kind"] = a.kind;
        inv.flags["points"] = so.points;
        rep = verify_singular_bounds(ctx, parse_singular_kind(a.kind), Rs, so);
    } else if (a.criterion == "schauder-const" || a.criterion == "schauder-var") {
        inv.flags["family"] = a.family;
        inv.flags["pairs"] = a.pairs;
        inv.flags["scale"] = a.scale;
        if (a.criterion == "schauder-const") {
            rep = verify_schauder_const(ctx, manufacture(a.family, spec, std::nullopt, a.scale), vo);
        } else {
            inv.flags["coeff"] = a.coeff;
            rep = verify_schauder_var(ctx, manufacture(a.family, spec, a.coeff, a.scale), vo);
        }
    } else if (a.criterion == "invariance") {
        InvarianceOptions io;
        io.seed = inv.seed;
        io.dilation = !a.no_dilation;
        if (a.points > 0) io.samples = a.points;
        inv.flags["dilation"] = io.dilation;
        inv.flags["samples"] = io.samples;
        rep = verify_invariance(ctx, io);
    } else if (a.criterion == "cutoff") {
        const auto Rs = radii_or(a.R_list, {1.0, 0.5, 0.25});
        const int samples = a.points > 0 ? a.points : 4000;
        inv.flags["R_list"] = Rs;
        inv.flags["samples"] = samples;
        rep.name = "cutoff";
        rep.criterion = "scaled derivative sups within factor 2 across R";
        rep.seed = inv.seed;
        rep.samples = samples;
        rep.scales = Rs;
        for (double R : Rs) {
            const CutoffReport c = cutoff_report(R, ctx.exps(), samples, inv.seed);
            for (size_t i = 0; i < c.grad_scaled.size(); ++i) {
                const std::string k = "grad_x" + std::to_string(i + 1);
                rep.scaling[k].push_back(c.grad_scaled[i]);
                rep.rows.push_back({k, R, c.grad_scaled[i], 0.0, c.grad_scaled[i]});
            }
            rep.scaling["dt"].push_back(c.dt_scaled);
            rep.rows.push_back({"dt", R, c.dt_scaled, 0.0, c.dt_scaled});
        }
        rep.pass = true;
        for (const auto& [k, vals] : rep.scaling) {
            const double lo = *std::min_element(vals.begin(), vals.end());
            const double hi = *std::max_element(vals.begin(), vals.end());
            rep.constants[k] = hi;
            rep.pass = rep.pass && lo > 0.0 && hi <= 2.0 * lo;
        }
    } else {
        throw Error(ErrorKind::Usage, "unknown criterion '" + a.criterion +
                                          "' (apriori, mean-value, singular, schauder-const, schauder-var, "
                                          "invariance, cutoff)");
    }
    inv.result["report"] = report_json(rep);
    print_report(rep, out);
    inv.code = rep.pass ? kExitOk : kExitFail;
}

struct DemoArgs {
    double alpha = 0.5;
    int pairs = 20000;
    double radius = 0.5;
};

void do_demo(Invocation& inv, const DemoArgs& a, std::ostream& out) {
    inv.flags["alpha"] = a.alpha;
    inv.flags["pairs"] = a.pairs;
    inv.flags["radius"] = a.radius;
    json rows = json::array();
    std::vector<double> f, mixed;
    out << "u = x y |log(x^2 + y^2)|^alpha, alpha = " << fmt(a.alpha) << "\n";
    for (double d : {1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8}) {
        f.push_back(std::abs(counterexample_f(a.alpha, d, d)));
        mixed.push_back(std::abs(counterexample_mixed(a.alpha, d, d)));
        rows.push_back({{"delta", d}, {"abs_f", f.back()}, {"abs_mixed", mixed.back()}});
        out << "  delta = " << fmt(d) << "  |f| = " << fmt(f.back()) << "  |u_xy| = " << fmt(mixed.back()) << "\n";
    }
    bool ok = true;
    for (size_t i = 1; i < f.size(); ++i) ok = ok && f[i] < f[i - 1] && mixed[i] > mixed[i - 1];
    const double alpha = a.alpha;
    const auto table =
        empirical_modulus([alpha](const Point& z) { return counterexample_f_extended(alpha, z.x[0], z.x[1]); },
                          BallDomain{named_spec("laplace2d"), Point::origin(2), a.radius}, a.pairs, default_radii(),
                          inv.seed);
    const DiniReport d = dini_integral(table);
    size_t last = d.decade_increments.size();
    size_t first = last >= 4 ? last - 4 : 0;
    for (size_t i = first; i < last; ++i) ok = ok && d.decade_increments[i] >= 0.2;
    ok = ok && d.classification == DiniClass::NonDini;
    inv.result["samples"] = rows;
    inv.result["dini"] = {{"value", d.value},
                          {"tail_bound", d.tail_bound},
                          {"classification", to_string(d.classification)},
                          {"decade_increments", d.decade_increments}};
    inv.result["pass"] = ok;
    out << "Dini partial integrals per decade:";
    for (double v : d.decade_increments) out << " " << fmt(v);
    out << "\nclassification: " << to_string(d.classification) << "\n";
    out << "certificate: " << (ok ? "PASS" : "FAIL") << "\n";
    inv.code = ok ? kExitOk : kExitFail;
}

void write_out(const Invocation& inv, const json& config, const std::string& error_kind, const std::string& message) {
    if (inv.out_path.empty()) return;
    json doc;
    doc["verb"] = inv.verb;
    doc["config"] = config;
    doc["result"] = inv.result;
    doc["exit_code"] = inv.code;
    if (!error_kind.empty()) doc["error"] = {{"kind", error_kind}, {"message", message}};
    std::ofstream f(inv.out_path);
    if (!f) throw Error(ErrorKind::Usage, "cannot write '" + inv.out_path + "'");
    f << doc.dump(2) << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Degenerate Kolmogorov operators: kernels, paths, Taylor remainders, moduli and estimates", "kolmo"};
    app.require_subcommand(1, 1);
    Invocation inv;
    KernelArgs ka;
    ConnectArgs ca;
    TaylorArgs ta;
    ModulusArgs ma;
    VerifyArgs va;
    DemoArgs da;

    auto* check = app.add_subcommand("check", "validate the structural hypotheses and Hormander's condition");
    add_common(check, inv);

    auto* kernel = app.add_subcommand("kernel", "evaluate the fundamental solution");
    add_common(kernel, inv);
    kernel->add_option("--at", ka.at, "x_1,...,x_N,t")->required();
    kernel->add_option("--pole", ka.pole, "x_1,...,x_N,t (default origin)");
    kernel->add_option("--mass", ka.mass_t, "also integrate Gamma((.,t),0) at this t");

    auto* conn = app.add_subcommand("connect", "plan an admissible path between two points");
    add_common(conn, inv);
    conn->add_option("--from", ca.from, "x_1,...,x_N,t")->required();
    conn->add_option("--to", ca.to, "x_1,...,x_N,t")->required();
    conn->add_option("--tol", ca.tol, "endpoint tolerance");
    conn->add_option("--max-iter", ca.max_iterations, "correction iteration cap");

    auto* tay = app.add_subcommand("taylor", "intrinsic Taylor remainder profile");
    add_common(tay, inv);
    tay->add_option("--bundle", ta.bundle, "analytic test function");
    tay->add_option("--at", ta.at, "expansion point");
    tay->add_option("--direction", ta.direction, "approach direction, normalised to unit gauge");
    tay->add_option("--kmin", ta.kmin, "largest rho = 2^-kmin");
    tay->add_option("--kmax", ta.kmax, "smallest rho = 2^-kmax");
    tay->add_option("--form", ta.form, "group or euclidean");
    tay->add_option("--samples", ta.samples, "samples for the form comparison constant");

    auto* mod = app.add_subcommand("modulus", "modulus of continuity, Dini integral and Schauder functional");
    mod->add_option("--spec", inv.spec_arg, "operator for empirical moduli (default laplace2d)");
    mod->add_option("--seed", inv.seed, "random seed");
    mod->add_option("--out", inv.out_path, "write the JSON report here");
    mod->add_option("--function", ma.function, "power, invlog, zero, counterexample-f, knorm, sqrt-knorm");
    mod->add_option("--alpha", ma.alpha, "exponent for power and counterexample-f");
    mod->add_option("--pairs", ma.pairs, "sample pairs for empirical moduli");
    mod->add_option("--radius", ma.radius, "radius of the sampling ball");
    mod->add_option("--d", ma.d_list, "comma-separated d values for the Schauder functional");

    auto* ver = app.add_subcommand("verify", "run one estimate verification");
    add_common(ver, inv);
    ver->add_option("criterion", va.criterion,
                    "apriori, mean-value, singular, schauder-const, schauder-var, invariance, cutoff")
        ->required();
    ver->add_option("--family", va.family, "manufactured family: gauss, gauss2, polybump, zero, one");
    ver->add_option("--coeff", va.coeff, "coefficient field for schauder-var: const, sin, sin2");
    ver->add_option("--R-list", va.R_list, "comma-separated radii");
    ver->add_option("--pairs", va.pairs, "sample pairs");
    ver->add_option("--poles", va.poles, "kernel translates in the harmonic family");
    ver->add_option("--points", va.points, "evaluation points per scale");
    ver->add_option("--kind", va.kind, "singular density: const, g1, g2");
    ver->add_option("--scale", va.scale, "multiply the manufactured solution");
    ver->add_flag("--no-dilation", va.no_dilation, "skip the dilation identity");

    auto* demo = app.add_subcommand("demo-counterexample", "non-Dini right-hand side with unbounded u_xy");
    demo->add_option("--seed", inv.seed, "random seed");
    demo->add_option("--out", inv.out_path, "write the JSON report here");
    demo->add_option("--alpha", da.alpha, "exponent in (0, 1]");
    demo->add_option("--pairs", da.pairs, "sample pairs for the modulus");
    demo->add_option("--radius", da.radius, "radius of the sampling disc");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    }

    inv.verb = app.get_subcommands().front()->get_name();
    json config;
    config["verb"] = inv.verb;
    config["seed"] = inv.seed;
    std::string error_kind, message;
    try {
        OperatorSpec spec;
        const bool uses_spec = inv.verb != "modulus" && inv.verb != "demo-counterexample";
        if (uses_spec) {
            spec = resolve_spec(inv.spec_arg);
            config["spec"] = spec_json(spec);
        }
        if (inv.verb == "check") do_check(inv, spec, out);
        else if (inv.verb == "kernel") do_kernel(inv, ka, spec, out);
        else if (inv.verb == "connect") do_connect(inv, ca, spec, out);
        else if (inv.verb == "taylor") do_taylor(inv, ta, spec, out);
        else if (inv.verb == "modulus") do_modulus(inv, ma, out);
        else if (inv.verb == "verify") do_verify(inv, va, spec, out);
        else do_demo(inv, da, out);
    } catch (const Error& e) {
        inv.code = exit_code(e.kind());
        error_kind = to_string(e.kind());
        message = e.what();
        err << e.what() << "\n";
    } catch (const std::exception& e) {
        inv.code = kExitNumerical;
        error_kind = "internal";
        message = e.what();
        err << "error: " << e.what() << "\n";
    }
    config["flags"] = inv.flags;
    try {
        write_out(inv, config, error_kind, message);
    } catch (const Error& e) {
        err << e.what() << "\n";
        return kExitUsage;
    }
    return inv.code;
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, std::cout, std::cerr);
}

}  // namespace kolmo::cli
