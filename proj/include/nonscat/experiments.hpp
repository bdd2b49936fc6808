#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iomanip>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "json.hpp"
#include "nonscat/fem.hpp"
#include "nonscat/hodograph.hpp"
#include "nonscat/media.hpp"
#include "nonscat/radial.hpp"

#ifndef NONSCAT_VERSION
#define NONSCAT_VERSION "unknown"
#endif

namespace nonscat::exp {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---- config ----------------------------------------------------------------

/// Flat `key = value` file with [section] headers; keys are addressed as
/// "section.key". Every accessor validates its range.
class Config {
public:
    Config() = default;

    static Config from_file(const fs::path& path)
    {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file " + path.string());
        return from_stream(in, path.string());
    }

    static Config from_string(const std::string& text)
    {
        std::istringstream in(text);
        return from_stream(in, "<string>");
    }

    void set(const std::string& key, const std::string& value) { tree_.put(key, value); }
    bool has(const std::string& key) const { return tree_.get_optional<std::string>(key).has_value(); }

    std::string str(const std::string& key, const std::string& def, const std::vector<std::string>& allowed = {}) const
    {
        used_.insert(key);
        const std::string v = trim(tree_.get<std::string>(key, def));
        if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
            std::string list;
            for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
            throw ConfigError(key + " = " + v + " is not one of {" + list + "}");
        }
        return v;
    }

    double num(const std::string& key, double def, double lo, double hi) const
    {
        used_.insert(key);
        const auto raw = tree_.get_optional<std::string>(key);
        const double v = raw ? parse_double(key, *raw) : def;
        if (!(v >= lo && v <= hi))
            throw ConfigError(key + " = " + fmt(v) + " outside [" + fmt(lo) + ", " + fmt(hi) + "]");
        return v;
    }

    int integer(const std::string& key, int def, int lo, int hi) const
    {
        const double v = num(key, def, lo, hi);
        if (v != std::floor(v)) throw ConfigError(key + " must be an integer");
        return static_cast<int>(v);
    }

    std::vector<double> list(const std::string& key, const std::vector<double>& def, double lo, double hi) const
    {
        used_.insert(key);
        const auto raw = tree_.get_optional<std::string>(key);
        std::vector<double> out = raw ? parse_list(key, *raw) : def;
        if (out.empty()) throw ConfigError(key + " is empty");
        for (double v : out)
            if (!(v >= lo && v <= hi)) throw ConfigError(key + " entry " + fmt(v) + " outside [" + fmt(lo) + ", " + fmt(hi) + "]");
        return out;
    }

    std::vector<std::string> words(const std::string& key, const std::vector<std::string>& def,
                                   const std::vector<std::string>& allowed) const
    {
        used_.insert(key);
        const auto raw = tree_.get_optional<std::string>(key);
        std::vector<std::string> out;
        if (!raw) return def;
        std::string item;
        std::istringstream in(*raw);
        while (std::getline(in, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            if (std::find(allowed.begin(), allowed.end(), item) == allowed.end())
                throw ConfigError(key + ": unknown entry " + item);
            out.push_back(item);
        }
        if (out.empty()) throw ConfigError(key + " is empty");
        return out;
    }

    ojson echo() const
    {
        ojson j = ojson::object();
        for (const auto& [sec, sub] : tree_) {
            if (sub.empty()) {
                j[sec] = sub.data();
                continue;
            }
            for (const auto& [k, v] : sub) j[sec][k] = v.data();
        }
        return j;
    }

    std::vector<std::string> unused() const
    {
        std::vector<std::string> out;
        for (const auto& [sec, sub] : tree_) {
            if (sub.empty()) {
                if (!used_.count(sec)) out.push_back(sec);
                continue;
            }
            for (const auto& kv : sub)
                if (!used_.count(sec + "." + kv.first)) out.push_back(sec + "." + kv.first);
        }
        return out;
    }

    static std::vector<double> parse_list(const std::string& key, const std::string& raw)
    {
        std::vector<double> out;
        const std::string s = trim(raw);
        // lo:hi:count is an inclusive linspace
        if (std::count(s.begin(), s.end(), ':') == 2) {
            const auto a = s.find(':'), b = s.find(':', a + 1);
            const double lo = parse_double(key, s.substr(0, a)), hi = parse_double(key, s.substr(a + 1, b - a - 1));
            const double n = parse_double(key, s.substr(b + 1));
            if (n < 2 || n != std::floor(n) || n > 1e6) throw ConfigError(key + ": bad grid count in " + s);
            for (int i = 0; i < int(n); ++i) out.push_back(lo + (hi - lo) * i / (n - 1));
            return out;
        }
        std::string item;
        std::istringstream in(s);
        while (std::getline(in, item, ',')) {
            item = trim(item);
            if (!item.empty()) out.push_back(parse_double(key, item));
        }
        return out;
    }

private:
    static Config from_stream(std::istream& in, const std::string& name)
    {
        Config c;
        try {
            boost::property_tree::ini_parser::read_ini(in, c.tree_);
        } catch (const boost::property_tree::ini_parser_error& e) {
            throw ConfigError("cannot parse " + name + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
        }
        return c;
    }

    static std::string trim(const std::string& s)
    {
        const auto a = s.find_first_not_of(" \t\r\n");
        if (a == std::string::npos) return "";
        return s.substr(a, s.find_last_not_of(" \t\r\n") - a + 1);
    }

    static double parse_double(const std::string& key, const std::string& raw)
    {
        const std::string s = trim(raw);
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            throw ConfigError(key + ": not a number: '" + s + "'");
        }
        if (used != s.size()) throw ConfigError(key + ": not a number: '" + s + "'");
        return v;
    }

    static std::string fmt(double v)
    {
        std::ostringstream o;
        o << v;
        return o.str();
    }

    boost::property_tree::ptree tree_;
    mutable std::set<std::string> used_;
};

// ---- run context -----------------------------------------------------------

struct Check {
    std::string name;
    bool pass;
    std::string detail;
};

class Context {
public:
    Context(const Config& c, fs::path out_dir, std::uint64_t s, std::ostream* log) : cfg(c), out(std::move(out_dir)), seed(s), log_(log) {}

    const Config& cfg;
    fs::path out;
    std::uint64_t seed;
    std::vector<Check> checks;
    ojson metrics = ojson::object();
    ojson details = ojson::object();
    std::vector<std::string> files;
    std::vector<std::string> warnings;

    template <class F>
    void write(const std::string& name, F&& body)
    {
        std::ofstream o(out / name);
        if (!o) throw std::runtime_error("cannot write " + (out / name).string());
        o << std::setprecision(17);
        body(o);
        if (!o) throw std::runtime_error("write failed for " + (out / name).string());
        files.push_back(name);
    }

    void check(const std::string& name, bool pass, const std::string& detail)
    {
        checks.push_back({name, pass, detail});
        if (log_) *log_ << (pass ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
    }

    void warn(const std::string& msg)
    {
        warnings.push_back(msg);
        if (log_) *log_ << "warning: " << msg << std::endl;
    }

    void metric(const std::string& name, double v) { metrics[name] = std::isfinite(v) ? ojson(v) : ojson(nullptr); }

private:
    std::ostream* log_;
};

inline std::string sci(double v, int digits = 3)
{
    std::ostringstream o;
    o << std::scientific << std::setprecision(digits) << v;
    return o.str();
}

// ---- shared solve helpers --------------------------------------------------

struct Setup {
    Mesh mesh;
    int truncation = 0;
    double k = 0.0;  ///< wave number actually used (may be perturbed)
};

/// Mesh of the hold-all disk around the inclusion with the DtN truncation.
inline Setup discretize(const Context& ctx, const Domain& inclusion, double h, double k, int m_default = 0)
{
    const double factor = ctx.cfg.num("mesh.R_factor", 1.6, 1.3, 4.0);
    const double radius = factor * inclusion.circumradius();
    Setup s;
    s.k = k;
    s.truncation = ctx.cfg.integer("solver.M", m_default > 0 ? m_default : default_truncation(k, radius), 1, 400);
    if (s.truncation < static_cast<int>(std::ceil(k * radius)) + 8)
        throw ConfigError("solver.M = " + std::to_string(s.truncation) + " is below ceil(kR) + 8 = " +
                          std::to_string(static_cast<int>(std::ceil(k * radius)) + 8));
    s.mesh = generate_mesh(inclusion.center(), radius, inclusion, h, 8 * s.truncation);
    return s;
}

/// Factorised system for one medium and wave number. A singular sparse
/// factorisation is retried once at k + 1e-6 with a warning.
inline std::unique_ptr<Solver> make_solver(Context& ctx, const MediumSpec& medium, Setup& s)
{
    for (int attempt = 0;; ++attempt) {
        try {
            LinearSystem sys;
            sys.matrix = assemble_matrix(s.mesh, &medium, s.k);
            sys.dtn = make_dtn(s.mesh, s.k, s.truncation);
            sys.ring = s.mesh.ring;
            return std::make_unique<Solver>(sys);
        } catch (const SingularSystem& e) {
            if (attempt > 0) throw;
            ctx.warn(std::string(e.what()) + "; retrying with k + 1e-6");
            s.k += 1e-6;
        }
    }
}

inline FarField scattered_far_field(Context& ctx, const Solver& solver, const MediumSpec& medium, const IncidentField& v,
                                    const Setup& s, Eigen::VectorXcd* w_out = nullptr)
{
    SolveReport rep;
    Eigen::VectorXcd w = solver.solve(assemble_load(s.mesh, medium, v), &rep);
    const int samples = ctx.cfg.integer("solver.far_field_samples", 256, 16, 65536);
    FarField ff = far_field(s.mesh, w, s.k, s.truncation, samples);
    if (ff.aliasing_warning) ctx.warn("far field: ring too coarse for the truncation (aliasing)");
    if (w_out) *w_out = std::move(w);
    return ff;
}

inline void write_far_field(Context& ctx, const std::string& name, const FarField& ff)
{
    ctx.write(name, [&](std::ostream& o) { write_far_field_csv(o, ff); });
}

inline std::string htag(double h)
{
    std::ostringstream o;
    o << h;
    return o.str();
}

inline std::vector<double> mesh_levels(const Context& ctx, double h_def, int levels_def)
{
    const double h = ctx.cfg.num("mesh.h", h_def, 1e-3, 0.25);
    const int levels = ctx.cfg.integer("mesh.levels", levels_def, 1, 5);
    std::vector<double> hs;
    for (int l = 0; l < levels; ++l) hs.push_back(h / std::pow(2.0, l));
    return hs;
}

/// Absolute far-field error of the Mie validation problem at mesh size h: the
/// discretisation floor other experiments compare against. `floor.value`
/// overrides the computation.
inline double discretization_floor(Context& ctx, double h)
{
    if (ctx.cfg.has("floor.value")) return ctx.cfg.num("floor.value", 0.0, 0.0, 1e3);
    const double k = 2.0;
    const int m = 24;
    const auto medium = constant_medium(Domain::disk(Vec2::Zero(), 1.0), 1.0, 4.0);
    const auto mesh = generate_mesh(Vec2::Zero(), 1.6, medium.domain, h, 8 * m);
    LinearSystem sys = assemble(medium, IncidentField::plane(Vec2(1, 0), k), mesh, m);
    const FarField ff = far_field(mesh, solve(sys), k, m);
    const auto prof = radial::RadialProfile::constant(1.0, 4.0);
    const FarField ref = series_far_field([&](int mm) { return radial::scattering_coeff(prof, mm, k).c; }, k, 0.0, m);
    const double floor = far_field_distance(ff, ref);
    ctx.details["floor"] = {{"h", h}, {"abs_error", floor}, {"oracle_norm", ref.norm}};
    return floor;
}

inline IncidentField plane_from_config(const Context& ctx, double k, double angle_def = 0.0)
{
    const double a = ctx.cfg.num("incident.angle", angle_def, -10.0, 10.0);
    return IncidentField::plane(Vec2(std::cos(a), std::sin(a)), k);
}

// ---- experiments -----------------------------------------------------------

inline void mie_validate(Context& ctx)
{
    const auto t0 = std::chrono::steady_clock::now();
    const double a = ctx.cfg.num("medium.a", 1.0, 0.05, 20.0);
    const double n = ctx.cfg.num("medium.n", 4.0, 0.05, 20.0);
    const double radius = ctx.cfg.num("medium.radius", 1.0, 0.1, 5.0);
    const double k = ctx.cfg.num("incident.k", 2.0, 0.01, 50.0);
    const double h = ctx.cfg.num("mesh.h", 0.01, 1e-3, 0.25);
    const double tol = ctx.cfg.num("checks.rel_error", 0.01, 0.0, 1.0);
    const double angle = ctx.cfg.num("incident.angle", 0.0, -10.0, 10.0);

    if (a == 1.0 && n == 1.0) throw ConfigError("medium.a = medium.n = 1 has no contrast");
    const auto medium = constant_medium(Domain::disk(Vec2::Zero(), radius), a, n);
    Setup s = discretize(ctx, medium.domain, h, k, 24);
    const auto solver = make_solver(ctx, medium, s);
    const auto v = IncidentField::plane(Vec2(std::cos(angle), std::sin(angle)), s.k);
    const FarField ff = scattered_far_field(ctx, *solver, medium, v, s);
    const auto prof = radial::RadialProfile::constant(a, n, radius);
    const FarField ref = series_far_field([&](int m) { return radial::scattering_coeff(prof, m, s.k).c; }, s.k, angle,
                                          s.truncation, static_cast<int>(ff.theta.size()));
    write_far_field(ctx, "far_field.csv", ff);
    write_far_field(ctx, "far_field_series.csv", ref);

    const double err = far_field_distance(ff, ref);
    const double rel = err / ref.norm;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ctx.metric("h", h);
    ctx.metric("vertices", s.mesh.num_vertices());
    ctx.metric("abs_error", err);
    ctx.metric("rel_error", rel);
    ctx.metric("oracle_norm", ref.norm);
    ctx.metric("capacitance_condition", solver->capacitance_condition());
    ctx.metric("seconds", secs);
    ctx.check("mie_relative_error", rel < tol, "relative L2 far-field error " + sci(rel) + " (< " + sci(tol, 1) + ")");
    const double limit = ctx.cfg.num("checks.seconds", 120.0, 0.0, 1e6);
    ctx.check("mie_runtime", secs < limit, std::to_string(secs) + " s (< " + std::to_string(limit) + " s)");
}

namespace detail {

struct SquareLevel {
    double h;
    int vertices;
    std::map<std::string, double> norm, flux, jump;
};

// Square a = n (= medium.a) at k = pi sqrt(p^2 + q^2); fields keyed by name.
inline std::vector<SquareLevel> square_levels(Context& ctx, const std::vector<std::string>& which, double a, int p, int q,
                                              const std::vector<double>& hs)
{
    const auto medium = square_medium(a);
    const double k = kPi * std::sqrt(double(p * p + q * q));
    const double angle = ctx.cfg.num("incident.angle", 0.0, -10.0, 10.0);
    const int tsamples = ctx.cfg.integer("checks.transmission_samples", 400, 8, 100000);
    std::vector<SquareLevel> out;
    for (double h : hs) {
        Setup s = discretize(ctx, medium.domain, h, k);
        const auto solver = make_solver(ctx, medium, s);
        SquareLevel lv{h, s.mesh.num_vertices(), {}, {}, {}};
        for (const auto& name : which) {
            const IncidentField v = name == "cos"   ? IncidentField::square_mode(p, q, false)
                                    : name == "sin" ? IncidentField::square_mode(p, q, true)
                                                    : IncidentField::plane(Vec2(std::cos(angle), std::sin(angle)), s.k);
            Eigen::VectorXcd w;
            const FarField ff = scattered_far_field(ctx, *solver, medium, v, s, &w);
            write_far_field(ctx, "far_field_" + name + "_h" + htag(h) + ".csv", ff);
            const auto tr = transmission_residual(s.mesh, w, v, medium, tsamples);
            lv.norm[name] = ff.norm;
            lv.flux[name] = tr.max_flux;
            lv.jump[name] = tr.max_jump;
        }
        out.push_back(std::move(lv));
    }
    ctx.write("refinement.csv", [&](std::ostream& o) {
        o << "h,vertices";
        for (const auto& nm : which) o << ",norm_" << nm << ",flux_" << nm << ",jump_" << nm;
        o << '\n';
        for (const auto& lv : out) {
            o << lv.h << ',' << lv.vertices;
            for (const auto& nm : which) o << ',' << lv.norm.at(nm) << ',' << lv.flux.at(nm) << ',' << lv.jump.at(nm);
            o << '\n';
        }
    });
    return out;
}

inline void control_stability(Context& ctx, const std::vector<SquareLevel>& lv, const std::string& name)
{
    if (lv.size() < 2) return;
    double lo = 1e300, hi = 0.0;
    for (const auto& l : lv) lo = std::min(lo, l.norm.at(name)), hi = std::max(hi, l.norm.at(name));
    const double spread = hi / lo - 1.0;
    ctx.metric("control_spread", spread);
    ctx.check("control_stable", spread <= 0.1, "plane-wave far-field norm spread " + sci(spread) + " across refinements (<= 10%)");
}

}  // namespace detail

inline void square_nonscatter(Context& ctx)
{
    const double a = ctx.cfg.num("medium.a", 2.0, 0.05, 20.0);
    const int p = ctx.cfg.integer("incident.p", 1, 1, 8), q = ctx.cfg.integer("incident.q", 1, 1, 8);
    const std::string mode = ctx.cfg.str("incident.mode", "both", {"cos", "sin", "both"});
    const double ratio_max = ctx.cfg.num("checks.ratio", 0.02, 0.0, 1.0);
    const double decrease = ctx.cfg.num("checks.decrease", 3.0, 1.0, 100.0);
    std::vector<std::string> modes;
    if (mode != "sin") modes.push_back("cos");
    if (mode != "cos") modes.push_back("sin");
    std::vector<std::string> which = modes;
    which.push_back("control");
    const auto lv = detail::square_levels(ctx, which, a, p, q, mesh_levels(ctx, 0.04, 3));

    for (const auto& m : modes) {
        double worst = 0.0;
        for (const auto& l : lv) worst = std::max(worst, l.norm.at(m) / l.norm.at("control"));
        ctx.metric("norm_" + m, lv.back().norm.at(m));
        ctx.metric("ratio_" + m, lv.back().norm.at(m) / lv.back().norm.at("control"));
        ctx.metric("flux_" + m, lv.back().flux.at(m));
        ctx.check(m + "_mode_ratio", worst <= ratio_max,
                  "max far-field norm / control norm " + sci(worst) + " over " + std::to_string(lv.size()) + " meshes (<= " +
                      sci(ratio_max, 1) + ")");
        if (lv.size() >= 2) {
            double fmin = 1e300;
            for (std::size_t i = 1; i < lv.size(); ++i) fmin = std::min(fmin, lv[i - 1].norm.at(m) / lv[i].norm.at(m));
            ctx.metric("min_decrease_" + m, fmin);
            ctx.check(m + "_mode_refinement", fmin >= decrease,
                      "smallest norm decrease per halving x" + sci(fmin) + " (>= x" + sci(decrease, 1) + ")");
        }
    }
    ctx.metric("norm_control", lv.back().norm.at("control"));
    detail::control_stability(ctx, lv, "control");
}

inline void square_scatter_control(Context& ctx)
{
    const double a = ctx.cfg.num("medium.a", 2.0, 0.05, 20.0);
    const auto lv = detail::square_levels(ctx, {"control"}, a, 1, 1, mesh_levels(ctx, 0.04, 3));
    ctx.metric("norm_control", lv.back().norm.at("control"));
    ctx.metric("flux_control", lv.back().flux.at("control"));
    detail::control_stability(ctx, lv, "control");
    if (lv.size() >= 2) {
        const double r = lv.back().flux.at("control") / lv.front().flux.at("control");
        ctx.check("control_not_transmission_solution", r > 0.5,
                  "flux residual finest/coarsest " + sci(r) + " (> 0.5: does not converge to zero)");
    }
}

inline void pushforward_invisible(Context& ctx)
{
    const auto eps = ctx.cfg.list("medium.eps", {0.02, 0.05}, 0.0, 0.1);
    const auto kinds = ctx.cfg.words("incident.kinds", {"plane", "point"}, {"plane", "point"});
    const auto ks = ctx.cfg.list("incident.k", {2.0, 5.0}, 0.01, 50.0);
    const double angle = ctx.cfg.num("incident.angle", 0.0, -10.0, 10.0);
    const Vec2 src(ctx.cfg.num("incident.source_x", 1.5, -100, 100), ctx.cfg.num("incident.source_y", 1.5, -100, 100));
    const double fac = ctx.cfg.num("checks.floor_factor", 2.0, 0.0, 1e6);
    const auto hs = mesh_levels(ctx, 0.02, 2);
    const Domain base = Domain::unit_square();
    if ((src - base.center()).norm() <= ctx.cfg.num("mesh.R_factor", 1.6, 1.3, 4.0) * base.circumradius())
        throw ConfigError("incident source must lie outside the truncation disk");

    struct Row {
        double eps, k, h;
        std::string kind;
        double norm;
    };
    std::vector<Row> rows;
    for (double h : hs)
        for (double e : eps) {
            const auto medium = pushforward_medium(DiffeoSpec::unit_square_bump(e), base);
            for (double k : ks) {
                Setup s = discretize(ctx, base, h, k);
                const auto solver = make_solver(ctx, medium, s);
                for (const auto& kind : kinds) {
                    const IncidentField v = kind == "plane" ? IncidentField::plane(Vec2(std::cos(angle), std::sin(angle)), s.k)
                                                            : IncidentField::point_source(src, s.k);
                    const FarField ff = scattered_far_field(ctx, *solver, medium, v, s);
                    rows.push_back({e, k, h, kind, ff.norm});
                }
            }
        }
    ctx.write("pushforward.csv", [&](std::ostream& o) {
        o << "eps,kind,k,h,norm\n";
        for (const auto& r : rows) o << r.eps << ',' << r.kind << ',' << r.k << ',' << r.h << ',' << r.norm << '\n';
    });
    const double floor = discretization_floor(ctx, hs.back());
    ctx.metric("floor", floor);
    const std::size_t per = rows.size() / hs.size();
    double worst = 0.0;
    for (std::size_t i = rows.size() - per; i < rows.size(); ++i) worst = std::max(worst, rows[i].norm);
    ctx.metric("max_norm", worst);
    ctx.check("pushforward_at_floor", worst <= fac * floor,
              std::to_string(per) + " far-field norms, max " + sci(worst) + " (<= " + sci(fac, 1) + " x floor " + sci(floor) + ")");
    if (hs.size() >= 2) {
        int bad = 0;
        double worst_ratio = 0.0;
        for (std::size_t i = per; i < rows.size(); ++i) {
            const double r = rows[i].norm / rows[i - per].norm;
            worst_ratio = std::max(worst_ratio, std::isfinite(r) ? r : 0.0);
            if (!(rows[i].norm < rows[i - per].norm) && rows[i].norm > 0.0) ++bad;
        }
        ctx.metric("max_refinement_ratio", worst_ratio);
        ctx.check("pushforward_decreasing", bad == 0,
                  std::to_string(bad) + " norms failed to decrease under halving (largest ratio " + sci(worst_ratio) + ")");
    }
}

namespace detail {

// TE determinant for constant a, n from Bessel J only: zero iff the interior
// mode J_m(kappa r) and the incident J_m(k r) have matching Cauchy data.
inline double te_closed_form(int m, double k, double a, double n, double radius)
{
    const double kap = k * std::sqrt(n / a);
    auto j = [](int mm, double x) { return std::cyl_bessel_j(double(mm), x); };
    auto dj = [&](int mm, double x) { return mm == 0 ? -j(1, x) : 0.5 * (j(mm - 1, x) - j(mm + 1, x)); };
    return j(m, kap * radius) * k * dj(m, k * radius) - a * kap * dj(m, kap * radius) * j(m, k * radius);
}

inline std::vector<double> closed_form_roots(int m, double a, double n, double radius, double k_max, int grid)
{
    std::vector<double> roots;
    auto f = [&](double k) { return te_closed_form(m, k, a, n, radius); };
    double kl = k_max / grid, fl = f(kl);
    for (int i = 2; i <= grid; ++i) {
        const double kr = k_max * i / grid, fr = f(kr);
        if (fl == 0.0) roots.push_back(kl);
        else if ((fl < 0) != (fr < 0)) {
            double lo = kl, hi = kr, flo = fl;
            for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
                const double mid = 0.5 * (lo + hi), fm = f(mid);
                if ((fm < 0) == (flo < 0)) lo = mid, flo = fm;
                else hi = mid;
            }
            roots.push_back(0.5 * (lo + hi));
        }
        kl = kr;
        fl = fr;
    }
    return roots;
}

}  // namespace detail

inline void radial_te(Context& ctx)
{
    const std::string which = ctx.cfg.str("medium.profile", "both", {"constant", "cosine", "both"});
    const double a = ctx.cfg.num("medium.a", 1.0, 0.05, 20.0);
    const double n = ctx.cfg.num("medium.n", 4.0, 0.05, 20.0);
    const double radius = ctx.cfg.num("medium.radius", 1.0, 0.1, 5.0);
    const auto modes = ctx.cfg.list("radial.modes", {0, 1, 2}, 0, 40);
    const double k_max = ctx.cfg.num("radial.k_max", 10.0, 0.1, 60.0);
    const int grid = ctx.cfg.integer("radial.grid", 1000, 10, 1000000);
    radial::IntegrationOptions opt;
    opt.steps = ctx.cfg.integer("radial.steps", 4096, 64, 1 << 22);

    std::vector<std::pair<std::string, radial::RadialProfile>> profiles;
    if (which != "cosine") profiles.emplace_back("constant", radial::RadialProfile::constant(a, n, radius));
    if (which != "constant")
        profiles.emplace_back("cosine", radial::RadialProfile{[](double) { return 1.0; }, [](double) { return 0.0; },
                                                              [radius](double r) { return 2.0 + std::cos(kPi * r / radius); }, radius});

    // sweep point mode: one k, report d_m and c_m for every mode
    if (ctx.cfg.has("incident.k")) {
        const double k = ctx.cfg.num("incident.k", 1.0, 1e-6, 60.0);
        double worst = 0.0;
        for (const auto& [name, prof] : profiles)
            for (double md : modes) {
                const int m = int(md);
                const auto t = radial::integrate_mode(prof, m, k, opt);
                const cplx c = radial::scattering_coeff(t, radius).c;
                const std::string sfx = "_" + name + "_m" + std::to_string(m);
                ctx.metric("d" + sfx, radial::te_determinant(t, radius));
                ctx.metric("abs_c" + sfx, std::abs(c));
                ctx.metric("abs_1p2c" + sfx, std::abs(1.0 + 2.0 * c));
                worst = std::max(worst, std::abs(std::abs(1.0 + 2.0 * c) - 1.0));
            }
        ctx.check("unitarity", worst <= 1e-8, "max ||1 + 2c_m| - 1| = " + sci(worst));
        return;
    }

    std::vector<double> ks;
    for (int i = 1; i <= grid; ++i) ks.push_back(k_max * i / grid);
    const auto ic = radial::integral_condition(profiles.front().second);
    ctx.metric("integral_condition", ic.value);
    for (const auto& [name, prof] : profiles) {
        std::vector<radial::SweepRow> rows;
        ojson roots_j = ojson::array();
        double unit = 0.0, cmax = 0.0, match = 0.0;
        int min_roots = 1 << 30;
        bool counts_ok = true;
        std::ostringstream roots_csv;
        roots_csv << std::setprecision(17) << "m,k,residual,abs_c,reference_k\n";
        for (double md : modes) {
            const int m = int(md);
            const auto part = radial::sweep(prof, m, ks, opt);
            rows.insert(rows.end(), part.begin(), part.end());
            for (const auto& r : part) unit = std::max(unit, std::abs(r.unitarity - 1.0));
            const auto found = radial::find_te(prof, m, 0.0 + k_max / grid, k_max, grid, opt);
            for (const auto& w : found.warnings) ctx.warn(name + " m=" + std::to_string(m) + ": " + w);
            std::vector<double> ref;
            if (name == "constant") {
                ref = detail::closed_form_roots(m, a, n, radius, k_max, 4 * grid);
            } else {
                // re-bisect each root to 1e-14 on the half-step determinant
                radial::IntegrationOptions fine = opt;
                fine.steps *= 2;
                auto d = [&](double k) { return radial::te_determinant(prof, m, k, fine); };
                for (const auto& r : found.roots) {
                    double lo = r.k - 1e-4, hi = r.k + 1e-4, flo = d(lo);
                    if ((flo < 0) == (d(hi) < 0)) {
                        ref.push_back(std::numeric_limits<double>::quiet_NaN());
                        continue;
                    }
                    while (hi - lo > 1e-14 * hi) {
                        const double mid = 0.5 * (lo + hi), fm = d(mid);
                        if ((fm < 0) == (flo < 0)) lo = mid, flo = fm;
                        else hi = mid;
                    }
                    ref.push_back(0.5 * (lo + hi));
                }
            }
            min_roots = std::min<int>(min_roots, int(found.roots.size()));
            if (ref.size() != found.roots.size()) counts_ok = false;
            for (std::size_t i = 0; i < found.roots.size(); ++i) {
                const double k = found.roots[i].k;
                const double c = std::abs(radial::scattering_coeff(prof, m, k, opt).c);
                cmax = std::max(cmax, c);
                const double rk = i < ref.size() ? ref[i] : std::numeric_limits<double>::quiet_NaN();
                if (i < ref.size()) match = std::max(match, std::isnan(rk) ? 1e300 : std::abs(rk - k));
                roots_csv << m << ',' << k << ',' << found.roots[i].residual << ',' << c << ',' << rk << '\n';
            }
        }
        ctx.write("radial_sweep_" + name + ".csv", [&](std::ostream& o) { radial::write_sweep_csv(o, rows); });
        ctx.write("roots_" + name + ".csv", [&](std::ostream& o) { o << roots_csv.str(); });
        const double tol = name == "constant" ? 1e-8 : 1e-6;
        const std::string oracle = name == "constant" ? "closed-form Bessel roots" : "step-halved roots";
        ctx.metric("root_mismatch_" + name, match);
        ctx.metric("max_abs_c_at_roots_" + name, cmax);
        ctx.metric("unitarity_defect_" + name, unit);
        ctx.metric("min_roots_" + name, min_roots);
        ctx.check(name + "_roots_match", counts_ok && match <= tol,
                  "max |k - k_ref| = " + sci(match) + " vs " + oracle + " (<= " + sci(tol, 0) + ")" + (counts_ok ? "" : ", root counts differ"));
        ctx.check(name + "_nonscattering_at_roots", cmax < 1e-8, "max |c_m| at roots " + sci(cmax) + " (< 1e-8)");
        ctx.check(name + "_unitarity", unit <= 1e-8, "max ||1 + 2c_m| - 1| on the sweep " + sci(unit) + " (<= 1e-8)");
        if (name == "constant")
            ctx.check(name + "_root_count", min_roots >= 3, "fewest roots per mode " + std::to_string(min_roots) + " (>= 3)");
    }
    ctx.check("integral_condition", ic.distance_to_one > 1e-3,
              "(1/R) int sqrt(n/a) dr = " + std::to_string(ic.value) + " (!= 1)");
}

namespace detail {

// Sin-mode square solution from the FEM, fitted by moving least squares and
// pushed through the hodograph at the edge midpoint (0, 1/2).
inline ojson fem_hodograph_demo(Context& ctx, double c0, double c2)
{
    const double h = ctx.cfg.num("fem.h", 0.02, 0.005, 0.1);
    const auto medium = square_medium(2.0);
    const auto v = IncidentField::square_mode(1, 1, true);
    Setup s = discretize(ctx, medium.domain, h, v.k());
    const auto solver = make_solver(ctx, medium, s);
    Eigen::VectorXcd w;
    scattered_far_field(ctx, *solver, medium, v, s, &w);
    std::vector<char> in(std::size_t(s.mesh.num_vertices()), 0);
    for (int t = 0; t < s.mesh.num_triangles(); ++t)
        if (s.mesh.inside[std::size_t(t)])
            for (int c : s.mesh.triangles[std::size_t(t)]) in[std::size_t(c)] = 1;
    std::vector<Vec2> pts;
    std::vector<double> vals;
    for (int i = 0; i < s.mesh.num_vertices(); ++i)
        if (in[std::size_t(i)]) pts.push_back(s.mesh.vertices[std::size_t(i)]), vals.push_back(w(i).real());

    hodograph::Fields ph;
    ph.k = v.k();
    ph.medium = medium.coefficients;
    ph.w = hodograph::mls_quadratic(pts, vals, 4 * h);
    ph.v.value = [v](const Vec2& x) { return v.value(x).real(); };
    ph.v.gradient = [v](const Vec2& x) -> Vec2 { return v.gradient(x).real(); };
    ph.v.hessian = [v](const Vec2& x) -> Mat2 { return v.hessian(x).real(); };
    const Vec2 p(0.0, 0.5), nu(-1.0, 0.0);
    auto fr = hodograph::align_frame(medium.a_inside(p), nu, ph.w.gradient(p));
    fr.p = p;
    const auto loc = hodograph::localize(ph, fr);
    hodograph::GridSpec gs;
    gs.y1_max = 0.05;
    gs.y2_half = 0.1;
    gs.n1 = 8;
    gs.n2 = 8;
    gs.x1_lo = -0.02;
    gs.x1_hi = 0.3;
    const auto g = hodograph::build_z(loc.w, gs);
    const auto b = hodograph::boundary_residual(loc, g);
    double bmax = 0.0;
    for (double x : b) bmax = std::max(bmax, std::abs(x));
    const auto cert = hodograph::certify(hodograph::linearize_all(loc, g), c0, c2, ctx.seed);
    ojson j;
    j["h"] = h;
    j["point"] = {p.x(), p.y()};
    j["sign_flipped"] = fr.sign < 0;
    j["max_abs_b_on_sigma"] = bmax;
    j["certificate"] = cert.report;
    return j;
}

}  // namespace detail

inline void hodograph_certify(Context& ctx)
{
    using namespace hodograph;
    const int count = ctx.cfg.integer("hodograph.count", 100, 1, 100000);
    const int identity_count = ctx.cfg.integer("hodograph.identity_count", 20, 0, 100000);
    const double c0 = ctx.cfg.num("hodograph.c0", 4.0, 1.0, 1e3);
    const double c2 = ctx.cfg.num("hodograph.c2", 3.0, 1.0, 1e3);
    GridSpec gs;
    gs.n1 = ctx.cfg.integer("hodograph.n", 16, 2, 512);
    gs.n2 = gs.n1 % 2 ? gs.n1 + 1 : gs.n1;
    gs.y1_max = ctx.cfg.num("hodograph.y1_max", 0.1, 1e-3, 1.0);
    gs.y2_half = ctx.cfg.num("hodograph.y2_half", 0.1, 1e-3, 1.0);
    const bool fem_demo = ctx.cfg.str("hodograph.fem_demo", "true", {"true", "false"}) == "true";

    std::mt19937_64 rng(ctx.seed);
    nlohmann::json certs = nlohmann::json::array();
    int passed = 0;
    double min_margin = 1e300;
    std::vector<LocalProblem> problems;
    for (int i = 0; i < count; ++i) {
        problems.push_back(random_local_problem(rng, gs, c0, c2));
        const auto& lp = problems.back();
        auto cert = certify(linearize_all(lp.fields, lp.grid), c0, c2, ctx.seed + std::uint64_t(i));
        passed += cert.pass;
        if (cert.report["oblique"]["margin"].is_number()) min_margin = std::min(min_margin, cert.report["oblique"]["margin"].get<double>());
        cert.report["index"] = i;
        cert.report["frame"] = {{"P", {lp.frame.p.x(), lp.frame.p.y()}},
                                {"c1", lp.frame.c1},
                                {"sign", lp.frame.sign},
                                {"c3", std::isfinite(lp.frame.c3) ? nlohmann::json(lp.frame.c3) : nlohmann::json(nullptr)}};
        certs.push_back(cert.report);
    }
    ctx.write("certificates.json", [&](std::ostream& o) { o << certs.dump(1) << '\n'; });
    ctx.metric("certificates_passed", passed);
    ctx.metric("min_oblique_margin", min_margin);
    ctx.check("random_certificates", passed == count, std::to_string(passed) + "/" + std::to_string(count) + " random-field certificates pass");

    // transform identities on the first identity_count fields
    double worst_order_dev = 0.0, jac = 0.0, push = 0.0, quad = 0.0;
    std::normal_distribution<double> gauss;
    std::ostringstream csv;
    csv << std::setprecision(17) << "index,err_h,err_h2,err_h4,order,jacobian,pushforward,quadratic\n";
    for (int i = 0; i < identity_count; ++i) {
        const LocalProblem lp = i < count ? problems[std::size_t(i)] : random_local_problem(rng, gs, c0, c2);
        double err[3];
        for (int l = 0; l < 3; ++l) {
            const auto g = build_z(lp.fields.w, gs.refined(l));
            err[l] = 0.0;
            for (const auto& d : divergence_identity(transform_coefficients(lp.fields, g), g, 1 << l))
                err[l] = std::max(err[l], std::abs(d.lhs - d.rhs));
        }
        const double order = std::log2(err[1] / err[2]);
        worst_order_dev = std::max(worst_order_dev, std::abs(order - 2.0));
        double j1 = 0.0, p1 = 0.0, q1 = 0.0;
        for (int nd = 0; nd < lp.grid.size(); ++nd) {
            const Vec2 gw = lp.fields.w.gradient(lp.grid.x(nd));
            Mat2 dh, dhi;
            dh << gw.x(), gw.y(), 0, 1;
            dhi << lp.grid.d1z[std::size_t(nd)], lp.grid.d2z[std::size_t(nd)], 0, 1;
            j1 = std::max(j1, (dh * dhi - Mat2::Identity()).norm());
            p1 = std::max(p1, (lp.grid.tilde_grad(nd) - gw).norm());
            const auto sys = linearize(lp.fields, lp.grid, nd);
            for (int r = 0; r < 20; ++r) {
                const Vec2 xi(gauss(rng), gauss(rng));
                q1 = std::max(q1, quadratic_identity_error(sys, xi) / xi.squaredNorm());
            }
        }
        jac = std::max(jac, j1);
        push = std::max(push, p1);
        quad = std::max(quad, q1);
        csv << i << ',' << err[0] << ',' << err[1] << ',' << err[2] << ',' << order << ',' << j1 << ',' << p1 << ',' << q1 << '\n';
    }
    if (identity_count > 0) {
        ctx.write("identities.csv", [&](std::ostream& o) { o << csv.str(); });
        ctx.metric("max_order_deviation", worst_order_dev);
        ctx.metric("jacobian_error", jac);
        ctx.metric("pushforward_error", push);
        ctx.metric("quadratic_form_error", quad);
        ctx.check("divergence_identity_order", worst_order_dev <= 0.3,
                  "orders within " + sci(worst_order_dev) + " of 2 over " + std::to_string(identity_count) + " fields (<= 0.3)");
        ctx.check("jacobian_identity", jac <= 1e-10, "max |DH DH^{-1} - I| " + sci(jac) + " (<= 1e-10)");
        ctx.check("gradient_pushforward", push <= 1e-10, "max |grad_x w o H^{-1} - tilde grad z| " + sci(push) + " (<= 1e-10)");
        ctx.check("quadratic_form_identity", quad <= 1e-12, "max relative defect " + sci(quad) + " (<= 1e-12)");
    }

    // constructed degenerate field
    {
        const double a = 0.3;
        const auto f = degenerate_fields(a);
        GridSpec dg;
        dg.y1_max = 2 * a / 3;
        dg.n1 = 20;
        dg.y2_half = 0.1;
        dg.n2 = 10;
        dg.x1_lo = -0.5;
        dg.x1_hi = 1.0;
        const auto g = build_z(f.w, dg);
        const auto cert = certify(linearize_all(f, g), c0, c2, ctx.seed);
        ctx.write("degenerate.json", [&](std::ostream& o) { o << cert.report.dump(1) << '\n'; });
        const Vec2 expect(a / 3, 0.0);
        const bool at_node = cert.failed_node && (*cert.failed_node - expect).norm() < 1e-12;
        ctx.check("degenerate_field_fails", !cert.pass && at_node,
                  std::string(cert.pass ? "certificate passed" : "certificate failed") + " at y = (" +
                      (cert.failed_node ? std::to_string(cert.failed_node->x()) + ", " + std::to_string(cert.failed_node->y()) : "-") +
                      "), expected (" + std::to_string(expect.x()) + ", 0)");
    }

    // manufactured boundary data on Sigma
    {
        const LocalProblem lp = problems.front();
        const auto gv = manufactured_grad_v(lp.fields);
        double bmax = 0.0, b1diff = 0.0;
        for (double b : boundary_residual(lp.fields, lp.grid, gv)) bmax = std::max(bmax, std::abs(b));
        const auto sys = linearize_all(lp.fields, lp.grid, gv);
        for (const auto& s : sys)
            if (s.on_sigma) b1diff = std::max(b1diff, std::abs(s.b1 - s.b1_two_term));
        const auto cert = certify(sys, c0, c2, ctx.seed);
        ctx.write("manufactured.json", [&](std::ostream& o) { o << cert.report.dump(1) << '\n'; });
        const double margin = cert.report["oblique"]["margin"].is_number() ? cert.report["oblique"]["margin"].get<double>() : -1.0;
        ctx.metric("manufactured_max_b", bmax);
        ctx.metric("manufactured_b1_forms", b1diff);
        ctx.metric("manufactured_margin", margin);
        ctx.check("manufactured_boundary", bmax < 1e-10 && b1diff <= 1e-10,
                  "max |b| " + sci(bmax) + ", b1 forms differ by " + sci(b1diff) + " (both <= 1e-10)");
        ctx.check("manufactured_oblique_margin", cert.pass && margin > 0.0,
                  "-b1 - measured c0^-1 c2^-3 >= " + sci(margin) + " (> 0)");
    }

    if (fem_demo) {
        try {
            const auto j = detail::fem_hodograph_demo(ctx, c0, c2);
            ctx.details["fem_demo"] = {{"max_abs_b_on_sigma", j["max_abs_b_on_sigma"]}, {"certificate_pass", j["certificate"]["pass"]}};
            ctx.write("fem_certificate.json", [&](std::ostream& o) { o << j.dump(1) << '\n'; });
        } catch (const std::exception& e) {
            ctx.warn(std::string("fem demo skipped: ") + e.what());
        }
    }
}

inline void nondegeneracy_scan_exp(Context& ctx)
{
    const double a = ctx.cfg.num("medium.a", 2.0, 0.05, 20.0);
    const double n = ctx.cfg.num("medium.n", 1.0, 0.05, 20.0);
    const double k = ctx.cfg.num("incident.k", 2.0, 0.01, 50.0);
    const double angle = ctx.cfg.num("incident.angle", 0.0, -10.0, 10.0);
    const int samples = ctx.cfg.integer("scan.samples", 720, 8, 10000000);
    const int expect = ctx.cfg.integer("checks.zeros", 2, 0, 1000);
    const auto medium = constant_medium(Domain::disk(Vec2::Zero(), 1.0), a, n);
    const Vec2 xi(std::cos(angle), std::sin(angle));
    const auto v = IncidentField::plane(xi, k);
    const auto scan = nondegeneracy_scan(medium, v, samples);
    const auto obl = regular_oblique_check(medium, samples);
    ctx.write("scan.csv", [&](std::ostream& o) {
        o << "t,x,y,re,im,abs\n";
        for (const auto& s : scan.samples)
            o << s.boundary.t << ',' << s.boundary.point.x() << ',' << s.boundary.point.y() << ',' << s.value.real() << ','
              << s.value.imag() << ',' << std::abs(s.value) << '\n';
    });
    ctx.write("zeros.csv", [&](std::ostream& o) {
        o << "t,x,y\n";
        for (std::size_t i = 0; i < scan.zeros.size(); ++i)
            o << scan.zeros[i] << ',' << scan.zero_points[i].x() << ',' << scan.zero_points[i].y() << '\n';
    });
    double worst = 0.0;  // angle between the zero's normal and the directions perpendicular to xi
    for (const auto& p : scan.zero_points) {
        const Vec2 nu = p.normalized();
        worst = std::max(worst, std::asin(std::min(1.0, std::abs(nu.dot(xi)))));
    }
    const double res = 2 * kPi / samples;
    ctx.metric("zeros", double(scan.zeros.size()));
    ctx.metric("max_angle_error", worst);
    ctx.metric("min_complementing", obl.min_complementing);
    ctx.metric("min_distance_to_one", obl.min_distance_to_one);
    ctx.check("zero_count", !scan.identically_zero && int(scan.zeros.size()) == expect,
              std::to_string(scan.zeros.size()) + " zeros of nu^T (A - I) grad v (expected " + std::to_string(expect) + ")");
    ctx.check("zeros_perpendicular", worst <= res, "max angle to nu _|_ xi " + sci(worst) + " rad (<= resolution " + sci(res) + ")");
}

inline void herglotz_fit_exp(Context& ctx)
{
    const double k = ctx.cfg.num("incident.k", 8.0, 0.01, 50.0);
    const double angle = ctx.cfg.num("incident.angle", 0.3, -10.0, 10.0);
    const auto ms = ctx.cfg.list("solver.M", {8, 16, 32, 64}, 1, 4096);
    const int npts = ctx.cfg.integer("herglotz.points", 160, 4, 100000);
    const double radius = ctx.cfg.num("herglotz.radius", 1.0, 0.01, 10.0);
    const double ridge = ctx.cfg.num("herglotz.ridge", 1e-12, 0.0, 1.0);
    std::vector<Vec2> pts;
    for (int i = 0; i < npts; ++i) {
        const double t = 2 * kPi * (i + 0.5) / npts;
        pts.emplace_back(radius * std::cos(t), radius * std::sin(t));
    }
    const auto target = BoundaryTarget::sample(IncidentField::plane(Vec2(std::cos(angle), std::sin(angle)), k), pts);
    std::vector<double> res;
    HerglotzDensity last;
    for (double m : ms) {
        const auto fit = herglotz_fit(target, k, int(m), ridge);
        res.push_back(fit.residual);
        last = fit.density;
    }
    ctx.write("herglotz_residuals.csv", [&](std::ostream& o) {
        o << "M,residual\n";
        for (std::size_t i = 0; i < ms.size(); ++i) o << int(ms[i]) << ',' << res[i] << '\n';
    });
    const std::string dname = "density_M" + std::to_string(int(ms.back())) + ".csv";
    last.write_csv((ctx.out / dname).string());
    ctx.files.push_back(dname);
    bool dec = true;
    for (std::size_t i = 1; i < res.size(); ++i) dec = dec && res[i] < res[i - 1];
    ctx.metric("residual", res.back());
    ctx.check("herglotz_residual_decreasing", dec, "residuals " + [&] {
        std::string s;
        for (double r : res) s += (s.empty() ? "" : " > ") + sci(r, 2);
        return s;
    }());
}

inline void corner_scatter(Context& ctx)
{
    const double a = ctx.cfg.num("medium.a", 2.0, 0.05, 20.0);
    const double n = ctx.cfg.num("medium.n", 1.5, 0.05, 20.0);
    const double k = ctx.cfg.num("incident.k", 3.0, 0.01, 50.0);
    const double fac = ctx.cfg.num("checks.floor_factor", 10.0, 0.0, 1e6);
    const auto hs = mesh_levels(ctx, 0.04, 3);
    const auto medium = constant_medium(Domain::unit_square(), a, n);
    std::vector<double> norms;
    IncidentField v = plane_from_config(ctx, k, 0.3);
    for (double h : hs) {
        Setup s = discretize(ctx, medium.domain, h, k);
        const auto solver = make_solver(ctx, medium, s);
        v = IncidentField(v.kind(), s.k);
        const FarField ff = scattered_far_field(ctx, *solver, medium, v, s);
        write_far_field(ctx, "far_field_h" + htag(h) + ".csv", ff);
        norms.push_back(ff.norm);
    }
    ctx.write("refinement.csv", [&](std::ostream& o) {
        o << "h,norm\n";
        for (std::size_t i = 0; i < hs.size(); ++i) o << hs[i] << ',' << norms[i] << '\n';
    });
    const Vec2 corner = Vec2::Zero();
    const double vc = std::abs(v.value(corner)), gc = v.gradient(corner).norm();
    ctx.check("corner_data", vc > 0.0 && gc > 0.0, "|v(P)| = " + sci(vc) + ", |grad v(P)| = " + sci(gc) + " at the corner (0, 0)");
    const double floor = discretization_floor(ctx, hs.back());
    const double lo = *std::min_element(norms.begin(), norms.end());
    ctx.metric("floor", floor);
    ctx.metric("norm", norms.back());
    ctx.metric("min_norm", lo);
    ctx.check("corner_scatters", lo >= fac * floor,
              "smallest far-field norm " + sci(lo) + " over " + std::to_string(hs.size()) + " meshes (>= " + sci(fac, 1) +
                  " x floor " + sci(floor) + ")");
}

// ---- registry, run, sweep --------------------------------------------------

struct ExperimentInfo {
    std::function<void(Context&)> run;
    std::vector<std::string> sweepable;
};

inline const std::map<std::string, ExperimentInfo>& registry()
{
    static const std::map<std::string, ExperimentInfo> r{
        {"mie-validate", {mie_validate, {"h", "k", "M"}}},
        {"square-nonscatter", {square_nonscatter, {"h", "M"}}},
        {"square-scatter-control", {square_scatter_control, {"h", "M"}}},
        {"pushforward-invisible", {pushforward_invisible, {"h", "k", "M", "eps"}}},
        {"radial-te", {radial_te, {"k"}}},
        {"hodograph-certify", {hodograph_certify, {}}},
        {"nondegeneracy-scan", {nondegeneracy_scan_exp, {"k"}}},
        {"herglotz-fit", {herglotz_fit_exp, {"k", "M"}}},
        {"corner-scatter", {corner_scatter, {"h", "k", "M"}}},
    };
    return r;
}

struct RunOptions {
    fs::path out = "out";
    std::optional<std::uint64_t> seed;
    std::ostream* log = nullptr;
};

struct RunResult {
    int exit_code = 2;
    ojson manifest;
};

/// Runs one experiment and writes manifest.json into the output directory,
/// also when the experiment throws. Exit: 0 all checks pass, 1 a check
/// failed, 2 configuration or runtime error.
inline RunResult run(const std::string& name, const Config& cfg, const RunOptions& opt)
{
    const auto t0 = std::chrono::steady_clock::now();
    RunResult res;
    ojson& m = res.manifest;
    m["experiment"] = name;
    m["version"] = NONSCAT_VERSION;
    std::error_code ec;
    fs::create_directories(opt.out, ec);
    if (ec) {
        m["status"] = "error";
        m["error"] = "cannot create output directory " + opt.out.string() + ": " + ec.message();
        if (opt.log) *opt.log << "error: " << m["error"].get<std::string>() << std::endl;
        return res;
    }
    std::uint64_t seed = 1;
    std::string error;
    Context* ctx_ptr = nullptr;
    std::unique_ptr<Context> ctx;
    try {
        seed = opt.seed ? *opt.seed : std::uint64_t(cfg.num("run.seed", 1, 0, 1.8e19));
        ctx = std::make_unique<Context>(cfg, opt.out, seed, opt.log);
        ctx_ptr = ctx.get();
        const auto it = registry().find(name);
        if (it == registry().end()) throw ConfigError("unknown experiment '" + name + "'");
        it->second.run(*ctx);
    } catch (const std::exception& e) {
        error = e.what();
        if (opt.log) *opt.log << "error: " << error << std::endl;
    }
    m["seed"] = seed;
    m["config"] = cfg.echo();
    m["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ojson checks = ojson::array();
    bool all = true;
    std::vector<std::string> files;
    ojson metrics = ojson::object(), details = ojson::object();
    std::vector<std::string> warnings;
    if (ctx_ptr) {
        for (const auto& c : ctx_ptr->checks) {
            checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
            all = all && c.pass;
        }
        files = ctx_ptr->files;
        metrics = ctx_ptr->metrics;
        details = ctx_ptr->details;
        warnings = ctx_ptr->warnings;
    }
    for (const auto& k : cfg.unused()) warnings.push_back("config key not used: " + k);
    m["checks"] = checks;
    m["metrics"] = metrics;
    if (!details.empty()) m["details"] = details;
    m["warnings"] = warnings;
    files.push_back("manifest.json");
    m["files"] = files;
    if (!error.empty()) {
        m["status"] = "error";
        m["error"] = error;
        res.exit_code = 2;
    } else {
        m["status"] = all ? "pass" : "fail";
        res.exit_code = all ? 0 : 1;
    }
    std::ofstream o(opt.out / "manifest.json");
    o << std::setprecision(17) << m.dump(2) << '\n';
    if (!o) {
        if (opt.log) *opt.log << "error: cannot write manifest" << std::endl;
        res.exit_code = 2;
    }
    return res;
}

// shortest text that reads back to the same double
inline std::string shortest(double v)
{
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline std::vector<std::pair<std::string, std::string>> sweep_keys(const std::string& param, const std::string& value)
{
    if (param == "h") return {{"mesh.h", value}, {"mesh.levels", "1"}};
    if (param == "k") return {{"incident.k", value}};
    if (param == "M") return {{"solver.M", value}};
    if (param == "eps") return {{"medium.eps", value}};
    throw ConfigError("sweep parameter must be one of h, k, M, eps (got '" + param + "')");
}

/// One run per value into <out>/<param>_<i>/, then sweep.csv with the numeric
/// metrics of every point in parameter order. Points may run concurrently.
inline int sweep(const std::string& name, const std::string& param, const std::vector<double>& values, const Config& base,
                 const RunOptions& opt, int jobs = 1)
{
    const auto it = registry().find(name);
    std::error_code ec;
    fs::create_directories(opt.out, ec);
    ojson man;
    man["experiment"] = name;
    man["sweep"] = param;
    man["version"] = NONSCAT_VERSION;
    man["values"] = values;
    auto fail = [&](const std::string& msg) {
        man["status"] = "error";
        man["error"] = msg;
        std::ofstream(opt.out / "manifest.json") << man.dump(2) << '\n';
        if (opt.log) *opt.log << "error: " << msg << std::endl;
        return 2;
    };
    if (ec) return fail("cannot create output directory " + opt.out.string());
    if (it == registry().end()) return fail("unknown experiment '" + name + "'");
    const std::string p = param == "epsilon" || param == "ε" ? "eps" : param;
    try {
        sweep_keys(p, "0");
    } catch (const ConfigError& e) {
        return fail(e.what());
    }
    const auto& ok = it->second.sweepable;
    if (std::find(ok.begin(), ok.end(), p) == ok.end()) return fail("experiment '" + name + "' cannot be swept over " + p);
    if (values.empty()) return fail("no sweep values");

    std::vector<RunResult> results(values.size());
    auto point = [&](std::size_t i) {
        Config c = base;
        for (const auto& [k, v] : sweep_keys(p, shortest(values[i]))) c.set(k, v);
        RunOptions o = opt;
        o.out = opt.out / (p + "_" + std::to_string(i));
        o.log = nullptr;
        results[i] = run(name, c, o);
    };
    jobs = std::max(1, jobs);
    for (std::size_t start = 0; start < values.size(); start += std::size_t(jobs)) {
        std::vector<std::future<void>> fut;
        for (std::size_t i = start; i < std::min(values.size(), start + std::size_t(jobs)); ++i)
            fut.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred, point, i));
        for (auto& f : fut) f.get();
    }

    std::vector<std::string> cols;
    for (const auto& r : results)
        for (const auto& [k, v] : r.manifest["metrics"].items())
            if (k != p && std::find(cols.begin(), cols.end(), k) == cols.end()) cols.push_back(k);
    std::ofstream csv(opt.out / "sweep.csv");
    csv << std::setprecision(17) << p << ",status,checks_passed,checks_total";
    for (const auto& c : cols) csv << ',' << c;
    csv << '\n';
    int code = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto& m = results[i].manifest;
        int passed = 0, total = 0;
        for (const auto& c : m["checks"]) ++total, passed += c["pass"].get<bool>();
        csv << shortest(values[i]) << ',' << m["status"].get<std::string>() << ',' << passed << ',' << total;
        for (const auto& c : cols) {
            csv << ',';
            if (m["metrics"].contains(c) && m["metrics"][c].is_number()) csv << m["metrics"][c].get<double>();
        }
        csv << '\n';
        code = std::max(code, results[i].exit_code);
        if (opt.log) {
            *opt.log << (results[i].exit_code == 0 ? "PASS " : results[i].exit_code == 1 ? "FAIL " : "ERROR ") << p << " = "
                     << values[i] << ": " << passed << "/" << total << " checks";
            if (m.contains("error")) *opt.log << " (" << m["error"].get<std::string>() << ")";
            *opt.log << std::endl;
        }
    }
    man["status"] = code == 0 ? "pass" : code == 1 ? "fail" : "error";
    man["config"] = base.echo();
    ojson pts = ojson::array();
    for (std::size_t i = 0; i < values.size(); ++i)
        pts.push_back({{"value", values[i]}, {"dir", p + "_" + std::to_string(i)}, {"status", results[i].manifest["status"]}});
    man["points"] = pts;
    man["files"] = {"sweep.csv", "manifest.json"};
    std::ofstream(opt.out / "manifest.json") << std::setprecision(17) << man.dump(2) << '\n';
    return code;
}

}  // namespace nonscat::exp
