#include "siegel/theta.hpp"
#include "siegel/torus.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

using namespace siegel;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "siegel 0.1.0";

// Keys that never influence results: left out of the config hash so that
// reruns with a different thread count or output path stay byte-identical.
const std::set<std::string> kUnhashed = {"threads", "out"};

std::string config_hash(const json& cfg) {
    json c = cfg;
    for (const auto& k : kUnhashed) c.erase(k);
    std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
    for (unsigned char ch : c.dump()) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// ---- config access with schema diagnostics ----

struct Config {
    json j;

    const json& at(const std::string& key) const {
        if (!j.contains(key)) throw ConfigError("config: missing key '" + key + "'");
        return j.at(key);
    }
    double real(const std::string& key) const {
        const auto& v = at(key);
        if (!v.is_number()) throw ConfigError("config: '" + key + "' must be a number");
        double x = v.get<double>();
        if (!std::isfinite(x)) throw ConfigError("config: '" + key + "' must be finite");
        return x;
    }
    std::int64_t integer(const std::string& key, std::int64_t lo, std::int64_t hi) const {
        const auto& v = at(key);
        if (!v.is_number()) throw ConfigError("config: '" + key + "' must be an integer");
        double x = v.get<double>();
        if (x != std::floor(x) || x < static_cast<double>(lo) || x > static_cast<double>(hi))
            throw ConfigError("config: '" + key + "' must be an integer in [" + std::to_string(lo) + ", " +
                              std::to_string(hi) + "]");
        return static_cast<std::int64_t>(x);
    }
    bool flag(const std::string& key) const {
        const auto& v = at(key);
        if (!v.is_boolean()) throw ConfigError("config: '" + key + "' must be true or false");
        return v.get<bool>();
    }
    std::string text(const std::string& key) const {
        const auto& v = at(key);
        if (!v.is_string()) throw ConfigError("config: '" + key + "' must be a string");
        return v.get<std::string>();
    }
    // number -> constant vector, array -> vector of length g
    Vec vec(const std::string& key, int g) const {
        const auto& v = at(key);
        if (v.is_number()) return Vec::Constant(g, real(key));
        if (!v.is_array() || static_cast<int>(v.size()) != g)
            throw ConfigError("config: '" + key + "' must be a number or an array of length " + std::to_string(g));
        Vec out(g);
        for (int i = 0; i < g; ++i) {
            if (!v[i].is_number()) throw ConfigError("config: '" + key + "' entries must be numbers");
            out(i) = v[i].get<double>();
        }
        return out;
    }
    // number q -> q I, nested array -> symmetric g x g matrix
    Mat sym(const std::string& key, int g) const {
        const auto& v = at(key);
        if (v.is_number()) return real(key) * Mat::Identity(g, g);
        if (!v.is_array() || static_cast<int>(v.size()) != g)
            throw ConfigError("config: '" + key + "' must be a number or a " + std::to_string(g) + "x" +
                              std::to_string(g) + " array");
        Mat Q(g, g);
        for (int i = 0; i < g; ++i) {
            if (!v[i].is_array() || static_cast<int>(v[i].size()) != g)
                throw ConfigError("config: '" + key + "' must be square");
            for (int k = 0; k < g; ++k) {
                if (!v[i][k].is_number()) throw ConfigError("config: '" + key + "' entries must be numbers");
                Q(i, k) = v[i][k].get<double>();
            }
        }
        if (max_abs(Q - Q.transpose()) > 1e-14) throw ConfigError("config: '" + key + "' must be symmetric");
        return Q;
    }
    // g from an explicit key, else from the shape of a matrix-valued key
    int genus(const std::string& matrix_key) const {
        if (j.contains("g") && !j.at("g").is_null()) return static_cast<int>(integer("g", 1, 8));
        const auto& v = at(matrix_key);
        if (v.is_array()) return static_cast<int>(v.size());
        return 1;
    }
};

struct Output {
    fs::path dir;
    std::string hash;
    json cfg;

    std::string stamp() const { return std::string("# ") + kVersion + " config=" + hash + "\n"; }
    json header() const { return {{"version", kVersion}, {"config_hash", hash}, {"config", cfg}}; }

    void csv(const std::string& name, const std::string& head, const std::vector<std::string>& rows) const {
        std::ofstream f(dir / name, std::ios::binary);
        if (!f) throw ConfigError("cannot write " + (dir / name).string());
        f << stamp() << head << "\n";
        for (const auto& r : rows) f << r << "\n";
    }
    void js(const std::string& name, json body) const {
        json doc = header();
        doc.update(body);
        std::ofstream f(dir / name, std::ios::binary);
        if (!f) throw ConfigError("cannot write " + (dir / name).string());
        f << doc.dump(2) << "\n";
    }
};

json report_json(const DiophantineReport& r) {
    return {{"class", class_name(r.cls)},
            {"sigma", r.sigma},
            {"slope", r.fitted_slope},
            {"window", {r.window_min, r.window_max}},
            {"residual", r.residual},
            {"sup_log_hgt", r.sup_log_hgt},
            {"resonance_override", r.resonance_override}};
}

HeightTrajectory run_flow(const Config& c, const Mat& Q, int d) {
    CartanDirection dhat = CartanDirection::leading_ones(static_cast<int>(Q.rows()), d);
    if (c.j.contains("dhat") && !c.j.at("dhat").is_null()) {
        dhat.delta = c.vec("dhat", static_cast<int>(Q.rows()));
        if ((dhat.delta.array() < 0).any() || (dhat.delta.array() == 0).all())
            throw ConfigError("config: 'dhat' must be nonnegative and not all zero");
    }
    double t_max = c.real("t_max"), dt = c.real("dt");
    if (!(t_max > 0) || !(dt > 0) || dt > t_max) throw ConfigError("config: need 0 < dt <= t_max");
    return height_flow(lower_triangular_alpha(Q), dhat, uniform_grid(0.0, t_max, dt));
}

std::vector<std::string> trajectory_rows(const HeightTrajectory& tr) {
    std::vector<std::string> rows;
    for (const auto& s : tr.samples) rows.push_back(num(s.t) + "," + num(s.log_hgt));
    return rows;
}

json classification_json(const DiophantineReport& rep, int g, int d) {
    json out = report_json(rep);
    try {
        auto p = predicted_exponent(rep, g);
        out["predicted"] = {{"power", p.power}, {"power_is_limit", p.power_is_limit},
                            {"log_power", p.log_power ? json(*p.log_power) : json(nullptr)}};
    } catch (const NoPredictionError& e) {
        out["predicted"] = nullptr;
        out["no_prediction"] = e.what();
    }
    out["d"] = d;
    return out;
}

// ---- subcommands ----

int run_theta(const Config& c, const Output& out, unsigned threads) {
    const int g = c.genus("q");
    QuadraticData data{c.sym("q", g), c.vec("l", g), c.real("t")};
    ThetaOptions o;
    o.n_max = c.integer("n_max", 1, std::int64_t(1) << 40);
    o.n_checkpoints = static_cast<int>(c.integer("checkpoints", 1, 62));
    o.budget = c.real("budget");
    o.threads = threads;
    auto stat_name = c.text("statistic");
    if (stat_name != "running-max" && stat_name != "direct")
        throw ConfigError("config: 'statistic' must be running-max or direct");
    auto stat = stat_name == "direct" ? FitStatistic::Direct : FitStatistic::RunningMax;
    auto res = theta_sum(data, o);

    std::vector<std::string> rows;
    for (const auto& cp : res.checkpoints)
        rows.push_back(std::to_string(cp.N) + "," + num(cp.raw.real()) + "," + num(cp.raw.imag()) + "," +
                       num(cp.normalized));
    out.csv("theta.csv", "N,re,im,normalized", rows);

    json fit{{"partial", res.partial}};
    std::int64_t wmin = !c.at("fit_min").is_null() ? c.integer("fit_min", 1, o.n_max) : std::max<std::int64_t>(1, o.n_max / 1000);
    try {
        auto f = growth_fit(res, stat, wmin);
        fit.update({{"slope", f.slope}, {"intercept", f.intercept}, {"residual", f.residual},
                    {"window", {f.window_min, f.window_max}}, {"statistic", statistic_name(f.statistic)}});
    } catch (const FitError& e) {
        fit.update({{"slope", nullptr}, {"statistic", stat_name}, {"error", e.what()}});
    }
    out.js("fit.json", fit);

    auto traj = run_flow(c, data.Q, g);
    auto rep = classify_diophantine(traj, g);
    out.js("classification.json", classification_json(rep, g, g));
    return 0;
}

int run_height_flow(const Config& c, const Output& out, bool classify) {
    const int g = c.genus("q");
    const int d = static_cast<int>(c.integer("d", 1, g));
    Mat Q = c.sym("q", g);
    auto traj = run_flow(c, Q, d);
    out.csv("trajectory.csv", "t,log_hgt", trajectory_rows(traj));
    if (classify) {
        out.js("classification.json", classification_json(classify_diophantine(traj, d), g, d));
    } else {
        double sup = -std::numeric_limits<double>::infinity();
        for (const auto& s : traj.samples) sup = std::max(sup, s.log_hgt);
        out.js("report.json", {{"samples", traj.samples.size()},
                               {"sup_log_hgt", sup},
                               {"final_log_hgt", traj.samples.back().log_hgt}});
    }
    return 0;
}

int run_loglaw(const Config& c, const Output& out, unsigned threads) {
    const int g = static_cast<int>(c.integer("g", 1, 4));
    const int d = c.j.contains("d") ? static_cast<int>(c.integer("d", 1, g)) : g;
    LogLawOptions o;
    o.dt = c.real("dt");
    o.threads = threads;
    const int n = static_cast<int>(c.integer("samples", 1, 1000000));
    const double t_max = c.real("t_max");
    auto seed = static_cast<std::uint64_t>(c.integer("seed", 0, std::numeric_limits<std::int64_t>::max()));
    auto sum = loglaw_mc(g, CartanDirection::leading_ones(g, d), n, t_max, seed, o);
    std::vector<std::string> rows;
    for (int i = 0; i < n; ++i) rows.push_back(std::to_string(i) + "," + num(sum.statistic[i]));
    out.csv("samples.csv", "index,statistic", rows);
    auto sorted = sum.statistic;
    std::sort(sorted.begin(), sorted.end());
    json q = json::object();
    for (double p : {0.05, 0.25, 0.5, 0.75, 0.95}) q[num(p)] = quantile_sorted(sorted, p);
    out.js("loglaw.json", {{"median", sum.median}, {"q25", sum.q25}, {"q75", sum.q75}, {"quantiles", q},
                           {"min", sorted.front()}, {"max", sorted.back()},
                           {"bound", 2.0 / (g + 1)}});
    return 0;
}

double rel(const PForm& a, const PForm& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

TorusForm random_exact_torus_form(const TorusFrame& fr, std::uint64_t seed) {
    std::mt19937_64 rng(sample_seed(seed, 0));
    std::normal_distribution<double> nd;
    const int l = fr.ambient();
    TorusForm f{fr.dim(), 0, {}};
    std::vector<std::int64_t> n(l, -fr.K);
    while (true) {
        IVec v = Eigen::Map<IVec>(n.data(), l);
        if (!v.isZero()) f.modes[v] = {cplx(nd(rng), nd(rng))};
        int i = l - 1;
        while (i >= 0 && n[i] == fr.K) n[i--] = -fr.K;
        if (i < 0) break;
        ++n[i];
    }
    return torus_d(fr, f);
}

int run_coho(const Config& c, const Output& out, unsigned threads) {
    const int g = static_cast<int>(c.integer("g", 1, 3));
    const int d = static_cast<int>(c.integer("d", 1, g));
    const int cutoff = static_cast<int>(c.integer("cutoff", 4, 256));
    const int band = static_cast<int>(c.integer("band", 1, cutoff));
    const int samples = static_cast<int>(c.integer("samples", 1, 100000));
    const double h = c.real("planck"), tol = c.real("tolerance");
    auto seed = static_cast<std::uint64_t>(c.integer("seed", 0, std::numeric_limits<std::int64_t>::max()));
    HermiteTruncation t{g, cutoff, h};
    t.validate();

    json res = json::object();
    double worst = 0;
    if (c.j.contains("torus") && !c.j.at("torus").is_null()) {
        Config tc{c.j.at("torus")};
        const auto& V = tc.at("V");
        if (!V.is_array() || V.empty() || !V[0].is_array()) throw ConfigError("config: torus.V must be an l x d array");
        Mat M(V.size(), V[0].size());
        for (std::size_t i = 0; i < V.size(); ++i)
            for (std::size_t k = 0; k < V[0].size(); ++k) M(i, k) = V.at(i).at(k).get<double>();
        TorusFrame fr{M, static_cast<int>(tc.integer("K", 1, 64))};
        try {
            fr.validate();
        } catch (const Error& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
        auto w = random_exact_torus_form(fr, seed);
        try {
            auto sol = torus_solve(fr, w);
            auto back = torus_d(fr, sol.primitive);
            double r = 0, n2 = 0;
            for (const auto& [n, v] : w.modes)
                for (std::size_t i = 0; i < v.size(); ++i) {
                    r += std::norm(back.modes[n][i] - v[i]);
                    n2 += std::norm(v[i]);
                }
            res["torus"] = {{"residual", std::sqrt(r / n2)}, {"near_resonant", sol.near_resonant.size()}};
            worst = std::max(worst, std::sqrt(r / n2));
        } catch (const ResonanceError& e) {
            json modes = json::array();
            for (const auto& m : e.modes) modes.push_back(std::vector<std::int64_t>(m.data(), m.data() + m.size()));
            out.js("coho.json", {{"error", "resonant torus frame"}, {"resonant_modes", modes}});
            std::cerr << "error: resonant torus frame; modes:";
            for (const auto& m : modes) std::cerr << " " << m.dump();
            std::cerr << "\n";
            return 2;
        }
    }

    std::vector<double> homotopy(samples, 0), solver(samples, 0), dd(samples, 0);
    parallel_for(static_cast<std::size_t>(samples), [&](std::size_t i) {
        std::mt19937_64 rng(sample_seed(seed, i));
        const int k = static_cast<int>(i % (d + 1));
        auto w = random_form(d, k, t, band, 1.0, rng);
        PForm rhs = gaussian_part(w);
        if (k >= 1) rhs += siegel::d(homotopy_K(w));
        if (k < d) rhs += homotopy_K(siegel::d(w));
        homotopy[i] = rel(rhs, w);
        if (k + 2 <= d) dd[i] = siegel::d(siegel::d(w)).norm() / std::max(1.0, w.norm());
        if (k < d) {
            auto ex = siegel::d(w);
            solver[i] = rel(siegel::d(d_minus_one(ex)), ex);
        }
    }, threads);
    auto mx = [](const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); };
    res["homotopy_residual"] = mx(homotopy);
    res["solver_residual"] = mx(solver);
    res["dd_residual"] = mx(dd);
    worst = std::max({worst, mx(homotopy), mx(solver), mx(dd)});

    const int tame_n = static_cast<int>(c.integer("tame_samples", 0, 100000));
    if (tame_n > 0) {
        const int k = static_cast<int>(c.integer("k", 1, d));
        auto stats = tame_ratio(exact_form_sampler(band), c.real("s"), k, d, g, c.real("eps"), tame_n, seed, cutoff, h,
                                threads);
        res["tame"] = {{"max", stats.max}, {"median", stats.median}, {"samples", tame_n}};
        std::vector<std::string> rows;
        for (std::size_t i = 0; i < stats.ratios.size(); ++i) rows.push_back(std::to_string(i) + "," + num(stats.ratios[i]));
        out.csv("tame.csv", "index,ratio", rows);
    }
    res["max_residual"] = worst;
    res["tolerance"] = tol;
    res["ok"] = worst <= tol;
    out.js("coho.json", res);
    if (worst > tol) {
        std::cerr << "error: residual " << worst << " exceeds tolerance " << tol << "\n";
        return 2;
    }
    return 0;
}

int run_birkhoff(const Config& c, const Output& out) {
    Observable obs;
    if (c.j.contains("observable") && !c.j.at("observable").is_null()) {
        try {
            obs = observable_from_json(c.j.at("observable"));
        } catch (const json::exception& e) {
            throw ConfigError(std::string("config: observable: ") + e.what());
        }
    } else {
        const int g = c.genus("q");
        obs.Q = c.sym("q", g);
        obs.bump.radius = c.real("bump_radius");
        obs.bump.order = static_cast<int>(c.integer("bump_order", 2, 64));
        const auto& phi = c.at("phi");
        if (!phi.is_array()) throw ConfigError("config: 'phi' must be an array of {k, re, im}");
        for (const auto& term : phi) {
            if (!term.is_object() || !term.contains("k")) throw ConfigError("config: 'phi' entries need k, re, im");
            obs.phi.terms.push_back({term.at("k").get<int>(), {term.value("re", 0.0), term.value("im", 0.0)}});
        }
        try {
            obs.validate();
        } catch (const Error& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    }
    const int g = static_cast<int>(obs.Q.rows());
    const Vec xi = c.vec("xi", g);
    const double t = c.real("t"), delta = c.real("delta"), tol = c.real("tolerance");
    if (!(delta > 0 && delta < 1 - obs.bump.radius)) throw ConfigError("config: 'delta' must lie in (0, 1 - radius)");
    const int per_unit = static_cast<int>(c.integer("per_unit", 8, 1024));
    const bool check = c.flag("check_theta");
    const auto& Ns = c.at("n");
    if (!Ns.is_array() || Ns.empty()) throw ConfigError("config: 'n' must be a non-empty array of cube sizes");

    IsotropicFrame fr{lower_triangular_alpha(obs.Q), g};
    HeisElement m{Vec::Zero(g), xi, t};
    std::vector<std::string> rows;
    json runs = json::array();
    double worst = 0;
    for (const auto& nv : Ns) {
        if (!nv.is_number_integer() || nv.get<int>() < 0) throw ConfigError("config: 'n' entries must be integers >= 0");
        const int N = nv.get<int>();
        auto r = birkhoff(fr, obs, m, Vec::Constant(g, -delta), Vec::Constant(g, N + delta), per_unit, tol);
        rows.push_back(std::to_string(N) + "," + num(r.value.real()) + "," + num(r.value.imag()) + "," + num(r.indicator));
        json run{{"T", N}, {"re", r.value.real()}, {"im", r.value.imag()}, {"indicator", r.indicator}, {"nodes", r.nodes}};
        if (check) {
            cplx th = pretheta_sum(obs.phi, {obs.Q, -xi, t}, N);
            double dlt = std::abs(r.value - th);
            run["theta"] = {th.real(), th.imag()};
            run["delta"] = dlt;
            worst = std::max(worst, dlt);
        }
        runs.push_back(run);
    }
    out.csv("birkhoff.csv", "T,re,im,indicator", rows);
    json body{{"observable", observable_to_json(obs)}, {"runs", runs}};
    if (check) body["max_delta"] = worst;
    out.js("birkhoff.json", body);
    if (check && worst > tol) {
        std::cerr << "error: theta cross-check delta " << worst << " exceeds tolerance " << tol << "\n";
        return 2;
    }
    return 0;
}

// ---- defaults and flags ----

struct Spec {
    std::string name, help;
    json defaults;
};

const std::vector<Spec>& specs() {
    static const std::vector<Spec> s = {
        {"theta", "finite theta sums, growth fit and classification of the associated frame",
         {{"g", nullptr}, {"q", std::sqrt(2.0)}, {"l", 0.0}, {"t", 0.0}, {"n_max", 100000}, {"checkpoints", 24},
          {"budget", 4e9}, {"statistic", "running-max"}, {"fit_min", nullptr}, {"t_max", 20.0}, {"dt", 0.05}, {"dhat", nullptr}, {"seed", 1}}},
        {"height-flow", "log height along the Cartan flow",
         {{"g", nullptr}, {"q", std::sqrt(2.0)}, {"d", 1}, {"t_max", 20.0}, {"dt", 0.05}, {"dhat", nullptr}}},
        {"classify", "Diophantine class from the height trajectory",
         {{"g", nullptr}, {"q", std::sqrt(2.0)}, {"d", 1}, {"t_max", 20.0}, {"dt", 0.05}, {"dhat", nullptr}}},
        {"loglaw", "Monte Carlo logarithm law statistics",
         {{"g", 1}, {"samples", 100}, {"t_max", 20.0}, {"dt", 0.01}, {"seed", 42}}},
        {"coho", "cohomological identity suite and tame-ratio statistics",
         {{"g", 2}, {"d", 2}, {"cutoff", 64}, {"band", 32}, {"samples", 50}, {"planck", 1.0}, {"seed", 1},
          {"tolerance", 1e-8}, {"tame_samples", 0}, {"s", 1.0}, {"k", 1}, {"eps", 0.1}, {"torus", nullptr}}},
        {"birkhoff", "Birkhoff sums over cubes of the abelian orbit",
         {{"q", std::sqrt(2.0)}, {"g", nullptr}, {"bump_radius", 0.25}, {"bump_order", 3},
          {"phi", json::array({{{"k", 1}, {"re", 1.0}, {"im", 0.0}}})}, {"xi", 0.3141}, {"t", 0.2718},
          {"delta", 0.4}, {"n", json::array({1, 2, 4, 8, 16, 32})}, {"per_unit", 16}, {"tolerance", 1e-6},
          {"check_theta", false}, {"observable", nullptr}}},
    };
    return s;
}

std::string dashed(std::string k) {
    std::replace(k.begin(), k.end(), '_', '-');
    return k;
}

// Flag text is read as JSON when it parses (numbers, arrays, booleans),
// otherwise kept as a string.
json flag_value(const std::string& s) {
    try {
        return json::parse(s);
    } catch (const json::exception&) {
        return s;
    }
}

int dispatch(const std::string& name, const Config& c, const Output& out, unsigned threads) {
    if (name == "theta") return run_theta(c, out, threads);
    if (name == "height-flow") return run_height_flow(c, out, false);
    if (name == "classify") return run_height_flow(c, out, true);
    if (name == "loglaw") return run_loglaw(c, out, threads);
    if (name == "coho") return run_coho(c, out, threads);
    return run_birkhoff(c, out);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Siegel moduli, Heisenberg nilflows and theta sums: batch experiments"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    struct Sub {
        CLI::App* app;
        std::string config_path, out = "out";
        unsigned threads = 0;
        bool check_theta = false;
        std::map<std::string, std::string> flags;
    };
    std::vector<Sub> subs(specs().size());
    for (std::size_t i = 0; i < specs().size(); ++i) {
        const auto& sp = specs()[i];
        auto& sub = subs[i];
        sub.app = app.add_subcommand(sp.name, sp.help);
        sub.app->add_option("--config", sub.config_path, "JSON config file; flags override its entries");
        sub.app->add_option("--out", sub.out, "output directory");
        sub.app->add_option("--threads", sub.threads, "worker threads (capped by SIEGEL_THETA_THREADS)");
        for (const auto& [key, val] : sp.defaults.items()) {
            if (key == "check_theta") {
                sub.app->add_flag("--check-theta", sub.check_theta, "compare against the mode-wise theta sum");
                continue;
            }
            sub.app->add_option("--" + dashed(key), sub.flags[key], "default " + val.dump());
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 3;
    }

    for (std::size_t i = 0; i < subs.size(); ++i) {
        auto& sub = subs[i];
        if (!sub.app->parsed()) continue;
        const auto& sp = specs()[i];
        auto start = std::chrono::steady_clock::now();
        try {
            json cfg = sp.defaults;
            if (!sub.config_path.empty()) {
                std::ifstream f(sub.config_path);
                if (!f) throw ConfigError("cannot read config file " + sub.config_path);
                json file;
                try {
                    file = json::parse(f);
                } catch (const json::exception& e) {
                    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
                }
                if (!file.is_object()) throw ConfigError("config: top level must be an object");
                for (const auto& [k, v] : file.items()) {
                    if (!cfg.contains(k)) throw ConfigError("config: unknown key '" + k + "'");
                    cfg[k] = v;
                }
            }
            for (const auto& [k, v] : sub.flags)
                if (sub.app->count("--" + dashed(k))) cfg[k] = flag_value(v);
            if (sub.check_theta) cfg["check_theta"] = true;

            unsigned threads = thread_count();
            if (sub.threads > 0) threads = std::getenv("SIEGEL_THETA_THREADS") ? std::min(threads, sub.threads) : sub.threads;

            fs::create_directories(sub.out);
            Output out{sub.out, config_hash(cfg), cfg};
            int code = dispatch(sp.name, Config{cfg}, out, threads);
            double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            std::ofstream meta(fs::path(sub.out) / "meta.json", std::ios::binary);
            meta << json{{"version", kVersion}, {"config_hash", out.hash}, {"wall_time_s", wall}, {"threads", threads},
                         {"exit_code", code}}.dump(2)
                 << "\n";
            return code;
        } catch (const std::exception& e) {
            const bool config = dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const UsageError*>(&e) ||
                                dynamic_cast<const WindowError*>(&e) || dynamic_cast<const DimensionError*>(&e) ||
                                dynamic_cast<const DomainError*>(&e) || dynamic_cast<const json::exception*>(&e) ||
                                dynamic_cast<const fs::filesystem_error*>(&e);
            std::cerr << (config ? "config error: " : "accuracy error: ") << e.what() << "\n";
            return config ? 3 : 2;
        }
    }
    return 3;
}
