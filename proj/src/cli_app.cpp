#include "weakline/cli_app.hpp"

#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "weakline/errors.hpp"
#include "weakline/exact_engine.hpp"
#include "weakline/pointer_lab.hpp"
#include "weakline/semiclassical_engine.hpp"

namespace weakline::cli {

namespace {

namespace sc = weakline::semiclassical;

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// One sweep point: a fully-built scenario plus its sweep coordinates.
struct Unit {
    Scenario scenario;
    std::string sweep_param;
    std::optional<double> sweep_value;
};

unsigned threads_cap() {
    if (const char* env = std::getenv("WEAKLINE_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 1) {
            throw ValidationError("WEAKLINE_THREADS must be a positive integer");
        }
        return static_cast<unsigned>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

bool is_pauli(const Observable& obs) {
    return obs.kind == Observable::Kind::pauli_x || obs.kind == Observable::Kind::pauli_y ||
           obs.kind == Observable::Kind::pauli_z;
}

PolynomialSymbol observable_symbol(const Observable& obs) {
    if (obs.kind == Observable::Kind::identity) {
        return PolynomialSymbol::constant(1.0);
    }
    if (obs.kind == Observable::Kind::symbol) {
        return obs.symbol;
    }
    throw ValidationError("Pauli observables have no phase-space symbol");
}

struct EngineSetup {
    exact::HilbertSpec space = exact::HilbertSpec::qubit();
    exact::OperatorMatrix a;
};

EngineSetup make_setup(const Scenario& s, const Observable& obs, int fock_dim_flag) {
    EngineSetup setup;
    if (s.kind() == BoundaryKind::spin) {
        setup.space = exact::HilbertSpec::qubit();
        switch (obs.kind) {
            case Observable::Kind::pauli_x: setup.a = exact::pauli_x(); break;
            case Observable::Kind::pauli_y: setup.a = exact::pauli_y(); break;
            case Observable::Kind::pauli_z: setup.a = exact::pauli_z(); break;
            case Observable::Kind::identity: setup.a = exact::identity_operator(2); break;
            case Observable::Kind::symbol:
                throw ValidationError("spin scenarios need a Pauli or identity observable");
        }
        return setup;
    }
    if (s.kind() == BoundaryKind::position) {
        throw UnsupportedBoundary(
            "position boundaries are only supported by the semiclassical engine");
    }
    if (is_pauli(obs)) {
        throw ValidationError("Pauli observables need a spin scenario");
    }
    const PolynomialSymbol sym = observable_symbol(obs);
    const int min_dim = std::max(24, sym.degree() + 1);
    const int dim = fock_dim_flag > 0 ? fock_dim_flag : exact::recommended_fock_dim(s, min_dim);
    setup.space = exact::HilbertSpec::fock(dim);
    setup.a = exact::build_operator(sym, setup.space, s.hbar);
    return setup;
}

double spin_label_overlap_abs(const SpinBoundary& b) {
    const Complex z = spin_stereographic(b.pre);
    const Complex w = std::conj(spin_stereographic(b.post));
    const double cosines = std::cos(b.pre.theta / 2.0) * std::cos(b.post.theta / 2.0);
    return std::abs(cosines * (1.0 + z * w));
}

ResultRecord base_record(const Unit& u, const char* method, double t) {
    ResultRecord r;
    r.method = method;
    r.t = t;
    r.sweep_param = u.sweep_param;
    r.sweep_value = u.sweep_value;
    return r;
}

void fill_from_result(ResultRecord& r, const WeakValueResult& w) {
    r.re_w = w.value.real();
    r.im_w = w.value.imag();
    auto diag = [&](const char* key) -> std::optional<double> {
        auto it = w.diagnostics.find(key);
        if (it == w.diagnostics.end()) return std::nullopt;
        return it->second;
    };
    r.overlap_abs = diag("overlap_abs");
    r.residual = diag("residual");
    r.caustic_indicator = diag("caustic_indicator");
    if (auto m = diag("multi_root")) {
        r.multi_root_flag = *m != 0.0;
    }
}

// Fills a record and converts solver failures into status tags. Request-level
// problems (validation, truncation, alignment) are rethrown so the whole run
// fails closed with exit code 2.
template <typename Fill>
ResultRecord guarded(ResultRecord r, Fill&& fill) {
    const auto start = Clock::now();
    try {
        fill(r);
        r.status = "ok";
    } catch (const OrthogonalPostselection&) {
        r.status = "orthogonal_postselection";
    } catch (const NoConvergence& e) {
        r.status = "no_convergence";
        r.residual = e.best_residual;
    } catch (const StepFailure&) {
        r.status = "step_failure";
    } catch (const LogBranchError&) {
        r.status = "log_branch_error";
    } catch (const CausticError&) {
        r.status = "caustic_error";
    }
    r.wallclock_ms = elapsed_ms(start);
    return r;
}

// Computation context shared by all records of one unit.
struct UnitContext {
    const RunRequest& req;
    const Observable& obs;
    const Unit& unit;
    std::optional<EngineSetup> setup;                     // built lazily
    std::optional<sc::TrajectorySolution> traj;           // coherent shooting cache

    const EngineSetup& engine() {
        if (!setup) setup = make_setup(unit.scenario, obs, req.fock_dim);
        return *setup;
    }

    const sc::TrajectorySolution& trajectory() {
        if (!traj) traj = sc::shoot_coherent_bvp(unit.scenario);
        return *traj;
    }
};

ResultRecord exact_record(UnitContext& ctx, double t) {
    return guarded(base_record(ctx.unit, "exact", t), [&](ResultRecord& r) {
        const WeakValueResult w =
            exact::weak_value_exact(ctx.unit.scenario, ctx.engine().a, t, ctx.engine().space);
        fill_from_result(r, w);
    });
}

ResultRecord semiclassical_record(UnitContext& ctx, double t) {
    return guarded(base_record(ctx.unit, "semiclassical", t), [&](ResultRecord& r) {
        const Scenario& s = ctx.unit.scenario;
        if (s.kind() == BoundaryKind::spin) {
            const auto& b = s.spin();
            Complex value{1.0, 0.0};
            if (is_pauli(ctx.obs)) {
                const auto triple = sc::spin_weak_values_semiclassical(b.pre, b.post);
                if (ctx.obs.kind == Observable::Kind::pauli_x) value = triple[0];
                if (ctx.obs.kind == Observable::Kind::pauli_y) value = triple[1];
                if (ctx.obs.kind == Observable::Kind::pauli_z) value = triple[2];
            } else if (ctx.obs.kind != Observable::Kind::identity) {
                throw ValidationError("spin scenarios need a Pauli or identity observable");
            }
            r.re_w = value.real();
            r.im_w = value.imag();
            r.overlap_abs = spin_label_overlap_abs(b);
            r.residual = 0.0;
            r.multi_root_flag = false;
            return;
        }
        const PolynomialSymbol sym = observable_symbol(ctx.obs);
        const sc::TrajectorySolution& traj = s.kind() == BoundaryKind::coherent
                                                 ? ctx.trajectory()
                                                 : (ctx.traj ? *ctx.traj
                                                             : *(ctx.traj = sc::solve_position_bvp(s)));
        const WeakValueResult w = sc::weak_value_semiclassical(traj, sym, t);
        fill_from_result(r, w);
    });
}

ResultRecord gf_record(UnitContext& ctx, double t) {
    return guarded(base_record(ctx.unit, "generating_functional", t), [&](ResultRecord& r) {
        const Scenario& s = ctx.unit.scenario;
        const double bw = ctx.req.bin_width > 0.0 ? ctx.req.bin_width : s.duration() / 64.0;
        const WeakValueResult w = exact::weak_value_via_gf(s, ctx.engine().a, t,
                                                           ctx.engine().space, ctx.req.epsilon, bw);
        fill_from_result(r, w);
    });
}

ResultRecord pointer_record(UnitContext& ctx, double t, std::optional<double> single_g) {
    return guarded(base_record(ctx.unit, "pointer", t), [&](ResultRecord& r) {
        const Scenario& s = ctx.unit.scenario;
        const auto [pre_t, post_t] = exact::evolved_states(s, ctx.engine().space, t);
        if (single_g) {
            const double g = *single_g;
            if (!(g > 0.0)) {
                throw ValidationError("pointer coupling g must be positive");
            }
            const pointer::PointerState ps = pointer::couple_and_postselect(
                pre_t, post_t, ctx.engine().a, pointer::PointerConfig{g, ctx.req.sigma, s.hbar});
            const pointer::PointerMoments m = pointer::pointer_moments(ps);
            const double kappa = pointer::momentum_response_constant(ctx.req.sigma, s.hbar);
            r.re_w = m.mean_x / g;
            r.im_w = m.mean_p / (g * kappa);
            r.overlap_abs = std::abs(post_t.dot(pre_t));
        } else {
            const WeakValueResult w = pointer::recover_weak_value(
                pre_t, post_t, ctx.engine().a, ctx.req.sigma, s.hbar, ctx.req.g_ladder, t);
            fill_from_result(r, w);
        }
    });
}

void append_compare_pair(UnitContext& ctx, double t, std::vector<ResultRecord>& out) {
    ResultRecord e = exact_record(ctx, t);
    ResultRecord s = semiclassical_record(ctx, t);
    if (e.status == "ok" && s.status == "ok") {
        const Complex we{*e.re_w, *e.im_w};
        const Complex ws{*s.re_w, *s.im_w};
        const double diff = std::abs(we - ws);
        e.abs_diff = diff;
        s.abs_diff = diff;
    }
    out.push_back(std::move(e));
    out.push_back(std::move(s));
}

std::vector<double> times_for(const RunRequest& req, const Scenario& s) {
    std::vector<double> times = req.times;
    if (times.empty()) {
        times.push_back(0.5 * (s.t_start + s.t_end));
    }
    const double slack = 1e-12 * (1.0 + std::abs(s.duration()));
    for (double t : times) {
        if (!std::isfinite(t) || t < s.t_start - slack || t > s.t_end + slack) {
            throw ValidationError("evaluation time outside [t_start, t_end]");
        }
    }
    return times;
}

std::vector<ResultRecord> compute_unit(const RunRequest& req, const Observable& obs,
                                       const Unit& unit) {
    UnitContext ctx{req, obs, unit, std::nullopt, std::nullopt};
    const std::vector<double> times = times_for(req, unit.scenario);
    std::vector<ResultRecord> out;

    const bool g_sweep = unit.sweep_param == "g";
    Command effective = req.command;
    if (effective == Command::sweep) {
        effective = g_sweep ? Command::pointer : Command::compare;
    }

    for (double t : times) {
        switch (effective) {
            case Command::exact:
                out.push_back(exact_record(ctx, t));
                break;
            case Command::semiclassical:
                out.push_back(semiclassical_record(ctx, t));
                break;
            case Command::gf:
                out.push_back(gf_record(ctx, t));
                break;
            case Command::pointer:
                out.push_back(pointer_record(ctx, t, g_sweep ? unit.sweep_value : std::nullopt));
                break;
            case Command::compare:
                append_compare_pair(ctx, t, out);
                break;
            case Command::sweep:
                break;  // unreachable, rewritten above
        }
    }
    return out;
}

std::vector<Unit> build_units(const RunRequest& req, const Scenario& base) {
    std::vector<Unit> units;
    if (!req.sweep) {
        if (req.command == Command::sweep) {
            throw ValidationError("the sweep command needs --sweep PARAM=v1,v2,...");
        }
        units.push_back(Unit{base, "", std::nullopt});
        return units;
    }
    const SweepSpec& sw = *req.sweep;
    if (sw.values.empty()) {
        throw ValidationError("sweep needs at least one value");
    }
    for (double v : sw.values) {
        if (!std::isfinite(v)) {
            throw ValidationError("sweep values must be finite");
        }
    }
    for (double v : sw.values) {
        Unit u{base, sw.param, v};
        if (sw.param == "hbar") {
            u.scenario.hbar = v;
        } else if (sw.param == "t_end") {
            u.scenario.t_end = v;
        } else if (sw.param == "alpha") {
            if (base.kind() != BoundaryKind::spin) {
                throw ValidationError("alpha sweeps need a spin scenario");
            }
            auto b = u.scenario.spin();
            b.pre = SpinLabel{2.0 * v, 0.0};
            u.scenario.boundary = b;
        } else if (sw.param == "g") {
            if (req.command != Command::pointer && req.command != Command::sweep) {
                throw ValidationError("g sweeps apply to the pointer command");
            }
            if (!(v > 0.0)) {
                throw ValidationError("pointer coupling g must be positive");
            }
        } else {
            throw ValidationError("unknown sweep parameter \"" + sw.param +
                                  "\" (expected hbar, t_end, alpha or g)");
        }
        validate_scenario(u.scenario);
        units.push_back(std::move(u));
    }
    return units;
}

void upfront_checks(const RunRequest& req, const Observable& obs, const std::vector<Unit>& units) {
    for (const Unit& u : units) {
        const BoundaryKind kind = u.scenario.kind();
        // every command except a pure semiclassical run touches the exact engine
        const bool needs_exact_engine = req.command != Command::semiclassical;
        if (needs_exact_engine && kind == BoundaryKind::position) {
            throw UnsupportedBoundary(
                "position boundaries are only supported by the semiclassical engine");
        }
        if (kind == BoundaryKind::spin && obs.kind == Observable::Kind::symbol) {
            throw ValidationError("spin scenarios need a Pauli or identity observable");
        }
        if (kind != BoundaryKind::spin && is_pauli(obs)) {
            throw ValidationError("Pauli observables need a spin scenario");
        }
        times_for(req, u.scenario);
    }
    const bool ladder_recovery =
        req.command == Command::pointer && !(req.sweep && req.sweep->param == "g");
    if (ladder_recovery && req.g_ladder.size() < 4) {
        throw ValidationError("pointer recovery needs a coupling ladder of at least 4 values");
    }
    if (!(req.sigma > 0.0)) {
        throw ValidationError("pointer sigma must be positive");
    }
    if (!(req.epsilon > 0.0)) {
        throw ValidationError("gf epsilon must be positive");
    }
}

}  // namespace

const char* command_name(Command c) {
    switch (c) {
        case Command::exact: return "exact";
        case Command::semiclassical: return "semiclassical";
        case Command::gf: return "gf";
        case Command::pointer: return "pointer";
        case Command::compare: return "compare";
        case Command::sweep: return "sweep";
    }
    return "unknown";
}

Command command_from_name(const std::string& name) {
    if (name == "exact") return Command::exact;
    if (name == "semiclassical") return Command::semiclassical;
    if (name == "gf") return Command::gf;
    if (name == "pointer") return Command::pointer;
    if (name == "compare") return Command::compare;
    if (name == "sweep") return Command::sweep;
    throw ValidationError("unknown command \"" + name + "\"");
}

Observable parse_observable(const std::string& spec) {
    std::string text;
    for (char c : spec) {
        if (!std::isspace(static_cast<unsigned char>(c))) text.push_back(c);
    }
    Observable obs;
    if (text == "sigma_x") {
        obs.kind = Observable::Kind::pauli_x;
        return obs;
    }
    if (text == "sigma_y") {
        obs.kind = Observable::Kind::pauli_y;
        return obs;
    }
    if (text == "sigma_z") {
        obs.kind = Observable::Kind::pauli_z;
        return obs;
    }
    if (text == "identity" || text == "I" || text == "1") {
        obs.kind = Observable::Kind::identity;
        obs.symbol = PolynomialSymbol::constant(1.0);
        return obs;
    }
    if (text.empty()) {
        throw ValidationError("empty observable spec");
    }

    // Sum of monomial terms: [coef][*]q[^k][*]p[^k], e.g. "0.5q^2+0.5p^2".
    obs.kind = Observable::Kind::symbol;
    std::size_t i = 0;
    bool first = true;
    while (i < text.size()) {
        double sign = 1.0;
        if (text[i] == '+' || text[i] == '-') {
            sign = text[i] == '-' ? -1.0 : 1.0;
            ++i;
        } else if (!first) {
            throw ValidationError("observable: expected '+' or '-' between terms");
        }
        first = false;

        double coef = 1.0;
        bool have_factor = false;
        if (i < text.size() && (std::isdigit(static_cast<unsigned char>(text[i])) || text[i] == '.')) {
            char* end = nullptr;
            coef = std::strtod(text.c_str() + i, &end);
            if (end == text.c_str() + i) {
                throw ValidationError("observable: bad coefficient");
            }
            i = static_cast<std::size_t>(end - text.c_str());
            have_factor = true;
        }
        int mq = 0;
        int np = 0;
        while (i < text.size()) {
            if (text[i] == '*') {
                ++i;
                if (i >= text.size() || (text[i] != 'q' && text[i] != 'p' &&
                                         !std::isdigit(static_cast<unsigned char>(text[i])))) {
                    throw ValidationError("observable: dangling '*' in \"" + spec + "\"");
                }
                if (std::isdigit(static_cast<unsigned char>(text[i]))) {
                    throw ValidationError("observable: numeric factor must lead its term");
                }
                continue;
            }
            if (text[i] != 'q' && text[i] != 'p') break;
            const bool is_q = text[i] == 'q';
            ++i;
            int power = 1;
            if (i < text.size() && text[i] == '^') {
                ++i;
                if (i >= text.size() || !std::isdigit(static_cast<unsigned char>(text[i]))) {
                    throw ValidationError("observable: '^' needs an integer power");
                }
                power = 0;
                while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
                    power = power * 10 + (text[i] - '0');
                    ++i;
                }
            }
            (is_q ? mq : np) += power;
            have_factor = true;
        }
        if (!have_factor) {
            throw ValidationError("observable: empty term in \"" + spec + "\"");
        }
        obs.symbol.add_term(mq, np, sign * coef);
    }
    return obs;
}

RunOutput execute(const RunRequest& req) {
    const Scenario base = load_scenario(req.scenario_path);
    const Observable obs = parse_observable(req.observable);
    const std::vector<Unit> units = build_units(req, base);
    upfront_checks(req, obs, units);

    std::vector<std::vector<ResultRecord>> slots(units.size());
    const unsigned cap = std::min<unsigned>(threads_cap(), static_cast<unsigned>(units.size()));
    std::exception_ptr first_error;
    std::mutex error_mutex;
    if (cap <= 1 || units.size() <= 1) {
        for (std::size_t k = 0; k < units.size(); ++k) {
            slots[k] = compute_unit(req, obs, units[k]);
        }
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            for (;;) {
                const std::size_t k = next.fetch_add(1);
                if (k >= units.size()) return;
                try {
                    slots[k] = compute_unit(req, obs, units[k]);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        };
        std::vector<std::thread> pool;
        for (unsigned k = 0; k < cap; ++k) pool.emplace_back(worker);
        for (std::thread& th : pool) th.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    RunOutput out;
    out.abs_diff_column = req.command == Command::compare ||
                          (req.command == Command::sweep &&
                           (!req.sweep || req.sweep->param != "g"));
    for (std::vector<ResultRecord>& block : slots) {
        for (ResultRecord& r : block) {
            out.records.push_back(std::move(r));
        }
    }

    bool any_orthogonal = false;
    bool any_solver_failure = false;
    bool any_other = false;
    std::string message;
    for (const ResultRecord& r : out.records) {
        if (r.status == "ok") continue;
        if (message.empty()) message = r.method + " record at t=" + std::to_string(r.t) + ": " + r.status;
        if (r.status == "orthogonal_postselection") {
            any_orthogonal = true;
        } else if (r.status == "no_convergence" || r.status == "step_failure") {
            any_solver_failure = true;
        } else {
            any_other = true;
        }
    }
    if (any_orthogonal) {
        out.exit_code = 4;
    } else if (any_solver_failure) {
        out.exit_code = 3;
    } else if (any_other) {
        out.exit_code = 1;
    }
    if (out.exit_code != 0) {
        out.error_line = "ERROR " + std::to_string(out.exit_code) + " " + message;
    }
    return out;
}

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string cell(const std::optional<double>& v) { return v ? fmt_double(*v) : ""; }

}  // namespace

std::string to_csv(const RunRequest& req, const RunOutput& out) {
    (void)req;
    std::ostringstream os;
    os << "method,t,sweep_param,sweep_value,re_w,im_w,overlap_abs,residual,caustic_indicator,"
          "multi_root_flag";
    if (out.abs_diff_column) os << ",abs_diff";
    os << ",wallclock_ms,status\n";
    for (const ResultRecord& r : out.records) {
        os << r.method << ',' << fmt_double(r.t) << ',' << r.sweep_param << ','
           << cell(r.sweep_value) << ',' << cell(r.re_w) << ',' << cell(r.im_w) << ','
           << cell(r.overlap_abs) << ',' << cell(r.residual) << ',' << cell(r.caustic_indicator)
           << ',' << (r.multi_root_flag ? (*r.multi_root_flag ? "1" : "0") : "");
        if (out.abs_diff_column) os << ',' << cell(r.abs_diff);
        os << ',' << fmt_double(r.wallclock_ms) << ',' << r.status << '\n';
    }
    return os.str();
}

namespace {

nlohmann::json opt_json(const std::optional<double>& v) {
    if (!v) return nullptr;
    return *v;
}

std::optional<double> opt_from(const nlohmann::json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

}  // namespace

nlohmann::json to_json(const RunRequest& req, const RunOutput& out) {
    nlohmann::json jreq;
    jreq["command"] = command_name(req.command);
    jreq["scenario_path"] = req.scenario_path;
    jreq["observable"] = req.observable;
    jreq["times"] = req.times;
    if (req.sweep) {
        jreq["sweep"] = {{"param", req.sweep->param}, {"values", req.sweep->values}};
    } else {
        jreq["sweep"] = nullptr;
    }
    jreq["output_path"] = req.output_path;
    jreq["format"] = req.format == Format::csv ? "csv" : "json";
    jreq["seed"] = req.seed;
    jreq["epsilon"] = req.epsilon;
    jreq["bin_width"] = req.bin_width;
    jreq["sigma"] = req.sigma;
    jreq["g_ladder"] = req.g_ladder;
    jreq["fock_dim"] = req.fock_dim;

    nlohmann::json jrecords = nlohmann::json::array();
    for (const ResultRecord& r : out.records) {
        nlohmann::json jr;
        jr["method"] = r.method;
        jr["t"] = r.t;
        jr["sweep_param"] = r.sweep_param;
        jr["sweep_value"] = opt_json(r.sweep_value);
        jr["re_w"] = opt_json(r.re_w);
        jr["im_w"] = opt_json(r.im_w);
        jr["overlap_abs"] = opt_json(r.overlap_abs);
        jr["residual"] = opt_json(r.residual);
        jr["caustic_indicator"] = opt_json(r.caustic_indicator);
        if (r.multi_root_flag) {
            jr["multi_root_flag"] = *r.multi_root_flag;
        } else {
            jr["multi_root_flag"] = nullptr;
        }
        jr["abs_diff"] = opt_json(r.abs_diff);
        jr["wallclock_ms"] = r.wallclock_ms;
        jr["status"] = r.status;
        jrecords.push_back(std::move(jr));
    }

    return nlohmann::json{{"request", jreq}, {"records", jrecords}};
}

std::pair<RunRequest, std::vector<ResultRecord>> from_json(const nlohmann::json& j) {
    RunRequest req;
    const nlohmann::json& jr = j.at("request");
    req.command = command_from_name(jr.at("command").get<std::string>());
    req.scenario_path = jr.at("scenario_path").get<std::string>();
    req.observable = jr.at("observable").get<std::string>();
    req.times = jr.at("times").get<std::vector<double>>();
    if (!jr.at("sweep").is_null()) {
        SweepSpec sw;
        sw.param = jr.at("sweep").at("param").get<std::string>();
        sw.values = jr.at("sweep").at("values").get<std::vector<double>>();
        req.sweep = sw;
    }
    req.output_path = jr.at("output_path").get<std::string>();
    req.format = jr.at("format").get<std::string>() == "json" ? Format::json : Format::csv;
    req.seed = jr.at("seed").get<std::uint64_t>();
    req.epsilon = jr.at("epsilon").get<double>();
    req.bin_width = jr.at("bin_width").get<double>();
    req.sigma = jr.at("sigma").get<double>();
    req.g_ladder = jr.at("g_ladder").get<std::vector<double>>();
    req.fock_dim = jr.at("fock_dim").get<int>();

    std::vector<ResultRecord> records;
    for (const nlohmann::json& rec : j.at("records")) {
        ResultRecord r;
        r.method = rec.at("method").get<std::string>();
        r.t = rec.at("t").get<double>();
        r.sweep_param = rec.at("sweep_param").get<std::string>();
        r.sweep_value = opt_from(rec.at("sweep_value"));
        r.re_w = opt_from(rec.at("re_w"));
        r.im_w = opt_from(rec.at("im_w"));
        r.overlap_abs = opt_from(rec.at("overlap_abs"));
        r.residual = opt_from(rec.at("residual"));
        r.caustic_indicator = opt_from(rec.at("caustic_indicator"));
        if (!rec.at("multi_root_flag").is_null()) {
            r.multi_root_flag = rec.at("multi_root_flag").get<bool>();
        }
        r.abs_diff = opt_from(rec.at("abs_diff"));
        r.wallclock_ms = rec.at("wallclock_ms").get<double>();
        r.status = rec.at("status").get<std::string>();
        records.push_back(std::move(r));
    }
    return {req, records};
}

int run(const RunRequest& req) {
    RunOutput out;
    try {
        out = execute(req);
    } catch (const ValidationError& e) {
        std::cerr << "ERROR 2 " << e.what() << "\n";
        return 2;
    } catch (const UnsupportedBoundary& e) {
        std::cerr << "ERROR 2 " << e.what() << "\n";
        return 2;
    } catch (const TailError& e) {
        std::cerr << "ERROR 2 " << e.what() << "\n";
        return 2;
    } catch (const TruncationError& e) {
        std::cerr << "ERROR 2 " << e.what() << "\n";
        return 2;
    } catch (const AlignmentError& e) {
        std::cerr << "ERROR 2 " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "ERROR 1 " << e.what() << "\n";
        return 1;
    }

    const std::string payload = req.format == Format::csv
                                    ? to_csv(req, out)
                                    : to_json(req, out).dump(2) + "\n";
    if (req.output_path.empty()) {
        std::cout << payload;
    } else {
        std::ofstream f(req.output_path, std::ios::binary);
        if (!f) {
            std::cerr << "ERROR 2 cannot open output file " << req.output_path << "\n";
            return 2;
        }
        f << payload;
    }
    if (out.exit_code != 0) {
        std::cerr << out.error_line << "\n";
    }
    return out.exit_code;
}

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(text);
    while (std::getline(ss, item, sep)) {
        out.push_back(item);
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& text, const char* what) {
    std::vector<double> out;
    for (const std::string& tok : split(text, ',')) {
        if (tok.empty()) continue;
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0') {
            throw ValidationError(std::string(what) + ": bad number \"" + tok + "\"");
        }
        out.push_back(v);
    }
    if (out.empty()) {
        throw ValidationError(std::string(what) + ": empty list");
    }
    return out;
}

// Field-wise CSV comparison ignoring the wallclock_ms column.
bool csv_equal_ignoring_wallclock(const std::string& a, const std::string& b, std::string& why) {
    const std::vector<std::string> la = split(a, '\n');
    const std::vector<std::string> lb = split(b, '\n');
    if (la.size() != lb.size()) {
        why = "line count differs";
        return false;
    }
    if (la.empty()) return true;
    const std::vector<std::string> header = split(la[0], ',');
    std::ptrdiff_t wall_col = -1;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == "wallclock_ms") wall_col = static_cast<std::ptrdiff_t>(c);
    }
    for (std::size_t i = 0; i < la.size(); ++i) {
        const std::vector<std::string> fa = split(la[i], ',');
        const std::vector<std::string> fb = split(lb[i], ',');
        if (fa.size() != fb.size()) {
            why = "field count differs on line " + std::to_string(i + 1);
            return false;
        }
        for (std::size_t c = 0; c < fa.size(); ++c) {
            if (static_cast<std::ptrdiff_t>(c) == wall_col) continue;
            if (fa[c] != fb[c]) {
                why = "line " + std::to_string(i + 1) + " column " + std::to_string(c + 1) +
                      ": \"" + fa[c] + "\" vs \"" + fb[c] + "\"";
                return false;
            }
        }
    }
    return true;
}

}  // namespace

int run_goldens(const std::string& scenario_dir, const std::string& ref_dir, bool update,
                std::ostream& log) {
    struct GoldenCase {
        const char* name;
        const char* scenario_file;
        const char* observable;
    };
    const GoldenCase cases[] = {
        {"h0_q", "golden_h0_coherent.json", "q"},
        {"h0_p", "golden_h0_coherent.json", "p"},
        {"spin_sx", "golden_spin.json", "sigma_x"},
        {"spin_sy", "golden_spin.json", "sigma_y"},
        {"spin_sz", "golden_spin.json", "sigma_z"},
    };

    bool all_ok = true;
    for (const GoldenCase& c : cases) {
        RunRequest req;
        req.command = Command::compare;
        req.scenario_path = scenario_dir + "/" + c.scenario_file;
        req.observable = c.observable;
        req.times = {0.25, 0.5, 0.75};
        req.format = Format::csv;
        std::string generated;
        try {
            const RunOutput out = execute(req);
            if (out.exit_code != 0) {
                log << "[FAIL] golden " << c.name << ": " << out.error_line << "\n";
                all_ok = false;
                continue;
            }
            generated = to_csv(req, out);
        } catch (const Error& e) {
            log << "[FAIL] golden " << c.name << ": " << e.what() << "\n";
            all_ok = false;
            continue;
        }

        const std::string ref_path = ref_dir + "/golden_" + std::string(c.name) + ".csv";
        if (update) {
            std::filesystem::create_directories(ref_dir);
            std::ofstream f(ref_path, std::ios::binary);
            f << generated;
            log << "[UPDATED] golden " << c.name << " -> " << ref_path << "\n";
            continue;
        }
        std::ifstream f(ref_path, std::ios::binary);
        if (!f) {
            log << "[FAIL] golden " << c.name << ": missing reference " << ref_path << "\n";
            all_ok = false;
            continue;
        }
        std::stringstream buf;
        buf << f.rdbuf();
        std::string why;
        if (csv_equal_ignoring_wallclock(generated, buf.str(), why)) {
            log << "[PASS] golden " << c.name << "\n";
        } else {
            log << "[FAIL] golden " << c.name << ": " << why << "\n";
            all_ok = false;
        }
    }
    return all_ok ? 0 : 1;
}

int main_entry(int argc, char** argv) {
    CLI::App app{"weakline: a two-engine laboratory for pre/postselected weak values"};
    app.require_subcommand(0, 1);

    std::string goldens_dir = "scenarios";
    std::string goldens_refs = "scenarios/refs";
    bool goldens_update = false;
    CLI::App* goldens = app.add_subcommand(
        "goldens", "regenerate the built-in golden runs and diff against committed references");
    goldens->add_option("--scenario-dir", goldens_dir, "directory holding the golden scenarios");
    goldens->add_option("--refs", goldens_refs, "directory holding the reference CSVs");
    goldens->add_flag("--update", goldens_update, "rewrite the reference CSVs");

    std::string scenario_path;
    std::string command = "exact";
    std::string observable = "q";
    std::string times_text;
    std::string sweep_text;
    std::string out_path;
    std::string format = "csv";
    std::uint64_t seed = 0;
    double epsilon = 1e-5;
    double bin_width = 0.0;
    double sigma = 10.0;
    std::string g_ladder_text;
    int fock_dim = 0;

    app.add_option("--scenario", scenario_path, "scenario JSON file");
    app.add_option("--command", command, "exact|semiclassical|gf|pointer|compare|sweep");
    app.add_option("--observable", observable,
                   "polynomial such as q, p, 0.5q^2+0.5p^2, or sigma_x|sigma_y|sigma_z|identity");
    app.add_option("--times", times_text, "comma-separated evaluation times (default: midpoint)");
    app.add_option("--sweep", sweep_text, "PARAM=v1,v2,... with PARAM in {hbar, t_end, alpha, g}");
    app.add_option("--out", out_path, "output file (default: stdout)");
    app.add_option("--format", format, "csv|json");
    app.add_option("--seed", seed, "random seed for sampling commands");
    app.add_option("--epsilon", epsilon, "gf source strength");
    app.add_option("--bin-width", bin_width, "gf bin width (default: window/64)");
    app.add_option("--sigma", sigma, "pointer position spread");
    app.add_option("--g-ladder", g_ladder_text, "pointer coupling ladder (default 0.04,0.02,0.01,0.005)");
    app.add_option("--fock-dim", fock_dim, "Fock truncation override (default: auto)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "ERROR 2 " << e.what() << "\n";
        return 2;
    }

    if (goldens->parsed()) {
        return run_goldens(goldens_dir, goldens_refs, goldens_update, std::cout);
    }

    try {
        RunRequest req;
        if (scenario_path.empty()) {
            throw ValidationError("--scenario is required");
        }
        req.scenario_path = scenario_path;
        req.command = command_from_name(command);
        req.observable = observable;
        if (!times_text.empty()) {
            req.times = parse_double_list(times_text, "--times");
        }
        if (!sweep_text.empty()) {
            const std::size_t eq = sweep_text.find('=');
            if (eq == std::string::npos) {
                throw ValidationError("--sweep expects PARAM=v1,v2,...");
            }
            SweepSpec sw;
            sw.param = sweep_text.substr(0, eq);
            sw.values = parse_double_list(sweep_text.substr(eq + 1), "--sweep");
            req.sweep = sw;
        }
        req.output_path = out_path;
        if (format == "csv") {
            req.format = Format::csv;
        } else if (format == "json") {
            req.format = Format::json;
        } else {
            throw ValidationError("--format must be csv or json");
        }
        req.seed = seed;
        req.epsilon = epsilon;
        req.bin_width = bin_width;
        req.sigma = sigma;
        if (!g_ladder_text.empty()) {
            req.g_ladder = parse_double_list(g_ladder_text, "--g-ladder");
        }
        req.fock_dim = fock_dim;
        return run(req);
    } catch (const ValidationError& e) {
        std::cerr << "ERROR 2 " << e.what() << "\n";
        return 2;
    }
}

}  // namespace weakline::cli
