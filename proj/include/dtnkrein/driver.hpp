#pragma once

// Batch driver behind the dtn-krein command line tool.
//
// Every command builds one model from a RunConfig, evaluates a list of spectral
// parameters (possibly on several threads), reduces the results in sample
// order and only then writes its output file. Model or configuration problems
// map to exit status 2 and leave the output directory untouched.

#include "dtnkrein/boundary_model.hpp"
#include "dtnkrein/config.hpp"
#include "dtnkrein/coupling.hpp"
#include "dtnkrein/elliptic_assembly.hpp"
#include "dtnkrein/errors.hpp"
#include "dtnkrein/krein_verify.hpp"
#include "dtnkrein/models.hpp"
#include "dtnkrein/numerics.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace dtnkrein {

using Json = nlohmann::json;

enum class Command { verify, dtn_sweep, characterize, couple_verify };

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;
inline constexpr int kExitConfig = 2;

[[nodiscard]] inline std::string_view command_name(Command c) noexcept {
    switch (c) {
        case Command::verify: return "verify";
        case Command::dtn_sweep: return "dtn-sweep";
        case Command::characterize: return "characterize";
        case Command::couple_verify: return "couple-verify";
    }
    return "?";
}

[[nodiscard]] inline std::string_view output_file_name(Command c) noexcept {
    switch (c) {
        case Command::dtn_sweep: return "dtn_sweep.csv";
        case Command::characterize: return "characterization.json";
        default: return "report.json";
    }
}

/// Result of one command: the file body and the exit status it implies.
struct CommandOutcome {
    int exit_code = kExitOk;
    std::string file_name;
    std::string body;
    std::size_t checks = 0;
    std::size_t failures = 0;
    std::size_t skipped = 0;
};

// ---------------------------------------------------------------------------
// Concurrency
// ---------------------------------------------------------------------------

/// Worker count from DTN_KREIN_THREADS: unset means the hardware concurrency,
/// 0 means serial evaluation on the calling thread.
inline unsigned thread_budget() {
    const char* env = std::getenv("DTN_KREIN_THREADS");
    if (env == nullptr || *env == '\0') {
        return std::max(1u, std::thread::hardware_concurrency());
    }
    const std::string_view s(env);
    unsigned v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ConfigError("DTN_KREIN_THREADS must be a nonnegative integer, got '" + std::string(s) + "'");
    }
    return v;
}

/// out[k] = f(k) for k < n. Items are claimed from a shared counter; the
/// result order never depends on the schedule.
template <class F>
auto parallel_map(std::size_t n, unsigned threads, F&& f) -> std::vector<decltype(f(std::size_t{}))> {
    using R = decltype(f(std::size_t{}));
    std::vector<R> out(n);
    const auto workers = static_cast<std::size_t>(std::min<std::size_t>(threads, n));
    if (workers <= 1) {
        for (std::size_t k = 0; k < n; ++k) out[k] = f(k);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t k = next++; k < n; k = next++) out[k] = f(k);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Model and sample construction
// ---------------------------------------------------------------------------

inline PartitionedHermitian with_threshold(const PartitionedHermitian& m, double singular_rel) {
    return PartitionedHermitian(m.matrix(), m.partition(), m.split(), singular_rel);
}

/// The grid described by the config, sized from grid.inner_nodes when given.
inline GridSpec config_grid(const RunConfig& cfg) {
    if (cfg.inner_nodes) {
        GridSpec g = coupled_grid(*cfg.inner_nodes, cfg.grid.h, cfg.far_factor);
        return g;
    }
    return cfg.grid;
}

inline CoefficientField config_coefficients(const RunConfig& cfg, const GridSpec& g) {
    if (cfg.coeff_table) {
        std::ifstream in(*cfg.coeff_table);
        if (!in) throw ConfigError("cannot open coefficient table '" + *cfg.coeff_table + "'");
        return table_coefficients(g, in, *cfg.coeff_table);
    }
    if (cfg.affine) {
        return affine_coefficients(g, *cfg.affine);
    }
    return preset_coefficients(g, cfg.coeff_preset);
}

/// Builds the model. `coupled` selects the three-part variant of the path
/// model; grids carry an exterior exactly when their layout is coupled.
inline PartitionedHermitian build_model(const RunConfig& cfg, bool coupled = false) {
    switch (cfg.model) {
        case ModelKind::toy:
            return with_threshold(toy_model(), cfg.tol.singular);
        case ModelKind::path3:
            return with_threshold(coupled ? path3_coupled_model() : path3_bounded_model(), cfg.tol.singular);
        case ModelKind::random: {
            SplitMix64 rng(cfg.seed.value_or(0));
            return with_threshold(random_model(rng, cfg.random_interior, cfg.random_boundary), cfg.tol.singular);
        }
        case ModelKind::grid: {
            const GridSpec g = config_grid(cfg);
            return assemble(g, config_coefficients(cfg, g), cfg.tol.singular);
        }
    }
    throw ConfigError("unknown model kind");
}

[[nodiscard]] inline std::string_view model_kind_name(ModelKind k) noexcept {
    switch (k) {
        case ModelKind::grid: return "grid";
        case ModelKind::toy: return "toy";
        case ModelKind::path3: return "path3";
        case ModelKind::random: return "random";
    }
    return "?";
}

/// Lowest point of the spectra that the command's checks invert.
inline double spectral_bottom(const PartitionedHermitian& m, bool coupled) {
    double bottom = m.dirichlet().spectrum()(0);
    if (coupled) {
        bottom = std::min({bottom, m.exterior().spectrum()(0), m.transmission().spectrum()(0)});
    } else {
        bottom = std::min(bottom, m.neumann().spectrum()(0));
    }
    return bottom;
}

namespace detail {

inline std::vector<double> linspace(double lo, double hi, int count) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(count));
    if (count == 1) {
        out.push_back(lo);
        return out;
    }
    for (int k = 0; k < count; ++k) {
        out.push_back(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1));
    }
    return out;
}

}  // namespace detail

/// Explicit points, then the sweep rectangle (imaginary part outer), then the
/// real points below `bottom`.
inline std::vector<Complex> sample_points(const RunConfig& cfg, double bottom) {
    std::vector<Complex> out = cfg.points;
    if (cfg.sweep) {
        const auto re = detail::linspace(cfg.sweep->re_min, cfg.sweep->re_max, cfg.sweep->re_count);
        const auto im = detail::linspace(cfg.sweep->im_min, cfg.sweep->im_max, cfg.sweep->im_count);
        for (double y : im)
            for (double x : re) out.emplace_back(x, y);
    }
    if (cfg.real_sweep) {
        for (int k = 0; k < cfg.real_sweep->count; ++k) {
            out.emplace_back(bottom - cfg.real_sweep->offset - k * cfg.real_sweep->spacing, 0.0);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON helpers
// ---------------------------------------------------------------------------

inline Json to_json(Complex z) { return Json{{"re", z.real()}, {"im", z.imag()}}; }

inline std::string hash_hex(std::uint64_t h) {
    char buf[19] = {'0', 'x'};
    const auto [ptr, ec] = std::to_chars(buf + 2, buf + sizeof buf, h, 16);
    (void)ec;
    std::string s(buf + 2, ptr);
    return "0x" + std::string(16 - s.size(), '0') + s;
}

inline std::string format_g17(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    (void)ec;
    return std::string(buf, ptr);
}

inline Json to_json(const KreinReport& r, std::uint64_t model_hash) {
    Json schatten = Json::object();
    for (const auto& [p, v] : r.schatten_norms) schatten[format_g17(p)] = v;
    return Json{{"model_hash", hash_hex(model_hash)},
                {"lambda", to_json(r.lambda)},
                {"krein_residual", r.krein_residual},
                {"trace",
                 {{"lhs_re", r.lhs_trace.real()},
                  {"lhs_im", r.lhs_trace.imag()},
                  {"rhs_re", r.rhs_trace.real()},
                  {"rhs_im", r.rhs_trace.imag()},
                  {"gap", r.trace_gap}}},
                {"singular_values", std::vector<double>(r.singular_values.begin(), r.singular_values.end())},
                {"rank", r.numerical_rank},
                {"schatten", schatten}};
}

inline Json describe_model(const RunConfig& cfg, const PartitionedHermitian& m) {
    Json d{{"kind", model_kind_name(cfg.model)},
           {"hash", hash_hex(m.hash())},
           {"size", m.matrix().rows()},
           {"interior", m.n_interior()},
           {"boundary", m.n_boundary()},
           {"exterior", m.n_exterior()},
           {"norm", m.norm()},
           {"singular_threshold", m.singular_threshold()}};
    if (cfg.model == ModelKind::grid) {
        const GridSpec g = config_grid(cfg);
        d["grid"] = {{"nx", g.nx}, {"ny", g.ny}, {"h", g.h},
                     {"layout", g.layout == Layout::coupled ? "coupled" : "bounded"}};
        d["coefficients"] = cfg.coeff_table ? *cfg.coeff_table : (cfg.affine ? "affine" : cfg.coeff_preset);
    }
    if (cfg.model == ModelKind::random) d["seed"] = *cfg.seed;
    return d;
}

inline Json tolerance_json(const Tolerances& t) {
    return Json{{"identity", t.identity},     {"gamma", t.gamma},
                {"representation", t.representation}, {"krein", t.krein},
                {"trace", t.trace},           {"nevanlinna", t.nevanlinna},
                {"symmetry", t.symmetry},     {"stieltjes", t.stieltjes},
                {"flux", t.flux},             {"additivity", t.additivity},
                {"bracketing", t.bracketing}, {"singular", t.singular},
                {"ratio_low", t.ratio_low},   {"ratio_high", t.ratio_high}};
}

// ---------------------------------------------------------------------------
// Check bookkeeping
// ---------------------------------------------------------------------------

struct CheckRecord {
    std::string name;
    std::optional<Complex> lambda;
    double value = 0.0;
    double tol = 0.0;
    bool pass = false;
    std::string note;
};

/// value <= tol
inline CheckRecord at_most(std::string name, std::optional<Complex> l, double value, double tol) {
    return {std::move(name), l, value, tol, value <= tol, {}};
}

/// value >= -tol
inline CheckRecord at_least_minus(std::string name, std::optional<Complex> l, double value, double tol) {
    return {std::move(name), l, value, tol, value >= -tol, {}};
}

struct PointOutcome {
    Complex lambda;
    std::vector<CheckRecord> checks;
    std::optional<KreinReport> krein;
    std::optional<std::string> skipped;
};

inline Json check_json(const CheckRecord& c) {
    Json j{{"check", c.name}, {"value", c.value}, {"tol", c.tol}, {"pass", c.pass}};
    if (c.lambda) j["lambda"] = to_json(*c.lambda);
    if (!c.note.empty()) j["note"] = c.note;
    return j;
}

/// Assembles the report body shared by verify and couple-verify.
inline CommandOutcome finish_report(Json report, const std::vector<CheckRecord>& global,
                                    const std::vector<PointOutcome>& points, std::uint64_t model_hash,
                                    bool coupled) {
    CommandOutcome out;
    Json checks = Json::array();
    Json krein = Json::array();
    Json skipped = Json::array();
    Json summary = Json::object();
    auto record = [&](const CheckRecord& c) {
        checks.push_back(check_json(c));
        ++out.checks;
        if (!c.pass) ++out.failures;
        Json& s = summary[c.name];
        if (s.is_null()) s = Json{{"count", 0}, {"failures", 0}, {"worst", c.value}, {"tol", c.tol}};
        s["count"] = s["count"].get<std::size_t>() + 1;
        if (!c.pass) s["failures"] = s["failures"].get<std::size_t>() + 1;
        const double worst = s["worst"].get<double>();
        const bool lower_bound = c.name.find("min_eig") != std::string::npos ||
                                 c.name.find("bracketing") != std::string::npos;
        s["worst"] = lower_bound ? std::min(worst, c.value) : std::max(worst, c.value);
    };
    for (const CheckRecord& c : global) record(c);
    for (const PointOutcome& p : points) {
        if (p.skipped) {
            skipped.push_back(Json{{"lambda", to_json(p.lambda)}, {"reason", *p.skipped}});
            ++out.skipped;
            continue;
        }
        for (const CheckRecord& c : p.checks) record(c);
        if (p.krein) {
            Json k = to_json(*p.krein, model_hash);
            if (coupled) k["site"] = "coupled";
            krein.push_back(std::move(k));
        }
    }
    report["checks"] = std::move(checks);
    report["krein"] = std::move(krein);
    report["skipped"] = std::move(skipped);
    report["summary"] = std::move(summary);
    report["passed"] = out.failures == 0;
    report["counts"] = {{"checks", out.checks}, {"failures", out.failures}, {"skipped", out.skipped}};
    out.exit_code = out.failures == 0 ? kExitOk : kExitFailed;
    out.body = report.dump(2) + "\n";
    return out;
}

/// Deterministic complex test vector for sample k.
inline ComplexVector probe_vector(std::uint64_t seed, std::size_t k, Index n) {
    SplitMix64 rng(seed);
    for (std::size_t s = 0; s < k; ++s) (void)rng.next();
    SplitMix64 local = rng.split();
    ComplexVector v(n);
    for (Index i = 0; i < n; ++i) {
        const double re = local.uniform(-1.0, 1.0);
        const double im = local.uniform(-1.0, 1.0);
        v(i) = Complex(re, im);
    }
    return v;
}

/// Runs `body` for one sample, turning rejected shifts into a skip entry.
template <class Body>
PointOutcome evaluate_point(Complex lambda, Body&& body) {
    PointOutcome p;
    p.lambda = lambda;
    try {
        body(p);
    } catch (const NearSingularShift& e) {
        p.checks.clear();
        p.krein.reset();
        p.skipped = e.what();
    } catch (const SingularQ& e) {
        p.checks.clear();
        p.krein.reset();
        p.skipped = e.what();
    } catch (const std::exception& e) {
        CheckRecord c{"evaluation", lambda, std::numeric_limits<double>::quiet_NaN(), 0.0, false, e.what()};
        p.checks.push_back(std::move(c));
    }
    return p;
}

/// Central-difference ratio test at the anchor. When the error at the finer
/// step is already at rounding level the ratio carries no information and the
/// check is recorded as rounding-limited.
inline CheckRecord derivative_check(const PartitionedHermitian& m, const RunConfig& cfg) {
    const double step = cfg.derivative_step;
    const double coarse = central_difference_error(m, cfg.anchor, step);
    const double fine = central_difference_error(m, cfg.anchor, step / 2.0);
    const double q_scale = std::max(1.0, q_at(m, cfg.anchor).norm());
    const double noise = 1e3 * std::numeric_limits<double>::epsilon() * q_scale / (step / 2.0);
    CheckRecord c{"derivative_ratio", cfg.anchor, fine > 0.0 ? coarse / fine : 0.0, 0.0, false, {}};
    if (fine <= noise) {
        c.pass = true;
        c.note = "rounding-limited";
    } else {
        c.pass = c.value >= cfg.tol.ratio_low && c.value <= cfg.tol.ratio_high;
    }
    c.tol = cfg.tol.ratio_low;
    return c;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline CommandOutcome run_verify(const RunConfig& cfg, const PartitionedHermitian& m, unsigned threads) {
    const Tolerances& tol = cfg.tol;
    const auto points = sample_points(cfg, spectral_bottom(m, false));
    const std::uint64_t seed = cfg.seed.value_or(0);

    std::vector<CheckRecord> global;
    if (cfg.suites.derivative) global.push_back(derivative_check(m, cfg));
    std::optional<StieltjesData> measure;
    if (cfg.suites.stieltjes) measure = stieltjes(m, cfg.anchor);
    std::optional<GammaField> gamma_field;
    if (cfg.suites.gamma) gamma_field.emplace(m, cfg.anchor);

    auto results = parallel_map(points.size(), threads, [&](std::size_t k) {
        const Complex l = points[k];
        return evaluate_point(l, [&](PointOutcome& p) {
            m.dirichlet().require_accepted(l);
            m.neumann().require_accepted(l);
            const ComplexMatrix q = q_at(m, l);
            if (cfg.suites.identity) {
                const double r = std::max(q_identity_residual(m, l, cfg.anchor),
                                          q_identity_residual(m, l, std::conj(l)));
                p.checks.push_back(at_most("q_identity", l, r, tol.identity));
            }
            if (cfg.suites.gamma) {
                const ComplexMatrix g = gamma_at(m, l);
                p.checks.push_back(at_most("gamma_update", l, floored_relative((*gamma_field)(l) - g, g), tol.gamma));
                const ComplexVector f = probe_vector(seed, k, m.n_interior());
                double flux = std::numeric_limits<double>::infinity();
                try {
                    const ComplexVector conormal = -(m.h_bi() * f);
                    const ComplexVector adjoint = gamma_adjoint_flux(m, l, f, tol.gamma);
                    flux = (adjoint - conormal).norm() / std::max(1.0, conormal.norm());
                } catch (const FluxMismatch&) {
                }
                p.checks.push_back(at_most("gamma_adjoint_flux", l, flux, tol.gamma));
            }
            if (cfg.suites.representation) {
                p.checks.push_back(
                    at_most("q_representation", l, q_representation_residual(m, l, cfg.anchor), tol.representation));
            }
            if (cfg.suites.nevanlinna) {
                if (l.imag() != 0.0) {
                    const NevanlinnaSample s = nevanlinna_sample(m, l);
                    p.checks.push_back(at_least_minus("nevanlinna_min_eig", l, s.min_eig_im_ratio, tol.nevanlinna));
                    p.checks.push_back(at_most("nevanlinna_symmetry", l, s.symmetry_gap, tol.symmetry));
                } else {
                    p.checks.push_back(at_most("real_axis_symmetry", l, relative(q - q.adjoint(), q), tol.symmetry));
                }
            }
            if (measure) {
                p.checks.push_back(at_most("stieltjes", l, stieltjes_residual(m, *measure, l), tol.stieltjes));
            }
            if (cfg.suites.krein) {
                KreinReport r = schatten_report(m, l, cfg.schatten_p);
                p.checks.push_back(at_most("krein", l, r.krein_residual, tol.krein));
                p.checks.push_back(at_most("trace", l, r.trace_gap, tol.trace));
                CheckRecord rank{"rank_bound", l, static_cast<double>(r.numerical_rank),
                                 static_cast<double>(r.boundary_size), r.rank_bound_holds(), {}};
                p.checks.push_back(std::move(rank));
                p.krein = std::move(r);
            }
        });
    });

    Json report{{"command", "verify"},
                {"model", describe_model(cfg, m)},
                {"tolerances", tolerance_json(tol)},
                {"anchor", to_json(cfg.anchor)},
                {"sample_count", points.size()}};
    CommandOutcome out = finish_report(std::move(report), global, results, m.hash(), false);
    out.file_name = output_file_name(Command::verify);
    return out;
}

inline CommandOutcome run_couple_verify(const RunConfig& cfg, const PartitionedHermitian& m, unsigned threads) {
    const Tolerances& tol = cfg.tol;
    const auto points = sample_points(cfg, spectral_bottom(m, true));
    const std::uint64_t seed = cfg.seed.value_or(0);
    const Index n_sum = m.n_interior() + m.n_exterior();

    std::vector<CheckRecord> global;
    const InterlacingReport il = interlacing_report(m);
    const bool bb_definite = heig(m.h_bb()).eigenvalues(0) > 0.0;
    CheckRecord bracket{"bracketing_margin", std::nullopt, il.bracketing_margin(), tol.bracketing,
                        il.bracketing_margin() >= -tol.bracketing, {}};
    if (!bb_definite) {
        bracket.pass = true;
        bracket.note = "reported only: interface block is not positive definite";
    }
    global.push_back(bracket);

    auto results = parallel_map(points.size(), threads, [&](std::size_t k) {
        const Complex l = points[k];
        return evaluate_point(l, [&](PointOutcome& p) {
            m.dirichlet().require_accepted(l);
            m.exterior().require_accepted(l);
            m.transmission().require_accepted(l);
            p.checks.push_back(at_most("steklov_additivity", l, steklov_additivity_residual(m, l), tol.additivity));
            if (cfg.suites.identity) {
                const double r = std::max(coupled_q_identity_residual(m, l, cfg.anchor),
                                          coupled_q_identity_residual(m, l, std::conj(l)));
                p.checks.push_back(at_most("coupled_q_identity", l, r, tol.identity));
            }
            const FluxJump f = transmission_flux_jump(m, l, probe_vector(seed, k, n_sum));
            p.checks.push_back(at_most("flux_jump", l, f.jump, tol.flux));
            p.checks.push_back(at_most("flux_equation", l, f.equation, tol.flux));
            if (cfg.suites.krein) {
                KreinReport r = coupled_schatten_report(m, l, cfg.schatten_p);
                p.checks.push_back(at_most("coupled_krein", l, r.krein_residual, tol.krein));
                p.checks.push_back(at_most("coupled_trace", l, r.trace_gap, tol.trace));
                CheckRecord rank{"rank_bound", l, static_cast<double>(r.numerical_rank),
                                 static_cast<double>(r.boundary_size), r.rank_bound_holds(), {}};
                p.checks.push_back(std::move(rank));
                p.krein = std::move(r);
            }
        });
    });

    Json report{{"command", "couple-verify"},
                {"site", "coupled"},
                {"model", describe_model(cfg, m)},
                {"tolerances", tolerance_json(tol)},
                {"anchor", to_json(cfg.anchor)},
                {"sample_count", points.size()},
                {"interlacing",
                 {{"orthogonal_sum_spectrum",
                   std::vector<double>(il.orthogonal_sum_spectrum.begin(), il.orthogonal_sum_spectrum.end())},
                  {"transmission_spectrum",
                   std::vector<double>(il.transmission_spectrum.begin(), il.transmission_spectrum.end())},
                  {"bracketing_margin", il.bracketing_margin()},
                  {"bracketing_asserted", bb_definite}}}};
    CommandOutcome out = finish_report(std::move(report), global, results, m.hash(), true);
    out.file_name = output_file_name(Command::couple_verify);
    return out;
}

struct SweepRow {
    Complex lambda;
    bool skipped = false;
    double min_re = 0, max_re = 0, min_im = 0, max_im = 0, fro = 0, min_sv = 0;
};

inline constexpr std::string_view kSweepHeader =
    "re_lambda,im_lambda,min_eig_re_q,max_eig_re_q,min_eig_im_q,max_eig_im_q,fro_norm_q,min_sv_q,skipped";

inline CommandOutcome run_dtn_sweep(const RunConfig& cfg, const PartitionedHermitian& m, unsigned threads) {
    const bool coupled = m.has_exterior();
    const auto points = sample_points(cfg, spectral_bottom(m, coupled));

    auto rows = parallel_map(points.size(), threads, [&](std::size_t k) {
        SweepRow row;
        row.lambda = points[k];
        try {
            const ComplexMatrix q = coupled ? coupled_q(m, row.lambda) : q_at(m, row.lambda);
            const RealVector re = heig(hermitian_part(q)).eigenvalues;
            const RealVector im = heig(hermitian_part(imaginary_part(q))).eigenvalues;
            const RealVector sv = svd_values(q);
            row.min_re = re(0);
            row.max_re = re(re.size() - 1);
            row.min_im = im(0);
            row.max_im = im(im.size() - 1);
            row.fro = q.norm();
            row.min_sv = sv(sv.size() - 1);
        } catch (const NearSingularShift&) {
            row.skipped = true;
        }
        return row;
    });

    CommandOutcome out;
    out.file_name = output_file_name(Command::dtn_sweep);
    std::string csv(kSweepHeader);
    csv += '\n';
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const SweepRow& r : rows) {
        const double vals[] = {r.lambda.real(), r.lambda.imag(),
                               r.skipped ? nan : r.min_re, r.skipped ? nan : r.max_re,
                               r.skipped ? nan : r.min_im, r.skipped ? nan : r.max_im,
                               r.skipped ? nan : r.fro, r.skipped ? nan : r.min_sv};
        for (double v : vals) {
            csv += format_g17(v);
            csv += ',';
        }
        csv += r.skipped ? "1\n" : "0\n";
        if (r.skipped) {
            ++out.skipped;
            continue;
        }
        // Im Q / Im l is positive semidefinite off the axis and Im Q vanishes on it
        ++out.checks;
        const double y = r.lambda.imag();
        bool ok = true;
        if (y == 0.0) {
            ok = std::max(std::abs(r.min_im), std::abs(r.max_im)) <= cfg.tol.symmetry * std::max(1.0, r.fro);
        } else {
            const double lowest = (y > 0.0 ? r.min_im : r.max_im) / y;
            ok = lowest >= -cfg.tol.nevanlinna;
        }
        if (!ok) ++out.failures;
    }
    out.body = std::move(csv);
    out.exit_code = out.failures == 0 ? kExitOk : kExitFailed;
    return out;
}

inline bool strictly_decreasing(const std::vector<double>& v) {
    for (std::size_t k = 1; k < v.size(); ++k) {
        if (!(v[k] < v[k - 1])) return false;
    }
    return true;
}

inline CommandOutcome run_characterize(const RunConfig& cfg, const PartitionedHermitian& m) {
    const CharacterizationReport r = characterization_report(m, cfg.anchor, cfg.etas);
    CommandOutcome out;
    out.file_name = output_file_name(Command::characterize);
    Json alpha = Json::array();
    for (std::size_t k = 0; k < r.alpha_points.size(); ++k) {
        const bool pass = r.alpha_residuals[k] <= cfg.tol.stieltjes;
        alpha.push_back(Json{{"lambda", to_json(r.alpha_points[k])}, {"residual", r.alpha_residuals[k]}, {"pass", pass}});
        ++out.checks;
        if (!pass) ++out.failures;
    }
    Json report{{"command", "characterize"},
                {"model", describe_model(cfg, m)},
                {"anchor", to_json(r.anchor)},
                {"alpha", {{"points", alpha}, {"tol", cfg.tol.stieltjes}}},
                {"beta", {{"min_singular_value", r.beta_min_singular}, {"injective", r.beta_injective}}},
                {"gamma",
                 {{"etas", r.etas},
                  {"norm_over_eta", r.gamma_norm_over_eta},
                  {"norm_over_eta_strictly_decreasing", strictly_decreasing(r.gamma_norm_over_eta)},
                  {"eta_min_eig_im", r.gamma_eta_min_eig}}},
                {"simplicity",
                 {{"rank", r.simplicity_rank}, {"interior_size", r.interior_size},
                  {"simple", r.simplicity_rank == r.interior_size}}},
                {"passed", out.failures == 0}};
    out.body = report.dump(2) + "\n";
    out.exit_code = out.failures == 0 ? kExitOk : kExitFailed;
    return out;
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

/// Writes `body` to dir/name through a temporary file and a rename.
inline void write_atomically(const std::filesystem::path& dir, const std::string& name, const std::string& body) {
    std::filesystem::create_directories(dir);
    const std::filesystem::path target = dir / name;
    std::filesystem::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write '" + tmp.string() + "'");
        f << body;
        f.flush();
        if (!f) throw std::runtime_error("failed writing '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, target);
}

/// Evaluates a command without touching the file system. Configuration and
/// model errors propagate as dtnkrein::Error.
inline CommandOutcome evaluate_command(Command cmd, const RunConfig& cfg, unsigned threads) {
    cfg.validate();
    const bool coupled = cmd == Command::couple_verify;
    const PartitionedHermitian m = build_model(cfg, coupled);
    if (coupled && !m.has_exterior()) {
        throw ConfigError("couple-verify needs a model with an exterior part (coupled grid layout or path3)");
    }
    // lazily built operators are created here, before any worker thread exists
    if (coupled) {
        (void)m.transmission();
    } else if (cmd == Command::verify) {
        (void)m.neumann();
    } else if (cmd == Command::dtn_sweep) {
        if (m.has_exterior()) (void)m.transmission();
        else (void)m.neumann();
    }
    switch (cmd) {
        case Command::verify: return run_verify(cfg, m, threads);
        case Command::dtn_sweep: return run_dtn_sweep(cfg, m, threads);
        case Command::characterize: return run_characterize(cfg, m);
        case Command::couple_verify: return run_couple_verify(cfg, m, threads);
    }
    throw ConfigError("unknown command");
}

/// Runs a command end to end: evaluation, then a single write into
/// cfg.out_dir. Returns the process exit status.
inline int execute(Command cmd, const RunConfig& cfg, std::ostream& log, std::ostream& err, bool quiet = false) {
    CommandOutcome out;
    try {
        out = evaluate_command(cmd, cfg, thread_budget());
    } catch (const Error& e) {
        err << "dtn-krein " << command_name(cmd) << ": " << e.what() << "\n";
        return kExitConfig;
    }
    try {
        write_atomically(cfg.out_dir, out.file_name, out.body);
    } catch (const std::exception& e) {
        err << "dtn-krein " << command_name(cmd) << ": " << e.what() << "\n";
        return kExitConfig;
    }
    if (!quiet) {
        log << command_name(cmd) << ": " << out.checks << " checks, " << out.failures << " failed, " << out.skipped
            << " skipped -> " << (std::filesystem::path(cfg.out_dir) / out.file_name).string() << "\n";
    }
    return out.exit_code;
}

}  // namespace dtnkrein
