#pragma once

// Run configuration for the batch driver.
//
// Format: one `key = value` directive per line, dotted section prefixes,
// '#' starts a comment. Complex numbers are written `re:im` (a bare number is
// real). Lists are comma separated.

#include "dtnkrein/elliptic_assembly.hpp"
#include "dtnkrein/errors.hpp"
#include "dtnkrein/numerics.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace dtnkrein {

enum class ModelKind { grid, toy, path3, random };

struct SweepRect {
    double re_min = -2.0, re_max = 8.0;
    int re_count = 21;
    double im_min = 0.25, im_max = 2.75;
    int im_count = 11;
};

/// Real points below the joint spectrum: bottom - offset - k * spacing.
struct RealSweep {
    int count = 11;
    double offset = 0.5;
    double spacing = 0.5;
};

struct Tolerances {
    double identity = 1e-10;
    double gamma = 1e-10;
    double representation = 1e-10;
    double krein = 1e-10;
    double trace = 1e-9;
    double nevanlinna = 1e-12;
    double symmetry = 1e-12;
    double stieltjes = 1e-9;
    double flux = 1e-12;
    double additivity = 1e-12;
    double bracketing = 1e-12;
    double singular = kDefaultSingularRel;  // relative to ||H||_2
    double ratio_low = 3.5;
    double ratio_high = 4.5;
};

struct Suites {
    bool identity = true;
    bool gamma = true;
    bool representation = true;
    bool derivative = true;
    bool nevanlinna = true;
    bool stieltjes = true;
    bool krein = true;
};

struct RunConfig {
    ModelKind model = ModelKind::grid;
    GridSpec grid;
    std::optional<Index> inner_nodes;  // coupled layout sized from the far-field factor
    double far_factor = 3.0;
    std::string coeff_preset = "laplacian";
    std::optional<std::string> coeff_table;
    std::optional<AffineCoefficients> affine;
    Index random_interior = 30;
    Index random_boundary = 6;

    std::vector<Complex> points{{0.0, 1.0}, {2.0, 1.0}, {-1.0, 0.0}, {0.5, 0.25}};
    std::optional<SweepRect> sweep = SweepRect{};
    std::optional<RealSweep> real_sweep = RealSweep{};
    Complex anchor{0.0, 1.0};
    std::vector<double> etas{1e2, 1e4, 1e6};
    std::vector<double> schatten_p{1.0, 2.0, 3.0};
    double derivative_step = 1e-3;

    Tolerances tol;
    Suites suites;
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";

    /// Throws ConfigError when an invariant is violated.
    void validate() const {
        auto positive = [](double v, const char* name) {
            if (!(v > 0.0) || !std::isfinite(v)) {
                throw ConfigError(std::string("tolerance ") + name + " must be positive");
            }
        };
        positive(tol.identity, "tol.identity");
        positive(tol.gamma, "tol.gamma");
        positive(tol.representation, "tol.representation");
        positive(tol.krein, "tol.krein");
        positive(tol.trace, "tol.trace");
        positive(tol.nevanlinna, "tol.nevanlinna");
        positive(tol.symmetry, "tol.symmetry");
        positive(tol.stieltjes, "tol.stieltjes");
        positive(tol.flux, "tol.flux");
        positive(tol.additivity, "tol.additivity");
        positive(tol.bracketing, "tol.bracketing");
        positive(tol.singular, "tol.singular");
        if (!(tol.ratio_low > 0.0 && tol.ratio_high > tol.ratio_low)) {
            throw ConfigError("tol.ratio_low/ratio_high must satisfy 0 < low < high");
        }
        if (sweep && (sweep->re_count < 1 || sweep->im_count < 1)) {
            throw ConfigError("sweep counts must be at least 1");
        }
        if (sweep && (sweep->im_min <= 0.0 || sweep->im_max < sweep->im_min || sweep->re_max < sweep->re_min)) {
            throw ConfigError("sweep rectangle must lie in the upper half-plane with min <= max");
        }
        if (real_sweep && (real_sweep->count < 1 || !(real_sweep->spacing > 0.0) || real_sweep->offset < 0.0)) {
            throw ConfigError("real sweep needs count >= 1, spacing > 0, offset >= 0");
        }
        if (anchor.imag() == 0.0) {
            throw ConfigError("lambda.anchor must be nonreal");
        }
        if (!(derivative_step > 0.0)) {
            throw ConfigError("derivative.step must be positive");
        }
        for (double e : etas) {
            if (!(e > 0.0)) throw ConfigError("characterize.eta values must be positive");
        }
        for (std::size_t k = 1; k < etas.size(); ++k) {
            if (!(etas[k] > etas[k - 1])) throw ConfigError("characterize.eta must be ascending");
        }
        for (double p : schatten_p) {
            if (!(p >= 1.0)) throw ConfigError("schatten.p values must be >= 1");
        }
        if (model == ModelKind::random) {
            if (!seed) throw ConfigError("random models require a seed");
            if (random_interior < 1 || random_boundary < 1) {
                throw ConfigError("random.interior and random.boundary must be at least 1");
            }
        }
        if (model == ModelKind::grid && !inner_nodes) {
            try {
                grid.validate();
            } catch (const LayoutError& e) {
                throw ConfigError(e.what());
            }
        }
        if (inner_nodes && *inner_nodes < 3) {
            throw ConfigError("grid.inner_nodes must be at least 3");
        }
    }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

inline double to_double(std::string_view s, std::string_view key) {
    s = trim(s);
    double v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw ConfigError("config key '" + std::string(key) + "': bad number '" + std::string(s) + "'");
    }
    return v;
}

inline long long to_int(std::string_view s, std::string_view key) {
    s = trim(s);
    long long v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ConfigError("config key '" + std::string(key) + "': bad integer '" + std::string(s) + "'");
    }
    return v;
}

inline std::uint64_t to_u64(std::string_view s, std::string_view key) {
    s = trim(s);
    std::uint64_t v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ConfigError("config key '" + std::string(key) + "': bad unsigned integer '" + std::string(s) + "'");
    }
    return v;
}

inline bool to_bool(std::string_view s, std::string_view key) {
    s = trim(s);
    if (s == "true" || s == "on" || s == "yes" || s == "1") return true;
    if (s == "false" || s == "off" || s == "no" || s == "0") return false;
    throw ConfigError("config key '" + std::string(key) + "': expected a boolean");
}

inline std::vector<std::string_view> split_list(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto comma = s.find(',', start);
        const auto item = trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
        if (!item.empty()) out.push_back(item);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline Complex to_complex(std::string_view s, std::string_view key) {
    s = trim(s);
    const auto colon = s.find(':');
    if (colon == std::string_view::npos) return {to_double(s, key), 0.0};
    return {to_double(s.substr(0, colon), key), to_double(s.substr(colon + 1), key)};
}

inline std::vector<double> to_doubles(std::string_view s, std::string_view key) {
    std::vector<double> out;
    for (auto item : split_list(s)) out.push_back(to_double(item, key));
    return out;
}

inline Affine to_affine(std::string_view s, std::string_view key) {
    const auto v = to_doubles(s, key);
    if (v.size() != 3) {
        throw ConfigError("config key '" + std::string(key) + "': expected c0,cx,cy");
    }
    return {v[0], v[1], v[2]};
}

}  // namespace detail

/// Applies a model preset name: toy, path3, random, laplacian, anisotropic,
/// affine (bounded 8x8 grids) or coupled (12x12 grid around a 6x6 box).
inline void apply_preset(RunConfig& cfg, std::string_view name) {
    if (name == "toy") {
        cfg.model = ModelKind::toy;
    } else if (name == "path3") {
        cfg.model = ModelKind::path3;
    } else if (name == "random") {
        cfg.model = ModelKind::random;
    } else if (name == "laplacian" || name == "anisotropic" || name == "affine") {
        cfg.model = ModelKind::grid;
        cfg.grid.layout = Layout::bounded;
        cfg.grid.inner.reset();
        cfg.coeff_preset = std::string(name);
    } else if (name == "coupled") {
        cfg.model = ModelKind::grid;
        cfg.grid.nx = cfg.grid.ny = 12;
        cfg.grid.layout = Layout::coupled;
        cfg.grid.inner = InnerBox{3, 3, 8, 8};
        cfg.coeff_preset = "laplacian";
    } else {
        throw ConfigError("unknown preset '" + std::string(name) + "'");
    }
}

/// Parses configuration text on top of `cfg`. Unknown keys are errors.
inline void parse_config(std::istream& in, RunConfig& cfg) {
    using namespace detail;
    std::string raw;
    std::size_t line_no = 0;
    std::set<std::string> seen;
    std::optional<std::string> preset;
    std::map<std::string, std::string> entries;
    std::vector<std::string> order;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = raw;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        if (!seen.insert(key).second) throw ConfigError("config key '" + key + "' given twice");
        if (key == "preset") {
            preset = value;
            continue;
        }
        entries[key] = value;
        order.push_back(key);
    }
    if (preset) apply_preset(cfg, *preset);

    std::optional<SweepRect> sweep = cfg.sweep ? cfg.sweep : SweepRect{};
    std::optional<RealSweep> real = cfg.real_sweep ? cfg.real_sweep : RealSweep{};
    bool sweep_on = cfg.sweep.has_value();
    bool real_on = cfg.real_sweep.has_value();
    AffineCoefficients affine = cfg.affine.value_or(AffineCoefficients{});
    bool affine_given = cfg.affine.has_value();

    using Handler = std::function<void(std::string_view, std::string_view)>;
    const std::map<std::string, Handler, std::less<>> handlers{
        {"model",
         [&](auto k, auto v) {
             if (v == "grid") cfg.model = ModelKind::grid;
             else if (v == "toy") cfg.model = ModelKind::toy;
             else if (v == "path3") cfg.model = ModelKind::path3;
             else if (v == "random") cfg.model = ModelKind::random;
             else throw ConfigError("config key '" + std::string(k) + "': unknown model '" + std::string(v) + "'");
         }},
        {"grid.layout",
         [&](auto k, auto v) {
             if (v == "bounded") cfg.grid.layout = Layout::bounded;
             else if (v == "coupled") cfg.grid.layout = Layout::coupled;
             else throw ConfigError("config key '" + std::string(k) + "': unknown layout '" + std::string(v) + "'");
         }},
        {"grid.nx", [&](auto k, auto v) { cfg.grid.nx = to_int(v, k); }},
        {"grid.ny", [&](auto k, auto v) { cfg.grid.ny = to_int(v, k); }},
        {"grid.h", [&](auto k, auto v) { cfg.grid.h = to_double(v, k); }},
        {"grid.inner",
         [&](auto k, auto v) {
             const auto items = split_list(v);
             if (items.size() != 4) throw ConfigError("config key 'grid.inner': expected i0,j0,i1,j1");
             cfg.grid.inner = InnerBox{to_int(items[0], k), to_int(items[1], k), to_int(items[2], k),
                                       to_int(items[3], k)};
         }},
        {"grid.inner_nodes", [&](auto k, auto v) { cfg.inner_nodes = to_int(v, k); }},
        {"grid.far_factor", [&](auto k, auto v) { cfg.far_factor = to_double(v, k); }},
        {"coeff.preset", [&](auto, auto v) { cfg.coeff_preset = std::string(v); }},
        {"coeff.table", [&](auto, auto v) { cfg.coeff_table = std::string(v); }},
        {"coeff.a11", [&](auto k, auto v) { affine.a11 = to_affine(v, k), affine_given = true; }},
        {"coeff.a12", [&](auto k, auto v) { affine.a12 = to_affine(v, k), affine_given = true; }},
        {"coeff.a22", [&](auto k, auto v) { affine.a22 = to_affine(v, k), affine_given = true; }},
        {"coeff.a0", [&](auto k, auto v) { affine.a0 = to_affine(v, k), affine_given = true; }},
        {"random.interior", [&](auto k, auto v) { cfg.random_interior = to_int(v, k); }},
        {"random.boundary", [&](auto k, auto v) { cfg.random_boundary = to_int(v, k); }},
        {"lambda.points",
         [&](auto k, auto v) {
             cfg.points.clear();
             for (auto item : split_list(v)) cfg.points.push_back(to_complex(item, k));
         }},
        {"lambda.anchor", [&](auto k, auto v) { cfg.anchor = to_complex(v, k); }},
        {"lambda.sweep", [&](auto k, auto v) { sweep_on = to_bool(v, k); }},
        {"lambda.sweep.re_min", [&](auto k, auto v) { sweep->re_min = to_double(v, k); }},
        {"lambda.sweep.re_max", [&](auto k, auto v) { sweep->re_max = to_double(v, k); }},
        {"lambda.sweep.re_count", [&](auto k, auto v) { sweep->re_count = static_cast<int>(to_int(v, k)); }},
        {"lambda.sweep.im_min", [&](auto k, auto v) { sweep->im_min = to_double(v, k); }},
        {"lambda.sweep.im_max", [&](auto k, auto v) { sweep->im_max = to_double(v, k); }},
        {"lambda.sweep.im_count", [&](auto k, auto v) { sweep->im_count = static_cast<int>(to_int(v, k)); }},
        {"lambda.real", [&](auto k, auto v) { real_on = to_bool(v, k); }},
        {"lambda.real.count", [&](auto k, auto v) { real->count = static_cast<int>(to_int(v, k)); }},
        {"lambda.real.offset", [&](auto k, auto v) { real->offset = to_double(v, k); }},
        {"lambda.real.spacing", [&](auto k, auto v) { real->spacing = to_double(v, k); }},
        {"characterize.eta", [&](auto k, auto v) { cfg.etas = to_doubles(v, k); }},
        {"schatten.p", [&](auto k, auto v) { cfg.schatten_p = to_doubles(v, k); }},
        {"derivative.step", [&](auto k, auto v) { cfg.derivative_step = to_double(v, k); }},
        {"tol.identity", [&](auto k, auto v) { cfg.tol.identity = to_double(v, k); }},
        {"tol.gamma", [&](auto k, auto v) { cfg.tol.gamma = to_double(v, k); }},
        {"tol.representation", [&](auto k, auto v) { cfg.tol.representation = to_double(v, k); }},
        {"tol.krein", [&](auto k, auto v) { cfg.tol.krein = to_double(v, k); }},
        {"tol.trace", [&](auto k, auto v) { cfg.tol.trace = to_double(v, k); }},
        {"tol.nevanlinna", [&](auto k, auto v) { cfg.tol.nevanlinna = to_double(v, k); }},
        {"tol.symmetry", [&](auto k, auto v) { cfg.tol.symmetry = to_double(v, k); }},
        {"tol.stieltjes", [&](auto k, auto v) { cfg.tol.stieltjes = to_double(v, k); }},
        {"tol.flux", [&](auto k, auto v) { cfg.tol.flux = to_double(v, k); }},
        {"tol.additivity", [&](auto k, auto v) { cfg.tol.additivity = to_double(v, k); }},
        {"tol.bracketing", [&](auto k, auto v) { cfg.tol.bracketing = to_double(v, k); }},
        {"tol.singular", [&](auto k, auto v) { cfg.tol.singular = to_double(v, k); }},
        {"tol.ratio_low", [&](auto k, auto v) { cfg.tol.ratio_low = to_double(v, k); }},
        {"tol.ratio_high", [&](auto k, auto v) { cfg.tol.ratio_high = to_double(v, k); }},
        {"suite.identity", [&](auto k, auto v) { cfg.suites.identity = to_bool(v, k); }},
        {"suite.gamma", [&](auto k, auto v) { cfg.suites.gamma = to_bool(v, k); }},
        {"suite.representation", [&](auto k, auto v) { cfg.suites.representation = to_bool(v, k); }},
        {"suite.derivative", [&](auto k, auto v) { cfg.suites.derivative = to_bool(v, k); }},
        {"suite.nevanlinna", [&](auto k, auto v) { cfg.suites.nevanlinna = to_bool(v, k); }},
        {"suite.stieltjes", [&](auto k, auto v) { cfg.suites.stieltjes = to_bool(v, k); }},
        {"suite.krein", [&](auto k, auto v) { cfg.suites.krein = to_bool(v, k); }},
        {"seed", [&](auto k, auto v) { cfg.seed = to_u64(v, k); }},
        {"output.dir", [&](auto, auto v) { cfg.out_dir = std::string(v); }},
    };

    for (const std::string& key : order) {
        const auto it = handlers.find(key);
        if (it == handlers.end()) throw ConfigError("unknown config key '" + key + "'");
        it->second(key, entries.at(key));
    }
    cfg.sweep = sweep_on ? sweep : std::nullopt;
    cfg.real_sweep = real_on ? real : std::nullopt;
    if (affine_given) cfg.affine = affine;
}

inline RunConfig parse_config_text(std::string_view text, RunConfig cfg = {}) {
    std::istringstream in{std::string(text)};
    parse_config(in, cfg);
    return cfg;
}

inline RunConfig load_config(const std::string& path, RunConfig cfg = {}) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    parse_config(in, cfg);
    return cfg;
}

}  // namespace dtnkrein
