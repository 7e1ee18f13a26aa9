#include <catch2/catch_amalgamated.hpp>

#include "dtnkrein/config.hpp"
#include "dtnkrein/driver.hpp"
#include "dtnkrein/models.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace dtnkrein;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("dtnkrein_driver_" + name);
    fs::remove_all(p);
    return p;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& body) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(body);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

RunConfig toy_config() {
    RunConfig cfg = parse_config_text("preset = toy\nlambda.points = 0, 0:1\nlambda.sweep = false\nlambda.real = false\n");
    return cfg;
}

}  // namespace

TEST_CASE("config parsing", "[driver][config]") {
    const RunConfig cfg = parse_config_text(R"(
# comment line
grid.nx = 10   # trailing comment
grid.ny = 9
grid.h = 0.5
coeff.preset = anisotropic
lambda.points = 1:2, -3, 0.5:-0.25
lambda.anchor = 0:2
lambda.sweep.re_count = 3
lambda.real = off
characterize.eta = 10, 100
schatten.p = 1, 4
tol.krein = 1e-8
suite.stieltjes = false
seed = 18446744073709551615
output.dir = somewhere
)");
    CHECK(cfg.model == ModelKind::grid);
    CHECK(cfg.grid.nx == 10);
    CHECK(cfg.grid.ny == 9);
    CHECK(cfg.grid.h == 0.5);
    CHECK(cfg.coeff_preset == "anisotropic");
    REQUIRE(cfg.points.size() == 3);
    CHECK(cfg.points[0] == Complex(1.0, 2.0));
    CHECK(cfg.points[1] == Complex(-3.0, 0.0));
    CHECK(cfg.points[2] == Complex(0.5, -0.25));
    CHECK(cfg.anchor == Complex(0.0, 2.0));
    REQUIRE(cfg.sweep);
    CHECK(cfg.sweep->re_count == 3);
    CHECK(cfg.sweep->im_count == 11);
    CHECK_FALSE(cfg.real_sweep);
    CHECK(cfg.etas == std::vector<double>{10.0, 100.0});
    CHECK(cfg.schatten_p == std::vector<double>{1.0, 4.0});
    CHECK(cfg.tol.krein == 1e-8);
    CHECK(cfg.tol.trace == 1e-9);
    CHECK_FALSE(cfg.suites.stieltjes);
    CHECK(cfg.seed == 18446744073709551615ULL);
    CHECK(cfg.out_dir == "somewhere");
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("presets apply before other keys", "[driver][config]") {
    const RunConfig cfg = parse_config_text("grid.nx = 14\npreset = coupled\n");
    CHECK(cfg.grid.layout == Layout::coupled);
    CHECK(cfg.grid.nx == 14);
    CHECK(cfg.grid.ny == 12);
    REQUIRE(cfg.grid.inner);
    CHECK(cfg.grid.inner->i0 == 3);

    const RunConfig affine = parse_config_text("coeff.a12 = 0.2, 0, 0\n");
    REQUIRE(affine.affine);
    CHECK(affine.affine->a12.c0 == 0.2);
    CHECK(affine.affine->a11.c0 == 1.0);
}

TEST_CASE("config errors", "[driver][config]") {
    CHECK_THROWS_AS(parse_config_text("grid.nx = 8\ngrid.nx = 9\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("grid.nz = 8\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("grid.nx = eight\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("grid.nx 8\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("lambda.sweep = maybe\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("preset = hexagonal\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("coeff.a11 = 1, 2\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("tol.krein = nan\n"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/dtnkrein.cfg"), ConfigError);

    auto invalid = [](const char* text) { return parse_config_text(text).validate(); };
    CHECK_THROWS_AS(invalid("tol.krein = 0\n"), ConfigError);
    CHECK_THROWS_AS(invalid("tol.trace = -1e-9\n"), ConfigError);
    CHECK_THROWS_AS(invalid("lambda.sweep.re_count = 0\n"), ConfigError);
    CHECK_THROWS_AS(invalid("lambda.sweep.im_min = -1\n"), ConfigError);
    CHECK_THROWS_AS(invalid("model = random\n"), ConfigError);
    CHECK_THROWS_AS(invalid("lambda.anchor = 2\n"), ConfigError);
    CHECK_THROWS_AS(invalid("characterize.eta = 100, 10\n"), ConfigError);
    CHECK_THROWS_AS(invalid("grid.nx = 2\n"), ConfigError);
    CHECK_THROWS_AS(invalid("grid.layout = coupled\n"), ConfigError);
    CHECK_NOTHROW(invalid("model = random\nseed = 5\n"));
}

TEST_CASE("config error exits with 2 and writes nothing", "[driver][exit]") {
    const fs::path dir = scratch("tol0");
    RunConfig cfg = parse_config_text("preset = laplacian\ntol.krein = 0\n");
    cfg.out_dir = dir.string();
    std::ostringstream log, err;
    CHECK(execute(Command::verify, cfg, log, err) == kExitConfig);
    CHECK_FALSE(fs::exists(dir));
    CHECK_FALSE(err.str().empty());

    RunConfig bounded = parse_config_text("preset = laplacian\nlambda.sweep = false\n");
    bounded.out_dir = dir.string();
    CHECK(execute(Command::couple_verify, bounded, log, err) == kExitConfig);
    CHECK_FALSE(fs::exists(dir));
}

TEST_CASE("failed checks exit with 1", "[driver][exit]") {
    RunConfig cfg = toy_config();
    cfg.tol.krein = 1e-300;
    const fs::path dir = scratch("fail");
    cfg.out_dir = dir.string();
    cfg.points = {Complex(0.3, 0.7)};
    std::ostringstream log, err;
    // a 1e-300 bound is only met by an exactly zero residual
    const int code = execute(Command::verify, cfg, log, err, true);
    const Json report = Json::parse(std::ifstream(dir / "report.json"));
    const double residual = report["krein"][0]["krein_residual"].get<double>();
    CHECK(code == (residual <= 1e-300 ? kExitOk : kExitFailed));
    CHECK(report["passed"].get<bool>() == (code == kExitOk));
    CHECK(log.str().empty());
    fs::remove_all(dir);
}

TEST_CASE("toy verify report", "[driver][verify]") {
    const CommandOutcome out = evaluate_command(Command::verify, toy_config(), 1);
    CHECK(out.exit_code == kExitOk);
    CHECK(out.file_name == "report.json");
    const Json r = Json::parse(out.body);
    CHECK(r["passed"].get<bool>());
    const Json& k0 = r["krein"][0];
    CHECK(k0["lambda"]["re"].get<double>() == 0.0);
    CHECK(k0["lambda"]["im"].get<double>() == 0.0);
    CHECK(std::abs(k0["trace"]["lhs_re"].get<double>() + 0.5) <= 1e-14);
    CHECK(std::abs(k0["trace"]["rhs_re"].get<double>() + 0.5) <= 1e-14);
    CHECK(k0["rank"].get<int>() == 1);
    CHECK(std::abs(k0["schatten"]["1"].get<double>() - 0.5) <= 1e-14);
    CHECK(k0["model_hash"].get<std::string>().size() == 18);
    CHECK(r["model"]["kind"] == "toy");
    // every check carries its tolerance
    for (const Json& c : r["checks"]) CHECK(c.contains("tol"));
}

TEST_CASE("rejected shifts are skipped with a reason", "[driver][verify]") {
    RunConfig cfg = toy_config();
    cfg.points = {Complex(2.0, 0.0), Complex(1.0, 0.0), Complex(0.0, 1.0)};
    const CommandOutcome out = evaluate_command(Command::verify, cfg, 1);
    const Json r = Json::parse(out.body);
    REQUIRE(r["skipped"].size() == 2);
    CHECK(r["skipped"][0]["lambda"]["re"].get<double>() == 2.0);
    CHECK(r["skipped"][0]["reason"].get<std::string>().find("A_D") != std::string::npos);
    CHECK(r["skipped"][1]["reason"].get<std::string>().find("A_N") != std::string::npos);
    CHECK(r["krein"].size() == 1);
    CHECK(out.exit_code == kExitOk);
}

TEST_CASE("Laplacian 8x8 verify passes", "[driver][verify]") {
    RunConfig cfg = parse_config_text("preset = laplacian\nlambda.sweep.re_count = 5\nlambda.sweep.im_count = 3\n");
    const CommandOutcome out = evaluate_command(Command::verify, cfg, 2);
    CHECK(out.exit_code == kExitOk);
    CHECK(out.failures == 0);
    const Json r = Json::parse(out.body);
    CHECK(r["krein"].size() == 4 + 15 + 11);
    for (const Json& k : r["krein"]) {
        CHECK(k["krein_residual"].get<double>() <= 1e-10);
        CHECK(k["trace"]["gap"].get<double>() <= 1e-9);
        CHECK(k["rank"].get<int>() <= 28);
    }
    CHECK(r["summary"]["derivative_ratio"]["failures"].get<int>() == 0);
}

TEST_CASE("dtn-sweep on the toy model", "[driver][sweep]") {
    RunConfig cfg = toy_config();
    cfg.real_sweep = RealSweep{4, 0.5, 0.5};
    const CommandOutcome out = evaluate_command(Command::dtn_sweep, cfg, 1);
    CHECK(out.file_name == "dtn_sweep.csv");
    const auto rows = parse_csv(out.body);
    REQUIRE(rows.size() == 1 + 2 + 4);
    CHECK(rows[0] == std::vector<std::string>{"re_lambda", "im_lambda", "min_eig_re_q", "max_eig_re_q",
                                              "min_eig_im_q", "max_eig_im_q", "fro_norm_q", "min_sv_q", "skipped"});
    CHECK(rows[1][0] == "0");
    CHECK(rows[1][1] == "0");
    CHECK(std::stod(rows[1][6]) == 0.5);
    CHECK(rows[1][8] == "0");
    // Q(i) = (-3 + i)/5
    CHECK(std::abs(std::stod(rows[2][2]) + 0.6) <= 1e-15);
    CHECK(std::abs(std::stod(rows[2][4]) - 0.2) <= 1e-15);
    for (std::size_t k = 3; k < rows.size(); ++k) {
        CHECK(std::stod(rows[k][1]) == 0.0);
        CHECK(std::abs(std::stod(rows[k][4])) <= 1e-12);
        CHECK(std::abs(std::stod(rows[k][5])) <= 1e-12);
    }
}

TEST_CASE("dtn-sweep marks skipped rows", "[driver][sweep]") {
    RunConfig cfg = toy_config();
    cfg.points = {Complex(2.0, 0.0)};
    const CommandOutcome out = evaluate_command(Command::dtn_sweep, cfg, 1);
    const auto rows = parse_csv(out.body);
    REQUIRE(rows.size() == 2);
    CHECK(rows[1][2] == "nan");
    CHECK(rows[1][8] == "1");
    CHECK(out.skipped == 1);
}

TEST_CASE("dtn-sweep Nevanlinna columns on the Laplacian", "[driver][sweep]") {
    RunConfig cfg = parse_config_text("preset = laplacian\nlambda.real.count = 6\n");
    const CommandOutcome out = evaluate_command(Command::dtn_sweep, cfg, 2);
    CHECK(out.exit_code == kExitOk);
    const auto rows = parse_csv(out.body);
    REQUIRE(rows.size() == 1 + 4 + 21 * 11 + 6);
    for (std::size_t k = 1; k < rows.size(); ++k) {
        const double im = std::stod(rows[k][1]);
        if (im > 0.0) CHECK(std::stod(rows[k][4]) >= -1e-12);
        if (im == 0.0) CHECK(std::abs(std::stod(rows[k][4])) <= 1e-12);
    }
}

TEST_CASE("outputs are deterministic and independent of the thread count", "[driver][determinism]") {
    RunConfig cfg = parse_config_text("preset = anisotropic\nlambda.sweep.re_count = 7\nlambda.sweep.im_count = 4\n");
    for (Command c : {Command::dtn_sweep, Command::verify}) {
        const std::string serial = evaluate_command(c, cfg, 0).body;
        CHECK(evaluate_command(c, cfg, 1).body == serial);
        CHECK(evaluate_command(c, cfg, 3).body == serial);
    }
    RunConfig rnd = parse_config_text("model = random\nrandom.interior = 12\nrandom.boundary = 3\nseed = 77\n");
    CHECK(evaluate_command(Command::dtn_sweep, rnd, 2).body == evaluate_command(Command::dtn_sweep, rnd, 2).body);
    rnd.seed = 78;
    const std::string other = evaluate_command(Command::dtn_sweep, rnd, 2).body;
    rnd.seed = 77;
    CHECK(other != evaluate_command(Command::dtn_sweep, rnd, 2).body);
}

TEST_CASE("characterize", "[driver][characterize]") {
    RunConfig cfg = parse_config_text("model = random\nrandom.interior = 20\nrandom.boundary = 4\nseed = 3\n");
    const CommandOutcome out = evaluate_command(Command::characterize, cfg, 1);
    CHECK(out.exit_code == kExitOk);
    CHECK(out.file_name == "characterization.json");
    const Json r = Json::parse(out.body);
    CHECK(r["beta"]["min_singular_value"].get<double>() > 0.0);
    CHECK(r["beta"]["injective"].get<bool>());
    CHECK(r["gamma"]["norm_over_eta_strictly_decreasing"].get<bool>());
    const auto seq = r["gamma"]["norm_over_eta"].get<std::vector<double>>();
    REQUIRE(seq.size() == 3);
    CHECK(seq[0] > seq[1]);
    CHECK(seq[1] > seq[2]);
    CHECK(r["simplicity"]["rank"].get<int>() == 20);
    for (const Json& a : r["alpha"]["points"]) CHECK(a["residual"].get<double>() <= 1e-9);

    SplitMix64 rng(11);
    const PartitionedHermitian dec = decoupled_model(rng, 10, 3, 4);
    const Json d = Json::parse(run_characterize(cfg, dec).body);
    CHECK(d["simplicity"]["rank"].get<int>() < 10);
    CHECK_FALSE(d["simplicity"]["simple"].get<bool>());
}

TEST_CASE("couple-verify", "[driver][coupled]") {
    RunConfig path = parse_config_text("preset = path3\nlambda.points = 0, 0:1\nlambda.sweep = false\n");
    const CommandOutcome p = evaluate_command(Command::couple_verify, path, 1);
    CHECK(p.exit_code == kExitOk);
    const Json r = Json::parse(p.body);
    CHECK(r["site"] == "coupled");
    const Json& k0 = r["krein"][0];
    CHECK(k0["site"] == "coupled");
    CHECK(std::abs(k0["trace"]["lhs_re"].get<double>() + 0.5) <= 1e-14);
    CHECK(std::abs(k0["trace"]["rhs_re"].get<double>() + 0.5) <= 1e-14);
    CHECK(r["interlacing"]["bracketing_asserted"].get<bool>());

    RunConfig grid = parse_config_text("preset = coupled\nlambda.sweep.re_count = 4\nlambda.sweep.im_count = 2\n");
    const CommandOutcome g = evaluate_command(Command::couple_verify, grid, 2);
    CHECK(g.exit_code == kExitOk);
    CHECK(g.failures == 0);
    CHECK(Json::parse(g.body)["summary"]["flux_jump"]["worst"].get<double>() <= 1e-12);

    RunConfig sized = parse_config_text("grid.inner_nodes = 4\ngrid.far_factor = 1\nlambda.sweep = false\n");
    const CommandOutcome s = evaluate_command(Command::couple_verify, sized, 1);
    CHECK(Json::parse(s.body)["model"]["grid"]["nx"].get<int>() == 10);
    CHECK(s.exit_code == kExitOk);
}

TEST_CASE("execute writes a single file", "[driver][exit]") {
    const fs::path dir = scratch("write");
    RunConfig cfg = toy_config();
    cfg.out_dir = (dir / "nested").string();
    std::ostringstream log, err;
    CHECK(execute(Command::dtn_sweep, cfg, log, err) == kExitOk);
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir / "nested")) names.push_back(e.path().filename().string());
    CHECK(names == std::vector<std::string>{"dtn_sweep.csv"});
    CHECK(log.str().find("dtn_sweep.csv") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("thread budget from the environment", "[driver][threads]") {
    ::setenv("DTN_KREIN_THREADS", "0", 1);
    CHECK(thread_budget() == 0);
    ::setenv("DTN_KREIN_THREADS", "3", 1);
    CHECK(thread_budget() == 3);
    ::setenv("DTN_KREIN_THREADS", "-1", 1);
    CHECK_THROWS_AS(thread_budget(), ConfigError);
    ::setenv("DTN_KREIN_THREADS", "two", 1);
    CHECK_THROWS_AS(thread_budget(), ConfigError);
    ::unsetenv("DTN_KREIN_THREADS");
    CHECK(thread_budget() >= 1);
}

TEST_CASE("parallel_map keeps sample order", "[driver][threads]") {
    for (unsigned t : {0u, 1u, 4u, 64u}) {
        const auto v = parallel_map(100, t, [](std::size_t k) { return static_cast<int>(k * k); });
        REQUIRE(v.size() == 100);
        for (std::size_t k = 0; k < v.size(); ++k) CHECK(v[k] == static_cast<int>(k * k));
    }
    CHECK_THROWS_AS(parallel_map(10, 3,
                                 [](std::size_t k) -> int {
                                     if (k == 7) throw std::runtime_error("boom");
                                     return 0;
                                 }),
                    std::runtime_error);
}

TEST_CASE("number formatting round-trips", "[driver][format]") {
    SplitMix64 rng(2);
    for (int k = 0; k < 200; ++k) {
        const double v = rng.uniform(-1e6, 1e6) * std::pow(10.0, static_cast<int>(rng.uniform(-30, 30)));
        CHECK(std::stod(format_g17(v)) == v);
    }
    CHECK(format_g17(0.5) == "0.5");
    CHECK(format_g17(0.1) == "0.10000000000000001");
    CHECK(format_g17(-1e-300) == "-1e-300");
    CHECK(format_g17(std::numeric_limits<double>::quiet_NaN()) == "nan");
    CHECK(hash_hex(0) == "0x0000000000000000");
    CHECK(hash_hex(0xabcULL) == "0x0000000000000abc");
}

TEST_CASE("sample points", "[driver]") {
    RunConfig cfg;
    cfg.points = {Complex(5.0, 5.0)};
    cfg.sweep = SweepRect{0.0, 1.0, 2, 1.0, 2.0, 3};
    cfg.real_sweep = RealSweep{2, 0.25, 1.0};
    const auto pts = sample_points(cfg, 3.0);
    REQUIRE(pts.size() == 1 + 6 + 2);
    CHECK(pts[0] == Complex(5.0, 5.0));
    CHECK(pts[1] == Complex(0.0, 1.0));
    CHECK(pts[2] == Complex(1.0, 1.0));
    CHECK(pts[3] == Complex(0.0, 1.5));
    CHECK(pts[6] == Complex(1.0, 2.0));
    CHECK(pts[7] == Complex(2.75, 0.0));
    CHECK(pts[8] == Complex(1.75, 0.0));
}
