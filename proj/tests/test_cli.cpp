// Copyright 2026 The optofluid Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <unistd.h>

#include "optofluid/cli/app.hpp"

namespace {

using namespace optofluid;
using namespace optofluid::cli;
namespace fs = std::filesystem;

const fs::path samples = OPTOFLUID_SAMPLES_DIR;

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("optofluid_test_cli_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    return p;
}

fs::path write_cfg(const std::string& name, const std::string& text)
{
    const fs::path dir = scratch("cfg");
    fs::create_directories(dir.parent_path());
    fs::create_directories(dir.parent_path() / "cfgs");
    const fs::path p = dir.parent_path() / "cfgs" / name;
    std::ofstream(p) << text;
    return p;
}

struct Invocation {
    int code;
    std::string out, err;
};

Invocation invoke(std::vector<std::string> args)
{
    std::ostringstream o, e;
    const int code = main_entry(std::move(args), o, e);
    return {code, o.str(), e.str()};
}

json read_json(const fs::path& p)
{
    std::ifstream f(p);
    return json::parse(f);
}

std::string slurp(const fs::path& p)
{
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

const char* minimal_rdr = R"(stage = rdr
[rdr]
omega_i = 1
gamma_i = 1e-5
kappa_prime = 0.2
G = 0.08
Delta_bar = -1
)";

// ---------------------------------------------------------------- parsing

TEST(ParseConfig, EmptyStageFieldIsRejected)
{
    Config c = parse_config("stage =\n[rdr]\nomega_i = 1\n");
    try {
        c.stage();
        FAIL() << "no error";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("stage required"), std::string::npos) << e.what();
    }
    Config d = parse_config("[rdr]\nomega_i = 1\n");
    EXPECT_THROW(d.stage(), ConfigError);
}

TEST(ParseConfig, GrammarSectionsArraysCommentsStrings)
{
    Config d = parse_config(R"(
; semicolon comment
stage = "kernel"
[kernel]
omega_m = 2*pi  # trailing comment
list = [1, 2.5, 3e-1]
label = "a # b"
grid.nx = 8
)");
    EXPECT_EQ(d.stage(), "kernel");
    EXPECT_DOUBLE_EQ(d.number("kernel.omega_m", Dim::frequency), 2.0 * pi);
    EXPECT_EQ(d.numbers("kernel.list", Dim::none), (std::vector<double>{1.0, 2.5, 0.3}));
    EXPECT_EQ(d.text("kernel.label"), "a # b");
    EXPECT_EQ(d.count("grid.nx"), 8u);   // dotted key inside a section is absolute
    EXPECT_NO_THROW(d.require_all_used());
}

TEST(ParseConfig, DuplicateAndMalformedLinesCarryLineNumbers)
{
    auto line_of_error = [](const std::string& text) {
        try {
            parse_config(text);
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    EXPECT_NE(line_of_error("stage = rdr\n[rdr]\nomega_i = 1\nomega_i = 2\n").find("line 4"), std::string::npos);
    EXPECT_NE(line_of_error("stage = rdr\n[rdr\n").find("line 2"), std::string::npos);
    EXPECT_NE(line_of_error("stage = rdr\njust text\n").find("line 2"), std::string::npos);
    EXPECT_NE(line_of_error("a = \"open\n").find("line 1"), std::string::npos);
}

TEST(ParseConfig, UnknownKeyIsRejectedWithItsLine)
{
    const std::string text = std::string(minimal_rdr) + "omega_ii = 3\n";
    Config c = parse_config(text);
    EXPECT_EQ(c.stage(), "rdr");
    (void)read_rdr(c);
    try {
        c.require_all_used();
        FAIL() << "no error";
    } catch (const ConfigError& e) {
        const std::string w = e.what();
        EXPECT_NE(w.find("line 8"), std::string::npos) << w;
        EXPECT_NE(w.find("rdr.omega_ii"), std::string::npos) << w;
    }
    // Same through the CLI: exit code 2, and nothing but a failed manifest.
    const auto out = scratch("unknown");
    const auto r = invoke({"rdr", "--config", write_cfg("unknown.cfg", text).string(), "--out", out.string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("line 8"), std::string::npos) << r.err;
    EXPECT_EQ(read_json(out / "manifest.json")["status"], "failed");
    EXPECT_FALSE(fs::exists(out / "rdr.json"));
}

TEST(ParseConfig, MissingRequiredKeyIsAConfigError)
{
    Config c = parse_config("stage = rdr\n[rdr]\nomega_i = 1\ngamma_i = 0\n");
    try {
        read_rdr(c);
        FAIL() << "no error";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("rdr.kappa_prime"), std::string::npos) << e.what();
    }
}

TEST(ParseConfig, UnitMismatchIsRejectedWithItsLine)
{
    // A unit in natural mode.
    Config a = parse_config("stage = rdr\n[rdr]\nomega_i = 1 rad/s\n");
    try {
        a.number("rdr.omega_i", Dim::frequency);
        FAIL() << "no error";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("unit mismatch"), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
    // The wrong unit in SI mode.
    Config b = parse_config("stage = rdr\nunits = SI\n[rdr]\nomega_i = 1 m/s\n");
    try {
        b.number("rdr.omega_i", Dim::frequency);
        FAIL() << "no error";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("unit mismatch"), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
    }
    // Temperature always needs kelvin, even in natural mode.
    Config t = parse_config("stage = rdr\n[rdr]\ntemperature = 300 K\n");
    EXPECT_DOUBLE_EQ(t.number("rdr.temperature", Dim::temperature), 300.0);
    EXPECT_THROW(parse_config("units = imperial\n"), ConfigError);
}

TEST(ParseConfig, SiRoundTripIsLossless)
{
    const double w = 2.0 * pi * 10e6;
    Config c = parse_config("stage = rdr\nunits = SI\nunits.frequency_scale = 2*pi*10e6 rad/s\n"
                            "units.length_scale = 1e-6 m\n[rdr]\nomega_i = 2*pi*10e6 rad/s\n");
    const double nat = c.number("rdr.omega_i", Dim::frequency);
    EXPECT_NEAR(nat, 1.0, 1e-15);
    EXPECT_LE(std::abs(c.scale().to_si(nat, Dim::frequency) - w) / w, 1e-12);

    const UnitScale s = c.scale();
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> e(-30.0, 30.0);
    for (Dim d : {Dim::none, Dim::frequency, Dim::time, Dim::length, Dim::mass, Dim::coupling, Dim::velocity,
                  Dim::density, Dim::wavenumber, Dim::circulation, Dim::flux})
        for (int i = 0; i < 200; ++i) {
            const double v = std::pow(10.0, e(rng));
            EXPECT_LE(std::abs(s.to_si(s.to_natural(v, d), d) - v) / v, 1e-12);
            EXPECT_LE(std::abs(s.to_natural(s.to_si(v, d), d) - v) / v, 1e-12);
        }
    // hbar omega_0 is the energy unit, so a mass of hbar / (omega_0 l_0^2) is 1.
    EXPECT_NEAR(s.to_natural(si::hbar / (w * 1e-12), Dim::mass), 1.0, 1e-12);
}

TEST(ParseConfig, DefaultsAreEchoedExplicitly)
{
    Config c = parse_config(minimal_rdr);
    EXPECT_EQ(c.stage(), "rdr");
    (void)read_rdr(c);
    c.require_all_used();
    const json& e = c.echo();
    EXPECT_EQ(e["stage"], "rdr");
    EXPECT_EQ(e["units"], "natural");
    EXPECT_DOUBLE_EQ(e["rdr.kappa"].get<double>(), 0.0);
    EXPECT_DOUBLE_EQ(e["rdr.n_th"].get<double>(), 0.0);
    EXPECT_DOUBLE_EQ(e["rdr.G0"].get<double>(), 0.0);
    EXPECT_DOUBLE_EQ(e["rdr.omega_i"].get<double>(), 1.0);
    EXPECT_DOUBLE_EQ(e["rdr.G"].get<double>(), 0.08);
}

TEST(ParseConfig, OverridesReplaceValuesAndDefaultToASection)
{
    Config c = parse_config("stage = kernel\n[kernel]\nomega_m = 1\ngamma = 2\n");
    c.apply_overrides("gamma=5, kernel.g = 0.3", "kernel");
    EXPECT_DOUBLE_EQ(c.number("kernel.gamma", Dim::frequency), 5.0);
    EXPECT_DOUBLE_EQ(c.number("kernel.g", Dim::frequency), 0.3);
    EXPECT_THROW(c.apply_overrides("novalue", "kernel"), ConfigError);
}

// ---------------------------------------------------------------- runs

void expect_manifest_complete(const fs::path& out)
{
    const json m = read_json(out / "manifest.json");
    std::set<std::string> listed;
    for (const auto& a : m["artifacts"]) {
        const std::string path = a["path"];
        listed.insert(path);
        ASSERT_TRUE(fs::exists(out / path)) << path;
        EXPECT_EQ(sha256_file(out / path), a["sha256"].get<std::string>()) << path;
        EXPECT_EQ(fs::file_size(out / path), a["bytes"].get<std::size_t>()) << path;
    }
    for (const auto& f : fs::directory_iterator(out)) {
        const std::string name = f.path().filename().string();
        if (name != "manifest.json") {
            EXPECT_TRUE(listed.count(name)) << "unlisted file " << name;
        }
    }
    EXPECT_EQ(m["tool"], "optofluid");
    EXPECT_EQ(m["config_hash"].get<std::string>().size(), 64u);
    EXPECT_TRUE(m.contains("started"));
    EXPECT_TRUE(m.contains("finished"));
}

TEST(Run, RdrSampleWritesSummarySweepAndVerifiableManifest)
{
    const auto out = scratch("rdr");
    const auto r = invoke({"rdr", "--config", (samples / "rdr.cfg").string(), "--out", out.string(), "--sweep",
                           "G:0.01:0.3:12", "--threads", "3"});
    ASSERT_EQ(r.code, 0) << r.err;
    expect_manifest_complete(out);
    const json j = read_json(out / "rdr.json");
    EXPECT_NEAR(j["gamma_total"].get<double>(), 0.1277, 1e-3);
    EXPECT_LT(std::abs(j["n_f"].get<double>() - 49.0) / 49.0, 0.05);
    // Sweep rows are ordered and the G = 0.08 neighbourhood brackets n_f.
    std::istringstream csv(slurp(out / "rdr_sweep.csv"));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, "G,omega,gamma_opt,omega_opt,n_f,stable");
    int rows = 0;
    double prev = -1.0;
    while (std::getline(csv, line)) {
        const double g = std::stod(line.substr(0, line.find(',')));
        EXPECT_GT(g, prev);
        prev = g;
        ++rows;
    }
    EXPECT_EQ(rows, 12);
    // Threads do not change the numbers.
    const auto out1 = scratch("rdr1");
    ASSERT_EQ(invoke({"rdr", "--config", (samples / "rdr.cfg").string(), "--out", out1.string(), "--sweep",
                      "G:0.01:0.3:12", "--threads", "1"})
                  .code,
              0);
    EXPECT_EQ(slurp(out / "rdr_sweep.csv"), slurp(out1 / "rdr_sweep.csv"));
}

TEST(Run, RdrTemperatureInSiModeUsesTheBoseOccupancy)
{
    const auto out = scratch("rdr_si");
    const auto r = invoke({"rdr", "--config", (samples / "rdr_si.cfg").string(), "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const json j = read_json(out / "rdr.json");
    EXPECT_LT(std::abs(j["n_th"].get<double>() - 6.3e5) / 6.3e5, 0.02);
    EXPECT_NEAR(j["gamma_total"].get<double>(), 0.1277, 1e-3);
}

TEST(Run, UnstableOperatingPointIsGated)
{
    const std::string text = "stage = rdr\n[rdr]\nomega_i = 1\ngamma_i = 1e-5\nkappa_prime = 0.2\nG = 0.08\nDelta_bar = 1\n";
    const auto out = scratch("unstable");
    const auto r = invoke({"rdr", "--config", write_cfg("unstable.cfg", text).string(), "--out", out.string()});
    EXPECT_EQ(r.code, 4);
    const json m = read_json(out / "manifest.json");
    EXPECT_EQ(m["status"], "gated");
    EXPECT_EQ(m["stages"][0]["status"], "gated");
    expect_manifest_complete(out);
}

TEST(Run, KernelWithoutConfigFileTakesParams)
{
    const auto out = scratch("kernel");
    const auto r = invoke({"kernel", "--params", "omega_m=1,gamma=10,g=0.1", "--sweep-gamma", "1,3,10,30", "--out",
                           out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    expect_manifest_complete(out);
    const json j = read_json(out / "kernel.json");
    EXPECT_NEAR(j["T_inf"].get<double>(), 1.0 / 26.0, 1e-15);
    EXPECT_NEAR(j["G"].get<double>(), -2.0 * 0.01 / 26.0, 1e-15);
    EXPECT_LE(j["err_norm"].get<double>(), 0.02);
    EXPECT_TRUE(fs::exists(out / "kernel_sweep.csv"));
    EXPECT_TRUE(fs::exists(out / "kernel_t.csv"));
}

TEST(Run, StiffStepExitsWithNumericalFailureUnlessForced)
{
    const std::string text = "stage = nlse\n[grid]\nnx = 32\nny = 32\ndx = 0.1\n[nlse]\nm = 1\nG = 1\n"
                             "density = 1\ndt = 0.05\nsteps = 2\n";
    const auto cfg = write_cfg("stiff.cfg", text);
    const auto out = scratch("stiff");
    const auto r = invoke({"nlse", "--config", cfg.string(), "--out", out.string()});
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("dt too large"), std::string::npos) << r.err;
    EXPECT_EQ(read_json(out / "manifest.json")["status"], "failed");
    const auto out2 = scratch("stiff_forced");
    EXPECT_EQ(invoke({"nlse", "--config", cfg.string(), "--out", out2.string(), "--force"}).code, 0);
}

TEST(Run, StageMismatchAndBadFlagsAreConfigErrors)
{
    const auto cfg = write_cfg("rdr_only.cfg", minimal_rdr);
    EXPECT_EQ(invoke({"kernel", "--config", cfg.string(), "--out", scratch("mm").string()}).code, 2);
    EXPECT_EQ(invoke({"rdr", "--config", cfg.string(), "--sweep", "G:1:2", "--out", scratch("sw").string()}).code, 2);
    EXPECT_EQ(invoke({"rdr", "--config", cfg.string(), "--sweep", "bogus:1:2:3", "--out", scratch("sw").string()}).code, 2);
    EXPECT_EQ(invoke({"rdr", "--config", (scratch("x") / "missing.cfg").string()}).code, 2);
    EXPECT_EQ(invoke({"rdr"}).code, 2);
    EXPECT_EQ(invoke({"frobnicate"}).code, 2);
}

TEST(Run, DeterministicRerunsAreByteIdentical)
{
    const auto a = scratch("det_a"), b = scratch("det_b");
    for (const auto& out : {a, b}) {
        const auto r = invoke({"nlse", "--config", (samples / "nlse.cfg").string(), "--out", out.string(), "--seed",
                               "42", "--set", "nlse.steps=200", "--snapshot-every", "100"});
        ASSERT_EQ(r.code, 0) << r.err;
    }
    int compared = 0;
    for (const auto& f : fs::directory_iterator(a)) {
        const std::string name = f.path().filename().string();
        if (name == "manifest.json") continue;
        EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
        ++compared;
    }
    EXPECT_GE(compared, 8);
    // A different seed changes the noisy initial state.
    const auto c = scratch("det_c");
    ASSERT_EQ(invoke({"nlse", "--config", (samples / "nlse.cfg").string(), "--out", c.string(), "--seed", "43",
                      "--set", "nlse.steps=200"})
                  .code,
              0);
    EXPECT_NE(slurp(a / "nlse_initial.pfld"), slurp(c / "nlse_initial.pfld"));
    const json ma = read_json(a / "manifest.json"), mb = read_json(b / "manifest.json");
    EXPECT_EQ(ma["config_hash"], mb["config_hash"]);
    EXPECT_EQ(ma["artifacts"], mb["artifacts"]);
}

TEST(Run, FieldOutputsReadBackWithSidecars)
{
    const auto out = scratch("fields");
    ASSERT_EQ(invoke({"nlse", "--config", (samples / "nlse.cfg").string(), "--out", out.string(), "--set",
                      "nlse.steps=10"})
                  .code,
              0);
    const ComplexField2D f = read_field(out / "nlse_final.pfld");
    EXPECT_EQ(f.nx(), 64u);
    EXPECT_EQ(fs::file_size(out / "nlse_final.pfld"), 64u + 64u * 64u * 16u);
    const json sc = read_json(out / "nlse_final.pfld.json");
    EXPECT_EQ(sc["nx"], 64);
    EXPECT_DOUBLE_EQ(sc["dx"].get<double>(), 0.25);
    EXPECT_NEAR(norm(f), 100.0, 0.1);
}

TEST(Run, MetricOfSinkFindsOneHorizonLoop)
{
    const auto out = scratch("sink");
    const auto r = invoke({"metric", "--config", (samples / "metric_sink.cfg").string(), "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    expect_manifest_complete(out);
    const json hz = read_json(out / "horizons.json");
    ASSERT_EQ(hz.size(), 1u);
    EXPECT_TRUE(hz[0]["closed"].get<bool>());
    for (const auto& p : hz[0]["points"]) EXPECT_NEAR(std::hypot(p[0].get<double>(), p[1].get<double>()), 2.0, 0.032);
    const json m = read_json(out / "metric.json");
    EXPECT_EQ(m["signature_counts"]["lorentzian"], 256 * 256);
}

TEST(Run, MetricOfEuclideanBackgroundSkipsHorizons)
{
    const std::string text = "stage = metric\n[grid]\nnx = 16\nny = 16\ndx = 1\n[metric]\nbackground = uniform_flow\n"
                             "m = 1\nG = -1\ndensity = 1\nflow = 0\n";
    const auto out = scratch("euclid_metric");
    const auto r = invoke({"metric", "--config", write_cfg("euclid.cfg", text).string(), "--out", out.string()});
    EXPECT_EQ(r.code, 4);
    const json m = read_json(out / "metric.json");
    EXPECT_TRUE(m["horizons"].is_null());
    EXPECT_FALSE(fs::exists(out / "horizons.json"));
    expect_manifest_complete(out);
}

TEST(Run, MetricFromFieldFileReportsVortices)
{
    const auto dir = scratch("vortex");
    fs::create_directories(dir);
    ComplexField2D psi(64, 64, 0.5, 0.5);
    psi.fill_with([](double x, double y) {
        const double r = std::hypot(x - 0.25, y - 0.25);
        return std::polar(std::tanh(r), std::atan2(y - 0.25, x - 0.25));
    });
    write_field(dir / "vortex.pfld", psi);
    const std::string text = "stage = metric\n[metric]\nbackground = file\nfile = \"" + (dir / "vortex.pfld").string() +
                             "\"\nm = 1\nG = 1\n";
    const auto out = dir / "out";
    const auto r = invoke({"metric", "--config", write_cfg("vortex.cfg", text).string(), "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const json m = read_json(out / "metric.json");
    int plus = 0;
    for (const auto& v : m["vortices"]) plus += v["charge"].get<int>() == 1;
    EXPECT_GE(plus, 1);
}

TEST(Run, KgPulseConservesEnergyAndStopsAtTheHorizon)
{
    const auto out = scratch("kg");
    const auto r = invoke({"kg", "--config", (samples / "kg_step.cfg").string(), "--out", out.string(), "--set",
                           "kg.steps=1200"});
    ASSERT_EQ(r.code, 0) << r.err;
    expect_manifest_complete(out);
    std::istringstream csv(slurp(out / "kg_series.csv"));
    std::string line;
    std::getline(csv, line);
    double e0 = NAN, xmin = 1e300, emax_dev = 0.0;
    while (std::getline(csv, line)) {
        std::istringstream l(line);
        std::string t, e, x;
        std::getline(l, t, ',');
        std::getline(l, e, ',');
        std::getline(l, x, ',');
        if (std::isnan(e0)) e0 = std::stod(e);
        emax_dev = std::max(emax_dev, std::abs(std::stod(e) - e0) / std::abs(e0));
        xmin = std::min(xmin, std::stod(x));
    }
    EXPECT_LE(emax_dev, 1e-8);
    // The horizon of n = 1 + 0.5 tanh(x/2), n v = 0.8 sits where n^(3/2) = 0.8.
    const double xh = 2.0 * std::atanh((std::pow(0.8, 2.0 / 3.0) - 1.0) / 0.5);
    EXPECT_GT(xmin, xh - 1.0);
}

TEST(Run, KgCrosscheckOnUniformFlow)
{
    const std::string text = "stage = kg\n[grid]\nnx = 256\nny = 1\ndx = 0.2454369260617026\n"
                             "[metric]\nbackground = uniform_flow\nm = 1\nG = 1\ndensity = 1\nflow = 0.5\n"
                             "[kg]\ninitial = mode\nk = 0.1\namplitude = 1e-3\nsteps = 10\ncrosscheck = true\nk_xi = 0.1\n";
    const auto out = scratch("kgcc");
    const auto r = invoke({"kg", "--config", write_cfg("kgcc.cfg", text).string(), "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const json j = read_json(out / "kg.json");
    EXPECT_LE(j["crosscheck"]["deviation"].get<double>(), 0.05);
    EXPECT_NEAR(j["crosscheck"]["k_xi"].get<double>(), 0.1, 1e-12);
}

TEST(Pipeline, ReferenceParametersGateOnTheEuclideanMicrocavity)
{
    const auto out = scratch("pipe_microcavity");
    const auto r = invoke({"pipeline", "--config", (samples / "pipeline_microcavity.cfg").string(), "--out", out.string()});
    EXPECT_EQ(r.code, 4) << r.err;
    expect_manifest_complete(out);
    const json m = read_json(out / "manifest.json");
    EXPECT_EQ(m["status"], "gated");
    const json& d = m["derived"];
    EXPECT_NEAR(d["gamma_total"].get<double>(), 0.128, 1e-3);
    EXPECT_LT(std::abs(d["n_f"].get<double>() - 49.0) / 49.0, 0.05);
    EXPECT_GT(d["m"].get<double>(), 0.0);
    EXPECT_LT(d["G"].get<double>(), 0.0);
    EXPECT_EQ(d["signature"]["euclidean"], 64 * 64);
    std::map<std::string, json> st;
    for (const auto& s : m["stages"]) st[s["stage"]] = s;
    EXPECT_EQ(st["metric"]["status"], "ok");
    EXPECT_NE(st["metric"]["reason"].get<std::string>().find("Euclidean everywhere"), std::string::npos);
    EXPECT_EQ(st["kg"]["status"], "skipped");
    EXPECT_FALSE(st["kg"]["reason"].get<std::string>().empty());
    EXPECT_FALSE(fs::exists(out / "kg_crosscheck.csv"));
}

TEST(Pipeline, ForcedRepulsiveCouplingOnMicrocavityIsLorentzian)
{
    // G m > 0 restores a Lorentzian metric and the run proceeds to kg. The
    // coupling is chosen so that xi is about one micron.
    const auto out = scratch("pipe_forced");
    const auto r = invoke({"pipeline", "--config", (samples / "pipeline_microcavity.cfg").string(), "--out", out.string(),
                           "--set", "pipeline.force_G=2.5e-35 J*m^2,pipeline.k_xi=0.2"});
    ASSERT_EQ(r.code, 0) << r.err;
    const json m = read_json(out / "manifest.json");
    EXPECT_EQ(m["derived"]["signature"]["lorentzian"], 64 * 64);
    EXPECT_NEAR(m["derived"]["xi"].get<double>(), 1.0, 0.01);
    EXPECT_LE(m["derived"]["crosscheck"]["deviation"].get<double>(), 0.05);
}

TEST(Pipeline, ArrayRunsEveryStage)
{
    const auto out = scratch("pipe_array");
    const auto r = invoke({"pipeline", "--config", (samples / "pipeline_array.cfg").string(), "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    expect_manifest_complete(out);
    const json m = read_json(out / "manifest.json");
    EXPECT_EQ(m["status"], "ok");
    for (const auto& s : m["stages"]) EXPECT_EQ(s["status"], "ok") << s.dump();
    const json& d = m["derived"];
    EXPECT_DOUBLE_EQ(d["m"].get<double>(), -5.0);
    EXPECT_LT(d["G"].get<double>(), 0.0);
    const double c = d["c_ex"].get<double>();
    EXPECT_NEAR(c * c, 250.0 * d["G"].get<double>() / -5.0, 1e-15);
    EXPECT_NEAR(d["xi"].get<double>(), 1.0 / (5.0 * c), 1e-12);
    EXPECT_LE(d["crosscheck"]["deviation"].get<double>(), 0.05);
}

}  // namespace
