/* Copyright 2026 The optofluid Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "optofluid/cli/config.hpp"
#include "optofluid/cli/manifest.hpp"
#include "optofluid/cli/stages.hpp"

namespace optofluid::cli {

enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_numerical = 3, exit_gated = 4 };

/// Runs one stage from an already-parsed Config. Errors after the output
/// directory exists leave a manifest with status "failed".
inline int execute(Config& cfg, const std::string& stage, Options opt, std::ostream& err)
{
    std::optional<Run> run;
    auto fail = [&](int code, const std::string& status, const std::string& what) {
        err << "optofluid " << stage << ": " << what << "\n";
        if (run) {
            try {
                run->finish(status, what);
            } catch (const std::exception& e) {
                err << "optofluid: could not write manifest: " << e.what() << "\n";
            }
        }
        return code;
    };
    try {
        if (!cfg.has("stage")) cfg.apply_overrides("stage=" + stage, "");
        if (cfg.stage() != stage)
            throw ConfigError(cfg.line_of("stage"), "config is for stage '" + cfg.stage() + "', not '" + stage + "'");
        if (cfg.has("seed")) {
            const long long s = cfg.integer("seed");
            if (s < 0) throw ConfigError(cfg.line_of("seed"), "seed must be >= 0");
            if (!opt.seed_given) opt.seed = static_cast<std::uint64_t>(s);
        }
        run.emplace(opt.out, stage, sha256_hex(cfg.canonical_text()), opt.seed, opt.threads);

        Outcome o = Outcome::ok;
        if (stage == "rdr") o = run_rdr(cfg, *run, opt);
        else if (stage == "kernel") o = run_kernel(cfg, *run, opt);
        else if (stage == "lattice") o = run_lattice(cfg, *run, opt);
        else if (stage == "nlse") o = run_nlse(cfg, *run, opt);
        else if (stage == "metric") o = run_metric(cfg, *run, opt);
        else if (stage == "kg") o = run_kg(cfg, *run, opt);
        else o = run_pipeline(cfg, *run, opt);

        run->write_json("config_echo.json", cfg.echo());
        if (o == Outcome::gated) {
            run->finish("gated");
            return exit_gated;
        }
        run->finish("ok");
        return exit_ok;
    } catch (const ConfigError& e) {
        return fail(exit_config, "failed", e.what());
    } catch (const DomainError& e) {
        return fail(exit_config, "failed", e.what());
    } catch (const PhysicsGateError& e) {
        if (run) run->stage_status(stage, "gated", e.what());
        return fail(exit_gated, "gated", e.what());
    } catch (const Error& e) {
        return fail(exit_numerical, "failed", e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        return fail(exit_numerical, "failed", e.what());
    }
}

/// Command-line entry point; `args` excludes the program name.
inline int main_entry(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"optofluid: optomechanical fluids of light and their acoustic metrics", "optofluid"};
    app.require_subcommand(1);
    std::string config_path, out_dir = "out", overrides, sweep, sweep_gamma;
    Options opt;
    std::size_t snapshot_every = 0;
    unsigned threads = 1;
    std::uint64_t seed = 0;
    bool force = false;

    const char* names[] = {"rdr", "kernel", "lattice", "nlse", "metric", "kg", "pipeline"};
    const char* help[] = {"resolved-sideband cooling: damping, frequency shift, phonon number",
                          "mechanical memory kernel and adiabatic elimination check",
                          "coupled cavity array and its continuum limit",
                          "optomechanical NLSE evolution",
                          "acoustic metric, signature and horizons of a background",
                          "Klein-Gordon phonons on a background metric",
                          "rdr, kernel, background, metric, horizon and kg crosscheck in sequence"};
    for (std::size_t i = 0; i < 7; ++i) {
        CLI::App* sc = app.add_subcommand(names[i], help[i]);
        if (std::string(names[i]) == "kernel") {
            sc->add_option("--config", config_path, "config file");
            sc->add_option("--params", overrides, "comma-separated key=value pairs for [kernel]");
            sc->add_option("--sweep-gamma", sweep_gamma, "comma-separated list of gamma values");
        } else {
            sc->add_option("--config", config_path, "config file")->required();
        }
        sc->add_option("--out", out_dir, "output directory")->capture_default_str();
        sc->add_option("--threads", threads, "worker cap")->capture_default_str()->check(CLI::PositiveNumber);
        sc->add_option("--seed", seed, "seed for random draws (overrides the config key)");
        sc->add_flag("--force", force, "run past stiffness and CFL checks");
        if (std::string(names[i]) == "rdr") sc->add_option("--sweep", sweep, "param:min:max:steps");
        if (std::string(names[i]) == "nlse" || std::string(names[i]) == "lattice")
            sc->add_option("--snapshot-every", snapshot_every, "steps between snapshots");
        if (std::string(names[i]) != "kernel" && std::string(names[i]) != "rdr")
            sc->add_option("--set", overrides, "comma-separated section.key=value overrides");
    }

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return exit_config;
    }
    const std::string stage = app.get_subcommands().front()->get_name();
    opt.out = out_dir;
    opt.threads = threads;
    opt.seed = seed;
    opt.seed_given = app.get_subcommands().front()->count("--seed") > 0;
    opt.force = force;
    opt.sweep = sweep;
    opt.snapshot_every = snapshot_every;

    Config cfg;
    try {
        if (!config_path.empty()) cfg = Config::load(config_path);
        if (!overrides.empty()) cfg.apply_overrides(overrides, stage == "kernel" ? "kernel" : "");
        if (!sweep_gamma.empty()) {
            std::string s = sweep_gamma;
            std::size_t start = 0;
            while (start <= s.size()) {
                auto c = s.find(',', start);
                if (c == std::string::npos) c = s.size();
                const auto v = detail::parse_number(detail::trim(std::string_view(s).substr(start, c - start)));
                if (!v || !(*v > 0.0)) throw ConfigError(0, "--sweep-gamma: bad value in '" + s + "'");
                opt.sweep_gamma.push_back(*v);
                start = c + 1;
            }
        }
    } catch (const ConfigError& e) {
        err << "optofluid " << stage << ": " << e.what() << "\n";
        return exit_config;
    }
    return execute(cfg, stage, opt, err);
}

}  // namespace optofluid::cli
