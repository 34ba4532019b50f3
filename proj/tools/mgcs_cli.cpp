// SPDX-License-Identifier: Apache-2.0
//
// mgcs - multichannel group-sparse channel estimation for doubly selective MIMO-OFDM
// Copyright (C) 2026 The mgcs authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mgcs/basisopt.hpp"
#include "mgcs/harness.hpp"
#include "mgcs/random.hpp"
#include "mgcs/recovery.hpp"
#include "mgcs/tensor_io.hpp"

namespace fs = std::filesystem;
using namespace mgcs;

namespace
{
    // Config file first, then every flag that mirrors a config key
    struct ConfigFlags
    {
        std::string path;
        std::map<std::string, std::string> values;

        void attach(CLI::App *app)
        {
            app->add_option("--config", path, "JSON configuration file")->check(CLI::ExistingFile);
            for (const auto &k : config_keys())
                app->add_option("--" + k, values[k], "configuration key " + k);
        }

        ExperimentConfig resolve(const CLI::App *app) const
        {
            ExperimentConfig cfg = path.empty() ? ExperimentConfig{} : load_config(path);
            for (const auto &[k, v] : values)
                if (app->count("--" + k) > 0)
                    set_config_value(cfg, k, v);
            return cfg;
        }
    };

    nlohmann::json read_json(const fs::path &p)
    {
        std::ifstream f(p);
        if (!f)
            throw FormatError("cannot open " + p.string());
        return nlohmann::json::parse(f);
    }

    void write_json(const nlohmann::json &j, const fs::path &p)
    {
        std::ofstream f(p);
        f << j.dump(2) << "\n";
        if (!f)
            throw FormatError("write to " + p.string() + " failed");
    }

    int simulate(const ExperimentConfig &exp, int trial, const fs::path &out)
    {
        exp.validate();
        const SystemConfig cfg = exp.system_at(0);
        const PilotScheme pilots = experiment_pilots(exp, cfg);
        const TrialData data = simulate_trial(exp, cfg, pilots, exp.snr_at(0), derive_seed(exp.seed, 1, std::uint64_t(trial)),
                                              derive_seed(exp.seed, 2, std::uint64_t(trial)));
        fs::create_directories(out);
        write_tensor(pack_grids(data.truth, cfg.n_rx, cfg.n_tx), out / "truth.mgct");
        write_tensor(pack_grids(data.received, cfg.n_rx, 1), out / "received.mgct");
        write_json({{"seed", exp.seed},
                    {"trial", trial},
                    {"snr_db", exp.snr_at(0)},
                    {"signal_power", data.signal_power},
                    {"noise_variance", data.noise_variance},
                    {"eps", data.eps}},
                   out / "meta.json");
        std::printf("wrote %s (signal power %.6g, noise variance %.6g)\n", out.string().c_str(), data.signal_power,
                    data.noise_variance);
        return 0;
    }

    int estimate(const ExperimentConfig &exp, const fs::path &in, const std::string &solver, const fs::path &out)
    {
        exp.validate();
        const SystemConfig cfg = exp.system_at(0);
        const nlohmann::json meta = read_json(in / "meta.json");
        if (meta.at("seed").get<std::uint64_t>() != exp.seed)
            throw ConfigError("the simulation used seed " + meta.at("seed").dump() + "; pass the same --seed");

        TrialData data;
        data.cfg = cfg;
        data.pilots = experiment_pilots(exp, cfg);
        data.received = unpack_grids(read_tensor(in / "received.mgct"));
        data.eps = meta.at("eps").get<double>();
        if (int(data.received.size()) != cfg.n_rx)
            throw ConfigError("received grids do not match system.n_rx");

        const EstimatorVariant v = parse_variant(solver);
        const BasisSpec basis = v.optimized_basis ? experiment_basis(exp, cfg, exp.block_dm) : BasisSpec::dft(cfg.D, cfg.J);
        const ChannelEstimate est = run_estimator(v, data, exp, {exp.block_dm, exp.block_di}, basis);
        write_tensor(pack_grids(est.H, cfg.n_rx, cfg.n_tx), out);
        std::printf("wrote %s (%zu groups selected, %zu iterations)\n", out.string().c_str(),
                    est.diagnostics.selected_groups.size(), est.diagnostics.iterations);
        if (fs::exists(in / "truth.mgct"))
        {
            const auto truth = unpack_grids(read_tensor(in / "truth.mgct"));
            std::printf("rmse %.6g\nnormalized_mse_db %.6g\n", rmse(est.H, truth),
                        10.0 * std::log10(normalized_mse(est.H, truth)));
        }
        return 0;
    }

    int optimize_basis(const ExperimentConfig &exp, const fs::path &out)
    {
        exp.validate();
        const SystemConfig cfg = exp.system_at(0);
        const PulsePair pulses = cp_ofdm_pulses(cfg.K, cfg.N);
        const OptimizeResult r = optimize_experiment_basis(exp, cfg, exp.block_dm);
        save_basis({r.basis, exp.block_dm, basis_fingerprint(cfg, pulses.id, experiment_prior(exp, cfg).hash())}, out);
        int accepted = 0;
        for (const auto &s : r.strips)
            accepted += s.accepted;
        std::printf("objective %.9g -> %.9g (%d accepted updates)\nwrote %s\n", r.initial_objective, r.final_objective,
                    accepted, out.string().c_str());
        return 0;
    }

    int sweep(const ExperimentConfig &exp, const fs::path &out)
    {
        const ResultTable t = run_sweep(exp);
        if (t.rows.empty())
        {
            std::printf("no trials requested\n");
            return 0;
        }
        emit_results(t, out);
        std::fputs(format_results(t).c_str(), stdout);
        for (const auto &r : t.rows)
            if (r.failures > 0)
                std::fprintf(stderr, "%s/%s: %d failed trials\n", r.axis.c_str(), r.solver.c_str(), r.failures);
        return 0;
    }

    int certify(const fs::path &phi_path, std::size_t group_size, std::size_t S, std::size_t budget)
    {
        const CMat phi = unpack_matrix(read_tensor(phi_path));
        if (group_size == 0 || std::size_t(phi.cols()) % group_size != 0)
            throw ConfigError("the group size must divide the column count");
        const Partition P = Partition::uniform(std::size_t(phi.cols()), group_size);
        std::printf("delta %.12g\n", group_ric(phi, P, S, budget));
        return 0;
    }
}

int main(int argc, char **argv)
{
    CLI::App app{"Multichannel group-sparse channel estimation for doubly selective MIMO-OFDM"};
    app.require_subcommand(1);

    ConfigFlags sim_flags, est_flags, opt_flags, sweep_flags;
    int trial = 0;
    std::string sim_out = "realization", est_in = "realization", est_out = "estimate.mgct", solver = "mgcs-dcs-somp";
    std::string basis_out = "basis.mgcb", sweep_out = "results.csv", phi_path;
    std::size_t group_size = 1, ric_s = 1, budget = 100000;

    auto *sim = app.add_subcommand("simulate", "simulate one channel realization and write tensors");
    sim_flags.attach(sim);
    sim->add_option("--trial", trial, "trial index whose seeds are used");
    sim->add_option("--out", sim_out, "output directory");

    auto *est = app.add_subcommand("estimate", "estimate a simulated realization");
    est_flags.attach(est);
    est->add_option("--in", est_in, "directory written by simulate");
    est->add_option("--solver", solver, "estimator variant, e.g. mgcs-dcs-somp or gcs-bpdn+opt");
    est->add_option("--out", est_out, "output tensor file");

    auto *opt = app.add_subcommand("optimize-basis", "optimize the Doppler-direction basis for a prior");
    opt_flags.attach(opt);
    opt->add_option("--out", basis_out, "basis file");

    auto *sw = app.add_subcommand("sweep", "run a Monte-Carlo sweep");
    sweep_flags.attach(sw);
    sw->add_option("--out", sweep_out, "results file");

    auto *cert = app.add_subcommand("certify-ric", "brute-force group restricted isometry constant");
    cert->add_option("--phi", phi_path, "rank-2 tensor file holding the matrix")->required()->check(CLI::ExistingFile);
    cert->add_option("--group-size", group_size, "size of the equal consecutive groups");
    cert->add_option("--S", ric_s, "group sparsity order");
    cert->add_option("--budget", budget, "largest number of supports to enumerate");

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (sim->parsed())
            return simulate(sim_flags.resolve(sim), trial, sim_out);
        if (est->parsed())
            return estimate(est_flags.resolve(est), est_in, solver, est_out);
        if (opt->parsed())
            return optimize_basis(opt_flags.resolve(opt), basis_out);
        if (sw->parsed())
        {
            const ExperimentConfig cfg = sweep_flags.resolve(sw);
            if (!cfg.seed_set)
            {
                std::fprintf(stderr, "sweep: --seed (or a seed key in the configuration) is required\n");
                return 2;
            }
            return sweep(cfg, sweep_out);
        }
        if (cert->parsed())
            return certify(phi_path, group_size, ric_s, budget);
    }
    catch (const std::exception &e)
    {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
