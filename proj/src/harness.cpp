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

#include "mgcs/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <json.hpp>

#include "mgcs/random.hpp"

namespace mgcs
{
    namespace
    {
        std::vector<std::string> split(const std::string &s, char sep)
        {
            std::vector<std::string> out;
            std::string cur;
            std::istringstream in(s);
            while (std::getline(in, cur, sep))
            {
                const auto a = cur.find_first_not_of(" \t");
                const auto b = cur.find_last_not_of(" \t\r");
                out.push_back(a == std::string::npos ? std::string() : cur.substr(a, b - a + 1));
            }
            return out;
        }

        long to_long(const std::string &key, const std::string &v)
        {
            std::size_t pos = 0;
            long x = 0;
            try
            {
                x = std::stol(v, &pos);
            }
            catch (const std::exception &)
            {
                pos = 0;
            }
            if (pos == 0 || pos != v.size())
                throw ConfigError(key + ": expected an integer, got '" + v + "'");
            return x;
        }

        int to_int(const std::string &key, const std::string &v) { return int(to_long(key, v)); }

        double to_double(const std::string &key, const std::string &v)
        {
            std::size_t pos = 0;
            double x = 0.0;
            try
            {
                x = std::stod(v, &pos);
            }
            catch (const std::exception &)
            {
                pos = 0;
            }
            if (pos == 0 || pos != v.size())
                throw ConfigError(key + ": expected a number, got '" + v + "'");
            return x;
        }

        std::pair<int, int> to_block(const std::string &key, const std::string &v)
        {
            const auto parts = split(v, 'x');
            if (parts.size() != 2)
                throw ConfigError(key + ": expected a block size such as 1x4, got '" + v + "'");
            return {to_int(key, parts[0]), to_int(key, parts[1])};
        }

        using Setter = std::function<void(ExperimentConfig &, const std::string &, const std::string &)>;

        template <class T> Setter int_field(T ExperimentConfig::*f)
        {
            return [f](ExperimentConfig &c, const std::string &k, const std::string &v) { c.*f = T(to_long(k, v)); };
        }

        const std::map<std::string, Setter> &setters()
        {
            static const std::map<std::string, Setter> table = [] {
                std::map<std::string, Setter> t;
                auto sys_int = [](int SystemConfig::*f) {
                    return [f](ExperimentConfig &c, const std::string &k, const std::string &v) { c.system.*f = to_int(k, v); };
                };
                auto sys_double = [](double SystemConfig::*f) {
                    return [f](ExperimentConfig &c, const std::string &k, const std::string &v) { c.system.*f = to_double(k, v); };
                };
                auto geo_int = [](int GeometryParams::*f) {
                    return [f](ExperimentConfig &c, const std::string &k, const std::string &v) { c.geometry.*f = to_int(k, v); };
                };
                auto geo_double = [](double GeometryParams::*f) {
                    return [f](ExperimentConfig &c, const std::string &k, const std::string &v) { c.geometry.*f = to_double(k, v); };
                };
                t["system.K"] = sys_int(&SystemConfig::K);
                t["system.N"] = sys_int(&SystemConfig::N);
                t["system.L"] = sys_int(&SystemConfig::L);
                t["system.D"] = sys_int(&SystemConfig::D);
                t["system.J"] = sys_int(&SystemConfig::J);
                t["system.n_tx"] = sys_int(&SystemConfig::n_tx);
                t["system.n_rx"] = sys_int(&SystemConfig::n_rx);
                t["system.f0"] = sys_double(&SystemConfig::f0);
                t["system.Ts"] = sys_double(&SystemConfig::Ts);
                t["pilots.Q"] = int_field(&ExperimentConfig::Q);

                t["sweep.axis"] = [](ExperimentConfig &c, const std::string &k, const std::string &v) {
                    if (v == "snr")
                        c.axis = SweepAxis::snr;
                    else if (v == "antennas")
                        c.axis = SweepAxis::antennas;
                    else if (v == "block_size")
                        c.axis = SweepAxis::block_size;
                    else
                        throw ConfigError(k + ": unknown axis '" + v + "'");
                };
                t["sweep.snr_db"] = [](ExperimentConfig &c, const std::string &k, const std::string &v) {
                    c.snr_db.clear();
                    for (const auto &s : split(v, ','))
                        c.snr_db.push_back(to_double(k, s));
                };
                t["sweep.antennas"] = [](ExperimentConfig &c, const std::string &k, const std::string &v) {
                    c.antennas.clear();
                    for (const auto &s : split(v, ','))
                        c.antennas.push_back(to_int(k, s));
                };
                t["sweep.blocks"] = [](ExperimentConfig &c, const std::string &k, const std::string &v) {
                    c.blocks.clear();
                    for (const auto &s : split(v, ','))
                        c.blocks.push_back(to_block(k, s));
                };
                t["solvers"] = [](ExperimentConfig &c, const std::string &, const std::string &v) { c.solvers = split(v, ','); };
                t["blocks.dm"] = int_field(&ExperimentConfig::block_dm);
                t["blocks.di"] = int_field(&ExperimentConfig::block_di);

                t["solver.coef_budget"] = [](ExperimentConfig &c, const std::string &k, const std::string &v) { c.coef_budget = to_double(k, v); };
                t["solver.eps_scale"] = [](ExperimentConfig &c, const std::string &k, const std::string &v) { c.eps_scale = to_double(k, v); };
                t["solver.cosamp_iters"] = int_field(&ExperimentConfig::cosamp_iters);
                t["solver.bpdn_tol"] = [](ExperimentConfig &c, const std::string &k, const std::string &v) { c.bpdn.tol = to_double(k, v); };
                t["solver.bpdn_max_outer"] = [](ExperimentConfig &c, const std::string &k, const std::string &v) { c.bpdn.max_outer = std::size_t(to_long(k, v)); };
                t["solver.bpdn_max_inner"] = [](ExperimentConfig &c, const std::string &k, const std::string &v) { c.bpdn.max_inner = std::size_t(to_long(k, v)); };

                t["basis.source"] = [](ExperimentConfig &c, const std::string &k, const std::string &v) {
                    if (v == "dft")
                        c.basis_source = BasisSource::dft;
                    else if (v == "file")
                        c.basis_source = BasisSource::file;
                    else if (v == "optimize")
                        c.basis_source = BasisSource::optimize;
                    else
                        throw ConfigError(k + ": unknown basis source '" + v + "'");
                };
                t["basis.path"] = [](ExperimentConfig &c, const std::string &, const std::string &v) { c.basis_path = v; };
                t["basis.samples"] = int_field(&ExperimentConfig::basis_samples);
                t["basis.tau_max"] = [](ExperimentConfig &c, const std::string &k, const std::string &v) { c.prior_tau_max = to_double(k, v); };
                t["basis.nu_max"] = [](ExperimentConfig &c, const std::string &k, const std::string &v) { c.prior_nu_max = to_double(k, v); };
                t["basis.eps_init"] = [](ExperimentConfig &c, const std::string &k, const std::string &v) { c.basis_controls.eps_init = to_double(k, v); };
                t["basis.eps_floor"] = [](ExperimentConfig &c, const std::string &k, const std::string &v) { c.basis_controls.eps_floor = to_double(k, v); };
                t["basis.max_iters"] = [](ExperimentConfig &c, const std::string &k, const std::string &v) { c.basis_controls.max_iters = to_int(k, v); };
                t["basis.convex_iters"] = [](ExperimentConfig &c, const std::string &k, const std::string &v) { c.basis_controls.convex_iters = to_int(k, v); };

                t["geometry.scale"] = geo_double(&GeometryParams::scale);
                t["geometry.far_clusters"] = geo_int(&GeometryParams::far_clusters);
                t["geometry.near_clusters"] = geo_int(&GeometryParams::near_clusters);
                t["geometry.per_cluster"] = geo_int(&GeometryParams::per_cluster);
                t["geometry.area_x"] = geo_double(&GeometryParams::area_x);
                t["geometry.area_y"] = geo_double(&GeometryParams::area_y);
                t["geometry.separation"] = geo_double(&GeometryParams::separation);
                t["geometry.near_radius"] = geo_double(&GeometryParams::near_radius);
                t["geometry.cluster_spread"] = geo_double(&GeometryParams::cluster_spread);
                t["geometry.speed_max"] = geo_double(&GeometryParams::speed_max);
                t["geometry.accel_max"] = geo_double(&GeometryParams::accel_max);

                t["filter.mode"] = [](ExperimentConfig &c, const std::string &k, const std::string &v) {
                    if (v == "rrc")
                        c.filter.mode = FilterSpec::Mode::rrc;
                    else if (v == "kronecker")
                        c.filter.mode = FilterSpec::Mode::kronecker;
                    else
                        throw ConfigError(k + ": unknown filter mode '" + v + "'");
                };
                t["filter.rolloff"] = [](ExperimentConfig &c, const std::string &k, const std::string &v) { c.filter.rolloff = to_double(k, v); };
                t["filter.oversampling"] = [](ExperimentConfig &c, const std::string &k, const std::string &v) { c.filter.oversampling = to_int(k, v); };
                t["filter.span"] = [](ExperimentConfig &c, const std::string &k, const std::string &v) { c.filter.span = to_int(k, v); };
                t["channel.delay_offset"] = [](ExperimentConfig &c, const std::string &k, const std::string &v) { c.delay_offset = to_double(k, v); };

                t["trials"] = int_field(&ExperimentConfig::trials);
                t["seed"] = [](ExperimentConfig &c, const std::string &k, const std::string &v) {
                    std::size_t pos = 0;
                    try
                    {
                        c.seed = std::stoull(v, &pos);
                    }
                    catch (const std::exception &)
                    {
                        pos = 0;
                    }
                    if (pos == 0 || pos != v.size())
                        throw ConfigError(k + ": expected an unsigned integer");
                    c.seed_set = true;
                };
                return t;
            }();
            return table;
        }

        void flatten(const nlohmann::json &j, const std::string &prefix, std::vector<std::pair<std::string, std::string>> &out)
        {
            auto scalar = [](const nlohmann::json &v) {
                if (v.is_string())
                    return v.get<std::string>();
                if (v.is_number_integer() || v.is_number_unsigned())
                    return v.dump();
                if (v.is_number_float())
                {
                    char buf[64];
                    std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
                    return std::string(buf);
                }
                throw ConfigError("unsupported configuration value " + v.dump());
            };
            if (j.is_object())
            {
                for (auto it = j.begin(); it != j.end(); ++it)
                    flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
            }
            else if (j.is_array())
            {
                std::string joined;
                for (const auto &v : j)
                    joined += (joined.empty() ? "" : ",") + scalar(v);
                out.emplace_back(prefix, joined);
            }
            else
                out.emplace_back(prefix, scalar(j));
        }

        std::string fmt6(double x)
        {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.6g", x);
            return buf;
        }

        double pilot_noise_gain(const PulsePair &pulses) { return pulses.gamma.squaredNorm(); }
    }

    EstimatorVariant parse_variant(const std::string &name)
    {
        EstimatorVariant v;
        v.name = name;
        std::string base = name;
        const std::string opt = "+opt";
        if (base.size() > opt.size() && base.compare(base.size() - opt.size(), opt.size(), opt) == 0)
        {
            v.optimized_basis = true;
            base.resize(base.size() - opt.size());
        }
        const auto dash = base.find('-');
        if (dash == std::string::npos)
            throw ConfigError("unknown estimator '" + name + "'");
        const std::string family = base.substr(0, dash), alg = base.substr(dash + 1);

        if (family == "mgcs" || family == "mcs")
            v.mode = SolverMode::mgcs;
        else if (family == "gcs" || family == "conventional")
            v.mode = SolverMode::per_channel;
        else
            throw ConfigError("unknown estimator family in '" + name + "'");
        v.grouped = family == "mgcs" || family == "gcs";

        if (alg == "dcs-somp")
            v.algorithm = Algorithm::g_dcs_somp;
        else if (alg == "omp")
            v.algorithm = Algorithm::g_omp;
        else if (alg == "cosamp")
            v.algorithm = Algorithm::g_cosamp;
        else if (alg == "bpdn")
            v.algorithm = Algorithm::g_bpdn;
        else
            throw ConfigError("unknown algorithm in '" + name + "'");
        if (v.algorithm == Algorithm::g_dcs_somp && v.mode == SolverMode::per_channel)
            throw ConfigError("'" + name + "': DCS-SOMP is a joint method");
        return v;
    }

    void ExperimentConfig::validate() const
    {
        if (trials < 0)
            throw ConfigError("trials must be nonnegative");
        if (Q < 1)
            throw ConfigError("pilots.Q must be positive");
        if (snr_db.empty())
            throw ConfigError("sweep.snr_db must not be empty");
        if (axis == SweepAxis::antennas && antennas.empty())
            throw ConfigError("sweep.antennas must not be empty");
        if (axis == SweepAxis::block_size && blocks.empty())
            throw ConfigError("sweep.blocks must not be empty");
        if (!(coef_budget > 0.0) || !(eps_scale >= 0.0))
            throw ConfigError("solver.coef_budget must be positive and solver.eps_scale nonnegative");
        if (basis_source == BasisSource::file && basis_path.empty())
            throw ConfigError("basis.path is required for a file basis");
        for (const auto &s : solvers)
            parse_variant(s);
        for (int p = 0; p < int(axis_labels().size()); ++p)
        {
            const SystemConfig c = system_at(p);
            c.validate();
            if (long(c.n_tx) * Q > c.JD())
                throw ConfigError("N_T * Q pilots exceed the subsampled grid at axis point " + axis_labels()[std::size_t(p)]);
            const auto [dm, di] = blocks_at(p);
            if (dm < 1 || di < 1 || c.D % dm != 0 || c.J % di != 0)
                throw ConfigError("block size must divide the rectangle");
        }
    }

    std::vector<std::string> ExperimentConfig::axis_labels() const
    {
        std::vector<std::string> out;
        switch (axis)
        {
        case SweepAxis::snr:
            for (double s : snr_db)
                out.push_back(fmt6(s));
            break;
        case SweepAxis::antennas:
            for (int a : antennas)
                out.push_back(std::to_string(a) + "x" + std::to_string(a));
            break;
        case SweepAxis::block_size:
            for (const auto &[dm, di] : blocks)
                out.push_back(std::to_string(dm) + "x" + std::to_string(di));
            break;
        }
        return out;
    }

    SystemConfig ExperimentConfig::system_at(int p) const
    {
        SystemConfig c = system;
        if (axis == SweepAxis::antennas)
            c.n_tx = c.n_rx = antennas.at(std::size_t(p));
        return c;
    }

    std::pair<int, int> ExperimentConfig::blocks_at(int p) const
    {
        return axis == SweepAxis::block_size ? blocks.at(std::size_t(p)) : std::pair{block_dm, block_di};
    }

    double ExperimentConfig::snr_at(int p) const
    {
        return axis == SweepAxis::snr ? snr_db.at(std::size_t(p)) : snr_db.front();
    }

    void set_config_value(ExperimentConfig &cfg, const std::string &key, const std::string &value)
    {
        const auto &t = setters();
        const auto it = t.find(key);
        if (it == t.end())
            throw ConfigError("unknown configuration key '" + key + "'");
        it->second(cfg, key, value);
    }

    std::vector<std::string> config_keys()
    {
        std::vector<std::string> keys;
        for (const auto &kv : setters())
            keys.push_back(kv.first);
        return keys;
    }

    ExperimentConfig load_config(const std::filesystem::path &path)
    {
        std::ifstream f(path);
        if (!f)
            throw ConfigError("cannot open configuration " + path.string());
        nlohmann::json j;
        try
        {
            j = nlohmann::json::parse(f);
        }
        catch (const nlohmann::json::exception &e)
        {
            throw ConfigError(path.string() + ": " + e.what());
        }
        std::vector<std::pair<std::string, std::string>> kv;
        flatten(j, "", kv);
        ExperimentConfig cfg;
        for (const auto &[k, v] : kv)
            set_config_value(cfg, k, v);
        return cfg;
    }

    PilotScheme experiment_pilots(const ExperimentConfig &exp, const SystemConfig &cfg)
    {
        return draw_pilots(cfg, exp.Q, derive_seed(exp.seed, 0x9170, std::uint64_t(cfg.n_tx)), default_pilot_matrix(cfg.n_tx));
    }

    TrialData simulate_trial(const ExperimentConfig &exp, const SystemConfig &cfg, const PilotScheme &pilots,
                             double snr_db, std::uint64_t channel_seed, std::uint64_t noise_seed)
    {
        cfg.validate();
        pilots.validate(cfg);
        const PulsePair pulses = cp_ofdm_pulses(cfg.K, cfg.N);

        GeometryParams gp = exp.geometry;
        gp.n_tx = cfg.n_tx;
        gp.n_rx = cfg.n_rx;
        gp.carrier = cfg.f0;
        const ScattererGeometry geo = sample_geometry(channel_seed, gp);
        const double block_time = double(cfg.L) * cfg.N * cfg.Ts;
        PathSet paths = path_params(geo, default_path_gains(geo, derive_seed(channel_seed, 1)), 0.5 * block_time);
        paths.align_delays(exp.delay_offset * cfg.Ts);
        const LeakageFilter filter(exp.filter, cfg.Ts);
        const TimeVaryingIR ir = discrete_ir(paths, filter, cfg, std::max(1, std::min(cfg.K, cfg.N - cfg.K)));

        TrialData out;
        out.cfg = cfg;
        out.pilots = pilots;
        out.truth = effective_coeffs(ir, pulses, cfg);

        // QPSK data everywhere, overwritten by the pilot values; at the positions of set s' antenna s sends P(s, s')
        Rng rng(noise_seed);
        std::uniform_int_distribution<int> quadrant(0, 3);
        AntennaGrid symbols;
        for (int s = 0; s < cfg.n_tx; ++s)
        {
            CMat a(cfg.L, cfg.K);
            for (int k = 0; k < cfg.K; ++k)
                for (int l = 0; l < cfg.L; ++l)
                    a(l, k) = std::polar(1.0, pi / 4.0 + pi / 2.0 * quadrant(rng));
            symbols.push_back(std::move(a));
        }
        for (int sp = 0; sp < pilots.n_tx(); ++sp)
            for (const GridPosition &p : pilots.positions[std::size_t(sp)])
                for (int s = 0; s < cfg.n_tx; ++s)
                    symbols[std::size_t(s)](p.lambda * cfg.delta_L(), p.kappa * cfg.delta_K()) = pilots.pilot_matrix(s, sp);

        AntennaSignal rx = apply_discrete_channel(ir, modulate(symbols, pulses, cfg));
        double power = 0.0;
        Eigen::Index samples = 0;
        for (const CVec &r : rx)
        {
            power += r.squaredNorm();
            samples += r.size();
        }
        out.signal_power = power / double(samples);
        out.noise_variance = out.signal_power / std::pow(10.0, snr_db / 10.0);
        for (CVec &r : rx)
            r += complex_normal_vector(rng, r.size(), out.noise_variance);
        out.received = demodulate(rx, pulses, cfg);
        out.eps = exp.eps_scale *
                  std::sqrt(double(pilots.Q()) * cfg.channels() * pilot_noise_gain(pulses) * out.noise_variance);
        return out;
    }

    SolverConfig solver_for(const EstimatorVariant &v, const ExperimentConfig &exp, const SystemConfig &cfg,
                            std::pair<int, int> block, double eps)
    {
        SolverConfig s;
        s.algorithm = v.algorithm;
        s.mode = v.mode;
        s.block_dm = v.grouped ? block.first : 1;
        s.block_di = v.grouped ? block.second : 1;
        const int group = s.block_dm * s.block_di;
        const int groups = cfg.JD() / group;
        const auto budget = std::size_t(std::max(1.0, std::floor(exp.coef_budget * exp.Q / group)));
        s.stop.max_groups = budget;
        s.stop.residual_tol = eps;
        s.cosamp_sparsity = std::max<std::size_t>(1, std::min<std::size_t>(budget, std::size_t(groups / 4)));
        s.cosamp_iters = exp.cosamp_iters;
        s.bpdn = exp.bpdn;
        return s;
    }

    ChannelEstimate run_estimator(const EstimatorVariant &v, const TrialData &trial, const ExperimentConfig &exp,
                                  std::pair<int, int> block, const BasisSpec &basis)
    {
        const SystemConfig &cfg = trial.cfg;
        const BasisSpec used = v.optimized_basis ? basis : BasisSpec::dft(cfg.D, cfg.J);
        MeasurementEnsemble ens =
            collect_measurements(trial.received, trial.pilots, trial.eps, cfg, build_phi(trial.pilots, used, cfg));
        return estimate_mimo(ens, trial.pilots, used, solver_for(v, exp, cfg, block, trial.eps), cfg);
    }

    DelayDopplerPrior experiment_prior(const ExperimentConfig &exp, const SystemConfig &cfg)
    {
        DelayDopplerPrior prior = DelayDopplerPrior::from_system(cfg);
        if (exp.prior_tau_max > 0.0)
            prior.tau_max = exp.prior_tau_max;
        if (exp.prior_nu_max > 0.0)
            prior.nu_max = exp.prior_nu_max;
        return prior;
    }

    OptimizeResult optimize_experiment_basis(const ExperimentConfig &exp, const SystemConfig &cfg, int dm)
    {
        const PulsePair pulses = cp_ofdm_pulses(cfg.K, cfg.N);
        const KernelContext ctx(pulses, cfg, LeakageFilter(exp.filter, cfg.Ts));
        const ObjectiveSamples samples = sample_prior(experiment_prior(exp, cfg), exp.basis_samples,
                                                      derive_seed(exp.seed, 0xba515, std::uint64_t(cfg.channels())), &ctx);
        return optimize_blocks(samples, make_block_tiling(cfg.D, cfg.J, dm, exp.block_di), cfg, exp.basis_controls);
    }

    BasisSpec experiment_basis(const ExperimentConfig &exp, const SystemConfig &cfg, int dm)
    {
        switch (exp.basis_source)
        {
        case BasisSource::dft:
            return BasisSpec::dft(cfg.D, cfg.J);
        case BasisSource::file:
            return load_basis(exp.basis_path,
                              basis_fingerprint(cfg, cp_ofdm_pulses(cfg.K, cfg.N).id, experiment_prior(exp, cfg).hash()))
                .basis;
        case BasisSource::optimize:
            break;
        }
        return optimize_experiment_basis(exp, cfg, dm).basis;
    }

    const ResultRow *ResultTable::find(const std::string &axis, const std::string &solver) const
    {
        for (const auto &r : rows)
            if (r.axis == axis && r.solver == solver)
                return &r;
        return nullptr;
    }

    ResultTable run_sweep(const ExperimentConfig &exp)
    {
        exp.validate();
        ResultTable table;
        if (exp.trials == 0)
            return table;

        std::vector<EstimatorVariant> variants;
        bool need_basis = false;
        for (const auto &s : exp.solvers)
        {
            variants.push_back(parse_variant(s));
            need_basis = need_basis || variants.back().optimized_basis;
        }

        const auto labels = exp.axis_labels();
        for (int p = 0; p < int(labels.size()); ++p)
        {
            const SystemConfig cfg = exp.system_at(p);
            const auto block = exp.blocks_at(p);
            const PilotScheme pilots = experiment_pilots(exp, cfg);
            const BasisSpec basis = need_basis ? experiment_basis(exp, cfg, block.first) : BasisSpec::dft(cfg.D, cfg.J);

            std::vector<std::vector<double>> mse(variants.size());
            std::vector<int> failures(variants.size(), 0);
            for (int t = 0; t < exp.trials; ++t)
            {
                // Channel realizations are shared across axis points; noise and data are not
                std::optional<TrialData> trial;
                try
                {
                    trial = simulate_trial(exp, cfg, pilots, exp.snr_at(p), derive_seed(exp.seed, 1, std::uint64_t(t)),
                                           derive_seed(exp.seed, 2 + std::uint64_t(p), std::uint64_t(t)));
                }
                catch (const std::exception &)
                {
                    for (int &f : failures)
                        ++f;
                    continue;
                }
                for (std::size_t v = 0; v < variants.size(); ++v)
                {
                    try
                    {
                        const ChannelEstimate est = run_estimator(variants[v], *trial, exp, block, basis);
                        mse[v].push_back(normalized_mse(est.H, trial->truth));
                    }
                    catch (const std::exception &)
                    {
                        ++failures[v];
                    }
                }
            }

            for (std::size_t v = 0; v < variants.size(); ++v)
            {
                ResultRow row;
                row.axis = labels[std::size_t(p)];
                row.solver = variants[v].name;
                row.trials = int(mse[v].size());
                row.failures = failures[v];
                if (!mse[v].empty())
                {
                    const double n = double(mse[v].size());
                    double mean = 0.0;
                    for (double x : mse[v])
                        mean += x;
                    mean /= n;
                    double var = 0.0;
                    for (double x : mse[v])
                        var += (x - mean) * (x - mean);
                    var = n > 1 ? var / (n - 1) : 0.0;
                    row.mean_mse_db = 10.0 * std::log10(mean);
                    row.stderr_db = 10.0 / std::log(10.0) * std::sqrt(var / n) / mean;
                }
                else
                    row.mean_mse_db = row.stderr_db = std::nan("");
                table.rows.push_back(row);
            }
        }
        return table;
    }

    std::string format_results(const ResultTable &table)
    {
        std::string out = "axis,solver,mean_mse_db,stderr_db,trials\n";
        for (const auto &r : table.rows)
            out += r.axis + "," + r.solver + "," + fmt6(r.mean_mse_db) + "," + fmt6(r.stderr_db) + "," +
                   std::to_string(r.trials) + "\n";
        return out;
    }

    ResultTable parse_results(const std::string &text)
    {
        ResultTable table;
        std::istringstream in(text);
        std::string line;
        if (!std::getline(in, line) || line != "axis,solver,mean_mse_db,stderr_db,trials")
            throw FormatError("results: missing header");
        while (std::getline(in, line))
        {
            if (line.empty())
                continue;
            const auto f = split(line, ',');
            if (f.size() != 5)
                throw FormatError("results: malformed row '" + line + "'");
            ResultRow r;
            r.axis = f[0];
            r.solver = f[1];
            r.mean_mse_db = to_double("mean_mse_db", f[2]);
            r.stderr_db = to_double("stderr_db", f[3]);
            r.trials = to_int("trials", f[4]);
            table.rows.push_back(r);
        }
        return table;
    }

    void emit_results(const ResultTable &table, const std::filesystem::path &path)
    {
        if (table.rows.empty())
            throw DomainError("no results to write");
        std::ofstream f(path, std::ios::binary);
        if (!f)
            throw FormatError("cannot open " + path.string() + " for writing");
        f << format_results(table);
        if (!f)
            throw FormatError("write to " + path.string() + " failed");
    }
}
