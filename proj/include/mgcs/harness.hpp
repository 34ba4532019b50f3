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

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mgcs/basisopt.hpp"
#include "mgcs/channel.hpp"
#include "mgcs/estimator.hpp"
#include "mgcs/waveform.hpp"

namespace mgcs
{
    // An estimator as it appears in a sweep. Names are "<family>-<algorithm>" with an optional "+opt"
    // suffix for the optimized basis:
    //   mgcs-{dcs-somp,omp,cosamp,bpdn}  joint recovery over all channels with block groups
    //   gcs-{omp,cosamp,bpdn}            every channel on its own with block groups
    //   mcs-{dcs-somp,bpdn}              joint recovery with singleton groups
    //   conventional-{omp,cosamp,bpdn}   every channel on its own with singleton groups
    struct EstimatorVariant
    {
        std::string name;
        Algorithm algorithm = Algorithm::g_dcs_somp;
        SolverMode mode = SolverMode::mgcs;
        bool grouped = true;
        bool optimized_basis = false;
    };

    EstimatorVariant parse_variant(const std::string &name);

    enum class SweepAxis
    {
        snr,
        antennas,
        block_size
    };

    enum class BasisSource
    {
        dft,
        file,
        optimize
    };

    struct ExperimentConfig
    {
        SystemConfig system = SystemConfig::desk();
        int Q = 128;

        SweepAxis axis = SweepAxis::snr;
        std::vector<double> snr_db{20.0};           // the SNR axis, or its first entry for the other axes
        std::vector<int> antennas{1, 2};            // N_T = N_R values of the antenna axis
        std::vector<std::pair<int, int>> blocks{{1, 4}}; // dm x di values of the block-size axis

        std::vector<std::string> solvers{"mgcs-dcs-somp", "gcs-omp", "mcs-dcs-somp", "conventional-omp"};
        int block_dm = 1;
        int block_di = 4;

        // Greedy solvers stop at the noise level or after selecting this fraction of Q coefficients per channel
        double coef_budget = 0.3;
        double eps_scale = 1.0;       // multiplies the expected noise norm used as residual target and BPDN radius
        std::size_t cosamp_iters = 30;
        BpdnOptions bpdn;

        BasisSource basis_source = BasisSource::dft;
        std::string basis_path;
        int basis_samples = 256;
        double prior_tau_max = 0.0;   // zero selects the cyclic prefix length
        double prior_nu_max = 293.0;  // zero selects 3% of the subcarrier spacing
        OptimizeControls basis_controls;

        GeometryParams geometry;
        FilterSpec filter;
        double delay_offset = 2.0;    // receiver timing ahead of the first arrival, in samples
        int trials = 50;
        std::uint64_t seed = 1;
        bool seed_set = false;

        void validate() const;
        std::vector<std::string> axis_labels() const;
        // The system and tiling of axis point `p`
        SystemConfig system_at(int p) const;
        std::pair<int, int> blocks_at(int p) const;
        double snr_at(int p) const;
    };

    // Dotted keys such as "system.K", "sweep.snr_db" or "solvers"; list values are comma separated
    void set_config_value(ExperimentConfig &cfg, const std::string &key, const std::string &value);
    std::vector<std::string> config_keys();
    // JSON file with nested sections whose leaf paths are the keys above
    ExperimentConfig load_config(const std::filesystem::path &path);

    // Pilots of a sweep; they depend only on the master seed and the antenna count
    PilotScheme experiment_pilots(const ExperimentConfig &exp, const SystemConfig &cfg);

    // One simulated transmission through a random geometry-based channel
    struct TrialData
    {
        SystemConfig cfg;
        PilotScheme pilots;
        AntennaGrid received;       // demodulated grids, one per receive antenna
        std::vector<CMat> truth;    // H_{l,k} per channel
        double noise_variance = 0.0;
        double signal_power = 0.0;  // mean received power per sample before noise
        double eps = 0.0;           // expected norm of the stacked pilot noise
    };

    TrialData simulate_trial(const ExperimentConfig &exp, const SystemConfig &cfg, const PilotScheme &pilots,
                             double snr_db, std::uint64_t channel_seed, std::uint64_t noise_seed);

    SolverConfig solver_for(const EstimatorVariant &v, const ExperimentConfig &exp, const SystemConfig &cfg,
                            std::pair<int, int> block, double eps);

    ChannelEstimate run_estimator(const EstimatorVariant &v, const TrialData &trial, const ExperimentConfig &exp,
                                  std::pair<int, int> block, const BasisSpec &basis);

    DelayDopplerPrior experiment_prior(const ExperimentConfig &exp, const SystemConfig &cfg);

    // Optimizes the Doppler-direction basis for the experiment prior with dm x di blocks
    OptimizeResult optimize_experiment_basis(const ExperimentConfig &exp, const SystemConfig &cfg, int dm);

    // The basis an experiment uses for "+opt" variants at one system configuration
    BasisSpec experiment_basis(const ExperimentConfig &exp, const SystemConfig &cfg, int dm);

    struct ResultRow
    {
        std::string axis;
        std::string solver;
        double mean_mse_db = 0.0;
        double stderr_db = 0.0;
        int trials = 0;
        int failures = 0;
    };

    struct ResultTable
    {
        std::vector<ResultRow> rows;
        const ResultRow *find(const std::string &axis, const std::string &solver) const;
    };

    ResultTable run_sweep(const ExperimentConfig &exp);

    std::string format_results(const ResultTable &table);
    ResultTable parse_results(const std::string &text);
    void emit_results(const ResultTable &table, const std::filesystem::path &path);
}
