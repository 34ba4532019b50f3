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

#include <string>
#include <vector>

#include "mgcs/types.hpp"

namespace mgcs
{
    struct SystemConfig
    {
        int K = 64;         // subcarriers
        int N = 80;         // symbol duration in samples
        int L = 16;         // symbols per block
        int D = 16;         // delay support of the subsampled grid
        int J = 16;         // Doppler support of the subsampled grid
        int n_tx = 2;
        int n_rx = 2;
        double f0 = 5e9;    // carrier frequency in Hz
        double Ts = 2e-7;   // sample period in seconds
        int L_gamma = -1;   // last sample of the receive pulse; negative selects N - 1 (CP-OFDM)

        int delta_K() const { return K / D; }
        int delta_L() const { return L / J; }
        int JD() const { return J * D; }
        int gamma_support() const { return L_gamma < 0 ? N - 1 : L_gamma; }
        int L_r() const { return (L - 1) * N + gamma_support() + 1; }
        int channels() const { return n_tx * n_rx; }
        double subcarrier_spacing() const { return 1.0 / (double(K) * Ts); }

        void validate() const;

        static SystemConfig desk();
        static SystemConfig paper_scale();
    };

    struct PulsePair
    {
        CVec g;         // transmit pulse on {0..g.size()-1}
        CVec gamma;     // receive pulse on {0..L_gamma}
        std::string id;

        int L_gamma() const { return int(gamma.size()) - 1; }
        cplx g_at(int n) const { return (n >= 0 && n < g.size()) ? g[n] : cplx(0.0); }
        cplx gamma_at(int n) const { return (n >= 0 && n < gamma.size()) ? gamma[n] : cplx(0.0); }
    };

    PulsePair cp_ofdm_pulses(int K, int N);

    // One L x K matrix per antenna, row l, column k
    using AntennaGrid = std::vector<CMat>;
    // One sample sequence per antenna
    using AntennaSignal = std::vector<CVec>;

    AntennaSignal modulate(const AntennaGrid &symbols, const PulsePair &pulses, const SystemConfig &cfg);

    AntennaGrid demodulate(const AntennaSignal &r, const PulsePair &pulses, const SystemConfig &cfg);

    cplx cross_ambiguity(const PulsePair &pulses, int m, double xi);

    // Table of A(m, t / L_r) for m in {0..m_count-1} and t in {0..L_r-1}
    class AmbiguityTable
    {
    public:
        AmbiguityTable(const PulsePair &pulses, int m_count, int L_r);
        cplx operator()(int m, long t) const;
        int m_count() const { return int(table_.rows()); }
        int L_r() const { return int(table_.cols()); }

    private:
        CMat table_;
    };

    // Discrete time-varying impulse response H[n, m] for every channel theta = r * N_T + s.
    // Each matrix has one row per time sample n and one column per delay m.
    struct TimeVaryingIR
    {
        int n_rx = 1;
        int n_tx = 1;
        std::vector<CMat> taps;

        int n_len() const { return taps.empty() ? 0 : int(taps.front().rows()); }
        int n_delay() const { return taps.empty() ? 0 : int(taps.front().cols()); }
        const CMat &at(int r, int s) const { return taps[std::size_t(r * n_tx + s)]; }

        static TimeVaryingIR identity(int n_rx, int n_tx, int n_len, int n_delay);
        static TimeVaryingIR pure_delay(int n_rx, int n_tx, int n_len, int n_delay, int m0);
    };

    // r[n] = sum_m H[n, m] s[n - m] + z[n] for n in {0..n_len-1}; noise may be empty
    AntennaSignal apply_discrete_channel(const TimeVaryingIR &H, const AntennaSignal &s, const AntennaSignal &noise = {});

    // H_{l,k} for every channel, one L x K matrix per theta
    std::vector<CMat> effective_coeffs(const TimeVaryingIR &H, const PulsePair &pulses, const SystemConfig &cfg);
}
