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

#include "mgcs/waveform.hpp"

#include <string>

#include <unsupported/Eigen/FFT>

namespace mgcs
{
    void SystemConfig::validate() const
    {
        if (K <= 0 || N <= 0 || L <= 0 || D <= 0 || J <= 0 || n_tx <= 0 || n_rx <= 0)
            throw ConfigError("SystemConfig: sizes must be positive");
        if (N < K)
            throw ConfigError("SystemConfig: symbol duration N must be at least K");
        if (L % 2 != 0 || J % 2 != 0)
            throw ConfigError("SystemConfig: L and J must be even");
        if (K % D != 0)
            throw ConfigError("SystemConfig: D must divide K");
        if (L % J != 0)
            throw ConfigError("SystemConfig: J must divide L");
        if (!(Ts > 0.0) || !(f0 > 0.0))
            throw ConfigError("SystemConfig: sample period and carrier must be positive");
    }

    SystemConfig SystemConfig::desk()
    {
        // A longer sample period keeps the Doppler resolution 1 / (Ts L_r) at the full-size value
        // of about 244 Hz despite the shorter block. Half the block also halves the Doppler range, so
        // the carrier is halved to keep the mobile Doppler spread at the same fraction of that range.
        SystemConfig c;
        c.Ts = 3.2e-6;
        c.f0 = 2.5e9;
        return c;
    }

    SystemConfig SystemConfig::paper_scale()
    {
        SystemConfig c;
        c.K = 512;
        c.N = 640;
        c.L = 32;
        c.D = 128;
        c.J = 32;
        return c;
    }

    PulsePair cp_ofdm_pulses(int K, int N)
    {
        if (K <= 0 || N < K)
            throw ConfigError("cp_ofdm_pulses: need 0 < K <= N");
        PulsePair p;
        p.g = CVec::Ones(N);
        p.gamma = CVec::Zero(N);
        p.gamma.tail(K).setOnes();
        p.id = "cp-ofdm:" + std::to_string(K) + ":" + std::to_string(N);
        return p;
    }

    namespace
    {
        void check_pulses(const PulsePair &pulses, const SystemConfig &cfg)
        {
            if (pulses.L_gamma() != cfg.gamma_support())
                throw ConfigError("receive pulse length does not match the system configuration");
        }
    }

    AntennaSignal modulate(const AntennaGrid &symbols, const PulsePair &pulses, const SystemConfig &cfg)
    {
        cfg.validate();
        const int K = cfg.K, N = cfg.N, L = cfg.L;
        const int Lg = int(pulses.g.size());
        const int len = (L - 1) * N + Lg;
        Eigen::FFT<double> fft;

        AntennaSignal out;
        for (const auto &a : symbols)
        {
            if (a.rows() != L || a.cols() != K)
                throw DomainError("modulate: symbol grid must be L x K");
            CVec s = CVec::Zero(len);
            std::vector<cplx> row(static_cast<std::size_t>(K)), wave;
            for (int l = 0; l < L; ++l)
            {
                for (int k = 0; k < K; ++k)
                    row[std::size_t(k)] = a(l, k);
                fft.inv(wave, row); // (1/K) sum_k a e^{+j2pi kn/K}
                for (int n = 0; n < Lg; ++n)
                    s[l * N + n] += pulses.g[n] * double(K) * wave[std::size_t(n % K)];
            }
            out.push_back(std::move(s));
        }
        return out;
    }

    AntennaGrid demodulate(const AntennaSignal &r, const PulsePair &pulses, const SystemConfig &cfg)
    {
        cfg.validate();
        check_pulses(pulses, cfg);
        const int K = cfg.K, N = cfg.N, L = cfg.L, Lgam = pulses.L_gamma();
        Eigen::FFT<double> fft;

        AntennaGrid out;
        for (const auto &x : r)
        {
            if (x.size() < cfg.L_r())
                throw DomainError("demodulate: received signal shorter than L_r");
            CMat y(L, K);
            std::vector<cplx> fold(static_cast<std::size_t>(K)), spec;
            for (int l = 0; l < L; ++l)
            {
                std::fill(fold.begin(), fold.end(), cplx(0.0));
                for (int n = 0; n <= Lgam; ++n)
                    fold[std::size_t(n % K)] += x[l * N + n] * std::conj(pulses.gamma[n]);
                fft.fwd(spec, fold);
                for (int k = 0; k < K; ++k)
                    y(l, k) = spec[std::size_t(k)];
            }
            out.push_back(std::move(y));
        }
        return out;
    }

    cplx cross_ambiguity(const PulsePair &pulses, int m, double xi)
    {
        cplx acc = 0.0;
        for (int n = 0; n <= pulses.L_gamma(); ++n)
        {
            const cplx gv = pulses.g_at(n - m);
            if (gv == 0.0 || pulses.gamma[n] == 0.0)
                continue;
            acc += pulses.gamma[n] * std::conj(gv) * std::polar(1.0, -2.0 * pi * xi * double(n));
        }
        return acc;
    }

    AmbiguityTable::AmbiguityTable(const PulsePair &pulses, int m_count, int L_r)
    {
        if (m_count <= 0 || L_r <= pulses.L_gamma())
            throw ConfigError("AmbiguityTable: L_r must exceed the receive pulse support");
        table_.resize(m_count, L_r);
        Eigen::FFT<double> fft;
        std::vector<cplx> w(static_cast<std::size_t>(L_r)), spec;
        for (int m = 0; m < m_count; ++m)
        {
            std::fill(w.begin(), w.end(), cplx(0.0));
            for (int n = 0; n <= pulses.L_gamma(); ++n)
                w[std::size_t(n)] = pulses.gamma[n] * std::conj(pulses.g_at(n - m));
            fft.fwd(spec, w);
            for (int t = 0; t < L_r; ++t)
                table_(m, t) = spec[std::size_t(t)];
        }
    }

    cplx AmbiguityTable::operator()(int m, long t) const
    {
        const long Lr = table_.cols();
        t %= Lr;
        if (t < 0)
            t += Lr;
        return table_(m, Eigen::Index(t));
    }

    TimeVaryingIR TimeVaryingIR::identity(int n_rx, int n_tx, int n_len, int n_delay)
    {
        return pure_delay(n_rx, n_tx, n_len, n_delay, 0);
    }

    TimeVaryingIR TimeVaryingIR::pure_delay(int n_rx, int n_tx, int n_len, int n_delay, int m0)
    {
        if (m0 < 0 || m0 >= n_delay)
            throw DomainError("TimeVaryingIR::pure_delay: delay outside the tap range");
        TimeVaryingIR H;
        H.n_rx = n_rx;
        H.n_tx = n_tx;
        for (int r = 0; r < n_rx; ++r)
            for (int s = 0; s < n_tx; ++s)
            {
                CMat t = CMat::Zero(n_len, n_delay);
                if (r == s)
                    t.col(m0).setOnes();
                H.taps.push_back(std::move(t));
            }
        return H;
    }

    AntennaSignal apply_discrete_channel(const TimeVaryingIR &H, const AntennaSignal &s, const AntennaSignal &noise)
    {
        if (int(s.size()) != H.n_tx || H.taps.size() != std::size_t(H.n_rx * H.n_tx))
            throw DomainError("apply_discrete_channel: antenna count mismatch");
        if (!noise.empty() && int(noise.size()) != H.n_rx)
            throw DomainError("apply_discrete_channel: noise must have one sequence per receive antenna");
        const int n_len = H.n_len(), n_delay = H.n_delay();

        AntennaSignal out;
        for (int r = 0; r < H.n_rx; ++r)
        {
            CVec y = CVec::Zero(n_len);
            for (int st = 0; st < H.n_tx; ++st)
            {
                const CMat &h = H.at(r, st);
                const CVec &x = s[std::size_t(st)];
                for (int n = 0; n < n_len; ++n)
                {
                    cplx acc = 0.0;
                    const int m_hi = std::min(n_delay - 1, n);
                    for (int m = std::max(0, n - int(x.size()) + 1); m <= m_hi; ++m)
                        acc += h(n, m) * x[n - m];
                    y[n] += acc;
                }
            }
            if (!noise.empty())
            {
                const CVec &z = noise[std::size_t(r)];
                if (z.size() < n_len)
                    throw DomainError("apply_discrete_channel: noise sequence too short");
                y += z.head(n_len);
            }
            out.push_back(std::move(y));
        }
        return out;
    }

    std::vector<CMat> effective_coeffs(const TimeVaryingIR &H, const PulsePair &pulses, const SystemConfig &cfg)
    {
        cfg.validate();
        check_pulses(pulses, cfg);
        const int K = cfg.K, N = cfg.N, L = cfg.L, Lgam = pulses.L_gamma();
        if (H.n_len() < cfg.L_r())
            throw DomainError("effective_coeffs: impulse response shorter than L_r");
        const int n_delay = H.n_delay();
        Eigen::FFT<double> fft;

        // With n = lN + n', g_{l,k}[n - m] gamma*_{l,k}[n] = g[n' - m] gamma*[n'] e^{-j2pi km/K}
        std::vector<CMat> out;
        std::vector<cplx> fold(static_cast<std::size_t>(K)), spec;
        for (const auto &h : H.taps)
        {
            CMat c(L, K);
            for (int l = 0; l < L; ++l)
            {
                std::fill(fold.begin(), fold.end(), cplx(0.0));
                for (int m = 0; m < n_delay; ++m)
                {
                    cplx w = 0.0;
                    for (int n = 0; n <= Lgam; ++n)
                    {
                        const cplx gv = pulses.g_at(n - m);
                        if (gv == 0.0)
                            continue;
                        w += h(l * N + n, m) * gv * std::conj(pulses.gamma[n]);
                    }
                    fold[std::size_t(m % K)] += w;
                }
                fft.fwd(spec, fold);
                for (int k = 0; k < K; ++k)
                    c(l, k) = spec[std::size_t(k)];
            }
            out.push_back(std::move(c));
        }
        return out;
    }
}
