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

#include "mgcs/channel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <unsupported/Eigen/FFT>

#include "mgcs/random.hpp"

namespace mgcs
{
    double ScattererGeometry::tx_aperture() const
    {
        double d = 0.0;
        for (const auto &a : tx_antennas)
            for (const auto &b : tx_antennas)
                d = std::max(d, (a - b).norm());
        return d;
    }

    double ScattererGeometry::rx_aperture() const
    {
        double d = 0.0;
        for (const auto &a : rx_antennas)
            for (const auto &b : rx_antennas)
                d = std::max(d, (a - b).norm());
        return d;
    }

    void ScattererGeometry::validate() const
    {
        if (tx_antennas.empty() || rx_antennas.empty())
            throw ConfigError("ScattererGeometry: antenna arrays must not be empty");
        if (!(carrier > 0.0))
            throw ConfigError("ScattererGeometry: carrier must be positive");
        for (const auto &sc : scatterers)
        {
            for (const auto &a : tx_antennas)
                if ((a - sc.position).norm() <= 0.0)
                    throw DomainError("ScattererGeometry: scatterer coincides with a transmit antenna");
            for (const auto &a : rx_antennas)
                if ((a - sc.position).norm() <= 0.0)
                    throw DomainError("ScattererGeometry: scatterer coincides with a receive antenna");
        }
    }

    namespace
    {
        Vec3 planar(double radius, double angle)
        {
            return {radius * std::cos(angle), radius * std::sin(angle), 0.0};
        }

        // Uniform point in a disc
        Vec3 in_disc(Rng &rng, const Vec3 &center, double radius)
        {
            const double r = radius * std::sqrt(uniform(rng, 0.0, 1.0));
            return center + planar(r, uniform(rng, 0.0, 2.0 * pi));
        }

        std::vector<Vec3> linear_array(const Vec3 &center, int n, double spacing, double angle)
        {
            std::vector<Vec3> out;
            const Vec3 dir = planar(1.0, angle);
            for (int k = 0; k < n; ++k)
                out.push_back(center + (double(k) - 0.5 * double(n - 1)) * spacing * dir);
            return out;
        }
    }

    ScattererGeometry sample_geometry(std::uint64_t seed, const GeometryParams &prm)
    {
        if (prm.far_clusters < 0 || prm.near_clusters < 0 || prm.per_cluster < 0 || prm.n_tx <= 0 || prm.n_rx <= 0)
            throw ConfigError("sample_geometry: counts must be nonnegative and arrays nonempty");
        if (prm.speed_max < 0.0 || prm.accel_max < 0.0 || !(prm.scale > 0.0) || !(prm.carrier > 0.0))
            throw ConfigError("sample_geometry: invalid speed, acceleration, scale or carrier");

        Rng rng(seed);
        const double s = prm.scale;
        const double spacing = prm.antenna_spacing > 0.0 ? prm.antenna_spacing : speed_of_light / (2.0 * prm.carrier);

        ScattererGeometry geo;
        geo.carrier = prm.carrier;
        const Vec3 tx_center = Vec3::Zero();
        const Vec3 rx_center(prm.separation * s, 0.0, 0.0);
        geo.tx_antennas = linear_array(tx_center, prm.n_tx, spacing, uniform(rng, 0.0, 2.0 * pi));
        geo.rx_antennas = linear_array(rx_center, prm.n_rx, spacing, uniform(rng, 0.0, 2.0 * pi));

        auto motion = [&](Vec3 &v, Vec3 &a)
        {
            v = planar(uniform(rng, 0.0, prm.speed_max), uniform(rng, 0.0, 2.0 * pi));
            a = planar(uniform(rng, 0.0, prm.accel_max), uniform(rng, 0.0, 2.0 * pi));
        };
        Vec3 v_rx, a_rx;
        motion(v_rx, a_rx); // the transmitter is static

        const Vec3 mid = 0.5 * rx_center;
        const double min_distance = 1.0 * s;
        for (int c = 0; c < prm.far_clusters + prm.near_clusters; ++c)
        {
            const bool near = c >= prm.far_clusters;
            Vec3 center = near ? in_disc(rng, rx_center, prm.near_radius * s)
                               : mid + Vec3(uniform(rng, -0.5, 0.5) * prm.area_x * s, uniform(rng, -0.5, 0.5) * prm.area_y * s, 0.0);
            Vec3 v, a;
            motion(v, a);
            for (int k = 0; k < prm.per_cluster; ++k)
            {
                Scatterer sc;
                // Keep scatterers away from the antennas so every path length stays positive
                do
                    sc.position = in_disc(rng, center, prm.cluster_spread * s);
                while ((sc.position - tx_center).norm() < min_distance || (sc.position - rx_center).norm() < min_distance);
                sc.velocity_tx = v;
                sc.acceleration_tx = a;
                sc.velocity_rx = v - v_rx;
                sc.acceleration_rx = a - a_rx;
                sc.cluster = c;
                geo.scatterers.push_back(sc);
            }
        }
        return geo;
    }

    void PathSet::align_delays(double offset)
    {
        if (delay.size() == 0)
            return;
        delay.array() += offset - delay.minCoeff();
    }

    std::vector<cplx> default_path_gains(const ScattererGeometry &geo, std::uint64_t seed)
    {
        geo.validate();
        Rng rng(derive_seed(seed, 0x6741696eULL));
        std::vector<cplx> g;
        double power = 0.0;
        for (const auto &sc : geo.scatterers)
        {
            const double wt = (geo.tx_antennas.front() - sc.position).norm();
            const double wr = (geo.rx_antennas.front() - sc.position).norm();
            const double mag = 1.0 / (wt * wr);
            g.push_back(std::polar(mag, uniform(rng, 0.0, 2.0 * pi)));
            power += mag * mag;
        }
        for (auto &v : g)
            v /= std::sqrt(power);
        return g;
    }

    PathSet path_params(const ScattererGeometry &geo, const std::vector<cplx> &gains, double midpoint_time, bool carrier_phase)
    {
        geo.validate();
        const int P = int(geo.scatterers.size());
        if (int(gains.size()) != P)
            throw DomainError("path_params: one gain per scatterer required");
        const int n_tx = geo.n_tx(), n_rx = geo.n_rx();
        const double c = speed_of_light, fc = geo.carrier;

        PathSet ps;
        ps.n_tx = n_tx;
        ps.n_rx = n_rx;
        ps.gain.resize(P, n_tx * n_rx);
        ps.delay.resize(P, n_tx * n_rx);
        ps.doppler.resize(P, n_tx * n_rx);
        for (int p = 0; p < P; ++p)
        {
            const auto &sc = geo.scatterers[std::size_t(p)];
            const Vec3 vt = sc.velocity_tx + midpoint_time * sc.acceleration_tx;
            const Vec3 vr = sc.velocity_rx + midpoint_time * sc.acceleration_rx;
            for (int r = 0; r < n_rx; ++r)
                for (int s = 0; s < n_tx; ++s)
                {
                    const Vec3 wt = geo.tx_antennas[std::size_t(s)] - sc.position;
                    const Vec3 wr = geo.rx_antennas[std::size_t(r)] - sc.position;
                    const double lt = wt.norm(), lr = wr.norm();
                    if (lt <= 0.0 || lr <= 0.0)
                        throw DomainError("path_params: zero path length");
                    const double nu_t = fc / c * vt.dot(wt) / lt;
                    const double nu_r = (fc + nu_t) / c * vr.dot(wr) / lr;
                    const int theta = r * n_tx + s;
                    const double tau = (lt + lr) / c;
                    ps.delay(p, theta) = tau;
                    ps.doppler(p, theta) = nu_t + nu_r;
                    // fc * tau is reduced modulo one cycle before forming the phase
                    const double cycles = fc * tau - std::floor(fc * tau);
                    ps.gain(p, theta) = carrier_phase ? gains[std::size_t(p)] * std::polar(1.0, -2.0 * pi * cycles)
                                                      : gains[std::size_t(p)];
                }
        }
        return ps;
    }

    CrossChannelBounds cross_channel_bounds(const ScattererGeometry &geo, double midpoint_time)
    {
        geo.validate();
        const double c = speed_of_light, fc = geo.carrier;
        const double dT = geo.tx_aperture(), dR = geo.rx_aperture();
        CrossChannelBounds b;
        b.tau_b = (dT + dR) / c;
        for (const auto &sc : geo.scatterers)
        {
            const Vec3 vt = sc.velocity_tx + midpoint_time * sc.acceleration_tx;
            const Vec3 vr = sc.velocity_rx + midpoint_time * sc.acceleration_rx;
            double wt_min = INFINITY, wr_min = INFINITY, nu_t_max = -INFINITY, nu_t_min = INFINITY;
            for (const auto &a : geo.tx_antennas)
            {
                const Vec3 w = a - sc.position;
                wt_min = std::min(wt_min, w.norm());
                const double nu_t = fc / c * vt.dot(w) / w.norm();
                nu_t_max = std::max(nu_t_max, nu_t);
                nu_t_min = std::min(nu_t_min, nu_t);
            }
            for (const auto &a : geo.rx_antennas)
                wr_min = std::min(wr_min, (a - sc.position).norm());
            const double f1 = fc + std::max(std::abs(nu_t_max), std::abs(nu_t_min));
            // The last term covers the receive-side Doppler scaling by f_c + nu_T differing between
            // transmit antennas; it is of relative size |v|/c against the others.
            const double bound = (fc * vt.norm() * dT / wt_min + f1 * vr.norm() * dR / wr_min) / c +
                                 (nu_t_max - nu_t_min) * vr.norm() / c;
            b.nu_b = std::max(b.nu_b, bound);
        }
        return b;
    }

    LeakageFilter::LeakageFilter(const FilterSpec &spec, double Ts) : spec_(spec), Ts_(Ts)
    {
        if (!(Ts > 0.0))
            throw ConfigError("LeakageFilter: sample period must be positive");
        if (spec.mode == FilterSpec::Mode::kronecker)
            return;
        if (!(spec.rolloff > 0.0 && spec.rolloff <= 1.0) || spec.oversampling <= 0 || spec.span <= 0)
            throw ConfigError("LeakageFilter: invalid roll-off, oversampling or span");

        const int os = spec.oversampling;
        const int n = spec.span * os;
        const double du = 1.0 / double(os);
        taps_.resize(2 * n + 1);
        double energy = 0.0;
        for (int k = -n; k <= n; ++k)
        {
            const double w = (std::abs(k) == n) ? 0.5 : 1.0;
            const double v = rrc(double(k) * du);
            taps_[k + n] = v;
            energy += w * v * v * du;
        }
        // Unit energy on the quadrature grid, so that phi^(0)(0) = 1 exactly
        norm_ = 1.0 / std::sqrt(energy);
        for (int k = -n; k <= n; ++k)
        {
            const double w = (std::abs(k) == n) ? 0.5 : 1.0;
            taps_[k + n] *= w * du * norm_;
        }
    }

    double LeakageFilter::rrc(double t) const
    {
        // Unit-energy root-raised-cosine for a unit symbol period, truncated to the span
        const double b = spec_.rolloff;
        if (std::abs(t) > double(spec_.span))
            return 0.0;
        if (std::abs(t) < 1e-12)
            return 1.0 - b + 4.0 * b / pi;
        if (std::abs(std::abs(t) - 1.0 / (4.0 * b)) < 1e-12)
            return b / std::sqrt(2.0) * ((1.0 + 2.0 / pi) * std::sin(pi / (4.0 * b)) + (1.0 - 2.0 / pi) * std::cos(pi / (4.0 * b)));
        const double num = std::sin(pi * t * (1.0 - b)) + 4.0 * b * t * std::cos(pi * t * (1.0 + b));
        const double den = pi * t * (1.0 - (4.0 * b * t) * (4.0 * b * t));
        return num / den;
    }

    cplx LeakageFilter::phi(double nu, double x) const
    {
        if (spec_.mode == FilterSpec::Mode::kronecker)
            return std::abs(x) < 1e-9 ? 1.0 : 0.0;
        if (std::abs(x) > 2.0 * spec_.span)
            return 0.0;
        const int os = spec_.oversampling;
        const int n = spec_.span * os;
        cplx acc = 0.0;
        for (int k = -n; k <= n; ++k)
        {
            const double u = double(k) / double(os);
            const double f1 = rrc(x - u);
            if (f1 == 0.0)
                continue;
            acc += f1 * norm_ * taps_[k + n] * std::polar(1.0, -2.0 * pi * nu * Ts_ * u);
        }
        return acc;
    }

    CVec LeakageFilter::phi_row(double nu, double shift, int count) const
    {
        CVec out = CVec::Zero(count);
        if (spec_.mode == FilterSpec::Mode::kronecker)
        {
            for (int m = 0; m < count; ++m)
                out[m] = phi(nu, double(m) - shift);
            return out;
        }
        // With u_k = k/os, the points x_m - u_k = (m*os - k)/os - shift lie on one shifted grid,
        // so the filter is evaluated once per grid point and reused across m.
        const int os = spec_.oversampling;
        const int n = spec_.span * os;
        const int j_lo = -n, j_hi = (count - 1) * os + n;
        RVec f(j_hi - j_lo + 1);
        for (int j = j_lo; j <= j_hi; ++j)
            f[j - j_lo] = rrc(double(j) / double(os) - shift) * norm_;
        CVec w(2 * n + 1);
        for (int k = -n; k <= n; ++k)
            w[k + n] = taps_[k + n] * std::polar(1.0, -2.0 * pi * nu * Ts_ * double(k) / double(os));
        for (int m = 0; m < count; ++m)
        {
            if (std::abs(double(m) - shift) > 2.0 * spec_.span)
                continue;
            cplx acc = 0.0;
            for (int k = -n; k <= n; ++k)
                acc += f[m * os - k - j_lo] * w[k + n];
            out[m] = acc;
        }
        return out;
    }

    double psi(double x, int L_r)
    {
        const double s = std::sin(pi * x / double(L_r));
        if (std::abs(s) < 1e-12)
            return std::cos(pi * x) / std::cos(pi * x / double(L_r));
        return std::sin(pi * x) / (double(L_r) * s);
    }

    cplx leakage_kernel(const PathSet &paths, int p, int theta, int m, int i, const LeakageFilter &filter, const SystemConfig &cfg)
    {
        const double tau = paths.delay(p, theta), nu = paths.doppler(p, theta);
        return filter.phi(nu, double(m) - tau / cfg.Ts) * psi(double(i) - nu * cfg.Ts * double(cfg.L_r()), cfg.L_r());
    }

    std::vector<CMat> spreading_model(const PathSet &paths, const SystemConfig &cfg, const LeakageFilter &filter, int n_delay)
    {
        const int Lr = cfg.L_r();
        std::vector<CMat> out;
        for (int theta = 0; theta < paths.channels(); ++theta)
        {
            CMat S = CMat::Zero(n_delay, Lr);
            for (int p = 0; p < paths.n_paths(); ++p)
            {
                const double tau = paths.delay(p, theta), nu = paths.doppler(p, theta);
                const CVec ph = filter.phi_row(nu, tau / cfg.Ts, n_delay);
                CVec dop(Lr);
                for (int i = 0; i < Lr; ++i)
                    dop[i] = std::polar(1.0, pi * (nu * cfg.Ts - double(i) / double(Lr)) * double(Lr - 1)) *
                             psi(double(i) - nu * cfg.Ts * double(Lr), Lr);
                S.noalias() += (paths.gain(p, theta) * ph) * dop.transpose();
            }
            out.push_back(std::move(S));
        }
        return out;
    }

    std::vector<CMat> spreading_from_ir(const TimeVaryingIR &H, const SystemConfig &cfg)
    {
        const int Lr = cfg.L_r();
        if (H.n_len() < Lr)
            throw DomainError("spreading_from_ir: impulse response shorter than L_r");
        Eigen::FFT<double> fft;
        std::vector<CMat> out;
        std::vector<cplx> col(static_cast<std::size_t>(Lr)), spec;
        for (const auto &h : H.taps)
        {
            CMat S(h.cols(), Lr);
            for (Eigen::Index m = 0; m < h.cols(); ++m)
            {
                for (int n = 0; n < Lr; ++n)
                    col[std::size_t(n)] = h(n, m);
                fft.fwd(spec, col);
                for (int i = 0; i < Lr; ++i)
                    S(m, i) = spec[std::size_t(i)] / double(Lr);
            }
            out.push_back(std::move(S));
        }
        return out;
    }

    CoefficientTensor dft_coeffs(const std::vector<CMat> &S, const PulsePair &pulses, const SystemConfig &cfg, int rows, int cols)
    {
        rows = rows > 0 ? rows : cfg.D;
        cols = cols > 0 ? cols : cfg.J;
        if (cols % 2 != 0)
            throw ConfigError("dft_coeffs: Doppler extent must be even");
        const int Lr = cfg.L_r(), L = cfg.L, N = cfg.N;
        for (const auto &s : S)
            if (s.cols() != Lr)
                throw DomainError("dft_coeffs: spreading function must cover one L_r period in Doppler");

        const AmbiguityTable A(pulses, rows, Lr);
        CoefficientTensor F = CoefficientTensor::zeros(rows, cols, int(S.size()), CoefficientDomain::delay_doppler);
        for (std::size_t theta = 0; theta < S.size(); ++theta)
        {
            const CMat &s = S[theta];
            for (int m = 0; m < std::min<int>(rows, int(s.rows())); ++m)
                for (int i = -cols / 2; i < cols / 2; ++i)
                {
                    cplx acc = 0.0;
                    for (int q = 0; q < N; ++q)
                    {
                        long t = (long(i) + long(q) * L) % Lr;
                        if (t < 0)
                            t += Lr;
                        acc += s(m, Eigen::Index(t)) * std::conj(A(m, t));
                    }
                    F.at(m, i, int(theta)) = acc;
                }
        }
        return F;
    }

    TimeVaryingIR discrete_ir(const PathSet &paths, const LeakageFilter &filter, const SystemConfig &cfg, int n_delay, int *clipped)
    {
        const int Lr = cfg.L_r();
        if (n_delay <= 0 || n_delay > cfg.K)
            throw ConfigError("discrete_ir: delay range must lie in 1..K");
        TimeVaryingIR H;
        H.n_rx = paths.n_rx;
        H.n_tx = paths.n_tx;
        int n_clipped = 0;
        for (int theta = 0; theta < paths.channels(); ++theta)
        {
            CMat h = CMat::Zero(Lr, n_delay);
            for (int p = 0; p < paths.n_paths(); ++p)
            {
                const double tau = paths.delay(p, theta), nu = paths.doppler(p, theta);
                const double shift = tau / cfg.Ts;
                if (shift < 0.0 || shift > double(n_delay - 1))
                    ++n_clipped;
                const CVec ph = filter.phi_row(nu, shift, n_delay);
                CVec rot(Lr);
                for (int n = 0; n < Lr; ++n)
                    rot[n] = std::polar(1.0, 2.0 * pi * nu * cfg.Ts * double(n));
                h.noalias() += (paths.gain(p, theta) * rot) * ph.transpose();
            }
            H.taps.push_back(std::move(h));
        }
        if (clipped)
            *clipped = n_clipped;
        return H;
    }

    SparsityBudget sparsity_budget(int dm_eff, int di_eff, double tau_b, double nu_b, const BlockTiling &T, int n_paths, const SystemConfig &cfg)
    {
        if (dm_eff <= 0 || di_eff <= 0)
            throw DomainError("sparsity_budget: support widths must be positive");
        auto ceil_div = [](int a, int b) { return (a + b - 1) / b; };
        SparsityBudget sb;
        sb.n_single = (ceil_div(dm_eff, T.dm) + 1) * (ceil_div(di_eff, T.di) + 1);
        const int dm = dm_eff + int(std::ceil(tau_b / cfg.Ts));
        const int di = di_eff + int(std::ceil(nu_b * cfg.Ts * double(cfg.L_r())));
        sb.n_joint = (ceil_div(dm, T.dm) + 1) * (ceil_div(di, T.di) + 1);
        sb.s_single = long(n_paths) * sb.n_single;
        sb.s_joint = long(n_paths) * sb.n_joint;
        return sb;
    }

    namespace
    {
        // Length of the shortest run of consecutive entries holding `fraction` of the total
        int shortest_window(const std::vector<double> &e, double fraction)
        {
            double total = 0.0;
            for (double v : e)
                total += v;
            if (total <= 0.0)
                return 1;
            const double target = fraction * total;
            std::size_t best = e.size(), lo = 0;
            double run = 0.0;
            for (std::size_t hi = 0; hi < e.size(); ++hi)
            {
                run += e[hi];
                while (lo <= hi && run - e[lo] >= target)
                    run -= e[lo++];
                if (run >= target)
                    best = std::min(best, hi - lo + 1);
            }
            return int(best);
        }
    }

    SupportWidths effective_support_widths(const LeakageFilter &filter, const SystemConfig &cfg, double fraction)
    {
        SupportWidths w;
        if (filter.spec().mode == FilterSpec::Mode::kronecker)
            w.delay = 1;
        else
        {
            const int span = 2 * filter.spec().span;
            std::vector<double> e;
            for (int m = -span; m <= span + 1; ++m)
                e.push_back(std::norm(filter.phi(0.0, double(m) - 0.5)));
            w.delay = shortest_window(e, fraction);
        }
        const int Lr = cfg.L_r();
        std::vector<double> e;
        for (int i = -Lr / 2; i < Lr - Lr / 2; ++i)
            e.push_back(psi(double(i) - 0.5, Lr) * psi(double(i) - 0.5, Lr));
        w.doppler = shortest_window(e, fraction);
        return w;
    }
}
