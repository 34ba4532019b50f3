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

#include "mgcs/basisopt.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>

#include "mgcs/random.hpp"

namespace mgcs
{
    static_assert(std::endian::native == std::endian::little, "basis files are written in little-endian byte order");

    namespace
    {
        constexpr double smoothing = 1e-8;

        class Fnv1a
        {
        public:
            void bytes(const void *p, std::size_t n)
            {
                const auto *c = static_cast<const unsigned char *>(p);
                for (std::size_t k = 0; k < n; ++k)
                {
                    h_ ^= c[k];
                    h_ *= 0x100000001b3ULL;
                }
            }
            template <class T> void value(const T &v) { bytes(&v, sizeof v); }
            std::uint64_t digest() const { return h_; }

        private:
            std::uint64_t h_ = 0xcbf29ce484222325ULL;
        };

        // psi^(nu)(x) including the phase that makes it periodic in x with period L_r
        cplx psi_nu(double x, double nu, const SystemConfig &cfg)
        {
            const int Lr = cfg.L_r();
            return std::polar(1.0, pi * (nu * cfg.Ts - x / double(Lr)) * double(Lr - 1)) *
                   psi(x - nu * cfg.Ts * double(Lr), Lr);
        }

        CVec kernel_row(double nu, int m, const AmbiguityTable &amb, const SystemConfig &cfg)
        {
            const int J = cfg.J, L = cfg.L, N = cfg.N, Lr = cfg.L_r();
            CVec k(J);
            for (int i = -J / 2; i < J / 2; ++i)
            {
                cplx acc = 0.0;
                for (int q = 0; q < N; ++q)
                {
                    const long x = long(i) + long(q) * L;
                    acc += psi_nu(double(x), nu, cfg) * std::conj(amb(m, ((x % Lr) + Lr) % Lr));
                }
                k[i + J / 2] = acc;
            }
            CVec c(J);
            for (int l = 0; l < J; ++l)
            {
                cplx acc = 0.0;
                for (int i = -J / 2; i < J / 2; ++i)
                    acc += std::polar(1.0, 2.0 * pi * double(((long(l) * i) % J + J) % J) / J) * k[i + J / 2];
                c[l] = acc;
            }
            return c;
        }

        void require_unitary_blocks(const std::vector<CMat> &blocks)
        {
            for (const CMat &V : blocks)
                if (!is_unitary(V))
                    throw ConfigError("basis block is not unitary");
        }

        // One delay strip of the decomposed objective. The kernel rows of every m in the strip are
        // concatenated over samples into J x (R * channels) matrices; groups are the tiling blocks
        // that meet the strip, evaluated separately per sample.
        class Strip
        {
        public:
            Strip(const ObjectiveSamples &samples, const BlockTiling &tiling, int m_first, int width)
                : R_(samples.count()), X_(samples.C.empty() ? 0 : int(samples.C.front().cols())), J_(tiling.J)
            {
                if (samples.C.size() != std::size_t(R_))
                    throw ConfigError("samples lack kernel matrices");
                std::map<int, int> ids;
                for (int dm = 0; dm < width; ++dm)
                {
                    const int m = m_first + dm;
                    CMat Cm(J_, Eigen::Index(R_) * X_);
                    for (int r = 0; r < R_; ++r)
                        Cm.middleCols(Eigen::Index(r) * X_, X_) = samples.C[std::size_t(r)].middleRows(Eigen::Index(m) * J_, J_);
                    C_.push_back(std::move(Cm));
                    std::vector<int> g(static_cast<std::size_t>(J_));
                    for (int i = -J_ / 2; i < J_ / 2; ++i)
                    {
                        const int b = tiling.block_of(m, i);
                        auto it = ids.try_emplace(b, int(ids.size())).first;
                        g[std::size_t(i + J_ / 2)] = it->second;
                    }
                    gid_.push_back(std::move(g));
                }
                groups_ = int(ids.size());
            }

            int width() const { return int(C_.size()); }
            const CMat &kernel(int dm) const { return C_[std::size_t(dm)]; }

            // groups x R energies of the row blocks Z_m
            RMat energies(const std::vector<CMat> &Z) const
            {
                RMat E = RMat::Zero(groups_, R_);
                for (int dm = 0; dm < width(); ++dm)
                {
                    const RMat P = Z[std::size_t(dm)].cwiseAbs2();
                    for (int r = 0; r < J_; ++r)
                    {
                        const int g = gid_[std::size_t(dm)][std::size_t(r)];
                        for (int s = 0; s < R_; ++s)
                            E(g, s) += P.row(r).segment(Eigen::Index(s) * X_, X_).sum();
                    }
                }
                return E;
            }

            double exact(const std::vector<CMat> &V) const
            {
                std::vector<CMat> Z;
                for (int dm = 0; dm < width(); ++dm)
                    Z.push_back(V[std::size_t(dm)] * C_[std::size_t(dm)]);
                return energies(Z).cwiseSqrt().sum();
            }

            // Smoothed linearized objective at updates A for the products M_m = V_m C_m;
            // fills the gradient with respect to Hermitian A when requested
            double linearized(const std::vector<CMat> &A, const std::vector<CMat> &M, std::vector<CMat> *grad) const
            {
                std::vector<CMat> Z;
                for (int dm = 0; dm < width(); ++dm)
                    Z.push_back(M[std::size_t(dm)] + I1 * (A[std::size_t(dm)] * M[std::size_t(dm)]));
                const RMat root = (energies(Z).array() + smoothing * smoothing).sqrt().matrix();
                if (grad)
                {
                    grad->clear();
                    for (int dm = 0; dm < width(); ++dm)
                    {
                        CMat W = Z[std::size_t(dm)];
                        for (int r = 0; r < J_; ++r)
                        {
                            const int g = gid_[std::size_t(dm)][std::size_t(r)];
                            for (int s = 0; s < R_; ++s)
                                W.row(r).segment(Eigen::Index(s) * X_, X_) /= root(g, s);
                        }
                        const CMat G = -I1 * (W * M[std::size_t(dm)].adjoint());
                        grad->push_back(0.5 * (G + G.adjoint()));
                    }
                }
                return root.sum();
            }

        private:
            int R_;
            int X_;
            int J_;
            int groups_ = 0;
            std::vector<CMat> C_;
            std::vector<std::vector<int>> gid_;
        };

        // Euclidean projection onto Hermitian matrices with entries of modulus at most eps
        void project_box(CMat &A, double eps)
        {
            A = 0.5 * (A + A.adjoint()).eval();
            for (Eigen::Index c = 0; c < A.cols(); ++c)
            {
                A(c, c) = std::clamp(A(c, c).real(), -eps, eps);
                for (Eigen::Index r = 0; r < c; ++r)
                {
                    const double a = std::abs(A(r, c));
                    if (a > eps)
                    {
                        A(r, c) *= eps / a;
                        A(c, r) = std::conj(A(r, c));
                    }
                }
            }
        }

        double inner(const std::vector<CMat> &a, const std::vector<CMat> &b)
        {
            double s = 0.0;
            for (std::size_t k = 0; k < a.size(); ++k)
                s += (a[k].adjoint() * b[k]).trace().real();
            return s;
        }

        std::vector<CMat> convex_step(const Strip &strip, const std::vector<CMat> &V, double eps, int max_iters,
                                      ConvexStepInfo *info)
        {
            const int w = strip.width();
            const Eigen::Index J = V.front().rows();
            // Strictly inside the open box
            const double box = eps * (1.0 - 1e-12);
            std::vector<CMat> M;
            for (int dm = 0; dm < w; ++dm)
                M.push_back(V[std::size_t(dm)] * strip.kernel(dm));

            std::vector<CMat> A(std::size_t(w), CMat::Zero(J, J)), g;
            double f = strip.linearized(A, M, &g);
            ConvexStepInfo local;
            local.value_at_zero = f;

            // The minimizer of the linear model over the box is a competitive starting point
            std::vector<CMat> corner = g;
            double gmax = 0.0;
            for (CMat &c : corner)
            {
                gmax = std::max(gmax, c.cwiseAbs().maxCoeff());
                for (Eigen::Index k = 0; k < c.size(); ++k)
                {
                    const double a = std::abs(c(k));
                    c(k) = a > 0.0 ? -box * c(k) / a : cplx(0.0);
                }
                project_box(c, box);
            }
            if (gmax == 0.0)
            {
                local.converged = true;
                local.value = f;
                if (info)
                    *info = local;
                return A;
            }
            std::vector<CMat> gc;
            const double fc = strip.linearized(corner, M, &gc);
            if (fc < f)
            {
                A = corner;
                f = fc;
                g = gc;
            }

            double t = box / gmax;
            int it = 0;
            for (; it < max_iters; ++it)
            {
                std::vector<CMat> trial(static_cast<std::size_t>(w)), d(static_cast<std::size_t>(w));
                double ft = f;
                bool moved = false;
                for (int bt = 0; bt < 60; ++bt)
                {
                    for (int dm = 0; dm < w; ++dm)
                    {
                        trial[std::size_t(dm)] = A[std::size_t(dm)] - t * g[std::size_t(dm)];
                        project_box(trial[std::size_t(dm)], box);
                        d[std::size_t(dm)] = trial[std::size_t(dm)] - A[std::size_t(dm)];
                    }
                    const double dd = inner(d, d);
                    if (dd == 0.0)
                        break;
                    ft = strip.linearized(trial, M, nullptr);
                    if (ft <= f + inner(g, d) + dd / (2.0 * t))
                    {
                        moved = true;
                        break;
                    }
                    t *= 0.5;
                }
                if (!moved)
                {
                    local.converged = true;
                    break;
                }
                const double decrease = f - ft;
                A = std::move(trial);
                f = strip.linearized(A, M, &g);
                if (decrease <= 1e-12 * std::max(f, 1e-300))
                {
                    local.converged = true;
                    break;
                }
                t *= 2.0;
            }
            local.iterations = it;
            local.value = f;
            if (info)
                *info = local;
            return A;
        }
    }

    void DelayDopplerPrior::validate() const
    {
        if (!(tau_max >= 0.0) || !(nu_max >= 0.0))
            throw ConfigError("prior extents must be nonnegative");
        for (const auto &o : offsets)
        {
            if (o.tau_hi < o.tau_lo || o.nu_hi < o.nu_lo)
                throw ConfigError("prior offset rectangle has negative area");
            if (o.tau_lo < 0.0)
                throw ConfigError("prior delay offsets must keep delays nonnegative");
        }
    }

    std::uint64_t DelayDopplerPrior::hash() const
    {
        Fnv1a h;
        h.value(tau_max);
        h.value(nu_max);
        for (const auto &o : offsets)
        {
            h.value(o.tau_lo);
            h.value(o.tau_hi);
            h.value(o.nu_lo);
            h.value(o.nu_hi);
        }
        return h.digest();
    }

    DelayDopplerPrior DelayDopplerPrior::from_system(const SystemConfig &cfg)
    {
        DelayDopplerPrior p;
        p.tau_max = double(cfg.N - cfg.K) * cfg.Ts;
        p.nu_max = 0.03 * cfg.subcarrier_spacing();
        p.offsets.assign(std::size_t(cfg.channels() - 1), OffsetRect{0.0, 0.0, -1.4, 1.4});
        return p;
    }

    KernelContext::KernelContext(const PulsePair &pulses, const SystemConfig &cfg, const LeakageFilter &filter)
        : cfg_(cfg), filter_(filter), amb_(pulses, cfg.D, cfg.L_r())
    {
        cfg.validate();
    }

    CVec KernelContext::c_row(double nu, int m) const
    {
        if (m < 0 || m >= cfg_.D)
            throw DomainError("delay index outside the rectangle");
        return kernel_row(nu, m, amb_, cfg_);
    }

    CVec KernelContext::c_vector(double tau, double nu) const
    {
        const int D = cfg_.D, J = cfg_.J;
        const CVec ph = filter_.phi_row(nu, tau / cfg_.Ts, D);
        CVec c(Eigen::Index(J) * D);
        for (int m = 0; m < D; ++m)
            c.segment(Eigen::Index(m) * J, J) = std::sqrt(double(D)) * ph[m] * c_row(nu, m);
        return c;
    }

    cplx c_kernel(double nu, int m, int lambda, const PulsePair &pulses, const SystemConfig &cfg)
    {
        if (m < 0 || lambda < 0 || lambda >= cfg.J)
            throw DomainError("kernel index out of range");
        const AmbiguityTable amb(pulses, m + 1, cfg.L_r());
        return kernel_row(nu, m, amb, cfg)[lambda];
    }

    ObjectiveSamples sample_prior(const DelayDopplerPrior &prior, int R, std::uint64_t seed, const KernelContext *ctx)
    {
        prior.validate();
        if (R < 1)
            throw ConfigError("need at least one sample");
        const int X = prior.channels();
        if (ctx && ctx->config().channels() != X)
            throw ConfigError("prior channel count differs from the system");
        auto draw = [](Rng &rng, double lo, double hi) { return hi > lo ? uniform(rng, lo, hi) : lo; };

        Rng rng(seed);
        ObjectiveSamples s;
        s.tau.resize(R, X);
        s.nu.resize(R, X);
        for (int r = 0; r < R; ++r)
        {
            s.tau(r, 0) = draw(rng, 0.0, prior.tau_max);
            s.nu(r, 0) = draw(rng, -prior.nu_max, prior.nu_max);
            for (int x = 1; x < X; ++x)
            {
                const OffsetRect &o = prior.offsets[std::size_t(x - 1)];
                s.tau(r, x) = s.tau(r, 0) + draw(rng, o.tau_lo, o.tau_hi);
                s.nu(r, x) = s.nu(r, 0) + draw(rng, o.nu_lo, o.nu_hi);
            }
        }
        if (ctx)
            for (int r = 0; r < R; ++r)
                s.C.push_back(build_C_matrix(s.tau.row(r).transpose(), s.nu.row(r).transpose(), *ctx));
        return s;
    }

    CMat build_C_matrix(const RVec &tau, const RVec &nu, const KernelContext &ctx)
    {
        if (tau.size() != nu.size())
            throw ConfigError("delay and Doppler counts differ");
        CMat C(ctx.config().JD(), tau.size());
        for (Eigen::Index x = 0; x < tau.size(); ++x)
            C.col(x) = ctx.c_vector(tau[x], nu[x]);
        return C;
    }

    double mc_objective(const std::vector<CMat> &blocks, const ObjectiveSamples &samples, const BlockTiling &tiling)
    {
        require_unitary_blocks(blocks);
        if (int(blocks.size()) != tiling.D || blocks.front().rows() != tiling.J)
            throw ConfigError("blocks do not match the tiling");
        const int J = tiling.J;
        double total = 0.0;
        for (const CMat &C : samples.C)
        {
            CoefficientTensor G = CoefficientTensor::zeros(tiling.D, J, int(C.cols()), CoefficientDomain::basis);
            for (int m = 0; m < tiling.D; ++m)
                G.values.middleRows(Eigen::Index(m) * J, J) = blocks[std::size_t(m)] * C.middleRows(Eigen::Index(m) * J, J);
            total += group_frobenius_norm(G, tiling);
        }
        return total;
    }

    CMat hermitian_unitary_exp(const CMat &A)
    {
        if (A.rows() != A.cols())
            throw DomainError("matrix exponential of a non-square matrix");
        if ((A - A.adjoint()).norm() > 1e-12 * std::max(1.0, A.norm()))
            throw DomainError("matrix is not Hermitian");
        const Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (A + A.adjoint()));
        CVec e(A.rows());
        for (Eigen::Index k = 0; k < A.rows(); ++k)
            e[k] = std::polar(1.0, es.eigenvalues()[k]);
        return es.eigenvectors() * e.asDiagonal() * es.eigenvectors().adjoint();
    }

    std::vector<CMat> convex_update_step(const std::vector<CMat> &blocks, int m_first, double eps,
                                         const ObjectiveSamples &samples, const BlockTiling &tiling, ConvexStepInfo *info)
    {
        if (!(eps > 0.0))
            throw ConfigError("update bound must be positive");
        if (blocks.empty() || m_first < 0 || m_first + int(blocks.size()) > tiling.D)
            throw ConfigError("strip outside the delay range");
        const Strip strip(samples, tiling, m_first, int(blocks.size()));
        return convex_step(strip, blocks, eps, 200, info);
    }

    OptimizeResult optimize_blocks(const ObjectiveSamples &samples, const BlockTiling &tiling, const SystemConfig &cfg,
                                   const OptimizeControls &controls)
    {
        if (tiling.D != cfg.D || tiling.J != cfg.J)
            throw ConfigError("tiling does not match the configuration");
        if (cfg.D % tiling.dm != 0)
            throw ConfigError("delay strips must tile the rectangle");

        std::vector<CMat> V = dft_blocks(cfg.D, cfg.J);
        OptimizeResult out;
        bool changed = false;
        for (int m0 = 0; m0 < cfg.D; m0 += tiling.dm)
        {
            const Strip strip(samples, tiling, m0, tiling.dm);
            std::vector<CMat> cur(V.begin() + m0, V.begin() + m0 + tiling.dm);
            StripDiagnostics diag;
            double y = strip.exact(cur);
            diag.objective.push_back(y);
            double eps = controls.eps_init;
            for (int n = 0; n < controls.max_iters && eps >= controls.eps_floor; ++n)
            {
                ConvexStepInfo info;
                const std::vector<CMat> A = convex_step(strip, cur, eps, controls.convex_iters, &info);
                if (!info.converged)
                    ++diag.unconverged_steps;
                std::vector<CMat> next;
                for (int dm = 0; dm < tiling.dm; ++dm)
                    next.push_back(hermitian_unitary_exp(A[std::size_t(dm)]) * cur[std::size_t(dm)]);
                const double y_next = strip.exact(next);
                if (y_next < y)
                {
                    cur = std::move(next);
                    y = y_next;
                    ++diag.accepted;
                }
                else
                {
                    eps *= 0.5;
                    ++diag.rejected;
                }
                diag.objective.push_back(y);
            }
            changed = changed || diag.accepted > 0;
            out.initial_objective += diag.objective.front();
            out.final_objective += y;
            std::copy(cur.begin(), cur.end(), V.begin() + m0);
            out.strips.push_back(std::move(diag));
        }
        out.basis = changed ? BasisSpec::from_blocks(std::move(V), "optimized") : BasisSpec::dft(cfg.D, cfg.J);
        return out;
    }

    std::uint64_t basis_fingerprint(const SystemConfig &cfg, const std::string &pulse_id, std::uint64_t prior_hash)
    {
        Fnv1a h;
        for (int v : {cfg.K, cfg.N, cfg.L, cfg.D, cfg.J})
            h.value(std::int64_t(v));
        h.bytes(pulse_id.data(), pulse_id.size());
        h.value(prior_hash);
        return h.digest();
    }

    namespace
    {
        constexpr char basis_magic[4] = {'M', 'G', 'C', 'B'};
        constexpr std::uint32_t basis_version = 1;
    }

    void save_basis(const BasisFile &file, const std::filesystem::path &path)
    {
        std::ofstream f(path, std::ios::binary);
        if (!f)
            throw FormatError("cannot open " + path.string() + " for writing");
        const auto J = std::uint32_t(file.basis.J()), D = std::uint32_t(file.basis.D()), dm = std::uint32_t(file.dm);
        const std::uint8_t tag = file.basis.is_dft() ? 1 : 0;
        f.write(basis_magic, 4);
        f.write(reinterpret_cast<const char *>(&basis_version), sizeof basis_version);
        f.write(reinterpret_cast<const char *>(&J), sizeof J);
        f.write(reinterpret_cast<const char *>(&D), sizeof D);
        f.write(reinterpret_cast<const char *>(&dm), sizeof dm);
        f.write(reinterpret_cast<const char *>(&file.fingerprint), sizeof file.fingerprint);
        f.write(reinterpret_cast<const char *>(&tag), sizeof tag);
        for (const CMat &V : tag ? std::vector<CMat>{} : file.basis.blocks())
        {
            const Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = V;
            f.write(reinterpret_cast<const char *>(rm.data()), std::streamsize(rm.size() * sizeof(cplx)));
        }
        if (!f)
            throw FormatError("write to " + path.string() + " failed");
    }

    BasisFile load_basis(const std::filesystem::path &path, std::uint64_t expected_fingerprint)
    {
        std::ifstream f(path, std::ios::binary);
        if (!f)
            throw FormatError("cannot open " + path.string());
        char m[4];
        std::uint32_t ver = 0, J = 0, D = 0, dm = 0;
        BasisFile out;
        std::uint8_t tag = 0;
        f.read(m, 4);
        f.read(reinterpret_cast<char *>(&ver), sizeof ver);
        f.read(reinterpret_cast<char *>(&J), sizeof J);
        f.read(reinterpret_cast<char *>(&D), sizeof D);
        f.read(reinterpret_cast<char *>(&dm), sizeof dm);
        f.read(reinterpret_cast<char *>(&out.fingerprint), sizeof out.fingerprint);
        f.read(reinterpret_cast<char *>(&tag), sizeof tag);
        if (!f || std::memcmp(m, basis_magic, 4) != 0 || ver != basis_version || J == 0 || D == 0 || J > 65536 || D > 65536)
            throw FormatError(path.string() + ": not a basis file");
        if (expected_fingerprint != 0 && out.fingerprint != expected_fingerprint)
            throw FingerprintMismatch(path.string() + ": basis was optimized for a different system");
        out.dm = int(dm);
        if (tag == 1)
        {
            out.basis = BasisSpec::dft(int(D), int(J));
            return out;
        }
        std::vector<CMat> blocks;
        for (std::uint32_t b = 0; b < D; ++b)
        {
            Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(J, J);
            f.read(reinterpret_cast<char *>(rm.data()), std::streamsize(rm.size() * sizeof(cplx)));
            if (!f)
                throw FormatError(path.string() + ": truncated data");
            blocks.push_back(rm);
        }
        out.basis = BasisSpec::from_blocks(std::move(blocks), "file");
        return out;
    }
}
