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

#include "mgcs/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

namespace mgcs
{
    namespace
    {
        // Orthonormal basis of a growing set of columns of phi (Gram-Schmidt with one
        // reorthogonalization pass). Dependent columns are recorded but not added to the basis;
        // in that case coefficients come from a minimum-norm least-squares solve instead.
        class IncrementalQr
        {
        public:
            explicit IncrementalQr(const CMat &phi) : phi_(phi), q_(phi.rows(), 0), r_(0, 0) {}

            void append(std::span<const std::size_t> cols)
            {
                for (std::size_t j : cols)
                {
                    cols_.push_back(j);
                    CVec v = phi_.col(Eigen::Index(j));
                    const double n0 = v.norm();
                    const Eigen::Index k = q_.cols();
                    CVec c = CVec::Zero(k);
                    if (k > 0)
                    {
                        c = q_.adjoint() * v;
                        v.noalias() -= q_ * c;
                        CVec c2 = q_.adjoint() * v;
                        v.noalias() -= q_ * c2;
                        c += c2;
                    }
                    const double nv = v.norm();
                    if (n0 == 0.0 || nv <= 1e-10 * n0)
                    {
                        deficient_ = true;
                        continue;
                    }
                    q_.conservativeResize(Eigen::NoChange, k + 1);
                    q_.col(k) = v / nv;
                    r_.conservativeResize(k + 1, k + 1);
                    r_.row(k).setZero();
                    r_.col(k).head(k) = c;
                    r_(k, k) = nv;
                }
            }

            CVec residual(const CVec &y) const
            {
                if (q_.cols() == 0)
                    return y;
                return y - q_ * (q_.adjoint() * y);
            }

            // Least-squares coefficients of y on the selected columns, in selection order
            CVec coefficients(const CVec &y) const
            {
                if (cols_.empty())
                    return CVec();
                if (!deficient_)
                    return r_.triangularView<Eigen::Upper>().solve(q_.adjoint() * y);
                CMat A(phi_.rows(), Eigen::Index(cols_.size()));
                for (std::size_t t = 0; t < cols_.size(); ++t)
                    A.col(Eigen::Index(t)) = phi_.col(Eigen::Index(cols_[t]));
                return Eigen::CompleteOrthogonalDecomposition<CMat>(A).solve(y);
            }

            const std::vector<std::size_t> &columns() const { return cols_; }
            bool deficient() const { return deficient_; }

        private:
            const CMat &phi_;
            CMat q_;
            CMat r_;
            std::vector<std::size_t> cols_;
            bool deficient_ = false;
        };

        void check_system(const CMat &phi, const CVec &y, const Partition &P, const char *who)
        {
            if (phi.rows() != y.size())
                throw DomainError(std::string(who) + ": measurement length does not match the matrix");
            if (std::size_t(phi.cols()) != P.total_length())
                throw DomainError(std::string(who) + ": partition does not cover the matrix columns");
        }

        std::vector<std::size_t> group_columns(const Partition &P, const std::vector<std::size_t> &groups)
        {
            std::vector<std::size_t> cols;
            for (std::size_t b : groups)
                cols.insert(cols.end(), P.group(b).begin(), P.group(b).end());
            return cols;
        }

        CVec least_squares(const CMat &phi, const std::vector<std::size_t> &cols, const CVec &y)
        {
            CMat A(phi.rows(), Eigen::Index(cols.size()));
            for (std::size_t t = 0; t < cols.size(); ++t)
                A.col(Eigen::Index(t)) = phi.col(Eigen::Index(cols[t]));
            return Eigen::CompleteOrthogonalDecomposition<CMat>(A).solve(y);
        }

        // Greedy joint group pursuit shared by G-OMP (one channel) and G-DCS-SOMP.
        // All channels share the selected groups; each transmit index keeps one factorization.
        RecoveryResult joint_pursuit(const std::vector<CMat> &phi, const std::vector<CVec> &y,
                                     const std::vector<std::size_t> &tx_of, const Partition &P, const StopRule &stop)
        {
            const std::size_t n_ch = y.size();
            const std::size_t B = P.group_count();
            const Eigen::Index M = phi.front().cols();

            std::vector<IncrementalQr> qr;
            qr.reserve(phi.size());
            for (const auto &A : phi)
                qr.emplace_back(A);

            std::vector<CVec> r = y;
            auto total_residual = [&]
            {
                double s = 0.0;
                for (const auto &v : r)
                    s += v.squaredNorm();
                return std::sqrt(s);
            };

            RecoveryResult res;
            std::vector<char> chosen(B, 0);
            double rn = total_residual();
            res.residual_history.push_back(rn);

            while (rn > stop.residual_tol && res.selected_groups.size() < std::min(stop.max_groups, B))
            {
                RVec score = RVec::Zero(Eigen::Index(B));
                for (std::size_t s = 0; s < phi.size(); ++s)
                {
                    std::vector<Eigen::Index> members;
                    for (std::size_t t = 0; t < n_ch; ++t)
                        if (tx_of[t] == s)
                            members.push_back(Eigen::Index(t));
                    if (members.empty())
                        continue;
                    CMat Rs(phi[s].rows(), Eigen::Index(members.size()));
                    for (std::size_t t = 0; t < members.size(); ++t)
                        Rs.col(Eigen::Index(t)) = r[std::size_t(members[t])];
                    const RVec corr = (phi[s].adjoint() * Rs).rowwise().squaredNorm();
                    for (std::size_t b = 0; b < B; ++b)
                        for (std::size_t j : P.group(b))
                            score[Eigen::Index(b)] += corr[Eigen::Index(j)];
                }
                for (std::size_t b = 0; b < B; ++b)
                    if (chosen[b])
                        score[Eigen::Index(b)] = -1.0;

                Eigen::Index best = 0;
                const double best_score = score.maxCoeff(&best); // maxCoeff returns the first maximum
                if (best_score <= 0.0)
                    break;

                chosen[std::size_t(best)] = 1;
                res.selected_groups.push_back(std::size_t(best));
                for (auto &f : qr)
                    f.append(P.group(std::size_t(best)));
                for (std::size_t t = 0; t < n_ch; ++t)
                    r[t] = qr[tx_of[t]].residual(y[t]);

                ++res.iterations;
                rn = total_residual();
                res.residual_history.push_back(rn);
            }

            res.estimates.assign(n_ch, CVec::Zero(M));
            for (std::size_t t = 0; t < n_ch; ++t)
            {
                const auto &f = qr[tx_of[t]];
                res.rank_deficient = res.rank_deficient || f.deficient();
                if (f.columns().empty())
                    continue;
                const CVec c = f.coefficients(y[t]);
                for (std::size_t k = 0; k < f.columns().size(); ++k)
                    res.estimates[t][Eigen::Index(f.columns()[k])] = c[Eigen::Index(k)];
            }
            for (std::size_t t = 0; t < n_ch; ++t)
                res.residual_norms.push_back((y[t] - phi[tx_of[t]] * res.estimates[t]).norm());
            return res;
        }

        // Upper estimate of the squared spectral norm by power iteration on phi^H phi
        double squared_spectral_norm(const CMat &phi)
        {
            CVec v = CVec::Ones(phi.cols()) / std::sqrt(double(phi.cols()));
            double s = 0.0;
            for (int k = 0; k < 200; ++k)
            {
                CVec w = phi.adjoint() * (phi * v);
                s = w.norm();
                if (s == 0.0)
                    return 0.0;
                v = w / s;
            }
            return 1.06 * s;
        }

        // Proximal gradient (FISTA with adaptive restart) on 0.5||phi x - y||^2 + lam ||x||_{2|P}
        std::size_t group_lasso(const CMat &phi, const CVec &y, const Partition &P, double lam, double lip,
                                const BpdnOptions &opt, CVec &x)
        {
            const double step = 1.0 / lip;
            CVec z = x;
            double t = 1.0;
            std::size_t k = 0;
            for (; k < opt.max_inner; ++k)
            {
                const CVec grad = phi.adjoint() * (phi * z - y);
                CVec xn = group_soft_threshold(z - step * grad, P, lam * step);
                const CVec dx = xn - x;
                if ((z - xn).dot(dx).real() > 0.0)
                {
                    t = 1.0;
                    z = xn;
                }
                else
                {
                    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
                    z = xn + ((t - 1.0) / tn) * dx;
                    t = tn;
                }
                x = std::move(xn);
                if (dx.norm() <= opt.inner_tol * std::max(x.norm(), 1e-300))
                    break;
            }
            return k;
        }
    }

    MeasurementEnsemble MeasurementEnsemble::mimo(std::vector<CMat> phi, std::vector<CVec> y, std::size_t n_rx, double noise_radius)
    {
        MeasurementEnsemble e;
        const std::size_t n_tx = phi.size();
        if (n_tx == 0 || y.size() != n_rx * n_tx)
            throw ConfigError("MeasurementEnsemble::mimo: need N_R * N_T observation vectors");
        e.phi = std::move(phi);
        e.y = std::move(y);
        e.noise_radius = noise_radius;
        for (std::size_t theta = 0; theta < e.y.size(); ++theta)
            e.tx_of_channel.push_back(theta % n_tx);
        e.validate();
        return e;
    }

    void MeasurementEnsemble::validate() const
    {
        if (phi.empty())
            throw ConfigError("MeasurementEnsemble: no measurement matrices");
        for (const auto &A : phi)
            if (A.rows() != phi.front().rows() || A.cols() != phi.front().cols())
                throw ConfigError("MeasurementEnsemble: measurement matrices differ in shape");
        if (tx_of_channel.size() != y.size())
            throw ConfigError("MeasurementEnsemble: channel-to-matrix map has the wrong length");
        for (std::size_t t = 0; t < y.size(); ++t)
        {
            if (tx_of_channel[t] >= phi.size())
                throw ConfigError("MeasurementEnsemble: channel refers to a missing matrix");
            if (y[t].size() != phi.front().rows())
                throw ConfigError("MeasurementEnsemble: observation length does not match the matrices");
        }
        if (!(noise_radius >= 0.0))
            throw ConfigError("MeasurementEnsemble: noise radius must be nonnegative");
    }

    RecoveryResult g_omp(const CMat &phi, const CVec &y, const Partition &P, const StopRule &stop)
    {
        check_system(phi, y, P, "g_omp");
        return joint_pursuit({phi}, {y}, {0}, P, stop);
    }

    RecoveryResult g_dcs_somp(const MeasurementEnsemble &ens, const Partition &P, const StopRule &stop)
    {
        ens.validate();
        if (std::size_t(ens.cols()) != P.total_length())
            throw DomainError("g_dcs_somp: partition does not cover the matrix columns");
        return joint_pursuit(ens.phi, ens.y, ens.tx_of_channel, P, stop);
    }

    RecoveryResult g_cosamp(const CMat &phi, const CVec &y, const Partition &P, std::size_t S, std::size_t n_iters)
    {
        check_system(phi, y, P, "g_cosamp");
        if (!P.equal_sized())
            throw DomainError("g_cosamp: groups must have equal size");
        if (4 * S > P.group_count())
            throw DomainError("g_cosamp: 4S exceeds the number of groups");

        RecoveryResult res;
        CVec x = CVec::Zero(phi.cols());
        CVec r = y;
        std::vector<std::size_t> support;
        res.residual_history.push_back(r.norm());
        const double floor = 1e-13 * y.norm();

        for (std::size_t it = 0; it < n_iters && S > 0; ++it)
        {
            if (r.norm() <= floor)
                break;
            const RVec proxy = group_energies(phi.adjoint() * r, P);
            std::vector<std::size_t> merged = largest_groups(proxy, 2 * S);
            merged.insert(merged.end(), support.begin(), support.end());
            std::sort(merged.begin(), merged.end());
            merged.erase(std::unique(merged.begin(), merged.end()), merged.end());

            const auto cols = group_columns(P, merged);
            const CVec coef = least_squares(phi, cols, y);
            CVec b = CVec::Zero(phi.cols());
            for (std::size_t k = 0; k < cols.size(); ++k)
                b[Eigen::Index(cols[k])] = coef[Eigen::Index(k)];

            support = largest_groups(group_energies(b, P), S);
            std::sort(support.begin(), support.end());
            x.setZero();
            for (std::size_t g : support)
                for (std::size_t j : P.group(g))
                    x[Eigen::Index(j)] = b[Eigen::Index(j)];
            r = y - phi * x;
            ++res.iterations;
            res.residual_history.push_back(r.norm());
        }

        res.selected_groups = support;
        res.estimates = {x};
        res.residual_norms = {r.norm()};
        return res;
    }

    CVec group_soft_threshold(const CVec &x, const Partition &P, double t)
    {
        CVec out = CVec::Zero(x.size());
        for (std::size_t b = 0; b < P.group_count(); ++b)
        {
            double e = 0.0;
            for (std::size_t j : P.group(b))
                e += std::norm(x[Eigen::Index(j)]);
            const double n = std::sqrt(e);
            if (n <= t)
                continue;
            const double scale = 1.0 - t / n;
            for (std::size_t j : P.group(b))
                out[Eigen::Index(j)] = scale * x[Eigen::Index(j)];
        }
        return out;
    }

    RecoveryResult g_bpdn(const CMat &phi, const CVec &y, const Partition &P, double eps, const BpdnOptions &opt)
    {
        check_system(phi, y, P, "g_bpdn");
        if (!(eps >= 0.0))
            throw DomainError("g_bpdn: noise radius must be nonnegative");

        const Eigen::Index M = phi.cols();
        const double ynorm = y.norm();
        auto finish = [&](CVec x, std::size_t iters, bool converged)
        {
            RecoveryResult res;
            res.iterations = iters;
            res.converged = converged;
            const RVec e = group_energies(x, P);
            for (std::size_t b = 0; b < P.group_count(); ++b)
                if (e[Eigen::Index(b)] > 0.0)
                    res.selected_groups.push_back(b);
            res.residual_norms = {(phi * x - y).norm()};
            res.estimates = {std::move(x)};
            return res;
        };

        if (eps >= ynorm)
            return finish(CVec::Zero(M), 0, true);

        const double lip = squared_spectral_norm(phi);
        const double lam_max = group_energies(phi.adjoint() * y, P).cwiseSqrt().maxCoeff();
        // An exactly zero radius is met once the residual is at rounding level
        const double upper = eps > 0.0 ? eps * (1.0 + opt.tol) : 1e-10 * ynorm;
        const double lower = eps * (1.0 - opt.tol);

        struct Point
        {
            double lam;
            double rho;
            CVec x;
        };
        Point hi{lam_max, ynorm, CVec::Zero(M)};
        Point lo{0.0, 0.0, CVec()};
        bool have_lo = false;
        int last_side = 0, streak = 0;
        std::size_t total_iters = 0;

        for (std::size_t outer = 0; outer < opt.max_outer; ++outer)
        {
            double lam;
            CVec x;
            if (!have_lo)
            {
                lam = hi.lam / 4.0;
                x = hi.x;
            }
            else
            {
                // Safeguarded secant step on rho versus log(lambda)
                double t = (eps - lo.rho) / (hi.rho - lo.rho);
                t = std::clamp(t, 0.02, 0.98);
                if (streak >= 2)
                    t = 0.5;
                lam = std::exp(std::log(lo.lam) + t * (std::log(hi.lam) - std::log(lo.lam)));
                x = lo.x;
            }
            total_iters += group_lasso(phi, y, P, lam, lip, opt, x);
            const double rho = (phi * x - y).norm();

            if (rho <= upper && rho >= lower)
                return finish(std::move(x), total_iters, true);

            const int side = rho > eps ? 1 : -1;
            streak = side == last_side ? streak + 1 : 1;
            last_side = side;
            if (side > 0)
                hi = {lam, rho, std::move(x)};
            else
            {
                lo = {lam, rho, std::move(x)};
                have_lo = true;
            }
            if (!have_lo && hi.lam < lam_max * 1e-16)
                break;
        }

        RecoveryResult best = have_lo ? finish(lo.x, total_iters, false) : finish(hi.x, total_iters, false);
        throw ConvergenceError("g_bpdn: residual constraint not met within the iteration cap", std::move(best));
    }

    StackedSystem mgcs_stack(const MeasurementEnsemble &ens, const Partition &P)
    {
        ens.validate();
        if (std::size_t(ens.cols()) != P.total_length())
            throw DomainError("mgcs_stack: partition does not cover the matrix columns");
        const std::size_t n = ens.channels();
        const Eigen::Index Q = ens.rows(), M = ens.cols();
        StackedSystem sys;
        sys.phi = CMat::Zero(Q * Eigen::Index(n), M * Eigen::Index(n));
        sys.y.resize(Q * Eigen::Index(n));
        for (std::size_t t = 0; t < n; ++t)
        {
            sys.phi.block(Q * Eigen::Index(t), M * Eigen::Index(t), Q, M) = ens.matrix_of(t);
            sys.y.segment(Q * Eigen::Index(t), Q) = ens.y[t];
        }
        sys.partition = stack_partition(P, n);
        return sys;
    }

    std::vector<CVec> unstack(const CVec &x, std::size_t channels)
    {
        if (channels == 0 || x.size() % Eigen::Index(channels) != 0)
            throw DomainError("unstack: length is not a multiple of the channel count");
        const Eigen::Index M = x.size() / Eigen::Index(channels);
        std::vector<CVec> out;
        for (std::size_t t = 0; t < channels; ++t)
            out.push_back(x.segment(M * Eigen::Index(t), M));
        return out;
    }

    double group_ric(const CMat &phi, const Partition &P, std::size_t S, std::size_t budget)
    {
        if (std::size_t(phi.cols()) != P.total_length())
            throw DomainError("group_ric: partition does not cover the matrix columns");
        const std::size_t B = P.group_count();
        S = std::min(S, B);
        if (S == 0)
            return 0.0;

        double count = 1.0;
        for (std::size_t k = 0; k < S; ++k)
            count = count * double(B - k) / double(k + 1);
        if (count > double(budget) + 0.5)
            throw RefusalError("group_ric: " + std::to_string(std::llround(count)) + " supports exceed the budget of " + std::to_string(budget));

        std::vector<std::size_t> comb(S);
        for (std::size_t k = 0; k < S; ++k)
            comb[k] = k;
        double delta = 0.0;
        while (true)
        {
            const auto cols = group_columns(P, comb);
            CMat A(phi.rows(), Eigen::Index(cols.size()));
            for (std::size_t t = 0; t < cols.size(); ++t)
                A.col(Eigen::Index(t)) = phi.col(Eigen::Index(cols[t]));
            const CMat gram = A.adjoint() * A;
            const RVec ev = Eigen::SelfAdjointEigenSolver<CMat>(gram, Eigen::EigenvaluesOnly).eigenvalues();
            delta = std::max({delta, ev.maxCoeff() - 1.0, 1.0 - ev.minCoeff()});

            // Next combination in lexicographic order
            std::size_t k = S;
            while (k > 0 && comb[k - 1] == B - S + k - 1)
                --k;
            if (k == 0)
                break;
            ++comb[k - 1];
            for (std::size_t u = k; u < S; ++u)
                comb[u] = comb[u - 1] + 1;
        }
        return delta;
    }

    std::size_t sample_count_bound(std::size_t S_prime, std::size_t M, double gamma, double eta, double mu_U, double C)
    {
        if (S_prime == 0 || M == 0 || !(gamma > 0.0 && gamma < 1.0) || !(eta > 0.0 && eta < 1.0) || !(mu_U > 0.0) || !(C > 0.0))
            throw DomainError("sample_count_bound: parameters must be positive with gamma, eta in (0, 1)");
        const double ls = std::log(double(S_prime));
        const double v = C * mu_U * mu_U * double(S_prime) * std::max(ls * ls * ls * std::log(double(M)), std::log(1.0 / eta)) / (gamma * gamma);
        return std::size_t(std::ceil(v));
    }

    StackedRic delta_stacked_equals_max(const MeasurementEnsemble &ens, const Partition &P, std::size_t S, std::size_t budget)
    {
        StackedRic out;
        const auto sys = mgcs_stack(ens, P);
        out.stacked = group_ric(sys.phi, sys.partition, S, budget);
        for (std::size_t t = 0; t < ens.channels(); ++t)
            out.per_channel.push_back(group_ric(ens.matrix_of(t), P, S, budget));
        return out;
    }
}
