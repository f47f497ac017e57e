#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "arsp/core.hpp"
#include "arsp/rsp.hpp"

namespace arsp {

struct SlowTimeVector {
    std::vector<cplx> zeta;
    std::size_t detection = 0;  ///< index into the detection list
};

/// Slow-time samples of each detection's cell, taken from every packet of
/// the original cube (packet 0 included) with that pulse's sequence.
template <PipelineNumerics N = ExactNumerics>
std::vector<SlowTimeVector> slow_time_vectors(const DataCube& X, std::span<const Detection> dets,
                                              const RspSetup& s, OpCounter* ops = nullptr, const N& num = {}) {
    std::vector<SlowTimeVector> out(dets.size());
    for (std::size_t n = 0; n < dets.size(); ++n) {
        out[n].detection = n;
        out[n].zeta.resize(X.M());
    }
    for (std::size_t m = 0; m < X.M(); ++m) {
        const auto Xf = fast_time_fft(X.packet(m), ops, num);
        for (std::size_t n = 0; n < dets.size(); ++n)
            out[n].zeta[m] =
                mjarp_slow_time_sample(Xf, s.W.weights(dets[n].phi_idx), s.gt.row(m), dets[n].r_idx, ops, num);
    }
    return out;
}

struct SmoothedCovariance {
    CMatrix U;
    std::size_t K = 0;
    std::size_t n_sub = 0;
};

/// Forward smoothing over the M-K+1 length-K subvectors of zeta.
inline SmoothedCovariance spatial_smooth(std::span<const cplx> zeta, std::size_t K) {
    const std::size_t M = zeta.size();
    if (K < 2 || K >= M) throw std::invalid_argument("spatial_smooth: need 1 < K < M");
    SmoothedCovariance c{CMatrix(K, K), K, M - K + 1};
    for (std::size_t s = 0; s < c.n_sub; ++s)
        for (std::size_t i = 0; i < K; ++i)
            for (std::size_t j = i; j < K; ++j) c.U(i, j) += zeta[s + i] * std::conj(zeta[s + j]);
    const double inv = 1.0 / static_cast<double>(c.n_sub);
    for (std::size_t i = 0; i < K; ++i) {
        c.U(i, i) = cplx(c.U(i, i).real() * inv, 0.0);
        for (std::size_t j = i + 1; j < K; ++j) {
            c.U(i, j) *= inv;
            c.U(j, i) = std::conj(c.U(i, j));
        }
    }
    return c;
}

/// Square root from magnitude and real part only:
/// sqrt((r + Re)/2) + j sgn(Im) sqrt((r - Re)/2), with sgn(0) = +1.
inline cplx complex_sqrt_polar(cplx z) {
    const double r = std::abs(z);
    const double re = std::sqrt(std::max(0.0, (r + z.real()) / 2.0));
    const double im = std::sqrt(std::max(0.0, (r - z.real()) / 2.0));
    return {re, std::signbit(z.imag()) ? -im : im};
}

struct QrFactors {
    CMatrix Q;
    CMatrix R;
    std::size_t rotations = 0;  ///< rotations actually applied
};

/// QR by plane rotations, column by column, zeroing each subdiagonal entry
/// (mu, nu) against the pivot (nu, nu). Only rows nu and mu are touched. A
/// zero target entry skips its rotation.
inline QrFactors givens_qr(const CMatrix& U) {
    const std::size_t K = U.rows();
    if (U.cols() != K) throw std::invalid_argument("givens_qr: matrix must be square");
    CMatrix R = U;
    CMatrix G = CMatrix::identity(K);  // accumulated rotations: G U = R
    std::size_t applied = 0;
    for (std::size_t nu = 0; nu + 1 < K; ++nu) {
        for (std::size_t mu = nu + 1; mu < K; ++mu) {
            const cplx a = R(nu, nu);
            const cplx b = R(mu, nu);
            if (b == cplx{}) continue;
            const double rr = complex_sqrt_polar(std::norm(a) + std::norm(b)).real();
            const cplx c = a / rr;
            const cplx s = b / rr;
            auto rotate = [&](CMatrix& A) {
                auto rn = A.row(nu);
                auto rm = A.row(mu);
                for (std::size_t j = 0; j < A.cols(); ++j) {
                    const cplx x = rn[j], y = rm[j];
                    rn[j] = std::conj(c) * x + std::conj(s) * y;
                    rm[j] = -s * x + c * y;
                }
            };
            rotate(R);
            rotate(G);
            R(mu, nu) = 0.0;
            ++applied;
        }
    }
    return {G.adjoint(), std::move(R), applied};
}

struct EvdOptions {
    double tol = 1e-12;      ///< relative to the Frobenius norm of the input
    int max_iters = 500;
    bool shifted = true;     ///< Wilkinson shift with deflation; false runs the plain iteration
};

struct EigenDecomposition {
    std::vector<double> values;  ///< descending
    CMatrix vectors;             ///< column k pairs with values[k]
    int iterations = 0;
};

namespace detail {

inline double wilkinson_shift(const CMatrix& A, std::size_t n) {
    const double a = A(n - 2, n - 2).real();
    const double c = A(n - 1, n - 1).real();
    const double b2 = std::norm(A(n - 1, n - 2));
    const double d = (a - c) / 2.0;
    const double sg = d >= 0.0 ? 1.0 : -1.0;
    const double den = std::abs(d) + std::sqrt(d * d + b2);
    return den == 0.0 ? c : c - sg * b2 / den;
}

inline CMatrix leading_block(const CMatrix& A, std::size_t n) {
    CMatrix B(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) B(i, j) = A(i, j);
    return B;
}

inline EigenDecomposition sorted_decomposition(const CMatrix& A, const CMatrix& V, int iters) {
    const std::size_t K = A.rows();
    std::vector<std::size_t> order(K);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return A(i, i).real() > A(j, j).real(); });
    EigenDecomposition e{std::vector<double>(K), CMatrix(K, K), iters};
    for (std::size_t k = 0; k < K; ++k) {
        e.values[k] = A(order[k], order[k]).real();
        for (std::size_t r = 0; r < K; ++r) e.vectors(r, k) = V(r, order[k]);
    }
    return e;
}

}  // namespace detail

/// Eigen-decomposition of a Hermitian matrix by QR iteration A <- RQ with
/// every factorization done by givens_qr. Stops when off-diagonal entries
/// fall below tol * ||U||_F.
inline EigenDecomposition evd_qr_algorithm(const CMatrix& U, const EvdOptions& opt = {}) {
    const std::size_t K = U.rows();
    if (U.cols() != K || K == 0) throw std::invalid_argument("evd_qr_algorithm: matrix must be square");
    const double scale = U.frobenius_norm();
    CMatrix A = U;
    CMatrix V = CMatrix::identity(K);
    if (scale == 0.0) return detail::sorted_decomposition(A, V, 0);
    const double eps = opt.tol * scale;
    int it = 0;

    if (!opt.shifted) {
        auto max_off = [&] {
            double m = 0.0;
            for (std::size_t i = 0; i < K; ++i)
                for (std::size_t j = 0; j < K; ++j)
                    if (i != j) m = std::max(m, std::abs(A(i, j)));
            return m;
        };
        while (max_off() >= eps) {
            if (it >= opt.max_iters) throw convergence_error("evd_qr_algorithm: no convergence", it);
            auto f = givens_qr(A);
            A = f.R * f.Q;
            V = V * f.Q;
            ++it;
        }
        return detail::sorted_decomposition(A, V, it);
    }

    std::size_t n = K;
    while (n > 1) {
        double coupling = 0.0;
        for (std::size_t j = 0; j + 1 < n; ++j) coupling = std::max(coupling, std::abs(A(n - 1, j)));
        if (coupling < eps) {
            for (std::size_t j = 0; j + 1 < n; ++j) A(n - 1, j) = A(j, n - 1) = 0.0;
            --n;
            continue;
        }
        if (it >= opt.max_iters) throw convergence_error("evd_qr_algorithm: no convergence", it);
        const double mu = detail::wilkinson_shift(A, n);
        CMatrix B = detail::leading_block(A, n);
        for (std::size_t i = 0; i < n; ++i) B(i, i) -= mu;
        auto f = givens_qr(B);
        B = f.R * f.Q;
        for (std::size_t i = 0; i < n; ++i) B(i, i) += mu;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) A(i, j) = B(i, j);
        // Columns beyond the active block stay decoupled to within tolerance.
        CMatrix Vn(K, n);
        for (std::size_t r = 0; r < K; ++r)
            for (std::size_t k = 0; k < n; ++k) {
                cplx acc{};
                for (std::size_t j = 0; j < n; ++j) acc += V(r, j) * f.Q(j, k);
                Vn(r, k) = acc;
            }
        for (std::size_t r = 0; r < K; ++r)
            for (std::size_t k = 0; k < n; ++k) V(r, k) = Vn(r, k);
        ++it;
    }
    return detail::sorted_decomposition(A, V, it);
}

/// Velocity search grid. Steering a(v)[k] = exp(j 4 pi v k tau_PRI / lambda).
struct VelocityGrid {
    double v_min = -50.0;
    double v_max = 50.0;
    double step = 0.3;

    std::size_t size() const {
        if (!(step > 0.0) || !(v_max >= v_min)) throw std::invalid_argument("VelocityGrid: invalid grid");
        return static_cast<std::size_t>(std::floor((v_max - v_min) / step + 1e-9)) + 1;
    }
    double at(std::size_t i) const { return v_min + static_cast<double>(i) * step; }
};

inline std::vector<cplx> doppler_steering(double v, std::size_t K, const RadarConfig& cfg) {
    std::vector<cplx> a(K);
    const double w = 4.0 * kPi * v * cfg.pri / cfg.wavelength;
    for (std::size_t k = 0; k < K; ++k) a[k] = std::polar(1.0, w * static_cast<double>(k));
    return a;
}

/// a^H En En^H a for every grid velocity, En = eigenvector columns D..K-1.
inline std::vector<double> noise_projection(const CMatrix& eigvecs, std::size_t D, const VelocityGrid& grid,
                                            const RadarConfig& cfg) {
    const std::size_t K = eigvecs.rows();
    if (D < 1 || D >= K) throw std::invalid_argument("music_spectrum: need 1 <= D < K");
    std::vector<double> den(grid.size());
    for (std::size_t g = 0; g < den.size(); ++g) {
        const auto a = doppler_steering(grid.at(g), K, cfg);
        double acc = 0.0;
        for (std::size_t j = D; j < K; ++j) {
            cplx e{};
            for (std::size_t k = 0; k < K; ++k) e += std::conj(eigvecs(k, j)) * a[k];
            acc += std::norm(e);
        }
        den[g] = acc;
    }
    return den;
}

inline std::vector<double> music_spectrum(const CMatrix& eigvecs, std::size_t D, const VelocityGrid& grid,
                                          const RadarConfig& cfg) {
    auto s = noise_projection(eigvecs, D, grid, cfg);
    for (auto& v : s) v = 1.0 / std::max(v, std::numeric_limits<double>::min());
    return s;
}

struct SpectralPeak {
    std::size_t index = 0;
    double velocity = 0.0;  ///< interpolated
    double value = 0.0;     ///< interpolated
};

/// Local maxima (plateaus count once, grid ends included), refined by a
/// parabola through the neighbours, sorted by decreasing value.
inline std::vector<SpectralPeak> find_peaks(std::span<const double> s, const VelocityGrid& grid) {
    std::vector<SpectralPeak> out;
    const std::size_t n = s.size();
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && s[j + 1] == s[i]) ++j;
        const bool left = i == 0 || s[i - 1] < s[i];
        const bool right = j + 1 == n || s[j + 1] < s[i];
        if (left && right && n > 1) {
            SpectralPeak p;
            p.index = (i + j) / 2;
            p.velocity = grid.at(p.index);
            p.value = s[p.index];
            if (i == j && i > 0 && j + 1 < n) {
                const double y0 = s[i - 1], y1 = s[i], y2 = s[i + 1];
                const double den = y0 - 2.0 * y1 + y2;
                if (den < 0.0) {
                    const double d = 0.5 * (y0 - y2) / den;
                    p.velocity += d * grid.step;
                    p.value = y1 - 0.25 * (y0 - y2) * d;
                }
            }
            out.push_back(p);
        }
        i = j + 1;
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.value > b.value; });
    return out;
}

/// Peaks at or above rel_floor times the spectrum maximum.
inline std::size_t count_peaks(std::span<const double> s, const VelocityGrid& grid, double rel_floor) {
    if (s.empty()) return 0;
    const double top = *std::max_element(s.begin(), s.end());
    std::size_t n = 0;
    for (const auto& p : find_peaks(s, grid)) n += s[p.index] >= rel_floor * top;
    return n;
}

struct MusicOptions {
    std::size_t K = 0;  ///< 0 selects M/2
    std::size_t D = 1;
    VelocityGrid grid{};
    EvdOptions evd{};
};

struct MusicResult {
    std::vector<double> spectrum;
    std::vector<SpectralPeak> peaks;
    EigenDecomposition evd;
};

inline MusicResult music_doppler(std::span<const cplx> zeta, const RadarConfig& cfg, const MusicOptions& opt = {}) {
    const std::size_t K = opt.K == 0 ? zeta.size() / 2 : opt.K;
    const auto cov = spatial_smooth(zeta, K);
    MusicResult r;
    r.evd = evd_qr_algorithm(cov.U, opt.evd);
    r.spectrum = music_spectrum(r.evd.vectors, opt.D, opt.grid, cfg);
    r.peaks = find_peaks(r.spectrum, opt.grid);
    return r;
}

struct FftDopplerResult {
    double velocity = 0.0;
    std::vector<double> spectrum;
};

/// Periodogram of zeta evaluated on the velocity grid (a zero-padded
/// transform sampled at the grid points); flat spectra resolve to the grid start.
inline FftDopplerResult fft_doppler(std::span<const cplx> zeta, const VelocityGrid& grid, const RadarConfig& cfg) {
    if (zeta.size() < 2) throw std::invalid_argument("fft_doppler: need at least two slow-time samples");
    FftDopplerResult r;
    r.spectrum.resize(grid.size());
    for (std::size_t g = 0; g < r.spectrum.size(); ++g) {
        const auto a = doppler_steering(grid.at(g), zeta.size(), cfg);
        cplx acc{};
        for (std::size_t m = 0; m < zeta.size(); ++m) acc += zeta[m] * std::conj(a[m]);
        r.spectrum[g] = std::norm(acc);
    }
    r.velocity = grid.at(peak_search_1d(std::span<const double>(r.spectrum)).index);
    return r;
}

/// Fills velocity_mps of each detection from the strongest MUSIC peak.
inline void estimate_velocities(std::span<Detection> dets, std::span<const SlowTimeVector> zetas,
                                const RadarConfig& cfg, const MusicOptions& opt = {}) {
    for (const auto& z : zetas) {
        const auto r = music_doppler(z.zeta, cfg, opt);
        dets[z.detection].velocity_mps = r.peaks.empty() ? 0.0 : r.peaks.front().velocity;
    }
}

}  // namespace arsp
