#include "pikan/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstring>

namespace pikan {

namespace {

constexpr double kPi = 3.14159265358979323846;
using cplx = std::complex<double>;

inline fftw_complex* rc(std::vector<cplx>& v) { return reinterpret_cast<fftw_complex*>(v.data()); }

// in-place c2c transform pair on a scratch buffer; FFTW_ESTIMATE keeps plan
// selection deterministic across runs
struct Fft {
    int M;
    std::vector<cplx> buf;
    fftw_plan fwd, bwd;
    explicit Fft(int m) : M(m), buf(m) {
        fwd = fftw_plan_dft_1d(M, rc(buf), rc(buf), FFTW_FORWARD, FFTW_ESTIMATE);
        bwd = fftw_plan_dft_1d(M, rc(buf), rc(buf), FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    ~Fft() {
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(bwd);
    }
    Fft(const Fft&) = delete;
    Fft& operator=(const Fft&) = delete;
};

}  // namespace

SpectralResult spectral_solve(PdeId id, int modes, int nt, int nt_out) {
    if (id != PdeId::Burgers && id != PdeId::AllenCahn && id != PdeId::Kdv)
        throw DomainError("spectral oracle: only burgers / allen_cahn / kdv are supported");
    if (modes < 8 || nt < 1) throw ConfigError("spectral: need modes >= 8 and nt >= 1");
    if (modes % 2 != 0) throw ConfigError("spectral: mode count must be even");
    if (nt_out < 2 || nt % (nt_out - 1) != 0)
        throw ConfigError("spectral: (nt_out - 1) must divide nt");

    const int M = modes;
    const double L = 2.0, x0 = -1.0, T = 1.0;
    const double dt = T / double(nt);

    SpectralResult out;
    out.x.resize(M);
    for (int j = 0; j < M; ++j) out.x[j] = x0 + L * double(j) / double(M);

    // fft-ordered wavenumbers: 0..M/2-1, then -M/2..-1
    Vec k(M);
    for (int j = 0; j < M; ++j) {
        const int js = j < M / 2 ? j : j - M;
        k[j] = 2.0 * kPi * double(js) / L;
    }
    double kmax = 0.0;
    for (int j = 0; j < M; ++j) kmax = std::max(kmax, std::abs(k[j]));
    const double kc = kmax * 2.0 / 3.0;
    Vec mask(M);
    for (int j = 0; j < M; ++j) mask[j] = std::abs(k[j]) <= kc ? 1.0 : 0.0;

    std::vector<cplx> lam(M);
    Vec u0(M);
    const bool quad = id != PdeId::AllenCahn;  // nonlinearity -1/2 (u^2)_x vs -5u^3
    switch (id) {
        case PdeId::Burgers: {
            const double nu = 1.0 / (100.0 * kPi);
            for (int j = 0; j < M; ++j) lam[j] = -nu * k[j] * k[j];
            for (int j = 0; j < M; ++j) u0[j] = -std::sin(kPi * out.x[j]);
            break;
        }
        case PdeId::AllenCahn:
            for (int j = 0; j < M; ++j) lam[j] = -1e-4 * k[j] * k[j] + 5.0;
            for (int j = 0; j < M; ++j) u0[j] = sq(out.x[j]) * std::cos(kPi * out.x[j]);
            break;
        default:  // kdv
            for (int j = 0; j < M; ++j) lam[j] = cplx(0.0, 0.022 * 0.022 * k[j] * k[j] * k[j]);
            for (int j = 0; j < M; ++j) u0[j] = std::cos(kPi * out.x[j]);
            break;
    }

    std::vector<cplx> E(M), E2(M);
    for (int j = 0; j < M; ++j) {
        E[j] = std::exp(lam[j] * (dt / 2.0));
        E2[j] = E[j] * E[j];
    }

    Fft fft(M);
    auto nonlin = [&](const std::vector<cplx>& uh, std::vector<cplx>& res) {
        std::memcpy(fft.buf.data(), uh.data(), sizeof(cplx) * M);
        fftw_execute(fft.bwd);
        if (quad) {
            for (int j = 0; j < M; ++j) {
                const double u = fft.buf[j].real() / double(M);
                fft.buf[j] = u * u;
            }
            fftw_execute(fft.fwd);
            for (int j = 0; j < M; ++j)
                res[j] = cplx(0.0, -0.5) * k[j] * fft.buf[j] * mask[j];
        } else {
            for (int j = 0; j < M; ++j) {
                const double u = fft.buf[j].real() / double(M);
                fft.buf[j] = -5.0 * u * u * u;
            }
            fftw_execute(fft.fwd);
            for (int j = 0; j < M; ++j) res[j] = fft.buf[j] * mask[j];
        }
    };

    auto physical = [&](const std::vector<cplx>& uh, Vec& u) {
        std::memcpy(fft.buf.data(), uh.data(), sizeof(cplx) * M);
        fftw_execute(fft.bwd);
        u.resize(M);
        for (int j = 0; j < M; ++j) u[j] = fft.buf[j].real() / double(M);
    };

    std::vector<cplx> uh(M), k1(M), k2(M), k3(M), k4(M), tmp(M);
    for (int j = 0; j < M; ++j) fft.buf[j] = u0[j];
    fftw_execute(fft.fwd);
    std::memcpy(uh.data(), fft.buf.data(), sizeof(cplx) * M);

    const int snap_every = nt / (nt_out - 1);
    out.times.push_back(0.0);
    out.snapshots.emplace_back(u0);

    for (int n = 0; n < nt; ++n) {
        nonlin(uh, k1);
        for (int j = 0; j < M; ++j) tmp[j] = E[j] * (uh[j] + 0.5 * dt * k1[j]);
        nonlin(tmp, k2);
        for (int j = 0; j < M; ++j) tmp[j] = E[j] * uh[j] + 0.5 * dt * k2[j];
        nonlin(tmp, k3);
        for (int j = 0; j < M; ++j) tmp[j] = E2[j] * uh[j] + dt * E[j] * k3[j];
        nonlin(tmp, k4);
        for (int j = 0; j < M; ++j)
            uh[j] = E2[j] * uh[j] +
                    dt / 6.0 * (E2[j] * k1[j] + 2.0 * E[j] * (k2[j] + k3[j]) + k4[j]);

        // |u| <= (1/M) sum |uh|; all three solutions are O(1), so 100 means
        // the time step lost stability, not physics
        double a1 = 0.0;
        for (int j = 0; j < M; ++j) a1 += std::abs(uh[j]);
        a1 /= double(M);
        if (!std::isfinite(a1) || a1 > 100.0)
            throw NumericError("spectral oracle instability at step " + std::to_string(n + 1) +
                               " (amplitude bound " + std::to_string(a1) + "); reduce dt");

        if ((n + 1) % snap_every == 0) {
            out.times.push_back(dt * double(n + 1));
            Vec u;
            physical(uh, u);
            out.snapshots.push_back(std::move(u));
        }
    }
    return out;
}

ReferenceField spectral_reference(const PdeProblem& p, int modes, double dt) {
    if (p.id == PdeId::Advection || p.has_analytic)
        throw DomainError("spectral reference: " + p.name + " has a closed-form solution");
    if (dt <= 0) throw ConfigError("spectral reference: dt must be positive");
    // 100 output intervals must divide the step count; round the request up
    long long nt = std::llround(1.0 / dt);
    if (nt < 100) nt = 100;
    nt = (nt + 99) / 100 * 100;

    SpectralResult r = spectral_solve(p.id, modes, int(nt), 101);

    const int stride = (modes % 256 == 0) ? modes / 256 : 1;
    const int ncols = modes / stride;
    ReferenceField f;
    f.axis_names = {"t", "x"};
    f.domain = p.domain;
    f.axes.resize(2);
    f.axes[0] = r.times;
    f.axes[1].resize(ncols);
    for (int j = 0; j < ncols; ++j) f.axes[1][j] = r.x[size_t(j) * stride];
    f.values.resize(size_t(101) * ncols);
    for (int s = 0; s < 101; ++s)
        for (int j = 0; j < ncols; ++j)
            f.values[size_t(s) * ncols + j] = r.snapshots[s][size_t(j) * stride];
    f.provenance = "spectral_oracle";
    return f;
}

}  // namespace pikan
