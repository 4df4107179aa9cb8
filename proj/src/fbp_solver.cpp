#include "pmflow/fbp_solver.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "pmflow/errors.hpp"
#include "pmflow/roots.hpp"
#include "pmflow/verify.hpp"

namespace pmflow {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Forward-mode dual number carrying the derivatives with respect to the nine
// nodes of one stencil.
struct Jet {
    double v = 0.0;
    std::array<double, 9> d{};

    Jet() = default;
    Jet(double value) : v(value) {}  // NOLINT: implicit lift of constants
};

inline Jet operator+(const Jet& a, const Jet& b) {
    Jet r(a.v + b.v);
    for (int k = 0; k < 9; ++k) r.d[k] = a.d[k] + b.d[k];
    return r;
}
inline Jet operator-(const Jet& a, const Jet& b) {
    Jet r(a.v - b.v);
    for (int k = 0; k < 9; ++k) r.d[k] = a.d[k] - b.d[k];
    return r;
}
inline Jet operator-(const Jet& a) {
    Jet r(-a.v);
    for (int k = 0; k < 9; ++k) r.d[k] = -a.d[k];
    return r;
}
inline Jet operator*(const Jet& a, const Jet& b) {
    Jet r(a.v * b.v);
    for (int k = 0; k < 9; ++k) r.d[k] = a.d[k] * b.v + a.v * b.d[k];
    return r;
}
inline Jet operator/(const Jet& a, const Jet& b) {
    const double inv = 1.0 / b.v;
    Jet r(a.v * inv);
    for (int k = 0; k < 9; ++k) r.d[k] = (a.d[k] - r.v * b.d[k]) * inv;
    return r;
}
inline Jet chain(const Jet& a, double f, double df) {
    Jet r(f);
    for (int k = 0; k < 9; ++k) r.d[k] = df * a.d[k];
    return r;
}
inline Jet sqrt(const Jet& a) {
    const double s = std::sqrt(a.v);
    return chain(a, s, 0.5 / s);
}
inline Jet exp(const Jet& a) {
    const double e = std::exp(a.v);
    return chain(a, e, e);
}
inline Jet pow(const Jet& a, double p) {
    const double f = std::pow(a.v, p);
    return chain(a, f, p * f / a.v);
}
inline double value(const Jet& a) { return a.v; }
inline double value(double a) { return a; }

using std::exp;
using std::pow;
using std::sqrt;

template <class T>
T zeta1_t(const T& q, double gamma, double mu0) {
    const double a = (2.0 - mu0 / 5.0) / (1.0 + gamma);
    const double w = (mu0 / 5.0) / (1.0 + gamma);
    const double aq = std::abs(value(q));
    if (aq <= a) return q;
    const double sign = value(q) < 0.0 ? -1.0 : 1.0;
    if (aq >= a + w) return T(sign * (a + 0.5 * w));
    // Integral of 1 - S((|q| - a)/w) with S the quintic smoothstep.
    const T z = (T(sign) * q - T(a)) / T(w);
    const T z2 = z * z, z4 = z2 * z2;
    return T(sign) * (T(a) + T(w) * (z - T(2.5) * z4 + T(3.0) * z4 * z - z4 * z2));
}

// Shock condition in terms of psi~ = phi - phi_N, evaluated at the point of
// the column where phi_inf would equal phi.
template <class T>
T shock_bc_t(const ConfigGeometry& g, const T& px, const T& py, const T& z, double xi1) {
    const double v = g.v_inf, gamma = g.gamma;
    const T x2 = T(g.eta_N) - z / T(v);
    const T dx = px - T(xi1), dy = py - x2;
    const T phi = z - T(0.5) * (T(xi1 * xi1) + x2 * x2) - T(v * g.eta_N);
    const T bern = T(0.5 * v * v) - T(0.5) * (dx * dx + dy * dy) - phi;
    const T rho = gamma == 1.0 ? exp(bern) : pow(T(1.0) + T(gamma - 1.0) * bern, 1.0 / (gamma - 1.0));
    const T nx = -px, ny = T(-v) - py;
    const T n = sqrt(nx * nx + ny * ny);
    const T fx = rho * dx + T(xi1), fy = rho * dy + T(v) + x2;  // rho Dphi - Dphi_inf
    return (fx * nx + fy * ny) / n;
}

// First- and second-derivative stencils in a uniform index with spacing h,
// second order, one-sided at the ends.
struct Stencil {
    int n = 0;
    int off[4] = {0, 0, 0, 0};
    double w[4] = {0, 0, 0, 0};
};

Stencil first_diff(int k, int last, double h) {
    Stencil st;
    if (k == 0) {
        st.n = 3;
        st.off[0] = 0, st.off[1] = 1, st.off[2] = 2;
        st.w[0] = -1.5 / h, st.w[1] = 2.0 / h, st.w[2] = -0.5 / h;
    } else if (k == last) {
        st.n = 3;
        st.off[0] = 0, st.off[1] = -1, st.off[2] = -2;
        st.w[0] = 1.5 / h, st.w[1] = -2.0 / h, st.w[2] = 0.5 / h;
    } else {
        st.n = 2;
        st.off[0] = 1, st.off[1] = -1;
        st.w[0] = 0.5 / h, st.w[1] = -0.5 / h;
    }
    return st;
}

Stencil second_diff(int k, int last, double h) {
    Stencil st;
    const double h2 = h * h;
    if (k == 0 || k == last) {
        const int sg = k == 0 ? 1 : -1;
        st.n = 4;
        for (int a = 0; a < 4; ++a) st.off[a] = sg * a;
        st.w[0] = 2.0 / h2, st.w[1] = -5.0 / h2, st.w[2] = 4.0 / h2, st.w[3] = -1.0 / h2;
    } else {
        st.n = 3;
        st.off[0] = -1, st.off[1] = 0, st.off[2] = 1;
        st.w[0] = 1.0 / h2, st.w[1] = -2.0 / h2, st.w[2] = 1.0 / h2;
    }
    return st;
}

}  // namespace

double zeta1(double q, double gamma, double mu0) { return zeta1_t(q, gamma, mu0); }

StripGrid make_grid(int ns, int nt, double grading) {
    if (ns < 4 || nt < 3) throw ConfigError("grid needs at least 5 x 4 nodes");
    if (!(grading >= 0.0 && grading <= 12.0)) throw ConfigError("grid grading must lie in [0, 12]");
    StripGrid g;
    g.s.resize(ns + 1);
    g.t.resize(nt + 1);
    for (int i = 0; i <= ns; ++i) {
        const double sigma = -1.0 + 2.0 * i / ns;
        g.s[i] = grading > 0.0 ? std::tanh(grading * sigma) / std::tanh(grading) : sigma;
    }
    g.s.front() = -1.0;
    g.s.back() = 1.0;
    if (ns % 2 == 0) g.s[ns / 2] = 0.0;
    for (int j = 0; j <= nt; ++j) g.t[j] = static_cast<double>(j) / nt;
    return g;
}

// ---------------------------------------------------------------------------

Discretization::Discretization(const MappedDomain& dom, const StripGrid& grid,
                               const ShockGraph& shock, double mu0)
    : dom_(dom), grid_(grid), shock_(shock), mu0_(mu0) {
    const int ns = grid_.ns(), nt = grid_.nt();
    if (shock_.intervals() != ns) throw ConfigError("shock graph and grid disagree in size");
    hs_ = 2.0 / ns;
    ht_ = 1.0 / nt;
    const ConfigGeometry& geo = dom_.geometry();
    X_.resize(grid_.size());
    for (int i = 0; i <= ns; ++i) {
        const double g = shock_.value(i);
        for (int j = 0; j <= nt; ++j) {
            X_[grid_.index(i, j)] = dom_.from_strip({grid_.s[i], grid_.t[j] * g});
        }
    }
    metric_.resize(grid_.size());
    star_.resize(grid_.size());
    K_.resize(grid_.size());
    strip_.assign(grid_.size(), StripSide::None);
    polar_.resize(grid_.size());
    const double k = dom_.k();
    for (int i = 0; i <= ns; ++i) {
        for (int j = 0; j <= nt; ++j) {
            const int id = grid_.index(i, j);
            metric_[id] = metric_at(i, j, true);
            const Vec2 xi = X_[id];
            star_[id] = dom_.phi_star(xi);
            K_[id] = star_[id].value - geo.phi_N.phi(xi);
            const double rN = norm(xi), rO = norm(xi - geo.O_O);
            if (xi.x >= 0.0 && geo.c_N - rN < geo.c_N / k && rN > 0.0) {
                strip_[id] = StripSide::N;
                polar_[id] = {xi / rN, geo.c_N - rN, geo.c_N, {0.0, 0.0}};
            } else if (xi.x <= dom_.xi1_chi_full() && geo.c_O - rO < dom_.c_hat_O() / k &&
                       rO > 0.0) {
                strip_[id] = StripSide::O;
                polar_[id] = {(xi - geo.O_O) / rO, geo.c_O - rO, geo.c_O, {geo.u_O, 0.0}};
            }
        }
    }
    forcing.assign(grid_.size(), 0.0);
    dirichlet.assign(grid_.size(), 0.0);
    init_row_scale();
}

Discretization::Metric Discretization::metric_at(int i, int j, bool need_second) const {
    const int ns = grid_.ns(), nt = grid_.nt();
    auto X = [&](int a, int b) { return X_[grid_.index(a, b)]; };
    Metric m;
    const Stencil ds = first_diff(i, ns, hs_), dt = first_diff(j, nt, ht_);
    for (int a = 0; a < ds.n; ++a) m.xs = m.xs + ds.w[a] * X(i + ds.off[a], j);
    for (int b = 0; b < dt.n; ++b) m.xt = m.xt + dt.w[b] * X(i, j + dt.off[b]);
    if (need_second) {
        const Stencil ss = second_diff(i, ns, hs_), tt = second_diff(j, nt, ht_);
        for (int a = 0; a < ss.n; ++a) m.xss = m.xss + ss.w[a] * X(i + ss.off[a], j);
        for (int b = 0; b < tt.n; ++b) m.xtt = m.xtt + tt.w[b] * X(i, j + tt.off[b]);
        for (int a = 0; a < ds.n; ++a) {
            for (int b = 0; b < dt.n; ++b) {
                m.xst = m.xst + (ds.w[a] * dt.w[b]) * X(i + ds.off[a], j + dt.off[b]);
            }
        }
    }
    m.det = m.xs.x * m.xt.y - m.xs.y * m.xt.x;
    return m;
}

int Discretization::row_j0(int j) const {
    if (j == 0) return 0;
    if (j == grid_.nt()) return grid_.nt() - 2;
    return j - 1;
}

namespace {

// Operator A(Dphi, phi) : D^2 psi~ plus the cutoff correction on polar strips.
template <class T>
T interior_op(const ConfigGeometry& geo, Vec2 xi, StripSide side, Vec2 er, double x, double cst,
              Vec2 shift, double mu0, const T& psi, const T& px, const T& py, const T& h11,
              const T& h12, const T& h22) {
    const double gamma = geo.gamma, v = geo.v_inf;
    const double phiN = -0.5 * norm2(xi) - v * geo.eta_N;
    const T phi = psi + T(phiN);
    const T dx = px - T(xi.x), dy = py - T(xi.y);
    const T c2 = T(1.0) + T(gamma - 1.0) * (T(0.5 * v * v) - T(0.5) * (dx * dx + dy * dy) - phi);
    T r = (c2 - dx * dx) * h11 - T(2.0) * dx * dy * h12 + (c2 - dy * dy) * h22;
    if (side != StripSide::None) {
        // psi_x = -d_r psi and psi_xx = d_rr psi for psi = phi - phi_state.
        const T psx = -(T(er.x) * (px - T(shift.x)) + T(er.y) * (py - T(shift.y)));
        const T psxx =
            T(er.x * er.x) * h11 + T(2.0 * er.x * er.y) * h12 + T(er.y * er.y) * h22;
        const T cut = T(x) * zeta1_t(psx / T(x), gamma, mu0);
        r = r + T(cst * (gamma + 1.0)) * (psx - cut) * psxx;
    }
    return r;
}

}  // namespace

template <class T>
T Discretization::row(int i, int j, const T (&w)[3][3]) const {
    const int nt = grid_.nt();
    const int id = grid_.index(i, j);
    const int b = j - row_j0(j);
    const Metric& m = metric_[id];
    const Vec2 xi = X_[id];
    const ConfigGeometry& geo = dom_.geometry();

    const T us = (w[2][b] - w[0][b]) / T(2.0 * hs_);
    T ut;
    if (b == 1) {
        ut = (w[1][2] - w[1][0]) / T(2.0 * ht_);
    } else if (b == 0) {
        ut = (T(-3.0) * w[1][0] + T(4.0) * w[1][1] - w[1][2]) / T(2.0 * ht_);
    } else {
        ut = (T(3.0) * w[1][2] - T(4.0) * w[1][1] + w[1][0]) / T(2.0 * ht_);
    }
    const double det = m.det;
    const T px = (T(m.xt.y) * us - T(m.xs.y) * ut) / T(det);
    const T py = (T(-m.xt.x) * us + T(m.xs.x) * ut) / T(det);
    const T psi = w[1][b];

    if (j == 0) return py;
    if (j == nt) return shock_bc_t(geo, px, py, psi, xi.x);

    const T uss = (w[2][1] - T(2.0) * w[1][1] + w[0][1]) / T(hs_ * hs_);
    const T utt = (w[1][2] - T(2.0) * w[1][1] + w[1][0]) / T(ht_ * ht_);
    const T ust = (w[2][2] - w[2][0] - w[0][2] + w[0][0]) / T(4.0 * hs_ * ht_);
    // Remove the curvature of the coordinates, then pull back by J^{-1}.
    const T s11 = uss - px * T(m.xss.x) - py * T(m.xss.y);
    const T s12 = ust - px * T(m.xst.x) - py * T(m.xst.y);
    const T s22 = utt - px * T(m.xtt.x) - py * T(m.xtt.y);
    // J^{-1} = [[a, b], [c, d]] / det with J = [xs xt].
    const double ia = m.xt.y / det, ib = -m.xt.x / det, ic = -m.xs.y / det, id2 = m.xs.x / det;
    // H = J^{-T} S J^{-1}: H_kl = sum_pq Jinv_pk S_pq Jinv_ql.
    const T h11 = T(ia * ia) * s11 + T(2.0 * ia * ic) * s12 + T(ic * ic) * s22;
    const T h12 = T(ia * ib) * s11 + T(ia * id2 + ic * ib) * s12 + T(ic * id2) * s22;
    const T h22 = T(ib * ib) * s11 + T(2.0 * ib * id2) * s12 + T(id2 * id2) * s22;
    const Polar& pl = polar_[id];
    return interior_op(geo, xi, strip_[id], pl.er, pl.x, pl.c, pl.shift, mu0_, psi, px, py, h11,
                       h12, h22) -
           T(forcing[id]);
}

double Discretization::interior_operator(int i, int j, double psi, Vec2 dpsi, double h11,
                                         double h12, double h22) const {
    const int id = grid_.index(i, j);
    const Polar& pl = polar_[id];
    return interior_op<double>(dom_.geometry(), X_[id], strip_[id], pl.er, pl.x, pl.c, pl.shift,
                               mu0_, psi, dpsi.x, dpsi.y, h11, h12, h22);
}

double Discretization::residual_row(int i, int j, const std::vector<double>& u) const {
    const int ns = grid_.ns(), nt = grid_.nt();
    const int id = grid_.index(i, j);
    if (i == 0 || i == ns || (j == nt && shock_dirichlet)) return u[id] - dirichlet[id];
    const int j0 = row_j0(j);
    double w[3][3];
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            const int q = grid_.index(i - 1 + a, j0 + b);
            w[a][b] = u[q] + K_[q];
        }
    }
    return scale_[id] * row<double>(i, j, w);
}

// Each equation row is divided by its diagonal Jacobian entry at u = 0, so
// residuals are measured in units of u. Without this the rows of the short
// columns next to a collapsing shock end carry a roundoff floor that grows
// like 1/g^2.
void Discretization::init_row_scale() {
    const int ns = grid_.ns(), nt = grid_.nt();
    scale_.assign(grid_.size(), 1.0);
    for (int i = 1; i < ns; ++i) {
        for (int j = 0; j <= nt; ++j) {
            const int j0 = row_j0(j);
            Jet w[3][3];
            for (int a = 0; a < 3; ++a) {
                for (int b = 0; b < 3; ++b) {
                    w[a][b] = Jet(K_[grid_.index(i - 1 + a, j0 + b)]);
                    w[a][b].d[a * 3 + b] = 1.0;
                }
            }
            const double d = std::abs(row<Jet>(i, j, w).d[3 + (j - j0)]);
            if (std::isfinite(d) && d > 0.0) scale_[grid_.index(i, j)] = 1.0 / d;
        }
    }
}

std::vector<double> Discretization::residual(const std::vector<double>& u) const {
    std::vector<double> r(grid_.size());
    for (int i = 0; i <= grid_.ns(); ++i) {
        for (int j = 0; j <= grid_.nt(); ++j) r[grid_.index(i, j)] = residual_row(i, j, u);
    }
    return r;
}

namespace {

double max_abs(const std::vector<double>& r) {
    double m = 0.0;
    for (double x : r) {
        if (!std::isfinite(x)) return std::numeric_limits<double>::infinity();
        m = std::max(m, std::abs(x));
    }
    return m;
}

}  // namespace

Discretization::NewtonResult Discretization::newton(std::vector<double> u, double tol,
                                                    int max_iter) const {
    const int ns = grid_.ns(), nt = grid_.nt(), n = grid_.size();
    NewtonResult out;
    std::vector<double> r = residual(u);
    double rn = max_abs(r);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<size_t>(n) * 9);
    Eigen::SparseMatrix<double> jac(n, n);
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    bool analysed = false;
    for (int it = 0; it < max_iter && rn >= tol; ++it) {
        trip.clear();
        for (int i = 0; i <= ns; ++i) {
            for (int j = 0; j <= nt; ++j) {
                const int id = grid_.index(i, j);
                if (i == 0 || i == ns || (j == nt && shock_dirichlet)) {
                    trip.emplace_back(id, id, 1.0);
                    continue;
                }
                const int j0 = row_j0(j);
                Jet w[3][3];
                for (int a = 0; a < 3; ++a) {
                    for (int b = 0; b < 3; ++b) {
                        const int q = grid_.index(i - 1 + a, j0 + b);
                        w[a][b] = Jet(u[q] + K_[q]);
                        w[a][b].d[a * 3 + b] = 1.0;
                    }
                }
                const Jet res = row<Jet>(i, j, w);
                for (int a = 0; a < 3; ++a) {
                    for (int b = 0; b < 3; ++b) {
                        const double d = scale_[id] * res.d[a * 3 + b];
                        if (d != 0.0) trip.emplace_back(id, grid_.index(i - 1 + a, j0 + b), d);
                    }
                }
            }
        }
        jac.setFromTriplets(trip.begin(), trip.end());
        jac.makeCompressed();
        if (!analysed) {
            lu.analyzePattern(jac);
            analysed = true;
        }
        lu.factorize(jac);
        if (lu.info() != Eigen::Success) break;
        Eigen::Map<const Eigen::VectorXd> rv(r.data(), n);
        const Eigen::VectorXd du = lu.solve(-rv);
        if (lu.info() != Eigen::Success || !du.allFinite()) break;

        // Backtracking on the max-norm of the residual.
        double lambda = 1.0;
        std::vector<double> trial(n);
        std::vector<double> rt;
        double rtn = std::numeric_limits<double>::infinity();
        for (int ls = 0; ls < 12; ++ls) {
            for (int q = 0; q < n; ++q) trial[q] = u[q] + lambda * du[q];
            rt = residual(trial);
            rtn = max_abs(rt);
            if (rtn < (1.0 - 1e-4 * lambda) * rn || rtn < tol) break;
            lambda *= 0.5;
        }
        ++out.iterations;
        if (!(rtn < rn)) break;
        u.swap(trial);
        r.swap(rt);
        rn = rtn;
    }
    out.converged = rn < tol;
    out.residual = rn;
    out.ellipticity_flags = ellipticity_flags(u);
    out.u = std::move(u);
    return out;
}

Discretization::NodeDerivatives Discretization::derivatives(int i, int j,
                                                            const std::vector<double>& u) const {
    const int ns = grid_.ns(), nt = grid_.nt();
    const int id = grid_.index(i, j);
    NodeDerivatives nd;
    nd.xi = X_[id];
    const PhiStar& st = star_[id];
    nd.psi = u[id] + K_[id];
    const Metric& m = metric_[id];
    const double scale = std::max(norm2(m.xs) + 0.0, 1e-300) * std::max(norm2(m.xt), 1e-300);
    // A column whose shock height vanished is a single point (the corner P_beta).
    const bool collapsed = !(shock_.value(i) > 1e-12);
    if (collapsed || !(std::abs(m.det) > 1e-10 * std::sqrt(scale)) || norm2(m.xt) == 0.0) {
        nd.regular = false;
        nd.dpsi = st.grad + nd.xi;
        nd.h11 = st.h11 + 1.0;
        nd.h12 = st.h12;
        nd.h22 = st.h22 + 1.0;
        return nd;
    }
    auto U = [&](int a, int b) {
        const int q = grid_.index(a, b);
        return u[q] + K_[q];
    };
    const Stencil ds = first_diff(i, ns, hs_), dt = first_diff(j, nt, ht_);
    const Stencil ss = second_diff(i, ns, hs_), tt = second_diff(j, nt, ht_);
    double us = 0, ut = 0, uss = 0, utt = 0, ust = 0;
    for (int a = 0; a < ds.n; ++a) us += ds.w[a] * U(i + ds.off[a], j);
    for (int b = 0; b < dt.n; ++b) ut += dt.w[b] * U(i, j + dt.off[b]);
    for (int a = 0; a < ss.n; ++a) uss += ss.w[a] * U(i + ss.off[a], j);
    for (int b = 0; b < tt.n; ++b) utt += tt.w[b] * U(i, j + tt.off[b]);
    for (int a = 0; a < ds.n; ++a) {
        for (int b = 0; b < dt.n; ++b) ust += ds.w[a] * dt.w[b] * U(i + ds.off[a], j + dt.off[b]);
    }
    const double det = m.det;
    const double gx = (m.xt.y * us - m.xs.y * ut) / det;
    const double gy = (-m.xt.x * us + m.xs.x * ut) / det;
    const double s11 = uss - gx * m.xss.x - gy * m.xss.y;
    const double s12 = ust - gx * m.xst.x - gy * m.xst.y;
    const double s22 = utt - gx * m.xtt.x - gy * m.xtt.y;
    const double ia = m.xt.y / det, ib = -m.xt.x / det, ic = -m.xs.y / det, id2 = m.xs.x / det;
    nd.dpsi = Vec2{gx, gy};
    nd.h11 = ia * ia * s11 + 2.0 * ia * ic * s12 + ic * ic * s22;
    nd.h12 = ia * ib * s11 + (ia * id2 + ic * ib) * s12 + ic * id2 * s22;
    nd.h22 = ib * ib * s11 + 2.0 * ib * id2 * s12 + id2 * id2 * s22;
    return nd;
}

int Discretization::ellipticity_flags(const std::vector<double>& u) const {
    const ConfigGeometry& geo = dom_.geometry();
    const double gamma = geo.gamma;
    int flags = 0;
    for (int i = 1; i < grid_.ns(); ++i) {
        for (int j = 1; j < grid_.nt(); ++j) {
            const int id = grid_.index(i, j);
            const NodeDerivatives nd = derivatives(i, j, u);
            if (!nd.regular) continue;
            const Vec2 dphi = nd.dpsi - nd.xi;
            const double phi = nd.psi - 0.5 * norm2(nd.xi) - geo.v_inf * geo.eta_N;
            const double c2 =
                1.0 + (gamma - 1.0) * (0.5 * geo.v_inf * geo.v_inf - 0.5 * norm2(dphi) - phi);
            double a11 = c2 - dphi.x * dphi.x, a12 = -dphi.x * dphi.y, a22 = c2 - dphi.y * dphi.y;
            if (strip_[id] != StripSide::None) {
                const Polar& pl = polar_[id];
                const double psx = -dot(pl.er, nd.dpsi - pl.shift);
                const double corr =
                    pl.c * (gamma + 1.0) * (psx - pl.x * zeta1(psx / pl.x, gamma, mu0_));
                a11 += corr * pl.er.x * pl.er.x;
                a12 += corr * pl.er.x * pl.er.y;
                a22 += corr * pl.er.y * pl.er.y;
            }
            if (!(a11 + a22 > 0.0 && a11 * a22 - a12 * a12 > 0.0)) ++flags;
        }
    }
    return flags;
}

// ---------------------------------------------------------------------------

double shock_bc_value(const ConfigGeometry& g, Vec2 p, double z, double xi1) {
    return shock_bc_t<double>(g, p.x, p.y, z, xi1);
}

SolutionField exact_normal_solution(double gamma, double v_inf, const SolverConfig& config) {
    const MappedDomain dom(gamma, v_inf, 0.0);
    SolutionField f;
    f.gamma = gamma;
    f.params = {v_inf, 0.0};
    f.grid = make_grid(config.ns, config.nt, config.sonic_corner_refine);
    f.u.assign(f.grid.size(), 0.0);
    f.shock = flat_shock(dom, f.grid.s);
    return f;
}

std::vector<double> assemble_interior(const SolutionField& field, const ShockGraph& shock,
                                      const SolverConfig& config) {
    const MappedDomain dom(field.gamma, field.params.v_inf, field.params.beta);
    const Discretization disc(dom, field.grid, shock, config.mu0);
    return disc.residual(field.u);
}

double shock_bc_residual(const SolutionField& field, const ShockGraph& shock, int i) {
    const MappedDomain dom(field.gamma, field.params.v_inf, field.params.beta);
    const Discretization disc(dom, field.grid, shock);
    return disc.residual_row(i, field.grid.nt(), field.u);
}

SolutionField solve_interior(const ShockGraph& shock, double beta, const SolutionField& init,
                             const SolverConfig& config, SolveReport* report) {
    const MappedDomain dom(init.gamma, init.params.v_inf, beta);
    const Discretization disc(dom, init.grid, shock, config.mu0);
    const auto nr = disc.newton(init.u, config.tol_pde, config.max_newton);
    if (report) {
        report->newton_iterations += nr.iterations;
        report->residual = nr.residual;
        report->ellipticity_flags = nr.ellipticity_flags;
    }
    if (!nr.converged) {
        std::ostringstream os;
        os.precision(6);
        os << "interior Newton did not converge: residual " << nr.residual << " after "
           << nr.iterations << " iterations";
        throw NumericalFailure(os.str());
    }
    SolutionField out = init;
    out.params.beta = beta;
    out.u = nr.u;
    out.shock = shock;
    return out;
}

// ---------------------------------------------------------------------------

namespace {

// Cubic Lagrange interpolation of a column sampled at t_j = j / nt.
double column_value(const std::vector<double>& col, double t) {
    const int nt = static_cast<int>(col.size()) - 1;
    const double z = t * nt;
    const int j0 = std::clamp(static_cast<int>(std::floor(z)) - 1, 0, nt - 3);
    double sum = 0.0;
    for (int a = 0; a < 4; ++a) {
        double l = 1.0;
        for (int b = 0; b < 4; ++b) {
            if (b != a) l *= (z - (j0 + b)) / static_cast<double>(a - b);
        }
        sum += l * col[j0 + a];
    }
    return sum;
}

}  // namespace

ShockUpdate update_shock(const SolutionField& field, const ShockGraph& shock, double damping) {
    const MappedDomain dom(field.gamma, field.params.v_inf, field.params.beta);
    const StripGrid& grid = field.grid;
    const int ns = grid.ns(), nt = grid.nt();
    std::vector<double> vals = shock.values();
    vals.front() = dom.g_left();
    vals.back() = dom.g_right();
    ShockUpdate out;
    out.margin = std::numeric_limits<double>::infinity();
    const double band = kappa_bound(shock);
    std::vector<double> col(nt + 1);
    for (int i = 1; i < ns; ++i) {
        const double s = grid.s[i], gi = shock.value(i);
        for (int j = 0; j <= nt; ++j) col[j] = field.at(i, j);
        auto what = [&](double, double tp) { return column_value(col, tp / gi); };
        auto F = [&](double tp) {
            const double w = dom.w_inf(dom.from_strip({s, tp}));
            const double e = tp <= gi ? what(s, tp) : extend_value(what, shock, s, tp).value;
            return w - e;
        };
        auto safe = [&](double tp, double& f) {
            try {
                f = F(tp);
                return std::isfinite(f);
            } catch (const DomainError&) {
                return false;
            }
        };
        double root = gi;
        const double f0 = F(gi);
        const double step = 0.02 * gi;
        if (f0 > 0.0) {
            // The crossing lies above the current graph: search the extension band.
            const double top = (1.0 + band) * gi;
            double lo = gi, f_hi = 0.0;
            bool found = false;
            while (lo < top) {
                const double hi = std::min(lo + step, top);
                if (!safe(hi, f_hi)) break;
                if (f_hi <= 0.0) {
                    root = find_root(F, lo, hi, "update_shock");
                    found = true;
                    break;
                }
                lo = hi;
            }
            if (!found) {
                root = lo;
                out.clipped = true;
            }
        } else if (f0 < 0.0) {
            double hi = gi, f_lo = 0.0;
            bool found = false;
            while (hi > 0.0) {
                const double lo = std::max(hi - step, 0.0);
                if (!safe(lo, f_lo)) break;
                if (f_lo >= 0.0) {
                    root = find_root(F, lo, hi, "update_shock");
                    found = true;
                    break;
                }
                hi = lo;
            }
            if (!found) {
                root = std::max(hi, 1e-3 * gi);
                out.clipped = true;
            }
        }
        const double d = 1e-6 * gi;
        double fp = 0.0, fm = 0.0;
        if (safe(root + d, fp) && safe(root - d, fm)) {
            out.margin = std::min(out.margin, -(fp - fm) / (2.0 * d));
        }
        vals[i] = gi + damping * (root - gi);
    }
    for (int i = 0; i <= ns; ++i) out.move = std::max(out.move, std::abs(vals[i] - shock.value(i)));
    out.shock = ShockGraph(grid.s, std::move(vals), dom.dg_left(), dom.dg_right());
    return out;
}

// ---------------------------------------------------------------------------

namespace {

struct BetaSolve {
    bool ok = false;
    std::vector<double> u;
    ShockGraph shock;
    int outer = 0;
    int newton = 0;
    double move = 0.0;
    double residual = 0.0;
    double margin = 0.0;
    int flags = 0;
    std::string message;
};

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

BetaSolve solve_at_beta(double gamma, double v_inf, double beta, const StripGrid& grid,
                        std::vector<double> u, ShockGraph shock, double tol_pde, double tol_shock,
                        const SolverConfig& config, const ProgressFn& progress) {
    BetaSolve out;
    const MappedDomain dom(gamma, v_inf, beta);
    std::vector<double> margins;
    double last_move = std::numeric_limits<double>::infinity();
    int growth = 0;
    try {
        for (int outer = 1; outer <= config.max_outer; ++outer) {
            const Discretization disc(dom, grid, shock, config.mu0);
            const auto nr = disc.newton(u, tol_pde, config.max_newton);
            out.newton += nr.iterations;
            out.outer = outer;
            out.residual = nr.residual;
            out.flags = nr.ellipticity_flags;
            if (!nr.converged) {
                std::ostringstream os;
                os << "interior Newton stalled at residual " << nr.residual;
                out.message = os.str();
                return out;
            }
            u = nr.u;
            SolutionField field;
            field.gamma = gamma;
            field.params = {v_inf, beta};
            field.grid = grid;
            field.u = u;
            field.shock = shock;
            ShockUpdate up = update_shock(field, shock, 1.0);
            double damping = 1.0;
            if (std::isfinite(up.margin)) {
                if (!margins.empty() && up.margin < 0.5 * median(margins)) damping = 0.5;
                margins.push_back(up.margin);
            }
            if (damping != 1.0) {
                std::vector<double> vals = shock.values();
                for (size_t q = 0; q < vals.size(); ++q) {
                    vals[q] += damping * (up.shock.value(static_cast<int>(q)) - vals[q]);
                }
                up.shock = ShockGraph(grid.s, std::move(vals), dom.dg_left(), dom.dg_right());
                up.move *= damping;
            }
            out.move = up.move;
            out.margin = up.margin;
            shock = up.shock;
            if (progress) progress(beta, outer, up.move, nr.residual);
            if (!(up.move < 1e3)) {
                out.message = "shock update diverged";
                return out;
            }
            if (up.move < tol_shock) {
                out.ok = true;
                break;
            }
            growth = up.move > last_move ? growth + 1 : 0;
            if (growth >= 5) {
                out.message = "shock update is not contracting";
                return out;
            }
            last_move = up.move;
        }
    } catch (const std::exception& e) {
        out.message = e.what();
        return out;
    }
    if (!out.ok && out.message.empty()) out.message = "outer iteration limit reached";
    out.u = std::move(u);
    out.shock = std::move(shock);
    return out;
}

}  // namespace

FbpResult solve_fbp(double gamma, double v_inf, double beta_target, const SolverConfig& config,
                    const ProgressFn& progress) {
    const auto t0 = std::chrono::steady_clock::now();
    const CriticalAngles ang = critical_angles(gamma, v_inf);
    if (!(beta_target >= 0.0) || !(beta_target < ang.beta_d - config.beta_margin)) {
        std::ostringstream os;
        os.precision(17);
        os << "beta = " << beta_target << " is outside the weak range [0, beta_d - margin) with "
           << "beta_d = " << ang.beta_d;
        throw DomainError(os.str());
    }
    FbpResult res;
    SolutionField& field = res.field;
    SolveReport& rep = res.report;
    field = exact_normal_solution(gamma, v_inf, config);
    const StripGrid grid = field.grid;

    double beta = 0.0;
    const double d0 = config.d_beta0 > 0.0 ? config.d_beta0 : ang.beta_d / 64.0;
    double dbeta = d0;
    int halvings = 0;
    if (beta_target == 0.0) {
        const MappedDomain dom(gamma, v_inf, 0.0);
        const Discretization disc(dom, grid, field.shock, config.mu0);
        rep.residual = max_abs(disc.residual(field.u));
        rep.converged = rep.residual < config.tol_pde;
    }
    while (beta < beta_target) {
        double next = std::min(beta + dbeta, beta_target);
        if (beta_target - next < 1e-3 * dbeta) next = beta_target;
        const bool final_step = next == beta_target;
        const MappedDomain dom_new(gamma, v_inf, next);
        // Carry the graph over and re-pin its endpoints linearly.
        std::vector<double> vals = field.shock.values();
        const double dl = dom_new.g_left() - vals.front(), dr = dom_new.g_right() - vals.back();
        for (int i = 0; i <= grid.ns(); ++i) {
            const double s = grid.s[i];
            vals[i] += 0.5 * (1.0 - s) * dl + 0.5 * (1.0 + s) * dr;
        }
        vals.front() = dom_new.g_left();
        vals.back() = dom_new.g_right();
        ShockGraph guess(grid.s, std::move(vals), dom_new.dg_left(), dom_new.dg_right());
        const BetaSolve bs = solve_at_beta(gamma, v_inf, next, grid, field.u, guess,
                                           final_step ? config.tol_pde : config.tol_pde_path,
                                           final_step ? config.tol_shock : config.tol_shock_path,
                                           config, progress);
        rep.total_iterations += bs.outer;
        rep.newton_iterations += bs.newton;
        if (bs.ok) {
            beta = next;
            field.u = bs.u;
            field.shock = bs.shock;
            field.params.beta = beta;
            rep.continuation_steps += 1;
            rep.iterations = bs.outer;
            rep.shock_move = bs.move;
            rep.residual = bs.residual;
            rep.transversality = bs.margin;
            rep.ellipticity_flags = bs.flags;
            if (halvings > 0) dbeta = std::min(2.0 * dbeta, d0);
            if (halvings > 0) --halvings;
        } else {
            dbeta *= 0.5;
            ++halvings;
            rep.message = bs.message;
            if (dbeta < config.min_d_beta || halvings > config.max_halvings) {
                rep.stalled = true;
                std::ostringstream os;
                os.precision(10);
                os << "continuation stalled at beta = " << beta << " (step " << dbeta
                   << "): " << bs.message;
                rep.message = os.str();
                break;
            }
        }
    }
    rep.beta_reached = beta;
    if (!rep.stalled && beta_target > 0.0) {
        rep.converged = rep.shock_move < config.tol_shock && rep.residual < config.tol_pde;
        rep.message.clear();
    }
    if (config.run_verify) {
        const AdmissibilityReport adm = verify_solution(field);
        for (const CheckResult& c : adm.checks) rep.admissibility[c.name] = c.pass;
    }
    rep.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

// ---------------------------------------------------------------------------

PhysicalSolution reconstruct_phi(const SolutionField& field) {
    const MappedDomain dom(field.gamma, field.params.v_inf, field.params.beta);
    const Discretization disc(dom, field.grid, field.shock);
    const ConfigGeometry& geo = dom.geometry();
    const GasModel gas = field.gas();
    PhysicalSolution out;
    const int ns = field.grid.ns(), nt = field.grid.nt();
    out.nodes.reserve(field.grid.size());
    for (int i = 0; i <= ns; ++i) {
        for (int j = 0; j <= nt; ++j) {
            const auto nd = disc.derivatives(i, j, field.u);
            PhysicalSample p;
            p.i = i;
            p.j = j;
            p.xi = nd.xi;
            p.regular = nd.regular;
            p.phi = nd.psi + geo.phi_N.phi(nd.xi);
            p.dphi = nd.dpsi + geo.phi_N.grad(nd.xi);
            const double speed2 = norm2(p.dphi);
            p.c = std::sqrt(gas.sound_speed2(speed2, p.phi));
            p.rho = gas.density_from_bernoulli(speed2, p.phi);
            p.mach = std::sqrt(speed2) / p.c;
            out.nodes.push_back(p);
        }
        out.shock.push_back(disc.node(i, nt));
    }
    return out;
}

}  // namespace pmflow
