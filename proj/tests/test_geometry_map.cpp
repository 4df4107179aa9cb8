#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "pmflow/errors.hpp"
#include "pmflow/geometry_map.hpp"

using namespace pmflow;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Case {
    double gamma, v, beta_frac;  // beta as a fraction of beta_s
};

const Case kCases[] = {{1.4, 0.5, 0.0}, {1.4, 0.5, 0.3}, {1.4, 0.5, 0.9}, {1.4, 0.5, 1.05},
                       {1.0, 0.5, 0.5}, {2.0, 0.8, 0.6}, {1.4, 1.5, 0.4}};

double beta_of(const Case& c) {
    const CriticalAngles a = critical_angles(c.gamma, c.v);
    return c.beta_frac * a.beta_s;
}

// Brute-force distance from a point to a dense sampling of the spline graph.
double dense_distance(const ShockGraph& g, Vec2 p) {
    double best = 1e300;
    for (int i = 0; i <= 20000; ++i) {
        const double s = -1.0 + 2.0 * i / 20000.0;
        best = std::min(best, std::hypot(p.x - s, p.y - g(s)));
    }
    return best;
}

}  // namespace

TEST_CASE("ramp profiles meet their support and slope bounds") {
    for (double x = -0.5; x <= 1.5; x += 0.01) {
        const Ramp r = ramp(x, 0.0, 1.0);
        CHECK(r.value >= 0.0);
        CHECK(r.value <= 1.0);
        CHECK(r.d1 >= 0.0);
        CHECK(r.d1 <= 15.0 / 8.0 + 1e-12);
        if (x <= 0.0) CHECK(r.value == 0.0);
        if (x >= 1.0) CHECK(r.value == 1.0);
        const Ramp f = ramp(x, 1.0, 0.0);
        CHECK(f.value == doctest::Approx(1.0 - r.value).epsilon(1e-14));
    }
    // derivatives against central differences
    for (double x = 0.05; x < 1.0; x += 0.1) {
        const double e = 1e-6;
        const Ramp r = ramp(x, 0.2, 0.9);
        CHECK(r.d1 == doctest::Approx((ramp(x + e, 0.2, 0.9).value - ramp(x - e, 0.2, 0.9).value) /
                                      (2 * e))
                           .epsilon(1e-6));
        CHECK(r.d2 == doctest::Approx((ramp(x + e, 0.2, 0.9).d1 - ramp(x - e, 0.2, 0.9).d1) /
                                      (2 * e))
                           .epsilon(1e-5));
    }
}

TEST_CASE("local sonic coordinates") {
    const ConfigGeometry g = landmarks(1.4, 0.5, 0.3);
    // points on the sonic circles have x = 0
    for (double th = 0.1; th < 1.5; th += 0.2) {
        const Vec2 p = g.O_N + g.c_N * Vec2{std::cos(th), std::sin(th)};
        CHECK(std::abs(xy_local(g, p, SonicSide::N).x) < 1e-14);
        const Vec2 q = g.O_O + g.c_O * Vec2{-std::cos(th), std::sin(th)};
        const LocalXY lq = xy_local(g, q, SonicSide::O);
        CHECK(std::abs(lq.x) < 1e-14);
        CHECK(lq.y == doctest::Approx(th).epsilon(1e-13));
    }
    // P2 sits at (0, y) with sin y = eta_N / c_N
    const LocalXY p2 = xy_local(g, g.P2, SonicSide::N);
    CHECK(std::abs(p2.x) < 1e-14);
    CHECK(std::sin(p2.y) == doctest::Approx(g.eta_N / g.c_N).epsilon(1e-13));
    // P1 on the O side: sin(y + beta) = q_O / c_O
    const LocalXY p1 = xy_local(g, g.P1, SonicSide::O);
    CHECK(std::abs(p1.x) < 1e-13);
    CHECK(std::sin(p1.y + g.beta) == doctest::Approx(g.q_O / g.c_O).epsilon(1e-12));

    std::mt19937 rng(7);
    std::uniform_real_distribution<double> ux(-2.0, 2.0), uy(0.01, 2.0);
    for (int i = 0; i < 200; ++i) {
        const Vec2 p{ux(rng), uy(rng)};
        for (SonicSide side : {SonicSide::O, SonicSide::N}) {
            const Vec2 back = xy_to_point(g, xy_local(g, p, side), side);
            CHECK(norm(back - p) < 1e-12);
        }
    }
    CHECK_THROWS_AS(xy_local(g, g.O_N, SonicSide::N), DomainError);
}

TEST_CASE("mapping constants satisfy the annulus conditions") {
    for (const Case& c : kCases) {
        const MappingConstants mc = mapping_constants(c.gamma, c.v);
        CHECK(mc.k >= 8.0);
        CHECK(mc.delta0 > 0.0);
        const NormalState n = normal_state(c.gamma, c.v);
        const double eta = n.eta_N + mc.delta0 / c.v;
        CHECK(eta < n.c_N * (1.0 - 4.0 / mc.k));
        // memoised value is stable
        const MappingConstants again = mapping_constants(c.gamma, c.v);
        CHECK(again.k == mc.k);
        CHECK(again.delta0 == mc.delta0);
    }
}

TEST_CASE("F1 and F2 derivative formulas match finite differences") {
    for (const Case& c : kCases) {
        const MappedDomain dom(c.gamma, c.v, beta_of(c));
        const ConfigGeometry& g = dom.geometry();
        const double e = 1e-6;
        for (double x1 = g.P1.x + 0.02; x1 < g.P3.x; x1 += 0.037) {
            for (double x2 = 0.01; x2 < 0.6 * g.eta_N; x2 += 0.11) {
                const Vec2 xi{x1, x2};
                if (!dom.in_Q_beta(xi)) continue;
                const double fd = (dom.h1({x1 + e, x2}) - dom.h1({x1 - e, x2})) / (2 * e);
                CHECK(dom.dh1_dxi1(xi) == doctest::Approx(fd).epsilon(1e-6));
                // det DF1 bounded below inside Q_beta
                CHECK(dom.dh1_dxi1(xi) > 0.05);
                const Vec2 st = dom.F1(xi);
                const double fd2 =
                    (dom.h2(st.x, st.y + e) - dom.h2(st.x, st.y - e)) / (2 * e);
                CHECK(dom.dh2_dt(st.x, st.y) == doctest::Approx(fd2).epsilon(1e-6));
                CHECK(dom.dh2_dt(st.x, st.y) > 0.5);
            }
        }
    }
}

TEST_CASE("G1 is the polar chart next to both sonic arcs") {
    for (const Case& c : kCases) {
        const MappedDomain dom(c.gamma, c.v, beta_of(c));
        const ConfigGeometry& g = dom.geometry();
        const double k = dom.k();
        // N side: dist to the arc below c_N/(2k)
        for (double x = 0.0; x < g.c_N / (2.0 * k); x += g.c_N / (16.0 * k)) {
            for (double y = 0.02; y < dom.shock_line_y(SonicSide::N, x); y += 0.1) {
                const Vec2 p = xy_to_point(g, {x, y}, SonicSide::N);
                const Vec2 sp = dom.G1(p);
                CHECK(sp.x == doctest::Approx(g.c_N - x).epsilon(1e-12));
                CHECK(sp.y == doctest::Approx(y).epsilon(1e-12));
            }
        }
        // O side, measured from the extended arc of radius c_hat
        const double ch = dom.c_hat_O();
        for (double d = 0.0; d < ch / (2.0 * k); d += ch / (16.0 * k)) {
            const double x = dom.x_beta() + d;
            const double ytop = dom.shock_line_y(SonicSide::O, x);
            for (double y = 0.02; y < ytop; y += 0.05) {
                const Vec2 p = xy_to_point(g, {x, y}, SonicSide::O);
                const Vec2 sp = dom.G1(p);
                CHECK(sp.x == doctest::Approx(x + g.u_O - g.c_O).epsilon(1e-12));
                CHECK(sp.y == doctest::Approx(y).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("chart landmarks") {
    for (const Case& c : kCases) {
        const MappedDomain dom(c.gamma, c.v, beta_of(c));
        const ConfigGeometry& g = dom.geometry();
        // wedge goes to t' = 0, F1(P4) and F1(P3) on the ends
        for (double x1 = g.P4.x; x1 <= g.P3.x; x1 += 0.05) {
            CHECK(dom.G1({x1, 0.0}).y == 0.0);
        }
        CHECK(dom.F1(g.P4).x == doctest::Approx(g.u_O - dom.c_hat_O()).epsilon(1e-12));
        CHECK(dom.F1(g.P3).x == doctest::Approx(g.c_N).epsilon(1e-12));
        CHECK(dom.F1(g.P2).x == doctest::Approx(g.c_N).epsilon(1e-12));
        CHECK(dom.F1(g.P2).y == g.P2.y);
        CHECK(dom.to_strip(g.P4).x == doctest::Approx(-1.0).epsilon(1e-12));
        CHECK(dom.to_strip(g.P3).x == doctest::Approx(1.0).epsilon(1e-12));
        // endpoints of the shock image
        CHECK(dom.to_strip(g.P2).y == doctest::Approx(dom.g_right()).epsilon(1e-12));
        if (!dom.sonic_point()) {
            CHECK(dom.to_strip(g.P1).y == doctest::Approx(dom.g_left()).epsilon(1e-10));
            CHECK(dom.g_left() > 0.0);
        } else {
            CHECK(dom.g_left() == 0.0);
        }
        CHECK(std::sin(dom.g_right()) == doctest::Approx(g.eta_N / g.c_N).epsilon(1e-13));
    }
}

TEST_CASE("far-field potential falls at rate v_inf up the F1 chart") {
    for (const Case& c : kCases) {
        const MappedDomain dom(c.gamma, c.v, beta_of(c));
        const ConfigGeometry& g = dom.geometry();
        for (double s = g.P4.x + 0.05; s < g.c_N - 0.05; s += 0.13) {
            for (double t = 0.05; t < 0.5 * g.eta_N; t += 0.1) {
                const double e = 1e-5;
                auto phibar = [&](double tt) {
                    const Vec2 xi = dom.F1_inverse({s, tt});
                    return g.phi_inf.phi(xi) + 0.5 * norm2(xi);
                };
                CHECK((phibar(t + e) - phibar(t - e)) / (2 * e) ==
                      doctest::Approx(-c.v).epsilon(1e-7));
            }
        }
    }
}

TEST_CASE("strip chart round trips") {
    std::mt19937 rng(11);
    for (const Case& c : kCases) {
        const MappedDomain dom(c.gamma, c.v, beta_of(c));
        std::uniform_real_distribution<double> us(-1.0, 1.0), ut(0.02, 0.98);
        int tested = 0;
        for (int i = 0; i < 150; ++i) {
            const double s = us(rng);
            const double top = dom.f_beta(s);
            const Vec2 st{s, ut(rng) * top};
            const Vec2 xi = dom.from_strip(st);
            CHECK(dom.in_Q_beta(xi));
            const Vec2 back = dom.to_strip(xi);
            CHECK(std::abs(back.x - st.x) < 1e-10);
            CHECK(std::abs(back.y - st.y) < 1e-10);
            ++tested;
        }
        CHECK(tested == 150);
    }
}

TEST_CASE("shock graphs in the chart") {
    const MappedDomain dom0(1.4, 0.5, 0.0);
    const ShockGraph flat = flat_shock(dom0, 64);
    const ShockGraph ref = reference_shock(dom0, 64);
    for (int i = 0; i <= 64; ++i) CHECK(flat.value(i) == doctest::Approx(ref.value(i)).epsilon(1e-12));
    // each node of the flat image is on xi2 = eta_N
    for (int i = 0; i <= 64; ++i) {
        const Vec2 xi = dom0.from_strip({flat.node(i), flat.value(i)});
        CHECK(xi.y == doctest::Approx(dom0.geometry().eta_N).epsilon(1e-12));
    }
    for (const Case& c : kCases) {
        const MappedDomain dom(c.gamma, c.v, beta_of(c));
        const ShockGraph g = reference_shock(dom, 64);
        CHECK(g.value(0) == dom.g_left());
        CHECK(g.value(64) == dom.g_right());
        for (int i = 1; i < 64; ++i) CHECK(g.value(i) > 0.0);
        double worst = 0.0;
        CHECK(g.in_growth_cone(dom, 50.0, &worst));
        // endpoint slopes of the graph follow the shock lines
        const double e = 1e-4;
        CHECK(g.derivative(1.0) == doctest::Approx(dom.dg_right()).epsilon(1e-12));
        const double fd = (g(1.0) - g(1.0 - e)) / e;
        CHECK(fd == doctest::Approx(dom.dg_right()).epsilon(2e-2));
    }
}

TEST_CASE("spline interpolates and reproduces cubics") {
    std::vector<double> v(33);
    auto f = [](double s) { return 1.0 + 0.3 * s - 0.2 * s * s + 0.1 * s * s * s; };
    auto df = [](double s) { return 0.3 - 0.4 * s + 0.3 * s * s; };
    for (int i = 0; i <= 32; ++i) v[i] = f(-1.0 + 2.0 * i / 32);
    const ShockGraph g(v, df(-1.0), df(1.0));
    for (double s = -1.0; s <= 1.0; s += 0.0137) {
        CHECK(g(s) == doctest::Approx(f(s)).epsilon(1e-13));
        CHECK(g.derivative(s) == doctest::Approx(df(s)).epsilon(1e-12));
    }
}

TEST_CASE("interpolant phi_star") {
    for (const Case& c : kCases) {
        const MappedDomain dom(c.gamma, c.v, beta_of(c));
        const ConfigGeometry& g = dom.geometry();
        std::mt19937 rng(5);
        std::uniform_real_distribution<double> ux(g.P1.x - 0.2, g.c_N + 0.2), uy(0.0, 1.5);
        for (int i = 0; i < 300; ++i) {
            const Vec2 xi{ux(rng), uy(rng)};
            const PhiStar p = dom.phi_star(xi);
            CHECK(p.value <= std::max(g.phi_O.phi(xi), g.phi_N.phi(xi)) + 1e-13);
            if (xi.x >= 0.0) CHECK(p.value == doctest::Approx(g.phi_N.phi(xi)).epsilon(1e-14));
            // gradient and Hessian against differences
            const double e = 1e-5;
            const double d1 = (dom.phi_star(xi + Vec2{e, 0}).value -
                               dom.phi_star(xi - Vec2{e, 0}).value) / (2 * e);
            const double d2 = (dom.phi_star(xi + Vec2{0, e}).value -
                               dom.phi_star(xi - Vec2{0, e}).value) / (2 * e);
            CHECK(p.grad.x == doctest::Approx(d1).epsilon(1e-7));
            CHECK(p.grad.y == doctest::Approx(d2).epsilon(1e-7));
            const double h11 = (dom.phi_star(xi + Vec2{e, 0}).grad.x -
                                dom.phi_star(xi - Vec2{e, 0}).grad.x) / (2 * e);
            CHECK(p.h11 == doctest::Approx(h11).epsilon(1e-5));
        }
        if (c.beta_frac > 0.0) {
            // phi_O = phi_N at xi1 = xi1_I
            const Vec2 pI{dom.xi1_I(), 0.3};
            CHECK(g.phi_O.phi(pI) == doctest::Approx(g.phi_N.phi(pI)).epsilon(1e-12));
            CHECK(dom.xi1_I() < 0.0);
            CHECK(dom.xi1_I() > g.P1.x);
            // equals phi_O near the O arc
            const Vec2 near_arc = g.P4 + Vec2{1e-3, 1e-3};
            CHECK(dom.phi_star(near_arc).value ==
                  doctest::Approx(g.phi_O.phi(near_arc)).epsilon(1e-14));
        }
    }
    // beta = 0: phi_star is phi_N everywhere
    const MappedDomain dom0(1.4, 0.5, 0.0);
    for (double x = -1.2; x < 1.2; x += 0.1) {
        const Vec2 xi{x, 0.4};
        CHECK(dom0.phi_star(xi).value == dom0.geometry().phi_N.phi(xi));
    }
}

TEST_CASE("extension kernel moments") {
    const KernelQuadrature& kq = extension_quadrature();
    double m0 = 0, m1 = 0, m2 = 0;
    for (size_t q = 0; q < kq.nodes.size(); ++q) {
        m0 += kq.weights[q];
        m1 += kq.weights[q] * kq.nodes[q];
        m2 += kq.weights[q] * kq.nodes[q] * kq.nodes[q];
    }
    CHECK(std::abs(m0 - 1.0) < 1e-12);
    CHECK(std::abs(m1) < 1e-12);
    CHECK(std::abs(m2) < 1e-12);
    // an independent midpoint rule on the closed-form kernel
    double n0 = 0, n1 = 0, n2 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double l = 1.0 + (i + 0.5) / n;
        const double w = extension_kernel(l) / n;
        n0 += w;
        n1 += w * l;
        n2 += w * l * l;
    }
    CHECK(std::abs(n0 - 1.0) < 1e-9);
    CHECK(std::abs(n1) < 1e-9);
    CHECK(std::abs(n2) < 1e-9);
    CHECK(extension_kernel(0.5) == 0.0);
    CHECK(extension_kernel(2.5) == 0.0);
}

TEST_CASE("extension operator") {
    const MappedDomain dom(1.4, 0.5, 0.3);
    const ShockGraph g = reference_shock(dom, 32);
    ExtensionSettings set;
    set.kappa = kappa_bound(g);
    CHECK(set.kappa < 2.0 / 9.0);

    std::vector<Vec2> pts;
    for (double s = -0.9; s < 0.95; s += 0.1) {
        for (double f = 0.0; f <= set.kappa * 0.99; f += set.kappa / 5.0) pts.push_back({s, (1.0 + f) * g(s)});
    }
    auto quad = [](double s, double t) { return 0.3 + s * t - 2.0 * t + 0.7 * t * t; };
    const std::vector<double> eq = extend_field(quad, g, pts, set);
    for (size_t i = 0; i < pts.size(); ++i) {
        CHECK(eq[i] == doctest::Approx(quad(pts[i].x, pts[i].y)).epsilon(1e-12));
    }
    // linearity
    auto a = [](double s, double t) { return std::sin(s + 3 * t); };
    auto b = [](double s, double t) { return std::exp(s * t); };
    const std::vector<double> ea = extend_field(a, g, pts, set), eb = extend_field(b, g, pts, set);
    const std::vector<double> eab = extend_field(
        [&](double s, double t) { return 2.5 * a(s, t) + b(s, t); }, g, pts, set);
    for (size_t i = 0; i < pts.size(); ++i) {
        CHECK(std::abs(eab[i] - (2.5 * ea[i] + eb[i])) < 1e-13);
    }
    // cubic error scales with the cube of the distance
    auto cub = [](double, double t) { return t * t * t; };
    const double s0 = 0.1, gs = g(s0);
    const double e1 = extend_value(cub, g, s0, gs + 0.02, set).value - std::pow(gs + 0.02, 3);
    const double e2 = extend_value(cub, g, s0, gs + 0.01, set).value - std::pow(gs + 0.01, 3);
    CHECK(e1 / e2 == doctest::Approx(8.0).epsilon(0.05));
    // below the graph the field is left alone
    CHECK(extend_value(a, g, 0.2, 0.5 * g(0.2), set).value == a(0.2, 0.5 * g(0.2)));
    // the default kappa reaches beyond what the kernel supports
    ExtensionSettings wide;
    wide.kappa = 0.25;
    std::vector<Vec2> far{{0.0, 1.249 * g(0.0)}};
    CHECK_THROWS_AS(extend_field(quad, g, far, wide), ConfigError);
}

TEST_CASE("regularized distance sandwich") {
    const MappedDomain dom(1.4, 0.5, 0.3);
    const ShockGraph g = reference_shock(dom, 32);
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> us(-0.95, 0.95), ud(1e-3, 0.3);
    for (int i = 0; i < 100; ++i) {
        const double s = us(rng);
        const Vec2 p{s, g(s) + ud(rng)};
        const double d = dense_distance(g, p);
        const double dg = regularized_distance(g, p);
        CHECK(dg >= 0.5 * d);
        CHECK(dg <= 1.5 * d);
    }
}
