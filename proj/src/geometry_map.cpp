#include "pmflow/geometry_map.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <sstream>
#include <utility>

#include <Eigen/Dense>

#include "pmflow/errors.hpp"
#include "pmflow/roots.hpp"

namespace pmflow {

namespace {

constexpr double kPi = 3.14159265358979323846;

double safe_asin(double a) { return std::asin(std::clamp(a, -1.0, 1.0)); }

// Samples of the weak range used to fix the (gamma, v_inf)-uniform constants.
constexpr int kBetaSamples = 64;

struct BetaSample {
    double beta, c_hat, q, cosb;
};

BetaSample sample_beta(double gamma, double v_inf, double beta) {
    const ConfigGeometry g = landmarks(gamma, v_inf, beta);
    double c_hat = g.c_O;
    if (g.topology == CornerTopology::SonicPoint) c_hat = g.u_O - g.P_beta.x;
    return {beta, c_hat, g.q_O, std::cos(beta)};
}

MappingConstants compute_constants(double gamma, double v_inf) {
    const NormalState n = normal_state(gamma, v_inf);
    const double beta_d = critical_angles(gamma, v_inf).beta_d;
    std::vector<BetaSample> samples;
    double room = n.c_N - n.eta_N;
    for (int j = 0; j <= kBetaSamples; ++j) {
        const BetaSample b = sample_beta(gamma, v_inf, beta_d * j / kBetaSamples);
        room = std::min(room, (b.c_hat - b.q) / b.cosb);
        samples.push_back(b);
    }
    if (!(room > 0.0)) throw NumericalFailure("shock lines do not cut the sonic circles");
    MappingConstants out;
    out.delta0 = 0.125 * v_inf * room;

    auto fits = [&](double k) {
        const double eta_shift = n.eta_N + out.delta0 / v_inf;
        const double r3 = n.c_N * (1.0 - 3.0 / k), r4 = n.c_N * (1.0 - 4.0 / k);
        if (!(r4 > eta_shift)) return false;
        if (!(std::sqrt(r3 * r3 - eta_shift * eta_shift) > 3.0 * n.c_N / k)) return false;
        for (const BetaSample& b : samples) {
            const double q = b.q + out.delta0 * b.cosb / v_inf;
            const double o3 = b.c_hat * (1.0 - 3.0 / k), o4 = b.c_hat * (1.0 - 4.0 / k);
            if (!(o4 > q)) return false;
            if (!(std::sqrt(o3 * o3 - q * q) * b.cosb > 3.0 * b.c_hat / k)) return false;
        }
        return true;
    };
    for (double k = 8.0; k <= 4096.0; k *= 2.0) {
        if (fits(k)) {
            out.k = k;
            return out;
        }
    }
    throw NumericalFailure("no cutoff scale k satisfies the annulus conditions");
}

}  // namespace

Ramp ramp(double x, double a, double b) {
    const double w = b - a;
    const double z = (x - a) / w;
    if (z <= 0.0) return {0.0, 0.0, 0.0};
    if (z >= 1.0) return {1.0, 0.0, 0.0};
    const double z2 = z * z;
    const double v = z2 * z * (10.0 - 15.0 * z + 6.0 * z2);
    const double d1 = 30.0 * z2 * (1.0 - z) * (1.0 - z) / w;
    const double d2 = 60.0 * z * (1.0 - z) * (1.0 - 2.0 * z) / (w * w);
    return {v, d1, d2};
}

LocalXY xy_local(const ConfigGeometry& g, Vec2 p, SonicSide side) {
    const Vec2 centre = side == SonicSide::N ? g.O_N : g.O_O;
    const Vec2 d = p - centre;
    const double r = norm(d);
    if (!(r > 0.0)) throw DomainError("xy_local: point at the centre of the sonic circle");
    const double theta = std::atan2(d.y, d.x);
    if (side == SonicSide::N) return {g.c_N - r, theta};
    return {g.c_O - r, kPi - theta};
}

Vec2 xy_to_point(const ConfigGeometry& g, LocalXY q, SonicSide side) {
    if (side == SonicSide::N) {
        const double r = g.c_N - q.x;
        return g.O_N + r * Vec2{std::cos(q.y), std::sin(q.y)};
    }
    const double r = g.c_O - q.x;
    const double theta = kPi - q.y;
    return g.O_O + r * Vec2{std::cos(theta), std::sin(theta)};
}

MappingConstants mapping_constants(double gamma, double v_inf) {
    using Key = std::pair<std::uint64_t, std::uint64_t>;
    static std::map<Key, MappingConstants> memo;
    static std::shared_mutex mutex;
    const Key key{std::bit_cast<std::uint64_t>(gamma), std::bit_cast<std::uint64_t>(v_inf)};
    {
        std::shared_lock lock(mutex);
        if (auto it = memo.find(key); it != memo.end()) return it->second;
    }
    const MappingConstants value = compute_constants(gamma, v_inf);
    std::unique_lock lock(mutex);
    return memo.emplace(key, value).first->second;
}

// ---------------------------------------------------------------------------

MappedDomain::MappedDomain(double gamma, double v_inf, double beta)
    : geo_(landmarks(gamma, v_inf, beta)) {
    const MappingConstants mc = mapping_constants(gamma, v_inf);
    k_ = mc.k;
    delta0_ = mc.delta0;
    const double sb = std::sin(beta), cb = std::cos(beta);
    if (sonic_point()) {
        c_hat_O_ = geo_.u_O - geo_.P_beta.x;
        x_beta_ = geo_.c_O - c_hat_O_;
    } else {
        c_hat_O_ = geo_.c_O;
        x_beta_ = 0.0;
    }
    s_beta_ = geo_.u_O - c_hat_O_;
    q_O_delta0_ = geo_.q_O + delta0_ * cb / v_inf;
    u_O_delta0_ = geo_.u_O - q_O_delta0_ * sb;

    if (beta > 0.0) {
        xi1_I_ = -(geo_.xi2_beta - geo_.eta_N) / std::tan(beta);
    } else {
        xi1_I_ = 0.5 * geo_.P1.x;  // phi_O = phi_N, so any point left of 0 will do
    }
    xi1_chi_full_ = xi1_I_ - (xi1_I_ - geo_.P1.x) / 10.0;

    g_left_ = sonic_point() ? 0.0 : shock_line_y(SonicSide::O, x_beta_);
    g_right_ = shock_line_y(SonicSide::N, 0.0);
    const double half = 0.5 * (geo_.c_N - s_beta_);
    dg_left_ = half * shock_line_dy(SonicSide::O, x_beta_);
    dg_right_ = -half * shock_line_dy(SonicSide::N, 0.0);
}

double MappedDomain::shock_line_y(SonicSide side, double x) const {
    if (side == SonicSide::N) return safe_asin(geo_.eta_N / (geo_.c_N - x));
    return safe_asin(geo_.q_O / (geo_.c_O - x)) - geo_.beta;
}

double MappedDomain::shock_line_dy(SonicSide side, double x) const {
    const double r = (side == SonicSide::N ? geo_.c_N : geo_.c_O) - x;
    const double q = side == SonicSide::N ? geo_.eta_N : geo_.q_O;
    return q / (r * std::sqrt(r * r - q * q));
}

double MappedDomain::r_O(Vec2 xi) const { return std::hypot(xi.x - geo_.u_O, xi.y); }
double MappedDomain::r_N(Vec2 xi) const { return std::hypot(xi.x, xi.y); }

double MappedDomain::h1(Vec2 xi) const {
    const double k = k_, ch = c_hat_O_, cN = geo_.c_N;
    const double chiO = ramp(xi.x, u_O_delta0_, u_O_delta0_ - 2.0 * ch / k).value;
    const double chiN = ramp(xi.x, cN / k, 2.0 * cN / k).value;
    double left = 0.0, right = xi.x;
    if (chiO > 0.0) {
        const double r = r_O(xi);
        const double z = ramp(r, ch * (1.0 - 3.0 / k), ch * (1.0 - 2.0 / k)).value;
        left = (geo_.u_O - r) * z + (1.0 - z) * xi.x;
    }
    if (chiN > 0.0) {
        const double r = r_N(xi);
        const double z = ramp(r, cN * (1.0 - 3.0 / k), cN * (1.0 - 2.0 / k)).value;
        right = xi.x * (1.0 - chiN) + (r * z + (1.0 - z) * xi.x) * chiN;
    }
    return left * chiO + (1.0 - chiO) * right;
}

double MappedDomain::dh1_dxi1(Vec2 xi) const {
    const double k = k_, ch = c_hat_O_, cN = geo_.c_N, uO = geo_.u_O;
    const double chiO = ramp(xi.x, u_O_delta0_, u_O_delta0_ - 2.0 * ch / k).value;
    const double chiN = ramp(xi.x, cN / k, 2.0 * cN / k).value;
    double a1 = 0.0, a2 = 0.0;
    if (chiO > 0.0) {
        const double r = r_O(xi);
        const Ramp z = ramp(r, ch * (1.0 - 3.0 / k), ch * (1.0 - 2.0 / k));
        const double c = (uO - xi.x) / r;
        a1 = (c * z.value + (1.0 - z.value) + c * (r - (uO - xi.x)) * z.d1) * chiO;
    }
    if (chiN > 0.0) {
        const double r = r_N(xi);
        const Ramp z = ramp(r, cN * (1.0 - 3.0 / k), cN * (1.0 - 2.0 / k));
        const double c = xi.x / r;
        a2 = (c * z.value + (1.0 - z.value) + c * (r - xi.x) * z.d1) * chiN * (1.0 - chiO);
    }
    return a1 + a2 + (1.0 - chiN) * (1.0 - chiO);
}

double MappedDomain::h2(double s, double t) const {
    const double k = k_, ch = c_hat_O_, cN = geo_.c_N, uO = geo_.u_O;
    const double chiO = ramp(s, uO - ch * (1.0 - 1.0 / k), uO - ch * (1.0 - 0.5 / k)).value;
    const double chiN = ramp(s, cN * (1.0 - 1.0 / k), cN * (1.0 - 0.5 / k)).value;
    double out = 0.0;
    if (chiO > 0.0) out += chiO * safe_asin(t / (uO - s));
    if (chiO < 1.0) {
        double mid = t * (1.0 - chiN);
        if (chiN > 0.0) mid += chiN * safe_asin(t / s);
        out += (1.0 - chiO) * mid;
    }
    return out;
}

double MappedDomain::dh2_dt(double s, double t) const {
    const double k = k_, ch = c_hat_O_, cN = geo_.c_N, uO = geo_.u_O;
    const double chiO = ramp(s, uO - ch * (1.0 - 1.0 / k), uO - ch * (1.0 - 0.5 / k)).value;
    const double chiN = ramp(s, cN * (1.0 - 1.0 / k), cN * (1.0 - 0.5 / k)).value;
    double out = 0.0;
    if (chiO > 0.0) out += chiO / std::sqrt((uO - s) * (uO - s) - t * t);
    if (chiO < 1.0) {
        double mid = 1.0 - chiN;
        if (chiN > 0.0) mid += chiN / std::sqrt(s * s - t * t);
        out += (1.0 - chiO) * mid;
    }
    return out;
}

double MappedDomain::t_max(double s) const {
    const double k = k_, ch = c_hat_O_, cN = geo_.c_N, uO = geo_.u_O;
    double tm = 10.0;
    if (s < uO - ch * (1.0 - 1.0 / k)) tm = std::min(tm, uO - s);
    if (s > cN * (1.0 - 1.0 / k)) tm = std::min(tm, s);
    return tm;
}

Vec2 MappedDomain::F1_inverse(Vec2 st) const {
    const double s = st.x, t = st.y;
    // |h1 - xi1| <= t, so this bracket always holds the preimage.
    auto f = [&](double x1) { return h1({x1, t}) - s; };
    const double pad = std::abs(t) + 1e-3;
    return {find_root(f, s - pad, s + pad, "F1_inverse"), t};
}

Vec2 MappedDomain::F2_inverse(Vec2 sp_tp) const {
    const double s = sp_tp.x, tp = sp_tp.y;
    if (tp == 0.0) return {s, 0.0};
    const double hi = t_max(s);
    auto f = [&](double t) { return h2(s, t) - tp; };
    if (f(hi) < 0.0) {
        std::ostringstream os;
        os.precision(17);
        os << "F2_inverse: (" << s << ", " << tp << ") outside the image of Q_beta";
        throw DomainError(os.str());
    }
    return {s, find_root(f, 0.0, hi, "F2_inverse")};
}

double MappedDomain::L(double s_prime) const {
    return 2.0 * (s_prime - s_beta_) / (geo_.c_N - s_beta_) - 1.0;
}

double MappedDomain::L_inverse(double s) const {
    return s_beta_ + 0.5 * (s + 1.0) * (geo_.c_N - s_beta_);
}

Vec2 MappedDomain::to_strip(Vec2 xi) const {
    const Vec2 st = G1(xi);
    return {L(st.x), st.y};
}

Vec2 MappedDomain::from_strip(Vec2 s_tp) const {
    return G1_inverse({L_inverse(s_tp.x), s_tp.y});
}

namespace {

// Root in t' of a quantity that decreases up each chart column, found by
// stepping upward until it turns negative.
template <class F>
double column_crossing(const MappedDomain& dom, double s, F&& level, const char* what) {
    auto f = [&](double tp) { return level(dom.from_strip({s, tp})); };
    double lo = 0.0;
    double flo = f(lo);
    if (flo <= 0.0) return 0.0;
    const double step = 0.05;
    for (double hi = step; hi < 10.0; hi += step) {
        double fhi;
        try {
            fhi = f(hi);
        } catch (const DomainError&) {
            // Ran off the chart: shrink toward the last good height.
            double a = lo, b = hi;
            for (int it = 0; it < 60; ++it) {
                const double m = 0.5 * (a + b);
                try {
                    if (f(m) < 0.0) return find_root(f, lo, m, what);
                    a = m;
                } catch (const DomainError&) {
                    b = m;
                }
            }
            throw NumericalFailure(std::string(what) + ": column leaves the chart");
        }
        if (fhi < 0.0) return find_root(f, lo, hi, what);
        lo = hi;
    }
    throw NumericalFailure(std::string(what) + ": no crossing in column");
}

}  // namespace

double MappedDomain::f_beta(double s) const {
    const UniformPseudoState &pi = geo_.phi_inf, &pO = geo_.phi_O, &pN = geo_.phi_N;
    return column_crossing(
        *this, s,
        [&](Vec2 xi) { return std::min(pi.phi(xi) - pO.phi(xi), pi.phi(xi) - pN.phi(xi)) + delta0_; },
        "f_beta");
}

bool MappedDomain::in_Q_beta(Vec2 xi) const {
    const double tol = 1e-12;
    if (xi.y < -tol) return false;
    const double lift = delta0_ / geo_.v_inf;
    if (xi.y > geo_.eta_N + lift + tol) return false;
    if (xi.y > geo_.xi2_beta + std::tan(geo_.beta) * xi.x + lift + tol) return false;
    if (xi.x <= geo_.u_O && r_O(xi) > c_hat_O_ + tol) return false;
    if (xi.x >= 0.0 && r_N(xi) > geo_.c_N + tol) return false;
    return true;
}

double MappedDomain::chi_star(double xi1) const {
    return ramp(xi1, xi1_I_, xi1_chi_full_).value;
}

PhiStar MappedDomain::phi_star(Vec2 xi) const {
    // phi_O - phi_N is affine: u_O xi1 + v (eta_N - xi2_beta).
    const double uO = geo_.u_O;
    const double diff = uO * xi.x + geo_.v_inf * (geo_.eta_N - geo_.xi2_beta);
    const Ramp c = ramp(xi.x, xi1_I_, xi1_chi_full_);
    const Vec2 dN = geo_.phi_N.grad(xi);
    PhiStar p;
    p.value = geo_.phi_N.phi(xi) + c.value * diff;
    p.grad = dN + Vec2{c.d1 * diff + c.value * uO, 0.0};
    p.h11 = -1.0 + c.d2 * diff + 2.0 * c.d1 * uO;
    p.h12 = 0.0;
    p.h22 = -1.0;
    return p;
}

double MappedDomain::w_inf(Vec2 xi) const { return geo_.phi_inf.phi(xi) - phi_star(xi).value; }

// ---------------------------------------------------------------------------

namespace {

std::vector<double> uniform_nodes(int intervals) {
    std::vector<double> n(intervals + 1);
    for (int i = 0; i <= intervals; ++i) n[i] = -1.0 + 2.0 * i / intervals;
    n.back() = 1.0;
    return n;
}

}  // namespace

ShockGraph::ShockGraph(std::vector<double> values, double slope_left, double slope_right)
    : slope_left_(slope_left), slope_right_(slope_right) {
    if (values.size() < 2) throw DomainError("shock graph needs at least two nodes");
    nodes_ = uniform_nodes(static_cast<int>(values.size()) - 1);
    values_ = std::move(values);
    build();
}

ShockGraph::ShockGraph(std::vector<double> nodes, std::vector<double> values, double slope_left,
                       double slope_right)
    : nodes_(std::move(nodes)),
      values_(std::move(values)),
      slope_left_(slope_left),
      slope_right_(slope_right) {
    if (values_.size() < 2) throw DomainError("shock graph needs at least two nodes");
    if (nodes_.size() != values_.size()) throw DomainError("shock graph: node/value size mismatch");
    for (size_t i = 1; i < nodes_.size(); ++i) {
        if (!(nodes_[i] > nodes_[i - 1])) throw DomainError("shock graph nodes must increase");
    }
    build();
}

void ShockGraph::build() {
    const int n = intervals();
    auto h = [&](int i) { return nodes_[i + 1] - nodes_[i]; };
    // Clamped cubic spline: tridiagonal system for the second derivatives.
    std::vector<double> a(n + 1), b(n + 1), c(n + 1), d(n + 1);
    b[0] = h(0) / 3.0;
    c[0] = h(0) / 6.0;
    d[0] = (values_[1] - values_[0]) / h(0) - slope_left_;
    for (int i = 1; i < n; ++i) {
        a[i] = h(i - 1) / 6.0;
        b[i] = (h(i - 1) + h(i)) / 3.0;
        c[i] = h(i) / 6.0;
        d[i] = (values_[i + 1] - values_[i]) / h(i) - (values_[i] - values_[i - 1]) / h(i - 1);
    }
    a[n] = h(n - 1) / 6.0;
    b[n] = h(n - 1) / 3.0;
    d[n] = slope_right_ - (values_[n] - values_[n - 1]) / h(n - 1);
    for (int i = 1; i <= n; ++i) {
        const double w = a[i] / b[i - 1];
        b[i] -= w * c[i - 1];
        d[i] -= w * d[i - 1];
    }
    m_.assign(n + 1, 0.0);
    m_[n] = d[n] / b[n];
    for (int i = n - 1; i >= 0; --i) m_[i] = (d[i] - c[i] * m_[i + 1]) / b[i];
}

int ShockGraph::interval_of(double s) const {
    const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), s);
    const int i = static_cast<int>(it - nodes_.begin()) - 1;
    return std::clamp(i, 0, intervals() - 1);
}

double ShockGraph::operator()(double s) const {
    s = std::clamp(s, nodes_.front(), nodes_.back());
    const int i = interval_of(s);
    const double h = nodes_[i + 1] - nodes_[i];
    const double a = (nodes_[i + 1] - s) / h, b = 1.0 - a;
    return a * values_[i] + b * values_[i + 1] +
           ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
}

double ShockGraph::derivative(double s) const {
    s = std::clamp(s, nodes_.front(), nodes_.back());
    const int i = interval_of(s);
    const double h = nodes_[i + 1] - nodes_[i];
    const double a = (nodes_[i + 1] - s) / h, b = 1.0 - a;
    return (values_[i + 1] - values_[i]) / h +
           (-(3.0 * a * a - 1.0) * m_[i] + (3.0 * b * b - 1.0) * m_[i + 1]) * h / 6.0;
}

double ShockGraph::lipschitz() const {
    double l = std::max(std::abs(slope_left_), std::abs(slope_right_));
    for (int i = 0; i < intervals(); ++i) {
        l = std::max(l, std::abs(values_[i + 1] - values_[i]) / (nodes_[i + 1] - nodes_[i]));
    }
    return l;
}

bool ShockGraph::in_growth_cone(const MappedDomain& dom, double n3, double* worst) const {
    const double g0 = values_.front();
    double margin = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= intervals(); ++i) {
        const double s = node(i), g = values_[i];
        const double lower = std::min(g0 + (s + 1.0) / n3, 1.0 / n3);
        double upper = g0 + n3 * (s + 1.0);
        if (i > 0 && i < intervals()) upper = std::min(upper, dom.f_beta(s) - 1.0 / n3);
        margin = std::min({margin, g - lower, upper - g});
    }
    if (worst) *worst = margin;
    return margin >= -1e-12;
}

namespace {

ShockGraph crossing_graph(const MappedDomain& dom, const std::vector<double>& nodes,
                          const std::function<double(Vec2)>& level) {
    const int n = static_cast<int>(nodes.size()) - 1;
    std::vector<double> vals(n + 1);
    vals.front() = dom.g_left();
    vals.back() = dom.g_right();
    for (int i = 1; i < n; ++i) vals[i] = column_crossing(dom, nodes[i], level, "shock graph");
    return ShockGraph(nodes, std::move(vals), dom.dg_left(), dom.dg_right());
}

std::function<double(Vec2)> reference_level(const MappedDomain& dom) {
    const ConfigGeometry& g = dom.geometry();
    return [&g](Vec2 xi) {
        const double pi = g.phi_inf.phi(xi);
        return std::min(pi - g.phi_O.phi(xi), pi - g.phi_N.phi(xi));
    };
}

}  // namespace

ShockGraph reference_shock(const MappedDomain& dom, int intervals) {
    return crossing_graph(dom, uniform_nodes(intervals), reference_level(dom));
}

ShockGraph reference_shock(const MappedDomain& dom, const std::vector<double>& nodes) {
    return crossing_graph(dom, nodes, reference_level(dom));
}

ShockGraph flat_shock(const MappedDomain& dom, int intervals) {
    return flat_shock(dom, uniform_nodes(intervals));
}

ShockGraph flat_shock(const MappedDomain& dom, const std::vector<double>& nodes) {
    // F1 keeps xi2, so each column meets xi2 = eta_N at t' = h2(s', eta_N).
    const int n = static_cast<int>(nodes.size()) - 1;
    const double eta = dom.geometry().eta_N;
    std::vector<double> vals(n + 1);
    vals.front() = dom.g_left();
    vals.back() = dom.g_right();
    for (int i = 1; i < n; ++i) vals[i] = dom.h2(dom.L_inverse(nodes[i]), eta);
    return ShockGraph(nodes, std::move(vals), dom.dg_left(), dom.dg_right());
}

// ---------------------------------------------------------------------------

double polyline_distance(const ShockGraph& g, Vec2 p) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < g.intervals(); ++i) {
        const Vec2 a{g.node(i), g.value(i)}, b{g.node(i + 1), g.value(i + 1)};
        const Vec2 ab = b - a;
        const double t = std::clamp(dot(p - a, ab) / norm2(ab), 0.0, 1.0);
        best = std::min(best, norm(p - (a + t * ab)));
    }
    return best;
}

double regularized_distance(const ShockGraph& g, Vec2 p) {
    const double d = polyline_distance(g, p);
    if (d == 0.0) return 0.0;
    // Box average of the 1-Lipschitz distance at scale d/4; every sample lies
    // within (sqrt 2 / 4) d of p, so the average stays within [0.64, 1.36] d.
    const double h = 0.25 * d;
    double sum = 0.0;
    for (int a = -1; a <= 1; ++a) {
        for (int b = -1; b <= 1; ++b) sum += polyline_distance(g, p + Vec2{a * h, b * h});
    }
    return sum / 9.0;
}

namespace {

struct KernelData {
    // Psi = (l-1)^3 (2-l)^3 (c0 + c1 m + c2 m^2) with m = l - 3/2.
    std::array<double, 3> coef{};
    KernelQuadrature quad;
};

void gauss_legendre(int n, std::vector<long double>& x, std::vector<long double>& w) {
    x.resize(n);
    w.resize(n);
    for (int i = 0; i < n; ++i) {
        long double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
        long double dp = 0.0L;
        for (int it = 0; it < 100; ++it) {
            long double p0 = 1.0L, p1 = z;
            for (int k = 2; k <= n; ++k) {
                const long double p2 = ((2.0L * k - 1.0L) * z * p1 - (k - 1.0L) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (z * p1 - p0) / (z * z - 1.0L);
            const long double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-19L) break;
        }
        x[i] = z;
        w[i] = 2.0L / ((1.0L - z * z) * dp * dp);
    }
}

const KernelData& kernel_data() {
    static const KernelData data = [] {
        KernelData kd;
        std::vector<long double> x, w;
        gauss_legendre(12, x, w);
        auto bump = [](long double l) {
            const long double b = (l - 1.0L) * (2.0L - l);
            return b * b * b;
        };
        // Moments in the centred variable: int m^j Psi = (1, -3/2, 9/4) encodes
        // unit mass with vanishing first and second moments in l.
        Eigen::Matrix<long double, 3, 3> m = Eigen::Matrix<long double, 3, 3>::Zero();
        for (size_t q = 0; q < x.size(); ++q) {
            const long double l = 1.5L + 0.5L * x[q], mu = l - 1.5L;
            const long double wq = 0.5L * w[q] * bump(l);
            for (int r = 0; r < 3; ++r) {
                for (int c = 0; c < 3; ++c) m(r, c) += wq * std::pow(mu, r + c);
            }
        }
        Eigen::Matrix<long double, 3, 1> rhs(1.0L, -1.5L, 2.25L);
        const Eigen::Matrix<long double, 3, 1> coef = m.fullPivLu().solve(rhs);
        kd.coef = {static_cast<double>(coef(0)), static_cast<double>(coef(1)),
                   static_cast<double>(coef(2))};
        gauss_legendre(8, x, w);
        for (size_t q = 0; q < x.size(); ++q) {
            const long double l = 1.5L + 0.5L * x[q], mu = l - 1.5L;
            kd.quad.nodes.push_back(static_cast<double>(l));
            kd.quad.weights.push_back(static_cast<double>(
                0.5L * w[q] * bump(l) * (coef(0) + coef(1) * mu + coef(2) * mu * mu)));
        }
        return kd;
    }();
    return data;
}

double c_star_for(const ShockGraph& g, const ExtensionSettings& settings) {
    if (settings.c_star > 0.0) return settings.c_star;
    const double lip = g.lipschitz();
    return 1.0 / std::sqrt(1.0 + lip * lip);
}

}  // namespace

double extension_kernel(double lambda) {
    if (lambda <= 1.0 || lambda >= 2.0) return 0.0;
    const auto& c = kernel_data().coef;
    const double mu = lambda - 1.5;
    return std::pow((lambda - 1.0) * (2.0 - lambda), 3) * (c[0] + c[1] * mu + c[2] * mu * mu);
}

const KernelQuadrature& extension_quadrature() { return kernel_data().quad; }

ExtensionProbe extend_value(const std::function<double(double, double)>& v, const ShockGraph& g,
                            double s, double tp, const ExtensionSettings& settings) {
    const double gs = g(s);
    if (tp <= gs) return {v(s, tp), true};
    const double dstar = 2.0 * regularized_distance(g, {s, tp}) / c_star_for(g, settings);
    const KernelQuadrature& kq = extension_quadrature();
    ExtensionProbe out;
    for (size_t q = 0; q < kq.nodes.size(); ++q) {
        const double t = tp - kq.nodes[q] * dstar;
        if (t > gs + 1e-14 || t < 0.0) out.admissible = false;
        out.value += kq.weights[q] * v(s, t);
    }
    return out;
}

std::vector<double> extend_field(const std::function<double(double, double)>& v,
                                 const ShockGraph& g, const std::vector<Vec2>& points,
                                 const ExtensionSettings& settings) {
    std::vector<double> out;
    out.reserve(points.size());
    for (const Vec2& p : points) {
        if (p.y > (1.0 + settings.kappa) * g(p.x) + 1e-14) {
            throw DomainError("extend_field: point beyond the extension band");
        }
        const ExtensionProbe e = extend_value(v, g, p.x, p.y, settings);
        if (!e.admissible) {
            std::ostringstream os;
            os << "extend_field: kappa = " << settings.kappa
               << " sends kernel samples outside the domain (bound " << kappa_bound(g, settings)
               << ")";
            throw ConfigError(os.str());
        }
        out.push_back(e.value);
    }
    return out;
}

double kappa_bound(const ShockGraph& g, const ExtensionSettings& settings) {
    // Samples reach down to t' - 2 d*, with d* <= 3 dist / C* <= 3 (t' - g) / C*.
    return c_star_for(g, settings) / 6.0;
}

}  // namespace pmflow
