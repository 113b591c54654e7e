#include "nonholo/integrators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace nonholo {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
// b - bhat, for the embedded error estimate.
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
// Dense-output weights (Hairer-Norsett-Wanner contd5).
constexpr double d1 = -12715105075.0 / 11282082432.0;
constexpr double d3 = 87487479700.0 / 32700410799.0;
constexpr double d4 = -10690763975.0 / 1880347072.0;
constexpr double d5 = 701980252875.0 / 199316789632.0;
constexpr double d6 = -1453857185.0 / 822651844.0;
constexpr double d7 = 69997945.0 / 29380423.0;

using Segment = DenseSolution::Segment;

Vec dense_eval(const Segment& seg, double t) {
    const double s = (t - seg.t0) / seg.h;
    const double s1 = 1.0 - s;
    return seg.r1 + s * (seg.r2 + s1 * (seg.r3 + s * (seg.r4 + s1 * seg.r5)));
}

Segment make_segment(double t, double h, const Vec& y, const Vec& ynew, const Vec& k1,
                     const Vec& k3, const Vec& k4, const Vec& k5, const Vec& k6, const Vec& k7) {
    Segment seg;
    seg.t0 = t;
    seg.h = h;
    seg.r1 = y;
    seg.r2 = ynew - y;
    seg.r3 = h * k1 - seg.r2;
    seg.r4 = seg.r2 - h * k7 - seg.r3;
    seg.r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
    return seg;
}

// Drives the adaptive integration; the sink sees every accepted step and may
// stop the run by returning false.
void dopri5_drive(const VectorFieldHandle& field, Vec y, double t0, double t_final, double tol,
                  const std::function<bool(const Segment&)>& sink) {
    if (t_final == t0) return;
    const double dir = t_final > t0 ? 1.0 : -1.0;
    const auto n = y.size();
    const double eps = std::numeric_limits<double>::epsilon();

    auto scaled_rms = [&](const Vec& v, const Vec& yref) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double sc = tol + tol * std::abs(yref[i]);
            const double r = v[i] / sc;
            acc += r * r;
        }
        return std::sqrt(acc / static_cast<double>(n));
    };

    double t = t0;
    Vec k1 = field.eval(y);

    // Starting step size (HNW I.4 heuristic).
    double h;
    {
        const double dn0 = scaled_rms(y, y);
        const double dn1 = scaled_rms(k1, y);
        double h0 = (dn0 < 1e-5 || dn1 < 1e-5) ? 1e-6 : 0.01 * (dn0 / dn1);
        h0 = std::min(h0, std::abs(t_final - t0));
        const Vec y1 = y + dir * h0 * k1;
        const Vec k2 = field.eval(y1);
        const double dn2 = scaled_rms(k2 - k1, y) / h0;
        double h1;
        if (std::max(dn1, dn2) <= 1e-15)
            h1 = std::max(1e-6, h0 * 1e-3);
        else
            h1 = std::pow(0.01 / std::max(dn1, dn2), 0.2);
        h = dir * std::min({100.0 * h0, h1, std::abs(t_final - t0)});
    }

    bool last_rejected = false;
    while (dir * (t_final - t) > 0.0) {
        if (dir * (t + h - t_final) > 0.0) h = t_final - t;
        if (std::abs(h) < 16.0 * eps * std::max(1.0, std::abs(t))) {
            std::ostringstream os;
            os << "step size underflow at t = " << t << " (h = " << h << ")";
            throw StepSizeUnderflow(os.str());
        }

        const Vec k2 = field.eval(y + h * (a21 * k1));
        const Vec k3 = field.eval(y + h * (a31 * k1 + a32 * k2));
        const Vec k4 = field.eval(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
        const Vec k5 = field.eval(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        const Vec k6 = field.eval(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        const Vec ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        const Vec k7 = field.eval(ynew);

        const Vec errv = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        double err = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double sc = tol + tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
            const double r = errv[i] / sc;
            err += r * r;
        }
        err = std::sqrt(err / static_cast<double>(n));

        if (err <= 1.0) {
            const Segment seg = make_segment(t, h, y, ynew, k1, k3, k4, k5, k6, k7);
            t += h;
            y = ynew;
            k1 = k7; // FSAL
            if (!sink(seg)) return;
            const double facmax = last_rejected ? 1.0 : 5.0;
            const double fac =
                std::clamp(0.9 * std::pow(std::max(err, 1e-16), -0.2), 0.2, facmax);
            h *= fac;
            last_rejected = false;
        } else {
            h *= std::clamp(0.9 * std::pow(err, -0.2), 0.2, 1.0);
            last_rejected = true;
        }
    }
}

} // namespace

std::string to_string(Method m) {
    switch (m) {
        case Method::rk4: return "rk4";
        case Method::implicit_midpoint: return "implicit_midpoint";
        case Method::reference: return "reference";
    }
    return "unknown";
}

Method method_from_string(const std::string& name) {
    if (name == "rk4") return Method::rk4;
    if (name == "implicit_midpoint" || name == "midpoint") return Method::implicit_midpoint;
    if (name == "reference") return Method::reference;
    throw SpecError("unknown integration method '" + name + "'");
}

void StepperConfig::validate() const {
    if (!(h > 0.0)) throw SpecError("StepperConfig invariant violated: h > 0 required");
    if (!(newton_tol > 0.0) || !(reference_tol > 0.0))
        throw SpecError("StepperConfig invariant violated: tolerances must be > 0");
    if (newton_max_iters <= 0)
        throw SpecError("StepperConfig invariant violated: newton_max_iters must be > 0");
}

Vec step_rk4(const VectorFieldHandle& field, const Vec& s, double h) {
    const Vec k1 = field.eval(s);
    const Vec k2 = field.eval(s + 0.5 * h * k1);
    const Vec k3 = field.eval(s + 0.5 * h * k2);
    const Vec k4 = field.eval(s + h * k3);
    return s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Vec step_implicit_midpoint(const VectorFieldHandle& field, const Vec& s, double h,
                           const StepperConfig& cfg) {
    Vec m = s + 0.5 * h * field.eval(s); // Euler predictor for the midpoint
    double prev_diff = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < cfg.newton_max_iters; ++iter) {
        const Vec m_next = s + 0.5 * h * field.eval(m);
        const double diff = (m_next - m).lpNorm<Eigen::Infinity>();
        m = m_next;
        if (diff <= cfg.newton_tol) return 2.0 * m - s;
        if (iter >= 3 && diff > 0.5 * prev_diff) break; // contraction stalled
        prev_diff = diff;
    }

    // Newton fallback on r(m) = m - s - (h/2) f(m), finite-difference Jacobian.
    const auto n = s.size();
    for (int iter = 0; iter < cfg.newton_max_iters; ++iter) {
        const Vec fm = field.eval(m);
        const Vec r = m - s - 0.5 * h * fm;
        Eigen::MatrixXd J = Eigen::MatrixXd::Identity(n, n);
        const double delta = 1e-7 * std::max(1.0, m.lpNorm<Eigen::Infinity>());
        for (Eigen::Index j = 0; j < n; ++j) {
            Vec mp = m;
            mp[j] += delta;
            J.col(j) -= (0.5 * h / delta) * (field.eval(mp) - fm);
        }
        const Vec dm = J.partialPivLu().solve(-r);
        m += dm;
        if (dm.lpNorm<Eigen::Infinity>() <= cfg.newton_tol) return 2.0 * m - s;
    }
    throw NonConvergence("implicit midpoint iteration did not converge");
}

Trajectory reference_solve(const VectorFieldHandle& field, const Vec& x0, double t0,
                           std::span<const double> sample_times, const StepperConfig& cfg) {
    Trajectory traj;
    traj.method_label = "reference";
    if (sample_times.empty()) return traj;
    const double t_final = sample_times.back();
    const double dir = t_final >= t0 ? 1.0 : -1.0;

    std::size_t idx = 0;
    if (sample_times[0] == t0) {
        traj.times.push_back(t0);
        traj.states.push_back(x0);
        ++idx;
    }
    if (idx == sample_times.size()) return traj;

    dopri5_drive(field, x0, t0, t_final, cfg.reference_tol, [&](const Segment& seg) {
        const double t1 = seg.t0 + seg.h;
        while (idx < sample_times.size() && dir * (sample_times[idx] - t1) <= 0.0) {
            traj.times.push_back(sample_times[idx]);
            traj.states.push_back(dense_eval(seg, sample_times[idx]));
            ++idx;
        }
        return idx < sample_times.size();
    });
    return traj;
}

Vec reference_endpoint(const VectorFieldHandle& field, const Vec& x0, double t0, double t_final,
                       const StepperConfig& cfg) {
    if (t_final == t0) return x0;
    Vec out = x0;
    dopri5_drive(field, x0, t0, t_final, cfg.reference_tol, [&](const Segment& seg) {
        out = dense_eval(seg, seg.t0 + seg.h);
        return true;
    });
    return out;
}

Vec DenseSolution::eval(double t) const {
    const double dir = t1_ >= t0_ ? 1.0 : -1.0;
    // Clamp tiny overshoots from sample-time rounding.
    if (dir * (t - t1_) > 0) t = t1_;
    if (dir * (t - t0_) < 0) t = t0_;
    std::size_t lo = 0, hi = segments_.size();
    while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        if (dir * (t - segments_[mid].t0) >= 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return dense_eval(segments_[lo], t);
}

DenseSolution reference_dense(const VectorFieldHandle& field, const Vec& x0, double t0, double t1,
                              const StepperConfig& cfg) {
    std::vector<Segment> segments;
    dopri5_drive(field, x0, t0, t1, cfg.reference_tol, [&](const Segment& seg) {
        segments.push_back(seg);
        return true;
    });
    if (segments.empty()) {
        // Zero-length span: a single constant segment keeps eval() total.
        Segment seg;
        seg.t0 = t0;
        seg.h = 1.0;
        seg.r1 = x0;
        seg.r2 = seg.r3 = seg.r4 = seg.r5 = Vec::Zero(x0.size());
        segments.push_back(seg);
    }
    return DenseSolution(t0, t1, std::move(segments));
}

std::optional<EventResult> integrate_to_event(const VectorFieldHandle& field, const Vec& x0,
                                              double t0,
                                              const std::function<double(const Vec&)>& event,
                                              int direction, double t_cap,
                                              const StepperConfig& cfg) {
    std::optional<EventResult> result;
    double g_left = event(x0);
    dopri5_drive(field, x0, t0, t_cap, cfg.reference_tol, [&](const Segment& seg) {
        const double t1 = seg.t0 + seg.h;
        const Vec y1 = dense_eval(seg, t1);
        const double g_right = event(y1);
        const bool falls = g_left > 0.0 && g_right <= 0.0;
        const bool rises = g_left < 0.0 && g_right >= 0.0;
        const bool hit = (direction > 0 && rises) || (direction < 0 && falls) ||
                         (direction == 0 && (rises || falls));
        if (!hit) {
            g_left = g_right;
            return true;
        }
        // Bisect the interpolant for the crossing time.
        double a = seg.t0, b = t1, ga = g_left;
        for (int i = 0; i < 200 && std::abs(b - a) > 1e-15 * std::max(1.0, std::abs(b)); ++i) {
            const double mid = 0.5 * (a + b);
            const double gm = event(dense_eval(seg, mid));
            if (gm == 0.0) {
                a = b = mid;
                break;
            }
            if ((gm > 0.0) == (ga > 0.0)) {
                a = mid;
                ga = gm;
            } else {
                b = mid;
            }
        }
        const double t_star = 0.5 * (a + b);
        result = EventResult{t_star, dense_eval(seg, t_star)};
        return false;
    });
    return result;
}

Vec step(const VectorFieldHandle& field, Method method, const Vec& s, double h,
         const StepperConfig& cfg) {
    switch (method) {
        case Method::rk4: return step_rk4(field, s, h);
        case Method::implicit_midpoint: return step_implicit_midpoint(field, s, h, cfg);
        case Method::reference: return reference_endpoint(field, s, 0.0, h, cfg);
    }
    throw Error("unreachable");
}

double reversibility_defect(const VectorFieldHandle& field, Method method, const Vec& s, double h,
                            const StepperConfig& cfg, const std::function<Vec(const Vec&)>& rho) {
    const Vec once = step(field, method, s, h, cfg);
    const Vec back = step(field, method, rho(once), h, cfg);
    return (rho(back) - s).lpNorm<Eigen::Infinity>();
}

Trajectory fixed_step_solve(const VectorFieldHandle& field, const Vec& x0, double t0, int n_steps,
                            Method method, const StepperConfig& cfg, int sample_stride) {
    if (sample_stride < 1) throw SpecError("sample_stride must be >= 1");
    Trajectory traj;
    traj.method_label = to_string(method);
    traj.times.reserve(static_cast<std::size_t>(n_steps / sample_stride) + 1);
    traj.states.reserve(traj.times.capacity());
    traj.times.push_back(t0);
    traj.states.push_back(x0);
    Vec y = x0;
    for (int i = 1; i <= n_steps; ++i) {
        y = step(field, method, y, cfg.h, cfg);
        if (i % sample_stride == 0) {
            traj.times.push_back(t0 + i * cfg.h);
            traj.states.push_back(y);
        }
    }
    return traj;
}

} // namespace nonholo
