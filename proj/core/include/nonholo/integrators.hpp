#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nonholo/reduction.hpp"

namespace nonholo {

enum class Method { rk4, implicit_midpoint, reference };

std::string to_string(Method m);
Method method_from_string(const std::string& name);

struct StepperConfig {
    Method method = Method::reference;
    double h = 0.05;
    double newton_tol = 1e-12;
    int newton_max_iters = 50;
    double reference_tol = 1e-12;

    void validate() const; // h > 0, tolerances > 0
};

/// Time-stamped states; times strictly increasing, one state per time.
struct Trajectory {
    std::vector<double> times;
    std::vector<Vec> states;
    std::string spec_label;
    std::string method_label;
};

/// Classical 4th-order Runge-Kutta step (the non-reversible baseline).
Vec step_rk4(const VectorFieldHandle& field, const Vec& s, double h);

/// Implicit midpoint step: solves s' = s + h field((s + s')/2) to newton_tol
/// by fixed-point iteration with a Newton fallback; self-adjoint and hence
/// rho-reversible on reversible fields. Throws NonConvergence.
Vec step_implicit_midpoint(const VectorFieldHandle& field, const Vec& s, double h,
                           const StepperConfig& cfg);

/// Adaptive Dormand-Prince 5(4) solve from (t0, x0) through the given sample
/// times (strictly monotone, first >= t0 for forward runs). Sampled states
/// come from the embedded 4th-order interpolant. Throws StepSizeUnderflow.
Trajectory reference_solve(const VectorFieldHandle& field, const Vec& x0, double t0,
                           std::span<const double> sample_times, const StepperConfig& cfg);

/// Convenience wrapper: integrate to t_final, returning only the endpoint.
Vec reference_endpoint(const VectorFieldHandle& field, const Vec& x0, double t0, double t_final,
                       const StepperConfig& cfg);

/// Retained piecewise interpolant of an adaptive solve; usable for short
/// horizons (orbit periods, monodromy spans) where keeping every accepted
/// step is cheap.
class DenseSolution {
  public:
    Vec eval(double t) const;
    double t_begin() const { return t0_; }
    double t_end() const { return t1_; }

    struct Segment {
        double t0, h;
        Vec r1, r2, r3, r4, r5;
    };

    DenseSolution(double t0, double t1, std::vector<Segment> segments)
        : t0_(t0), t1_(t1), segments_(std::move(segments)) {}

  private:
    double t0_, t1_;
    std::vector<Segment> segments_;
};

DenseSolution reference_dense(const VectorFieldHandle& field, const Vec& x0, double t0, double t1,
                              const StepperConfig& cfg);

struct EventResult {
    double t;
    Vec state;
};

/// Integrates forward from (t0, x0) until the scalar event function crosses
/// zero with the requested slope sign (+1 rising, -1 falling, 0 either),
/// refining the crossing on the step interpolant. Returns nullopt if no
/// crossing occurs before t_cap. A zero of the event function at t0 itself
/// does not count.
std::optional<EventResult> integrate_to_event(const VectorFieldHandle& field, const Vec& x0,
                                              double t0, const std::function<double(const Vec&)>& event,
                                              int direction, double t_cap,
                                              const StepperConfig& cfg);

/// One step of the requested one-step method (reference = adaptive solve over
/// [0, h]).
Vec step(const VectorFieldHandle& field, Method method, const Vec& s, double h,
         const StepperConfig& cfg);

/// || rho(psi_h(rho(psi_h(s)))) - s ||_inf; zero for an exactly reversible
/// method on a rho-reversible field.
double reversibility_defect(const VectorFieldHandle& field, Method method, const Vec& s, double h,
                            const StepperConfig& cfg, const std::function<Vec(const Vec&)>& rho);

/// Fixed-step integration recording every sample_stride-th state (t0 always
/// included). n_steps must be a multiple of sample_stride for the final state
/// to be recorded.
Trajectory fixed_step_solve(const VectorFieldHandle& field, const Vec& x0, double t0, int n_steps,
                            Method method, const StepperConfig& cfg, int sample_stride = 1);

} // namespace nonholo
