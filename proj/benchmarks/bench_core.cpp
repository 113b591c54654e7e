#include <benchmark/benchmark.h>

#include "nonholo/diagnostics.hpp"

using namespace nonholo;

namespace {

Vec sample_state() {
    Vec x(5);
    x << 0.9, -0.3, 0.4, 0.5, 0.7;
    return x;
}

void ReducedFieldEval(benchmark::State& state) {
    const VectorFieldHandle field = reduced_field(presets::contact());
    const Vec x = sample_state();
    for (auto _ : state) {
        Vec dx = field.eval(x);
        benchmark::DoNotOptimize(dx);
    }
}
BENCHMARK(ReducedFieldEval);

void DaeFieldEval(benchmark::State& state) {
    const SystemSpec contact = presets::contact();
    const VectorFieldHandle field = dae_field(contact);
    const Vec x = embed(contact, ReducedState::from_vector(Vec5(sample_state()))).to_vector();
    for (auto _ : state) {
        Vec dx = field.eval(x);
        benchmark::DoNotOptimize(dx);
    }
}
BENCHMARK(DaeFieldEval);

void InducedFieldEval(benchmark::State& state) {
    SystemSpec spec = presets::contact();
    spec.perturbation = make_perturbation("p1_quadratic");
    spec.epsilon = 1e-2;
    const VectorFieldHandle field = induced_field(spec);
    const Vec x = sample_state();
    for (auto _ : state) {
        Vec dx = field.eval(x);
        benchmark::DoNotOptimize(dx);
    }
}
BENCHMARK(InducedFieldEval);

void Rk4Step(benchmark::State& state) {
    const VectorFieldHandle field = reduced_field(presets::contact());
    const Vec x = sample_state();
    for (auto _ : state) {
        Vec y = step_rk4(field, x, 0.05);
        benchmark::DoNotOptimize(y);
    }
}
BENCHMARK(Rk4Step);

void ImplicitMidpointStep(benchmark::State& state) {
    const VectorFieldHandle field = reduced_field(presets::contact());
    const StepperConfig cfg;
    const Vec x = sample_state();
    for (auto _ : state) {
        Vec y = step_implicit_midpoint(field, x, 0.05, cfg);
        benchmark::DoNotOptimize(y);
    }
}
BENCHMARK(ImplicitMidpointStep);

void MonodromyContact(benchmark::State& state) {
    const SystemSpec contact = presets::contact();
    const SubsystemOrbit orbit = subsystem_orbit(contact, 0.5);
    for (auto _ : state) {
        MonodromyResult m = monodromy(contact, orbit);
        benchmark::DoNotOptimize(m);
    }
}
BENCHMARK(MonodromyContact)->Unit(benchmark::kMillisecond);

void OrbitPhaseSolve(benchmark::State& state) {
    const SystemSpec contact = presets::contact();
    const SubsystemOrbit orbit = subsystem_orbit(contact, 0.5);
    const auto [q3, p3] = orbit.state_at(0.37);
    for (auto _ : state) {
        double theta = orbit_phase(contact, orbit, q3, p3);
        benchmark::DoNotOptimize(theta);
    }
}
BENCHMARK(OrbitPhaseSolve)->Unit(benchmark::kMicrosecond);

void So3LogExpRoundTrip(benchmark::State& state) {
    const Mat3 R = so3_exp(Vec3{0.3, -1.1, 0.7});
    for (auto _ : state) {
        So3Log lg = so3_log(R);
        benchmark::DoNotOptimize(lg);
    }
}
BENCHMARK(So3LogExpRoundTrip);

void ReferenceSolveOnePeriod(benchmark::State& state) {
    const VectorFieldHandle field = reduced_field(presets::contact());
    const StepperConfig cfg;
    const Vec x = sample_state();
    for (auto _ : state) {
        Vec y = reference_endpoint(field, x, 0.0, 6.283185307179586, cfg);
        benchmark::DoNotOptimize(y);
    }
}
BENCHMARK(ReferenceSolveOnePeriod)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
