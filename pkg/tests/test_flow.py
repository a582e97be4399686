"""Geodesic integration, parallel transport, and comparison-operator tests.

Frozen constants are generated by step-refinement self-convergence (the
half-step rerun is repeated in-test) or matched against closed forms.
"""

import math

import numpy as np
import pytest

from fatflat import flow, geometry
from fatflat.flow import ChartExitError, PhaseState
from fatflat.geometry import MetricChart

from conftest import assert_close

# rotation picked up by a frame carried once around the angular circle at
# radius 2 (k=19 profile); matches -2*pi*sigma'(2) modulo full turns
FROZEN_LOOP_ROTATION = -0.010620102017513707

# trace of the comparison operator after T=20 along the inward radial
# orbit started at r=36 (k=19 profile, unit c0, step 1e-3)
FROZEN_CROSSING_TRACE = 2.211653496683519


def unit_state(chart, position, velocity) -> PhaseState:
    position = np.asarray(position, dtype=float)
    velocity = flow.normalize_velocity(chart, position, velocity)
    return PhaseState(position, velocity)


def random_safe_orbits(chart, rng, count):
    """Unit-speed starts that keep a conserved angular momentum, so the
    orbit cannot reach the chart's axis floor."""
    states = []
    while len(states) < count:
        r0 = rng.uniform(5.0, 30.0)
        direction = rng.standard_normal(3)
        direction[1] = math.copysign(max(abs(direction[1]), 0.3),
                                     direction[1])
        position = np.array([r0, rng.uniform(0.0, 2 * math.pi), 0.0])
        states.append(unit_state(chart, position, direction))
    return states


# ---------------------------------------------------------------------------
# geodesics
# ---------------------------------------------------------------------------

class TestGeodesics:
    def test_flat_straight_line(self, flat_profile):
        chart = MetricChart.cartesian(flat_profile, 1)
        state = PhaseState(np.array([0.1, 0.0, 0.0]),
                           np.array([0.0, 0.0, 1.0]))
        path = flow.integrate_geodesic(chart, state, 10.0, record_every=100)
        end = path.state()
        # the acceleration vanishes identically; only the time-grid rounding
        # of ~10^4 step additions separates the samples from the exact line
        assert_close(end.position, [0.1, 0.0, 10.0], abs_tol=1e-11)
        assert_close(end.velocity, [0.0, 0.0, 1.0], abs_tol=1e-12)
        for t, s in path.samples:
            assert_close(s.position, [0.1, 0.0, t], abs_tol=1e-11)

    def test_axis_is_a_geodesic(self, hyperbolic_profile, ramp19):
        for prof in (hyperbolic_profile, ramp19):
            chart = MetricChart.cartesian(prof, 1)
            state = PhaseState(np.zeros(3), np.array([0.0, 0.0, 1.0]))
            path = flow.integrate_geodesic(chart, state, 5.0,
                                           record_every=100)
            assert_close(path.state().position, [0.0, 0.0, 5.0],
                         abs_tol=1e-12)

    def test_flat_tube_orbit_keeps_radius_exactly(self, ramp19):
        chart = MetricChart.cartesian(ramp19, 1)
        state = PhaseState(np.array([0.01, 0.0, 0.0]),
                           np.array([0.0, 0.0, 1.0]))
        path = flow.integrate_geodesic(chart, state, 100.0, record_every=50)
        radii = path.radii()
        assert np.all(radii == 0.01)
        assert path.state().position[2] == pytest.approx(100.0, rel=1e-11)

    def test_energy_conserved_on_random_orbits(self, polar_19):
        rng = np.random.default_rng(20)
        duration = 20.0
        for state in random_safe_orbits(polar_19, rng, 5):
            path = flow.integrate_geodesic(polar_19, state, duration,
                                           record_every=25)
            energies = path.energies()
            drift = float(np.max(np.abs(energies - energies[0])))
            assert drift <= 1e-8 * (1.0 + duration)

    def test_reversibility(self, polar_19):
        rng = np.random.default_rng(21)
        for state in random_safe_orbits(polar_19, rng, 3):
            forward = flow.integrate_geodesic(polar_19, state, 10.0,
                                              record_every=10 ** 9)
            back = flow.integrate_geodesic(polar_19,
                                           forward.state().reversed(),
                                           10.0, record_every=10 ** 9)
            returned = back.state()
            assert_close(returned.position, state.position, abs_tol=1e-6)
            assert_close(-returned.velocity, state.velocity, abs_tol=1e-6)

    def test_step_halving_fourth_order(self, hyperbolic_profile):
        chart = MetricChart.polar(hyperbolic_profile, 1)
        state = unit_state(chart, [2.0, 0.3, 0.0], [0.4, 0.25, 0.55])

        def endpoint(step):
            path = flow.integrate_geodesic(chart, state, 1.0, step=step,
                                           record_every=10 ** 9)
            return np.concatenate([path.state().position,
                                   path.state().velocity])

        reference = endpoint(2.5e-4)
        err_coarse = np.linalg.norm(endpoint(4e-3) - reference)
        err_fine = np.linalg.norm(endpoint(2e-3) - reference)
        assert err_coarse / err_fine >= 8.0

    def test_record_every_thins_samples(self, polar_19):
        state = unit_state(polar_19, [5.0, 0.2, 0.0], [0.1, 0.5, 0.8])
        path = flow.integrate_geodesic(polar_19, state, 1.0, record_every=10)
        assert len(path.samples) == 101
        times = [t for t, _ in path.samples]
        assert times == pytest.approx(np.arange(101) * 0.01, abs=1e-12)

    def test_chart_exit_reports_partial_path(self, polar_19, cartesian_19):
        state = PhaseState(np.array([0.5, 0.0, 0.0]),
                           np.array([-1.0, 0.0, 0.0]))
        with pytest.raises(ChartExitError) as err:
            flow.integrate_geodesic(polar_19, state, 1.0, record_every=10)
        exc = err.value
        assert exc.time == pytest.approx(0.49, abs=2e-3)
        assert exc.state.position[0] == pytest.approx(
            flow.POLAR_EXIT_RADIUS, abs=2e-3)
        assert exc.partial is not None
        assert exc.partial.duration <= exc.time + 1e-12

        # continue across the axis in the regular chart: the inward radial
        # line runs straight through to the antipodal ray
        switched = flow.switch_chart(polar_19, exc.state, cartesian_19)
        e_before = flow.kinetic_energy(polar_19, exc.state.position,
                                       exc.state.velocity)
        e_after = flow.kinetic_energy(cartesian_19, switched.position,
                                      switched.velocity)
        assert e_after == pytest.approx(e_before, rel=1e-10)
        rest = flow.integrate_geodesic(cartesian_19, switched,
                                       1.0 - exc.time, record_every=10 ** 9)
        final = rest.state()
        assert final.position[0] == pytest.approx(-0.5, abs=1e-6)
        assert abs(final.position[1]) <= 1e-6
        assert final.velocity[0] == pytest.approx(-1.0, abs=1e-6)

    def test_immediate_exit_raises_at_time_zero(self, polar_19):
        state = PhaseState(np.array([0.005, 0.0, 0.0]),
                           np.array([0.0, 0.0, 1.0]))
        with pytest.raises(ChartExitError) as err:
            flow.integrate_geodesic(polar_19, state, 1.0)
        assert err.value.time == 0.0

    def test_chart_policy_thresholds(self):
        assert flow.preferred_kind(0.005) == geometry.CARTESIAN
        assert flow.preferred_kind(0.5) == geometry.POLAR

    def test_normalize_velocity(self, polar_19):
        position = [3.0, 1.0, 0.2]
        v = flow.normalize_velocity(polar_19, position, [0.2, 0.01, 0.5])
        assert flow.kinetic_energy(polar_19, position, v) == pytest.approx(
            1.0, abs=1e-12)
        with pytest.raises(ValueError):
            flow.normalize_velocity(polar_19, position, [0.0, 0.0, 0.0])

    def test_nonpositive_step_rejected(self, polar_19):
        state = unit_state(polar_19, [5.0, 0.2, 0.0], [1.0, 0.0, 0.0])
        with pytest.raises(ValueError):
            flow.integrate_geodesic(polar_19, state, 1.0, step=0.0)


# ---------------------------------------------------------------------------
# parallel transport
# ---------------------------------------------------------------------------

class TestParallelTransport:
    def test_flat_frame_unchanged(self, flat_profile):
        chart = MetricChart.cartesian(flat_profile, 1)
        state = PhaseState(np.array([0.2, -0.4, 0.0]),
                           np.array([0.6, 0.0, 0.8]))
        path = flow.integrate_geodesic(chart, state, 3.0,
                                       record_every=10 ** 9)
        result = flow.parallel_transport(path, np.eye(3))
        assert_close(result.vectors, np.eye(3), abs_tol=1e-12)
        assert result.orthogonality_defect <= 1e-12

    def test_axis_transport_is_vertical_translation(self, hyperbolic_profile):
        chart = MetricChart.cartesian(hyperbolic_profile, 1)
        state = PhaseState(np.zeros(3), np.array([0.0, 0.0, 1.0]))
        path = flow.integrate_geodesic(chart, state, 1.0,
                                       record_every=10 ** 9)
        frame = [np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])]
        result = flow.parallel_transport(path, frame)
        assert_close(result.vectors, frame, abs_tol=1e-8)
        assert result.orthogonality_defect <= 1e-8

    def test_gram_matrix_preserved_on_curved_orbits(self, polar_19):
        rng = np.random.default_rng(23)

        def gram(position, rows):
            g = geometry.metric_tensor(polar_19.point(position))
            return rows @ g @ rows.T

        for state in random_safe_orbits(polar_19, rng, 3):
            path = flow.integrate_geodesic(polar_19, state, 5.0,
                                           record_every=10 ** 9)
            # orthonormalize a random frame in the metric at the start so
            # inner products are order-one quantities; the metric entries
            # span ~19 orders of magnitude here, so a single elimination
            # pass leaves 1e-6-level residuals -- run the projection twice
            raw = rng.standard_normal((3, 3))
            g0 = geometry.metric_tensor(polar_19.point(state.position))
            frame = []
            for row in raw:
                for _ in range(2):
                    for prev in frame:
                        row = row - float(prev @ g0 @ row) * prev
                frame.append(row / math.sqrt(float(row @ g0 @ row)))
            frame = np.array(frame)

            result = flow.parallel_transport(path, frame)
            assert result.orthogonality_defect <= 1e-8
            assert_close(gram(state.position, frame), np.eye(3),
                         abs_tol=1e-12)
            end = gram(result.end_state.position, result.vectors)
            assert_close(end, np.eye(3), abs_tol=1e-8)

    def test_velocity_transports_to_itself(self, polar_19):
        state = unit_state(polar_19, [7.0, 0.5, 0.0], [0.3, 0.2, 0.6])
        path = flow.integrate_geodesic(polar_19, state, 4.0,
                                       record_every=10 ** 9)
        result = flow.parallel_transport(path, [state.velocity])
        assert_close(result.vectors[0], result.end_state.velocity,
                     abs_tol=1e-8)


class TestLoopRotation:
    """Carrying a frame once around an angular circle rotates it within the
    radial/angular plane; the angle must match the classical cone formula
    -2*pi*sigma'(r) up to whole turns."""

    @staticmethod
    def transport_around_circle(profile, radius, steps):
        chart = MetricChart.polar(profile, 1)
        h = 2 * math.pi / steps

        def rhs(theta, w):
            point = chart.point(
                np.array([radius, theta % (2 * math.pi), 0.0]))
            gamma = geometry.christoffel(point)
            circle_velocity = np.array([0.0, 1.0, 0.0])
            return -np.einsum("ijk,j,k->i", gamma, circle_velocity, w)

        vectors = [np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0])]
        out = []
        for w in vectors:
            w = w.copy()
            t = 0.0
            for _ in range(steps):
                k1 = rhs(t, w)
                k2 = rhs(t + h / 2, w + h / 2 * k1)
                k3 = rhs(t + h / 2, w + h / 2 * k2)
                k4 = rhs(t + h, w + h * k3)
                w = w + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
                t += h
            out.append(w)
        return out

    def test_rotation_angle_frozen_and_matches_cone_formula(self, ramp19):
        sigma, sigma_p = ramp19.sigma_tau(2.0)[:2]
        radial, axial = self.transport_around_circle(ramp19, 2.0, 8000)

        # orthonormal components of the transported radial vector
        comp_r = radial[0]
        comp_t = radial[1] * sigma
        assert math.hypot(comp_r, comp_t) == pytest.approx(1.0, abs=1e-9)
        angle = math.atan2(comp_t, comp_r)
        assert angle == pytest.approx(FROZEN_LOOP_ROTATION, abs=1e-10)
        cone = math.remainder(-2 * math.pi * sigma_p, 2 * math.pi)
        assert angle == pytest.approx(cone, abs=1e-9)

        # the axis direction is fixed by the reflection symmetry
        assert_close(axial, [0.0, 0.0, 1.0], abs_tol=1e-10)

    def test_angle_converges_under_step_refinement(self, ramp19):
        sigma = ramp19.sigma_tau(2.0)[0]
        angles = []
        for steps in (4000, 8000):
            radial, _ = self.transport_around_circle(ramp19, 2.0, steps)
            angles.append(math.atan2(radial[1] * sigma, radial[0]))
        assert angles[0] == pytest.approx(angles[1], abs=1e-11)

    def test_flat_tube_loop_rotates_a_full_turn_net_zero(self, ramp19):
        # inside the Euclidean tube sigma'(r) = 1: the frame returns exactly
        radial, _ = self.transport_around_circle(ramp19, 0.02, 2000)
        sigma = ramp19.sigma_tau(0.02)[0]
        angle = math.atan2(radial[1] * sigma, radial[0])
        assert angle == pytest.approx(0.0, abs=1e-10)


# ---------------------------------------------------------------------------
# comparison operator
# ---------------------------------------------------------------------------

class TestComparisonOperator:
    def test_flat_tube_orbit_decays_like_inverse_time(self, ramp19):
        chart = MetricChart.cartesian(ramp19, 1)
        state = PhaseState(np.array([0.01, 0.0, 0.0]),
                           np.array([0.0, 0.0, 1.0]))
        path = flow.integrate_geodesic(chart, state, 99.0, step=5e-3,
                                       record_every=10 ** 9)
        result = flow.riccati_expansion(path, c0=1.0)
        assert_close(result.u_final, np.eye(2) / 100.0, abs_tol=1e-6)

    def test_hyperbolic_orbit_reaches_fixed_point(self, hyperbolic_profile):
        chart = MetricChart.polar(hyperbolic_profile, 1)
        state = PhaseState(np.array([2.0, 0.4, 0.0]),
                           np.array([1.0, 0.0, 0.0]))
        path = flow.integrate_geodesic(chart, state, 20.0, step=5e-3,
                                       record_every=10 ** 9)
        result = flow.riccati_expansion(path, c0=1.0)
        assert_close(result.u_final, np.eye(2), abs_tol=1e-6)

    def test_crossing_orbit_trace_frozen(self, polar_19):
        state = PhaseState(np.array([36.0, 0.0, 0.0]),
                           np.array([-1.0, 0.0, 0.0]))
        path = flow.integrate_geodesic(polar_19, state, 20.0,
                                       record_every=10 ** 9)
        result = flow.riccati_expansion(path, c0=1.0)
        trace = float(np.trace(result.u_final))
        assert trace == pytest.approx(FROZEN_CROSSING_TRACE, abs=1e-8)

        coarse = flow.riccati_expansion(path, c0=1.0, step=2e-3)
        assert float(np.trace(coarse.u_final)) == pytest.approx(trace,
                                                                abs=5e-9)

    def test_traces_recorded_monotone_time(self, polar_19):
        state = PhaseState(np.array([10.0, 0.0, 0.0]),
                           np.array([1.0, 0.0, 0.0]))
        path = flow.integrate_geodesic(polar_19, state, 2.0,
                                       record_every=10 ** 9)
        result = flow.riccati_expansion(path, c0=1.0)
        assert np.all(np.diff(result.times) > 0)
        assert len(result.times) == len(result.traces)

    def test_nonpositive_c0_rejected(self, polar_19):
        state = PhaseState(np.array([10.0, 0.0, 0.0]),
                           np.array([1.0, 0.0, 0.0]))
        path = flow.integrate_geodesic(polar_19, state, 1.0,
                                       record_every=10 ** 9)
        with pytest.raises(ValueError):
            flow.riccati_expansion(path, c0=0.0)
