import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ternary_droplet import phase_field as pf
from ternary_droplet.phase_field import (FlowParams, PhaseState, diffuse_energy, flow_step,
                                         lamellar_init, localization, simulate, triple_well,
                                         triple_well_grad)
from ternary_droplet.torus_green import cell_centers

frac = st.floats(-0.5, 1.5, allow_nan=False)


class TestTripleWell:
    def test_pure_phases(self):
        for u in [(1, 0, 0), (0, 1, 0), (0, 0, 1)]:
            assert triple_well(*u) == 0

    def test_barycentre(self):
        assert triple_well(1 / 3, 1 / 3, 1 / 3) == pytest.approx(1 / 27)

    def test_two_phase_midpoint(self):
        assert triple_well(0.5, 0.5, 0.0) == pytest.approx(1 / 16)

    @settings(max_examples=50, deadline=None)
    @given(frac, frac, frac)
    def test_gradient_fd(self, a, b, c):
        h = 1e-6
        grad = triple_well_grad(a, b, c)
        for k in range(3):
            up, dn = [a, b, c], [a, b, c]
            up[k] += h
            dn[k] -= h
            fd = (triple_well(*up) - triple_well(*dn)) / (2 * h)
            assert grad[k] == pytest.approx(fd, abs=1e-6)


def cos_state(n, a):
    X, _ = cell_centers(n)
    c = a * np.cos(2 * math.pi * X)
    return PhaseState(0.5 + c, 0.5 - c)


class TestEnergy:
    def test_pure_phase_zero(self):
        s = PhaseState(np.ones((32, 32)), np.zeros((32, 32)))
        assert diffuse_energy(s, FlowParams(eps=0.25)) == 0.0

    def test_barycentre_state(self):
        third = np.full((32, 32), 1 / 3)
        eps = 0.25
        assert diffuse_energy(PhaseState(third, third), FlowParams(eps=eps)) == pytest.approx(1 / (27 * eps))

    def test_single_mode_parts(self):
        n, a, eps = 64, 0.2, 1 / 8
        s = cos_state(n, a)
        X, _ = cell_centers(n)
        c = a * np.cos(2 * math.pi * X)
        well = np.mean(((0.5 + c) * (0.5 - c)) ** 2) / eps
        grad = 2 * eps * (2 * math.pi * a) ** 2 / 2
        assert diffuse_energy(s, FlowParams(eps=eps)) == pytest.approx(grad + well, rel=1e-12)
        gm = np.zeros((3, 3))
        gm[1, 1] = 1.0
        inter = a**2 / 2 / (4 * math.pi**2)
        e = diffuse_energy(s, FlowParams(eps=eps, gamma=gm))
        assert e == pytest.approx(grad + well + inter, rel=1e-12)

    def test_mobility_weights_gradient(self):
        s = cos_state(64, 0.2)
        base = diffuse_energy(s, FlowParams(eps=1 / 8))
        heavy = diffuse_energy(s, FlowParams(eps=1 / 8, mobilities=(2.0, 2.0, 1.0)))
        assert heavy < base

    def test_rotation_invariance(self):
        s = lamellar_init(64, 0.1, seed=4)
        p = FlowParams.droplet_regime(eps=1 / 8, gamma_major=((0.5, 0.1), (0.1, 0.3)))
        r = PhaseState(np.rot90(s.u1), np.rot90(s.u2))
        assert diffuse_energy(r, p) == pytest.approx(diffuse_energy(s, p), rel=1e-12)

    def test_unresolved(self):
        with pytest.raises(pf.ResolutionError):
            diffuse_energy(cos_state(64, 0.1), FlowParams(eps=1 / 32))


class TestFlow:
    def test_pure_phase_fixed_point(self):
        s = PhaseState(np.zeros((32, 32)), np.ones((32, 32)))
        out = flow_step(s, FlowParams(eps=0.25, dt=1e-3))
        assert np.allclose(out.u1, 0.0, atol=1e-15) and np.allclose(out.u2, 1.0, atol=1e-15)

    @pytest.fixture(scope="class")
    @staticmethod
    def run():
        s = lamellar_init(64, 0.1, seed=2)
        p = FlowParams.droplet_regime(eta=0.3, eps=1 / 16, dt=FlowParams(eps=1 / 16).dt_max(64),
                                      steps=100, record_every=1, gamma_major=((0.2, 0.0), (0.0, 0.2)))
        return s, p, simulate(s, p)

    def test_mass_conservation(self, run):
        s, _, (final, trace, _) = run
        assert np.allclose(final.masses(), s.masses(), atol=1e-12, rtol=0)
        assert max(r.simplex_error for r in trace) < 1e-12

    def test_dissipation(self, run):
        _, _, (_, trace, _) = run
        e = np.array([r.energy for r in trace])
        assert np.all(np.diff(e) <= 1e-8)
        assert e[-1] < e[0]

    def test_deterministic(self, run):
        s, p, (final, _, _) = run
        again = simulate(lamellar_init(64, 0.1, seed=2), p)[0]
        assert np.array_equal(again.u1, final.u1) and np.array_equal(again.u2, final.u2)

    def test_frames(self):
        s = lamellar_init(32, 0.1)
        _, trace, frames = simulate(s, FlowParams(eps=1 / 8, steps=10, record_every=4), frames_every=5)
        assert [f[0] for f in frames] == [0, 5, 10]
        assert [r.step for r in trace] == [0, 4, 8, 10]

    def test_divergence(self):
        # a strongly negative self interaction makes the energy unbounded below
        # until |u| ~ sqrt(|gamma| eps), far past the blow-up threshold
        gm = np.zeros((3, 3))
        gm[0, 0] = -1e5
        p = FlowParams(eps=1 / 8, gamma=gm, dt=1e-6, steps=200)
        with pytest.raises(pf.FlowDivergence) as info:
            simulate(lamellar_init(32, 0.2, noise=0.1), p)
        assert info.value.last_state is not None and info.value.step >= 1


class TestInit:
    @settings(max_examples=20, deadline=None)
    @given(st.floats(0.0, 0.5), st.integers(0, 1000))
    def test_masses(self, m0, seed):
        s = lamellar_init(32, m0, seed=seed)
        m = s.masses()
        assert m[0] == pytest.approx(m0, abs=1e-14)
        assert m[1] == pytest.approx((1 - m0) / 2, abs=1e-14)

    def test_rejects_bad_mass(self):
        with pytest.raises(ValueError):
            lamellar_init(32, 1.2)

    def test_localization_extremes(self):
        n, eps = 64, 1 / 16
        X, Y = cell_centers(n)
        band = (np.abs(Y) < 0.25).astype(float)
        near = np.abs(np.abs(Y) - 0.25) < 0.02
        u0 = 0.5 * near
        s = PhaseState(band * (1 - u0), (1 - band) * (1 - u0))
        assert localization(s, eps) == 1.0
        far = (np.abs(Y) < 0.02).astype(float) * 0.5
        s = PhaseState(band * (1 - far), (1 - band) * (1 - far))
        assert localization(s, eps, radius=1.0) == 0.0

    @pytest.mark.parametrize("kw", [dict(eps=0), dict(dt=-1), dict(mobilities=(1, 1)),
                                    dict(gamma=((0, 1, 0), (0, 0, 0), (0, 0, 0)))])
    def test_bad_params(self, kw):
        with pytest.raises(ValueError):
            FlowParams(**kw)
