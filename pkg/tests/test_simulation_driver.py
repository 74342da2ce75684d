"""Driver tests: scenario validation, initialization, the capillary bound,
stepping on a small problem, CSV output and checkpoint round-trips."""
import numpy as np
import pytest

from entrolevel import diagnostics as dg
from entrolevel.discrete_system import ENTROPY_STABLE
from entrolevel.simulation_driver import (Droplet, Scenario, build_problem,
                                          initialize, load_checkpoint,
                                          max_time_step, run,
                                          save_checkpoint, signed_distance)

SMALL = Scenario(
    box=((0.0, 8.0), (0.0, 8.0)), n_elems=(8, 8),
    rho1=1.0, rho2=0.1, mu1=0.0, mu2=0.0, sigma=10.0,
    dt=2e-3, t_end=1.0, C=0.0, scheme=ENTROPY_STABLE,
    droplets=(Droplet(center=(4.0, 4.0), radius=2.0),))


class TestScenarioValidation:
    def test_bad_dt(self):
        with pytest.raises(ValueError):
            Scenario(box=((0, 1), (0, 1)), n_elems=(4, 4), dt=0.0)

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            Scenario(box=((0, 1),), n_elems=(4, 4))

    def test_droplet_outside_box(self):
        with pytest.raises(ValueError):
            Scenario(box=((0, 1), (0, 1)), n_elems=(4, 4),
                     droplets=(Droplet(center=(0.9, 0.5), radius=0.2),))
        with pytest.raises(ValueError):
            Scenario(box=((0, 1), (0, 1)), n_elems=(4, 4),
                     droplets=(Droplet(center=(0.5, 0.5), radius=-0.1),))


class TestSignedDistance:
    def test_single_droplet(self):
        f = signed_distance(SMALL)
        x = np.array([[4.0, 4.0], [6.0, 4.0], [4.0, 7.0]])
        np.testing.assert_allclose(f(x), [2.0, 0.0, -1.0], atol=1e-14)

    def test_split_plane_assignment(self):
        sc = Scenario(
            box=((0.0, 1.0), (0.0, 1.0)), n_elems=(4, 4),
            droplets=(Droplet(center=(0.4, 0.5), radius=0.25),
                      Droplet(center=(0.78, 0.5), radius=0.1)),
            split_x=0.665)
        f = signed_distance(sc)
        # right of the plane only the small droplet counts, even where the
        # large one is closer
        val = f(np.array([[0.7, 0.5]]))[0]
        assert val == pytest.approx(0.1 - 0.08, abs=1e-12)

    def test_no_droplets(self):
        sc = Scenario(box=((0, 1), (0, 1)), n_elems=(2, 2))
        assert signed_distance(sc)(np.array([[0.5, 0.5]]))[0] == 0.0


class TestCapillaryBound:
    def test_formula(self):
        system, layout, model, dsys = build_problem(SMALL)
        h = np.sqrt(2.0)  # 8 elements over 8 units, square cells
        expect = 0.9 * np.sqrt(0.55 * h**3 * (1.0 / 10.0) / (2 * np.pi))
        assert max_time_step(system, model, dsys.params.groups.We) == \
            pytest.approx(expect, rel=1e-12)

    def test_run_rejects_large_dt(self):
        sc = Scenario(**{**SMALL.__dict__, "dt": 10.0, "t_end": 10.0})
        with pytest.raises(ValueError, match="capillary"):
            run(sc)


class TestInitialize:
    def test_initial_state(self):
        system, layout, model, dsys = build_problem(SMALL)
        state = initialize(SMALL, system, layout, model, dsys.params.groups)
        assert state.t == 0.0 and state.n == 0
        for k in range(2):
            assert np.all(state.coeffs[layout.slice_u(k)] == 0.0)
        assert np.all(state.coeffs[layout.slice_p] == 0.0)
        # projected level set close to the signed distance away from the
        # cone tip (which projection necessarily rounds)
        val = system.eval_field(system.scalar,
                                state.coeffs[layout.slice_phi],
                                np.array([[5.5, 4.0]]))[0]
        assert val == pytest.approx(0.5, abs=0.05)
        # auxiliary variable was solved, not zeroed
        assert np.abs(state.coeffs[layout.slice_v]).max() > 0.0


@pytest.fixture(scope="module")
def artifacts(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    sc = Scenario(**{**SMALL.__dict__, "t_end": 10 * SMALL.dt,
                     "snapshot_every": 5})
    art = run(sc, energy_csv=out / "energy.csv")
    return sc, art, out


class TestRun:
    def test_records_and_snapshots(self, artifacts):
        sc, art, _ = artifacts
        assert not art.aborted
        assert len(art.records) == 11           # t = 0 plus 10 steps
        assert len(art.reports) == 10
        assert [s for s, _ in art.snapshots] == [0, 5, 10]
        assert art.final_state.n == 10
        assert art.final_state.t == pytest.approx(10 * sc.dt)

    def test_structural_guarantees(self, artifacts):
        _, art, _ = artifacts
        for rec in art.records[1:]:
            assert rec.max_div <= 1e-10
            assert rec.rho_min >= SMALL.rho2 - 1e-12
            assert rec.rho_max <= SMALL.rho1 + 1e-12
            # dissipation identity defect at Newton-tolerance level
            assert abs(rec.defect) < 1e-6
        e = [r.E_total for r in art.records]
        assert all(e1 <= e0 + 1e-8 for e0, e1 in zip(e, e[1:]))

    def test_csv_round_trip(self, artifacts):
        _, art, out = artifacts
        back = dg.read_energy_csv(out / "energy.csv")
        assert len(back) == len(art.records)
        for a, b in zip(art.records, back):
            assert a.row() == b.row()


class TestCheckpoints:
    def test_round_trip(self, tmp_path):
        system, layout, model, dsys = build_problem(SMALL)
        state = initialize(SMALL, system, layout, model, dsys.params.groups)
        state.t, state.n = 1.25, 625
        p = tmp_path / "state.ckpt"
        save_checkpoint(p, state, layout)
        back = load_checkpoint(p, layout)
        assert back.t == state.t and back.n == state.n
        np.testing.assert_array_equal(back.coeffs, state.coeffs)

    def test_rejects_bad_magic(self, tmp_path):
        p = tmp_path / "bad.ckpt"
        p.write_bytes(b"NOPE" + bytes(64))
        layout = build_problem(SMALL)[1]
        with pytest.raises(ValueError, match="magic"):
            load_checkpoint(p, layout)

    def test_rejects_other_mesh(self, tmp_path):
        system, layout, model, dsys = build_problem(SMALL)
        state = initialize(SMALL, system, layout, model, dsys.params.groups)
        p = tmp_path / "state.ckpt"
        save_checkpoint(p, state, layout)
        sc2 = Scenario(**{**SMALL.__dict__, "n_elems": (10, 10)})
        layout2 = build_problem(sc2)[1]
        with pytest.raises(ValueError, match="match"):
            load_checkpoint(p, layout2)
