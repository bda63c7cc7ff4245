import numpy as np
import pytest

from stochdiss import (
    DelayDistribution,
    PlantModel,
    SupplyRate,
    closed_loop_simulate,
    make_input_bank,
    mc_check_dissipativity,
    simulate,
    supply_ledger,
    three_step_square_wave,
    trajectory_to_csv,
)
from stochdiss import _kernels


class TestSimulate:
    def test_zero_input_zero_trajectory(self, plant, dists):
        traj = simulate(plant, dists["p3"], np.zeros(51), T=50, seed=3)
        assert np.all(traj.x == 0.0)
        assert np.all(traj.y == 0.0)

    def test_recursion_recomputable(self, plant, dists, rng):
        u = rng.normal(size=81)
        traj = simulate(plant, dists["p2"], u, T=80, seed=11)
        for k in range(traj.T):
            ud = traj.delayed_input(k)
            assert np.allclose(traj.x[k + 1],
                               plant.A @ traj.x[k] + plant.B @ ud,
                               atol=0.0)
            assert np.allclose(traj.y[k],
                               plant.C @ traj.x[k] + plant.D @ ud,
                               atol=0.0)

    def test_constant_delay_equals_shifted_undelayed(self, plant, rng):
        u = rng.normal(size=61)
        for w in (1, 3, 5):
            delayed = simulate(plant, np.full(61, w, dtype=int), u, T=60)
            shifted = np.concatenate([np.zeros(w), u[:61 - w]])
            undelayed = simulate(plant, np.zeros(61, dtype=int), shifted, T=60)
            assert np.array_equal(delayed.x, undelayed.x)
            assert np.array_equal(delayed.y, undelayed.y)

    def test_reproducible_for_fixed_seed(self, plant, dists, rng):
        u = rng.normal(size=51)
        t1 = simulate(plant, dists["p4"], u, T=50, seed=99)
        t2 = simulate(plant, dists["p4"], u, T=50, seed=99)
        assert np.array_equal(t1.w, t2.w)
        assert np.array_equal(t1.x, t2.x)

    def test_explicit_delays_validated_against_bounds(self, plant, rng):
        u = rng.normal(size=21)
        with pytest.raises(ValueError):
            simulate(plant, np.full(21, 7, dtype=int), u, T=20, bounds=(1, 5))
        with pytest.raises(ValueError):
            simulate(plant, np.full(21, -1, dtype=int), u, T=20)

    def test_delay_histogram_matches_pmf(self, plant, dists):
        dist = dists["p4"]
        traj = simulate(plant, dist, np.zeros(100001), T=100000, seed=5)
        counts = np.bincount(traj.w, minlength=6)[1:6]
        n = traj.w.shape[0]
        for count, p in zip(counts, dist.pmf):
            sigma = np.sqrt(n * p * (1 - p))
            assert abs(count - n * p) <= 3.0 * sigma


class TestCounterexample:
    def test_delayed_gain_exceeds_static_gain(self):
        # memoryless unit gain, input (2, 1, 0, ...), delays (0, 1, 2, 0, ...):
        # energy in 5, energy out 12
        plant = PlantModel(A=[], B=np.zeros((0, 1)), C=np.zeros((1, 0)), D=[[1.0]])
        u = np.zeros(10)
        u[0], u[1] = 2.0, 1.0
        w = np.zeros(10, dtype=int)
        w[1], w[2] = 1, 2
        traj = simulate(plant, w, u, T=9)
        assert float(np.sum(traj.u ** 2)) == 5.0
        assert float(np.sum(traj.y ** 2)) == 12.0


class TestSupplyLedger:
    def test_running_sums_recomputable(self, plant, dists, rng):
        u = rng.normal(size=41)
        traj = simulate(plant, dists["p1"], u, T=40, seed=2)
        qsr = SupplyRate(Q=[[-1.0]], S=[[0.0]], R=[[4.0]])
        ledger = supply_ledger(traj, qsr)
        assert np.allclose(np.cumsum(ledger.supply), ledger.running, atol=0.0)
        assert ledger.minimum == ledger.running.min()


class TestKernelBackends:
    def test_open_loop_paths_agree(self, plant, rng):
        u = rng.normal(size=(61, 1))
        w = rng.integers(1, 6, size=61).astype(np.int64)
        x0 = np.zeros(2)
        x_np, y_np = _kernels._sim_numpy(plant.A, plant.B, plant.C, plant.D,
                                         u, w, x0)
        x_sel, y_sel = _kernels.sim_recursion(plant.A, plant.B, plant.C,
                                              plant.D, u, w, x0)
        assert np.allclose(x_np, x_sel, atol=1e-12)
        assert np.allclose(y_np, y_sel, atol=1e-12)

    def test_mc_paths_agree(self, plant, rng):
        u = rng.normal(size=(41, 1))
        W = rng.integers(1, 6, size=(32, 41)).astype(np.int64)
        Q, S, R = -np.eye(1), np.zeros((1, 1)), 4.0 * np.eye(1)
        r_np = _kernels._mc_numpy(plant.A, plant.B, plant.C, plant.D,
                                  Q, S, R, u, W)
        r_sel = _kernels.mc_running_supply(plant.A, plant.B, plant.C, plant.D,
                                           Q, S, R, u, W)
        assert np.allclose(r_np, r_sel, atol=1e-9)

    def test_closed_loop_paths_agree(self, plant, rng):
        d = three_step_square_wave(50)
        w = rng.integers(1, 6, size=51).astype(np.int64)
        out_np = _kernels._cl_numpy(plant.A, plant.B, plant.C, 1.1, d, w, 50)
        out_sel = _kernels.closed_loop_recursion(plant.A, plant.B, plant.C,
                                                 1.1, d, w, 50)
        for a, b in zip(out_np, out_sel):
            assert np.allclose(a, b, atol=1e-12)


class TestMcCheck:
    def test_certified_gain_sector_passes(self, plant, dists):
        qsr = SupplyRate(Q=[[-1.0]], S=[[0.0]], R=[[4.11 ** 2]])
        report = mc_check_dissipativity(plant, dists["p3"], qsr,
                                        T=150, runs=400, seed=7)
        assert report.passed

    def test_false_gain_sector_fails_with_sine_witness(self, plant, dists):
        qsr = SupplyRate(Q=[[-1.0]], S=[[0.0]], R=[[1.0]])
        report = mc_check_dissipativity(plant, dists["p3"], qsr,
                                        T=150, runs=400, seed=7)
        assert not report.passed
        assert report.worst_input == "sine_worst"

    def test_zero_input_running_sum_is_zero(self, plant, dists):
        qsr = SupplyRate(Q=[[-1.0]], S=[[0.0]], R=[[4.0]])
        bank = {"zero": np.zeros(101)}
        report = mc_check_dissipativity(plant, dists["p1"], qsr,
                                        input_bank=bank, T=100, runs=100, seed=1)
        assert report.passed
        assert report.worst_mean == 0.0

    def test_rejects_too_few_runs(self, plant, dists):
        qsr = SupplyRate(Q=[[-1.0]], S=[[0.0]], R=[[4.0]])
        with pytest.raises(ValueError):
            mc_check_dissipativity(plant, dists["p1"], qsr, runs=50)


class TestClosedLoop:
    def test_open_loop_pulse_response(self, plant, dists):
        # all-ones delay realization: the pulse arrives on three consecutive
        # steps; peak 2.8845 at step 4, then monotone decay
        run = closed_loop_simulate(plant, 0.0, dists["p4"], T=50, seed=0,
                                   explicit_delays=np.ones(51, dtype=int))
        y = run.trajectory.y[:, 0]
        peak = int(np.argmax(y))
        assert peak == 4
        assert y[peak] == pytest.approx(2.8845, abs=1e-3)
        assert np.all(np.diff(y[peak:]) <= 1e-12)

    def test_moderate_gain_settles(self, plant, dists):
        for seed in range(5):
            run = closed_loop_simulate(plant, 1.1, dists["p4"], T=60, seed=seed)
            y = np.abs(run.trajectory.y[:, 0])
            assert y[40:].max() < 0.01

    def test_large_gain_diverges(self, plant, dists):
        run = closed_loop_simulate(plant, 18.0, dists["p4"], T=50, seed=1)
        y = np.abs(run.trajectory.y[:, 0])
        assert y[26:].max() >= 10.0 * y[:26].max()

    def test_disturbance_feeds_both_paths(self, plant, dists):
        run = closed_loop_simulate(plant, 0.5, dists["p4"], T=20, seed=4)
        d = run.disturbance
        y = run.trajectory.y[:, 0]
        assert np.allclose(run.controller_output, 0.5 * (y + d), atol=0.0)
        assert np.allclose(run.trajectory.u[:, 0], d - run.controller_output,
                           atol=0.0)


class TestCsvExport:
    def test_columns_and_recomputable_content(self, plant, dists, tmp_path, rng):
        u = rng.normal(size=31)
        traj = simulate(plant, dists["p2"], u, T=30, seed=8)
        qsr = SupplyRate(Q=[[-1.0]], S=[[0.0]], R=[[9.0]])
        path = tmp_path / "traj.csv"
        trajectory_to_csv(traj, path, qsr)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "k,u,w,x_1,x_2,y,supply,running_sum"
        assert len(lines) == 32
        ledger = supply_ledger(traj, qsr)
        first = lines[1].split(",")
        assert float(first[1]) == pytest.approx(traj.u[0, 0], rel=1e-10)
        last = lines[-1].split(",")
        assert float(last[-1]) == pytest.approx(ledger.running[-1], rel=1e-9)
