import math

import pytest

from stochdiss import (
    DelayDistribution,
    PlantModel,
    certify,
    compare_builders,
    freq_gain,
    max_a_then_min_b,
    min_gain,
    min_radius,
)
from stochdiss.analysis import NO_FINITE_GAIN


class TestMinGain:
    def test_constant_delay_matches_frequency_gain(self, plant):
        # with a known constant delay the certificate is tight at the
        # delay-free peak gain (delays only rotate the frequency locus)
        expected = freq_gain(plant, 4096)
        res = min_gain(plant, DelayDistribution.point_mass(1), "stochastic")
        assert res.ok
        assert res.gain == pytest.approx(expected, abs=5e-3)

    def test_constant_delay_gain_invariance(self, plant):
        gains = []
        for w in (1, 5):
            res = min_gain(plant, DelayDistribution.point_mass(w), "stochastic")
            assert res.ok
            gains.append(res.gain)
        assert abs(gains[0] - gains[1]) < 0.05

    def test_point_mass_matches_deterministic(self, plant):
        for w in (1, 3, 5):
            rs = min_gain(plant, DelayDistribution.point_mass(w), "stochastic")
            rd = min_gain(plant, (w, w), "deterministic")
            assert rs.ok and rd.ok
            assert abs(rs.gain - rd.gain) < 0.05

    def test_no_finite_gain_for_unstable_plant(self):
        plant = PlantModel(A=[[1.2]], B=[[1.0]], C=[[1.0]], D=[[0.0]])
        res = min_gain(plant, DelayDistribution.point_mass(1), "stochastic")
        assert not res.ok
        assert res.status == NO_FINITE_GAIN

    def test_certified_sector_recertifies(self, plant, dists):
        res = min_gain(plant, dists["p4"], "stochastic")
        assert res.ok
        cert = certify(plant, dists["p4"], "stochastic", res.qsr)
        assert cert.feasible


class TestMaxAMinB:
    def test_phase1_improves_with_concentration(self, plant, dists):
        a5 = max_a_then_min_b(plant, dists["p5"], "stochastic").a
        a3 = max_a_then_min_b(plant, dists["p3"], "stochastic").a
        # mass concentrated at the minimum delay gives the tightest bound
        assert a5 > a3

    def test_b_cap_flag(self, plant):
        res = max_a_then_min_b(plant, (1, 5), "deterministic", b_cap=1e5)
        assert res.ok
        assert res.b_capped
        assert res.a == pytest.approx(-4.0936, abs=5e-3)

    def test_half_plane_certificate_recertifies(self, plant, dists):
        res = max_a_then_min_b(plant, dists["p5"], "stochastic")
        assert res.ok
        cert = certify(plant, dists["p5"], "stochastic", res.qsr)
        assert cert.feasible


class TestMinRadius:
    def test_radius_never_exceeds_gain(self, plant, dists):
        for name in ("p1", "p5"):
            g = min_gain(plant, dists[name], "stochastic")
            r = min_radius(plant, dists[name], "stochastic")
            assert g.ok and r.ok
            assert r.r <= g.gain + 1e-6

    def test_offcenter_disk_for_low_delay_mass(self, plant, dists):
        res = min_radius(plant, dists["p5"], "stochastic")
        assert res.ok
        assert res.c > 0.5          # disk center shifts right
        assert res.r < 1.6          # and is tighter than the gain circle

    def test_recertifies(self, plant, dists):
        res = min_radius(plant, dists["p2"], "stochastic")
        assert res.ok
        cert = certify(plant, dists["p2"], "stochastic", res.qsr)
        assert cert.feasible


class TestCompareBuilders:
    def test_orderings(self, plant, dists):
        out = compare_builders(plant, dists["p3"])
        assert out["gain_not_worse"]
        assert out["a_not_worse"]

    def test_point_mass_agreement(self, plant):
        dist = DelayDistribution.point_mass(3)
        out = compare_builders(plant, dist)
        sg = out["stochastic"]["gain"].gain
        dg = out["deterministic"]["gain"].gain
        assert abs(sg - dg) < 0.05

    def test_uniform_is_loosest(self, plant, dists):
        gains = {name: min_gain(plant, dists[name], "stochastic").gain
                 for name in ("p1", "p2", "p3", "p4", "p5")}
        assert all(gains["p3"] >= gains[n] - 1e-9 for n in gains)
