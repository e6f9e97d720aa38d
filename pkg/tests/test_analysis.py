"""Fitters: exact on their own model family, honest errors elsewhere."""

import math

import numpy as np
import pytest

from qdecay.analysis import (
    extract_departure_and_saturation,
    fit_powerlaw_tail,
    fit_stretched_exponent,
    scaling_collapse,
    suggest_fit_window,
)
from qdecay.errors import (
    InsufficientOverlapError,
    NoPlateauError,
    WindowTooShortError,
)


class TestStretchedFit:
    def test_exact_recovery(self):
        t = np.geomspace(0.05, 20.0, 60)
        beta, t0 = 0.5, 1.7
        p = np.exp(-((t / t0) ** beta))
        fit = fit_stretched_exponent(t, p, (0.05, 20.0))
        assert fit.beta == pytest.approx(beta, abs=1e-10)
        assert fit.slope == pytest.approx(beta - 1.0, abs=1e-10)
        assert fit.t0 == pytest.approx(t0, rel=1e-9)
        assert fit.beta_err < 1e-10

    def test_plain_exponential_zero_slope(self):
        t = np.geomspace(0.1, 10.0, 40)
        p = np.exp(-t / 2.0)
        fit = fit_stretched_exponent(t, p, (0.1, 10.0))
        assert fit.slope == pytest.approx(0.0, abs=1e-12)
        assert fit.beta == pytest.approx(1.0, abs=1e-12)

    def test_window_too_short(self):
        t = np.geomspace(0.1, 10.0, 40)
        p = np.exp(-t)
        with pytest.raises(WindowTooShortError):
            fit_stretched_exponent(t, p, (1.0, 2.0))

    def test_time_axis_rescaling_invariance(self):
        t = np.geomspace(0.05, 20.0, 50)
        p = np.exp(-((t / 1.7) ** 0.25))
        a = fit_stretched_exponent(t, p, (0.1, 10.0))
        b = fit_stretched_exponent(1000.0 * t, p, (100.0, 10000.0))
        assert b.slope == pytest.approx(a.slope, abs=1e-9)
        assert b.t0 == pytest.approx(1000.0 * a.t0, rel=1e-6)


class TestPowerlawFit:
    def test_exact_recovery(self):
        t = np.geomspace(1.0, 100.0, 40)
        p = 0.37 * t**-1.25
        fit = fit_powerlaw_tail(t, p, (1.0, 100.0))
        assert fit.exponent == pytest.approx(-1.25, abs=1e-12)
        assert fit.amplitude == pytest.approx(0.37, rel=1e-10)

    def test_noise_gives_error_bar(self):
        rng = np.random.default_rng(0)
        t = np.geomspace(1.0, 100.0, 60)
        p = 0.37 * t**-1.25 * np.exp(rng.normal(0.0, 0.05, t.size))
        fit = fit_powerlaw_tail(t, p, (1.0, 100.0))
        assert fit.exponent == pytest.approx(-1.25, abs=3 * fit.exponent_err)
        assert 0.0 < fit.exponent_err < 0.05


class TestDepartureSaturation:
    @staticmethod
    def step_track(t_star=1.0, level=7.0):
        t = np.geomspace(0.01, 100.0, 300)
        w = np.where(t >= t_star, level, 0.0)
        return t, w

    def test_step_function(self):
        t, w = self.step_track()
        t_dep, sat = extract_departure_and_saturation(t, w)
        assert sat == pytest.approx(7.0)
        assert t_dep == pytest.approx(1.0, rel=0.03)

    def test_smooth_rise(self):
        t = np.geomspace(0.01, 100.0, 400)
        w = 5.0 * (1.0 - np.exp(-t / 0.7))
        t_dep, sat = extract_departure_and_saturation(t, w, fraction=0.5)
        assert sat == pytest.approx(5.0, rel=0.01)
        assert t_dep == pytest.approx(0.7 * math.log(2.0), rel=0.02)

    def test_no_plateau(self):
        t = np.geomspace(0.01, 100.0, 200)
        with pytest.raises(NoPlateauError):
            extract_departure_and_saturation(t, t**0.5)


class TestCollapse:
    @staticmethod
    def family(t0s, beta=0.5, n=80):
        tracks = []
        for t0 in t0s:
            t = np.geomspace(0.01 * t0, 30.0 * t0, n)
            tracks.append((t, np.exp(-((t / t0) ** beta)), t0))
        return tracks

    def test_identical_tracks_zero_residual(self):
        tracks = self.family([1.0, 10.0, 100.0])
        assert scaling_collapse(tracks, (0.2, 3.0)) < 1e-12

    def test_shuffled_t0_negative_control(self):
        t0s = [1.0, 4.0, 16.0]
        tracks = self.family(t0s)
        shuffled = [(t, p, w) for (t, p, _), w in zip(tracks, [16.0, 1.0, 4.0])]
        good = scaling_collapse(tracks, (0.2, 1.8))
        bad = scaling_collapse(shuffled, (0.2, 1.8))
        assert bad > 0.3
        assert bad > 100.0 * max(good, 1e-9)

    def test_too_few_tracks(self):
        with pytest.raises(Exception):
            scaling_collapse(self.family([1.0, 2.0]), (0.2, 3.0))

    def test_insufficient_overlap(self):
        # same raw time span, widely different t0: disjoint scaled support
        t = np.geomspace(0.01, 30.0, 50)
        p = np.exp(-np.sqrt(t))
        tracks = [(t, p, t0) for t0 in [1.0, 1e6, 1e12]]
        with pytest.raises(InsufficientOverlapError):
            scaling_collapse(tracks, (1e-4, 1e4))


class TestSuggestWindow:
    def test_returns_valid_window_and_fit_recovers(self):
        t = np.geomspace(0.01, 50.0, 120)
        p = np.exp(-((t / 1.3) ** 0.7))
        window = suggest_fit_window(t, p)
        fit = fit_stretched_exponent(t, p, window)
        assert fit.beta == pytest.approx(0.7, abs=0.05)
