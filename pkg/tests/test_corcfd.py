"""Pilot designs, bootstrap moments, regressions, and the sample transform."""

import numpy as np
import pytest

from adadfo.corcfd import (CorCfdConfig, PilotDesign, PilotFit, augment_gradient,
                           bootstrap_moments, cor_cfd_coordinate,
                           cor_cfd_gradient, fit_pilot, generate_perturbations,
                           round_up_to_multiple, transform_sample, _finish_fit)
from adadfo.oracle import EvaluationBudget, RngStream, make_problem


class _EnumeratedStream:
    """Stands in for RngStream, returning fixed bootstrap index draws."""

    def __init__(self, idx):
        self._idx = np.asarray(idx)

    def integers(self, low, high, size=None):
        assert size == self._idx.shape
        return self._idx


def _exhaustive_pairs():
    # All 4 equally likely resamples of a 2-element batch.
    return _EnumeratedStream([[0, 0], [0, 1], [1, 0], [1, 1]])


def test_round_up_to_multiple():
    assert round_up_to_multiple(9, 5) == 10
    assert round_up_to_multiple(10, 5) == 10
    assert round_up_to_multiple(1, 5) == 5


def test_config_validation():
    with pytest.raises(ValueError):
        CorCfdConfig(K=1)
    with pytest.raises(ValueError):
        CorCfdConfig(I=1)
    with pytest.raises(ValueError):
        CorCfdConfig(gen_std_scale=0.0)
    with pytest.raises(ValueError):
        CorCfdConfig(trunc_lo_scale=-1.0)


def test_perturbations_respect_truncation_and_are_distinct():
    scale = 10 ** (-1.0 / 5.0)
    cfg12 = CorCfdConfig()  # problems with unit generator scale
    h = generate_perturbations(cfg12, 5, 10, RngStream(0, "p"))
    assert np.all(h >= 0.1 * scale - 1e-15)  # >= 0.0631
    assert len(np.unique(h)) == 5

    cfg3 = CorCfdConfig(gen_std_scale=0.1, trunc_lo_scale=0.01)
    h3 = generate_perturbations(cfg3, 5, 10, RngStream(0, "p"))
    assert np.all(h3 >= 0.01 * scale - 1e-15)  # >= 0.00631


def test_perturbations_reproducible():
    a = generate_perturbations(CorCfdConfig(), 5, 20, RngStream(4, "p"))
    b = generate_perturbations(CorCfdConfig(), 5, 20, RngStream(4, "p"))
    assert np.array_equal(a, b)


def test_bootstrap_moments_exhaustive_two_point():
    design = PilotDesign(h=np.array([0.1]), counts=np.array([2]),
                         quotients=[np.array([0.0, 2.0])])
    mean_star, var_star = bootstrap_moments(design, 0, 4, _exhaustive_pairs())
    # resample means are {0, 1, 1, 2}
    assert mean_star == 1.0
    assert var_star == 0.5


def test_bootstrap_moments_large_I_limit():
    # var_star -> population variance of the quotients divided by n_b.
    quotients = np.array([0.0, 1.0, 2.0, 5.0])
    design = PilotDesign(h=np.array([0.1]), counts=np.array([4]),
                         quotients=[quotients])
    _, var_star = bootstrap_moments(design, 0, 50_000, RngStream(2, "boot"))
    expected = quotients.var(ddof=0) / 4.0
    assert var_star == pytest.approx(expected, rel=0.05)


def test_bootstrap_needs_two_pairs():
    design = PilotDesign(h=np.array([0.1]), counts=np.array([1]),
                         quotients=[np.array([1.0])])
    with pytest.raises(ValueError):
        bootstrap_moments(design, 0, 10, RngStream(0))


def _affine_design(h_values, delta_scale=0.0):
    """Two-pair groups whose quotients average 3 + 2h^2 per group."""
    quotients = []
    for h in h_values:
        m = 3.0 + 2.0 * h ** 2
        delta = delta_scale / h if delta_scale else 0.0
        quotients.append(np.array([m - delta, m + delta]))
    return PilotDesign(h=np.asarray(h_values), counts=np.full(len(h_values), 2),
                       quotients=quotients)


def test_fit_recovers_mean_regression_exactly():
    design = _affine_design([0.1, 0.2, 0.4])
    streams = [_exhaustive_pairs() for _ in design.h]

    class _Seq:
        def __init__(self, items):
            self._items = list(items)

        def integers(self, low, high, size=None):
            return self._items.pop(0).integers(low, high, size)

    fit = fit_pilot(design, 4, 100, _Seq(streams))
    assert fit.g_hat == pytest.approx(3.0, rel=1e-10)
    assert fit.B_hat == pytest.approx(2.0, rel=1e-10)
    # noiseless quotients: sigma2 regresses to zero, smallest-bias clamp
    assert fit.sigma2_hat == 0.0
    assert fit.clamped and fit.h_opt == design.h.min()


def test_fit_recovers_noise_variance_exactly():
    # Quotient pairs m -+ delta with delta = sqrt(2)/h give, under the
    # exhaustive bootstrap, var_star = delta^2/2 = 4/(2*n_b*h^2) exactly.
    design = _affine_design([0.1, 0.2, 0.4], delta_scale=np.sqrt(2.0))
    streams = [_exhaustive_pairs() for _ in design.h]

    class _Seq:
        def __init__(self, items):
            self._items = list(items)

        def integers(self, low, high, size=None):
            return self._items.pop(0).integers(low, high, size)

    fit = fit_pilot(design, 4, 100, _Seq(streams))
    assert fit.g_hat == pytest.approx(3.0, rel=1e-10)
    assert fit.B_hat == pytest.approx(2.0, rel=1e-10)
    assert fit.sigma2_hat == pytest.approx(4.0, rel=1e-10)
    expected_h = (4.0 / (4.0 * 100 * fit.B_hat ** 2)) ** (1.0 / 6.0)
    assert fit.h_opt == pytest.approx(expected_h, rel=1e-10)
    assert not fit.clamped


def test_h_opt_formula_figure_one_setting():
    design = PilotDesign(h=np.array([0.2, 0.6]), counts=np.array([2, 2]))
    fit = _finish_fit(10.0, -10.0 / 6.0, 1.0, 100, design, cap=6.0)
    assert fit.h_opt == pytest.approx(0.3107, abs=5e-5)
    assert not fit.clamped


def test_h_opt_clamps():
    design = PilotDesign(h=np.array([0.1, 0.5]), counts=np.array([2, 2]))
    # B = 0 with noise: optimal perturbation is unbounded, clamp to cap
    fit = _finish_fit(1.0, 0.0, 1.0, 10, design, cap=5.0)
    assert fit.clamped and fit.h_opt == 5.0
    # both zero: largest pilot perturbation
    fit = _finish_fit(1.0, 0.0, 0.0, 10, design, cap=5.0)
    assert fit.clamped and fit.h_opt == 0.5
    # formula above the cap
    fit = _finish_fit(1.0, 1e-12, 1.0, 10, design, cap=5.0)
    assert fit.clamped and fit.h_opt == 5.0


def test_transform_identity_at_h_opt():
    fit = PilotFit(g_hat=2.0, B_hat=-1.5, sigma2_hat=1.0, h_opt=0.3)
    raw = np.array([-3.0, 0.0, 7.5])
    assert np.array_equal(transform_sample(raw, 0.3, fit), raw)


def test_transform_noise_free_quotient():
    fit = PilotFit(g_hat=2.0, B_hat=-1.5, sigma2_hat=1.0, h_opt=0.3)
    raw = fit.g_hat + fit.B_hat * 0.5 ** 2
    out = transform_sample(raw, 0.5, fit)
    assert out == pytest.approx(fit.g_hat + fit.B_hat * fit.h_opt ** 2, rel=1e-12)


def test_transform_hand_arithmetic():
    fit = PilotFit(g_hat=0.0, B_hat=1.0, sigma2_hat=0.0, h_opt=1.0)
    assert transform_sample(5.0, 2.0, fit) == 3.0


def test_mean_of_transform_formula():
    fit = PilotFit(g_hat=1.2, B_hat=0.7, sigma2_hat=0.5, h_opt=0.25)
    h_k = 0.6
    raw = RngStream(8, "raw").standard_normal(20) + 3.0
    transformed = transform_sample(raw, h_k, fit)
    expected = (fit.g_hat + fit.B_hat * fit.h_opt ** 2
                + (h_k / fit.h_opt) * (raw.mean() - fit.g_hat - fit.B_hat * h_k ** 2))
    assert transformed.mean() == pytest.approx(expected, rel=1e-12)


def test_coordinate_exact_on_noiseless_quadratic():
    p = make_problem("sphere", dim=2)
    b = EvaluationBudget(1000)
    c = cor_cfd_coordinate(p, [2.0, -3.0], 1, 10, CorCfdConfig(), b,
                           RngStream(0, "c"))
    assert c.estimate == pytest.approx(-3.0, rel=1e-10)
    assert c.sample_variance == pytest.approx(0.0, abs=1e-18)
    assert c.pairs == 10 and not c.partial
    assert b.used == 20


def test_coordinate_validates_batch_size():
    p = make_problem("sphere", dim=1)
    b = EvaluationBudget(100)
    with pytest.raises(ValueError):
        cor_cfd_coordinate(p, [1.0], 0, 12, CorCfdConfig(), b, RngStream(0))
    with pytest.raises(ValueError):
        cor_cfd_coordinate(p, [1.0], 0, 5, CorCfdConfig(), b, RngStream(0))


def test_gradient_budget_exactness_and_rounding():
    p = make_problem("sphere", sigma=0.5, dim=3)
    b = EvaluationBudget(10_000)
    est = cor_cfd_gradient(p, [1.0, 2.0, 3.0], 12, CorCfdConfig(), b,
                           RngStream(1, "g"))
    assert est.n_k == 15  # rounded up to a multiple of K=5
    assert b.used == 2 * 3 * 15
    assert est.pairs_total == 3 * 15
    assert not est.partial


def test_gradient_partial_when_budget_short():
    p = make_problem("sphere", sigma=0.5, dim=2)
    b = EvaluationBudget(30)  # coordinate 0 takes 20, coordinate 1 is cut short
    est = cor_cfd_gradient(p, [1.0, 2.0], 10, CorCfdConfig(), b, RngStream(1))
    assert est.partial
    assert b.used == 30


def test_gradient_unusable_when_budget_tiny():
    p = make_problem("sphere", sigma=0.5, dim=1)
    b = EvaluationBudget(3)
    est = cor_cfd_gradient(p, [1.0], 10, CorCfdConfig(), b, RngStream(1))
    assert est.partial and np.isnan(est.g[0])


def test_augment_pools_samples():
    p = make_problem("sphere", sigma=0.5, dim=2)
    b = EvaluationBudget(10_000)
    stream = RngStream(2, "g")
    est = cor_cfd_gradient(p, [1.0, 2.0], 10, CorCfdConfig(), b, stream)
    grown = augment_gradient(est, 25, p, [1.0, 2.0], CorCfdConfig(), b,
                             stream.child("aug"))
    assert grown.n_k == 25
    for before, after in zip(est.coordinates, grown.coordinates):
        assert after.design.n == 25
        assert np.array_equal(after.design.h, before.design.h)
    assert b.used == 2 * 2 * 25

    with pytest.raises(ValueError):
        augment_gradient(grown, 25, p, [1.0, 2.0], CorCfdConfig(), b, stream)
    with pytest.raises(ValueError):
        augment_gradient(grown, 27, p, [1.0, 2.0], CorCfdConfig(), b, stream)


def test_coordinate_reproducible():
    p = make_problem("rosenbrock", sigma=1.0)
    out = []
    for _ in range(2):
        b = EvaluationBudget(1000)
        c = cor_cfd_coordinate(p, p.x0, 0, 10, CorCfdConfig(), b,
                               RngStream(11, "rep"))
        out.append((c.estimate, c.sample_variance))
    assert out[0] == out[1]
