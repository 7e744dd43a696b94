import math

import numpy as np
import pytest

from speclab import symbols as sym
from speclab.errors import (
    OutsideStrip,
    StripNotCertified,
    ValidationError,
    VanishesOnTorus,
)

ALPHA = 0.6180339887498949


def ehm_hopping(lam, alpha=ALPHA):
    l1, l2, l3 = lam
    return sym.from_dict({-1: l1, 0: l2, 1: l3}, half_phase=True, alpha=alpha)


def test_eval_constant():
    s = sym.constant(1.0)
    assert s.eval(0.37) == pytest.approx(1.0)


def test_eval_ehm_at_z_equal_one():
    c = ehm_hopping((0.1, 0.5, 0.2))
    assert c.eval(-ALPHA / 2) == pytest.approx(0.8, abs=1e-14)


def test_eval_cosine_zero():
    v = sym.cosine_potential(2.0)
    assert v.eval(0.25) == pytest.approx(0.0, abs=1e-15)
    assert v.eval(0.0) == pytest.approx(2.0)


def test_eval_outside_strip():
    s = sym.certify_strip(sym.from_dict({0: 1.0, 1: 1e-8}), 0.1)
    with pytest.raises(OutsideStrip):
        s.eval(0.3 + 0.2j)


def test_winding_trivial_cases():
    assert sym.winding(sym.constant(1.0)) == 0
    assert sym.winding(sym.from_dict({1: 1.0})) == 1
    assert sym.winding(sym.from_dict({-2: 3.0})) == -2


def test_winding_ehm_examples():
    # roots of 0.1 z^2 + 0.2 z + 0.6 are -1 +- 2.2360i, both outside the disk
    assert sym.winding(ehm_hopping((0.6, 0.2, 0.1))) == -1
    # roots -0.42265, -1.57735: one inside
    assert sym.winding(ehm_hopping((0.2, 0.6, 0.3))) == 0


def test_winding_vanishing_symbol_rejected():
    with pytest.raises(VanishesOnTorus):
        sym.winding(ehm_hopping((0.5, 0.5, 0.5)))


def test_winding_random_polynomials_certified():
    rng = np.random.default_rng(42)
    done = 0
    while done < 200:
        deg = rng.integers(1, 7)
        coeffs = rng.normal(size=2 * deg + 1) + 1j * rng.normal(size=2 * deg + 1)
        s = sym.TorusSymbol(coeffs)
        try:
            w = sym.winding(s)
        except VanishesOnTorus:
            continue
        # invariance under positive scaling, negation under reversal
        assert sym.winding(s.scaled(3.7)) == w
        srev = sym.TorusSymbol(s.coeffs[::-1])
        assert sym.winding(srev) == -w
        done += 1


def test_winding_additivity():
    rng = np.random.default_rng(3)
    done = 0
    while done < 50:
        a = sym.TorusSymbol(rng.normal(size=5) + 1j * rng.normal(size=5))
        b = sym.TorusSymbol(rng.normal(size=7) + 1j * rng.normal(size=7))
        prod = np.convolve(a.coeffs, b.coeffs)
        s = sym.TorusSymbol(prod)
        try:
            wa, wb, wab = sym.winding(a), sym.winding(b), sym.winding(s)
        except VanishesOnTorus:
            continue
        assert wab == wa + wb
        done += 1


def test_zeros_two_on_circle():
    z = sym.zeros_on_torus(ehm_hopping((0.5, 0.5, 0.5)))
    assert len(z.roots) == 2
    assert len(z.on_circle) == 2
    expect = sorted(((1 / 3 - ALPHA / 2) % 1, (-1 / 3 - ALPHA / 2) % 1))
    assert z.torus_phases == pytest.approx(expect, abs=1e-10)


def test_zeros_single_on_circle():
    z = sym.zeros_on_torus(ehm_hopping((0.2, 0.5, 0.3)))
    assert len(z.on_circle) == 1
    assert z.torus_phases[0] == pytest.approx((0.5 - ALPHA / 2) % 1, abs=1e-10)


def test_zeros_none_on_circle():
    c = ehm_hopping((0.1, 0.5, 0.2))
    z = sym.zeros_on_torus(c)
    assert len(z.on_circle) == 0
    # quadratic-formula oracle for the root moduli of 0.2 z^2 + 0.5 z + 0.1
    disc = math.sqrt(0.25 - 4 * 0.2 * 0.1)
    expect = sorted(abs((-0.5 + s * disc) / 0.4) for s in (1, -1))
    assert sorted(np.abs(z.roots)) == pytest.approx(expect, rel=1e-10)


def test_zeros_reconstruction():
    rng = np.random.default_rng(11)
    for _ in range(20):
        coeffs = rng.normal(size=7) + 1j * rng.normal(size=7)
        s = sym.TorusSymbol(coeffs)
        z = sym.zeros_on_torus(s)
        poly = np.polynomial.polynomial.polyfromroots(z.roots) * s.coeffs[-1]
        assert np.max(np.abs(poly - s.coeffs)) <= 1e-8 * np.max(np.abs(s.coeffs))


def test_zeros_trims_degenerate_leading_coefficient():
    s = sym.from_dict({-1: 0.5, 0: 1.0, 1: 0.0})
    z = sym.zeros_on_torus(s)
    assert len(z.roots) == 1


def test_modulus_constant_and_unimodular():
    m = sym.modulus_symbol(sym.constant(-2.0), k_out=4)
    assert m.eval(0.3) == pytest.approx(2.0, abs=1e-12)
    m2 = sym.modulus_symbol(sym.from_dict({1: 1.0}), k_out=4)
    assert m2.eval(0.77) == pytest.approx(1.0, abs=1e-12)


def test_modulus_ehm_properties():
    c = ehm_hopping((0.1, 0.5, 0.2))
    m = sym.modulus_symbol(c, k_out=68)
    grid = np.arange(512) / 512
    vals = m.eval(grid)
    ref = np.abs(c.eval(grid))
    assert np.max(np.abs(vals - ref)) < 1e-10
    assert np.max(np.abs(vals.imag)) < 1e-12
    assert m.eval(-ALPHA / 2) == pytest.approx(0.8, abs=1e-10)
    assert float(np.min(vals.real)) >= float(np.min(ref)) - 1e-9
    # even around theta = -alpha/2
    t = np.arange(40) / 40
    left = m.eval((-ALPHA / 2 + t) % 1)
    right = m.eval((-ALPHA / 2 - t) % 1)
    assert np.max(np.abs(left - right)) < 1e-10


def test_modulus_vanishing_rejected():
    with pytest.raises(VanishesOnTorus):
        sym.modulus_symbol(ehm_hopping((0.5, 0.5, 0.5)), k_out=16)


def test_twist_identity_and_single_mode():
    c = ehm_hopping((0.6, 0.2, 0.1))
    assert sym.twist(c, 0) is c
    s = sym.from_dict({1: 1.0}, half_phase=True, alpha=ALPHA)
    t = sym.twist(s, 1)
    assert t.eval(0.4) == pytest.approx(1.0, abs=1e-14)


def test_twist_kills_winding():
    c = ehm_hopping((0.6, 0.2, 0.1))
    w = sym.winding(c)
    assert w == -1
    assert sym.winding(sym.twist(c, w)) == 0


def test_strip_certification_rejects_bad_declaration():
    s = sym.from_dict({k: math.exp(-0.5 * abs(k)) for k in range(-40, 41)})
    sym.certify_strip(s, 0.5 / (2 * math.pi) * 0.9)     # supported by decay
    with pytest.raises(StripNotCertified):
        sym.certify_strip(s, 2.0)


def test_conj_reversal_is_pointwise_conjugate():
    c = ehm_hopping((0.1, 0.5, 0.2))
    ct = c.conj_reversal()
    grid = np.arange(64) / 64
    assert np.max(np.abs(ct.eval(grid) - np.conj(c.eval(grid)))) < 1e-14


def test_translate():
    c = ehm_hopping((0.1, 0.5, 0.2))
    ct = c.translate(0.29)
    grid = np.arange(64) / 64
    assert np.max(np.abs(ct.eval(grid) - c.eval((grid + 0.29)))) < 1e-12


def test_log_symbol_roundtrip():
    c = ehm_hopping((0.1, 0.5, 0.2))
    ls = sym.log_symbol(c, k_out=48)
    grid = np.arange(256) / 256
    assert np.max(np.abs(np.exp(ls.eval(grid)) - c.eval(grid))) < 1e-10


def test_log_symbol_needs_zero_winding():
    with pytest.raises(ValidationError):
        sym.log_symbol(sym.from_dict({1: 1.0}), k_out=8)


def test_json_roundtrip():
    c = ehm_hopping((0.1, 0.5, 0.2))
    c2 = sym.TorusSymbol.from_json(c.to_json())
    assert np.allclose(c2.coeffs, c.coeffs)
    assert c2.half_phase and c2.alpha == ALPHA
