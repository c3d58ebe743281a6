import math

import numpy as np
import pytest

import helsonzeta as hz
from helsonzeta.meromorph import (AssemblyError, PoleProximityError, RadiusError,
                                  assemble, choose_exponent, decay_weight)

RNG = np.random.default_rng(987654321)


def targets_for(points_residues):
    entries = sorted(points_residues, key=lambda e: (abs(e[0].imag), e[0].real, e[0].imag))
    return tuple(hz.ResidueTarget(point=p, residue=r, order_index=i)
                 for i, (p, r) in enumerate(entries))


# -- choose_exponent ---------------------------------------------------------

def test_exponent_for_tight_budget():
    # 1.25^{2n} > 400 and 4^n > 100/3 force n = 14
    assert choose_exponent(0.75, 0.01) == 14


def test_exponent_depends_only_on_real_part():
    assert choose_exponent(0.75 + 100j, 0.01) == 14


def test_exponent_minimality_at_one():
    # (1-0.53)(2-0.53)^2 = 1.0156 > 1 and 12 > 1, so n = 1 suffices
    assert choose_exponent(0.53, 1.0) == 1


def test_exponent_rejects_out_of_strip():
    with pytest.raises(AssemblyError):
        choose_exponent(0.4, 0.01)
    with pytest.raises(AssemblyError):
        choose_exponent(1.0, 0.01)


def test_certified_bounds_hold_on_random_samples():
    # property (i): Re z > 1; property (iii): |z - z0| > 3, Re z > alpha
    z0 = complex(0.8, 1.5)
    C = 0.005
    n = choose_exponent(z0, C)
    atom = hz.PoleAtom(z0=z0, n=n, budget=C)

    z_right = 1.0 + RNG.uniform(1e-9, 40.0, 4000) + 1j * RNG.uniform(-200, 200, 4000)
    assert np.abs(atom.value(z_right)).max() < C

    theta = RNG.uniform(0, 2 * math.pi, 4000)
    rad = 3.0 + RNG.uniform(1e-9, 100.0, 4000)
    z_far = z0 + rad * np.exp(1j * theta)
    z_far = z_far[z_far.real > 21.0 / 40.0]
    assert np.abs(atom.value(z_far)).max() < C


# -- assemble ----------------------------------------------------------------

def test_single_target_budget():
    targets = targets_for([(complex(0.75, 0.0), -1)])
    model = assemble(targets)
    expect = math.exp(-0.75) / 0.5625 / 2.0
    assert model.atoms[0].budget == pytest.approx(expect, rel=1e-15)
    # that budget certifies at n = 6 (0.25 * 1.25^{2n} > 1/C first holds there)
    assert model.atoms[0].n == 6
    assert model.weights[0] == pytest.approx(-1.0 / (math.exp(-0.75) / 0.5625), rel=1e-15)


def test_empty_targets_rejected():
    with pytest.raises(AssemblyError):
        assemble(())


def test_conjugate_targets_get_conjugate_weights():
    targets = targets_for([(complex(0.8, 1.0), 2), (complex(0.8, -1.0), 2)])
    model = assemble(targets)
    w_minus, w_plus = model.weights  # order: im=-1 first
    assert w_plus == pytest.approx(np.conj(w_minus), rel=1e-15)
    assert model.atoms[0].n == model.atoms[1].n


# -- eval --------------------------------------------------------------------

def test_single_target_closed_form(single_target_model):
    model = single_target_model
    n = model.atoms[0].n
    assert n == 6
    g1_2 = math.exp(-2.0) / 4.0
    g1_075 = math.exp(-0.75) / 0.5625
    expect = g1_2 * (-1.0) * (1.0 / (1.25 * 2.25 ** (2 * n))) / g1_075
    got = model.value(2.0)
    assert got == pytest.approx(expect, rel=1e-13)


def test_real_model_real_on_real_axis(model_a_small):
    z = 1.7
    val = model_a_small.value(z)
    assert abs(val.imag) < 1e-14 * max(1.0, abs(val.real))


def test_growth_envelope_at_three(single_target_model):
    val = single_target_model.value(3.0)
    assert abs(val) * 9.0 <= math.exp(-1.0)


def test_envelope_bound_on_grid(model_b_small):
    # |g(z)| |z|^2 e^{Re z} = |atom sum| < 1 strictly on Re z >= 1
    z = (1.0 + RNG.uniform(0, 7, 3000)) + 1j * RNG.uniform(-1000, 1000, 3000)
    assert np.abs(model_b_small.atom_sum(z)).max() < 1.0


def test_conjugation_symmetry(model_a_small):
    z = complex(1.3, 2.7)
    a = model_a_small.value(z)
    b = model_a_small.value(z.conjugate())
    assert b == pytest.approx(np.conj(a), rel=1e-12)


def test_pole_proximity_signal(model_b_small):
    pole = model_b_small.pole_points[0]
    with pytest.raises(PoleProximityError):
        model_b_small.value(pole + 1e-13)


def test_domain_check(model_b_small):
    with pytest.raises(ValueError):
        model_b_small.value(0.5)


# -- contour residues --------------------------------------------------------

def test_residue_of_simple_zero_target(single_target_model):
    got = single_target_model.contour_residue(0.75, radius=0.01, nodes=256)
    assert abs(got - (-1.0)) < 1e-8


def test_residue_at_non_pole_is_zero(model_b_small):
    got = model_b_small.contour_residue(0.7 + 0.5j, radius=0.01, nodes=256)
    assert abs(got) < 1e-8


def test_residue_with_multiplicity():
    targets = targets_for([(complex(0.8, 1.0), 3)])
    model = assemble(targets)
    got = model.contour_residue(0.8 + 1j, radius=0.01, nodes=512)
    assert abs(got - 3.0) < 1e-8


def test_radius_validation(model_b_small):
    with pytest.raises(RadiusError):
        # half-distance to the strip boundary from Re = 0.6 is ~0.0375
        model_b_small.contour_residue(0.6 - 3j, radius=0.05)
    with pytest.raises(RadiusError):
        model_b_small.contour_residue(0.85 + 2j, radius=3.0)


def test_residue_quadrature_richardson(single_target_model):
    # trapezoid on circles converges geometrically; node doubling must agree
    a = single_target_model.contour_residue(0.75, radius=0.01, nodes=128)
    b = single_target_model.contour_residue(0.75, radius=0.01, nodes=256)
    assert abs(a - b) < 1e-10


def test_atoms_csv(tmp_path, model_b_small):
    path = tmp_path / "atoms.csv"
    model_b_small.write_atoms_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0].startswith("index,")
    assert len(lines) == 1 + len(model_b_small.atoms)
