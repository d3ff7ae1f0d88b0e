import numpy as np
import pytest

from kanemele.errors import NoGap
from kanemele.geometry import lattice_vectors
from kanemele.kubo import spin_conductivity_kubo
from kanemele.model import ModelParams
from kanemele.numerics import QuadratureSpec
from kanemele.realspace import (
    FlakeSpectrum,
    build_flake,
    central_cells,
    flake_response,
    flake_spin_conductivity,
    spin_block_conductivity,
    spin_operator,
    spin_torque,
    spin_torque_expectation,
)
from kanemele.spectrum import bands

QUANTUM = 1 / (2 * np.pi)


@pytest.fixture(scope="module")
def rashba_flake():
    p = ModelParams(lambdaSO=0.3, w=0.1, lambdaR=0.2, r=0.5)
    flake, H = build_flake(p, 6)
    return p, flake, H


def test_dimensions(rashba_flake):
    _, flake, H = rashba_flake
    assert flake.dim == 4 * 36 == H.shape[0]
    assert len(flake.sites) == 72


def test_hermitian(rashba_flake):
    _, _, H = rashba_flake
    assert np.max(np.abs(H - H.conj().T)) < 1e-13


def test_hops_are_lattice_vectors(rashba_flake):
    _, flake, H = rashba_flake
    lat = lattice_vectors()
    allowed = np.concatenate([lat.d, -lat.d, lat.a, -lat.a, np.zeros((1, 2))])
    pos = flake.positions()
    rows, cols = np.nonzero(np.abs(H) > 1e-14)
    diff = pos[rows] - pos[cols]
    dist = np.min(np.linalg.norm(diff[:, None, :] - allowed[None], axis=-1), axis=1)
    assert dist.max() < 1e-9


def test_spin_conserved_without_rashba():
    flake, H = build_flake(ModelParams(lambdaSO=0.3, w=0.2), 6)
    s = spin_operator(flake)
    assert np.max(np.abs(H @ s - s @ H)) < 1e-13


def test_spectrum_within_bulk_band_range():
    p = ModelParams(lambdaSO=0.3, w=0.1, lambdaR=0.2, r=0.5)
    flake, H = build_flake(p, 10)
    e = np.linalg.eigvalsh(H)
    k = np.random.default_rng(0).uniform(-4, 4, size=(4000, 2))
    bulk = bands(p, k)
    assert e.min() >= bulk[:, 0].min() - 0.5 and e.max() <= bulk[:, 3].max() + 0.5


def test_response_solves_liouville_equation(rashba_flake):
    p, flake, H = rashba_flake
    sp = FlakeSpectrum(H, p.mu)
    P = sp.projector()
    Q = np.eye(flake.dim) - P
    for j in range(2):
        lj = flake_response(flake, H, p.mu, j, spectrum=sp)
        x = np.diag(flake.positions()[:, j])
        c = x @ P - P @ x
        off = P @ c @ Q + Q @ c @ P
        assert np.max(np.abs(H @ lj - lj @ H - off)) < 1e-10
        assert np.max(np.abs(P @ lj @ P)) < 1e-12
        assert np.max(np.abs(Q @ lj @ Q)) < 1e-12


def test_regularised_response_is_first_order(rashba_flake):
    p, flake, H = rashba_flake
    base = flake_response(flake, H, p.mu, 0)
    d1 = np.linalg.norm(flake_response(flake, H, p.mu, 0, eta=1e-3) - base)
    d2 = np.linalg.norm(flake_response(flake, H, p.mu, 0, eta=5e-4) - base)
    assert 1.8 < d1 / d2 < 2.2


def test_no_gap_raises(rashba_flake):
    _, flake, H = rashba_flake
    e = np.linalg.eigvalsh(H)
    with pytest.raises(NoGap):
        flake_spin_conductivity(flake, H, e[10])


def test_torque_vanishes_without_rashba():
    flake, H = build_flake(ModelParams(lambdaSO=0.3), 8)
    assert np.max(np.abs(spin_torque(flake, H))) == 0
    assert abs(spin_torque_expectation(flake, H, 0.0, 0)) < 1e-13


def test_torque_decays_with_size():
    p = ModelParams(lambdaSO=0.3, lambdaR=0.1)
    mags = []
    for L in (8, 12, 16):
        flake, H = build_flake(p, L)
        sp = FlakeSpectrum(H, 0.0)
        mags.append(max(abs(spin_torque_expectation(flake, H, 0.0, 1, c, spectrum=sp)) for c in central_cells(flake)))
    assert mags[0] > mags[1] > mags[2] > 0


def test_torque_mirror_pairs():
    # the rhombic flake maps the centre cells onto each other in pairs with opposite torque
    p = ModelParams(lambdaSO=0.3, lambdaR=0.1)
    flake, H = build_flake(p, 10)
    sp = FlakeSpectrum(H, 0.0)
    for j in range(2):
        v = np.sort([spin_torque_expectation(flake, H, 0.0, j, c, spectrum=sp) for c in central_cells(flake)])
        assert np.max(np.abs(v + v[::-1])) < 1e-8 * np.max(np.abs(v))


def test_proper_minus_conventional_is_torque_moment():
    p = ModelParams(lambdaSO=0.3, lambdaR=0.1)
    flake, H = build_flake(p, 8)
    res = flake_spin_conductivity(flake, H, 0.0)
    sp = FlakeSpectrum(H, 0.0)
    tz = spin_torque(flake, H)
    x = flake.positions()
    mask = flake.cell_mask(flake.center_cells())
    area = lattice_vectors().cellArea * len(flake.center_cells())
    for i in range(2):
        sym = 0.5 * (x[:, None, i] * tz + tz * x[None, :, i])
        for j in range(2):
            lj = flake_response(flake, H, 0.0, j, spectrum=sp)
            moment = np.einsum("ab,ba,a->", sym, lj, mask).real / area
            assert abs(res.extras["proper_minus_conventional"][i, j] - moment) < 1e-12


def test_spin_blocks_add_up():
    p = ModelParams(lambdaSO=0.3, w=0.1)
    flake, H = build_flake(p, 8)
    total = flake_spin_conductivity(flake, H, 0.0).sigma
    up, down = spin_block_conductivity(flake, H, 0.0)
    assert np.max(np.abs(total - 0.5 * (up - down))) < 1e-12


def test_trivial_flake_is_small():
    flake, H = build_flake(ModelParams(lambdaSO=0.3, w=0.6), 12)
    assert abs(flake_spin_conductivity(flake, H, 0.0).sigma[0, 1]) < 0.15 * QUANTUM


def test_flake_approaches_bulk():
    sets = [
        ModelParams(lambdaSO=0.3),
        ModelParams(lambdaSO=0.3, w=0.1, lambdaR=0.1),
        ModelParams(lambdaSO=0.5, w=0.2, lambdaR=0.2, r=0.5),
    ]
    devs = []
    for p in sets:
        bulk = spin_conductivity_kubo(p, QuadratureSpec(bz_grid=96)).sigma[0, 1]
        row = []
        for L in (8, 12, 16):
            flake, H = build_flake(p, L)
            row.append(abs(flake_spin_conductivity(flake, H, p.mu).sigma[0, 1] - bulk))
        devs.append(row)
    med = np.median(np.array(devs), axis=0)
    assert med[0] > med[1] > med[2]


def test_size_bounds():
    with pytest.raises(ValueError):
        build_flake(ModelParams(), 3)
    with pytest.raises(ValueError):
        build_flake(ModelParams(), 33)
