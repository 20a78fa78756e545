import numpy as np
import pytest

from stochconv.families import (
    HEAT_FREQUENCIES,
    HEAT_KINDS,
    SCALAR_MEMBERS,
    embedded_family,
    heat_family,
    heat_member,
    heat_profile,
    scalar_family,
    scalar_rule,
)
from stochconv.gammanorm import process_l2gamma_norm
from stochconv.model import lq_norm
from stochconv.simulate import TimeGrid, simulate_ensemble

GRID = TimeGrid.uniform(1.0, 32)


def test_scalar_rules():
    s = np.array([-2.0, -0.5, 0.5, 2.0])
    np.testing.assert_array_equal(scalar_rule("random-sign", GRID)(0, 0.0, s), [-1, -1, 1, 1])
    np.testing.assert_array_equal(scalar_rule("stop-loss", GRID)(0, 0.0, s), [0, 1, 1, 0])
    assert scalar_rule("oscillatory", GRID)(0, 1 / 12, s)[0] == pytest.approx(1.5)
    with pytest.raises(ValueError, match="unknown"):
        scalar_rule("martingale", GRID)


def test_rank_one_embedding_is_pathwise_scalar():
    # a flat unit vector in l^q carries the scalar integral without distortion
    scalar = scalar_family(GRID)
    for q in (2.0, 4.0):
        emb = embedded_family(GRID, 8, q)
        for name in SCALAR_MEMBERS:
            a = simulate_ensemble(None, scalar[name], 1000, 3, "ito", qs=(2.0,))
            b = simulate_ensemble(None, emb[f"{name}/rank-one"], 1000, 3, "ito", qs=(q,))
            np.testing.assert_allclose(b.sup(q), a.sup(2.0), rtol=1e-12)


def test_diagonal_embedding_has_independent_coordinates():
    G = embedded_family(GRID, 4, 2.0, ("random-sign",))["random-sign/diagonal"]
    ens = simulate_ensemble(None, G, 2000, 5, "ito", keep_paths=True)
    y = ens.paths[:, -1, :]
    c = np.corrcoef(y.T)
    assert np.max(np.abs(c - np.eye(4))) < 0.1


def test_heat_profile_is_unit_gamma_norm():
    for q in (2.0, 3.0):
        f = heat_profile(16, q)
        assert lq_norm(f, q) == pytest.approx(1.0, rel=1e-14)
        assert np.all(np.diff(f) < 0)


def test_heat_family_layout():
    fam = heat_family(GRID, 8)
    assert len(fam) == len(HEAT_KINDS) * len(HEAT_FREQUENCIES) == 20
    assert [fr for fr, _ in fam] == sorted(fr for fr, _ in fam)
    osc = heat_member("oscillatory", 2, GRID, 8)
    # sign flips do not change the deterministic norm: sqrt(T) for a unit profile
    assert process_l2gamma_norm(osc, 2.0) == pytest.approx(1.0, rel=1e-14)
    rv = heat_member("rank-varying", 1, GRID, 8)
    assert np.count_nonzero(rv.ops[0]) == 8 and np.count_nonzero(rv.ops[-1]) == 4


def test_heat_member_errors():
    with pytest.raises(ValueError, match="blocks"):
        heat_member("oscillatory", 3, GRID, 4)
    with pytest.raises(ValueError, match="unknown"):
        heat_member("constant", 1, GRID, 4)


def test_strategy_members_decide_on_block_starts():
    G = heat_member("random-sign", 4, GRID, 4)
    assert G.hold == 4 and G.is_strategy
