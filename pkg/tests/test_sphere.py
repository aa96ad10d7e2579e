import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from poolmatch.metrics import MetricSpec
from poolmatch.sphere import (DegenerateUpdateError, ModeBank, SphereState, adaptive_assign,
                              check_mode_separation, ema_centroid_update, geodesic_distance,
                              geodesic_losses, multimodal_assign, multimodal_assign_batch,
                              normalize, read_embeddings, softplus_gain, vaca_reweight,
                              write_embeddings)

E1, E2, E3 = np.eye(3)

nonzero = arrays(float, 4, elements=st.floats(-10, 10)).filter(lambda v: np.linalg.norm(v) > 1e-3)
units = nonzero.map(normalize)


# geodesic distance -----------------------------------------------------------

def test_geodesic_examples():
    assert geodesic_distance(E1, E1) == 0.0
    assert geodesic_distance(E1, E2) == pytest.approx(math.pi / 2, abs=1e-15)
    assert geodesic_distance(E1, -E1) == pytest.approx(math.pi, abs=1e-15)
    with pytest.raises(ValueError):
        geodesic_distance(2 * E1, E2)


def test_geodesic_small_and_near_antipodal_angles():
    f = normalize([1.0, 1e-9, 0.0])
    assert geodesic_distance(f, f) == 0.0
    g = normalize([np.cos(1e-10), np.sin(1e-10), 0.0])
    assert geodesic_distance(E1, g) == pytest.approx(1e-10, rel=1e-6)
    assert geodesic_distance(E1, -g) == pytest.approx(math.pi - 1e-10, abs=1e-15)


@given(units, units)
def test_geodesic_matches_arccos(a, b):
    assert geodesic_distance(a, b) == pytest.approx(np.arccos(np.clip(a @ b, -1, 1)), abs=5e-8)


@given(units, units, units)
def test_geodesic_axioms(a, b, c):
    assert geodesic_distance(a, b) == geodesic_distance(b, a)
    assert geodesic_distance(a, a) == 0.0
    assert 0.0 <= geodesic_distance(a, b) <= math.pi
    assert geodesic_distance(a, c) <= geodesic_distance(a, b) + geodesic_distance(b, c) + 1e-9


# EMA update ------------------------------------------------------------------

def test_ema_examples():
    assert np.allclose(ema_centroid_update(E1, E1, 0.5), E1, atol=1e-15)
    assert np.allclose(ema_centroid_update(E1, E2, 1 - 1e-12), E1, atol=1e-9)
    assert np.allclose(ema_centroid_update(E1, E2, 0.5), [1 / math.sqrt(2), 1 / math.sqrt(2), 0],
                       atol=1e-15)


def test_ema_antipodal_is_degenerate():
    with pytest.raises(DegenerateUpdateError):
        ema_centroid_update(E1, -E1, 0.5)


def test_ema_rejects_bad_alpha():
    for alpha in (0.0, 1.0, -0.2):
        with pytest.raises(ValueError):
            ema_centroid_update(E1, E2, alpha)


@given(units, units, st.floats(0.01, 0.99))
def test_ema_closure(c, f, alpha):
    try:
        out = ema_centroid_update(c, f, alpha)
    except DegenerateUpdateError:
        return
    assert abs(np.linalg.norm(out) - 1.0) <= 1e-12


# adaptive assignment ---------------------------------------------------------

def _state():
    return SphereState(c_plus=E1.copy(), c_minus=E2.copy(), alpha=0.5)


def test_assign_examples():
    s = _state()
    near_plus = normalize([1.0, 0.2, 0.0])
    assert adaptive_assign(near_plus, "normal", s) == "update_plus"
    assert len(s.S_plus) == 1 and not np.array_equal(s.c_plus, E1)

    s = _state()
    assert adaptive_assign(normalize([0.2, 1.0, 0.0]), "normal", s) == "skip"
    assert np.array_equal(s.c_plus, E1) and s.S_plus == []

    s = _state()
    assert adaptive_assign(normalize([0.2, 1.0, 0.0]), "anomaly", s) == "update_minus"


def test_assign_tie_skips():
    s = _state()
    tie = normalize([1.0, 1.0, 0.0])
    for label in ("normal", "anomaly"):
        assert adaptive_assign(tie, label, s) == "skip"
    assert np.array_equal(s.c_plus, E1) and np.array_equal(s.c_minus, E2)


def test_assign_seeds_unset_centroid_with_first_feature():
    s = SphereState()
    f = normalize([0.3, -0.4, 0.5])
    assert adaptive_assign(f, "anomaly", s) == "update_minus"
    assert np.allclose(s.c_minus, f, atol=1e-15) and s.c_plus is None


def test_assign_rejects_bad_label():
    with pytest.raises(ValueError):
        adaptive_assign(E1, "unknown", _state())


@given(st.lists(st.tuples(units, st.sampled_from(["normal", "anomaly"])), min_size=1, max_size=30))
def test_assignment_safety(stream):
    # a centroid moves only for a feature whose own-label centroid is strictly nearer
    s = SphereState(c_plus=normalize([1.0, 0, 0, 0]), c_minus=normalize([0, 1.0, 0, 0]))
    for f, label in stream:
        before_p, before_m = s.c_plus.copy(), s.c_minus.copy()
        dp, dm = geodesic_distance(f, before_p), geodesic_distance(f, before_m)
        decision = adaptive_assign(f, label, s)
        if decision == "update_plus":
            assert label == "normal" and dp < dm
            assert np.array_equal(s.c_minus, before_m)
        elif decision == "update_minus":
            assert label == "anomaly" and dm < dp
            assert np.array_equal(s.c_plus, before_p)
        else:
            assert np.array_equal(s.c_plus, before_p) and np.array_equal(s.c_minus, before_m)
        for c in (s.c_plus, s.c_minus):
            assert abs(np.linalg.norm(c) - 1.0) <= 1e-12
    for g in s.S_plus + s.S_minus:
        assert abs(np.linalg.norm(g) - 1.0) <= 1e-9


# losses ----------------------------------------------------------------------

def test_loss_examples():
    s = SphereState(c_plus=E1, c_minus=E1, S_plus=[E1, E1], S_minus=[E1])
    out = geodesic_losses(s, 1.0, 2.0)
    assert out.L_intra == 0.0 and out.L_inter == 0.0 and out.L_geo == 0.0
    s = SphereState(c_plus=E1, c_minus=-E1, S_plus=[E1], S_minus=[-E1])
    assert geodesic_losses(s).L_inter == pytest.approx(-math.pi, abs=1e-15)
    s = SphereState(c_plus=E1, c_minus=E2, S_plus=[E2], S_minus=[])
    out = geodesic_losses(s, 0.5, 1.0)
    assert out.L_intra == pytest.approx((math.pi / 2) ** 2)
    assert out.L_geo == pytest.approx(0.5 * (math.pi / 2) ** 2 - math.pi / 2)
    assert any("S_minus" in n for n in out.notices)


# channel reweighting ---------------------------------------------------------

def _patches(seed, B=3, N=5, D=4):
    rng = np.random.default_rng(seed)
    return normalize(np.abs(rng.standard_normal((B, N, D))) + 0.1)


def test_vaca_gamma_zero_is_bit_neutral():
    P = _patches(0)
    T = normalize(np.random.default_rng(1).standard_normal((2, 4))).T
    out = vaca_reweight(P, T, gamma=0.0)
    assert out.reweighted.tobytes() == P.tobytes()
    assert np.array_equal(out.weights, np.ones(4))


def test_vaca_identical_classes_give_uniform_weights():
    P = _patches(2)
    t = normalize(np.ones(4))
    out = vaca_reweight(P, np.stack([t, t], axis=1), gamma=0.7)
    assert np.array_equal(out.delta, np.zeros(4))
    assert np.all(out.weights == out.weights[0])
    assert out.weights[0] == pytest.approx(1 + 0.7 * math.log(2))


def test_vaca_argmax_is_the_separating_channel():
    P = _patches(3)
    t0 = normalize([1.0, 1.0, 1.0, 1.0])
    t1 = normalize([1.0, 1.0, -1.0, 1.0])        # only channel 2 differs between classes
    out = vaca_reweight(P, np.stack([t0, t1], axis=1), gamma=1.0)
    assert int(np.argmax(out.weights)) == 2
    assert np.allclose(out.reweighted, P * out.weights)


def test_vaca_shape_errors():
    P = _patches(0)
    with pytest.raises(ValueError):
        vaca_reweight(P, np.ones((3, 2)))
    with pytest.raises(ValueError):
        vaca_reweight(P[0], np.ones((4, 2)))


@given(arrays(float, 6, elements=st.floats(0, 1)), st.integers(0, 5), st.floats(0, 1),
       st.floats(0, 3))
def test_gain_monotone_in_each_channel(delta, d, bump, gamma):
    g = softplus_gain()
    w = 1 + gamma * g(delta)
    bumped = delta.copy()
    bumped[d] += bump
    assert (1 + gamma * g(bumped))[d] >= w[d]


# multimodal assignment -------------------------------------------------------

def test_multimodal_truth_table():
    bank = ModeBank(centroids=((0.0, 0.0), (3.0, 0.0)), taus=(1.0, 1.0))
    assert multimodal_assign([0.2, 0.0], bank) == 0
    assert multimodal_assign([2.9, 0.1], bank) == 1
    assert multimodal_assign([10.0, 10.0], bank) is None
    overlap = ModeBank(centroids=((0.0, 0.0), (1.0, 0.0)), taus=(1.0, 1.0))
    assert multimodal_assign([0.5, 0.0], overlap) is None
    assert list(multimodal_assign_batch([[-0.5, 0.0], [0.5, 0.0]], overlap)) == [0, -1]


def test_mode_bank_validation():
    with pytest.raises(ValueError):
        ModeBank(centroids=(), taus=())
    with pytest.raises(ValueError):
        ModeBank(centroids=((0.0,),), taus=(1.0, 2.0))
    with pytest.raises(ValueError):
        ModeBank(centroids=((0.0,),), taus=(0.0,))


def test_separation_examples():
    modes = [(0.0, 0.0), (10.0, 0.0)]
    bank = ModeBank(centroids=((0.3, 0.0), (10.0, 0.4)), taus=(1.5, 1.5))
    assert check_mode_separation(modes, bank, R_max=1.0, eps_max=0.5)
    short = ModeBank(centroids=((0.3, 0.0), (10.0, 0.4)), taus=(1.2, 1.5))   # 1.2 < 1 + 0.3
    assert not check_mode_separation(modes, short, R_max=1.0, eps_max=0.5)
    same = ModeBank(centroids=((0.0, 0.0), (0.0, 0.0)), taus=(1.0, 1.0))
    assert not check_mode_separation([(0.0, 0.0), (0.0, 0.0)], same, 0.1, 0.0)
    # gap exactly 2 (tau_max + R_max + eps_max) = 2 (1 + 1 + 0) = 4: strict, so False
    edge = ModeBank(centroids=((0.0,), (4.0,)), taus=(1.0, 1.0))
    assert not check_mode_separation([(0.0,), (4.0,)], edge, R_max=1.0, eps_max=0.0)
    with pytest.raises(ValueError):
        check_mode_separation([(0.0,)], ModeBank(centroids=((0.0,),), taus=(1.0,)), 1.0, 0.0)


def test_separation_implies_no_cross_mode_assignment():
    rng = np.random.default_rng(17)
    mus = np.array([[0.0, 0.0, 0.0], [12.0, 0.0, 0.0], [0.0, 12.0, 0.0]])
    R, eps = 1.0, 0.4
    offs = rng.standard_normal(mus.shape)
    cents = mus + eps * 0.9 * offs / np.linalg.norm(offs, axis=1, keepdims=True)
    bank = ModeBank(centroids=tuple(map(tuple, cents)), taus=(1.5, 1.5, 1.5))
    assert check_mode_separation(mus, bank, R, eps)
    labels = rng.integers(0, 3, 100_000)
    u = rng.standard_normal((labels.size, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    X = mus[labels] + u * (R * rng.random(labels.size) ** (1 / 3))[:, None]
    got = multimodal_assign_batch(X, bank)
    assert np.sum((got >= 0) & (got != labels)) == 0


def test_multimodal_accepts_scaled_metric():
    bank = ModeBank(centroids=((0.0,), (5.0,)), taus=(1.0, 1.0), metric=MetricSpec.scaled(2.0))
    assert multimodal_assign([0.4], bank) == 0
    assert multimodal_assign([0.6], bank) is None


# embedding files -------------------------------------------------------------

def test_embedding_roundtrip(tmp_path):
    F = normalize(np.random.default_rng(5).standard_normal((7, 3)))
    for name in ("f.bin", "f.csv"):
        write_embeddings(tmp_path / name, F)
        G = read_embeddings(tmp_path / name)
        assert G.shape == (7, 3)
        assert np.allclose(G, F, atol=1e-6)
    raw = (tmp_path / "f.bin").read_bytes()
    assert raw[:8] == (7).to_bytes(4, "little") + (3).to_bytes(4, "little")


def test_embedding_truncated(tmp_path):
    write_embeddings(tmp_path / "f.bin", np.ones((4, 2)))
    raw = (tmp_path / "f.bin").read_bytes()
    (tmp_path / "short.bin").write_bytes(raw[:-4])
    with pytest.raises(ValueError):
        read_embeddings(tmp_path / "short.bin")
    (tmp_path / "tiny.bin").write_bytes(raw[:3])
    with pytest.raises(ValueError):
        read_embeddings(tmp_path / "tiny.bin")
