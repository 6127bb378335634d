"""Unit tests for the tangent generators, step alignment, and the two
loop-transport drivers."""
import math

import numpy as np
import pytest

from svdloop.continuation import (
    ContinuationOptions,
    GaugeMode,
    align_step,
    continue_loop,
    integrate_loop,
    read_trace_frames,
    tangent_generators,
    write_trace_frames,
)
from svdloop.errors import (
    ContinuationFailedError,
    DomainError,
    NearDegenerateError,
    StepTooLargeError,
)
from svdloop.linalg import SVDTriple, svd_point
from svdloop.model import circle_loop, eval_family, make_family

from conftest import random_unitary


def _identity_triple(sigma) -> SVDTriple:
    n = len(sigma)
    return SVDTriple(
        np.eye(n, dtype=complex), np.asarray(sigma, dtype=float), np.eye(n, dtype=complex)
    )


def test_generators_offdiagonal_hand_values():
    trip = _identity_triple([2.0, 1.0])
    a_dot = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    for gauge in GaugeMode:
        gen = tangent_generators(trip, a_dot, gauge)
        h, k = gen.left, gen.right
        assert abs(h[0, 1] - (-1.0 / 3.0)) <= 1e-15
        assert abs(h[1, 0] - (+1.0 / 3.0)) <= 1e-15
        assert abs(k[0, 1] - (-2.0 / 3.0)) <= 1e-15
        assert abs(k[1, 0] - (+2.0 / 3.0)) <= 1e-15
        # real diagonal of W leaves every gauge's diagonal at zero
        assert np.all(np.diag(h) == 0.0) and np.all(np.diag(k) == 0.0)


def test_generators_diagonal_split_by_gauge():
    # A(t) = diag(e^{2 pi i t}, 2) at t = 0: columns swap to keep sigma
    # descending, and the rotating entry lands in slot 2 with m = 2 pi.
    swap = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
    trip = SVDTriple(swap.copy(), np.array([2.0, 1.0]), swap.copy())
    a_dot = np.diag([2.0j * math.pi, 0.0])
    gen = tangent_generators(trip, a_dot, GaugeMode.JOINT)
    assert np.allclose(np.diag(gen.left), [0.0, 1.0j * math.pi], atol=1e-14)
    assert np.allclose(np.diag(gen.right), [0.0, -1.0j * math.pi], atol=1e-14)
    gen = tangent_generators(trip, a_dot, GaugeMode.U_MVD)
    assert np.all(np.diag(gen.left) == 0.0)
    assert np.allclose(np.diag(gen.right), [0.0, -2.0j * math.pi], atol=1e-14)
    gen = tangent_generators(trip, a_dot, GaugeMode.V_MVD)
    assert np.allclose(np.diag(gen.left), [0.0, 2.0j * math.pi], atol=1e-14)
    assert np.all(np.diag(gen.right) == 0.0)


def test_generators_satisfy_defining_equation():
    # W = H S + diag(Re W_jj) - S K must hold exactly for every gauge:
    # that identity is what makes U' = UH, V' = VK transport the SVD.
    rng = np.random.default_rng(2024)
    for _ in range(25):
        n = int(rng.integers(2, 7))
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        a_dot = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        trip = svd_point(a)
        w = trip.u.conj().T @ a_dot @ trip.v
        s = np.diag(trip.sigma)
        sdot = np.diag(np.real(np.diag(w)))
        for gauge in GaugeMode:
            gen = tangent_generators(trip, a_dot, gauge)
            h, k = gen.left, gen.right
            assert np.linalg.norm(h + h.conj().T) <= 1e-13 * (1.0 + np.linalg.norm(h))
            assert np.linalg.norm(k + k.conj().T) <= 1e-13 * (1.0 + np.linalg.norm(k))
            resid = np.linalg.norm(w - (h @ s + sdot - s @ k))
            assert resid <= 1e-12 * (1.0 + np.linalg.norm(w))


def test_generators_reject_near_degenerate():
    a_dot = np.zeros((2, 2), dtype=complex)
    with pytest.raises(NearDegenerateError) as info:
        tangent_generators(_identity_triple([1.0 + 5e-9, 1.0]), a_dot, GaugeMode.JOINT)
    assert info.value.index_pair == (0, 1)
    with pytest.raises(NearDegenerateError) as info:
        tangent_generators(_identity_triple([1.0, 5e-11]), a_dot, GaugeMode.JOINT)
    assert info.value.index_pair == (1, 1)


def test_align_step_undoes_column_phases():
    rng = np.random.default_rng(8)
    a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    prev = svd_point(a)
    factors = np.exp(1j * rng.uniform(-math.pi, math.pi, size=4))
    fresh = prev.with_column_phases(factors)
    for gauge in GaugeMode:
        aligned = align_step(prev, fresh, gauge)
        assert np.allclose(aligned.u, prev.u, atol=1e-14)
        assert np.allclose(aligned.v, prev.v, atol=1e-14)


def test_align_step_rejects_uncorrelated_columns():
    rng = np.random.default_rng(9)
    a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    prev = svd_point(a)
    permuted = SVDTriple(prev.u[:, ::-1].copy(), prev.sigma.copy(), prev.v[:, ::-1].copy())
    with pytest.raises(StepTooLargeError):
        align_step(prev, permuted, GaugeMode.JOINT)


def test_align_step_splits_one_sided_phase_evenly():
    # a u-only phase cannot be undone by a joint factor; the symmetric
    # gauge instead spreads it half to u and half (negated) to v
    rng = np.random.default_rng(10)
    a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    prev = svd_point(a)
    fresh = SVDTriple(prev.u * np.exp(0.1j), prev.sigma.copy(), prev.v.copy())
    aligned = align_step(prev, fresh, GaugeMode.JOINT)
    assert np.allclose(aligned.u, prev.u * np.exp(0.05j), atol=1e-13)
    assert np.allclose(aligned.v, prev.v * np.exp(-0.05j), atol=1e-13)


def test_align_step_factor_minimizes_joint_movement():
    fam_a = np.array([[1.0, 1.0], [0.0, 1.0]], dtype=complex)
    fam_b = np.array([[1.0, 1.05], [0.02j, 0.98]], dtype=complex)
    prev = svd_point(fam_a)
    fresh = svd_point(fam_b)
    aligned = align_step(prev, fresh, GaugeMode.JOINT)
    for j in range(2):
        best = np.linalg.norm(aligned.u[:, j] - prev.u[:, j]) ** 2
        best += np.linalg.norm(aligned.v[:, j] - prev.v[:, j]) ** 2
        for ang in np.linspace(-math.pi, math.pi, 256):
            f = np.exp(1j * ang)
            cost = np.linalg.norm(fresh.u[:, j] * f - prev.u[:, j]) ** 2
            cost += np.linalg.norm(fresh.v[:, j] * f - prev.v[:, j]) ** 2
            assert best <= cost + 1e-12


def test_continue_loop_constant_family_is_static():
    rng = np.random.default_rng(30)
    a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    fam = make_family(3, [(0, 0, a)])
    trace = continue_loop(fam, circle_loop((0.0, 0.0), 1.0, 64))
    assert trace.num_samples == 65
    assert trace.closed
    first = trace.triples[0]
    for trip in trace.triples[1:]:
        assert np.allclose(trip.u, first.u, atol=1e-15)
        assert np.allclose(trip.v, first.v, atol=1e-15)
        assert np.array_equal(trip.sigma, first.sigma)


def test_continue_loop_endpoints_and_diagnostics(triangular_family):
    trace = continue_loop(triangular_family, circle_loop((0.0, 0.0), 0.5, 128))
    assert trace.ts[0] == 0.0 and trace.ts[-1] == 1.0
    assert np.array_equal(trace.points[0], trace.points[-1])
    assert trace.min_correlation >= 0.99
    assert float(np.max(trace.gauge_residuals)) <= 1e-12
    assert trace.min_sigma > 0.3
    for k in range(trace.num_samples):
        a = eval_family(triangular_family, trace.points[k])
        scale = 1.0 + float(np.linalg.norm(a))
        assert trace.triples[k].reconstruction_error(a) <= 1e-12 * scale
    # csv shape: header plus one row per sample
    lines = trace.to_csv().strip().split("\n")
    assert lines[0] == "t,x,y,sigma_1,sigma_2"
    assert len(lines) == 1 + trace.num_samples


def test_continue_loop_start_frame_covariance(triangular_family):
    loop = circle_loop((0.0, 0.0), 1.0, 128)
    base = continue_loop(triangular_family, loop)
    rng = np.random.default_rng(13)
    phases = np.exp(1j * rng.uniform(-math.pi, math.pi, size=2))
    rotated = continue_loop(
        triangular_family, loop, start=base.triples[0].with_column_phases(phases)
    )
    # the whole trace is re-phased by the same constant factors
    for k in range(0, base.num_samples, 16):
        expect = base.triples[k].with_column_phases(phases)
        assert np.allclose(rotated.triples[k].u, expect.u, atol=1e-10)
        assert np.allclose(rotated.triples[k].v, expect.v, atol=1e-10)
    # so the endpoint holonomy is unchanged
    eu_base = base.triples[0].u.conj().T @ base.triples[-1].u
    eu_rot = rotated.triples[0].u.conj().T @ rotated.triples[-1].u
    assert np.allclose(np.diag(eu_base), np.diag(eu_rot), atol=1e-10)


def test_continue_loop_rejects_bad_start_frame(triangular_family):
    loop = circle_loop((0.0, 0.0), 1.0, 64)
    wrong = svd_point(eval_family(triangular_family, (0.3, 0.7)))
    with pytest.raises(DomainError, match="start frame"):
        continue_loop(triangular_family, loop, start=wrong)


def test_continue_loop_fails_through_rank_loss(triangular_family):
    # the loop passes through the origin, where sigma_min = 0
    loop = circle_loop((0.5, 0.0), 0.5, 64)
    with pytest.raises(ContinuationFailedError) as info:
        continue_loop(triangular_family, loop)
    assert info.value.reason == "step_underflow"
    assert 0.4 <= info.value.last_t < 0.5


def test_continue_loop_degenerate_start(triangular_family):
    # t = 0 sits at center + (radius, 0) = the origin, where sigma_min = 0
    loop = circle_loop((-1.0, 0.0), 1.0, 64)
    with pytest.raises(ContinuationFailedError) as info:
        continue_loop(triangular_family, loop)
    assert info.value.reason == "start_degenerate"
    assert info.value.last_t == 0.0


def test_hermitian_family_keeps_left_equal_right():
    rng = np.random.default_rng(17)
    q = random_unitary(rng, 2)
    terms = []
    for (jx, ky), diag in [((0, 0), (3.0, 1.0)), ((1, 0), (1.0, 0.0)), ((0, 1), (0.0, 0.5))]:
        terms.append((jx, ky, (q * np.array(diag)) @ q.conj().T))
    fam = make_family(2, terms)
    trace = continue_loop(fam, circle_loop((0.0, 0.0), 0.8, 128))
    # A(x, y) is Hermitian positive definite on this loop, so the left
    # and right singular vectors coincide and JOINT transport keeps it so
    for trip in trace.triples:
        assert np.linalg.norm(trip.u - trip.v) <= 1e-10


def test_integrate_loop_validation(triangular_family):
    with pytest.raises(DomainError):
        integrate_loop(triangular_family, circle_loop((0.0, 0.0), 1.0, 64), n_steps=4)


def test_integrate_loop_closes(triangular_family):
    trace = integrate_loop(triangular_family, circle_loop((0.0, 0.0), 1.0, 64), n_steps=256)
    assert trace.closed and trace.num_samples == 257
    assert trace.ts[-1] == 1.0
    # unitarity is restored after each step
    for trip in trace.triples[:: 32]:
        assert np.linalg.norm(trip.u.conj().T @ trip.u - np.eye(2)) <= 1e-12


def test_frames_roundtrip(tmp_path, triangular_family):
    trace = continue_loop(triangular_family, circle_loop((0.0, 0.0), 0.5, 64))
    path = tmp_path / "frames.bin"
    write_trace_frames(trace, path)
    assert path.stat().st_size == trace.num_samples * 2 * 4 * 16
    frames = read_trace_frames(path, 2)
    assert len(frames) == trace.num_samples
    for (u, v), trip in zip(frames, trace.triples):
        assert np.array_equal(u, trip.u)
        assert np.array_equal(v, trip.v)
    with pytest.raises(DomainError):
        read_trace_frames(path, 3)


def test_continuation_options_validation():
    with pytest.raises(DomainError):
        ContinuationOptions(corr_min=1.5)
    with pytest.raises(DomainError):
        ContinuationOptions(growth=0.5)
    with pytest.raises(DomainError):
        ContinuationOptions(dt_min=0.5, dt_max=0.25)
    with pytest.raises(DomainError):
        ContinuationOptions(gap_min=0.0)
