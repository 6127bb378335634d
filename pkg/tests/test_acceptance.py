"""Acceptance gate for the whole package.

Each test prints a [PASS]/[FAIL] tag with the checked claim so the suite
output doubles as a checklist.  Tolerances are pinned here on purpose;
loosening them is a contract change, not a cleanup.
"""
import json
import math
import time

import numpy as np

from svdloop import cli
from svdloop.continuation import GaugeMode, continue_loop, integrate_loop
from svdloop.detector import detect
from svdloop.embedding import (
    discr_limit_probe,
    embedding_discriminant,
    embedding_eigendecomposition,
    genericity_det,
    hermitian_embedding,
    sigma_limit_probe,
)
from svdloop.linalg import discriminant, herm_eig, svd_point
from svdloop.model import Rect, circle_loop, rect_loop
from svdloop.phase import Classification, accrued_phases, analyze_loop, principal_angle

from conftest import DEMO_DIR, beta1_closed_form, plant_rank_loss

# frozen from the first converged detection run on the 4x4 demo family
GOLDEN_POINT = (0.025743528657, 0.092738545299)

RADII = (0.25, 0.5, 1.0, 2.0)
CIRCLE_SAMPLES = 2048


def _report(name: str, failures: list) -> bool:
    ok = not failures
    print(f"[{'PASS' if ok else 'FAIL'}] {name}")
    for f in failures:
        print(f"         {f}")
    return ok


def test_closed_form_circle_phases(triangular_family):
    failures = []
    for r in RADII:
        t0 = time.perf_counter()
        trace = continue_loop(triangular_family, circle_loop((0.0, 0.0), r, CIRCLE_SAMPLES))
        report = accrued_phases(trace)
        elapsed = time.perf_counter() - t0
        b1 = beta1_closed_form(r)
        err1 = abs(report.beta[0] - principal_angle(b1))
        err2 = abs(report.beta[1] - principal_angle(math.pi - b1))
        if err1 > 1e-6:
            failures.append(f"r={r}: first-column phase off by {err1:.2e}")
        if err2 > 1e-6:
            failures.append(f"r={r}: second-column phase off by {err2:.2e}")
        if report.classification is not Classification.RANK_LOSS_INSIDE:
            failures.append(f"r={r}: classified {report.classification.name}")
        if elapsed >= 5.0:
            failures.append(f"r={r}: took {elapsed:.2f}s (budget 5s)")
    assert _report("closed-form circle phases at four radii", failures), failures


def test_gauge_contrast_between_sided_transports(triangular_family):
    failures = []
    for r in RADII:
        target = 2.0 * beta1_closed_form(r)
        trace = continue_loop(
            triangular_family, circle_loop((0.0, 0.0), r, 4096), GaugeMode.U_MVD
        )
        report = accrued_phases(trace)
        err1 = abs(principal_angle(report.beta[0] - target))
        sym = abs(principal_angle(report.beta[0] + report.beta[1]))
        if err1 > 1e-6:
            failures.append(f"left-sided r={r}: phase vs doubled closed form off {err1:.2e}")
        if sym > 1e-6:
            failures.append(f"left-sided r={r}: columns not opposite, off {sym:.2e}")
    for r in RADII:
        trace = continue_loop(
            triangular_family, circle_loop((0.0, 0.0), r, CIRCLE_SAMPLES), GaugeMode.V_MVD
        )
        report = accrued_phases(trace)
        worst = float(np.max(np.abs(report.beta)))
        if worst > 1e-6:
            failures.append(f"right-sided r={r}: nonzero phase {worst:.2e}")
    assert _report("one-sided gauges double or cancel the phases", failures), failures


def test_demo4x4_single_point_and_printed_sums(affine4_family, tmp_path, capsys):
    failures = []
    fam_path = str(DEMO_DIR / "family_affine4.json")
    result = detect(affine4_family, Rect(-1.0, 1.0, -1.0, 1.0))
    if len(result.points) != 1:
        failures.append(f"expected exactly 1 rank-loss point, found {len(result.points)}")
    else:
        pt = result.points[0]
        dist = math.dist(pt.location, GOLDEN_POINT)
        if dist > 1e-6:
            failures.append(f"located point drifted {dist:.2e} from the frozen value")
        if not pt.genericity.regular:
            failures.append("the located point is not a regular determinant zero")

    loops = {
        "enclosing": (
            {"kind": "circle", "center": list(GOLDEN_POINT), "radius": 0.35,
             "samples": CIRCLE_SAMPLES},
            "+3.1416",
        ),
        "disjoint": (
            {"kind": "circle", "center": [0.58, 0.09], "radius": 0.15,
             "samples": CIRCLE_SAMPLES},
            "+0.0000",
        ),
    }
    for label, (doc, want) in loops.items():
        loop_path = tmp_path / f"{label}.json"
        loop_path.write_text(json.dumps(doc))
        rc = cli.main(
            [
                "loop", "--family", fam_path, "--loop", str(loop_path),
                "--out", str(tmp_path / label), "--no-plots",
            ]
        )
        out = capsys.readouterr().out
        if rc != 0:
            failures.append(f"{label} loop exited {rc}")
            continue
        sum_line = next((l for l in out.split("\n") if "sum" in l), "")
        if not sum_line.endswith(want):
            failures.append(f"{label} loop printed {sum_line.strip()!r}, wanted suffix {want!r}")
    assert _report("4x4 demo: one detected point, printed sums pi and 0", failures), failures


def test_embedding_identity_battery():
    failures = []
    rng = np.random.default_rng(20240815)
    worst_spec = worst_block = worst_discr = 0.0
    for _ in range(500):
        for _attempt in range(64):
            n = int(rng.integers(2, 9))
            a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            nrm = float(np.linalg.norm(a))
            if nrm > 3.0:
                a *= 3.0 / nrm
            eps = float(rng.uniform(-2.0, 2.0))
            triple = svd_point(a)
            s_plus = np.hypot(triple.sigma, eps)
            expected = np.concatenate([s_plus, -s_plus[::-1]])
            # the closed forms assume a simple nonzero spectrum
            gap = float(np.min(expected[:-1] - expected[1:]))
            if triple.sigma[-1] >= 1e-6 and gap >= 1e-6:
                break
        m = hermitian_embedding(a, eps)
        lam = herm_eig(m).lam
        spec_err = float(np.max(np.abs(lam - expected)))
        worst_spec = max(worst_spec, spec_err)

        emb = embedding_eigendecomposition(triple, eps)
        diag = np.concatenate([emb.s_plus, -emb.s_plus])
        block_err = float(np.linalg.norm(emb.w.conj().T @ m @ emb.w - np.diag(diag)))
        mnorm = float(np.linalg.norm(m))
        worst_block = max(worst_block, block_err / mnorm)

        d_direct = discriminant(lam)
        d_closed = embedding_discriminant(triple.sigma, eps)
        rel = abs(d_direct - d_closed) / max(abs(d_closed), 1e-300)
        worst_discr = max(worst_discr, rel)

    if worst_spec > 1e-10:
        failures.append(f"worst eigenvalue mismatch {worst_spec:.2e} > 1e-10")
    if worst_block > 1e-10:
        failures.append(f"worst relative block residual {worst_block:.2e} > 1e-10")
    if worst_discr > 1e-8:
        failures.append(f"worst relative discriminant mismatch {worst_discr:.2e} > 1e-8")
    assert _report("embedding identities over 500 random draws", failures), failures


def test_manufactured_families_quantize_and_localize():
    failures = []
    rng = np.random.default_rng(424242)
    for trial in range(50):
        n = 2 if trial % 10 < 7 else 3
        root = tuple(rng.uniform(-0.4, 0.4, size=2))
        fam = plant_rank_loss(rng, n, root)

        rho = float(rng.uniform(0.4, 0.9))
        off_r = 0.3 * rho * float(rng.uniform(0.0, 1.0))
        ang = float(rng.uniform(0.0, 2.0 * math.pi))
        center = (root[0] + off_r * math.cos(ang), root[1] + off_r * math.sin(ang))
        _, rep = analyze_loop(fam, circle_loop(center, rho, 512))
        if rep.classification is not Classification.RANK_LOSS_INSIDE:
            failures.append(f"trial {trial}: enclosing loop gave {rep.classification.name}")
        elif rep.residual > 1e-3:
            failures.append(f"trial {trial}: enclosing residual {rep.residual:.2e}")

        rho2 = float(rng.uniform(0.15, 0.3))
        dist = rho2 + float(rng.uniform(0.2, 0.4))
        ang2 = float(rng.uniform(0.0, 2.0 * math.pi))
        center2 = (root[0] + dist * math.cos(ang2), root[1] + dist * math.sin(ang2))
        _, rep2 = analyze_loop(fam, circle_loop(center2, rho2, 512))
        if rep2.classification is not Classification.NO_RANK_LOSS:
            failures.append(f"trial {trial}: disjoint loop gave {rep2.classification.name}")
        elif rep2.residual > 1e-3:
            failures.append(f"trial {trial}: disjoint residual {rep2.residual:.2e}")

        jx, jy = rng.uniform(-0.05, 0.05, size=2)
        box = Rect(root[0] - 0.15 + jx, root[0] + 0.15 + jx,
                   root[1] - 0.15 + jy, root[1] + 0.15 + jy)
        det_result = detect(fam, box)
        if len(det_result.points) != 1:
            failures.append(f"trial {trial}: detector found {len(det_result.points)} points")
            continue
        pt = det_result.points[0]
        seed_err = math.dist(pt.seed_center, root)
        loc_err = math.dist(pt.location, root)
        if seed_err > 1e-3:
            failures.append(f"trial {trial}: pre-polish seed off by {seed_err:.2e}")
        if loc_err > 1e-8:
            failures.append(f"trial {trial}: polished location off by {loc_err:.2e}")
    assert _report("50 planted rank-loss families: loops quantize, detector localizes",
                   failures), failures


def test_genericity_routes_agree(triangular_family, squared_family):
    failures = []
    gen = genericity_det(triangular_family, (0.0, 0.0))
    sig = sigma_limit_probe(triangular_family, (0.0, 0.0))
    dis = discr_limit_probe(triangular_family, (0.0, 0.0))
    if not (gen.regular and sig.verdict == "positive" and dis.verdict == "positive"):
        failures.append(
            f"generic point disagreement: regular={gen.regular}, "
            f"sigma={sig.verdict}, discr={dis.verdict}"
        )
    gen2 = genericity_det(squared_family, (0.0, 0.0))
    sig2 = sigma_limit_probe(squared_family, (0.0, 0.0))
    dis2 = discr_limit_probe(squared_family, (0.0, 0.0))
    if gen2.regular or sig2.verdict != "degenerate" or dis2.verdict != "degenerate":
        failures.append(
            f"non-generic point disagreement: regular={gen2.regular}, "
            f"sigma={sig2.verdict}, discr={dis2.verdict}"
        )
    assert _report("three genericity routes agree on both demo points", failures), failures


def test_joint_traces_keep_left_right_phases_equal(triangular_family, affine4_family):
    failures = []
    rng = np.random.default_rng(31415)
    fam_m = plant_rank_loss(rng, 3, (0.1, -0.2))
    cases = [
        ("triangular r=0.5", triangular_family, circle_loop((0.0, 0.0), 0.5, 512)),
        ("triangular r=1", triangular_family, circle_loop((0.0, 0.0), 1.0, 512)),
        ("triangular r=2", triangular_family, circle_loop((0.0, 0.0), 2.0, 512)),
        ("triangular rect", triangular_family, rect_loop(Rect(-0.7, 0.7, -0.6, 0.65), 256)),
        ("4x4 enclosing", affine4_family, circle_loop(GOLDEN_POINT, 0.35, 512)),
        ("4x4 disjoint", affine4_family, circle_loop((0.58, 0.09), 0.15, 512)),
        ("planted n=3 enclosing", fam_m, circle_loop((0.1, -0.2), 0.5, 512)),
        ("planted n=3 disjoint", fam_m, circle_loop((1.0, -0.2), 0.25, 512)),
    ]
    for label, fam, loop in cases:
        trace = continue_loop(fam, loop)
        report = accrued_phases(trace)
        mismatch = report.diagnostics["uv_diag_mismatch"]
        if mismatch > 1e-8:
            failures.append(f"{label}: left/right phase mismatch {mismatch:.2e}")
    assert _report("left and right holonomy diagonals agree on all JOINT traces",
                   failures), failures


def test_discrete_stepper_matches_dae_integration(triangular_family):
    failures = []
    loop = circle_loop((0.0, 0.0), 1.0, CIRCLE_SAMPLES)
    rep_disc = accrued_phases(continue_loop(triangular_family, loop))
    rep_dae = accrued_phases(integrate_loop(triangular_family, loop, n_steps=4000))
    for j in range(2):
        diff = abs(principal_angle(rep_disc.beta[j] - rep_dae.beta[j]))
        if diff > 1e-4:
            failures.append(f"column {j + 1}: stepper vs integrator differ {diff:.2e}")
    assert _report("discrete stepper agrees with the DAE integrator", failures), failures
