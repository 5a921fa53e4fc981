"""Self-contained property checks behind the ``verify`` command.

Every check generates its own inputs from a seed, compares against an
independent oracle (closed form, brute-force loop, or cross-format
fixture), and reports a :class:`PropertyResult` whose detail fields are
fully deterministic — no timestamps, no paths — so that two runs with
the same seed render byte-identical reports.
"""

from __future__ import annotations

import json
import math
import tempfile
from dataclasses import dataclass, field

import numpy as np

from . import depth_io, ply
from .camera import CameraIntrinsics, backproject, estimate_intrinsics_from_fov, project
from .cloud import PseudoPointCloud, synth_random, synth_wedge
from .depth import disparity_from_metric, normalize, pipeline_relative_to_dr, reciprocal_depth
from .encoder import EncoderParams, encode, encode_backward, init_params
from .fusion import (
    ALL_STRATEGIES,
    FusionParams,
    Strategy,
    fuse,
    fuse_add,
    fuse_concat,
    fuse_cross_attention,
    fuse_self_attention,
    init_fusion_params,
)
from .policy_loss import Action, BCE_EPS, Trajectory, dataset_loss, step_loss


def _f(x: float) -> str:
    return f"{x:.6e}"


@dataclass(frozen=True)
class PropertyResult:
    name: str
    passed: bool
    details: tuple[tuple[str, str], ...] = field(default=())


# ---------------------------------------------------------------------------
# affine invariance of normalization

AFFINE_SCENES = 50
AFFINE_SCALES = (0.1, 1.0, 10.0)
AFFINE_SHIFTS = (-5.0, 0.0, 5.0)
AFFINE_TOL = 1e-9


def check_affine(seed: int, break_shift: bool = False) -> PropertyResult:
    """Scale/shift of simulated disparity must not move the normalized map.

    ``break_shift`` injects the classic bug — adding the shift *after*
    normalizing — as a negative control; the check must then fail.
    """
    rng = np.random.default_rng(seed)
    max_dev = 0.0
    for _ in range(AFFINE_SCENES):
        h = int(rng.integers(4, 25))
        w = int(rng.integers(4, 25))
        scene = synth_random(h, w, rng)
        reference = normalize(disparity_from_metric(scene, 1.0, 0.0)).values
        for s in AFFINE_SCALES:
            for t in AFFINE_SHIFTS:
                if break_shift:
                    candidate = normalize(disparity_from_metric(scene, s, 0.0)).values + t
                else:
                    candidate = normalize(disparity_from_metric(scene, s, t)).values
                max_dev = max(max_dev, float(np.abs(candidate - reference).max()))
    return PropertyResult(
        name="affine",
        passed=max_dev <= AFFINE_TOL,
        details=(
            ("scenes", str(AFFINE_SCENES)),
            ("grid", str(len(AFFINE_SCALES) * len(AFFINE_SHIFTS))),
            ("max_dev", _f(max_dev)),
            ("tol", _f(AFFINE_TOL)),
        ),
    )


# ---------------------------------------------------------------------------
# shift distortion of the naive reciprocal

SHIFT_T = 2.0
SHIFT_RATIO_MIN = 1e-3
SHIFT_PIPELINE_TOL = 1e-9


def check_shift(seed: int, break_shift: bool = False) -> PropertyResult:
    """A depth-ramp scene exposes the flaw in inverting predictions directly.

    Adding a shift to the predicted disparity bends the naive-reciprocal
    cloud (adjacent-step distance ratios change measurably) while the
    normalize-then-invert pipeline is unaffected.
    """
    del seed, break_shift  # closed-form scene; nothing random to seed
    wedge = synth_wedge(6, 8, 2.0, 6.0)
    intr = estimate_intrinsics_from_fov(8, 6, 60.0)
    pred0 = disparity_from_metric(wedge, 1.0, 0.0)
    pred_t = disparity_from_metric(wedge, 1.0, SHIFT_T)

    def _row_steps(cloud_points: np.ndarray) -> np.ndarray:
        row = cloud_points[0]
        return np.linalg.norm(row[1:] - row[:-1], axis=1)

    naive0 = _row_steps(backproject(reciprocal_depth(pred0).values, intr))
    naive_t = _row_steps(backproject(reciprocal_depth(pred_t).values, intr))
    ratios0 = naive0 / naive0[0]
    ratios_t = naive_t / naive_t[0]
    ratio_change = float(np.abs(ratios_t - ratios0).max() / np.abs(ratios0).max())

    pipe0 = backproject(pipeline_relative_to_dr(pred0).values, intr)
    pipe_t = backproject(pipeline_relative_to_dr(pred_t).values, intr)
    pipe_dev = float(np.abs(pipe0 - pipe_t).max())

    return PropertyResult(
        name="shift",
        passed=(ratio_change > SHIFT_RATIO_MIN) and (pipe_dev <= SHIFT_PIPELINE_TOL),
        details=(
            ("shift", _f(SHIFT_T)),
            ("naive_ratio_change", _f(ratio_change)),
            ("ratio_change_min", _f(SHIFT_RATIO_MIN)),
            ("pipeline_dev", _f(pipe_dev)),
            ("pipeline_tol", _f(SHIFT_PIPELINE_TOL)),
        ),
    )


# ---------------------------------------------------------------------------
# projection round trip

ROUNDTRIP_PAIRS = 100
ROUNDTRIP_TOL = 1e-9


def check_roundtrip(seed: int, break_shift: bool = False) -> PropertyResult:
    """project(backproject(d)) must return every pixel to itself."""
    del break_shift
    rng = np.random.default_rng(seed)
    max_dev = 0.0
    for _ in range(ROUNDTRIP_PAIRS):
        h = int(rng.integers(2, 17))
        w = int(rng.integers(2, 17))
        intr = CameraIntrinsics(
            fx=float(rng.uniform(100.0, 2000.0)),
            fy=float(rng.uniform(100.0, 2000.0)),
            cx=float(rng.uniform(0.25, 0.75) * (w - 1)),
            cy=float(rng.uniform(0.25, 0.75) * (h - 1)),
        )
        d = rng.uniform(0.1, 50.0, size=(h, w))
        points = backproject(d, intr)
        uv = project(points, intr)
        uu, vv = np.meshgrid(np.arange(w, dtype=np.float64),
                             np.arange(h, dtype=np.float64))
        dev_u = float(np.abs(uv[:, :, 0] - uu).max())
        dev_v = float(np.abs(uv[:, :, 1] - vv).max())
        dev_z = float(np.abs(points[:, :, 2] - d).max())
        max_dev = max(max_dev, dev_u, dev_v, dev_z)
    return PropertyResult(
        name="roundtrip",
        passed=max_dev <= ROUNDTRIP_TOL,
        details=(
            ("pairs", str(ROUNDTRIP_PAIRS)),
            ("max_dev", _f(max_dev)),
            ("tol", _f(ROUNDTRIP_TOL)),
        ),
    )


# ---------------------------------------------------------------------------
# scale equivariance and grid preservation

SCALE_FACTORS = (0.5, 2.0)
SCALE_TOL = 1e-12
GRID_TOL = 1e-9


def check_scale(seed: int, break_shift: bool = False) -> PropertyResult:
    """backproject(a*d) == a*backproject(d), and the grid stays aligned."""
    del break_shift
    rng = np.random.default_rng(seed)
    scene = synth_random(12, 9, rng)
    intr = estimate_intrinsics_from_fov(9, 12, 70.0)
    base = backproject(scene.values, intr)
    max_scale_dev = 0.0
    for alpha in SCALE_FACTORS:
        scaled = backproject(alpha * scene.values, intr)
        max_scale_dev = max(max_scale_dev, float(np.abs(scaled - alpha * base).max()))

    uv = project(base, intr)
    uu, vv = np.meshgrid(np.arange(9, dtype=np.float64),
                         np.arange(12, dtype=np.float64))
    grid_dev = max(
        float(np.abs(uv[:, :, 0] - uu).max()),
        float(np.abs(uv[:, :, 1] - vv).max()),
    )
    depth_dev = float(np.abs(base[:, :, 2] - scene.values).max())
    return PropertyResult(
        name="scale",
        passed=(max_scale_dev <= SCALE_TOL) and (grid_dev <= GRID_TOL)
        and (depth_dev == 0.0),
        details=(
            ("factors", "0.5,2.0"),
            ("max_scale_dev", _f(max_scale_dev)),
            ("scale_tol", _f(SCALE_TOL)),
            ("grid_dev", _f(grid_dev)),
            ("grid_tol", _f(GRID_TOL)),
        ),
    )


# ---------------------------------------------------------------------------
# encoder gradient check

GRADCHECK_H = 1e-4
GRADCHECK_TOL = 1e-4
GRADCHECK_MIN_COORDS = 100
_GRADCHECK_ZERO = 1e-7


def check_gradcheck(seed: int, break_shift: bool = False) -> PropertyResult:
    """Analytic encoder gradients vs central finite differences.

    Scalar objective: sum(encode(x) * R) for a fixed random R, so the
    upstream gradient is exactly R.  Coordinates are sampled from the
    input and from every parameter tensor.
    """
    del break_shift
    rng = np.random.default_rng(seed)
    params = init_params(out_channels=8, seed=seed + 1)
    x = rng.standard_normal((3, 8, 8))
    r = rng.standard_normal(encode(x, params).shape)
    grads = encode_backward(x, params, r)

    tensors = {
        "x": (x, grads.dx),
        "w1": (params.w1, grads.dw1),
        "b1": (params.b1, grads.db1),
        "w2": (params.w2, grads.dw2),
        "b2": (params.b2, grads.db2),
    }
    plan = {"x": 40, "w1": 25, "b1": 8, "w2": 25, "b2": 8}

    def _loss(x_now: np.ndarray, p_now: dict[str, np.ndarray]) -> float:
        pp = EncoderParams(w1=p_now["w1"], b1=p_now["b1"],
                           w2=p_now["w2"], b2=p_now["b2"])
        return float(np.sum(encode(x_now, pp) * r))

    n_coords = 0
    max_rel = 0.0
    for name, n_samples in plan.items():
        value, analytic = tensors[name]
        flat_size = value.size
        idx = rng.choice(flat_size, size=min(n_samples, flat_size), replace=False)
        for flat in idx:
            coords = np.unravel_index(int(flat), value.shape)
            base_arrays = {
                "x": x.copy(), "w1": params.w1.copy(), "b1": params.b1.copy(),
                "w2": params.w2.copy(), "b2": params.b2.copy(),
            }
            target = base_arrays[name]
            original = target[coords]
            target[coords] = original + GRADCHECK_H
            plus = _loss(base_arrays["x"], base_arrays)
            target[coords] = original - GRADCHECK_H
            minus = _loss(base_arrays["x"], base_arrays)
            fd = (plus - minus) / (2.0 * GRADCHECK_H)
            an = float(analytic[coords])
            scale = max(abs(an), abs(fd))
            if scale < _GRADCHECK_ZERO:
                rel = 0.0 if abs(an - fd) <= _GRADCHECK_ZERO else 1.0
            else:
                rel = abs(an - fd) / scale
            max_rel = max(max_rel, rel)
            n_coords += 1
    return PropertyResult(
        name="gradcheck",
        passed=(max_rel <= GRADCHECK_TOL) and (n_coords >= GRADCHECK_MIN_COORDS),
        details=(
            ("coords", str(n_coords)),
            ("step", _f(GRADCHECK_H)),
            ("max_rel_err", _f(max_rel)),
            ("tol", _f(GRADCHECK_TOL)),
        ),
    )


# ---------------------------------------------------------------------------
# fusion hierarchy, locality, and attention oracles

FUSION_TOL = 1e-12


def _attention_oracle(
    q_in: np.ndarray, kv_in: np.ndarray, params: FusionParams
) -> np.ndarray:
    """Brute-force scaled dot-product attention, one position at a time."""
    nq, c = q_in.shape
    nk = kv_in.shape[0]
    heads = params.heads
    dk = c // heads
    out = np.zeros((nq, c))
    for i in range(nq):
        qi = params.wq @ q_in[i]
        merged = np.zeros(c)
        for h in range(heads):
            sl = slice(h * dk, (h + 1) * dk)
            qh = qi[sl]
            scores = []
            for j in range(nk):
                kj = (params.wk @ kv_in[j])[sl]
                scores.append(float(qh @ kj) / math.sqrt(dk))
            m = max(scores)
            weights = [math.exp(s - m) for s in scores]
            z = sum(weights)
            oh = np.zeros(dk)
            for j in range(nk):
                vj = (params.wv @ kv_in[j])[sl]
                oh += (weights[j] / z) * vj
            merged[sl] = oh
        out[i] = params.wo @ merged
    return out


def _layer_norm_oracle(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    for i in range(x.shape[0]):
        row = x[i]
        mean = float(row.sum()) / row.size
        var = float(((row - mean) ** 2).sum()) / row.size
        out[i] = (row - mean) / math.sqrt(var + 1e-5)
    return out


def check_fusion(seed: int, break_shift: bool = False) -> PropertyResult:
    del break_shift
    rng = np.random.default_rng(seed)
    h, w, c, heads = 2, 3, 4, 2
    f2d = rng.standard_normal((h, w, c))
    f3d = rng.standard_normal((h, w, c))

    # concat with [I | I] and zero bias degenerates to addition
    eye_cat = FusionParams(
        strategy=Strategy.CONCAT, channels=c,
        proj_weight=np.hstack([np.eye(c), np.eye(c)]), proj_bias=np.zeros(c),
    )
    concat_dev = float(np.abs(fuse_concat(f2d, f3d, eye_cat) - fuse_add(f2d, f3d)).max())

    # addition is strictly per-position
    bumped = f2d.copy()
    bumped[1, 2, 0] += 3.5
    delta = fuse_add(bumped, f3d) - fuse_add(f2d, f3d)
    mask = np.zeros((h, w), dtype=bool)
    mask[1, 2] = True
    locality_ok = bool(np.all(delta[~mask] == 0.0)) and bool(delta[1, 2, 0] != 0.0)

    # attention strategies against brute-force oracles
    xp = init_fusion_params(Strategy.CROSS_ATTENTION, c, seed=seed + 1, heads=heads)
    n = h * w
    q_seq = f2d.reshape(n, c)
    kv_seq = f3d.reshape(n, c)
    xattn_oracle = (q_seq + _attention_oracle(q_seq, kv_seq, xp)).reshape(h, w, c)
    xattn_dev = float(np.abs(fuse_cross_attention(f2d, f3d, xp) - xattn_oracle).max())

    sp = init_fusion_params(Strategy.SELF_ATTENTION, c, seed=seed + 2, heads=heads)
    x_seq = np.concatenate([q_seq, kv_seq], axis=0)
    normed = _layer_norm_oracle(x_seq)
    x1 = x_seq + _attention_oracle(normed, normed, sp)
    n1 = _layer_norm_oracle(x1)
    ffn = np.zeros_like(x1)
    for i in range(x1.shape[0]):
        hidden = np.maximum(sp.w_ff1 @ n1[i] + sp.b_ff1, 0.0)
        ffn[i] = sp.w_ff2 @ hidden + sp.b_ff2
    sattn_oracle = (x1 + ffn)[:n].reshape(h, w, c)
    sattn_dev = float(np.abs(fuse_self_attention(f2d, f3d, sp) - sattn_oracle).max())

    # every strategy preserves the feature-map shape
    shapes_ok = True
    for strategy in ALL_STRATEGIES:
        p = init_fusion_params(strategy, c, seed=seed + 3, heads=heads)
        if fuse(f2d, f3d, p).shape != (h, w, c):
            shapes_ok = False

    passed = (
        concat_dev <= FUSION_TOL
        and locality_ok
        and xattn_dev <= FUSION_TOL
        and sattn_dev <= FUSION_TOL
        and shapes_ok
    )
    return PropertyResult(
        name="fusion",
        passed=passed,
        details=(
            ("concat_vs_add_dev", _f(concat_dev)),
            ("xattn_oracle_dev", _f(xattn_dev)),
            ("sattn_oracle_dev", _f(sattn_dev)),
            ("tol", _f(FUSION_TOL)),
            ("locality", "exact" if locality_ok else "violated"),
            ("shapes", "preserved" if shapes_ok else "broken"),
        ),
    )


# ---------------------------------------------------------------------------
# behavior-cloning loss oracle

LOSS_DATASETS = 20
LOSS_TOL = 1e-12
PERFECT_TOL = 1e-5


def _random_action(rng: np.random.Generator, target: bool) -> Action:
    quat = rng.standard_normal(4)
    if target:
        quat = quat / np.linalg.norm(quat)
    return Action(
        xyz=rng.standard_normal(3),
        quat=quat,
        open_prob=float(rng.integers(0, 2)) if target else float(rng.uniform(0.01, 0.99)),
    )


def _loss_oracle(trajectories: list[Trajectory]) -> float:
    """Flat-loop recomputation of the dataset loss with scalar math."""
    total = 0.0
    count = 0
    for traj in trajectories:
        for pred, target in traj.steps:
            se_xyz = sum((float(pred.xyz[i]) - float(target.xyz[i])) ** 2
                         for i in range(3)) / 3.0
            se_quat = sum((float(pred.quat[i]) - float(target.quat[i])) ** 2
                          for i in range(4)) / 4.0
            p = min(max(pred.open_prob, BCE_EPS), 1.0 - BCE_EPS)
            y = target.open_prob
            bce = -(y * math.log(p) + (1.0 - y) * math.log(1.0 - p))
            total += se_xyz + se_quat + bce
            count += 1
    return total / count


def check_loss(seed: int, break_shift: bool = False) -> PropertyResult:
    del break_shift
    rng = np.random.default_rng(seed)
    max_dev = 0.0
    for _ in range(LOSS_DATASETS):
        trajectories = []
        for _ in range(int(rng.integers(1, 5))):
            steps = tuple(
                (_random_action(rng, target=False), _random_action(rng, target=True))
                for _ in range(int(rng.integers(1, 6)))
            )
            trajectories.append(Trajectory(steps=steps))
        max_dev = max(max_dev, abs(dataset_loss(trajectories) - _loss_oracle(trajectories)))

    # perfect prediction: only the clamped BCE residue remains
    target = Action(xyz=np.array([0.0, -0.2, 0.3]),
                    quat=np.array([1.0, 0.0, 0.0, 0.0]), open_prob=1.0)
    perfect = step_loss(target, target).total

    # a single-axis position error of delta contributes exactly delta^2/3
    # (first component is 0 in the target, so the difference is exactly delta)
    delta = 0.3
    pred = Action(xyz=np.array([delta, -0.2, 0.3]),
                  quat=np.array([1.0, 0.0, 0.0, 0.0]), open_prob=1.0)
    mse_xyz = step_loss(pred, target).mse_xyz
    delta_exact = mse_xyz == (delta * delta) / 3.0

    return PropertyResult(
        name="loss",
        passed=(max_dev <= LOSS_TOL) and (perfect <= PERFECT_TOL) and delta_exact,
        details=(
            ("datasets", str(LOSS_DATASETS)),
            ("max_oracle_dev", _f(max_dev)),
            ("oracle_tol", _f(LOSS_TOL)),
            ("perfect_loss", _f(perfect)),
            ("perfect_tol", _f(PERFECT_TOL)),
            ("delta_sq_third", "exact" if delta_exact else "inexact"),
        ),
    )


# ---------------------------------------------------------------------------
# file format round trips


def check_files(seed: int, break_shift: bool = False) -> PropertyResult:
    del break_shift
    rng = np.random.default_rng(seed)
    with tempfile.TemporaryDirectory() as tmp:
        # PLY round trip is float32-exact, colors and grid tag included
        points = rng.uniform(-5.0, 5.0, size=(5, 7, 3))
        colors = rng.integers(0, 256, size=(5, 7, 3), dtype=np.uint8)
        cloud = PseudoPointCloud(points, colors=colors)
        ply_path = f"{tmp}/cloud.ply"
        ply.export_ply(ply_path, cloud)
        contents = ply.read_ply(ply_path)
        ply_ok = (
            np.array_equal(contents.points,
                           cloud.points.reshape(-1, 3).astype(np.float32))
            and contents.colors is not None
            and np.array_equal(contents.colors, colors.reshape(-1, 3))
            and contents.grid_shape == (5, 7)
        )

        bare = PseudoPointCloud(points)
        ply.export_ply(f"{tmp}/bare.ply", bare)
        bare_back = ply.read_ply(f"{tmp}/bare.ply")
        ply_ok = ply_ok and bare_back.colors is None and np.array_equal(
            bare_back.points, bare.points.reshape(-1, 3).astype(np.float32)
        )

        # the same sixteenths ramp through all three depth formats
        k = np.tile(np.arange(17), (4, 1))
        ramp = k / 16.0
        depth_io.write_csv(f"{tmp}/ramp.csv", ramp)
        depth_io.write_pfm(f"{tmp}/ramp.pfm", ramp)
        depth_io.write_pgm(f"{tmp}/ramp.pgm", 256 * k, maxval=4096)
        from_csv = depth_io.read_csv(f"{tmp}/ramp.csv")
        from_pfm = depth_io.read_pfm(f"{tmp}/ramp.pfm")
        from_pgm = depth_io.read_pgm(f"{tmp}/ramp.pgm")
        ramp_ok = (
            np.array_equal(from_csv, ramp)
            and np.array_equal(from_pfm, ramp)
            and np.array_equal(from_pgm, ramp)
        )
    return PropertyResult(
        name="files",
        passed=ply_ok and ramp_ok,
        details=(
            ("ply_roundtrip", "exact" if ply_ok else "broken"),
            ("ramp_formats", "agree" if ramp_ok else "disagree"),
        ),
    )


# ---------------------------------------------------------------------------
# report rendering and the determinism check

CORE_PROPS = ("affine", "shift", "roundtrip", "scale", "gradcheck",
              "fusion", "loss", "files")
ALL_PROPS = CORE_PROPS + ("determinism",)

_CHECKS = {
    "affine": check_affine,
    "shift": check_shift,
    "roundtrip": check_roundtrip,
    "scale": check_scale,
    "gradcheck": check_gradcheck,
    "fusion": check_fusion,
    "loss": check_loss,
    "files": check_files,
}


def render_report(results: list[PropertyResult], seed: int) -> str:
    """Line-oriented key=value report; deterministic for a given seed."""
    lines = [f"seed={seed}"]
    for r in results:
        status = "pass" if r.passed else "fail"
        detail = " ".join(f"{k}={v}" for k, v in r.details)
        lines.append(f"prop={r.name} status={status}" + (f" {detail}" if detail else ""))
    n_pass = sum(1 for r in results if r.passed)
    lines.append(f"summary total={len(results)} passed={n_pass} failed={len(results) - n_pass}")
    return "\n".join(lines) + "\n"


def render_report_json(results: list[PropertyResult], seed: int) -> str:
    payload = {
        "seed": seed,
        "properties": [
            {"prop": r.name, "status": "pass" if r.passed else "fail",
             "details": {k: v for k, v in r.details}}
            for r in results
        ],
        "summary": {
            "total": len(results),
            "passed": sum(1 for r in results if r.passed),
            "failed": sum(1 for r in results if not r.passed),
        },
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def check_determinism(seed: int, break_shift: bool = False) -> PropertyResult:
    """Running every core check twice must render byte-identical reports."""
    first = [_CHECKS[name](seed, break_shift) for name in CORE_PROPS]
    second = [_CHECKS[name](seed, break_shift) for name in CORE_PROPS]
    text_same = render_report(first, seed) == render_report(second, seed)
    json_same = render_report_json(first, seed) == render_report_json(second, seed)
    return PropertyResult(
        name="determinism",
        passed=text_same and json_same,
        details=(
            ("reruns", "2"),
            ("text_identical", "yes" if text_same else "no"),
            ("json_identical", "yes" if json_same else "no"),
        ),
    )


def run_properties(
    names: list[str] | tuple[str, ...],
    seed: int,
    break_shift: bool = False,
) -> list[PropertyResult]:
    """Run the named checks in canonical order and return their results."""
    checks = dict(_CHECKS)
    checks["determinism"] = check_determinism
    unknown = [n for n in names if n not in checks]
    if unknown:
        raise ValueError(
            f"unknown properties: {', '.join(unknown)}; expected from {', '.join(ALL_PROPS)}"
        )
    ordered = [n for n in ALL_PROPS if n in set(names)]
    return [checks[name](seed, break_shift) for name in ordered]
