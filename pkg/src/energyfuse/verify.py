"""Executable invariant suite.

Every documented invariant runs here with its measured worst case and
tolerance; the CLI `verify` subcommand prints one line per check and
fails the process if any check fails. Kept importable so the test suite
can run the same checks.
"""

from dataclasses import dataclass

import numpy as np

from . import fusion, numeric
from .autodiff import DiffGraph, grad_check
from .config import RunConfig
from .fusion import FusionParams, PatternPair, Scheme, eb2f_apply, fuse, hopfield_energy, hopfield_update
from .model import Mode, forward_pass, init_model
from .numeric import softmax_cols
from .objectives import IGNORE, berhu_loss, berhu_map, pseudo_label, seg_nll
from .reliability import (
    ReliabilityMask,
    depth_energy_map,
    energy_softmax_identity,
    free_energy_map,
    reliability_mask,
    rfa_dep_loss,
    rfa_seg_loss,
)
from .rng import RngState
from .scenes import ShiftSpec, gen_scene, shift_scene
from .train import compute_losses

# swap point so a deliberately broken gradient makes the suite fail
gradient_fn = fusion.hopfield_gradient

MASTER_SEED = 20240915


@dataclass
class CheckResult:
    name: str
    worst: float
    tol: float
    passed: bool

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<34} worst={self.worst:.3e}  tol={self.tol:.1e}"


@dataclass
class Report:
    results: list

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.results)

    def text(self) -> str:
        lines = [r.line() for r in self.results]
        n_fail = sum(1 for r in self.results if not r.passed)
        lines.append(
            f"{len(self.results)} checks, {n_fail} failing"
            if n_fail
            else f"{len(self.results)} checks, all passing"
        )
        return "\n".join(lines)


def _rng(tag: int) -> RngState:
    return RngState(MASTER_SEED, (tag,))


def _patterns(rng: RngState, i: int, unit_norm: bool = False):
    d = 2 + i % 7
    m = 2 + i % 15
    xi = rng.normal(d, 1, 2.0)
    nu = rng.normal(d, m, 2.0)
    if unit_norm:
        nu = nu / np.linalg.norm(nu, axis=0, keepdims=True)
    return xi, nu


def check_two_form_identity(n: int = 1000) -> CheckResult:
    """Damped retrieval equals the explicit gradient-descent form."""
    rng = _rng(1)
    worst = 0.0
    for i in range(n):
        xi, nu = _patterns(rng, i)
        gamma = 0.25 + 0.75 * (i % 4) / 3.0
        a = hopfield_update(PatternPair(xi, nu), gamma, 1)
        b = xi - gamma * gradient_fn(xi, nu).reshape(-1, 1)
        worst = max(worst, float(np.max(np.abs(a - b))))
    return CheckResult("hopfield-two-form-identity", worst, 1e-12, worst < 1e-12)


def check_energy_softmax_identity(n: int = 1000) -> CheckResult:
    rng = _rng(2)
    worst = 0.0
    for i in range(n):
        k = 2 + i % 15
        v = rng.uniform(-50.0, 50.0, k, 1).ravel()
        _, _, diff = energy_softmax_identity(v)
        worst = max(worst, diff)
    return CheckResult("free-energy-softmax-identity", worst, 1e-12, worst < 1e-12)


def check_seg_nll_is_cross_entropy(n: int = 200) -> CheckResult:
    rng = _rng(3)
    worst = 0.0
    for i in range(n):
        k = 2 + i % 5
        cols = 1 + i % 12
        logits = rng.normal(k, cols, 3.0)
        labels = rng.integers(0, k, cols)
        labels[rng.uniform(0.0, 1.0, 1, cols).ravel() < 0.2] = IGNORE
        got = seg_nll(logits, labels)
        got = got if isinstance(got, float) else float(got)
        valid = labels != IGNORE
        if not valid.any():
            want = 0.0
        else:
            p = softmax_cols(logits)
            picked = p[labels[valid], np.nonzero(valid)[0]]
            want = float(np.mean(-np.log(picked)))
        worst = max(worst, abs(got - want))
    return CheckResult("seg-nll-equals-cross-entropy", worst, 1e-12, worst < 1e-12)


def check_hopfield_gradient_fd(n: int = 100) -> CheckResult:
    rng = _rng(4)
    h = 1e-5
    worst = 0.0
    for i in range(n):
        xi, nu = _patterns(rng, i)
        x = xi.ravel()
        analytic = gradient_fn(x, nu)
        fd = np.zeros_like(x)
        for j in range(x.size):
            up, dn = x.copy(), x.copy()
            up[j] += h
            dn[j] -= h
            fd[j] = (hopfield_energy(up, nu) - hopfield_energy(dn, nu)) / (2 * h)
        denom = np.maximum(1e-12, np.abs(analytic) + np.abs(fd))
        worst = max(worst, float(np.max(np.abs(analytic - fd) / denom)))
    return CheckResult("hopfield-gradient-vs-fd", worst, 1e-6, worst < 1e-6)


def _tiny_setup(scheme: Scheme):
    cfg = RunConfig(
        t1=1,
        t2=1,
        lr=0.05,
        alpha=0.5,
        beta=1.0,
        gamma=0.7,
        steps=2,
        scheme=scheme.value,
        pseudo_threshold=0.0,
        seed=7,
        h=3,
        w=3,
        k=3,
        channels=3,
        n_scenes=1,
    )
    rng = RngState(MASTER_SEED, (5, int(scheme == Scheme.GATED)))
    model = init_model(rng, cfg.k, cfg.channels, scheme, cfg.gamma, cfg.steps, width=4)
    if scheme == Scheme.GATED:
        # zero-initialized gates would make their gradients trivially zero
        model.weights["fuse_seg_w1"] = rng.normal(4, 4, 0.3)
        model.weights["fuse_dep_w1"] = rng.normal(4, 4, 0.3)
    scene_s = gen_scene(rng.derive(1), cfg.h, cfg.w, cfg.k, cfg.channels)
    spec = ShiftSpec(feature_shift=0.3, feature_scale=1.2, noise_sd=0.05, depth_noise_sd=0.1)
    scene_t = shift_scene(
        gen_scene(rng.derive(2), cfg.h, cfg.w, cfg.k, cfg.channels), spec, rng.derive(3)
    )
    return cfg, model, scene_s, scene_t


def _frozen_kl_rows(teacher_logits0, student_logits):
    """Per-position KL with the teacher pinned to reference logits."""
    t = numeric.softmax_cols(teacher_logits0)
    t_log = teacher_logits0 - numeric.lse_cols(teacher_logits0)
    s_log = student_logits - numeric.lse_cols(student_logits)
    return np.sum(t * (t_log - s_log), axis=0, keepdims=True)


def _frozen_rfa(pred, ref0, masks, c, alpha):
    """Value route mirroring the RFA losses with teachers held constant.

    The production losses detach their teachers, so plain finite
    differences of them measure a different function; this frozen form
    has the same gradient at the reference point and is FD-safe.
    """
    seg_mask, dep_mask = masks
    n = seg_mask.size
    on, off = seg_mask.count, n - seg_mask.count
    seg = 0.0
    if off:
        rows = _frozen_kl_rows(ref0["seg_plain"], pred.seg_fused)
        seg += float(np.sum(rows * (1.0 - seg_mask.m))) / off
    if on:
        rows = _frozen_kl_rows(ref0["seg_fused"], pred.seg_plain)
        seg += float(np.sum(rows * seg_mask.m)) / on
    on, off = dep_mask.count, n - dep_mask.count
    dep = 0.0
    if off:
        res = berhu_map(pred.dep_fused - ref0["dep_plain"], c)
        dep += float(np.sum(res * (1.0 - dep_mask.m))) / off
    if on:
        res = berhu_map(pred.dep_plain - ref0["dep_fused"], c)
        dep += float(np.sum(res * dep_mask.m)) / on
    return seg + alpha * dep


def check_end_to_end_gradients() -> CheckResult:
    """Overall phase-2 loss gradient against central finite differences.

    Analytic side: backward through the production losses. FD side: the
    same loss with everything value-derived (pseudo labels, masks,
    berHu thresholds, distillation teachers) frozen at the reference
    point, which is exactly the function the analytic pass
    differentiates.
    """
    c_fix = 0.7
    h = 1e-5
    worst = 0.0
    for scheme in (Scheme.ADD, Scheme.GATED):
        cfg, model, scene_s, scene_t = _tiny_setup(scheme)

        graph = DiffGraph()
        leaves = {n: graph.leaf(a) for n, a in model.weights.items()}
        parts = compute_losses(
            model, scene_s, scene_t, cfg, phase=2, weights=leaves, fixed_c=c_fix
        )
        grads = graph.backward(parts["overall"])

        # reference-point values to freeze into the FD route
        frozen = []
        for scene in (scene_s, scene_t):
            pred0 = forward_pass(model, scene, Mode.TRAIN)
            seg_mask = reliability_mask(
                free_energy_map(pred0.seg_plain), free_energy_map(pred0.seg_fused)
            )
            dep_mask = reliability_mask(
                depth_energy_map(pred0.dep_plain, scene.depth, c_fix),
                depth_energy_map(pred0.dep_fused, scene.depth, c_fix),
            )
            frozen.append(
                (
                    {
                        "seg_plain": pred0.seg_plain,
                        "seg_fused": pred0.seg_fused,
                        "dep_plain": pred0.dep_plain,
                        "dep_fused": pred0.dep_fused,
                    },
                    (seg_mask, dep_mask),
                )
            )
        pred_t0 = forward_pass(model, scene_t, Mode.TRAIN)
        pseudo0 = pseudo_label(pred_t0.seg_fused, cfg.pseudo_threshold)

        def frozen_overall(wd):
            pred_s = forward_pass(model, scene_s, Mode.TRAIN, wd)
            pred_t = forward_pass(model, scene_t, Mode.TRAIN, wd)
            seg_total = (
                seg_nll(pred_s.seg_plain, scene_s.labels)
                + seg_nll(pred_s.seg_fused, scene_s.labels)
                + seg_nll(pred_t.seg_plain, pseudo0)
                + seg_nll(pred_t.seg_fused, pseudo0)
            )
            dep_total = (
                berhu_loss(pred_s.dep_plain, scene_s.depth, c_fix)
                + berhu_loss(pred_s.dep_fused, scene_s.depth, c_fix)
                + berhu_loss(pred_t.dep_plain, scene_t.depth, c_fix)
                + berhu_loss(pred_t.dep_fused, scene_t.depth, c_fix)
            )
            rfa = _frozen_rfa(
                pred_s, frozen[0][0], frozen[0][1], c_fix, cfg.alpha
            ) + _frozen_rfa(pred_t, frozen[1][0], frozen[1][1], c_fix, cfg.alpha)
            return seg_total + cfg.alpha * dep_total + cfg.beta * rfa

        names = ["enc0_w", "seg_dec_fused_w", "dep_dec_plain_w", "seg_net_b_w"]
        if scheme == Scheme.GATED:
            names += ["fuse_seg_w1", "fuse_dep_w2"]
        for name in names:
            base = model.weights[name]
            analytic = grads[leaves[name].nid]
            if analytic is None:
                analytic = np.zeros_like(base)
            fd = np.zeros_like(base)
            for idx in np.ndindex(base.shape):
                probe = dict(model.weights)
                arr = base.copy()
                arr[idx] += h
                probe[name] = arr
                up = frozen_overall(probe)
                arr = base.copy()
                arr[idx] -= h
                probe[name] = arr
                dn = frozen_overall(probe)
                fd[idx] = (up - dn) / (2 * h)
            denom = np.maximum(1e-12, np.abs(analytic) + np.abs(fd))
            worst = max(worst, float(np.max(np.abs(analytic - fd) / denom)))
    return CheckResult("end-to-end-gradients-vs-fd", worst, 1e-4, worst < 1e-4)


def check_full_step_descent(n: int = 1000) -> CheckResult:
    """A full (gamma = 1) update never raises the energy."""
    rng = _rng(6)
    worst = -np.inf
    for i in range(n):
        xi, nu = _patterns(rng, i)
        before = hopfield_energy(xi, nu)
        after_xi = hopfield_update(PatternPair(xi, nu), 1.0, 1)
        worst = max(worst, hopfield_energy(after_xi, nu) - before)
    return CheckResult("full-step-energy-descent", worst, 1e-10, worst < 1e-10)


def check_damped_descent_unit_norm(n: int = 300) -> CheckResult:
    """Damped updates descend when stored columns have unit norm."""
    rng = _rng(7)
    worst = -np.inf
    for gamma in (0.25, 0.5, 1.0):
        for i in range(n):
            xi, nu = _patterns(rng, i, unit_norm=True)
            prev = hopfield_energy(xi, nu)
            for _ in range(5):
                xi = hopfield_update(PatternPair(xi, nu), gamma, 1)
                cur = hopfield_energy(xi, nu)
                worst = max(worst, cur - prev)
                prev = cur
    return CheckResult("damped-descent-unit-norm", worst, 1e-10, worst < 1e-10)


def check_retrieval_convergence(n: int = 100) -> CheckResult:
    """Full-step iteration settles: update distance < 1e-6 within 500."""
    rng = _rng(8)
    worst = 0.0
    for i in range(n):
        xi, nu = _patterns(rng, i, unit_norm=True)
        delta = np.inf
        for _ in range(500):
            nxt = hopfield_update(PatternPair(xi, nu), 1.0, 1)
            delta = float(np.linalg.norm(nxt - xi))
            xi = nxt
            if delta < 1e-6:
                break
        worst = max(worst, delta)
    return CheckResult("retrieval-convergence", worst, 1e-6, worst < 1e-6)


def check_mask_partition(n: int = 300) -> CheckResult:
    rng = _rng(9)
    worst = 0
    for i in range(n):
        cols = 1 + i % 25
        e_plain = np.round(rng.normal(1, cols, 1.0), 1)  # rounding forces ties
        e_fused = np.round(rng.normal(1, cols, 1.0), 1)
        mask = reliability_mask(e_plain, e_fused)
        off = int(np.sum(mask.m == 0.0))
        worst = max(worst, abs(mask.count + off - cols))
    return CheckResult("mask-partition-exact", float(worst), 0.0, worst == 0)


def check_kl_nonnegative(n: int = 300) -> CheckResult:
    rng = _rng(10)
    low = np.inf
    for i in range(n):
        k = 2 + i % 7
        cols = 1 + i % 20
        p = rng.normal(k, cols, 3.0)
        q = rng.normal(k, cols, 3.0)
        mask = ReliabilityMask(m=(rng.uniform(0.0, 1.0, 1, cols) < 0.5).astype(float))
        low = min(low, float(rfa_seg_loss(p, q, mask)))
    worst = max(0.0, -low)
    return CheckResult("rfa-kl-nonnegative", worst, 1e-12, worst < 1e-12)


def check_kl_zero_iff_equal(n: int = 100) -> CheckResult:
    rng = _rng(11)
    worst_equal = 0.0
    min_unequal = np.inf
    for i in range(n):
        k = 2 + i % 5
        cols = 1 + i % 10
        p = rng.normal(k, cols, 2.0)
        shift = rng.normal(1, cols, 1.0)
        mask = ReliabilityMask(m=(rng.uniform(0.0, 1.0, 1, cols) < 0.5).astype(float))
        worst_equal = max(worst_equal, float(rfa_seg_loss(p, p + shift, mask)))
        q = p + rng.normal(k, cols, 0.5)
        min_unequal = min(min_unequal, float(rfa_seg_loss(p, q, mask)))
    passed = worst_equal < 1e-12 and min_unequal > 1e-12
    return CheckResult("rfa-kl-zero-iff-equal", worst_equal, 1e-12, passed)


def check_teacher_gradient_zero() -> CheckResult:
    """Masked distillation sends no gradient into the teacher columns."""
    rng = _rng(12)
    k, cols = 4, 10
    m = np.zeros((1, cols))
    m[0, : cols // 2] = 1.0
    mask = ReliabilityMask(m=m)
    worst = 0.0

    g = DiffGraph()
    p_plain = g.leaf(rng.normal(k, cols, 2.0))
    p_fused = g.leaf(rng.normal(k, cols, 2.0))
    grads = g.backward(g.sum(rfa_seg_loss(p_plain, p_fused, mask)))
    # plain teaches where m = 0, fused teaches where m = 1
    worst = max(worst, float(np.max(np.abs(grads[p_plain.nid][:, mask.m[0] == 0.0]))))
    worst = max(worst, float(np.max(np.abs(grads[p_fused.nid][:, mask.m[0] == 1.0]))))

    g = DiffGraph()
    d_plain = g.leaf(rng.normal(1, cols, 1.0))
    d_fused = g.leaf(rng.normal(1, cols, 1.0))
    grads = g.backward(g.sum(rfa_dep_loss(d_plain, d_fused, mask, 0.5)))
    worst = max(worst, float(np.max(np.abs(grads[d_plain.nid][:, mask.m[0] == 0.0]))))
    worst = max(worst, float(np.max(np.abs(grads[d_fused.nid][:, mask.m[0] == 1.0]))))
    return CheckResult("rfa-teacher-gradient-zero", worst, 0.0, worst == 0.0)


def check_degenerate_masks() -> CheckResult:
    rng = _rng(13)
    k, cols = 3, 8
    p = rng.normal(k, cols, 2.0)
    q = rng.normal(k, cols, 2.0)
    dp = rng.normal(1, cols, 1.0)
    dq = rng.normal(1, cols, 1.0)
    vals = []
    for m in (np.zeros((1, cols)), np.ones((1, cols))):
        mask = ReliabilityMask(m=m)
        vals.append(float(rfa_seg_loss(p, q, mask)))
        vals.append(float(rfa_dep_loss(dp, dq, mask, 0.4)))
    finite = all(np.isfinite(v) for v in vals)
    return CheckResult("degenerate-mask-finite", 0.0 if finite else np.inf, 0.0, finite)


def check_gamma_zero_bypass(n: int = 200) -> CheckResult:
    """gamma = 0 must reduce to the plain fusion scheme bit for bit."""
    rng = _rng(14)
    worst = 0.0
    for i in range(n):
        d = 2 + i % 6
        cols = 1 + i % 9
        q = rng.normal(d, cols, 2.0)
        o = rng.normal(d, cols, 2.0)
        steps = (0, 1, 3, 7)[i % 4]
        if i % 2 == 0:
            params = FusionParams(scheme=Scheme.ADD, gamma=0.0, steps=steps)
        else:
            params = FusionParams(
                scheme=Scheme.GATED,
                gamma=0.0,
                steps=steps,
                w1=rng.normal(d, d, 1.0),
                w2=rng.normal(d, d, 1.0),
            )
        got = eb2f_apply(q, o, params)
        want = fuse(o, q, params)
        diff = float(np.max(np.abs(got - want)))
        if not np.array_equal(got, want):
            diff = max(diff, np.inf)
        worst = max(worst, diff)
    return CheckResult("gamma-zero-bypass-bitwise", worst, 0.0, worst == 0.0)


def check_berhu_continuity(n: int = 100) -> CheckResult:
    rng = _rng(15)
    eps = 1e-8
    worst = 0.0
    for _ in range(n):
        c = float(rng.uniform(0.1, 3.0, 1, 1)[0, 0])
        lo = berhu_map(np.array([[c - eps]]), c)[0, 0]
        hi = berhu_map(np.array([[c + eps]]), c)[0, 0]
        worst = max(worst, abs(hi - lo))
    return CheckResult("berhu-threshold-continuity", worst, 1e-6, worst < 1e-6)


def check_autodiff_composite() -> CheckResult:
    """One function touching most tape ops against finite differences."""
    rng = _rng(16)
    w = rng.normal(4, 4, 1.0)

    def f(x):
        g = x.graph
        y = g.matmul(g.constant(w), g.tanh(x))
        y = g.softmax_cols(y) * g.sigmoid(x) + g.exp(x * 0.1)
        z = g.sub_row(y, g.lse_cols(y * 0.5))
        z = g.add_col(z, g.constant(np.ones((4, 1))))
        t = g.abs(g.transpose(z))
        return g.sum(z * z) * 0.25 + g.sum(t) * 0.01 + g.sum(g.log(g.exp(x))) * 0.01

    worst = grad_check(f, rng.normal(4, 5, 0.8))
    return CheckResult("autodiff-composite-vs-fd", worst, 1e-6, worst < 1e-6)


ALL_CHECKS = (
    check_two_form_identity,
    check_energy_softmax_identity,
    check_seg_nll_is_cross_entropy,
    check_hopfield_gradient_fd,
    check_end_to_end_gradients,
    check_full_step_descent,
    check_damped_descent_unit_norm,
    check_retrieval_convergence,
    check_mask_partition,
    check_kl_nonnegative,
    check_kl_zero_iff_equal,
    check_teacher_gradient_zero,
    check_degenerate_masks,
    check_gamma_zero_bypass,
    check_berhu_continuity,
    check_autodiff_composite,
)


def run_verification() -> Report:
    return Report(results=[check() for check in ALL_CHECKS])
