"""Fast in-process invariant suite behind `randenc selfcheck`.

Each check re-derives a contract the test suite also covers, but in a few
hundred milliseconds and with no files or fixtures, so a fresh install can
be sanity-checked anywhere the package runs.
"""

from __future__ import annotations

import io
import numpy as np

from . import checkpoint, encoders, numerics, probe, tasks, trees
from .embeddings import TokenSequence

__all__ = ["run_all", "CHECKS"]


def _random_seq(rng: np.random.Generator, t_len: int, dim: int) -> TokenSequence:
    return TokenSequence([f"t{i}" for i in range(t_len)], rng.normal(size=(t_len, dim)))


def check_matmul_reference() -> None:
    rng = np.random.default_rng(11)
    a, b = rng.normal(size=(7, 5)), rng.normal(size=(5, 9))
    naive = np.zeros((7, 9))
    for i in range(7):
        for j in range(9):
            for k in range(5):
                naive[i, j] += a[i, k] * b[k, j]
    if not np.array_equal(numerics.matmul(a, b), naive):
        raise AssertionError("reference matmul deviates from the naive triple loop")


def check_layer_norm() -> None:
    rng = np.random.default_rng(12)
    v = numerics.layer_norm(rng.normal(size=(4, 16)))
    if abs(v.mean(axis=-1)).max() > 1e-12 or abs((v * v).mean(axis=-1) - 1.0).max() > 1e-4:
        raise AssertionError("layer_norm rows are not normalized")


def check_cnn_borep_equivalence() -> None:
    rng = np.random.default_rng(13)
    borep = encoders.build_borep(3, 12, 40)
    cnn = encoders.cnn_from_borep(borep)
    for _ in range(10):
        seq = _random_seq(rng, int(rng.integers(1, 9)), 12)
        gap = np.abs(
            encoders.encode_borep(borep, seq) - encoders.encode_cnn(cnn, seq)
        ).max()
        if gap > 1e-12:
            raise AssertionError(f"window-1 CNN deviates from BOREP by {gap:.3e}")


def check_permutation_invariance() -> None:
    rng = np.random.default_rng(14)
    borep = encoders.build_borep(5, 10, 32)
    attn_pe = encoders.build_self_attention(5, 10, 32, heads=2, use_pe=True)
    attn_nope = encoders.build_self_attention(5, 10, 32, heads=2, use_pe=False)
    seq = _random_seq(rng, 8, 10)
    perm = rng.permutation(8)
    shuffled = TokenSequence([seq.tokens[i] for i in perm], seq.vectors[perm])

    def pooled(params, s):
        return encoders.encode_and_pool(params, s, "max").values

    if np.abs(pooled(borep, seq) - pooled(borep, shuffled)).max() > 1e-10:
        raise AssertionError("BOREP max-pooled embedding is not permutation-invariant")
    if np.abs(pooled(attn_nope, seq) - pooled(attn_nope, shuffled)).max() > 1e-10:
        raise AssertionError("no-PE attention embedding is not permutation-invariant")
    if np.abs(pooled(attn_pe, seq) - pooled(attn_pe, shuffled)).max() <= 1e-6:
        raise AssertionError("positional encodings failed to break permutation invariance")


def check_esn_contract() -> None:
    params = encoders.build_esn(7, 8, 64, rho=0.9)
    for w in (params.w_rec_f, params.w_rec_b):
        radius = float(np.max(np.abs(np.linalg.eigvals(w))))
        if abs(radius - 0.9) > 1e-3:
            raise AssertionError(f"reservoir spectral radius {radius:.6f} != 0.9")
    rng = np.random.default_rng(15)
    xs = rng.normal(size=(50, 8))
    a = encoders.reservoir_states(params.w_in_f, params.w_rec_f, params.leak, xs)
    b = encoders.reservoir_states(
        params.w_in_f, params.w_rec_f, params.leak, xs, x0=rng.normal(size=32) * 0.5
    )
    gap = float(np.abs(a[-1] - b[-1]).max())
    if gap >= 1e-3:
        raise AssertionError(f"echo-state contraction failed: final-state gap {gap:.3e}")


def check_probe_gradients() -> None:
    rng = np.random.default_rng(16)
    x = rng.normal(size=(20, 6))
    y = rng.integers(0, 3, size=20)
    for kind in ("logreg", "mlp"):
        params = probe.init_params(kind, 6, 3, 8, seed=1)
        if kind == "mlp":
            params = [p + rng.normal(size=p.shape) * 0.1 for p in params]
        _, grads = probe.loss_and_grad(params, x, y, 1e-3, kind)
        eps = 1e-5
        for pi, grad in enumerate(grads):
            flat = params[pi].ravel()
            idx = int(rng.integers(0, flat.size))
            for sign in (1.0, -1.0):
                shifted = [p.copy() for p in params]
                shifted[pi].ravel()[idx] += sign * eps
                loss, _ = probe.loss_and_grad(shifted, x, y, 1e-3, kind)
                if sign > 0:
                    up = loss
                else:
                    down = loss
            fd = (up - down) / (2 * eps)
            analytic = grad.ravel()[idx]
            rel = abs(fd - analytic) / max(1e-12, abs(fd), abs(analytic))
            if rel > 1e-4:
                raise AssertionError(f"{kind} gradient check failed (rel err {rel:.2e})")
    loss, _ = probe.loss_and_grad(
        probe.init_params("logreg", 4, 2, 0, seed=0),
        rng.normal(size=(10, 4)), np.array([0, 1] * 5), 0.0, "logreg",
    )
    if abs(loss - np.log(2.0)) > 1e-12:
        raise AssertionError("zero-initialized balanced binary loss is not ln 2")


def check_checkpoint_roundtrip(tmp_path: str | None = None) -> None:
    import tempfile, os

    params = encoders.build_self_attention(21, 6, 16, heads=2)
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "enc.npz")
        checkpoint.save_encoder(path, params)
        loaded = checkpoint.load_encoder(path)
    for blk_a, blk_b in zip(params.blocks, loaded.blocks):
        for name in ("w_q", "w_k", "w_v", "w_o"):
            if not np.array_equal(getattr(blk_a, name), getattr(blk_b, name)):
                raise AssertionError("checkpoint round trip is not bit-exact")
    if not np.array_equal(params.w_up, loaded.w_up):
        raise AssertionError("checkpoint round trip is not bit-exact")


def check_tree_shapes() -> None:
    tree = trees.parse_bracketed("(S (NP (DT the) (NN cat)) (VP (VBZ sat) (RB down)))")
    if tree.node_count != 2 * 4 - 1:
        raise AssertionError(f"binarized 4-leaf tree has {tree.node_count} nodes, wanted 7")
    if tree.leaf_tokens() != ["the", "cat", "sat", "down"]:
        raise AssertionError("leaf order deviates from surface order")


def check_order_task() -> None:
    ds = tasks.make_synthetic_order_task(20, seed=4, with_trees=False)
    labels = [tasks.order_label(text.split()) for text in ds.texts]
    if list(ds.labels) != labels:
        raise AssertionError("synthetic task labels deviate from the order rule")
    if labels.count("1") != 10:
        raise AssertionError("synthetic task is not exactly balanced")


CHECKS = [
    ("matmul-reference-kernel", check_matmul_reference),
    ("layer-norm-moments", check_layer_norm),
    ("cnn-window1-equals-borep", check_cnn_borep_equivalence),
    ("pooling-permutation-contract", check_permutation_invariance),
    ("esn-radius-and-contraction", check_esn_contract),
    ("probe-gradients-and-ln2", check_probe_gradients),
    ("checkpoint-bit-exact", check_checkpoint_roundtrip),
    ("tree-binarization", check_tree_shapes),
    ("synthetic-order-task", check_order_task),
]


def run_all(out: io.TextIOBase | None = None) -> int:
    """Run every check; prints one PASS/FAIL line each, returns #failures."""
    import sys

    out = out if out is not None else sys.stdout
    failures = 0
    for name, fn in CHECKS:
        try:
            fn()
        except Exception as exc:
            failures += 1
            print(f"FAIL {name}: {exc}", file=out)
        else:
            print(f"PASS {name}", file=out)
    return failures
