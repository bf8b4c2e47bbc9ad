"""Constituency tree ingestion and the random binary TreeLSTM encoder.

Bracketed parses (Penn-Treebank-style, labels ignored) are read into n-ary
raw trees, then binarized right-branching with unary chains collapsed, so
every sentence of L tokens yields exactly 2L - 1 nodes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar, Iterator

import numpy as np

from .embeddings import TokenSequence
from .encoders import ConfigError, LstmWeights, _frozen, bilstm_states, draw_lstm_direction
from .numerics import SeededRng, sigmoid, uniform_init

__all__ = [
    "TreeParseError",
    "ParseTree",
    "parse_bracketed",
    "read_tree_file",
    "binarize",
    "right_branching_parse",
    "TreeLstmParams",
    "build_tree_lstm",
    "encode_tree_lstm",
    "TREE_GATE_ORDER",
    "NODE_DOMAINS",
]

NODE_DOMAINS = ("all", "leaves")
TREE_GATE_ORDER = ("i", "f_l", "f_r", "o", "u")


class TreeParseError(ValueError):
    """Malformed bracketed parse; offset is a byte position in the input."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True, eq=False)
class ParseTree:
    """Binary constituency node: a leaf carries a token, an internal node
    carries exactly two children."""

    token: str | None = None
    left: "ParseTree | None" = None
    right: "ParseTree | None" = None

    def __post_init__(self):
        if self.token is not None:
            if self.left is not None or self.right is not None:
                raise ValueError("a leaf cannot have children")
        elif self.left is None or self.right is None:
            raise ValueError("an internal node needs both children")

    @property
    def is_leaf(self) -> bool:
        return self.token is not None

    def post_order(self) -> Iterator["ParseTree"]:
        """Children before parents, left before right, without recursion."""
        stack: list[tuple[ParseTree, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if node.is_leaf or expanded:
                yield node
            else:
                stack.append((node, True))
                stack.append((node.right, False))
                stack.append((node.left, False))

    def leaf_tokens(self) -> list[str]:
        return [n.token for n in self.post_order() if n.is_leaf]

    @property
    def node_count(self) -> int:
        return sum(1 for _ in self.post_order())


# ---------------------------------------------------------------------------
# Bracketed parse reading.
# ---------------------------------------------------------------------------

# raw n-ary tree: a str token, or a list of children
_RawNode = object


def _byte_offset(text: str, char_index: int) -> int:
    return len(text[:char_index].encode("utf-8"))


def parse_bracketed(text: str) -> ParseTree:
    """Parse one bracketed constituency tree, e.g.
    "(S (NP (DT the) (NN cat)) (VP sat))". Category labels are ignored;
    the result is already binarized. Raises TreeParseError with the byte
    offset of the first problem."""
    atoms = _lex(text)
    if not atoms:
        raise TreeParseError("empty parse", 0)
    kind, _value, pos = atoms[0]
    if kind != "(":
        raise TreeParseError("parse must start with '('", _byte_offset(text, pos))
    raw, next_idx = _parse_node(text, atoms, 0)
    for kind, _value, pos in atoms[next_idx:]:
        raise TreeParseError("trailing content after tree", _byte_offset(text, pos))
    return binarize(raw)


def _lex(text: str) -> list[tuple[str, str, int]]:
    out = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "()":
            out.append((ch, ch, i))
            i += 1
        else:
            start = i
            while i < n and not text[i].isspace() and text[i] not in "()":
                i += 1
            out.append(("atom", text[start:i], start))
    return out


def _parse_node(text: str, atoms, idx: int):
    """Parse the node opening at atoms[idx] ('('); returns (raw, next_idx)."""
    open_pos = atoms[idx][2]
    idx += 1
    elements: list = []
    saw_label = False
    while True:
        if idx >= len(atoms):
            raise TreeParseError("unclosed '('", _byte_offset(text, open_pos))
        kind, value, pos = atoms[idx]
        if kind == ")":
            idx += 1
            break
        if kind == "(":
            child, idx = _parse_node(text, atoms, idx)
            elements.append(child)
        else:
            # the first atom directly after '(' is a category label unless it
            # is the only element ("(word)" stands for a bare leaf)
            if not elements and not saw_label and _peek_is_more(atoms, idx + 1):
                saw_label = True
            else:
                elements.append(value)
            idx += 1
    if not elements:
        raise TreeParseError("node has no children", _byte_offset(text, open_pos))
    if len(elements) == 1:
        return elements[0], idx
    return elements, idx


def _peek_is_more(atoms, idx: int) -> bool:
    return idx < len(atoms) and atoms[idx][0] != ")"


def read_tree_file(path: str) -> list[ParseTree]:
    """One bracketed parse per non-blank line, in file order."""
    trees = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                trees.append(parse_bracketed(line.strip()))
            except TreeParseError as exc:
                raise TreeParseError(f"{path}:{line_no}: {exc.args[0]}", exc.offset) from None
    return trees


def binarize(raw) -> ParseTree:
    """Right-branching binarization with unary-chain collapse.

    A raw node is a token string or a list of raw children. Chains with a
    single child collapse onto that child, so an L-leaf tree always has
    2L - 1 nodes.
    """
    if isinstance(raw, str):
        return ParseTree(token=raw)
    children = list(raw)
    while len(children) == 1:
        only = children[0]
        if isinstance(only, str):
            return ParseTree(token=only)
        children = list(only)
    if not children:
        raise TreeParseError("node has no children", 0)
    head = binarize(children[0])
    if len(children) == 2:
        return ParseTree(left=head, right=binarize(children[1]))
    return ParseTree(left=head, right=binarize(children[1:]))


def right_branching_parse(tokens: list[str]) -> ParseTree:
    """Fallback parse for plain token lists: (t1 (t2 (... tL)))."""
    if not tokens:
        raise ValueError("cannot build a tree over zero tokens")
    node = ParseTree(token=tokens[-1])
    for tok in reversed(tokens[:-1]):
        node = ParseTree(left=ParseTree(token=tok), right=node)
    return node


# ---------------------------------------------------------------------------
# Random binary TreeLSTM.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TreeLstmParams:
    """Binary TreeLSTM over BiLSTM-contextualized leaves.

    Tree-cell gate rows are stacked in TREE_GATE_ORDER (i, f_l, f_r, o, u),
    so w, u_l, u_r are 5D' x D' and b is 5D'.
    """

    kind: ClassVar[str] = "tree_lstm"
    seed: int
    in_dim: int
    out_dim: int
    leaf_forward: LstmWeights
    leaf_backward: LstmWeights
    w: np.ndarray
    u_l: np.ndarray
    u_r: np.ndarray
    b: np.ndarray
    node_domain: str


def build_tree_lstm(
    seed: int, in_dim: int, out_dim: int, node_domain: str = "all"
) -> TreeLstmParams:
    """Draw order: leaf BiLSTM forward then backward direction (gates i, f,
    g, o with W, U, b each, uniform +-1/sqrt(D), hidden D'/2); then the
    tree cell's gates in order i, f_l, f_r, o, u, each drawing W (D' x D'),
    U_L (D' x D'), U_R (D' x D'), b (1 x D'), all uniform +-1/sqrt(D').
    """
    if out_dim % 2 != 0:
        raise ConfigError(f"tree_lstm needs an even output dim, got {out_dim}")
    if node_domain not in NODE_DOMAINS:
        raise ConfigError(
            f"tree_lstm node_domain must be one of {NODE_DOMAINS}, got {node_domain!r}"
        )
    rng = SeededRng(seed)
    hidden = out_dim // 2
    leaf_fwd = draw_lstm_direction(rng, in_dim, hidden, init_d=in_dim)
    leaf_bwd = draw_lstm_direction(rng, in_dim, hidden, init_d=in_dim)
    ws, uls, urs, bs = [], [], [], []
    for _gate in TREE_GATE_ORDER:
        ws.append(uniform_init(rng, out_dim, out_dim, d=out_dim))
        uls.append(uniform_init(rng, out_dim, out_dim, d=out_dim))
        urs.append(uniform_init(rng, out_dim, out_dim, d=out_dim))
        bs.append(uniform_init(rng, 1, out_dim, d=out_dim).ravel())
    return TreeLstmParams(
        seed,
        in_dim,
        out_dim,
        leaf_fwd,
        leaf_bwd,
        _frozen(np.vstack(ws)),
        _frozen(np.vstack(uls)),
        _frozen(np.vstack(urs)),
        _frozen(np.concatenate(bs)),
        node_domain,
    )


def _tree_cell(params: TreeLstmParams, z: np.ndarray, c_l: np.ndarray, c_r: np.ndarray):
    d = params.out_dim
    i = sigmoid(z[0:d])
    f_l = sigmoid(z[d : 2 * d])
    f_r = sigmoid(z[2 * d : 3 * d])
    o = sigmoid(z[3 * d : 4 * d])
    u = np.tanh(z[4 * d : 5 * d])
    c = i * u + f_l * c_l + f_r * c_r
    h = o * np.tanh(c)
    return h, c


def encode_tree_lstm(params: TreeLstmParams, seq: TokenSequence, tree: ParseTree) -> np.ndarray:
    """Bottom-up TreeLSTM pass; rows are node h-states in post-order.

    Leaves consume the BiLSTM row for their token position (left-to-right)
    and have zero children; internal nodes take no word input, only their
    two children's states through separate left/right forget paths. With
    node_domain="leaves" only the L leaf rows are returned, otherwise all
    2L - 1.
    """
    if seq.dim != params.in_dim:
        raise ValueError(
            f"tree_lstm: sequence dim {seq.dim} != encoder input dim {params.in_dim}"
        )
    n_leaves = sum(1 for _ in filter(None, (n.is_leaf for n in tree.post_order())))
    if n_leaves != len(seq.tokens):
        raise ValueError(
            f"tree has {n_leaves} leaves but the sentence has {len(seq.tokens)} tokens"
        )
    ctx = bilstm_states(params.leaf_forward, params.leaf_backward, seq.vectors)
    d = params.out_dim
    zero = np.zeros(d)
    states: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    rows = []
    leaf_idx = 0
    for node in tree.post_order():
        if node.is_leaf:
            z = params.w @ ctx[leaf_idx] + params.b
            leaf_idx += 1
            h, c = _tree_cell(params, z, zero, zero)
        else:
            h_l, c_l = states.pop(id(node.left))
            h_r, c_r = states.pop(id(node.right))
            z = params.u_l @ h_l + params.u_r @ h_r + params.b
            h, c = _tree_cell(params, z, c_l, c_r)
        states[id(node)] = (h, c)
        if params.node_domain == "all" or node.is_leaf:
            rows.append(h)
    return np.vstack(rows)
