"""Domain types and the text formats for systems and controls.

System description (UTF-8, ``#`` starts a comment)::

    n = 2
    m = 1
    A = [0 1; 0 0]
    B = [0; 1]
    control_set = box 1.0      # or: ball 0.5

Control description: one segment per line, ``duration c_1 ... c_m``.
"""
import re
from dataclasses import dataclass

import numpy as np

from .errors import ControlOutOfSet, DimensionError, ParseError, ValidationError


def _frozen(a, dtype=np.float64):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ControlSet:
    """Closed, symmetric, convex neighbourhood of the origin in R^m.

    ``kind`` is ``"box"`` (one half-width per axis) or ``"ball"`` (a single
    Euclidean radius).
    """

    kind: str
    radii: tuple
    dim: int

    def __post_init__(self):
        if self.kind not in ("box", "ball"):
            raise ValidationError(f"unknown control set kind {self.kind!r}")
        if self.dim < 1:
            raise ValidationError("control dimension must be at least 1")
        radii = tuple(float(r) for r in self.radii)
        expected = self.dim if self.kind == "box" else 1
        if len(radii) != expected:
            raise ValidationError(
                f"{self.kind} needs {expected} radius value(s), got {len(radii)}"
            )
        for r in radii:
            if not np.isfinite(r) or r <= 0:
                raise ValidationError(f"control set radius must be positive and finite, got {r!r}")
        object.__setattr__(self, "radii", radii)

    @classmethod
    def box(cls, radii, m=None):
        """Box with half-widths ``radii``; a scalar is replicated over ``m`` axes."""
        radii = np.atleast_1d(np.asarray(radii, dtype=np.float64))
        if m is None:
            m = radii.size
        if radii.size == 1 and m > 1:
            radii = np.repeat(radii, m)
        return cls("box", tuple(radii.tolist()), int(m))

    @classmethod
    def ball(cls, radius, m):
        return cls("ball", (float(radius),), int(m))

    def __eq__(self, other):
        if not isinstance(other, ControlSet):
            return NotImplemented
        return (self.kind, self.radii, self.dim) == (other.kind, other.radii, other.dim)

    def __hash__(self):
        return hash((self.kind, self.radii, self.dim))

    def contains(self, u):
        return membership(self, u)

    def inradius(self):
        """Radius of the largest centred ball inside the set."""
        return min(self.radii)

    def sample(self, rng, size):
        """Draw ``size`` points uniformly from the set; returns shape (size, m)."""
        if self.kind == "box":
            r = np.asarray(self.radii)
            return rng.uniform(-1.0, 1.0, size=(size, self.dim)) * r
        d = rng.standard_normal((size, self.dim))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        rad = self.radii[0] * rng.uniform(0.0, 1.0, size=(size, 1)) ** (1.0 / self.dim)
        return d * rad


def membership(K, u):
    """True iff ``u`` lies in the closed control set ``K``."""
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    if u.size != K.dim:
        raise DimensionError(f"control has dimension {u.size}, control set has {K.dim}")
    if K.kind == "box":
        return bool(np.all(np.abs(u) <= np.asarray(K.radii)))
    return bool(np.linalg.norm(u) <= K.radii[0])


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """The controlled system ``q' = A q + B u`` with controls in ``control_set``."""

    A: np.ndarray
    B: np.ndarray
    control_set: ControlSet

    def __post_init__(self):
        A = np.array(self.A, dtype=np.float64)
        B = np.array(self.B, dtype=np.float64)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
            raise ValidationError(f"A must be a non-empty square matrix, got shape {A.shape}")
        if B.ndim != 2 or B.shape[0] != A.shape[0] or B.shape[1] < 1:
            raise ValidationError(f"B must have shape ({A.shape[0]}, m>=1), got {B.shape}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
            raise ValidationError("A and B must have finite entries")
        if not np.any(B != 0.0):
            raise ValidationError("B must have at least one nonzero entry")
        if self.control_set.dim != B.shape[1]:
            raise ValidationError(
                f"control set dimension {self.control_set.dim} does not match m = {B.shape[1]}"
            )
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "B", _frozen(B))

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    def __eq__(self, other):
        if not isinstance(other, LinearSystem):
            return NotImplemented
        return (
            np.array_equal(self.A, other.A)
            and np.array_equal(self.B, other.B)
            and self.control_set == other.control_set
        )

    def __hash__(self):
        return hash((self.A.tobytes(), self.B.tobytes(), self.control_set))


@dataclass(frozen=True, eq=False)
class ExtendedState:
    """A point ``(t, q, u)`` of the extended space-time R x R^n x R^m."""

    t: float
    q: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        t = float(self.t)
        q = _frozen(np.atleast_1d(self.q))
        u = _frozen(np.atleast_1d(self.u))
        if not (np.isfinite(t) and np.all(np.isfinite(q)) and np.all(np.isfinite(u))):
            raise ValidationError("extended state coordinates must be finite")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "u", u)

    @classmethod
    def origin(cls, n, m):
        return cls(0.0, np.zeros(n), np.zeros(m))

    def as_vector(self):
        """Flat coordinates ``(t, q_1..q_n, u_1..u_m)``."""
        return np.concatenate([[self.t], self.q, self.u])


@dataclass(frozen=True, eq=False)
class PiecewiseConstantControl:
    """Control taking value ``values[k]`` for ``durations[k]`` time units."""

    durations: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        d = np.atleast_1d(np.asarray(self.durations, dtype=np.float64))
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim == 1:
            v = v.reshape(d.size, -1) if d.size else v.reshape(0, 1)
        if d.ndim != 1 or v.ndim != 2 or v.shape[0] != d.size:
            raise ValidationError("need one control value per duration")
        if d.size == 0:
            raise ValidationError("a control needs at least one segment")
        if not np.all(np.isfinite(d)) or np.any(d <= 0):
            raise ValidationError("segment durations must be positive and finite")
        if not np.all(np.isfinite(v)):
            raise ValidationError("control values must be finite")
        object.__setattr__(self, "durations", _frozen(d))
        object.__setattr__(self, "values", _frozen(v))

    @property
    def m(self):
        return self.values.shape[1]

    @property
    def horizon(self):
        return float(np.sum(self.durations))

    @property
    def breakpoints(self):
        """Segment start times followed by the horizon."""
        return np.concatenate([[0.0], np.cumsum(self.durations)])

    def __len__(self):
        return self.durations.size

    def is_valid(self, K):
        return all(membership(K, c) for c in self.values)

    def check(self, K):
        for k, c in enumerate(self.values):
            if not membership(K, c):
                raise ControlOutOfSet(f"segment {k} value {c.tolist()} is outside the control set")

    def reversed(self):
        """Time reversal ``u(t) -> u(T - t)``."""
        return PiecewiseConstantControl(self.durations[::-1], self.values[::-1])

    def scaled(self, factor):
        return PiecewiseConstantControl(self.durations, factor * self.values)

    def value_at(self, t):
        """Value on the half-open segment containing ``t`` (the last one at ``t = T``)."""
        k = int(np.searchsorted(self.breakpoints, t, side="right")) - 1
        return self.values[min(max(k, 0), len(self) - 1)]

    def refine(self, times):
        """Same signal on the union of its breakpoints and ``times``."""
        grid = np.union1d(self.breakpoints, np.asarray(times, dtype=np.float64))
        grid = grid[(grid >= 0.0) & (grid <= self.breakpoints[-1])]
        durations = np.diff(grid)
        keep = durations > 0
        mids = 0.5 * (grid[:-1] + grid[1:])
        values = np.array([self.value_at(t) for t in mids]).reshape(-1, self.m)
        return PiecewiseConstantControl(durations[keep], values[keep])

    def merged(self):
        """Merge adjacent segments carrying identical values."""
        d = [self.durations[0]]
        v = [self.values[0]]
        for dk, vk in zip(self.durations[1:], self.values[1:]):
            if np.array_equal(vk, v[-1]):
                d[-1] += dk
            else:
                d.append(dk)
                v.append(vk)
        return PiecewiseConstantControl(np.array(d), np.array(v))


# --- system text format -------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<number>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<punct>[=\[\];])
    """,
    re.VERBOSE,
)

_KEYS = ("n", "m", "A", "B", "control_set")


@dataclass
class _Token:
    kind: str
    text: str
    line: int
    column: int


def _tokenize(text):
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = match.lastgroup
        chunk = match.group()
        if kind not in ("ws", "comment"):
            tokens.append(_Token(kind, chunk, line, pos - line_start + 1))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rfind("\n") + 1
        pos = match.end()
    tokens.append(_Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self, offset=0):
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def take(self):
        tok = self.tokens[self.i]
        self.i = min(self.i + 1, len(self.tokens) - 1)
        return tok

    def expect(self, kind, text=None):
        tok = self.take()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = repr(text) if text is not None else kind
            got = repr(tok.text) if tok.kind != "eof" else "end of input"
            raise ParseError(f"expected {want}, got {got}", tok.line, tok.column)
        return tok

    def number(self):
        tok = self.expect("number")
        return float(tok.text), tok

    def integer(self):
        tok = self.expect("number")
        if not re.fullmatch(r"[+-]?\d+", tok.text):
            raise ParseError(f"expected an integer, got {tok.text!r}", tok.line, tok.column)
        return int(tok.text), tok

    def matrix(self):
        open_tok = self.expect("punct", "[")
        rows, current = [], []
        row_tokens = [self.peek()]
        while True:
            tok = self.peek()
            if tok.kind == "number":
                current.append(self.number()[0])
            elif tok.kind == "punct" and tok.text == ";":
                self.take()
                rows.append(current)
                current = []
                row_tokens.append(self.peek())
            elif tok.kind == "punct" and tok.text == "]":
                self.take()
                rows.append(current)
                break
            else:
                got = repr(tok.text) if tok.kind != "eof" else "end of input"
                raise ParseError(f"expected a number, ';' or ']', got {got}", tok.line, tok.column)
        width = len(rows[0])
        for row, tok in zip(rows, row_tokens):
            if len(row) == 0:
                raise ParseError("empty matrix row", tok.line, tok.column)
            if len(row) != width:
                raise ParseError(
                    f"ragged matrix: row has {len(row)} entries, expected {width}",
                    tok.line,
                    tok.column,
                )
        return np.array(rows, dtype=np.float64), open_tok

    def control_set(self):
        kind_tok = self.expect("ident")
        if kind_tok.text not in ("box", "ball"):
            raise ParseError(
                f"control set must be 'box' or 'ball', got {kind_tok.text!r}",
                kind_tok.line,
                kind_tok.column,
            )
        values = [self.number()[0]]
        while self.peek().kind == "number":
            values.append(self.number()[0])
        return kind_tok.text, values, kind_tok


def parse_system(text):
    """Parse a system description into a validated :class:`LinearSystem`.

    Raises
    ------
    ParseError
        Malformed syntax, or matrix shapes that contradict the declared
        ``n``/``m``; the message carries line and column.
    ValidationError
        Well-formed input violating an invariant (``B = 0``, bad radius...).
    """
    p = _Parser(text)
    seen = {}
    while p.peek().kind != "eof":
        key_tok = p.expect("ident")
        if key_tok.text not in _KEYS:
            raise ParseError(f"unknown key {key_tok.text!r}", key_tok.line, key_tok.column)
        if key_tok.text in seen:
            raise ParseError(f"duplicate key {key_tok.text!r}", key_tok.line, key_tok.column)
        p.expect("punct", "=")
        if key_tok.text in ("n", "m"):
            seen[key_tok.text] = p.integer()
        elif key_tok.text in ("A", "B"):
            seen[key_tok.text] = p.matrix()
        else:
            seen[key_tok.text] = p.control_set()
    end = p.peek()
    for key in ("A", "B", "control_set"):
        if key not in seen:
            raise ParseError(f"missing required key {key!r}", end.line, end.column)

    A, a_tok = seen["A"]
    B, b_tok = seen["B"]
    for key in ("n", "m"):
        if key in seen and seen[key][0] < 1:
            _, tok = seen[key]
            raise ValidationError(f"{key} must be at least 1 (line {tok.line})")
    n = seen["n"][0] if "n" in seen else A.shape[0]
    if A.shape[0] != n:
        raise ParseError(f"A: {n} rows expected, got {A.shape[0]}", a_tok.line, a_tok.column)
    if A.shape[1] != n:
        raise ParseError(f"A: {n} columns expected, got {A.shape[1]}", a_tok.line, a_tok.column)
    if B.shape[0] != n:
        raise ParseError(f"B: {n} rows expected, got {B.shape[0]}", b_tok.line, b_tok.column)
    m = seen["m"][0] if "m" in seen else B.shape[1]
    if B.shape[1] != m:
        raise ParseError(f"B: {m} columns expected, got {B.shape[1]}", b_tok.line, b_tok.column)

    kind, values, _ = seen["control_set"]
    if kind == "ball":
        if len(values) != 1:
            raise ValidationError("ball takes exactly one radius")
        K = ControlSet.ball(values[0], m)
    else:
        if len(values) not in (1, m):
            raise ValidationError(f"box takes 1 or {m} half-widths, got {len(values)}")
        K = ControlSet.box(values, m)
    return LinearSystem(A, B, K)


def _fmt_matrix(M):
    return "[" + "; ".join(" ".join(repr(float(x)) for x in row) for row in M) + "]"


def serialize_system(sys):
    """Text form of ``sys``; ``parse_system`` inverts it exactly."""
    K = sys.control_set
    radii = " ".join(repr(r) for r in K.radii)
    return (
        f"n = {sys.n}\n"
        f"m = {sys.m}\n"
        f"A = {_fmt_matrix(sys.A)}\n"
        f"B = {_fmt_matrix(sys.B)}\n"
        f"control_set = {K.kind} {radii}\n"
    )


def load_system(path):
    with open(path, encoding="utf-8") as fh:
        return parse_system(fh.read())


# --- control text format ------------------------------------------------------

def parse_control(text, m=None):
    """Parse ``duration c_1 ... c_m`` lines into a control."""
    durations, values = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            nums = [float(x) for x in parts]
        except ValueError as exc:
            raise ParseError(str(exc), lineno, 1) from None
        if len(nums) < 2:
            raise ParseError("a segment needs a duration and at least one value", lineno, 1)
        if m is not None and len(nums) != m + 1:
            raise ParseError(f"expected {m} control values, got {len(nums) - 1}", lineno, 1)
        if values and len(nums) - 1 != len(values[0]):
            raise ParseError("inconsistent number of control values", lineno, 1)
        if not all(np.isfinite(nums)):
            raise ParseError("non-finite number", lineno, 1)
        if nums[0] <= 0:
            raise ParseError("segment duration must be positive", lineno, 1)
        durations.append(nums[0])
        values.append(nums[1:])
    if not durations:
        raise ParseError("control file has no segments", 1, 1)
    return PiecewiseConstantControl(np.array(durations), np.array(values))


def format_control(ctrl, header=None):
    lines = []
    if header:
        lines.extend(f"# {h}" for h in header)
    for d, v in zip(ctrl.durations, ctrl.values):
        lines.append(" ".join([repr(float(d))] + [repr(float(x)) for x in v]))
    return "\n".join(lines) + "\n"
