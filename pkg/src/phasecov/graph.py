"""Model specifications, symmetry groups, and foveal covariance edge sets.

An edge pairs two vertex classes (channel, k) at a relative pixel offset; the
first vertex is pinned to position 0 (translation quotient).  Named presets
A-D reproduce the reference model families; their edge policies (spatial
windows, exponent pairs, angular/scale neighbours) are calibrated so that
|E_G|/d matches the reference relative model sizes at d = 256^2, J = 5,
Q = 16:

    A: 3.6e-2   B: 1.1e-1   C: 1.7e-1   D: 1.2e-2

Spatial windows are inclusive Euclidean balls on the coarser of the two
channel lattices.  Model A uses radius 3: the reference size 3.6e-2 equals
81 channels x 29 offsets, which no radius-2 window reproduces.  Model D is
rotation invariant; its edges live at a single spatial position and cover all
relative angles, which is the angular-Fourier (m-diagonal) parameterization.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .wavelets import LOWPASS


@dataclass(frozen=True)
class SymmetryGroup:
    """Symmetries averaged by the estimators; translations are always on."""

    rotations: bool = False
    line_reflection: bool = False
    sign_change: bool = False
    central_reflection: bool = False

    def to_dict(self):
        return {
            "rotations": self.rotations,
            "line_reflection": self.line_reflection,
            "sign_change": self.sign_change,
            "central_reflection": self.central_reflection,
        }


@dataclass(frozen=True)
class Edge:
    """Ordered vertex pair ((ch, k) at 0, (ch2, k2) at pixel offset du)."""

    ch: object  # (j, ell) or LOWPASS
    k: int
    ch2: object
    k2: int
    du: tuple  # pixel offset of the second vertex

    def key(self):
        return (self.ch, self.k, self.ch2, self.k2, self.du)


@dataclass
class OptimizerSettings:
    max_iter: int = 5000
    memory: int = 10
    c1: float = 1e-4
    c2: float = 0.9
    gtol: float = 1e-8
    eps_ratio: float = 1e-3  # stop when loss < eps_ratio * initial loss
    restarts: int = 10
    seed: int = 0

    def to_dict(self):
        return {
            "max_iter": self.max_iter,
            "memory": self.memory,
            "c1": self.c1,
            "c2": self.c2,
            "gtol": self.gtol,
            "eps_ratio": self.eps_ratio,
            "restarts": self.restarts,
            "seed": self.seed,
        }


@dataclass
class ModelSpec:
    """Foveal covariance model: wavelet geometry, exponents, neighbourhoods."""

    name: str = "custom"
    J: int = 5
    Q: int = 16
    k_min: int = 1
    k_max: int = 1
    delta_n: int = 2
    delta_j: int = 0
    delta_ell: int = 0
    group: SymmetryGroup = field(default_factory=SymmetryGroup)
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)

    def validate(self):
        if self.k_min > 1 or self.k_max < 1:
            raise ConfigError(f"need k_min <= 1 <= k_max, got [{self.k_min}, {self.k_max}]")
        if self.delta_ell > self.Q // 2:
            raise ConfigError(f"delta_ell={self.delta_ell} exceeds Q/2={self.Q // 2}")
        if self.delta_n < 0 or self.delta_j < 0 or self.delta_ell < 0:
            raise ConfigError("neighbourhood parameters must be >= 0")
        return self


def model_preset(name, J=5, Q=16, **overrides):
    """Named presets of the reference model families."""
    name = name.upper()
    if name == "A":
        # radius-3 window: 81 channels x 29 offsets reproduces |E|/d = 3.6e-2
        spec = ModelSpec(name="A", J=J, Q=Q, k_min=1, k_max=1,
                         delta_n=3, delta_j=0, delta_ell=0)
    elif name == "B":
        spec = ModelSpec(name="B", J=J, Q=Q, k_min=0, k_max=1,
                         delta_n=2, delta_j=0, delta_ell=Q // 4)
    elif name == "C":
        spec = ModelSpec(name="C", J=J, Q=Q, k_min=0, k_max=2,
                         delta_n=2, delta_j=1, delta_ell=Q // 4)
    elif name == "D":
        spec = ModelSpec(name="D", J=J, Q=Q, k_min=0, k_max=2,
                         delta_n=0, delta_j=1, delta_ell=Q // 4,
                         group=SymmetryGroup(rotations=True))
    else:
        raise ConfigError(f"unknown model preset {name!r}")
    return replace(spec, **overrides).validate()


@dataclass
class EdgeSet:
    """Foveal edge list for a model spec (translation-quotient form)."""

    edges: list
    spec: ModelSpec

    def __len__(self):
        return len(self.edges)

    def ratio(self, d):
        return len(self.edges) / d

    def vertex_classes(self):
        seen = {}
        for e in self.edges:
            seen[(e.ch, e.k)] = None
            seen[(e.ch2, e.k2)] = None
        return list(seen)


def ball_offsets(radius):
    """Integer offsets with |n| <= radius (Euclidean, inclusive)."""
    r = int(radius)
    return [
        (a, b)
        for a in range(-r, r + 1)
        for b in range(-r, r + 1)
        if a * a + b * b <= r * r
    ]


def half_offsets(radius):
    """One representative of each +/-n pair in the ball, plus the origin."""
    out = []
    for n in ball_offsets(radius):
        if n == (0, 0) or n > (0, 0):
            out.append(n)
    return out


def circular_distance(l1, l2, Q):
    d = abs(l1 - l2) % Q
    return min(d, Q - d)


def _pixels(n, stride):
    return (n[0] * stride, n[1] * stride)


def _bands(spec):
    return [(j, ell) for j in range(1, spec.J + 1) for ell in range(spec.Q)]


def _edges_model_a(spec):
    edges = []
    window = ball_offsets(spec.delta_n)
    for ch in _bands(spec) + [LOWPASS]:
        stride = 2 ** (spec.J - 1) if ch == LOWPASS else 2 ** (ch[0] - 1)
        for n in window:
            edges.append(Edge(ch, 1, ch, 1, _pixels(n, stride)))
    return edges


def _edges_model_b(spec, kpairs_same=((0, 0), (1, 1), (0, 1))):
    edges = []
    window = ball_offsets(spec.delta_n)
    for (j, ell) in _bands(spec):
        stride = 2 ** (j - 1)
        for (k, k2) in kpairs_same:
            for n in window:
                edges.append(Edge((j, ell), k, (j, ell), k2, _pixels(n, stride)))
        for dl in range(1, spec.delta_ell + 1):  # modulus across angles
            ell2 = (ell + dl) % spec.Q
            for n in window:
                edges.append(Edge((j, ell), 0, (j, ell2), 0, _pixels(n, stride)))
    for k in (0, 1):
        stride = 2 ** (spec.J - 1)
        for n in window:
            edges.append(Edge(LOWPASS, k, LOWPASS, k, _pixels(n, stride)))
    return edges


CROSS_SCALE_KPAIRS = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2))


def _edges_model_c(spec):
    edges = _edges_model_b(
        spec, kpairs_same=((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))
    )
    for (j, ell) in _bands(spec):
        if j + 1 > spec.J:
            continue
        for (k, k2) in CROSS_SCALE_KPAIRS:
            edges.append(Edge((j, ell), k, (j + 1, ell), k2, (0, 0)))
    return edges


def _edges_model_d(spec):
    # m-diagonal parameterization: all relative angles at one spatial
    # position, Q entries per (scale pair, exponent pair) quadruple
    edges = []
    same = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))
    for j in range(1, spec.J + 1):
        for (k, k2) in same:
            for dl in range(spec.Q):
                edges.append(Edge((j, 0), k, (j, dl), k2, (0, 0)))
        if j + 1 <= spec.J:
            for (k, k2) in CROSS_SCALE_KPAIRS:
                for dl in range(spec.Q):
                    edges.append(Edge((j, 0), k, (j + 1, dl), k2, (0, 0)))
    for k in (0, 1):
        edges.append(Edge(LOWPASS, k, LOWPASS, k, (0, 0)))
    return edges


def _edges_custom(spec):
    """Generic product policy: all channel pairs within (delta_j, delta_ell),
    all canonical exponent pairs, ball(delta_n) offsets on the coarser lattice."""
    edges = []
    kk = [(k, k2) for k in range(spec.k_min, spec.k_max + 1)
          for k2 in range(spec.k_min, spec.k_max + 1) if k <= k2]
    bands = _bands(spec)
    for (j, ell) in bands:
        for j2 in range(j, min(spec.J, j + spec.delta_j) + 1):
            for ell2 in range(spec.Q):
                dl = circular_distance(ell, ell2, spec.Q)
                if dl > spec.delta_ell:
                    continue
                same_channel = (j2, ell2) == (j, ell)
                if j2 == j and not same_channel and ell2 < ell and circular_distance(ell2, ell, spec.Q) <= spec.delta_ell:
                    # unordered same-scale channel pair already emitted
                    continue
                stride = 2 ** (max(j, j2) - 1)
                window = half_offsets(spec.delta_n) if same_channel else ball_offsets(spec.delta_n)
                for (k, k2) in kk:
                    for n in window:
                        if same_channel and n == (0, 0) and k == k2:
                            pass  # diagonal edge, keep
                        edges.append(Edge((j, ell), k, (j2, ell2), k2, _pixels(n, stride)))
    stride = 2 ** (spec.J - 1)
    for k in (0, 1):
        if spec.k_min <= k <= spec.k_max:
            for n in half_offsets(spec.delta_n):
                edges.append(Edge(LOWPASS, k, LOWPASS, k, _pixels(n, stride)))
    return edges


def build_foveal_edges(spec):
    """Edge set of a model spec (see module docstring for preset policies)."""
    spec.validate()
    builders = {"A": _edges_model_a, "B": _edges_model_b, "C": _edges_model_c,
                "D": _edges_model_d}
    builder = builders.get(spec.name.upper(), _edges_custom)
    edges = builder(spec)
    if spec.group.sign_change:
        edges = [e for e in edges if (e.k + e.k2) % 2 == 0]
    if spec.group.rotations:
        bad = [e for e in edges if e.du != (0, 0)]
        if bad:
            raise ConfigError(
                "rotation averaging requires all edges at a single spatial position"
            )
    return EdgeSet(edges=edges, spec=spec)
