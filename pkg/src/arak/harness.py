"""Run configuration, statistical reports, SVG export and provenance bundles."""

import json
import math
import os
import subprocess
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import __version__
from . import rng as rngs
from .arak_dynamics import extreme_vertex_counts
from .contour_bd import ContourEnsemble
from .contour_measure import Contour, self_avoiding_lifetimes
from .disagreement import DisagreementLoop
from .geometry import ConvexDomain, PolygonalConfiguration, arrangement_faces
from .gibbs import ColouredConfiguration

DEFAULT_THRESHOLDS = {"level": 0.01, "z_max": 3.0}


class BudgetError(ValueError):
    """Too few samples for the requested statistic."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def parse_domain(text):
    """Domain from a short text description.

    ``square:H`` is (-H, H)^2, ``box:x0,y0,x1,y1``, ``disk:R`` or
    ``disk:cx,cy,R``, ``polygon:x,y;x,y;...``; a JSON object is also accepted.
    """
    if isinstance(text, ConvexDomain):
        return text
    if isinstance(text, dict):
        return ConvexDomain.from_json(text)
    s = str(text).strip()
    if s.startswith("{"):
        return ConvexDomain.from_json(json.loads(s))
    kind, _, rest = s.partition(":")
    if kind == "polygon":
        return ConvexDomain.polygon([tuple(map(float, p.split(","))) for p in rest.split(";")])
    nums = [float(x) for x in rest.split(",")] if rest else []
    if kind == "square" and len(nums) == 1:
        return ConvexDomain.square(nums[0])
    if kind == "box" and len(nums) == 4:
        return ConvexDomain.box(*nums)
    if kind == "disk" and len(nums) in (1, 3):
        return ConvexDomain.disk((0.0, 0.0), nums[0]) if len(nums) == 1 else \
            ConvexDomain.disk((nums[0], nums[1]), nums[2])
    raise ValueError(f"cannot parse domain {text!r}")


def _parse_value(text):
    text = text.strip()
    try:
        return json.loads(text)
    except ValueError:
        return text


@dataclass
class RunConfig:
    """Flat run description; every key not named below lands in ``options``.

    Threshold keys (``level``, ``z_max``) are kept in ``thresholds`` so that
    report pass/fail criteria travel with the data.
    """

    subcommand: str = ""
    domain: str = "square:1"
    seed: int = 0
    alpha: float = 0.0
    beta: float = 0.0
    a: float = 0.0
    b: float = 0.0
    out: str = "runs"
    options: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=lambda: dict(DEFAULT_THRESHOLDS))

    _FIELDS = ("subcommand", "domain", "seed", "alpha", "beta", "a", "b", "out")

    @classmethod
    def from_text(cls, text):
        kv = {}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"expected key=value, got {raw!r}")
            k, v = line.split("=", 1)
            kv[k.strip()] = _parse_value(v)
        return cls().updated(kv)

    @classmethod
    def load(cls, path):
        return cls.from_text(Path(path).read_text())

    def updated(self, kv):
        """A copy with ``kv`` applied (None values are ignored)."""
        d = asdict(self)
        d["options"] = dict(self.options)
        d["thresholds"] = dict(self.thresholds)
        for k, v in kv.items():
            if v is None:
                continue
            if k in self._FIELDS:
                d[k] = v
            elif k in DEFAULT_THRESHOLDS:
                d["thresholds"][k] = float(v)
            else:
                d["options"][k] = v
        d["seed"] = int(d["seed"])
        for k in ("alpha", "beta", "a", "b"):
            d[k] = float(d[k])
        d["domain"] = str(d["domain"])
        return RunConfig(**d)

    def with_env(self, environ=None):
        env = os.environ if environ is None else environ
        if env.get("ARAK_SEED"):
            return self.updated({"seed": int(env["ARAK_SEED"])})
        return self

    def get(self, key, default=None):
        return self.options.get(key, default)

    @property
    def domain_obj(self):
        return parse_domain(self.domain)

    def to_text(self):
        lines = [f"{k} = {json.dumps(getattr(self, k)) if not isinstance(getattr(self, k), str) else getattr(self, k)}"
                 for k in self._FIELDS]
        lines += [f"{k} = {json.dumps(v)}" for k, v in sorted(self.thresholds.items())]
        lines += [f"{k} = {v if isinstance(v, str) else json.dumps(v)}" for k, v in sorted(self.options.items())]
        return "\n".join(lines) + "\n"

    def to_json(self):
        return asdict(self)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class StatReport:
    name: str
    estimate: float
    se: float
    test: str
    p_value: float
    threshold: float
    passed: bool
    acceptance: bool = False
    details: dict = field(default_factory=dict)

    def line(self):
        flag = "PASS" if self.passed else "FAIL"
        p = "" if self.p_value is None or math.isnan(self.p_value) else f" p={self.p_value:.3g}"
        return f"[{flag}] {self.name}: {self.estimate:.6g} (se {self.se:.3g}; {self.test}{p}; threshold {self.threshold:g})"

    def to_json(self):
        d = asdict(self)
        return json.loads(json.dumps(d, default=_json_default))


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.bool_):
        return bool(o)
    return str(o)


def holm(pvalues):
    """Holm step-down adjusted p-values."""
    p = np.asarray(pvalues, float)
    m = len(p)
    order = np.argsort(p, kind="mergesort")
    adj = np.empty(m)
    running = 0.0
    for rank, i in enumerate(order):
        running = max(running, min(1.0, (m - rank) * p[i]))
        adj[i] = running
    return adj


def stats_extreme_vertices(samples, domain, thresholds=None, min_samples=30):
    """Poisson checks of the four extreme-vertex counts.

    ``samples`` holds configurations or count dicts.  Each direction gets a
    mean report (target pi |D|, |z| <= z_max) and a dispersion report
    (variance / mean = 1 within z_max SE); a final report is the one-way
    ANOVA across the four directions.
    """
    th = {**DEFAULT_THRESHOLDS, **(thresholds or {})}
    if len(samples) < min_samples:
        raise BudgetError(f"need at least {min_samples} samples, got {len(samples)}")
    counts = [s if isinstance(s, dict) else extreme_vertex_counts(s, domain) for s in samples]
    target = math.pi * domain.area
    n = len(counts)
    reports = []
    groups = []
    for d in ("left", "right", "lower", "upper"):
        x = np.array([c[d] for c in counts], float)
        groups.append(x)
        se = math.sqrt(target / n)
        z = (x.mean() - target) / se
        reports.append(StatReport(f"extreme_{d}_mean", float(x.mean()), se, "z vs pi|D|",
                                  float(2 * stats.norm.sf(abs(z))), th["z_max"], abs(z) <= th["z_max"],
                                  True, {"target": target, "z": float(z), "n": n}))
        ratio = x.var(ddof=1) / x.mean()
        se_r = math.sqrt(2.0 / (n - 1) + 1.0 / (n * target))
        zr = (ratio - 1.0) / se_r
        reports.append(StatReport(f"extreme_{d}_dispersion", float(ratio), se_r, "z vs 1",
                                  float(2 * stats.norm.sf(abs(zr))), th["z_max"], abs(zr) <= th["z_max"],
                                  True, {"z": float(zr), "n": n}))
    f, p = stats.f_oneway(*groups)
    reports.append(StatReport("extreme_directions_anova", float(f), float("nan"), "one-way ANOVA",
                              float(p), th["level"], bool(p >= th["level"]), True))
    return reports


def stats_two_sampler(sample_a, sample_b, statistics=None, thresholds=None, name="two_sampler",
                      acceptance=True):
    """Two-sample KS per statistic with Holm correction.

    Samples are lists of dicts (statistic name -> value).  A statistic
    passes when its Holm-adjusted p-value is at least the level.
    """
    th = {**DEFAULT_THRESHOLDS, **(thresholds or {})}
    keys = list(statistics) if statistics is not None else sorted(sample_a[0])
    raw = []
    for k in keys:
        a = np.array([s[k] for s in sample_a], float)
        b = np.array([s[k] for s in sample_b], float)
        res = stats.ks_2samp(a, b)
        raw.append((k, a, b, float(res.statistic), float(res.pvalue)))
    adj = holm([r[4] for r in raw])
    out = []
    for (k, a, b, d, p), pa in zip(raw, adj):
        out.append(StatReport(f"{name}_{k}", d, float("nan"), "KS two-sample (Holm)", float(pa),
                              th["level"], bool(pa >= th["level"]), acceptance,
                              {"raw_p": p, "n_a": len(a), "n_b": len(b),
                               "mean_a": float(a.mean()), "mean_b": float(b.mean())}))
    return out


def estimate_connective_constant(n_walks, seed, t_max=12.0, t_step=0.5, t_min=1.0, min_survivors=100,
                                 confidence=0.99, n_boot=400, min_walks=10 ** 4):
    """Decay rate of the survival of the self-avoiding walk.

    Fits log P(lifetime > T) linearly in T over a grid from ``t_min`` up to
    the last point with at least ``min_survivors`` survivors; the estimate
    is minus the slope.  The interval comes from a multinomial bootstrap of
    the binned lifetimes; the report passes when its lower end is positive.
    """
    if n_walks < min_walks:
        raise BudgetError(f"need at least {min_walks} walks")
    life, _ = self_avoiding_lifetimes(n_walks, rngs.stream(seed, rngs.WALK, "connective"), t_max)
    grid = np.arange(0.0, t_max + 1e-12, t_step)
    surv_counts = np.array([(life >= t).sum() for t in grid])
    use = (grid >= t_min) & (surv_counts >= min_survivors)
    if use.sum() < 3:
        raise BudgetError("too few survivors for a survival fit")
    T = grid[use]

    def fit(sc):
        return -np.polyfit(T, np.log(sc[use] / n_walks), 1)[0]

    eps = float(fit(surv_counts))
    # lifetimes binned on the grid; resampling walks is a multinomial draw over bins
    edges = np.append(grid, np.inf)
    binc = np.histogram(life, bins=edges)[0]
    g = rngs.stream(seed, rngs.STATS, "connective-boot")
    boots = []
    for _ in range(n_boot):
        bc = g.multinomial(n_walks, binc / n_walks)
        sc = np.cumsum(bc[::-1])[::-1]
        if np.any(sc[use] == 0):
            boots.append(0.0)
            continue
        boots.append(fit(sc))
    boots = np.array(boots)
    alpha = 1.0 - confidence
    lo, hi = np.quantile(boots, [alpha / 2, 1 - alpha / 2])
    p = float((np.sum(boots <= 0) + 1) / (n_boot + 1))
    return StatReport("connective_constant", eps, float(boots.std(ddof=1)), "bootstrap survival-slope fit",
                      p, 0.0, bool(lo > 0), True,
                      {"ci": [float(lo), float(hi)], "confidence": confidence, "grid": T.tolist(),
                       "survival": (surv_counts / n_walks).tolist(), "survival_grid": grid.tolist(),
                       "n_walks": n_walks})


# ---------------------------------------------------------------------------
# SVG export
# ---------------------------------------------------------------------------

DEFAULT_STYLE = {"width": 400, "margin": 0.05, "stroke": "#000000", "stroke_width": 1.5,
                 "fill": "#000000", "background": "#ffffff", "outline": "#808080",
                 "positive": "#d62728", "negative": "#1f77b4", "precision": 4}


def _fmt(x, prec):
    s = f"{x:.{prec}f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _path(points, prec, close=True):
    if not len(points):
        return ""
    head = f"M{_fmt(points[0][0], prec)},{_fmt(points[0][1], prec)}"
    body = "".join(f"L{_fmt(x, prec)},{_fmt(y, prec)}" for x, y in points[1:])
    return head + body + ("Z" if close else "")


def _domain_outline(domain, n=256):
    if domain.kind == "disk":
        t = np.linspace(0, 2 * np.pi, n, endpoint=False)
        return np.column_stack([domain.center[0] + domain.radius * np.cos(t),
                                domain.center[1] + domain.radius * np.sin(t)])
    return domain.vertices


def export_svg(obj, domain, style=None):
    """Deterministic SVG text for a configuration, coloured configuration,
    contour ensemble or disagreement loop inside ``domain``.

    Black faces of (coloured) configurations are filled; loop parts present
    only in the new configuration use the ``positive`` colour and parts only
    in the old one the ``negative`` colour.
    """
    st = {**DEFAULT_STYLE, **(style or {})}
    prec = int(st["precision"])
    outline = _domain_outline(domain)
    lo, hi = outline.min(0), outline.max(0)
    span = float(max(hi - lo))
    pad = st["margin"] * span
    x0, y0 = lo - pad
    w_world = float(hi[0] - lo[0] + 2 * pad)
    h_world = float(hi[1] - lo[1] + 2 * pad)
    W = int(st["width"])
    H = int(round(W * h_world / w_world))
    sw = st["stroke_width"] * w_world / W
    # y axis flipped so that the picture has the usual orientation
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
             f'viewBox="{_fmt(x0, prec)} {_fmt(-(y0 + h_world), prec)} {_fmt(w_world, prec)} {_fmt(h_world, prec)}">',
             '<g transform="scale(1,-1)">',
             f'<path d="{_path(outline, prec)}" fill="{st["background"]}" stroke="{st["outline"]}" '
             f'stroke-width="{_fmt(sw, prec)}"/>']
    if isinstance(obj, PolygonalConfiguration):
        obj = ColouredConfiguration(obj, False)
    if isinstance(obj, ColouredConfiguration):
        part = arrangement_faces(obj.base, domain, check=False)
        for face in part.faces:
            if (face.parity % 2) ^ int(obj.flip):
                d = "".join(_path(p, prec) for p in face.polygon_paths(domain))
                parts.append(f'<path d="{d}" fill="{st["fill"]}" fill-rule="evenodd" stroke="none"/>')
        for s in obj.base.segments:
            parts.append(f'<path d="{_path(s, prec, close=False)}" stroke="{st["stroke"]}" '
                         f'stroke-width="{_fmt(sw, prec)}" fill="none"/>')
    elif isinstance(obj, (ContourEnsemble, list, tuple)):
        contours = obj.contours if isinstance(obj, ContourEnsemble) else obj
        for c in contours:
            v = c.vertices if isinstance(c, Contour) else np.asarray(c, float)
            parts.append(f'<path d="{_path(v, prec)}" stroke="{st["stroke"]}" '
                         f'stroke-width="{_fmt(sw, prec)}" fill="none"/>')
    elif isinstance(obj, DisagreementLoop):
        for segs, colour in ((obj.positive, st["positive"]), (obj.negative, st["negative"])):
            for s in np.asarray(segs).reshape(-1, 2, 2):
                parts.append(f'<path d="{_path(s, prec, close=False)}" stroke="{colour}" '
                             f'stroke-width="{_fmt(sw, prec)}" fill="none"/>')
    else:
        raise TypeError(f"cannot render {type(obj).__name__}")
    parts += ["</g>", "</svg>"]
    return "\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# provenance
# ---------------------------------------------------------------------------

def version_string():
    """Package version plus a git-describe suffix when run from a checkout."""
    try:
        here = Path(__file__).resolve().parent
        out = subprocess.run(["git", "describe", "--always", "--dirty"], cwd=here, capture_output=True,
                             text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def write_bundle(out_dir, config, reports=(), artifacts=None):
    """Write config, seed, version and reports (plus named artifacts) to ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(config.to_text())
    meta = {"config": config.to_json(), "seed": config.seed, "version": version_string()}
    (out / "provenance.json").write_text(json.dumps(meta, indent=2, sort_keys=True, default=_json_default))
    (out / "reports.json").write_text(json.dumps([r.to_json() for r in reports], indent=2, sort_keys=True))
    for name, text in (artifacts or {}).items():
        (out / name).write_text(text)
    return out


# ---------------------------------------------------------------------------
# sample streams
# ---------------------------------------------------------------------------

STREAM_SCHEMA = "arak.sample"
STREAM_VERSION = 1


def sample_record(obj, domain, **meta):
    """One JSON line for a configuration, coloured configuration or contour ensemble."""
    rec = {"schema": STREAM_SCHEMA, "version": STREAM_VERSION, "domain": domain.to_json(), **meta}
    if isinstance(obj, ColouredConfiguration):
        rec.update(kind="configuration", flip=bool(obj.flip), segments=obj.base.segments.tolist())
    elif isinstance(obj, PolygonalConfiguration):
        rec.update(kind="configuration", segments=obj.segments.tolist())
    elif isinstance(obj, ContourEnsemble):
        rec.update(kind="ensemble", contours=[c.vertices.tolist() for c in obj.contours])
    else:
        raise TypeError(f"cannot serialise {type(obj).__name__}")
    return json.dumps(rec, sort_keys=True, default=_json_default)


def read_record(line):
    """(object, domain, record) from a line written by :func:`sample_record`."""
    rec = json.loads(line)
    if rec.get("schema") != STREAM_SCHEMA or rec.get("version") != STREAM_VERSION:
        raise ValueError(f"unsupported sample schema {rec.get('schema')!r} v{rec.get('version')}")
    domain = ConvexDomain.from_json(rec["domain"])
    if rec["kind"] == "configuration":
        base = PolygonalConfiguration.from_segments(np.asarray(rec["segments"], float).reshape(-1, 2, 2))
        obj = ColouredConfiguration(base, bool(rec["flip"])) if "flip" in rec else base
    elif rec["kind"] == "ensemble":
        obj = ContourEnsemble(tuple(Contour(v) for v in rec["contours"]))
    else:
        raise ValueError(f"unknown record kind {rec['kind']!r}")
    return obj, domain, rec
