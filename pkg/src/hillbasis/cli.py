"""Command line driver: ``hillbasis run|compare|validate``.

Configuration files are INI documents (UTF-8)::

    [potential]
    family = mathieu          ; free, table, w_table, dirac_table, mathieu,
                              ; gasymov, delta_comb, four_harmonic, random
    q = 1.0                   ; family parameters, see FAMILY_KEYS

    [run]
    bc = per+, per-
    cutoff = 64
    window = 4, 16            ; optional, default (N* + 1, cutoff // 2)
    workers = 1
    projections = yes
    lp = yes
    seed = 20240101           ; Orlicz sample vectors
    orlicz_samples = 50

    [tolerances]
    t_floor = 1e-3            ; any field of Tolerances

    [output]
    dir = out
    prefix = mathieu

Coefficient tables are written ``index:value`` separated by commas, with
values in Python complex syntax (``2:1``, ``-4:5``, ``2:1+2j``).

``run`` writes ``<prefix>.json`` (structured report), one
``<prefix>_<bc>.tsv`` plot table per boundary condition and
``<prefix>_summary.txt``.  Exit codes: 0 success, 2 configuration error,
3 computation error.
"""
from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from . import potential as pt
from .beta import gap_bound_check
from .criteria import HOLDS, analyze
from .discretize import M, M1, M2, BoundaryCondition, Tolerances
from .geometry import GeometryError, orlicz_check

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_config", "build_potential",
           "run_experiment", "write_outputs", "compare_reports", "main"]

EXIT_OK, EXIT_CONFIG, EXIT_COMPUTE = 0, 2, 3

FAMILY_KEYS = {
    "free": {"kind"},
    "table": {"coeffs"},
    "w_table": {"w"},
    "dirac_table": {"p", "q"},
    "mathieu": {"q"},
    "gasymov": {"c", "k", "a"},
    "delta_comb": {"points", "weights", "k"},
    "four_harmonic": {"reading"},
    "random": {"seed", "index", "max_harmonics", "degree", "scale"},
}
RUN_KEYS = {"bc", "cutoff", "window", "workers", "projections", "lp", "seed", "orlicz_samples", "validate"}
OUTPUT_KEYS = {"dir", "prefix"}


class ConfigError(ValueError):
    """Invalid configuration; the message names the section, key and line."""


class ComputationError(RuntimeError):
    def __init__(self, stage, exc):
        super().__init__(f"{stage}: {type(exc).__name__}: {exc}")
        self.stage = stage


@dataclass
class ExperimentConfig:
    family: str
    params: dict
    bcs: list
    cutoff: int
    window: tuple | None
    workers: int = 1
    projections: bool = True
    lp: bool = True
    validate: bool = True
    seed: int = 20240101
    orlicz_samples: int = 50
    tolerances: Tolerances = field(default_factory=Tolerances)
    out_dir: str = "out"
    prefix: str = "report"
    source: str = ""

    def effective(self):
        """All effective settings, defaults included, as plain data."""
        return {
            "potential": {"family": self.family, **{k: _plain(v) for k, v in sorted(self.params.items())}},
            "run": {"bc": [b.value for b in self.bcs], "cutoff": self.cutoff,
                    "window": list(self.window) if self.window else None, "workers": self.workers,
                    "projections": self.projections, "lp": self.lp, "validate": self.validate,
                    "seed": self.seed, "orlicz_samples": self.orlicz_samples},
            "tolerances": {k: _plain(v) for k, v in self.tolerances.as_dict().items()},
            "output": {"dir": self.out_dir, "prefix": self.prefix},
        }

    def digest(self):
        """SHA-256 of the effective computational settings (output paths excluded)."""
        eff = self.effective()
        eff.pop("output")
        eff["run"].pop("workers")
        return hashlib.sha256(json.dumps(eff, sort_keys=True).encode()).hexdigest()

    def potential_digest(self):
        return hashlib.sha256(json.dumps(self.effective()["potential"], sort_keys=True).encode()).hexdigest()


def _plain(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return [[k, _plain(x)] for k, x in sorted(v.items())]
    return v


# ---------------------------------------------------------------- config


def _line_of(text, section, key):
    current = None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
        elif current == section and line.split("=", 1)[0].split(":", 1)[0].strip().lower() == key:
            return i
    return None


class _Reader:
    def __init__(self, cp, text):
        self.cp, self.text = cp, text

    def where(self, section, key):
        line = _line_of(self.text, section, key)
        return f"[{section}] {key}" + (f" (line {line})" if line else "")

    def fail(self, section, key, msg):
        raise ConfigError(f"{self.where(section, key)}: {msg}")

    def get(self, section, key, conv, default=None, required=False):
        if not self.cp.has_option(section, key):
            if required:
                raise ConfigError(f"[{section}] {key}: required field missing")
            return default
        raw = self.cp.get(section, key).strip()
        try:
            return conv(raw)
        except (ValueError, TypeError, SyntaxError) as exc:
            self.fail(section, key, f"cannot parse {raw!r} ({exc})")


def _bool(raw):
    low = raw.lower()
    if low in ("1", "yes", "true", "on"):
        return True
    if low in ("0", "no", "false", "off"):
        return False
    raise ValueError("expected yes/no")


def _complex(raw):
    return complex(raw.replace(" ", ""))


def _list(conv):
    def parse(raw):
        return [conv(x.strip()) for x in raw.split(",") if x.strip()]
    return parse


def _table(raw):
    out = []
    for item in raw.replace("\n", ",").split(","):
        item = item.strip()
        if not item:
            continue
        if ":" not in item:
            raise ValueError(f"entry {item!r} is not index:value")
        k, v = item.split(":", 1)
        out.append((int(k), _complex(v)))
    return out


def parse_config(text, source="<string>"):
    """Parse an INI document into an :class:`ExperimentConfig`."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    rd = _Reader(cp, text)
    known = {"potential", "run", "tolerances", "output"}
    for sec in cp.sections():
        if sec not in known:
            raise ConfigError(f"[{sec}] (line {_line_of(text, sec, '') or '?'}): unknown section")
    if not cp.has_section("potential"):
        raise ConfigError("[potential]: required section missing")
    family = rd.get("potential", "family", str, required=True).lower()
    if family not in FAMILY_KEYS:
        rd.fail("potential", "family", f"unknown family {family!r}; expected one of {', '.join(sorted(FAMILY_KEYS))}")
    for key in cp.options("potential"):
        if key != "family" and key not in FAMILY_KEYS[family]:
            rd.fail("potential", key, f"not a parameter of family {family!r}")
    params = _family_params(rd, family)

    for sec, allowed in (("run", RUN_KEYS), ("output", OUTPUT_KEYS),
                         ("tolerances", {f.name for f in fields(Tolerances)})):
        if cp.has_section(sec):
            for key in cp.options(sec):
                if key not in allowed:
                    rd.fail(sec, key, "unknown field")

    bcs = rd.get("run", "bc", _list(str), default=["per+", "per-"])
    try:
        bcs = [BoundaryCondition.parse(b) for b in bcs]
    except ValueError as exc:
        rd.fail("run", "bc", str(exc))
    if not bcs or any(not b.periodic_type for b in bcs):
        rd.fail("run", "bc", "give one or more of per+, per- (Dirichlet data is computed with them)")
    cutoff = rd.get("run", "cutoff", int, default=64)
    if cutoff < 8:
        rd.fail("run", "cutoff", f"cutoff must be >= 8, got {cutoff}")
    window = rd.get("run", "window", _list(int))
    if window is not None:
        if len(window) != 2 or not 0 <= window[0] <= window[1]:
            rd.fail("run", "window", "expected 'n_min, n_max' with 0 <= n_min <= n_max")
        if window[1] > cutoff // 2:
            rd.fail("run", "window", f"n_max = {window[1]} exceeds cutoff // 2 = {cutoff // 2}")
        window = tuple(window)
    workers = rd.get("run", "workers", int, default=1)
    if workers < 1:
        rd.fail("run", "workers", "must be >= 1")
    samples = rd.get("run", "orlicz_samples", int, default=50)
    if samples < 0:
        rd.fail("run", "orlicz_samples", "must be >= 0")

    overrides = {}
    if cp.has_section("tolerances"):
        defaults = Tolerances()
        for key in cp.options("tolerances"):
            ref = getattr(defaults, key)
            raw = cp.get("tolerances", key).strip()
            try:
                if key == "precision":
                    if raw not in ("auto", "double"):
                        raise ValueError("expected auto or double")
                    val = raw
                elif key == "jordan_tol" and raw.lower() in ("auto", "none"):
                    val = None
                elif isinstance(ref, bool):
                    val = _bool(raw)
                elif isinstance(ref, int):
                    val = int(raw)
                else:
                    val = float(raw)
            except ValueError as exc:
                rd.fail("tolerances", key, f"cannot parse {raw!r} ({exc})")
            if isinstance(val, (int, float)) and not isinstance(val, bool) and val < 0:
                rd.fail("tolerances", key, "must be non-negative")
            overrides[key] = val
    tol = Tolerances().replace(**overrides)

    cfg = ExperimentConfig(
        family=family, params=params, bcs=bcs, cutoff=cutoff, window=window, workers=workers,
        projections=rd.get("run", "projections", _bool, default=True),
        lp=rd.get("run", "lp", _bool, default=True),
        validate=rd.get("run", "validate", _bool, default=True),
        seed=rd.get("run", "seed", int, default=20240101), orlicz_samples=samples, tolerances=tol,
        out_dir=rd.get("output", "dir", str, default="out"),
        prefix=rd.get("output", "prefix", str, default="report"), source=source,
    )
    try:
        build_potential(cfg)
    except (pt.PotentialError, ValueError) as exc:
        raise ConfigError(f"[potential] ({source}): {exc}") from exc
    return cfg


def _family_params(rd, family):
    g = rd.get
    p = {}
    if family == "free":
        p["kind"] = g("potential", "kind", str, default="hill").lower()
        if p["kind"] not in ("hill", "dirac"):
            rd.fail("potential", "kind", "expected hill or dirac")
    elif family == "table":
        p["coeffs"] = g("potential", "coeffs", _table, default=[])
    elif family == "w_table":
        p["w"] = g("potential", "w", _table, required=True)
    elif family == "dirac_table":
        p["p"] = g("potential", "p", _table, default=[])
        p["q"] = g("potential", "q", _table, default=[])
    elif family == "mathieu":
        p["q"] = g("potential", "q", _complex, default=1.0)
    elif family == "gasymov":
        p["c"] = g("potential", "c", _list(_complex), default=[1.0])
        p["k"] = g("potential", "k", int, required=True)
        p["a"] = g("potential", "a", float)
        if len(p["c"]) not in (1, p["k"]):
            rd.fail("potential", "c", f"give one value or K = {p['k']} values")
    elif family == "delta_comb":
        p["points"] = g("potential", "points", _list(float), required=True)
        p["weights"] = g("potential", "weights", _list(_complex), required=True)
        p["k"] = g("potential", "k", int, required=True)
    elif family == "four_harmonic":
        p["reading"] = g("potential", "reading", str, default="literal")
        if p["reading"] not in ("literal", "corrected"):
            rd.fail("potential", "reading", "expected literal or corrected")
    elif family == "random":
        p["seed"] = g("potential", "seed", int, default=2024)
        p["index"] = g("potential", "index", int, default=0)
        p["max_harmonics"] = g("potential", "max_harmonics", int, default=6)
        p["degree"] = g("potential", "degree", int, default=12)
        p["scale"] = g("potential", "scale", float, default=1.0)
    return p


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from exc
    except UnicodeDecodeError as exc:
        raise ConfigError(f"{path}: not UTF-8 ({exc})") from exc
    return parse_config(text, str(path))


def build_potential(cfg):
    f, p = cfg.family, cfg.params
    if f == "free":
        pot = pt.from_dirac_coeffs({}, {}) if p["kind"] == "dirac" else pt.from_trig_coeffs({})
        return pt.FourierPotential(pot.kind, meta={"family": "free"})
    if f == "table":
        return pt.from_trig_coeffs(p["coeffs"])
    if f == "w_table":
        return pt.from_w(dict(p["w"]))
    if f == "dirac_table":
        return pt.from_dirac_coeffs(dict(p["p"]), dict(p["q"]))
    if f == "mathieu":
        return pt.mathieu(p["q"])
    if f == "gasymov":
        c = p["c"] * p["k"] if len(p["c"]) == 1 else p["c"]
        return pt.gasymov(c, p["k"], A=p["a"])
    if f == "delta_comb":
        return pt.delta_comb(p["points"], p["weights"], p["k"])
    if f == "four_harmonic":
        return pt.four_harmonic_example(p["reading"])
    if f == "random":
        rng = np.random.default_rng(p["seed"])
        pot = None
        for _ in range(p["index"] + 1):
            pot = pt.random_trig_poly(rng, p["max_harmonics"], p["degree"], p["scale"])
        return pot
    raise ConfigError(f"unknown family {f!r}")


# ---------------------------------------------------------------- run


def _c(z):
    if z is None:
        return None
    z = complex(z)
    return [z.real, z.imag]


def _f(x):
    return None if x is None else float(x)


def _orlicz(asm, cfg):
    proj = asm.projections
    if proj is None or cfg.orlicz_samples == 0:
        return None
    Qs = [proj.P[n] for n in proj.indices()]
    if proj.S is not None:
        Qs.append(proj.S)
    rng = np.random.default_rng(cfg.seed)
    dim = asm.op.truncation
    samples = [rng.standard_normal(dim) + 1j * rng.standard_normal(dim) for _ in range(cfg.orlicz_samples)]
    try:
        res = orlicz_check(Qs, samples, annihilation_tol=10 * cfg.tolerances.proj_tol)
    except GeometryError as exc:
        return {"error": str(exc)}
    return {"C1": res.C1, "worst_sample": res.worst_sample, "lower": res.lower, "upper": res.upper,
            "samples": cfg.orlicz_samples, "seed": cfg.seed}


def _bc_report(pot, asm, rep, cfg):
    proj = asm.projections
    blocks = []
    gap = {}
    lead = {}
    for b in asm.blocks:
        info = rep.beta_info.get(b.n, {})
        if "beta_minus" in info:
            bm, bp = info["beta_minus"], info["beta_plus"]
        else:
            bm, bp = b.beta_minus_reduced, b.beta_plus_reduced
        converged = info.get("converged", True) if info.get("route") == "series" else True
        ev = type("E", (), {"beta_minus": bm, "beta_plus": bp})
        gap[b.n] = {"residual": gap_bound_check(b, ev), "converged": bool(converged)}
        if not pot.is_dirac and b.n > 1:
            dev = max(abs(complex(bp) - pot.coeff(2 * b.n)), abs(complex(bm) - pot.coeff(-2 * b.n)))
            lead[b.n] = dev * b.n / math.log(b.n)
        blocks.append({
            "n": b.n, "lambda0": b.lambda0, "lambda_minus": _c(b.lambda_minus), "lambda_plus": _c(b.lambda_plus),
            "gamma": _c(b.gamma), "z_star": _c(b.z_star), "mu": _c(b.mu), "delta": _c(b.delta),
            "mu_minus_lambda_plus": _c(b.mu_minus_lambda_plus),
            "mu_minus_lambda_minus": _c(b.mu_minus_lambda_minus), "mu_source": b.mu_source,
            "class": b.block_class, "dps": b.dps, "accepted": b.accepted, "drift": _f(b.drift),
            "beta_minus": _c(bm), "beta_plus": _c(bp), "t": rep.t_window.get(b.n),
            "beta_route": info.get("route"), "beta_converged": converged,
            "residuals": {k: (_c(v) if isinstance(v, complex) else _f(v)) for k, v in sorted(b.residuals.items())},
            "projection_deviation": proj.deviation_norms.get(b.n) if proj else None,
            "projection_norm": proj.norms.get(b.n) if proj else None,
            "projection_rank": proj.ranks.get(b.n) if proj else None,
        })
    out = {
        "bc": asm.bc.value, "cutoff": asm.cutoff, "n_star": asm.n_star,
        "localization": {"box_half_width": asm.localization.box_half_width,
                         "box_dimension": asm.localization.box_dimension},
        "window": rep.window, "excluded": rep.excluded,
        "exclusion_rate": len(rep.excluded) / max(1, len(rep.excluded) + len(rep.window)),
        "classes": {str(n): c for n, c in rep.classes.items()},
        "blocks": blocks,
        "sequences": {
            "kappa": {str(n): v for n, v in rep.kappa_seq.items()},
            "r_plus": {str(n): v for n, v in rep.r_seq.items()},
            "r_minus": {str(n): v for n, v in rep.r_minus_seq.items()},
            "t": {str(n): v for n, v in rep.t_seq.items()},
            "t_all_blocks": {str(n): v for n, v in rep.t_window.items()},
        },
        "fundamental_residuals": {str(n): list(v) for n, v in rep.fundamental_residuals.items()},
        "gap_bound": {str(n): v for n, v in gap.items()},
        "leading_term": {str(n): v for n, v in lead.items()},
        "xi_relation": {str(n): v for n, v in rep.xi_relation.items()},
        "xi_option2": {str(n): v for n, v in rep.xi_option2.items()},
        "lp_checks": {str(n): list(v) for n, v in rep.lp_checks.items()},
        "verdicts": {k: v.as_dict() for k, v in rep.verdicts.items()},
        "t_all_blocks_verdict": rep.t_window_verdict.as_dict() if rep.t_window_verdict else None,
        "consistent": rep.consistent, "swap_consistent": rep.swap_consistent, "notes": rep.notes,
        "orlicz": _orlicz(asm, cfg),
        "s_rank": proj.s_rank if proj else None,
    }
    out["summary"] = summarize(out)
    return out


def summarize(bc_rep):
    """Human-readable statements for one boundary condition."""
    lines = []
    classes = list(bc_rep["classes"].values())
    if classes and all(c == M1 for c in classes):
        lines.append("all blocks M1, gamma == 0")
    elif classes and all(c == M2 for c in classes):
        lines.append("all computed blocks M2")
    else:
        counts = {c: classes.count(c) for c in (M, M1, M2)}
        lines.append("blocks: " + ", ".join(f"{counts[c]} {c}" for c in (M, M1, M2)))
    v = bc_rep["verdicts"]
    statuses = {k: x["status"] for k, x in v.items()}
    vacuous = all(x["vacuous"] for x in v.values())
    if vacuous:
        lines.append("criteria (kappa, R, t) hold vacuously: no simple pairs in the window")
    elif set(statuses.values()) == {HOLDS}:
        lines.append("all criteria hold (kappa, R, t)")
    else:
        lines.append("criteria: " + ", ".join(f"{k} {s}" for k, s in statuses.items()))
        reasons = sorted({x["reason"] for x in v.values() if x["status"] != HOLDS and "reason" in x})
        lines.extend(f"  ({r})" for r in reasons)
    tw = bc_rep["t_all_blocks_verdict"]
    if tw is not None and (vacuous or tw["status"] != statuses.get("t")):
        lines.append(f"t-criterion over all blocks {tw['status']} (t in [{tw.get('min', 0):.3g}, {tw.get('max', 0):.3g}])")
    xi = list(bc_rep["xi_option2"].values())
    if xi:
        lo, hi = min(xi), max(xi)
        word = "bounded" if lo > 0 and hi / lo <= 1e3 else "unbounded"
        lines.append(f"Option-2 xi_n {word}: [{lo:.6g}, {hi:.6g}]")
    lines.append("consistent" if bc_rep["consistent"] else "INCONSISTENT verdicts")
    if bc_rep["excluded"]:
        lines.append(f"excluded by truncation drift: {bc_rep['excluded']}")
    return lines


def run_experiment(cfg):
    """Run every boundary condition of ``cfg``; returns the report as plain data."""
    try:
        pot = build_potential(cfg)
    except Exception as exc:  # configuration was validated; anything here is a stage failure
        raise ComputationError("potential", exc) from exc
    per_bc = []
    for bc in cfg.bcs:
        try:
            asm, rep = analyze(pot, bc, cfg.cutoff, window=cfg.window, tol=cfg.tolerances,
                               validate=cfg.validate, projections=cfg.projections, lp=cfg.lp,
                               workers=cfg.workers)
        except Exception as exc:
            raise ComputationError(f"analysis ({bc.value})", exc) from exc
        try:
            per_bc.append(_bc_report(pot, asm, rep, cfg))
        except Exception as exc:
            raise ComputationError(f"report ({bc.value})", exc) from exc
    return {
        "tool": "hillbasis", "version": __version__, "config_hash": cfg.digest(),
        "potential_hash": cfg.potential_digest(), "config": cfg.effective(),
        "potential": {"kind": pot.kind, "family": (pot.meta or {}).get("family"),
                      "V": [[m, _c(v)] for m, v in sorted(pot.V.items())],
                      "P": [[m, _c(v)] for m, v in sorted(pot.P.items())],
                      "Q": [[m, _c(v)] for m, v in sorted(pot.Q.items())]},
        "results": per_bc,
    }


# ---------------------------------------------------------------- output


def fmt(x):
    """17 significant digits, locale independent; ``nan`` for missing values."""
    if x is None:
        return "nan"
    return format(float(x), ".17g")


TSV_COLUMNS = ["n", "class", "gamma_re", "gamma_im", "gamma_abs", "delta_re", "delta_im", "kappa",
               "r_plus", "r_minus", "t", "proj_dev"]


def plot_table(bc_rep):
    seq = bc_rep["sequences"]
    rows = ["\t".join(TSV_COLUMNS)]
    for b in bc_rep["blocks"]:
        key = str(b["n"])
        if b["n"] not in bc_rep["window"]:
            continue
        g = b["gamma"]
        d = b["delta"] or [None, None]
        rows.append("\t".join([
            str(b["n"]), b["class"], fmt(g[0]), fmt(g[1]), fmt(math.hypot(*g)), fmt(d[0]), fmt(d[1]),
            fmt(seq["kappa"].get(key)), fmt(seq["r_plus"].get(key)), fmt(seq["r_minus"].get(key)),
            fmt(seq["t_all_blocks"].get(key)), fmt(b["projection_deviation"]),
        ]))
    return "\n".join(rows) + "\n"


def _json_safe(obj):
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return _json_safe(obj.item())
    return obj


def summary_text(report):
    lines = [f"hillbasis {report['version']}  config {report['config_hash'][:16]}",
             f"potential: {report['potential']['family']} ({report['potential']['kind']})"]
    for r in report["results"]:
        span = f"{r['window'][0]}..{r['window'][-1]}" if r["window"] else "empty"
        lines.append(f"[{r['bc']}] cutoff {r['cutoff']}, N* = {r['n_star']}, window {span}")
        lines.extend("  " + s for s in r["summary"])
    return "\n".join(lines) + "\n"


def write_outputs(report, cfg):
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / f"{cfg.prefix}.json"]
    paths[0].write_text(json.dumps(_json_safe(report), indent=1, sort_keys=True) + "\n", encoding="utf-8")
    for r in report["results"]:
        p = out / f"{cfg.prefix}_{r['bc']}.tsv"
        p.write_text(plot_table(r), encoding="utf-8")
        paths.append(p)
    p = out / f"{cfg.prefix}_summary.txt"
    p.write_text(summary_text(report), encoding="utf-8")
    paths.append(p)
    return paths


# ---------------------------------------------------------------- compare


def _num(x):
    if isinstance(x, str):
        return float(x)
    return x


def _cz(pair):
    return None if pair is None else complex(_num(pair[0]), _num(pair[1]))


def compare_reports(reports):
    """Per-block drift between reports of one potential at different cutoffs.

    Returns a list of rows ``(bc, n, cutoff_a, cutoff_b, eig_drift, gamma_drift,
    mu_drift, limit, flagged)``; the limit is ``trunc_tol * max(1, |lambda0|)``.
    """
    if len(reports) < 2:
        raise ConfigError("compare needs at least two reports")
    base = reports[0]
    rows = []
    for other in reports[1:]:
        if other["potential_hash"] != base["potential_hash"]:
            raise ConfigError("reports describe different potentials")
        for ra in base["results"]:
            rb = next((r for r in other["results"] if r["bc"] == ra["bc"]), None)
            if rb is None:
                raise ConfigError(f"boundary condition {ra['bc']} missing from a report")
            if ra["window"] != rb["window"]:
                raise ConfigError(f"[{ra['bc']}] windows differ: {ra['window']} vs {rb['window']}")
            trunc = float(_num(base["config"]["tolerances"]["trunc_tol"]))
            bb = {b["n"]: b for b in rb["blocks"]}
            for a in ra["blocks"]:
                if a["n"] not in ra["window"]:
                    continue
                b = bb[a["n"]]
                am, ap = _cz(a["lambda_minus"]), _cz(a["lambda_plus"])
                bm, bp = _cz(b["lambda_minus"]), _cz(b["lambda_plus"])
                eig = min(max(abs(am - bm), abs(ap - bp)), max(abs(am - bp), abs(ap - bm)))
                gam = abs(abs(_cz(a["gamma"])) - abs(_cz(b["gamma"])))
                mu = abs(_cz(a["mu"]) - _cz(b["mu"])) if a["mu"] and b["mu"] else math.nan
                limit = trunc * max(1.0, abs(a["lambda0"]))
                rows.append((ra["bc"], a["n"], ra["cutoff"], rb["cutoff"], eig, gam, mu, limit, eig >= limit))
    return rows


def compare_table(rows):
    head = ["bc", "n", "cutoff_a", "cutoff_b", "eig_drift", "gamma_drift", "mu_drift", "limit", "flagged"]
    lines = ["\t".join(head)]
    for r in rows:
        lines.append("\t".join([r[0], str(r[1]), str(r[2]), str(r[3]), fmt(r[4]), fmt(r[5]), fmt(r[6]),
                                fmt(r[7]), "yes" if r[8] else "no"]))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- entry point


def _parser():
    ap = argparse.ArgumentParser(prog="hillbasis", description="Riesz-basis diagnostics for Hill and Dirac operators")
    sub = ap.add_subparsers(dest="verb", required=True)
    r = sub.add_parser("run", help="compute blocks, criteria and reports for a config")
    r.add_argument("config")
    r.add_argument("--out", help="override [output] dir")
    r.add_argument("--workers", type=int, help="override [run] workers")
    c = sub.add_parser("compare", help="drift audit between reports at different cutoffs")
    c.add_argument("reports", nargs="+")
    c.add_argument("--out", help="write the table to this file instead of stdout")
    v = sub.add_parser("validate", help="check a config and print its effective settings")
    v.add_argument("config")
    return ap


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.verb == "validate":
            cfg = load_config(args.config)
            print(json.dumps(_json_safe(cfg.effective()), indent=1, sort_keys=True))
            print(f"config_hash {cfg.digest()}")
            return EXIT_OK
        if args.verb == "run":
            cfg = load_config(args.config)
            if args.out:
                cfg.out_dir = args.out
            if args.workers:
                cfg.workers = args.workers
            report = run_experiment(cfg)
            for p in write_outputs(report, cfg):
                print(p)
            sys.stdout.write(summary_text(report))
            return EXIT_OK
        reports = []
        for p in args.reports:
            try:
                reports.append(json.loads(Path(p).read_text(encoding="utf-8")))
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"{p}: unreadable report ({exc})") from exc
        rows = compare_reports(reports)
        table = compare_table(rows)
        if args.out:
            Path(args.out).write_text(table, encoding="utf-8")
        else:
            sys.stdout.write(table)
        flagged = sum(r[8] for r in rows)
        print(f"# {flagged} of {len(rows)} blocks exceed the drift limit", file=sys.stderr)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ComputationError as exc:
        print(f"computation error in {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
