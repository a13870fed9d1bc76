"""Reproduction of published AVR-PID tuning results and robustness sweeps.

The reference table ships as ``data/reference_gains.json`` (one JSON object per
algorithm) and the comparison tolerances as ``data/tolerances.json``; both can
be swapped for user files.  Report rows carry their tolerances with them.
"""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from .lintf import AvrParams, PidGains, avr_pid_closed_loop, loop_tf, tf_to_state_space
from .metrics import (
    TransientMetrics,
    UnsettledResponseError,
    frequency_metrics,
    pole_zero_report,
    transient_metrics,
)
from .sim import SimGrid, step_response

PUBLISHED_KEYS = ("peak_pu", "tp_s", "mp_pct", "tr_s", "ts_s", "ess", "poles", "damping",
                  "peak_gain_db", "pm_deg", "dm_s", "bw")
COMPARED = ("peak_pu", "tp_s", "mp_pct", "tr_s", "ts_s", "poles",
            "peak_gain_db", "pm_deg", "dm_s", "bw")
ENTRY_KEYS = {"algorithm", "objective", "kp", "ki", "kd", "published", "cite"}
METRIC_GRID = SimGrid(dt=1e-3, horizon=20.0)


class ReferenceTableError(ValueError):
    def __init__(self, row: int, field_name: str, msg: str):
        super().__init__(f"row {row}, field {field_name!r}: {msg}")
        self.row = row
        self.field = field_name


def default_workers() -> int:
    """Parallelism cap from ``AVRPID_THREADS`` (0 or unset = one per CPU)."""
    raw = os.environ.get("AVRPID_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


def _pmap(fn, items, workers: Optional[int]):
    workers = default_workers() if workers is None else workers
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(workers) as ex:
        return list(ex.map(fn, items))


@dataclass
class ReferenceEntry:
    algorithm: str
    objective: str
    gains: Optional[PidGains]
    published: dict[str, Any] = field(default_factory=dict)
    cite: Optional[int] = None

    @property
    def reproducible(self) -> bool:
        return self.gains is not None


def _parse_number(row, key, v):
    if isinstance(v, str) and v.strip().lower() in ("inf", "infinity"):
        return math.inf
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ReferenceTableError(row, key, f"expected a number, got {v!r}")
    return float(v)


def _parse_entry(i: int, raw: Any) -> ReferenceEntry:
    if not isinstance(raw, dict):
        raise ReferenceTableError(i, "<row>", "expected an object")
    unknown = set(raw) - ENTRY_KEYS
    if unknown:
        raise ReferenceTableError(i, sorted(unknown)[0], "unknown field")
    for key in ("algorithm", "objective"):
        if not isinstance(raw.get(key), str) or not raw[key]:
            raise ReferenceTableError(i, key, "missing or not a string")
    g = [raw.get(k) for k in ("kp", "ki", "kd")]
    if all(v is None for v in g):
        gains = None
    else:
        vals = [_parse_number(i, k, v) for k, v in zip(("kp", "ki", "kd"), g)]
        for k, v in zip(("kp", "ki", "kd"), vals):
            if not v > 0:
                raise ReferenceTableError(i, k, "gains must be positive")
        gains = PidGains(*vals)
    pub_raw = raw.get("published", {})
    if not isinstance(pub_raw, dict):
        raise ReferenceTableError(i, "published", "expected an object")
    pub: dict[str, Any] = {}
    for key, v in pub_raw.items():
        if key not in PUBLISHED_KEYS:
            raise ReferenceTableError(i, f"published.{key}", "unknown metric")
        if key == "poles":
            if not isinstance(v, list) or not all(isinstance(p, list) and len(p) == 2 for p in v):
                raise ReferenceTableError(i, "published.poles", "expected a list of [re, im] pairs")
            pub[key] = [complex(_parse_number(i, key, a), _parse_number(i, key, b)) for a, b in v]
        elif key == "damping":
            if not isinstance(v, list):
                raise ReferenceTableError(i, "published.damping", "expected a list")
            pub[key] = [_parse_number(i, key, x) for x in v]
        else:
            pub[key] = _parse_number(i, f"published.{key}", v)
    cite = raw.get("cite")
    return ReferenceEntry(raw["algorithm"], raw["objective"], gains, pub, cite)


def load_reference_table(path=None) -> list[ReferenceEntry]:
    """Parse a reference table; ``None`` loads the bundled transcription."""
    if path is None:
        text = resources.files("avrpid.data").joinpath("reference_gains.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ReferenceTableError(exc.lineno, "<json>", exc.msg) from exc
    if not isinstance(raw, list):
        raise ReferenceTableError(0, "<root>", "expected a JSON array")
    return [_parse_entry(i, r) for i, r in enumerate(raw)]


def load_tolerances(path=None) -> dict[str, dict[str, float]]:
    if path is None:
        text = resources.files("avrpid.data").joinpath("tolerances.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    tol = json.loads(text)
    unknown = set(tol) - set(COMPARED)
    if unknown:
        raise ValueError(f"unknown tolerance keys: {sorted(unknown)}")
    return tol


@dataclass
class MetricComparison:
    metric: str
    published: Any
    computed: Any
    abs_delta: Optional[float]
    rel_delta: Optional[float]
    tolerance: str
    passed: bool
    note: str = ""


@dataclass
class ComparisonRow:
    algorithm: str
    objective: str
    gains: Optional[list[float]]
    status: str
    computed: dict[str, Any] = field(default_factory=dict)
    comparisons: list[MetricComparison] = field(default_factory=list)

    def comparison(self, metric: str) -> Optional[MetricComparison]:
        for c in self.comparisons:
            if c.metric == metric:
                return c
        return None


@dataclass
class ComparisonReport:
    rows: list[ComparisonRow] = field(default_factory=list)
    tolerances: dict[str, dict[str, float]] = field(default_factory=dict)


def _tol_text(spec: dict[str, float]) -> str:
    return ";".join(f"{k}={v:g}" for k, v in sorted(spec.items()))


def _scalar_compare(metric, pub, comp, spec, note="") -> MetricComparison:
    if comp is None:
        return MetricComparison(metric, pub, None, None, None, _tol_text(spec), False, "not computed")
    if math.isinf(pub) or math.isinf(comp):
        ok = pub == comp
        return MetricComparison(metric, pub, comp, 0.0 if ok else math.inf,
                                0.0 if ok else math.inf, _tol_text(spec), ok, note)
    d = abs(comp - pub)
    rel = d / abs(pub) if pub != 0 else (0.0 if d == 0 else math.inf)
    if "rel" in spec:
        ok = d <= spec["rel"] * abs(pub) + 1e-12
    else:
        ok = d <= spec["abs"] + 1e-12
    return MetricComparison(metric, pub, comp, d, rel, _tol_text(spec), bool(ok), note)


def match_poles(published: Sequence[complex], computed: Sequence[complex]):
    """Pair each published pole with its nearest still-unused computed pole."""
    pool = list(computed)
    pairs = []
    for p in published:
        if not pool:
            pairs.append((p, None))
            continue
        j = int(np.argmin([abs(p - c) for c in pool]))
        pairs.append((p, pool.pop(j)))
    return pairs


def _pole_compare(pub, comp, spec) -> MetricComparison:
    pairs = match_poles(pub, comp)
    dominant = min(abs(p.real) for p in pub)
    worst_abs, worst_rel, ok = 0.0, 0.0, True
    for p, c in pairs:
        if c is None:
            ok = False
            worst_abs = math.inf
            continue
        d = abs(p - c)
        rel = d / abs(p) if p != 0 else math.inf
        limit = spec.get("rel", 0.0) * abs(p)
        if abs(p.real) == dominant and "abs_dominant" in spec:
            limit = max(limit, spec["abs_dominant"])
        ok = ok and d <= limit + 1e-12
        worst_abs = max(worst_abs, d)
        worst_rel = max(worst_rel, rel)
    return MetricComparison("poles", list(pub), list(comp), worst_abs, worst_rel,
                            _tol_text(spec), bool(ok))


def closed_loop_metrics(p: AvrParams, g: PidGains, grid: SimGrid = METRIC_GRID,
                        rise: str = "10-90") -> TransientMetrics:
    """Transient metrics of the AVR-PID step response; the horizon doubles until settled."""
    ss = tf_to_state_space(avr_pid_closed_loop(p, g))
    for _ in range(4):
        try:
            return transient_metrics(step_response(ss, grid), rise=rise)
        except UnsettledResponseError:
            grid = SimGrid(grid.dt, 2 * grid.horizon)
    return transient_metrics(step_response(ss, grid), rise=rise)


def reproduce_entry(e: ReferenceEntry, p: AvrParams | None = None,
                    tolerances: dict | None = None, grid: SimGrid = METRIC_GRID) -> ComparisonRow:
    """Simulate an entry's gains on the plant and diff every published figure present."""
    p = p or AvrParams()
    tol = tolerances if tolerances is not None else load_tolerances()
    gains = None if e.gains is None else e.gains.as_array().tolist()
    if e.gains is None:
        return ComparisonRow(e.algorithm, e.objective, None, "no-gains")
    closed = avr_pid_closed_loop(p, e.gains)
    pz = pole_zero_report(closed)
    computed: dict[str, Any] = {"poles": pz.poles.tolist(), "damping": pz.damping.tolist()}
    if not pz.stable:
        return ComparisonRow(e.algorithm, e.objective, gains, "unstable", computed)

    m = closed_loop_metrics(p, e.gains, grid)
    m100 = closed_loop_metrics(p, e.gains, grid, rise="0-100")
    fm = frequency_metrics(loop_tf(p, e.gains), closed)
    computed.update({
        "peak_pu": m.peak_value, "tp_s": m.Tp, "mp_pct": m.Mp_pct, "tr_s": m.Tr,
        "tr_0_100_s": m100.Tr, "ts_s": m.Ts, "ess": m.Ess, "final_value": m.final_value,
        "peak_gain_db": fm.peak_gain_db, "pm_deg": fm.phase_margin_deg,
        "dm_s": fm.delay_margin_s, "bw": fm.bandwidth, "gain_crossover": fm.gain_crossover,
    })
    comps = []
    for key in COMPARED:
        if key not in e.published or key not in tol:
            continue
        pub = e.published[key]
        if key == "poles":
            comps.append(_pole_compare(pub, pz.poles, tol[key]))
        elif key == "tr_s":
            a = _scalar_compare(key, pub, m.Tr, tol[key], "10-90")
            b = _scalar_compare(key, pub, m100.Tr, tol[key], "0-100")
            if b.abs_delta is not None and (a.abs_delta is None or b.abs_delta < a.abs_delta):
                a = b
            comps.append(a)
        else:
            comps.append(_scalar_compare(key, pub, computed[key], tol[key]))
    status = "ok" if all(c.passed for c in comps) else "paper-inconsistent"
    return ComparisonRow(e.algorithm, e.objective, gains, status, computed, comps)


def reproduce_table(entries: Iterable[ReferenceEntry], p: AvrParams | None = None,
                    tolerances: dict | None = None, workers: Optional[int] = None) -> ComparisonReport:
    tol = tolerances if tolerances is not None else load_tolerances()
    rows = _pmap(lambda e: reproduce_entry(e, p, tol), entries, workers)
    return ComparisonReport(rows, tol)


def select_entries(entries: Sequence[ReferenceEntry], names: Iterable[str]) -> list[ReferenceEntry]:
    by_name = {e.algorithm.upper(): e for e in entries}
    out = []
    for n in names:
        key = n.strip().upper()
        if key not in by_name:
            raise KeyError(f"no reference entry named {n!r}")
        out.append(by_name[key])
    return out


# --- report serialisation ---------------------------------------------------

def _jsonable(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, np.generic):
        return v.item()
    return v


def _unjson_poles(v):
    if isinstance(v, list) and v and isinstance(v[0], list):
        return [complex(a, b) for a, b in v]
    return v


def report_to_dict(report: ComparisonReport) -> dict:
    return _jsonable(asdict(report))


def report_from_dict(d: dict) -> ComparisonReport:
    rows = []
    for r in d["rows"]:
        comps = []
        for c in r["comparisons"]:
            if c["metric"] == "poles":
                c = {**c, "published": _unjson_poles(c["published"]),
                     "computed": _unjson_poles(c["computed"])}
            comps.append(MetricComparison(**c))
        computed = dict(r["computed"])
        if "poles" in computed:
            computed["poles"] = _unjson_poles(computed["poles"])
        rows.append(ComparisonRow(r["algorithm"], r["objective"], r["gains"], r["status"],
                                  computed, comps))
    return ComparisonReport(rows, d["tolerances"])


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (list, tuple)):
        return ";".join(_fmt(x) for x in v)
    if isinstance(v, complex):
        return repr(v.real) if v.imag == 0 else f"{v.real!r}{v.imag:+.17g}j"
    if isinstance(v, float):
        return repr(v)
    return str(v)


CSV_BASE = ["algorithm", "objective", "kp", "ki", "kd", "status"]
CSV_SUFFIXES = ["computed", "published", "delta", "rel_delta", "tol", "pass", "note"]


def report_csv_header() -> list[str]:
    return CSV_BASE + [f"{m}_{s}" for m in COMPARED for s in CSV_SUFFIXES]


def _csv_rows(report: ComparisonReport):
    for row in report.rows:
        g = row.gains or [None, None, None]
        out = [row.algorithm, row.objective, *map(_fmt, g), row.status]
        for m in COMPARED:
            c = row.comparison(m)
            tol = _tol_text(report.tolerances.get(m, {}))
            if c is None:
                comp = row.computed.get(m)
                out += [_fmt(comp), "", "", "", tol, "", ""]
            else:
                out += [_fmt(c.computed), _fmt(c.published), _fmt(c.abs_delta),
                        _fmt(c.rel_delta), c.tolerance, _fmt(c.passed), c.note]
        yield out


def emit_report(report: ComparisonReport, path, fmt: str = "csv") -> None:
    """Write a comparison report as CSV (one row per entry) or JSON."""
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(report_csv_header())
            w.writerows(_csv_rows(report))
    elif fmt == "json":
        with open(path, "w") as fh:
            json.dump(report_to_dict(report), fh, indent=1)
            fh.write("\n")
    else:
        raise ValueError(f"unknown report format {fmt!r}")


def read_report_json(path) -> ComparisonReport:
    with open(path) as fh:
        return report_from_dict(json.load(fh))


# --- robustness sweep --------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    parameters: tuple[str, ...] = ("T_A", "T_E", "T_G", "T_S")
    levels: tuple[float, ...] = (-0.50, -0.25, 0.0, 0.25, 0.50)

    def __post_init__(self):
        bad = set(self.parameters) - {"T_A", "T_E", "T_G", "T_S"}
        if bad:
            raise ValueError(f"only time constants can be swept, got {sorted(bad)}")
        if 0.0 not in self.levels:
            raise ValueError("levels must include 0 (nominal)")
        if any(lv <= -1.0 for lv in self.levels):
            raise ValueError("a level of -100% or below makes a time constant non-positive")


@dataclass
class SweepRow:
    parameter: str
    level: float
    value: float
    stable: bool
    metrics: Optional[TransientMetrics]
    poles: list[complex]


def robustness_sweep(p: AvrParams, g: PidGains, spec: SweepSpec | None = None,
                     workers: Optional[int] = None) -> list[SweepRow]:
    """Perturb one time constant at a time; the nominal case appears once, first."""
    spec = spec or SweepSpec()
    cases = [("nominal", 0.0)]
    cases += [(name, lv) for name in spec.parameters for lv in spec.levels if lv != 0.0]

    def run(case):
        name, lv = case
        q = p if name == "nominal" else p.replace(**{name: getattr(p, name) * (1 + lv)})
        value = math.nan if name == "nominal" else getattr(q, name)
        pz = pole_zero_report(avr_pid_closed_loop(q, g))
        if not pz.stable:
            return SweepRow(name, lv, value, False, None, pz.poles.tolist())
        return SweepRow(name, lv, value, True, closed_loop_metrics(q, g), pz.poles.tolist())

    return _pmap(run, cases, workers)


SWEEP_HEADER = ["parameter", "level", "value", "stable", "peak_value", "Mp_pct", "Tp",
                "Tr", "Ts", "Ess", "final_value", "poles"]


def emit_sweep(rows: Sequence[SweepRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for r in rows:
            m = r.metrics
            vals = ([m.peak_value, m.Mp_pct, m.Tp, m.Tr, m.Ts, m.Ess, m.final_value]
                    if m else [None] * 7)
            value = None if math.isnan(r.value) else r.value
            w.writerow([r.parameter, _fmt(float(r.level)), _fmt(value), _fmt(r.stable),
                        *map(_fmt, vals), _fmt(r.poles)])
