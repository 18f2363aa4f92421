"""Scenario presets, replicated sweeps and CSV output."""

from __future__ import annotations

import csv
import io
import itertools
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .analytic import AnalyticParams, analytic_row
from .config import SimConfig
from .simulation import run_simulation

CSV_COLUMNS = (
    "scenario", "swept_param", "value", "protocol", "seed_count",
    "overhead_per_node_mean", "overhead_per_node_sd",
    "delivery_ratio_mean", "delivery_ratio_sd",
)


@dataclass(frozen=True)
class Scenario:
    """A one-parameter sweep: ``param`` takes each of ``values`` on top of ``fixed``."""

    name: str
    param: str
    values: tuple
    fixed: dict = field(default_factory=dict)
    protocols: tuple = ("ambr", "flood-reactive", "proactive")

    def points(self, overrides=None):
        """``(value, config)`` per sweep value; ``overrides`` beat the fixed bindings."""
        over = dict(overrides or {})
        over.pop(self.param, None)
        base = SimConfig().replace(**{**self.fixed, **over})
        return [(v, base.replace(**{self.param: v}).validate()) for v in self.values]

    def scaled(self, values=None, protocols=None, **fixed):
        """Copy with other sweep values or fixed bindings (desk-scale variants)."""
        return Scenario(
            self.name,
            self.param,
            tuple(self.values if values is None else values),
            {**self.fixed, **fixed},
            tuple(self.protocols if protocols is None else protocols),
        )


PRESETS = {
    s.name: s
    for s in (
        Scenario("fig8-size-sweep", "n", (80, 90, 100, 150, 200),
                 {"v_max": 10.0, "pause": 10.0, "sim_time": 200.0, "cbr_rate": 10.0}),
        Scenario("fig9-mobility-sweep", "v_max", (10.0, 20.0, 30.0, 40.0, 50.0),
                 {"n": 100, "pause": 10.0, "sim_time": 200.0, "cbr_rate": 10.0}),
        Scenario("fig10-pause-sweep", "pause", (50.0, 100.0, 150.0, 200.0, 250.0, 300.0, 350.0),
                 {"n": 50, "sim_time": 7500.0, "cbr_rate": 5.0},
                 ("ambr", "flood-reactive-lr", "flood-reactive", "proactive")),
    )
}


class SweepAborted(RuntimeError):
    """A run reported invariant violations; carries the offending point and seed."""

    def __init__(self, scenario, param, value, protocol, seed, violations):
        self.point = (param, value)
        self.protocol = protocol
        self.seed = seed
        self.violations = violations
        first = violations[0][1] if violations else "?"
        super().__init__(
            f"{scenario}: invariant violation at {param}={value}, protocol={protocol}, "
            f"seed={seed}: {first} ({len(violations)} total)"
        )


@dataclass
class RunRecord:
    value: object
    protocol: str
    seed: int
    overhead_per_node: float
    delivery_ratio: float
    violations: list


@dataclass
class SweepRow:
    scenario: str
    swept_param: str
    value: object
    protocol: str
    seed_count: int
    overhead_per_node_mean: float
    overhead_per_node_sd: float
    delivery_ratio_mean: float
    delivery_ratio_sd: float


@dataclass
class SweepResult:
    rows: list
    runs: list

    def row(self, value, protocol):
        for r in self.rows:
            if r.value == value and r.protocol == protocol:
                return r
        raise KeyError((value, protocol))


def _mean_sd(xs):
    mean = statistics.fmean(xs)
    sd = statistics.stdev(xs) if len(xs) > 1 else 0.0
    return mean, sd


def _one_run(job):
    value, cfg = job
    res = run_simulation(cfg)
    return RunRecord(value, cfg.protocol, cfg.seed, res.report.overhead_per_node,
                     res.report.delivery_ratio, list(res.violations))


def run_scenario(scenario, replications=None, base_seed=1, jobs=1, overrides=None):
    """Run every point x protocol x seed; return per-point mean and sample sd.

    ``scenario`` is a preset name, a :class:`Scenario`, or a plain
    :class:`SimConfig` (one point, its own protocol). ``overrides`` replace
    a preset's fixed bindings, never its swept parameter. Seeds are
    ``base_seed .. base_seed + replications - 1``. Any invariant violation
    aborts with :class:`SweepAborted`.
    """
    if isinstance(scenario, str):
        try:
            scenario = PRESETS[scenario]
        except KeyError:
            raise ValueError(f"unknown preset {scenario!r}; choose from {sorted(PRESETS)}") from None
    if isinstance(scenario, SimConfig):
        cfg = scenario.validate()
        reps = cfg.replications if replications is None else replications
        name, param, protocols = "config", "none", (cfg.protocol,)
        points = [("-", cfg)]
    else:
        reps = 5 if replications is None else replications
        name, param, protocols = scenario.name, scenario.param, scenario.protocols
        points = scenario.points(overrides)
    if reps < 1:
        raise ValueError("replications must be >= 1")

    jobs_list = []
    for value, cfg in points:
        for proto in protocols:
            for seed in range(base_seed, base_seed + reps):
                jobs_list.append((value, cfg.replace(protocol=proto, seed=seed).validate()))

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_one_run, jobs_list))
    else:
        runs = [_one_run(j) for j in jobs_list]

    order = {v: k for k, (v, _) in enumerate(points)}
    runs.sort(key=lambda r: (order[r.value], r.protocol, r.seed))
    for r in runs:
        if r.violations:
            raise SweepAborted(name, param, r.value, r.protocol, r.seed, r.violations)

    rows = []
    for (value, proto), group in itertools.groupby(runs, key=lambda r: (r.value, r.protocol)):
        group = list(group)
        om, osd = _mean_sd([r.overhead_per_node for r in group])
        dm, dsd = _mean_sd([r.delivery_ratio for r in group])
        rows.append(SweepRow(name, param, value, proto, len(group), om, osd, dm, dsd))
    return SweepResult(rows, runs)


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write(header, rows, destination):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    data = buf.getvalue().encode("utf-8")
    if destination is None:
        return data
    if hasattr(destination, "write"):
        try:
            destination.write(data)
        except TypeError:
            destination.write(data.decode("utf-8"))
    else:
        with open(destination, "wb") as fh:
            fh.write(data)
    return data


def emit_csv(results, destination=None):
    """Write the sweep table; returns the bytes written.

    ``destination`` may be a path, a binary or text file object, or None.
    """
    rows = results.rows if isinstance(results, SweepResult) else list(results or ())
    return _write(CSV_COLUMNS, ([getattr(r, c) for c in CSV_COLUMNS] for r in rows), destination)


def read_csv(data):
    """Parse :func:`emit_csv` output back into dicts with numeric fields converted."""
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        rec["seed_count"] = int(rec["seed_count"])
        for c in CSV_COLUMNS[5:]:
            rec[c] = float(rec[c])
        out.append(rec)
    return out


ANALYTIC_KEYS = ("lam", "mu", "e_l", "e_n", "kk", "p0", "k", "pb")


def analytic_sweep(ranges):
    """Cartesian product over ``ranges`` (name -> iterable of values); one row per point."""
    unknown = set(ranges) - set(ANALYTIC_KEYS)
    if unknown:
        raise ValueError(f"unknown analytic parameter(s): {sorted(unknown)}")
    names = [k for k in ANALYTIC_KEYS if k in ranges]
    axes = []
    for k in names:
        vals = list(ranges[k])
        if not vals:
            raise ValueError(f"empty range for {k}")
        axes.append(vals)
    rows = []
    for combo in itertools.product(*axes):
        kw = dict(zip(names, combo))
        if "e_n" in kw:
            if kw["e_n"] != int(kw["e_n"]):
                raise ValueError(f"e_n must be an integer, got {kw['e_n']!r}")
            kw["e_n"] = int(kw["e_n"])
        rows.append(analytic_row(AnalyticParams(**kw)))
    return rows


def emit_analytic_csv(rows, destination=None):
    if not rows:
        header = list(analytic_row(AnalyticParams()))
        return _write(header, (), destination)
    header = list(rows[0])
    return _write(header, ([r[c] for c in header] for r in rows), destination)
