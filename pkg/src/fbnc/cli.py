"""Command-line front end: single runs, load-factor sweeps, two-receiver example replay.

Configuration sources, lowest to highest precedence: a ``key = value`` file
(``--config``), ``FBNC_<KEY>`` environment variables, command-line flags.

Exit codes: 0 success, 1 validation error, 2 invariant violation, 3 golden
file regression.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import difflib
import math
import os
import subprocess
import sys
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from fbnc import metrics
from fbnc.queues import InvariantViolation
from fbnc.simulator import (
    CODINGS,
    POLICIES,
    ConfigError,
    SimConfig,
    Simulator,
    format_trace,
    run,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INVARIANT = 2
EXIT_GOLDEN = 3

ENV_PREFIX = "FBNC_"

# key -> (converter, default); None default marks a required key
FIELDS = {
    "lambda": (float, None),
    "mu": (float, None),
    "receivers": (int, 2),
    "policy": (str, "alg2b"),
    "coding": (str, "next_unseen"),
    "q": (int, 0),
    "slots": (int, 100_000),
    "seed": (int, 0),
    "warmup": (int, -1),
    "verify": (None, False),
    "sweep": (str, "lambda"),
    "rho": (str, ""),
    "horizons": (str, ""),
    "jobs": (int, 1),
}

CSV_COLUMNS = (
    "rho",
    "one_over_1mrho",
    "mean_phys_q",
    "mean_virt_q_avg",
    "mean_decoding_delay",
    "mean_delivery_delay",
    "analytic_vq",
    "analytic_Dj",
    "se_phys_q",
    "se_virt_q",
    "se_decoding_delay",
    "se_delivery_delay",
    "lambda",
    "mu",
    "slots",
    "mean_time_to_empty",
    "se_time_to_empty",
    "status",
)


def _bool(value) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off", ""):
        return False
    raise ConfigError(f"not a boolean: {value!r}")


def _convert(key: str, value):
    conv = FIELDS[key][0] or _bool
    try:
        return conv(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_").lower()
        if key == "lam":
            key = "lambda"
        if key not in FIELDS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def read_env(environ=None) -> dict:
    environ = os.environ if environ is None else environ
    out = {}
    for key in FIELDS:
        name = ENV_PREFIX + key.upper()
        if name in environ:
            out[key] = environ[name]
    return out


@dataclass
class SweepSpec:
    """A base configuration and the load factors to visit.

    ``swept`` names the parameter that moves while the other stays fixed:
    with ``lambda`` swept, ``lam = rho * mu``; with ``mu`` swept,
    ``mu = lam / rho``.
    """

    base: SimConfig
    swept: str = "lambda"
    rhos: list = field(default_factory=list)
    horizons: list = field(default_factory=list)
    jobs: int = 1
    output: str | None = None

    def point(self, i: int) -> SimConfig:
        rho = self.rhos[i]
        b = self.base
        slots = self.horizons[i] if self.horizons else b.slots
        if self.swept == "lambda":
            lam, mu = rho * b.mu, b.mu
        else:
            lam, mu = b.lam, b.lam / rho
        warmup = None if b.warmup is None else min(b.warmup, slots)
        return SimConfig(
            lam=lam, mu=mu, n=b.n, policy=b.policy, coding=b.coding, q=b.q,
            slots=slots, seed=b.seed, verify=b.verify, warmup=warmup,
        )


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(",", " ").split()]


def parse_config(args: argparse.Namespace, file=None, environ=None):
    """Merge file, environment and flags into a SimConfig or SweepSpec."""
    merged: dict = {}
    if file:
        merged.update(read_config_file(file))
    merged.update(read_env(environ))
    for key in FIELDS:
        value = getattr(args, key.replace("-", "_").replace("lambda", "lam"), None)
        if value is not None:
            merged[key] = value
    values = {}
    for key, (_, default) in FIELDS.items():
        if key in merged:
            values[key] = _convert(key, merged[key])
        elif default is None:
            raise ConfigError(f"missing required setting {key!r}")
        else:
            values[key] = default
    if values["policy"] not in POLICIES:
        raise ConfigError(f"unknown policy {values['policy']!r}; choose from {POLICIES}")
    if values["coding"] not in CODINGS:
        raise ConfigError(f"unknown coding {values['coding']!r}; choose from {CODINGS}")
    base = SimConfig(
        lam=values["lambda"],
        mu=values["mu"],
        n=values["receivers"],
        policy=values["policy"],
        coding=values["coding"],
        q=values["q"] or None,
        slots=values["slots"],
        seed=values["seed"],
        verify=values["verify"],
        warmup=None if values["warmup"] < 0 else values["warmup"],
    )
    if getattr(args, "command", "run") != "sweep":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            base.validate()
        return base
    if values["sweep"] not in ("lambda", "mu"):
        raise ConfigError("sweep must be 'lambda' or 'mu'")
    rhos = _floats(values["rho"])
    horizons = [int(x) for x in _floats(values["horizons"])]
    if horizons and len(horizons) != len(rhos):
        raise ConfigError("horizons must list one value per load factor")
    if any(r <= 0 for r in rhos):
        raise ConfigError("load factors must be positive")
    spec = SweepSpec(base, values["sweep"], rhos, horizons, values["jobs"], getattr(args, "out", None))
    for i, r in enumerate(rhos):
        if r < 1:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                spec.point(i).validate()
    return spec


# -- sweeps ------------------------------------------------------------------
def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, int):
        return str(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.10g}"


def simulate_point(cfg: SimConfig) -> dict:
    """One sweep row (only picklable inputs and outputs, for worker pools)."""
    res = run(cfg)
    s = res.summary
    row = {
        "rho": cfg.rho,
        "one_over_1mrho": 1.0 / (1.0 - cfg.rho),
        "mean_phys_q": s.mean_phys_q,
        "mean_virt_q_avg": s.mean_virt_q_avg,
        "mean_decoding_delay": s.mean_decoding_delay,
        "mean_delivery_delay": s.mean_delivery_delay,
        "analytic_vq": metrics.analytic_vq_mean(cfg.lam, cfg.mu),
        "analytic_Dj": metrics.analytic_Dj_mean(cfg.lam, cfg.mu),
        "se_phys_q": s.stderr.get("phys_q", math.nan),
        "se_virt_q": s.stderr.get("virt_q", math.nan),
        "se_decoding_delay": s.stderr.get("decoding_delay", math.nan),
        "se_delivery_delay": s.stderr.get("delivery_delay", math.nan),
        "lambda": cfg.lam,
        "mu": cfg.mu,
        "slots": cfg.slots,
        "mean_time_to_empty": s.mean_time_to_empty,
        "se_time_to_empty": s.stderr.get("time_to_empty", math.nan),
        "status": "ok",
    }
    return row


def _unstable_row(cfg: SimConfig) -> dict:
    row = dict.fromkeys(CSV_COLUMNS)
    row.update({"rho": cfg.rho, "lambda": cfg.lam, "mu": cfg.mu, "slots": cfg.slots, "status": "unstable"})
    if cfg.rho != 1:
        row["one_over_1mrho"] = 1.0 / (1.0 - cfg.rho)
    return row


def run_sweep(spec: SweepSpec) -> list[dict]:
    """Simulate every stable point; rows come back in load-factor order."""
    configs = [spec.point(i) for i in range(len(spec.rhos))]
    stable = [i for i, c in enumerate(configs) if c.lam < c.mu]
    rows: list = [None] * len(configs)
    for i, c in enumerate(configs):
        if i not in stable:
            rows[i] = _unstable_row(c)
    todo = [configs[i] for i in stable]
    if spec.jobs > 1 and len(todo) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            results = list(pool.map(simulate_point, todo))
    else:
        results = [simulate_point(c) for c in todo]
    for i, r in zip(stable, results):
        rows[i] = r
    return rows


def _slope(rows, column):
    pts = [(r["one_over_1mrho"], r[column]) for r in rows if r["status"] == "ok"]
    pts = [(x, y) for x, y in pts if y is not None and not math.isnan(y) and y > 0]
    if len(pts) < 3:
        return None
    return metrics.growth_fit(pts)


def _git_revision() -> str:
    try:
        out = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            capture_output=True, text=True, check=True, cwd=Path(__file__).parent,
        )
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.CalledProcessError):
        return "unknown"


def write_csv(spec: SweepSpec, rows, out) -> None:
    b = spec.base
    out.write(f"# seed={b.seed} revision={_git_revision()}\n")
    out.write(
        f"# n={b.n} policy={b.policy} coding={b.coding} q={b.q} swept={spec.swept} "
        f"fixed={'mu=' + _fmt(b.mu) if spec.swept == 'lambda' else 'lambda=' + _fmt(b.lam)}\n"
    )
    horizons = spec.horizons or [b.slots] * len(spec.rhos)
    out.write(f"# horizon={' '.join(str(h) for h in horizons)}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in CSV_COLUMNS])
    slopes = []
    for col in ("mean_phys_q", "mean_decoding_delay", "mean_delivery_delay"):
        s = _slope(rows, col)
        if s is not None:
            slopes.append(f"{col}={s:.4f}")
    if slopes:
        out.write("# loglog_slope " + " ".join(slopes) + "\n")


# -- two-receiver example replay ---------------------------------------------
TABLE1_ARRIVALS = (1, 1, 1, 0, 1, 0)
TABLE1_RECEPTIONS = ((1, 0), (1, 1), (0, 1), (0, 1), (1, 0), (1, 1))
TABLE1_HEADER = "slot | queue | sent | channel | A decoded | A seen only | B decoded | B seen only"


def _plist(ids) -> str:
    ids = sorted(ids)
    return ",".join(f"p{i}" for i in ids) if ids else "-"


def replay_table1() -> str:
    """Two-receiver drop-when-seen example over GF(2), as text rows."""
    cfg = SimConfig(lam=0.25, mu=0.5, n=2, policy="alg2b", coding="next_unseen", q=2,
                    slots=len(TABLE1_ARRIVALS), seed=0, verify=True, warmup=0)
    sim = Simulator(cfg, keep_traces=True)
    lines = [TABLE1_HEADER]
    for t, (arr, rx) in enumerate(zip(TABLE1_ARRIVALS, TABLE1_RECEPTIONS), 1):
        tr = sim.step(arrival=bool(arr), receptions=[bool(x) for x in rx])
        channel = ", ".join(f"{name} {'ok' if ok else 'lost'}" for name, ok in zip("AB", rx))
        cells = [str(t), _plist(tr.queue), tr.combo.describe().replace("+", "^"), channel]
        for rk in sim.receivers:
            seen = set(rk.seen_packets())
            decoded, _ = rk.decoded_and_heard()
            cells += [_plist(decoded), _plist(seen - decoded)]
        lines.append(" | ".join(cells))
    return "\n".join(lines) + "\n"


def golden_table1() -> str:
    return resources.files("fbnc").joinpath("data/table1.golden").read_text()


# -- entry point -------------------------------------------------------------
class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_sim_flags(p):
    p.add_argument("--config", help="key = value settings file")
    p.add_argument("--lambda", dest="lam", type=float, help="arrival probability per slot (required)")
    p.add_argument("--mu", type=float, help="per-receiver reception probability (required)")
    p.add_argument("--receivers", type=int, help="number of receivers (default 2)")
    p.add_argument("--policy", choices=POLICIES, help="queue policy (default alg2b)")
    p.add_argument("--coding", choices=CODINGS, help="coding module (default next_unseen)")
    p.add_argument("--q", type=int, help="field size (default: smallest valid for the coding module)")
    p.add_argument("--slots", type=int, help="horizon in slots (default 100000)")
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.add_argument("--warmup", type=int, help="slots excluded from statistics (default max(1e4, 1%% of horizon))")
    p.add_argument("--verify", action="store_const", const=True, help="check invariants every slot")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fbnc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_run = sub.add_parser("run", help="simulate one configuration and print summary statistics")
    _add_sim_flags(p_run)
    p_run.add_argument("--trace", help="write one line per slot to this file")

    p_sweep = sub.add_parser("sweep", help="simulate a list of load factors and write CSV")
    _add_sim_flags(p_sweep)
    p_sweep.add_argument("--sweep", choices=("lambda", "mu"), help="parameter moved to reach each load factor (default lambda)")
    p_sweep.add_argument("--rho", help="comma-separated load factors")
    p_sweep.add_argument("--horizons", help="comma-separated horizons, one per load factor")
    p_sweep.add_argument("--jobs", type=int, help="worker processes (default 1)")
    p_sweep.add_argument("--out", help="CSV path (default stdout)")

    p_tab = sub.add_parser("replay-table1", help="replay the two-receiver drop-when-seen example")
    p_tab.add_argument("--golden", help="golden file to compare against (default: packaged copy)")
    return parser


def _cmd_run(args) -> int:
    cfg = parse_config(args, args.config)
    sink_file = open(args.trace, "w") if args.trace else None
    try:
        sink = (lambda tr: sink_file.write(format_trace(tr) + "\n")) if sink_file else None
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = run(cfg, sink=sink)
    finally:
        if sink_file:
            sink_file.close()
    s = res.summary
    print(f"rho = {_fmt(cfg.rho)}")
    print(f"slots = {res.slots} (warmup {cfg.warmup})")
    if s.empty:
        print("no post-warmup samples")
        return EXIT_OK
    print(f"mean_phys_q = {_fmt(s.mean_phys_q)}")
    print(f"mean_virt_q = {' '.join(_fmt(v) for v in s.mean_virt_q)}")
    print(f"mean_decoding_delay = {_fmt(s.mean_decoding_delay)}")
    print(f"mean_delivery_delay = {_fmt(s.mean_delivery_delay)}")
    print(f"mean_time_to_empty = {_fmt(s.mean_time_to_empty)}")
    print(f"mean_busy_period = {_fmt(s.mean_busy_period)}")
    print(f"undelivered = {' '.join(str(u) for u in s.undelivered)}")
    if cfg.lam < cfg.mu:
        print(f"analytic_vq = {_fmt(metrics.analytic_vq_mean(cfg.lam, cfg.mu))}")
    print(f"innovation_failures = {res.innovation_failures}/{res.innovation_checks}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    spec = parse_config(args, args.config)
    rows = run_sweep(spec)
    if spec.output:
        with open(spec.output, "w", newline="") as fh:
            write_csv(spec, rows, fh)
    else:
        write_csv(spec, rows, sys.stdout)
    return EXIT_OK


def _cmd_table1(args) -> int:
    text = replay_table1()
    sys.stdout.write(text)
    expected = Path(args.golden).read_text() if args.golden else golden_table1()
    if text != expected:
        diff = difflib.unified_diff(
            expected.splitlines(keepends=True), text.splitlines(keepends=True), "golden", "replay"
        )
        sys.stderr.write("".join(diff))
        return EXIT_GOLDEN
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"run": _cmd_run, "sweep": _cmd_sweep, "replay-table1": _cmd_table1}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"fbnc: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"fbnc: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except OSError as exc:
        print(f"fbnc: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
