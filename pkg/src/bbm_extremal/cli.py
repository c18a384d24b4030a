"""Command line: ``bbm-extremal {run,thin,decorate,verify,report}``.

Every command that writes data creates a run directory with ``manifest.json``
(config digest, seed, version, timestamps, SHA-256 of every output file) and
line-delimited JSON records. Record files contain no timestamps, so the same
config and seed give byte-identical files for any worker count.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import itertools
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import config as _cfg
from . import decoration as dec
from . import extremal as ext
from . import martingales as mg
from . import verify as _verify
from ._grow import PopulationCapError
from .bbm_core import simulate
from .rng import replica_keys

SCHEMA_VERSION = 1
WORKERS_ENV = "BBM_EXTREMAL_WORKERS"
CHUNK = 64


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _utc():
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_record(cfg: _cfg.RunConfig, index: int) -> dict:
    """One JSONL record of the ``run`` command."""
    bbm = cfg.bbm()
    key = int(replica_keys(cfg.seed, [index], "run")[0])
    s = simulate(bbm, key)
    rec = {"schema_version": SCHEMA_VERSION, "replica": index, "t": bbm.horizon, "n": s.n,
           "pruned": s.pruned, "max_centered": None, "Z_t": None, "Y_t": None, "atoms": []}
    if s.empty:
        return rec
    rec["max_centered"] = _num(s.positions.max() - s.m_t)
    rec["Z_t"] = _num(mg.derivative_martingale(s, allow_pruned=True))
    rec["Y_t"] = _num(mg.mckean_martingale(s, allow_pruned=True))
    smp = ext.extract(s)
    rec["atoms"] = [[a.gamma, a.value] for a in smp.atoms]
    if cfg.q is not None and len(smp):
        d = ext.q_thin(smp, cfg.q)
        rec["clusters"] = {"q": cfg.q, "representatives": list(d.representatives),
                           "assignment": d.assignment.tolist()}
    return rec


def thin_record(cfg: _cfg.RunConfig, index: int) -> dict:
    r_d = float(cfg.thin.get("r_d", 3.0))
    key = int(replica_keys(cfg.seed, [index], "thin")[0])
    atoms = ext.thinned_representation_sample(r_d, cfg.horizon, cfg.bbm(), key)
    return {"schema_version": SCHEMA_VERSION, "replica": index, "t": cfg.horizon, "r_d": r_d,
            "max": _num(atoms[0]), "atoms": [_num(a) for a in atoms]}


_KINDS = {"run": run_record, "thin": thin_record}


def _chunk(kind: str, cfg_dict: dict, lo: int, hi: int) -> list[str]:
    cfg = _cfg.from_dict(cfg_dict)
    fn = _KINDS[kind]
    return [json.dumps(fn(cfg, i), sort_keys=True) for i in range(lo, hi)]


def _records(kind: str, cfg: _cfg.RunConfig, workers: int):
    """Serialized records in replica order; chunks may run in worker processes."""
    spans = [(lo, min(lo + CHUNK, cfg.replicas)) for lo in range(0, cfg.replicas, CHUNK)]
    raw = cfg.canonical()
    if workers <= 1 or len(spans) <= 1:
        for lo, hi in spans:
            yield from _chunk(kind, raw, lo, hi)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_chunk, kind, raw, lo, hi) for lo, hi in spans]
        for f in futures:  # single collector keeps record order
            yield from f.result()


_SUMMARY_COLUMNS = {
    "run": ("replica", "n", "max_centered", "Z_t", "Y_t"),
    "thin": ("replica", "max"),
    "decorate": ("replica", "attempts", "n_atoms", "second"),
}


def _write_outputs(out: Path, kind: str, lines) -> dict:
    lines = iter(lines)
    first = next(lines, None)
    if first is None:  # an empty run is the manifest alone
        return {}
    lines = itertools.chain([first], lines)
    rec_path = out / "records.jsonl"
    rows = []
    with open(rec_path, "w", newline="\n") as fh:
        for line in lines:
            fh.write(line + "\n")
            rows.append(json.loads(line))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = _SUMMARY_COLUMNS[kind]
    w.writerow(cols)
    for r in rows:
        w.writerow(["" if r.get(c) is None else repr(r[c]) if isinstance(r[c], float) else r[c]
                    for c in cols])
    (out / "summary.csv").write_text(buf.getvalue())
    return {p.name: _sha256(p) for p in (rec_path, out / "summary.csv")}


def _manifest(out: Path, cfg: _cfg.RunConfig, command: str, started: str, outputs: dict,
              status: str = "ok", **extra) -> dict:
    m = {"schema_version": SCHEMA_VERSION, "command": command, "tool_version": __version__,
         "config_sha256": cfg.digest(), "config": cfg.canonical(), "seed": cfg.seed,
         "replicas": cfg.replicas, "started": started, "finished": _utc(), "status": status,
         "outputs": outputs, **extra}
    (out / "manifest.json").write_text(json.dumps(m, indent=2, sort_keys=True) + "\n")
    return m


def _prepare(args) -> tuple[_cfg.RunConfig, Path]:
    cfg = _cfg.load(args.config) if args.config else _cfg.RunConfig()
    cfg = cfg.with_overrides(seed=args.seed, replicas=args.replicas, horizon=args.t)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return cfg, out


def _simulate_command(kind: str, args) -> int:
    cfg, out = _prepare(args)
    if kind == "thin":
        _check_thin(cfg)
    started = _utc()
    try:
        outputs = _write_outputs(out, kind, _records(kind, cfg, args.workers))
    except PopulationCapError as exc:
        _manifest(out, cfg, kind, started, {}, status="aborted", error=str(exc))
        print(f"aborted: {exc}", file=sys.stderr)
        return 3
    _manifest(out, cfg, kind, started, outputs)
    print(f"{cfg.replicas} replicas written to {out}")
    return 0


def cmd_run(args):
    return _simulate_command("run", args)


def cmd_thin(args):
    return _simulate_command("thin", args)


def _check_thin(cfg: _cfg.RunConfig):
    r_d = cfg.thin.get("r_d", 3.0)
    if not r_d < cfg.horizon:
        raise _cfg.ConfigError(f"thin.r_d: need r_d < horizon ({cfg.horizon}), got {r_d}")


def cmd_decorate(args):
    cfg, out = _prepare(args)
    started = _utc()
    r = cfg.decorate.get("r")
    cap = int(cfg.decorate.get("max_attempts", 100_000))
    bbm = cfg.bbm()
    if bbm.prune is not None:
        raise _cfg.ConfigError("decorate: conditioned sampling needs prune = null")
    try:
        snaps, attempts = dec.sample_conditioned_many(
            cfg.horizon, cfg.seed, cfg.replicas, bbm, tag="decorate", max_attempts=cap) \
            if cfg.replicas else ([], 0)
    except dec.RejectionExhausted as exc:
        _manifest(out, cfg, "decorate", started, {}, status="aborted", error=str(exc),
                  acceptance_estimate=exc.acceptance_estimate)
        print(f"aborted: {exc}", file=sys.stderr)
        return 3
    lines = []
    for i, s in enumerate(snaps):
        d = dec.decoration_atoms(s, r)
        lines.append(json.dumps({
            "schema_version": SCHEMA_VERSION, "replica": i, "t": cfg.horizon, "r": r,
            "attempts": attempts, "n_atoms": len(d),
            "second": _num(d.atoms[1]) if len(d) > 1 else None,
            "atoms": d.atoms.tolist()}, sort_keys=True))
    outputs = _write_outputs(out, "decorate", lines)
    _manifest(out, cfg, "decorate", started, outputs,
              acceptance_stats={"attempts": attempts, "accepted": len(snaps)})
    print(f"{len(snaps)} conditioned samples from {attempts} attempts written to {out}")
    return 0


def cmd_verify(args):
    seed = _verify.ROOT_SEED if args.seed is None else args.seed
    out = Path(args.out) if args.out else None
    reports = []
    for name in _verify.SUITES[args.suite]:
        rep = _verify.CHECKS[name](scale=args.scale, seed=seed)
        print(rep.line(), flush=True)
        reports.append(rep)
        if out is not None:
            (out / "reports").mkdir(parents=True, exist_ok=True)
            (out / "reports" / f"{name}.json").write_text(
                json.dumps(rep.to_dict(), indent=2, sort_keys=True) + "\n")
    failed = [r.name for r in reports if not r.passed]
    print(f"{len(reports) - len(failed)}/{len(reports)} passed"
          + (f"; failed: {', '.join(failed)}" if failed else ""))
    if out is not None:
        (out / "verify_summary.json").write_text(json.dumps(
            {"schema_version": SCHEMA_VERSION, "suite": args.suite, "scale": args.scale,
             "seed": seed, "tool_version": __version__, "failed": failed,
             "passed": [r.name for r in reports if r.passed]}, indent=2) + "\n")
    return 0 if not failed else 1


def cmd_report(args):
    out = Path(args.out)
    m = json.loads((out / "manifest.json").read_text())
    bad = [name for name, digest in m["outputs"].items() if _sha256(out / name) != digest]
    print(f"command {m['command']}  status {m['status']}  seed {m['seed']}  "
          f"replicas {m['replicas']}  config {m['config_sha256'][:12]}")
    if (out / "records.jsonl").exists():
        rows = [json.loads(x) for x in (out / "records.jsonl").read_text().splitlines() if x.strip()]
        col = {"run": "max_centered", "thin": "max", "decorate": "second"}[m["command"]]
        v = np.array([r[col] for r in rows if r.get(col) is not None], dtype=float)
        if v.size:
            q = np.quantile(v, [0.1, 0.5, 0.9])
            print(f"{col}: n={v.size} mean={v.mean():.4f} sd={v.std(ddof=min(1, v.size - 1)):.4f} "
                  f"q10={q[0]:.4f} median={q[1]:.4f} q90={q[2]:.4f}")
    for name in bad:
        print(f"digest mismatch: {name}", file=sys.stderr)
    return 1 if bad or m["status"] != "ok" else 0


def _default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise SystemExit(f"{WORKERS_ENV} must be an integer, got {raw!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bbm-extremal", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=True):
        sp.add_argument("--config", type=Path, help="JSON config file")
        sp.add_argument("--seed", type=int, help="root seed (unsigned 64-bit)")
        sp.add_argument("--replicas", type=int, help="number of replicas")
        sp.add_argument("--t", type=float, help="horizon")
        sp.add_argument("--out", required=out_required, help="output directory")
        sp.add_argument("--workers", type=int, default=_default_workers(),
                        help=f"worker processes (default ${WORKERS_ENV} or 1)")

    for name, fn, help_ in (("run", cmd_run, "simulate snapshots"),
                            ("thin", cmd_thin, "two-stage thinned representation"),
                            ("decorate", cmd_decorate, "conditioned decoration samples")):
        sp = sub.add_parser(name, help=help_)
        common(sp)
        sp.set_defaults(func=fn)

    sp = sub.add_parser("verify", help="run an acceptance suite")
    sp.add_argument("--suite", default="all", choices=sorted(_verify.SUITES))
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", help="directory for report files")
    sp.add_argument("--scale", type=float, default=1.0, help="replica multiplier (1 = desk scale)")
    sp.add_argument("--workers", type=int, default=_default_workers(), help=argparse.SUPPRESS)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("report", help="summarize a run directory and check its digests")
    sp.add_argument("--out", required=True, help="run directory")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "workers", 1) < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except _cfg.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
