"""Command line: ``diffwaves {waves,cascade,pde,green,verify,report}``.

A run directory holds ``manifest.json``, ``report.json`` and one
subdirectory per suite with CSV series and ``claims.json``.  Value files
depend only on the configuration; the manifest additionally records the
wall time.
"""

from __future__ import annotations

import argparse
import csv
import logging
import platform
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .analysis import evaluate_claim
from .config import SUITES, ConfigError, ExperimentConfig
from .io import config_hash, read_json, write_json
from .verify import RUNNERS, suite_names, write_result

log = logging.getLogger("diffwaves")

COMMAND_SUITE = {"waves": "waves-only", "cascade": "cascade", "pde": "headline-n1", "green": "green"}
REPORT_FIELDS = ("run", "suite", "id", "anchor", "kind", "measured", "expected", "tol", "passed")


def _load_config(path) -> ExperimentConfig:
    return ExperimentConfig.from_toml(path) if path else ExperimentConfig.from_dict()


def _run_one(raw: dict, suite: str, out: str) -> dict:
    cfg = ExperimentConfig(raw)
    res = RUNNERS[suite](cfg)
    write_result(res, Path(out) / suite)
    return {"suite": suite, "passed": res.passed, "flagged": res.flagged(),
            "claims": [c.to_dict() for c in res.claims]}


def _manifest(cfg: ExperimentConfig, suites, wall, status, error=None) -> dict:
    p = cfg.params()
    r = cfg.raw["run"]
    grid = cfg.grid()
    m = {
        "version": __version__,
        "config_hash": config_hash(cfg.to_dict()),
        "config": cfg.to_dict(),
        "suites": list(suites),
        "status": status,
        "wall_time_s": round(wall, 3),
        "backend": kernels.BACKEND,
        "params": p.to_dict(),
        "grid": grid.to_dict(),
        "schedule": {"checkpoints": cfg.checkpoints(), "cfl": r["cfl"], "dt": r["cfl"] * grid.dx / p.c},
        "python": platform.python_version(),
        "numpy": np.__version__,
        "deterministic": True,
    }
    if error:
        m["error"] = error
    return m


def run(cfg: ExperimentConfig, suite: str, out: Path, jobs: int = 1) -> int:
    """Run ``suite`` (or every suite for ``all``) into ``out``; return the exit status."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    names = suite_names(suite)
    t0 = time.perf_counter()
    results = []
    try:
        if jobs > 1 and len(names) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as ex:
                futs = [ex.submit(_run_one, cfg.to_dict(), s, str(out)) for s in names]
                results = [f.result() for f in futs]
        else:
            for s in names:
                log.info("suite %s", s)
                results.append(_run_one(cfg.to_dict(), s, str(out)))
    except Exception as e:
        # keep whatever was written and say why the run stopped
        write_json(out / "manifest.json",
                   _manifest(cfg, names, time.perf_counter() - t0, "failed",
                             f"{type(e).__name__}: {e}\n{traceback.format_exc()}"))
        log.error("run failed: %s", e)
        return 2
    write_json(out / "report.json", {"config_hash": config_hash(cfg.to_dict()), "suites": results})
    write_json(out / "manifest.json", _manifest(cfg, names, time.perf_counter() - t0, "ok"))
    failed = [c["id"] for r in results for c in r["claims"] if not c["passed"]]
    for r in results:
        for c in r["claims"]:
            print(f"{'PASS' if c['passed'] else 'FAIL'}  {r['suite']:<12} {c['id']:<32} "
                  f"measured={c['measured']:.6g} expected={c['expected']:.6g}")
    return 1 if failed else 0


def report(dirs, out: Path | None = None) -> int:
    """Aggregate run directories into ``report.csv``/``report.json``; nonzero iff a claim fails."""
    rows = []
    for d in dirs:
        d = Path(d)
        try:
            man = read_json(d / "manifest.json")
            rep = read_json(d / "report.json")
            if man.get("status") != "ok":
                raise ValueError(f"run status is {man.get('status')!r}")
        except (OSError, ValueError) as e:
            print(f"error: {d}: missing or corrupt manifest/report ({e})", file=sys.stderr)
            return 2
        for s in rep["suites"]:
            for c in s["claims"]:
                ok = evaluate_claim(c["kind"], float(c["measured"]), float(c["expected"]), float(c["tol"]))
                rows.append({"run": str(d), "suite": s["suite"], "id": c["id"], "anchor": c["anchor"],
                             "kind": c["kind"], "measured": c["measured"], "expected": c["expected"],
                             "tol": c["tol"], "passed": ok})
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "report.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=REPORT_FIELDS)
            w.writeheader()
            for r in rows:
                w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
        write_json(out / "report.json", {"rows": rows})
    for r in rows:
        print(f"{'PASS' if r['passed'] else 'FAIL'}  {r['run']}  {r['id']}  {r['measured']!r}")
    return 0 if all(r["passed"] for r in rows) else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="diffwaves", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in (*COMMAND_SUITE, "verify"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="TOML configuration")
        sp.add_argument("--out", type=Path, default=Path("runs") / name, help="run directory")
        if name == "verify":
            sp.add_argument("--suite", choices=SUITES, help="overrides verify.suite")
        sp.add_argument("--jobs", type=int, default=1, help="parallel suites (verify --suite all)")
        sp.add_argument("--seedless", action="store_true",
                        help="accepted for symmetry; nothing in the core is random")
        sp.add_argument("-v", "--verbose", action="store_true")
    rp = sub.add_parser("report")
    rp.add_argument("dirs", nargs="*", type=Path)
    rp.add_argument("--out", type=Path, help="where to write report.csv/report.json")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "report":
        return report(args.dirs, args.out)
    try:
        cfg = _load_config(args.config)
        suite = COMMAND_SUITE.get(args.command) or args.suite or cfg.raw["verify"]["suite"]
        cfg = cfg.with_suite(suite)
    except (ConfigError, OSError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    if args.jobs < 1:
        print("--jobs must be >= 1", file=sys.stderr)
        return 2
    return run(cfg, suite, args.out, args.jobs)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
