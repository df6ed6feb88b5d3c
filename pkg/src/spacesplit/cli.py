"""Command line front end.

    spacesplit run      --config run.yaml --out results/
    spacesplit oracle   --config run.yaml --out results/ --threads 4
    spacesplit validate --config run.yaml --out results/
    spacesplit decay    --config run.yaml --out results/

Exit status: 0 success, 1 solver failure, 2 configuration error,
3 validation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .config import load_config
from .errors import ConfigError, S3Error

log = logging.getLogger("spacesplit")

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG, EXIT_VALIDATE = 0, 1, 2, 3


@dataclass
class RunManifest:
    config: str
    out_dir: str
    subcommand: str
    timestamp: str
    version: str = __version__
    files: list = field(default_factory=list)

    def add(self, path):
        path = Path(path).resolve()
        out = Path(self.out_dir).resolve()
        if out not in path.parents:
            raise RuntimeError(f"refusing to record {path} outside {out}")
        self.files.append(str(path.relative_to(out)))
        return path

    def write(self):
        self.files.append("manifest.json")
        with open(Path(self.out_dir) / "manifest.json", "w") as fh:
            json.dump(asdict(self), fh, indent=2)


def _cmd_run(cfg, man: RunManifest, out: Path, threads: int):
    from .driver import run_s3
    from .plotting import plot_frame, plot_terms

    rep = run_s3(cfg, threads=threads)
    rep.to_json(man.add(out / "report.json"))
    rep.write_terms_csv(man.add(out / "unstable_terms.csv"))
    if rep.export is not None:
        rep.write_frame_csv(man.add(out / "frame.csv"))
        plot_frame(rep.export, man.add(out / "frame.png"))
    plot_terms(rep.unstable_terms, rep.unstable_stderr, man.add(out / "unstable_terms.png"))
    print(f"psi = {rep.psi_total:.6g} +- {rep.psi_stderr:.2g} "
          f"(coboundary {rep.coboundary_term:.6g}, series {rep.series_total:.6g})")
    for w in rep.warnings:
        log.warning(w)
    return EXIT_OK


def _cmd_oracle(cfg, man: RunManifest, out: Path, threads: int):
    from .driver import fd_oracle
    from .plotting import plot_oracle

    res = fd_oracle(cfg, threads=threads)
    res.to_json(man.add(out / "oracle.json"))
    plot_oracle(res, man.add(out / "oracle.png"))
    print(f"fd estimate = {res.estimate:.6g} +- {res.stderr:.2g} (t = {res.t_step:g})")
    return EXIT_OK


def _cmd_validate(cfg, man: RunManifest, out: Path, threads: int):
    from .driver import validate
    from .plotting import plot_checks

    res = validate(cfg, threads=threads)
    res.to_json(man.add(out / "validate.json"))
    plot_checks(res, man.add(out / "validate.png"))
    for c in res.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.value:.3g} "
              f"(threshold {c.threshold:.3g}) {c.detail}".rstrip())
    return EXIT_OK if res.passed else EXIT_VALIDATE


def _cmd_decay(cfg, man: RunManifest, out: Path, threads: int):
    from .driver import run_s3
    from .plotting import plot_terms
    from .quadrature import fit_log_decay

    rep = run_s3(cfg, threads=threads, export=False)
    path = man.add(out / "correlation_series.csv")
    with open(path, "w") as fh:
        fh.write("# spacesplit correlation-series v1\n")
        fh.write("k,term,stderr\n")
        for k, (t, e) in enumerate(zip(rep.unstable_terms, rep.unstable_stderr)):
            fh.write(f"{k},{t!r},{e!r}\n")
    plot_terms(rep.unstable_terms, rep.unstable_stderr, man.add(out / "decay.png"),
               title="correlation series")
    slope, p = fit_log_decay(rep.unstable_terms)
    print(f"log|term| slope = {slope:.3g} (p = {p:.2g})")
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "oracle": _cmd_oracle,
            "validate": _cmd_validate, "decay": _cmd_decay}


def build_parser():
    p = argparse.ArgumentParser(prog="spacesplit", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="YAML run configuration")
        s.add_argument("--out", required=True, help="output directory")
        s.add_argument("--seed", type=int, default=None, help="override the config seed")
        s.add_argument("--threads", type=int, default=1, help="worker threads")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1", key="threads")
    except ConfigError as exc:
        print(f"config error: {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    man = RunManifest(os.path.abspath(args.config), str(out.resolve()), args.command,
                      datetime.now(timezone.utc).isoformat(timespec="seconds"))
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            code = COMMANDS[args.command](cfg, man, out, args.threads)
    except (S3Error, ValueError, FloatingPointError, ArithmeticError) as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        code = EXIT_SOLVER
    man.write()
    return code


if __name__ == "__main__":
    sys.exit(main())
