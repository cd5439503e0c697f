"""Batch front-end: run schemes on presets, studies, and probes.

A run configuration is a single JSON document; command-line flags override
config fields.  Every output directory receives the validated config echo
and the library version so runs are machine-diffable.  Repeated runs of an
identical config produce byte-identical CSV files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys as _sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .diagnostics import convergence_study, edb_audit
from .errors import InputError, NumericalError, SplitflowError
from .models import MODEL_NAMES, make_model
from .partitions import build_partition
from .potentials import qye_probe
from .solvers import (
    amm_solve,
    block_solve,
    effective_potential,
    effective_solve,
    split_step_solve,
    time_to_zero,
)

SCHEMES = ("split", "amm", "effective", "block-split", "block-amm")


@dataclass
class RunConfig:
    """Validated description of one batch run."""

    model: str = "counterexample"
    overrides: dict = field(default_factory=dict)
    scheme: str = "split"
    N: int = 64
    nodes: list = None
    inner_steps: int = 8
    tol: float = 1e-10
    out: str = None
    jobs: int = 1
    seed: int = 0
    study: list = None
    samples: int = 1000
    audits: dict = field(default_factory=lambda: {"edb": True, "remainder": True,
                                                  "decomposition": True})

    def validate(self):
        if self.model not in MODEL_NAMES:
            raise InputError(f"unknown model {self.model!r}")
        if self.scheme not in SCHEMES:
            raise InputError(f"unknown scheme {self.scheme!r}")
        if self.nodes is None and self.N < 1:
            raise InputError("need N >= 1 or an explicit node list")
        if self.inner_steps < 2 or self.inner_steps % 2:
            raise InputError("inner steps must be an even count >= 2")
        if self.tol <= 0:
            raise InputError("tolerance must be positive")
        if self.jobs < 1:
            raise InputError("jobs must be at least 1")
        return self


def _default_out_root():
    return os.environ.get("SPLITFLOW_OUT", os.path.join(os.getcwd(), "splitflow-out"))


def _load_config(path):
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    cfg = RunConfig()
    for key, val in data.items():
        if not hasattr(cfg, key):
            raise InputError(f"unknown config field {key!r}")
        setattr(cfg, key, val)
    return cfg


def _apply_flags(cfg: RunConfig, args):
    for attr in ("model", "scheme", "inner_steps", "tol", "out", "jobs", "seed",
                 "samples"):
        val = getattr(args, attr.replace("-", "_"), None)
        if val is not None:
            setattr(cfg, attr, val)
    if getattr(args, "N", None) is not None:
        cfg.N = args.N
    if getattr(args, "nodes", None):
        cfg.nodes = [float(x) for x in args.nodes.split(",")]
    if getattr(args, "study", None):
        cfg.study = [int(x) for x in args.study.split(",")]
    if getattr(args, "override", None):
        for item in args.override:
            key, _, raw = item.partition("=")
            cfg.overrides[key] = json.loads(raw)
    return cfg


def _echo_config(cfg: RunConfig, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    payload = {"version": __version__, "config": asdict(cfg)}
    with open(os.path.join(out_dir, "config.json"), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)


def _solve(cfg: RunConfig, preset, P):
    sysd = preset.system
    u0 = preset.u0
    if cfg.scheme == "split":
        return split_step_solve(sysd, P, u0, inner_steps=cfg.inner_steps, tol=cfg.tol)
    if cfg.scheme == "amm":
        return amm_solve(sysd, P, u0, tol=cfg.tol, with_variational=True,
                         inner_factor=cfg.inner_steps)
    if cfg.scheme == "effective":
        return effective_solve(sysd, P, u0, tol=cfg.tol, inner_factor=cfg.inner_steps)
    mode = "split" if cfg.scheme == "block-split" else "amm"
    return block_solve(sysd, P, u0, mode=mode, tol=cfg.tol,
                       inner_steps=cfg.inner_steps)


def cmd_run(cfg: RunConfig) -> int:
    preset = make_model(cfg.model, **cfg.overrides)
    out_dir = cfg.out or os.path.join(_default_out_root(), f"{cfg.model}-{cfg.scheme}")
    _echo_config(cfg, out_dir)
    P = build_partition(preset.horizon, N=cfg.N, nodes=cfg.nodes)
    out = _solve(cfg, preset, P)
    out.u_linear.to_csv(os.path.join(out_dir, "trajectory.csv"))
    out.xi.to_csv(os.path.join(out_dir, "forces.csv"))

    summary = {
        "model": cfg.model,
        "scheme": cfg.scheme,
        "N": P.N,
        "version": __version__,
        "terminal_state": out.node_states()[-1].tolist(),
    }
    ttz = time_to_zero(out)
    if ttz is not None:
        summary["time_to_zero"] = ttz

    status = 0
    if cfg.audits.get("edb", True):
        # exact piecewise-affine flows satisfy the balance; minimizing-movement
        # realizations guarantee only the one-sided estimate
        form = "balance" if out.segments is not None else "inequality"
        report = edb_audit(out, preset.system, form=form,
                           with_decomposition=cfg.audits.get("decomposition", True))
        report.to_json(os.path.join(out_dir, "edb.json"))
        summary["edb_residual"] = report.residual
        summary["edb_passed"] = report.passed
        if report.v1 is not None:
            report.v1.to_csv(os.path.join(out_dir, "decomposition_v1.csv"))
            report.v2.to_csv(os.path.join(out_dir, "decomposition_v2.csv"))
        if not report.passed:
            print(
                f"EDB audit failed: residual {report.residual:.3e} "
                f"exceeds slack {report.slack:.3e}",
                file=_sys.stderr,
            )
            status = 1
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    print(json.dumps(summary, sort_keys=True))
    return status


def cmd_study(cfg: RunConfig) -> int:
    if not cfg.study:
        raise InputError("study needs a comma-separated N list (--study)")
    preset = make_model(cfg.model, **cfg.overrides)
    out_dir = cfg.out or os.path.join(
        _default_out_root(), f"{cfg.model}-{cfg.scheme}-study"
    )
    _echo_config(cfg, out_dir)
    table = convergence_study(
        preset.system,
        preset.u0,
        cfg.scheme,
        cfg.study,
        T=preset.horizon,
        tol=cfg.tol,
        inner=cfg.inner_steps,
        jobs=cfg.jobs,
    )
    table.to_csv(os.path.join(out_dir, "study.csv"))
    print(f"study written to {os.path.join(out_dir, 'study.csv')}")
    return 0


def cmd_probe_qye(cfg: RunConfig) -> int:
    preset = make_model(cfg.model, **cfg.overrides)
    out_dir = cfg.out or os.path.join(_default_out_root(), f"{cfg.model}-qye")
    _echo_config(cfg, out_dir)
    rng = np.random.default_rng(cfg.seed)
    dim = preset.system.dim
    r_eff = effective_potential(preset.system)
    samples = [
        (rng.standard_normal(dim), rng.standard_normal(dim))
        for _ in range(cfg.samples)
    ]
    fit = qye_probe(r_eff, samples, weights=preset.norm_weights)
    payload = {
        "model": cfg.model,
        "samples": cfg.samples,
        "seed": cfg.seed,
        "c_est": fit.c_est,
        "C_est": fit.C_est,
        "worst_pair": [fit.worst_pair[0].tolist(), fit.worst_pair[1].tolist()],
        "version": __version__,
    }
    with open(os.path.join(out_dir, "qye.json"), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    print(json.dumps({"c_est": fit.c_est, "C_est": fit.C_est}, sort_keys=True))
    return 0


def cmd_list_models(_cfg) -> int:
    for name in MODEL_NAMES:
        print(name)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="splitflow",
        description="Split-step / alternating minimizing-movement runs and audits",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--config", help="path to a JSON run configuration")
        sp.add_argument("--model", choices=MODEL_NAMES)
        sp.add_argument("--scheme", choices=SCHEMES)
        sp.add_argument("--N", type=int, dest="N")
        sp.add_argument("--nodes", help="comma-separated explicit node list")
        sp.add_argument("--inner-steps", type=int, dest="inner_steps")
        sp.add_argument("--tol", type=float)
        sp.add_argument("--out")
        sp.add_argument("--jobs", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--samples", type=int)
        sp.add_argument(
            "--override",
            action="append",
            metavar="KEY=JSON",
            help="model parameter override, e.g. --override p=3",
        )
        sp.add_argument("--study", help="comma-separated N list for studies")

    for name in ("run", "study", "probe-qye", "list-models"):
        add_common(sub.add_parser(name))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config) if args.config else RunConfig()
        cfg = _apply_flags(cfg, args).validate()
        handler = {
            "run": cmd_run,
            "study": cmd_study,
            "probe-qye": cmd_probe_qye,
            "list-models": cmd_list_models,
        }[args.command]
        return handler(cfg)
    except OSError as exc:
        print(f"I/O failure: {exc}", file=_sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=_sys.stderr)
        return 3
    except SplitflowError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
