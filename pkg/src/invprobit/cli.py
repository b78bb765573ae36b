"""Command-line interface.

Subcommands::

    simulate   synthetic dataset and ground truth
    fit        run one or more chains and persist the draws
    summarize  posterior means and credible intervals as CSV
    diagnose   Geweke and autocorrelation tables
    validate   recovery metrics of a fit against ground truth

Exit status is 0 on success, 2 on invalid input or usage, 1 on runtime
failure.  ``INVPROBIT_LOG`` sets the log level and nothing else.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from . import __version__
from .diagnostics import acf_table, geweke_table, tracked_parameters
from .errors import ConfigError, DomainError, IntegrityError, InvProbitError
from .io import (
    read_config_file,
    read_dataset,
    read_samples,
    read_truth,
    summarize,
    write_dataset,
    write_samples,
    write_summary,
    write_table,
    write_truth,
)
from .sampler import McmcConfig, run_chain
from .simulate import default_design, generate
from .validation import validation_report

log = logging.getLogger("invprobit")

_MCMC_TYPES = {f.name: f.type for f in fields(McmcConfig)}


def _coerce(name, value):
    if not isinstance(value, str):
        return value
    typ = str(_MCMC_TYPES[name])
    if value.lower() == "none" and "None" in typ:
        return None
    try:
        if typ.startswith("int"):
            f = float(value)
            if not f.is_integer():
                raise ValueError
            return int(f)
        if typ.startswith("float"):
            return float(value)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {value!r}") from None
    return value


@dataclass(frozen=True)
class RunConfig:
    """Everything ``fit`` needs: data, sampler settings, outputs."""

    dataset: Path
    out: Path
    mcmc: McmcConfig = field(default_factory=McmcConfig)
    chains: int = 1
    d0: int | None = None
    level: float = 0.95

    def __post_init__(self):
        if self.chains < 1:
            raise ConfigError("chains must be >= 1")
        if not 0 < self.level < 1:
            raise ConfigError("credible level must lie in (0, 1)")
        if not Path(self.dataset).is_file():
            raise ConfigError(f"dataset not found: {self.dataset}")

    @classmethod
    def from_sources(cls, file_values, overrides):
        """Merge config-file values with command-line overrides (flags win)."""
        merged = dict(file_values)
        merged.update({k: v for k, v in overrides.items() if v is not None})
        mcmc_kw = {}
        for key in list(merged):
            if key in _MCMC_TYPES:
                mcmc_kw[key] = _coerce(key, merged.pop(key))
        unknown = set(merged) - {"dataset", "out", "chains", "d0", "level"}
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        for req in ("dataset", "out"):
            if req not in merged:
                raise ConfigError(f"missing required setting {req!r}")
        return cls(
            dataset=Path(merged["dataset"]),
            out=Path(merged["out"]),
            mcmc=McmcConfig(**mcmc_kw),
            chains=int(merged.get("chains", 1)),
            d0=None if merged.get("d0") in (None, "None") else int(merged["d0"]),
            level=float(merged.get("level", 0.95)),
        )

    def chain_configs(self):
        """Chain ``j`` (0-based) runs with seed ``seed + j``."""
        return [replace(self.mcmc, seed=self.mcmc.seed + j) for j in range(self.chains)]

    def chain_dirs(self):
        if self.chains == 1:
            return [self.out]
        return [self.out / f"chain_{j + 1}" for j in range(self.chains)]


# ---------------------------------------------------------------------------
# parser


def build_parser():
    p = argparse.ArgumentParser(prog="invprobit", description="Longitudinal inverse-probit mixed model.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="simulate a dataset with known drifts")
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out", type=Path, required=True, help="output directory")
    sp.add_argument("--default-design", action="store_true", help="four-cluster, four-category design (the default)")
    sp.add_argument("--n", type=int, help="subjects")
    sp.add_argument("--T", type=int, help="blocks")
    sp.add_argument("--L", type=int, help="trials per stimulus per block")
    sp.add_argument("--b", type=float, help="decision boundary")
    sp.add_argument("--subject-effect-sd", type=float)

    fp = sub.add_parser("fit", help="run the MCMC sampler")
    fp.add_argument("dataset", nargs="?", help="trial CSV (or set in --config)")
    fp.add_argument("--seed", type=int, required=True)
    fp.add_argument("--out", type=Path, help="output directory")
    fp.add_argument("--config", type=Path, help="key = value file; flags take precedence")
    fp.add_argument("--chains", type=int, help="independent chains, run in parallel (default 1)")
    fp.add_argument("--d0", type=int, help="number of categories (default: inferred)")
    fp.add_argument("--n-iter", type=int)
    fp.add_argument("--burn-in", type=int)
    fp.add_argument("--thin", type=int)
    fp.add_argument("--M-prob", dest="M_prob", type=int, help="races per probability estimate")
    fp.add_argument("--mh-step", type=float)
    fp.add_argument("--b", type=float)
    fp.add_argument("--eps", type=float)
    fp.add_argument("--k", type=float)
    fp.add_argument("--z-max", type=int)
    fp.add_argument("--K", type=int, help="spline basis size")
    fp.add_argument("--degree", type=int)
    fp.add_argument("--alpha", type=float)
    fp.add_argument("--init-variance", type=float)
    fp.add_argument("--retry-cap", type=int)
    fp.add_argument("--workers", type=int, help="threads for per-subject work within a chain")
    fp.add_argument("--label-update", choices=("collapsed", "conditional"), help="cluster label move (default collapsed)")
    fp.add_argument("--level", type=float, help="credible level recorded for summaries")

    mp = sub.add_parser("summarize", help="posterior summary tables")
    mp.add_argument("samples", type=Path)
    mp.add_argument("--out", type=Path, help="default: <samples>/summary")
    mp.add_argument("--level", type=float, default=0.95)
    mp.add_argument("--dataset", type=Path, help="verify the samples belong to this dataset")

    dp = sub.add_parser("diagnose", help="Geweke and autocorrelation tables")
    dp.add_argument("samples", type=Path, nargs="+", help="one directory per chain")
    dp.add_argument("--out", type=Path, help="default: first samples directory")
    dp.add_argument("--params", choices=("correct", "drifts", "variances"), default="correct")
    dp.add_argument("--max-lag", type=int, default=20)
    dp.add_argument("--frac-a", type=float, default=0.1)
    dp.add_argument("--frac-b", type=float, default=0.5)

    vp = sub.add_parser("validate", help="compare a fit with simulation truth")
    vp.add_argument("samples", type=Path)
    vp.add_argument("--truth", type=Path, required=True, help="truth.csv written by simulate")
    vp.add_argument("--level", type=float, default=0.95)
    vp.add_argument("--out", type=Path, help="write the report as JSON here")
    return p


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(args):
    over = {
        k: v
        for k, v in dict(n=args.n, T=args.T, L=args.L, b=args.b, subject_effect_sd=args.subject_effect_sd).items()
        if v is not None
    }
    design = default_design(seed=args.seed, **over)
    ds, truth = generate(design)
    args.out.mkdir(parents=True, exist_ok=True)
    write_dataset(ds, args.out / "dataset.csv")
    write_truth(truth, args.out / "truth.csv")
    meta = {
        "seed": design.seed,
        "n": design.n,
        "T": design.T,
        "L_per_stimulus": design.L,
        "d0": design.d0,
        "b": design.b,
        "subject_effect_sd": design.subject_effect_sd,
        "clusters": {k: [list(x) for x in v] for k, v in design.clusters.items()},
        "curves": {k: [c.start, c.end, c.rate] for k, c in design.curves.items()},
    }
    (args.out / "design.json").write_text(json.dumps(meta, indent=2) + "\n")
    print(f"wrote {len(ds)} trials to {args.out / 'dataset.csv'}")
    return 0


def _fit_one(ds, cfg, out):
    t0 = time.perf_counter()
    samples = run_chain(ds, cfg)
    write_samples(samples, out)
    return out, len(samples), time.perf_counter() - t0, samples.stats


def cmd_fit(args):
    file_values = read_config_file(args.config) if args.config else {}
    over = {k: getattr(args, k) for k in ("dataset", "out", "chains", "d0", "level")}
    over.update({k: getattr(args, k) for k in _MCMC_TYPES if hasattr(args, k)})
    rc = RunConfig.from_sources(file_values, over)
    ds = read_dataset(rc.dataset, d0=rc.d0)
    cfgs, dirs = rc.chain_configs(), rc.chain_dirs()
    log.info("fitting %d trials, %d chain(s)", len(ds), rc.chains)
    if rc.chains == 1:
        results = [_fit_one(ds, cfgs[0], dirs[0])]
    else:
        with ProcessPoolExecutor(max_workers=rc.chains) as pool:
            results = list(pool.map(_fit_one, [ds] * rc.chains, cfgs, dirs))
    for out, S, secs, stats in results:
        print(f"{out}: {S} draws in {secs:.1f}s, latent acceptance {stats['latent_acceptance']:.3f}")
    return 0


def cmd_summarize(args):
    ds = read_dataset(args.dataset) if args.dataset else None
    samples = read_samples(args.samples, dataset=ds)
    out = args.out or args.samples / "summary"
    write_summary(summarize(samples, args.level), out)
    print(f"summary written to {out}")
    return 0


def cmd_diagnose(args):
    geo = {"chain": []}
    acf = {"chain": []}
    for j, path in enumerate(args.samples, start=1):
        chains = tracked_parameters(read_samples(path), args.params)
        g = geweke_table(chains, args.frac_a, args.frac_b)
        a = acf_table(chains, args.max_lag)
        geo["chain"].extend([j] * len(g["parameter"]))
        acf["chain"].extend([j] * len(a["parameter"]))
        for k, v in g.items():
            geo.setdefault(k, []).extend(v)
        for k, v in a.items():
            acf.setdefault(k, []).extend(v)
    out = args.out or args.samples[0]
    out.mkdir(parents=True, exist_ok=True)
    write_table(out / "geweke.csv", geo)
    write_table(out / "acf.csv", acf)
    z = [abs(v) for v in geo["z"] if v == v]
    frac = sum(v < 2 for v in z) / len(z) if z else float("nan")
    print(f"{len(z)} tracked chains, fraction with |z| < 2: {frac:.3f}")
    return 0


def cmd_validate(args):
    samples = read_samples(args.samples)
    truth = read_truth(args.truth)
    rep = validation_report(samples, truth, level=args.level)
    for k, v in rep.to_dict().items():
        print(f"{k:20s} {v:.6g}" if isinstance(v, float) else f"{k:20s} {v}")
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(json.dumps(rep.to_dict(), indent=2) + "\n")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "summarize": cmd_summarize,
    "diagnose": cmd_diagnose,
    "validate": cmd_validate,
}


def main(argv=None):
    level = os.environ.get("INVPROBIT_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (DomainError, ConfigError, IntegrityError, FileNotFoundError) as exc:
        print(f"invprobit {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (InvProbitError, OSError, ArithmeticError) as exc:
        print(f"invprobit {args.command}: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
