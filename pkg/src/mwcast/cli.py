"""Experiment runner: config parsing, presets, sweeps, tabular output.

Configs are plain INI (key=value under section headers) so experiment
provenance diffs cleanly.  Outputs are delimited text tables plus a
key=value theory block and a PASS/FAIL acceptance block comparing the run
against its analytical predictions; the exit code is nonzero if any
acceptance line fails.  Plotting is external.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from .coding import InjectionProcess
from .feedback import FeedbackConfig
from .galois import FieldContext
from .rlnc import RlncConfig, sweep_batch_sizes
from .simulate import (
    Metrics,
    Seeds,
    SimConfig,
    empirical_wald_check,
    estimate_delay_ccdf,
    estimate_scalars,
    run,
    window_ccdf,
)
from .theory import ccdf_window, first_passage_window_slope, fit_decay_rate, theory_report

PRESETS = (
    "delay_decay",
    "td_tradeoff",
    "w_decay",
    "encoding_vs_n",
    "baf_encoding",
    "decoding_vs_n",
    "baf_decoding",
)

_FLOAT = "%.10g"


@dataclass
class ExperimentSpec:
    name: str
    sim: SimConfig
    replicas: int = 1
    output_path: Path = Path("out")
    preset: str | None = None

    def validate(self):
        if self.replicas < 1:
            raise ValueError(f"replicas must be >= 1, got {self.replicas}")


def parse_gammas(text: str, n: int) -> tuple[float, ...]:
    """"0.6" (all receivers), "0.6,0.8,..." or "0.6*8,0.8*8" run-length."""
    parts = [p.strip() for p in text.split(",") if p.strip()]
    out: list[float] = []
    for part in parts:
        if "*" in part:
            value, count = part.split("*")
            out.extend([float(value)] * int(count))
        else:
            out.append(float(part))
    if len(out) == 1:
        out = out * n
    if len(out) != n:
        raise ValueError(f"gammas specify {len(out)} receivers but n={n}")
    return tuple(out)


def load_config(path: Path, overrides: argparse.Namespace | None = None) -> ExperimentSpec:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    with open(path) as fh:
        parser.read_file(fh)
    sim = parser["sim"]
    n = sim.getint("n", 1)
    seed = sim.getint("seed", 0)
    mode = sim.get("mode", "dynamics")
    spec_slots = sim.getint("slots", 1_000_000)
    if overrides is not None:
        if overrides.seed is not None:
            seed = overrides.seed
        if overrides.slots is not None:
            spec_slots = overrides.slots
        if overrides.mode is not None:
            mode = overrides.mode
    cfg = SimConfig(
        n=n,
        gammas=parse_gammas(sim.get("gammas", "0.6"), n),
        injection=InjectionProcess(
            sim.get("injection", "constant"), sim.get("lambda", "1/2")
        ),
        slots=spec_slots,
        feedback=FeedbackConfig(sim.getint("b_af", 1)),
        seeds=Seeds(coefficient=seed, channel=seed + 1),
        mode="full_coding" if mode.startswith("full") else "dynamics_only",
        warmup=sim.getint("warmup", 10_000),
        check_invariants=sim.getboolean("check_invariants", fallback=False),
        capture_renewals=sim.getint("capture_renewals", 1),
    )
    if cfg.full:
        cfg.field_ctx = FieldContext(sim.getint("q", 8))
        cfg.pending_cap = sim.getint("pending_cap", 512)
        cfg.width_cap = sim.getint("width_cap", 512)
    exp = parser["experiment"] if parser.has_section("experiment") else {}
    name = exp.get("name", path.stem) if exp else path.stem
    replicas = int(exp.get("replicas", 1)) if exp else 1
    out_dir = Path(overrides.out) if overrides is not None and overrides.out else Path(
        exp.get("out", "out") if exp else "out"
    )
    return ExperimentSpec(name=name, sim=cfg, replicas=replicas, output_path=out_dir)


def run_replicas(spec: ExperimentSpec) -> Metrics:
    """Run seed-indexed replicas and merge (merge order is replica order)."""
    merged: Metrics | None = None
    base = spec.sim.seeds
    for r in range(spec.replicas):
        cfg = spec.sim
        if r > 0:
            cfg = replace(
                spec.sim,
                seeds=Seeds(base.coefficient + 1_000_003 * r, base.channel + 1_000_003 * r),
            )
        m = run(cfg)
        merged = m if merged is None else merged.merge(m)
    return merged


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _hist_table(hist: np.ndarray, total: int) -> str:
    lines = ["k\tcount\tccdf"]
    tail = total
    for k in range(hist.shape[0]):
        c = int(hist[k])
        tail -= c
        if c or tail:
            lines.append(f"{k}\t{c}\t{_FLOAT % (tail / total if total else 0.0)}")
        if tail == 0:
            break
    return "\n".join(lines) + "\n"


def write_outputs(spec: ExperimentSpec, m: Metrics) -> list[str]:
    """Emit tables, scalars, theory block and acceptance block; return failures."""
    out = spec.output_path / spec.name
    s = estimate_scalars(m)
    cfg = m.config
    report = theory_report(cfg.injection, cfg.gammas)

    _write(out / "windows.tsv", _hist_table(m.window_hist, int(m.window_hist.sum())))
    _write(out / "delay_r0.tsv", _hist_table(m.delay_hist[0], int(m.delay_count[0])))
    scal = [
        f"name\t{spec.name}",
        f"slots_observed\t{m.slots_observed}",
        f"n\t{cfg.n}",
        f"lambda\t{cfg.injection.rate}",
        f"injection\t{cfg.injection.kind}",
        f"b_af\t{cfg.feedback.b_af}",
        f"mean_window\t{_FLOAT % s.mean_window}",
        f"mean_delay_r0\t{_FLOAT % s.mean_delay[0]}",
        f"mean_delay_worst\t{_FLOAT % s.mean_delay_worst}",
        f"decode_ops_r0\t{_FLOAT % s.decode_ops_r0}",
        f"decode_ops_worst\t{_FLOAT % s.decode_ops_worst}",
        f"decoded_r0\t{int(m.delay_count[0])}",
        f"beacon_rounds\t{m.beacon_rounds}",
        f"beacons_detected\t{m.beacons_detected}",
        f"payload_checked\t{int(m.payload_checked)}",
        f"payload_mismatches\t{m.payload_mismatches}",
    ]
    _write(out / "scalars.txt", "\n".join(scal) + "\n")
    _write(out / "theory.txt", report.as_text())

    lines, failures = [], []

    def check(name: str, ok: bool | None, detail: str):
        if ok is None:
            lines.append(f"SKIP\t{name}\t{detail}")
        else:
            lines.append(f"{'PASS' if ok else 'FAIL'}\t{name}\t{detail}")
            if not ok:
                failures.append(name)

    if cfg.injection.kind == "constant":
        bound = report.delay_bounds[0]
        check(
            "mean_delay_bound_r0",
            s.mean_delay[0] <= bound,
            f"{_FLOAT % s.mean_delay[0]} <= {_FLOAT % bound}",
        )
        wald = empirical_wald_check(m)
        if wald.conclusive:
            check(
                "interval_moment_ratio",
                wald.ok,
                f"{_FLOAT % wald.ratio} <= {_FLOAT % wald.bound} + 3*{_FLOAT % wald.ratio_se}",
            )
        else:
            check("interval_moment_ratio", None, f"only {wald.records} renewal records")
    if m.payload_checked:
        check("payload_bit_exact", m.payload_mismatches == 0,
              f"{m.payload_mismatches} mismatches")
    # delay tail: the windowed slope carries a first-passage log-prefactor
    # and is seed-noisy below ~3e7 packets, so small runs only report it
    try:
        ccdf = estimate_delay_ccdf(m, 0)
        kmin, kmax = ccdf_window(ccdf)
        fit = fit_decay_rate(ccdf, kmin, kmax)
        phi = report.phi_per_receiver[0]
        predicted = first_passage_window_slope(phi, kmin, kmax)
        detail = (
            f"fit {_FLOAT % fit.slope} vs windowed prediction {_FLOAT % predicted} "
            f"(rate {_FLOAT % phi}) over [{kmin},{kmax}]"
        )
        if int(m.delay_count[0]) < 30_000_000:
            check("delay_decay_rate_r0", None,
                  detail + f"; pass/fail needs >= 3e7 packets, have {int(m.delay_count[0])}")
        else:
            check(
                "delay_decay_rate_r0",
                abs(fit.slope - predicted) <= 0.15 * predicted,
                detail,
            )
    except ValueError as exc:
        check("delay_decay_rate_r0", None, str(exc))
    if cfg.injection.kind == "constant" and min(cfg.gammas) < 1.0:
        if m.slots_observed < 5_000_000:
            check("window_decay_rate", None,
                  f"{m.slots_observed} slots; tail fit needs >= 5e6")
        else:
            try:
                wc = window_ccdf(m)
                kmin, kmax = ccdf_window(wc, 1e-4, 1e-2)
                fit = fit_decay_rate(wc, kmin, kmax)
                eta = report.eta
                homogeneous = len(set(cfg.gammas)) == 1
                if homogeneous:
                    ok = abs(fit.slope - eta) <= 0.15 * eta
                else:
                    ok = fit.slope >= 0.85 * eta
                check(
                    "window_decay_rate",
                    ok,
                    f"fit {_FLOAT % fit.slope} vs eta {_FLOAT % eta} over [{kmin},{kmax}]",
                )
            except ValueError as exc:
                check("window_decay_rate", None, str(exc))

    _write(out / "acceptance.txt", "\n".join(lines) + "\n")
    return failures


def execute(spec: ExperimentSpec) -> list[str]:
    """Run an experiment spec end to end; returns acceptance failures."""
    spec.validate()
    m = run_replicas(spec)
    return write_outputs(spec, m)


# -- presets ------------------------------------------------------------------


def preset_specs(preset: str, out: Path, slots: int | None, seed: int) -> list[ExperimentSpec]:
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}; choose from {PRESETS}")
    specs: list[ExperimentSpec] = []

    def add(name: str, **kw):
        kw.setdefault("warmup", min(10_000, kw["slots"] // 10))
        kw.setdefault("capture_renewals", 1)
        cfg = SimConfig(**kw)
        specs.append(ExperimentSpec(name=name, sim=cfg, output_path=out, preset=preset))

    if preset == "delay_decay":
        s = slots or 2_000_000
        for lam in ("1/2", "27/50"):
            for kind in ("constant", "bernoulli"):
                add(
                    f"delay_decay_{kind}_{lam.replace('/', 'over')}",
                    n=1,
                    gammas=(0.6,),
                    injection=InjectionProcess(kind, lam),
                    slots=s,
                    seeds=Seeds(seed, seed + 1),
                )
    elif preset == "td_tradeoff":
        s = slots or 1_000_000
        for lam in ("2/5", "12/25", "27/50", "57/100"):
            for kind in ("constant", "bernoulli"):
                add(
                    f"td_{kind}_{lam.replace('/', 'over')}",
                    n=100,
                    gammas=(0.6,) * 100,
                    injection=InjectionProcess(kind, lam),
                    slots=s,
                    seeds=Seeds(seed, seed + 1),
                )
    elif preset == "w_decay":
        s = slots or 2_000_000
        for n in (16, 100):
            add(
                f"w_decay_hom_n{n}",
                n=n,
                gammas=(0.6,) * n,
                injection=InjectionProcess("constant", "27/50"),
                slots=s,
                seeds=Seeds(seed, seed + 1),
            )
            add(
                f"w_decay_het_n{n}",
                n=n,
                gammas=(0.6,) * (n // 2) + (0.8,) * (n - n // 2),
                injection=InjectionProcess("constant", "27/50"),
                slots=s,
                seeds=Seeds(seed, seed + 1),
            )
    elif preset in ("encoding_vs_n", "decoding_vs_n"):
        s = slots or 1_000_000
        n = 2
        while n <= 1024:
            add(
                f"{preset}_n{n}",
                n=n,
                gammas=(0.6,) * n,
                injection=InjectionProcess("constant", "27/50"),
                slots=s,
                seeds=Seeds(seed, seed + 1),
            )
            n *= 2
    elif preset in ("baf_encoding", "baf_decoding"):
        s = slots or 1_000_000
        for b_af in (1, 2, 5, 10, 20, 40, 80):
            add(
                f"{preset}_baf{b_af}",
                n=100,
                gammas=(0.6,) * 100,
                injection=InjectionProcess("constant", "27/50"),
                slots=s,
                feedback=FeedbackConfig(b_af),
                seeds=Seeds(seed, seed + 1),
            )
    return specs


def run_sweep(preset: str, out: Path, slots: int | None, seed: int) -> int:
    specs = preset_specs(preset, out, slots, seed)
    if not specs:
        raise ValueError(f"preset {preset!r} produced an empty sweep")
    rows = ["name\tn\tb_af\tlambda\tinjection\tmean_window\tmean_delay_r0\tdecode_ops_r0"]
    failures: list[str] = []
    for spec in specs:
        m = run_replicas(spec)
        failures.extend(f"{spec.name}:{f}" for f in write_outputs(spec, m))
        s = estimate_scalars(m)
        cfg = m.config
        rows.append(
            f"{spec.name}\t{cfg.n}\t{cfg.feedback.b_af}\t{cfg.injection.rate}"
            f"\t{cfg.injection.kind}\t{_FLOAT % s.mean_window}"
            f"\t{_FLOAT % s.mean_delay[0]}\t{_FLOAT % s.decode_ops_r0}"
        )
    _write(out / f"{preset}_sweep.tsv", "\n".join(rows) + "\n")
    for f in failures:
        print(f"acceptance failure: {f}", file=sys.stderr)
    return 1 if failures else 0


# -- entry points --------------------------------------------------------------


def _cmd_run(args) -> int:
    spec = load_config(Path(args.config), args)
    failures = execute(spec)
    for f in failures:
        print(f"acceptance failure: {f}", file=sys.stderr)
    print(f"wrote {spec.output_path / spec.name}")
    return 1 if failures else 0


def _cmd_sweep(args) -> int:
    return run_sweep(args.preset, Path(args.out), args.slots, args.seed or 0)


def _cmd_theory(args) -> int:
    inj = InjectionProcess(args.injection, getattr(args, "lam"))
    gammas = parse_gammas(args.gammas, args.n)
    print(theory_report(inj, gammas).as_text(), end="")
    return 0


def _cmd_fit(args) -> int:
    ccdf: dict[int, float] = {}
    with open(args.input) as fh:
        header = fh.readline()
        cols = header.rstrip("\n").split("\t")
        k_idx, c_idx = cols.index("k"), cols.index("ccdf")
        for line in fh:
            fields = line.split("\t")
            ccdf[int(fields[k_idx])] = float(fields[c_idx])
    if args.kmin is not None and args.kmax is not None:
        kmin, kmax = args.kmin, args.kmax
    else:
        kmin, kmax = ccdf_window(ccdf, args.lo, args.hi)
    fit = fit_decay_rate(ccdf, kmin, kmax)
    print(f"slope={_FLOAT % fit.slope}")
    print(f"intercept={_FLOAT % fit.intercept}")
    print(f"residual_rms={_FLOAT % fit.residual_rms}")
    print(f"points={fit.points}")
    return 0


def _cmd_compare_baseline(args) -> int:
    lam = Fraction(args.lam)
    inj = InjectionProcess("constant", lam)
    gammas = parse_gammas(args.gammas, args.n)
    cfg = SimConfig(
        n=args.n,
        gammas=gammas,
        injection=inj,
        slots=args.slots,
        seeds=Seeds(args.seed, args.seed + 1),
        warmup=min(10_000, args.slots // 10),
    )
    m = run(cfg)
    s = estimate_scalars(m)
    batch_sizes = [int(b) for b in args.batches.split(",")]
    sweep = sweep_batch_sizes(
        RlncConfig(
            batch_size=batch_sizes[0],
            n=args.n,
            gammas=gammas,
            injection=inj,
            slots=args.slots,
            seed=args.seed,
        ),
        batch_sizes,
    )
    print("scheme\tbatch\tmean_delay\tmean_window\tdecode_ops_per_packet\tsaturated")
    print(
        f"moving_window\t-\t{_FLOAT % s.mean_delay[0]}\t{_FLOAT % s.mean_window}"
        f"\t{_FLOAT % s.decode_ops_r0}\t0"
    )
    for point in sweep.results:
        print(
            f"rlnc\t{point.config.batch_size}\t{_FLOAT % point.mean_delay}"
            f"\t{_FLOAT % point.mean_window}\t{_FLOAT % point.decode_ops_per_packet}"
            f"\t{int(point.saturated)}"
        )
    if sweep.best is None:
        print("rlnc: no feasible batch size in sweep", file=sys.stderr)
        return 1
    ok = sweep.best.mean_delay > s.mean_delay[0]
    print(f"best_rlnc_batch\t{sweep.best_batch}")
    print(f"delay_advantage\t{'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mwcast", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment from an INI config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--slots", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--mode", choices=("dynamics", "full"), default=None)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="run a named preset sweep")
    p.add_argument("--preset", required=True, choices=PRESETS)
    p.add_argument("--out", default="out")
    p.add_argument("--slots", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("theory", help="print analytical predictions")
    p.add_argument("--lambda", dest="lam", required=True)
    p.add_argument("--gammas", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--injection", choices=("constant", "bernoulli"), default="constant")
    p.set_defaults(func=_cmd_theory)

    p = sub.add_parser("fit", help="fit a decay rate to a ccdf table")
    p.add_argument("--input", required=True)
    p.add_argument("--kmin", type=int, default=None)
    p.add_argument("--kmax", type=int, default=None)
    p.add_argument("--lo", type=float, default=1e-5)
    p.add_argument("--hi", type=float, default=1e-2)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("compare-baseline", help="moving-window vs batched RLNC")
    p.add_argument("--lambda", dest="lam", default="27/50")
    p.add_argument("--gammas", default="0.6")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--slots", type=int, default=500_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batches", default="50,100,200,300,400,600")
    p.set_defaults(func=_cmd_compare_baseline)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
