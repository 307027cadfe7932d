#!/usr/bin/env python3
"""
cloudjudge - evaluate generated particle-cloud jets against real ones

Subcommands:
    evaluate   W1M, W1P, W1EFP, COV, MMD and FPND (or the EFP surrogate) as one JSON report
    baseline   real-vs-real W1 triple (bootstrap baseline)
    render     one jet image, or the mean image of a file, as a CSV matrix
    emd        EMD between two jets, optionally the transport plan as CSV
    toygen     write a toy sample
    convert    JNP1 <-> CSV
    hist       plot-ready histograms of particle features and jet mass
    correlate  metric-vs-metric correlations over many generated batches

JSON goes to stdout, progress and errors to stderr.
Exit codes: 0 ok, 2 input/validation, 3 numerical/solver, 4 I/O.

Environment (.env is loaded):
    CLOUDJUDGE_THREADS      cap on worker threads; results never depend on it

USAGE:
    python cloudjudge.py toygen --prongs 3 --n 10000 --seed 7 --out top_toy.jnp
    python cloudjudge.py evaluate --real real.jnp --gen gen.jnp --seed 1 --out report.json
    python cloudjudge.py baseline --real real.jnp --label gluon
"""

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np
from dotenv import load_dotenv

from cloud_io import read_any, write_any
from cloud_model import (
    FEATURE_NAMES,
    ConfigInvalid,
    IndexOutOfRange,
    IoFailure,
    JetLabel,
    MetricReport,
    NumericalError,
)
from correlate import metric_correlations, summarize
from covmmd import DIRECTION as COV_MMD_DIRECTION, CovMmdProtocol, cov_mmd
from efp import EfpConfig, evaluation_graphs
from emd import EmdConfig, emd
from frechet import DEFAULT_FPND_N, EfpSurrogate, ExternalActivations, fpnd
from kinematics import DEFAULT_HALF_WIDTH, DEFAULT_RESOLUTION, discretize, mean_image, particle_features
from runtime import load_settings, status
from toygen import ToyConfig, generate
from w1 import STDERR_DEFINITION, W1Protocol, baseline, jet_masses, reference_baseline, w1efp, w1m, w1p

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


@dataclass(frozen=True)
class EvalConfig:
    real_path: str
    gen_path: str
    acts_real: Optional[str] = None
    acts_gen: Optional[str] = None
    no_fpnd: bool = False
    w1: W1Protocol = field(default_factory=W1Protocol)
    covmmd: CovMmdProtocol = field(default_factory=CovMmdProtocol)
    emd: EmdConfig = field(default_factory=EmdConfig)
    efp: EfpConfig = field(default_factory=EfpConfig)
    fpnd_n: int = DEFAULT_FPND_N
    out: Optional[str] = None
    seed: int = 0

    def validate(self) -> None:
        self.w1.validate()
        self.covmmd.validate()
        self.emd.validate()
        self.efp.validate()
        if self.fpnd_n < 2:
            raise ConfigInvalid(f"fpnd n must be >= 2, got {self.fpnd_n}")
        if bool(self.acts_real) != bool(self.acts_gen):
            raise ConfigInvalid("--acts-real and --acts-gen must be given together")

    def to_dict(self) -> dict:
        return {
            "real": self.real_path,
            "gen": self.gen_path,
            "acts_real": self.acts_real,
            "acts_gen": self.acts_gen,
            "no_fpnd": self.no_fpnd,
            "seed": self.seed,
            "w1": self.w1.to_dict(),
            "covmmd": self.covmmd.to_dict(),
            "emd": self.emd.to_dict(),
            "efp": self.efp.to_dict(),
            "fpnd_n": self.fpnd_n,
        }


def sig9(obj: Any) -> Any:
    """Round every float in a JSON-able structure to 9 significant digits."""
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return float(f"{value:.9g}") if math.isfinite(value) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, dict):
        return {k: sig9(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sig9(v) for v in obj]
    return obj


def to_json(obj: Any) -> str:
    return json.dumps(sig9(obj), indent=2)


def _write_text(path: str, text: str) -> None:
    try:
        with open(path, "w") as f:
            f.write(text)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _save_matrix(path: str, matrix: np.ndarray) -> None:
    try:
        np.savetxt(path, np.atleast_2d(matrix), fmt="%.9g", delimiter=",")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


class CloudJudge:
    """Runs the evaluation pipeline subcommands."""

    def __init__(self):
        self.threads = 1
        self.settings = None

    def setup_runtime(self):
        """Read CLOUDJUDGE_* settings from the environment."""
        self.settings = load_settings()
        self.threads = self.settings.threads
        status(f"✓ Using up to {self.threads} worker thread(s)")

    # ------------------------------------------------------------------
    # evaluate
    # ------------------------------------------------------------------

    def cmd_evaluate(self, cfg: EvalConfig) -> Dict[str, Any]:
        cfg.validate()
        timings = {}

        status(f"Loading {cfg.real_path} and {cfg.gen_path}...")
        real = read_any(cfg.real_path)
        gen = read_any(cfg.gen_path)
        status(f"✓ {len(real)} real jets, {len(gen)} generated jets")

        def timed(name, fn):
            start = time.perf_counter()
            result = fn()
            timings[name] = time.perf_counter() - start
            status(f"✓ {name} done in {timings[name]:.2f}s")
            return result

        mass = timed("w1m", lambda: w1m(real, gen, cfg.w1, self.threads))
        parts = timed("w1p", lambda: w1p(real, gen, cfg.w1, self.threads))
        efps = timed("w1efp", lambda: w1efp(real, gen, cfg.w1, cfg.efp, self.threads))
        matching = timed("cov_mmd", lambda: cov_mmd(real, gen, cfg.covmmd, cfg.emd, self.threads))

        frechet_result = None
        fpnd_metric = "fpnd"
        if not cfg.no_fpnd:
            if cfg.acts_real and cfg.acts_gen:
                provider = ExternalActivations.from_files(cfg.acts_real, cfg.acts_gen)
            else:
                provider = EfpSurrogate(cfg.efp, self.threads)
            frechet_result = timed("fpnd", lambda: fpnd(real, gen, provider, cfg.fpnd_n, cfg.seed))
            fpnd_metric = frechet_result.metric_name

        warnings = list(mass.warnings + parts.warnings + efps.warnings + matching.warnings)
        if frechet_result is not None:
            warnings += list(frechet_result.warnings)

        report = MetricReport(
            w1m=(mass.mean, mass.stderr),
            w1p=(parts.mean, parts.stderr),
            w1efp=(efps.mean, efps.stderr),
            fpnd=None if frechet_result is None else frechet_result.value,
            fpnd_metric=fpnd_metric,
            cov=matching.cov,
            mmd=matching.mmd,
            config=cfg.to_dict(),
            components={
                "w1m_batches": list(mass.batches),
                "w1p": dict(zip(FEATURE_NAMES, parts.components)),
                "w1efp": {str(g): v for g, v in zip(evaluation_graphs(), efps.components)},
                "cov_batches": list(matching.cov_batches),
                "mmd_batches": list(matching.mmd_batches),
            },
            conventions=self._conventions(cfg),
            warnings=tuple(dict.fromkeys(warnings)),
        )

        output = {"schema": SCHEMA_VERSION}
        output.update(report.to_dict())
        output["inputs"] = {"n_real": len(real), "n_gen": len(gen),
                            "real_label": real.label.name.lower(), "gen_label": gen.label.name.lower()}
        output["timings"] = timings

        if cfg.out:
            _write_text(cfg.out, to_json(output) + "\n")
            status(f"✓ Report written to {cfg.out}")
        return output

    def _conventions(self, cfg: EvalConfig) -> Dict[str, Any]:
        return {
            "particle_mass": "massless constituents",
            "stderr": STDERR_DEFINITION,
            "cov_mmd_direction": COV_MMD_DIRECTION,
            "emd": cfg.emd.to_dict(),
            "efp_measure": cfg.efp.to_dict(),
            "w1_sampling": "without replacement within a batch, same draw on both sides",
        }

    # ------------------------------------------------------------------
    # baseline
    # ------------------------------------------------------------------

    def cmd_baseline(self, real_path: str, proto: W1Protocol, efp_cfg: EfpConfig,
                     label: Optional[JetLabel] = None) -> Dict[str, Any]:
        real = read_any(real_path, label)
        status(f"✓ {len(real)} real jets ({real.label.name.lower()})")
        mass, parts, efps = baseline(real, proto, efp_cfg, self.threads)
        warnings = list(dict.fromkeys(mass.warnings + parts.warnings + efps.warnings))
        return {
            "schema": SCHEMA_VERSION,
            "label": real.label.name.lower(),
            "baseline": {
                "w1m": mass.to_dict(),
                "w1p": parts.to_dict(),
                "w1efp": efps.to_dict(),
            },
            "table": {
                "w1m_x1e-3": [mass.mean / 1e-3, mass.stderr / 1e-3],
                "w1p_x1e-3": [parts.mean / 1e-3, parts.stderr / 1e-3],
                "w1efp_x1e-5": [efps.mean / 1e-5, efps.stderr / 1e-5],
            },
            "jetnet_reference": reference_baseline(real.label),
            "config": {"w1": proto.to_dict(), "efp": efp_cfg.to_dict(), "stderr": STDERR_DEFINITION},
            "warnings": warnings,
        }

    # ------------------------------------------------------------------
    # render / emd / toygen / convert / hist / correlate
    # ------------------------------------------------------------------

    def cmd_render(self, cloud_path: str, index: str, resolution: int, half_width: float,
                   out: str) -> Dict[str, Any]:
        sample = read_any(cloud_path)
        if index == "mean":
            image = mean_image(sample.clouds, resolution, half_width)
        else:
            try:
                i = int(index)
            except ValueError:
                raise ConfigInvalid(f"jet index must be an integer or 'mean', got {index!r}") from None
            if not 0 <= i < len(sample):
                raise IndexOutOfRange(f"jet index {i} out of range for {len(sample)} jets")
            image = discretize(sample.clouds[i], resolution, half_width)
        _save_matrix(out, image.grid)
        status(f"✓ {resolution}x{resolution} image written to {out}")
        return {"out": out, "index": index, "resolution": resolution, "half_width": half_width,
                "total_pt_rel": image.total}

    def cmd_emd(self, path_a: str, path_b: str, index_a: int, index_b: int, cfg: EmdConfig,
                plan_out: Optional[str] = None) -> Dict[str, Any]:
        a, b = read_any(path_a), read_any(path_b)
        for name, sample, i in (("a", a, index_a), ("b", b, index_b)):
            if not 0 <= i < len(sample):
                raise IndexOutOfRange(f"jet index {i} out of range for {name} ({len(sample)} jets)")
        distance, plan = emd(a.clouds[index_a], b.clouds[index_b], cfg)
        if plan_out:
            _save_matrix(plan_out, plan.flow)
            status(f"✓ Transport plan written to {plan_out}")
        return {"distance": distance, "created": plan.created_total, "destroyed": plan.destroyed_total,
                "radius": cfg.radius}

    def cmd_toygen(self, cfg: ToyConfig, out: str) -> Dict[str, Any]:
        sample = generate(cfg, self.threads)
        write_any(sample, out)
        status(f"✓ {len(sample)} toy jets written to {out}")
        return {"out": out, "config": cfg.to_dict()}

    def cmd_convert(self, src: str, dst: str, label: Optional[JetLabel] = None) -> Dict[str, Any]:
        sample = read_any(src, label)
        write_any(sample, dst)
        status(f"✓ Converted {src} -> {dst}")
        return {"src": src, "dst": dst, "n_jets": len(sample), "capacity": sample.capacity}

    def cmd_hist(self, path: str, bins: int, out: Optional[str] = None) -> Dict[str, Any]:
        if bins < 1:
            raise ConfigInvalid(f"bins must be >= 1, got {bins}")
        sample = read_any(path)
        particles = particle_features(sample.clouds)
        columns = {name: particles[:, k] for k, name in enumerate(FEATURE_NAMES)}
        columns["jet_mass"] = jet_masses(sample, self.threads)
        hists = {}
        for name, values in columns.items():
            counts, edges = np.histogram(values, bins=bins)
            hists[name] = {"edges": edges.tolist(), "counts": counts.tolist()}
        result = {"schema": SCHEMA_VERSION, "n_jets": len(sample), "histograms": hists}
        if out:
            _write_text(out, to_json(result) + "\n")
        return result

    def cmd_correlate(self, real_path: str, gen_path: str, n_batches: int, batch_size: int,
                      cov_subsample: int, efp_cfg: EfpConfig, emd_cfg: EmdConfig, seed: int) -> Dict[str, Any]:
        real, gen = read_any(real_path), read_any(gen_path)
        study = metric_correlations(real, gen, n_batches, batch_size, cov_subsample, efp_cfg, emd_cfg,
                                    seed, self.threads)
        result = {"schema": SCHEMA_VERSION}
        result.update(study.to_dict())
        result["pairs"] = summarize(study)
        return result


def _add_protocol_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="Seed for every random draw")
    parser.add_argument("--w1-batch", type=int, default=10_000, help="Jets per W1 batch")
    parser.add_argument("--w1-nbatches", type=int, default=5, help="Number of W1 batches")
    parser.add_argument("--efp-beta", type=float, default=1.0, help="Angular exponent of the EFPs")
    parser.add_argument("--efp-unnormalized", action="store_true", help="Use raw pt_rel instead of z = pt/sum(pt)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Evaluate generated particle-cloud jets")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="Full metric report")
    p.add_argument("--real", required=True, help="Real cloud file (.jnp or .csv)")
    p.add_argument("--gen", required=True, help="Generated cloud file (.jnp or .csv)")
    p.add_argument("--acts-real", help="JACT activations for the real file")
    p.add_argument("--acts-gen", help="JACT activations for the generated file")
    p.add_argument("--no-fpnd", action="store_true", help="Skip the Frechet score")
    _add_protocol_flags(p)
    p.add_argument("--cov-subsample", type=int, default=100, help="Jets per COV/MMD batch")
    p.add_argument("--cov-nbatches", type=int, default=10, help="Number of COV/MMD batches")
    p.add_argument("--emd-radius", type=float, default=0.8, help="Jet radius R in the EMD")
    p.add_argument("--fpnd-n", type=int, default=DEFAULT_FPND_N, help="Jets per side for the Frechet score")
    p.add_argument("--out", help="Also write the report to this path")

    p = sub.add_parser("baseline", help="Real-vs-real W1 baseline")
    p.add_argument("--real", required=True, help="Real cloud file")
    p.add_argument("--label", help="Override the sample label (gluon, light_quark, top_quark, ...)")
    _add_protocol_flags(p)

    p = sub.add_parser("render", help="Jet image as a CSV matrix")
    p.add_argument("--clouds", required=True, help="Cloud file")
    p.add_argument("--index", default="mean", help="Jet index or 'mean'")
    p.add_argument("--resolution", type=int, default=DEFAULT_RESOLUTION)
    p.add_argument("--half-width", type=float, default=DEFAULT_HALF_WIDTH)
    p.add_argument("--out", required=True, help="Output CSV")
    p.add_argument("--seed", type=int, default=0, help="Accepted for uniformity; rendering is deterministic")

    p = sub.add_parser("emd", help="EMD between two jets")
    p.add_argument("--a", required=True, help="Cloud file of the first jet")
    p.add_argument("--b", required=True, help="Cloud file of the second jet")
    p.add_argument("--index-a", type=int, default=0)
    p.add_argument("--index-b", type=int, default=0)
    p.add_argument("--emd-radius", type=float, default=0.8)
    p.add_argument("--plan-out", help="Write the transport plan as CSV")
    p.add_argument("--seed", type=int, default=0, help="Accepted for uniformity; the EMD is deterministic")

    p = sub.add_parser("toygen", help="Generate a toy sample")
    p.add_argument("--n", type=int, required=True, help="Number of jets")
    p.add_argument("--prongs", type=int, default=1, choices=[1, 2, 3])
    p.add_argument("--max-particles", type=int, default=30)
    p.add_argument("--split-prob", type=float, default=0.9)
    p.add_argument("--angle-scale", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="Output file (.csv for CSV, anything else JNP1)")

    p = sub.add_parser("convert", help="Convert between JNP1 and CSV")
    p.add_argument("--src", required=True)
    p.add_argument("--dst", required=True)
    p.add_argument("--label", help="Label for CSV input")
    p.add_argument("--seed", type=int, default=0, help="Accepted for uniformity; conversion is deterministic")

    p = sub.add_parser("hist", help="Feature histograms as JSON")
    p.add_argument("--clouds", required=True)
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--out", help="Also write the histograms to this path")

    p = sub.add_parser("correlate", help="Metric correlation study")
    p.add_argument("--real", required=True)
    p.add_argument("--gen", required=True)
    p.add_argument("--n-batches", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=1000)
    p.add_argument("--cov-subsample", type=int, default=50)
    p.add_argument("--emd-radius", type=float, default=0.8)
    p.add_argument("--efp-beta", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)

    return parser


def run_command(judge: CloudJudge, args: argparse.Namespace) -> Dict[str, Any]:
    label = JetLabel.parse(args.label) if getattr(args, "label", None) else None

    if args.command == "evaluate":
        cfg = EvalConfig(
            real_path=args.real,
            gen_path=args.gen,
            acts_real=args.acts_real,
            acts_gen=args.acts_gen,
            no_fpnd=args.no_fpnd,
            w1=W1Protocol(args.w1_batch, args.w1_nbatches, args.seed),
            covmmd=CovMmdProtocol(args.cov_subsample, args.cov_nbatches, args.seed),
            emd=EmdConfig(args.emd_radius),
            efp=EfpConfig(args.efp_beta, not args.efp_unnormalized),
            fpnd_n=args.fpnd_n,
            out=args.out,
            seed=args.seed,
        )
        return judge.cmd_evaluate(cfg)
    if args.command == "baseline":
        proto = W1Protocol(args.w1_batch, args.w1_nbatches, args.seed)
        return judge.cmd_baseline(args.real, proto, EfpConfig(args.efp_beta, not args.efp_unnormalized), label)
    if args.command == "render":
        return judge.cmd_render(args.clouds, args.index, args.resolution, args.half_width, args.out)
    if args.command == "emd":
        return judge.cmd_emd(args.a, args.b, args.index_a, args.index_b, EmdConfig(args.emd_radius), args.plan_out)
    if args.command == "toygen":
        cfg = ToyConfig(n_jets=args.n, max_particles=args.max_particles, split_prob=args.split_prob,
                        angle_scale=args.angle_scale, prongs=args.prongs, rng_seed=args.seed)
        return judge.cmd_toygen(cfg, args.out)
    if args.command == "convert":
        return judge.cmd_convert(args.src, args.dst, label)
    if args.command == "hist":
        return judge.cmd_hist(args.clouds, args.bins, args.out)
    if args.command == "correlate":
        return judge.cmd_correlate(args.real, args.gen, args.n_batches, args.batch_size, args.cov_subsample,
                                   EfpConfig(args.efp_beta), EmdConfig(args.emd_radius), args.seed)
    raise ConfigInvalid(f"unknown command {args.command!r}")


def main(argv=None) -> int:
    """Main entry point."""
    args = build_parser().parse_args(argv)
    load_dotenv()

    try:
        judge = CloudJudge()
        judge.setup_runtime()
        result = run_command(judge, args)
    except ValueError as e:  # CloudError and bad argument values
        status(f"✗ {type(e).__name__}: {e}")
        return EXIT_INPUT
    except NumericalError as e:
        status(f"✗ {type(e).__name__}: {e}")
        return EXIT_NUMERICAL
    except OSError as e:
        status(f"✗ {type(e).__name__}: {e}")
        return EXIT_IO

    print(to_json(result))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
