"""
Experiment Orchestrator
Batch driver exposing every sampler, comparison and oracle as a subcommand
"""

import argparse
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple
import json
import math
import os
import sys

import numpy as np
import pandas as pd

sys.path.append(str(Path(__file__).parent.parent))

from discrepancy.flows import (
    cylinder_count, cylinder_count_bruteforce, cylinder_volume, sample_flow_discrepancy, sample_geodesic,
)
from discrepancy.orbit_discrepancy import (
    resonant_reduction_profile, sample_kesten, sample_translation,
)
from geometry.convex_body import ConvexBody, ball, body_from_dict, ellipsoid, support_perturbation
from lattices.lattice_space import (
    OBSERVABLES, equidistribution_check, resonant_frame, resonant_set, siegel_counts,
)
from limit_law.limit_law import (
    VARIANTS, LimitLawConfig, build_sample_point, doubled_value, evaluate, sample_limit, tail_variance,
    truncation_bound,
)
from quality.acceptance_engine import AcceptanceEngine
from quality.acceptance_rules import SCALES
from quality.ecdf import EmpiricalCDF, REPORT_QUANTILES, cauchy_fit, comparison_report, quantile
from quality.reports import AcceptanceReportGenerator
from quality.schemas import validate_frame
from utils.config_loader import ConfigLoader, get_config, reset_config
from utils.errors import ConfigValidationError, DomainError, LabError, UnsupportedDimensionError
from utils.logger import get_logger
from utils.output_manager import get_output_manager
from utils.rng import master_stream, spawn_seeds

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_UNSUPPORTED = 3


# ======================================================================
# ARGUMENT HELPERS
# ======================================================================

def parse_floats(text: str) -> List[float]:
    """'0.1,0.2' -> [0.1, 0.2]"""
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from e


def parse_ints(text: str) -> List[int]:
    try:
        return [int(float(v)) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from e


def parse_body(text: str, d: int) -> ConvexBody:
    """
    Body descriptor

        ball | ball:<radius>            ball centered at bodies.default_center
        ellipsoid:<a1>,...,<ad>         axis-parallel semi-axes
        perturbed:<j>,<a>,<b>;...       unit disk with support harmonics (d=2)
        json:<path>                     body_to_dict descriptor
    """
    center = [float(get_config().get('bodies.default_center', 0.5))] * d
    kind, _, params = text.partition(":")
    if kind == "ball":
        return ball(d, float(params) if params else 1.0, center=center)
    if kind == "ellipsoid":
        axes = parse_floats(params)
        if len(axes) != d:
            raise DomainError(f"ellipsoid needs {d} semi-axes, got {len(axes)}")
        return ellipsoid(np.diag(np.square(axes)), center=center)
    if kind == "perturbed":
        harmonics = [tuple(parse_floats(h)) for h in params.split(";") if h.strip()]
        if any(len(h) != 3 for h in harmonics):
            raise DomainError("perturbation harmonics are given as j,a,b")
        return support_perturbation(np.eye(d), [(int(j), a, b) for j, a, b in harmonics], center=center)
    if kind == "json":
        with open(params, "r") as f:
            return body_from_dict(json.load(f))
    raise DomainError(f"unknown body descriptor: {text!r}")


def quantile_summary(values: np.ndarray) -> Dict[str, float]:
    ecdf = EmpiricalCDF.from_samples(values)
    return {str(q): quantile(ecdf, q / 100.0) for q in REPORT_QUANTILES}


class ExperimentOrchestrator:
    """Runs one subcommand: sample, validate the dump, write CSV and JSON summary"""

    def __init__(self, out_dir: Optional[str] = None, threads: Optional[int] = None):
        self.config = get_config()
        self.outputs = get_output_manager(out_dir)
        self.threads = threads if threads is not None else int(self.config.get('sampling.max_workers', 1))

        self.start_time = None
        self.end_time = None

        logger.info(f"ExperimentOrchestrator initialized - Output: {self.outputs.output_dir}, workers: {self.threads}")

    # ------------------------------------------------------------------

    def _finish(self, command: str, args: argparse.Namespace, results: Dict[str, Any],
                frame: Optional[pd.DataFrame] = None, schema: Optional[str] = None,
                flags: Optional[Dict[str, int]] = None) -> Dict[str, Any]:
        """Validate and write <command>_samples.csv and <command>_summary.json"""
        if frame is not None:
            frame = validate_frame(frame, schema)
            self.outputs.write_dataframe(frame, f"{command}_samples.csv")
        summary = {
            "command": command,
            "arguments": {k: v for k, v in sorted(vars(args).items()) if k != "handler"},
            "config": self.config.as_dict(),
            "seed": getattr(args, "seed", None),
            "flags": flags or {},
            "results": results,
        }
        self.outputs.write_json(summary, f"{command}_summary.json")
        return summary

    def _limit_config(self, args: argparse.Namespace, variant: str, body: Optional[ConvexBody],
                      samples: int, seed: int) -> LimitLawConfig:
        return LimitLawConfig(
            variant=variant, d=args.d, body=body, M=args.M, P_max=args.P_max, samples=samples, seed=seed,
            n_haar=args.n_haar, haar_method=args.haar_method, parametric=getattr(args, "parametric", False),
            parametric_scale=args.b if getattr(args, "parametric", False) else None,
        )

    @staticmethod
    def _limit_flags(frame: pd.DataFrame) -> Dict[str, int]:
        return {"short_flags": int(frame["short_flags"].gt(0).sum()),
                "resampled": int(frame["resampled"].sum()),
                "skipped_terms": int(frame["skipped_terms"].sum())}

    # ------------------------------------------------------------------
    # Subcommands
    # ------------------------------------------------------------------

    def discrepancy_sample(self, args: argparse.Namespace) -> Tuple[Dict[str, Any], str]:
        body = parse_body(args.body, args.d)
        frame = sample_translation(body, args.a, args.b, args.N, args.samples, args.seed, gamma=args.gamma,
                                   parametric=args.parametric, density=args.density, max_workers=self.threads)
        results: Dict[str, Any] = {"n": len(frame), "quantiles": quantile_summary(frame["normalized"].to_numpy())}

        if args.eps:
            profile = resonant_reduction_profile(body, args.a, args.b, args.N, args.eps, args.samples,
                                                 args.seed, self.threads)
            profile = validate_frame(profile, "resonant_profile")
            self.outputs.write_dataframe(profile, "discrepancy-sample_resonant_profile.csv")
            results["residual_std"] = {str(k): float(v) for k, v in profile.groupby("eps")["residual"].std().items()}

            if args.d >= 2:
                alpha = frame[[f"alpha{i + 1}" for i in range(args.d)]].iloc[0].to_numpy()
                harmonics = resonant_set(args.N, alpha, min(args.eps))
                if harmonics:
                    table = validate_frame(resonant_frame(harmonics), "resonant_set")
                    self.outputs.write_dataframe(table, "discrepancy-sample_resonant_set.csv")
                results["resonant_set_size"] = len(harmonics)

        summary = self._finish("discrepancy-sample", args, results, frame, "translation")
        return summary, f"median normalized discrepancy: {results['quantiles']['50']:.6g}"

    def limit_sample(self, args: argparse.Namespace) -> Tuple[Dict[str, Any], str]:
        body = None if args.variant == "geodesic" else parse_body(args.body, args.d)
        cfg = LimitLawConfig(
            variant=args.variant, d=args.d, body=body, M=args.M, P_max=args.P_max, samples=args.samples,
            seed=args.seed, n_haar=args.n_haar, haar_method=args.haar_method, K_max=args.K_max, r=args.r,
            coefficients=args.coefficients, v=args.v, v_density=args.v_density,
            phase_shift=args.phase_shift, parametric=args.parametric, parametric_scale=args.parametric_scale,
        )
        frame = sample_limit(cfg, self.threads)
        results = {"limit_config": cfg.echo(), "n": len(frame),
                   "quantiles": quantile_summary(frame["value"].to_numpy())}
        summary = self._finish("limit-sample", args, results, frame, "limit", self._limit_flags(frame))
        return summary, f"median limit value: {results['quantiles']['50']:.6g}"

    def compare(self, args: argparse.Namespace) -> Tuple[Dict[str, Any], str]:
        body = parse_body(args.body, args.d)
        orbit = sample_translation(body, args.a, args.b, args.N, args.samples, args.seed, gamma=args.gamma,
                                   parametric=args.parametric, max_workers=self.threads)
        cfg = self._limit_config(args, "translation_sym" if body.symmetric else "translation_nonsym",
                                 body, args.limit_samples, args.seed + 1)
        limit = sample_limit(cfg, self.threads)

        report = comparison_report(EmpiricalCDF.from_samples(orbit["normalized"].to_numpy()),
                                   EmpiricalCDF.from_samples(limit["value"].to_numpy()))
        frame = pd.concat([
            pd.DataFrame({"source": "orbit", "sample_id": orbit["sample_id"], "value": orbit["normalized"]}),
            pd.DataFrame({"source": "limit", "sample_id": limit["sample_id"], "value": limit["value"]}),
        ], ignore_index=True)
        results = {"limit_config": cfg.echo(), **report}
        summary = self._finish("compare", args, results, frame, "compare", self._limit_flags(limit))
        return summary, f"ks: {report['ks']:.6f}"

    def kesten(self, args: argparse.Namespace) -> Tuple[Dict[str, Any], str]:
        frame = sample_kesten(args.r, args.N, args.samples, args.seed, self.threads)
        fit = cauchy_fit(EmpiricalCDF.from_samples(frame["normalized"].to_numpy()))
        results = {"cauchy_fit": fit.to_dict(), "quantiles": quantile_summary(frame["normalized"].to_numpy())}
        summary = self._finish("kesten", args, results, frame, "kesten")
        return summary, (f"cauchy fit: location {fit.location:.6g}, scale {fit.scale:.6g}, "
                         f"ks {fit.ks_to_fit:.6g}" + (" (degenerate)" if fit.degenerate else ""))

    def flow(self, args: argparse.Namespace) -> Tuple[Dict[str, Any], str]:
        body = parse_body(args.body, args.d)
        frame = sample_flow_discrepancy(body, args.a, args.b, args.T, args.samples, args.seed, v=args.v,
                                        density=args.density, max_workers=self.threads)
        results = {"n": len(frame), "quantiles": quantile_summary(frame["normalized"].to_numpy())}
        summary = self._finish("flow", args, results, frame, "flow")
        return summary, f"median normalized flow discrepancy: {results['quantiles']['50']:.6g}"

    def cylinder(self, args: argparse.Namespace) -> Tuple[Dict[str, Any], str]:
        if args.random:
            return self._cylinder_oracle(args)
        if args.x is None:
            raise DomainError("--x is required unless --random is given")
        y = np.asarray(args.x, dtype=float)
        if args.d is not None and y.size != args.d:
            raise DomainError(f"--x has {y.size} coordinates, expected {args.d}")
        alpha = np.asarray(args.alpha, dtype=float)
        if alpha.size == 1 and y.size > 2:
            alpha = np.full(y.size - 1, alpha[0])
        if alpha.size != y.size - 1:
            raise DomainError(f"--alpha needs {y.size - 1} coordinates")
        v = np.append(alpha, 1.0)

        count, discrepancy = cylinder_count(y, v, args.r, args.T, caps=not args.no_caps)
        results = {"count": count, "volume": cylinder_volume(y, v, args.r, args.T, caps=not args.no_caps),
                   "discrepancy": discrepancy}
        summary = self._finish("cylinder", args, results)
        return summary, f"count: {count} (discrepancy {discrepancy:.12g})"

    def _cylinder_oracle(self, args: argparse.Namespace) -> Tuple[Dict[str, Any], str]:
        rng = master_stream(args.seed)
        d = args.d or 2
        rows = []
        for i in range(args.random):
            r = float(rng.uniform(0.05, 0.5))
            T = float(rng.uniform(0.5, args.T))
            v = rng.normal(size=d)
            v /= np.linalg.norm(v)
            y = rng.random(d)
            count, discrepancy = cylinder_count(y, v, r, T)
            rows.append({"instance": i, "r": r, "T": T, "count": count,
                         "bruteforce": cylinder_count_bruteforce(y, v, r, T),
                         "volume": cylinder_volume(y, v, r, T), "discrepancy": discrepancy})
        frame = pd.DataFrame(rows)
        mismatches = int((frame["count"] != frame["bruteforce"]).sum())
        if mismatches:
            logger.warning(f"{mismatches} capsule counts differ from the brute-force scan")
        summary = self._finish("cylinder", args, {"instances": len(frame), "mismatches": mismatches},
                               frame, "cylinder")
        return summary, f"mismatches: {mismatches} of {len(frame)}"

    def geodesic(self, args: argparse.Namespace) -> Tuple[Dict[str, Any], str]:
        frame = sample_geodesic(args.d, args.a, args.b, args.T, args.samples, args.seed, density=args.density,
                                y=args.y, max_workers=self.threads)
        results = {"n": len(frame), "quantiles": quantile_summary(frame["normalized"].to_numpy())}
        summary = self._finish("geodesic", args, results, frame, "geodesic")
        return summary, f"median normalized ball time: {results['quantiles']['50']:.6g}"

    def equidistribution(self, args: argparse.Namespace) -> Tuple[Dict[str, Any], str]:
        if args.observable not in OBSERVABLES:
            raise DomainError(f"unknown observable {args.observable!r} (choose from {sorted(OBSERVABLES)})")
        frame = equidistribution_check(args.N_list, OBSERVABLES[args.observable], args.samples, args.seed,
                                       d=args.d, max_workers=self.threads)
        results: Dict[str, Any] = {"observable": args.observable,
                                   "means": {str(n): float(m) for n, m in zip(frame["N"], frame["mean"])}}
        headline = f"mean at N={int(frame['N'].iloc[-1])}: {frame['mean'].iloc[-1]:.6g}"

        if args.siegel_radius:
            n = args.d + 1
            counts = siegel_counts(n, args.siegel_radius, args.samples, args.seed, n_haar=args.n_haar,
                                   max_workers=self.threads)
            expected = math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1) * args.siegel_radius ** n
            stderr = float(counts.std(ddof=1) / math.sqrt(counts.size)) if counts.size > 1 else float("nan")
            results["siegel"] = {"n": n, "radius": args.siegel_radius, "mean": float(counts.mean()),
                                 "expected": expected, "stderr": stderr}
            headline += f"; siegel mean {counts.mean():.4f} vs {expected:.4f}"

        flags = {"short_vector_flags": int(frame["short_vector_flags"].sum())}
        summary = self._finish("equidistribution", args, results, frame, "equidistribution", flags)
        return summary, headline

    def tail_variance(self, args: argparse.Namespace) -> Tuple[Dict[str, Any], str]:
        body = parse_body(args.body, args.d)
        cfg = self._limit_config(args, "translation_sym" if body.symmetric else "translation_nonsym",
                                 body, args.samples, args.seed)
        points = []
        first_table = None
        for seed_seq in spawn_seeds(args.seed, args.samples):
            pt = build_sample_point(cfg, seed_seq)
            table, total = tail_variance(pt, cfg)
            value, _ = evaluate(pt, cfg)
            change = abs(doubled_value(pt, cfg) - value)
            bound = truncation_bound(pt, cfg)
            points.append({"variance": total, "change": change, "bound": bound, "covered": change <= bound})
            if first_table is None:
                first_table = table

        coverage = float(np.mean([p["covered"] for p in points]))
        results = {"limit_config": cfg.echo(), "points": points, "coverage": coverage}
        summary = self._finish("tail-variance", args, results, first_table, "tail_variance")
        return summary, f"coverage: {coverage:.3f} over {len(points)} points"

    def acceptance(self, args: argparse.Namespace) -> Tuple[Dict[str, Any], str]:
        engine = AcceptanceEngine(scale=args.scale, max_workers=self.threads)
        run = engine.run_all_rules(args.criteria)
        reports = AcceptanceReportGenerator(self.outputs)
        reports.generate_scorecard(run)
        reports.generate_summary(run)
        frame = AcceptanceReportGenerator.results_frame(run)
        self.outputs.write_dataframe(frame, "acceptance_results.csv")
        summary = self._finish("acceptance", args, run)
        return summary, f"passed {run['passed']} of {run['total_rules']} ({run['failed']} failed, {run['error']} errors)"

    # ------------------------------------------------------------------

    def run(self, args: argparse.Namespace) -> Dict[str, Any]:
        """Execute the selected subcommand with banners and timing"""
        self.start_time = datetime.now()
        logger.info("=" * 80)
        logger.info(f"EXPERIMENT: {args.command}")
        logger.info(f"Started at: {self.start_time}")
        logger.info("=" * 80)

        try:
            summary, headline = getattr(self, args.command.replace("-", "_"))(args)
        except Exception as e:
            logger.error(f"Experiment {args.command} failed: {e}")
            raise

        self.end_time = datetime.now()
        duration = (self.end_time - self.start_time).total_seconds()
        logger.info("=" * 80)
        logger.info(f"✓ {args.command.upper()} COMPLETED")
        logger.info(f"Duration: {duration:.2f} seconds")
        logger.info("=" * 80)
        print(headline)
        return summary


# ======================================================================
# COMMAND LINE
# ======================================================================

def _add_common(parser: argparse.ArgumentParser, seed: int) -> None:
    parser.add_argument('--out-dir', default=None, help='Output directory (default: paths.outputs)')
    parser.add_argument('--threads', type=int, default=None, help='Worker processes (overrides DISCLAB_THREADS)')
    parser.add_argument('--config', default=None, help='Directory holding config.yaml')
    parser.add_argument('--seed', type=int, default=seed, help='Master seed')


def _add_lattice(parser: argparse.ArgumentParser, config: ConfigLoader) -> None:
    parser.add_argument('--M', type=int, default=int(config.get('limit_law.M', 8)), help='Cutoff on ||m||_inf')
    parser.add_argument('--P-max', dest='P_max', type=int, default=int(config.get('limit_law.P_max', 64)),
                        help='Cutoff on the multiplicity p')
    parser.add_argument('--n-haar', type=int, default=int(config.get('sampling.n_haar', 1_000_000)),
                        help='N of the horospherical Haar sampler')
    parser.add_argument('--haar-method', choices=['horospherical', 'siegel_check'], default='horospherical')


def build_parser() -> argparse.ArgumentParser:
    config = get_config()
    seed = int(config.get('sampling.seed', 42))
    n_haar = int(config.get('sampling.n_haar', 1_000_000))
    a, b = float(config.get('discrepancy.a', 0.2)), float(config.get('discrepancy.b', 0.4))

    parser = argparse.ArgumentParser(
        description='Discrepancy limit-law experiments: orbit samplers, limit laws and oracles'
    )
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('discrepancy-sample', help='Normalized translation discrepancies')
    _add_common(p, seed)
    p.add_argument('--d', type=int, default=2)
    p.add_argument('--body', default='ball')
    p.add_argument('--a', type=float, default=a)
    p.add_argument('--b', type=float, default=b)
    p.add_argument('--N', type=int, required=True)
    p.add_argument('--gamma', type=float, default=0.0)
    p.add_argument('--samples', type=int, default=1000)
    p.add_argument('--density', default=None, help="'beta:a,b' product density for (r, alpha, x)")
    p.add_argument('--parametric', action='store_true', help='Slanted-cylinder section family C_alpha')
    p.add_argument('--eps', type=parse_floats, default=None, help='Resonant-reduction profile, e.g. 0.4,0.2,0.1')

    p = sub.add_parser('limit-sample', help='Monte Carlo samples of a limit series')
    _add_common(p, seed)
    _add_lattice(p, config)
    p.add_argument('--variant', choices=VARIANTS, default='translation_sym')
    p.add_argument('--d', type=int, default=2)
    p.add_argument('--body', default='ball')
    p.add_argument('--samples', type=int, default=1000)
    p.add_argument('--K-max', dest='K_max', type=int, default=int(config.get('limit_law.K_max', 128)))
    p.add_argument('--r', type=float, default=1.0, help='Scale of the d=2 flow law')
    p.add_argument('--coefficients', choices=['exact', 'herz'], default='exact')
    p.add_argument('--v', type=parse_floats, default=None, help='Fixed flow direction')
    p.add_argument('--v-density', default='box:0.5,1.5')
    p.add_argument('--phase-shift', type=float, default=None)
    p.add_argument('--parametric', action='store_true')
    p.add_argument('--parametric-scale', type=float, default=None,
                   help='Condition slanted-section alpha on fitting the unit cube at this scale')

    p = sub.add_parser('compare', help='KS distance between orbit samples and the limit law')
    _add_common(p, seed)
    _add_lattice(p, config)
    p.add_argument('--d', type=int, default=2)
    p.add_argument('--body', default='ball')
    p.add_argument('--a', type=float, default=a)
    p.add_argument('--b', type=float, default=b)
    p.add_argument('--N', type=int, required=True)
    p.add_argument('--gamma', type=float, default=0.0)
    p.add_argument('--samples', type=int, default=2000)
    p.add_argument('--limit-samples', type=int, default=4000)
    p.add_argument('--parametric', action='store_true')

    p = sub.add_parser('kesten', help='Interval discrepancies D_N / ln N and their Cauchy fit')
    _add_common(p, seed)
    p.add_argument('--r', type=float, required=True)
    p.add_argument('--N', type=int, required=True)
    p.add_argument('--samples', type=int, default=2000)

    p = sub.add_parser('flow', help='Normalized linear-flow discrepancies')
    _add_common(p, seed)
    p.add_argument('--d', type=int, default=2)
    p.add_argument('--body', default='ball')
    p.add_argument('--a', type=float, default=a)
    p.add_argument('--b', type=float, default=b)
    p.add_argument('--T', type=float, required=True)
    p.add_argument('--samples', type=int, default=1000)
    p.add_argument('--v', type=parse_floats, default=None, help='Fixed velocity')
    p.add_argument('--density', default='box:0,1', help="'box:lo,hi' velocity density")

    p = sub.add_parser('cylinder', help='Lattice points in a slanted capsule')
    _add_common(p, seed)
    p.add_argument('--d', type=int, default=None)
    p.add_argument('--r', type=float, default=0.1)
    p.add_argument('--T', type=float, default=1.0)
    p.add_argument('--alpha', type=parse_floats, default=[0.0], help='Slope; direction is (alpha, 1)')
    p.add_argument('--x', type=parse_floats, default=None, help='Start point of the axis')
    p.add_argument('--no-caps', action='store_true', help='Clip the infinite cylinder to 0 <= z_last <= T')
    p.add_argument('--random', type=int, default=0, help='Oracle mode: random instances with T up to --T')

    p = sub.add_parser('geodesic', help='Normalized geodesic ball times')
    _add_common(p, seed)
    p.add_argument('--d', type=int, default=4)
    p.add_argument('--a', type=float, default=a)
    p.add_argument('--b', type=float, default=b)
    p.add_argument('--T', type=float, required=True)
    p.add_argument('--samples', type=int, default=1000)
    p.add_argument('--density', default='box:0.5,1.5')
    p.add_argument('--y', type=parse_floats, default=None, help='Ball center')

    p = sub.add_parser('equidistribution', help='Equidistribution of Dani lattices and the Siegel mean')
    _add_common(p, seed)
    p.add_argument('--N-list', dest='N_list', type=parse_ints, default=[100, 1000, 10000])
    p.add_argument('--observable', default='shortest_clipped')
    p.add_argument('--samples', type=int, default=1000)
    p.add_argument('--d', type=int, default=2)
    p.add_argument('--n-haar', type=int, default=n_haar)
    p.add_argument('--siegel-radius', type=float, default=None, help='Also check the Siegel mean in R^{d+1}')

    p = sub.add_parser('tail-variance', help='Tail variance and truncation bounds of the limit series')
    _add_common(p, seed)
    _add_lattice(p, config)
    p.add_argument('--d', type=int, default=2)
    p.add_argument('--body', default='ball')
    p.add_argument('--samples', type=int, default=1, help='Number of sample points')

    p = sub.add_parser('acceptance', help='Run the acceptance criteria')
    _add_common(p, seed)
    p.add_argument('--scale', choices=SCALES, default='smoke')
    p.add_argument('--criteria', type=parse_ints, default=None, help='Subset of criteria, e.g. 1,5,8')

    return parser


def _preconfigure(argv: Sequence[str]) -> None:
    """Apply --config and --threads before the config singleton is built"""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument('--config', default=None)
    pre.add_argument('--threads', type=int, default=None)
    known, _ = pre.parse_known_args(argv)
    if known.config:
        os.environ['DISCLAB_CONFIG_DIR'] = str(Path(known.config).resolve())
    if known.threads is not None:
        os.environ['DISCLAB_THREADS'] = str(known.threads)
    reset_config()


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse argv, run the subcommand and map errors to exit codes"""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        _preconfigure(argv)
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    except (ConfigValidationError, FileNotFoundError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_USAGE

    try:
        orchestrator = ExperimentOrchestrator(out_dir=args.out_dir, threads=args.threads)
        orchestrator.run(args)
    except UnsupportedDimensionError as e:
        logger.error(f"Unsupported: {e}")
        return EXIT_UNSUPPORTED
    except (DomainError, ConfigValidationError) as e:
        logger.error(f"Invalid arguments: {e}")
        return EXIT_USAGE
    except LabError as e:
        logger.error(f"Experiment failed: {e}")
        return EXIT_FAILURE
    return EXIT_OK


def main():
    """Main execution"""
    sys.exit(run())


if __name__ == "__main__":
    main()
