import argparse
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List, Optional, Sequence

from app.models.config import RunConfig, Settings, build_run_config, load_settings
from app.models.state import InterArrivalLaw, PrecisionPolicy
from app.utils.errors import AcceptanceError, ConfigError, exit_code_for

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def _parse_complex(text: str) -> complex:
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pinning", description="Lee-Yang zeros of the pinning model")
    parser.add_argument("--output-dir", default=None, help="artifact directory (PINNING_OUTPUT_DIR)")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING, ERROR")
    parser.add_argument("--base-bits", type=int, default=None)
    parser.add_argument("--per-degree-bits", type=float, default=None)
    parser.add_argument("--format", choices=["csv", "json", "svg"], default="json")
    sub = parser.add_subparsers(dest="command", required=True)

    zeros = sub.add_parser("zeros", help="all zeros of Z_N for one or more N")
    zeros.add_argument("--alpha", type=float, default=0.5)
    zeros.add_argument("--law", default="special")
    zeros.add_argument("-N", type=int, nargs="+", required=True)
    zeros.add_argument("--svg", default=None, help="scatter of the zeros over the critical curve")
    zeros.add_argument("--coords", choices=["h", "w"], default="h")

    curve = sub.add_parser("curve", help="sampled critical curve")
    curve.add_argument("--alpha", type=float, default=0.5)
    curve.add_argument("--resolution", type=int, default=512)
    curve.add_argument("--svg", default=None, help="curve family figure")

    classify = sub.add_parser("classify", help="region labels of points of the cylinder")
    classify.add_argument("--alpha", type=float, default=0.5)
    classify.add_argument("points", type=_parse_complex, nargs="+")

    density = sub.add_parser("density", help="density of the limit zero measure along the curve")
    density.add_argument("--alpha", type=float, default=0.5)
    density.add_argument("--resolution", type=int, default=256)

    f0zeros = sub.add_parser("f0zeros", help="zeros of the scaling limit F0")
    f0zeros.add_argument("--n-max", type=int, default=7)

    scaling_cmd = sub.add_parser("scaling", help="scaling-limit deviation report")
    scaling_cmd.add_argument("-N", type=int, nargs="+", default=[10000])

    griffiths = sub.add_parser("griffiths", help="Taylor coefficients of the reduced free energy")
    griffiths.add_argument("--p", type=float, default=0.5)
    griffiths.add_argument("--n0", type=int, default=3)
    griffiths.add_argument("--n-max", type=int, default=300)
    griffiths.add_argument("--k-min", type=int, default=40)
    griffiths.add_argument("--k-max", type=int, default=120)

    verify = sub.add_parser("verify", help="run the acceptance suite")
    verify.add_argument("--profile", choices=["quick", "full"], default="quick")
    return parser


def run_config_from_args(args: argparse.Namespace, settings: Settings) -> RunConfig:
    params: Dict[str, Any] = {"format": args.format, "output_dir": settings.output_dir}
    for name in ("alpha", "law", "svg", "coords", "resolution", "p", "n0", "n_max", "k_min", "k_max", "profile"):
        if getattr(args, name, None) is not None:
            params[name] = getattr(args, name)
    if getattr(args, "N", None) is not None:
        params["Ns"] = list(args.N)
    if getattr(args, "points", None) is not None:
        params["points"] = list(args.points)
    if args.command == "f0zeros":
        params.pop("n_max", None)
        params["N"] = args.n_max
    return build_run_config(args.command, **params)


def _zero_job(law_data: Dict[str, Any], N: int, policy_data: Dict[str, Any], cache_dir: str):
    from app.utils.artifacts import ArtifactStore

    store = ArtifactStore(cache_dir)
    return store.zero_set(InterArrivalLaw(**law_data), N, PrecisionPolicy(**policy_data))


def compute_zero_sets(law: InterArrivalLaw, Ns: Sequence[int], settings: Settings) -> List[Any]:
    """Zero sets for an N-list, in worker processes when PINNING_WORKERS > 1."""
    from app.utils.artifacts import ArtifactStore

    policy = settings.policy()
    if settings.workers > 1 and len(Ns) > 1:
        logger.info(f"Computing {len(Ns)} zero sets on {settings.workers} workers")
        with ProcessPoolExecutor(max_workers=settings.workers) as pool:
            futures = [pool.submit(_zero_job, law.to_dict(), N, policy.to_dict(), settings.cache_dir) for N in Ns]
            return [f.result() for f in futures]
    store = ArtifactStore(settings.cache_dir)
    return [store.zero_set(law, N, policy) for N in Ns]


def cmd_zeros(config: RunConfig, settings: Settings, store) -> None:
    from app.pinning import critcurve, zeros
    from app.utils import plotting
    from app.utils.artifacts import save_zero_set, write_csv, write_json

    law = config.inter_arrival_law()
    curve = critcurve.sample_curve(config.alpha, resolution=1024)
    zero_sets = compute_zero_sets(law, config.sizes(), settings)
    for zs in zero_sets:
        stem = f"zeros_{law.kind}_a{config.alpha:g}_N{zs.N}"
        started = time.time()
        path = save_zero_set(zs, store.output_path(stem + ".json"), meta={"generated": started})
        store.record("zero-set", path, started)
        stats = zeros.distance_stats(zs, curve)
        report = {
            "N": zs.N,
            "law": law.descriptor(),
            "count": zs.count,
            "flags": zs.flags,
            "max_residual": max(zs.residuals) if zs.residuals else 0.0,
            "distance": {k: v for k, v in stats.items() if k != "distances"},
            "region": zeros.zero_free_region(zs),
        }
        if zs.count == 1:
            z = zs.as_complex()[0]
            report["zero"] = {"re": z.real, "im": z.imag}
        store.record("distance-report", write_json(store.output_path(stem + "_report.json"), report))
        if config.coords == "w":
            rows = [{"N": zs.N, "re": w.real, "im": w.imag} for w in zeros.zeros_in_w(zs)]
            store.record("zeros-w", write_csv(store.output_path(stem + "_w.csv"), ["N", "re", "im"], rows))
        logger.info(f"N={zs.N}: {zs.count} zeros, max distance to curve {stats['max']:.4e}")
    if config.svg:
        if config.coords == "w":
            plotting.plot_zeros_w(zero_sets, config.svg)
        else:
            plotting.plot_zeros_over_curve(zero_sets[-1], config.svg)
        store.record("figure", config.svg)


def cmd_curve(config: RunConfig, settings: Settings, store) -> None:
    from app.pinning import critcurve
    from app.utils import plotting
    from app.utils.artifacts import write_curve_csv, write_json

    curve = critcurve.sample_curve(config.alpha, config.resolution)
    rows = curve.to_rows(critcurve.curve_densities(curve))
    stem = f"curve_a{config.alpha:g}"
    if config.format == "json":
        path = write_json(store.output_path(stem + ".json"), {"alpha": config.alpha, "rows": rows})
    else:
        path = write_curve_csv(store.output_path(stem + ".csv"), rows)
    store.record("curve", path)
    if config.svg or config.format == "svg":
        svg = config.svg or store.output_path("curve_family.svg")
        store.record("figure", plotting.plot_curve_family(svg))


def cmd_classify(config: RunConfig, settings: Settings, store) -> None:
    from app.pinning import critcurve
    from app.utils.artifacts import write_json

    labels = []
    for h in config.points:
        label = critcurve.classify(config.alpha, h)
        labels.append({"re": h.real, "im": h.imag, **label.to_dict()})
        print(f"{h}: {label.kind}")
    store.record("classification", write_json(store.output_path(f"classify_a{config.alpha:g}.json"),
                                              {"alpha": config.alpha, "points": labels}))


def cmd_density(config: RunConfig, settings: Settings, store) -> None:
    import math

    from app.pinning import critcurve
    from app.utils.artifacts import write_csv, write_json

    rows = []
    with_closed_form = abs(config.alpha - 0.5) < 1e-15
    for m in range(1, config.resolution + 1):
        theta = math.pi * m / config.resolution
        s = float(critcurve.arclength(config.alpha, theta, bits=64))
        row = {"theta": theta, "s": s, "density": float(critcurve.mu_density_theta(config.alpha, theta, bits=64))}
        if with_closed_form:
            row["closed_form"] = float(critcurve.mu_density_closed_form(config.alpha, s, "s", bits=64))
        rows.append(row)
    stem = f"density_a{config.alpha:g}"
    if config.format == "json":
        path = write_json(store.output_path(stem + ".json"), {"alpha": config.alpha, "rows": rows})
    else:
        path = write_csv(store.output_path(stem + ".csv"), ["theta", "s", "density", "closed_form"], rows)
    store.record("density", path)


def cmd_f0zeros(config: RunConfig, settings: Settings, store) -> None:
    from app.pinning import scaling
    from app.utils.artifacts import write_zero_table_csv

    rows = scaling.first_zeros_table(config.N or 7)
    for row in rows:
        print(f"{row['n']}: {row['re']:.3f} + {row['im']:.3f}i  gap {row['gap']:.3f}")
    store.record("table", write_zero_table_csv(store.output_path("f0_zeros.csv"), rows))


def cmd_scaling(config: RunConfig, settings: Settings, store) -> None:
    from app.chains.acceptance_chain import SCALING_GRID
    from app.pinning import scaling, zeros
    from app.utils.artifacts import write_json

    law = InterArrivalLaw.special(0.5)
    reports = []
    for N in config.sizes():
        report = scaling.scaling_limit_check(law, N, SCALING_GRID)
        report["derivative_deviation"] = scaling.scaling_derivative_check(law, N, SCALING_GRID[0])
        report["expansion_certificate"] = zeros.certify_expansion(law, N, 1)
        reports.append(report)
    store.record("scaling-report", write_json(store.output_path("scaling_report.json"), {"reports": reports}))


def cmd_griffiths(config: RunConfig, settings: Settings, store) -> None:
    from app.pinning import griffiths
    from app.utils.artifacts import write_json

    consts = griffiths.griffiths_constants(config.p, 0.5)
    run = griffiths.build_griffiths_run(config.p, config.n0, config.n_max or 300, settings.policy(), store)
    rows = griffiths.griffiths_sweep(run, consts, range(config.k_min, config.k_max + 1))
    manifest = griffiths.griffiths_manifest(run, consts, rows)
    store.record("griffiths-manifest", write_json(store.output_path("griffiths_manifest.json"), manifest))
    print(f"band fraction: {manifest['band_fraction']:.3f}")


def cmd_verify(config: RunConfig, settings: Settings, store) -> None:
    from app.chains.acceptance_chain import AcceptanceWorkflow

    workflow = AcceptanceWorkflow(settings, config.profile, store)
    state = workflow.run()
    for result in workflow.handler.get_results():
        print(result.summary_line())
    summary = state["metadata"]["summary"]
    if not summary["all_passed"]:
        raise AcceptanceError(f"failed criteria: {summary['failed']}")


COMMANDS = {
    "zeros": cmd_zeros,
    "curve": cmd_curve,
    "classify": cmd_classify,
    "density": cmd_density,
    "f0zeros": cmd_f0zeros,
    "scaling": cmd_scaling,
    "griffiths": cmd_griffiths,
    "verify": cmd_verify,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = load_settings(base_bits=args.base_bits, per_degree_bits=args.per_degree_bits,
                                 output_dir=args.output_dir, log_level=args.log_level)
    except ConfigError as e:
        print(f"ERROR: {e}", file=sys.stderr)
        return e.exit_code
    logging.basicConfig(level=getattr(logging, settings.log_level), format=LOG_FORMAT)

    from app.utils.artifacts import ArtifactStore

    try:
        config = run_config_from_args(args, settings)
        os.makedirs(settings.output_dir, exist_ok=True)
        store = ArtifactStore(settings.cache_dir, settings.output_dir)
        COMMANDS[args.command](config, settings, store)
        logger.info(f"{args.command}: {store.get_summary()}")
        return 0
    except KeyboardInterrupt:
        logger.info("Interrupted")
        return 1
    except Exception as e:
        logger.error(f"{args.command} failed: {e}")
        return exit_code_for(e)


if __name__ == "__main__":
    sys.exit(main())
