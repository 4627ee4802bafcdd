"""Command-line surface: generation, estimation, recalibration, analysis.

Exit codes: 0 success, 2 usage or flag validation, 3 I/O failure,
4 numerical precondition violated at run time.  ``--config`` points at
a ``key=value`` file whose entries act as subcommand defaults; explicit
flags override them.  ``--threads`` caps worker parallelism (fallback:
the ``MFCAL_THREADS`` environment variable, then the CPU count);
results are byte-identical for every worker count.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import io as fio
from .analysis import excitation_covariance, excitation_report
from .attention import (
    fca_forward,
    fca_gates,
    gap,
    init_mono_params,
    init_multi_params,
    lowest_frequency_pairs,
    multi_forward,
    scse_forward,
    se_forward,
    srm_forward,
    srm_gates,
)
from .cascade import (
    MAX_DEPTH_1D,
    MAX_DEPTH_2D,
    CascadeSpec,
    analytic_spectrum,
    generate_binomial,
    generate_product_2d,
)
from .holder import (
    DEFAULT_EPSILON,
    NormState,
    ScaleSet,
    holder_map,
    interior_view,
    mean_alpha,
)
from .selftest import run_acceptance
from .spectrum import clt_spectrum, histogram_spectrum, moments_spectrum

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

_COMMANDS = ("cascade", "holder", "spectrum", "recalibrate", "excite", "selftest", "bench")


class UsageError(ValueError):
    """Flag combination that fails a module precondition."""


def _positive_open_unit(value: float, name: str) -> float:
    if not (0.0 < value < 1.0):
        raise UsageError(f"{name} must lie strictly in (0, 1)")
    return value


def _parse_scales(text: str) -> ScaleSet:
    try:
        sides = tuple(int(tok) for tok in text.split(",") if tok)
        return ScaleSet(sides)
    except ValueError as exc:
        raise UsageError(f"bad --scales {text!r}: {exc}") from None


def _resolve_threads(args) -> int:
    if args.threads is not None:
        value = args.threads
    else:
        env = os.environ.get("MFCAL_THREADS")
        if env:
            try:
                value = int(env)
            except ValueError:
                raise UsageError(f"MFCAL_THREADS must be an integer, got {env!r}") from None
        else:
            value = os.cpu_count() or 1
    if value < 1:
        raise UsageError("--threads must be >= 1")
    return value


def _read_input_field(path: str) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:4] == fio.MAGIC:
        return np.asarray(fio.read_field(data), dtype=np.float64)
    if data[:2] == b"P5":
        return fio.read_pgm(data)
    raise fio.ContainerMagicError(f"{path}: neither a field container nor a binary PGM")


def _as_stack(field: np.ndarray) -> np.ndarray:
    return field[:, :, None] if field.ndim == 2 else field


def _write_text(path: str, text: str) -> None:
    Path(path).write_text(text)


def _write_container(path: str, field: np.ndarray) -> None:
    arr = np.asarray(field, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    Path(path).write_bytes(fio.write_field(arr))


# ---------------------------------------------------------------------------
# subcommands


def _cmd_cascade(args) -> int:
    p = _positive_open_unit(args.p, "--p")
    limit = MAX_DEPTH_1D if args.dims == 1 else MAX_DEPTH_2D
    if not (1 <= args.depth <= limit):
        raise UsageError(f"--depth must lie in [1, {limit}] for {args.dims}-D")
    if args.points < 3:
        raise UsageError("--points must be >= 3")
    spec = CascadeSpec.binomial(p, args.depth, dims=args.dims)
    field = generate_binomial(spec) if args.dims == 1 else generate_product_2d(spec)
    _write_container(args.out, field)
    if args.spectrum:
        curve = analytic_spectrum(p, args.points, dims=args.dims)
        _write_text(args.spectrum, fio.write_spectrum_csv(curve))
    return EXIT_OK


def _cmd_holder(args) -> int:
    scales = _parse_scales(args.scales)
    if args.epsilon < 0.0:
        raise UsageError("--epsilon must be >= 0")
    field = _as_stack(_read_input_field(args.input))
    alpha = holder_map(field, scales, args.epsilon, threads=_resolve_threads(args))
    _write_container(args.out, alpha)
    if args.means:
        record = {
            "mean_alpha": [float(v) for v in mean_alpha(alpha)],
            "interior_mean_alpha": [
                float(v) for v in mean_alpha(interior_view(alpha, scales))
            ],
        }
        _write_text(args.means, json.dumps(record) + "\n")
    return EXIT_OK


def _cascade_fields(p: float, dims: int, depth_min: int, depth_max: int):
    limit = MAX_DEPTH_1D if dims == 1 else MAX_DEPTH_2D
    if not (1 <= depth_min < depth_max <= limit):
        raise UsageError(f"depth range must satisfy 1 <= min < max <= {limit}")
    make = generate_binomial if dims == 1 else generate_product_2d
    return [
        make(CascadeSpec.binomial(p, k, dims=dims))
        for k in range(depth_min, depth_max + 1)
    ]


def _cmd_spectrum(args) -> int:
    p = _positive_open_unit(args.p, "--p")
    if args.method == "histogram":
        if args.bins < 4:
            raise UsageError("--bins must be >= 4")
        fields = _cascade_fields(p, args.dims, args.depth_min, args.depth_max)
        curve = histogram_spectrum(fields, bins=args.bins)
        _write_text(args.out, fio.write_spectrum_csv(curve))
    elif args.method == "moments":
        if args.q_step <= 0.0 or args.q_step > 0.5:
            raise UsageError("--q-step must lie in (0, 0.5]")
        if args.q_min >= args.q_max:
            raise UsageError("--q-min must be below --q-max")
        fields = _cascade_fields(p, args.dims, args.depth_min, args.depth_max)
        q = np.round(np.arange(args.q_min, args.q_max + 1e-9, args.q_step), 10)
        partition, _ = moments_spectrum(fields, q)
        _write_text(args.out, fio.write_moments_csv(partition))
    elif args.method == "clt":
        scales = _parse_scales(args.scales)
        limit = MAX_DEPTH_1D if args.dims == 1 else MAX_DEPTH_2D
        if not (1 <= args.depth <= limit):
            raise UsageError(f"--depth must lie in [1, {limit}] for {args.dims}-D")
        spec = CascadeSpec.binomial(p, args.depth, dims=args.dims)
        field = generate_binomial(spec) if args.dims == 1 else generate_product_2d(spec)
        alpha = holder_map(
            _as_stack(np.atleast_2d(field)), scales, epsilon=0.0,
            threads=_resolve_threads(args),
        )
        samples = interior_view(alpha, scales) if args.dims == 2 else alpha
        curve = clt_spectrum(samples, args.depth, support_dim=float(args.dims))
        _write_text(args.out, fio.write_spectrum_csv(curve))
    else:  # pragma: no cover - argparse restricts choices
        raise UsageError(f"unknown method {args.method!r}")
    return EXIT_OK


def _cmd_recalibrate(args) -> int:
    if args.reduction < 1:
        raise UsageError("--reduction must be >= 1")
    if args.q < 1:
        raise UsageError("--Q must be >= 1")
    if args.epsilon < 0.0:
        raise UsageError("--epsilon must be >= 0")
    scales = _parse_scales(args.scales)
    stack = _as_stack(_read_input_field(args.input))
    channels = stack.shape[2]
    if args.method in ("cse", "scse", "fca", "mono") and args.reduction >= max(channels, 2):
        raise UsageError(f"--reduction must be below the channel count ({channels})")
    rng = np.random.default_rng(args.seed)
    use_bias = not args.strict_paper_mode
    gates_record: dict = {"method": args.method}

    def mono_params(norm_mode="frozen"):
        return init_mono_params(
            channels, args.reduction, rng=rng, norm_mode=norm_mode, use_bias=use_bias
        )

    if args.method == "cse":
        gates, out = se_forward(stack, mono_params(), source="features")
        gates_record["gates"] = [float(g) for g in gates]
    elif args.method == "mono":
        gates, out = se_forward(
            stack, mono_params(), source="alpha-map", scales=scales,
            epsilon=args.epsilon,
        )
        gates_record["gates"] = [float(g) for g in gates]
    elif args.method == "scse":
        params = mono_params()
        spatial = rng.normal(scale=1.0 / np.sqrt(channels), size=channels)
        out = scse_forward(stack, params, spatial)
        gates, _ = se_forward(stack, params, source="features")
        gates_record["gates"] = [float(g) for g in gates]
    elif args.method == "srm":
        w_mean = rng.normal(size=channels)
        w_std = rng.normal(size=channels)
        norm = NormState.identity(channels, mode="frozen")
        out = srm_forward(stack, w_mean, w_std, norm)
        gates = srm_gates(stack, w_mean, w_std, norm)
        gates_record["gates"] = [float(g) for g in gates]
    elif args.method == "fca":
        groups = args.groups if args.groups else min(16, channels)
        pairs = lowest_frequency_pairs(groups, stack.shape[0], stack.shape[1])
        params = mono_params()
        out = fca_forward(stack, params, freq_pairs=pairs)
        gates = fca_gates(stack, params, freq_pairs=pairs)
        gates_record["gates"] = [float(g) for g in gates]
    elif args.method == "multi":
        alpha = holder_map(stack, scales, args.epsilon, threads=_resolve_threads(args))
        params = init_multi_params(args.q, float(alpha.min()), float(alpha.max()))
        gate, out = multi_forward(stack, alpha, params)
        gates_record.update(
            gate_min=float(gate.min()),
            gate_max=float(gate.max()),
            gate_mean=float(gate.mean()),
        )
    else:  # pragma: no cover - argparse restricts choices
        raise UsageError(f"unknown method {args.method!r}")

    _write_container(args.out, out)
    if args.gates:
        _write_text(args.gates, json.dumps(gates_record) + "\n")
    return EXIT_OK


def _cmd_excite(args) -> int:
    if not (0.0 < args.delta <= 1.0):
        raise UsageError("--delta must lie in (0, 1]")
    matrix = np.asarray(fio.read_field(Path(args.input).read_bytes()), dtype=np.float64)
    if matrix.ndim != 2:
        raise UsageError("--input must hold a 2-D instances-by-channels matrix")
    center = not args.strict_paper_mode if args.center is None else args.center
    covariance = excitation_covariance(matrix, center=center)
    record = excitation_report(covariance, args.delta)
    _write_text(args.out, fio.excite_record_json(record))
    return EXIT_OK


def _cmd_selftest(args) -> int:
    results = run_acceptance(
        strict=args.strict_paper_mode,
        artifacts_dir=args.artifacts,
        threads=_resolve_threads(args),
    )
    if args.json:
        payload = {
            "mode": results[0].mode if results else "default",
            "results": [
                {
                    "number": r.number,
                    "name": r.name,
                    "passed": r.passed,
                    "seconds": round(r.seconds, 4),
                    "detail": r.detail,
                }
                for r in results
            ],
        }
        print(json.dumps(payload, indent=2))
    else:
        for r in results:
            print(r.line())
    return EXIT_OK if all(r.passed for r in results) else 1


def _cmd_bench(args) -> int:
    if args.repetitions < 1:
        raise UsageError("--repetitions must be >= 1")
    if args.repetitions < 5:
        print("warning: fewer than 5 repetitions gives unstable quartiles",
              file=sys.stderr)
    channel_widths = [int(tok) for tok in args.channels.split(",") if tok]
    if not channel_widths or any(c < 1 for c in channel_widths):
        raise UsageError("--channels must list positive integers")
    if args.size < 1:
        raise UsageError("--size must be >= 1")
    scales = _parse_scales(args.scales)
    threads = _resolve_threads(args)
    rng = np.random.default_rng(args.seed)

    rows = []
    print(f"{'channels':>8} {'median_ms':>12} {'iqr_ms':>10}   "
          f"(n={args.repetitions}, {args.size}x{args.size}, threads={threads})")
    for width in channel_widths:
        field = rng.uniform(0.1, 1.0, (args.size, args.size, width))
        samples = []
        for _ in range(args.repetitions):
            start = time.perf_counter()
            holder_map(field, scales, DEFAULT_EPSILON, threads=threads)
            samples.append((time.perf_counter() - start) * 1e3)
        q25, q50, q75 = np.percentile(samples, [25, 50, 75])
        rows.append({"channels": width, "median_ms": q50, "iqr_ms": q75 - q25})
        print(f"{width:>8} {q50:>12.2f} {q75 - q25:>10.2f}")
    medians = [row["median_ms"] for row in rows]
    if sorted(medians) != medians:
        print("note: medians are not monotone in channel count", file=sys.stderr)
    if args.out:
        _write_text(args.out, json.dumps(rows) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser plumbing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mfcal",
        description="Cascade generation, exponent maps, spectra, recalibration.",
    )
    parser.add_argument("--version", action="version", version=f"mfcal {__version__}")
    parser.add_argument("--config", help="key=value defaults file")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker cap (default: MFCAL_THREADS or CPU count)")
    parser.add_argument("--strict-paper-mode", action="store_true",
                        help="disable MLP biases and covariance centering")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cascade", help="generate a cascade measure")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--dims", type=int, choices=(1, 2), default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--spectrum", help="also write the exact spectrum CSV here")
    p.add_argument("--points", type=int, default=101)
    p.set_defaults(func=_cmd_cascade)

    p = sub.add_parser("holder", help="local exponent map of a field")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scales", default="2,3,4")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--means", help="write per-channel mean JSON here")
    p.set_defaults(func=_cmd_holder)

    p = sub.add_parser("spectrum", help="estimate a spectrum from cascades")
    p.add_argument("--method", choices=("histogram", "moments", "clt"), required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--dims", type=int, choices=(1, 2), default=1)
    p.add_argument("--depth-min", type=int, default=8)
    p.add_argument("--depth-max", type=int, default=12)
    p.add_argument("--depth", type=int, default=10, help="single depth (clt)")
    p.add_argument("--bins", type=int, default=32)
    p.add_argument("--q-min", type=float, default=-5.0)
    p.add_argument("--q-max", type=float, default=5.0)
    p.add_argument("--q-step", type=float, default=0.25)
    p.add_argument("--scales", default="2,3,4")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_spectrum)

    p = sub.add_parser("recalibrate", help="apply a recalibration function")
    p.add_argument("--method", required=True,
                   choices=("cse", "scse", "srm", "fca", "mono", "multi"))
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--gates", help="write the gate record JSON here")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--Q", dest="q", type=int, default=16)
    p.add_argument("--reduction", type=int, default=2)
    p.add_argument("--groups", type=int, default=0,
                   help="cosine frequency groups (default: min(16, channels))")
    p.add_argument("--scales", default="2,3,4")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.set_defaults(func=_cmd_recalibrate)

    p = sub.add_parser("excite", help="excitation covariance SVD threshold")
    p.add_argument("--input", required=True,
                   help="container holding an instances-by-channels matrix")
    p.add_argument("--delta", type=float, default=0.95)
    center = p.add_mutually_exclusive_group()
    center.add_argument("--center", dest="center", action="store_true", default=None)
    center.add_argument("--no-center", dest="center", action="store_false")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_excite)

    p = sub.add_parser("selftest", help="run the acceptance criteria")
    p.add_argument("--json", action="store_true")
    p.add_argument("--artifacts", help="keep deterministic artifacts here")
    p.set_defaults(func=_cmd_selftest)

    p = sub.add_parser("bench", help="time the exponent-map kernel")
    p.add_argument("--repetitions", type=int, default=30)
    p.add_argument("--channels", default="32,64,128")
    p.add_argument("--size", type=int, default=224)
    p.add_argument("--scales", default="2,3,4")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the JSON rows here")
    p.set_defaults(func=_cmd_bench)

    return parser


def _load_config(path: str) -> list:
    """Turn key=value lines into flag tokens inserted after the subcommand."""
    tokens = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"bad config line (expected key=value): {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        tokens.append(f"--{key}={value}")
    return tokens


def _inject_config(argv: list) -> list:
    """Splice config-derived tokens right after the subcommand so explicit
    flags (which come later) win."""
    config_path = None
    i = 0
    while i < len(argv):
        token = argv[i]
        if token == "--config":
            if i + 1 >= len(argv):
                break
            config_path = argv[i + 1]
            i += 2
        elif token.startswith("--config="):
            config_path = token.split("=", 1)[1]
            i += 1
        elif token == "--threads":
            i += 2
        elif token.startswith("--"):
            i += 1
        else:
            break  # subcommand position
    if config_path is None or i >= len(argv):
        return argv
    return argv[: i + 1] + _load_config(config_path) + argv[i + 1 :]


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        argv = _inject_config(argv)
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"mfcal: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"mfcal: {exc}", file=sys.stderr)
        return EXIT_IO
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"mfcal: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, fio.ContainerError, fio.PgmError) as exc:
        print(f"mfcal: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"mfcal: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
