"""Command-line interface: ``python -m expproof <command>``.

Exit status is 0 on success or acceptance, 1 when a certificate is
rejected, 2 on usage, I/O or schema errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import fields
from pathlib import Path

import numpy as np

from .config import LimeConfig, load_config
from .fidelity import DATASET_SHAPES, eval_fidelity, load_csv, make_dataset, results_csv, results_table, save_csv, timing_report
from .model import load_model, save_model, synthesize_model
from .numeric import FieldElement, quantize_array, vector_from_json
from .protocol import (
    ProverError,
    derive_challenge,
    load_bundle,
    load_certificate,
    load_prover_state,
    prove,
    random_challenge,
    save_bundle,
    save_certificate,
    save_prover_state,
    setup,
    verify,
)
from .relation import CheckReport


class CliError(Exception):
    pass


def _bool(s: str) -> bool:
    low = s.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {s!r}")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("configuration (overrides --config)")
    g.add_argument("--config", type=Path, help="JSON config file")
    types = {"bool": _bool, "int": int, "float": float, "str": str, "float | None": float}
    for f in fields(LimeConfig):
        g.add_argument(f"--{f.name}", type=types[str(f.type)], default=None, metavar=f.name.upper())


def _config(args, scale: int | None = None) -> LimeConfig:
    cfg = load_config(args.config) if args.config else LimeConfig()
    overrides = {f.name: getattr(args, f.name) for f in fields(LimeConfig) if getattr(args, f.name) is not None}
    if scale is not None and "scale" not in overrides and not args.config:
        overrides["scale"] = scale
    return cfg.with_(**overrides) if overrides else cfg


def _parse_input(spec: str, scale: int) -> np.ndarray:
    """Comma-separated reals, or a JSON file holding a list of reals or a raw vector."""
    path = Path(spec)
    if path.suffix == ".json" or path.exists():
        try:
            obj = json.loads(path.read_text())
        except OSError as exc:
            raise CliError(f"{path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise CliError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
        if isinstance(obj, dict):
            return vector_from_json(obj, scale)
        return quantize_array(np.array(obj, dtype=float), scale)
    try:
        return quantize_array(np.array([float(t) for t in spec.split(",")]), scale)
    except ValueError:
        raise CliError(f"cannot parse input vector {spec!r}") from None


def _parse_challenge(s: str) -> FieldElement:
    try:
        return FieldElement.from_hex(s)
    except ValueError:
        raise CliError(f"r_v must be a hex field element, got {s!r}") from None


def _print_report(report: CheckReport) -> None:
    print(json.dumps(report.to_dict(), indent=1))


def cmd_setup(args) -> int:
    model = load_model(args.model)
    cfg = _config(args, scale=model.scale)
    entropy = bytes.fromhex(args.entropy) if args.entropy else None
    state, bundle = setup(model, cfg, entropy)
    save_prover_state(state, args.state)
    save_bundle(bundle, args.bundle)
    print(f"bundle written to {args.bundle}; prover secrets in {args.state}")
    return 0


def cmd_prove(args) -> int:
    state = load_prover_state(args.state)
    x = _parse_input(args.input, state.cfg.scale)
    r_v = _parse_challenge(args.r_v) if args.r_v else derive_challenge(state.bundle, x)
    timings: dict = {}
    try:
        o, e, cert = prove(state, x, r_v, timings=timings)
    except ProverError as exc:
        print(f"prover error: {exc}", file=sys.stderr)
        return 1
    save_certificate(cert, args.out)
    print(json.dumps({"o": o, "e": e.to_json(), "r_v": r_v.hex(), "seconds": round(timings["total"], 4)}))
    return 0


def cmd_verify(args) -> int:
    bundle = load_bundle(args.bundle)
    cert = load_certificate(args.cert)
    x = _parse_input(args.input, bundle.cfg.scale) if args.input else cert.stmt.x
    if args.r_v:
        r_v = _parse_challenge(args.r_v)
    elif args.derive_challenge:
        r_v = derive_challenge(bundle, x)
    else:
        raise CliError("verify needs --r_v (the challenge you issued) or --derive_challenge")
    o = cert.stmt.o if args.o is None else args.o
    report = verify(bundle, x, r_v, o, cert.stmt.e, cert)
    _print_report(report)
    return 0 if report.accepted else 1


def _inputs_from(ds, count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(ds.X), size=min(count, len(ds.X)), replace=False)
    return ds.X[np.sort(idx)]


def cmd_eval_fidelity(args) -> int:
    model = load_model(args.model)
    cfg = _config(args, scale=model.scale)
    ds = load_csv(args.data, scale=cfg.scale) if args.data else make_dataset(args.dataset, seed=args.seed, scale=cfg.scale)
    if ds.d != model.input_dim:
        raise CliError(f"dataset has {ds.d} features, model expects {model.input_dim}")
    inputs = _inputs_from(ds, args.inputs, args.seed)
    results = eval_fidelity(model, inputs, base=cfg, eval_n=args.eval_n, width=args.width, seed=args.seed)
    text = results_csv(results)
    if args.out:
        Path(args.out).write_text(text)
    print(results_table(results))
    return 0


def cmd_gen_model(args) -> int:
    if args.kind == "mlp":
        spec = {"kind": "mlp", "sizes": [int(t) for t in args.sizes.split(",")]}
    else:
        spec = {"kind": "forest", "n_features": args.n_features, "n_trees": args.n_trees, "max_depth": args.max_depth}
    save_model(synthesize_model(spec, args.seed, args.scale), args.out)
    print(f"model written to {args.out}")
    return 0


def cmd_gen_data(args) -> int:
    ds = make_dataset(args.name, rows=args.rows, seed=args.seed, scale=args.scale)
    save_csv(ds, args.out)
    print(f"{args.rows} rows x {ds.d} features written to {args.out}")
    return 0


def cmd_timing(args) -> int:
    model = load_model(args.model)
    cfg = _config(args, scale=model.scale)
    state, bundle = setup(model, cfg, b"timing")
    rng = np.random.default_rng(args.seed)
    runs = []
    for _ in range(args.runs):
        x = quantize_array(rng.normal(size=model.input_dim), cfg.scale)
        r_v = random_challenge()
        t: dict = {}
        o, e, cert = prove(state, x, r_v, timings=t)
        t0 = time.perf_counter()
        report = verify(bundle, x, r_v, o, e, cert)
        t["verify"] = time.perf_counter() - t0
        if not report.accepted:
            raise CliError("an honest certificate was rejected:\n" + report.summary())
        runs.append(t)
    text = timing_report(runs)
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="expproof", description="Verifiable LIME explanations.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("setup", help="commit to a model and publish the bundle")
    s.add_argument("--model", type=Path, required=True)
    s.add_argument("--bundle", type=Path, default=Path("bundle.json"))
    s.add_argument("--state", type=Path, default=Path("prover_state.json"))
    s.add_argument("--entropy", help="hex seed for a reproducible setup (default: OS randomness)")
    _add_config_flags(s)
    s.set_defaults(func=cmd_setup)

    s = sub.add_parser("prove", help="answer one query with a certificate")
    s.add_argument("--state", type=Path, default=Path("prover_state.json"))
    s.add_argument("--input", required=True, help="comma-separated reals or a JSON file")
    s.add_argument("--r_v", help="verifier challenge (hex); omitted = derived from the query")
    s.add_argument("--out", type=Path, default=Path("cert.json"))
    s.set_defaults(func=cmd_prove)

    s = sub.add_parser("verify", help="check a certificate against the bundle")
    s.add_argument("--bundle", type=Path, default=Path("bundle.json"))
    s.add_argument("--cert", type=Path, default=Path("cert.json"))
    s.add_argument("--input", help="the query you sent (default: taken from the certificate)")
    s.add_argument("--r_v", help="the challenge you issued (hex)")
    s.add_argument("--derive_challenge", action="store_true", help="non-interactive mode (weaker)")
    s.add_argument("--o", type=int, help="label you were given (default: the certificate's)")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("eval-fidelity", help="prediction similarity of each LIME variant")
    s.add_argument("--model", type=Path, required=True)
    s.add_argument("--data", type=Path, help="CSV with a trailing label column")
    s.add_argument("--dataset", choices=sorted(DATASET_SHAPES), default="adult",
                   help="synthetic dataset when --data is not given")
    s.add_argument("--inputs", type=int, default=50)
    s.add_argument("--eval_n", type=int, default=1000)
    s.add_argument("--width", type=float, default=0.2)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", type=Path, default=Path("results.csv"))
    _add_config_flags(s)
    s.set_defaults(func=cmd_eval_fidelity)

    s = sub.add_parser("gen-model", help="write a random model")
    s.add_argument("--kind", choices=("mlp", "forest"), default="mlp")
    s.add_argument("--sizes", default="14,16,16,2", help="mlp layer sizes")
    s.add_argument("--n_features", type=int, default=14)
    s.add_argument("--n_trees", type=int, default=5)
    s.add_argument("--max_depth", type=int, default=4)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--scale", type=int, default=10_000)
    s.add_argument("--out", type=Path, default=Path("model.json"))
    s.set_defaults(func=cmd_gen_model)

    s = sub.add_parser("gen-data", help="write a synthetic tabular dataset")
    s.add_argument("--name", choices=sorted(DATASET_SHAPES), default="adult")
    s.add_argument("--rows", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--scale", type=int, default=10_000)
    s.add_argument("--out", type=Path, default=Path("data.csv"))
    s.set_defaults(func=cmd_gen_data)

    s = sub.add_parser("timing", help="per-phase prove/verify timings as CSV")
    s.add_argument("--model", type=Path, required=True)
    s.add_argument("--runs", type=int, default=5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", type=Path)
    _add_config_flags(s)
    s.set_defaults(func=cmd_timing)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
