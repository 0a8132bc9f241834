"""divlab command line: figure and table sweeps as CSV, and one-off bound queries."""
from __future__ import annotations
import argparse
import logging
import math
import os
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError

from divlab import __app_name__
from divlab.core.exceptions import DivlabError, ParameterError
from divlab.core.generators import CATALOG_KINDS
from divlab.core.models import RunConfig, SourceModel
from divlab.io.exporters import export_csv, write_csv
from divlab.io.loaders import load_joint, load_pmf
from divlab.services.audit import write_audit
from divlab.services.divergence import conditional_entropy, named_divergence, renyi_divergence
from divlab.services.f_alpha import d_falpha
from divlab.services.figures import FIGURE_IDS, figure_frame, table1
from divlab.services.list_decoding import (
    FANO_VARIANTS, ahlswede_korner_bounds, error_probability, example2_decoder, example2_joint,
    fano_lower_bound, s_norm_bound, top_l_decoder, variable_list_bound,
)
from divlab.services.tunstall import build_tree, compression_rate, degroot_closeness, random_tree, tree_frame
from divlab.version import __version__

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_WRITE = 1
EXIT_INPUT = 2

EVAL_ALIASES = {"chi2": "chi2_pearson", "tv": "total_variation", "hellinger": "hellinger2"}
EVAL_KINDS = tuple(CATALOG_KINDS) + ("renyi", "f_alpha") + tuple(EVAL_ALIASES)
EXAMPLE2_GAMMA = 1.25

Result = Tuple[Optional[pd.DataFrame], dict]


def parse_grid(text: str) -> Tuple[float, ...]:
    """'a:b:steps' -> steps evenly spaced points from a to b inclusive."""
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"grid {text!r} must look like a:b:steps")
    try:
        a, b, steps = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid {text!r} must look like a:b:steps") from None
    if steps < 1:
        raise argparse.ArgumentTypeError(f"grid {text!r}: steps must be at least 1")
    if steps == 1:
        return (a,)
    if not b > a:
        raise argparse.ArgumentTypeError(f"grid {text!r}: need a < b")
    return tuple(float(x) for x in np.linspace(a, b, steps))


# ---------------------------------------------------------------- commands

def _cmd_figure(args, cfg: RunConfig) -> Result:
    return figure_frame(args.id, grid=cfg.grid, workers=cfg.workers)


def _cmd_table1(args, cfg: RunConfig) -> Result:
    return table1()


def _eval_value(kind: str, P, Q, param: Optional[float]) -> float:
    kind = EVAL_ALIASES.get(kind, kind)
    if kind == "renyi":
        if param is None:
            raise ParameterError("renyi needs --param (the order)")
        return float(renyi_divergence(param, P, Q))
    if kind == "f_alpha":
        if param is None:
            raise ParameterError("f_alpha needs --param (alpha)")
        return float(d_falpha(param, P, Q))
    return float(named_divergence(kind, P, Q, param))


def _cmd_eval(args, cfg: RunConfig) -> Result:
    P = load_pmf(args.p, label="P")
    Q = load_pmf(args.q, label="Q")
    value = _eval_value(args.kind, P, Q, args.param) * cfg.log_scale
    print("inf" if math.isinf(value) else f"{value:.12g}")
    return None, {"value": value, "kind": args.kind, "param": args.param}


def _cmd_tree(args, cfg: RunConfig) -> Result:
    source = SourceModel(pmf=load_pmf(args.source, label="source"))
    if args.random:
        if args.leaves is None:
            raise ParameterError("--random needs --leaves")
        tree = random_tree(source, args.leaves, np.random.default_rng(cfg.seed))
    else:
        tree = build_tree(source, args.leaves, codeword_len=args.codeword_len, code_alphabet=args.code_alphabet)
    df = tree_frame(tree)
    summary = {
        "leaves": tree.n,
        "expected_length": tree.expected_length(),
        "random": bool(args.random),
        "degroot_half": degroot_closeness(tree, 0.5),
    }
    provenance = [
        f"{'random' if args.random else 'Tunstall'} parse tree, {tree.n} leaves, source masses {list(source.pmf.masses)}",
        f"expected parse length {summary['expected_length']:.12g}",
    ]
    if args.code_alphabet is not None:
        summary["compression_rate"] = compression_rate(tree, args.code_alphabet) * cfg.log_scale
        provenance.append(f"compression rate {summary['compression_rate']:.12g} per source symbol")
    summary["provenance"] = provenance
    return df, summary


def _cmd_listdecode(args, cfg: RunConfig) -> Result:
    joint = load_joint(args.joint, label="joint")
    L = args.list_size
    rows = [
        ("exact", error_probability(joint, top_l_decoder(joint, L)).p_error),
        *((f"fano_{v}", fano_lower_bound(joint, L, v)) for v in FANO_VARIANTS if v != "renyi"),
        ("s_norm_2", s_norm_bound(joint, L, 2.0)),
    ]
    if args.alpha is not None:
        rows.append((f"fano_renyi_{args.alpha:g}", fano_lower_bound(joint, L, "renyi", alpha=args.alpha)))
    df = pd.DataFrame(rows, columns=["quantity", "value"])
    h = conditional_entropy(joint) * cfg.log_scale
    unit = "nats" if cfg.log_base == "e" else "bits"
    summary = {
        "list_size": L,
        "conditional_entropy": h,
        "provenance": [
            f"top-{L} list decoding of a {joint.M} x {joint.K} joint",
            f"H(X|Y) = {h:.12g} {unit}",
        ],
    }
    return df, summary


def _cmd_example2(args, cfg: RunConfig) -> Result:
    joint, decoder = example2_joint(), example2_decoder()
    ak = ahlswede_korner_bounds(joint, decoder)
    vb = variable_list_bound(joint, decoder, gamma=EXAMPLE2_GAMMA)
    exact = error_probability(joint, decoder).p_error
    df = pd.DataFrame(
        [
            ("conditional_entropy_bits", ak.conditional_entropy / math.log(2.0)),
            ("exact", exact),
            ("ahlswede_korner_general", ak.implied_PL_lower),
            ("ahlswede_korner_max_list", ak.implied_PL_lower_maxN),
            (f"e_gamma_bound_{EXAMPLE2_GAMMA:g}", vb.bound),
            ("equality_diagnosis", float(vb.equality_diagnosis)),
        ],
        columns=["quantity", "value"],
    )
    summary = {
        "exact": exact,
        "variable_list_bound": vb.bound,
        "equality_diagnosis": vb.equality_diagnosis,
        "provenance": [
            "5 x 2 joint, P(x, 0) = (1/8, 1/8, 1/8, 1/16, 1/16), P(x, 1) = (1/24, 1/24, 1/24, 3/16, 3/16)",
            "lists {0, 1, 2} for y = 0 and {3, 4} for y = 1",
        ],
    }
    return df, summary


COMMANDS: Dict[str, Callable[..., Result]] = {
    "figure": _cmd_figure,
    "table1": _cmd_table1,
    "eval": _cmd_eval,
    "tree": _cmd_tree,
    "listdecode": _cmd_listdecode,
    "example2": _cmd_example2,
}


# ---------------------------------------------------------------- parser

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--base", choices=["e", "2"], default=os.getenv("DIVLAB_BASE", "e"),
                   help="Logarithm base for reported information values (env DIVLAB_BASE).")
    p.add_argument("--out", default=None, help="Output CSV path; defaults to $DIVLAB_OUT_DIR/<name>.csv or stdout.")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=os.getenv("DIVLAB_WORKERS", "1"),
                   help="Threads for sweep points (env DIVLAB_WORKERS).")
    p.add_argument("--log-level", default=os.getenv("DIVLAB_LOG_LEVEL", "WARNING"))
    p.add_argument("--audit", default=None, help="Write a JSON audit record to this path.")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog=__app_name__, description="Finite-alphabet f-divergence bounds and tables.")
    ap.add_argument("--version", action="version", version=f"{__app_name__} {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("figure", help="Sweep behind one figure as CSV.")
    p.add_argument("id", type=int, choices=FIGURE_IDS)
    p.add_argument("--grid", type=parse_grid, default=None, help="Sweep axis a:b:steps.")
    _common(p)

    p = sub.add_parser("table1", help="List-decoding error bounds on the built-in 9 x 2 joint.")
    _common(p)

    p = sub.add_parser("eval", help="Evaluate one divergence between two pmf files.")
    p.add_argument("kind", choices=EVAL_KINDS)
    p.add_argument("p", help='JSON file with {"masses": [...]}')
    p.add_argument("q", help='JSON file with {"masses": [...]}')
    p.add_argument("--param", type=float, default=None, help="alpha, gamma, omega or Renyi order.")
    _common(p)

    p = sub.add_parser("tree", help="Tunstall parse tree of a memoryless source.")
    p.add_argument("--source", required=True)
    p.add_argument("--leaves", type=int, default=None)
    p.add_argument("--codeword-len", type=int, default=None)
    p.add_argument("--code-alphabet", type=int, default=None)
    p.add_argument("--random", action="store_true", help="Split uniformly chosen leaves (uses --seed).")
    _common(p)

    p = sub.add_parser("listdecode", help="Exact top-L error and fixed-list lower bounds for a joint.")
    p.add_argument("--joint", required=True)
    p.add_argument("--list-size", type=int, required=True)
    p.add_argument("--alpha", type=float, default=None, help="Also report the Arimoto-Renyi bound of this order.")
    _common(p)

    p = sub.add_parser("example2", help="Variable-size list bounds on the built-in 5 x 2 joint.")
    _common(p)
    return ap


def _default_name(args) -> str:
    return f"figure{args.id}.csv" if args.command == "figure" else f"{args.command}.csv"


def _output_path(args, cfg: RunConfig) -> Optional[Path]:
    if cfg.out:
        return Path(cfg.out)
    out_dir = os.getenv("DIVLAB_OUT_DIR")
    if out_dir:
        return Path(out_dir) / _default_name(args)
    return None


def _input_paths(args) -> List[str]:
    keys = ("p", "q", "source", "joint")
    return [str(getattr(args, k)) for k in keys if getattr(args, k, None)]


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = RunConfig(
            command=args.command,
            inputs=tuple(_input_paths(args)),
            out=args.out,
            log_base=args.base,
            grid=getattr(args, "grid", None),
            seed=args.seed,
            workers=args.workers,
            audit=args.audit,
        )
        df, summary = COMMANDS[args.command](args, cfg)
    except (DivlabError, ValidationError) as exc:
        print(f"{__app_name__}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    out = None
    try:
        if df is not None:
            out = _output_path(args, cfg)
            provenance = summary.get("provenance", [])
            if out is None:
                write_csv(df, sys.stdout, provenance)
            else:
                export_csv(df, out, provenance)
                logger.info("wrote %d rows to %s", len(df), out)
        if cfg.audit:
            write_audit(
                cfg.audit,
                inputs={
                    "command": cfg.command,
                    "input_paths": [os.path.abspath(p) for p in cfg.inputs],
                    "log_base": cfg.log_base,
                    "seed": cfg.seed,
                    "workers": cfg.workers,
                    "grid": cfg.grid,
                },
                results={
                    "summary": {**summary, "rows": None if df is None else int(len(df))},
                    "output_path": str(out) if out else None,
                },
            )
    except OSError as exc:
        print(f"{__app_name__}: cannot write output: {exc}", file=sys.stderr)
        return EXIT_WRITE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
