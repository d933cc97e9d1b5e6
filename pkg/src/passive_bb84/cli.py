"""Command-line entry point.

Exit codes: 0 success, 1 validation error, 2 invariant failure
(``verify-povm``), 3 I/O error. Results go to stdout as JSON or CSV,
diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from passive_bb84 import io as pio
from passive_bb84.channel import ChannelModel, active_expected_stats, expected_stats
from passive_bb84.keyrate import active_rate, passive_rate
from passive_bb84.model import ReceiverModel, ValidationError
from passive_bb84.montecarlo import SimConfig, simulate
from passive_bb84.splitter_povm import N_MAX_DEFAULT, verify_case
from passive_bb84.sweep import rows_to_csv, sweep

log = logging.getLogger("passive_bb84")

EXIT_OK, EXIT_VALIDATION, EXIT_INVARIANT, EXIT_IO = 0, 1, 2, 3
POVM_TOL = 1e-10
COMPLETENESS_TOL = 1e-12


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would exit 2
        raise _UsageError(message)


def _add_config(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config document (default: bundled preset)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="passive-bb84", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("rate", help="key rate from observed statistics (JSON report)")
    _add_config(p)
    p.add_argument("--stats", required=True, help="stats CSV")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--virtual", action="store_true", help="drop the multi-photon penalty")
    g.add_argument("--active", action="store_true", help="active-receiver comparator rate")

    p = sub.add_parser("expected", help="analytic honest-channel stats (CSV)")
    _add_config(p)
    p.add_argument("--length", type=float, help="fiber length in km (overrides config)")
    p.add_argument("--active", action="store_true", help="active-receiver channel model")

    p = sub.add_parser("simulate", help="Monte Carlo stats (JSON; CSV via --stats-out)")
    _add_config(p)
    p.add_argument("--rounds", type=int, required=True, help="number of rounds")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--length", type=float, help="fiber length in km (overrides config)")
    p.add_argument("--resolve", action="store_true",
                   help="per-round mode with photon-number-resolved diagnostics")
    p.add_argument("--per-round", action="store_true", help="per-round instead of aggregated")
    p.add_argument("--stats-out", help="also write the sampled stats CSV here")

    p = sub.add_parser("verify-povm", help="brute-force POVM oracle vs closed forms")
    p.add_argument("--nmax", type=int, default=N_MAX_DEFAULT, help="largest photon number")
    p.add_argument("--trials", type=int, default=100, help="random models per photon number")
    p.add_argument("--seed", type=int, default=0, help="seed for the random models")

    p = sub.add_parser("sweep", help="optimized distance sweep (CSV)")
    _add_config(p)
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.add_argument("--workers", type=int, default=1, help="parallel processes")
    return parser


def _with_length(ch: ChannelModel, length: float | None) -> ChannelModel:
    return ch if length is None else ChannelModel(length, ch.e_ch, ch.km_per_decade)


def _cmd_rate(args) -> int:
    cfg = pio.load_config(args.config)
    obs = pio.load_stats(args.stats)
    if args.active:
        report = active_rate(obs, cfg.source, cfg.c_EC, cfg.receiver.p_Z)
    else:
        report = passive_rate(obs, cfg.receiver, cfg.source, cfg.c_EC, virtual=args.virtual)
    print(pio.to_json(report.to_dict()))
    return EXIT_OK


def _cmd_expected(args) -> int:
    cfg = pio.load_config(args.config)
    ch = _with_length(cfg.channel, args.length)
    if args.active:
        obs = active_expected_stats(ch, cfg.receiver, cfg.source)
    else:
        obs = expected_stats(ch, cfg.receiver, cfg.source)
    sys.stdout.write(pio.stats_to_csv(obs))
    return EXIT_OK


def _cmd_simulate(args) -> int:
    cfg = pio.load_config(args.config)
    ch = _with_length(cfg.channel, args.length)
    per_round = args.per_round or args.resolve
    sim_cfg = SimConfig(
        n_rounds=args.rounds,
        seed=args.seed,
        resolve_photon_numbers=args.resolve,
        aggregated=not per_round,
        intensity_probs=cfg.intensity_probs,
    )
    res = simulate(sim_cfg, ch, cfg.receiver, cfg.source)
    if args.stats_out:
        Path(args.stats_out).write_text(pio.stats_to_csv(res.stats))
    doc = {
        "stats": {
            "Q_Z_given": res.stats.Q_Z_given,
            "E_X_given": res.stats.E_X_given,
            "Q_cross_given": res.stats.Q_cross_given,
            "Q_Z_total": res.stats.Q_Z_total,
            "e_Z": res.stats.e_Z,
        },
        "counts": res.counts,
        "rounds": res.rounds,
        "diagnostics": [
            {"n_A": a, "n_B": b, "event": e, "count": c}
            for (a, b, e), c in sorted(res.diagnostics.items())
        ],
        "rng_trace": res.rng_trace,
    }
    print(pio.to_json(doc))
    return EXIT_OK


def _cmd_verify(args) -> int:
    rng = np.random.default_rng(args.seed)
    failed = False
    start = time.perf_counter()
    for n_B in range(1, args.nmax + 1):
        worst = {"max_dev": 0.0, "completeness": 0.0, "min_eig": np.inf}
        for _ in range(args.trials):
            m = ReceiverModel(
                p_Z=float(rng.uniform(0.5, 0.99)),
                d=float(rng.uniform(0.0, 0.1)),
                eta_Z=1.0,
                eta_X=float(1.0 - rng.uniform(0.0, 1.0)),  # r in (0, 1]
            )
            res = verify_case(n_B, m, n_max=args.nmax)
            worst["max_dev"] = max(worst["max_dev"], res["max_dev"])
            worst["completeness"] = max(worst["completeness"], res["completeness"])
            worst["min_eig"] = min(worst["min_eig"], res["min_eig"])
        ok = (
            worst["max_dev"] <= POVM_TOL
            and worst["completeness"] <= COMPLETENESS_TOL
            and worst["min_eig"] >= -COMPLETENESS_TOL
        )
        failed |= not ok
        print(
            f"n_B={n_B} max_dev={worst['max_dev']:.3e} completeness={worst['completeness']:.3e} "
            f"min_eig={worst['min_eig']:.3e} {'PASS' if ok else 'FAIL'}"
        )
    log.info("verify-povm finished in %.2f s", time.perf_counter() - start)
    return EXIT_INVARIANT if failed else EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = pio.load_config(args.config)
    rows = sweep(cfg.sweep, workers=args.workers)
    text = rows_to_csv(rows)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {
    "rate": _cmd_rate,
    "expected": _cmd_expected,
    "simulate": _cmd_simulate,
    "verify-povm": _cmd_verify,
    "sweep": _cmd_sweep,
}


def dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"passive-bb84: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"passive-bb84: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"passive-bb84: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
