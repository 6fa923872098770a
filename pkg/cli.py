#!/usr/bin/env python3
"""
DataLair command line.

Report records go to stdout as JSON lines, errors to stderr as ErrorRecord
lines, logs to stderr. Passwords come from DLR_PUB_PW / DLR_HID_PW or a
prompt; the hidden volume is selected only by supplying a second password,
so both modes share one command line.
"""

import argparse
import getpass
import logging
import sys
import tempfile
from pathlib import Path
from typing import List, Optional, Tuple

from bench import run_bench, sweep
from config import Settings, get_settings
from crypto_env import RandomSource
from datalair import DataLairDevice, run_audit
from error_handlers import handle_exception
from exceptions import EXIT_CORRUPT, ValidationError
from logging_config import setup_logging
from models.device import Layout, PhiPolicy
from models.reports import BenchSpec, CommandRecord
from pdcpa import (
    bias_attack,
    emit_records,
    get_distinguisher,
    paired_patterns,
    run_battery,
    run_game,
    summarize,
)
from pdcpa.battery import FAST_KDF

logger = logging.getLogger("cli")

EXIT_OK = 0
EXIT_FAILED = 1


# --- helpers ---


def _passwords(settings: Settings) -> Tuple[str, Optional[str]]:
    if settings.pub_pw is not None:
        pub = settings.pub_pw.get_secret_value()
    else:
        pub = getpass.getpass("Password: ")
    if settings.hid_pw is not None:
        hid = settings.hid_pw.get_secret_value()
    elif sys.stdin.isatty():
        hid = getpass.getpass("Second password (empty for none): ")
    else:
        hid = None
    return pub, hid or None


def _rng(args: argparse.Namespace, settings: Settings) -> RandomSource:
    seed = args.seed if args.seed is not None else settings.seed
    return RandomSource(seed)


def _mount(args: argparse.Namespace, settings: Settings) -> DataLairDevice:
    pub, hid = _passwords(settings)
    return DataLairDevice.mount(
        args.device,
        pub,
        hid,
        config=settings.mode_config(),
        rng=_rng(args, settings),
    )


def _require_device(args: argparse.Namespace) -> Path:
    if not args.device:
        raise ValidationError("--device is required", field_errors={"device": "missing"})
    return Path(args.device)


def _scratch_device(
    workdir: str, args: argparse.Namespace, settings: Settings, rng: RandomSource, **config
) -> DataLairDevice:
    """Throwaway PUB_HID device for attacks and games"""
    return DataLairDevice.format(
        Path(workdir) / "scratch.img",
        args.blocks,
        rng.bytes(16).hex(),
        rng.bytes(16).hex(),
        block_size=args.block_size,
        kdf=FAST_KDF,
        config=settings.mode_config().model_copy(update=config),
        rng=rng,
    )


# --- commands ---


def cmd_init(args: argparse.Namespace, settings: Settings) -> int:
    path = _require_device(args)
    pub, hid = _passwords(settings)
    device = DataLairDevice.format(
        path,
        args.blocks or settings.default_blocks,
        pub,
        hid,
        block_size=args.block_size or settings.block_size,
        layout=Layout(args.layout),
        public_blocks=args.public_blocks,
        stash_capacity=settings.stash_capacity,
        stash_region_blocks=settings.stash_region_blocks,
        kdf=settings.kdf_params,
        config=settings.mode_config(),
        rng=_rng(args, settings),
    )
    status = device.status()
    device.unmount()
    emit_records([CommandRecord(command="init", details=status)])
    return EXIT_OK


def cmd_mount(args: argparse.Namespace, settings: Settings) -> int:
    _require_device(args)
    with _mount(args, settings) as device:
        status = device.status()
    emit_records([CommandRecord(command=args.command, details=status)])
    return EXIT_OK


def cmd_io(args: argparse.Namespace, settings: Settings) -> int:
    _require_device(args)
    with _mount(args, settings) as device:
        block_size = device.geometry.block_size
        if args.op == "read":
            if args.volume == "public":
                block = device.public_read(args.id)
            else:
                block = device.hidden_read(args.id)
            if args.file:
                Path(args.file).write_bytes(block)
            else:
                sys.stdout.buffer.write(block)
                sys.stdout.flush()
                return EXIT_OK
        else:
            if not args.file:
                raise ValidationError("write needs --file", field_errors={"file": "missing"})
            block = Path(args.file).read_bytes()
            if len(block) > block_size:
                raise ValidationError(
                    f"Input is larger than one {block_size}-byte block",
                    field_errors={"file": str(len(block))},
                )
            block = block.ljust(block_size, b"\x00")
            if args.volume == "public":
                device.public_write(args.id, block)
            else:
                device.hidden_write(args.id, block)
                if device.ppm.mapped_count:
                    device.flush_hidden()
    emit_records(
        [CommandRecord(command="io", details={"volume": args.volume, "op": args.op, "id": args.id})]
    )
    return EXIT_OK


def cmd_bench(args: argparse.Namespace, settings: Settings) -> int:
    path = _require_device(args)
    spec = BenchSpec(
        workload=args.workload,
        operations=args.operations,
        public_write_fraction=args.public_writes,
        hidden_write_fraction=args.hidden_writes,
        hidden_read_fraction=args.hidden_reads,
        phi_policy=PhiPolicy(args.phi_policy),
        ratio=args.ratio,
        zipf_exponent=args.zipf or settings.zipf_exponent,
        seed=args.seed if args.seed is not None else settings.seed,
    )
    if args.sweep:
        reports = sweep(lambda: _mount(args, settings), spec)
    else:
        with _mount(args, settings) as device:
            reports = [run_bench(device, spec)]
    logger.debug(f"Bench reports for {path.name}: {len(reports)}")
    emit_records(reports)
    return EXIT_OK


def cmd_audit(args: argparse.Namespace, settings: Settings) -> int:
    _require_device(args)
    with _mount(args, settings) as device:
        report = run_audit(device)
    emit_records(report.checks)
    return EXIT_OK if report.passed else EXIT_CORRUPT


def cmd_attack(args: argparse.Namespace, settings: Settings) -> int:
    rng = _rng(args, settings)
    with tempfile.TemporaryDirectory() as workdir:
        device = _scratch_device(workdir, args, settings, rng, legacy_selection=args.legacy)
        try:
            report = bias_attack(device.oram, args.writes, rng.fork("attack"))
        finally:
            device.unmount()
    emit_records([report])
    return EXIT_OK


def cmd_game(args: argparse.Namespace, settings: Settings) -> int:
    rng = _rng(args, settings)
    distinguisher = get_distinguisher(args.distinguisher)
    with tempfile.TemporaryDirectory() as workdir:
        device = _scratch_device(workdir, args, settings, rng)
        try:
            first, second = paired_patterns(device, rng.fork("patterns"), args.public_writes)
            result = run_game(
                device,
                first,
                second,
                args.rounds or settings.game_rounds,
                distinguisher,
                rng.fork("coins"),
                granularity=args.granularity,
            )
        finally:
            device.unmount()
    emit_records([result])
    return EXIT_OK


def cmd_battery(args: argparse.Namespace, settings: Settings) -> int:
    records = run_battery(
        scale=args.scale,
        seed=args.seed if args.seed is not None else settings.seed,
        alpha=args.alpha or settings.alpha,
        config=settings.mode_config(),
    )
    emit_records(records)
    print(summarize(records), file=sys.stderr)
    return EXIT_OK if all(record.passed for record in records) else EXIT_FAILED


# --- parser ---


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="datalair", description="DataLair deniable block device")
    parser.add_argument("--device", help="Device image path")
    parser.add_argument("--seed", type=int, default=None, help="Deterministic randomness seed")
    sub = parser.add_subparsers(dest="command", required=True)

    init = sub.add_parser("init", help="Format a device")
    init.add_argument("--blocks", type=int, default=None, help="Data blocks (N)")
    init.add_argument("--block-size", type=int, default=None)
    init.add_argument("--layout", choices=[layout.value for layout in Layout], default="full")
    init.add_argument("--public-blocks", type=int, default=None)
    init.set_defaults(handler=cmd_init)

    for name in ("mount", "unmount"):
        lifecycle = sub.add_parser(name, help=f"{name.capitalize()} a device and report its status")
        lifecycle.set_defaults(handler=cmd_mount)

    io = sub.add_parser("io", help="Read or write one block")
    io.add_argument("volume", choices=["public", "hidden"])
    io.add_argument("op", choices=["read", "write"])
    io.add_argument("id", type=int)
    io.add_argument("--file", help="Block source (write) or destination (read)")
    io.set_defaults(handler=cmd_io)

    bench = sub.add_parser("bench", help="Run a benchmark workload")
    bench.add_argument("--workload", choices=["sequential", "random", "zipfian"], default="random")
    bench.add_argument("--operations", type=int, default=1000)
    bench.add_argument("--public-writes", type=float, default=0.5)
    bench.add_argument("--hidden-writes", type=float, default=0.0)
    bench.add_argument("--hidden-reads", type=float, default=0.0)
    bench.add_argument("--phi-policy", choices=[p.value for p in PhiPolicy], default="every_write")
    bench.add_argument("--ratio", type=int, default=1)
    bench.add_argument("--zipf", type=float, default=None)
    bench.add_argument("--sweep", action="store_true", help="Sweep ratios 1..10")
    bench.set_defaults(handler=cmd_bench)

    audit = sub.add_parser("audit", help="Check structural invariants")
    audit.set_defaults(handler=cmd_audit)

    attack = sub.add_parser("attack", help="Free-block bias attack on a scratch device")
    attack.add_argument("--blocks", type=int, default=256)
    attack.add_argument("--block-size", type=int, default=512)
    attack.add_argument("--writes", type=int, default=1000)
    attack.add_argument("--legacy", action="store_true", help="Use the biased selection protocol")
    attack.set_defaults(handler=cmd_attack)

    game = sub.add_parser("game", help="PD-CPA game on a scratch device")
    game.add_argument("--blocks", type=int, default=256)
    game.add_argument("--block-size", type=int, default=512)
    game.add_argument("--rounds", type=int, default=None)
    game.add_argument("--public-writes", type=int, default=4)
    game.add_argument("--distinguisher", default="frequency")
    game.add_argument("--granularity", choices=["round", "operation"], default="round")
    game.set_defaults(handler=cmd_game)

    battery = sub.add_parser("battery", help="Run the statistical test battery")
    battery.add_argument("--scale", choices=["quick", "full"], default="quick")
    battery.add_argument("--alpha", type=float, default=None)
    battery.set_defaults(handler=cmd_battery)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = get_settings()
        setup_logging(settings)
        return args.handler(args, settings)
    except Exception as exc:
        return handle_exception(exc)


if __name__ == "__main__":
    sys.exit(main())
