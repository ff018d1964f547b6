"""Command line front end.

Exit codes: 0 ok, 1 usage, 2 authentication, 3 format/corruption,
4 I/O, 5 audit failure.
"""

import argparse
import getpass
import json
import os
import sys

from . import analysis, device as dev, keystore
from .errors import (
    AddressingError,
    AuthenticationError,
    CampaignFailure,
    ConfigurationError,
    ContractError,
    FormatError,
)
from .kdf import INDEX_BITS, MAX_DEK_LENGTH, MIN_DEK_LENGTH, RTEK_LENGTH, check_input_space
from .layout import derive_geometry

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_AUTH = 2
EXIT_FORMAT = 3
EXIT_IO = 4
EXIT_AUDIT = 5

PASSPHRASE_ENV = "SDMS_PASSPHRASE"
NEW_PASSPHRASE_ENV = "SDMS_NEW_PASSPHRASE"


class UsageError(Exception):
    pass


def _read_fd_line(fd):
    with os.fdopen(fd, "r", closefd=False) as f:
        line = f.readline()
    return line.rstrip("\r\n")


def get_passphrase(fd=None, env=PASSPHRASE_ENV, prompt="Passphrase: ", confirm=False):
    """Resolve a passphrase from a file descriptor, the environment, or a prompt."""
    if fd is not None:
        value = _read_fd_line(fd)
    elif os.environ.get(env):
        value = os.environ[env]
    else:
        value = getpass.getpass(prompt)
        if confirm and getpass.getpass("Repeat " + prompt.lower()) != value:
            raise UsageError("passphrases do not match")
    if not value:
        raise UsageError("empty passphrase")
    return value


def _emit(args, data, text):
    if args.json:
        print(json.dumps(data, indent=2, sort_keys=True))
    else:
        print(text)


def _cost_report(header):
    return analysis.AttackCostReport.for_config(
        dek_bits=header.dek_length * 8,
        rtek_bits=RTEK_LENGTH * 8,
        index_bits=INDEX_BITS,
        seed_bits=header.seed_size * 8,
    )


def _describe(header, path):
    g = header.geometry()
    data = {
        "path": os.fspath(path),
        "version": header.version,
        "sector_size": g.sector_size,
        "seed_size": g.seed_size,
        "sa_sectors_per_block": g.sa_sectors_per_block,
        "da_sectors_per_block": g.da_sectors_per_block,
        "total_data_sectors": g.total_data_sectors,
        "block_count": g.block_count,
        "container_size": dev.HEADER_SIZE + g.data_area_size,
        "dek_bits": header.dek_length * 8,
        "ea": "aes-256-xts" if header.ea_id == dev.EA_AES256_XTS else header.ea_id,
        "kdf": "sdms-dkf1" if header.kdf_id == dev.KDF_SDMS_DKF1 else header.kdf_id,
        "keystore": "external" if header.keystore_mode == dev.KEYSTORE_EXTERNAL else "embedded",
    }
    if header.keystore_mode == dev.KEYSTORE_EMBEDDED:
        data["kdf_iterations"] = header.wrapped_dek().kdf_iterations
    else:
        data["keyfile_fingerprint"] = header.wrapped_dek_or_fingerprint.hex()
    cost = _cost_report(header)
    data.update(cost.to_dict())
    lines = [f"{data['path']}: SDMS container v{header.version}"]
    lines += [
        f"  sector size:          {g.sector_size}",
        f"  seed size:            {g.seed_size}",
        f"  SA sectors per block: {g.sa_sectors_per_block}",
        f"  {g.da_sectors_per_block} data sectors per block",
        f"  data sectors:         {g.total_data_sectors} in {g.block_count} blocks",
        f"  container size:       {data['container_size']} bytes",
        f"  DEK:                  {data['dek_bits']} bits, {data['keystore']} keystore",
        f"  cipher / kdf:         {data['ea']} / {data['kdf']}",
    ]
    lines += ["attack cost:"] + ["  " + line for line in cost.to_text().splitlines()]
    return data, "\n".join(lines)


def _open(args, writable=True):
    passphrase = get_passphrase(args.passphrase_fd)
    return dev.open_container(args.path, passphrase, keyfile=args.keyfile, writable=writable)


def cmd_init(args):
    if args.dek_bits % 8:
        raise UsageError("--dek-bits must be a multiple of 8")
    # validate before asking for a passphrase
    derive_geometry(args.sector_size, args.seed_size, args.sa_sectors, args.sectors)
    if not MIN_DEK_LENGTH <= args.dek_bits // 8 <= MAX_DEK_LENGTH:
        raise ConfigurationError(
            f"--dek-bits must be between {MIN_DEK_LENGTH * 8} and {MAX_DEK_LENGTH * 8}"
        )
    check_input_space(args.dek_bits // 8, args.seed_size)
    passphrase = get_passphrase(args.passphrase_fd, confirm=True)
    with dev.init_container(
        args.path,
        passphrase,
        total_data_sectors=args.sectors,
        sector_size=args.sector_size,
        seed_size=args.seed_size,
        sa_sectors_per_block=args.sa_sectors,
        dek_length=args.dek_bits // 8,
        kdf_iterations=args.kdf_iterations,
        keyfile=args.keyfile,
        overwrite=args.force,
    ) as d:
        data, text = _describe(d.header, args.path)
    _emit(args, data, "created " + text)
    return EXIT_OK


def cmd_info(args):
    header = dev.read_header(args.path)
    data, text = _describe(header, args.path)
    _emit(args, data, text)
    return EXIT_OK


def _binary_out(path):
    if path in (None, "-"):
        return os.fdopen(os.dup(sys.stdout.fileno()), "wb")
    return open(path, "wb")


def _binary_in(path):
    if path in (None, "-"):
        return os.fdopen(os.dup(sys.stdin.fileno()), "rb")
    return open(path, "rb")


def cmd_read(args):
    with _open(args, writable=False) as d:
        data = d.read_sector(args.sector)
    with _binary_out(args.out) as f:
        f.write(data)
    return EXIT_OK


def cmd_write(args):
    with _binary_in(args.input) as f:
        payload = f.read()
    with _open(args) as d:
        if len(payload) != d.sector_size:
            if not (args.pad and len(payload) < d.sector_size):
                raise UsageError(
                    f"input is {len(payload)} bytes, sector is {d.sector_size} (use --pad to zero-fill)"
                )
            payload = payload.ljust(d.sector_size, b"\0")
        d.write_sector(args.sector, payload)
    return EXIT_OK


def cmd_import(args):
    with _binary_in(args.input) as f, _open(args) as d:
        n = d.import_raw(f, start=args.start)
    print(f"imported {n} sectors", file=sys.stderr)
    return EXIT_OK


def cmd_export(args):
    with _open(args, writable=False) as d, _binary_out(args.out) as f:
        n = d.export_raw(f, start=args.start, count=args.count)
    print(f"exported {n} sectors", file=sys.stderr)
    return EXIT_OK


def cmd_passwd(args):
    old = get_passphrase(args.passphrase_fd, prompt="Current passphrase: ")
    with dev.open_container(args.path, old, keyfile=args.keyfile) as d:
        new = get_passphrase(
            args.new_passphrase_fd, env=NEW_PASSPHRASE_ENV, prompt="New passphrase: ", confirm=True
        )
        d.change_passphrase(old, new, keyfile=args.keyfile)
    print("passphrase changed", file=sys.stderr)
    return EXIT_OK


def cmd_audit(args):
    results = {}
    lines = []
    ok = True
    with _open(args) as d:
        scratch = d.total_sectors - 1
        saved = d.read_sector(scratch)
        try:
            report = analysis.run_temporal_campaign(d, scratch, args.trials)
        except CampaignFailure as e:
            report, ok = e.report, False
        finally:
            d.write_sector(scratch, saved)
        results["temporal"] = report.to_dict()
        lines.append(report.to_text())

        try:
            report = analysis.run_spatial_campaign(d.dek, args.samples, seed_size=d.geometry.seed_size)
        except CampaignFailure as e:
            report, ok = e.report, False
        results["spatial"] = report.to_dict()
        lines.append(report.to_text())

        report = analysis.seed_entropy_scan(d)
        ok = ok and report.passed
        results["seed_scan"] = report.to_dict()
        lines.append(report.to_text())
        results["attack_cost"] = _cost_report(d.header).to_dict()
    results["passed"] = ok
    lines.append("audit " + ("PASSED" if ok else "FAILED"))
    _emit(args, results, "\n".join(lines))
    return EXIT_OK if ok else EXIT_AUDIT


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument(
        "--passphrase-fd", type=int, metavar="FD",
        help=f"read the passphrase from this descriptor (else ${PASSPHRASE_ENV}, else prompt)",
    )
    common.add_argument("--keyfile", help="external keyfile holding the wrapped DEK")

    parser = argparse.ArgumentParser(
        prog="sdms", description="Encrypted virtual disk with per-write sector keys."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", parents=[common], help="create a container")
    p.add_argument("path")
    p.add_argument("--sectors", type=int, required=True)
    p.add_argument("--sector-size", type=int, default=512)
    p.add_argument("--seed-size", type=int, default=16)
    p.add_argument("--dek-bits", type=int, default=2048)
    p.add_argument("--sa-sectors", type=int, default=1)
    p.add_argument("--kdf-iterations", type=int, default=keystore.DEFAULT_ITERATIONS)
    p.add_argument("--force", action="store_true", help="overwrite an existing file")
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("info", parents=[common], help="show header and cost figures")
    p.add_argument("path")
    p.set_defaults(func=cmd_info)

    p = sub.add_parser("read", parents=[common], help="decrypt one sector")
    p.add_argument("path")
    p.add_argument("--sector", type=int, required=True)
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_read)

    p = sub.add_parser("write", parents=[common], help="encrypt one sector")
    p.add_argument("path")
    p.add_argument("--sector", type=int, required=True)
    p.add_argument("--in", dest="input", help="input file (default stdin)")
    p.add_argument("--pad", action="store_true", help="zero-pad short input")
    p.set_defaults(func=cmd_write)

    p = sub.add_parser("import", parents=[common], help="stream plaintext into sectors")
    p.add_argument("path")
    p.add_argument("--in", dest="input", help="input file (default stdin)")
    p.add_argument("--start", type=int, default=0)
    p.set_defaults(func=cmd_import)

    p = sub.add_parser("export", parents=[common], help="stream sectors out as plaintext")
    p.add_argument("path")
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--count", type=int)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("passwd", parents=[common], help="change the passphrase")
    p.add_argument("path")
    p.add_argument("--new-passphrase-fd", type=int, metavar="FD")
    p.set_defaults(func=cmd_passwd)

    p = sub.add_parser("audit", parents=[common], help="run the security property campaigns")
    p.add_argument("path")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--samples", type=int, default=1000)
    p.set_defaults(func=cmd_audit)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except AuthenticationError as e:
        print(f"sdms: {e}", file=sys.stderr)
        return EXIT_AUTH
    except FormatError as e:
        print(f"sdms: {e}", file=sys.stderr)
        return EXIT_FORMAT
    except (UsageError, ConfigurationError, ContractError, AddressingError) as e:
        print(f"sdms: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"sdms: {e}", file=sys.stderr)
        return EXIT_IO
    except KeyboardInterrupt:
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
