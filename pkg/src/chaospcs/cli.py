"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data or format error, 3 decode did
not converge (the partial output is still written). Errors are reported as
a single ``chaospcs: error: code=<n> kind=<type> msg=<text>`` line on stderr.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import harness
from .chaos import DEFAULT_BURN_IN
from .errors import ChaosPCSError
from .imaging import psnr, read_pgm, test_image, write_pgm
from .pipeline import EncodeProfile, KeyBundle, decode, encode, keygen
from .recover import SolverConfig
from .sense import DEFAULT_DISTANCE, Ciphertext

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NONCONVERGED = 0, 1, 2, 3
DEFAULT_CRS = (0.2, 0.3, 0.4, 0.5, 0.6, 0.8)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _diag(code: int, kind: str, msg: str) -> None:
    msg = " ".join(str(msg).split())
    print(f"chaospcs: error: code={code} kind={kind} msg={msg}", file=sys.stderr)


# -- argument helpers ------------------------------------------------------------

def _cr(text: str) -> float:
    v = float(text)
    if not 0.0 < v <= 1.0:
        raise argparse.ArgumentTypeError(f"compression ratio must lie in (0, 1], got {text}")
    return v


def _cr_list(text: str) -> list[float]:
    return [_cr(t) for t in text.split(",") if t.strip()]


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text}")
    return v


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return v


def _seed_hex(text: str) -> bytes:
    if len(text) != 64:
        raise argparse.ArgumentTypeError("--seed-hex needs exactly 64 hex characters")
    try:
        return bytes.fromhex(text)
    except ValueError:
        raise argparse.ArgumentTypeError("--seed-hex is not valid hexadecimal") from None


def _add_key_params(p, key_required=True):
    p.add_argument("--key", required=key_required, help="four-line key file")
    p.add_argument("--d", type=_positive_int, default=DEFAULT_DISTANCE, help="sampling distance (default 15)")
    p.add_argument("--burn-in", type=_nonneg_int, default=DEFAULT_BURN_IN, help="discarded iterates (default 1000)")


def _add_codec_params(p):
    p.add_argument("--s", type=_positive_int, default=None, help="keep the s largest DCT coefficients")
    p.add_argument("--no-permute", action="store_true", help="skip the keyed permutation (baseline mode)")


def _add_threads(p):
    p.add_argument("--threads", type=_positive_int, default=None, help="decode parallelism (default: all cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="chaospcs", description="Chaotic parallel compressive sensing codec and experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("keygen", help="derive a key file from 32 bytes of entropy")
    p.add_argument("--seed-hex", type=_seed_hex, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("encode", help="image -> ciphertext")
    p.add_argument("--in", dest="inp", help="P5 PGM image (default: built-in test image)")
    p.add_argument("--out", required=True)
    p.add_argument("--cr", type=_cr, required=True)
    _add_key_params(p)
    _add_codec_params(p)

    p = sub.add_parser("decode", help="ciphertext -> image")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ref", help="reference image for a PSNR report; 'builtin' for the test image")
    p.add_argument("--no-permute", action="store_true")
    p.add_argument("--max-iterations", type=_positive_int, default=SolverConfig.max_iterations)
    _add_key_params(p)
    _add_threads(p)

    p = sub.add_parser("attack", help="apply channel noise or cropping to a ciphertext")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--attack", choices=("awgn", "crop"), required=True)
    p.add_argument("--variance", type=float, default=1.0)
    p.add_argument("--fraction", type=float, default=1 / 8)
    p.add_argument("--seed", type=_u64, default=0)

    p = sub.add_parser("sweep", help="PSNR versus compression ratio, or the full six-setting table")
    p.add_argument("--in", dest="inp")
    p.add_argument("--out", required=True)
    p.add_argument("--crs", type=_cr_list, default=list(DEFAULT_CRS))
    p.add_argument("--attack", choices=("awgn", "crop"))
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--table", action="store_true", help="run all six settings and the difference rows")
    _add_key_params(p)
    _add_codec_params(p)
    _add_threads(p)

    p = sub.add_parser("sensitivity", help="decode with each key component perturbed")
    p.add_argument("--in", dest="inp")
    p.add_argument("--out", required=True)
    p.add_argument("--cr", type=_cr, default=0.2)
    p.add_argument("--perturbation", type=float, default=1e-16)
    _add_key_params(p)
    p.add_argument("--s", type=_positive_int, default=None)
    _add_threads(p)

    p = sub.add_parser("secrecy", help="ciphertext statistics against plaintext power")
    p.add_argument("--out", required=True)
    p.add_argument("--cr", type=_cr, default=0.5)
    p.add_argument("--levels", type=_positive_int, default=5)
    p.add_argument("--size", type=_positive_int, default=64)
    p.add_argument("--seed", type=_u64, default=0)
    _add_key_params(p)
    p.add_argument("--no-permute", action="store_true")

    p = sub.add_parser("acceptability", help="Monte-Carlo rate of sparsity-reducing permutations")
    p.add_argument("--M", type=_positive_int, default=32)
    p.add_argument("--N", type=_positive_int, default=8)
    p.add_argument("--s", type=_nonneg_int, default=16)
    p.add_argument("--trials", type=_positive_int, default=10_000)
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--uniform", action="store_true", help="spread the nonzeros evenly instead of packing them")
    p.add_argument("--out")
    return parser


# -- commands --------------------------------------------------------------------

def _check_inputs(*paths) -> None:
    for path in paths:
        if path is not None and not Path(path).is_file():
            raise FileNotFoundError(f"input file not found: {path}")


def _check_outputs(*paths) -> None:
    for path in paths:
        if path is not None:
            parent = Path(path).resolve().parent
            if not parent.is_dir():
                raise FileNotFoundError(f"output directory does not exist: {parent}")


def _image(path):
    return test_image() if path is None else read_pgm(path)


def _keys(args, d=None) -> KeyBundle:
    return KeyBundle.load(args.key, d=args.d if d is None else d, burn_in=args.burn_in)


def _cmd_keygen(args) -> int:
    _check_outputs(args.out)
    bundle = keygen(args.seed_hex)
    bundle.save(args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_encode(args) -> int:
    _check_inputs(args.inp, args.key)
    _check_outputs(args.out)
    img = _image(args.inp)
    keys = _keys(args)
    ct = encode(img, keys, EncodeProfile(args.cr, args.s, permute=not args.no_permute))
    ct.save(args.out)
    print(f"K={ct.K} M={ct.M} N={ct.N} d={ct.d} wrote {args.out}")
    return EXIT_OK


def _cmd_decode(args) -> int:
    ref_path = None if args.ref in (None, "builtin") else args.ref
    _check_inputs(args.inp, args.key, ref_path)
    _check_outputs(args.out)
    ct = Ciphertext.load(args.inp)
    keys = _keys(args, d=ct.d)
    ref = None
    if args.ref == "builtin":
        ref = test_image(ct.M, ct.N)
    elif ref_path is not None:
        ref = read_pgm(ref_path)
    cfg = SolverConfig(max_iterations=args.max_iterations)
    # the profile's cr and s play no part in decoding
    out = decode(ct, keys, EncodeProfile(1.0, permute=not args.no_permute), cfg, args.threads)
    write_pgm(args.out, out.output)
    line = f"wrote {args.out} {out.reconstruction.summary()}"
    if ref is not None:
        line += f" psnr_db={psnr(ref, out.output):.4f}"
    print(line)
    if not out.converged:
        _diag(EXIT_NONCONVERGED, "NonConvergence", out.reconstruction.summary())
        return EXIT_NONCONVERGED
    return EXIT_OK


def _cmd_attack(args) -> int:
    _check_inputs(args.inp)
    _check_outputs(args.out)
    ct = Ciphertext.load(args.inp)
    spec = harness.AttackSpec(args.attack, args.variance, args.fraction, args.seed)
    spec.apply(ct).save(args.out)
    print(f"{spec.describe(ct)} wrote {args.out}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    _check_inputs(args.inp, args.key)
    _check_outputs(args.out)
    img = _image(args.inp)
    keys = _keys(args)
    if args.table:
        report = harness.psnr_table(img, keys, args.crs, s=args.s, noise_seed=args.seed, threads=args.threads)
    else:
        attack = harness.AttackSpec(args.attack, noise_seed=args.seed) if args.attack else None
        report = harness.cr_sweep(img, keys, args.crs, not args.no_permute, attack, s=args.s, threads=args.threads)
    report.save(args.out)
    sys.stdout.write(report.to_csv())
    return EXIT_OK


def _cmd_sensitivity(args) -> int:
    _check_inputs(args.inp, args.key)
    _check_outputs(args.out)
    img = _image(args.inp)
    report = harness.key_sensitivity_suite(img, _keys(args), args.perturbation, cr=args.cr, s=args.s,
                                           threads=args.threads)
    report.save(args.out)
    sys.stdout.write(report.to_csv())
    return EXIT_OK


def _cmd_secrecy(args) -> int:
    _check_inputs(args.key)
    _check_outputs(args.out)
    rng = np.random.default_rng(args.seed)
    base = rng.normal(size=(args.size, args.size))
    scales = np.arange(1, args.levels + 1, dtype=np.float64)
    labels = [f"scale={v:g}" for v in scales]
    report = harness.secrecy_statistics([v * base for v in scales], _keys(args),
                                        EncodeProfile(args.cr, permute=not args.no_permute), labels)
    report.save(args.out)
    sys.stdout.write(report.to_csv())
    return EXIT_OK


def _cmd_acceptability(args) -> int:
    _check_outputs(args.out)
    emp, formula = harness.acceptability_montecarlo(args.M, args.N, args.s, args.trials, args.seed, args.uniform)
    report = harness.ExperimentReport(["M", "N", "s", "trials", "empirical", "formula"])
    report.add(M=args.M, N=args.N, s=args.s, trials=args.trials, empirical=emp, formula=formula)
    if args.out:
        report.save(args.out)
    sys.stdout.write(report.to_csv())
    return EXIT_OK


_COMMANDS = {
    "keygen": _cmd_keygen, "encode": _cmd_encode, "decode": _cmd_decode, "attack": _cmd_attack,
    "sweep": _cmd_sweep, "sensitivity": _cmd_sensitivity, "secrecy": _cmd_secrecy,
    "acceptability": _cmd_acceptability,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        _diag(EXIT_USAGE, "UsageError", exc)
        return EXIT_USAGE
    except SystemExit as exc:
        # --help exits 0 through argparse
        return int(exc.code or 0)
    if getattr(args, "threads", None) is None and hasattr(args, "threads"):
        args.threads = os.cpu_count() or 1
    try:
        return _COMMANDS[args.command](args)
    except (ChaosPCSError, OSError, ValueError, KeyError) as exc:
        _diag(EXIT_DATA, type(exc).__name__, exc)
        return EXIT_DATA


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
