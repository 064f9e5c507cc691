import os
import subprocess
import sys

import numpy as np
import pytest

from chaospcs.cli import run
from chaospcs.imaging import psnr, read_pgm, write_pgm
from chaospcs.imaging import test_image as make_image
from chaospcs.pipeline import KeyBundle

SEED = "00" * 31 + "2a"


@pytest.fixture
def keyfile(tmp_path):
    path = tmp_path / "key.txt"
    assert run(["keygen", "--seed-hex", SEED, "--out", str(path)]) == 0
    return path


def last_error(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    return err[-1]


def test_keygen_writes_four_lines(keyfile):
    lines = keyfile.read_text().splitlines()
    assert [ln.split("=")[0] for ln in lines] == ["mu", "z0", "mu_prime", "z0_prime"]
    KeyBundle.load(keyfile)


@pytest.mark.parametrize("hexseed", ["abc", "zz" * 32])
def test_keygen_bad_seed_is_usage_error(tmp_path, capsys, hexseed):
    assert run(["keygen", "--seed-hex", hexseed, "--out", str(tmp_path / "k")]) == 1
    assert last_error(capsys).startswith("chaospcs: error: code=1 kind=UsageError")


def test_unknown_flag_prints_usage(capsys):
    assert run(["encode", "--bogus"]) == 1
    err = capsys.readouterr().err
    assert "usage: chaospcs encode" in err
    assert err.strip().splitlines()[-1].startswith("chaospcs: error: code=1")


def test_no_command_is_usage_error():
    assert run([]) == 1


def test_help_exits_zero(capsys):
    assert run(["--help"]) == 0
    assert "keygen" in capsys.readouterr().out


def test_encode_decode_pgm(tmp_path, keyfile, capsys):
    img = tmp_path / "img.pgm"
    write_pgm(img, make_image())
    ct, rec = tmp_path / "ct.scs", tmp_path / "rec.pgm"
    assert run(["encode", "--in", str(img), "--key", str(keyfile), "--cr", "0.4", "--s", "2048",
                "--out", str(ct)]) == 0
    assert run(["decode", "--in", str(ct), "--key", str(keyfile), "--out", str(rec), "--ref", str(img)]) == 0
    out = capsys.readouterr().out
    assert rec.exists()
    reported = float(out.split("psnr_db=")[1].split()[0])
    assert reported == pytest.approx(psnr(read_pgm(img), read_pgm(rec)), abs=0.1)


def test_round_trip_and_altered_key(tmp_path, keyfile):
    ct, rec, bad_rec = tmp_path / "ct.scs", tmp_path / "rec.pgm", tmp_path / "bad.pgm"
    assert run(["encode", "--key", str(keyfile), "--cr", "0.6", "--s", "2048", "--out", str(ct)]) == 0
    assert run(["decode", "--in", str(ct), "--key", str(keyfile), "--out", str(rec)]) == 0
    assert psnr(make_image(), read_pgm(rec)) >= 30.0
    text = keyfile.read_text()
    pos = text.index("mu=") + 5  # second decimal digit of mu
    altered = text[:pos] + ("1" if text[pos] != "1" else "2") + text[pos + 1:]
    bad_key = tmp_path / "bad.txt"
    bad_key.write_text(altered)
    run(["decode", "--in", str(ct), "--key", str(bad_key), "--out", str(bad_rec)])
    assert psnr(make_image(), read_pgm(bad_rec)) < 15.0


def test_bitwise_deterministic_across_runs_and_threads(tmp_path, keyfile):
    # 300 columns span three solver blocks; BLAS threads are set per process
    img = tmp_path / "wide.pgm"
    write_pgm(img, make_image(64, 300))
    outs = []
    for threads in ("1", "8"):
        env = dict(os.environ, OMP_NUM_THREADS=threads, OPENBLAS_NUM_THREADS=threads, MKL_NUM_THREADS=threads)
        ct, rec = tmp_path / f"ct{threads}.scs", tmp_path / f"rec{threads}.pgm"
        for args in (["encode", "--in", str(img), "--key", str(keyfile), "--cr", "0.4", "--s", "2400",
                      "--out", str(ct)],
                     ["decode", "--in", str(ct), "--key", str(keyfile), "--out", str(rec), "--threads", threads]):
            proc = subprocess.run([sys.executable, "-m", "chaospcs", *args], env=env, capture_output=True)
            assert proc.returncode == 0, proc.stderr
        outs.append((ct.read_bytes(), rec.read_bytes()))
    assert outs[0] == outs[1]


def test_missing_input_is_data_error(tmp_path, keyfile, capsys):
    assert run(["decode", "--in", str(tmp_path / "nope"), "--key", str(keyfile), "--out", str(tmp_path / "o.pgm")]) == 2
    line = last_error(capsys)
    assert line.startswith("chaospcs: error: code=2 kind=FileNotFoundError")


def test_missing_output_dir_is_data_error(tmp_path, keyfile):
    assert run(["encode", "--key", str(keyfile), "--cr", "0.5", "--out", str(tmp_path / "no" / "c.scs")]) == 2


def test_corrupt_ciphertext_and_key(tmp_path, keyfile, capsys):
    bad = tmp_path / "bad.scs"
    bad.write_bytes(b"SCS1" + bytes(10))
    assert run(["decode", "--in", str(bad), "--key", str(keyfile), "--out", str(tmp_path / "o.pgm")]) == 2
    assert "kind=FormatError" in last_error(capsys)
    badkey = tmp_path / "k.txt"
    badkey.write_text("mu=0.5\n")
    assert run(["encode", "--key", str(badkey), "--cr", "0.5", "--out", str(tmp_path / "c.scs")]) == 2
    assert "kind=FormatError" in last_error(capsys)


def test_non_convergence_exit_code_keeps_output(tmp_path, keyfile, capsys):
    ct, rec = tmp_path / "ct.scs", tmp_path / "rec.pgm"
    assert run(["encode", "--key", str(keyfile), "--cr", "0.3", "--s", "2048", "--out", str(ct)]) == 0
    assert run(["decode", "--in", str(ct), "--key", str(keyfile), "--out", str(rec), "--max-iterations", "1"]) == 3
    assert rec.exists()
    assert "kind=NonConvergence" in last_error(capsys)


def test_attack_command(tmp_path, keyfile, capsys):
    ct, hit = tmp_path / "ct.scs", tmp_path / "hit.scs"
    run(["encode", "--key", str(keyfile), "--cr", "0.5", "--out", str(ct)])
    assert run(["attack", "--in", str(ct), "--out", str(hit), "--attack", "crop"]) == 0
    assert "crop 32x32" in capsys.readouterr().out
    assert run(["attack", "--in", str(ct), "--out", str(hit), "--attack", "awgn", "--seed", "9"]) == 0
    assert run(["attack", "--in", str(ct), "--out", str(hit), "--attack", "blur"]) == 1


def test_experiment_commands_write_csv(tmp_path, keyfile):
    img = tmp_path / "small.pgm"
    write_pgm(img, make_image(32, 32))
    out = tmp_path / "sweep.csv"
    assert run(["sweep", "--in", str(img), "--key", str(keyfile), "--crs", "0.5,1", "--s", "256",
                "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0].startswith("setting,cr,K,psnr_db")
    assert run(["sweep", "--in", str(img), "--key", str(keyfile), "--crs", "0.5", "--s", "256", "--table",
                "--out", str(out)]) == 0
    assert out.read_text().splitlines()[-1].startswith("G6-G5,difference,")
    assert run(["sensitivity", "--in", str(img), "--key", str(keyfile), "--cr", "0.5", "--s", "256",
                "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 6
    assert run(["secrecy", "--key", str(keyfile), "--size", "32", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[-1].startswith("fit,")
    assert run(["acceptability", "--M", "8", "--N", "4", "--s", "8", "--trials", "1000", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == "M,N,s,trials,empirical,formula"
    assert run(["sweep", "--key", str(keyfile), "--crs", "0,0.5", "--out", str(out)]) == 1


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "chaospcs", "keygen", "--seed-hex", SEED,
                           "--out", str(tmp_path / "k.txt")], capture_output=True, text=True)
    assert proc.returncode == 0
    proc = subprocess.run([sys.executable, "-m", "chaospcs", "decode"], capture_output=True, text=True)
    assert proc.returncode == 1
    assert proc.stderr.strip().splitlines()[-1].startswith("chaospcs: error: code=1")
