import subprocess
import sys

import pytest


def run_toolkit(argv):
    """Invoke the dataset toolkit CLI (the external interface this package
    consumes)."""
    proc = subprocess.run([sys.executable, "-m", "demforge.cli"] + [str(a) for a in argv],
                          capture_output=True, text=True)
    return proc


@pytest.fixture(scope="session")
def small_split(tmp_path_factory):
    out = tmp_path_factory.mktemp("data") / "split"
    proc = run_toolkit(["synth", "--terrain", "boxes", "--count", "6",
                        "--seed", "42", "--split", "test", "--out", out])
    assert proc.returncode == 0, proc.stderr
    return out


@pytest.fixture(scope="session")
def selfsup_split(tmp_path_factory, small_split):
    out = tmp_path_factory.mktemp("data") / "ss"
    proc = run_toolkit(["selfsup", "--in", small_split / "manifest.jsonl",
                        "--seed", "7", "--out", out])
    assert proc.returncode == 0, proc.stderr
    return out
