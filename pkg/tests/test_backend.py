import os
import subprocess
import sys

import pytest

from frag_avalanche.montecarlo import compiled_available

PROBE = "from frag_avalanche.montecarlo import BACKEND; print(BACKEND)"


def _probe(value):
    env = dict(os.environ)
    env["FRAG_AVALANCHE_BACKEND"] = value
    return subprocess.run([sys.executable, "-c", PROBE], capture_output=True, text=True, env=env)


def test_python_backend_forced():
    proc = _probe("python")
    assert proc.returncode == 0 and proc.stdout.strip() == "python"


def test_auto_prefers_compiled():
    proc = _probe("auto")
    assert proc.stdout.strip() == ("compiled" if compiled_available() else "python")


@pytest.mark.skipif(not compiled_available(), reason="compiled kernels not built")
def test_compiled_backend_forced():
    assert _probe("compiled").stdout.strip() == "compiled"


def test_unknown_backend_rejected():
    proc = _probe("gpu")
    assert proc.returncode != 0 and "FRAG_AVALANCHE_BACKEND" in proc.stderr


@pytest.mark.skipif(not compiled_available(), reason="compiled kernels not built")
def test_benchmark_smoke(tmp_path):
    script = os.path.join(os.path.dirname(__file__), os.pardir, "benchmarks", "bench_backends.py")
    out = tmp_path / "bench.json"
    proc = subprocess.run([sys.executable, script, "--replicas", "20", "--repeat", "1", "--json", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "identical" in proc.stdout and out.exists()
