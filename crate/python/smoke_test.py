"""Smoke test for the pysemeq extension module.

Build and run from the repository root:

    cargo build -p semeq-py --release --features extension-module
    cp target/release/libpysemeq.so python/pysemeq.so
    python3 python/smoke_test.py
"""

import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import pysemeq


def close(a, b, tol):
    return all(abs(x - y) <= tol for x, y in zip(a, b))


def main():
    assert pysemeq.count_params("linear", 9216) == 84_934_656
    assert pysemeq.count_params("mlp", 9216) == 169_887_745
    assert pysemeq.count_params("cnn1", 16) == 6_416
    assert pysemeq.count_params("cnn2", 16) == 12_833

    data = pysemeq.generate_mismatch("general-linear", 8, 6, 64, 16, data_seed=1)
    lin = pysemeq.LinearEqualizer.fit(data["x"], data["y"])
    for x, y in zip(data["x_eval"], data["y_eval"]):
        assert close(lin.apply(x), y, 1e-6)
    assert len(lin.matrix) == 6 and len(lin.matrix[0]) == 8

    same = pysemeq.generate_mismatch("orthogonal", 8, 8, 32, 4, data_seed=2)
    pfe = pysemeq.PfeEqualizer(same["x"], same["x"])
    x = same["x_eval"][0]
    c = pfe.analyze(x)
    assert pfe.frame_size == 32
    assert abs(sum(v * v for v in c) - sum(v * v for v in x)) < 1e-9
    assert close(pfe.synthesize(c), x, 1e-8)

    received, h = pysemeq.transmit([1.0, 2.0, 3.0, 4.0])
    assert received == [1.0, 2.0, 3.0, 4.0] and h == (1.0, 0.0)
    noisy, _ = pysemeq.transmit([1.0, 0.0], snr_db=0.0, seed=3)
    assert noisy != [1.0, 0.0]

    assert pysemeq.mse([0.0, 0.0], [2.0, 0.0]) == 2.0
    assert abs(pysemeq.psnr([0.0], [0.1]) - 20.0) < 1e-9
    assert pysemeq.psnr([0.5], [0.5]) == 100.0

    mlp = pysemeq.NeuralEqualizer.train("mlp", data["x"], data["y"], max_epochs=3)
    assert mlp.arch == "mlp" and mlp.param_count == pysemeq.count_params("mlp", 8, 6)
    assert len(mlp.forward(data["x_eval"][0])) == 6

    try:
        pysemeq.LinearEqualizer.fit([[1.0, 2.0]], [[1.0], [2.0]])
    except ValueError:
        pass
    else:
        raise AssertionError("mismatched pilot rows accepted")

    csv = pysemeq.run_sweep(
        "scenario = mismatch\nfamily = orthogonal\nd = 8\nequalizer = linear\n"
        "pilots = 16\nseed = 1\neval_count = 20\nsnr_align = inf\n"
    )
    lines = csv.strip().splitlines()
    assert lines[0].startswith("equalizer,") and len(lines) == 3
    assert float(lines[1].split(",")[6]) > 99.0 and not math.isnan(float(lines[2].split(",")[7]))

    print("pysemeq smoke test passed")


if __name__ == "__main__":
    main()
